//! Long-range decay of the leading score term `S = Σᵢ ⟨qᵢ, kᵢ⟩ cos Aᵢ`.
//!
//! Distances are effective distances `D = ‖Δp‖ / 2`, the quantity the
//! rotation angle `Aᵢ = D·φᵢ` is linear in. For every `D` the curve averages
//! over all lattice displacements with `‖Δp‖ = 2D` and over seeded feature
//! draws. Keys share their query's features (`kᵢ = qᵢ`, unit length), which
//! is the smooth-similarity regime in which decay is expected; scores are
//! unscaled.

use serde::Serialize;

use crate::error::Result;
use crate::operator::{Mode, PhaseSchedule};
use crate::relative::{relative_rotation, Displacement};
use crate::rng;

use super::records::Table;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayRow {
    pub distance: usize,
    pub mean_abs_score: f64,
    pub std_abs_score: f64,
}

/// Integer displacements with `Δh² + Δw² = r²`, sorted.
pub fn lattice_shell(r: i64) -> Vec<Displacement> {
    let r2 = r * r;
    let mut out = Vec::new();
    for dh in -r..=r {
        let rest = r2 - dh * dh;
        let dw = (rest as f64).sqrt().round() as i64;
        if dw * dw == rest {
            out.push(Displacement::new(dh, dw));
            if dw != 0 {
                out.push(Displacement::new(dh, -dw));
            }
        }
    }
    out.sort_by_key(|d| (d.d_h, d.d_w));
    out
}

/// Unit sub-vector features for draw `index`, `d/3` blocks.
pub fn draw_features(seed: u64, index: u64, blocks: usize) -> Vec<f64> {
    rng::unit_subvectors(&mut rng::stream(seed, index), 3 * blocks, 3)
}

/// `Σᵢ ⟨qᵢ, kᵢ⟩ cos Aᵢ` for one displacement.
pub fn leading_term(q: &[f64], k: &[f64], angles: &[f64]) -> f64 {
    angles
        .iter()
        .enumerate()
        .map(|(b, a)| {
            let o = 3 * b;
            let c = q[o] * k[o] + q[o + 1] * k[o + 1] + q[o + 2] * k[o + 2];
            c * a.cos()
        })
        .sum()
}

pub fn decay_curve(schedule: &PhaseSchedule, dmax: usize, draws: usize, seed: u64) -> Result<Vec<DecayRow>> {
    let blocks = schedule.block_count(Mode::TwoD)?;
    let features: Vec<Vec<f64>> = (0..draws as u64).map(|r| draw_features(seed, r, blocks)).collect();
    let mut rows = Vec::with_capacity(dmax + 1);
    for distance in 0..=dmax {
        let shell = lattice_shell(2 * distance as i64);
        let mut scores = Vec::with_capacity(shell.len() * draws);
        for delta in &shell {
            let angles = (0..blocks)
                .map(|b| relative_rotation(delta, schedule.schedule_index(b), schedule).map(|e| e.angle))
                .collect::<Result<Vec<_>>>()?;
            for q in &features {
                scores.push(leading_term(q, q, &angles).abs());
            }
        }
        let n = scores.len() as f64;
        let mean = scores.iter().sum::<f64>() / n;
        let var = scores.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / n;
        rows.push(DecayRow { distance, mean_abs_score: mean, std_abs_score: var.sqrt() });
    }
    Ok(rows)
}

pub fn decay_table(rows: &[DecayRow]) -> Table {
    let mut t = Table::new(&["distance", "mean_abs_score", "std_abs_score"]);
    for r in rows {
        t.push(vec![r.distance.into(), r.mean_abs_score.into(), r.std_abs_score.into()]);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::ExponentSign;

    #[test]
    fn shells() {
        assert_eq!(lattice_shell(0), vec![Displacement::ZERO]);
        assert_eq!(lattice_shell(2).len(), 4);
        // 10² = 6² + 8² in eight ways plus the four axis points
        assert_eq!(lattice_shell(10).len(), 12);
        for d in lattice_shell(64) {
            assert_eq!(d.d_h * d.d_h + d.d_w * d.d_w, 4096);
        }
    }

    #[test]
    fn zero_distance_is_plain_similarity() {
        let s = PhaseSchedule::new(48);
        let rows = decay_curve(&s, 0, 5, 3).unwrap();
        assert!((rows[0].mean_abs_score - 16.0).abs() < 1e-12);
    }

    #[test]
    fn decays_under_both_signs() {
        for sign in [ExponentSign::Negative, ExponentSign::Positive] {
            let s = PhaseSchedule::new(48).with_sign(sign);
            let rows = decay_curve(&s, 32, 20, 0).unwrap();
            assert!(rows[32].mean_abs_score < rows[1].mean_abs_score, "{sign:?}");
        }
    }

    #[test]
    fn deterministic() {
        let s = PhaseSchedule::new(12);
        let a = decay_table(&decay_curve(&s, 4, 7, 11).unwrap()).to_csv_string();
        let b = decay_table(&decay_curve(&s, 4, 7, 11).unwrap()).to_csv_string();
        assert_eq!(a, b);
    }
}
