//! The property suite behind `geope verify`.
//!
//! Each property draws its samples from its own seeded stream, so adding a
//! property never shifts the inputs of another. The report holds no timings
//! and is byte-identical for a given configuration.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::attention::{self, AttentionConfig, PeMode};
use crate::error::Result;
use crate::lie::{exp_map, geometric_mean, geometric_mean_of_logs, log_map, mean_of_logs, LieVector};
use crate::operator::{
    build_1d, build_2d, build_3d, build_operator, rope_reference_1d, rotation_block, ExponentSign, GridPosition,
    GridShape, Mode,
};
use crate::quat::{axis_angle, hamilton_product, sandwich_rotate, to_rotation_matrix, Quaternion, UnitQuaternion, Vector3};
use crate::relative::{
    decompose_score, lie_vector_at, relative_rotation, rotated_inner_product, Displacement, DisplacementTable,
};
use crate::rng;

use super::decay::decay_curve;
use super::records::Table;
use super::RunConfig;

/// Outcome of one named property.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyResult {
    pub name: &'static str,
    pub samples: usize,
    pub max_error: f64,
    pub tolerance: f64,
    /// Pass requires `max_error < tolerance` instead of `≤`.
    pub strict: bool,
}

impl PropertyResult {
    pub fn passed(&self) -> bool {
        if self.max_error.is_nan() {
            return false;
        }
        if self.strict {
            self.max_error < self.tolerance
        } else {
            self.max_error <= self.tolerance
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct VerifyReport {
    pub properties: Vec<PropertyResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.properties.iter().all(PropertyResult::passed)
    }

    pub fn failures(&self) -> Vec<&PropertyResult> {
        self.properties.iter().filter(|p| !p.passed()).collect()
    }

    pub fn to_table(&self) -> Table {
        let mut t = Table::new(&["property", "samples", "max_error", "tolerance", "pass"]);
        for p in &self.properties {
            t.push(vec![p.name.into(), p.samples.into(), p.max_error.into(), p.tolerance.into(), p.passed().into()]);
        }
        t
    }
}

struct Probe {
    name: &'static str,
    samples: usize,
    max_error: f64,
    tolerance: f64,
    strict: bool,
}

impl Probe {
    fn new(name: &'static str, tolerance: f64) -> Self {
        Self { name, samples: 0, max_error: 0.0, tolerance, strict: false }
    }

    fn strict(mut self) -> Self {
        self.strict = true;
        self
    }

    fn observe(&mut self, err: f64) {
        self.samples += 1;
        if err.is_nan() || self.max_error.is_nan() {
            self.max_error = f64::NAN;
        } else {
            self.max_error = self.max_error.max(err);
        }
    }

    fn finish(self) -> PropertyResult {
        PropertyResult {
            name: self.name,
            samples: self.samples,
            max_error: self.max_error,
            tolerance: self.tolerance,
            strict: self.strict,
        }
    }
}

const SAMPLES: usize = 10_000;
const OPERATOR_SAMPLES: usize = 500;

fn vec3(r: &mut ChaCha8Rng) -> Vector3 {
    Vector3::new(rng::gaussian(r), rng::gaussian(r), rng::gaussian(r))
}

fn quat(r: &mut ChaCha8Rng) -> Quaternion {
    Quaternion::new(rng::gaussian(r), rng::gaussian(r), rng::gaussian(r), rng::gaussian(r))
}

fn unit_quat(r: &mut ChaCha8Rng) -> UnitQuaternion {
    UnitQuaternion::normalize(quat(r)).expect("gaussian draw is nonzero")
}

fn unit_vec(r: &mut ChaCha8Rng) -> Vector3 {
    let v = vec3(r);
    v.scale(1.0 / v.norm())
}

fn phase(r: &mut ChaCha8Rng, range: f64) -> f64 {
    rng::uniform(r, -range, range)
}

/// Runs every property under `config`'s seed and schedule.
pub fn run_suite(config: &RunConfig) -> Result<VerifyReport> {
    let seed = config.seed;
    let schedule = config.schedule;
    let mut stream_index = 0u64;
    let mut next = || {
        stream_index += 1;
        rng::stream(seed, stream_index)
    };
    let mut out = Vec::new();

    // quaternion algebra
    {
        let mut r = next();
        let mut assoc = Probe::new("quat.hamilton_associativity", 1e-12);
        let mut norm = Probe::new("quat.norm_multiplicative", 1e-12);
        let mut inv = Probe::new("quat.conjugate_involution", 0.0);
        for _ in 0..SAMPLES {
            let (a, b, c) = (quat(&mut r), quat(&mut r), quat(&mut r));
            let scale = a.norm() * b.norm() * c.norm();
            assoc.observe(((a * b) * c).max_abs_diff(&(a * (b * c))) / scale);
            norm.observe(((a * b).norm() - a.norm() * b.norm()).abs() / (a.norm() * b.norm()));
            inv.observe(a.conjugate().conjugate().max_abs_diff(&a));
        }
        out.extend([assoc.finish(), norm.finish(), inv.finish()]);
    }
    {
        let mut r = next();
        let mut iso = Probe::new("quat.sandwich_isometry", 1e-12);
        let mut pure = Probe::new("quat.sandwich_purity", 1e-12);
        let mut comp = Probe::new("quat.sandwich_composition", 1e-12);
        let mut mat = Probe::new("quat.matrix_agreement", 1e-12);
        let mut orth = Probe::new("quat.matrix_orthogonality", 1e-12);
        for _ in 0..SAMPLES {
            let (q1, q2, v) = (unit_quat(&mut r), unit_quat(&mut r), vec3(&mut r));
            let n = v.norm();
            let rotated = sandwich_rotate(&q1, &v);
            iso.observe((rotated.norm() - n).abs() / n);
            let p = hamilton_product(&hamilton_product(&q1.quaternion(), &v.to_pure_quaternion()), &q1.quaternion().conjugate());
            pure.observe(p.w.abs() / n);
            let twice = sandwich_rotate(&q2, &rotated);
            comp.observe(twice.max_abs_diff(&sandwich_rotate(&q2.compose(&q1), &v)) / n);
            let m = to_rotation_matrix(&q1);
            mat.observe(m.mul_vec(&v).max_abs_diff(&rotated) / n);
            orth.observe(m.orthogonality_error().max((m.determinant() - 1.0).abs()));
        }
        out.extend([iso.finish(), pure.finish(), comp.finish(), mat.finish(), orth.finish()]);
    }

    // log / exp and the log-average
    {
        let mut r = next();
        let mut unit = Probe::new("lie.exp_unit_norm", 1e-12);
        let mut trip = Probe::new("lie.log_exp_round_trip", 1e-12);
        for _ in 0..SAMPLES {
            let u = LieVector(Vector3::new(phase(&mut r, 3.0), phase(&mut r, 3.0), phase(&mut r, 3.0)));
            unit.observe((exp_map(&u).quaternion().norm() - 1.0).abs());
            let w = LieVector(unit_vec(&mut r).scale(rng::uniform(&mut r, 0.0, FRAC_PI_2 - 1e-6)));
            trip.observe(log_map(&exp_map(&w)).max_abs_diff(&w));
        }
        out.extend([unit.finish(), trip.finish()]);
    }
    {
        let mut r = next();
        let mut order = Probe::new("lie.mean_order_invariance", 0.0);
        let mut quarter = Probe::new("lie.mean_log_quarter_phases", 1e-15);
        let mut coupled = Probe::new("lie.mean_angle_coupled_phase", 1e-12);
        for _ in 0..SAMPLES {
            let qs = [unit_quat(&mut r), unit_quat(&mut r), unit_quat(&mut r)];
            let m = geometric_mean(&qs)?;
            let worst = [[2, 0, 1], [1, 2, 0], [2, 1, 0]]
                .iter()
                .map(|p| {
                    let mp = geometric_mean(&[qs[p[0]], qs[p[1]], qs[p[2]]]).expect("non-empty");
                    if mp == m {
                        0.0
                    } else {
                        mp.quaternion().max_abs_diff(&m.quaternion()).max(f64::MIN_POSITIVE)
                    }
                })
                .fold(0.0, f64::max);
            order.observe(worst);

            let (th, tw) = (phase(&mut r, PI), phase(&mut r, PI));
            let (rh, rw) = (axis_angle(&Vector3::Y, th)?, axis_angle(&Vector3::Z, tw)?);
            let mean = mean_of_logs(&[log_map(&rh), log_map(&rw)])?;
            quarter.observe(mean.max_abs_diff(&LieVector::new(0.0, th / 4.0, tw / 4.0)));
            let angle = geometric_mean(&[rh, rw])?.angle();
            coupled.observe((angle - 0.5 * (th * th + tw * tw).sqrt()).abs());
        }
        out.extend([order.finish(), quarter.finish(), coupled.finish()]);
    }

    // closed forms
    {
        let mut r = next();
        let mut two = Probe::new("operator.closed_form_2d", 1e-12);
        let mut three = Probe::new("operator.closed_form_3d", 1e-12);
        let mut principal = Probe::new("operator.closed_form_principal_branch", 1e-12);
        let mut explicit = Probe::new("operator.explicit_block_matrix", 1e-10);
        let mut swap = Probe::new("operator.axis_swap_mirror", 1e-15);
        let mut rope = Probe::new("operator.rope_degeneration", 1e-12);
        for n in 0..SAMPLES {
            let (td, th, tw) = (phase(&mut r, 20.0), phase(&mut r, 20.0), phase(&mut r, 20.0));
            let oracle2 = geometric_mean_of_logs(&[
                LieVector::from_axis_angle(&Vector3::Y, th),
                LieVector::from_axis_angle(&Vector3::Z, tw),
            ])?;
            two.observe(build_2d(th, tw).quaternion().max_abs_diff_up_to_sign(&oracle2.quaternion()));
            let oracle3 = geometric_mean_of_logs(&[
                LieVector::from_axis_angle(&Vector3::X, td),
                LieVector::from_axis_angle(&Vector3::Y, th),
                LieVector::from_axis_angle(&Vector3::Z, tw),
            ])?;
            three.observe(build_3d(td, th, tw).quaternion().max_abs_diff_up_to_sign(&oracle3.quaternion()));

            let (ph, pw) = (phase(&mut r, PI), phase(&mut r, PI));
            let principal_mean = geometric_mean(&[axis_angle(&Vector3::Y, ph)?, axis_angle(&Vector3::Z, pw)?])?;
            principal.observe(build_2d(ph, pw).quaternion().max_abs_diff_up_to_sign(&principal_mean.quaternion()));

            // every fourth sample exercises the small-angle branch
            let (eh, ew) = if n % 4 == 0 { (th * 1e-10, tw * 1e-10) } else { (th, tw) };
            explicit.observe(rotation_block(eh, ew).max_abs_diff(&to_rotation_matrix(&build_2d(eh, ew))));

            let a = build_2d(th, tw).quaternion();
            let b = build_2d(tw, th).quaternion();
            swap.observe(Quaternion::new(a.w, a.x, a.z, a.y).max_abs_diff(&b));

            let (vx, vz) = (rng::gaussian(&mut r), rng::gaussian(&mut r));
            let v = sandwich_rotate(&build_1d(th), &Vector3::new(vx, 0.0, vz));
            let (ex, ez) = rope_reference_1d((vx, vz), -th);
            rope.observe((v.x - ex).abs().max((v.z - ez).abs()).max(v.y.abs()) / vx.hypot(vz));
        }
        out.extend([two.finish(), three.finish(), principal.finish(), explicit.finish(), swap.finish(), rope.finish()]);
    }

    // operators under the configured schedule
    {
        let mut r = next();
        let mode = config.mode().operator_mode().unwrap_or(Mode::TwoD);
        let mut norms = Probe::new("operator.subvector_norm_preservation", 1e-12);
        let mut paths = Probe::new("operator.matrix_path_agreement", 1e-12);
        let mut origin = Probe::new("operator.origin_is_identity", 0.0);
        let stride = mode.stride();
        for _ in 0..OPERATOR_SAMPLES {
            let pos = GridPosition::new_3d(
                r.gen_range(-64..=64),
                r.gen_range(-64..=64),
                r.gen_range(-64..=64),
            );
            let pos = if mode == Mode::ThreeD { pos } else { GridPosition { p_d: None, ..pos } };
            let op = build_operator(&pos, &schedule, mode)?;
            let x = rng::gaussian_vec(&mut r, schedule.head_dim);
            let y = op.apply(&x)?;
            let rotated = op.blocks.len() * stride;
            for (a, b) in x[..rotated].chunks(stride).zip(y[..rotated].chunks(stride)) {
                let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
                let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
                norms.observe((na - nb).abs() / na);
            }
            let ym = op.apply_matrix(&x)?;
            let scale = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            paths.observe(y.iter().zip(&ym).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / scale);
            let id = build_operator(&GridPosition { p_d: pos.p_d.map(|_| 0), ..GridPosition::ORIGIN }, &schedule, mode)?;
            let same = id.apply(&x)?;
            origin.observe(same.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
        }
        out.extend([norms.finish(), paths.finish(), origin.finish()]);
    }

    // linear relative variant
    {
        let mut r = next();
        let mut decomp = Probe::new("relative.decomposition_identity", 1e-12);
        let mut inverse = Probe::new("relative.inverse_consistency", 1e-12);
        let mut generator = Probe::new("relative.generator_difference", 1e-12);
        for _ in 0..SAMPLES {
            let (q, k, n) = (vec3(&mut r), vec3(&mut r), unit_vec(&mut r));
            let angle = phase(&mut r, PI);
            let d = decompose_score(&q, &k, angle, &n)?;
            let direct = rotated_inner_product(&q, &k, angle, &n)?;
            decomp.observe((d.total - direct).abs() / (q.norm() * k.norm()));
        }
        for _ in 0..OPERATOR_SAMPLES {
            let qp = GridPosition::new(r.gen_range(-32..=32), r.gen_range(-32..=32));
            let kp = GridPosition::new(r.gen_range(-32..=32), r.gen_range(-32..=32));
            let delta = Displacement::between(&qp, &kp);
            for b in 0..schedule.block_count(Mode::TwoD)? {
                let i = schedule.schedule_index(b);
                let fwd = relative_rotation(&delta, i, &schedule)?;
                let back = relative_rotation(&delta.negated(), i, &schedule)?;
                inverse.observe(fwd.matrix.transpose().max_abs_diff(&back.matrix));
                let diff = lie_vector_at(&kp, i, &schedule)? - lie_vector_at(&qp, i, &schedule)?;
                generator.observe(fwd.generator.max_abs_diff(&diff));
            }
        }
        out.extend([decomp.finish(), inverse.finish(), generator.finish()]);
    }
    {
        let grid = GridShape::new(config.grid.height, config.grid.width);
        let mut size = Probe::new("relative.cache_entry_count", 0.0);
        let table = DisplacementTable::for_grid(&grid, &schedule)?;
        let expected = (2 * grid.height - 1) * (2 * grid.width - 1);
        size.observe((table.len() as f64 - expected as f64).abs());
        out.push(size.finish());

        let mut r = next();
        let mut cache = Probe::new("relative.cache_matches_naive", 1e-12);
        let small = GridShape::new(5, 5);
        let table = DisplacementTable::for_grid(&small, &schedule)?;
        let positions = small.positions();
        let n = schedule.block_count(Mode::TwoD)?;
        for qp in &positions {
            for kp in &positions {
                let q = rng::gaussian_vec(&mut r, schedule.head_dim);
                let k = rng::gaussian_vec(&mut r, schedule.head_dim);
                let cached = table.lookup(qp, kp).expect("inside grid").score(&q, &k);
                let mut naive = 0.0;
                for b in 0..n {
                    let i = schedule.schedule_index(b);
                    let u = lie_vector_at(kp, i, &schedule)? - lie_vector_at(qp, i, &schedule)?;
                    let m = to_rotation_matrix(&exp_map(&u));
                    let o = 3 * b;
                    naive += Vector3::from_slice(&q[o..o + 3]).dot(&m.mul_vec(&Vector3::from_slice(&k[o..o + 3])));
                }
                for t in 3 * n..schedule.head_dim {
                    naive += q[t] * k[t];
                }
                let scale = q.iter().map(|v| v * v).sum::<f64>().sqrt() * k.iter().map(|v| v * v).sum::<f64>().sqrt();
                cache.observe((cached - naive).abs() / scale);
            }
        }
        out.push(cache.finish());

        let mut shift = Probe::new("relative.shift_invariance", 0.0);
        let mut cfg = AttentionConfig::new(GridShape::new(6, 6), 2, schedule.head_dim, PeMode::Lingeope2d);
        cfg.schedule = schedule;
        cfg.seed = seed;
        let base = attention::run(&cfg)?;
        let mut r = next();
        for _ in 0..8 {
            let mut moved = cfg;
            moved.offset = GridPosition::new(r.gen_range(-1000..=1000), r.gen_range(-1000..=1000));
            let t = attention::run(&moved)?;
            let worst = base
                .logits
                .iter()
                .zip(t.logits.iter())
                .map(|(a, b)| if a.to_bits() == b.to_bits() { 0.0 } else { (a - b).abs().max(f64::MIN_POSITIVE) })
                .fold(0.0, f64::max);
            shift.observe(worst);
        }
        out.push(shift.finish());
    }

    // attention plumbing
    {
        let mut rows = Probe::new("attention.row_stochastic", 1e-12);
        let mut cfg = AttentionConfig::new(GridShape::new(4, 4), 2, schedule.head_dim, config.mode());
        cfg.schedule = schedule;
        cfg.seed = seed;
        if cfg.validate().is_err() {
            cfg.pe_mode = PeMode::Geope2d;
        }
        let t = attention::run(&cfg)?;
        for h in 0..cfg.heads {
            for i in 0..cfg.tokens() {
                let s: f64 = (0..cfg.tokens()).map(|j| t.weights[[h, i, j]]).sum();
                rows.observe((s - 1.0).abs());
            }
        }
        out.push(rows.finish());

        let mut uniform = Probe::new("attention.uniform_distance_2x2", 1e-5);
        let pos = GridShape::new(2, 2).positions();
        let w = ndarray::Array3::from_elem((1, 4, 4), 0.25);
        let got = attention::mean_attention_distance(w.view(), &pos).mean;
        let mut brute = 0.0;
        for a in &pos {
            for b in &pos {
                let (dh, dw) = ((a.p_h - b.p_h) as f64, (a.p_w - b.p_w) as f64);
                brute += (dh * dh + dw * dw).sqrt() / 16.0;
            }
        }
        uniform.observe((got - brute).abs());
        out.push(uniform.finish());

        let mut single = Probe::new("attention.single_token_distance", 0.0);
        let mut one = AttentionConfig::new(GridShape::new(1, 1), 1, schedule.head_dim, PeMode::Geope2d);
        one.schedule = schedule;
        one.seed = seed;
        single.observe(attention::run(&one)?.distance.mean.abs());
        out.push(single.finish());
    }

    // decay of the leading score term; the observed value is the ratio
    // mean|S|(D = dmax) / mean|S|(D = 1)
    for (name, sign) in [("decay.ratio_negative_exponent", ExponentSign::Negative), ("decay.ratio_positive_exponent", ExponentSign::Positive)] {
        let mut p = Probe::new(name, 1.0).strict();
        let rows = decay_curve(&schedule.with_sign(sign), config.dmax.max(2), config.draws, seed)?;
        p.observe(rows.last().expect("non-empty").mean_abs_score / rows[1].mean_abs_score);
        p.samples = config.draws;
        out.push(p.finish());
    }

    // CSV round trip
    {
        let mut r = next();
        let mut trip = Probe::new("records.csv_round_trip", 0.0);
        let mut t = Table::new(&["i", "x"]);
        for i in 0..1000usize {
            let x = f64::from_bits(r.gen::<u64>());
            let x = if x.is_finite() { x } else { rng::gaussian(&mut r) };
            t.push(vec![i.into(), x.into()]);
        }
        let back = Table::read_csv(t.to_csv_string().as_bytes()).expect("own output parses");
        for (a, b) in t.rows.iter().zip(&back.rows) {
            trip.observe(if a[1].same_bits(&b[1]) { 0.0 } else { 1.0 });
        }
        out.push(trip.finish());
    }

    Ok(VerifyReport { properties: out })
}
