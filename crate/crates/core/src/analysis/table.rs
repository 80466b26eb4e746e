//! Rotor tables: one row per (position, block).

use crate::error::Result;
use crate::operator::{build_operator, GeoPEOperator, GridPosition, GridShape, Mode, PhaseSchedule};

use super::records::{Table, Value};

/// Grid table. 1D and 2D modes use `mode,p_h,p_w,i,theta_h,theta_w,q…`; in
/// 1D the position is the flattened token index, reported as `p_h`. 3D adds
/// `p_d` and `theta_d`.
pub fn grid_table(shape: &GridShape, schedule: &PhaseSchedule, mode: Mode) -> Result<Table> {
    let mut t = match mode {
        Mode::ThreeD => Table::new(&[
            "mode", "p_d", "p_h", "p_w", "i", "theta_d", "theta_h", "theta_w", "qw", "qx", "qy", "qz",
        ]),
        _ => Table::new(&["mode", "p_h", "p_w", "i", "theta_h", "theta_w", "qw", "qx", "qy", "qz"]),
    };
    for (token, grid_pos) in shape.positions().into_iter().enumerate() {
        let pos = match mode {
            Mode::OneD => GridPosition::sequence(token as i64),
            Mode::TwoD => grid_pos,
            Mode::ThreeD => GridPosition { p_d: Some(grid_pos.p_d.unwrap_or(0)), ..grid_pos },
        };
        let op = build_operator(&pos, schedule, mode)?;
        for block in &op.blocks {
            let q = block.quaternion.quaternion();
            let mut row: Vec<Value> = vec![mode.as_str().into()];
            if mode == Mode::ThreeD {
                row.push(pos.p_d.unwrap_or(0).into());
            }
            row.extend([pos.p_h.into(), pos.p_w.into(), block.index.into()]);
            if mode == Mode::ThreeD {
                row.push(block.phases.theta_d.unwrap_or(0.0).into());
            }
            row.extend([
                block.phases.theta_h.into(),
                block.phases.theta_w.into(),
                q.w.into(),
                q.x.into(),
                q.y.into(),
                q.z.into(),
            ]);
            t.push(row);
        }
    }
    Ok(t)
}

/// Single-operator export, `mode,i,theta_d,theta_h,theta_w,qw,qx,qy,qz`;
/// `theta_d` is 0 outside 3D mode.
pub fn operator_table(op: &GeoPEOperator) -> Table {
    let mut t = Table::new(&["mode", "i", "theta_d", "theta_h", "theta_w", "qw", "qx", "qy", "qz"]);
    for block in &op.blocks {
        let q = block.quaternion.quaternion();
        t.push(vec![
            op.mode.as_str().into(),
            block.index.into(),
            block.phases.theta_d.unwrap_or(0.0).into(),
            block.phases.theta_h.into(),
            block.phases.theta_w.into(),
            q.w.into(),
            q.x.into(),
            q.y.into(),
            q.z.into(),
        ]);
    }
    t
}
