//! CFL timestep computation, wet-dry timestep reduction, and the forward
//! Euler state update.

use crate::error::{Error, Result};
use crate::grid::{FieldSet, GridSpec};
use crate::riemann::EdgeFluxAccumulator;
use crate::H_EPS;

/// Depths in `(-H_NEG_TOL, 0)` after an update are snapped to zero; anything
/// more negative triggers the reduction path.
pub const H_NEG_TOL: f64 = 1e-14;

pub const DEFAULT_MAX_REDUCTIONS: u32 = 10;

#[derive(Debug, Clone, Copy)]
pub struct StepControl {
    pub dt: f64,
    pub cfl: f64,
    pub t_now: f64,
    pub reductions_applied: u32,
}

/// Cell-evaluated CFL condition: `dt = cfl * min over wet interior cells of
/// dx / max(|u|+sqrt(g h), |v|+sqrt(g h))`. The min is exact and
/// order-independent.
pub fn compute_dt(fields: &FieldSet, spec: &GridSpec, cfl: f64, g: f64) -> Result<f64> {
    let mut min_ratio = f64::INFINITY;
    for j in 1..=spec.n_y {
        for i in 1..=spec.n_x {
            let k = spec.flat_index(i, j);
            let h = fields.h[k];
            if h <= H_EPS {
                continue;
            }
            let c = (g * h).sqrt();
            let u = fields.hu[k] / h;
            let v = fields.hv[k] / h;
            let speed = (u.abs() + c).max(v.abs() + c);
            let ratio = spec.dx / speed;
            if ratio < min_ratio {
                min_ratio = ratio;
            }
        }
    }
    if !min_ratio.is_finite() {
        return Err(Error::NoWetCells);
    }
    Ok(cfl * min_ratio)
}

/// Outcome of a state update attempt.
#[derive(Debug, Clone)]
pub enum UpdateOutcome {
    /// Update accepted; fields replaced.
    Accepted(FieldSet),
    /// A depth went below `-H_NEG_TOL`; the caller must reduce dt.
    /// Carries the worst offending cell and its trial depth.
    NeedsReduction { i: usize, j: usize, h: f64 },
}

/// Forward Euler update `U_new = U - (dt/dx)(accX + accY)` on interior
/// cells, then the uniform rain source, then explicit Manning friction when
/// enabled. Tiny negative depths are snapped to zero; deeper negatives
/// signal the reduction path instead of crashing.
pub fn compute_new_state(
    fields: &FieldSet,
    spec: &GridSpec,
    acc_x: &EdgeFluxAccumulator,
    acc_y: &EdgeFluxAccumulator,
    dt: f64,
    rain_rate: f64,
    manning_n: f64,
    g: f64,
) -> UpdateOutcome {
    let mut out = fields.clone();
    let dtdx = dt / spec.dx;
    let mut worst = (0usize, 0usize, 0.0f64);
    for j in 1..=spec.n_y {
        for i in 1..=spec.n_x {
            let k = spec.flat_index(i, j);
            let mut h = fields.h[k] - dtdx * (acc_x.d_h[k] + acc_y.d_h[k]);
            let mut hu = fields.hu[k] - dtdx * (acc_x.d_hu[k] + acc_y.d_hu[k]);
            let mut hv = fields.hv[k] - dtdx * (acc_x.d_hv[k] + acc_y.d_hv[k]);
            if rain_rate != 0.0 {
                h += rain_rate * dt;
            }
            if h < 0.0 {
                if h > -H_NEG_TOL {
                    h = 0.0;
                } else if h < worst.2 {
                    worst = (i, j, h);
                }
            }
            if manning_n > 0.0 && h > H_EPS {
                // Semi-implicit Manning deceleration on the momenta.
                let u = hu / h;
                let v = hv / h;
                let vmag = (u * u + v * v).sqrt();
                let factor = 1.0 / (1.0 + dt * g * manning_n * manning_n * vmag / h.powf(4.0 / 3.0));
                hu *= factor;
                hv *= factor;
            }
            if h <= H_EPS {
                hu = 0.0;
                hv = 0.0;
            }
            out.h[k] = h;
            out.hu[k] = hu;
            out.hv[k] = hv;
        }
    }
    if worst.2 < 0.0 {
        UpdateOutcome::NeedsReduction {
            i: worst.0,
            j: worst.1,
            h: worst.2,
        }
    } else {
        UpdateOutcome::Accepted(out)
    }
}

/// Largest `dt/2^k` (k = 0..max_reductions) whose trial depths stay above
/// `-H_NEG_TOL` on every interior cell. The update is linear in dt so only
/// the depth equation needs re-evaluation.
pub fn compute_time_step_reduction(
    fields: &FieldSet,
    spec: &GridSpec,
    acc_x: &EdgeFluxAccumulator,
    acc_y: &EdgeFluxAccumulator,
    dt: f64,
    rain_rate: f64,
    max_reductions: u32,
    step: u64,
) -> Result<(f64, u32)> {
    let mut dt_trial = dt;
    for k in 0..=max_reductions {
        let dtdx = dt_trial / spec.dx;
        let mut worst = (0usize, 0usize, 0.0f64);
        for j in 1..=spec.n_y {
            for i in 1..=spec.n_x {
                let idx = spec.flat_index(i, j);
                let h = fields.h[idx] - dtdx * (acc_x.d_h[idx] + acc_y.d_h[idx])
                    + rain_rate * dt_trial;
                if h < worst.2 {
                    worst = (i, j, h);
                }
            }
        }
        if worst.2 >= -H_NEG_TOL {
            return Ok((dt_trial, k));
        }
        if k == max_reductions {
            return Err(Error::ReductionExceeded {
                step,
                max_reductions,
                i: worst.0,
                j: worst.1,
                h: worst.2,
            });
        }
        dt_trial *= 0.5;
    }
    unreachable!("loop returns or errors before falling through")
}
