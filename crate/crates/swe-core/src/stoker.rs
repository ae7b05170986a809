//! Analytical wet-bed dam-break solution (Stoker): left rarefaction,
//! constant intermediate state, right-moving shock.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct StokerSolution {
    pub h_left: f64,
    pub h_right: f64,
    pub g: f64,
    /// Intermediate depth between rarefaction tail and shock.
    pub h_mid: f64,
    pub u_mid: f64,
    pub c_left: f64,
    pub c_mid: f64,
    pub shock_speed: f64,
}

impl StokerSolution {
    /// Solve the intermediate state for a dam at x = 0 with still water of
    /// depth `h_left > h_right > 0` on either side.
    pub fn new(h_left: f64, h_right: f64, g: f64) -> Result<Self> {
        if !(h_left > h_right && h_right > 0.0 && g > 0.0) {
            return Err(Error::Validation(format!(
                "Stoker solution requires h_left > h_right > 0, got ({h_left}, {h_right})"
            )));
        }
        let c_left = (g * h_left).sqrt();
        // Match the rarefaction invariant u = 2(c_l - c_m) with the shock
        // jump relation; bisect on h_mid in (h_right, h_left).
        let f = |h_m: f64| -> f64 {
            let c_m = (g * h_m).sqrt();
            let u_rare = 2.0 * (c_left - c_m);
            let u_shock = (h_m - h_right) * (g * (h_m + h_right) / (2.0 * h_m * h_right)).sqrt();
            u_rare - u_shock
        };
        let (mut lo, mut hi) = (h_right, h_left);
        if f(lo) <= 0.0 || f(hi) >= 0.0 {
            return Err(Error::Validation("Stoker bracketing failed".into()));
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let h_mid = 0.5 * (lo + hi);
        let c_mid = (g * h_mid).sqrt();
        let u_mid = 2.0 * (c_left - c_mid);
        let shock_speed = h_mid * u_mid / (h_mid - h_right);
        Ok(Self {
            h_left,
            h_right,
            g,
            h_mid,
            u_mid,
            c_left,
            c_mid,
            shock_speed,
        })
    }

    /// Depth at position `x` (dam at 0) and time `t >= 0`.
    pub fn depth(&self, x: f64, t: f64) -> f64 {
        if t <= 0.0 {
            return if x < 0.0 { self.h_left } else { self.h_right };
        }
        let xi = x / t;
        if xi <= -self.c_left {
            self.h_left
        } else if xi <= self.u_mid - self.c_mid {
            // Inside the rarefaction fan: u - c = xi, u + 2c = 2 c_left.
            let c = (2.0 * self.c_left - xi) / 3.0;
            c * c / self.g
        } else if xi < self.shock_speed {
            self.h_mid
        } else {
            self.h_right
        }
    }

    pub fn velocity(&self, x: f64, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let xi = x / t;
        if xi <= -self.c_left {
            0.0
        } else if xi <= self.u_mid - self.c_mid {
            2.0 * (self.c_left + xi) / 3.0
        } else if xi < self.shock_speed {
            self.u_mid
        } else {
            0.0
        }
    }

    /// Shock front position at time `t`.
    pub fn shock_position(&self, t: f64) -> f64 {
        self.shock_speed * t
    }
}
