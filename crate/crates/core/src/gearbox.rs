//! Stepped gearbox with final drive and a speed-threshold shift schedule.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GearboxSpec<T> {
    pub ratios: Vec<T>,
    pub efficiencies: Vec<T>,
    pub final_drive: T,
    pub final_drive_eff: T,
    /// Machine-side speed above which gear `i` shifts up, rad/s.
    pub upshift_rad_s: Vec<T>,
    /// Machine-side speed below which gear `i` shifts down, rad/s.
    pub downshift_rad_s: Vec<T>,
    pub shift_lockout_s: T,
}

/// What the powertrain can deliver in a candidate gear.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GearCapacity<T> {
    pub machine_rad_s: T,
    /// Largest traction torque at the axle, N*m; `None` when the machine
    /// would over-speed.
    pub max_axle_torque: Option<T>,
}

impl<T: Scalar> GearboxSpec<T> {
    pub fn n_gears(&self) -> usize {
        self.ratios.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.ratios.len();
        if n == 0 {
            return Err(SimError::invalid("gearbox", "no gears"));
        }
        for (name, len) in [
            ("efficiencies", self.efficiencies.len()),
            ("upshift_rad_s", self.upshift_rad_s.len()),
            ("downshift_rad_s", self.downshift_rad_s.len()),
        ] {
            if len != n {
                return Err(SimError::invalid("gearbox", format!("{name} has {len} entries for {n} gears")));
            }
        }
        if self.ratios.iter().any(|r| !(*r > T::zero())) || self.ratios.windows(2).any(|w| w[1] >= w[0]) {
            return Err(SimError::invalid("gearbox", "ratios must be positive and strictly decreasing"));
        }
        let eff_ok = |e: T| e > T::zero() && e <= T::one();
        if !self.efficiencies.iter().all(|e| eff_ok(*e)) || !eff_ok(self.final_drive_eff) {
            return Err(SimError::invalid("gearbox", "efficiencies must lie in (0, 1]"));
        }
        if !(self.final_drive > T::zero()) || self.shift_lockout_s < T::zero() {
            return Err(SimError::invalid("gearbox", "final drive must be positive, lockout >= 0"));
        }
        for i in 0..n {
            if !(self.upshift_rad_s[i] > self.downshift_rad_s[i]) {
                return Err(SimError::invalid("gearbox", format!("gear {}: up threshold not above down", i + 1)));
            }
        }
        Ok(())
    }

    /// Gearbox times final drive for gear index `g` (0-based).
    pub fn ratio(&self, g: usize) -> T {
        self.ratios[g] * self.final_drive
    }

    pub fn efficiency(&self, g: usize) -> T {
        self.efficiencies[g] * self.final_drive_eff
    }

    /// Thresholds at fixed fractions of a reference speed, same for every gear.
    pub fn uniform_thresholds(n: usize, up_rad_s: T, down_rad_s: T) -> (Vec<T>, Vec<T>) {
        (vec![up_rad_s; n], vec![down_rad_s; n])
    }

    /// Speed-only schedule: standstill selects first gear; otherwise one
    /// step up or down when the machine speed leaves the hysteresis band.
    /// `extra_ratio` covers reductions after the final drive.
    pub fn select_gear(&self, wheel_rad_s: T, current: usize, extra_ratio: T) -> usize {
        if wheel_rad_s <= T::zero() {
            return 0;
        }
        let g = current.min(self.n_gears() - 1);
        let w = wheel_rad_s * self.ratio(g) * extra_ratio;
        if w > self.upshift_rad_s[g] && g + 1 < self.n_gears() {
            g + 1
        } else if w < self.downshift_rad_s[g] && g > 0 {
            g - 1
        } else {
            g
        }
    }

    /// Speed schedule refined with the torque reserve: an upshift is held
    /// back when the next gear cannot carry the current demand, and a
    /// saturated gear kicks down when a lower gear delivers more.
    pub fn select_gear_loaded(
        &self,
        wheel_rad_s: T,
        current: usize,
        extra_ratio: T,
        demand_axle_torque: T,
        capacity: impl Fn(usize) -> GearCapacity<T>,
    ) -> usize {
        if wheel_rad_s <= T::zero() {
            return 0;
        }
        let n = self.n_gears();
        let mut g = current.min(n - 1);
        // never stay in a gear that over-speeds the machine
        while capacity(g).max_axle_torque.is_none() && g + 1 < n {
            g += 1;
        }
        let by_speed = self.select_gear(wheel_rad_s, g, extra_ratio);
        let cap_now = capacity(g).max_axle_torque;
        if by_speed > g {
            let reserve_ok = match (capacity(by_speed).max_axle_torque, cap_now) {
                (Some(next), _) => next >= demand_axle_torque || demand_axle_torque <= T::zero(),
                (None, _) => false,
            };
            let forced = cap_now.is_none();
            return if reserve_ok || forced { by_speed } else { g };
        }
        if by_speed < g {
            return by_speed;
        }
        if demand_axle_torque > T::zero() && g > 0 {
            if let (Some(now), Some(lower)) = (cap_now, capacity(g - 1).max_axle_torque) {
                let lower_speed = capacity(g - 1).machine_rad_s;
                if demand_axle_torque > now && lower > now && lower_speed < self.upshift_rad_s[g - 1] * T::lit(1.2) {
                    return g - 1;
                }
            }
        }
        g
    }
}
