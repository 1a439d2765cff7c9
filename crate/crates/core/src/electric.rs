//! Tandem e-axle driveline: motor operating point, electrical power through
//! the efficiency map, regen limits and pack current.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::diesel::{grid_to_csv, parse_grid};
use crate::error::{Result, SimError};
use crate::gearbox::{GearCapacity, GearboxSpec};
use crate::interp::{Grid2, Table1};
use crate::scalar::Scalar;

/// Minimum vehicle speed for regenerative braking, m/s.
pub const REGEN_MIN_SPEED_MS: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotorSpec<T> {
    /// Efficiency over (speed rad/s, |torque| N*m), used in both directions.
    pub efficiency: Grid2<T>,
    pub continuous_torque: Table1<T>,
    pub peak_torque: Table1<T>,
    pub max_power_w: T,
    pub max_speed_rad_s: T,
    /// How long torque above the continuous curve may be held, s.
    pub peak_duration_s: T,
}

/// Copper, iron and windage loss coefficients used to tabulate the shipped
/// efficiency map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotorLossParams {
    pub copper: f64,
    pub iron: f64,
    pub windage: f64,
    pub inverter_eff: f64,
    pub eff_floor: f64,
}

impl Default for MotorLossParams {
    fn default() -> Self {
        Self { copper: 0.025, iron: 0.25, windage: 0.003, inverter_eff: 0.98, eff_floor: 0.5 }
    }
}

impl MotorLossParams {
    pub fn efficiency(&self, w: f64, t: f64) -> f64 {
        let w = w.max(5.0);
        let t = t.abs().max(5.0);
        let pm = w * t;
        let loss = self.copper * t * t + self.iron * w.powf(1.5) + self.windage * w * w;
        (pm / (pm + loss) * self.inverter_eff).max(self.eff_floor)
    }
}

fn torque_curve<T: Scalar>(torque: f64, power: f64, max_speed: f64) -> Table1<T> {
    let base = power / torque;
    let mut pts = vec![(0.0, torque), (base, torque)];
    let n = 8;
    for k in 1..=n {
        let w = base + (max_speed - base) * k as f64 / n as f64;
        pts.push((w, power / w));
    }
    Table1::from_pairs(&pts).expect("static curve")
}

impl<T: Scalar> MotorSpec<T> {
    /// 250 kW peak / 190 kW continuous e-axle motor.
    pub fn default_250kw() -> Self {
        let max_speed = 545.0;
        let loss = MotorLossParams::default();
        let speeds: Vec<f64> = (0..=21).map(|i| 25.0 * i as f64).chain([max_speed]).collect();
        let torques: Vec<f64> = (0..=18).map(|j| 50.0 * j as f64).collect();
        let mut z = Vec::with_capacity(speeds.len() * torques.len());
        for &w in &speeds {
            for &t in &torques {
                z.push(T::lit(loss.efficiency(w, t)));
            }
        }
        Self {
            efficiency: Grid2::new(
                speeds.iter().map(|&v| T::lit(v)).collect(),
                torques.iter().map(|&v| T::lit(v)).collect(),
                z,
            )
            .expect("static grid"),
            continuous_torque: torque_curve(450.0, 190e3, max_speed),
            peak_torque: torque_curve(850.0, 250e3, max_speed),
            max_power_w: T::lit(250e3),
            max_speed_rad_s: T::lit(max_speed),
            peak_duration_s: T::lit(30.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.efficiency.validate()?;
        self.continuous_torque.validate()?;
        self.peak_torque.validate()?;
        if self.efficiency.z.iter().any(|e| !(*e > T::zero() && *e <= T::one())) {
            return Err(SimError::invalid("motor map", "efficiency outside (0, 1]"));
        }
        let probe = self.continuous_torque.x.iter().chain(self.peak_torque.x.iter());
        for &w in probe {
            if self.peak_torque.eval(w) < self.continuous_torque.eval(w) {
                return Err(SimError::invalid("motor", format!("peak below continuous torque at {w} rad/s")));
            }
        }
        if !(self.max_power_w > T::zero() && self.max_speed_rad_s > T::zero() && self.peak_duration_s >= T::zero()) {
            return Err(SimError::invalid("motor", "power, speed and peak duration must be positive"));
        }
        Ok(())
    }

    pub fn efficiency_at(&self, w: T, torque: T) -> T {
        self.efficiency.eval(w.abs(), torque.abs())
    }

    /// Torque limit at speed `w`; `peak` selects the short-term curve.
    pub fn torque_limit(&self, w: T, peak: bool) -> T {
        let curve = if peak { self.peak_torque.eval(w) } else { self.continuous_torque.eval(w) };
        if w > T::zero() {
            curve.min(self.max_power_w / w)
        } else {
            curve
        }
    }

    /// Regen torque magnitude limit.
    pub fn regen_limit(&self, w: T) -> T {
        self.torque_limit(w, false)
    }

    /// Electrical power, W. Motoring draws more than the shaft delivers,
    /// generating returns less.
    pub fn electrical_power(&self, torque: T, w: T) -> T {
        let mech = torque * w;
        if mech == T::zero() {
            return T::zero();
        }
        let eta = self.efficiency_at(w, torque);
        if torque >= T::zero() {
            mech / eta
        } else {
            mech * eta
        }
    }

    pub fn load_map(path: impl AsRef<Path>, template: &Self) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| SimError::io(path, e))?;
        let m = Self { efficiency: parse_grid(&text, "motor map")?, ..template.clone() };
        m.validate()?;
        Ok(m)
    }

    pub fn map_to_csv(&self) -> String {
        let mut out = String::from("# efficiency; rows speed rad/s, columns |torque| N*m\n");
        out.push_str(&grid_to_csv(&self.efficiency, "omega_rad_s"));
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EAxleSpec<T> {
    pub n_axles: u32,
    pub gearbox: GearboxSpec<T>,
    pub wheel_end_ratio: T,
    pub wheel_end_eff: T,
    pub motor: MotorSpec<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ElectricOperatingPoint<T> {
    /// Torque of each motor, N*m.
    pub motor_torque: T,
    pub motor_rad_s: T,
    pub axle_torque: T,
    pub brake_torque: T,
    pub saturated: bool,
}

impl<T: Scalar> EAxleSpec<T> {
    pub fn default_tandem() -> Self {
        let (up, down) = GearboxSpec::uniform_thresholds(3, T::lit(450.0), T::lit(180.0));
        Self {
            n_axles: 2,
            gearbox: GearboxSpec {
                ratios: vec![T::lit(5.6), T::lit(2.8), T::lit(1.4)],
                efficiencies: vec![T::lit(0.97); 3],
                final_drive: T::lit(2.47),
                final_drive_eff: T::lit(0.97),
                upshift_rad_s: up,
                downshift_rad_s: down,
                shift_lockout_s: T::lit(1.0),
            },
            wheel_end_ratio: T::lit(2.0),
            wheel_end_eff: T::lit(0.98),
            motor: MotorSpec::default_250kw(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_axles == 0 {
            return Err(SimError::invalid("e-axle", "need at least one axle"));
        }
        if !(self.wheel_end_ratio > T::zero() && self.wheel_end_eff > T::zero() && self.wheel_end_eff <= T::one()) {
            return Err(SimError::invalid("e-axle", "wheel-end ratio > 0 and efficiency in (0, 1]"));
        }
        self.gearbox.validate()?;
        self.motor.validate()
    }

    pub fn n(&self) -> T {
        T::lit(self.n_axles as f64)
    }

    pub fn ratio(&self, gear: usize) -> T {
        self.gearbox.ratio(gear) * self.wheel_end_ratio
    }

    pub fn efficiency(&self, gear: usize) -> T {
        self.gearbox.efficiency(gear) * self.wheel_end_eff
    }

    pub fn motor_speed(&self, wheel_rad_s: T, gear: usize) -> T {
        wheel_rad_s * self.ratio(gear)
    }

    pub fn capacity(&self, wheel_rad_s: T, gear: usize, peak: bool) -> GearCapacity<T> {
        let w = self.motor_speed(wheel_rad_s, gear);
        let max_axle_torque = (w <= self.motor.max_speed_rad_s)
            .then(|| self.n() * self.motor.torque_limit(w, peak) * self.ratio(gear) * self.efficiency(gear));
        GearCapacity { machine_rad_s: w, max_axle_torque }
    }

    /// Motor torque meeting an axle request, split equally over the axles.
    /// `regen_allowed` gates recuperation (vehicle speed, SoC ceiling).
    pub fn operating_point(
        &self,
        axle_request: T,
        wheel_rad_s: T,
        gear: usize,
        peak: bool,
        regen_allowed: bool,
    ) -> Result<ElectricOperatingPoint<T>> {
        if gear >= self.gearbox.n_gears() {
            return Err(SimError::invalid("gear", format!("{} of {}", gear + 1, self.gearbox.n_gears())));
        }
        let w = self.motor_speed(wheel_rad_s, gear);
        if w > self.motor.max_speed_rad_s * T::lit(1.000_001) {
            return Err(SimError::OverSpeed {
                machine: "motor",
                speed_rad_s: w.as_f64(),
                limit_rad_s: self.motor.max_speed_rad_s.as_f64(),
            });
        }
        let ratio = self.ratio(gear);
        let eta = self.efficiency(gear);
        let n = self.n();
        let raw =
            if axle_request >= T::zero() { axle_request / (n * ratio) / eta } else { axle_request / (n * ratio) * eta };
        let upper = self.motor.torque_limit(w, peak);
        let lower = if regen_allowed { -self.motor.regen_limit(w) } else { T::zero() };
        let motor_torque = raw.clamp_to(lower, upper);
        let saturated = raw > upper;
        let axle_torque = self.axle_torque_for(motor_torque, gear);
        let brake_torque = (axle_torque - axle_request).max(T::zero());
        Ok(ElectricOperatingPoint { motor_torque, motor_rad_s: w, axle_torque, brake_torque, saturated })
    }

    pub fn axle_torque_for(&self, motor_torque: T, gear: usize) -> T {
        let k = self.n() * self.ratio(gear);
        if motor_torque >= T::zero() {
            motor_torque * k * self.efficiency(gear)
        } else {
            motor_torque * k / self.efficiency(gear)
        }
    }

    /// Electrical power of all motors together, W.
    pub fn electrical_power(&self, op: &ElectricOperatingPoint<T>) -> T {
        self.n() * self.motor.electrical_power(op.motor_torque, op.motor_rad_s)
    }

    /// Shrinks regen so the motors return no more than `min_power_w`
    /// (a negative bound); the freed torque moves to the friction brakes.
    pub fn curtail_regen(&self, op: &mut ElectricOperatingPoint<T>, gear: usize, axle_request: T, min_power_w: T) {
        if op.motor_torque >= T::zero() || self.electrical_power(op) >= min_power_w {
            return;
        }
        if min_power_w >= T::zero() {
            op.motor_torque = T::zero();
        } else {
            let (mut lo, mut hi) = (op.motor_torque, T::zero());
            for _ in 0..60 {
                let mid = (lo + hi) * T::lit(0.5);
                let p = self.n() * self.motor.electrical_power(mid, op.motor_rad_s);
                if p < min_power_w {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            op.motor_torque = hi;
        }
        op.axle_torque = self.axle_torque_for(op.motor_torque, gear);
        op.brake_torque = (op.axle_torque - axle_request).max(T::zero());
    }

    /// Shrinks traction so the motors draw no more than `max_power_w`.
    pub fn curtail_traction(&self, op: &mut ElectricOperatingPoint<T>, gear: usize, axle_request: T, max_power_w: T) {
        if op.motor_torque <= T::zero() || self.electrical_power(op) <= max_power_w {
            return;
        }
        if max_power_w <= T::zero() {
            op.motor_torque = T::zero();
        } else {
            let (mut lo, mut hi) = (T::zero(), op.motor_torque);
            for _ in 0..60 {
                let mid = (lo + hi) * T::lit(0.5);
                let p = self.n() * self.motor.electrical_power(mid, op.motor_rad_s);
                if p > max_power_w {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            op.motor_torque = lo;
        }
        op.saturated = true;
        op.axle_torque = self.axle_torque_for(op.motor_torque, gear);
        op.brake_torque = (op.axle_torque - axle_request).max(T::zero());
    }
}

/// Pack current for the given motor and accessory power; positive discharges.
pub fn battery_current_demand<T: Scalar>(motor_power_w: T, aux_power_w: T, v_batt: T) -> Result<T> {
    if !(v_batt > T::zero()) {
        return Err(SimError::PackFault(format!("terminal voltage {v_batt} V")));
    }
    Ok((motor_power_w + aux_power_w) / v_batt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn ideal() -> EAxleSpec<f64> {
        let mut s = EAxleSpec::<f64>::default_tandem();
        s.gearbox.efficiencies = vec![1.0; 3];
        s.gearbox.final_drive_eff = 1.0;
        s.wheel_end_eff = 1.0;
        s
    }

    #[test]
    fn first_gear_ratio() {
        let s = EAxleSpec::<f64>::default_tandem();
        assert_relative_eq!(s.ratio(0), 27.664, epsilon = 1e-12);
        assert_relative_eq!(s.motor_speed(10.0, 0), 276.64, epsilon = 1e-9);
    }

    #[test]
    fn torque_split() {
        let s = ideal();
        let op = s.operating_point(2766.4, 5.0, 0, false, true).unwrap();
        assert_relative_eq!(op.motor_torque, 50.0, epsilon = 1e-12);
        assert_eq!(op.brake_torque, 0.0);
    }

    #[test]
    fn braking_beyond_regen_goes_to_friction() {
        let s = ideal();
        let wheel = 1.0;
        let w = s.motor_speed(wheel, 0);
        let lim = s.motor.regen_limit(w);
        let demand = -2.0 * lim * 2.0 * s.ratio(0);
        let op = s.operating_point(demand, wheel, 0, false, true).unwrap();
        assert_relative_eq!(op.motor_torque, -lim, epsilon = 1e-9);
        assert!(op.brake_torque > 0.0);
        assert_relative_eq!(op.axle_torque - op.brake_torque, demand, max_relative = 1e-12);
        let none = s.operating_point(demand, wheel, 0, false, false).unwrap();
        assert_eq!(none.motor_torque, 0.0);
        assert_relative_eq!(none.brake_torque, -demand);
    }

    #[test]
    fn power_directions() {
        let m = MotorSpec::<f64>::default_250kw();
        assert_eq!(m.electrical_power(0.0, 300.0), 0.0);
        let (t, w) = (100e3 / 300.0, 300.0);
        let eta = m.efficiency_at(w, t);
        assert_relative_eq!(m.electrical_power(t, w), 100e3 / eta, max_relative = 1e-12);
        assert_relative_eq!(m.electrical_power(-t, w), -100e3 * eta, max_relative = 1e-12);
        let mut flat = m.clone();
        flat.efficiency.z.iter_mut().for_each(|e| *e = 0.9);
        assert_relative_eq!(flat.electrical_power(t, w), 111_111.111, epsilon = 1e-3);
        assert_relative_eq!(flat.electrical_power(-t, w), -90e3, epsilon = 1e-6);
    }

    #[test]
    fn current_demand() {
        assert_eq!(battery_current_demand(0.0, 0.0, 700.0).unwrap(), 0.0);
        assert_relative_eq!(battery_current_demand(200e3, 10e3, 700.0).unwrap(), 300.0);
        assert_relative_eq!(battery_current_demand(-90e3, 10e3, 800.0).unwrap(), -100.0);
        assert!(battery_current_demand(1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn curtail_meets_bound() {
        let s = EAxleSpec::<f64>::default_tandem();
        let wheel = 40.0;
        let mut op = s.operating_point(-40_000.0, wheel, 2, false, true).unwrap();
        let p = s.electrical_power(&op);
        assert!(p < -50e3);
        s.curtail_regen(&mut op, 2, -40_000.0, -50e3);
        assert_relative_eq!(s.electrical_power(&op), -50e3, max_relative = 1e-9);
        assert_relative_eq!(op.axle_torque - op.brake_torque, -40_000.0, max_relative = 1e-12);
    }

    #[test]
    fn shipped_map_anchors() {
        let s = EAxleSpec::<f64>::default_tandem();
        s.validate().unwrap();
        let vmax = s.motor.max_speed_rad_s / s.ratio(2) * 0.5 * 3.6;
        assert_relative_eq!(vmax, 141.9, epsilon = 0.1);
        assert_relative_eq!(s.motor.torque_limit(500.0, true) * 500.0, 250e3, max_relative = 1e-9);
    }
}
