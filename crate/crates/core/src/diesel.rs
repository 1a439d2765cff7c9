//! Quasi-static diesel driveline: engine map, operating point and fueling.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::gearbox::{GearCapacity, GearboxSpec};
use crate::interp::{Grid2, Table1};
use crate::scalar::{rpm_to_rad_s, Scalar};

pub const DIESEL_DENSITY_KG_L: f64 = 0.835;
pub const DIESEL_LHV_J_KG: f64 = 42.8e6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineMap<T> {
    /// Full-load torque vs engine speed (rad/s).
    pub max_torque: Table1<T>,
    /// Fuel rate in kg/s over (speed rad/s, torque N*m).
    pub fuel: Grid2<T>,
    pub idle_rad_s: T,
}

/// Parameters of the friction-plus-indicated-efficiency fuel model used to
/// tabulate the shipped map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WillansParams {
    pub friction_nm: f64,
    pub friction_nm_per_krpm: f64,
    pub indicated_eff_peak: f64,
    pub eff_peak_rpm: f64,
    pub eff_speed_curvature: f64,
    pub eff_load_drop: f64,
}

impl Default for WillansParams {
    fn default() -> Self {
        Self {
            friction_nm: 95.0,
            friction_nm_per_krpm: 45.0,
            indicated_eff_peak: 0.435,
            eff_peak_rpm: 1200.0,
            eff_speed_curvature: 0.03,
            eff_load_drop: 0.015,
        }
    }
}

impl WillansParams {
    pub fn fuel_kg_s(&self, rpm: f64, torque_nm: f64) -> f64 {
        let w = rpm * std::f64::consts::PI / 30.0;
        let fric = self.friction_nm + self.friction_nm_per_krpm * rpm / 1000.0;
        let x = (rpm - self.eff_peak_rpm) / 1000.0;
        let load = (torque_nm / 2400.0).clamp(0.0, 1.2);
        let eff = self.indicated_eff_peak - self.eff_speed_curvature * x * x - self.eff_load_drop * load * load;
        (torque_nm.max(0.0) + fric) * w / (eff * DIESEL_LHV_J_KG)
    }
}

impl<T: Scalar> EngineMap<T> {
    /// Representative 339 kW heavy-duty engine.
    pub fn default_class8() -> Self {
        Self::tabulate(&WillansParams::default())
    }

    pub fn tabulate(params: &WillansParams) -> Self {
        let curve_rpm = [600.0, 800.0, 1000.0, 1200.0, 1400.0, 1600.0, 1800.0, 1850.0, 1900.0];
        let curve_nm = [1350.0, 1900.0, 2300.0, 2400.0, 2300.0, 2025.0, 1800.0, 1000.0, 0.0];
        let max_torque = Table1::new(
            curve_rpm.iter().map(|&r| rpm_to_rad_s(T::lit(r))).collect(),
            curve_nm.iter().map(|&t| T::lit(t)).collect(),
        )
        .expect("static curve");
        let speeds: Vec<f64> = (0..=13).map(|i| 600.0 + 100.0 * i as f64).collect();
        let torques: Vec<f64> = (0..=26).map(|j| 100.0 * j as f64).collect();
        let mut z = Vec::with_capacity(speeds.len() * torques.len());
        for &r in &speeds {
            for &t in &torques {
                z.push(T::lit(params.fuel_kg_s(r, t)));
            }
        }
        let fuel = Grid2::new(
            speeds.iter().map(|&r| rpm_to_rad_s(T::lit(r))).collect(),
            torques.iter().map(|&t| T::lit(t)).collect(),
            z,
        )
        .expect("static grid");
        Self { max_torque, fuel, idle_rad_s: rpm_to_rad_s(T::lit(600.0)) }
    }

    pub fn validate(&self) -> Result<()> {
        self.max_torque.validate()?;
        self.fuel.validate()?;
        if self.max_torque.y.iter().any(|t| *t < T::zero()) {
            return Err(SimError::invalid("engine map", "negative full-load torque"));
        }
        if self.fuel.z.iter().any(|f| *f < T::zero()) {
            return Err(SimError::invalid("engine map", "negative fuel rate"));
        }
        for i in 0..self.fuel.x.len() {
            if self.fuel.row(i).windows(2).any(|w| w[1] < w[0]) {
                return Err(SimError::invalid(
                    "engine map",
                    format!("fuel rate decreases with torque at speed row {}", i + 1),
                ));
            }
        }
        if !(self.idle_rad_s >= self.fuel.x[0]) {
            return Err(SimError::invalid("engine map", "idle speed below map range"));
        }
        Ok(())
    }

    pub fn max_speed(&self) -> T {
        self.fuel.x[self.fuel.x.len() - 1].min(self.max_torque.x_max())
    }

    pub fn torque_limit(&self, w: T) -> T {
        self.max_torque.eval(w).max(T::zero())
    }

    /// Bilinear lookup; motoring points use the zero-torque row.
    pub fn fuel_rate(&self, w: T, torque: T) -> T {
        let t = torque.max(T::zero());
        if w < self.fuel.x[0] || w > self.fuel.x[self.fuel.x.len() - 1] {
            log::trace!("fuel lookup at {w} rad/s clamped to map");
        }
        self.fuel.eval(w, t).max(T::zero())
    }

    pub fn idle_fuel_rate(&self) -> T {
        self.fuel_rate(self.idle_rad_s, T::zero())
    }

    /// Reads the grid CSV: metadata comment header, then a header row of
    /// torques and one row per speed.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| SimError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut idle = None;
        let mut curve_w = None;
        let mut curve_t = None;
        for line in text.lines().take_while(|l| l.trim_start().starts_with('#')) {
            let body = line.trim_start().trim_start_matches('#');
            let Some((k, v)) = body.split_once('=') else { continue };
            let nums = || -> Result<Vec<T>> {
                v.split_whitespace()
                    .map(|x| x.parse::<f64>().map(T::lit).map_err(|e| SimError::parse("engine map header", e)))
                    .collect()
            };
            match k.trim() {
                "idle_rad_s" => idle = nums()?.first().copied(),
                "max_torque_speed_rad_s" => curve_w = Some(nums()?),
                "max_torque_nm" => curve_t = Some(nums()?),
                _ => {}
            }
        }
        let missing = |what: &str| SimError::parse("engine map header", format!("missing {what}"));
        let max_torque = Table1::new(
            curve_w.ok_or_else(|| missing("max_torque_speed_rad_s"))?,
            curve_t.ok_or_else(|| missing("max_torque_nm"))?,
        )?;
        let fuel = parse_grid(text, "engine map")?;
        let m = Self { max_torque, fuel, idle_rad_s: idle.ok_or_else(|| missing("idle_rad_s"))? };
        m.validate()?;
        Ok(m)
    }

    pub fn to_csv(&self) -> String {
        let join = |v: &[T]| v.iter().map(|x| format!("{}", x.as_f64())).collect::<Vec<_>>().join(" ");
        let mut out = format!(
            "# fuel rate kg/s; rows engine speed rad/s, columns torque N*m\n# idle_rad_s = {}\n# max_torque_speed_rad_s = {}\n# max_torque_nm = {}\n",
            self.idle_rad_s.as_f64(),
            join(&self.max_torque.x),
            join(&self.max_torque.y)
        );
        out.push_str(&grid_to_csv(&self.fuel, "omega_rad_s"));
        out
    }
}

pub(crate) fn grid_to_csv<T: Scalar>(g: &Grid2<T>, corner: &str) -> String {
    let mut out = String::from(corner);
    for y in &g.y {
        out.push_str(&format!(",{}", y.as_f64()));
    }
    out.push('\n');
    for i in 0..g.x.len() {
        out.push_str(&format!("{}", g.x[i].as_f64()));
        for v in g.row(i) {
            out.push_str(&format!(",{:e}", v.as_f64()));
        }
        out.push('\n');
    }
    out
}

pub(crate) fn parse_grid<T: Scalar>(text: &str, context: &str) -> Result<Grid2<T>> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows = rdr.records();
    let header =
        rows.next().ok_or_else(|| SimError::parse(context, "empty grid"))?.map_err(|e| SimError::parse(context, e))?;
    let num = |s: &str, rec: usize| -> Result<T> {
        s.parse::<f64>().map(T::lit).map_err(|e| SimError::Record { record: rec, message: format!("{context}: {e}") })
    };
    let y: Vec<T> = header.iter().skip(1).map(|s| num(s, 0)).collect::<Result<_>>()?;
    let mut x = Vec::new();
    let mut z = Vec::new();
    for (i, rec) in rows.enumerate() {
        let rec = rec.map_err(|e| SimError::Record { record: i + 1, message: e.to_string() })?;
        if rec.len() != y.len() + 1 {
            return Err(SimError::Record { record: i + 1, message: format!("{context}: ragged row") });
        }
        x.push(num(&rec[0], i + 1)?);
        for s in rec.iter().skip(1) {
            z.push(num(s, i + 1)?);
        }
    }
    Grid2::new(x, y, z)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DieselDriveline<T> {
    pub gearbox: GearboxSpec<T>,
    pub engine: EngineMap<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DieselOperatingPoint<T> {
    /// Brake torque including accessory torque, N*m.
    pub engine_torque: T,
    pub engine_rad_s: T,
    /// Axle torque actually delivered by the engine path.
    pub axle_torque: T,
    /// Friction-brake torque at the axle (>= 0).
    pub brake_torque: T,
    pub saturated: bool,
    /// Clutch slipping because the wheels turn the input below idle.
    pub slipping: bool,
}

impl<T: Scalar> DieselDriveline<T> {
    pub fn default_class8() -> Self {
        let rated = rpm_to_rad_s(T::lit(1800.0));
        let ratios = [14.8, 10.95, 8.09, 5.97, 4.46, 3.32, 2.45, 1.81, 1.35, 1.00];
        let n = ratios.len();
        let (up, down) = GearboxSpec::uniform_thresholds(n, rated * T::lit(0.80), rated * T::lit(0.45));
        Self {
            gearbox: GearboxSpec {
                ratios: ratios.iter().map(|&r| T::lit(r)).collect(),
                efficiencies: (0..n).map(|i| T::lit(if i + 1 == n { 0.99 } else { 0.97 })).collect(),
                final_drive: T::lit(2.64),
                final_drive_eff: T::lit(0.96),
                upshift_rad_s: up,
                downshift_rad_s: down,
                shift_lockout_s: T::lit(1.5),
            },
            engine: EngineMap::default_class8(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.gearbox.validate()?;
        self.engine.validate()
    }

    /// Kinematic engine speed, held at idle while the clutch slips.
    pub fn engine_speed(&self, wheel_rad_s: T, gear: usize) -> (T, bool) {
        let w = wheel_rad_s * self.gearbox.ratio(gear);
        if w < self.engine.idle_rad_s {
            (self.engine.idle_rad_s, true)
        } else {
            (w, false)
        }
    }

    pub fn capacity(&self, wheel_rad_s: T, gear: usize, aux_torque: T) -> GearCapacity<T> {
        let (w, _) = self.engine_speed(wheel_rad_s, gear);
        let max_axle_torque = (w <= self.engine.max_speed()).then(|| {
            ((self.engine.torque_limit(w) - aux_torque).max(T::zero()))
                * self.gearbox.ratio(gear)
                * self.gearbox.efficiency(gear)
        });
        GearCapacity { machine_rad_s: w, max_axle_torque }
    }

    /// Engine torque and speed meeting an axle torque request (positive
    /// drives). Shortfall when braking goes to the friction brakes.
    pub fn operating_point(
        &self,
        axle_request: T,
        wheel_rad_s: T,
        gear: usize,
        aux_torque: T,
    ) -> Result<DieselOperatingPoint<T>> {
        if gear >= self.gearbox.n_gears() {
            return Err(SimError::invalid("gear", format!("{} of {}", gear + 1, self.gearbox.n_gears())));
        }
        let (w, slipping) = self.engine_speed(wheel_rad_s, gear);
        if w > self.engine.max_speed() * T::lit(1.000_001) {
            return Err(SimError::OverSpeed {
                machine: "engine",
                speed_rad_s: w.as_f64(),
                limit_rad_s: self.engine.max_speed().as_f64(),
            });
        }
        let ratio = self.gearbox.ratio(gear);
        let eta = self.gearbox.efficiency(gear);
        let shaft = if axle_request >= T::zero() { axle_request / ratio / eta } else { axle_request / ratio * eta };
        let raw = shaft + aux_torque;
        let t_max = self.engine.torque_limit(w);
        let engine_torque = raw.clamp_to(T::zero(), t_max);
        let saturated = raw > t_max;
        let net = engine_torque - aux_torque;
        let axle_torque = if net >= T::zero() { net * ratio * eta } else { net * ratio / eta };
        let brake_torque = (axle_torque - axle_request).max(T::zero());
        Ok(DieselOperatingPoint { engine_torque, engine_rad_s: w, axle_torque, brake_torque, saturated, slipping })
    }

    pub fn fuel_rate(&self, op: &DieselOperatingPoint<T>) -> T {
        self.engine.fuel_rate(op.engine_rad_s, op.engine_torque)
    }
}

pub fn fuel_litres<T: Scalar>(kg: T) -> T {
    kg / T::lit(DIESEL_DENSITY_KG_L)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit_driveline(eta: f64) -> DieselDriveline<f64> {
        let mut d = DieselDriveline::<f64>::default_class8();
        d.gearbox.ratios = vec![1.0];
        d.gearbox.efficiencies = vec![eta];
        d.gearbox.final_drive_eff = 1.0;
        d.gearbox.upshift_rad_s = vec![200.0];
        d.gearbox.downshift_rad_s = vec![50.0];
        d
    }

    #[test]
    fn torque_through_final_drive() {
        let d = unit_driveline(1.0);
        let w_wheel = 100.0 / 2.64;
        let op = d.operating_point(264.0, w_wheel, 0, 0.0).unwrap();
        assert_relative_eq!(op.engine_torque, 100.0, epsilon = 1e-12);
        assert_relative_eq!(op.engine_rad_s, 100.0, epsilon = 1e-12);
    }

    #[test]
    fn efficiency_direction() {
        let d = unit_driveline(0.9);
        let w_wheel = 100.0 / 2.64;
        let op = d.operating_point(264.0, w_wheel, 0, 0.0).unwrap();
        assert_relative_eq!(op.engine_torque, 100.0 / 0.9, epsilon = 1e-12);
        // braking: engine shaft sees -90 N*m, offset here by 150 N*m of accessories
        let op = d.operating_point(-264.0, w_wheel, 0, 150.0).unwrap();
        assert_relative_eq!(op.engine_torque, 60.0, epsilon = 1e-12);
        assert_eq!(op.brake_torque, 0.0);
        // without accessories the engine cannot absorb it: friction brakes take all
        let op = d.operating_point(-264.0, w_wheel, 0, 0.0).unwrap();
        assert_eq!(op.engine_torque, 0.0);
        assert_relative_eq!(op.brake_torque, 264.0, epsilon = 1e-12);
    }

    #[test]
    fn saturation_and_overspeed() {
        let d = DieselDriveline::<f64>::default_class8();
        let w = 1200.0 * std::f64::consts::PI / 30.0;
        let wheel = w / d.gearbox.ratio(5);
        let op = d.operating_point(1e6, wheel, 5, 0.0).unwrap();
        assert!(op.saturated);
        assert_relative_eq!(op.engine_torque, 2400.0, epsilon = 1e-9);
        let cap = d.capacity(wheel, 5, 0.0).max_axle_torque.unwrap();
        assert_relative_eq!(op.axle_torque, cap, max_relative = 1e-12);
        assert!(matches!(d.operating_point(0.0, 1000.0, 0, 0.0), Err(SimError::OverSpeed { .. })));
    }

    #[test]
    fn map_properties() {
        let m = EngineMap::<f64>::default_class8();
        m.validate().unwrap();
        // knot identity and cell midpoint
        let (x, y) = (m.fuel.x.clone(), m.fuel.y.clone());
        assert_eq!(m.fuel_rate(x[3], y[5]), m.fuel.at(3, 5));
        let mid = m.fuel_rate(0.5 * (x[3] + x[4]), 0.5 * (y[5] + y[6]));
        let avg = 0.25 * (m.fuel.at(3, 5) + m.fuel.at(4, 5) + m.fuel.at(3, 6) + m.fuel.at(4, 6));
        assert_relative_eq!(mid, avg, epsilon = 1e-15);
        assert_eq!(m.fuel_rate(x[2], -500.0), m.fuel_rate(x[2], 0.0));
        assert!(m.idle_fuel_rate() > 0.0);
        // peak power near 339 kW
        let p = (600..=1900).step_by(10).map(|r| {
            let w = r as f64 * std::f64::consts::PI / 30.0;
            w * m.torque_limit(w)
        });
        let peak = p.fold(0.0, f64::max);
        assert!((peak - 339.2e3).abs() < 5e3, "{peak}");
    }

    #[test]
    fn csv_round_trip() {
        let m = EngineMap::<f64>::default_class8();
        let back = EngineMap::<f64>::parse(&m.to_csv()).unwrap();
        assert_eq!(back.fuel.x.len(), m.fuel.x.len());
        assert_relative_eq!(back.fuel.at(5, 7), m.fuel.at(5, 7), max_relative = 1e-12);
        assert_relative_eq!(back.torque_limit(150.0), m.torque_limit(150.0), max_relative = 1e-12);
    }

    #[test]
    fn litres() {
        assert_relative_eq!(fuel_litres(29.65), 35.508982, epsilon = 1e-6);
    }
}
