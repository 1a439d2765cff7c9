//! Longitudinal resistive forces: aerodynamic drag with wind yaw, transient
//! rolling resistance driven by tire temperature, grade and inertia.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::interp::Table1;
use crate::scalar::{kelvin_to_celsius, Scalar, GRAVITY};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruckConfiguration {
    Bobtail,
    TractorTrailer,
    TractorFlatbed,
}

impl TruckConfiguration {
    pub const ALL: [TruckConfiguration; 3] =
        [TruckConfiguration::Bobtail, TruckConfiguration::TractorTrailer, TruckConfiguration::TractorFlatbed];

    pub fn as_str(self) -> &'static str {
        match self {
            TruckConfiguration::Bobtail => "bobtail",
            TruckConfiguration::TractorTrailer => "tractor_trailer",
            TruckConfiguration::TractorFlatbed => "tractor_flatbed",
        }
    }
}

impl fmt::Display for TruckConfiguration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TruckConfiguration {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "bobtail" => Ok(TruckConfiguration::Bobtail),
            "tractor_trailer" | "trailer" => Ok(TruckConfiguration::TractorTrailer),
            "tractor_flatbed" | "flatbed" => Ok(TruckConfiguration::TractorFlatbed),
            other => Err(SimError::UnknownConfiguration(other.to_string())),
        }
    }
}

/// Drag coefficient sampled over yaw angle (degrees) for one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DragTable<T> {
    pub configuration: TruckConfiguration,
    pub cd_vs_yaw_deg: Table1<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AeroParams<T> {
    pub frontal_area_m2: T,
    pub drag: Vec<DragTable<T>>,
}

impl<T: Scalar> AeroParams<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.frontal_area_m2 > T::zero()) {
            return Err(SimError::invalid("aero", "frontal area must be positive"));
        }
        for d in &self.drag {
            d.cd_vs_yaw_deg.validate()?;
            if d.cd_vs_yaw_deg.y.iter().any(|&c| !(c > T::zero() && c < T::lit(2.0))) {
                return Err(SimError::invalid("aero", format!("{} drag coefficient outside (0, 2)", d.configuration)));
            }
            if d.cd_vs_yaw_deg.x_min() > T::zero() || d.cd_vs_yaw_deg.x_max() < T::lit(10.0) {
                return Err(SimError::invalid(
                    "aero",
                    format!("{} drag table must cover yaw 0..10 deg", d.configuration),
                ));
            }
        }
        Ok(())
    }

    pub fn table(&self, configuration: TruckConfiguration) -> Result<&Table1<T>> {
        self.drag
            .iter()
            .find(|d| d.configuration == configuration)
            .map(|d| &d.cd_vs_yaw_deg)
            .ok_or_else(|| SimError::UnknownConfiguration(configuration.to_string()))
    }

    /// Average of the drag coefficient at 0 and 6 degrees yaw.
    pub fn yaw_averaged_cd(&self, configuration: TruckConfiguration) -> Result<T> {
        let t = self.table(configuration)?;
        Ok((t.eval(T::zero()) + t.eval(T::lit(6.0))) / T::lit(2.0))
    }

    /// Multiplies every drag table by `factor`.
    pub fn scale_cd(&mut self, factor: T) {
        for d in &mut self.drag {
            d.cd_vs_yaw_deg = d.cd_vs_yaw_deg.map_y(|c| c * factor);
        }
    }

    /// Representative heavy-truck drag tables. Tractor-trailer is the
    /// baseline; the bobtail yaw-averaged value is 25.8% higher relative to
    /// itself (tractor-trailer is 25.8% lower), the flatbed sits in between.
    pub fn default_class8() -> Self {
        let yaw = [0.0, 3.0, 6.0, 9.0, 12.0, 15.0, 20.0];
        let tt = [0.56, 0.58, 0.62, 0.67, 0.72, 0.76, 0.81];
        let table = |scale: f64| {
            Table1::new(yaw.iter().map(|&x| T::lit(x)).collect(), tt.iter().map(|&c| T::lit(c * scale)).collect())
                .expect("static drag table")
        };
        Self {
            frontal_area_m2: T::lit(9.8),
            drag: vec![
                DragTable { configuration: TruckConfiguration::TractorTrailer, cd_vs_yaw_deg: table(1.0) },
                DragTable { configuration: TruckConfiguration::Bobtail, cd_vs_yaw_deg: table(1.0 / (1.0 - 0.258)) },
                DragTable {
                    configuration: TruckConfiguration::TractorFlatbed,
                    cd_vs_yaw_deg: table(1.0 / (1.0 - 0.12)),
                },
            ],
        }
    }
}

/// Master-curve rolling resistance parameters. Shift temperatures are
/// differences (K == degC); the master curve is evaluated in degC.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RollingParams<T> {
    pub crr_zero: T,
    pub crr_high: T,
    pub decay_temp_k: T,
    pub shift_zero_speed_k: T,
    pub shift_high_speed_k: T,
    pub shift_speed_scale_ms: T,
}

impl<T: Scalar> RollingParams<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.crr_zero > self.crr_high && self.crr_high > T::zero()) {
            return Err(SimError::invalid("rolling", "need crr_zero > crr_high > 0"));
        }
        if !(self.decay_temp_k > T::zero() && self.shift_speed_scale_ms > T::zero()) {
            return Err(SimError::invalid("rolling", "decay and speed scales must be positive"));
        }
        Ok(())
    }

    pub fn default_truck_tire() -> Self {
        Self {
            crr_zero: T::lit(0.0088),
            crr_high: T::lit(0.0037),
            decay_temp_k: T::lit(15.0),
            shift_zero_speed_k: T::lit(-8.0),
            shift_high_speed_k: T::lit(0.0),
            shift_speed_scale_ms: T::lit(8.0),
        }
    }

    pub fn scale(&mut self, factor: T) {
        self.crr_zero = self.crr_zero * factor;
        self.crr_high = self.crr_high * factor;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TireThermalParams<T> {
    pub tau_zero_s: T,
    pub tau_high_s: T,
    pub tau_decay_speed_ms: T,
    /// Speed gain of the stabilized temperature, K per m/s.
    pub k_speed: T,
    /// Asymptotic offset of the stabilized temperature, K.
    pub n_offset_k: T,
    pub gamma_speed_ms: T,
    pub ambient_ref_k: T,
}

impl<T: Scalar> TireThermalParams<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau_zero_s > self.tau_high_s && self.tau_high_s > T::zero()) {
            return Err(SimError::invalid("tire thermal", "need tau_zero > tau_high > 0"));
        }
        if !(self.tau_decay_speed_ms > T::zero() && self.gamma_speed_ms > T::zero()) {
            return Err(SimError::invalid("tire thermal", "speed scales must be positive"));
        }
        Ok(())
    }

    pub fn default_truck_tire() -> Self {
        Self {
            tau_zero_s: T::lit(1800.0),
            tau_high_s: T::lit(700.0),
            tau_decay_speed_ms: T::lit(6.0),
            k_speed: T::lit(0.3),
            n_offset_k: T::lit(298.15),
            gamma_speed_ms: T::lit(7.0),
            ambient_ref_k: T::lit(293.15),
        }
    }

    pub fn time_constant(&self, v: T) -> T {
        self.tau_high_s + (self.tau_zero_s - self.tau_high_s) * (-v / self.tau_decay_speed_ms).exp()
    }

    /// Stabilized tire temperature. Written so that `v = 0` returns
    /// `ambient_k` bit-exactly.
    pub fn stabilized_temperature(&self, v: T, ambient_k: T) -> T {
        let speed_term = T::one() - (-v / self.gamma_speed_ms).exp();
        ambient_k + self.k_speed * v + (self.n_offset_k - self.ambient_ref_k) * speed_term
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BodyParams<T> {
    pub mass_kg: T,
    pub rotating_inertia_factor: T,
    pub wheel_radius_m: T,
}

impl<T: Scalar> BodyParams<T> {
    pub fn equivalent_mass(&self) -> T {
        self.mass_kg * (T::one() + self.rotating_inertia_factor)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mass_kg > T::zero()) || self.rotating_inertia_factor < T::zero() {
            return Err(SimError::invalid("body", "mass must be positive, inertia factor >= 0"));
        }
        if !(self.wheel_radius_m > T::zero()) {
            return Err(SimError::invalid("body", "wheel radius must be positive"));
        }
        Ok(())
    }
}

/// Relative yaw angle between vehicle motion and apparent wind, degrees in
/// `[0, 180]`. Headings and wind direction are degrees clockwise from north.
pub fn yaw_angle<T: Scalar>(v: T, wind_speed: T, wind_dir_deg: T, heading_deg: T) -> T {
    if wind_speed == T::zero() {
        return T::zero();
    }
    let rel = (wind_dir_deg - heading_deg).to_radians();
    let lateral = wind_speed * rel.sin();
    let longitudinal = v + wind_speed * rel.cos();
    if lateral == T::zero() && longitudinal == T::zero() {
        return T::zero();
    }
    lateral.atan2(longitudinal).abs().to_degrees()
}

pub fn drag_coefficient<T: Scalar>(aero: &AeroParams<T>, configuration: TruckConfiguration, yaw_deg: T) -> Result<T> {
    Ok(aero.table(configuration)?.eval(yaw_deg))
}

/// Virtual tire-temperature shift from speed, K.
pub fn speed_temperature_shift<T: Scalar>(v: T, p: &RollingParams<T>) -> T {
    let two = T::lit(2.0);
    let logistic = T::one() / (T::one() + (-v / p.shift_speed_scale_ms).exp());
    p.shift_high_speed_k - (p.shift_zero_speed_k - p.shift_high_speed_k) * (two - two * logistic)
}

/// Master rolling-resistance curve at an effective temperature in degC.
pub fn master_rolling_coefficient<T: Scalar>(effective_c: T, p: &RollingParams<T>) -> T {
    p.crr_high + (p.crr_zero - p.crr_high) * (-effective_c / p.decay_temp_k).exp()
}

pub fn rolling_coefficient<T: Scalar>(tire_k: T, v: T, p: &RollingParams<T>) -> T {
    master_rolling_coefficient(kelvin_to_celsius(tire_k) + speed_temperature_shift(v, p), p)
}

pub fn tire_temperature_derivative<T: Scalar>(tire_k: T, v: T, ambient_k: T, p: &TireThermalParams<T>) -> T {
    -(tire_k - p.stabilized_temperature(v, ambient_k)) / p.time_constant(v)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionState<T> {
    pub v: T,
    pub accel: T,
    /// Road grade as rise over run.
    pub grade: T,
    pub tire_k: T,
    pub heading_deg: T,
    /// Rolling and grade terms are suppressed while the truck is held at rest.
    pub held_at_rest: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmbientAir<T> {
    pub density: T,
    pub wind_speed: T,
    pub wind_dir_deg: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ForceBreakdown<T> {
    pub aero: T,
    pub rolling: T,
    pub grade: T,
    pub inertial: T,
}

impl<T: Scalar> ForceBreakdown<T> {
    pub fn total(&self) -> T {
        self.aero + self.rolling + self.grade + self.inertial
    }

    pub fn resistive(&self) -> T {
        self.aero + self.rolling + self.grade
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoadLoad<T> {
    pub forces: ForceBreakdown<T>,
    pub total_n: T,
    pub wheel_torque_nm: T,
    pub wheel_speed_rad_s: T,
    pub yaw_deg: T,
    pub cd: T,
    pub crr: T,
}

pub fn road_load<T: Scalar>(
    state: &MotionState<T>,
    air: &AmbientAir<T>,
    body: &BodyParams<T>,
    aero: &AeroParams<T>,
    rolling: &RollingParams<T>,
    configuration: TruckConfiguration,
) -> Result<RoadLoad<T>> {
    let v = state.v;
    let yaw = yaw_angle(v, air.wind_speed, air.wind_dir_deg, state.heading_deg);
    let cd = drag_coefficient(aero, configuration, yaw)?;
    let crr = rolling_coefficient(state.tire_k, v, rolling);
    let alpha = state.grade.atan();
    let weight = body.mass_kg * T::lit(GRAVITY);
    let at_rest = state.held_at_rest && v == T::zero();
    let forces = ForceBreakdown {
        aero: T::lit(0.5) * air.density * cd * aero.frontal_area_m2 * v * v,
        rolling: if at_rest { T::zero() } else { weight * crr * alpha.cos() },
        grade: if at_rest { T::zero() } else { weight * alpha.sin() },
        inertial: body.equivalent_mass() * state.accel,
    };
    let total = forces.total();
    Ok(RoadLoad {
        forces,
        total_n: total,
        wheel_torque_nm: total * body.wheel_radius_m,
        wheel_speed_rad_s: v / body.wheel_radius_m,
        yaw_deg: yaw,
        cd,
        crr,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn flat_aero(cd: f64, area: f64) -> AeroParams<f64> {
        AeroParams {
            frontal_area_m2: area,
            drag: vec![DragTable {
                configuration: TruckConfiguration::TractorTrailer,
                cd_vs_yaw_deg: Table1::from_pairs(&[(0.0, cd), (20.0, cd)]).unwrap(),
            }],
        }
    }

    #[test]
    fn yaw_examples() {
        assert_eq!(yaw_angle(20.0, 0.0, 45.0, 10.0), 0.0);
        assert_eq!(yaw_angle(20.0, 10.0, 30.0, 30.0), 0.0);
        // atan(5 / 25) in degrees, evaluated independently
        let expected = (0.2f64).atan() * 180.0 / std::f64::consts::PI;
        assert_relative_eq!(yaw_angle(25.0, 5.0, 90.0, 0.0), expected, epsilon = 1e-12);
        assert_relative_eq!(expected, 11.309932474020215, epsilon = 1e-12);
        assert_eq!(yaw_angle(0.0, 0.0, 10.0, 0.0), 0.0);
    }

    #[test]
    fn drag_table_knots_and_midpoint() {
        let aero = AeroParams::<f64>::default_class8();
        let t = aero.table(TruckConfiguration::TractorTrailer).unwrap();
        assert_eq!(drag_coefficient(&aero, TruckConfiguration::TractorTrailer, 3.0).unwrap(), t.y[1]);
        let mid = drag_coefficient(&aero, TruckConfiguration::TractorTrailer, 1.5).unwrap();
        assert_relative_eq!(mid, (t.y[0] + t.y[1]) / 2.0, epsilon = 1e-15);
        // clamped past the last knot
        assert_eq!(drag_coefficient(&aero, TruckConfiguration::TractorTrailer, 90.0).unwrap(), *t.y.last().unwrap());
    }

    #[test]
    fn missing_configuration_is_an_error() {
        let aero = flat_aero(0.6, 10.0);
        assert!(matches!(
            drag_coefficient(&aero, TruckConfiguration::Bobtail, 0.0),
            Err(SimError::UnknownConfiguration(_))
        ));
        assert!("monster_truck".parse::<TruckConfiguration>().is_err());
    }

    #[test]
    fn shipped_drag_spread_is_25_8_percent() {
        let aero = AeroParams::<f64>::default_class8();
        let avgs: Vec<f64> = TruckConfiguration::ALL.iter().map(|&c| aero.yaw_averaged_cd(c).unwrap()).collect();
        let hi = avgs.iter().cloned().fold(f64::MIN, f64::max);
        let lo = avgs.iter().cloned().fold(f64::MAX, f64::min);
        assert_relative_eq!((hi - lo) / hi, 0.258, epsilon = 1e-9);
    }

    #[test]
    fn rolling_limits() {
        let p = RollingParams::<f64>::default_truck_tire();
        // huge effective temperature -> high-temperature asymptote
        assert_relative_eq!(master_rolling_coefficient(1e4, &p), p.crr_high, epsilon = 1e-15);
        assert_eq!(master_rolling_coefficient(0.0, &p), p.crr_zero);
        let far = speed_temperature_shift(1e6, &p);
        assert_relative_eq!(far, p.shift_high_speed_k, epsilon = 1e-12);
        // at standstill the printed formula gives 2*T_h - T_0
        assert_relative_eq!(
            speed_temperature_shift(0.0, &p),
            2.0 * p.shift_high_speed_k - p.shift_zero_speed_k,
            epsilon = 1e-12
        );
    }

    #[test]
    fn tire_thermal_examples() {
        let p = TireThermalParams::<f64>::default_truck_tire();
        let t_amb = 280.0;
        assert_eq!(p.stabilized_temperature(0.0, t_amb), t_amb);
        let t_st = p.stabilized_temperature(22.0, t_amb);
        assert_eq!(tire_temperature_derivative(t_st, 22.0, t_amb, &p), 0.0);
        assert_eq!(p.time_constant(0.0), p.tau_zero_s);
        assert_relative_eq!(p.time_constant(1e6), p.tau_high_s, epsilon = 1e-12);
        // cold-soaked stationary tire relaxes toward ambient
        assert!(tire_temperature_derivative(270.0, 0.0, t_amb, &p) > 0.0);
    }

    #[test]
    fn road_load_worked_example() {
        let aero = flat_aero(0.6, 10.0);
        let body = BodyParams { mass_kg: 27_200.0, rotating_inertia_factor: 0.05, wheel_radius_m: 0.5 };
        let rolling = RollingParams {
            crr_zero: 0.006 + 1e-9,
            crr_high: 0.006,
            decay_temp_k: 1.0,
            shift_zero_speed_k: 0.0,
            shift_high_speed_k: 0.0,
            shift_speed_scale_ms: 1.0,
        };
        let state =
            MotionState { v: 20.0, accel: 0.0, grade: 0.0, tire_k: 400.0, heading_deg: 0.0, held_at_rest: false };
        let air = AmbientAir { density: 1.2, wind_speed: 0.0, wind_dir_deg: 0.0 };
        let rl = road_load(&state, &air, &body, &aero, &rolling, TruckConfiguration::TractorTrailer).unwrap();
        // 0.5*1.2*0.6*10*400 + 27200*9.80665*0.006
        let expected = 1440.0 + 27_200.0 * 9.80665 * 0.006;
        assert_relative_eq!(rl.total_n, expected, max_relative = 1e-9);
        assert_relative_eq!(rl.total_n, 3040.4, epsilon = 0.1);
        assert_eq!(rl.forces.grade, 0.0);
        assert_relative_eq!(rl.wheel_torque_nm, rl.total_n * 0.5);
        assert_relative_eq!(rl.wheel_speed_rad_s, 40.0);
    }

    #[test]
    fn standstill_gating() {
        let aero = AeroParams::<f64>::default_class8();
        let body = BodyParams { mass_kg: 20_000.0, rotating_inertia_factor: 0.05, wheel_radius_m: 0.5 };
        let rolling = RollingParams::default_truck_tire();
        let air = AmbientAir { density: 1.2, wind_speed: 3.0, wind_dir_deg: 40.0 };
        let state =
            MotionState { v: 0.0, accel: 0.0, grade: 0.03, tire_k: 290.0, heading_deg: 0.0, held_at_rest: true };
        let rl = road_load(&state, &air, &body, &aero, &rolling, TruckConfiguration::TractorTrailer).unwrap();
        assert_eq!(rl.forces.aero, 0.0);
        assert_eq!(rl.forces.rolling, 0.0);
        assert_eq!(rl.forces.grade, 0.0);
        let moving = MotionState { held_at_rest: false, ..state };
        let rl = road_load(&moving, &air, &body, &aero, &rolling, TruckConfiguration::TractorTrailer).unwrap();
        assert!(rl.forces.grade > 0.0 && rl.forces.rolling > 0.0);
    }

    #[test]
    fn works_in_f32() {
        let p = TireThermalParams::<f32>::default_truck_tire();
        assert_eq!(p.stabilized_temperature(0.0f32, 271.5), 271.5);
        let y = yaw_angle(25.0f32, 5.0, 90.0, 0.0);
        assert!((y - 11.30993).abs() < 1e-4);
    }

    proptest! {
        #[test]
        fn yaw_symmetric(v in 0.0f64..40.0, w in 0.0f64..20.0, d in -360.0f64..360.0) {
            let a = yaw_angle(v, w, d, 0.0);
            let b = yaw_angle(v, w, 0.0, d);
            prop_assert!((a - b).abs() < 1e-9);
            prop_assert!((0.0..=180.0).contains(&a));
        }

        #[test]
        fn crr_decreasing_in_tire_temperature(t in 230.0f64..370.0, dt in 0.01f64..30.0, v in 0.0f64..35.0) {
            let p = RollingParams::default_truck_tire();
            prop_assert!(rolling_coefficient(t + dt, v, &p) < rolling_coefficient(t, v, &p));
        }

        #[test]
        fn aero_monotone_and_linear_in_density(v in 0.1f64..40.0, dv in 0.01f64..5.0, rho in 0.9f64..1.5) {
            let aero = AeroParams::<f64>::default_class8();
            let body = BodyParams { mass_kg: 30_000.0, rotating_inertia_factor: 0.05, wheel_radius_m: 0.5 };
            let rolling = RollingParams::default_truck_tire();
            let f = |v: f64, rho: f64| {
                let s = MotionState { v, accel: 0.0, grade: 0.0, tire_k: 300.0, heading_deg: 0.0, held_at_rest: false };
                let air = AmbientAir { density: rho, wind_speed: 0.0, wind_dir_deg: 0.0 };
                road_load(&s, &air, &body, &aero, &rolling, TruckConfiguration::TractorTrailer).unwrap().forces.aero
            };
            prop_assert!(f(v + dv, rho) > f(v, rho));
            prop_assert!((f(v, 2.0 * rho) - 2.0 * f(v, rho)).abs() <= 1e-9 * f(v, rho));
        }

        #[test]
        fn breakdown_sums_to_total(v in 0.0f64..35.0, a in -2.0f64..2.0, g in -0.25f64..0.25, t in 250.0f64..350.0) {
            let aero = AeroParams::<f64>::default_class8();
            let body = BodyParams { mass_kg: 27_200.0, rotating_inertia_factor: 0.05, wheel_radius_m: 0.5 };
            let rolling = RollingParams::default_truck_tire();
            let s = MotionState { v, accel: a, grade: g, tire_k: t, heading_deg: 0.0, held_at_rest: false };
            let air = AmbientAir { density: 1.2, wind_speed: 4.0, wind_dir_deg: 70.0 };
            let rl = road_load(&s, &air, &body, &aero, &rolling, TruckConfiguration::TractorTrailer).unwrap();
            let sum = rl.forces.aero + rl.forces.rolling + rl.forces.grade + rl.forces.inertial;
            prop_assert!((sum - rl.total_n).abs() <= 1e-12 * rl.total_n.abs().max(1.0));
        }

        #[test]
        fn tire_trajectory_bounded_and_monotone(t0 in 240.0f64..360.0, v in 0.0f64..35.0, amb in 250.0f64..315.0) {
            let p = TireThermalParams::default_truck_tire();
            let t_st = p.stabilized_temperature(v, amb);
            let (lo, hi) = if t0 < t_st { (t0, t_st) } else { (t_st, t0) };
            let mut t = t0;
            let mut prev_gap = (t - t_st).abs();
            for _ in 0..5000 {
                t += tire_temperature_derivative(t, v, amb, &p);
                let gap = (t - t_st).abs();
                prop_assert!(t >= lo - 1e-9 && t <= hi + 1e-9);
                prop_assert!(gap <= prev_gap + 1e-12);
                prev_gap = gap;
            }
        }
    }
}
