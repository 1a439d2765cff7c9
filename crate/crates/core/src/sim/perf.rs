//! Performance figures from force balance and a full-throttle launch.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::roadload::{road_load, AmbientAir, BodyParams, MotionState, TruckConfiguration};
use crate::scalar::{celsius_to_kelvin, kmh_to_ms, ms_to_kmh, Scalar};
use crate::scenario::ideal_gas_density;
use crate::vehicle::{Powertrain, VehicleConfig};

use super::choose_gear;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerfConditions<T> {
    pub mass_kg: T,
    pub ambient_k: T,
    pub configuration: TruckConfiguration,
    /// Launch-simulation step, s.
    pub dt: T,
    /// Grades for the gradeability figures, percent.
    pub grades_pct: Vec<T>,
    /// Speed that must be sustained for startability, km/h.
    pub startability_kmh: T,
}

impl<T: Scalar> Default for PerfConditions<T> {
    fn default() -> Self {
        Self {
            mass_kg: T::lit(27_200.0),
            ambient_k: celsius_to_kelvin(T::lit(25.0)),
            configuration: TruckConfiguration::TractorTrailer,
            dt: T::lit(0.05),
            grades_pct: vec![T::one(), T::lit(2.0), T::lit(6.0)],
            startability_kmh: T::lit(8.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Startability<T> {
    /// Continuous machine limits (the only figure for diesel), percent grade.
    pub continuous_pct: T,
    /// Short-term electric machine limits, percent grade.
    pub peak_pct: Option<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceReport<T> {
    pub max_speed_kmh: T,
    pub t_0_48_s: Option<T>,
    pub t_48_80_s: Option<T>,
    pub t_80_96_s: Option<T>,
    /// (grade percent, sustained speed km/h); speed 0 when the grade cannot
    /// be held at any speed.
    pub gradeability_kmh: Vec<(T, T)>,
    pub startability: Startability<T>,
}

struct Balance<'a, T> {
    vehicle: &'a VehicleConfig<T>,
    body: BodyParams<T>,
    cond: &'a PerfConditions<T>,
    air: AmbientAir<T>,
}

impl<'a, T: Scalar> Balance<'a, T> {
    fn new(vehicle: &'a VehicleConfig<T>, cond: &'a PerfConditions<T>) -> Self {
        Self {
            vehicle,
            body: BodyParams { mass_kg: cond.mass_kg, ..vehicle.body.clone() },
            cond,
            air: AmbientAir {
                density: ideal_gas_density(cond.ambient_k),
                wind_speed: T::zero(),
                wind_dir_deg: T::zero(),
            },
        }
    }

    /// Steady resistive force with tires at their stabilized temperature.
    fn resistance(&self, v: T, grade: T) -> Result<T> {
        let tire_k = self.vehicle.tire.stabilized_temperature(v, self.cond.ambient_k);
        let motion = MotionState { v, accel: T::zero(), grade, tire_k, heading_deg: T::zero(), held_at_rest: false };
        let rl = road_load(
            &motion,
            &self.air,
            &self.body,
            &self.vehicle.aero,
            &self.vehicle.rolling,
            self.cond.configuration,
        )?;
        Ok(rl.forces.resistive())
    }

    fn diesel_aux_torque(&self, engine_rad_s: T) -> Result<T> {
        let p = self.vehicle.aux.average_power(self.cond.ambient_k, Some(engine_rad_s))?;
        crate::auxiliaries::diesel_aux_torque(p, engine_rad_s)
    }

    /// Axle torque available in gear `g`, or `None` on over-speed.
    fn gear_torque(&self, v: T, g: usize, peak: bool) -> Result<Option<T>> {
        let w_w = v / self.body.wheel_radius_m;
        Ok(match &self.vehicle.powertrain {
            Powertrain::Diesel(d) => {
                let (w_e, _) = d.engine_speed(w_w, g);
                d.capacity(w_w, g, self.diesel_aux_torque(w_e)?).max_axle_torque
            }
            Powertrain::Electric { eaxle, .. } => eaxle.capacity(w_w, g, peak).max_axle_torque,
        })
    }

    fn n_gears(&self) -> usize {
        match &self.vehicle.powertrain {
            Powertrain::Diesel(d) => d.gearbox.n_gears(),
            Powertrain::Electric { eaxle, .. } => eaxle.gearbox.n_gears(),
        }
    }

    /// Largest tractive force over all gears, N.
    fn max_force(&self, v: T, peak: bool) -> Result<Option<T>> {
        let mut best: Option<T> = None;
        for g in 0..self.n_gears() {
            if let Some(t) = self.gear_torque(v, g, peak)? {
                let f = t / self.body.wheel_radius_m;
                best = Some(best.map_or(f, |b| b.max(f)));
            }
        }
        Ok(best)
    }

    fn surplus(&self, v: T, grade: T, peak: bool) -> Result<Option<T>> {
        Ok(match self.max_force(v, peak)? {
            Some(f) => Some(f - self.resistance(v, grade)?),
            None => None,
        })
    }

    /// Highest speed with non-negative force surplus at `grade`, m/s.
    fn top_speed(&self, grade: T, peak: bool) -> Result<T> {
        let step = T::lit(0.05);
        let mut v = step;
        let mut last_ok: Option<T> = None;
        while v < T::lit(80.0) {
            if matches!(self.surplus(v, grade, peak)?, Some(x) if x >= T::zero()) {
                last_ok = Some(v);
            }
            v = v + step;
        }
        let Some(lo) = last_ok else { return Ok(T::zero()) };
        let (mut lo, mut hi) = (lo, lo + step);
        for _ in 0..50 {
            let mid = (lo + hi) * T::lit(0.5);
            if matches!(self.surplus(mid, grade, peak)?, Some(x) if x >= T::zero()) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(lo)
    }

    /// Steepest grade (rise over run) that can be held at every speed up
    /// to `v_max`.
    fn max_grade(&self, v_max: T, peak: bool) -> Result<T> {
        let n = 32;
        let mut worst = T::lit(10.0);
        for k in 0..=n {
            let v = v_max * T::lit(k as f64 / n as f64);
            let Some(f) = self.max_force(v, peak)? else { return Ok(T::zero()) };
            let (mut lo, mut hi) = (T::zero(), T::lit(10.0));
            if f < self.resistance(v, lo)? {
                return Ok(T::zero());
            }
            for _ in 0..60 {
                let mid = (lo + hi) * T::lit(0.5);
                if f >= self.resistance(v, mid)? {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            worst = worst.min(lo);
        }
        Ok(worst)
    }

    /// Full-throttle launch on a flat road; returns crossing times of the
    /// given speeds (m/s).
    fn launch(&self, marks: &[T]) -> Result<Vec<Option<T>>> {
        let dt = self.cond.dt;
        let r = self.body.wheel_radius_m;
        let m_eq = self.body.equivalent_mass();
        let mut out = vec![None; marks.len()];
        let (mut t, mut v) = (T::zero(), T::zero());
        let mut gear = 0usize;
        let mut since_shift = T::lit(1e9);
        let mut peak_timer = T::zero();
        while t < T::lit(600.0) && out.iter().any(Option::is_none) {
            let w_w = v / r;
            let (gb, extra, peak) = match &self.vehicle.powertrain {
                Powertrain::Diesel(d) => (&d.gearbox, T::one(), false),
                Powertrain::Electric { eaxle, .. } => {
                    (&eaxle.gearbox, eaxle.wheel_end_ratio, peak_timer < eaxle.motor.peak_duration_s)
                }
            };
            let caps: Vec<_> = (0..gb.n_gears())
                .map(|g| {
                    let machine = match &self.vehicle.powertrain {
                        Powertrain::Diesel(d) => d.engine_speed(w_w, g).0,
                        Powertrain::Electric { eaxle, .. } => eaxle.motor_speed(w_w, g),
                    };
                    self.gear_torque(v, g, peak)
                        .map(|t| crate::gearbox::GearCapacity { machine_rad_s: machine, max_axle_torque: t })
                })
                .collect::<Result<_>>()?;
            let demand = caps[gear].max_axle_torque.unwrap_or_else(T::zero);
            let g = choose_gear(gb, gear, since_shift, w_w, extra, demand, |i| caps[i]);
            if g != gear {
                gear = g;
                since_shift = T::zero();
            }
            let torque = caps[gear].max_axle_torque.unwrap_or_else(T::zero);
            if let Powertrain::Electric { eaxle, .. } = &self.vehicle.powertrain {
                let w_m = eaxle.motor_speed(w_w, gear);
                let cont =
                    eaxle.n() * eaxle.motor.torque_limit(w_m, false) * eaxle.ratio(gear) * eaxle.efficiency(gear);
                peak_timer = if torque > cont { peak_timer + dt } else { (peak_timer - dt).max(T::zero()) };
            }
            let a = ((torque / r - self.resistance(v, T::zero())?) / m_eq).max(T::zero());
            let v_new = v + a * dt;
            for (slot, &mark) in out.iter_mut().zip(marks) {
                if slot.is_none() && v_new >= mark && a > T::zero() {
                    *slot = Some(t + (mark - v) / a);
                }
            }
            if a == T::zero() {
                break;
            }
            v = v_new;
            t = t + dt;
            since_shift = since_shift + dt;
        }
        Ok(out)
    }
}

pub fn performance_characterize<T: Scalar>(
    vehicle: &VehicleConfig<T>,
    cond: &PerfConditions<T>,
) -> Result<PerformanceReport<T>> {
    vehicle.validate()?;
    let b = Balance::new(vehicle, cond);
    let electric = matches!(vehicle.powertrain, Powertrain::Electric { .. });
    let max_speed = b.top_speed(T::zero(), electric)?;
    let marks = [kmh_to_ms(T::lit(48.0)), kmh_to_ms(T::lit(80.0)), kmh_to_ms(T::lit(96.0))];
    let times = b.launch(&marks)?;
    let diff = |a: Option<T>, b: Option<T>| match (a, b) {
        (Some(a), Some(b)) => Some(b - a),
        _ => None,
    };
    let gradeability = cond
        .grades_pct
        .iter()
        .map(|&g| Ok((g, ms_to_kmh(b.top_speed(g / T::lit(100.0), false)?))))
        .collect::<Result<Vec<_>>>()?;
    let v_start = kmh_to_ms(cond.startability_kmh);
    let to_pct = |g: T| g * T::lit(100.0);
    let startability = Startability {
        continuous_pct: to_pct(b.max_grade(v_start, false)?),
        peak_pct: if electric { Some(to_pct(b.max_grade(v_start, true)?)) } else { None },
    };
    Ok(PerformanceReport {
        max_speed_kmh: ms_to_kmh(max_speed),
        t_0_48_s: times[0],
        t_48_80_s: diff(times[0], times[1]),
        t_80_96_s: diff(times[1], times[2]),
        gradeability_kmh: gradeability,
        startability,
    })
}
