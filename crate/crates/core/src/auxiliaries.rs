//! On/off duty-cycle auxiliary loads. Ambient-dependent components get a
//! duty chosen so their time average matches a target load curve.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::interp::Table1;
use crate::scalar::{celsius_to_kelvin, rad_s_to_rpm, Scalar};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum OnPower<T> {
    Constant {
        watts: T,
    },
    /// On-power vs engine speed in rpm; clamped at the table ends.
    VsEngineSpeed {
        watts_vs_rpm: Table1<T>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum DutySource<T> {
    Always,
    Fixed {
        duty: T,
    },
    /// Target average load vs ambient temperature (K). Speed-dependent
    /// components convert it to a duty at `reference_rpm`.
    Ambient {
        load_w_vs_k: Table1<T>,
        reference_rpm: Option<T>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuxComponentSpec<T> {
    pub name: String,
    /// Cycle length, s. Ignored for always-on components.
    pub period_s: Option<T>,
    pub duty: DutySource<T>,
    pub power: OnPower<T>,
}

pub fn duty_from_ambient<T: Scalar>(load_w: T, on_power_w: T) -> T {
    if !(on_power_w > T::zero()) {
        return T::zero();
    }
    (load_w / on_power_w).clamp_to(T::zero(), T::one())
}

/// Fraction of `[t0, t0 + dt)` during which a component with the given
/// duty and period is on. On-window is the start of every period.
pub fn on_fraction<T: Scalar>(t0: T, dt: T, duty: T, period: T) -> T {
    if duty <= T::zero() {
        return T::zero();
    }
    if duty >= T::one() {
        return T::one();
    }
    let on = duty * period;
    // time spent on during [0, x)
    let cum = |x: T| {
        let k = (x / period).floor();
        let r = x - k * period;
        k * on + r.min(on)
    };
    if !(dt > T::zero()) {
        return if t0 - (t0 / period).floor() * period < on { T::one() } else { T::zero() };
    }
    ((cum(t0 + dt) - cum(t0)) / dt).clamp_to(T::zero(), T::one())
}

impl<T: Scalar> AuxComponentSpec<T> {
    pub fn validate(&self) -> Result<()> {
        let what = || format!("auxiliary {}", self.name);
        match &self.duty {
            DutySource::Always => {}
            DutySource::Fixed { duty } => {
                if !(*duty >= T::zero() && *duty <= T::one()) {
                    return Err(SimError::invalid(what(), "duty outside [0, 1]"));
                }
            }
            DutySource::Ambient { load_w_vs_k, .. } => {
                load_w_vs_k.validate()?;
                if load_w_vs_k.y.iter().any(|v| *v < T::zero()) {
                    return Err(SimError::invalid(what(), "negative target load"));
                }
            }
        }
        if !matches!(self.duty, DutySource::Always) {
            match self.period_s {
                Some(p) if p > T::zero() => {}
                _ => return Err(SimError::invalid(what(), "cycled component needs a positive period")),
            }
        }
        match &self.power {
            OnPower::Constant { watts } if *watts < T::zero() => {
                return Err(SimError::invalid(what(), "negative power"));
            }
            OnPower::VsEngineSpeed { watts_vs_rpm } => {
                watts_vs_rpm.validate()?;
                if watts_vs_rpm.y.iter().any(|v| *v < T::zero()) {
                    return Err(SimError::invalid(what(), "negative power"));
                }
            }
            _ => {}
        }
        Ok(())
    }

    pub fn needs_engine_speed(&self) -> bool {
        matches!(self.power, OnPower::VsEngineSpeed { .. })
    }

    pub fn on_power(&self, engine_rad_s: Option<T>) -> Result<T> {
        match &self.power {
            OnPower::Constant { watts } => Ok(*watts),
            OnPower::VsEngineSpeed { watts_vs_rpm } => {
                let w = engine_rad_s
                    .ok_or_else(|| SimError::invalid(format!("auxiliary {}", self.name), "engine speed required"))?;
                Ok(watts_vs_rpm.eval(rad_s_to_rpm(w)))
            }
        }
    }

    pub fn duty(&self, t_amb_k: T) -> T {
        match &self.duty {
            DutySource::Always => T::one(),
            DutySource::Fixed { duty } => *duty,
            DutySource::Ambient { load_w_vs_k, reference_rpm } => {
                let p_on = match (&self.power, reference_rpm) {
                    (OnPower::Constant { watts }, _) => *watts,
                    (OnPower::VsEngineSpeed { watts_vs_rpm }, Some(rpm)) => watts_vs_rpm.eval(*rpm),
                    (OnPower::VsEngineSpeed { watts_vs_rpm }, None) => watts_vs_rpm.eval(T::lit(1500.0)),
                };
                duty_from_ambient(load_w_vs_k.eval(t_amb_k), p_on)
            }
        }
    }

    /// Mean power over `[t, t + dt)`, W. `dt = 0` gives the instantaneous value.
    pub fn power_over(&self, t: T, dt: T, t_amb_k: T, engine_rad_s: Option<T>) -> Result<T> {
        let p_on = self.on_power(engine_rad_s)?;
        let frac = match self.period_s {
            Some(period) if !matches!(self.duty, DutySource::Always) => on_fraction(t, dt, self.duty(t_amb_k), period),
            _ => T::one(),
        };
        Ok(p_on * frac)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar"))]
pub struct AuxSuite<T> {
    pub components: Vec<AuxComponentSpec<T>>,
    /// Multiplies every component's power; 1 for the shipped calibration.
    #[serde(default = "one")]
    pub scale: T,
}

fn one<T: Scalar>() -> T {
    T::one()
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AuxLoad<T> {
    pub powers_w: Vec<T>,
    pub total_w: T,
}

impl<T: Scalar> AuxSuite<T> {
    pub fn validate(&self) -> Result<()> {
        for c in &self.components {
            c.validate()?;
        }
        if !(self.scale >= T::zero()) {
            return Err(SimError::invalid("auxiliaries", "scale must be >= 0"));
        }
        Ok(())
    }

    pub fn names(&self) -> Vec<String> {
        self.components.iter().map(|c| c.name.clone()).collect()
    }

    pub fn power_over(&self, t: T, dt: T, t_amb_k: T, engine_rad_s: Option<T>) -> Result<AuxLoad<T>> {
        let mut out = AuxLoad { powers_w: Vec::with_capacity(self.components.len()), total_w: T::zero() };
        self.power_into(t, dt, t_amb_k, engine_rad_s, &mut out)?;
        Ok(out)
    }

    /// As [`power_over`](Self::power_over), reusing `out`'s allocation.
    pub fn power_into(&self, t: T, dt: T, t_amb_k: T, engine_rad_s: Option<T>, out: &mut AuxLoad<T>) -> Result<()> {
        out.powers_w.clear();
        out.total_w = T::zero();
        for c in &self.components {
            let p = c.power_over(t, dt, t_amb_k, engine_rad_s)? * self.scale;
            out.powers_w.push(p);
            out.total_w = out.total_w + p;
        }
        Ok(())
    }

    pub fn power_at(&self, t: T, t_amb_k: T, engine_rad_s: Option<T>) -> Result<AuxLoad<T>> {
        self.power_over(t, T::zero(), t_amb_k, engine_rad_s)
    }

    /// Long-run average power at constant ambient and engine speed.
    pub fn average_power(&self, t_amb_k: T, engine_rad_s: Option<T>) -> Result<T> {
        let mut total = T::zero();
        for c in &self.components {
            total = total + c.on_power(engine_rad_s)? * c.duty(t_amb_k);
        }
        Ok(total * self.scale)
    }

    /// Electric truck auxiliaries, excluding the BTMS.
    pub fn default_electric() -> Self {
        let constant = |w: f64| OnPower::Constant { watts: T::lit(w) };
        Self {
            components: vec![
                cycled("e_hvac_compressor", 150.0, ambient(hvac_load_w(2710.0), None), constant(2710.0)),
                cycled("air_brake_pump", 100.0, ambient(air_brake_load_w(2190.0), None), constant(2190.0)),
                cycled("power_steering_pump", 100.0, fixed(0.10), constant(3000.0)),
                cycled("cooling_fan", 200.0, fixed(0.04), constant(5490.0)),
                continuous("em_cooling_pump", constant(160.0)),
                continuous("transmission_fluid_pump", constant(500.0)),
                continuous("electrical_load", constant(500.0)),
            ],
            scale: T::one(),
        }
    }

    /// Engine-driven auxiliaries of the conventional truck.
    pub fn default_diesel() -> Self {
        let constant = |w: f64| OnPower::Constant { watts: T::lit(w) };
        let rpm = |kw: [f64; 5]| OnPower::VsEngineSpeed {
            watts_vs_rpm: Table1::new(
                [500.0, 1000.0, 1500.0, 2000.0, 2500.0].iter().map(|&x| T::lit(x)).collect(),
                kw.iter().map(|&x| T::lit(x * 1000.0)).collect(),
            )
            .expect("static table"),
        };
        let reference = Some(T::lit(1500.0));
        Self {
            components: vec![
                cycled("engine_fan", 200.0, fixed(0.05), rpm([0.71, 2.36, 7.56, 16.73, 29.81])),
                cycled(
                    "hvac_compressor",
                    150.0,
                    ambient(hvac_load_w(3830.0), reference),
                    rpm([1.03, 2.45, 3.83, 5.27, 6.67]),
                ),
                cycled(
                    "air_brake_pump",
                    100.0,
                    ambient(air_brake_load_w(2530.0), reference),
                    rpm([1.0, 1.69, 2.53, 3.51, 4.51]),
                ),
                cycled("power_steering_pump", 100.0, fixed(0.10), rpm([3.04, 5.52, 8.04, 10.47, 12.99])),
                continuous("engine_coolant_pump", rpm([0.0, 0.22, 0.56, 1.25, 1.88])),
                continuous("lubricant_oil_pump", rpm([0.14, 1.24, 2.05, 3.24, 4.97])),
                continuous("transmission_fluid_pump", constant(500.0)),
                continuous("electrical_load", constant(600.0)),
            ],
            scale: T::one(),
        }
    }
}

fn cycled<T: Scalar>(name: &str, period: f64, duty: DutySource<T>, power: OnPower<T>) -> AuxComponentSpec<T> {
    AuxComponentSpec { name: name.into(), period_s: Some(T::lit(period)), duty, power }
}

fn continuous<T: Scalar>(name: &str, power: OnPower<T>) -> AuxComponentSpec<T> {
    AuxComponentSpec { name: name.into(), period_s: None, duty: DutySource::Always, power }
}

fn fixed<T: Scalar>(duty: f64) -> DutySource<T> {
    DutySource::Fixed { duty: T::lit(duty) }
}

fn ambient<T: Scalar>(load_w_vs_k: Table1<T>, reference_rpm: Option<T>) -> DutySource<T> {
    DutySource::Ambient { load_w_vs_k, reference_rpm }
}

fn curve_c<T: Scalar>(pairs: &[(f64, f64)]) -> Table1<T> {
    Table1::new(
        pairs.iter().map(|p| celsius_to_kelvin(T::lit(p.0))).collect(),
        pairs.iter().map(|p| T::lit(p.1)).collect(),
    )
    .expect("static curve")
}

/// HVAC target load: half of the on-power at 20 degC, full load at -20 and
/// +40 degC.
pub fn hvac_load_w<T: Scalar>(on_power_w: f64) -> Table1<T> {
    curve_c(&[(-20.0, on_power_w), (20.0, 0.5 * on_power_w), (40.0, on_power_w)])
}

/// Air-brake target load: 5 % duty at 20 degC, mildly higher when away.
pub fn air_brake_load_w<T: Scalar>(on_power_w: f64) -> Table1<T> {
    curve_c(&[(-20.0, 0.12 * on_power_w), (20.0, 0.05 * on_power_w), (40.0, 0.08 * on_power_w)])
}

/// Torque the engine supplies to run `power_w` of accessories.
pub fn diesel_aux_torque<T: Scalar>(power_w: T, engine_rad_s: T) -> Result<T> {
    if power_w == T::zero() {
        return Ok(T::zero());
    }
    if !(engine_rad_s > T::zero()) {
        return Err(SimError::invalid("auxiliary torque", "engine stopped with accessory demand; must idle"));
    }
    Ok(power_w / engine_rad_s)
}
