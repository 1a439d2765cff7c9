//! Distance-domain reference speed with preemptive slowdowns, and the PI
//! pedal controller that tracks it.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::scalar::Scalar;
use crate::scenario::RouteProfile;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar"))]
pub struct DriverParams<T> {
    pub accel_max: T,
    /// Comfortable deceleration, positive.
    pub decel_max: T,
    pub kp: T,
    pub ki: T,
    /// Longest braking manoeuvre the driver anticipates, m. Profiles that
    /// need more are still built but logged.
    pub lookahead_m: T,
    /// Fraction of the posted limit the driver aims for.
    pub compliance: T,
    /// Integration-rate multiplier while the error opposes the stored
    /// integral, so an overshoot lifts the pedal quickly. 1 is a plain PI.
    #[serde(default = "default_one")]
    pub unwind_gain: T,
}

fn default_one<T: Scalar>() -> T {
    T::one()
}

impl<T: Scalar> DriverParams<T> {
    /// Conservative calibration.
    pub fn conservative() -> Self {
        Self {
            accel_max: T::lit(0.7),
            decel_max: T::lit(0.8),
            kp: T::lit(0.5),
            ki: T::lit(0.05),
            lookahead_m: T::lit(2000.0),
            compliance: T::lit(0.98),
            unwind_gain: T::lit(10.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.accel_max > T::zero() && self.decel_max > T::zero()) {
            return Err(SimError::invalid("driver", "comfort limits must be positive"));
        }
        if self.kp < T::zero() || self.ki < T::zero() {
            return Err(SimError::invalid("driver", "gains must be non-negative"));
        }
        if !(self.compliance > T::zero() && self.compliance <= T::one()) {
            return Err(SimError::invalid("driver", "compliance must lie in (0, 1]"));
        }
        if self.unwind_gain < T::one() {
            return Err(SimError::invalid("driver", "unwind gain must be at least 1"));
        }
        if !(self.lookahead_m > T::zero()) {
            return Err(SimError::invalid("driver", "lookahead must be positive"));
        }
        Ok(())
    }
}

/// Reference speed over distance. Node values already respect the limit cap
/// and both kinematic envelopes; between nodes the profile is rebuilt from
/// the same three constraints, so evaluation is exact, not interpolated.
#[derive(Debug, Clone)]
pub struct SpeedProfile<T> {
    s: Vec<T>,
    v: Vec<T>,
    /// Cap on segment `[s[i], s[i+1])`.
    cap: Vec<T>,
    accel: T,
    decel: T,
}

impl<T: Scalar> SpeedProfile<T> {
    pub fn length(&self) -> T {
        self.s[self.s.len() - 1]
    }

    pub fn nodes(&self) -> impl Iterator<Item = (T, T)> + '_ {
        self.s.iter().copied().zip(self.v.iter().copied())
    }

    pub fn segment_cap(&self, s: T) -> T {
        self.cap[self.segment(s)]
    }

    fn segment(&self, s: T) -> usize {
        let n = self.s.len();
        if s <= self.s[0] {
            return 0;
        }
        let p = self.s.partition_point(|&k| k <= s);
        p.saturating_sub(1).min(n - 2)
    }

    pub fn eval(&self, s: T) -> T {
        let two = T::lit(2.0);
        let s = s.clamp_to(self.s[0], self.length());
        let i = self.segment(s);
        let back = (self.v[i + 1] * self.v[i + 1] + two * self.decel * (self.s[i + 1] - s)).sqrt();
        let fwd = (self.v[i] * self.v[i] + two * self.accel * (s - self.s[i])).sqrt();
        self.cap[i].min(back).min(fwd)
    }
}

/// Builds the reference speed profile. The limit of point `i` applies on
/// `[s_i, s_{i+1})`. Speed starts and ends at zero.
pub fn reference_speed<T: Scalar>(route: &RouteProfile<T>, params: &DriverParams<T>) -> SpeedProfile<T> {
    let pts = &route.points;
    let n = pts.len();
    let s: Vec<T> = pts.iter().map(|p| p.s).collect();
    let cap: Vec<T> = pts[..n - 1].iter().map(|p| params.compliance * p.v_lim).collect();
    let two = T::lit(2.0);

    // node caps: lower of adjacent segments, zero at both ends
    let mut v: Vec<T> = (0..n).map(|i| if i == 0 || i == n - 1 { T::zero() } else { cap[i - 1].min(cap[i]) }).collect();

    // backward pass: braking envelope from every downstream drop
    for i in (0..n - 1).rev() {
        let ds = s[i + 1] - s[i];
        let reach = (v[i + 1] * v[i + 1] + two * params.decel_max * ds).sqrt();
        v[i] = v[i].min(reach);
    }
    let top = cap.iter().copied().fold(T::zero(), T::max);
    if top * top / (two * params.decel_max) > params.lookahead_m {
        log::warn!(
            "route {}: braking from {:.1} m/s needs more than the {:.0} m lookahead",
            route.id,
            top.as_f64(),
            params.lookahead_m.as_f64()
        );
    }
    // forward pass: acceleration envelope
    for i in 1..n {
        let ds = s[i] - s[i - 1];
        let reach = (v[i - 1] * v[i - 1] + two * params.accel_max * ds).sqrt();
        v[i] = v[i].min(reach);
    }

    SpeedProfile { s, v, cap, accel: params.accel_max, decel: params.decel_max }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PedalCommand<T> {
    pub accel: T,
    pub brake: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PiState<T> {
    /// Integral of speed error, m.
    pub integral: T,
}

/// One PI update with the error sampled at the start of the step. The
/// integrator is frozen while the pedal saturates in the direction of the
/// error, and clamped so its term alone never exceeds full pedal.
pub fn pedal_command<T: Scalar>(
    v: T,
    v_ref: T,
    dt: T,
    params: &DriverParams<T>,
    state: &mut PiState<T>,
) -> PedalCommand<T> {
    debug_assert!(dt > T::zero());
    let e = v_ref - v;
    let rate = if e * state.integral < T::zero() { params.unwind_gain } else { T::one() };
    let mut candidate = state.integral + rate * e * dt;
    if rate > T::one() && candidate * state.integral < T::zero() {
        candidate = T::zero();
    }
    let u_try = params.kp * e + params.ki * candidate;
    let saturating = (u_try > T::one() && e > T::zero()) || (u_try < -T::one() && e < T::zero());
    if !saturating {
        state.integral = candidate;
    }
    if params.ki > T::zero() {
        let bound = T::one() / params.ki;
        state.integral = state.integral.clamp_to(-bound, bound);
    }
    let u = params.kp * e + params.ki * state.integral;
    if u > T::zero() {
        PedalCommand { accel: u.min(T::one()), brake: T::zero() }
    } else if u < T::zero() {
        PedalCommand { accel: T::zero(), brake: (-u).min(T::one()) }
    } else {
        PedalCommand::default()
    }
}

/// Linear response of the vehicle to the pedals over one step:
/// `a = bias + gain_accel * u` for `u > 0`, `bias + gain_brake * u` below.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PedalPlant<T> {
    pub bias: T,
    pub gain_accel: T,
    pub gain_brake: T,
}

/// PI update with the error taken at the end of the step, as predicted by
/// `plant` for the pedal being chosen (backward Euler on the control loop).
pub fn pedal_command_implicit<T: Scalar>(
    v: T,
    v_ref: T,
    dt: T,
    plant: &PedalPlant<T>,
    params: &DriverParams<T>,
    state: &mut PiState<T>,
) -> PedalCommand<T> {
    debug_assert!(dt > T::zero());
    let c = params.kp + params.ki * dt;
    let q = c * (v_ref - v - dt * plant.bias) + params.ki * state.integral;
    let k = if q >= T::zero() { plant.gain_accel } else { plant.gain_brake };
    let u_free = q / (T::one() + c * dt * k.max(T::zero()));
    let u = u_free.clamp_to(-T::one(), T::one());
    let k = if u >= T::zero() { plant.gain_accel } else { plant.gain_brake };
    let e_end = v_ref - v - dt * (plant.bias + k * u);
    let saturating = (u_free > T::one() && e_end > T::zero()) || (u_free < -T::one() && e_end < T::zero());
    if !saturating {
        let rate = if e_end * state.integral < T::zero() { params.unwind_gain } else { T::one() };
        let mut next = state.integral + rate * e_end * dt;
        if rate > T::one() && next * state.integral < T::zero() {
            next = T::zero();
        }
        state.integral = next;
    }
    if params.ki > T::zero() {
        let bound = T::one() / params.ki;
        state.integral = state.integral.clamp_to(-bound, bound);
    }
    if u > T::zero() {
        PedalCommand { accel: u, brake: T::zero() }
    } else if u < T::zero() {
        PedalCommand { accel: T::zero(), brake: -u }
    } else {
        PedalCommand::default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{Direction, RoutePoint, RouteProfile};
    use approx::assert_relative_eq;

    fn route(segments: &[(f64, f64)]) -> RouteProfile<f64> {
        // (length m, limit m/s) segments
        let mut pts = Vec::new();
        let mut s = 0.0;
        for &(len, lim) in segments {
            let steps = (len / 50.0).round() as usize;
            for k in 0..steps {
                pts.push(RoutePoint {
                    lat: 32.0,
                    lon: -81.0 + (s + k as f64 * 50.0) * 1e-5,
                    s: s + k as f64 * 50.0,
                    v_lim: lim,
                    z: 0.0,
                    heading_deg: 90.0,
                });
            }
            s += len;
        }
        let last = segments.last().unwrap().1;
        pts.push(RoutePoint { lat: 32.0, lon: -81.0 + s * 1e-5, s, v_lim: last, z: 0.0, heading_deg: 90.0 });
        RouteProfile::new("t".into(), Direction::Outbound, 1, pts).unwrap()
    }

    #[test]
    fn constant_limit_interior_is_capped() {
        let r = route(&[(20_000.0, 25.0)]);
        let p = DriverParams::conservative();
        let prof = reference_speed(&r, &p);
        assert_relative_eq!(prof.eval(10_000.0), 0.98 * 25.0, epsilon = 1e-12);
        assert_eq!(prof.eval(20_000.0), 0.0);
        assert_eq!(prof.eval(0.0), 0.0);
    }

    #[test]
    fn braking_starts_420_m_before_drop() {
        let r = route(&[(10_000.0, 29.0), (5_000.0, 13.0)]);
        let p = DriverParams { compliance: 1.0, ..DriverParams::conservative() };
        let prof = reference_speed(&r, &p);
        let d = (29.0f64 * 29.0 - 13.0 * 13.0) / (2.0 * 0.8);
        assert_relative_eq!(d, 420.0, epsilon = 1e-12);
        let start = 10_000.0 - d;
        assert_relative_eq!(prof.eval(start - 1.0), 29.0, epsilon = 1e-12);
        assert!(prof.eval(start + 1.0) < 29.0);
        assert_relative_eq!(prof.eval(10_000.0), 13.0, epsilon = 1e-12);
        let mid = 10_000.0 - 200.0;
        assert_relative_eq!(prof.eval(mid), (169.0f64 + 2.0 * 0.8 * 200.0).sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn profile_respects_limits_and_comfort() {
        let r = route(&[(3_000.0, 20.0), (4_000.0, 31.0), (600.0, 11.0), (5_000.0, 27.0), (1_000.0, 15.0)]);
        let p = DriverParams::conservative();
        let prof = reference_speed(&r, &p);
        let ds = 1.0;
        let mut s = 0.0;
        let mut prev = prof.eval(0.0);
        while s + ds <= prof.length() {
            s += ds;
            let v = prof.eval(s);
            assert!(v <= p.compliance * r.limit_at(s) + 1e-9, "cap violated at {s}");
            let dv2 = v * v - prev * prev;
            assert!(dv2 <= 2.0 * p.accel_max * ds + 1e-9, "accel violated at {s}");
            assert!(dv2 >= -2.0 * p.decel_max * ds - 1e-9, "decel violated at {s}");
            prev = v;
        }
    }

    #[test]
    fn pedal_examples() {
        let p = DriverParams { kp: 0.2, ki: 0.05, ..DriverParams::conservative() };
        let mut st = PiState::default();
        let c = pedal_command(10.0, 10.0, 1.0, &p, &mut st);
        assert_eq!((c.accel, c.brake), (0.0, 0.0));

        let mut st = PiState::default();
        let c = pedal_command(0.0, 30.0, 1.0, &p, &mut st);
        assert_eq!((c.accel, c.brake), (1.0, 0.0));

        let mut st = PiState::default();
        pedal_command(9.0, 10.0, 1.0, &p, &mut st);
        let c = pedal_command(9.0, 10.0, 1.0, &p, &mut st);
        assert_relative_eq!(c.accel, 0.3, epsilon = 1e-12);
        assert_eq!(c.brake, 0.0);
    }

    #[test]
    fn pedals_mutually_exclusive() {
        let p = DriverParams::<f64>::conservative();
        let mut st = PiState::default();
        for k in 0..400 {
            let v = 15.0 + 8.0 * ((k as f64) * 0.07).sin();
            let c = pedal_command(v, 15.0, 0.5, &p, &mut st);
            assert!(c.accel * c.brake == 0.0);
            assert!((0.0..=1.0).contains(&c.accel) && (0.0..=1.0).contains(&c.brake));
        }
    }

    #[test]
    fn implicit_without_plant_matches_explicit() {
        let p = DriverParams { kp: 0.2, ki: 0.05, unwind_gain: 1.0, ..DriverParams::conservative() };
        let none = PedalPlant { bias: 0.0, gain_accel: 0.0, gain_brake: 0.0 };
        let (mut a, mut b) = (PiState::default(), PiState::default());
        for k in 0..50 {
            let v = 13.0 + 0.8 * ((k as f64) * 0.3).sin();
            let x = pedal_command(v, 13.0, 1.0, &p, &mut a);
            let y = pedal_command_implicit(v, 13.0, 1.0, &none, &p, &mut b);
            assert_relative_eq!(x.accel, y.accel, epsilon = 1e-12);
            assert_relative_eq!(x.brake, y.brake, epsilon = 1e-12);
        }
    }

    #[test]
    fn implicit_pedal_satisfies_end_of_step_law() {
        let p = DriverParams::<f64>::conservative();
        let plant = PedalPlant { bias: -0.1, gain_accel: 1.5, gain_brake: 4.0 };
        let mut st = PiState { integral: 0.4 };
        let i0 = st.integral;
        let dt = 1.0;
        let c = pedal_command_implicit(10.0, 10.6, dt, &plant, &p, &mut st);
        let u = c.accel - c.brake;
        let e_end = 10.6 - (10.0 + dt * (plant.bias + plant.gain_accel * u));
        assert_relative_eq!(u, (p.kp + p.ki * dt) * e_end + p.ki * i0, epsilon = 1e-12);
        assert_relative_eq!(st.integral, i0 + e_end * dt, epsilon = 1e-12);
    }

    #[test]
    fn implicit_loop_settles_without_ringing_at_long_steps() {
        // a stiff brake that an explicit loop at this step would overshoot
        let p = DriverParams::<f64>::conservative();
        let plant = PedalPlant { bias: 0.0, gain_accel: 3.0, gain_brake: 8.0 };
        let mut st = PiState::default();
        let (mut v, dt) = (20.0, 2.0);
        let mut lowest = v;
        for _ in 0..40 {
            let c = pedal_command_implicit(v, 15.0, dt, &plant, &p, &mut st);
            let u = c.accel - c.brake;
            let a = plant.bias + if u >= 0.0 { plant.gain_accel } else { plant.gain_brake } * u;
            v += a * dt;
            lowest = lowest.min(v);
        }
        assert!((v - 15.0).abs() < 1e-6, "v = {v}");
        assert!(lowest > 15.0 - 0.05, "undershoot to {lowest}");
    }
}
