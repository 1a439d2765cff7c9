//! Fixed-step closed-loop simulation of one scenario: driver, powertrain,
//! road load, battery or fuel, then state integration.

mod perf;
mod result;

pub use perf::{performance_characterize, PerfConditions, PerformanceReport, Startability};
pub use result::{
    energy_metrics, trapezoid, AuxEnergy, EnergyLedger, EnergyMetrics, RunStatus, SimResult, SimTotals, StepRecord,
};

use serde::{Deserialize, Serialize};

use crate::auxiliaries::{diesel_aux_torque, AuxLoad};
use crate::battery::{btms_control, btms_power, Battery, BatteryState, BtmsFlags};
use crate::diesel::{fuel_litres, DieselDriveline};
use crate::driver::{pedal_command_implicit, reference_speed, DriverParams, PedalCommand, PedalPlant, PiState};
use crate::electric::{EAxleSpec, REGEN_MIN_SPEED_MS};
use crate::error::{Result, SimError};
use crate::gearbox::{GearCapacity, GearboxSpec};
use crate::roadload::{road_load, tire_temperature_derivative, AmbientAir, BodyParams, MotionState};
use crate::scalar::Scalar;
use crate::scenario::Scenario;
use crate::vehicle::{Powertrain, VehicleConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, bound(deserialize = "T: Scalar"))]
pub struct SimConfig<T> {
    pub dt: T,
    pub initial_soc: T,
    /// Initial temperatures default to the ambient at the route start.
    pub initial_tire_k: Option<T>,
    pub initial_cell_k: Option<T>,
    pub initial_house_k: Option<T>,
    pub record_stride: usize,
    /// Keep the per-step trace in the result.
    pub keep_records: bool,
    /// Floor on the reference speed before the route end, m/s. The speed
    /// profile starts and ends at zero; this gets the truck moving and over
    /// the line.
    pub creep_speed_ms: T,
    /// Time budget before the run is declared stalled; `None` derives one
    /// from the route length.
    pub max_duration_s: Option<T>,
}

impl<T: Scalar> Default for SimConfig<T> {
    fn default() -> Self {
        Self {
            dt: T::one(),
            initial_soc: T::lit(0.95),
            initial_tire_k: None,
            initial_cell_k: None,
            initial_house_k: None,
            record_stride: 1,
            keep_records: false,
            creep_speed_ms: T::one(),
            max_duration_s: None,
        }
    }
}

impl<T: Scalar> SimConfig<T> {
    pub fn with_dt(mut self, dt: T) -> Self {
        self.dt = dt;
        self
    }

    pub fn with_records(mut self) -> Self {
        self.keep_records = true;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > T::zero() && self.dt <= T::lit(2.0)) {
            return Err(SimError::invalid("dt", format!("{} s outside (0, 2]", self.dt)));
        }
        if self.record_stride == 0 {
            return Err(SimError::invalid("record stride", "must be >= 1"));
        }
        if !(self.initial_soc > T::zero() && self.initial_soc <= T::one()) {
            return Err(SimError::invalid("initial SoC", format!("{} outside (0, 1]", self.initial_soc)));
        }
        if !(self.creep_speed_ms > T::zero()) {
            return Err(SimError::invalid("creep speed", "must be positive"));
        }
        Ok(())
    }
}

/// What the powertrain did over one step.
#[derive(Debug, Clone, Copy, Default)]
struct StepOut<T> {
    axle_torque: T,
    brake_torque: T,
    machine_torque: T,
    machine_rad_s: T,
    fuel_kg_s: T,
    /// Engine shaft power (diesel) or pack terminal demand (electric), W.
    source_w: T,
    machine_loss_w: T,
    driveline_loss_w: T,
    slip_w: T,
    i_batt: T,
    heater_w: T,
    chiller_w: T,
    /// Accessory torque on the engine shaft, N*m (diesel).
    aux_torque: T,
    /// All accessory power including the BTMS, W.
    aux_w: T,
}

enum PtState<T> {
    Diesel { aux_torque: T },
    Electric { battery: BatteryState<T>, peak_timer: T },
}

/// Keeps the current gear while the shift lockout runs, unless it can no
/// longer be held or the machine has run well outside its shift band.
fn choose_gear<T: Scalar>(
    gb: &GearboxSpec<T>,
    current: usize,
    since_shift: T,
    wheel_rad_s: T,
    extra_ratio: T,
    demand: T,
    cap: impl Fn(usize) -> GearCapacity<T>,
) -> usize {
    let cand = gb.select_gear_loaded(wheel_rad_s, current, extra_ratio, demand, &cap);
    let now = cap(current);
    let w = now.machine_rad_s;
    let in_band = w <= gb.upshift_rad_s[current] * T::lit(1.1) && w >= gb.downshift_rad_s[current] * T::lit(0.9);
    let holdable = now.max_axle_torque.is_some() && wheel_rad_s > T::zero() && in_band;
    if cand != current && since_shift < gb.shift_lockout_s && holdable {
        current
    } else {
        cand
    }
}

struct StepCtx<'a, T> {
    pedal: PedalCommand<T>,
    wheel_rad_s: T,
    v: T,
    t: T,
    dt: T,
    t_amb_k: T,
    service_brake: T,
    aux: &'a mut AuxLoad<T>,
}

fn axle_request<T: Scalar>(pedal: PedalCommand<T>, capacity: Option<T>, service_brake: T) -> T {
    if pedal.accel > T::zero() {
        pedal.accel * capacity.unwrap_or_else(T::zero)
    } else {
        -pedal.brake * service_brake
    }
}

fn diesel_step<T: Scalar>(
    vehicle: &VehicleConfig<T>,
    d: &DieselDriveline<T>,
    aux_torque: &mut T,
    gear: &mut usize,
    since_shift: &mut T,
    ctx: StepCtx<'_, T>,
) -> Result<StepOut<T>> {
    let w_w = ctx.wheel_rad_s;
    let prev_aux = *aux_torque;
    let cap = |g: usize| d.capacity(w_w, g, prev_aux);
    let demand = axle_request(ctx.pedal, cap(*gear).max_axle_torque, ctx.service_brake);
    let g = choose_gear(&d.gearbox, *gear, *since_shift, w_w, T::one(), demand, cap);
    if g != *gear {
        *gear = g;
        *since_shift = T::zero();
    }
    let (w_e, _) = d.engine_speed(w_w, g);
    vehicle.aux.power_into(ctx.t, ctx.dt, ctx.t_amb_k, Some(w_e), ctx.aux)?;
    let t_aux = diesel_aux_torque(ctx.aux.total_w, w_e)?;
    *aux_torque = t_aux;
    let request = axle_request(ctx.pedal, d.capacity(w_w, g, t_aux).max_axle_torque, ctx.service_brake);
    let op = d.operating_point(request, w_w, g, t_aux)?;
    Ok(StepOut {
        axle_torque: op.axle_torque,
        brake_torque: op.brake_torque,
        machine_torque: op.engine_torque,
        aux_torque: t_aux,
        aux_w: ctx.aux.total_w,
        ..StepOut::default()
    })
}

/// Power flows over the step. Torques are held for the whole step, so
/// machine speeds are taken at the step-average wheel speed; that makes
/// the booked work equal to force times distance travelled.
fn settle_diesel<T: Scalar>(d: &DieselDriveline<T>, out: &mut StepOut<T>, gear: usize, wheel_rad_s: T) {
    let (w_e, _) = d.engine_speed(wheel_rad_s, gear);
    let net = out.machine_torque - out.aux_torque;
    let w_in = wheel_rad_s * d.gearbox.ratio(gear);
    out.machine_rad_s = w_e;
    out.fuel_kg_s = d.engine.fuel_rate(w_e, out.machine_torque);
    out.source_w = net * w_e + out.aux_w;
    out.driveline_loss_w = net * w_in - out.axle_torque * wheel_rad_s;
    out.slip_w = net * (w_e - w_in);
}

fn settle_electric<T: Scalar>(
    e: &EAxleSpec<T>,
    battery: &Battery<T>,
    state: &BatteryState<T>,
    out: &mut StepOut<T>,
    gear: usize,
    wheel_rad_s: T,
) {
    let w_m = e.motor_speed(wheel_rad_s, gear);
    let p_em = e.n() * e.motor.electrical_power(out.machine_torque, w_m);
    let shaft = e.n() * out.machine_torque * w_m;
    let (i_cell, _) = battery.current_for_power(state, p_em + out.aux_w);
    out.machine_rad_s = w_m;
    out.source_w = p_em + out.aux_w;
    out.machine_loss_w = p_em - shaft;
    out.driveline_loss_w = shaft - out.axle_torque * wheel_rad_s;
    out.i_batt = i_cell * battery.np();
}

#[allow(clippy::too_many_arguments)]
fn electric_step<T: Scalar>(
    vehicle: &VehicleConfig<T>,
    e: &EAxleSpec<T>,
    battery: &Battery<T>,
    state: &BatteryState<T>,
    peak_timer: T,
    gear: &mut usize,
    since_shift: &mut T,
    ctx: StepCtx<'_, T>,
) -> Result<StepOut<T>> {
    let w_w = ctx.wheel_rad_s;
    let peak_ok = peak_timer < e.motor.peak_duration_s;
    let cap = |g: usize| e.capacity(w_w, g, peak_ok);
    let demand = axle_request(ctx.pedal, cap(*gear).max_axle_torque, ctx.service_brake);
    let g = choose_gear(&e.gearbox, *gear, *since_shift, w_w, e.wheel_end_ratio, demand, cap);
    if g != *gear {
        *gear = g;
        *since_shift = T::zero();
    }
    let request = axle_request(ctx.pedal, e.capacity(w_w, g, peak_ok).max_axle_torque, ctx.service_brake);
    let regen_ok = ctx.v >= T::lit(REGEN_MIN_SPEED_MS) && state.soc < battery.pack.soc_ceiling;
    let mut op = e.operating_point(request, w_w, g, peak_ok, regen_ok)?;

    vehicle.aux.power_into(ctx.t, ctx.dt, ctx.t_amb_k, None, ctx.aux)?;
    let (heater_w, chiller_w) = btms_power(state.btms, &battery.pack);
    let aux_w = ctx.aux.total_w + heater_w + chiller_w;
    let p_lo = battery.charge_power_limit(state);
    let p_hi = battery.discharge_power_limit(state);
    if e.electrical_power(&op) + aux_w < p_lo {
        e.curtail_regen(&mut op, g, request, p_lo - aux_w);
    }
    if e.electrical_power(&op) + aux_w > p_hi {
        e.curtail_traction(&mut op, g, request, p_hi - aux_w);
    }
    Ok(StepOut {
        axle_torque: op.axle_torque,
        brake_torque: op.brake_torque,
        machine_torque: op.motor_torque,
        machine_rad_s: op.motor_rad_s,
        heater_w,
        chiller_w,
        aux_w,
        ..StepOut::default()
    })
}

/// Duration of the final partial step that ends exactly at the route end.
fn final_step_duration<T: Scalar>(v: T, a: T, remaining: T, dt: T) -> T {
    let disc = (v * v + T::lit(2.0) * a * remaining).max(T::zero());
    let denom = v + disc.sqrt();
    if denom > T::zero() {
        (T::lit(2.0) * remaining / denom).min(dt)
    } else {
        dt
    }
}

/// Simulates one scenario from standstill at the route start to standstill
/// at its end.
pub fn run<T: Scalar>(
    scenario: &Scenario<T>,
    vehicle: &VehicleConfig<T>,
    driver: &DriverParams<T>,
    cfg: &SimConfig<T>,
) -> Result<SimResult<T>> {
    cfg.validate()?;
    driver.validate()?;
    let route = &*scenario.route;
    if !(route.length() > T::zero()) {
        return Err(SimError::invalid("route", format!("{}: zero length", route.id)));
    }
    scenario.weather.check_matches(route.points.len())?;
    vehicle.aero.table(scenario.configuration)?;

    let profile = reference_speed(route, driver);
    let body = BodyParams { mass_kg: scenario.mass_kg, ..vehicle.body.clone() };
    let m_eq = body.equivalent_mass();
    let r_w = body.wheel_radius_m;
    let half = T::lit(0.5);
    let dt = cfg.dt;
    let s_end = route.end_s();
    let eps = T::lit(1e-6);
    let budget =
        cfg.max_duration_s.unwrap_or_else(|| T::lit(2.0) * route.length() / cfg.creep_speed_ms + T::lit(3600.0));

    let t_amb0 = scenario.weather.samples[0].t_amb_k;
    let mut pt = match &vehicle.powertrain {
        Powertrain::Diesel(_) => PtState::Diesel { aux_torque: T::zero() },
        Powertrain::Electric { battery, .. } => {
            let mut st = battery.initial_state(cfg.initial_soc, cfg.initial_cell_k.unwrap_or(t_amb0));
            st.t_house_k = cfg.initial_house_k.unwrap_or(t_amb0);
            st.btms = btms_control(st.t_cell_k, BtmsFlags { cooling: false, heating: false }, &battery.pack);
            PtState::Electric { battery: st, peak_timer: T::zero() }
        }
    };

    let aux_names = vehicle.aux.names();
    let n_aux = aux_names.len();
    let mut aux = AuxLoad { powers_w: vec![T::zero(); n_aux], total_w: T::zero() };
    let mut aux_j = vec![T::zero(); n_aux];
    let (mut heater_j, mut chiller_j) = (T::zero(), T::zero());

    let mut t = T::zero();
    let mut s = route.start_s();
    let mut v = T::zero();
    let mut tire_k = cfg.initial_tire_k.unwrap_or(t_amb0);
    let mut pi = PiState::default();
    let mut gear = 0usize;
    let mut since_shift = T::lit(1e9);
    let mut ledger = EnergyLedger::default();
    let (mut fuel_kg, mut batt_j, mut regen_j) = (T::zero(), T::zero(), T::zero());
    let mut max_over = T::lit(-1e9);
    let mut amb_weighted = T::zero();
    let mut min_soc = cfg.initial_soc;
    let mut records = Vec::new();
    let mut status = RunStatus::Completed;
    let mut step = 0usize;
    let mut last_record: Option<StepRecord<T>> = None;

    while s < s_end - eps {
        if t > budget {
            status = RunStatus::Stalled;
            break;
        }
        if let (PtState::Electric { battery: st, .. }, Powertrain::Electric { battery, .. }) =
            (&pt, &vehicle.powertrain)
        {
            if st.soc <= battery.pack.soc_floor {
                status = RunStatus::SocFloor;
                break;
            }
        }
        let seg = route.segment_at(s);
        let wx = &scenario.weather.samples[seg];
        let t_amb = wx.t_amb_k;
        let point = &route.points[seg];
        let grade = route.grades()[seg];
        let air = AmbientAir { density: wx.air_density(), wind_speed: wx.wind_speed, wind_dir_deg: wx.wind_dir_deg };
        let mut motion =
            MotionState { v, accel: T::zero(), grade, tire_k, heading_deg: point.heading_deg, held_at_rest: false };
        let rl = road_load(&motion, &air, &body, &vehicle.aero, &vehicle.rolling, scenario.configuration)?;

        // the driver aims for the speed wanted one step ahead
        let v_ref = profile.eval((s + v * dt).min(s_end)).max(cfg.creep_speed_ms);
        let w_w = v / r_w;
        let capacity = match (&pt, &vehicle.powertrain) {
            (PtState::Diesel { aux_torque }, Powertrain::Diesel(d)) => {
                d.capacity(w_w, gear, *aux_torque).max_axle_torque
            }
            (PtState::Electric { peak_timer, .. }, Powertrain::Electric { eaxle, .. }) => {
                eaxle.capacity(w_w, gear, *peak_timer < eaxle.motor.peak_duration_s).max_axle_torque
            }
            _ => unreachable!("powertrain state matches its config"),
        };
        let plant = PedalPlant {
            bias: -rl.forces.resistive() / m_eq,
            gain_accel: capacity.unwrap_or_else(T::zero) / (r_w * m_eq),
            gain_brake: vehicle.service_brake_nm / (r_w * m_eq),
        };
        let pedal = pedal_command_implicit(v, v_ref, dt, &plant, driver, &mut pi);
        let ctx = StepCtx {
            pedal,
            wheel_rad_s: w_w,
            v,
            t,
            dt,
            t_amb_k: t_amb,
            service_brake: vehicle.service_brake_nm,
            aux: &mut aux,
        };
        let out = match (&mut pt, &vehicle.powertrain) {
            (PtState::Diesel { aux_torque }, Powertrain::Diesel(d)) => {
                diesel_step(vehicle, d, aux_torque, &mut gear, &mut since_shift, ctx)
            }
            (PtState::Electric { battery: st, peak_timer }, Powertrain::Electric { eaxle, battery }) => {
                electric_step(vehicle, eaxle, battery, st, *peak_timer, &mut gear, &mut since_shift, ctx)
            }
            _ => unreachable!("powertrain state matches its config"),
        };
        let mut out = match out {
            Ok(o) => o,
            Err(SimError::OverSpeed { .. }) => {
                status = RunStatus::OverSpeed;
                break;
            }
            Err(e) => return Err(e),
        };

        let f_pt = out.axle_torque / r_w;
        let f_br = out.brake_torque / r_w;
        let mut forces = rl.forces;
        let f_net = f_pt - f_br - forces.resistive();
        let a = if v == T::zero() && f_net <= T::zero() {
            motion.held_at_rest = true;
            forces = road_load(&motion, &air, &body, &vehicle.aero, &vehicle.rolling, scenario.configuration)?.forces;
            T::zero()
        } else {
            f_net / m_eq
        };
        forces.inertial = m_eq * a;

        let mut h = dt;
        let mut v_new = (v + a * h).max(T::zero());
        let mut ds = (v + v_new) * half * h;
        if s + ds >= s_end - eps {
            h = final_step_duration(v, a, s_end - s, dt);
            v_new = (v + a * h).max(T::zero());
            ds = s_end - s;
        }
        let v_avg = (v + v_new) * half;
        match (&pt, &vehicle.powertrain) {
            (PtState::Diesel { .. }, Powertrain::Diesel(d)) => settle_diesel(d, &mut out, gear, v_avg / r_w),
            (PtState::Electric { battery: st, .. }, Powertrain::Electric { eaxle, battery }) => {
                settle_electric(eaxle, battery, st, &mut out, gear, v_avg / r_w)
            }
            _ => unreachable!("powertrain state matches its config"),
        }

        // powertrain-side energy
        let axle_w = out.axle_torque * v_avg / r_w;
        ledger.wheel_positive_j = ledger.wheel_positive_j + axle_w.max(T::zero()) * h;
        ledger.wheel_recovered_j = ledger.wheel_recovered_j + (-axle_w).max(T::zero()) * h;
        ledger.machine_loss_j = ledger.machine_loss_j + out.machine_loss_w * h;
        ledger.driveline_loss_j = ledger.driveline_loss_j + out.driveline_loss_w * h;
        ledger.clutch_slip_j = ledger.clutch_slip_j + out.slip_w * h;
        for (acc, p) in aux_j.iter_mut().zip(&aux.powers_w) {
            *acc = *acc + *p * h;
        }
        heater_j = heater_j + out.heater_w * h;
        chiller_j = chiller_j + out.chiller_w * h;
        ledger.aux_j = ledger.aux_j + out.aux_w * h;

        // vehicle-side energy
        ledger.aero_j = ledger.aero_j + forces.aero * v_avg * h;
        ledger.rolling_j = ledger.rolling_j + forces.rolling * v_avg * h;
        ledger.grade_j = ledger.grade_j + forces.grade * v_avg * h;
        ledger.friction_brake_j = ledger.friction_brake_j + f_br * v_avg * h;

        let (mut i_batt, mut v_batt, mut soc, mut t_cell, mut t_house) =
            (T::zero(), T::zero(), T::zero(), T::zero(), T::zero());
        match (&mut pt, &vehicle.powertrain) {
            (PtState::Diesel { .. }, _) => {
                fuel_kg = fuel_kg + out.fuel_kg_s * h;
                ledger.source_j = ledger.source_j + out.source_w * h;
            }
            (PtState::Electric { battery: st, peak_timer }, Powertrain::Electric { eaxle, battery }) => {
                v_batt = st.v_batt;
                let rep = battery.step(st, out.i_batt, t_amb, h)?;
                i_batt = out.i_batt;
                ledger.source_j = ledger.source_j + rep.chemical_j;
                ledger.battery_loss_j = ledger.battery_loss_j + (rep.chemical_j - rep.terminal_j);
                // anything the pack could not deliver is booked against the demand
                ledger.aux_j = ledger.aux_j + (rep.terminal_j - out.source_w * h);
                batt_j = batt_j + rep.terminal_j;
                regen_j = regen_j + (-rep.terminal_j).max(T::zero());
                soc = st.soc;
                min_soc = min_soc.min(soc);
                t_cell = st.t_cell_k;
                t_house = st.t_house_k;
                let cont = eaxle.motor.torque_limit(out.machine_rad_s, false);
                *peak_timer =
                    if out.machine_torque > cont { *peak_timer + h } else { (*peak_timer - h).max(T::zero()) };
            }
            _ => unreachable!("powertrain state matches its config"),
        }

        max_over = max_over.max(v - driver.compliance * point.v_lim);
        amb_weighted = amb_weighted + t_amb * ds;

        if cfg.keep_records {
            let rec = StepRecord {
                t,
                s,
                v,
                v_ref,
                gear,
                accel_pedal: pedal.accel,
                brake_pedal: pedal.brake,
                f_aero: forces.aero,
                f_rolling: forces.rolling,
                f_grade: forces.grade,
                f_inertial: forces.inertial,
                machine_torque: out.machine_torque,
                machine_rad_s: out.machine_rad_s,
                friction_brake_nm: out.brake_torque,
                fuel_rate_g_s: out.fuel_kg_s * T::lit(1000.0),
                i_batt,
                v_batt,
                p_batt_w: if i_batt == T::zero() { T::zero() } else { out.source_w },
                soc,
                t_tire_k: tire_k,
                t_cell_k: t_cell,
                t_house_k: t_house,
                aux_w: aux.powers_w.clone(),
            };
            if step.is_multiple_of(cfg.record_stride) {
                records.push(rec.clone());
            }
            last_record = Some(rec);
        }

        tire_k = tire_k + h * tire_temperature_derivative(tire_k, v, t_amb, &vehicle.tire);
        since_shift = since_shift + h;
        t = t + h;
        s = s + ds;
        v = v_new;
        step += 1;
    }

    // closing sample at the final state, carrying the last step's powers
    if let Some(mut rec) = last_record {
        rec.t = t;
        rec.s = s;
        rec.v = v;
        rec.t_tire_k = tire_k;
        if let PtState::Electric { battery: st, .. } = &pt {
            rec.soc = st.soc;
            rec.t_cell_k = st.t_cell_k;
            rec.t_house_k = st.t_house_k;
        }
        records.push(rec);
    }

    ledger.kinetic_j = half * m_eq * v * v;
    let travelled = s - route.start_s();
    let to_kwh = T::lit(1.0 / 3.6e6);
    let mut aux_kwh: Vec<AuxEnergy<T>> =
        aux_names.iter().zip(&aux_j).map(|(n, j)| AuxEnergy { name: n.clone(), kwh: *j * to_kwh }).collect();
    let final_soc = match &pt {
        PtState::Electric { battery, .. } => {
            aux_kwh.push(AuxEnergy { name: "btms_heater".into(), kwh: heater_j * to_kwh });
            aux_kwh.push(AuxEnergy { name: "btms_chiller".into(), kwh: chiller_j * to_kwh });
            battery.soc
        }
        PtState::Diesel { .. } => T::zero(),
    };
    Ok(SimResult {
        scenario_id: scenario.id.clone(),
        route_id: route.id.clone(),
        vehicle: vehicle.name.clone(),
        powertrain: vehicle.kind(),
        mass_kg: scenario.mass_kg,
        status,
        dt,
        totals: SimTotals {
            distance_km: travelled / T::lit(1000.0),
            duration_s: t,
            fuel_kg,
            fuel_l: fuel_litres(fuel_kg),
            battery_kwh: batt_j * to_kwh,
            regen_kwh: regen_j * to_kwh,
            aux_kwh,
            final_soc,
            min_soc: if matches!(pt, PtState::Electric { .. }) { min_soc } else { T::zero() },
            max_overspeed_ms: max_over,
            mean_ambient_k: if travelled > T::zero() { amb_weighted / travelled } else { t_amb0 },
        },
        ledger,
        aux_names,
        records,
    })
}
