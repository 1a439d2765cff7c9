//! Per-step records, totals and the energy ledger of one run.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::scalar::Scalar;
use crate::vehicle::PowertrainKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    /// Pack reached its SoC floor before the route end.
    SocFloor,
    OverSpeed,
    /// No progress within the time budget, e.g. a grade beyond startability.
    Stalled,
}

impl RunStatus {
    pub fn is_success(self) -> bool {
        self == RunStatus::Completed
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord<T> {
    pub t: T,
    pub s: T,
    pub v: T,
    pub v_ref: T,
    pub gear: usize,
    pub accel_pedal: T,
    pub brake_pedal: T,
    pub f_aero: T,
    pub f_rolling: T,
    pub f_grade: T,
    pub f_inertial: T,
    /// Engine brake torque or per-motor torque, N*m.
    pub machine_torque: T,
    pub machine_rad_s: T,
    pub friction_brake_nm: T,
    pub fuel_rate_g_s: T,
    pub i_batt: T,
    pub v_batt: T,
    pub p_batt_w: T,
    pub soc: T,
    pub t_tire_k: T,
    pub t_cell_k: T,
    pub t_house_k: T,
    /// Accessory powers in the order of `SimResult::aux_names`.
    pub aux_w: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuxEnergy<T> {
    pub name: String,
    pub kwh: T,
}

/// Energy bookkeeping, J. `source_j` is engine shaft work for diesel and
/// open-circuit (chemical) battery energy for electric.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyLedger<T> {
    pub source_j: T,
    pub battery_loss_j: T,
    pub aux_j: T,
    pub machine_loss_j: T,
    pub driveline_loss_j: T,
    pub clutch_slip_j: T,
    /// Positive axle work delivered by the powertrain.
    pub wheel_positive_j: T,
    /// Axle work absorbed by the powertrain (regen or engine braking), >= 0.
    pub wheel_recovered_j: T,
    pub friction_brake_j: T,
    pub aero_j: T,
    pub rolling_j: T,
    pub grade_j: T,
    pub kinetic_j: T,
}

impl<T: Scalar> EnergyLedger<T> {
    /// Source minus every sink, with wheel work taken from the vehicle side
    /// (road load, brakes and kinetic energy) so integration error shows up.
    pub fn residual_j(&self) -> T {
        self.source_j
            - (self.battery_loss_j
                + self.aux_j
                + self.machine_loss_j
                + self.driveline_loss_j
                + self.clutch_slip_j
                + self.friction_brake_j
                + self.aero_j
                + self.rolling_j
                + self.grade_j
                + self.kinetic_j)
    }

    /// Powertrain-side closure: source against axle work.
    pub fn powertrain_residual_j(&self) -> T {
        self.source_j
            - (self.battery_loss_j
                + self.aux_j
                + self.machine_loss_j
                + self.driveline_loss_j
                + self.clutch_slip_j
                + self.wheel_positive_j
                - self.wheel_recovered_j)
    }

    /// Residual relative to the larger of the gross inflow and outflow.
    pub fn relative_residual(&self) -> T {
        let gross_in = self.source_j.abs() + self.wheel_recovered_j;
        let gross_out = self.wheel_positive_j + self.aux_j + self.battery_loss_j.abs();
        let scale = gross_in.max(gross_out);
        if scale == T::zero() {
            T::zero()
        } else {
            self.residual_j().abs() / scale
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimTotals<T> {
    pub distance_km: T,
    pub duration_s: T,
    pub fuel_kg: T,
    pub fuel_l: T,
    /// Net terminal energy out of the pack, kWh (charging counts negative).
    pub battery_kwh: T,
    /// Terminal energy returned to the pack, kWh (>= 0).
    pub regen_kwh: T,
    pub aux_kwh: Vec<AuxEnergy<T>>,
    pub final_soc: T,
    pub min_soc: T,
    /// Largest excess of speed over the posted limit, m/s.
    pub max_overspeed_ms: T,
    pub mean_ambient_k: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult<T> {
    pub scenario_id: String,
    pub route_id: String,
    pub vehicle: String,
    pub powertrain: PowertrainKind,
    pub mass_kg: T,
    pub status: RunStatus,
    pub dt: T,
    pub totals: SimTotals<T>,
    pub ledger: EnergyLedger<T>,
    pub aux_names: Vec<String>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub records: Vec<StepRecord<T>>,
}

/// Distance-normalized consumption.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyMetrics<T> {
    pub distance_km: T,
    pub fuel_l_per_100km: Option<T>,
    pub kwh_per_100km: Option<T>,
    pub regen_kwh: T,
    /// kWh/100 km for electric, L/100 km for diesel.
    pub primary: T,
}

pub fn energy_metrics<T: Scalar>(result: &SimResult<T>) -> Result<EnergyMetrics<T>> {
    let km = result.totals.distance_km;
    if !(km > T::zero()) {
        return Err(SimError::Empty(format!("{}: zero distance", result.scenario_id)));
    }
    let per100 = T::lit(100.0) / km;
    let (fuel, kwh) = match result.powertrain {
        PowertrainKind::Diesel => (Some(result.totals.fuel_l * per100), None),
        PowertrainKind::Electric => (None, Some(result.totals.battery_kwh * per100)),
    };
    Ok(EnergyMetrics {
        distance_km: km,
        fuel_l_per_100km: fuel,
        kwh_per_100km: kwh,
        regen_kwh: result.totals.regen_kwh,
        primary: fuel.or(kwh).unwrap_or_else(T::zero),
    })
}

impl<T: Scalar> SimResult<T> {
    pub fn metrics(&self) -> Result<EnergyMetrics<T>> {
        energy_metrics(self)
    }

    pub fn aux_total_kwh(&self) -> T {
        self.totals.aux_kwh.iter().map(|a| a.kwh).sum()
    }

    /// JSON summary without the per-step trace.
    pub fn summary_json(&self) -> Result<String> {
        let mut lite = self.clone();
        lite.records.clear();
        serde_json::to_string_pretty(&lite).map_err(|e| SimError::parse("result json", e))
    }

    pub fn trace_csv(&self) -> String {
        let mut out = String::from(
            "t_s,s_m,v_mps,v_ref_mps,gear,app,bpp,f_aero_n,f_rolling_n,f_grade_n,f_inertial_n,\
             machine_torque_nm,machine_rad_s,friction_brake_nm,fuel_g_s,i_batt_a,v_batt_v,p_batt_w,soc,\
             t_tire_k,t_cell_k,t_house_k",
        );
        for n in &self.aux_names {
            let _ = write!(out, ",aux_{n}_w");
        }
        out.push('\n');
        for r in &self.records {
            let _ = write!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.t,
                r.s,
                r.v,
                r.v_ref,
                r.gear + 1,
                r.accel_pedal,
                r.brake_pedal,
                r.f_aero,
                r.f_rolling,
                r.f_grade,
                r.f_inertial,
                r.machine_torque,
                r.machine_rad_s,
                r.friction_brake_nm,
                r.fuel_rate_g_s,
                r.i_batt,
                r.v_batt,
                r.p_batt_w,
                r.soc,
                r.t_tire_k,
                r.t_cell_k,
                r.t_house_k
            );
            for p in &r.aux_w {
                let _ = write!(out, ",{p}");
            }
            out.push('\n');
        }
        out
    }
}

/// Trapezoidal integral of a recorded series over record time.
pub fn trapezoid<T: Scalar>(records: &[StepRecord<T>], f: impl Fn(&StepRecord<T>) -> T) -> T {
    records.windows(2).map(|w| (f(&w[0]) + f(&w[1])) * (w[1].t - w[0].t) * T::lit(0.5)).sum()
}
