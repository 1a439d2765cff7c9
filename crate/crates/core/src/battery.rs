//! Cell equivalent circuit, Coulomb counting, cell and housing thermal
//! dynamics, BTMS hysteresis and homogeneous pack scaling.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::interp::Table1;
use crate::scalar::{celsius_to_kelvin, Scalar};

/// SoC-indexed first-order ECM parameters of one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellParams<T> {
    pub v_oc: Table1<T>,
    pub r0: Table1<T>,
    pub r1: Table1<T>,
    pub c1: Table1<T>,
    pub q_nom_ah: T,
    pub heat_capacity_j_k: T,
    /// Cell to surroundings.
    pub r_th_k_w: T,
}

#[derive(Debug, Deserialize)]
struct CellRow {
    soc: f64,
    v_oc: f64,
    r0: f64,
    r1: f64,
    c1: f64,
}

impl<T: Scalar> CellParams<T> {
    /// Representative 21700 NMC811 / Si-graphite cell, 5 Ah.
    pub fn default_nmc21700() -> Self {
        const ROWS: [(f64, f64, f64, f64, f64); 12] = [
            (0.00, 2.900, 0.0260, 0.0180, 2200.0),
            (0.05, 3.210, 0.0210, 0.0150, 2500.0),
            (0.10, 3.360, 0.0190, 0.0135, 2700.0),
            (0.20, 3.470, 0.0172, 0.0125, 2900.0),
            (0.30, 3.555, 0.0165, 0.0120, 3000.0),
            (0.40, 3.620, 0.0160, 0.0118, 3050.0),
            (0.50, 3.685, 0.0157, 0.0117, 3100.0),
            (0.60, 3.765, 0.0155, 0.0117, 3100.0),
            (0.70, 3.860, 0.0154, 0.0118, 3050.0),
            (0.80, 3.960, 0.0155, 0.0120, 3000.0),
            (0.90, 4.060, 0.0158, 0.0123, 2900.0),
            (1.00, 4.180, 0.0165, 0.0130, 2800.0),
        ];
        let col = |f: fn(&(f64, f64, f64, f64, f64)) -> f64| {
            Table1::new(ROWS.iter().map(|r| T::lit(r.0)).collect(), ROWS.iter().map(|r| T::lit(f(r))).collect())
                .expect("static table")
        };
        Self {
            v_oc: col(|r| r.1),
            r0: col(|r| r.2),
            r1: col(|r| r.3),
            c1: col(|r| r.4),
            q_nom_ah: T::lit(5.0),
            heat_capacity_j_k: T::lit(76.0),
            r_th_k_w: T::lit(3.0),
        }
    }

    /// Reads `soc,v_oc,r0,r1,c1` rows; scalar parameters come from `template`.
    pub fn load_table(path: impl AsRef<Path>, template: &Self) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| SimError::io(path, e))?;
        Self::parse_table(&text, template)
    }

    pub fn parse_table(text: &str, template: &Self) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(text.as_bytes());
        let mut rows = Vec::new();
        for (i, rec) in rdr.deserialize::<CellRow>().enumerate() {
            rows.push(rec.map_err(|e| SimError::Record { record: i + 1, message: e.to_string() })?);
        }
        let soc: Vec<T> = rows.iter().map(|r| T::lit(r.soc)).collect();
        let col = |f: fn(&CellRow) -> f64| Table1::new(soc.clone(), rows.iter().map(|r| T::lit(f(r))).collect());
        let p = Self {
            v_oc: col(|r| r.v_oc)?,
            r0: col(|r| r.r0)?,
            r1: col(|r| r.r1)?,
            c1: col(|r| r.c1)?,
            ..template.clone()
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, t) in [("v_oc", &self.v_oc), ("r0", &self.r0), ("r1", &self.r1), ("c1", &self.c1)] {
            t.validate().map_err(|e| SimError::invalid(format!("cell {name}"), e.to_string()))?;
            if t.x_min() > T::zero() || t.x_max() < T::one() {
                return Err(SimError::invalid(format!("cell {name}"), "table must cover SoC 0..1"));
            }
            if t.y.iter().any(|&v| !(v > T::zero())) {
                return Err(SimError::invalid(format!("cell {name}"), "values must be positive"));
            }
        }
        if !self.v_oc.is_strictly_increasing() {
            return Err(SimError::invalid("cell v_oc", "must increase strictly with SoC"));
        }
        if !(self.q_nom_ah > T::zero() && self.heat_capacity_j_k > T::zero() && self.r_th_k_w > T::zero()) {
            return Err(SimError::invalid("cell", "capacity, heat capacity and R_th must be positive"));
        }
        Ok(())
    }

    pub fn tau(&self, soc: T) -> T {
        self.r1.eval(soc) * self.c1.eval(soc)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("soc,v_oc,r0,r1,c1\n");
        for (i, s) in self.v_oc.x.iter().enumerate() {
            let s = *s;
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                s.as_f64(),
                self.v_oc.y[i].as_f64(),
                self.r0.eval(s).as_f64(),
                self.r1.eval(s).as_f64(),
                self.c1.eval(s).as_f64()
            ));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackSpec<T> {
    pub n_series: u32,
    pub n_parallel: u32,
    pub housing_heat_capacity_j_k: T,
    /// Per cell path, cell to housing.
    pub r_cell_housing_k_w: T,
    pub r_housing_ambient_k_w: T,
    /// Heat added to the housing while heating, W (positive).
    pub q_heat_w: T,
    /// Heat removed while cooling, W (negative).
    pub q_cool_w: T,
    pub cop_heater: T,
    pub cop_chiller: T,
    pub setpoint_k: T,
    pub deadband_k: T,
    pub soc_floor: T,
    pub soc_ceiling: T,
    pub max_charge_cell_a: T,
    pub max_discharge_cell_a: T,
    /// When false the housing node is bypassed and cells exchange heat with
    /// ambient directly.
    #[serde(default = "default_true")]
    pub housing_enabled: bool,
}

fn default_true() -> bool {
    true
}

impl<T: Scalar> PackSpec<T> {
    pub fn default_800kwh() -> Self {
        Self {
            n_series: 192,
            n_parallel: 230,
            housing_heat_capacity_j_k: T::lit(250_000.0),
            r_cell_housing_k_w: T::lit(3.0),
            r_housing_ambient_k_w: T::lit(0.02),
            q_heat_w: T::lit(20_000.0),
            q_cool_w: T::lit(-9_000.0),
            cop_heater: T::lit(4.0),
            cop_chiller: T::lit(3.0),
            setpoint_k: celsius_to_kelvin(T::lit(25.0)),
            deadband_k: T::lit(5.0),
            soc_floor: T::lit(0.05),
            soc_ceiling: T::lit(0.95),
            max_charge_cell_a: T::lit(5.0),
            max_discharge_cell_a: T::lit(10.0),
            housing_enabled: true,
        }
    }

    pub fn n_cells(&self) -> u32 {
        self.n_series * self.n_parallel
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_series == 0 || self.n_parallel == 0 {
            return Err(SimError::invalid("pack", "series and parallel counts must be >= 1"));
        }
        if !(self.cop_heater > T::zero() && self.cop_chiller > T::zero()) {
            return Err(SimError::invalid("pack", "COPs must be positive"));
        }
        if !(self.soc_floor >= T::zero() && self.soc_floor < self.soc_ceiling && self.soc_ceiling <= T::one()) {
            return Err(SimError::invalid("pack", "need 0 <= soc_floor < soc_ceiling <= 1"));
        }
        if self.q_heat_w < T::zero() || self.q_cool_w > T::zero() {
            return Err(SimError::invalid("pack", "q_heat must be >= 0 and q_cool <= 0"));
        }
        let positive = [
            self.housing_heat_capacity_j_k,
            self.r_cell_housing_k_w,
            self.r_housing_ambient_k_w,
            self.deadband_k,
            self.max_charge_cell_a,
            self.max_discharge_cell_a,
        ];
        if positive.iter().any(|v| !(*v > T::zero())) {
            return Err(SimError::invalid("pack", "thermal parameters and current limits must be positive"));
        }
        Ok(())
    }

    /// Smallest series/parallel counts reaching `target_v` nominal and
    /// `target_kwh` with cells of `cell_v` and `cell_ah`.
    pub fn sized(mut self, target_kwh: f64, target_v: f64, cell_v: f64, cell_ah: f64) -> Result<Self> {
        if !(target_kwh > 0.0 && target_v > 0.0 && cell_v > 0.0 && cell_ah > 0.0) {
            return Err(SimError::invalid("pack sizing", "targets and cell ratings must be positive"));
        }
        self.n_series = (target_v / cell_v).ceil() as u32;
        let string_kwh = self.n_series as f64 * cell_v * cell_ah / 1000.0;
        self.n_parallel = (target_kwh / string_kwh).ceil() as u32;
        Ok(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BtmsFlags {
    pub cooling: bool,
    pub heating: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatteryState<T> {
    pub soc: T,
    pub v_rc: T,
    pub t_cell_k: T,
    pub t_house_k: T,
    pub btms: BtmsFlags,
    pub v_cell: T,
    pub v_batt: T,
    pub i_cell: T,
    pub i_batt: T,
}

impl<T: Scalar> BatteryState<T> {
    /// Relaxed cell at `soc`, everything at `temp_k`.
    pub fn at_rest(soc: T, temp_k: T, cell: &CellParams<T>, pack: &PackSpec<T>) -> Self {
        let v_cell = cell.v_oc.eval(soc);
        Self {
            soc,
            v_rc: T::zero(),
            t_cell_k: temp_k,
            t_house_k: temp_k,
            btms: BtmsFlags { cooling: false, heating: false },
            v_cell,
            v_batt: v_cell * T::lit(pack.n_series as f64),
            i_cell: T::zero(),
            i_batt: T::zero(),
        }
    }
}

/// Hysteresis around the setpoint: heat below `set - band` until `set`,
/// cool above `set + band` until `set`.
pub fn btms_control<T: Scalar>(t_cell_k: T, flags: BtmsFlags, pack: &PackSpec<T>) -> BtmsFlags {
    let low = pack.setpoint_k - pack.deadband_k;
    let high = pack.setpoint_k + pack.deadband_k;
    let mut heating = flags.heating;
    let mut cooling = flags.cooling;
    if heating && t_cell_k >= pack.setpoint_k {
        heating = false;
    } else if !heating && t_cell_k < low {
        heating = true;
    }
    if cooling && t_cell_k <= pack.setpoint_k {
        cooling = false;
    } else if !cooling && t_cell_k > high {
        cooling = true;
    }
    if heating && cooling {
        // only reachable with a zero deadband; the newer request wins
        if flags.heating {
            heating = false;
        } else {
            cooling = false;
        }
    }
    BtmsFlags { cooling, heating }
}

/// Electrical draw of heater and chiller, W.
pub fn btms_power<T: Scalar>(flags: BtmsFlags, pack: &PackSpec<T>) -> (T, T) {
    let heater = if flags.heating { pack.q_heat_w / pack.cop_heater } else { T::zero() };
    let chiller = if flags.cooling { pack.q_cool_w.abs() / pack.cop_chiller } else { T::zero() };
    (heater, chiller)
}

/// Cell-level electrical update. Positive current discharges.
pub fn cell_step<T: Scalar>(state: &mut BatteryState<T>, i_cell: T, dt: T, cell: &CellParams<T>) -> Result<()> {
    let soc0 = state.soc;
    let tau = cell.tau(soc0);
    let c1 = cell.c1.eval(soc0);
    let substeps = if tau < T::lit(10.0) * dt { 10 } else { 1 };
    let h = dt / T::lit(substeps as f64);
    let mut v_rc = state.v_rc;
    for _ in 0..substeps {
        v_rc = v_rc + h * (-v_rc / tau + i_cell / c1);
    }
    let soc = soc0 - dt * i_cell / (T::lit(3600.0) * cell.q_nom_ah);
    // round-off tolerance at the bounds
    let tol = T::lit(1e-9);
    if !(soc >= -tol && soc <= T::one() + tol) {
        return Err(SimError::EnergyInfeasible(format!("cell SoC left [0, 1]: {soc}")));
    }
    let soc = soc.clamp_to(T::zero(), T::one());
    state.v_rc = v_rc;
    state.soc = soc;
    state.i_cell = i_cell;
    state.v_cell = cell.v_oc.eval(soc) - cell.r0.eval(soc) * i_cell - v_rc;
    Ok(())
}

/// Heat released in one cell, W. Evaluated on a consistent (SoC, V_RC, I).
pub fn cell_heat<T: Scalar>(soc: T, v_rc: T, i_cell: T, cell: &CellParams<T>) -> T {
    let v_cell = cell.v_oc.eval(soc) - cell.r0.eval(soc) * i_cell - v_rc;
    i_cell * (cell.v_oc.eval(soc) - v_cell)
}

pub fn cell_temperature_derivative<T: Scalar>(q_loss: T, t_cell: T, t_surround: T, cell: &CellParams<T>) -> T {
    (q_loss + (t_surround - t_cell) / cell.r_th_k_w) / cell.heat_capacity_j_k
}

pub fn housing_temperature_derivative<T: Scalar>(
    t_house: T,
    t_cell: T,
    t_amb: T,
    flags: BtmsFlags,
    pack: &PackSpec<T>,
) -> T {
    let n = T::lit(pack.n_cells() as f64);
    let mut q = n * (t_cell - t_house) / pack.r_cell_housing_k_w + (t_amb - t_house) / pack.r_housing_ambient_k_w;
    if flags.cooling {
        q = q + pack.q_cool_w;
    }
    if flags.heating {
        q = q + pack.q_heat_w;
    }
    q / pack.housing_heat_capacity_j_k
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BatteryStepReport<T> {
    /// Open-circuit energy leaving the cells, J (negative when charging).
    pub chemical_j: T,
    /// Terminal energy, J.
    pub terminal_j: T,
    /// Heat released inside the cells, J.
    pub loss_j: T,
    pub heater_w: T,
    pub chiller_w: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Battery<T> {
    pub cell: CellParams<T>,
    pub pack: PackSpec<T>,
}

impl<T: Scalar> Battery<T> {
    pub fn new(cell: CellParams<T>, pack: PackSpec<T>) -> Result<Self> {
        cell.validate()?;
        pack.validate()?;
        Ok(Self { cell, pack })
    }

    pub fn ns(&self) -> T {
        T::lit(self.pack.n_series as f64)
    }

    pub fn np(&self) -> T {
        T::lit(self.pack.n_parallel as f64)
    }

    pub fn pack_voltage(&self, v_cell: T) -> T {
        self.ns() * v_cell
    }

    pub fn cell_current(&self, i_batt: T) -> T {
        i_batt / self.np()
    }

    pub fn capacity_ah(&self) -> T {
        self.np() * self.cell.q_nom_ah
    }

    /// Nominal energy at the mid-SoC open-circuit voltage, kWh.
    pub fn nominal_kwh(&self) -> T {
        self.capacity_ah() * self.pack_voltage(self.cell.v_oc.eval(T::lit(0.5))) / T::lit(1000.0)
    }

    pub fn initial_state(&self, soc: T, temp_k: T) -> BatteryState<T> {
        BatteryState::at_rest(soc, temp_k, &self.cell, &self.pack)
    }

    /// Cell-current limits `(min, max)` at the present state; charge is
    /// refused at the SoC ceiling and discharge at the floor.
    pub fn current_limits(&self, state: &BatteryState<T>) -> (T, T) {
        let lo = if state.soc >= self.pack.soc_ceiling { T::zero() } else { -self.pack.max_charge_cell_a };
        let hi = if state.soc <= self.pack.soc_floor { T::zero() } else { self.pack.max_discharge_cell_a };
        (lo, hi)
    }

    /// Pack terminal power for cell current `i`, W.
    pub fn terminal_power(&self, state: &BatteryState<T>, i: T) -> T {
        let e = self.cell.v_oc.eval(state.soc) - state.v_rc;
        self.ns() * self.np() * (e * i - self.cell.r0.eval(state.soc) * i * i)
    }

    /// Cell current delivering terminal power `p_w` (negative charges), on
    /// the stable branch. Returns the current and whether it was limited.
    pub fn current_for_power(&self, state: &BatteryState<T>, p_w: T) -> (T, bool) {
        let (lo, hi) = self.current_limits(state);
        let e = self.cell.v_oc.eval(state.soc) - state.v_rc;
        let r0 = self.cell.r0.eval(state.soc);
        let p = p_w / (self.ns() * self.np());
        let disc = e * e - T::lit(4.0) * r0 * p;
        let (i, mut limited) = if disc < T::zero() {
            (e / (T::lit(2.0) * r0), true)
        } else {
            // numerically stable root of r0 i^2 - e i + p = 0
            (T::lit(2.0) * p / (e + disc.sqrt()), false)
        };
        if i > hi || i < lo {
            limited = true;
        }
        (i.clamp_to(lo, hi), limited)
    }

    /// Minimum (most negative) terminal power the pack accepts now, W.
    pub fn charge_power_limit(&self, state: &BatteryState<T>) -> T {
        let (lo, _) = self.current_limits(state);
        self.terminal_power(state, lo)
    }

    pub fn discharge_power_limit(&self, state: &BatteryState<T>) -> T {
        let (_, hi) = self.current_limits(state);
        let r0 = self.cell.r0.eval(state.soc);
        let e = self.cell.v_oc.eval(state.soc) - state.v_rc;
        self.terminal_power(state, hi.min(e / (T::lit(2.0) * r0)))
    }

    /// Advances electrical and thermal states by `dt` at pack current
    /// `i_batt`, then updates the BTMS flags. Heater and chiller power in
    /// the report are the draw during this step (flags at step start).
    pub fn step(&self, state: &mut BatteryState<T>, i_batt: T, t_amb_k: T, dt: T) -> Result<BatteryStepReport<T>> {
        if !(dt > T::zero()) {
            return Err(SimError::invalid("dt", "must be positive"));
        }
        let i_cell = self.cell_current(i_batt);
        let soc0 = state.soc;
        let v_rc0 = state.v_rc;
        let flags = state.btms;
        let (heater_w, chiller_w) = btms_power(flags, &self.pack);

        let q_loss = cell_heat(soc0, v_rc0, i_cell, &self.cell);
        let voc0 = self.cell.v_oc.eval(soc0);
        let v_cell0 = voc0 - self.cell.r0.eval(soc0) * i_cell - v_rc0;
        let n = self.ns() * self.np();

        let t_surround = if self.pack.housing_enabled { state.t_house_k } else { t_amb_k };
        let dtc = cell_temperature_derivative(q_loss, state.t_cell_k, t_surround, &self.cell);
        let dth = if self.pack.housing_enabled {
            housing_temperature_derivative(state.t_house_k, state.t_cell_k, t_amb_k, flags, &self.pack)
        } else {
            T::zero()
        };

        cell_step(state, i_cell, dt, &self.cell)?;
        state.t_cell_k = state.t_cell_k + dt * dtc;
        state.t_house_k = if self.pack.housing_enabled { state.t_house_k + dt * dth } else { t_amb_k };
        state.i_batt = i_batt;
        state.v_batt = self.pack_voltage(state.v_cell);
        state.btms = btms_control(state.t_cell_k, flags, &self.pack);

        // the step's current flows against the start-of-step voltages, which
        // keeps the three energies exactly consistent with the heat source
        Ok(BatteryStepReport {
            chemical_j: n * voc0 * i_cell * dt,
            terminal_j: n * v_cell0 * i_cell * dt,
            loss_j: n * q_loss * dt,
            heater_w,
            chiller_w,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn cell() -> CellParams<f64> {
        CellParams::default_nmc21700()
    }

    fn k(c: f64) -> f64 {
        c + 273.15
    }

    #[test]
    fn default_tables_valid() {
        cell().validate().unwrap();
        PackSpec::<f64>::default_800kwh().validate().unwrap();
        let b = Battery::new(cell(), PackSpec::default_800kwh()).unwrap();
        let kwh = b.nominal_kwh();
        assert!(kwh > 780.0 && kwh < 850.0, "{kwh}");
    }

    #[test]
    fn open_circuit_step() {
        let c = cell();
        let p = PackSpec::default_800kwh();
        let mut s = BatteryState::at_rest(0.6, k(25.0), &c, &p);
        cell_step(&mut s, 0.0, 1.0, &c).unwrap();
        assert_eq!(s.soc, 0.6);
        assert_eq!(s.v_cell, c.v_oc.eval(0.6));
    }

    #[test]
    fn full_discharge_in_one_hour() {
        let c = cell();
        let mut s = BatteryState::at_rest(1.0, k(25.0), &c, &PackSpec::default_800kwh());
        for _ in 0..3600 {
            cell_step(&mut s, 5.0, 1.0, &c).unwrap();
        }
        assert_relative_eq!(s.soc, 0.0, epsilon = 1e-12);
        assert!(cell_step(&mut s, 5.0, 1.0, &c).is_err());
    }

    #[test]
    fn btms_hysteresis() {
        let p = PackSpec::<f64>::default_800kwh();
        let off = BtmsFlags { cooling: false, heating: false };
        assert_eq!(btms_control(k(25.0), off, &p), off);
        assert!(btms_control(k(19.0), off, &p).heating);
        assert!(!btms_control(k(20.0), off, &p).heating);
        // heater on at 24, rises to 26, falls back to 24
        let on = BtmsFlags { cooling: false, heating: true };
        let f = btms_control(k(24.0), on, &p);
        assert!(f.heating);
        let f = btms_control(k(26.0), f, &p);
        assert!(!f.heating);
        let f = btms_control(k(24.0), f, &p);
        assert!(!f.heating);
        assert!(btms_control(k(30.5), off, &p).cooling);
        assert!(!btms_control(k(30.0), off, &p).cooling);
        let c = BtmsFlags { cooling: true, heating: false };
        assert!(btms_control(k(26.0), c, &p).cooling);
        assert!(!btms_control(k(25.0), c, &p).cooling);
    }

    #[test]
    fn btms_power_cop() {
        let mut p = PackSpec::<f64>::default_800kwh();
        p.q_heat_w = 8000.0;
        p.q_cool_w = -9000.0;
        assert_eq!(btms_power(BtmsFlags { cooling: false, heating: false }, &p), (0.0, 0.0));
        assert_eq!(btms_power(BtmsFlags { cooling: false, heating: true }, &p).0, 2000.0);
        assert_eq!(btms_power(BtmsFlags { cooling: true, heating: false }, &p).1, 3000.0);
    }

    #[test]
    fn pack_scaling() {
        let mut p = PackSpec::<f64>::default_800kwh();
        p.n_series = 192;
        p.n_parallel = 4;
        let b = Battery::new(cell(), p).unwrap();
        assert_relative_eq!(b.pack_voltage(3.7), 710.4, epsilon = 1e-9);
        assert_eq!(b.cell_current(400.0), 100.0);
        let mut p1 = PackSpec::<f64>::default_800kwh();
        p1.n_series = 1;
        p1.n_parallel = 1;
        let b1 = Battery::new(cell(), p1).unwrap();
        assert_eq!((b1.pack_voltage(3.7), b1.cell_current(2.0)), (3.7, 2.0));
    }

    #[test]
    fn housing_equilibrium_and_ambient_sign() {
        let p = PackSpec::<f64>::default_800kwh();
        let off = BtmsFlags { cooling: false, heating: false };
        assert_eq!(housing_temperature_derivative(290.0, 290.0, 290.0, off, &p), 0.0);
        assert!(housing_temperature_derivative(290.0, 290.0, 280.0, off, &p) < 0.0);
    }

    #[test]
    fn power_solve_round_trip() {
        let b = Battery::new(cell(), PackSpec::default_800kwh()).unwrap();
        let s = b.initial_state(0.7, k(25.0));
        for p in [-200e3, -1e3, 0.0, 50e3, 400e3] {
            let (i, limited) = b.current_for_power(&s, p);
            assert!(!limited);
            assert_relative_eq!(b.terminal_power(&s, i), p, epsilon = 1e-6, max_relative = 1e-12);
        }
    }

    #[test]
    fn limits_at_soc_bounds() {
        let b = Battery::new(cell(), PackSpec::default_800kwh()).unwrap();
        let full = b.initial_state(0.95, k(25.0));
        assert_eq!(b.charge_power_limit(&full), 0.0);
        let (i, limited) = b.current_for_power(&full, -50e3);
        assert_eq!(i, 0.0);
        assert!(limited);
        let empty = b.initial_state(0.05, k(25.0));
        assert_eq!(b.current_for_power(&empty, 50e3).0, 0.0);
    }

    #[test]
    fn step_energy_split_closes() {
        let b = Battery::new(cell(), PackSpec::default_800kwh()).unwrap();
        let mut s = b.initial_state(0.8, k(25.0));
        for i in [300.0, 300.0, -150.0, 500.0, 0.0] {
            let r = b.step(&mut s, i, k(10.0), 1.0).unwrap();
            assert_relative_eq!(r.chemical_j, r.terminal_j + r.loss_j, max_relative = 1e-12);
            assert!(r.loss_j >= -1e-9 || i < 0.0);
        }
    }

    #[test]
    fn sizing_helper() {
        let p = PackSpec::<f64>::default_800kwh().sized(800.0, 700.0, 3.65, 5.0).unwrap();
        assert_eq!(p.n_series, 192);
        assert!(p.n_series as f64 * p.n_parallel as f64 * 3.65 * 5.0 / 1000.0 >= 800.0);
    }
}
