//! Complete vehicle description and its file format.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::auxiliaries::AuxSuite;
use crate::battery::{Battery, CellParams, PackSpec};
use crate::diesel::{DieselDriveline, EngineMap};
use crate::driver::DriverParams;
use crate::electric::{EAxleSpec, MotorSpec};
use crate::error::{Result, SimError};
use crate::gearbox::GearboxSpec;
use crate::roadload::{AeroParams, BodyParams, RollingParams, TireThermalParams, TruckConfiguration};
use crate::scalar::Scalar;
use crate::scenario::VehicleEnvelope;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowertrainKind {
    Diesel,
    Electric,
}

impl std::fmt::Display for PowertrainKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PowertrainKind::Diesel => "diesel",
            PowertrainKind::Electric => "electric",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", bound(deserialize = "T: Scalar"))]
#[allow(clippy::large_enum_variant)]
pub enum Powertrain<T> {
    Diesel(DieselDriveline<T>),
    Electric { eaxle: EAxleSpec<T>, battery: Battery<T> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar"))]
pub struct VehicleConfig<T> {
    pub name: String,
    pub min_mass_kg: T,
    pub max_mass_kg: T,
    pub configurations: Vec<TruckConfiguration>,
    /// Mass here is a placeholder; each scenario supplies its own.
    pub body: BodyParams<T>,
    pub aero: AeroParams<T>,
    pub rolling: RollingParams<T>,
    pub tire: TireThermalParams<T>,
    pub driver: DriverParams<T>,
    pub aux: AuxSuite<T>,
    /// Maximum service-brake torque at the wheels, N*m.
    pub service_brake_nm: T,
    pub powertrain: Powertrain<T>,
}

impl<T: Scalar> VehicleConfig<T> {
    pub fn kind(&self) -> PowertrainKind {
        match self.powertrain {
            Powertrain::Diesel(_) => PowertrainKind::Diesel,
            Powertrain::Electric { .. } => PowertrainKind::Electric,
        }
    }

    fn common(name: &str, min_mass: f64, max_mass: f64, aux: AuxSuite<T>, powertrain: Powertrain<T>) -> Self {
        Self {
            name: name.into(),
            min_mass_kg: T::lit(min_mass),
            max_mass_kg: T::lit(max_mass),
            configurations: TruckConfiguration::ALL.to_vec(),
            body: BodyParams {
                mass_kg: T::lit(27_200.0),
                rotating_inertia_factor: T::lit(0.05),
                wheel_radius_m: T::lit(0.5),
            },
            aero: AeroParams::default_class8(),
            rolling: RollingParams::default_truck_tire(),
            tire: TireThermalParams::default_truck_tire(),
            driver: DriverParams::conservative(),
            aux,
            service_brake_nm: T::lit(60_000.0),
            powertrain,
        }
    }

    /// Class 8 day-cab tractor, 339 kW diesel, 10-speed AMT.
    pub fn default_diesel() -> Self {
        Self::common(
            "conventional-class8",
            8_500.0,
            36_287.0,
            AuxSuite::default_diesel(),
            Powertrain::Diesel(DieselDriveline::default_class8()),
        )
    }

    /// Tandem e-axle tractor with an 800 kWh class pack.
    pub fn default_electric() -> Self {
        let battery = Battery::new(CellParams::default_nmc21700(), PackSpec::default_800kwh()).expect("shipped pack");
        Self::common(
            "battery-electric-class8",
            13_500.0,
            37_195.0,
            AuxSuite::default_electric(),
            Powertrain::Electric { eaxle: EAxleSpec::default_tandem(), battery },
        )
    }

    pub fn envelope(&self) -> VehicleEnvelope<T> {
        VehicleEnvelope {
            min_mass_kg: self.min_mass_kg,
            max_mass_kg: self.max_mass_kg,
            configurations: self.configurations.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.min_mass_kg > T::zero() && self.min_mass_kg <= self.max_mass_kg) {
            return Err(SimError::invalid("vehicle", "need 0 < min_mass_kg <= max_mass_kg"));
        }
        if self.configurations.is_empty() {
            return Err(SimError::invalid("vehicle", "no truck configurations"));
        }
        for c in &self.configurations {
            self.aero.table(*c)?;
        }
        if !(self.service_brake_nm > T::zero()) {
            return Err(SimError::invalid("vehicle", "service brake torque must be positive"));
        }
        self.body.validate()?;
        self.aero.validate()?;
        self.rolling.validate()?;
        self.tire.validate()?;
        self.driver.validate()?;
        self.aux.validate()?;
        match &self.powertrain {
            Powertrain::Diesel(d) => d.validate(),
            Powertrain::Electric { eaxle, battery } => {
                eaxle.validate()?;
                battery.cell.validate()?;
                battery.pack.validate()
            }
        }
    }

    pub fn with_mass(&self, mass_kg: T) -> Self {
        let mut v = self.clone();
        v.body.mass_kg = mass_kg;
        v
    }

    /// Raises the vehicle's own weight by `delta_kg`, shifting the envelope too.
    pub fn with_curb_delta(&self, delta_kg: T) -> Self {
        let mut v = self.clone();
        v.min_mass_kg = v.min_mass_kg + delta_kg;
        v.max_mass_kg = v.max_mass_kg + delta_kg;
        v
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| SimError::io(path, e))?;
        let file: VehicleFile<T> =
            serde_json::from_str(&text).map_err(|e| SimError::parse(path.display().to_string(), e))?;
        file.resolve(path.parent().unwrap_or_else(|| Path::new(".")))
    }
}

/// On-disk vehicle description. Absent sections take the shipped defaults
/// for the chosen powertrain; map tables are referenced by relative path.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar"))]
pub struct VehicleFile<T> {
    pub powertrain: PowertrainKind,
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub min_mass_kg: Option<T>,
    #[serde(default)]
    pub max_mass_kg: Option<T>,
    #[serde(default)]
    pub configurations: Option<Vec<TruckConfiguration>>,
    #[serde(default)]
    pub body: Option<BodyParams<T>>,
    #[serde(default)]
    pub aero: Option<AeroParams<T>>,
    #[serde(default)]
    pub rolling: Option<RollingParams<T>>,
    #[serde(default)]
    pub tire: Option<TireThermalParams<T>>,
    #[serde(default)]
    pub driver: Option<DriverParams<T>>,
    #[serde(default)]
    pub aux: Option<AuxSuite<T>>,
    #[serde(default)]
    pub service_brake_nm: Option<T>,
    #[serde(default)]
    pub gearbox: Option<GearboxSpec<T>>,
    #[serde(default)]
    pub engine_map_csv: Option<PathBuf>,
    #[serde(default)]
    pub motor: Option<MotorFile<T>>,
    #[serde(default)]
    pub n_axles: Option<u32>,
    #[serde(default)]
    pub wheel_end_ratio: Option<T>,
    #[serde(default)]
    pub wheel_end_eff: Option<T>,
    #[serde(default)]
    pub cell_table_csv: Option<PathBuf>,
    #[serde(default)]
    pub cell: Option<CellScalars<T>>,
    #[serde(default)]
    pub pack: Option<PackSpec<T>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MotorFile<T> {
    pub efficiency_csv: Option<PathBuf>,
    pub continuous_torque: Option<crate::interp::Table1<T>>,
    pub peak_torque: Option<crate::interp::Table1<T>>,
    pub max_power_w: Option<T>,
    pub max_speed_rad_s: Option<T>,
    pub peak_duration_s: Option<T>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CellScalars<T> {
    pub q_nom_ah: T,
    pub heat_capacity_j_k: T,
    pub r_th_k_w: T,
}

impl<T: Scalar> VehicleFile<T> {
    pub fn resolve(self, base: &Path) -> Result<VehicleConfig<T>> {
        let mut v = match self.powertrain {
            PowertrainKind::Diesel => VehicleConfig::default_diesel(),
            PowertrainKind::Electric => VehicleConfig::default_electric(),
        };
        if let Some(n) = self.name {
            v.name = n;
        }
        if let Some(m) = self.min_mass_kg {
            v.min_mass_kg = m;
        }
        if let Some(m) = self.max_mass_kg {
            v.max_mass_kg = m;
        }
        if let Some(c) = self.configurations {
            v.configurations = c;
        }
        if let Some(b) = self.body {
            v.body = b;
        }
        if let Some(a) = self.aero {
            v.aero = a;
        }
        if let Some(r) = self.rolling {
            v.rolling = r;
        }
        if let Some(t) = self.tire {
            v.tire = t;
        }
        if let Some(d) = self.driver {
            v.driver = d;
        }
        if let Some(a) = self.aux {
            v.aux = a;
        }
        if let Some(b) = self.service_brake_nm {
            v.service_brake_nm = b;
        }
        let at = |p: &PathBuf| if p.is_absolute() { p.clone() } else { base.join(p) };
        match &mut v.powertrain {
            Powertrain::Diesel(d) => {
                if let Some(g) = self.gearbox {
                    d.gearbox = g;
                }
                if let Some(p) = &self.engine_map_csv {
                    d.engine = EngineMap::load(at(p))?;
                }
            }
            Powertrain::Electric { eaxle, battery } => {
                if let Some(g) = self.gearbox {
                    eaxle.gearbox = g;
                }
                if let Some(n) = self.n_axles {
                    eaxle.n_axles = n;
                }
                if let Some(r) = self.wheel_end_ratio {
                    eaxle.wheel_end_ratio = r;
                }
                if let Some(e) = self.wheel_end_eff {
                    eaxle.wheel_end_eff = e;
                }
                if let Some(m) = self.motor {
                    let mut motor = eaxle.motor.clone();
                    if let Some(p) = &m.efficiency_csv {
                        motor = MotorSpec::load_map(at(p), &motor)?;
                    }
                    if let Some(c) = m.continuous_torque {
                        motor.continuous_torque = c;
                    }
                    if let Some(c) = m.peak_torque {
                        motor.peak_torque = c;
                    }
                    if let Some(x) = m.max_power_w {
                        motor.max_power_w = x;
                    }
                    if let Some(x) = m.max_speed_rad_s {
                        motor.max_speed_rad_s = x;
                    }
                    if let Some(x) = m.peak_duration_s {
                        motor.peak_duration_s = x;
                    }
                    eaxle.motor = motor;
                }
                if let Some(c) = self.cell {
                    battery.cell.q_nom_ah = c.q_nom_ah;
                    battery.cell.heat_capacity_j_k = c.heat_capacity_j_k;
                    battery.cell.r_th_k_w = c.r_th_k_w;
                }
                if let Some(p) = &self.cell_table_csv {
                    battery.cell = CellParams::load_table(at(p), &battery.cell)?;
                }
                if let Some(p) = self.pack {
                    battery.pack = p;
                }
            }
        }
        v.validate()?;
        Ok(v)
    }
}

impl<T: Scalar> VehicleConfig<T> {
    /// Writes `<stem>.json` plus its map tables as CSV next to it, in the
    /// form `load` reads back.
    pub fn write_bundle(&self, dir: &Path, stem: &str) -> Result<PathBuf> {
        std::fs::create_dir_all(dir).map_err(|e| SimError::io(dir, e))?;
        let put = |name: String, text: String| -> Result<PathBuf> {
            let p = dir.join(&name);
            std::fs::write(&p, text).map_err(|e| SimError::io(&p, e))?;
            Ok(PathBuf::from(name))
        };
        let mut file = VehicleFile {
            powertrain: self.kind(),
            name: Some(self.name.clone()),
            min_mass_kg: Some(self.min_mass_kg),
            max_mass_kg: Some(self.max_mass_kg),
            configurations: Some(self.configurations.clone()),
            body: Some(self.body.clone()),
            aero: Some(self.aero.clone()),
            rolling: Some(self.rolling.clone()),
            tire: Some(self.tire.clone()),
            driver: Some(self.driver.clone()),
            aux: Some(self.aux.clone()),
            service_brake_nm: Some(self.service_brake_nm),
            gearbox: None,
            engine_map_csv: None,
            motor: None,
            n_axles: None,
            wheel_end_ratio: None,
            wheel_end_eff: None,
            cell_table_csv: None,
            cell: None,
            pack: None,
        };
        match &self.powertrain {
            Powertrain::Diesel(d) => {
                file.gearbox = Some(d.gearbox.clone());
                file.engine_map_csv = Some(put(format!("{stem}_engine_map.csv"), d.engine.to_csv())?);
            }
            Powertrain::Electric { eaxle, battery } => {
                file.gearbox = Some(eaxle.gearbox.clone());
                file.n_axles = Some(eaxle.n_axles);
                file.wheel_end_ratio = Some(eaxle.wheel_end_ratio);
                file.wheel_end_eff = Some(eaxle.wheel_end_eff);
                let m = &eaxle.motor;
                file.motor = Some(MotorFile {
                    efficiency_csv: Some(put(format!("{stem}_motor_map.csv"), m.map_to_csv())?),
                    continuous_torque: Some(m.continuous_torque.clone()),
                    peak_torque: Some(m.peak_torque.clone()),
                    max_power_w: Some(m.max_power_w),
                    max_speed_rad_s: Some(m.max_speed_rad_s),
                    peak_duration_s: Some(m.peak_duration_s),
                });
                let c = &battery.cell;
                file.cell = Some(CellScalars {
                    q_nom_ah: c.q_nom_ah,
                    heat_capacity_j_k: c.heat_capacity_j_k,
                    r_th_k_w: c.r_th_k_w,
                });
                file.cell_table_csv = Some(put(format!("{stem}_cell_table.csv"), c.to_csv())?);
                file.pack = Some(battery.pack.clone());
            }
        }
        let json = serde_json::to_string_pretty(&file).map_err(|e| SimError::parse("vehicle json", e))?;
        put(format!("{stem}.json"), json).map(|p| dir.join(p))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        VehicleConfig::<f64>::default_diesel().validate().unwrap();
        VehicleConfig::<f64>::default_electric().validate().unwrap();
        VehicleConfig::<f32>::default_electric().validate().unwrap();
    }

    #[test]
    fn minimal_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("v.json");
        std::fs::write(&p, r#"{"powertrain":"electric","name":"x","max_mass_kg":30000}"#).unwrap();
        let v = VehicleConfig::<f64>::load(&p).unwrap();
        assert_eq!(v.kind(), PowertrainKind::Electric);
        assert_eq!(v.max_mass_kg, 30000.0);
    }

    #[test]
    fn bad_mass_range_rejected() {
        let file: VehicleFile<f64> =
            serde_json::from_str(r#"{"powertrain":"diesel","min_mass_kg":40000,"max_mass_kg":30000}"#).unwrap();
        assert!(file.resolve(Path::new(".")).unwrap_err().is_validation());
    }

    #[test]
    fn engine_map_path_resolved() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("eng.csv"), EngineMap::<f64>::default_class8().to_csv()).unwrap();
        let p = dir.path().join("v.json");
        std::fs::write(&p, r#"{"powertrain":"diesel","engine_map_csv":"eng.csv"}"#).unwrap();
        VehicleConfig::<f64>::load(&p).unwrap();
        std::fs::write(&p, r#"{"powertrain":"diesel","engine_map_csv":"missing.csv"}"#).unwrap();
        assert!(VehicleConfig::<f64>::load(&p).is_err());
    }

    #[test]
    fn bundle_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        for v in [VehicleConfig::<f64>::default_diesel(), VehicleConfig::default_electric()] {
            let p = v.write_bundle(dir.path(), &v.kind().to_string()).unwrap();
            let back = VehicleConfig::<f64>::load(&p).unwrap();
            assert_eq!(back.name, v.name);
            assert_eq!(back.kind(), v.kind());
        }
    }
}
