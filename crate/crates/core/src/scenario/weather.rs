use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::scalar::Scalar;

pub const STANDARD_PRESSURE_PA: f64 = 101_325.0;
pub const DRY_AIR_GAS_CONSTANT: f64 = 287.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DayType {
    Cold,
    Nominal,
    Hot,
}

impl DayType {
    pub const ALL: [DayType; 3] = [DayType::Cold, DayType::Nominal, DayType::Hot];

    pub fn as_str(self) -> &'static str {
        match self {
            DayType::Cold => "cold",
            DayType::Nominal => "nominal",
            DayType::Hot => "hot",
        }
    }
}

impl fmt::Display for DayType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DayType {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cold" => Ok(DayType::Cold),
            "nominal" => Ok(DayType::Nominal),
            "hot" => Ok(DayType::Hot),
            other => Err(SimError::invalid("day type", format!("`{other}`"))),
        }
    }
}

/// Dry-air density at standard pressure.
pub fn ideal_gas_density<T: Scalar>(t_amb_k: T) -> T {
    T::lit(STANDARD_PRESSURE_PA) / (T::lit(DRY_AIR_GAS_CONSTANT) * t_amb_k)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar"))]
pub struct WeatherSample<T> {
    #[serde(rename = "T_amb_K")]
    pub t_amb_k: T,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho_a: Option<T>,
    #[serde(rename = "v_w_mps", default)]
    pub wind_speed: T,
    #[serde(rename = "theta_w_deg", default)]
    pub wind_dir_deg: T,
}

impl<T: Scalar> WeatherSample<T> {
    pub fn still(t_amb_k: T) -> Self {
        Self { t_amb_k, rho_a: None, wind_speed: T::zero(), wind_dir_deg: T::zero() }
    }

    pub fn air_density(&self) -> T {
        self.rho_a.unwrap_or_else(|| ideal_gas_density(self.t_amb_k))
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        if !self.t_amb_k.is_finite() || self.t_amb_k < T::lit(200.0) || self.t_amb_k > T::lit(330.0) {
            return Err(format!("T_amb {} K outside [200, 330]", self.t_amb_k));
        }
        if let Some(rho) = self.rho_a {
            if !rho.is_finite() || rho < T::lit(0.9) || rho > T::lit(1.5) {
                return Err(format!("air density {rho} outside [0.9, 1.5]"));
            }
        }
        if !self.wind_speed.is_finite() || self.wind_speed < T::zero() {
            return Err(format!("wind speed {} negative", self.wind_speed));
        }
        if !self.wind_dir_deg.is_finite() {
            return Err("wind direction not finite".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar"))]
pub struct WeatherTrace<T> {
    pub day_type: DayType,
    #[serde(default)]
    pub date: String,
    pub samples: Vec<WeatherSample<T>>,
}

impl<T: Scalar> WeatherTrace<T> {
    pub fn new(day_type: DayType, date: impl Into<String>, samples: Vec<WeatherSample<T>>) -> Result<Self> {
        let w = Self { day_type, date: date.into(), samples };
        w.validate()?;
        Ok(w)
    }

    /// Same conditions at every one of `n` points.
    pub fn uniform(day_type: DayType, n: usize, sample: WeatherSample<T>) -> Result<Self> {
        Self::new(day_type, "", vec![sample; n])
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples.is_empty() {
            return Err(SimError::invalid("weather", "no samples"));
        }
        for (i, s) in self.samples.iter().enumerate() {
            s.validate().map_err(|message| SimError::Record { record: i + 1, message })?;
        }
        Ok(())
    }

    pub fn check_matches(&self, point_count: usize) -> Result<()> {
        if self.samples.len() != point_count {
            return Err(SimError::invalid(
                "weather",
                format!("{} samples for a route of {} points", self.samples.len(), point_count),
            ));
        }
        Ok(())
    }

    pub fn mean_temperature_k(&self) -> T {
        let n = T::from_usize(self.samples.len()).unwrap_or_else(T::one);
        self.samples.iter().map(|s| s.t_amb_k).sum::<T>() / n
    }

    pub fn map_samples(&self, f: impl Fn(&WeatherSample<T>) -> WeatherSample<T>) -> Self {
        Self { day_type: self.day_type, date: self.date.clone(), samples: self.samples.iter().map(f).collect() }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| SimError::io(path, e))?;
        let w: Self = serde_json::from_str(&text).map_err(|e| SimError::parse(path.display().to_string(), e))?;
        w.validate()?;
        Ok(w)
    }
}
