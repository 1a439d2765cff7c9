//! One-at-a-time parameter sweeps around a baseline scenario set.

use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::scalar::{celsius_to_kelvin, kelvin_to_celsius, Scalar};
use crate::scenario::{RoutePoint, Scenario, WeatherSample};
use crate::sim::{run, SimConfig, SimResult};
use crate::vehicle::VehicleConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Factor {
    Mass,
    DragCoefficient,
    FrontalArea,
    RollingResistance,
    AuxScale,
    SpeedLimit,
    Grade,
    /// Scales the Celsius value; air density stays at its baseline.
    AmbientTemperature,
    AirDensity,
}

impl Factor {
    pub const ALL: [Factor; 9] = [
        Factor::Mass,
        Factor::DragCoefficient,
        Factor::FrontalArea,
        Factor::RollingResistance,
        Factor::AuxScale,
        Factor::SpeedLimit,
        Factor::Grade,
        Factor::AmbientTemperature,
        Factor::AirDensity,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Factor::Mass => "mass",
            Factor::DragCoefficient => "drag_coefficient",
            Factor::FrontalArea => "frontal_area",
            Factor::RollingResistance => "rolling_resistance",
            Factor::AuxScale => "aux_scale",
            Factor::SpeedLimit => "speed_limit",
            Factor::Grade => "grade",
            Factor::AmbientTemperature => "ambient_temperature",
            Factor::AirDensity => "air_density",
        }
    }
}

impl fmt::Display for Factor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Factor {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        Factor::ALL
            .into_iter()
            .find(|f| f.as_str() == key)
            .ok_or_else(|| SimError::invalid("sensitivity factor", format!("`{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivitySpec {
    pub factors: Vec<Factor>,
    /// Relative perturbation applied in each direction.
    pub perturbation: f64,
}

impl Default for SensitivitySpec {
    fn default() -> Self {
        Self { factors: Factor::ALL.to_vec(), perturbation: 0.1 }
    }
}

impl SensitivitySpec {
    pub fn validate(&self) -> Result<()> {
        if self.factors.is_empty() {
            return Err(SimError::Empty("no sensitivity factors".into()));
        }
        if !(self.perturbation > 0.0 && self.perturbation < 1.0) {
            return Err(SimError::invalid("perturbation", format!("{} outside (0, 1)", self.perturbation)));
        }
        Ok(())
    }
}

/// Copies of `scenario` and `vehicle` with one factor multiplied by `scale`.
pub fn perturb<T: Scalar>(
    scenario: &Scenario<T>,
    vehicle: &VehicleConfig<T>,
    factor: Factor,
    scale: T,
) -> Result<(Scenario<T>, VehicleConfig<T>)> {
    let mut sc = scenario.clone();
    let mut veh = vehicle.clone();
    match factor {
        Factor::Mass => sc.mass_kg = sc.mass_kg * scale,
        Factor::DragCoefficient => veh.aero.scale_cd(scale),
        Factor::FrontalArea => veh.aero.frontal_area_m2 = veh.aero.frontal_area_m2 * scale,
        Factor::RollingResistance => veh.rolling.scale(scale),
        Factor::AuxScale => veh.aux.scale = veh.aux.scale * scale,
        Factor::SpeedLimit => {
            sc.route = Arc::new(sc.route.map_points(|p| RoutePoint { v_lim: p.v_lim * scale, ..*p })?);
        }
        Factor::Grade => {
            let z0 = sc.route.points[0].z;
            sc.route = Arc::new(sc.route.map_points(|p| RoutePoint { z: z0 + (p.z - z0) * scale, ..*p })?);
        }
        Factor::AmbientTemperature => {
            sc.weather = Arc::new(sc.weather.map_samples(|w| WeatherSample {
                t_amb_k: celsius_to_kelvin(kelvin_to_celsius(w.t_amb_k) * scale),
                rho_a: Some(w.air_density()),
                ..*w
            }));
        }
        Factor::AirDensity => {
            sc.weather =
                Arc::new(sc.weather.map_samples(|w| WeatherSample { rho_a: Some(w.air_density() * scale), ..*w }));
        }
    }
    sc.weather.validate()?;
    Ok((sc, veh))
}

/// The quantity the sweep compares: L/100 km or kWh/100 km.
fn energy<T: Scalar>(r: &SimResult<T>) -> Result<f64> {
    if !r.status.is_success() {
        return Err(SimError::EnergyInfeasible(format!("{} ended with {:?}", r.scenario_id, r.status)));
    }
    Ok(r.metrics()?.primary.as_f64())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityRow {
    pub factor: Factor,
    /// 1 for the most sensitive factor.
    pub rank: usize,
    /// Mean percent change at +perturbation.
    pub plus_pct: f64,
    /// Mean percent change at -perturbation.
    pub minus_pct: f64,
    /// Mean |percent change| over scenarios and both directions.
    pub mean_abs_pct: f64,
    /// Scenarios contributing (perturbed runs that failed are left out).
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityTable {
    pub vehicle: String,
    pub perturbation: f64,
    pub scenarios: usize,
    pub baseline_mean: f64,
    /// Sorted by rank.
    pub rows: Vec<SensitivityRow>,
}

impl SensitivityTable {
    pub fn row(&self, factor: Factor) -> Option<&SensitivityRow> {
        self.rows.iter().find(|r| r.factor == factor)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("vehicle,factor,rank,plus_pct,minus_pct,mean_abs_pct,n\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{:.6},{:.6},{:.6},{}",
                self.vehicle, r.factor, r.rank, r.plus_pct, r.minus_pct, r.mean_abs_pct, r.n
            );
        }
        out
    }
}

/// Runs the baseline and every (factor, sign) perturbation of every
/// scenario on `jobs` threads (0 = all cores).
pub fn sensitivity<T: Scalar>(
    spec: &SensitivitySpec,
    scenarios: &[Scenario<T>],
    vehicle: &VehicleConfig<T>,
    cfg: &SimConfig<T>,
    jobs: usize,
) -> Result<SensitivityTable> {
    spec.validate()?;
    if scenarios.is_empty() {
        return Err(SimError::Empty("no baseline scenarios".into()));
    }
    vehicle.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| SimError::invalid("thread pool", e.to_string()))?;
    let driver = &vehicle.driver;

    let baseline: Vec<f64> = pool.install(|| {
        scenarios.par_iter().map(|s| run(s, vehicle, driver, cfg).and_then(|r| energy(&r))).collect::<Result<_>>()
    })?;
    if let Some(i) = baseline.iter().position(|e| !(e.abs() > 0.0)) {
        return Err(SimError::EnergyInfeasible(format!("{}: zero baseline energy", scenarios[i].id)));
    }

    let signs = [1.0, -1.0];
    let tasks: Vec<(usize, usize, usize)> = (0..spec.factors.len())
        .flat_map(|f| (0..2).flat_map(move |k| (0..scenarios.len()).map(move |s| (f, k, s))))
        .collect();
    let deltas: Vec<Option<f64>> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(f, k, s)| {
                let scale = T::lit(1.0 + signs[k] * spec.perturbation);
                let outcome = perturb(&scenarios[s], vehicle, spec.factors[f], scale)
                    .and_then(|(sc, veh)| run(&sc, &veh, &veh.driver, cfg))
                    .and_then(|r| energy(&r));
                match outcome {
                    Ok(e) => Some(100.0 * (e - baseline[s]) / baseline[s]),
                    Err(err) => {
                        log::warn!("{} {} {:+}: {err}", scenarios[s].id, spec.factors[f], signs[k]);
                        None
                    }
                }
            })
            .collect()
    });

    let n_sc = scenarios.len();
    let mut rows: Vec<SensitivityRow> = spec
        .factors
        .iter()
        .enumerate()
        .map(|(f, &factor)| {
            let slice = |k: usize| &deltas[(f * 2 + k) * n_sc..(f * 2 + k + 1) * n_sc];
            let (plus, minus) = (slice(0), slice(1));
            // Only scenarios where both directions ran, so the signs compare
            // like with like.
            let pairs: Vec<(f64, f64)> = plus.iter().zip(minus).filter_map(|(p, m)| Some(((*p)?, (*m)?))).collect();
            let n = pairs.len();
            let mean = |g: &dyn Fn(&(f64, f64)) -> f64| {
                if n == 0 {
                    f64::NAN
                } else {
                    pairs.iter().map(g).sum::<f64>() / n as f64
                }
            };
            SensitivityRow {
                factor,
                rank: 0,
                plus_pct: mean(&|p| p.0),
                minus_pct: mean(&|p| p.1),
                mean_abs_pct: mean(&|p| 0.5 * (p.0.abs() + p.1.abs())),
                n,
            }
        })
        .collect();
    // factors with identical physics (rho and A_f) tie up to rounding noise;
    // quantizing keeps their order stable across builds
    let key = |r: &SensitivityRow| (r.mean_abs_pct * 1e9).round() as i64;
    rows.sort_by(|a, b| key(b).cmp(&key(a)).then(a.factor.cmp(&b.factor)));
    for (i, r) in rows.iter_mut().enumerate() {
        r.rank = i + 1;
    }
    Ok(SensitivityTable {
        vehicle: vehicle.name.clone(),
        perturbation: spec.perturbation,
        scenarios: n_sc,
        baseline_mean: baseline.iter().sum::<f64>() / n_sc as f64,
        rows,
    })
}
