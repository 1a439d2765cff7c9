//! Scenario-parallel batch execution with per-scenario failure isolation.
//!
//! Work is spread over a private rayon pool; results are collected back in
//! input order, so output never depends on the number of workers or on
//! completion order.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::roadload::TruckConfiguration;
use crate::scalar::Scalar;
use crate::scenario::{DayType, Direction, Scenario};
use crate::sim::{run, RunStatus, SimConfig, SimResult};
use crate::vehicle::{PowertrainKind, VehicleConfig};

/// Scenario attributes carried alongside every result for aggregation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar"))]
pub struct RunMeta<T> {
    pub scenario_id: String,
    pub route_id: String,
    pub vehicle: String,
    pub powertrain: PowertrainKind,
    pub direction: Direction,
    pub month: u8,
    pub day_type: DayType,
    pub distance_km: T,
    pub mass_kg: T,
    pub configuration: TruckConfiguration,
    pub mean_ambient_k: T,
}

impl<T: Scalar> RunMeta<T> {
    pub fn of(scenario: &Scenario<T>, vehicle: &VehicleConfig<T>) -> Self {
        Self {
            scenario_id: scenario.id.clone(),
            route_id: scenario.route.id.clone(),
            vehicle: vehicle.name.clone(),
            powertrain: vehicle.kind(),
            direction: scenario.route.direction,
            month: scenario.route.month,
            day_type: scenario.weather.day_type,
            distance_km: scenario.route.length() / T::lit(1000.0),
            mass_kg: scenario.mass_kg,
            configuration: scenario.configuration,
            mean_ambient_k: scenario.weather.mean_temperature_k(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BatchRecord<T> {
    pub meta: RunMeta<T>,
    pub outcome: std::result::Result<SimResult<T>, String>,
}

impl<T: Scalar> BatchRecord<T> {
    /// Label written to the summary: the run status, or `error`.
    pub fn status_label(&self) -> &'static str {
        match &self.outcome {
            Ok(r) => match r.status {
                RunStatus::Completed => "completed",
                RunStatus::SocFloor => "soc_floor",
                RunStatus::OverSpeed => "over_speed",
                RunStatus::Stalled => "stalled",
            },
            Err(_) => "error",
        }
    }

    pub fn is_success(&self) -> bool {
        matches!(&self.outcome, Ok(r) if r.status.is_success())
    }

    pub fn result(&self) -> Option<&SimResult<T>> {
        self.outcome.as_ref().ok()
    }
}

#[derive(Debug, Clone)]
pub struct BatchJob<T> {
    pub scenarios: Vec<Scenario<T>>,
    pub vehicles: Vec<VehicleConfig<T>>,
    pub sim: SimConfig<T>,
    /// Worker threads; 0 picks the machine's core count.
    pub jobs: usize,
}

impl<T: Scalar> BatchJob<T> {
    pub fn new(scenarios: Vec<Scenario<T>>, vehicle: VehicleConfig<T>) -> Self {
        Self { scenarios, vehicles: vec![vehicle], sim: SimConfig::default(), jobs: 0 }
    }

    pub fn with_jobs(mut self, jobs: usize) -> Self {
        self.jobs = jobs;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.scenarios.is_empty() {
            return Err(SimError::Empty("batch has no scenarios".into()));
        }
        if self.vehicles.is_empty() {
            return Err(SimError::Empty("batch has no vehicles".into()));
        }
        let mut seen = BTreeSet::new();
        for v in &self.vehicles {
            v.validate()?;
            if !seen.insert(v.name.as_str()) {
                return Err(SimError::invalid("batch", format!("duplicate vehicle name `{}`", v.name)));
            }
        }
        let mut ids = BTreeSet::new();
        for s in &self.scenarios {
            if !ids.insert(s.id.as_str()) {
                return Err(SimError::invalid("batch", format!("duplicate scenario id `{}`", s.id)));
            }
        }
        self.sim.validate()
    }
}

#[derive(Debug, Clone)]
pub struct BatchOutput<T> {
    /// Vehicle-major, then scenario order of the job.
    pub records: Vec<BatchRecord<T>>,
}

fn panic_message(payload: Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = payload.downcast_ref::<&str>() {
        (*s).to_string()
    } else if let Some(s) = payload.downcast_ref::<String>() {
        s.clone()
    } else {
        "panic".into()
    }
}

/// Runs one scenario; errors and panics become a failed record.
pub fn run_isolated<T: Scalar>(
    scenario: &Scenario<T>,
    vehicle: &VehicleConfig<T>,
    cfg: &SimConfig<T>,
) -> BatchRecord<T> {
    let meta = RunMeta::of(scenario, vehicle);
    let outcome = match catch_unwind(AssertUnwindSafe(|| run(scenario, vehicle, &vehicle.driver, cfg))) {
        Ok(Ok(r)) => Ok(r),
        Ok(Err(e)) => Err(e.to_string()),
        Err(p) => Err(format!("panicked: {}", panic_message(p))),
    };
    if let Err(e) = &outcome {
        log::warn!("{} on {}: {e}", meta.scenario_id, meta.vehicle);
    }
    BatchRecord { meta, outcome }
}

pub fn run_batch<T: Scalar>(job: &BatchJob<T>) -> Result<BatchOutput<T>> {
    job.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(job.jobs)
        .build()
        .map_err(|e| SimError::invalid("thread pool", e.to_string()))?;
    let pairs: Vec<(usize, usize)> =
        (0..job.vehicles.len()).flat_map(|v| (0..job.scenarios.len()).map(move |s| (v, s))).collect();
    let records = pool.install(|| {
        pairs.par_iter().map(|&(v, s)| run_isolated(&job.scenarios[s], &job.vehicles[v], &job.sim)).collect()
    });
    Ok(BatchOutput { records })
}

const SUMMARY_HEADER: &str = "vehicle,scenario_id,route_id,direction,month,day_type,configuration,distance_km,\
mass_kg,mean_ambient_c,status,fuel_l_per_100km,kwh_per_100km,regen_kwh,aux_kwh,duration_s,error";

impl<T: Scalar> BatchOutput<T> {
    pub fn failures(&self) -> usize {
        self.records.iter().filter(|r| !r.is_success()).count()
    }

    pub fn successes(&self) -> impl Iterator<Item = (&RunMeta<T>, &SimResult<T>)> {
        self.records.iter().filter(|r| r.is_success()).filter_map(|r| r.result().map(|res| (&r.meta, res)))
    }

    /// One CSV row per record, sorted by vehicle then scenario id.
    pub fn summary_csv(&self) -> String {
        let mut rows: Vec<&BatchRecord<T>> = self.records.iter().collect();
        rows.sort_by(|a, b| (&a.meta.vehicle, &a.meta.scenario_id).cmp(&(&b.meta.vehicle, &b.meta.scenario_id)));
        let mut out = String::from(SUMMARY_HEADER);
        out.push('\n');
        let opt = |x: Option<T>| x.map(|v| v.to_string()).unwrap_or_default();
        for r in rows {
            let m = &r.meta;
            let _ = write!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},",
                m.vehicle,
                m.scenario_id,
                m.route_id,
                m.direction,
                m.month,
                m.day_type,
                m.configuration,
                m.distance_km,
                m.mass_kg,
                crate::scalar::kelvin_to_celsius(m.mean_ambient_k),
                r.status_label()
            );
            match &r.outcome {
                Ok(res) => {
                    let metrics = res.metrics().ok();
                    let _ = writeln!(
                        out,
                        "{},{},{},{},{},",
                        opt(metrics.and_then(|x| x.fuel_l_per_100km)),
                        opt(metrics.and_then(|x| x.kwh_per_100km)),
                        res.totals.regen_kwh,
                        res.aux_total_kwh(),
                        res.totals.duration_s
                    );
                }
                Err(e) => {
                    let _ = writeln!(out, ",,,,,\"{}\"", e.replace('"', "'"));
                }
            }
        }
        out
    }

    /// Writes `summary.csv` and `runs/<vehicle>/<scenario>.json` under `dir`.
    /// Failed runs leave a `.error.txt` instead of a JSON file.
    pub fn write(&self, dir: &Path) -> Result<()> {
        let write = |p: &Path, text: &str| std::fs::write(p, text).map_err(|e| SimError::io(p, e));
        for r in &self.records {
            let run_dir = dir.join("runs").join(&r.meta.vehicle);
            std::fs::create_dir_all(&run_dir).map_err(|e| SimError::io(&run_dir, e))?;
            match &r.outcome {
                Ok(res) => write(&run_dir.join(format!("{}.json", r.meta.scenario_id)), &res.summary_json()?)?,
                Err(e) => write(&run_dir.join(format!("{}.error.txt", r.meta.scenario_id)), e)?,
            }
        }
        std::fs::create_dir_all(dir).map_err(|e| SimError::io(dir, e))?;
        write(&dir.join("summary.csv"), &self.summary_csv())
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::demo::{test_track, uniform_weather};

    fn scenarios(n: usize) -> Vec<Scenario<f64>> {
        (0..n)
            .map(|i| {
                let r = Arc::new(test_track::<f64>(&format!("t{i}"), 2.0 + i as f64, 60.0, 1.0, 6).unwrap());
                let w = Arc::new(uniform_weather(&r, DayType::Nominal, 20.0).unwrap());
                Scenario::new(r, w, 20_000.0, TruckConfiguration::TractorTrailer).unwrap()
            })
            .collect()
    }

    #[test]
    fn empty_batch_rejected() {
        let job = BatchJob::new(vec![], VehicleConfig::<f64>::default_diesel());
        assert!(run_batch(&job).is_err());
    }

    #[test]
    fn failure_isolated() {
        let mut sc = scenarios(3);
        let bad = Arc::new(uniform_weather(&sc[0].route, DayType::Nominal, 20.0).unwrap());
        sc[1].weather = bad;
        let out = run_batch(&BatchJob::new(sc, VehicleConfig::default_diesel()).with_jobs(2)).unwrap();
        assert_eq!(out.records.len(), 3);
        assert_eq!(out.failures(), 1);
        assert_eq!(out.records[1].status_label(), "error");
        assert!(out.summary_csv().lines().count() == 4);
    }
}
