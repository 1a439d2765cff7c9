//! Cell statistics over batch results, grouped by route group, month, day
//! type, distance band and direction.

use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::scalar::Scalar;
use crate::scenario::{DayType, Direction};
use crate::sim::SimResult;

use super::batch::{BatchOutput, RunMeta};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceBand {
    Under80,
    From80To240,
    From240To400,
    Over400,
}

impl DistanceBand {
    /// Lower bounds are inclusive.
    pub fn of_km(km: f64) -> Self {
        if km < 80.0 {
            DistanceBand::Under80
        } else if km < 240.0 {
            DistanceBand::From80To240
        } else if km < 400.0 {
            DistanceBand::From240To400
        } else {
            DistanceBand::Over400
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DistanceBand::Under80 => "lt80",
            DistanceBand::From80To240 => "80-240",
            DistanceBand::From240To400 => "240-400",
            DistanceBand::Over400 => "gt400",
        }
    }
}

impl fmt::Display for DistanceBand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which dimensions split the cells. Dimensions left out are pooled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grouping {
    pub group: bool,
    pub month: bool,
    pub day_type: bool,
    pub distance_band: bool,
    pub direction: bool,
}

impl Default for Grouping {
    fn default() -> Self {
        Self { group: true, month: true, day_type: true, distance_band: true, direction: true }
    }
}

/// One run reduced to what aggregation needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSample {
    pub vehicle: String,
    pub route_id: String,
    pub direction: Direction,
    pub month: u8,
    pub day_type: DayType,
    pub distance_km: f64,
    /// L/100 km or kWh/100 km.
    pub value: f64,
    pub aux_kwh: Vec<(String, f64)>,
}

impl RunSample {
    pub fn from_result<T: Scalar>(meta: &RunMeta<T>, result: &SimResult<T>) -> Result<Self> {
        Ok(Self {
            vehicle: meta.vehicle.clone(),
            route_id: meta.route_id.clone(),
            direction: meta.direction,
            month: meta.month,
            day_type: meta.day_type,
            distance_km: result.totals.distance_km.as_f64(),
            value: result.metrics()?.primary.as_f64(),
            aux_kwh: result.totals.aux_kwh.iter().map(|a| (a.name.clone(), a.kwh.as_f64())).collect(),
        })
    }

    /// Successful runs of a batch.
    pub fn from_batch<T: Scalar>(batch: &BatchOutput<T>) -> Result<Vec<Self>> {
        batch.successes().map(|(m, r)| Self::from_result(m, r)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellKey {
    pub vehicle: String,
    pub group: Option<usize>,
    pub month: Option<u8>,
    pub day_type: Option<DayType>,
    pub distance_band: Option<DistanceBand>,
    pub direction: Option<Direction>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellStats {
    #[serde(flatten)]
    pub key: CellKey,
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation; 0 for a single run.
    pub std: f64,
    pub median: f64,
    pub min: f64,
    pub max: f64,
    /// Share of total auxiliary energy per component, sorted by name.
    pub aux_shares: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub grouping: Grouping,
    pub cells: Vec<CellStats>,
}

/// Order-independent sum.
fn sorted_sum(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    xs.iter().sum()
}

fn stats(values: &mut [f64]) -> (f64, f64, f64, f64, f64) {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let std = if n > 1 {
        let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
        (ss / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    let median = if n % 2 == 1 { values[n / 2] } else { 0.5 * (values[n / 2 - 1] + values[n / 2]) };
    (mean, std, median, values[0], values[n - 1])
}

/// `groups` maps route id to route group; routes missing from it land in
/// no group.
pub fn seasonal_aggregate(
    samples: &[RunSample],
    grouping: Grouping,
    groups: &BTreeMap<String, usize>,
) -> AggregateReport {
    let mut cells: BTreeMap<CellKey, Vec<&RunSample>> = BTreeMap::new();
    for s in samples {
        let key = CellKey {
            vehicle: s.vehicle.clone(),
            group: if grouping.group { groups.get(&s.route_id).copied() } else { None },
            month: grouping.month.then_some(s.month),
            day_type: grouping.day_type.then_some(s.day_type),
            distance_band: grouping.distance_band.then(|| DistanceBand::of_km(s.distance_km)),
            direction: grouping.direction.then_some(s.direction),
        };
        cells.entry(key).or_default().push(s);
    }
    let cells = cells
        .into_iter()
        .map(|(key, members)| {
            let mut values: Vec<f64> = members.iter().map(|s| s.value).collect();
            let (mean, std, median, min, max) = stats(&mut values);
            let mut per_aux: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
            for s in &members {
                for (name, kwh) in &s.aux_kwh {
                    per_aux.entry(name.as_str()).or_default().push(*kwh);
                }
            }
            let totals: Vec<(String, f64)> = per_aux.into_iter().map(|(n, v)| (n.to_string(), sorted_sum(v))).collect();
            let all = sorted_sum(totals.iter().map(|t| t.1).collect());
            let aux_shares = totals.into_iter().map(|(n, e)| (n, if all > 0.0 { e / all } else { 0.0 })).collect();
            CellStats { key, n: members.len(), mean, std, median, min, max, aux_shares }
        })
        .collect();
    AggregateReport { grouping, cells }
}

impl AggregateReport {
    /// Long format, one row per cell; pooled dimensions print as `all`.
    pub fn to_csv(&self) -> String {
        let mut aux_names: Vec<&str> =
            self.cells.iter().flat_map(|c| c.aux_shares.iter().map(|a| a.0.as_str())).collect();
        aux_names.sort_unstable();
        aux_names.dedup();
        let mut out = String::from("vehicle,group,month,day_type,distance_band,direction,n,mean,std,median,min,max");
        for a in &aux_names {
            let _ = write!(out, ",share_{a}");
        }
        out.push('\n');
        fn cell<D: fmt::Display>(x: Option<D>) -> String {
            x.map(|v| v.to_string()).unwrap_or_else(|| "all".into())
        }
        for c in &self.cells {
            let k = &c.key;
            let _ = write!(
                out,
                "{},{},{},{},{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6}",
                k.vehicle,
                cell(k.group),
                cell(k.month),
                cell(k.day_type),
                cell(k.distance_band),
                cell(k.direction),
                c.n,
                c.mean,
                c.std,
                c.median,
                c.min,
                c.max
            );
            for a in &aux_names {
                let share = c.aux_shares.iter().find(|s| s.0 == *a).map_or(0.0, |s| s.1);
                let _ = write!(out, ",{share:.6}");
            }
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| SimError::parse("aggregate json", e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(route: &str, month: u8, km: f64, value: f64) -> RunSample {
        RunSample {
            vehicle: "v".into(),
            route_id: route.into(),
            direction: Direction::Outbound,
            month,
            day_type: DayType::Nominal,
            distance_km: km,
            value,
            aux_kwh: vec![("fan".into(), 1.0), ("hvac".into(), 3.0)],
        }
    }

    #[test]
    fn bands() {
        assert_eq!(DistanceBand::of_km(79.9), DistanceBand::Under80);
        assert_eq!(DistanceBand::of_km(80.0), DistanceBand::From80To240);
        assert_eq!(DistanceBand::of_km(240.0), DistanceBand::From240To400);
        assert_eq!(DistanceBand::of_km(400.0), DistanceBand::Over400);
    }

    #[test]
    fn single_run_cell() {
        let r = seasonal_aggregate(&[sample("a", 1, 50.0, 140.0)], Grouping::default(), &BTreeMap::new());
        let c = &r.cells[0];
        assert_eq!((c.n, c.mean, c.std, c.median), (1, 140.0, 0.0, 140.0));
        assert_eq!(c.aux_shares, vec![("fan".to_string(), 0.25), ("hvac".to_string(), 0.75)]);
    }

    #[test]
    fn cells_split_and_pool() {
        let xs = vec![sample("a", 1, 50.0, 1.0), sample("b", 1, 50.0, 3.0), sample("c", 2, 50.0, 5.0)];
        let split = seasonal_aggregate(&xs, Grouping::default(), &BTreeMap::new());
        assert_eq!(split.cells.len(), 2);
        assert!((split.cells[0].std - 2f64.sqrt()).abs() < 1e-12);
        let pooled = seasonal_aggregate(&xs, Grouping { month: false, ..Grouping::default() }, &BTreeMap::new());
        assert_eq!(pooled.cells.len(), 1);
        assert_eq!(pooled.cells[0].median, 3.0);
        assert!(pooled.to_csv().lines().nth(1).unwrap().contains(",all,"));
    }
}
