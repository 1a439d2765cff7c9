//! Monthly fuel and electricity totals for trucks driving sampled
//! itineraries.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::scalar::Scalar;
use crate::scenario::Itinerary;
use crate::sim::{SimConfig, SimResult};
use crate::vehicle::VehicleConfig;

use super::batch::{run_batch, BatchJob};

/// One trip of one truck.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripTotals {
    pub truck: String,
    pub month: u8,
    pub distance_km: f64,
    pub fuel_l: f64,
    pub battery_kwh: f64,
    pub completed: bool,
}

impl TripTotals {
    pub fn from_result<T: Scalar>(truck: &str, month: u8, r: &SimResult<T>) -> Self {
        Self {
            truck: truck.into(),
            month,
            distance_km: r.totals.distance_km.as_f64(),
            fuel_l: r.totals.fuel_l.as_f64(),
            battery_kwh: r.totals.battery_kwh.as_f64(),
            completed: r.status.is_success(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonthTotals {
    pub truck: String,
    pub month: u8,
    pub trips: usize,
    pub incomplete: usize,
    pub distance_km: f64,
    pub fuel_l: f64,
    pub battery_kwh: f64,
}

/// Spread of one month's totals across trucks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonthSpread {
    pub month: u8,
    pub trucks: usize,
    pub fuel_l_mean: f64,
    pub fuel_l_min: f64,
    pub fuel_l_max: f64,
    pub kwh_mean: f64,
    pub kwh_min: f64,
    pub kwh_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonthlyReport {
    /// Every truck has all twelve months; months without trips are zero.
    pub totals: Vec<MonthTotals>,
    pub spread: Vec<MonthSpread>,
}

pub fn monthly_consumption(trips: &[TripTotals]) -> Result<MonthlyReport> {
    if let Some(t) = trips.iter().find(|t| !(1..=12).contains(&t.month)) {
        return Err(SimError::invalid("month", format!("{} for truck {}", t.month, t.truck)));
    }
    let mut by_truck: BTreeMap<&str, Vec<&TripTotals>> = BTreeMap::new();
    for t in trips {
        by_truck.entry(t.truck.as_str()).or_default().push(t);
    }
    let mut totals = Vec::with_capacity(by_truck.len() * 12);
    for (truck, list) in &by_truck {
        for month in 1..=12u8 {
            let mut m = MonthTotals {
                truck: truck.to_string(),
                month,
                trips: 0,
                incomplete: 0,
                distance_km: 0.0,
                fuel_l: 0.0,
                battery_kwh: 0.0,
            };
            for t in list.iter().filter(|t| t.month == month) {
                m.trips += 1;
                m.incomplete += usize::from(!t.completed);
                m.distance_km += t.distance_km;
                m.fuel_l += t.fuel_l;
                m.battery_kwh += t.battery_kwh;
            }
            totals.push(m);
        }
    }
    let spread = (1..=12u8)
        .filter_map(|month| {
            let rows: Vec<&MonthTotals> = totals.iter().filter(|m| m.month == month).collect();
            if rows.is_empty() {
                return None;
            }
            let n = rows.len() as f64;
            let fold = |f: fn(&MonthTotals) -> f64| {
                let xs = rows.iter().map(|m| f(m));
                let (lo, hi) = xs.clone().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
                (xs.sum::<f64>() / n, lo, hi)
            };
            let (fuel_l_mean, fuel_l_min, fuel_l_max) = fold(|m| m.fuel_l);
            let (kwh_mean, kwh_min, kwh_max) = fold(|m| m.battery_kwh);
            Some(MonthSpread {
                month,
                trucks: rows.len(),
                fuel_l_mean,
                fuel_l_min,
                fuel_l_max,
                kwh_mean,
                kwh_min,
                kwh_max,
            })
        })
        .collect();
    Ok(MonthlyReport { totals, spread })
}

impl MonthlyReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("truck,month,trips,incomplete,distance_km,fuel_l,battery_kwh\n");
        for m in &self.totals {
            let _ = writeln!(
                out,
                "{},{},{},{},{:.3},{:.3},{:.3}",
                m.truck, m.month, m.trips, m.incomplete, m.distance_km, m.fuel_l, m.battery_kwh
            );
        }
        out
    }
}

/// Simulates every trip of a truck's itineraries. Trips that repeat a
/// scenario reuse its (deterministic) result.
pub fn simulate_itineraries<T: Scalar>(
    truck: &str,
    itineraries: &[Itinerary<T>],
    vehicle: &VehicleConfig<T>,
    cfg: &SimConfig<T>,
    jobs: usize,
) -> Result<Vec<TripTotals>> {
    let mut unique = BTreeMap::new();
    for it in itineraries {
        for s in &it.scenarios {
            unique.entry(s.id.clone()).or_insert_with(|| s.clone());
        }
    }
    if unique.is_empty() {
        return Ok(Vec::new());
    }
    let ids: Vec<String> = unique.keys().cloned().collect();
    let job =
        BatchJob { scenarios: unique.into_values().collect(), vehicles: vec![vehicle.clone()], sim: cfg.clone(), jobs };
    let out = run_batch(&job)?;
    let mut by_id = BTreeMap::new();
    for (id, rec) in ids.iter().zip(&out.records) {
        match &rec.outcome {
            Ok(r) => {
                by_id.insert(id.as_str(), r);
            }
            Err(e) => return Err(SimError::EnergyInfeasible(format!("{id}: {e}"))),
        }
    }
    Ok(itineraries
        .iter()
        .flat_map(|it| it.scenarios.iter().map(move |s| (it.month, s)))
        .map(|(month, s)| TripTotals::from_result(truck, month, by_id[s.id.as_str()]))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trip(truck: &str, month: u8, fuel: f64) -> TripTotals {
        TripTotals { truck: truck.into(), month, distance_km: 100.0, fuel_l: fuel, battery_kwh: 0.0, completed: true }
    }

    #[test]
    fn linear_sum_and_empty_months() {
        let trips: Vec<_> = (0..10).map(|_| trip("a", 3, 35.0)).collect();
        let r = monthly_consumption(&trips).unwrap();
        assert_eq!(r.totals.len(), 12);
        let march = &r.totals[2];
        assert!((march.fuel_l - 350.0).abs() < 1e-9);
        assert_eq!(march.distance_km, 1000.0);
        assert_eq!(r.totals[0].fuel_l, 0.0);
        assert_eq!(r.totals[0].trips, 0);
    }

    #[test]
    fn spread_across_trucks() {
        let r = monthly_consumption(&[trip("a", 1, 10.0), trip("b", 1, 30.0)]).unwrap();
        let jan = &r.spread[0];
        assert_eq!((jan.trucks, jan.fuel_l_mean, jan.fuel_l_min, jan.fuel_l_max), (2, 20.0, 10.0, 30.0));
    }

    #[test]
    fn bad_month_rejected() {
        assert!(monthly_consumption(&[trip("a", 13, 1.0)]).is_err());
    }
}
