use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::scalar::Scalar;

/// Daily-average city temperatures for one route, `temps[day][city]` in K.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CityTemperatureTable<T> {
    pub route_id: String,
    /// Day labels as they appeared in the source, sorted.
    pub days: Vec<i64>,
    pub cities: Vec<String>,
    pub temps: Vec<Vec<T>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DayTypeSelection {
    /// 1-based day indices.
    pub cold: usize,
    pub nominal: usize,
    pub hot: usize,
}

/// Root-mean-square of the city temperatures.
pub fn representative_route_temperature<T: Scalar>(temps: &[T]) -> Result<T> {
    if temps.is_empty() {
        return Err(SimError::Empty("no city temperatures".into()));
    }
    if temps.iter().any(|t| !t.is_finite()) {
        return Err(SimError::invalid("temperature", "non-finite value"));
    }
    // sorted summation keeps the result independent of city order
    let mut sq: Vec<T> = temps.iter().map(|&t| t * t).collect();
    sq.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let n = T::from_usize(temps.len()).expect("count fits");
    let rms = (sq.into_iter().sum::<T>() / n).sqrt();
    // rounding can push the RMS a hair outside the input range
    let lo = temps.iter().copied().fold(T::infinity(), T::min);
    let hi = temps.iter().copied().fold(T::neg_infinity(), T::max);
    Ok(rms.clamp_to(lo, hi))
}

fn median<T: Scalar>(values: &[T]) -> T {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) * T::lit(0.5)
    }
}

/// Picks hot, cold and median days from per-day representative temperatures.
/// Ties go to the earliest day.
pub fn select_from_representatives<T: Scalar>(reps: &[T]) -> Result<DayTypeSelection> {
    if reps.is_empty() {
        return Err(SimError::Empty("no days".into()));
    }
    let med = median(reps);
    let (mut cold, mut hot, mut nominal) = (0, 0, 0);
    for (i, &r) in reps.iter().enumerate() {
        if r > reps[hot] {
            hot = i;
        }
        if r < reps[cold] {
            cold = i;
        }
        if (r - med).powi(2) < (reps[nominal] - med).powi(2) {
            nominal = i;
        }
    }
    Ok(DayTypeSelection { cold: cold + 1, nominal: nominal + 1, hot: hot + 1 })
}

impl<T: Scalar> CityTemperatureTable<T> {
    pub fn new(route_id: impl Into<String>, temps: Vec<Vec<T>>) -> Result<Self> {
        let days = (1..=temps.len() as i64).collect();
        let n = temps.first().map(Vec::len).unwrap_or(0);
        let cities = (1..=n).map(|i| format!("city{i}")).collect();
        let t = Self { route_id: route_id.into(), days, cities, temps };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if self.temps.is_empty() {
            return Err(SimError::Empty(format!("route {}: no days", self.route_id)));
        }
        let n = self.temps[0].len();
        if n == 0 {
            return Err(SimError::Empty(format!("route {}: no cities", self.route_id)));
        }
        for (d, row) in self.temps.iter().enumerate() {
            if row.len() != n {
                return Err(SimError::invalid(
                    "city temperatures",
                    format!("route {}: day {} has {} cities, expected {n}", self.route_id, d + 1, row.len()),
                ));
            }
            if row.iter().any(|t| !t.is_finite()) {
                return Err(SimError::invalid(
                    "city temperatures",
                    format!("route {}: non-finite value on day {}", self.route_id, d + 1),
                ));
            }
        }
        Ok(())
    }

    pub fn representatives(&self) -> Result<Vec<T>> {
        self.temps.iter().map(|row| representative_route_temperature(row)).collect()
    }

    pub fn select_day_types(&self) -> Result<DayTypeSelection> {
        select_from_representatives(&self.representatives()?)
    }
}

#[derive(Debug, Deserialize)]
struct CityRow {
    route_id: String,
    day: i64,
    city: String,
    #[serde(rename = "T_K")]
    t_k: f64,
}

/// Reads `route_id,day,city,T_K` rows into one table per route.
pub fn load_city_temperatures<T: Scalar>(path: impl AsRef<Path>) -> Result<Vec<CityTemperatureTable<T>>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| SimError::io(path, e))?;
    parse_city_temperatures(&text)
}

pub fn parse_city_temperatures<T: Scalar>(text: &str) -> Result<Vec<CityTemperatureTable<T>>> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut by_route: BTreeMap<String, BTreeMap<i64, BTreeMap<String, f64>>> = BTreeMap::new();
    for (i, rec) in rdr.deserialize::<CityRow>().enumerate() {
        let row = rec.map_err(|e| SimError::Record { record: i + 1, message: e.to_string() })?;
        if !row.t_k.is_finite() {
            return Err(SimError::Record { record: i + 1, message: "non-finite temperature".into() });
        }
        let prev = by_route.entry(row.route_id).or_default().entry(row.day).or_default().insert(row.city, row.t_k);
        if prev.is_some() {
            return Err(SimError::Record { record: i + 1, message: "duplicate (route, day, city)".into() });
        }
    }
    by_route
        .into_iter()
        .map(|(route_id, days)| {
            let cities: Vec<String> = days.values().next().map(|c| c.keys().cloned().collect()).unwrap_or_default();
            let mut temps = Vec::with_capacity(days.len());
            for (day, row) in &days {
                if row.keys().ne(cities.iter()) {
                    return Err(SimError::invalid(
                        "city temperatures",
                        format!("route {route_id}: day {day} has a different city set"),
                    ));
                }
                temps.push(row.values().map(|&t| T::lit(t)).collect());
            }
            let t = CityTemperatureTable { route_id, days: days.keys().copied().collect(), cities, temps };
            t.validate()?;
            Ok(t)
        })
        .collect()
}
