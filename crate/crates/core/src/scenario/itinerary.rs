use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{route::RouteProfile, weather::WeatherTrace, Scenario, VehicleEnvelope};
use crate::error::{Result, SimError};
use crate::roadload::TruckConfiguration;
use crate::scalar::Scalar;

pub const MONTHLY_TARGET_KM: f64 = 8046.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CargoOption<T> {
    pub mass_kg: T,
    pub configuration: TruckConfiguration,
}

#[derive(Debug, Clone)]
pub struct Itinerary<T> {
    pub month: u8,
    pub scenarios: Vec<Scenario<T>>,
}

impl<T: Scalar> Itinerary<T> {
    pub fn distance_km(&self) -> T {
        self.scenarios.iter().map(|s| s.route.length()).sum::<T>() / T::lit(1000.0)
    }
}

/// Draws (route, weather, cargo) triples until the distance target is met.
/// `weather_pool[i]` holds the traces usable with `routes[i]`.
pub fn build_itinerary<T: Scalar>(
    routes: &[Arc<RouteProfile<T>>],
    cargo: &[CargoOption<T>],
    weather_pool: &[Vec<Arc<WeatherTrace<T>>>],
    envelope: &VehicleEnvelope<T>,
    month: u8,
    target_km: T,
    seed: u64,
) -> Result<Itinerary<T>> {
    if !(target_km > T::zero()) {
        return Err(SimError::invalid("distance target", "must be positive"));
    }
    if routes.is_empty() {
        return Err(SimError::Empty("empty route pool".into()));
    }
    if weather_pool.len() != routes.len() {
        return Err(SimError::invalid("weather pool", "one list per route required"));
    }
    let feasible: Vec<&CargoOption<T>> = cargo.iter().filter(|c| envelope.admits(c.mass_kg, c.configuration)).collect();
    let rejected = cargo.len() - feasible.len();
    if rejected > 0 {
        log::debug!("{rejected} cargo options infeasible for this vehicle");
    }
    if feasible.is_empty() {
        return Err(SimError::Empty("no cargo option feasible for this vehicle".into()));
    }
    let usable: Vec<usize> = (0..routes.len()).filter(|&i| !weather_pool[i].is_empty()).collect();
    if usable.is_empty() {
        return Err(SimError::Empty("empty weather pool".into()));
    }
    for &i in &usable {
        for w in &weather_pool[i] {
            w.check_matches(routes[i].points.len())?;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(month as u64);
    let target_m = target_km * T::lit(1000.0);
    let mut total = T::zero();
    let mut scenarios = Vec::new();
    while total < target_m {
        let r = usable[rng.gen_range(0..usable.len())];
        let w = &weather_pool[r][rng.gen_range(0..weather_pool[r].len())];
        let c = feasible[rng.gen_range(0..feasible.len())];
        let sc = Scenario::new(routes[r].clone(), w.clone(), c.mass_kg, c.configuration)?;
        total = total + sc.route.length();
        scenarios.push(sc);
    }
    Ok(Itinerary { month, scenarios })
}

/// Twelve monthly itineraries. Routes tagged with the month are preferred;
/// months without any fall back to the whole pool.
pub fn build_yearly_itineraries<T: Scalar>(
    routes: &[Arc<RouteProfile<T>>],
    cargo: &[CargoOption<T>],
    weather_pool: &[Vec<Arc<WeatherTrace<T>>>],
    envelope: &VehicleEnvelope<T>,
    target_km: T,
    seed: u64,
) -> Result<Vec<Itinerary<T>>> {
    (1..=12u8)
        .map(|m| {
            let idx: Vec<usize> = (0..routes.len()).filter(|&i| routes[i].month == m).collect();
            let idx = if idx.iter().any(|&i| !weather_pool[i].is_empty()) { idx } else { (0..routes.len()).collect() };
            let r: Vec<_> = idx.iter().map(|&i| routes[i].clone()).collect();
            let w: Vec<_> = idx.iter().map(|&i| weather_pool[i].clone()).collect();
            build_itinerary(&r, cargo, &w, envelope, m, target_km, seed)
        })
        .collect()
}
