//! Routes, weather, representative days, route groups and itineraries.

pub mod daytype;
pub mod grouping;
pub mod itinerary;
pub mod route;
pub mod weather;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use daytype::{
    load_city_temperatures, representative_route_temperature, select_from_representatives, CityTemperatureTable,
    DayTypeSelection,
};
pub use grouping::{group_routes, GeoPoint, GroupAssignment};
pub use itinerary::{build_itinerary, build_yearly_itineraries, CargoOption, Itinerary, MONTHLY_TARGET_KM};
pub use route::{bearing_deg, great_circle_m, normalize_heading, Direction, RoutePoint, RouteProfile};
pub use weather::{ideal_gas_density, DayType, WeatherSample, WeatherTrace};

use crate::error::{Result, SimError};
use crate::roadload::TruckConfiguration;
use crate::scalar::Scalar;

/// Mass range and body configurations a vehicle can operate with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleEnvelope<T> {
    pub min_mass_kg: T,
    pub max_mass_kg: T,
    pub configurations: Vec<TruckConfiguration>,
}

impl<T: Scalar> VehicleEnvelope<T> {
    pub fn admits(&self, mass_kg: T, configuration: TruckConfiguration) -> bool {
        mass_kg >= self.min_mass_kg && mass_kg <= self.max_mass_kg && self.configurations.contains(&configuration)
    }
}

#[derive(Debug, Clone)]
pub struct Scenario<T> {
    pub id: String,
    pub route: Arc<RouteProfile<T>>,
    pub weather: Arc<WeatherTrace<T>>,
    pub mass_kg: T,
    pub configuration: TruckConfiguration,
}

impl<T: Scalar> Scenario<T> {
    pub fn new(
        route: Arc<RouteProfile<T>>,
        weather: Arc<WeatherTrace<T>>,
        mass_kg: T,
        configuration: TruckConfiguration,
    ) -> Result<Self> {
        weather.check_matches(route.points.len())?;
        if !(mass_kg > T::zero()) || !mass_kg.is_finite() {
            return Err(SimError::invalid("mass", format!("{mass_kg} kg")));
        }
        let id = format!("{}-{}-{}-{:.0}kg", route.id, weather.day_type, configuration, mass_kg.as_f64());
        Ok(Self { id, route, weather, mass_kg, configuration })
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn validate_for(&self, envelope: &VehicleEnvelope<T>) -> Result<()> {
        if self.mass_kg < envelope.min_mass_kg || self.mass_kg > envelope.max_mass_kg {
            return Err(SimError::invalid(
                "mass",
                format!(
                    "{} kg outside vehicle range [{}, {}]",
                    self.mass_kg, envelope.min_mass_kg, envelope.max_mass_kg
                ),
            ));
        }
        if !envelope.configurations.contains(&self.configuration) {
            return Err(SimError::invalid(
                "configuration",
                format!("{} not available for this vehicle", self.configuration),
            ));
        }
        Ok(())
    }
}
