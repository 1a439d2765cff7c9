// NaN-rejecting checks are written as `!(x > 0)` on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod auxiliaries;
pub mod battery;
pub mod demo;
pub mod diesel;
pub mod driver;
pub mod electric;
pub mod error;
pub mod gearbox;
pub mod interp;
pub mod roadload;
pub mod scalar;
pub mod scenario;
pub mod sim;
pub mod vehicle;

pub use error::{Result, SimError};
pub use scalar::Scalar;

/// `f64` instantiations of the generic types.
pub type Route = scenario::RouteProfile<f64>;
pub type Weather = scenario::WeatherTrace<f64>;
pub type ScenarioF64 = scenario::Scenario<f64>;
pub type Vehicle = vehicle::VehicleConfig<f64>;
pub type Driver = driver::DriverParams<f64>;
pub type Config = sim::SimConfig<f64>;
pub type RunResult = sim::SimResult<f64>;
pub type Performance = sim::PerformanceReport<f64>;
pub type Batch = analysis::BatchJob<f64>;
