//! Batch runs, sensitivity sweeps, seasonal aggregation and monthly totals.

pub mod aggregate;
pub mod batch;
pub mod monthly;
pub mod sensitivity;

pub use aggregate::{seasonal_aggregate, AggregateReport, CellKey, CellStats, DistanceBand, Grouping, RunSample};
pub use batch::{run_batch, run_isolated, BatchJob, BatchOutput, BatchRecord, RunMeta};
pub use monthly::{monthly_consumption, simulate_itineraries, MonthSpread, MonthTotals, MonthlyReport, TripTotals};
pub use sensitivity::{perturb, sensitivity, Factor, SensitivityRow, SensitivitySpec, SensitivityTable};
