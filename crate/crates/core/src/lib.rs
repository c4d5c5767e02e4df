//! Counterfactual analysis of U.S. power-sector CO2 emissions and coal-unit
//! profitability.
//!
//! The crate has four stages that compose into a pipeline:
//!
//! - [`ingest`]: plant-level generation and fuel-consumption records become
//!   national monthly series of emissions, generation, and carbon intensity.
//! - [`gp`]: exact Gaussian-process regression used to forecast those series.
//! - [`counterfactual`]: train-on-history, forecast-the-study-window
//!   experiments with significance calls per month.
//! - [`market`]: hourly dispatch and capacity-market cash flows for coal
//!   units under actual versus pre-shock price expectations, ending in a
//!   retirement-risk classification.

pub mod counterfactual;
pub mod fixture;
pub mod gp;
pub mod ingest;
pub mod market;
pub mod month;
pub mod series;

pub use month::{MonthRange, YearMonth};
pub use series::{MonthlySeries, SeriesBundle, SeriesLabel};
