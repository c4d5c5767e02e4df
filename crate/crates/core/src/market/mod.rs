//! Coal-unit economics over March 2020 through December 2022.
//!
//! Monthly regional price forecasts are converted to hourly zonal series
//! (`prices`), units dispatch against them month by month (`dispatch`),
//! capacity-market bids and revenues follow the regional auction calendars
//! (`capacity`), and everything lands in per-unit discounted cash-flow
//! ledgers and an at-risk classification (`ledger`).

pub mod capacity;
pub mod dispatch;
pub mod io;
pub mod ledger;
pub mod prices;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::month::{MonthRange, YearMonth};

pub use capacity::{
    capacity_bid, capacity_revenue, commitment_periods, CapacityAuctionBook, ClearingEntry,
    CommitmentPeriod, PriceProvenance, Season,
};
pub use dispatch::{monthly_dispatch, price_duration_curve, DispatchOutcome};
pub use io::{
    load_capacity_prices, load_forecasts, load_hourly_prices, load_units, write_aggregate_csv,
    write_ledger_csv,
};
pub use ledger::{
    classify_at_risk, fleet_ledgers, unit_profitability, AtRiskReport, CashFlowLedger,
    FleetMonthlyAggregate, MonthlyCashFlow, ScenarioAggregate, ScenarioBundle,
};
pub use prices::{build_hourly_scenario, ForecastBook, HistoricalHourly, HourlyPriceSeries};

/// Monthly discount rate applied to all cash flows.
pub const MONTHLY_WACC: f64 = 0.0038;

/// The annual weighted average cost of capital the monthly rate is quoted
/// from. Kept for the consistency check; all computation uses the monthly
/// rate.
pub const ANNUAL_WACC: f64 = 0.0461;

/// The months covered by the economic analysis.
pub fn analysis_window() -> MonthRange {
    MonthRange::new(YearMonth::of(2020, 3), YearMonth::of(2022, 12))
}

/// Month index for discounting: 1 at the first analysis month.
pub fn month_index(month: YearMonth) -> i64 {
    month.months_since(YearMonth::of(2020, 2))
}

/// Present-value factor for a month at the given monthly rate.
pub fn discount_factor(month: YearMonth, monthly_rate: f64) -> f64 {
    (1.0 + monthly_rate).powi(-(month_index(month) as i32))
}

/// Discounted sum of (month, cash) pairs.
pub fn present_value(cash_flows: &[(YearMonth, f64)], monthly_rate: f64) -> f64 {
    cash_flows
        .iter()
        .map(|&(m, v)| v * discount_factor(m, monthly_rate))
        .sum()
}

/// The seven wholesale regions. Four of them run capacity markets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MarketRegion {
    Caiso,
    Ercot,
    Spp,
    Miso,
    IsoNe,
    Nyiso,
    Pjm,
}

impl MarketRegion {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_uppercase().replace('-', "").as_str() {
            "CAISO" => Some(Self::Caiso),
            "ERCOT" => Some(Self::Ercot),
            "SPP" => Some(Self::Spp),
            "MISO" => Some(Self::Miso),
            "ISONE" | "NE" => Some(Self::IsoNe),
            "NYISO" | "NY" => Some(Self::Nyiso),
            "PJM" => Some(Self::Pjm),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Caiso => "CAISO",
            Self::Ercot => "ERCOT",
            Self::Spp => "SPP",
            Self::Miso => "MISO",
            Self::IsoNe => "ISO-NE",
            Self::Nyiso => "NYISO",
            Self::Pjm => "PJM",
        }
    }

    pub fn has_capacity_market(&self) -> bool {
        matches!(self, Self::Miso | Self::IsoNe | Self::Nyiso | Self::Pjm)
    }
}

impl std::fmt::Display for MarketRegion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which price future a computation assumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// Pre-shock expectations held throughout the window.
    Counterfactual,
    /// Realized prices through 2020, post-shock expectations after.
    CurrentExpectations,
}

impl Scenario {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Counterfactual => "counterfactual",
            Self::CurrentExpectations => "current_expectations",
        }
    }
}

/// One generation unit as described by the fleet file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationUnit {
    pub unit_id: String,
    pub region: MarketRegion,
    pub zone: String,
    pub capacity_mw: f64,
    pub variable_cost_per_mwh: f64,
    pub fixed_om_per_mw_year: f64,
    pub in_service: YearMonth,
    pub cogeneration: bool,
}

impl GenerationUnit {
    pub fn in_service_during(&self, month: YearMonth) -> bool {
        self.in_service <= month
    }

    /// Age in years at a reference month.
    pub fn age_years_at(&self, month: YearMonth) -> f64 {
        month.months_since(self.in_service) as f64 / 12.0
    }
}

#[derive(Debug, Error)]
pub enum MarketError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("csv error in {path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path} is missing required column {column:?}")]
    MissingColumn { path: PathBuf, column: String },
    #[error("{path} line {line}: cannot parse {column}={value:?}")]
    BadField {
        path: PathBuf,
        line: u64,
        column: String,
        value: String,
    },
    #[error("{path} line {line}: expected hour {expected}, found {found}")]
    HourSequence {
        path: PathBuf,
        line: u64,
        expected: String,
        found: String,
    },
    #[error("zone {zone}: no historical hourly data for template month {month}")]
    MissingTemplate { zone: String, month: YearMonth },
    #[error("region {region}, vintage {vintage}: no monthly forecast for {month}")]
    ForecastGap {
        region: MarketRegion,
        vintage: YearMonth,
        month: YearMonth,
    },
    #[error("zone {zone}: hourly prices missing for {month}")]
    PriceCoverage { zone: String, month: YearMonth },
    #[error("zone {zone}: month {month} has {got} hours, expected {want}")]
    HourCount {
        zone: String,
        month: YearMonth,
        got: usize,
        want: usize,
    },
    #[error(
        "zone {zone}: no capacity clearing price for the period starting {cp_start} \
         and no prior periods to extrapolate from"
    )]
    CapacityCoverage { zone: String, cp_start: YearMonth },
    #[error("region {region} does not run a capacity market")]
    NoCapacityMarket { region: MarketRegion },
    #[error("scenario ledgers cover different fleets ({left} vs {right} units)")]
    FleetMismatch { left: usize, right: usize },
    #[error("unit {unit_id}: {what}")]
    UnitData { unit_id: String, what: String },
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_has_thirty_four_months() {
        let w = analysis_window();
        assert_eq!(w.len(), 34);
        assert_eq!(month_index(w.start), 1);
        assert_eq!(month_index(w.end), 34);
        let days: u32 = w.iter().map(|m| m.days()).sum();
        assert_eq!(days, 1036);
    }

    #[test]
    fn discounting_basics() {
        let m1 = YearMonth::of(2020, 3);
        assert!((discount_factor(m1, 0.0038) - 1.0 / 1.0038).abs() < 1e-15);
        assert_eq!(discount_factor(m1, 0.0), 1.0);
        let flows = vec![(m1, 1000.0), (YearMonth::of(2020, 4), 500.0)];
        assert_eq!(present_value(&flows, 0.0), 1500.0);
        let pv = present_value(&flows, 0.0038);
        assert!((pv - (1000.0 / 1.0038 + 500.0 / 1.0038_f64.powi(2))).abs() < 1e-9);
    }

    #[test]
    fn monthly_rate_compounds_near_the_annual_rate() {
        let compounded = (1.0 + MONTHLY_WACC).powi(12) - 1.0;
        assert!((compounded - ANNUAL_WACC).abs() < 0.001);
    }

    #[test]
    fn region_parsing() {
        assert_eq!(MarketRegion::parse("PJM"), Some(MarketRegion::Pjm));
        assert_eq!(MarketRegion::parse("iso-ne"), Some(MarketRegion::IsoNe));
        assert_eq!(MarketRegion::parse("NYISO"), Some(MarketRegion::Nyiso));
        assert_eq!(MarketRegion::parse("XX"), None);
        assert!(MarketRegion::Pjm.has_capacity_market());
        assert!(!MarketRegion::Ercot.has_capacity_market());
    }

    #[test]
    fn unit_service_and_age() {
        let u = GenerationUnit {
            unit_id: "u".into(),
            region: MarketRegion::Miso,
            zone: "Z".into(),
            capacity_mw: 100.0,
            variable_cost_per_mwh: 20.0,
            fixed_om_per_mw_year: 40_000.0,
            in_service: YearMonth::of(1980, 3),
            cogeneration: false,
        };
        assert!(u.in_service_during(YearMonth::of(2020, 3)));
        assert!(!u.in_service_during(YearMonth::of(1980, 2)));
        assert_eq!(u.age_years_at(YearMonth::of(2020, 3)), 40.0);
    }
}
