//! Price-taking dispatch of a unit against one month of hourly prices.

use serde::{Deserialize, Serialize};

use super::GenerationUnit;

/// One month of energy-market outcomes for one unit.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DispatchOutcome {
    pub electricity_revenue: f64,
    pub variable_cost: f64,
    pub online_hours: usize,
}

impl DispatchOutcome {
    pub fn energy_profit(&self) -> f64 {
        self.electricity_revenue - self.variable_cost
    }
}

/// Hourly prices sorted from highest to lowest.
pub fn price_duration_curve(prices: &[f64]) -> Vec<f64> {
    assert!(!prices.is_empty(), "a month has at least one hour");
    let mut sorted = prices.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    sorted
}

/// Runs the unit for every hour whose price covers its variable cost.
///
/// The unit is online in hour h iff price_h >= variable cost; revenue is
/// price times capacity for online hours, variable cost accrues only online.
/// The result is independent of hour order.
pub fn monthly_dispatch(unit: &GenerationUnit, prices: &[f64]) -> DispatchOutcome {
    let vc = unit.variable_cost_per_mwh;
    let cap = unit.capacity_mw;
    let mut revenue = 0.0;
    let mut online = 0usize;
    for &p in prices {
        if p >= vc {
            revenue += p * cap;
            online += 1;
        }
    }
    DispatchOutcome {
        electricity_revenue: revenue,
        variable_cost: online as f64 * vc * cap,
        online_hours: online,
    }
}
