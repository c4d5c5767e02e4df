//! Per-unit discounted cash-flow ledgers and the at-risk classification.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::capacity::{capacity_bid, capacity_revenue, commitment_periods, CapacityAuctionBook};
use super::dispatch::monthly_dispatch;
use super::prices::HourlyPriceSeries;
use super::{
    analysis_window, present_value, GenerationUnit, MarketError, Scenario, MONTHLY_WACC,
};
use crate::month::{MonthRange, YearMonth};

/// Everything a scenario needs to price a fleet: hourly series per zone and
/// the capacity auction book.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioBundle {
    pub scenario: Scenario,
    pub window: MonthRange,
    hourly: BTreeMap<String, HourlyPriceSeries>,
    pub auction_book: CapacityAuctionBook,
}

impl ScenarioBundle {
    pub fn new(scenario: Scenario, window: MonthRange, auction_book: CapacityAuctionBook) -> Self {
        Self {
            scenario,
            window,
            hourly: BTreeMap::new(),
            auction_book,
        }
    }

    pub fn add_zone(&mut self, series: HourlyPriceSeries) {
        self.hourly.insert(series.zone.clone(), series);
    }

    pub fn zone(&self, zone: &str) -> Result<&HourlyPriceSeries, MarketError> {
        self.hourly.get(zone).ok_or_else(|| MarketError::PriceCoverage {
            zone: zone.to_string(),
            month: self.window.start,
        })
    }

    pub fn zones(&self) -> impl Iterator<Item = &str> {
        self.hourly.keys().map(String::as_str)
    }
}

/// One month of a unit's books.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonthlyCashFlow {
    pub month: YearMonth,
    pub electricity_revenue: f64,
    pub capacity_revenue: f64,
    pub variable_cost: f64,
    pub fixed_om: f64,
    pub net: f64,
}

impl MonthlyCashFlow {
    pub fn new(
        month: YearMonth,
        electricity_revenue: f64,
        capacity_revenue: f64,
        variable_cost: f64,
        fixed_om: f64,
    ) -> Self {
        Self {
            month,
            electricity_revenue,
            capacity_revenue,
            variable_cost,
            fixed_om,
            net: (electricity_revenue + capacity_revenue) - (variable_cost + fixed_om),
        }
    }

    pub fn zero(month: YearMonth) -> Self {
        Self::new(month, 0.0, 0.0, 0.0, 0.0)
    }
}

/// A unit's monthly cash flows under one scenario, with discounted total.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CashFlowLedger {
    pub unit_id: String,
    pub scenario: Scenario,
    pub months: Vec<MonthlyCashFlow>,
    pub pv_profit: f64,
}

impl CashFlowLedger {
    /// Assembles a ledger and discounts its net stream at `monthly_rate`.
    pub fn new(
        unit_id: impl Into<String>,
        scenario: Scenario,
        months: Vec<MonthlyCashFlow>,
        monthly_rate: f64,
    ) -> Self {
        let nets: Vec<(YearMonth, f64)> = months.iter().map(|m| (m.month, m.net)).collect();
        Self {
            unit_id: unit_id.into(),
            scenario,
            months,
            pv_profit: present_value(&nets, monthly_rate),
        }
    }

    pub fn net_cash_flows(&self) -> Vec<(YearMonth, f64)> {
        self.months.iter().map(|m| (m.month, m.net)).collect()
    }

    /// The discounted total recomputed from the monthly stream.
    pub fn pv_at(&self, monthly_rate: f64) -> f64 {
        present_value(&self.net_cash_flows(), monthly_rate)
    }
}

/// Builds one unit's ledger under one scenario: dispatch revenue and
/// variable cost from hourly prices, capacity revenue from the auction
/// calendar, fixed O&M spread evenly over in-service months, all discounted
/// at the monthly WACC. Months before the in-service date carry zeros.
pub fn unit_profitability(
    unit: &GenerationUnit,
    bundle: &ScenarioBundle,
) -> Result<CashFlowLedger, MarketError> {
    let series = bundle.zone(&unit.zone)?;
    let window = bundle.window;

    let mut capacity_by_month: BTreeMap<YearMonth, f64> = BTreeMap::new();
    if unit.region.has_capacity_market() {
        for cp in commitment_periods(unit.region, window) {
            let bid = capacity_bid(unit, &cp, series, window)?;
            for (month, revenue) in
                capacity_revenue(unit, &cp, &bundle.auction_book, bid, window)?
            {
                *capacity_by_month.entry(month).or_insert(0.0) += revenue;
            }
        }
    }

    let mut months = Vec::with_capacity(window.len());
    for month in window.iter() {
        if !unit.in_service_during(month) {
            months.push(MonthlyCashFlow::zero(month));
            continue;
        }
        let d = monthly_dispatch(unit, series.month(month)?);
        let fixed = unit.fixed_om_per_mw_year / 12.0 * unit.capacity_mw;
        let capacity = capacity_by_month.get(&month).copied().unwrap_or(0.0);
        months.push(MonthlyCashFlow::new(
            month,
            d.electricity_revenue,
            capacity,
            d.variable_cost,
            fixed,
        ));
    }
    Ok(CashFlowLedger::new(
        &unit.unit_id,
        bundle.scenario,
        months,
        MONTHLY_WACC,
    ))
}

/// Ledgers for every analyzed (non-cogeneration) unit, keyed by unit id.
/// Units are independent, so they price in parallel.
pub fn fleet_ledgers(
    units: &[GenerationUnit],
    bundle: &ScenarioBundle,
) -> Result<BTreeMap<String, CashFlowLedger>, MarketError> {
    let analyzed: Vec<&GenerationUnit> = units.iter().filter(|u| !u.cogeneration).collect();
    let ledgers: Vec<CashFlowLedger> = analyzed
        .par_iter()
        .map(|u| unit_profitability(u, bundle))
        .collect::<Result<_, _>>()?;
    let mut by_id = BTreeMap::new();
    for ledger in ledgers {
        let id = ledger.unit_id.clone();
        if by_id.insert(id.clone(), ledger).is_some() {
            return Err(MarketError::UnitData {
                unit_id: id,
                what: "duplicate unit id in fleet".into(),
            });
        }
    }
    Ok(by_id)
}

/// Fleet totals for one month under one scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FleetMonthlyAggregate {
    pub month: YearMonth,
    pub electricity_revenue: f64,
    pub capacity_revenue: f64,
    pub variable_cost: f64,
    pub fixed_om: f64,
    pub profit: f64,
}

/// A scenario's fleet-level monthly streams and discounted total.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioAggregate {
    pub scenario: Scenario,
    pub months: Vec<FleetMonthlyAggregate>,
    pub pv_profit_total: f64,
}

/// The at-risk classification with its fleet-level context.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AtRiskReport {
    pub at_risk_unit_ids: Vec<String>,
    pub at_risk_units: usize,
    pub fleet_units: usize,
    pub at_risk_capacity_mw: f64,
    pub fleet_capacity_mw: f64,
    pub at_risk_capacity_share: f64,
    pub at_risk_mean_age_years: f64,
    pub at_risk_mean_capacity_mw: f64,
    pub at_risk_by_zone: BTreeMap<String, usize>,
    pub counterfactual: ScenarioAggregate,
    pub current_expectations: ScenarioAggregate,
    /// Discounted fleet profit under current expectations minus the
    /// counterfactual: the cost of the shock to these units.
    pub pv_profit_delta: f64,
}

fn aggregate_scenario(
    scenario: Scenario,
    ledgers: &BTreeMap<String, CashFlowLedger>,
) -> Result<ScenarioAggregate, MarketError> {
    let mut months: Vec<FleetMonthlyAggregate> = Vec::new();
    let mut pv_total = 0.0;
    for ledger in ledgers.values() {
        pv_total += ledger.pv_profit;
        if months.is_empty() {
            months = ledger
                .months
                .iter()
                .map(|m| FleetMonthlyAggregate {
                    month: m.month,
                    electricity_revenue: 0.0,
                    capacity_revenue: 0.0,
                    variable_cost: 0.0,
                    fixed_om: 0.0,
                    profit: 0.0,
                })
                .collect();
        }
        if ledger.months.len() != months.len()
            || ledger
                .months
                .iter()
                .zip(&months)
                .any(|(a, b)| a.month != b.month)
        {
            return Err(MarketError::UnitData {
                unit_id: ledger.unit_id.clone(),
                what: "ledger months do not align with the rest of the fleet".into(),
            });
        }
        for (total, m) in months.iter_mut().zip(&ledger.months) {
            total.electricity_revenue += m.electricity_revenue;
            total.capacity_revenue += m.capacity_revenue;
            total.variable_cost += m.variable_cost;
            total.fixed_om += m.fixed_om;
            total.profit += m.net;
        }
    }
    Ok(ScenarioAggregate {
        scenario,
        months,
        pv_profit_total: pv_total,
    })
}

/// Classifies the fleet: a unit is at risk of retirement when it expected to
/// be profitable under pre-shock prices but no longer is under current
/// expectations. Cogeneration units are outside the analysis and are ignored
/// if present in `fleet`.
pub fn classify_at_risk(
    fleet: &[GenerationUnit],
    counterfactual: &BTreeMap<String, CashFlowLedger>,
    current: &BTreeMap<String, CashFlowLedger>,
) -> Result<AtRiskReport, MarketError> {
    let analyzed: Vec<&GenerationUnit> = fleet.iter().filter(|u| !u.cogeneration).collect();
    let fleet_ids: BTreeSet<&str> = analyzed.iter().map(|u| u.unit_id.as_str()).collect();
    let cf_ids: BTreeSet<&str> = counterfactual.keys().map(String::as_str).collect();
    let cur_ids: BTreeSet<&str> = current.keys().map(String::as_str).collect();
    if cf_ids != cur_ids || cf_ids != fleet_ids {
        return Err(MarketError::FleetMismatch {
            left: cf_ids.len(),
            right: cur_ids.len(),
        });
    }

    let reference = analysis_window().start;
    let mut at_risk: Vec<&GenerationUnit> = analyzed
        .iter()
        .copied()
        .filter(|u| {
            counterfactual[&u.unit_id].pv_profit >= 0.0 && current[&u.unit_id].pv_profit < 0.0
        })
        .collect();
    at_risk.sort_by(|a, b| a.unit_id.cmp(&b.unit_id));

    let fleet_capacity: f64 = analyzed.iter().map(|u| u.capacity_mw).sum();
    let at_risk_capacity: f64 = at_risk.iter().map(|u| u.capacity_mw).sum();
    let n = at_risk.len();
    let mean = |total: f64| if n == 0 { 0.0 } else { total / n as f64 };
    let mut by_zone = BTreeMap::new();
    for u in &at_risk {
        *by_zone.entry(u.zone.clone()).or_insert(0) += 1;
    }

    let cf_agg = aggregate_scenario(Scenario::Counterfactual, counterfactual)?;
    let cur_agg = aggregate_scenario(Scenario::CurrentExpectations, current)?;
    let delta = cur_agg.pv_profit_total - cf_agg.pv_profit_total;

    Ok(AtRiskReport {
        at_risk_unit_ids: at_risk.iter().map(|u| u.unit_id.clone()).collect(),
        at_risk_units: n,
        fleet_units: analyzed.len(),
        at_risk_capacity_mw: at_risk_capacity,
        fleet_capacity_mw: fleet_capacity,
        at_risk_capacity_share: if fleet_capacity > 0.0 {
            at_risk_capacity / fleet_capacity
        } else {
            0.0
        },
        at_risk_mean_age_years: mean(at_risk.iter().map(|u| u.age_years_at(reference)).sum()),
        at_risk_mean_capacity_mw: mean(at_risk_capacity),
        at_risk_by_zone: by_zone,
        counterfactual: cf_agg,
        current_expectations: cur_agg,
        pv_profit_delta: delta,
    })
}
