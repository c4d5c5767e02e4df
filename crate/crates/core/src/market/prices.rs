//! Hourly zonal price scenarios reconstructed from monthly regional
//! forecasts.
//!
//! For each forecast month the builder picks the historical template year
//! (2018, 2019, or 2020) whose monthly average is closest to the forecast,
//! copies that month's hourly profile, reconciles the hour count with the
//! target month's calendar, and shifts every hour by a constant so the
//! monthly mean equals the forecast exactly.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{MarketError, MarketRegion, Scenario};
use crate::month::{MonthRange, YearMonth};

/// The years mined for hourly profiles, in tie-break order: when two years
/// match a forecast equally well, the later one wins.
pub const TEMPLATE_YEARS: [i32; 3] = [2018, 2019, 2020];

/// Raw hourly history for one zone, keyed by month.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct HistoricalHourly {
    pub zone: String,
    months: BTreeMap<YearMonth, Vec<f64>>,
}

impl HistoricalHourly {
    pub fn new(zone: impl Into<String>) -> Self {
        Self {
            zone: zone.into(),
            months: BTreeMap::new(),
        }
    }

    /// Adds one month of hourly prices. The hour count must match the
    /// month's actual calendar length.
    pub fn insert_month(&mut self, month: YearMonth, prices: Vec<f64>) -> Result<(), MarketError> {
        let want = (month.days() * 24) as usize;
        if prices.len() != want {
            return Err(MarketError::HourCount {
                zone: self.zone.clone(),
                month,
                got: prices.len(),
                want,
            });
        }
        self.months.insert(month, prices);
        Ok(())
    }

    pub fn month(&self, month: YearMonth) -> Option<&[f64]> {
        self.months.get(&month).map(Vec::as_slice)
    }

    pub fn monthly_average(&self, month: YearMonth) -> Option<f64> {
        self.months
            .get(&month)
            .map(|p| p.iter().sum::<f64>() / p.len() as f64)
    }
}

/// Monthly regional forecasts by publication vintage.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ForecastBook {
    entries: BTreeMap<(MarketRegion, YearMonth), BTreeMap<YearMonth, f64>>,
}

impl ForecastBook {
    pub fn insert(
        &mut self,
        region: MarketRegion,
        vintage: YearMonth,
        month: YearMonth,
        price: f64,
    ) {
        self.entries
            .entry((region, vintage))
            .or_default()
            .insert(month, price);
    }

    pub fn get(
        &self,
        region: MarketRegion,
        vintage: YearMonth,
        month: YearMonth,
    ) -> Result<f64, MarketError> {
        self.entries
            .get(&(region, vintage))
            .and_then(|m| m.get(&month))
            .copied()
            .ok_or(MarketError::ForecastGap {
                region,
                vintage,
                month,
            })
    }
}

/// A full scenario of hourly prices for one zone over the analysis window.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HourlyPriceSeries {
    pub zone: String,
    pub scenario: Scenario,
    months: BTreeMap<YearMonth, Vec<f64>>,
}

impl HourlyPriceSeries {
    pub fn new(zone: impl Into<String>, scenario: Scenario) -> Self {
        Self {
            zone: zone.into(),
            scenario,
            months: BTreeMap::new(),
        }
    }

    /// Adds one month of hourly prices, enforcing the calendar hour count.
    pub fn insert_month(&mut self, month: YearMonth, prices: Vec<f64>) -> Result<(), MarketError> {
        let want = (month.days() * 24) as usize;
        if prices.len() != want {
            return Err(MarketError::HourCount {
                zone: self.zone.clone(),
                month,
                got: prices.len(),
                want,
            });
        }
        self.months.insert(month, prices);
        Ok(())
    }

    pub fn month(&self, month: YearMonth) -> Result<&[f64], MarketError> {
        self.months
            .get(&month)
            .map(Vec::as_slice)
            .ok_or_else(|| MarketError::PriceCoverage {
                zone: self.zone.clone(),
                month,
            })
    }

    pub fn months(&self) -> impl Iterator<Item = (YearMonth, &[f64])> {
        self.months.iter().map(|(m, p)| (*m, p.as_slice()))
    }

    pub fn monthly_mean(&self, month: YearMonth) -> Result<f64, MarketError> {
        let p = self.month(month)?;
        Ok(p.iter().sum::<f64>() / p.len() as f64)
    }
}

/// Publication vintages: expectations formed before the shock, and
/// expectations formed after a year of it.
pub const PRE_SHOCK_VINTAGE: (i32, u32) = (2020, 1);
pub const POST_SHOCK_VINTAGE: (i32, u32) = (2021, 1);

fn vintage(v: (i32, u32)) -> YearMonth {
    YearMonth::of(v.0, v.1)
}

/// Reconciles a template profile's length with the target month: excess
/// hours are dropped from the end, missing hours are filled by repeating the
/// final day.
fn fit_profile_length(mut profile: Vec<f64>, target_hours: usize) -> Vec<f64> {
    if profile.len() > target_hours {
        profile.truncate(target_hours);
    } else {
        while profile.len() < target_hours {
            let idx = profile.len() - 24;
            profile.push(profile[idx]);
        }
    }
    profile
}

/// Builds one month from a template: pick the closest historical year, copy
/// its profile, fix the length, then shift to match the forecast mean.
fn reconstruct_month(
    historical: &HistoricalHourly,
    target_month: YearMonth,
    forecast: f64,
) -> Result<Vec<f64>, MarketError> {
    let mut best: Option<(f64, YearMonth)> = None;
    for year in TEMPLATE_YEARS {
        let candidate = target_month.with_year(year);
        let avg = historical
            .monthly_average(candidate)
            .ok_or_else(|| MarketError::MissingTemplate {
                zone: historical.zone.clone(),
                month: candidate,
            })?;
        let d = (avg - forecast).abs();
        // <= so later template years win ties.
        if best.map_or(true, |(bd, _)| d <= bd) {
            best = Some((d, candidate));
        }
    }
    let (_, template) = best.expect("template years are non-empty");
    let profile = historical
        .month(template)
        .expect("average existed, so the month exists")
        .to_vec();
    let target_hours = (target_month.days() * 24) as usize;
    let mut profile = fit_profile_length(profile, target_hours);
    let mean = profile.iter().sum::<f64>() / profile.len() as f64;
    let shift = forecast - mean;
    for p in &mut profile {
        *p += shift;
    }
    Ok(profile)
}

/// Assembles a zone's hourly scenario over `window`.
///
/// The counterfactual scenario reconstructs every month from the pre-shock
/// forecast vintage. Current expectations keep realized 2020 hourly prices
/// verbatim and reconstruct later months from the post-shock vintage.
pub fn build_hourly_scenario(
    forecasts: &ForecastBook,
    historical: &HistoricalHourly,
    region: MarketRegion,
    scenario: Scenario,
    window: MonthRange,
) -> Result<HourlyPriceSeries, MarketError> {
    let pre = vintage(PRE_SHOCK_VINTAGE);
    let post = vintage(POST_SHOCK_VINTAGE);
    let mut months = BTreeMap::new();
    for month in window.iter() {
        let prices = match scenario {
            Scenario::Counterfactual => {
                let f = forecasts.get(region, pre, month)?;
                reconstruct_month(historical, month, f)?
            }
            Scenario::CurrentExpectations => {
                if month.year() == 2020 {
                    historical
                        .month(month)
                        .ok_or_else(|| MarketError::PriceCoverage {
                            zone: historical.zone.clone(),
                            month,
                        })?
                        .to_vec()
                } else {
                    let f = forecasts.get(region, post, month)?;
                    reconstruct_month(historical, month, f)?
                }
            }
        };
        months.insert(month, prices);
    }
    Ok(HourlyPriceSeries {
        zone: historical.zone.clone(),
        scenario,
        months,
    })
}
