//! Capacity-market calendars, auction books, bids, and revenues.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::dispatch::monthly_dispatch;
use super::prices::HourlyPriceSeries;
use super::{discount_factor, GenerationUnit, MarketError, MarketRegion, MONTHLY_WACC};
use crate::month::{MonthRange, YearMonth};

/// Seasonal halves of the one region that clears capacity twice a year.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Season {
    /// November through April.
    Winter,
    /// May through October.
    Summer,
}

/// One auction's delivery window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommitmentPeriod {
    pub region: MarketRegion,
    pub months: MonthRange,
    pub season: Option<Season>,
}

impl CommitmentPeriod {
    pub fn start(&self) -> YearMonth {
        self.months.start
    }
}

/// The commitment periods of a region's capacity market that intersect
/// `window`, in chronological order. Annual markets run June through May;
/// the seasonal market alternates winter (Nov-Apr) and summer (May-Oct).
/// Regions without a capacity market have none.
pub fn commitment_periods(region: MarketRegion, window: MonthRange) -> Vec<CommitmentPeriod> {
    if !region.has_capacity_market() {
        return Vec::new();
    }
    let mut periods = Vec::new();
    let y0 = window.start.year() - 1;
    let y1 = window.end.year();
    for y in y0..=y1 {
        if region == MarketRegion::Nyiso {
            periods.push(CommitmentPeriod {
                region,
                months: MonthRange::new(YearMonth::of(y, 5), YearMonth::of(y, 10)),
                season: Some(Season::Summer),
            });
            periods.push(CommitmentPeriod {
                region,
                months: MonthRange::new(YearMonth::of(y, 11), YearMonth::of(y + 1, 4)),
                season: Some(Season::Winter),
            });
        } else {
            periods.push(CommitmentPeriod {
                region,
                months: MonthRange::new(YearMonth::of(y, 6), YearMonth::of(y + 1, 5)),
                season: None,
            });
        }
    }
    periods.retain(|cp| cp.months.intersect(&window).is_some());
    periods.sort_by_key(|cp| cp.start());
    periods
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriceProvenance {
    Actual,
    ExtrapolatedAverage,
}

/// One zone's clearing price for one commitment period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClearingEntry {
    pub region: MarketRegion,
    pub zone: String,
    pub cp_start: YearMonth,
    pub cp_end: YearMonth,
    pub price_per_mw_day: f64,
    pub provenance: PriceProvenance,
}

/// All known clearing prices, keyed by zone and period start.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CapacityAuctionBook {
    entries: BTreeMap<(String, YearMonth), ClearingEntry>,
}

/// How many prior periods feed an extrapolated price; `None` means the
/// region publishes far enough ahead that extrapolation is never needed.
fn extrapolation_depth(region: MarketRegion) -> Option<usize> {
    match region {
        MarketRegion::Pjm => Some(5),
        MarketRegion::Miso => Some(4),
        MarketRegion::Nyiso => Some(3),
        _ => None,
    }
}

impl CapacityAuctionBook {
    pub fn insert(&mut self, entry: ClearingEntry) {
        self.entries
            .insert((entry.zone.clone(), entry.cp_start), entry);
    }

    pub fn get(&self, zone: &str, cp_start: YearMonth) -> Option<&ClearingEntry> {
        self.entries.get(&(zone.to_string(), cp_start))
    }

    pub fn entries(&self) -> impl Iterator<Item = &ClearingEntry> {
        self.entries.values()
    }

    /// Prior prices for a zone before `cp_start`, restricted to the given
    /// season when one applies, oldest first.
    fn priors(&self, zone: &str, cp_start: YearMonth, season: Option<Season>) -> Vec<f64> {
        self.entries
            .values()
            .filter(|e| e.zone == zone && e.cp_start < cp_start)
            .filter(|e| match season {
                Some(s) => season_of(e.cp_start) == Some(s),
                None => true,
            })
            .map(|e| e.price_per_mw_day)
            .collect()
    }

    /// The price an extrapolated period should carry: the mean of the most
    /// recent prior periods (same season where seasons apply), up to the
    /// region's configured depth.
    pub fn extrapolated_price(&self, cp: &CommitmentPeriod, zone: &str) -> Result<f64, MarketError> {
        let depth = extrapolation_depth(cp.region).ok_or(MarketError::CapacityCoverage {
            zone: zone.to_string(),
            cp_start: cp.start(),
        })?;
        let priors = self.priors(zone, cp.start(), cp.season);
        if priors.is_empty() {
            return Err(MarketError::CapacityCoverage {
                zone: zone.to_string(),
                cp_start: cp.start(),
            });
        }
        let tail = &priors[priors.len().saturating_sub(depth)..];
        Ok(tail.iter().sum::<f64>() / tail.len() as f64)
    }

    /// Fills every commitment period of `region` intersecting `window` for
    /// `zone`, extrapolating missing periods recursively (each extrapolated
    /// price becomes a prior for the next).
    pub fn extend_to_cover(
        &mut self,
        region: MarketRegion,
        zone: &str,
        window: MonthRange,
    ) -> Result<(), MarketError> {
        for cp in commitment_periods(region, window) {
            if self.get(zone, cp.start()).is_none() {
                let price = self.extrapolated_price(&cp, zone)?;
                self.insert(ClearingEntry {
                    region,
                    zone: zone.to_string(),
                    cp_start: cp.start(),
                    cp_end: cp.months.end,
                    price_per_mw_day: price,
                    provenance: PriceProvenance::ExtrapolatedAverage,
                });
            }
        }
        Ok(())
    }
}

/// Season of a period by its starting month, for seasonal markets.
fn season_of(cp_start: YearMonth) -> Option<Season> {
    match cp_start.month() {
        5 => Some(Season::Summer),
        11 => Some(Season::Winter),
        _ => None,
    }
}

/// The unit's capacity bid for a commitment period, in $/MW-day, at an
/// explicit discount rate.
///
/// The bid is zero when discounted energy revenue over the period covers
/// discounted variable plus fixed costs; otherwise it is the constant
/// $/MW-day stream whose present value equals the shortfall.
pub fn capacity_bid_at_rate(
    unit: &GenerationUnit,
    cp: &CommitmentPeriod,
    prices: &HourlyPriceSeries,
    window: MonthRange,
    monthly_rate: f64,
) -> Result<f64, MarketError> {
    if !unit.region.has_capacity_market() {
        return Err(MarketError::NoCapacityMarket {
            region: unit.region,
        });
    }
    let Some(months) = cp.months.intersect(&window) else {
        return Ok(0.0);
    };
    let mut e_pv = 0.0;
    let mut v_pv = 0.0;
    let mut f_pv = 0.0;
    let mut awarded_pv_per_mw_day = 0.0;
    for month in months.iter() {
        if !unit.in_service_during(month) {
            continue;
        }
        let df = discount_factor(month, monthly_rate);
        let d = monthly_dispatch(unit, prices.month(month)?);
        e_pv += d.electricity_revenue * df;
        v_pv += d.variable_cost * df;
        f_pv += unit.fixed_om_per_mw_year / 12.0 * unit.capacity_mw * df;
        awarded_pv_per_mw_day += month.days() as f64 * df;
    }
    if e_pv >= v_pv + f_pv {
        return Ok(0.0);
    }
    let shortfall = v_pv + f_pv - e_pv;
    Ok(shortfall / (unit.capacity_mw * awarded_pv_per_mw_day))
}

/// `capacity_bid_at_rate` at the standard monthly WACC.
pub fn capacity_bid(
    unit: &GenerationUnit,
    cp: &CommitmentPeriod,
    prices: &HourlyPriceSeries,
    window: MonthRange,
) -> Result<f64, MarketError> {
    capacity_bid_at_rate(unit, cp, prices, window, MONTHLY_WACC)
}

/// Monthly capacity revenue within a commitment period: the clearing price
/// times capacity times days in month when the bid clears (bid <= clearing
/// price), zero otherwise. Months before the unit's in-service date pay
/// nothing.
pub fn capacity_revenue(
    unit: &GenerationUnit,
    cp: &CommitmentPeriod,
    book: &CapacityAuctionBook,
    bid: f64,
    window: MonthRange,
) -> Result<Vec<(YearMonth, f64)>, MarketError> {
    let entry = book
        .get(&unit.zone, cp.start())
        .ok_or_else(|| MarketError::CapacityCoverage {
            zone: unit.zone.clone(),
            cp_start: cp.start(),
        })?;
    let Some(months) = cp.months.intersect(&window) else {
        return Ok(Vec::new());
    };
    let cleared = bid <= entry.price_per_mw_day;
    Ok(months
        .iter()
        .map(|month| {
            let pays = cleared && unit.in_service_during(month);
            let revenue = if pays {
                entry.price_per_mw_day * unit.capacity_mw * month.days() as f64
            } else {
                0.0
            };
            (month, revenue)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::analysis_window;
    use crate::market::Scenario;

    fn unit(region: MarketRegion, zone: &str, vc: f64, cap: f64, fom: f64) -> GenerationUnit {
        GenerationUnit {
            unit_id: "u".into(),
            region,
            zone: zone.into(),
            capacity_mw: cap,
            variable_cost_per_mwh: vc,
            fixed_om_per_mw_year: fom,
            in_service: YearMonth::of(2000, 1),
            cogeneration: false,
        }
    }

    fn flat_series(zone: &str, level: f64) -> HourlyPriceSeries {
        let mut series = HourlyPriceSeries::new(zone, Scenario::Counterfactual);
        for month in analysis_window().iter() {
            series
                .insert_month(month, vec![level; (month.days() * 24) as usize])
                .unwrap();
        }
        series
    }

    #[test]
    fn annual_calendar_tiles_the_window() {
        let cps = commitment_periods(MarketRegion::Pjm, analysis_window());
        assert_eq!(cps.len(), 4);
        assert_eq!(cps[0].months.start, YearMonth::of(2019, 6));
        assert_eq!(cps[3].months.start, YearMonth::of(2022, 6));
        assert_eq!(cps[3].months.end, YearMonth::of(2023, 5));
        // Consecutive periods abut exactly.
        for w in cps.windows(2) {
            assert_eq!(w[0].months.end.next(), w[1].months.start);
        }
    }

    #[test]
    fn seasonal_calendar_alternates() {
        let cps = commitment_periods(MarketRegion::Nyiso, analysis_window());
        assert_eq!(cps[0].months.start, YearMonth::of(2019, 11));
        assert_eq!(cps[0].season, Some(Season::Winter));
        assert_eq!(cps[1].months.start, YearMonth::of(2020, 5));
        assert_eq!(cps[1].season, Some(Season::Summer));
        assert_eq!(cps.last().unwrap().months.start, YearMonth::of(2022, 11));
        assert_eq!(cps.len(), 7);
        for w in cps.windows(2) {
            assert_eq!(w[0].months.end.next(), w[1].months.start);
        }
    }

    #[test]
    fn no_capacity_market_regions_have_no_calendar() {
        assert!(commitment_periods(MarketRegion::Ercot, analysis_window()).is_empty());
        assert!(commitment_periods(MarketRegion::Caiso, analysis_window()).is_empty());
        assert!(commitment_periods(MarketRegion::Spp, analysis_window()).is_empty());
    }

    #[test]
    fn clearing_revenue_is_price_times_capacity_times_days() {
        let u = unit(MarketRegion::Miso, "Z", 20.0, 50.0, 0.0);
        let mut book = CapacityAuctionBook::default();
        let cps = commitment_periods(MarketRegion::Miso, analysis_window());
        let cp = cps[1]; // Jun 2020 - May 2021
        book.insert(ClearingEntry {
            region: MarketRegion::Miso,
            zone: "Z".into(),
            cp_start: cp.start(),
            cp_end: cp.months.end,
            price_per_mw_day: 100.0,
            provenance: PriceProvenance::Actual,
        });
        let revenue = capacity_revenue(&u, &cp, &book, 0.0, analysis_window()).unwrap();
        let by_month: BTreeMap<_, _> = revenue.into_iter().collect();
        // A 30-day month pays 100 * 50 * 30 = $150,000.
        assert_eq!(by_month[&YearMonth::of(2021, 4)], 150_000.0);
        // Day counts scale the payment: 31, 30, 28.
        assert_eq!(by_month[&YearMonth::of(2021, 1)], 155_000.0);
        assert_eq!(by_month[&YearMonth::of(2021, 2)], 140_000.0);
    }

    #[test]
    fn bid_above_clearing_price_earns_nothing() {
        let u = unit(MarketRegion::Miso, "Z", 20.0, 50.0, 0.0);
        let mut book = CapacityAuctionBook::default();
        let cps = commitment_periods(MarketRegion::Miso, analysis_window());
        let cp = cps[1];
        book.insert(ClearingEntry {
            region: MarketRegion::Miso,
            zone: "Z".into(),
            cp_start: cp.start(),
            cp_end: cp.months.end,
            price_per_mw_day: 100.0,
            provenance: PriceProvenance::Actual,
        });
        let revenue = capacity_revenue(&u, &cp, &book, 100.01, analysis_window()).unwrap();
        assert!(revenue.iter().all(|&(_, r)| r == 0.0));
    }

    #[test]
    fn energy_profitable_unit_bids_zero() {
        // Variable cost 10 against flat $30 prices, no fixed cost.
        let u = unit(MarketRegion::Pjm, "Z", 10.0, 5.0, 0.0);
        let prices = flat_series("Z", 30.0);
        let cps = commitment_periods(MarketRegion::Pjm, analysis_window());
        let bid = capacity_bid(&u, &cps[1], &prices, analysis_window()).unwrap();
        assert_eq!(bid, 0.0);
    }

    #[test]
    fn undiscounted_bid_matches_hand_arithmetic() {
        // Prices below variable cost: the unit never runs, so the shortfall
        // is exactly the fixed cost. cp Jun 2020 - May 2021 has 365 days.
        // Fixed $36,500/MW-year over 12 months on 1 MW -> $36,500 shortfall
        // -> $100/MW-day.
        let u = unit(MarketRegion::Pjm, "Z", 50.0, 1.0, 36_500.0);
        let prices = flat_series("Z", 10.0);
        let cps = commitment_periods(MarketRegion::Pjm, analysis_window());
        let cp = cps[1];
        assert_eq!(
            cp.months.iter().map(|m| m.days() as u32).sum::<u32>(),
            365
        );
        let bid = capacity_bid_at_rate(&u, &cp, &prices, analysis_window(), 0.0).unwrap();
        assert!((bid - 100.0).abs() < 1e-9, "bid {bid}");
    }

    #[test]
    fn discounted_bid_pv_round_trips_to_the_shortfall() {
        let u = unit(MarketRegion::Pjm, "Z", 50.0, 3.0, 24_000.0);
        let prices = flat_series("Z", 20.0);
        let window = analysis_window();
        let cps = commitment_periods(MarketRegion::Pjm, window);
        let cp = cps[2]; // fully inside the window
        let bid = capacity_bid(&u, &cp, &prices, window).unwrap();
        assert!(bid > 0.0);
        let mut award_pv = 0.0;
        let mut shortfall_pv = 0.0;
        for month in cp.months.iter() {
            let df = discount_factor(month, MONTHLY_WACC);
            award_pv += bid * u.capacity_mw * month.days() as f64 * df;
            shortfall_pv += u.fixed_om_per_mw_year / 12.0 * u.capacity_mw * df;
        }
        assert!(
            (award_pv - shortfall_pv).abs() / shortfall_pv < 1e-6,
            "award {award_pv} vs shortfall {shortfall_pv}"
        );
    }

    #[test]
    fn extrapolation_averages_prior_periods_recursively() {
        let mut book = CapacityAuctionBook::default();
        let window = analysis_window();
        let cps = commitment_periods(MarketRegion::Miso, window);
        // Seed four actuals before the first window period so depth 4 is
        // exercised: period starts Jun 2015..Jun 2018, then Jun 2019 actual.
        for (i, y) in (2015..=2019).enumerate() {
            book.insert(ClearingEntry {
                region: MarketRegion::Miso,
                zone: "Z".into(),
                cp_start: YearMonth::of(y, 6),
                cp_end: YearMonth::of(y + 1, 5),
                price_per_mw_day: 10.0 * (i + 1) as f64,
                provenance: PriceProvenance::Actual,
            });
        }
        book.extend_to_cover(MarketRegion::Miso, "Z", window).unwrap();
        // Jun 2020 period: mean of 2016-2019 prices {20,30,40,50} = 35.
        let p2020 = book.get("Z", YearMonth::of(2020, 6)).unwrap();
        assert_eq!(p2020.price_per_mw_day, 35.0);
        assert_eq!(p2020.provenance, PriceProvenance::ExtrapolatedAverage);
        // Jun 2021: mean of {30,40,50,35} = 38.75 (recursion feeds on the
        // extrapolated 35).
        let p2021 = book.get("Z", YearMonth::of(2021, 6)).unwrap();
        assert_eq!(p2021.price_per_mw_day, 38.75);
        // Every window period is now covered.
        for cp in &cps {
            assert!(book.get("Z", cp.start()).is_some());
        }
    }

    #[test]
    fn seasonal_extrapolation_stays_within_season() {
        let mut book = CapacityAuctionBook::default();
        let window = analysis_window();
        // Three winters and three summers of history with very different
        // levels.
        for y in 2017..=2019 {
            book.insert(ClearingEntry {
                region: MarketRegion::Nyiso,
                zone: "NYC".into(),
                cp_start: YearMonth::of(y, 11),
                cp_end: YearMonth::of(y + 1, 4),
                price_per_mw_day: 200.0,
                provenance: PriceProvenance::Actual,
            });
            book.insert(ClearingEntry {
                region: MarketRegion::Nyiso,
                zone: "NYC".into(),
                cp_start: YearMonth::of(y, 5),
                cp_end: YearMonth::of(y, 10),
                price_per_mw_day: 80.0,
                provenance: PriceProvenance::Actual,
            });
        }
        book.extend_to_cover(MarketRegion::Nyiso, "NYC", window).unwrap();
        assert_eq!(
            book.get("NYC", YearMonth::of(2020, 11)).unwrap().price_per_mw_day,
            200.0
        );
        assert_eq!(
            book.get("NYC", YearMonth::of(2021, 5)).unwrap().price_per_mw_day,
            80.0
        );
    }

    #[test]
    fn missing_history_fails_loudly() {
        let mut book = CapacityAuctionBook::default();
        let err = book
            .extend_to_cover(MarketRegion::Pjm, "Z", analysis_window())
            .unwrap_err();
        assert!(matches!(err, MarketError::CapacityCoverage { .. }));
        // A region with no extrapolation rule cannot be extended at all.
        let err = book
            .extend_to_cover(MarketRegion::IsoNe, "CT", analysis_window())
            .unwrap_err();
        assert!(matches!(err, MarketError::CapacityCoverage { .. }));
    }

    #[test]
    fn out_of_market_unit_cannot_bid() {
        let u = unit(MarketRegion::Ercot, "H", 10.0, 5.0, 0.0);
        let prices = flat_series("H", 30.0);
        let cp = CommitmentPeriod {
            region: MarketRegion::Ercot,
            months: MonthRange::new(YearMonth::of(2020, 6), YearMonth::of(2021, 5)),
            season: None,
        };
        assert!(matches!(
            capacity_bid(&u, &cp, &prices, analysis_window()),
            Err(MarketError::NoCapacityMarket { .. })
        ));
    }
}
