//! CSV interfaces for the market model: fleet, hourly prices, monthly
//! forecasts, capacity auction results, and the report writers.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use chrono::{Datelike, NaiveDateTime, Timelike};

use super::capacity::{CapacityAuctionBook, ClearingEntry, PriceProvenance};
use super::ledger::{AtRiskReport, CashFlowLedger};
use super::prices::{ForecastBook, HistoricalHourly};
use super::{GenerationUnit, MarketError, MarketRegion};
use crate::month::YearMonth;

fn open_csv(path: &Path) -> Result<csv::Reader<std::fs::File>, MarketError> {
    let file = std::fs::File::open(path).map_err(|source| MarketError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(file))
}

fn headers_of(
    reader: &mut csv::Reader<std::fs::File>,
    path: &Path,
) -> Result<csv::StringRecord, MarketError> {
    reader
        .headers()
        .map(|h| h.clone())
        .map_err(|source| MarketError::Csv {
            path: path.to_path_buf(),
            source,
        })
}

fn require_column(
    headers: &csv::StringRecord,
    name: &str,
    path: &Path,
) -> Result<usize, MarketError> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| MarketError::MissingColumn {
            path: path.to_path_buf(),
            column: name.to_string(),
        })
}

fn field<'r>(record: &'r csv::StringRecord, idx: usize) -> &'r str {
    record.get(idx).unwrap_or("")
}

fn line_of(record: &csv::StringRecord) -> u64 {
    record.position().map(|p| p.line()).unwrap_or(0)
}

fn bad_field(path: &Path, record: &csv::StringRecord, column: &str, value: &str) -> MarketError {
    MarketError::BadField {
        path: path.to_path_buf(),
        line: line_of(record),
        column: column.to_string(),
        value: value.to_string(),
    }
}

fn parse_field<T: std::str::FromStr>(
    record: &csv::StringRecord,
    idx: usize,
    column: &str,
    path: &Path,
) -> Result<T, MarketError> {
    let raw = field(record, idx);
    raw.parse()
        .map_err(|_| bad_field(path, record, column, raw))
}

fn parse_region(
    record: &csv::StringRecord,
    idx: usize,
    path: &Path,
) -> Result<MarketRegion, MarketError> {
    let raw = field(record, idx);
    MarketRegion::parse(raw).ok_or_else(|| bad_field(path, record, "region", raw))
}

fn parse_flag(record: &csv::StringRecord, idx: usize, path: &Path) -> Result<bool, MarketError> {
    match field(record, idx).to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => Err(bad_field(path, record, "cogen", other)),
    }
}

/// Loads the fleet file. Capacity must be positive; variable and fixed
/// costs must be non-negative.
pub fn load_units(path: &Path) -> Result<Vec<GenerationUnit>, MarketError> {
    let mut reader = open_csv(path)?;
    let headers = headers_of(&mut reader, path)?;
    let id_col = require_column(&headers, "unit_id", path)?;
    let region_col = require_column(&headers, "region", path)?;
    let zone_col = require_column(&headers, "zone", path)?;
    let cap_col = require_column(&headers, "capacity_mw", path)?;
    let vc_col = require_column(&headers, "variable_cost_usd_per_mwh", path)?;
    let fom_col = require_column(&headers, "fixed_om_usd_per_mw_year", path)?;
    let service_col = require_column(&headers, "in_service", path)?;
    let cogen_col = require_column(&headers, "cogen", path)?;

    let mut units = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|source| MarketError::Csv {
            path: path.to_path_buf(),
            source,
        })?;
        let unit = GenerationUnit {
            unit_id: field(&record, id_col).to_string(),
            region: parse_region(&record, region_col, path)?,
            zone: field(&record, zone_col).to_string(),
            capacity_mw: parse_field(&record, cap_col, "capacity_mw", path)?,
            variable_cost_per_mwh: parse_field(
                &record,
                vc_col,
                "variable_cost_usd_per_mwh",
                path,
            )?,
            fixed_om_per_mw_year: parse_field(
                &record,
                fom_col,
                "fixed_om_usd_per_mw_year",
                path,
            )?,
            in_service: parse_field(&record, service_col, "in_service", path)?,
            cogeneration: parse_flag(&record, cogen_col, path)?,
        };
        if !(unit.capacity_mw > 0.0) {
            return Err(MarketError::UnitData {
                unit_id: unit.unit_id,
                what: format!("capacity must be positive, got {}", unit.capacity_mw),
            });
        }
        if unit.variable_cost_per_mwh < 0.0 || unit.fixed_om_per_mw_year < 0.0 {
            return Err(MarketError::UnitData {
                unit_id: unit.unit_id,
                what: "costs must be non-negative".into(),
            });
        }
        units.push(unit);
    }
    Ok(units)
}

/// Loads one zone's hourly price history. Timestamps must advance in strict
/// one-hour steps with no gaps, and the file must contain whole calendar
/// months.
pub fn load_hourly_prices(path: &Path, zone: &str) -> Result<HistoricalHourly, MarketError> {
    let mut reader = open_csv(path)?;
    let headers = headers_of(&mut reader, path)?;
    let ts_col = require_column(&headers, "timestamp", path)?;
    let price_col = require_column(&headers, "price_usd_per_mwh", path)?;

    let mut by_month: BTreeMap<YearMonth, Vec<f64>> = BTreeMap::new();
    let mut expected: Option<NaiveDateTime> = None;
    for record in reader.records() {
        let record = record.map_err(|source| MarketError::Csv {
            path: path.to_path_buf(),
            source,
        })?;
        let raw = field(&record, ts_col);
        let ts = NaiveDateTime::parse_from_str(raw, "%Y-%m-%dT%H:%M:%S")
            .map_err(|_| bad_field(path, &record, "timestamp", raw))?;
        if ts.minute() != 0 || ts.second() != 0 {
            return Err(bad_field(path, &record, "timestamp", raw));
        }
        if let Some(want) = expected {
            if ts != want {
                return Err(MarketError::HourSequence {
                    path: path.to_path_buf(),
                    line: line_of(&record),
                    expected: want.format("%Y-%m-%dT%H:%M:%S").to_string(),
                    found: raw.to_string(),
                });
            }
        }
        expected = Some(ts + chrono::Duration::hours(1));
        let price: f64 = parse_field(&record, price_col, "price_usd_per_mwh", path)?;
        by_month
            .entry(YearMonth::of(ts.year(), ts.month()))
            .or_default()
            .push(price);
    }

    let mut history = HistoricalHourly::new(zone);
    for (month, prices) in by_month {
        history.insert_month(month, prices)?;
    }
    Ok(history)
}

/// Loads the monthly regional forecast file, keyed by vintage.
pub fn load_forecasts(path: &Path) -> Result<ForecastBook, MarketError> {
    let mut reader = open_csv(path)?;
    let headers = headers_of(&mut reader, path)?;
    let region_col = require_column(&headers, "region", path)?;
    let year_col = require_column(&headers, "year", path)?;
    let month_col = require_column(&headers, "month", path)?;
    let price_col = require_column(&headers, "price_usd_per_mwh", path)?;
    let vintage_col = require_column(&headers, "vintage", path)?;

    let mut book = ForecastBook::default();
    for record in reader.records() {
        let record = record.map_err(|source| MarketError::Csv {
            path: path.to_path_buf(),
            source,
        })?;
        let region = parse_region(&record, region_col, path)?;
        let year: i32 = parse_field(&record, year_col, "year", path)?;
        let month: u32 = parse_field(&record, month_col, "month", path)?;
        if !(1..=12).contains(&month) {
            return Err(bad_field(path, &record, "month", field(&record, month_col)));
        }
        let price: f64 = parse_field(&record, price_col, "price_usd_per_mwh", path)?;
        let vintage: YearMonth = parse_field(&record, vintage_col, "vintage", path)?;
        book.insert(region, vintage, YearMonth::of(year, month), price);
    }
    Ok(book)
}

fn parse_provenance(
    record: &csv::StringRecord,
    idx: usize,
    path: &Path,
) -> Result<PriceProvenance, MarketError> {
    match field(record, idx)
        .to_ascii_lowercase()
        .replace('-', "_")
        .as_str()
    {
        "actual" => Ok(PriceProvenance::Actual),
        "extrapolated_average" => Ok(PriceProvenance::ExtrapolatedAverage),
        other => Err(bad_field(path, record, "provenance", other)),
    }
}

/// Loads the capacity auction results file.
pub fn load_capacity_prices(path: &Path) -> Result<CapacityAuctionBook, MarketError> {
    let mut reader = open_csv(path)?;
    let headers = headers_of(&mut reader, path)?;
    let region_col = require_column(&headers, "region", path)?;
    let zone_col = require_column(&headers, "zone", path)?;
    let start_col = require_column(&headers, "cp_start", path)?;
    let end_col = require_column(&headers, "cp_end", path)?;
    let price_col = require_column(&headers, "clearing_usd_per_mw_day", path)?;
    let prov_col = require_column(&headers, "provenance", path)?;

    let mut book = CapacityAuctionBook::default();
    for record in reader.records() {
        let record = record.map_err(|source| MarketError::Csv {
            path: path.to_path_buf(),
            source,
        })?;
        book.insert(ClearingEntry {
            region: parse_region(&record, region_col, path)?,
            zone: field(&record, zone_col).to_string(),
            cp_start: parse_field(&record, start_col, "cp_start", path)?,
            cp_end: parse_field(&record, end_col, "cp_end", path)?,
            price_per_mw_day: parse_field(&record, price_col, "clearing_usd_per_mw_day", path)?,
            provenance: parse_provenance(&record, prov_col, path)?,
        });
    }
    Ok(book)
}

/// Writes every unit's monthly ledger as CSV with a provenance comment line.
pub fn write_ledger_csv<W: Write>(
    w: &mut W,
    ledgers: &BTreeMap<String, CashFlowLedger>,
    config_sha256: &str,
    seed: u64,
) -> std::io::Result<()> {
    writeln!(w, "# config_sha256={config_sha256} seed={seed}")?;
    writeln!(
        w,
        "unit_id,scenario,month,electricity_revenue_usd,capacity_revenue_usd,\
         variable_cost_usd,fixed_om_usd,net_usd,pv_profit_usd"
    )?;
    for ledger in ledgers.values() {
        for m in &ledger.months {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{}",
                ledger.unit_id,
                ledger.scenario.as_str(),
                m.month,
                m.electricity_revenue,
                m.capacity_revenue,
                m.variable_cost,
                m.fixed_om,
                m.net,
                ledger.pv_profit,
            )?;
        }
    }
    Ok(())
}

/// Writes the fleet-level monthly streams for both scenarios as CSV.
pub fn write_aggregate_csv<W: Write>(
    w: &mut W,
    report: &AtRiskReport,
    config_sha256: &str,
    seed: u64,
) -> std::io::Result<()> {
    writeln!(w, "# config_sha256={config_sha256} seed={seed}")?;
    writeln!(
        w,
        "scenario,month,electricity_revenue_usd,capacity_revenue_usd,variable_cost_usd,\
         fixed_om_usd,profit_usd"
    )?;
    for agg in [&report.counterfactual, &report.current_expectations] {
        for m in &agg.months {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                agg.scenario.as_str(),
                m.month,
                m.electricity_revenue,
                m.capacity_revenue,
                m.variable_cost,
                m.fixed_om,
                m.profit,
            )?;
        }
    }
    Ok(())
}
