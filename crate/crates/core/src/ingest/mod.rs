//! Plant-level data ingestion and aggregation to national monthly series.
//!
//! Input files are plain CSV with documented columns (a column map adapts
//! renamed headers). The stage produces the series consumed by the
//! counterfactual experiments: total and per-fuel CO2 emissions, generation,
//! carbon intensity, and degree days.

pub mod fuel;

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::month::{MonthRange, YearMonth};
use crate::series::{MonthlySeries, SeriesError, SeriesLabel};
use fuel::FuelCategory;

/// Kilograms per million metric tonnes.
const KG_PER_MMT: f64 = 1e9;
/// Megawatt-hours per terawatt-hour.
const MWH_PER_TWH: f64 = 1e6;

#[derive(Debug, Error)]
pub enum IngestError {
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
    #[error("{path} line {line}: negative fuel consumption {value}")]
    NegativeConsumption {
        path: PathBuf,
        line: u64,
        value: f64,
    },
    #[error(
        "fuel code {fuel_code:?} has no emission factor and is not zero-emission \
         (plant {plant_id}, {month})"
    )]
    MissingFactor {
        fuel_code: String,
        plant_id: String,
        month: YearMonth,
    },
    #[error("no generation records for {month}; the requested window is not covered")]
    MonthGap { month: YearMonth },
    #[error("degree-day data missing for {month}")]
    DegreeDayGap { month: YearMonth },
    #[error("month {month} has no positive generation; carbon intensity is undefined")]
    ZeroGeneration { month: YearMonth },
    #[error(transparent)]
    Series(#[from] SeriesError),
}

/// Maps documented column roles to actual CSV header names, so renamed
/// exports can be ingested without editing the file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ColumnMap {
    pub plant_id: String,
    pub state: String,
    pub year: String,
    pub month: String,
    pub fuel_code: String,
    pub generation_mwh: String,
    pub fuel_consumed_mmbtu: String,
}

impl Default for ColumnMap {
    fn default() -> Self {
        Self {
            plant_id: "plant_id".into(),
            state: "state".into(),
            year: "year".into(),
            month: "month".into(),
            fuel_code: "fuel_code".into(),
            generation_mwh: "generation_mwh".into(),
            fuel_consumed_mmbtu: "fuel_consumed_mmbtu".into(),
        }
    }
}

/// Parsing configuration for the generation file: header names, the
/// contiguous-U.S. filter, and the set of fuel codes considered known
/// (factor-table codes plus the built-in zero-emission set).
#[derive(Debug, Clone, Default)]
pub struct SchemaConfig {
    pub columns: ColumnMap,
    pub known_fuel_codes: BTreeSet<String>,
    /// When false, rows from outside the 48 states + DC are kept.
    pub contiguous_only: bool,
}

impl SchemaConfig {
    pub fn for_factors(factors: &EmissionFactorTable) -> Self {
        Self {
            columns: ColumnMap::default(),
            known_fuel_codes: factors.codes().map(str::to_string).collect(),
            contiguous_only: true,
        }
    }
}

/// One generation/consumption record: a plant burning one fuel in one month.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantFuelMonth {
    pub plant_id: String,
    pub state: String,
    pub month: YearMonth,
    pub fuel_code: String,
    pub generation_mwh: f64,
    pub fuel_consumed_mmbtu: f64,
}

/// Per-fuel-code CO2 factors in kg per MMBtu, with a provenance note each.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct EmissionFactorTable {
    factors: BTreeMap<String, FactorEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FactorEntry {
    pub kg_co2_per_mmbtu: f64,
    pub provenance: String,
}

impl EmissionFactorTable {
    pub fn insert(&mut self, code: impl Into<String>, kg_per_mmbtu: f64, provenance: impl Into<String>) {
        self.factors.insert(
            code.into(),
            FactorEntry {
                kg_co2_per_mmbtu: kg_per_mmbtu,
                provenance: provenance.into(),
            },
        );
    }

    pub fn get(&self, code: &str) -> Option<f64> {
        self.factors.get(code).map(|e| e.kg_co2_per_mmbtu)
    }

    pub fn codes(&self) -> impl Iterator<Item = &str> {
        self.factors.keys().map(String::as_str)
    }

    /// Loads a `fuel_code, kg_co2_per_mmbtu[, provenance]` CSV.
    pub fn from_csv(path: &Path) -> Result<Self, IngestError> {
        let mut reader = open_csv(path)?;
        let headers = headers_of(&mut reader, path)?;
        let code_col = require_column(&headers, "fuel_code", path)?;
        let factor_col = require_column(&headers, "kg_co2_per_mmbtu", path)?;
        let provenance_col = headers.iter().position(|h| h == "provenance");

        let mut table = Self::default();
        for record in reader.records() {
            let record = record.map_err(|source| IngestError::Csv {
                path: path.to_path_buf(),
                source,
            })?;
            let line = line_of(&record);
            let code = field(&record, code_col).trim().to_string();
            let factor: f64 = parse_field(&record, factor_col, "kg_co2_per_mmbtu", path, line)?;
            if factor < 0.0 {
                return Err(IngestError::BadField {
                    path: path.to_path_buf(),
                    line,
                    column: "kg_co2_per_mmbtu".into(),
                    value: factor.to_string(),
                });
            }
            let provenance = provenance_col
                .map(|i| field(&record, i).trim().to_string())
                .unwrap_or_else(|| "unspecified".to_string());
            table.insert(code, factor, provenance);
        }
        Ok(table)
    }
}

/// Everything the loader noticed but did not reject: unknown fuel codes,
/// negative-generation months, and rows dropped by the geographic filter.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct IngestReport {
    pub rows_read: usize,
    pub rows_kept: usize,
    pub rows_outside_contiguous: usize,
    pub unknown_fuel_codes: BTreeMap<String, usize>,
    pub negative_generation_rows: usize,
}

impl IngestReport {
    pub fn warning_count(&self) -> usize {
        self.unknown_fuel_codes.values().sum::<usize>() + self.negative_generation_rows
    }
}

fn open_csv(path: &Path) -> Result<csv::Reader<std::fs::File>, IngestError> {
    let file = std::fs::File::open(path).map_err(|source| IngestError::Io {
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
) -> Result<csv::StringRecord, IngestError> {
    reader
        .headers()
        .map(|h| h.clone())
        .map_err(|source| IngestError::Csv {
            path: path.to_path_buf(),
            source,
        })
}

fn require_column(
    headers: &csv::StringRecord,
    name: &str,
    path: &Path,
) -> Result<usize, IngestError> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| IngestError::MissingColumn {
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

fn parse_field<T: std::str::FromStr>(
    record: &csv::StringRecord,
    idx: usize,
    column: &str,
    path: &Path,
    line: u64,
) -> Result<T, IngestError> {
    let raw = field(record, idx);
    raw.parse().map_err(|_| IngestError::BadField {
        path: path.to_path_buf(),
        line,
        column: column.to_string(),
        value: raw.to_string(),
    })
}

/// Parses the generation CSV. Rows outside the contiguous U.S. are dropped
/// (when the filter is on); unknown fuel codes and negative net generation
/// are reported, not rejected.
pub fn load_generation(
    path: &Path,
    schema: &SchemaConfig,
) -> Result<(Vec<PlantFuelMonth>, IngestReport), IngestError> {
    let mut reader = open_csv(path)?;
    let headers = headers_of(&mut reader, path)?;
    let cols = &schema.columns;
    let plant_col = require_column(&headers, &cols.plant_id, path)?;
    let state_col = require_column(&headers, &cols.state, path)?;
    let year_col = require_column(&headers, &cols.year, path)?;
    let month_col = require_column(&headers, &cols.month, path)?;
    let fuel_col = require_column(&headers, &cols.fuel_code, path)?;
    let gen_col = require_column(&headers, &cols.generation_mwh, path)?;
    let mmbtu_col = require_column(&headers, &cols.fuel_consumed_mmbtu, path)?;

    let mut records = Vec::new();
    let mut report = IngestReport::default();
    for record in reader.records() {
        let record = record.map_err(|source| IngestError::Csv {
            path: path.to_path_buf(),
            source,
        })?;
        let line = line_of(&record);
        report.rows_read += 1;

        let state = field(&record, state_col).to_string();
        if schema.contiguous_only && !fuel::is_contiguous_state(&state) {
            report.rows_outside_contiguous += 1;
            continue;
        }

        let year: i32 = parse_field(&record, year_col, &cols.year, path, line)?;
        let month_num: u32 = parse_field(&record, month_col, &cols.month, path, line)?;
        let month = YearMonth::new(year, month_num).map_err(|_| IngestError::BadField {
            path: path.to_path_buf(),
            line,
            column: cols.month.clone(),
            value: month_num.to_string(),
        })?;
        let generation_mwh: f64 = parse_field(&record, gen_col, &cols.generation_mwh, path, line)?;
        let fuel_consumed_mmbtu: f64 =
            parse_field(&record, mmbtu_col, &cols.fuel_consumed_mmbtu, path, line)?;
        if fuel_consumed_mmbtu < 0.0 {
            return Err(IngestError::NegativeConsumption {
                path: path.to_path_buf(),
                line,
                value: fuel_consumed_mmbtu,
            });
        }
        if generation_mwh < 0.0 {
            report.negative_generation_rows += 1;
        }
        let fuel_code = field(&record, fuel_col).to_string();
        let known = schema.known_fuel_codes.contains(&fuel_code)
            || !FuelCategory::of(&fuel_code).is_fossil();
        if !known {
            *report.unknown_fuel_codes.entry(fuel_code.clone()).or_insert(0) += 1;
        }

        records.push(PlantFuelMonth {
            plant_id: field(&record, plant_col).to_string(),
            state,
            month,
            fuel_code,
            generation_mwh,
            fuel_consumed_mmbtu,
        });
        report.rows_kept += 1;
    }
    Ok((records, report))
}

/// Loads the `year, month, hdd, cdd` degree-day CSV.
pub fn load_degree_days(path: &Path) -> Result<BTreeMap<YearMonth, (f64, f64)>, IngestError> {
    let mut reader = open_csv(path)?;
    let headers = headers_of(&mut reader, path)?;
    let year_col = require_column(&headers, "year", path)?;
    let month_col = require_column(&headers, "month", path)?;
    let hdd_col = require_column(&headers, "hdd", path)?;
    let cdd_col = require_column(&headers, "cdd", path)?;

    let mut out = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(|source| IngestError::Csv {
            path: path.to_path_buf(),
            source,
        })?;
        let line = line_of(&record);
        let year: i32 = parse_field(&record, year_col, "year", path, line)?;
        let month_num: u32 = parse_field(&record, month_col, "month", path, line)?;
        let month = YearMonth::new(year, month_num).map_err(|_| IngestError::BadField {
            path: path.to_path_buf(),
            line,
            column: "month".into(),
            value: month_num.to_string(),
        })?;
        let hdd: f64 = parse_field(&record, hdd_col, "hdd", path, line)?;
        let cdd: f64 = parse_field(&record, cdd_col, "cdd", path, line)?;
        out.insert(month, (hdd, cdd));
    }
    Ok(out)
}

/// CO2 mass in kg for each record, aligned with the input slice.
///
/// Zero-emission fuels contribute zero. A fossil code without a factor is a
/// hard error when any fuel was actually burned; silently zeroing it would
/// bias the national total low.
pub fn compute_emissions(
    records: &[PlantFuelMonth],
    factors: &EmissionFactorTable,
) -> Result<Vec<f64>, IngestError> {
    records
        .iter()
        .map(|r| {
            if !FuelCategory::of(&r.fuel_code).is_fossil() {
                return Ok(0.0);
            }
            match factors.get(&r.fuel_code) {
                Some(f) => Ok(r.fuel_consumed_mmbtu * f),
                None if r.fuel_consumed_mmbtu == 0.0 => Ok(0.0),
                None => Err(IngestError::MissingFactor {
                    fuel_code: r.fuel_code.clone(),
                    plant_id: r.plant_id.clone(),
                    month: r.month,
                }),
            }
        })
        .collect()
}

/// Annualization factor for a month under the non-leap convention, so that a
/// month-total times the factor is a yearly rate.
pub fn annualization_factor(month: YearMonth) -> f64 {
    365.0 / month.days_non_leap() as f64
}

/// Aggregates per-record emissions to the national monthly series over
/// `window`: total and per-fuel emissions (MMT/yr, annualized), generation
/// (TWh/yr, annualized), carbon intensity (kg/MWh, from unannualized sums),
/// and degree days.
///
/// Sums are accumulated in a canonical sort order, so any permutation of the
/// input rows produces bit-identical output.
pub fn aggregate_series(
    records: &[PlantFuelMonth],
    emissions_kg: &[f64],
    degree_days: &BTreeMap<YearMonth, (f64, f64)>,
    window: MonthRange,
) -> Result<Vec<MonthlySeries>, IngestError> {
    assert_eq!(
        records.len(),
        emissions_kg.len(),
        "one emission value per record"
    );

    #[derive(Default, Clone)]
    struct MonthTotals {
        kg_total: f64,
        kg_by_cat: [f64; 3],
        gen_mwh: f64,
    }

    let mut rows: Vec<(YearMonth, FuelCategory, f64, f64, &str)> = records
        .iter()
        .zip(emissions_kg.iter())
        .filter(|(r, _)| window.contains(r.month))
        .map(|(r, &kg)| {
            (
                r.month,
                FuelCategory::of(&r.fuel_code),
                kg,
                r.generation_mwh,
                r.plant_id.as_str(),
            )
        })
        .collect();
    rows.sort_by(|a, b| {
        a.0.cmp(&b.0)
            .then(a.1.cmp(&b.1))
            .then(a.2.total_cmp(&b.2))
            .then(a.3.total_cmp(&b.3))
            .then(a.4.cmp(b.4))
    });

    let mut totals: BTreeMap<YearMonth, MonthTotals> = BTreeMap::new();
    for (month, cat, kg, gen, _) in rows {
        let t = totals.entry(month).or_default();
        t.kg_total += kg;
        t.gen_mwh += gen;
        match cat {
            FuelCategory::Coal => t.kg_by_cat[0] += kg,
            FuelCategory::Gas => t.kg_by_cat[1] += kg,
            FuelCategory::Oil => t.kg_by_cat[2] += kg,
            FuelCategory::ZeroEmission => {}
        }
    }

    let n = window.len();
    let mut c = Vec::with_capacity(n);
    let mut e = Vec::with_capacity(n);
    let mut intensity = Vec::with_capacity(n);
    let mut c_coal = Vec::with_capacity(n);
    let mut c_gas = Vec::with_capacity(n);
    let mut c_oil = Vec::with_capacity(n);
    let mut hdd = Vec::with_capacity(n);
    let mut cdd = Vec::with_capacity(n);

    for month in window.iter() {
        let t = totals
            .get(&month)
            .ok_or(IngestError::MonthGap { month })?;
        if t.gen_mwh <= 0.0 {
            return Err(IngestError::ZeroGeneration { month });
        }
        let af = annualization_factor(month);
        c.push(t.kg_total * af / KG_PER_MMT);
        e.push(t.gen_mwh * af / MWH_PER_TWH);
        intensity.push(t.kg_total / t.gen_mwh);
        c_coal.push(t.kg_by_cat[0] * af / KG_PER_MMT);
        c_gas.push(t.kg_by_cat[1] * af / KG_PER_MMT);
        c_oil.push(t.kg_by_cat[2] * af / KG_PER_MMT);
        let &(h, cd) = degree_days
            .get(&month)
            .ok_or(IngestError::DegreeDayGap { month })?;
        hdd.push(h);
        cdd.push(cd);
    }

    let start = window.start;
    Ok(vec![
        MonthlySeries::new(SeriesLabel::Emissions.as_str(), start, c)?,
        MonthlySeries::new(SeriesLabel::Generation.as_str(), start, e)?,
        MonthlySeries::new(SeriesLabel::Intensity.as_str(), start, intensity)?,
        MonthlySeries::new(SeriesLabel::Hdd.as_str(), start, hdd)?,
        MonthlySeries::new(SeriesLabel::Cdd.as_str(), start, cdd)?,
        MonthlySeries::new(SeriesLabel::EmissionsCoal.as_str(), start, c_coal)?,
        MonthlySeries::new(SeriesLabel::EmissionsGas.as_str(), start, c_gas)?,
        MonthlySeries::new(SeriesLabel::EmissionsOil.as_str(), start, c_oil)?,
    ])
}
