//! The four pipeline stages behind the subcommands, sharing one error type
//! that carries the process exit code.
//!
//! Exit codes: 0 success, 2 bad input or configuration, 3 numerical failure,
//! 4 data coverage gap. Every output file embeds the config hash and seed so
//! any artifact can be traced to the exact run that produced it.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use gridcf::counterfactual::{
    fuel_split_experiment, run_experiment, write_plot_data, write_report_csv, DeviationReport,
    ExperimentError, ExperimentResult, ExperimentSpec,
};
use gridcf::ingest::{
    aggregate_series, compute_emissions, load_degree_days, load_generation, EmissionFactorTable,
    IngestError, IngestReport, SchemaConfig,
};
use gridcf::market::{
    analysis_window, build_hourly_scenario, classify_at_risk, fleet_ledgers, load_capacity_prices,
    load_forecasts, load_hourly_prices, load_units, write_aggregate_csv, write_ledger_csv,
    AtRiskReport, GenerationUnit, MarketError, MarketRegion, Scenario, ScenarioBundle,
};
use gridcf::month::MonthRange;
use gridcf::series::{SeriesBundle, SeriesLabel};

use crate::config::LoadedConfig;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
    #[error(transparent)]
    Market(#[from] MarketError),
    #[error("cannot write {path}: {source}")]
    Output {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    /// Process exit code for this failure. Coverage gaps are distinguished
    /// from malformed input so batch callers can tell "fetch more data"
    /// apart from "fix the file".
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Output { .. } => 2,
            CliError::Ingest(e) => match e {
                IngestError::MonthGap { .. }
                | IngestError::DegreeDayGap { .. }
                | IngestError::Series(_) => 4,
                _ => 2,
            },
            CliError::Experiment(e) => match e {
                ExperimentError::Gp(_) => 3,
                ExperimentError::Series(_) => 4,
                _ => 2,
            },
            CliError::Market(e) => match e {
                MarketError::MissingTemplate { .. }
                | MarketError::ForecastGap { .. }
                | MarketError::PriceCoverage { .. }
                | MarketError::HourCount { .. }
                | MarketError::CapacityCoverage { .. }
                | MarketError::FleetMismatch { .. } => 4,
                _ => 2,
            },
        }
    }
}

/// Everything a stage needs: the parsed config, the effective seed and
/// output directory after command-line overrides, and the config hash.
pub struct RunContext {
    pub loaded: LoadedConfig,
    pub seed: u64,
    pub out_dir: PathBuf,
}

impl RunContext {
    pub fn new(
        config_path: &Path,
        seed_override: Option<u64>,
        out_override: Option<PathBuf>,
    ) -> Result<Self, CliError> {
        let loaded = LoadedConfig::read(config_path)?;
        let seed = seed_override.unwrap_or(loaded.config.seed);
        let out_dir = match out_override {
            Some(p) => p,
            None => {
                let p = &loaded.config.out_dir;
                if p.is_absolute() {
                    p.clone()
                } else {
                    loaded.base_dir.join(p)
                }
            }
        };
        std::fs::create_dir_all(&out_dir).map_err(|source| CliError::Output {
            path: out_dir.clone(),
            source,
        })?;
        Ok(Self {
            loaded,
            seed,
            out_dir,
        })
    }

    fn sha(&self) -> &str {
        &self.loaded.config_sha256
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let path = self.out_dir.join(name);
        let json = serde_json::to_string_pretty(value)
            .map_err(|e| CliError::Config(format!("cannot serialize {name}: {e}")))?;
        std::fs::write(&path, json.as_bytes()).map_err(|source| CliError::Output {
            path: path.clone(),
            source,
        })?;
        Ok(path)
    }

    fn create(&self, name: &str) -> Result<(PathBuf, std::fs::File), CliError> {
        let path = self.out_dir.join(name);
        let file = std::fs::File::create(&path).map_err(|source| CliError::Output {
            path: path.clone(),
            source,
        })?;
        Ok((path, file))
    }
}

#[derive(Serialize)]
struct IngestReportDoc<'a> {
    config_sha256: &'a str,
    seed: u64,
    report: &'a IngestReport,
}

/// Loads the generation, degree-day, and emission-factor files, computes
/// the national monthly series, and writes `series.json` plus
/// `ingest_report.json`. Returns the bundle for downstream stages.
pub fn cmd_ingest(ctx: &RunContext) -> Result<SeriesBundle, CliError> {
    let ic = &ctx.loaded.config.ingest;
    let factors = EmissionFactorTable::from_csv(&ctx.loaded.input(&ic.factors_csv)?)?;
    let mut schema = SchemaConfig::for_factors(&factors);
    schema.contiguous_only = ic.contiguous_only;

    let (records, report) = load_generation(&ctx.loaded.input(&ic.generation_csv)?, &schema)?;
    for (code, n) in &report.unknown_fuel_codes {
        eprintln!("warning: unknown fuel code {code:?} on {n} rows, treated as zero-emission");
    }
    if report.negative_generation_rows > 0 {
        eprintln!(
            "warning: {} rows report negative net generation",
            report.negative_generation_rows
        );
    }

    let emissions = compute_emissions(&records, &factors)?;
    let degree_days = load_degree_days(&ctx.loaded.input(&ic.degree_days_csv)?)?;
    let window = MonthRange::new(ic.window_start, ic.window_end);
    let series = aggregate_series(&records, &emissions, &degree_days, window)?;

    let mut bundle = SeriesBundle::new(ctx.sha(), ctx.seed);
    for s in series {
        bundle.insert(s);
    }
    ctx.write_json("series.json", &bundle)?;
    ctx.write_json(
        "ingest_report.json",
        &IngestReportDoc {
            config_sha256: ctx.sha(),
            seed: ctx.seed,
            report: &report,
        },
    )?;
    Ok(bundle)
}

fn parse_label(s: &str) -> Result<SeriesLabel, CliError> {
    SeriesLabel::parse(s).ok_or_else(|| {
        CliError::Config(format!(
            "unknown series {s:?}; expected one of emissions, generation, intensity, \
             hdd, cdd, emissions_coal, emissions_gas, emissions_oil"
        ))
    })
}

#[derive(Serialize)]
struct CounterfactualDoc<'a> {
    config_sha256: &'a str,
    seed: u64,
    reports: Vec<&'a DeviationReport>,
}

/// Fits one model per target series on the training window and writes the
/// deviation tables (`deviations_<target>.csv`), plot data
/// (`plot_<target>.csv`), and a combined `counterfactual.json`.
pub fn cmd_counterfactual(
    ctx: &RunContext,
    bundle: &SeriesBundle,
    target_override: Option<&[String]>,
) -> Result<Vec<ExperimentResult>, CliError> {
    let cc = &ctx.loaded.config.counterfactual;
    let names: Vec<String> = match target_override {
        Some(t) => t.to_vec(),
        None => cc.targets.clone(),
    };
    if names.is_empty() {
        return Err(CliError::Config("no target series requested".into()));
    }
    let targets: Vec<SeriesLabel> = names
        .iter()
        .map(|s| parse_label(s))
        .collect::<Result<_, _>>()?;
    let covariates: Vec<SeriesLabel> = cc
        .covariates
        .iter()
        .map(|s| parse_label(s))
        .collect::<Result<_, _>>()?;

    let mut results = Vec::new();
    for target in targets {
        let spec = ExperimentSpec {
            target,
            covariates: covariates.clone(),
            train: MonthRange::new(cc.train_start, cc.train_end),
            forecast: MonthRange::new(cc.forecast_start, cc.forecast_end),
            seed: ctx.seed,
            n_restarts: cc.n_restarts,
            max_iters: 1000,
            grad_tol: 1e-5,
        };
        spec.validate()?;
        let result = run_experiment(bundle, &spec)?;
        if cc.fuel_split && target == SeriesLabel::Emissions {
            results.extend(fuel_split_experiment(bundle, &spec)?);
        }
        results.push(result);
    }
    results.sort_by(|a, b| a.report.target.cmp(&b.report.target));

    for r in &results {
        let name = &r.report.target;
        let (path, mut f) = ctx.create(&format!("deviations_{name}.csv"))?;
        write_report_csv(&mut f, &r.report, ctx.sha(), ctx.seed).map_err(|source| {
            CliError::Output {
                path: path.clone(),
                source,
            }
        })?;
        let (_, mut f) = ctx.create(&format!("plot_{name}.csv"))?;
        write_plot_data(&mut f, bundle, r, ctx.sha(), ctx.seed)?;
    }
    ctx.write_json(
        "counterfactual.json",
        &CounterfactualDoc {
            config_sha256: ctx.sha(),
            seed: ctx.seed,
            reports: results.iter().map(|r| &r.report).collect(),
        },
    )?;
    Ok(results)
}

#[derive(Serialize)]
struct AtRiskDoc<'a> {
    config_sha256: &'a str,
    seed: u64,
    report: &'a AtRiskReport,
}

/// Region each zone belongs to, from the fleet file. Two units disagreeing
/// about their zone's region is a data error worth stopping for.
fn zone_regions(units: &[GenerationUnit]) -> Result<BTreeMap<String, MarketRegion>, CliError> {
    let mut map: BTreeMap<String, MarketRegion> = BTreeMap::new();
    for u in units {
        match map.insert(u.zone.clone(), u.region) {
            Some(prev) if prev != u.region => {
                return Err(CliError::Config(format!(
                    "zone {} is claimed by both {} and {}",
                    u.zone,
                    prev.as_str(),
                    u.region.as_str()
                )));
            }
            _ => {}
        }
    }
    Ok(map)
}

/// Prices both scenarios for every unit in the fleet file and writes the
/// per-unit ledgers, the at-risk classification, and the fleet aggregates.
pub fn cmd_market(ctx: &RunContext) -> Result<AtRiskReport, CliError> {
    let mc = &ctx.loaded.config.market;
    let window = analysis_window();

    let units = load_units(&ctx.loaded.input(&mc.units_csv)?)?;
    let regions = zone_regions(&units)?;
    for zone in regions.keys() {
        if !mc.hourly_csv_by_zone.contains_key(zone) {
            return Err(CliError::Config(format!(
                "no hourly price file configured for zone {zone}"
            )));
        }
    }

    let forecasts = load_forecasts(&ctx.loaded.input(&mc.forecasts_csv)?)?;
    let mut book = load_capacity_prices(&ctx.loaded.input(&mc.capacity_csv)?)?;
    for (zone, &region) in &regions {
        if region.has_capacity_market() {
            book.extend_to_cover(region, zone, window)?;
        }
    }

    let mut bundles = Vec::new();
    for scenario in [Scenario::Counterfactual, Scenario::CurrentExpectations] {
        let mut bundle = ScenarioBundle::new(scenario, window, book.clone());
        for (zone, &region) in &regions {
            let path = ctx.loaded.input(&mc.hourly_csv_by_zone[zone])?;
            let history = load_hourly_prices(&path, zone)?;
            bundle.add_zone(build_hourly_scenario(
                &forecasts, &history, region, scenario, window,
            )?);
        }
        bundles.push(bundle);
    }
    let current_bundle = bundles.pop().expect("two scenarios");
    let cf_bundle = bundles.pop().expect("two scenarios");

    let counterfactual = fleet_ledgers(&units, &cf_bundle)?;
    let current = fleet_ledgers(&units, &current_bundle)?;
    let report = classify_at_risk(&units, &counterfactual, &current)?;

    for (name, ledgers) in [
        ("ledgers_counterfactual.csv", &counterfactual),
        ("ledgers_current_expectations.csv", &current),
    ] {
        let (path, mut f) = ctx.create(name)?;
        write_ledger_csv(&mut f, ledgers, ctx.sha(), ctx.seed).map_err(|source| {
            CliError::Output {
                path: path.clone(),
                source,
            }
        })?;
    }
    let (path, mut f) = ctx.create("fleet_aggregates.csv")?;
    write_aggregate_csv(&mut f, &report, ctx.sha(), ctx.seed).map_err(|source| {
        CliError::Output {
            path: path.clone(),
            source,
        }
    })?;
    ctx.write_json(
        "at_risk.json",
        &AtRiskDoc {
            config_sha256: ctx.sha(),
            seed: ctx.seed,
            report: &report,
        },
    )?;
    Ok(report)
}

#[derive(Serialize)]
struct SummaryDoc<'a> {
    config_sha256: &'a str,
    seed: u64,
    counterfactual: Vec<&'a DeviationReport>,
    market: &'a AtRiskReport,
}

/// Runs the whole pipeline and writes `summary.json` on top of the
/// per-stage outputs.
pub fn cmd_report(ctx: &RunContext, target_override: Option<&[String]>) -> Result<(), CliError> {
    let bundle = cmd_ingest(ctx)?;
    let results = cmd_counterfactual(ctx, &bundle, target_override)?;
    let market = cmd_market(ctx)?;

    ctx.write_json(
        "summary.json",
        &SummaryDoc {
            config_sha256: ctx.sha(),
            seed: ctx.seed,
            counterfactual: results.iter().map(|r| &r.report).collect(),
            market: &market,
        },
    )?;

    let mut stdout = std::io::stdout().lock();
    for r in &results {
        writeln!(
            stdout,
            "{}: {} of {} months significant, average deviation {:+.2}%",
            r.report.target,
            r.report.significant_months,
            r.report.months.len(),
            r.report.average_percent_deviation
        )
        .ok();
    }
    writeln!(
        stdout,
        "at-risk units: {} of {} ({:.1}% of capacity)",
        market.at_risk_units,
        market.fleet_units,
        100.0 * market.at_risk_capacity_share
    )
    .ok();
    Ok(())
}
