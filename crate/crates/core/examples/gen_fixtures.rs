//! Regenerates the sample data set under `fixtures/`.
//!
//! Usage: `cargo run --example gen_fixtures [dir] [seed]` (defaults:
//! `fixtures`, 42). The files are deterministic in the seed, so a rerun
//! with the same arguments is byte-identical.

use std::path::PathBuf;

use gridcf::fixture::{write_emissions_fixture, write_market_fixture};

fn main() -> std::io::Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "fixtures".into()));
    let seed: u64 = args
        .next()
        .map(|s| s.parse().expect("seed must be an unsigned integer"))
        .unwrap_or(42);

    write_emissions_fixture(&dir.join("emissions"), seed)?;
    write_market_fixture(&dir.join("market"), seed)?;

    let config = serde_json::json!({
        "seed": seed,
        "out_dir": "out",
        "ingest": {
            "generation_csv": "emissions/generation.csv",
            "degree_days_csv": "emissions/degree_days.csv",
            "factors_csv": "emissions/factors.csv",
            "contiguous_only": true,
            "window_start": "2016-01",
            "window_end": "2020-12"
        },
        "counterfactual": {
            "targets": ["emissions", "generation", "intensity"],
            "train_start": "2016-01",
            "train_end": "2020-02",
            "forecast_start": "2020-03",
            "forecast_end": "2020-12",
            "fuel_split": true
        },
        "market": {
            "units_csv": "market/units.csv",
            "hourly_csv_by_zone": {
                "Z1": "market/hourly_Z1.csv",
                "Z2": "market/hourly_Z2.csv",
                "Z3": "market/hourly_Z3.csv"
            },
            "forecasts_csv": "market/forecasts.csv",
            "capacity_csv": "market/capacity_prices.csv"
        }
    });
    let pretty = serde_json::to_string_pretty(&config)?;
    std::fs::write(dir.join("config.json"), pretty.as_bytes())?;

    println!("wrote fixture data to {}", dir.display());
    Ok(())
}
