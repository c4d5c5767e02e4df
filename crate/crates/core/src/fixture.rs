//! Deterministic synthetic fixtures exercising the full pipeline.
//!
//! Two generators: a five-year plant-level emissions dataset with an
//! engineered 2020 demand shock, and a 10-unit/3-zone market dataset whose
//! one marginal unit flips sign between price scenarios. Everything is a
//! pure function of the seed, so regenerated files are byte-identical.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::io;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};

use crate::month::{MonthRange, YearMonth};

const STREAM_STRIDE: u64 = 0x9E37_79B9_7F4A_7C15;

fn stream(seed: u64, idx: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed.wrapping_add(idx.wrapping_mul(STREAM_STRIDE)))
}

/// The months the emissions fixture covers.
pub fn emissions_fixture_window() -> MonthRange {
    MonthRange::new(YearMonth::of(2016, 1), YearMonth::of(2020, 12))
}

struct PlantSpec {
    id: &'static str,
    state: &'static str,
    fuel: &'static str,
    base_gen_mwh: f64,
    heat_rate: f64,
    annual_trend: f64,
    noise_sd: f64,
}

const PLANTS: &[PlantSpec] = &[
    PlantSpec { id: "P001", state: "OH", fuel: "BIT", base_gen_mwh: 900_000.0, heat_rate: 10.2, annual_trend: -0.015, noise_sd: 0.028 },
    PlantSpec { id: "P002", state: "WV", fuel: "BIT", base_gen_mwh: 700_000.0, heat_rate: 10.5, annual_trend: -0.015, noise_sd: 0.028 },
    PlantSpec { id: "P003", state: "IN", fuel: "SUB", base_gen_mwh: 800_000.0, heat_rate: 10.8, annual_trend: -0.015, noise_sd: 0.028 },
    PlantSpec { id: "P004", state: "KY", fuel: "BIT", base_gen_mwh: 600_000.0, heat_rate: 10.4, annual_trend: -0.015, noise_sd: 0.028 },
    PlantSpec { id: "P005", state: "TX", fuel: "LIG", base_gen_mwh: 750_000.0, heat_rate: 11.0, annual_trend: -0.015, noise_sd: 0.028 },
    PlantSpec { id: "P006", state: "PA", fuel: "BIT", base_gen_mwh: 650_000.0, heat_rate: 10.3, annual_trend: -0.015, noise_sd: 0.028 },
    PlantSpec { id: "P101", state: "TX", fuel: "NG", base_gen_mwh: 1_200_000.0, heat_rate: 7.6, annual_trend: 0.02, noise_sd: 0.005 },
    PlantSpec { id: "P102", state: "CA", fuel: "NG", base_gen_mwh: 900_000.0, heat_rate: 7.4, annual_trend: 0.02, noise_sd: 0.005 },
    PlantSpec { id: "P103", state: "NY", fuel: "NG", base_gen_mwh: 700_000.0, heat_rate: 7.8, annual_trend: 0.02, noise_sd: 0.005 },
    PlantSpec { id: "P104", state: "FL", fuel: "NG", base_gen_mwh: 1_000_000.0, heat_rate: 7.5, annual_trend: 0.02, noise_sd: 0.005 },
    PlantSpec { id: "P105", state: "GA", fuel: "NG", base_gen_mwh: 800_000.0, heat_rate: 7.7, annual_trend: 0.02, noise_sd: 0.005 },
    PlantSpec { id: "P201", state: "FL", fuel: "RFO", base_gen_mwh: 60_000.0, heat_rate: 10.6, annual_trend: 0.0, noise_sd: 0.02 },
    PlantSpec { id: "P202", state: "MA", fuel: "DFO", base_gen_mwh: 40_000.0, heat_rate: 10.9, annual_trend: 0.0, noise_sd: 0.02 },
    PlantSpec { id: "P301", state: "WA", fuel: "WAT", base_gen_mwh: 1_500_000.0, heat_rate: 0.0, annual_trend: 0.01, noise_sd: 0.005 },
    PlantSpec { id: "P302", state: "IL", fuel: "NUC", base_gen_mwh: 2_000_000.0, heat_rate: 0.0, annual_trend: 0.01, noise_sd: 0.005 },
    PlantSpec { id: "P303", state: "IA", fuel: "WND", base_gen_mwh: 600_000.0, heat_rate: 0.0, annual_trend: 0.01, noise_sd: 0.005 },
    // Outside the contiguous filter; dropped with a report entry.
    PlantSpec { id: "P401", state: "AK", fuel: "DFO", base_gen_mwh: 30_000.0, heat_rate: 10.8, annual_trend: 0.0, noise_sd: 0.02 },
    // Waste-heat recovery: no fuel burned, code unknown to the factor table.
    PlantSpec { id: "P402", state: "TX", fuel: "WHR", base_gen_mwh: 10_000.0, heat_rate: 0.0, annual_trend: 0.0, noise_sd: 0.005 },
];

/// Demand-shock multipliers for March through December 2020, by category.
const COAL_SHOCK: [f64; 10] = [0.995, 0.72, 0.76, 0.985, 0.985, 0.99, 0.995, 1.0, 1.0, 1.0];
const GAS_SHOCK: [f64; 10] = [0.995, 0.97, 0.97, 0.925, 0.925, 0.93, 0.935, 0.98, 0.995, 1.0];
const OIL_SHOCK: [f64; 10] = [0.99, 0.88, 0.90, 0.97, 1.0, 1.02, 1.05, 1.08, 1.10, 1.12];

fn shock_for(fuel: &str, month: YearMonth) -> f64 {
    if month.year() != 2020 || month.month() < 3 {
        return 1.0;
    }
    let idx = (month.month() - 3) as usize;
    match crate::ingest::fuel::FuelCategory::of(fuel) {
        crate::ingest::fuel::FuelCategory::Coal => COAL_SHOCK[idx],
        crate::ingest::fuel::FuelCategory::Gas => GAS_SHOCK[idx],
        crate::ingest::fuel::FuelCategory::Oil => OIL_SHOCK[idx],
        crate::ingest::fuel::FuelCategory::ZeroEmission => 1.0,
    }
}

fn seasonal(month: u32, peak_month: f64) -> f64 {
    (TAU * (month as f64 - peak_month) / 12.0).cos()
}

/// Plant-level generation, degree-day, and emission-factor CSVs.
#[derive(Debug, Clone)]
pub struct EmissionsFixture {
    pub generation_csv: String,
    pub degree_days_csv: String,
    pub factors_csv: String,
}

pub fn emissions_fixture(seed: u64) -> EmissionsFixture {
    let window = emissions_fixture_window();
    let mut dd_rng = stream(seed, 1);
    let hdd_noise = Normal::new(0.0, 12.0).unwrap();
    let cdd_noise = Normal::new(0.0, 8.0).unwrap();

    let mut degree_days: BTreeMap<YearMonth, (f64, f64)> = BTreeMap::new();
    for month in window.iter() {
        let hdd_shape = ((1.0 + seasonal(month.month(), 1.0)) / 2.0).powf(1.3);
        let cdd_shape = ((1.0 + seasonal(month.month(), 7.0)) / 2.0).powf(1.3);
        let hdd = (580.0 * hdd_shape + hdd_noise.sample(&mut dd_rng)).max(0.0);
        let cdd = (380.0 * cdd_shape + cdd_noise.sample(&mut dd_rng)).max(0.0);
        degree_days.insert(month, (hdd, cdd));
    }
    let n = degree_days.len() as f64;
    let hdd_mean = degree_days.values().map(|v| v.0).sum::<f64>() / n;
    let cdd_mean = degree_days.values().map(|v| v.1).sum::<f64>() / n;

    let mut degree_days_csv = String::from("year,month,hdd,cdd\n");
    for (month, (hdd, cdd)) in &degree_days {
        degree_days_csv.push_str(&format!(
            "{},{},{hdd:.1},{cdd:.1}\n",
            month.year(),
            month.month()
        ));
    }

    let mut gen_rng = stream(seed, 2);
    let unit_noise = Normal::new(0.0, 1.0).unwrap();
    let mut generation_csv =
        String::from("plant_id,state,year,month,fuel_code,generation_mwh,fuel_consumed_mmbtu\n");
    for plant in PLANTS {
        for month in window.iter() {
            let years = month.months_since(window.start) as f64 / 12.0;
            let (hdd, cdd) = degree_days[&month];
            let demand = 1.0 + 0.00018 * (hdd - hdd_mean) + 0.00035 * (cdd - cdd_mean);
            let season = match plant.fuel {
                "WAT" => 1.0 + 0.15 * seasonal(month.month(), 5.0),
                "WND" => 1.0 + 0.10 * seasonal(month.month(), 1.0),
                "NUC" => 1.0,
                _ => 1.0 + 0.06 * seasonal(month.month(), 7.0),
            };
            let noise = 1.0 + plant.noise_sd * unit_noise.sample(&mut gen_rng);
            let gen = plant.base_gen_mwh
                * (1.0 + plant.annual_trend).powf(years)
                * demand
                * season
                * noise
                * shock_for(plant.fuel, month);
            let mmbtu = gen * plant.heat_rate;
            generation_csv.push_str(&format!(
                "{},{},{},{},{},{gen:.1},{mmbtu:.1}\n",
                plant.id,
                plant.state,
                month.year(),
                month.month(),
                plant.fuel
            ));
        }
    }

    let factors_csv = "\
fuel_code,kg_co2_per_mmbtu,provenance\n\
BIT,93.3,stationary combustion table\n\
SUB,97.2,stationary combustion table\n\
LIG,96.4,stationary combustion table\n\
ANT,103.7,stationary combustion table\n\
NG,53.07,stationary combustion table\n\
OG,59.0,stationary combustion table\n\
DFO,73.16,stationary combustion table\n\
RFO,78.79,stationary combustion table\n\
PC,102.1,stationary combustion table\n\
KER,72.3,stationary combustion table\n"
        .to_string();

    EmissionsFixture {
        generation_csv,
        degree_days_csv,
        factors_csv,
    }
}

pub fn write_emissions_fixture(dir: &Path, seed: u64) -> io::Result<()> {
    let fixture = emissions_fixture(seed);
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("generation.csv"), fixture.generation_csv)?;
    std::fs::write(dir.join("degree_days.csv"), fixture.degree_days_csv)?;
    std::fs::write(dir.join("factors.csv"), fixture.factors_csv)?;
    Ok(())
}

/// Zone price recipe: a yearly base level, a seasonal swing, and a within-day
/// swing. 2020 carries the shock from March onward.
struct ZoneSpec {
    zone: &'static str,
    region: &'static str,
    level_2018: f64,
    level_2019: f64,
    level_2020_pre: f64,
    level_2020_shock: f64,
    daily_amp: f64,
}

const ZONES: &[ZoneSpec] = &[
    ZoneSpec { zone: "Z1", region: "MISO", level_2018: 26.0, level_2019: 28.0, level_2020_pre: 27.0, level_2020_shock: 19.0, daily_amp: 8.0 },
    ZoneSpec { zone: "Z2", region: "PJM", level_2018: 29.0, level_2019: 30.0, level_2020_pre: 30.5, level_2020_shock: 22.0, daily_amp: 9.0 },
    ZoneSpec { zone: "Z3", region: "ERCOT", level_2018: 23.0, level_2019: 24.0, level_2020_pre: 24.5, level_2020_shock: 17.0, daily_amp: 7.0 },
];

const SEASONAL_AMP: f64 = 3.0;

fn zone_monthly_level(spec: &ZoneSpec, month: YearMonth) -> f64 {
    let base = match month.year() {
        2018 => spec.level_2018,
        2019 => spec.level_2019,
        _ if month.month() < 3 => spec.level_2020_pre,
        _ => spec.level_2020_shock,
    };
    base + SEASONAL_AMP * seasonal(month.month(), 7.0)
}

/// Pre-shock and post-shock regional forecast levels by year.
fn forecast_level(region: &str, vintage_year: i32, year: i32, month: u32) -> f64 {
    let base = match (region, vintage_year) {
        ("MISO", 2020) => 28.5,
        ("PJM", 2020) => 31.0,
        ("ERCOT", 2020) => 25.5,
        ("MISO", 2021) => 21.5,
        ("PJM", 2021) => 24.0,
        ("ERCOT", 2021) => 18.5,
        _ => unreachable!("fixture vintages are 2020 and 2021"),
    };
    base + 0.5 * (year - 2020) as f64 + SEASONAL_AMP * seasonal(month, 7.0)
}

/// Fleet, hourly history, forecast, and capacity-price CSVs.
#[derive(Debug, Clone)]
pub struct MarketFixture {
    pub units_csv: String,
    pub hourly_by_zone: BTreeMap<String, String>,
    pub forecasts_csv: String,
    pub capacity_csv: String,
}

pub fn market_fixture(seed: u64) -> MarketFixture {
    let units_csv = "\
unit_id,region,zone,capacity_mw,variable_cost_usd_per_mwh,fixed_om_usd_per_mw_year,in_service,cogen\n\
U01,MISO,Z1,400,12,25000,1975-06,false\n\
U02,MISO,Z1,250,22,34000,1982-03,false\n\
U03,MISO,Z1,300,26,45000,1979-11,false\n\
U04,MISO,Z1,150,55,60000,1968-01,false\n\
U05,PJM,Z2,500,13,28000,1985-09,false\n\
U06,PJM,Z2,200,27,36000,1977-05,false\n\
U07,PJM,Z2,100,50,55000,1970-08,false\n\
U08,ERCOT,Z3,600,10,20000,1990-02,false\n\
U09,ERCOT,Z3,250,30,30000,1974-12,false\n\
U10,MISO,Z1,150,20,15000,2021-06,false\n\
U11,MISO,Z1,120,18,22000,1988-04,true\n"
        .to_string();

    let mut hourly_by_zone = BTreeMap::new();
    for (zi, spec) in ZONES.iter().enumerate() {
        let mut rng = stream(seed, 10 + zi as u64);
        let mut csv = String::from("timestamp,price_usd_per_mwh\n");
        let months = MonthRange::new(YearMonth::of(2018, 1), YearMonth::of(2020, 12));
        for month in months.iter() {
            let level = zone_monthly_level(spec, month);
            for day in 1..=month.days() {
                for hour in 0..24u32 {
                    let shape = spec.daily_amp * (TAU * (hour as f64 - 9.0) / 24.0).sin();
                    let noise = rng.gen_range(-1.5..1.5);
                    let price = level + shape + noise;
                    csv.push_str(&format!(
                        "{}-{:02}-{day:02}T{hour:02}:00:00,{price:.2}\n",
                        month.year(),
                        month.month()
                    ));
                }
            }
        }
        hourly_by_zone.insert(spec.zone.to_string(), csv);
    }

    let mut forecasts_csv = String::from("region,year,month,price_usd_per_mwh,vintage\n");
    for spec in ZONES {
        for month in MonthRange::new(YearMonth::of(2020, 3), YearMonth::of(2022, 12)).iter() {
            let level = forecast_level(spec.region, 2020, month.year(), month.month());
            forecasts_csv.push_str(&format!(
                "{},{},{},{level:.2},2020-01\n",
                spec.region,
                month.year(),
                month.month()
            ));
        }
        for month in MonthRange::new(YearMonth::of(2021, 1), YearMonth::of(2022, 12)).iter() {
            let level = forecast_level(spec.region, 2021, month.year(), month.month());
            forecasts_csv.push_str(&format!(
                "{},{},{},{level:.2},2021-01\n",
                spec.region,
                month.year(),
                month.month()
            ));
        }
    }

    // MISO publishes one period ahead: four actuals, the rest extrapolated.
    // PJM clears years forward: five actuals. ERCOT has no capacity market.
    let mut capacity_csv =
        String::from("region,zone,cp_start,cp_end,clearing_usd_per_mw_day,provenance\n");
    for (year, price) in [(2016, 80.0), (2017, 85.0), (2018, 90.0), (2019, 95.0)] {
        capacity_csv.push_str(&format!(
            "MISO,Z1,{year}-06,{}-05,{price},actual\n",
            year + 1
        ));
    }
    for (year, price) in [
        (2015, 100.0),
        (2016, 105.0),
        (2017, 110.0),
        (2018, 115.0),
        (2019, 120.0),
    ] {
        capacity_csv.push_str(&format!(
            "PJM,Z2,{year}-06,{}-05,{price},actual\n",
            year + 1
        ));
    }

    MarketFixture {
        units_csv,
        hourly_by_zone,
        forecasts_csv,
        capacity_csv,
    }
}

pub fn write_market_fixture(dir: &Path, seed: u64) -> io::Result<()> {
    let fixture = market_fixture(seed);
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("units.csv"), fixture.units_csv)?;
    for (zone, csv) in &fixture.hourly_by_zone {
        std::fs::write(dir.join(format!("hourly_{zone}.csv")), csv)?;
    }
    std::fs::write(dir.join("forecasts.csv"), fixture.forecasts_csv)?;
    std::fs::write(dir.join("capacity_prices.csv"), fixture.capacity_csv)?;
    Ok(())
}
