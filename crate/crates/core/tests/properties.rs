//! Invariants that must hold for arbitrary inputs, not just the examples the
//! unit tests pick. Structural ones (symmetry, ordering, monotonicity,
//! round trips) run under proptest; the cash-flow and ingest invariants run
//! against freshly generated fixture data.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use gridcf::fixture::{emissions_fixture_window, write_emissions_fixture, write_market_fixture};
use gridcf::gp::model::ColumnScaling;
use gridcf::gp::{GpModel, KernelComponent, KernelSpec, KernelTerm, Standardization};
use gridcf::ingest::{
    aggregate_series, compute_emissions, load_degree_days, load_generation, EmissionFactorTable,
    SchemaConfig,
};
use gridcf::market::{
    analysis_window, build_hourly_scenario, capacity_bid, capacity_revenue,
    classify_at_risk, commitment_periods, discount_factor, fleet_ledgers, load_capacity_prices,
    load_forecasts, load_hourly_prices, load_units, monthly_dispatch, present_value,
    price_duration_curve, CapacityAuctionBook, ClearingEntry, GenerationUnit, MarketRegion,
    PriceProvenance, Scenario, ScenarioBundle, MONTHLY_WACC,
};
use gridcf::month::{MonthRange, YearMonth};

fn single_column_kernel(periodic: bool, params: &[f64]) -> KernelSpec {
    let mut components = vec![
        KernelComponent {
            column: 0,
            term: KernelTerm::Bias { variance: 1.0 },
        },
        KernelComponent {
            column: 0,
            term: KernelTerm::Linear { variance: 1.0 },
        },
    ];
    if periodic {
        components.push(KernelComponent {
            column: 0,
            term: KernelTerm::StdPeriodic {
                variance: 1.0,
                lengthscale: 1.0,
                period: 12.0,
            },
        });
    }
    let spec = KernelSpec::new(components).unwrap();
    let n = spec.param_count();
    spec.with_params(&params[..n]).unwrap()
}

fn column_matrix(values: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(values.len(), 1, |i, _| values[i])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gram_is_symmetric_with_consistent_diagonal(
        periodic in any::<bool>(),
        params in proptest::collection::vec(0.1f64..5.0, 4),
        xs in proptest::collection::vec(-5.0f64..5.0, 1..=8),
    ) {
        let kernel = single_column_kernel(periodic, &params);
        let x = column_matrix(&xs);
        let gram = kernel.gram(&x).unwrap();
        let cross = kernel.cross(&x, &x).unwrap();
        let diag = kernel.self_diag(&x).unwrap();
        // The square and rectangular builders may order the additions
        // differently, so those agree to rounding; symmetry itself is exact.
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0);
        for i in 0..xs.len() {
            prop_assert!(close(diag[i], gram[(i, i)]));
            for j in 0..xs.len() {
                prop_assert_eq!(gram[(i, j)], gram[(j, i)]);
                prop_assert!(close(cross[(i, j)], gram[(i, j)]));
            }
        }
    }

    #[test]
    fn gram_is_positive_semidefinite(
        periodic in any::<bool>(),
        params in proptest::collection::vec(0.1f64..5.0, 4),
        xs in proptest::collection::vec(-5.0f64..5.0, 1..=8),
    ) {
        let kernel = single_column_kernel(periodic, &params);
        let gram = kernel.gram(&column_matrix(&xs)).unwrap();
        let eigen = gram.symmetric_eigen().eigenvalues;
        let max = eigen.iter().cloned().fold(f64::MIN, f64::max);
        let min = eigen.iter().cloned().fold(f64::MAX, f64::min);
        prop_assert!(
            min >= -1e-8 * max.abs().max(1.0),
            "negative eigenvalue {min} against max {max}"
        );
    }

    #[test]
    fn predictive_variance_stays_within_prior(
        periodic in any::<bool>(),
        params in proptest::collection::vec(0.1f64..5.0, 4),
        noise in 0.05f64..0.5,
        xs in proptest::collection::vec(-5.0f64..5.0, 2..=8),
        stars in proptest::collection::vec(-5.0f64..5.0, 1..=4),
        ys in proptest::collection::vec(-10.0f64..10.0, 8),
    ) {
        let kernel = single_column_kernel(periodic, &params);
        let x = column_matrix(&xs);
        let y = DVector::from_fn(xs.len(), |i, _| ys[i]);
        let x_star = column_matrix(&stars);
        let model = GpModel::with_fixed_hyperparameters(kernel.clone(), noise, &x, &y).unwrap();
        let pred = model.predict(&x_star).unwrap();
        let prior = kernel.self_diag(&x_star).unwrap();
        for i in 0..stars.len() {
            prop_assert!(pred.variance[i] > 0.0);
            prop_assert!(
                pred.variance[i] <= (prior[i] + noise) * (1.0 + 1e-9),
                "conditioning on data must not raise the variance"
            );
            prop_assert!(pred.mean[i].is_finite());
        }
    }

    #[test]
    fn standardization_round_trips(
        ys in proptest::collection::vec(-1e4f64..1e4, 2..=30),
        xs in proptest::collection::vec(0.1f64..1e4, 2..=30),
    ) {
        let n = ys.len().min(xs.len());
        let y = DVector::from_fn(n, |i, _| ys[i]);
        let x = DMatrix::from_fn(n, 1, |i, _| xs[i]);
        let std = Standardization::fit(&x, &y, &[ColumnScaling::DivideByMean]);
        let scaled = std.scale_y(&y);
        let spread = ys.iter().cloned().fold(f64::MIN, f64::max)
            - ys.iter().cloned().fold(f64::MAX, f64::min);
        for i in 0..n {
            let back = std.unscale_mean(scaled[i]);
            prop_assert!(
                (back - y[i]).abs() <= 1e-9 * spread.max(1.0),
                "round trip {back} vs {}",
                y[i]
            );
        }
        // Identity column scaling must leave the matrix untouched.
        let ident = Standardization::fit(&x, &y, &[ColumnScaling::Identity]);
        prop_assert_eq!(ident.scale_x(&x), x);
    }

    #[test]
    fn month_arithmetic_round_trips(
        year in 1900i32..2100,
        month in 1u32..=12,
        offset in -600i64..600,
    ) {
        let ym = YearMonth::of(year, month);
        let shifted = ym.plus_months(offset);
        prop_assert_eq!(shifted.months_since(ym), offset);
        prop_assert_eq!(ym.plus_months(0), ym);
        prop_assert_eq!(ym.next().prev(), ym);
        if offset >= 0 {
            let range = MonthRange::new(ym, shifted);
            prop_assert_eq!(range.len() as i64, offset + 1);
            prop_assert_eq!(range.index_of(shifted), Some(offset as usize));
        }
    }

    #[test]
    fn dispatch_never_gains_from_higher_cost(
        prices in proptest::collection::vec(-50.0f64..150.0, 1..=200),
        cap in 0.1f64..1000.0,
        vc_lo in 0.0f64..80.0,
        vc_delta in 0.0f64..40.0,
    ) {
        let unit = |vc: f64| GenerationUnit {
            unit_id: "u".into(),
            region: MarketRegion::Ercot,
            zone: "Z".into(),
            capacity_mw: cap,
            variable_cost_per_mwh: vc,
            fixed_om_per_mw_year: 0.0,
            in_service: YearMonth::of(2000, 1),
            cogeneration: false,
        };
        let cheap = monthly_dispatch(&unit(vc_lo), &prices);
        let dear = monthly_dispatch(&unit(vc_lo + vc_delta), &prices);
        prop_assert!(dear.online_hours <= cheap.online_hours);
        let margin_cheap = cheap.electricity_revenue - cheap.variable_cost;
        let margin_dear = dear.electricity_revenue - dear.variable_cost;
        let scale = margin_cheap.abs().max(margin_dear.abs()).max(1.0);
        prop_assert!(
            margin_dear <= margin_cheap + 1e-9 * scale,
            "margin rose from {margin_cheap} to {margin_dear} when cost went up"
        );
    }

    #[test]
    fn duration_curve_is_a_descending_permutation(
        prices in proptest::collection::vec(-100.0f64..500.0, 1..=300),
    ) {
        let curve = price_duration_curve(&prices);
        prop_assert_eq!(curve.len(), prices.len());
        for w in curve.windows(2) {
            prop_assert!(w[0] >= w[1]);
        }
        let mut expected = prices.clone();
        expected.sort_by(|a, b| b.total_cmp(a));
        prop_assert_eq!(curve, expected);
    }

    #[test]
    fn present_value_is_additive_and_plain_at_zero(
        a in proptest::collection::vec((0i64..72, -1e6f64..1e6), 0..=20),
        b in proptest::collection::vec((0i64..72, -1e6f64..1e6), 0..=20),
        rate in 0.0f64..0.02,
    ) {
        let base = YearMonth::of(2019, 1);
        let flows = |spec: &[(i64, f64)]| -> Vec<(YearMonth, f64)> {
            spec.iter().map(|&(m, v)| (base.plus_months(m), v)).collect()
        };
        let fa = flows(&a);
        let fb = flows(&b);
        let mut joint = fa.clone();
        joint.extend(fb.iter().cloned());
        let split = present_value(&fa, rate) + present_value(&fb, rate);
        let whole = present_value(&joint, rate);
        prop_assert!(
            (whole - split).abs() <= 1e-9 * whole.abs().max(split.abs()).max(1.0)
        );
        let plain: f64 = joint.iter().map(|(_, v)| v).sum();
        prop_assert_eq!(present_value(&joint, 0.0), plain);
    }
}

// ---------------------------------------------------------------------------
// Invariants over generated fixture data.
// ---------------------------------------------------------------------------

fn market_scenario_bundles(dir: &std::path::Path) -> (Vec<GenerationUnit>, Vec<ScenarioBundle>) {
    let units = load_units(&dir.join("units.csv")).unwrap();
    let window = analysis_window();
    let forecasts = load_forecasts(&dir.join("forecasts.csv")).unwrap();
    let mut book = load_capacity_prices(&dir.join("capacity_prices.csv")).unwrap();
    book.extend_to_cover(MarketRegion::Miso, "Z1", window).unwrap();
    book.extend_to_cover(MarketRegion::Pjm, "Z2", window).unwrap();
    let mut bundles = Vec::new();
    for scenario in [Scenario::Counterfactual, Scenario::CurrentExpectations] {
        let mut bundle = ScenarioBundle::new(scenario, window, book.clone());
        for (zone, region) in [
            ("Z1", MarketRegion::Miso),
            ("Z2", MarketRegion::Pjm),
            ("Z3", MarketRegion::Ercot),
        ] {
            let hist =
                load_hourly_prices(&dir.join(format!("hourly_{zone}.csv")), zone).unwrap();
            bundle.add_zone(
                build_hourly_scenario(&forecasts, &hist, region, scenario, window).unwrap(),
            );
        }
        bundles.push(bundle);
    }
    (units, bundles)
}

/// A unit that clears a period at exactly its own bid never loses money over
/// that period: the bid is sized so capacity revenue closes any energy
/// shortfall in present value.
#[test]
fn clearing_at_own_bid_breaks_even() {
    let dir = tempfile::tempdir().unwrap();
    write_market_fixture(dir.path(), 42).unwrap();
    let (units, bundles) = market_scenario_bundles(dir.path());
    let window = analysis_window();

    let mut periods_checked = 0;
    for bundle in &bundles {
        for unit in units
            .iter()
            .filter(|u| !u.cogeneration && u.region.has_capacity_market())
        {
            let series = bundle.zone(&unit.zone).unwrap();
            for cp in commitment_periods(unit.region, window) {
                let bid = capacity_bid(unit, &cp, series, window).unwrap();
                assert!(bid >= 0.0);
                let mut book = CapacityAuctionBook::default();
                book.insert(ClearingEntry {
                    region: unit.region,
                    zone: unit.zone.clone(),
                    cp_start: cp.start(),
                    cp_end: cp.months.end,
                    price_per_mw_day: bid,
                    provenance: PriceProvenance::Actual,
                });
                let payments = capacity_revenue(unit, &cp, &book, bid, window).unwrap();
                let paid: BTreeMap<YearMonth, f64> = payments.into_iter().collect();

                let mut balance = 0.0;
                for month in window.iter().filter(|m| {
                    cp.months.contains(*m) && unit.in_service_during(*m)
                }) {
                    let outcome = monthly_dispatch(unit, series.month(month).unwrap());
                    let fixed = unit.fixed_om_per_mw_year / 12.0 * unit.capacity_mw;
                    let capacity = paid.get(&month).copied().unwrap_or(0.0);
                    let net = outcome.electricity_revenue + capacity
                        - outcome.variable_cost
                        - fixed;
                    balance += net * discount_factor(month, MONTHLY_WACC);
                }
                assert!(
                    balance >= -1.0,
                    "{} lost ${:.2} over {} despite clearing at its own bid",
                    unit.unit_id,
                    -balance,
                    cp.start()
                );
                if bid > 0.0 {
                    assert!(
                        balance.abs() <= 1.0,
                        "{}: positive bid should exactly break even, got {balance}",
                        unit.unit_id
                    );
                }
                periods_checked += 1;
            }
        }
    }
    assert!(periods_checked >= 48, "only {periods_checked} periods checked");
}

/// Every ledger line balances to the cent and the stored total is the
/// discounted sum of the lines.
#[test]
fn ledger_lines_balance_and_totals_rediscount() {
    let dir = tempfile::tempdir().unwrap();
    write_market_fixture(dir.path(), 42).unwrap();
    let (units, bundles) = market_scenario_bundles(dir.path());

    for bundle in &bundles {
        let ledgers = fleet_ledgers(&units, bundle).unwrap();
        assert_eq!(ledgers.len(), 10);
        for ledger in ledgers.values() {
            for line in &ledger.months {
                assert_eq!(
                    (line.electricity_revenue + line.capacity_revenue)
                        - (line.variable_cost + line.fixed_om),
                    line.net,
                    "ledger identity broke for {}",
                    ledger.unit_id
                );
            }
            let rediscounted = ledger.pv_at(MONTHLY_WACC);
            assert!(
                (ledger.pv_profit - rediscounted).abs()
                    <= 1e-9 * ledger.pv_profit.abs().max(1.0),
                "{}: stored {} vs rediscounted {}",
                ledger.unit_id,
                ledger.pv_profit,
                rediscounted
            );
            let undiscounted: f64 = ledger.months.iter().map(|m| m.net).sum();
            assert_eq!(ledger.pv_at(0.0), undiscounted);
        }
    }
}

/// When both scenarios are literally the same ledger set, no unit can flip
/// from profitable to unprofitable.
#[test]
fn identical_scenarios_flag_no_units() {
    let dir = tempfile::tempdir().unwrap();
    write_market_fixture(dir.path(), 42).unwrap();
    let (units, bundles) = market_scenario_bundles(dir.path());
    let ledgers = fleet_ledgers(&units, &bundles[0]).unwrap();
    let report = classify_at_risk(&units, &ledgers, &ledgers).unwrap();
    assert!(report.at_risk_unit_ids.is_empty());
    assert_eq!(report.at_risk_units, 0);
    assert_eq!(report.at_risk_capacity_mw, 0.0);
    assert_eq!(report.pv_profit_delta, 0.0);
}

/// Monthly aggregation must not care about the order of the plant records.
#[test]
fn aggregation_is_permutation_invariant() {
    let dir = tempfile::tempdir().unwrap();
    write_emissions_fixture(dir.path(), 42).unwrap();
    let factors = EmissionFactorTable::from_csv(&dir.path().join("factors.csv")).unwrap();
    let schema = SchemaConfig::for_factors(&factors);
    let (records, _) = load_generation(&dir.path().join("generation.csv"), &schema).unwrap();
    let degree_days = load_degree_days(&dir.path().join("degree_days.csv")).unwrap();
    let window = emissions_fixture_window();

    let emissions = compute_emissions(&records, &factors).unwrap();
    let baseline = aggregate_series(&records, &emissions, &degree_days, window).unwrap();

    let mut rng = ChaCha20Rng::seed_from_u64(7);
    let mut shuffled = records.clone();
    for _ in 0..3 {
        shuffled.shuffle(&mut rng);
        let shuffled_emissions = compute_emissions(&shuffled, &factors).unwrap();
        let series =
            aggregate_series(&shuffled, &shuffled_emissions, &degree_days, window).unwrap();
        assert_eq!(series.len(), baseline.len());
        for (got, want) in series.iter().zip(&baseline) {
            assert_eq!(got.label(), want.label());
            assert_eq!(got.start(), want.start());
            let g = got.values();
            let w = want.values();
            assert_eq!(g.len(), w.len());
            for (a, b) in g.iter().zip(w) {
                assert!(
                    (a - b).abs() <= 1e-9 * b.abs().max(1.0),
                    "{}: {a} vs {b} after shuffling input rows",
                    got.label()
                );
            }
        }
    }
}
