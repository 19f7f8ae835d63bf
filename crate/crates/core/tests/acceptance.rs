//! Acceptance suite: one PASS/FAIL line per criterion, then a summary line.
//! The exit code is nonzero on failure only when `MBP_ACCEPTANCE_STRICT=1`.
//! Criterion 8 re-runs 1–7 with the same master seed and compares the
//! outcome digests.

use std::fmt::Write as _;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::Rng;
use sha2::{Digest, Sha256};

use mbp_core::gbr::{fit_gbr, train_lambda_models, Dataset, GbrModel, GbrParams, LambdaModels};
use mbp_core::graph::{generate_er, Graph};
use mbp_core::harness::{
    compare_report, determinism_hash, extract_lambda_ranges, success_heatmap, sweep, ExperimentRecord,
    GraphSummary, LambdaRangeRow, Multipliers, RecordFilter, RecordStore, SweepConfig, SweepStrategy,
};
use mbp_core::penalty::{
    lambda_bounds, lambda_est, lambda_final, lambda_from_gbr, lambda_maxcut, lambda_mult_candidates,
    tradeoff_terms, LambdaSpec, LambdaStrategy, StrategyKind,
};
use mbp_core::qubo::{build_mbp_qubo, e_cut, e_mbp, energy, to_ising, PartitionAssignment};
use mbp_core::rng;
use mbp_core::solvers::{
    minimize_qubo_exhaustive, solve_exact_bisection, solve_kl, solve_multilevel, solve_sa, solve_sa_mbp,
    Registry, SaParams,
};

const MASTER_SEED: u64 = 20_240_601;

/// Pilot-run fixture for criterion 4.
const SA_FIXTURE: &str = include_str!("fixtures/sa_pilot.json");

type Check = Result<Outcome, String>;

struct Outcome {
    detail: String,
    digest: String,
    /// Set when the criterion ran to completion but a requirement failed.
    failure: Option<String>,
}

fn digest(text: &str) -> String {
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(limit: Duration, start: Instant, what: &str) -> Result<(), String> {
    let t = start.elapsed();
    ensure(t < limit, || format!("{what} took {t:.1?}, limit {limit:?}"))
}

fn e(err: impl std::fmt::Display) -> String {
    err.to_string()
}

fn random_assignment(n: usize, r: &mut rng::Stream) -> PartitionAssignment {
    PartitionAssignment::new((0..n).map(|_| rng::unit_f64(r) < 0.5).collect())
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

fn criterion_1(seed: u64) -> Check {
    let start = Instant::now();
    let mut r = rng::stream(rng::derive(seed, &[1]));
    let mut log = String::new();
    for k in 0..100 {
        let n = [6, 8, 10, 12][r.gen_range(0..4)];
        let p = [0.3, 0.5, 0.8][r.gen_range(0..3)];
        let g = generate_er(n, p, r.gen()).map_err(e)?;
        let lambda = (g.max_degree() + 1) as f64;
        let q = build_mbp_qubo(&g, lambda).map_err(e)?;
        let (x, energy) = minimize_qubo_exhaustive(&q).map_err(e)?;
        let oracle = solve_exact_bisection(&g).map_err(e)?.inter_edges;
        let cut = e_cut(&g, &x).map_err(e)?;
        ensure(x.is_balanced(), || format!("instance {k} (n={n}, p={p}): minimizer unbalanced"))?;
        ensure(cut == oracle, || format!("instance {k}: QUBO cut {cut} vs oracle {oracle}"))?;
        ensure(energy == cut as f64, || format!("instance {k}: energy {energy} vs cut {cut}"))?;
        let _ = writeln!(log, "{n} {p} {cut} {}", x.to_bit_string());
    }
    within(Duration::from_secs(60), start, "oracle equivalence")?;
    Ok(Outcome {
        detail: format!(
            "100/100 minimizers balanced with cut equal to the bisection oracle ({:.1?})",
            start.elapsed()
        ),
        digest: digest(&log),
        failure: None,
    })
}

fn criterion_2(seed: u64) -> Check {
    let mut r = rng::stream(rng::derive(seed, &[2]));
    let mut worst_offset = 0.0f64;
    let mut log = String::new();
    for _ in 0..1000 {
        let n = 2 * r.gen_range(1..=20);
        let g = generate_er(n, rng::unit_f64(&mut r), r.gen()).map_err(e)?;
        let lambda = 0.01 + 50.0 * rng::unit_f64(&mut r);
        let x = random_assignment(n, &mut r);
        let q = build_mbp_qubo(&g, lambda).map_err(e)?;
        let lhs = energy(&q, &x).map_err(e)? + q.offset();
        let rhs = e_mbp(&g, lambda, &x).map_err(e)?;
        worst_offset = worst_offset.max(rel_err(lhs, rhs));
        let _ = writeln!(log, "{rhs:e}");
    }
    ensure(worst_offset <= 1e-9, || format!("offset identity off by {worst_offset:e} (relative)"))?;

    let mut worst_ising = 0.0f64;
    let mut checked = 0u64;
    for n in (2..=10).step_by(2) {
        for _ in 0..5 {
            let g = generate_er(n, rng::unit_f64(&mut r), r.gen()).map_err(e)?;
            let lambda = 0.1 + 10.0 * rng::unit_f64(&mut r);
            let q = build_mbp_qubo(&g, lambda).map_err(e)?;
            let ising = to_ising(&q);
            for v in 0..1u64 << n {
                let x = PartitionAssignment::from_index(n, v);
                let spins: Vec<i8> = x.bits().iter().map(|&b| if b { 1 } else { -1 }).collect();
                let h = ising.energy(&spins).map_err(e)? + ising.constant;
                let qe = energy(&q, &x).map_err(e)?;
                worst_ising = worst_ising.max(rel_err(h, qe));
                checked += 1;
            }
        }
    }
    ensure(worst_ising <= 1e-12, || format!("Ising identity off by {worst_ising:e}"))?;
    Ok(Outcome {
        detail: format!(
            "offset identity max rel err {worst_offset:.1e} over 1000 triples; Ising identity max err {worst_ising:.1e} over {checked} assignments"
        ),
        digest: digest(&log),
        failure: None,
    })
}

fn constant_models(lo: f64, hi: f64) -> Result<LambdaModels, String> {
    let feats = vec![vec![100.0, 0.1, 5.5], vec![200.0, 0.5, 50.0]];
    let params = GbrParams { n_trees: 3, ..Default::default() };
    Ok(LambdaModels {
        min: fit_gbr(&Dataset::new(feats.clone(), vec![lo, lo]).map_err(e)?, params).map_err(e)?,
        max: fit_gbr(&Dataset::new(feats, vec![hi, hi]).map_err(e)?, params).map_err(e)?,
        report: None,
    })
}

fn criterion_3(_seed: u64) -> Check {
    let counted = std::cell::Cell::new(0);
    let eq = |what: &str, got: f64, want: f64| -> Result<(), String> {
        counted.set(counted.get() + 1);
        ensure(got == want, || format!("{what}: got {got}, expected {want}"))
    };
    eq("maxcut(100, 0.1)", lambda_maxcut(100, 0.1).map_err(e)?, 250.0)?;
    eq("maxcut(10, 1.0)", lambda_maxcut(10, 1.0).map_err(e)?, 25.0)?;
    eq("maxcut(4, 0.5)", lambda_maxcut(4, 0.5).map_err(e)?, 2.0)?;

    let star_ten = Graph::new(100, (1..=10).map(|j| (0, j))).map_err(e)?;
    for (name, g, upper) in [
        ("K4", Graph::complete(4), 1.0),
        ("star(100)", Graph::star(100), 49.0),
        ("path(4)", Graph::path(4), 1.0),
    ] {
        let b = lambda_bounds(&g).map_err(e)?;
        eq(&format!("bounds {name} lower"), b.lower, 1.0)?;
        eq(&format!("bounds {name} upper"), b.upper, upper)?;
    }
    eq("est(max degree 10, n=100)", lambda_est(&star_ten).map_err(e)?, 5.5)?;
    eq("est(K4)", lambda_est(&Graph::complete(4)).map_err(e)?, 1.0)?;
    eq("final(5.5, 0.1)", lambda_final(5.5, 0.1).map_err(e)?, 0.55)?;
    eq("final(7.25, 1)", lambda_final(7.25, 1.0).map_err(e)?, 7.25)?;
    eq("final(250, 0.002)", lambda_final(250.0, 0.002).map_err(e)?, 0.5)?;

    for (n, want) in [
        (100, &[0.05, 0.1, 0.2, 0.4][..]),
        (700, &[0.005, 0.01, 0.03, 0.05, 0.1][..]),
        (3000, &[0.0005, 0.001, 0.002, 0.005, 0.01, 0.03, 0.05, 0.1][..]),
    ] {
        counted.set(counted.get() + 1);
        ensure(lambda_mult_candidates(n) == want, || format!("multipliers for n={n}"))?;
    }
    let (c, p) = tradeoff_terms(4, 1.0, 1).map_err(e)?;
    eq("tradeoff(4,1,1) cut", c, -3.0)?;
    eq("tradeoff(4,1,1) penalty", p, 1.0)?;
    let (c, p) = tradeoff_terms(12, 1.5, 0).map_err(e)?;
    eq("tradeoff(12,1.5,0) cut", c, 0.0)?;
    eq("tradeoff(12,1.5,0) penalty", p, 1.5 * 36.0)?;
    let (c, p) = tradeoff_terms(12, 1.5, 6).map_err(e)?;
    eq("tradeoff(12,1.5,6) cut", c, -36.0)?;
    eq("tradeoff(12,1.5,6) penalty", p, 0.0)?;

    let spec = lambda_from_gbr(&constant_models(0.05, 0.1)?, &star_ten).map_err(e)?;
    counted.set(counted.get() + 1);
    ensure((spec.lambda - 0.4125).abs() <= 1e-12, || format!("GBR λ {} vs 0.4125", spec.lambda))?;

    // Derivative form, written with non-negative rates: moving toward
    // balance the penalty falls by λ(n − 2x), the worst-case cut grows by
    // (n − 2x). Then the exact discrete statement between any two states.
    let mut grid = 0;
    for &lambda in &[1.0, 1.5, 2.0] {
        for n in 4..=40usize {
            for x in 0..=n / 2 {
                let rate = n as f64 - 2.0 * x as f64;
                ensure(lambda * rate >= rate, || format!("rate inequality λ={lambda} n={n} x={x}"))?;
                grid += 1;
            }
            for x1 in 0..=n / 2 {
                for x2 in x1 + 1..=n / 2 {
                    let (c1, p1) = tradeoff_terms(n, lambda, x1).map_err(e)?;
                    let (c2, p2) = tradeoff_terms(n, lambda, x2).map_err(e)?;
                    ensure(p1 - p2 >= c1 - c2, || format!("dominance λ={lambda} n={n} {x1}→{x2}"))?;
                    grid += 1;
                }
            }
        }
    }
    // The bound is tight: below 1 the worst-case cut outgrows the penalty.
    let (c0, p0) = tradeoff_terms(10, 0.99, 4).map_err(e)?;
    let (c1, p1) = tradeoff_terms(10, 0.99, 5).map_err(e)?;
    ensure(p0 - p1 < c0 - c1, || "λ < 1 should not dominate".into())?;
    let checks = counted.get();

    Ok(Outcome {
        detail: format!("{checks} hand values exact; {grid} grid points of the bound inequality hold"),
        digest: digest(&format!("{checks} {grid}")),
        failure: None,
    })
}

#[derive(serde::Deserialize)]
struct SaFixture {
    threshold: f64,
}

fn criterion_4(seed: u64) -> Check {
    let start = Instant::now();
    let fixture: SaFixture = serde_json::from_str(SA_FIXTURE).map_err(e)?;
    let params = SaParams::default();
    let mut hits = 0;
    let mut log = String::new();
    for k in 0..30u64 {
        let g = generate_er(16, 0.5, rng::derive(seed, &[4, k])).map_err(e)?;
        let q = build_mbp_qubo(&g, lambda_est(&g).map_err(e)?).map_err(e)?;
        let (_, opt) = minimize_qubo_exhaustive(&q).map_err(e)?;
        let sa = solve_sa(&g, &q, &params, k).map_err(e)?;
        ensure(sa.energy >= opt - 1e-9, || format!("instance {k}: SA below the exact optimum"))?;
        let hit = rel_err(sa.energy, opt) <= 1e-9;
        hits += usize::from(hit);
        let _ = writeln!(log, "{k} {} {opt}", sa.energy);
    }
    let rate = hits as f64 / 30.0;
    ensure(rate >= fixture.threshold, || {
        format!("SA reached the optimum on {hits}/30 = {rate:.2}, threshold {}", fixture.threshold)
    })?;

    let mut agree = 0;
    for k in 0..50u64 {
        let g = generate_er(16, 0.5, rng::derive(seed, &[40, k])).map_err(e)?;
        let lambda = lambda_est(&g).map_err(e)?;
        let q = build_mbp_qubo(&g, lambda).map_err(e)?;
        let dense = solve_sa(&g, &q, &params, 1000 + k).map_err(e)?;
        let implicit = solve_sa_mbp(&g, lambda, &params, 1000 + k).map_err(e)?;
        if rel_err(dense.energy, implicit.energy) <= 1e-9 {
            agree += 1;
        }
        let _ = writeln!(log, "{} {}", dense.energy, implicit.energy);
    }
    ensure(agree == 50, || format!("paired SA runs agreed on {agree}/50"))?;
    within(Duration::from_secs(120), start, "SA quality")?;
    Ok(Outcome {
        detail: format!(
            "optimum reached on {hits}/30 (threshold {:.0}%); dense and implicit SA agree on 50/50 paired runs ({:.1?})",
            fixture.threshold * 100.0,
            start.elapsed()
        ),
        digest: digest(&log),
        failure: None,
    })
}

fn criterion_5(seed: u64) -> Check {
    let mut r = rng::stream(rng::derive(seed, &[5]));
    let mut log = String::new();
    let (mut small, mut kl_opt, mut ml_opt) = (0, 0, 0);
    for k in 0..200 {
        let n = if k % 2 == 0 { 2 * r.gen_range(2..=8) } else { 2 * r.gen_range(9..=100) };
        let p = 0.05 + 0.85 * rng::unit_f64(&mut r);
        let g = generate_er(n, p, r.gen()).map_err(e)?;
        let kl = solve_kl(&g, k).map_err(e)?;
        let ml = solve_multilevel(&g, k).map_err(e)?;
        for (name, res) in [("kl", &kl), ("multilevel", &ml)] {
            ensure(res.balanced && res.assignment.is_balanced(), || {
                format!("{name} unbalanced on instance {k} (n={n})")
            })?;
            ensure(res.inter_edges == e_cut(&g, &res.assignment).map_err(e)?, || {
                format!("{name} cut mismatch")
            })?;
        }
        ensure(kl.cut_trace.windows(2).all(|w| w[1] <= w[0]), || {
            format!("KL trace increases on instance {k}: {:?}", kl.cut_trace)
        })?;
        ensure(kl.cut_trace.last() == Some(&kl.inter_edges), || {
            format!("KL trace does not end at the cut on {k}")
        })?;
        if n <= 16 {
            small += 1;
            let opt = solve_exact_bisection(&g).map_err(e)?.inter_edges;
            ensure(kl.inter_edges >= opt, || format!("KL below oracle on {k}"))?;
            ensure(ml.inter_edges >= opt, || format!("multilevel below oracle on {k}"))?;
            kl_opt += usize::from(kl.inter_edges == opt);
            ml_opt += usize::from(ml.inter_edges == opt);
        }
        let _ = writeln!(log, "{n} {} {}", kl.inter_edges, ml.inter_edges);
    }
    Ok(Outcome {
        detail: format!(
            "200/200 balanced for both; KL traces non-increasing; on {small} instances with n ≤ 16 both ≥ oracle (optimal: KL {kl_opt}, multilevel {ml_opt})"
        ),
        digest: digest(&log),
        failure: None,
    })
}

fn synthetic_rows(seed: u64, count: usize) -> Vec<LambdaRangeRow> {
    let sizes = [100usize, 200, 300, 400, 500, 600, 700, 800, 900, 1000, 1200, 1600, 2000, 3000, 4000];
    let mut r = rng::stream(seed);
    (0..count)
        .map(|i| {
            let n = sizes[r.gen_range(0..sizes.len())];
            let density = 0.02 + 0.98 * rng::unit_f64(&mut r);
            let cap = (n / 2 - 1) as f64;
            let est = (1.0 + (density * (n - 1) as f64).min(cap)) / 2.0;
            let max = (0.5 / density).clamp(0.0, 5.0);
            LambdaRangeRow {
                graph_key: format!("synthetic-{i}"),
                n,
                density,
                lambda_est: est,
                lambda_min: max / 2.0,
                lambda_max: max,
            }
        })
        .collect()
}

fn criterion_6(seed: u64) -> Check {
    let mut r = rng::stream(rng::derive(seed, &[6]));
    let mut log = String::new();
    let mut evaluations = 0;
    for k in 0..20 {
        let rows = r.gen_range(20..=200);
        let width = r.gen_range(1..=4);
        let feats: Vec<Vec<f64>> =
            (0..rows).map(|_| (0..width).map(|_| rng::unit_f64(&mut r)).collect()).collect();
        let targets: Vec<f64> = feats
            .iter()
            .map(|f| (3.0 * f[0]).sin() + f.iter().sum::<f64>() + 0.3 * rng::unit_f64(&mut r))
            .collect();
        let ds = Dataset::new(feats, targets).map_err(e)?;
        let m = fit_gbr(&ds, GbrParams::default()).map_err(e)?;
        for (round, w) in m.train_mse.windows(2).enumerate() {
            ensure(w[1] <= w[0], || {
                format!("dataset {k}: training MSE rose at round {} ({} → {})", round + 1, w[0], w[1])
            })?;
        }
        let ev = m.evaluate(&ds).map_err(e)?;
        ensure(ev.mae <= ev.rmse, || format!("dataset {k}: mae {} > rmse {}", ev.mae, ev.rmse))?;
        evaluations += 1;
        let _ = writeln!(log, "{:e}", m.train_mse.last().copied().unwrap_or(0.0));
    }

    let rows = synthetic_rows(rng::derive(seed, &[60]), 2000);
    let models = train_lambda_models(&rows, rng::derive(seed, &[61]), GbrParams::default()).map_err(e)?;
    let report = models.report.clone().ok_or("training produced no report")?;
    for ev in [report.min, report.max] {
        ensure(ev.mae <= ev.rmse, || format!("held-out mae {} > rmse {}", ev.mae, ev.rmse))?;
        evaluations += 1;
    }
    ensure(report.n_test == 400, || format!("held out {} rows, expected 400", report.n_test))?;
    ensure(report.max.r2 >= 0.95, || format!("λ_max test R² {:.4} < 0.95", report.max.r2))?;

    let dir = tempfile::tempdir().map_err(e)?;
    models.save(dir.path()).map_err(e)?;
    let back = LambdaModels::load(dir.path()).map_err(e)?;
    ensure(back == models, || "model directory round-trip differs".into())?;
    let text = models.max.to_json().map_err(e)?;
    ensure(GbrModel::from_json(&text).map_err(e)? == models.max, || "model JSON round-trip differs".into())?;
    for row in rows.iter().take(50) {
        let a = models.predict(row.n, row.density, row.lambda_est).map_err(e)?;
        let b = back.predict(row.n, row.density, row.lambda_est).map_err(e)?;
        ensure(a.0.to_bits() == b.0.to_bits() && a.1.to_bits() == b.1.to_bits(), || {
            "reloaded predictions differ".into()
        })?;
    }
    let _ = writeln!(log, "{} {}", report.max.r2, report.min.r2);
    Ok(Outcome {
        detail: format!(
            "MSE non-increasing on 20/20 datasets; synthetic λ_max test R² {:.4} (λ_min {:.4}); mae ≤ rmse on {evaluations} evaluations; round-trip exact",
            report.max.r2, report.min.r2
        ),
        digest: digest(&log),
        failure: None,
    })
}

/// Footnote arithmetic recomputed from raw records, independent of the report code.
fn footnote_check(records: &[ExperimentRecord], baseline: &str, subject: &str) -> Result<(), String> {
    let report = compare_report(records, baseline, subject, true);
    for row in &report.rows {
        let keys: std::collections::BTreeSet<&str> = records
            .iter()
            .filter(|r| r.graph.n == row.n && r.solver_id == subject)
            .map(|r| r.graph_key.as_str())
            .collect();
        let (mut s_sum, mut b_sum, mut count) = (0.0, 0.0, 0.0);
        for key in keys {
            let s = records
                .iter()
                .filter(|r| r.graph_key == key && r.solver_id == subject && r.balanced)
                .map(|r| r.inter_edges)
                .min();
            let b = records.iter().find(|r| r.graph_key == key && r.solver_id == baseline);
            if let (Some(s), Some(b)) = (s, b) {
                let bv = b.pre_repair.map_or(b.inter_edges, |p| p.inter_edges);
                s_sum += s as f64;
                b_sum += bv as f64;
                count += 1.0;
            }
        }
        let (avg_s, avg_b) = (s_sum / count, b_sum / count);
        ensure(rel_err(row.abs_diff, (avg_s - avg_b).abs()) <= 1e-12, || {
            format!("abs column for n={}", row.n)
        })?;
        ensure(rel_err(row.perc_diff, (avg_b - avg_s) / avg_s * 100.0) <= 1e-12, || {
            format!("perc column for n={}", row.n)
        })?;
    }
    Ok(())
}

fn hand_fixture() -> Result<(), String> {
    let rec = |key: &str, solver: &str, cut: u64, balanced: bool| ExperimentRecord {
        record_id: format!("{key}/{solver}"),
        graph_key: key.into(),
        graph: GraphSummary {
            n: 100,
            p: Some(0.5),
            seed: Some(0),
            density: 0.5,
            max_degree: 60,
            edge_count: 2475,
        },
        lambda_spec: Some(LambdaSpec {
            strategy: StrategyKind::Fixed,
            lambda: 1.0,
            lambda_est: None,
            multiplier: None,
            bounds: None,
            gbr_pred: None,
            p_used: None,
        }),
        solver_id: solver.into(),
        solver_seed: None,
        solver_params: serde_json::Value::Null,
        inter_edges: cut,
        balanced,
        balance_deviation: u64::from(!balanced),
        energy: cut as f64,
        pre_repair: None,
        wall_time_qubo_build: None,
        wall_time_solve: 0.0,
        created_at: 0,
    };
    let recs = vec![
        rec("a", "sub", 95, true),
        rec("a", "base", 100, true),
        rec("b", "sub", 105, true),
        rec("b", "base", 106, false),
    ];
    let row = compare_report(&recs, "base", "sub", false).rows.remove(0);
    ensure(row.abs_diff == 3.0 && row.perc_diff == 3.0, || {
        format!("fixture abs {} perc {}", row.abs_diff, row.perc_diff)
    })?;
    ensure(row.baseline_balanced_pct == 50.0 && row.subject_better_pct == 100.0, || {
        "fixture percentages".into()
    })
}

fn criterion_7(seed: u64) -> Check {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(e)?;
    let registry = Registry::with_builtins(SaParams::default());
    let solvers: Vec<String> = ["hybrid-standin", "multilevel", "kl"].map(String::from).to_vec();

    let mut store = RecordStore::open(dir.path().join("sweep.jsonl")).map_err(e)?;
    let cfg = SweepConfig {
        n_list: vec![100, 200],
        p_list: vec![0.1, 0.5],
        seeds_per_cell: 3,
        strategy: SweepStrategy::Multipliers(Multipliers::Table),
        solver_ids: solvers.clone(),
        master_seed: rng::derive(seed, &[7]),
        jobs: 1,
    };
    let out = sweep(&cfg, &registry, &mut store).map_err(e)?;
    ensure(out.failures.is_empty(), || format!("sweep failures: {:?}", out.failures))?;
    ensure(out.written == 12 * 4 * 3, || format!("sweep wrote {} records, expected 144", out.written))?;
    let records = store.scan(&RecordFilter::default()).map_err(e)?.records;

    let ranges = extract_lambda_ranges(&records, "hybrid-standin");
    let heat = success_heatmap(&records, "hybrid-standin");
    let hybrid_runs = records.iter().filter(|r| r.solver_id == "hybrid-standin").count();
    ensure(heat.total_runs == hybrid_runs, || "heatmap total differs from run count".into())?;
    ensure(heat.cells.iter().map(|c| c.runs).sum::<usize>() == hybrid_runs, || {
        "heatmap counts not conserved".into()
    })?;
    ensure(heat.cells.iter().all(|c| (0.0..=1.0).contains(&c.rate)), || "heatmap rate outside [0,1]".into())?;

    let models =
        train_lambda_models(&ranges.rows, rng::derive(seed, &[70]), GbrParams::default()).map_err(e)?;
    let models = Arc::new(models);

    let mut gbr_store = RecordStore::open(dir.path().join("gbr.jsonl")).map_err(e)?;
    let gbr_cfg = SweepConfig {
        strategy: SweepStrategy::Single(LambdaStrategy::Gbr(models.clone())),
        solver_ids: vec!["hybrid-standin".into(), "multilevel".into()],
        master_seed: rng::derive(seed, &[71]),
        ..cfg.clone()
    };
    let out = sweep(&gbr_cfg, &registry, &mut gbr_store).map_err(e)?;
    ensure(out.failures.is_empty(), || format!("GBR re-solve failures: {:?}", out.failures))?;
    let gbr_records = gbr_store.scan(&RecordFilter::default()).map_err(e)?.records;
    let gbr_hybrid: Vec<_> = gbr_records.iter().filter(|r| r.solver_id == "hybrid-standin").collect();
    let valid = gbr_hybrid.iter().filter(|r| r.balanced).count();
    ensure(gbr_hybrid.len() == 12, || format!("{} GBR runs, expected 12", gbr_hybrid.len()))?;

    hand_fixture()?;
    footnote_check(&gbr_records, "multilevel", "hybrid-standin")?;
    footnote_check(&records, "multilevel", "hybrid-standin")?;
    let table = compare_report(&gbr_records, "multilevel", "hybrid-standin", true);
    let better: Vec<String> = table
        .rows
        .iter()
        .map(|r| format!("n={} {:.0}% (perc {:+.2}%)", r.n, r.subject_better_pct, r.perc_diff))
        .collect();
    within(Duration::from_secs(15 * 60), start, "pipeline")?;

    // For each invalid GBR-λ run, compare its energy with the best balanced
    // cut any solver found on that graph: if lower, the QUBO minimum at the
    // predicted λ is itself unbalanced.
    let invalid: Vec<String> = gbr_hybrid
        .iter()
        .filter(|r| !r.balanced)
        .map(|r| {
            let best_balanced = gbr_records
                .iter()
                .filter(|o| o.graph_key == r.graph_key && o.balanced)
                .map(|o| o.inter_edges)
                .min();
            format!(
                "{} at λ={:.4} (multiplier {:.4}): cut {} deviation {} energy {:.3} vs best balanced cut {}",
                r.graph_key,
                r.lambda().unwrap_or(f64::NAN),
                r.multiplier().unwrap_or(f64::NAN),
                r.inter_edges,
                r.balance_deviation,
                r.energy,
                best_balanced.map_or("none".into(), |c| c.to_string())
            )
        })
        .collect();
    let failure = (valid != gbr_hybrid.len()).then(|| {
        format!(
            "GBR-λ solutions balanced on {valid}/{} (required 100%); {}",
            gbr_hybrid.len(),
            invalid.join("; ")
        )
    });

    let mut all = records.clone();
    all.extend(gbr_records.iter().cloned());
    Ok(Outcome {
        detail: format!(
            "{} sweep records, {} λ-range rows ({} excluded), GBR-λ valid {valid}/{}; hybrid better than pre-repair multilevel (reported): {}; footnotes match; heatmap conserved ({:.1?})",
            records.len(),
            ranges.rows.len(),
            ranges.excluded,
            gbr_hybrid.len(),
            better.join(", "),
            start.elapsed()
        ),
        digest: determinism_hash(&all).map_err(e)?,
        failure,
    })
}

type Criterion = (u8, &'static str, fn(u64) -> Check);

const CRITERIA: [Criterion; 7] = [
    (1, "oracle equivalence", criterion_1),
    (2, "offset and Ising identities", criterion_2),
    (3, "penalty calculus", criterion_3),
    (4, "SA quality", criterion_4),
    (5, "baseline solvers", criterion_5),
    (6, "gradient boosting", criterion_6),
    (7, "end-to-end pipeline", criterion_7),
];

fn main() -> ExitCode {
    let mut failed = 0;
    let mut digests = Vec::new();
    for (id, name, run) in CRITERIA {
        match run(MASTER_SEED) {
            Ok(Outcome { detail, digest, failure: None }) => {
                println!("PASS criterion {id} ({name}): {detail}");
                digests.push(Some(digest));
            }
            Ok(Outcome { detail, digest, failure: Some(msg) }) => {
                println!("FAIL criterion {id} ({name}): {msg}. Measured: {detail}");
                digests.push(Some(digest));
                failed += 1;
            }
            Err(msg) => {
                println!("FAIL criterion {id} ({name}): {msg}");
                digests.push(None);
                failed += 1;
            }
        }
    }

    let mut mismatched = Vec::new();
    for ((id, _, run), first) in CRITERIA.iter().zip(&digests) {
        let again = run(MASTER_SEED).ok().map(|o| o.digest);
        if again.is_none() || again != *first {
            mismatched.push(id.to_string());
        }
    }
    if mismatched.is_empty() {
        println!("PASS criterion 8 (determinism): re-running criteria 1-7 with seed {MASTER_SEED} reproduced every outcome digest");
    } else {
        println!(
            "FAIL criterion 8 (determinism): digests differ or runs failed for criteria {}",
            mismatched.join(", ")
        );
        failed += 1;
    }

    println!("acceptance: {} passed, {failed} failed", CRITERIA.len() + 1 - failed);
    let strict = std::env::var("MBP_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if failed > 0 && strict {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
