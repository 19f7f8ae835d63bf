//! Analyses over stored records.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::penalty::StrategyKind;

use super::ExperimentRecord;

/// Multiplier range attaining the best balanced cut on one graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaRangeRow {
    pub graph_key: String,
    pub n: usize,
    pub density: f64,
    pub lambda_est: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LambdaRangeExtraction {
    pub rows: Vec<LambdaRangeRow>,
    /// Graphs where no multiplier produced a balanced result.
    pub excluded: usize,
}

pub const RANGE_COLUMNS: &str = "graph_key,n,density,lambda_est,lambda_min,lambda_max";

impl LambdaRangeExtraction {
    pub fn to_csv(&self) -> String {
        let mut s = format!("{RANGE_COLUMNS}\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                r.graph_key, r.n, r.density, r.lambda_est, r.lambda_min, r.lambda_max
            );
        }
        s
    }
}

/// Multiplier-sweep records of `solver_id`, grouped by graph key in key order.
fn sweep_groups<'a>(
    records: &'a [ExperimentRecord],
    solver_id: &str,
) -> BTreeMap<&'a str, Vec<&'a ExperimentRecord>> {
    let mut groups: BTreeMap<&str, Vec<&ExperimentRecord>> = BTreeMap::new();
    for r in records {
        if r.solver_id == solver_id
            && r.strategy() == Some(StrategyKind::EstTimesMult)
            && r.multiplier().is_some()
        {
            groups.entry(r.graph_key.as_str()).or_default().push(r);
        }
    }
    groups
}

fn best_balanced_cut(runs: &[&ExperimentRecord]) -> Option<u64> {
    runs.iter().filter(|r| r.balanced).map(|r| r.inter_edges).min()
}

/// Per graph: the smallest balanced cut over the multiplier sweep of
/// `solver_id`, and the smallest and largest multipliers attaining it.
pub fn extract_lambda_ranges(records: &[ExperimentRecord], solver_id: &str) -> LambdaRangeExtraction {
    let mut out = LambdaRangeExtraction::default();
    for (key, runs) in sweep_groups(records, solver_id) {
        let Some(best) = best_balanced_cut(&runs) else {
            out.excluded += 1;
            continue;
        };
        let winners: Vec<f64> = runs
            .iter()
            .filter(|r| r.balanced && r.inter_edges == best)
            .filter_map(|r| r.multiplier())
            .collect();
        let first = runs[0];
        out.rows.push(LambdaRangeRow {
            graph_key: key.to_string(),
            n: first.graph.n,
            density: first.graph.density,
            lambda_est: first.lambda_spec.as_ref().and_then(|s| s.lambda_est).unwrap_or(f64::NAN),
            lambda_min: winners.iter().copied().fold(f64::INFINITY, f64::min),
            lambda_max: winners.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        });
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeatCell {
    pub n: usize,
    /// Lower edge of the density bin `[d, d + 0.1)`; the last bin is closed.
    pub density_bin: f64,
    pub runs: usize,
    pub successes: usize,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultiplierCell {
    pub n: usize,
    pub multiplier: f64,
    pub runs: usize,
    pub successes: usize,
    pub rate: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SuccessHeatmap {
    pub cells: Vec<HeatCell>,
    pub by_multiplier: Vec<MultiplierCell>,
    pub total_runs: usize,
}

pub const HEATMAP_COLUMNS: &str = "n,density_bin,runs,successes,rate";
pub const MULTIPLIER_COLUMNS: &str = "n,multiplier,runs,successes,rate";

impl SuccessHeatmap {
    pub fn to_csv(&self) -> String {
        let mut s = format!("{HEATMAP_COLUMNS}\n");
        for c in &self.cells {
            let _ = writeln!(s, "{},{:.1},{},{},{}", c.n, c.density_bin, c.runs, c.successes, c.rate);
        }
        s
    }

    pub fn multiplier_csv(&self) -> String {
        let mut s = format!("{MULTIPLIER_COLUMNS}\n");
        for c in &self.by_multiplier {
            let _ = writeln!(s, "{},{},{},{},{}", c.n, c.multiplier, c.runs, c.successes, c.rate);
        }
        s
    }
}

fn density_bin(d: f64) -> u32 {
    ((d * 10.0).floor() as u32).min(9)
}

fn rate(successes: usize, runs: usize) -> f64 {
    if runs == 0 {
        0.0
    } else {
        successes as f64 / runs as f64
    }
}

/// A run succeeds when it is balanced and its cut equals the smallest
/// balanced cut of its graph over the whole multiplier sweep. Rates are per
/// run, bucketed by `(n, density bin)` and separately by `(n, multiplier)`.
pub fn success_heatmap(records: &[ExperimentRecord], solver_id: &str) -> SuccessHeatmap {
    let mut cells: BTreeMap<(usize, u32), (usize, usize)> = BTreeMap::new();
    let mut mults: BTreeMap<(usize, u64), (usize, usize)> = BTreeMap::new();
    let mut total = 0;
    for runs in sweep_groups(records, solver_id).values() {
        let best = best_balanced_cut(runs);
        for r in runs {
            let ok = r.balanced && Some(r.inter_edges) == best;
            let c = cells.entry((r.graph.n, density_bin(r.graph.density))).or_default();
            c.0 += 1;
            c.1 += usize::from(ok);
            let mult = r.multiplier().expect("grouped runs carry a multiplier");
            let m = mults.entry((r.graph.n, mult.to_bits())).or_default();
            m.0 += 1;
            m.1 += usize::from(ok);
            total += 1;
        }
    }
    let mut by_multiplier: Vec<MultiplierCell> = mults
        .into_iter()
        .map(|((n, bits), (runs, successes))| MultiplierCell {
            n,
            multiplier: f64::from_bits(bits),
            runs,
            successes,
            rate: rate(successes, runs),
        })
        .collect();
    by_multiplier.sort_by(|a, b| (a.n, a.multiplier).partial_cmp(&(b.n, b.multiplier)).expect("finite"));
    SuccessHeatmap {
        cells: cells
            .into_iter()
            .map(|((n, bin), (runs, successes))| HeatCell {
                n,
                density_bin: f64::from(bin) / 10.0,
                runs,
                successes,
                rate: rate(successes, runs),
            })
            .collect(),
        by_multiplier,
        total_runs: total,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareRow {
    pub n: usize,
    pub graphs: usize,
    pub avg_density: f64,
    pub baseline_balanced_pct: f64,
    pub subject_better_pct: f64,
    pub avg_subject: f64,
    pub avg_baseline: f64,
    /// `|avg_subject − avg_baseline|`.
    pub abs_diff: f64,
    /// `(avg_baseline − avg_subject) / avg_subject · 100`.
    pub perc_diff: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CompareReport {
    pub rows: Vec<CompareRow>,
    /// Graphs lacking a usable subject or baseline result.
    pub skipped: usize,
}

pub const COMPARE_COLUMNS: &str =
    "n,graphs,avg_density,baseline_balanced_pct,subject_better_pct,avg_subject,avg_baseline,abs_diff,perc_diff";

impl CompareReport {
    pub fn to_csv(&self) -> String {
        let mut s = format!("{COMPARE_COLUMNS}\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{}",
                r.n,
                r.graphs,
                r.avg_density,
                r.baseline_balanced_pct,
                r.subject_better_pct,
                r.avg_subject,
                r.avg_baseline,
                r.abs_diff,
                r.perc_diff
            );
        }
        s
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "{:>6} {:>6} {:>8} {:>10} {:>9} {:>11} {:>12} {:>9} {:>9}\n",
            "n", "graphs", "density", "base_bal%", "better%", "avg_subject", "avg_baseline", "abs", "perc%"
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:>6} {:>6} {:>8.4} {:>10.2} {:>9.2} {:>11.2} {:>12.2} {:>9.2} {:>9.2}",
                r.n,
                r.graphs,
                r.avg_density,
                r.baseline_balanced_pct,
                r.subject_better_pct,
                r.avg_subject,
                r.avg_baseline,
                r.abs_diff,
                r.perc_diff
            );
        }
        s
    }
}

/// Per graph, pair the subject's best balanced cut (over all its records on
/// that graph) with the baseline's cut. With `baseline_pre_repair`, the
/// baseline's cut and balance before exact balance repair are used where
/// recorded. Unbalanced baseline runs count in the averages and lower the
/// balanced percentage. Rows are per node count; a tie is not a win.
pub fn compare_report(
    records: &[ExperimentRecord],
    baseline_id: &str,
    subject_id: &str,
    baseline_pre_repair: bool,
) -> CompareReport {
    let mut subject: BTreeMap<&str, (usize, f64, Option<u64>)> = BTreeMap::new();
    let mut baseline: BTreeMap<&str, (u64, bool)> = BTreeMap::new();
    let mut keys: BTreeMap<&str, ()> = BTreeMap::new();
    for r in records {
        if r.solver_id == subject_id {
            keys.insert(&r.graph_key, ());
            let e = subject.entry(&r.graph_key).or_insert((r.graph.n, r.graph.density, None));
            if r.balanced {
                e.2 = Some(e.2.map_or(r.inter_edges, |c| c.min(r.inter_edges)));
            }
        } else if r.solver_id == baseline_id {
            keys.insert(&r.graph_key, ());
            let value = match (baseline_pre_repair, r.pre_repair) {
                (true, Some(p)) => (p.inter_edges, p.balanced()),
                _ => (r.inter_edges, r.balanced),
            };
            // Repeated baseline records of one graph share a result; keep the first.
            baseline.entry(&r.graph_key).or_insert(value);
        }
    }

    let mut report = CompareReport::default();
    // n → (density sum, baseline balanced, subject better, subject sum, baseline sum, graphs)
    let mut acc: BTreeMap<usize, (f64, usize, usize, f64, f64, usize)> = BTreeMap::new();
    for key in keys.keys() {
        let (Some(&(n, density, Some(s))), Some(&(b, b_bal))) = (subject.get(key), baseline.get(key)) else {
            report.skipped += 1;
            continue;
        };
        let a = acc.entry(n).or_default();
        a.0 += density;
        a.1 += usize::from(b_bal);
        a.2 += usize::from(s < b);
        a.3 += s as f64;
        a.4 += b as f64;
        a.5 += 1;
    }
    if report.skipped > 0 {
        log::warn!("{} graphs lack a {subject_id}/{baseline_id} pairing", report.skipped);
    }
    for (n, (dens, bal, better, ssum, bsum, k)) in acc {
        let k_f = k as f64;
        let (avg_s, avg_b) = (ssum / k_f, bsum / k_f);
        report.rows.push(CompareRow {
            n,
            graphs: k,
            avg_density: dens / k_f,
            baseline_balanced_pct: 100.0 * bal as f64 / k_f,
            subject_better_pct: 100.0 * better as f64 / k_f,
            avg_subject: avg_s,
            avg_baseline: avg_b,
            abs_diff: (avg_s - avg_b).abs(),
            perc_diff: if avg_s == 0.0 { 0.0 } else { (avg_b - avg_s) / avg_s * 100.0 },
        });
    }
    report
}
