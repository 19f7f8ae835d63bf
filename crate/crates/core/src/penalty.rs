//! Penalty-parameter (λ) strategies.
//!
//! * `MAXCUT_P`: `λ = n² p / 4`, the expected balanced max-cut of `G(n, p)`.
//! * `EST`: midpoint of the interval `[1, min(Δ, n/2 − 1)]`, where `Δ` is the
//!   maximum degree. The lower end makes the balance penalty grow at least as
//!   fast as the worst-case cut when nodes move toward balance; the upper end
//!   caps it by the largest cut change a single move can cause.
//! * `EST_TIMES_MULT`: `λ_est · λ_mult`, with multipliers taken from a table
//!   keyed by graph size.
//! * `GBR`: `λ_est · (pred_min + pred_max) / 2` from two regression models.
//! * `FIXED`: a user-supplied value.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{MbpError, Result};
use crate::gbr::LambdaModels;
use crate::graph::Graph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum StrategyKind {
    MaxcutP,
    Est,
    EstTimesMult,
    Gbr,
    Fixed,
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StrategyKind::MaxcutP => "MAXCUT_P",
            StrategyKind::Est => "EST",
            StrategyKind::EstTimesMult => "EST_TIMES_MULT",
            StrategyKind::Gbr => "GBR",
            StrategyKind::Fixed => "FIXED",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaBounds {
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbrPrediction {
    pub lambda_min_pred: f64,
    pub lambda_max_pred: f64,
}

/// The λ that was used and everything that went into it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaSpec {
    pub strategy: StrategyKind,
    pub lambda: f64,
    pub lambda_est: Option<f64>,
    pub multiplier: Option<f64>,
    pub bounds: Option<LambdaBounds>,
    pub gbr_pred: Option<GbrPrediction>,
    pub p_used: Option<f64>,
}

/// A request for λ, resolved per graph by [`resolve_lambda`].
#[derive(Debug, Clone)]
pub enum LambdaStrategy {
    MaxcutP,
    Est,
    EstTimesMult(f64),
    Gbr(Arc<LambdaModels>),
    Fixed(f64),
}

impl LambdaStrategy {
    pub fn kind(&self) -> StrategyKind {
        match self {
            LambdaStrategy::MaxcutP => StrategyKind::MaxcutP,
            LambdaStrategy::Est => StrategyKind::Est,
            LambdaStrategy::EstTimesMult(_) => StrategyKind::EstTimesMult,
            LambdaStrategy::Gbr(_) => StrategyKind::Gbr,
            LambdaStrategy::Fixed(_) => StrategyKind::Fixed,
        }
    }
}

/// `n² p / 4`.
pub fn lambda_maxcut(n: usize, p: f64) -> Result<f64> {
    if n < 2 {
        return Err(MbpError::invalid(format!("need at least 2 nodes, got {n}")));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(MbpError::invalid(format!("edge probability {p} not in [0,1]")));
    }
    Ok((n * n) as f64 * p / 4.0)
}

/// `(1, min(Δ, n/2 − 1))`. Fails when the interval is empty.
pub fn lambda_bounds(g: &Graph) -> Result<LambdaBounds> {
    g.require_even()?;
    let n = g.node_count();
    let upper = g.max_degree().min((n / 2).saturating_sub(1)) as f64;
    let bounds = LambdaBounds { lower: 1.0, upper };
    if bounds.upper < bounds.lower {
        return Err(MbpError::DegenerateInstance(format!(
            "empty penalty interval [1, {upper}] (n = {n}, max degree = {})",
            g.max_degree()
        )));
    }
    Ok(bounds)
}

/// Midpoint of [`lambda_bounds`].
pub fn lambda_est(g: &Graph) -> Result<f64> {
    let b = lambda_bounds(g)?;
    Ok((b.lower + b.upper) / 2.0)
}

const MULT_SMALL: &[f64] = &[0.05, 0.1, 0.2, 0.4];
const MULT_MID: &[f64] = &[0.005, 0.01, 0.03, 0.05, 0.1, 0.2];
const MULT_UPPER_MID: &[f64] = &[0.005, 0.01, 0.03, 0.05, 0.1];
const MULT_LARGE: &[f64] = &[0.002, 0.005, 0.01, 0.03, 0.05, 0.1];
const MULT_XL: &[f64] = &[0.0005, 0.001, 0.002, 0.005, 0.01, 0.03, 0.05, 0.1];

/// Listed graph sizes and the multiplier set used for each.
const MULT_TABLE: &[(usize, &[f64])] = &[
    (100, MULT_SMALL),
    (200, MULT_SMALL),
    (300, MULT_MID),
    (400, MULT_MID),
    (500, MULT_MID),
    (600, MULT_UPPER_MID),
    (700, MULT_UPPER_MID),
    (800, MULT_UPPER_MID),
    (900, MULT_UPPER_MID),
    (1000, MULT_LARGE),
    (1200, MULT_LARGE),
    (1400, MULT_LARGE),
    (1600, MULT_LARGE),
    (1800, MULT_LARGE),
    (2000, MULT_LARGE),
    (2500, MULT_XL),
    (3000, MULT_XL),
    (3500, MULT_XL),
    (4000, MULT_XL),
];

/// Multiplier candidates for a graph of `n` nodes: the set of the nearest
/// listed size, ties going to the smaller size.
pub fn lambda_mult_candidates(n: usize) -> &'static [f64] {
    let mut best = MULT_TABLE[0];
    for &entry in &MULT_TABLE[1..] {
        // Strict comparison keeps the smaller size on ties.
        if entry.0.abs_diff(n) < best.0.abs_diff(n) {
            best = entry;
        }
    }
    best.1
}

/// `λ_est · λ_mult`.
pub fn lambda_final(lambda_est: f64, mult: f64) -> Result<f64> {
    if !(lambda_est > 0.0) || !(mult > 0.0) {
        return Err(MbpError::invalid(format!(
            "λ_est ({lambda_est}) and multiplier ({mult}) must be positive"
        )));
    }
    Ok(lambda_est * mult)
}

/// Worst-case cut term and balance penalty after moving `moved` nodes out of
/// an all-in-one-set assignment: `(x (x − n), λ (n/2 − x)²)`.
pub fn tradeoff_terms(n: usize, lambda: f64, moved: usize) -> Result<(f64, f64)> {
    if moved > n {
        return Err(MbpError::invalid(format!("cannot move {moved} of {n} nodes")));
    }
    let (n, x) = (n as f64, moved as f64);
    let d = n / 2.0 - x;
    Ok((x * (x - n), lambda * d * d))
}

fn refuse_empty(g: &Graph) -> Result<()> {
    if g.edge_count() == 0 {
        return Err(MbpError::DegenerateInstance(
            "graph has no edges; every balanced partition is optimal".into(),
        ));
    }
    Ok(())
}

/// Combine two regression predictions into λ.
pub fn lambda_from_gbr(models: &LambdaModels, g: &Graph) -> Result<LambdaSpec> {
    refuse_empty(g)?;
    let bounds = lambda_bounds(g)?;
    let est = (bounds.lower + bounds.upper) / 2.0;
    let (lambda_min_pred, lambda_max_pred) = models.predict(g.node_count(), g.density(), est)?;
    let mid = (lambda_min_pred + lambda_max_pred) / 2.0;
    let lambda = est * mid;
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(MbpError::StrategyUnavailable(format!(
            "predicted multipliers ({lambda_min_pred}, {lambda_max_pred}) give non-positive λ"
        )));
    }
    Ok(LambdaSpec {
        strategy: StrategyKind::Gbr,
        lambda,
        lambda_est: Some(est),
        multiplier: Some(mid),
        bounds: Some(bounds),
        gbr_pred: Some(GbrPrediction { lambda_min_pred, lambda_max_pred }),
        p_used: None,
    })
}

/// Resolve a strategy against a graph, recording provenance.
pub fn resolve_lambda(g: &Graph, strategy: &LambdaStrategy) -> Result<LambdaSpec> {
    g.require_even()?;
    refuse_empty(g)?;
    // λ_est is reported wherever it is defined, even if unused.
    let bounds = lambda_bounds(g).ok();
    let est = bounds.map(|b| (b.lower + b.upper) / 2.0);
    let base = LambdaSpec {
        strategy: strategy.kind(),
        lambda: 0.0,
        lambda_est: est,
        multiplier: None,
        bounds,
        gbr_pred: None,
        p_used: None,
    };
    let spec = match strategy {
        LambdaStrategy::MaxcutP => {
            let meta = g.meta().ok_or_else(|| {
                MbpError::StrategyUnavailable(
                    "MAXCUT_P needs the edge probability, but the graph has no generation metadata".into(),
                )
            })?;
            LambdaSpec { lambda: lambda_maxcut(g.node_count(), meta.p)?, p_used: Some(meta.p), ..base }
        }
        LambdaStrategy::Est => LambdaSpec { lambda: lambda_est(g)?, ..base },
        LambdaStrategy::EstTimesMult(mult) => {
            let est = lambda_est(g)?;
            LambdaSpec { lambda: lambda_final(est, *mult)?, multiplier: Some(*mult), ..base }
        }
        LambdaStrategy::Gbr(models) => lambda_from_gbr(models, g)?,
        LambdaStrategy::Fixed(v) => LambdaSpec { lambda: *v, ..base },
    };
    if !(spec.lambda > 0.0) || !spec.lambda.is_finite() {
        return Err(MbpError::StrategyUnavailable(format!(
            "{} resolved to non-positive λ = {}",
            spec.strategy, spec.lambda
        )));
    }
    Ok(spec)
}
