//! Gradient-boosted regression trees (squared-error loss) and the pair of
//! models that predict the λ multiplier range from `(n, density, λ_est)`.
//!
//! Each round fits a CART tree to the current residuals: splits are chosen
//! exhaustively over midpoints between sorted distinct feature values by
//! squared-error reduction, and each leaf predicts the mean residual of its
//! samples. The model output is `init + learning_rate · Σ tree(x)`.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{MbpError, Result};
use crate::harness::LambdaRangeRow;
use crate::rng;

pub const MODEL_FORMAT: &str = "mbp-gbr";
pub const MODEL_VERSION: u32 = 1;

/// Feature arity of the λ models: `(n, density, λ_est)`.
pub const LAMBDA_FEATURES: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    n_features: usize,
    features: Vec<Vec<f64>>,
    targets: Vec<f64>,
}

impl Dataset {
    pub fn new(features: Vec<Vec<f64>>, targets: Vec<f64>) -> Result<Self> {
        if features.len() != targets.len() {
            return Err(MbpError::invalid(format!(
                "{} feature rows but {} targets",
                features.len(),
                targets.len()
            )));
        }
        let n_features = features.first().map_or(0, Vec::len);
        for (i, row) in features.iter().enumerate() {
            if row.len() != n_features {
                return Err(MbpError::invalid(format!(
                    "row {i} has {} features, expected {n_features}",
                    row.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(MbpError::invalid(format!("row {i} has a non-finite feature")));
            }
        }
        if let Some(i) = targets.iter().position(|v| !v.is_finite()) {
            return Err(MbpError::invalid(format!("target {i} is not finite")));
        }
        Ok(Dataset { n_features, features, targets })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i]
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            n_features: self.n_features,
            features: idx.iter().map(|&i| self.features[i].clone()).collect(),
            targets: idx.iter().map(|&i| self.targets[i]).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbrParams {
    pub n_trees: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
}

impl Default for GbrParams {
    fn default() -> Self {
        GbrParams { n_trees: 100, learning_rate: 0.1, max_depth: 3, min_samples_leaf: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TreeNode {
    /// Samples with `x[feature] <= threshold` go to the node right after this
    /// one (preorder); the rest go to `right`.
    Split {
        feature: usize,
        threshold: f64,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    /// Preorder layout; node 0 is the root.
    nodes: Vec<TreeNode>,
}

impl RegressionTree {
    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], at: usize) -> usize {
            match nodes[at] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { right, .. } => 1 + walk(nodes, at + 1).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, TreeNode::Leaf { .. })).count()
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                TreeNode::Leaf { value } => return value,
                TreeNode::Split { feature, threshold, right } => {
                    at = if x[feature] <= threshold { at + 1 } else { right };
                }
            }
        }
    }
}

struct Split {
    feature: usize,
    threshold: f64,
    gain: f64,
}

fn best_split(ds: &Dataset, residuals: &[f64], idx: &[usize], min_samples_leaf: usize) -> Option<Split> {
    let n = idx.len();
    let total: f64 = idx.iter().map(|&i| residuals[i]).sum();
    let sumsq: f64 = idx.iter().map(|&i| residuals[i] * residuals[i]).sum();
    let parent = total * total / n as f64;
    // Gains below this are rounding noise, e.g. constant residuals.
    let tol = 1e-12 * sumsq.max(f64::MIN_POSITIVE);
    let mut best: Option<Split> = None;
    let mut order = idx.to_vec();
    for f in 0..ds.n_features {
        order.sort_by(|&a, &b| ds.features[a][f].total_cmp(&ds.features[b][f]));
        let mut left_sum = 0.0;
        for k in 0..n - 1 {
            left_sum += residuals[order[k]];
            let lo = ds.features[order[k]][f];
            let hi = ds.features[order[k + 1]][f];
            let n_left = k + 1;
            let n_right = n - n_left;
            if lo == hi || n_left < min_samples_leaf || n_right < min_samples_leaf {
                continue;
            }
            let right_sum = total - left_sum;
            let gain = left_sum * left_sum / n_left as f64 + right_sum * right_sum / n_right as f64 - parent;
            if gain > tol && best.as_ref().is_none_or(|b| gain > b.gain) {
                let mid = lo + (hi - lo) / 2.0;
                let threshold = if mid < hi { mid } else { lo };
                best = Some(Split { feature: f, threshold, gain });
            }
        }
    }
    best
}

fn grow(
    ds: &Dataset,
    residuals: &[f64],
    idx: &[usize],
    depth_left: usize,
    min_samples_leaf: usize,
    nodes: &mut Vec<TreeNode>,
) {
    let leaf = |nodes: &mut Vec<TreeNode>| {
        let mean = idx.iter().map(|&i| residuals[i]).sum::<f64>() / idx.len() as f64;
        nodes.push(TreeNode::Leaf { value: mean });
    };
    if depth_left == 0 || idx.len() < 2 * min_samples_leaf.max(1) {
        return leaf(nodes);
    }
    let Some(split) = best_split(ds, residuals, idx, min_samples_leaf) else {
        return leaf(nodes);
    };
    let (left, right): (Vec<usize>, Vec<usize>) =
        idx.iter().partition(|&&i| ds.features[i][split.feature] <= split.threshold);
    let at = nodes.len();
    nodes.push(TreeNode::Split { feature: split.feature, threshold: split.threshold, right: 0 });
    grow(ds, residuals, &left, depth_left - 1, min_samples_leaf, nodes);
    let right_at = nodes.len();
    if let TreeNode::Split { right, .. } = &mut nodes[at] {
        *right = right_at;
    }
    grow(ds, residuals, &right, depth_left - 1, min_samples_leaf, nodes);
}

/// Fit one regression tree to `residuals`.
pub fn fit_tree(
    ds: &Dataset,
    residuals: &[f64],
    max_depth: usize,
    min_samples_leaf: usize,
) -> Result<RegressionTree> {
    if ds.is_empty() {
        return Err(MbpError::InsufficientData("cannot fit a tree to no samples".into()));
    }
    if residuals.len() != ds.len() {
        return Err(MbpError::invalid("residual count does not match dataset"));
    }
    let idx: Vec<usize> = (0..ds.len()).collect();
    let mut nodes = Vec::new();
    grow(ds, residuals, &idx, max_depth, min_samples_leaf, &mut nodes);
    Ok(RegressionTree { nodes })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub rmse: f64,
    pub mae: f64,
    pub r2: f64,
}

/// RMSE, MAE and R². When the targets are constant, R² is 1 for a perfect
/// fit and 0 otherwise.
pub fn metrics(truth: &[f64], predicted: &[f64]) -> Result<EvalMetrics> {
    if truth.is_empty() || truth.len() != predicted.len() {
        return Err(MbpError::invalid("metrics need equal, non-empty vectors"));
    }
    let n = truth.len() as f64;
    let mean = truth.iter().sum::<f64>() / n;
    let (mut ss_res, mut ss_tot, mut abs) = (0.0, 0.0, 0.0);
    for (&y, &p) in truth.iter().zip(predicted) {
        ss_res += (y - p) * (y - p);
        ss_tot += (y - mean) * (y - mean);
        abs += (y - p).abs();
    }
    let r2 = if ss_tot == 0.0 {
        if ss_res == 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        1.0 - ss_res / ss_tot
    };
    Ok(EvalMetrics { rmse: (ss_res / n).sqrt(), mae: abs / n, r2 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbrModel {
    pub n_features: usize,
    pub init_value: f64,
    pub learning_rate: f64,
    pub params: GbrParams,
    pub trees: Vec<RegressionTree>,
    /// Training MSE after initialization and after each round.
    pub train_mse: Vec<f64>,
    pub split_seed: Option<u64>,
    pub test_metrics: Option<EvalMetrics>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    model: GbrModel,
}

impl GbrModel {
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_features {
            return Err(MbpError::invalid(format!(
                "feature row has arity {}, model expects {}",
                x.len(),
                self.n_features
            )));
        }
        Ok(self.init_value + self.learning_rate * self.trees.iter().map(|t| t.predict(x)).sum::<f64>())
    }

    pub fn evaluate(&self, ds: &Dataset) -> Result<EvalMetrics> {
        let preds = (0..ds.len()).map(|i| self.predict(ds.row(i))).collect::<Result<Vec<_>>>()?;
        metrics(ds.targets(), &preds)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ModelFile {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            model: self.clone(),
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let format = value.get("format").and_then(|v| v.as_str()).unwrap_or("");
        let version = value.get("version").and_then(|v| v.as_u64()).unwrap_or(0);
        if format != MODEL_FORMAT || version != u64::from(MODEL_VERSION) {
            return Err(MbpError::Schema {
                found: format!("{format} v{version}"),
                expected: format!("{MODEL_FORMAT} v{MODEL_VERSION}"),
            });
        }
        let file: ModelFile = serde_json::from_value(value)?;
        Ok(file.model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

/// Boost `params.n_trees` trees on `ds`.
pub fn fit_gbr(ds: &Dataset, params: GbrParams) -> Result<GbrModel> {
    if ds.len() < 2 {
        return Err(MbpError::InsufficientData(format!(
            "boosting needs at least 2 samples, got {}",
            ds.len()
        )));
    }
    if ds.n_features == 0 {
        return Err(MbpError::invalid("dataset has no features"));
    }
    if !(0.0..=1.0).contains(&params.learning_rate) {
        return Err(MbpError::invalid(format!("learning rate {} not in [0,1]", params.learning_rate)));
    }
    let n = ds.len() as f64;
    let init = ds.targets.iter().sum::<f64>() / n;
    let mut pred = vec![init; ds.len()];
    let mse = |pred: &[f64]| ds.targets.iter().zip(pred).map(|(y, p)| (y - p) * (y - p)).sum::<f64>() / n;
    let mut train_mse = vec![mse(&pred)];
    let mut trees = Vec::with_capacity(params.n_trees);
    let mut residuals = vec![0.0; ds.len()];
    for _ in 0..params.n_trees {
        for ((r, y), p) in residuals.iter_mut().zip(&ds.targets).zip(&pred) {
            *r = y - p;
        }
        let tree = fit_tree(ds, &residuals, params.max_depth, params.min_samples_leaf)?;
        for (i, p) in pred.iter_mut().enumerate() {
            *p += params.learning_rate * tree.predict(&ds.features[i]);
        }
        train_mse.push(mse(&pred));
        trees.push(tree);
    }
    Ok(GbrModel {
        n_features: ds.n_features,
        init_value: init,
        learning_rate: params.learning_rate,
        params,
        trees,
        train_mse,
        split_seed: None,
        test_metrics: None,
    })
}

pub fn predict(m: &GbrModel, x: &[f64]) -> Result<f64> {
    m.predict(x)
}

pub fn evaluate(m: &GbrModel, ds: &Dataset) -> Result<EvalMetrics> {
    m.evaluate(ds)
}

/// One held-out row: truth and prediction for both targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeldOutPrediction {
    pub graph_key: String,
    pub n: usize,
    pub density: f64,
    pub lambda_min: f64,
    pub lambda_min_pred: f64,
    pub lambda_max: f64,
    pub lambda_max_pred: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub split_seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    pub min: EvalMetrics,
    pub max: EvalMetrics,
    pub held_out: Vec<HeldOutPrediction>,
}

/// The λ_min / λ_max regressor pair.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaModels {
    pub min: GbrModel,
    pub max: GbrModel,
    pub report: Option<TrainReport>,
}

pub const MIN_MODEL_FILE: &str = "gbr_min.json";
pub const MAX_MODEL_FILE: &str = "gbr_max.json";
pub const REPORT_FILE: &str = "train_report.json";

impl LambdaModels {
    pub fn features(n: usize, density: f64, lambda_est: f64) -> [f64; LAMBDA_FEATURES] {
        [n as f64, density, lambda_est]
    }

    /// `(pred_min, pred_max)` for a graph.
    pub fn predict(&self, n: usize, density: f64, lambda_est: f64) -> Result<(f64, f64)> {
        if self.min.trees.is_empty() && self.min.params.n_trees > 0 {
            return Err(MbpError::UntrainedModel("λ_min model has no trees".into()));
        }
        if self.max.trees.is_empty() && self.max.params.n_trees > 0 {
            return Err(MbpError::UntrainedModel("λ_max model has no trees".into()));
        }
        let f = Self::features(n, density, lambda_est);
        Ok((self.min.predict(&f)?, self.max.predict(&f)?))
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        self.min.save(dir.join(MIN_MODEL_FILE))?;
        self.max.save(dir.join(MAX_MODEL_FILE))?;
        if let Some(report) = &self.report {
            fs::write(dir.join(REPORT_FILE), serde_json::to_string_pretty(report)?)?;
        }
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let missing = |f: &str| MbpError::UntrainedModel(format!("no model file {}", dir.join(f).display()));
        if !dir.join(MIN_MODEL_FILE).exists() {
            return Err(missing(MIN_MODEL_FILE));
        }
        if !dir.join(MAX_MODEL_FILE).exists() {
            return Err(missing(MAX_MODEL_FILE));
        }
        let report = match fs::read_to_string(dir.join(REPORT_FILE)) {
            Ok(text) => Some(serde_json::from_str(&text)?),
            Err(_) => None,
        };
        Ok(LambdaModels {
            min: GbrModel::load(dir.join(MIN_MODEL_FILE))?,
            max: GbrModel::load(dir.join(MAX_MODEL_FILE))?,
            report,
        })
    }
}

pub const MIN_TRAINING_ROWS: usize = 10;

/// Shuffle `rows` with `split_seed`, hold out 20 %, fit both regressors on
/// the rest and evaluate them on the held-out rows.
pub fn train_lambda_models(
    rows: &[LambdaRangeRow],
    split_seed: u64,
    params: GbrParams,
) -> Result<LambdaModels> {
    if rows.len() < MIN_TRAINING_ROWS {
        return Err(MbpError::InsufficientData(format!(
            "need at least {MIN_TRAINING_ROWS} λ-range rows, got {}",
            rows.len()
        )));
    }
    let feats: Vec<Vec<f64>> =
        rows.iter().map(|r| LambdaModels::features(r.n, r.density, r.lambda_est).to_vec()).collect();
    let ds_min = Dataset::new(feats.clone(), rows.iter().map(|r| r.lambda_min).collect())?;
    let ds_max = Dataset::new(feats, rows.iter().map(|r| r.lambda_max).collect())?;

    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.shuffle(&mut rng::stream(split_seed));
    let n_test = ((rows.len() as f64 * 0.2).round() as usize).max(1);
    let (test_idx, train_idx) = order.split_at(n_test);

    let mut min = fit_gbr(&ds_min.subset(train_idx), params)?;
    let mut max = fit_gbr(&ds_max.subset(train_idx), params)?;
    let test_min = ds_min.subset(test_idx);
    let test_max = ds_max.subset(test_idx);
    let min_metrics = min.evaluate(&test_min)?;
    let max_metrics = max.evaluate(&test_max)?;
    min.split_seed = Some(split_seed);
    max.split_seed = Some(split_seed);
    min.test_metrics = Some(min_metrics);
    max.test_metrics = Some(max_metrics);

    let held_out = test_idx
        .iter()
        .map(|&i| {
            let r = &rows[i];
            let f = LambdaModels::features(r.n, r.density, r.lambda_est);
            Ok(HeldOutPrediction {
                graph_key: r.graph_key.clone(),
                n: r.n,
                density: r.density,
                lambda_min: r.lambda_min,
                lambda_min_pred: min.predict(&f)?,
                lambda_max: r.lambda_max,
                lambda_max_pred: max.predict(&f)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(LambdaModels {
        min,
        max,
        report: Some(TrainReport {
            split_seed,
            n_train: train_idx.len(),
            n_test,
            min: min_metrics,
            max: max_metrics,
            held_out,
        }),
    })
}
