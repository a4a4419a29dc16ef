//! Parametric classifiers: Gaussian naive Bayes and a one-vs-rest linear SVM
//! with squared-hinge loss.
//!
//! The SVM solves, per label, `min (reg/2)*||w||^2 + C * sum_i max(0, 1 -
//! y_i (w.x_i + b))^2` by seeded stochastic subgradient descent with
//! epoch-level acceptance: an epoch that fails to lower the exact objective
//! is rolled back and the base step size halved, so the recorded objective
//! trace is non-increasing by construction.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::ingest::LabeledDataset;
use crate::rng::{stream_rng, DOMAIN_SVM};

// ---------------------------------------------------------------------------
// Gaussian naive Bayes
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianNb {
    pub priors: Vec<f64>,
    /// `means[label][feature]`
    pub means: Vec<Vec<f64>>,
    /// `variances[label][feature]`, each already increased by `smoothing`.
    pub variances: Vec<Vec<f64>>,
    pub smoothing: f64,
}

/// Fit per-label Gaussians with population variances. Every variance is
/// increased by `smoothing_scale * max_f Var(feature f over all rows)` so
/// log-densities stay finite on within-label-constant features.
pub fn fit_gaussian_nb(train: &LabeledDataset, smoothing_scale: f64) -> Result<GaussianNb> {
    let n = train.n_rows();
    if n == 0 {
        return Err(Error::Argument("cannot fit naive Bayes on zero rows".into()));
    }
    if smoothing_scale <= 0.0 {
        return Err(Error::Argument("smoothing scale must be positive".into()));
    }
    let d = train.n_features();
    let n_labels = train.label_dict.len();
    let counts = train.class_counts();
    for (label, &c) in counts.iter().enumerate() {
        if c == 0 {
            return Err(Error::Argument(format!(
                "label '{}' has no training rows",
                train.label_dict.name_of(label)
            )));
        }
    }

    let mut means = vec![vec![0.0f64; d]; n_labels];
    for r in 0..n {
        let label = train.labels()[r];
        for (m, v) in means[label].iter_mut().zip(train.row(r)) {
            *m += *v;
        }
    }
    for (label, row_means) in means.iter_mut().enumerate() {
        for m in row_means.iter_mut() {
            *m /= counts[label] as f64;
        }
    }
    let mut variances = vec![vec![0.0f64; d]; n_labels];
    for r in 0..n {
        let label = train.labels()[r];
        for ((var, mean), v) in variances[label].iter_mut().zip(&means[label]).zip(train.row(r)) {
            let diff = *v - *mean;
            *var += diff * diff;
        }
    }
    for (label, row_vars) in variances.iter_mut().enumerate() {
        for var in row_vars.iter_mut() {
            *var /= counts[label] as f64;
        }
    }

    // global per-feature population variance drives the smoothing floor
    let mut global_means = vec![0.0f64; d];
    for r in 0..n {
        for (m, v) in global_means.iter_mut().zip(train.row(r)) {
            *m += *v;
        }
    }
    for m in global_means.iter_mut() {
        *m /= n as f64;
    }
    let mut max_global_var = 0.0f64;
    for c in 0..d {
        let mut var = 0.0;
        for r in 0..n {
            let diff = train.value(r, c) - global_means[c];
            var += diff * diff;
        }
        max_global_var = max_global_var.max(var / n as f64);
    }
    let smoothing = if max_global_var > 0.0 {
        smoothing_scale * max_global_var
    } else {
        smoothing_scale
    };
    for row_vars in variances.iter_mut() {
        for var in row_vars.iter_mut() {
            *var += smoothing;
        }
    }

    let priors = counts.iter().map(|&c| c as f64 / n as f64).collect();
    Ok(GaussianNb {
        priors,
        means,
        variances,
        smoothing,
    })
}

const LN_2PI: f64 = 1.8378770664093453;

/// Unnormalized log posteriors: `ln prior_c + sum_f ln N(x_f; mean, var)`.
pub fn gnb_log_posteriors(model: &GaussianNb, record: &[f64]) -> Result<Vec<f64>> {
    check_record(record, model.means[0].len())?;
    let scores = model
        .priors
        .iter()
        .zip(&model.means)
        .zip(&model.variances)
        .map(|((prior, means), vars)| {
            let mut score = prior.ln();
            for ((x, m), v) in record.iter().zip(means).zip(vars) {
                let diff = x - m;
                score += -0.5 * (LN_2PI + v.ln()) - diff * diff / (2.0 * v);
            }
            score
        })
        .collect();
    Ok(scores)
}

/// Posteriors normalized to a probability vector (max-shifted softmax over
/// the log posteriors); the natural ROC score for this model.
pub fn gnb_posteriors(model: &GaussianNb, record: &[f64]) -> Result<Vec<f64>> {
    let logs = gnb_log_posteriors(model, record)?;
    let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    Ok(exps.iter().map(|e| e / total).collect())
}

// ---------------------------------------------------------------------------
// Linear SVM (squared hinge, one-vs-rest)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmConfig {
    /// Loss weight C.
    pub cost: f64,
    /// Weight on the `||w||^2 / 2` regularizer.
    pub reg_weight: f64,
    pub max_epochs: usize,
    /// Stop once an accepted epoch improves the objective by less than this.
    pub tolerance: f64,
    /// Base learning rate; decays as `eta0 / (1 + eta_decay * epoch)`.
    pub eta0: f64,
    pub eta_decay: f64,
    pub seed: u64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig {
            cost: 1.0,
            reg_weight: 1.0,
            max_epochs: 60,
            tolerance: 1e-7,
            eta0: 0.05,
            eta_decay: 0.1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvm {
    /// `weights[label]` is the weight vector for that label's one-vs-rest
    /// problem.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
    pub config: SvmConfig,
}

/// Exact value of the per-label objective
/// `(reg/2)*||w||^2 + C * sum_i max(0, 1 - y_i (w.x_i + b))^2`.
pub fn svm_objective(
    w: &[f64],
    b: f64,
    cost: f64,
    reg_weight: f64,
    xs: &[f64],
    y: &[f64],
) -> f64 {
    let d = w.len();
    let mut loss = 0.0;
    for (i, &yi) in y.iter().enumerate() {
        let row = &xs[i * d..(i + 1) * d];
        let f = dot(w, row) + b;
        let slack = 1.0 - yi * f;
        if slack > 0.0 {
            loss += slack * slack;
        }
    }
    0.5 * reg_weight * dot(w, w) + cost * loss
}

/// Full-batch subgradient of [`svm_objective`] at `(w, b)`.
pub fn svm_subgradient(
    w: &[f64],
    b: f64,
    cost: f64,
    reg_weight: f64,
    xs: &[f64],
    y: &[f64],
) -> (Vec<f64>, f64) {
    let d = w.len();
    let mut gw: Vec<f64> = w.iter().map(|wi| reg_weight * wi).collect();
    let mut gb = 0.0;
    for (i, &yi) in y.iter().enumerate() {
        let row = &xs[i * d..(i + 1) * d];
        let f = dot(w, row) + b;
        let slack = 1.0 - yi * f;
        if slack > 0.0 {
            let coeff = -2.0 * cost * slack * yi;
            for (g, x) in gw.iter_mut().zip(row) {
                *g += coeff * x;
            }
            gb += coeff;
        }
    }
    (gw, gb)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn fit_binary(
    xs: &[f64],
    y: &[f64],
    d: usize,
    config: &SvmConfig,
    label_index: u64,
) -> (Vec<f64>, f64, Vec<f64>) {
    let n = y.len();
    let mut rng: ChaCha8Rng = stream_rng(config.seed, label_index, DOMAIN_SVM);
    let mut w = vec![0.0f64; d];
    let mut b = 0.0f64;
    let mut objective = svm_objective(&w, b, config.cost, config.reg_weight, xs, y);
    let mut trace = vec![objective];
    let mut eta_base = config.eta0;
    let mut order: Vec<usize> = (0..n).collect();

    for epoch in 0..config.max_epochs {
        order.shuffle(&mut rng);
        let eta = eta_base / (1.0 + config.eta_decay * epoch as f64);
        let mut w_try = w.clone();
        let mut b_try = b;
        let reg_step = 1.0 - eta * config.reg_weight / n as f64;
        for &i in &order {
            let row = &xs[i * d..(i + 1) * d];
            let f = dot(&w_try, row) + b_try;
            let slack = 1.0 - y[i] * f;
            for wi in w_try.iter_mut() {
                *wi *= reg_step;
            }
            if slack > 0.0 {
                let step = eta * 2.0 * config.cost * slack * y[i];
                for (wi, x) in w_try.iter_mut().zip(row) {
                    *wi += step * x;
                }
                b_try += step;
            }
        }
        let new_objective = svm_objective(&w_try, b_try, config.cost, config.reg_weight, xs, y);
        if new_objective <= objective {
            let improvement = objective - new_objective;
            w = w_try;
            b = b_try;
            objective = new_objective;
            trace.push(objective);
            if improvement < config.tolerance {
                break;
            }
        } else {
            // rejected epoch: roll back and shrink the base step
            eta_base *= 0.5;
            trace.push(objective);
            if eta_base < 1e-15 {
                break;
            }
        }
    }
    (w, b, trace)
}

/// Fit one-vs-rest problems, one per dictionary label, each deterministic
/// from `(config.seed, label index)`. Returns the model and the per-label
/// objective traces (index 0 is the zero-model objective `C * n`).
pub fn fit_svm_ovr_traced(
    train: &LabeledDataset,
    config: &SvmConfig,
) -> Result<(LinearSvm, Vec<Vec<f64>>)> {
    let n = train.n_rows();
    if n == 0 {
        return Err(Error::Argument("cannot fit SVM on zero rows".into()));
    }
    let present = train.class_counts().iter().filter(|&&c| c > 0).count();
    if present < 2 {
        return Err(Error::Argument("SVM needs at least 2 labels present".into()));
    }
    if train.features_flat().iter().any(|v| !v.is_finite()) {
        return Err(Error::Argument("feature matrix contains non-finite values".into()));
    }
    let d = train.n_features();
    let xs = train.features_flat();
    let n_labels = train.label_dict.len();
    let fitted: Vec<(Vec<f64>, f64, Vec<f64>)> = exec::map_indexed(n_labels, |label| {
        let y: Vec<f64> = train
            .labels()
            .iter()
            .map(|&l| if l == label { 1.0 } else { -1.0 })
            .collect();
        fit_binary(xs, &y, d, config, label as u64)
    });
    let mut weights = Vec::with_capacity(n_labels);
    let mut biases = Vec::with_capacity(n_labels);
    let mut traces = Vec::with_capacity(n_labels);
    for (w, b, trace) in fitted {
        weights.push(w);
        biases.push(b);
        traces.push(trace);
    }
    Ok((
        LinearSvm {
            weights,
            biases,
            config: *config,
        },
        traces,
    ))
}

pub fn fit_svm_ovr(train: &LabeledDataset, config: &SvmConfig) -> Result<LinearSvm> {
    fit_svm_ovr_traced(train, config).map(|(model, _)| model)
}

/// Raw one-vs-rest margins `w_c . x + b_c`; argmax (ties to the lowest
/// index) is the prediction and the margins feed ROC.
pub fn svm_decision_scores(model: &LinearSvm, record: &[f64]) -> Result<Vec<f64>> {
    let d = model.weights.first().map(Vec::len).unwrap_or(0);
    check_record(record, d)?;
    Ok(model
        .weights
        .iter()
        .zip(&model.biases)
        .map(|(w, b)| dot(w, record) + b)
        .collect())
}

fn check_record(record: &[f64], expected: usize) -> Result<()> {
    if record.len() != expected {
        return Err(Error::Argument(format!(
            "record has {} features, expected {expected}",
            record.len()
        )));
    }
    if record.iter().any(|v| v.is_nan()) {
        return Err(Error::Argument("record contains NaN".into()));
    }
    Ok(())
}
