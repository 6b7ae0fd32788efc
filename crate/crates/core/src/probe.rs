//! Linear probes: multinomial logistic regression trained by mini-batch
//! SGD with momentum, with a random hyperparameter search on a validation
//! split followed by a retrain on all training data.

use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::EmbeddingSet;
use crate::error::{ensure, Error, Result};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeConfig {
    pub trials: usize,
    /// Learning rate, sampled log-uniformly.
    pub lr_range: (f64, f64),
    /// Weight decay, sampled log-uniformly or set to zero.
    pub wd_range: (f64, f64),
    /// Probability that a trial uses no weight decay.
    pub wd_zero_prob: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub momentum: f64,
    pub val_fraction: f64,
    /// L2-normalize inputs before training and prediction.
    pub normalize: bool,
    pub seed: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            trials: 30,
            lr_range: (1e-4, 1e-1),
            wd_range: (1e-6, 1e-2),
            wd_zero_prob: 0.1,
            epochs: 100,
            batch_size: 256,
            momentum: 0.9,
            val_fraction: 0.2,
            normalize: true,
            seed: 0,
        }
    }
}

impl ProbeConfig {
    pub fn validate(&self) -> Result<()> {
        ensure!(self.trials >= 1, "trials must be at least 1");
        ensure!(self.epochs >= 1, "epochs must be at least 1");
        ensure!(self.batch_size >= 1, "batch_size must be at least 1");
        ensure!(
            self.val_fraction > 0.0 && self.val_fraction < 1.0,
            "val_fraction must lie in (0, 1), got {}",
            self.val_fraction
        );
        let (a, b) = self.lr_range;
        ensure!(a > 0.0 && a <= b, "invalid lr_range ({a}, {b})");
        let (a, b) = self.wd_range;
        ensure!(a > 0.0 && a <= b, "invalid wd_range ({a}, {b})");
        ensure!((0.0..=1.0).contains(&self.wd_zero_prob), "wd_zero_prob must lie in [0, 1]");
        ensure!((0.0..1.0).contains(&self.momentum), "momentum must lie in [0, 1)");
        Ok(())
    }

    fn sample(&self, trial: usize) -> Hyperparams {
        let mut rng = seed::stream(self.seed, "probe-hp", trial as u64);
        let log_uniform = |rng: &mut seed::Rng, (a, b): (f64, f64)| -> f64 {
            if a == b {
                a
            } else {
                rng.gen_range(a.ln()..b.ln()).exp()
            }
        };
        let lr = log_uniform(&mut rng, self.lr_range);
        let zero = rng.gen_bool(self.wd_zero_prob);
        let wd = log_uniform(&mut rng, self.wd_range);
        Hyperparams {
            lr,
            wd: if zero { 0.0 } else { wd },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub lr: f64,
    pub wd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialLog {
    pub trial: usize,
    pub lr: f64,
    pub wd: f64,
    pub val_accuracy: f64,
}

/// Trained linear classifier `argmax(W x + b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeModel {
    pub classes: usize,
    pub dim: usize,
    /// Row-major `classes x dim`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub normalize: bool,
    pub hyperparams: Hyperparams,
    pub seed: u64,
}

/// Outcome of the search and retrain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeFit {
    pub model: ProbeModel,
    pub trials: Vec<TrialLog>,
    pub chosen_trial: usize,
    pub best_val_accuracy: f64,
    /// Accuracy of the retrained model on the validation rows.
    pub final_val_accuracy: f64,
    pub final_train_accuracy: f64,
}

/// Accuracy of always guessing one of `m` balanced classes.
pub fn random_baseline(m: usize) -> f64 {
    1.0 / m.max(1) as f64
}

struct Matrix {
    rows: usize,
    dim: usize,
    data: Vec<f64>,
}

impl Matrix {
    fn from_set(set: &EmbeddingSet, normalize: bool) -> Result<Self> {
        let dim = set.dim();
        let mut data = Vec::with_capacity(set.len() * dim);
        for (i, row) in set.rows().enumerate() {
            let start = data.len();
            data.extend(row.iter().map(|&v| v as f64));
            if normalize {
                let n = data[start..].iter().map(|v| v * v).sum::<f64>().sqrt();
                if n == 0.0 {
                    return Err(Error::Validation(format!("row `{}` has zero norm", set.ids()[i])));
                }
                data[start..].iter_mut().for_each(|v| *v /= n);
            }
        }
        Ok(Matrix {
            rows: set.len(),
            dim,
            data,
        })
    }

    #[inline]
    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn logits(w: &[f64], b: &[f64], x: &[f64], out: &mut [f64]) {
    let d = x.len();
    for (c, o) in out.iter_mut().enumerate() {
        *o = dot(&w[c * d..(c + 1) * d], x) + b[c];
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

fn accuracy_on(w: &[f64], b: &[f64], x: &Matrix, labels: &[usize], rows: &[usize]) -> f64 {
    let mut out = vec![0.0; b.len()];
    let hits = rows
        .iter()
        .filter(|&&i| {
            logits(w, b, x.row(i), &mut out);
            argmax(&out) == labels[i]
        })
        .count();
    hits as f64 / rows.len().max(1) as f64
}

/// Trains on `rows` of `x` with fixed hyperparameters. Returns `(W, b)`.
fn fit(
    x: &Matrix,
    labels: &[usize],
    rows: &[usize],
    m: usize,
    hp: Hyperparams,
    cfg: &ProbeConfig,
    rng: &mut seed::Rng,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let d = x.dim;
    let mut w = vec![0.0; m * d];
    let mut b = vec![0.0; m];
    let mut vw = vec![0.0; m * d];
    let mut vb = vec![0.0; m];
    let mut gw = vec![0.0; m * d];
    let mut gb = vec![0.0; m];
    let mut p = vec![0.0; m];
    let mut order = rows.to_vec();
    let steps_per_epoch = order.len().div_ceil(cfg.batch_size);
    let total = (cfg.epochs * steps_per_epoch) as f64;
    let mut step = 0usize;
    for epoch in 0..cfg.epochs {
        order.shuffle(rng);
        let mut loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            gw.iter_mut().for_each(|v| *v = 0.0);
            gb.iter_mut().for_each(|v| *v = 0.0);
            for &i in batch {
                let xi = x.row(i);
                logits(&w, &b, xi, &mut p);
                let mx = p.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let mut z = 0.0;
                for v in p.iter_mut() {
                    *v = (*v - mx).exp();
                    z += *v;
                }
                loss -= (p[labels[i]] / z).ln();
                for (c, pc) in p.iter_mut().enumerate() {
                    *pc /= z;
                    let g = *pc - if c == labels[i] { 1.0 } else { 0.0 };
                    gb[c] += g;
                    for (gwj, &xj) in gw[c * d..(c + 1) * d].iter_mut().zip(xi) {
                        *gwj += g * xj;
                    }
                }
            }
            let scale = 1.0 / batch.len() as f64;
            let lr = 0.5 * hp.lr * (1.0 + (std::f64::consts::PI * step as f64 / total).cos());
            for ((wj, vj), gj) in w.iter_mut().zip(vw.iter_mut()).zip(&gw) {
                *vj = cfg.momentum * *vj + gj * scale + hp.wd * *wj;
                *wj -= lr * *vj;
            }
            for ((bj, vj), gj) in b.iter_mut().zip(vb.iter_mut()).zip(&gb) {
                *vj = cfg.momentum * *vj + gj * scale;
                *bj -= lr * *vj;
            }
            step += 1;
        }
        if !loss.is_finite() || w.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!(
                "loss diverged in epoch {epoch} with lr = {:e}, wd = {:e}",
                hp.lr, hp.wd
            )));
        }
    }
    Ok((w, b))
}

fn check_inputs(x: &EmbeddingSet, labels: &[usize], m: usize) -> Result<()> {
    ensure!(labels.len() == x.len(), "{} labels for {} rows", labels.len(), x.len());
    ensure!(m >= 2, "a probe needs at least two classes, got {m}");
    if let Some(&l) = labels.iter().find(|&&l| l >= m) {
        return Err(Error::Validation(format!("label {l} out of range for {m} classes")));
    }
    Ok(())
}

/// Stratified validation rows: `val_fraction` of every class, rounded.
fn stratified_val(labels: &[usize], m: usize, cfg: &ProbeConfig) -> (Vec<usize>, Vec<usize>) {
    let mut rng = seed::stream(cfg.seed, "probe-val", 0);
    let mut by_class = vec![Vec::new(); m];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l].push(i);
    }
    let (mut train, mut val) = (Vec::new(), Vec::new());
    for mut rows in by_class {
        rows.shuffle(&mut rng);
        let nv = (rows.len() as f64 * cfg.val_fraction).round() as usize;
        let nv = nv.min(rows.len().saturating_sub(1));
        val.extend_from_slice(&rows[..nv]);
        train.extend_from_slice(&rows[nv..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    (train, val)
}

/// Searches hyperparameters on a stratified validation split of `x`, then
/// retrains on all of `x`.
pub fn train_probe(x: &EmbeddingSet, labels: &[usize], m: usize, cfg: &ProbeConfig) -> Result<ProbeFit> {
    cfg.validate()?;
    check_inputs(x, labels, m)?;
    let present = labels.iter().collect::<std::collections::HashSet<_>>().len();
    ensure!(present >= 2, "training data contains a single class");
    let data = Matrix::from_set(x, cfg.normalize)?;
    let (train_rows, val_rows) = stratified_val(labels, m, cfg);
    ensure!(!val_rows.is_empty(), "validation split is empty");
    search(&data, labels, &train_rows, &val_rows, m, cfg)
}

/// Like [`train_probe`] with a fixed validation set: the search trains on
/// `train` and scores on `val`, and the final model is fit on both.
pub fn train_probe_with_val(
    train: &EmbeddingSet,
    train_labels: &[usize],
    val: &EmbeddingSet,
    val_labels: &[usize],
    m: usize,
    cfg: &ProbeConfig,
) -> Result<ProbeFit> {
    cfg.validate()?;
    check_inputs(train, train_labels, m)?;
    check_inputs(val, val_labels, m)?;
    ensure!(!val.is_empty(), "validation set is empty");
    if train.dim() != val.dim() {
        return Err(Error::DimMismatch {
            expected: train.dim(),
            actual: val.dim(),
        });
    }
    let mut ids = train.ids().to_vec();
    ids.extend_from_slice(val.ids());
    let mut values = train.as_slice().to_vec();
    values.extend_from_slice(val.as_slice());
    let all = EmbeddingSet::new(train.encoder_tag(), train.dim(), ids, values, false)?;
    let mut labels = train_labels.to_vec();
    labels.extend_from_slice(val_labels);
    let data = Matrix::from_set(&all, cfg.normalize)?;
    let train_rows: Vec<usize> = (0..train.len()).collect();
    let val_rows: Vec<usize> = (train.len()..all.len()).collect();
    search(&data, &labels, &train_rows, &val_rows, m, cfg)
}

fn search(
    data: &Matrix,
    labels: &[usize],
    train_rows: &[usize],
    val_rows: &[usize],
    m: usize,
    cfg: &ProbeConfig,
) -> Result<ProbeFit> {
    let trials: Vec<TrialLog> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let hp = cfg.sample(t);
            let mut rng = seed::stream(cfg.seed, "probe-trial", t as u64);
            let (w, b) = fit(data, labels, train_rows, m, hp, cfg, &mut rng)?;
            Ok(TrialLog {
                trial: t,
                lr: hp.lr,
                wd: hp.wd,
                val_accuracy: accuracy_on(&w, &b, data, labels, val_rows),
            })
        })
        .collect::<Result<_>>()?;
    let best = trials
        .iter()
        .max_by(|a, b| a.val_accuracy.total_cmp(&b.val_accuracy).then(b.trial.cmp(&a.trial)))
        .expect("at least one trial");
    let hp = Hyperparams {
        lr: best.lr,
        wd: best.wd,
    };
    let all_rows: Vec<usize> = (0..data.rows).collect();
    let mut rng = seed::stream(cfg.seed, "probe-final", 0);
    let (w, b) = fit(data, labels, &all_rows, m, hp, cfg, &mut rng)?;
    Ok(ProbeFit {
        final_val_accuracy: accuracy_on(&w, &b, data, labels, val_rows),
        final_train_accuracy: accuracy_on(&w, &b, data, labels, &all_rows),
        chosen_trial: best.trial,
        best_val_accuracy: best.val_accuracy,
        model: ProbeModel {
            classes: m,
            dim: data.dim,
            weights: w,
            bias: b,
            normalize: cfg.normalize,
            hyperparams: hp,
            seed: cfg.seed,
        },
        trials,
    })
}

/// Trains on all of `x` with given hyperparameters, skipping the search.
pub fn train_probe_fixed(
    x: &EmbeddingSet,
    labels: &[usize],
    m: usize,
    hp: Hyperparams,
    cfg: &ProbeConfig,
) -> Result<ProbeModel> {
    cfg.validate()?;
    check_inputs(x, labels, m)?;
    let data = Matrix::from_set(x, cfg.normalize)?;
    let rows: Vec<usize> = (0..data.rows).collect();
    let mut rng = seed::stream(cfg.seed, "probe-final", 0);
    let (weights, bias) = fit(&data, labels, &rows, m, hp, cfg, &mut rng)?;
    Ok(ProbeModel {
        classes: m,
        dim: data.dim,
        weights,
        bias,
        normalize: cfg.normalize,
        hyperparams: hp,
        seed: cfg.seed,
    })
}

impl ProbeModel {
    pub fn predict(&self, x: &EmbeddingSet) -> Result<Vec<usize>> {
        if x.dim() != self.dim {
            return Err(Error::DimMismatch {
                expected: self.dim,
                actual: x.dim(),
            });
        }
        let data = Matrix::from_set(x, self.normalize)?;
        let mut out = vec![0.0; self.classes];
        Ok((0..data.rows)
            .map(|i| {
                logits(&self.weights, &self.bias, data.row(i), &mut out);
                argmax(&out)
            })
            .collect())
    }
}

/// Test accuracy of a trained probe.
pub fn evaluate_probe(model: &ProbeModel, x: &EmbeddingSet, labels: &[usize]) -> Result<f64> {
    ensure!(!x.is_empty(), "test set is empty");
    ensure!(labels.len() == x.len(), "{} labels for {} rows", labels.len(), x.len());
    let pred = model.predict(x)?;
    Ok(pred.iter().zip(labels).filter(|(p, l)| p == l).count() as f64 / x.len() as f64)
}
