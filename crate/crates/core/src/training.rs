//! Maximum-likelihood training with Adam and early stopping.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensorized::Model;
use crate::variable::Variable;

/// Relative improvement of the validation NLL that resets patience.
pub const REL_IMPROVEMENT: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Adam {
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
}

fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_eps() -> f64 {
    1e-8
}

impl Default for Adam {
    fn default() -> Self {
        Adam { beta1: default_beta1(), beta2: default_beta2(), eps: default_eps() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    #[serde(default)]
    pub optimizer: Adam,
    pub patience: usize,
    pub max_epochs: usize,
    #[serde(default)]
    pub seed: u64,
    /// Rescale gradients whose Euclidean norm exceeds this value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_grad_norm: Option<f64>,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be finite and non-negative");
        }
        if self.patience == 0 {
            return bad("patience must be at least 1");
        }
        let a = &self.optimizer;
        if !(0.0..1.0).contains(&a.beta1) || !(0.0..1.0).contains(&a.beta2) || !(a.eps > 0.0) {
            return bad("optimizer: betas must lie in [0, 1) and eps must be positive");
        }
        if let Some(m) = self.max_grad_norm {
            if !(m > 0.0) {
                return bad("max_grad_norm must be positive");
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Valid,
    Test,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub rows: Vec<Vec<f64>>,
    pub split: Split,
}

impl Dataset {
    /// Checks widths and that every value lies in its variable's domain.
    pub fn new(variables: &[Variable], rows: Vec<Vec<f64>>, split: Split) -> Result<Dataset> {
        for (i, r) in rows.iter().enumerate() {
            if r.len() != variables.len() {
                return Err(Error::Schema(format!(
                    "row {i} has {} values, expected {}",
                    r.len(),
                    variables.len()
                )));
            }
            for (v, &x) in variables.iter().zip(r) {
                v.domain
                    .check_value(x)
                    .map_err(|e| Error::Domain(format!("row {i}, variable {}: {e}", v.name)))?;
            }
        }
        Ok(Dataset { rows, split })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// `|B| log Z - sum_x log c(x)` and the normalized log-likelihood per sample.
pub fn nll_batch(model: &Model, batch: &[Vec<f64>]) -> Result<(f64, Vec<f64>)> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    let (_, lls) = model.log_likelihoods(batch)?;
    Ok((-lls.iter().sum::<f64>(), lls))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_nll: f64,
    pub valid_nll: f64,
    pub log_z: f64,
    pub wall_time_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub trace: Vec<EpochMetrics>,
    pub best_epoch: usize,
    pub best_valid_nll: f64,
    pub stopped_early: bool,
}

struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl AdamState {
    fn step(&mut self, cfg: &TrainConfig, theta: &mut [f64], grad: &[f64]) {
        let Adam { beta1, beta2, eps } = cfg.optimizer;
        self.t += 1;
        let c1 = 1.0 - beta1.powi(self.t);
        let c2 = 1.0 - beta2.powi(self.t);
        for i in 0..theta.len() {
            self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * grad[i];
            self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * grad[i] * grad[i];
            theta[i] -= cfg.learning_rate * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + eps);
        }
    }
}

fn epoch_metrics(model: &Model, train: &Dataset, valid: &Dataset, epoch: usize, t0: Instant) -> Result<EpochMetrics> {
    Ok(EpochMetrics {
        epoch,
        train_nll: model.mean_nll(&train.rows)?,
        valid_nll: model.mean_nll(&valid.rows)?,
        log_z: model.log_partition()?,
        wall_time_s: t0.elapsed().as_secs_f64(),
    })
}

/// Trains `model` in place and leaves it at the best validation checkpoint.
///
/// Epoch 0 in the trace is the initial model. Each later epoch visits the
/// training rows once in an order drawn from a stream seeded by `cfg.seed`;
/// the gradient of every batch is the mean over its rows.
pub fn fit(model: &mut Model, train: &Dataset, valid: &Dataset, cfg: &TrainConfig) -> Result<FitReport> {
    cfg.validate()?;
    if train.is_empty() || valid.is_empty() {
        return Err(Error::InvalidArgument("training and validation sets must be nonempty".into()));
    }
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = model.num_params();
    let mut opt = AdamState { m: vec![0.0; n], v: vec![0.0; n], t: 0 };
    let first = epoch_metrics(model, train, valid, 0, t0)?;
    let mut best = (0, first.valid_nll, model.params().to_vec());
    let mut reference = first.valid_nll;
    let mut wait = 0;
    let mut trace = vec![first];
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut stopped_early = false;
    let mut batch = Vec::with_capacity(cfg.batch_size);
    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| train.rows[i].clone()));
            let (_, mut grad) = model.nll_and_grad(&batch)?;
            let scale = 1.0 / batch.len() as f64;
            grad.iter_mut().for_each(|g| *g *= scale);
            if let Some(max) = cfg.max_grad_norm {
                let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
                if norm > max {
                    grad.iter_mut().for_each(|g| *g *= max / norm);
                }
            }
            let mut theta = model.params().to_vec();
            opt.step(cfg, &mut theta, &grad);
            model.set_params(&theta)?;
        }
        let m = epoch_metrics(model, train, valid, epoch, t0)?;
        if m.valid_nll < best.1 {
            best = (epoch, m.valid_nll, model.params().to_vec());
        }
        if m.valid_nll < reference - REL_IMPROVEMENT * reference.abs() {
            reference = m.valid_nll;
            wait = 0;
        } else {
            wait += 1;
        }
        trace.push(m);
        if wait >= cfg.patience {
            stopped_early = true;
            break;
        }
    }
    model.set_params(&best.2)?;
    Ok(FitReport { trace, best_epoch: best.0, best_valid_nll: best.1, stopped_early })
}

/// Runs `fit` from the same initial model once per learning rate and keeps the
/// run with the best validation NLL. Returns the chosen rate with its report.
pub fn sweep_learning_rates(
    model: &mut Model,
    train: &Dataset,
    valid: &Dataset,
    cfg: &TrainConfig,
    rates: &[f64],
) -> Result<(f64, FitReport)> {
    let init = model.params().to_vec();
    let mut best: Option<(f64, FitReport, Vec<f64>)> = None;
    for &lr in rates {
        model.set_params(&init)?;
        let run_cfg = TrainConfig { learning_rate: lr, ..cfg.clone() };
        let report = fit(model, train, valid, &run_cfg)?;
        if best.as_ref().is_none_or(|b| report.best_valid_nll < b.1.best_valid_nll) {
            best = Some((lr, report, model.params().to_vec()));
        }
    }
    let (lr, report, params) = best.ok_or_else(|| Error::InvalidArgument("no learning rates given".into()))?;
    model.set_params(&params)?;
    Ok((lr, report))
}

/// Bits per dimension of a mean log-likelihood over `d` variables.
pub fn bits_per_dim(mean_ll: f64, d: usize) -> f64 {
    -mean_ll / (d as f64 * std::f64::consts::LN_2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::region::random_binary_tree;
    use crate::tensorized::{InputFamily, LayerSpec, ModelClass};
    use crate::variable::{numbered, Domain};

    fn cfg(lr: f64) -> TrainConfig {
        TrainConfig {
            batch_size: 4,
            learning_rate: lr,
            optimizer: Adam::default(),
            patience: 5,
            max_epochs: 10,
            seed: 1,
            max_grad_norm: None,
        }
    }

    fn model(vars: &[Variable], class: ModelClass, ks: usize) -> Model {
        let spec = LayerSpec {
            sum_units: ks,
            input_units: ks,
            model_class: class,
            input_family: InputFamily::Auto,
            seed: 3,
        };
        Model::build(vars.to_vec(), random_binary_tree(vars.len(), 0).unwrap(), spec).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(cfg(0.1).validate().is_ok());
        assert!(TrainConfig { batch_size: 0, ..cfg(0.1) }.validate().is_err());
        assert!(TrainConfig { patience: 0, ..cfg(0.1) }.validate().is_err());
        assert!(cfg(f64::NAN).validate().is_err());
        let c: TrainConfig =
            serde_json::from_str(r#"{"batch_size": 2, "learning_rate": 0.1, "patience": 3, "max_epochs": 4}"#).unwrap();
        assert_eq!(c.optimizer, Adam::default());
        assert!(serde_json::from_str::<TrainConfig>(r#"{"batch_size": 2, "lr": 0.1}"#).is_err());
    }

    #[test]
    fn dataset_checks_domains() {
        let vars = numbered(2, Domain::Boolean);
        assert!(Dataset::new(&vars, vec![vec![0.0, 1.0]], Split::Train).is_ok());
        assert!(Dataset::new(&vars, vec![vec![0.0]], Split::Train).is_err());
        assert!(Dataset::new(&vars, vec![vec![0.0, 2.0]], Split::Train).is_err());
    }

    #[test]
    fn zero_learning_rate_keeps_parameters() {
        let vars = numbered(3, Domain::Boolean);
        let mut m = model(&vars, ModelClass::SquaredReal, 2);
        let before = m.params().to_vec();
        let rows: Vec<Vec<f64>> = (0..8).map(|i| (0..3).map(|k| ((i >> k) & 1) as f64).collect()).collect();
        let d = Dataset::new(&vars, rows, Split::Train).unwrap();
        let r = fit(&mut m, &d, &d, &TrainConfig { patience: 100, ..cfg(0.0) }).unwrap();
        assert_eq!(m.params(), &before[..]);
        assert_eq!(r.trace.len(), 11);
        assert!(r.trace.iter().all(|e| e.train_nll == r.trace[0].train_nll));
    }

    #[test]
    fn point_mass_is_learned() {
        let vars = numbered(1, Domain::Boolean);
        let mut m = model(&vars, ModelClass::Monotone, 1);
        let d = Dataset::new(&vars, vec![vec![1.0]; 16], Split::Train).unwrap();
        let c = TrainConfig { max_epochs: 200, patience: 200, ..cfg(0.1) };
        fit(&mut m, &d, &d, &c).unwrap();
        assert!(m.log_likelihood(&[1.0]).unwrap().exp() >= 0.99);
    }

    #[test]
    fn batch_loss_is_additive() {
        let vars = numbered(3, Domain::Boolean);
        let m = model(&vars, ModelClass::Socs { r: 3, complex: true }, 2);
        let x = vec![1.0, 0.0, 1.0];
        let (one, _) = nll_batch(&m, std::slice::from_ref(&x)).unwrap();
        let (two, lls) = nll_batch(&m, &[x.clone(), x]).unwrap();
        assert!((two - 2.0 * one).abs() < 1e-12);
        assert_eq!(lls[0], lls[1]);
        assert!(nll_batch(&m, &[]).is_err());
    }

    #[test]
    fn fit_is_deterministic() {
        let vars = numbered(4, Domain::Boolean);
        let rows: Vec<Vec<f64>> = (0..40).map(|i| (0..4).map(|k| ((i * 7 >> k) & 1) as f64).collect()).collect();
        let d = Dataset::new(&vars, rows, Split::Train).unwrap();
        let run = || {
            let mut m = model(&vars, ModelClass::SquaredComplex, 2);
            let r = fit(&mut m, &d, &d, &cfg(0.05)).unwrap();
            (r.trace.iter().map(|e| (e.train_nll, e.valid_nll)).collect::<Vec<_>>(), m.params().to_vec())
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn sweep_picks_best_rate() {
        let vars = numbered(2, Domain::Boolean);
        let d = Dataset::new(&vars, vec![vec![1.0, 0.0]; 8], Split::Train).unwrap();
        let mut m = model(&vars, ModelClass::Monotone, 1);
        let (lr, r) = sweep_learning_rates(&mut m, &d, &d, &cfg(0.0), &[0.0, 0.1]).unwrap();
        assert_eq!(lr, 0.1);
        assert!((m.mean_nll(&d.rows).unwrap() - r.best_valid_nll).abs() < 1e-12);
    }
}
