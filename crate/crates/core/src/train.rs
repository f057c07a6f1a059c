//! Mini-batch training with AdamW and a cosine learning-rate schedule.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Dimension, FeatureRecord};
use crate::error::{arg, AgrmError, Result};
use crate::grad::{batch_loss_and_grads, LossConfig, Sample};
use crate::head::{head_forward, HeadParams};
use crate::metrics::{self, PlccForm};

/// Current checkpoint format version.
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Cosine period in epochs.
    pub t_max: usize,
    /// Jump back to `lr` every `t_max` epochs instead of annealing smoothly
    /// back up over the following `t_max`.
    pub restarts: bool,
    pub lambda: f64,
    pub epsilon: f64,
    pub plcc_form: PlccForm,
    pub seed: u64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::paper()
    }
}

impl TrainConfig {
    /// Reference optimizer settings, tuned for fine-tuning a large backbone.
    pub fn paper() -> Self {
        Self {
            lr: 1e-5,
            weight_decay: 1e-3,
            epochs: 100,
            batch_size: 16,
            t_max: 5,
            restarts: true,
            lambda: 1.0,
            epsilon: metrics::DEFAULT_EPSILON,
            plcc_form: PlccForm::Standardized,
            seed: 0,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
        }
    }

    /// Same protocol with a learning rate suited to a standalone head.
    pub fn recovery() -> Self {
        Self {
            lr: 1e-3,
            ..Self::paper()
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "paper" => Ok(Self::paper()),
            "recovery" => Ok(Self::recovery()),
            other => arg(format!("unknown preset {other:?}; expected paper or recovery")),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return arg(format!("learning rate must be >= 0, got {}", self.lr));
        }
        if !(self.weight_decay >= 0.0) {
            return arg("weight decay must be >= 0");
        }
        if self.batch_size < 2 {
            return arg("batch size must be >= 2");
        }
        if self.epochs == 0 || self.t_max == 0 {
            return arg("epochs and t_max must be >= 1");
        }
        if !(self.lambda >= 0.0 && self.epsilon > 0.0) {
            return arg("lambda must be >= 0 and epsilon > 0");
        }
        Ok(())
    }

    pub fn loss(&self) -> LossConfig {
        LossConfig {
            lambda: self.lambda,
            epsilon: self.epsilon,
            plcc_form: self.plcc_form,
        }
    }
}

/// Cosine annealing to zero with warm restarts every `t_max` epochs.
pub fn cosine_lr(epoch: usize, base_lr: f64, t_max: usize) -> f64 {
    cosine_lr_with(epoch, base_lr, t_max, true)
}

/// Without restarts the schedule follows `(1 + cos(pi t / t_max)) / 2` and
/// climbs back up after reaching zero at `t_max`.
pub fn cosine_lr_with(epoch: usize, base_lr: f64, t_max: usize, restarts: bool) -> f64 {
    let t_max = t_max.max(1);
    let t = if restarts { epoch % t_max } else { epoch };
    base_lr * 0.5 * (1.0 + (PI * t as f64 / t_max as f64).cos())
}

/// First and second moment estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
        }
    }
}

/// One AdamW update in place: decoupled decay `w -= lr * wd * w`, then the
/// bias-corrected adaptive step.
pub fn adamw_step(params: &mut [f64], grads: &[f64], state: &mut AdamState, lr: f64, cfg: &TrainConfig) {
    assert_eq!(params.len(), grads.len(), "parameter/gradient length mismatch");
    assert_eq!(params.len(), state.m.len(), "optimizer state length mismatch");
    state.step += 1;
    let (b1, b2) = (cfg.adam_beta1, cfg.adam_beta2);
    let c1 = 1.0 - b1.powi(state.step as i32);
    let c2 = 1.0 - b2.powi(state.step as i32);
    for i in 0..params.len() {
        params[i] -= lr * cfg.weight_decay * params[i];
        let g = grads[i];
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g;
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g;
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + cfg.adam_eps);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub eval_srcc: f64,
    pub eval_plcc: f64,
    /// Forward passes this epoch whose gamma fell at or below the unimodality threshold.
    pub below_threshold: usize,
}

/// Where the shuffling stream stands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RngState {
    pub algorithm: String,
    pub seed: u64,
    pub shuffles: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub head: HeadParams,
    pub config: TrainConfig,
    pub history: Vec<EpochRecord>,
    pub rng: RngState,
}

impl Checkpoint {
    /// A checkpoint wrapping an untrained head.
    pub fn from_head(head: HeadParams, config: TrainConfig) -> Self {
        Self {
            version: CHECKPOINT_VERSION,
            head,
            config,
            history: Vec::new(),
            rng: RngState {
                algorithm: "chacha8".into(),
                seed: config.seed,
                shuffles: 0,
            },
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Probe {
            version: u32,
        }
        let probe: Probe = serde_json::from_str(text)?;
        if probe.version != CHECKPOINT_VERSION {
            return Err(AgrmError::Version(probe.version));
        }
        let ckpt: Checkpoint = serde_json::from_str(text)?;
        ckpt.head.validate()?;
        if ckpt.history.len() > ckpt.config.epochs {
            return Err(AgrmError::Schema("history longer than configured epochs".into()));
        }
        Ok(ckpt)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Per-epoch history as CSV with a header row.
    pub fn history_csv(&self) -> String {
        let mut s = String::from("epoch,lr,train_loss,eval_srcc,eval_plcc,below_threshold\n");
        for h in &self.history {
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                h.epoch,
                crate::cli::sig9(h.lr),
                crate::cli::sig9(h.train_loss),
                crate::cli::sig9(h.eval_srcc),
                crate::cli::sig9(h.eval_plcc),
                h.below_threshold
            ));
        }
        s
    }
}

/// Correlation of predictions against MOS on a record set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalScores {
    pub n: usize,
    pub srcc: f64,
    pub plcc: f64,
    /// One side had zero variance; the correlations are reported as 0.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub overall: EvalScores,
    pub per_dim: BTreeMap<Dimension, EvalScores>,
}

fn scores(preds: &[f64], mos: &[f64]) -> Result<EvalScores> {
    let s = metrics::srcc_checked(preds, mos)?;
    let p = metrics::plcc_checked(preds, mos)?;
    Ok(EvalScores {
        n: preds.len(),
        srcc: s.value,
        plcc: p.value,
        degenerate: s.degenerate || p.degenerate,
    })
}

/// Predicted rescaled score for every record, in order.
pub fn predict(head: &HeadParams, records: &[FeatureRecord]) -> Result<Vec<f64>> {
    records
        .iter()
        .map(|r| head_forward(head, &r.features).map(|o| o.q_rescaled))
        .collect()
}

/// SRCC/PLCC overall and for every dimension with at least two records.
pub fn evaluate_head(head: &HeadParams, records: &[FeatureRecord]) -> Result<EvalReport> {
    if records.len() < 2 {
        return arg(format!("evaluation needs at least 2 records, got {}", records.len()));
    }
    let preds = predict(head, records)?;
    let mos: Vec<f64> = records.iter().map(|r| r.mos).collect();
    let overall = scores(&preds, &mos)?;
    let mut per_dim = BTreeMap::new();
    for dim in Dimension::ALL {
        let (p, m): (Vec<f64>, Vec<f64>) = records
            .iter()
            .zip(&preds)
            .filter(|(r, _)| r.dim == dim)
            .map(|(r, p)| (*p, r.mos))
            .unzip();
        if p.len() >= 2 {
            per_dim.insert(dim, scores(&p, &m)?);
        }
    }
    Ok(EvalReport { overall, per_dim })
}

pub fn evaluate(ckpt: &Checkpoint, records: &[FeatureRecord]) -> Result<EvalReport> {
    evaluate_head(&ckpt.head, records)
}

/// Train `head_init` on `train_set`, evaluating on `eval_set` after every epoch.
pub fn train(
    cfg: &TrainConfig,
    train_set: &[FeatureRecord],
    eval_set: &[FeatureRecord],
    head_init: HeadParams,
) -> Result<Checkpoint> {
    cfg.validate()?;
    head_init.validate()?;
    if train_set.is_empty() || eval_set.is_empty() {
        return arg("training and evaluation sets must be non-empty");
    }
    if train_set.len() < cfg.batch_size {
        return arg(format!(
            "training set has {} records, fewer than batch size {}",
            train_set.len(),
            cfg.batch_size
        ));
    }
    if eval_set.len() < 2 {
        return arg("evaluation set needs at least 2 records");
    }
    let loss_cfg = cfg.loss();
    let mut ckpt = Checkpoint::from_head(head_init, *cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut flat = ckpt.head.weights.to_flat();
    let mut state = AdamState::new(flat.len());
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    for epoch in 0..cfg.epochs {
        let lr = cosine_lr_with(epoch, cfg.lr, cfg.t_max, cfg.restarts);
        order.shuffle(&mut rng);
        ckpt.rng.shuffles += 1;
        let (mut loss_sum, mut batches, mut below) = (0.0, 0usize, 0usize);
        for chunk in order.chunks(cfg.batch_size) {
            if chunk.len() < 2 {
                continue;
            }
            let batch: Vec<Sample> = chunk
                .iter()
                .map(|&i| (&train_set[i].features, train_set[i].mos))
                .collect();
            for (fp, _) in &batch {
                if head_forward(&ckpt.head, fp)?.below_threshold {
                    below += 1;
                }
            }
            let report = batch_loss_and_grads(&ckpt.head, &batch, &loss_cfg)?;
            adamw_step(&mut flat, &report.grads.to_flat(), &mut state, lr, cfg);
            ckpt.head.weights.set_flat(&flat);
            loss_sum += report.loss;
            batches += 1;
        }
        let eval = evaluate_head(&ckpt.head, eval_set)?;
        ckpt.history.push(EpochRecord {
            epoch,
            lr,
            train_loss: loss_sum / batches.max(1) as f64,
            eval_srcc: eval.overall.srcc,
            eval_plcc: eval.overall.plcc,
            below_threshold: below,
        });
    }
    Ok(ckpt)
}
