//! Hand-derived reverse-mode gradients of the batch loss, plus a
//! finite-difference verifier.
//!
//! The backward pass walks the fixed graph of the head in reverse:
//!
//! ```text
//! batch losses -> q_rescaled -> q -> P_1..P_k -> x_1..x_{k-1}
//!     -> (theta, beta1, gamma) -> activations -> affine maps
//! ```
//!
//! with `x_j = D alpha (theta - beta1 - (j-1) gamma)`. Each `x_j` appears in
//! exactly two grade probabilities (`-s(x_j)` in `P_j`, `+s(x_j)` in
//! `P_{j+1}`), which gives the adjoint `s'(x_j) (dP_{j+1} - dP_j)`.

use serde::{Deserialize, Serialize};

use crate::error::{arg, AgrmError, Result};
use crate::grm::sigmoid_prime;
use crate::head::{grade_positions, AggMode, FeaturePair, HeadOutput, HeadParams, Modality, Weights};
use crate::metrics::{self, mean_std, PlccForm, ScoreBatch};

/// Weighting and stabilization of the training objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub lambda: f64,
    pub epsilon: f64,
    pub plcc_form: PlccForm,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            epsilon: metrics::DEFAULT_EPSILON,
            plcc_form: PlccForm::Standardized,
        }
    }
}

/// One training sample: a feature pair and its target score.
pub type Sample<'a> = (&'a FeaturePair, f64);

/// Outcome of a finite-difference comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdSummary {
    pub max_rel_err: f64,
    /// Coordinate with the largest relative error.
    pub worst: String,
    pub analytic_at_worst: f64,
    pub numeric_at_worst: f64,
    pub checked: usize,
    /// Coordinates whose probes straddled a kink (MAE zero residual or relu zero).
    pub skipped: usize,
    pub step: f64,
    pub tol: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradReport {
    pub loss: f64,
    pub grads: Weights,
    /// Filled in by [`fd_check`] only.
    pub fd: Option<FdSummary>,
}

impl GradReport {
    pub fn max_rel_err(&self) -> Option<f64> {
        self.fd.as_ref().map(|f| f.max_rel_err)
    }
}

struct Forward {
    outputs: Vec<HeadOutput>,
    caches: Vec<crate::head::ForwardCache>,
    preds: Vec<f64>,
    targets: Vec<f64>,
}

fn forward_batch(hp: &HeadParams, batch: &[Sample]) -> Result<Forward> {
    let mut fw = Forward {
        outputs: Vec::with_capacity(batch.len()),
        caches: Vec::with_capacity(batch.len()),
        preds: Vec::with_capacity(batch.len()),
        targets: Vec::with_capacity(batch.len()),
    };
    for (i, (fp, mos)) in batch.iter().enumerate() {
        let (out, cache) = hp.forward_cached(fp).map_err(|e| match e {
            AgrmError::Domain(what) => AgrmError::Numeric { sample: i, what },
            other => other,
        })?;
        if !mos.is_finite() {
            return Err(AgrmError::Numeric {
                sample: i,
                what: format!("target {mos} is not finite"),
            });
        }
        fw.preds.push(out.q_rescaled);
        fw.targets.push(*mos);
        fw.outputs.push(out);
        fw.caches.push(cache);
    }
    Ok(fw)
}

/// Total loss on a batch.
pub fn batch_loss(hp: &HeadParams, batch: &[Sample], loss: &LossConfig) -> Result<f64> {
    let fw = forward_batch(hp, batch)?;
    let b = ScoreBatch::new(&fw.preds, &fw.targets)?;
    metrics::total_loss_with(&b, loss.lambda, loss.epsilon, loss.plcc_form)
}

/// Adjoint of the MAE term with respect to each prediction.
pub fn mae_grad(pred: &[f64], target: &[f64]) -> Vec<f64> {
    let n = pred.len() as f64;
    pred.iter()
        .zip(target)
        .map(|(p, t)| {
            if p > t {
                1.0 / n
            } else if p < t {
                -1.0 / n
            } else {
                0.0
            }
        })
        .collect()
}

/// Adjoint of the PLCC loss with respect to each prediction, including the
/// coupling through the batch mean, standard deviation and `rho`.
pub fn plcc_grad(pred: &[f64], target: &[f64], epsilon: f64, form: PlccForm) -> Vec<f64> {
    let n = pred.len() as f64;
    let (mu, sd) = mean_std(pred);
    let s = sd + epsilon;
    let zp: Vec<f64> = pred.iter().map(|q| (q - mu) / s).collect();
    let zt = metrics::standardize(target, epsilon);
    let second: &[f64] = match form {
        PlccForm::Standardized => &zt,
        PlccForm::Literal => target,
    };
    let rho = zp.iter().zip(&zt).map(|(a, b)| a * b).sum::<f64>() / n;
    let drho = 2.0 / n * zp.iter().zip(second).map(|(p, t)| (rho * p - t) * p).sum::<f64>();
    // adjoint with respect to the standardized predictions
    let g: Vec<f64> = (0..pred.len())
        .map(|i| {
            2.0 / n * (zp[i] - zt[i]) + 2.0 / n * rho * (rho * zp[i] - second[i]) + drho * zt[i] / n
        })
        .collect();
    let gbar = g.iter().sum::<f64>() / n;
    let spread: f64 = g.iter().zip(pred).map(|(gi, q)| gi * (q - mu)).sum();
    pred.iter()
        .zip(&g)
        .map(|(q, gj)| {
            let centred = (gj - gbar) / s;
            if sd > 0.0 {
                centred - spread / (s * s) * (q - mu) / (n * sd)
            } else {
                centred
            }
        })
        .collect()
}

/// Accumulate one sample's contribution given the adjoint of its rescaled score.
fn backward_sample(
    hp: &HeadParams,
    fp: &FeaturePair,
    out: &HeadOutput,
    cache: &crate::head::ForwardCache,
    d_score: f64,
    grads: &mut Weights,
) {
    let cfg = &hp.config;
    let k = cfg.k;
    let slope = cfg.d * cfg.alpha;
    let dq = d_score * 5.0 / (k as f64 - 1.0);
    // dP_m = m * dq, so dP_{j+1} - dP_j = dq for every threshold; kept general
    let dp: Vec<f64> = (1..=k).map(|m| m as f64 * dq).collect();

    let (mut dtheta, mut dbeta1, mut dgamma) = (0.0, 0.0, 0.0);
    for j in 1..k {
        let x = slope * (out.theta - out.beta1 - (j as f64 - 1.0) * out.gamma);
        let dx = sigmoid_prime(x) * (dp[j] - dp[j - 1]);
        dtheta += slope * dx;
        dbeta1 -= slope * dx;
        dgamma -= slope * (j as f64 - 1.0) * dx;
    }

    // ability branch
    let cols = hp.d_txt + hp.d_img;
    let add_row = |r: usize, scale: f64, grads: &mut Weights| {
        let row = &mut grads.agg_w[r * cols..(r + 1) * cols];
        for (g, x) in row.iter_mut().zip(fp.f_t.iter().chain(&fp.f_i)) {
            *g += scale * x;
        }
        grads.agg_b[r] += scale;
    };
    match cfg.agg_mode {
        AggMode::Linear => add_row(0, dtheta, grads),
        AggMode::Softmax => {
            let pos = grade_positions(k);
            let p = &cache.agg_probs;
            let dprob: Vec<f64> = pos.iter().map(|r| cfg.lambda_s * r * dtheta).collect();
            let mean: f64 = p.iter().zip(&dprob).map(|(a, b)| a * b).sum();
            for r in 0..k {
                add_row(r, p[r] * (dprob[r] - mean), grads);
            }
        }
    }

    // difficulty branch
    let dpre_beta = dbeta1 * cfg.activation.derivative(cache.pre_beta);
    let dpre_gamma = dgamma * cfg.activation.derivative(cache.pre_gamma);
    let (prior_in, temp_in) = hp.difficulty_inputs(fp);
    for (g, x) in grads.beta_w.iter_mut().zip(prior_in) {
        *g += dpre_beta * x;
    }
    grads.beta_b += dpre_beta;
    for (g, x) in grads.gamma_w.iter_mut().zip(prior_in) {
        *g += dpre_gamma * x;
    }
    grads.gamma_b += dpre_gamma;
    if cfg.modality != Modality::TempAblated {
        let dtau = dpre_beta + dpre_gamma;
        for (g, x) in grads.temp_w.iter_mut().zip(temp_in) {
            *g += dtau * x;
        }
        grads.temp_b += dtau;
    }
}

/// Loss and exact gradients of `mae + lambda * plcc` over a batch.
pub fn batch_loss_and_grads(hp: &HeadParams, batch: &[Sample], loss: &LossConfig) -> Result<GradReport> {
    if batch.len() < 2 {
        return arg(format!("batch needs at least 2 samples, got {}", batch.len()));
    }
    hp.validate()?;
    let fw = forward_batch(hp, batch)?;
    let b = ScoreBatch::new(&fw.preds, &fw.targets)?;
    let value = metrics::total_loss_with(&b, loss.lambda, loss.epsilon, loss.plcc_form)?;

    let mut d_scores = mae_grad(&fw.preds, &fw.targets);
    if loss.lambda != 0.0 {
        let pg = plcc_grad(&fw.preds, &fw.targets, loss.epsilon, loss.plcc_form);
        for (d, g) in d_scores.iter_mut().zip(pg) {
            *d += loss.lambda * g;
        }
    }

    let mut grads = Weights::zeros_like(&hp.weights);
    for (i, ((fp, _), d)) in batch.iter().zip(&d_scores).enumerate() {
        backward_sample(hp, fp, &fw.outputs[i], &fw.caches[i], *d, &mut grads);
    }
    if !grads.all_finite() {
        let bad = d_scores.iter().position(|d| !d.is_finite()).unwrap_or(0);
        return Err(AgrmError::Numeric {
            sample: bad,
            what: "gradient is not finite".into(),
        });
    }
    Ok(GradReport {
        loss: value,
        grads,
        fd: None,
    })
}

/// Loss plus the sign pattern of every non-smooth point it passes through.
fn probe(hp: &HeadParams, batch: &[Sample], loss: &LossConfig) -> Result<(f64, Vec<bool>)> {
    let fw = forward_batch(hp, batch)?;
    let b = ScoreBatch::new(&fw.preds, &fw.targets)?;
    let value = metrics::total_loss_with(&b, loss.lambda, loss.epsilon, loss.plcc_form)?;
    let mut sig: Vec<bool> = fw.preds.iter().zip(&fw.targets).map(|(p, t)| p > t).collect();
    for c in &fw.caches {
        sig.extend(c.kink_signature(hp.config.activation));
    }
    Ok((value, sig))
}

/// Compare analytic gradients against finite differences.
///
/// Each coordinate is perturbed by `+-step` and `+-step/2`; the two central
/// differences are combined by Richardson extrapolation, which cancels the
/// leading `O(step^2)` truncation term. Coordinates whose probes cross an
/// MAE or relu kink are skipped and counted. Relative error is
/// `|a - f| / max(|a|, |f|, 1e-12)`.
pub fn fd_check(
    hp: &HeadParams,
    batch: &[Sample],
    loss: &LossConfig,
    step: f64,
    tol: f64,
) -> Result<GradReport> {
    if !(step > 0.0) {
        return arg(format!("finite-difference step must be positive, got {step}"));
    }
    let mut report = batch_loss_and_grads(hp, batch, loss)?;
    let (_, base_sig) = probe(hp, batch, loss)?;
    let analytic = report.grads.to_flat();
    let names = hp.weights.names();
    let flat = hp.weights.to_flat();
    let mut probe_hp = hp.clone();

    let mut summary = FdSummary {
        max_rel_err: 0.0,
        worst: String::new(),
        analytic_at_worst: 0.0,
        numeric_at_worst: 0.0,
        checked: 0,
        skipped: 0,
        step,
        tol,
        passed: true,
    };
    let at = |i: usize, delta: f64, hp: &mut HeadParams| -> Result<(f64, Vec<bool>)> {
        let mut w = flat.clone();
        w[i] += delta;
        hp.weights.set_flat(&w);
        probe(hp, batch, loss)
    };
    for i in 0..flat.len() {
        let mut values = [0.0; 4];
        let mut kinked = false;
        for (slot, delta) in [step, -step, 0.5 * step, -0.5 * step].into_iter().enumerate() {
            let (v, sig) = at(i, delta, &mut probe_hp)?;
            kinked |= sig != base_sig;
            values[slot] = v;
        }
        if kinked {
            summary.skipped += 1;
            continue;
        }
        let wide = (values[0] - values[1]) / (2.0 * step);
        let narrow = (values[2] - values[3]) / step;
        let numeric = (4.0 * narrow - wide) / 3.0;
        let a = analytic[i];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-12);
        summary.checked += 1;
        if rel > summary.max_rel_err || summary.worst.is_empty() {
            summary.max_rel_err = rel;
            summary.worst = names[i].clone();
            summary.analytic_at_worst = a;
            summary.numeric_at_worst = numeric;
        }
    }
    summary.passed = summary.max_rel_err < tol;
    report.fd = Some(summary);
    Ok(report)
}
