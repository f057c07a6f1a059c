//! Training losses and correlation metrics.

use crate::error::{arg, Result};

/// Default standardization guard for the PLCC loss.
pub const DEFAULT_EPSILON: f64 = 1e-8;

/// Predicted (rescaled) scores paired with ground-truth MOS.
#[derive(Debug, Clone, Copy)]
pub struct ScoreBatch<'a> {
    pub predicted: &'a [f64],
    pub target: &'a [f64],
}

impl<'a> ScoreBatch<'a> {
    pub fn new(predicted: &'a [f64], target: &'a [f64]) -> Result<Self> {
        if predicted.len() != target.len() {
            return arg(format!(
                "predicted has {} entries, target has {}",
                predicted.len(),
                target.len()
            ));
        }
        if predicted.iter().chain(target).any(|x| !x.is_finite()) {
            return arg("scores must be finite");
        }
        Ok(Self { predicted, target })
    }

    pub fn len(&self) -> usize {
        self.predicted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.predicted.is_empty()
    }
}

/// Form of the second PLCC-loss term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlccForm {
    /// `||rho * z_pred - z_target||^2`, both sides standardized.
    #[default]
    Standardized,
    /// `||rho * z_pred - target||^2` with the raw target.
    Literal,
}

pub fn mae_loss(b: &ScoreBatch) -> f64 {
    if b.is_empty() {
        return 0.0;
    }
    let total: f64 = b.predicted.iter().zip(b.target).map(|(p, t)| (p - t).abs()).sum();
    total / b.len() as f64
}

/// Mean and population standard deviation.
pub(crate) fn mean_std(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub(crate) fn standardize(x: &[f64], epsilon: f64) -> Vec<f64> {
    let (mean, std) = mean_std(x);
    x.iter().map(|v| (v - mean) / (std + epsilon)).collect()
}

/// Batch PLCC loss with the standardized second term.
pub fn plcc_loss(b: &ScoreBatch, epsilon: f64) -> Result<f64> {
    plcc_loss_with(b, epsilon, PlccForm::Standardized)
}

pub fn plcc_loss_with(b: &ScoreBatch, epsilon: f64, form: PlccForm) -> Result<f64> {
    if b.len() < 2 {
        return arg(format!("PLCC loss needs a batch of at least 2, got {}", b.len()));
    }
    if !(epsilon > 0.0) {
        return arg(format!("epsilon must be positive, got {epsilon}"));
    }
    let n = b.len() as f64;
    let zp = standardize(b.predicted, epsilon);
    let zt = standardize(b.target, epsilon);
    let rho = zp.iter().zip(&zt).map(|(p, t)| p * t).sum::<f64>() / n;
    let second_target: &[f64] = match form {
        PlccForm::Standardized => &zt,
        PlccForm::Literal => b.target,
    };
    let first: f64 = zp.iter().zip(&zt).map(|(p, t)| (p - t) * (p - t)).sum();
    let second: f64 = zp
        .iter()
        .zip(second_target)
        .map(|(p, t)| (rho * p - t) * (rho * p - t))
        .sum();
    Ok((first + second) / n)
}

/// `mae + lambda * plcc`.
pub fn total_loss(b: &ScoreBatch, lambda: f64, epsilon: f64) -> Result<f64> {
    total_loss_with(b, lambda, epsilon, PlccForm::Standardized)
}

pub fn total_loss_with(b: &ScoreBatch, lambda: f64, epsilon: f64, form: PlccForm) -> Result<f64> {
    if !(lambda >= 0.0) {
        return arg(format!("lambda must be non-negative, got {lambda}"));
    }
    let plcc = if lambda == 0.0 {
        0.0
    } else {
        plcc_loss_with(b, epsilon, form)?
    };
    Ok(mae_loss(b) + lambda * plcc)
}

/// A correlation value plus a flag set when one side had zero variance
/// (the value is then reported as 0).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correlation {
    pub value: f64,
    pub degenerate: bool,
}

fn check_pair(pred: &[f64], target: &[f64]) -> Result<()> {
    if pred.len() != target.len() {
        return arg(format!("length mismatch: {} vs {}", pred.len(), target.len()));
    }
    if pred.len() < 2 {
        return arg("correlation needs at least 2 points");
    }
    if pred.iter().chain(target).any(|x| x.is_nan()) {
        return arg("correlation inputs contain NaN");
    }
    Ok(())
}

fn pearson(x: &[f64], y: &[f64]) -> Correlation {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Correlation {
            value: 0.0,
            degenerate: true,
        };
    }
    Correlation {
        value: (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0),
        degenerate: false,
    }
}

/// 1-based ranks with ties sharing their average rank.
pub fn mid_ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i + 1;
        while j < idx.len() && x[idx[j]] == x[idx[i]] {
            j += 1;
        }
        // positions i..j share rank (i+1 + j) / 2
        let r = (i + 1 + j) as f64 / 2.0;
        for &k in &idx[i..j] {
            ranks[k] = r;
        }
        i = j;
    }
    ranks
}

/// Spearman rank-order correlation with mid-rank tie handling.
pub fn srcc_checked(pred: &[f64], target: &[f64]) -> Result<Correlation> {
    check_pair(pred, target)?;
    Ok(pearson(&mid_ranks(pred), &mid_ranks(target)))
}

/// Pearson linear correlation.
pub fn plcc_checked(pred: &[f64], target: &[f64]) -> Result<Correlation> {
    check_pair(pred, target)?;
    Ok(pearson(pred, target))
}

pub fn srcc(pred: &[f64], target: &[f64]) -> Result<f64> {
    srcc_checked(pred, target).map(|c| c.value)
}

pub fn plcc_metric(pred: &[f64], target: &[f64]) -> Result<f64> {
    plcc_checked(pred, target).map(|c| c.value)
}
