//! Two-branch grading head.
//!
//! The ability branch maps a feature pair to `theta`. The difficulty branch
//! projects the text feature to priors `beta1_T`, `gamma_T`, the image
//! feature to a temperature `tau`, and combines them through an activation:
//!
//! ```text
//! beta1 = act(beta1_T + tau)
//! gamma = act(gamma_T + tau) + eta
//! ```
//!
//! The grade distribution is then the arithmetic GRM at
//! `(theta, beta1, gamma)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{arg, AgrmError, Result};
use crate::grm::{self, ProbVector};

/// Minimum of `x tanh(e^x)`, attained near `x = -1.07886`.
pub const TELU_MIN: f64 = -0.353_285_777_848_211_3;

/// `x * tanh(exp(x))`.
pub fn telu(x: f64) -> f64 {
    // tanh(e^x) == 1.0 in f64 once e^x > 19.1
    if x > 3.0 {
        x
    } else {
        x * x.exp().tanh()
    }
}

/// Derivative of [`telu`].
pub fn telu_prime(x: f64) -> f64 {
    if x > 3.0 {
        return 1.0;
    }
    let e = x.exp();
    let sech = 1.0 / e.cosh();
    e.tanh() + x * e * sech * sech
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Activation applied to the modulated difficulty priors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Telu,
    Sigmoid,
    Relu,
    Softplus,
}

impl Activation {
    pub const ALL: [Activation; 4] = [
        Activation::Telu,
        Activation::Sigmoid,
        Activation::Relu,
        Activation::Softplus,
    ];

    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Telu => telu(x),
            Activation::Sigmoid => grm::sigmoid(x),
            Activation::Relu => x.max(0.0),
            Activation::Softplus => softplus(x),
        }
    }

    /// Derivative; the relu kink at zero gets 0.
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Telu => telu_prime(x),
            Activation::Sigmoid => grm::sigmoid_prime(x),
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Softplus => grm::sigmoid(x),
        }
    }

    /// Greatest lower bound over the real line.
    pub fn lower_bound(self) -> f64 {
        match self {
            Activation::Telu => TELU_MIN,
            _ => 0.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Telu => "telu",
            Activation::Sigmoid => "sigmoid",
            Activation::Relu => "relu",
            Activation::Softplus => "softplus",
        }
    }

    fn has_kink(self) -> bool {
        self == Activation::Relu
    }
}

/// How the ability branch turns features into `theta`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum AggMode {
    /// Affine map on `[f_t; f_i]`, used unscaled.
    Linear,
    /// Per-grade logits, softmax, expected normalized grade position, times `lambda_s`.
    Softmax,
}

/// Which features feed the difficulty branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Modality {
    /// Text priors modulated by an image temperature.
    Joint,
    /// Image feature replaces the text feature in the prior projections.
    ImageOnly,
    /// Text feature replaces the image feature in the temperature.
    TextOnly,
    /// No temperature: priors go straight through the activation.
    TempAblated,
}

/// Fixed hyperparameters of a head.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeadConfig {
    pub k: usize,
    pub d: f64,
    pub alpha: f64,
    pub lambda_s: f64,
    pub eta: f64,
    pub activation: Activation,
    pub agg_mode: AggMode,
    pub modality: Modality,
}

impl Default for HeadConfig {
    fn default() -> Self {
        Self {
            k: grm::DEFAULT_K,
            d: grm::DEFAULT_D,
            alpha: grm::DEFAULT_ALPHA,
            lambda_s: 10.0,
            eta: 1.2,
            activation: Activation::Telu,
            agg_mode: AggMode::Linear,
            modality: Modality::Joint,
        }
    }
}

impl HeadConfig {
    pub fn validate(&self) -> Result<()> {
        grm::gamma_threshold(self.d, self.alpha)?;
        if self.k < 2 {
            return arg(format!("grade count k must be >= 2, got {}", self.k));
        }
        if !(self.eta.is_finite() && self.eta > 0.0) {
            return arg(format!("eta must be positive, got {}", self.eta));
        }
        if !(self.lambda_s.is_finite() && self.lambda_s > 0.0) {
            return arg(format!("lambda_s must be positive, got {}", self.lambda_s));
        }
        Ok(())
    }

    /// Smallest `gamma` the difficulty branch can emit.
    pub fn gamma_floor(&self) -> f64 {
        self.eta + self.activation.lower_bound()
    }

    /// Whether every output is guaranteed to satisfy the unimodality condition.
    pub fn guarantees_unimodal(&self) -> bool {
        grm::gamma_threshold(self.d, self.alpha).is_ok_and(|t| self.gamma_floor() > t)
    }
}

/// One image/text feature pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeaturePair {
    #[serde(rename = "fi")]
    pub f_i: Vec<f64>,
    #[serde(rename = "ft")]
    pub f_t: Vec<f64>,
}

impl FeaturePair {
    pub fn new(f_i: Vec<f64>, f_t: Vec<f64>) -> Self {
        Self { f_i, f_t }
    }
}

/// Learnable weights, laid out identically for parameters and gradients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    /// Row-major, `rows x (d_txt + d_img)`; one row in linear mode, `k` in softmax mode.
    pub agg_w: Vec<f64>,
    pub agg_b: Vec<f64>,
    pub beta_w: Vec<f64>,
    pub beta_b: f64,
    pub gamma_w: Vec<f64>,
    pub gamma_b: f64,
    pub temp_w: Vec<f64>,
    pub temp_b: f64,
}

impl Weights {
    pub fn zeros_like(other: &Weights) -> Self {
        Self {
            agg_w: vec![0.0; other.agg_w.len()],
            agg_b: vec![0.0; other.agg_b.len()],
            beta_w: vec![0.0; other.beta_w.len()],
            beta_b: 0.0,
            gamma_w: vec![0.0; other.gamma_w.len()],
            gamma_b: 0.0,
            temp_w: vec![0.0; other.temp_w.len()],
            temp_b: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.agg_w.len() + self.agg_b.len() + self.beta_w.len() + self.gamma_w.len() + self.temp_w.len() + 3
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Flat view in a fixed order: agg_w, agg_b, beta_w, beta_b, gamma_w,
    /// gamma_b, temp_w, temp_b.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.len());
        v.extend_from_slice(&self.agg_w);
        v.extend_from_slice(&self.agg_b);
        v.extend_from_slice(&self.beta_w);
        v.push(self.beta_b);
        v.extend_from_slice(&self.gamma_w);
        v.push(self.gamma_b);
        v.extend_from_slice(&self.temp_w);
        v.push(self.temp_b);
        v
    }

    /// Inverse of [`Weights::to_flat`]; `flat` must have [`Weights::len`] entries.
    pub fn set_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.len(), "flat weight length mismatch");
        let mut rest = flat;
        let mut take = |dst: &mut [f64]| {
            let (head, tail) = rest.split_at(dst.len());
            dst.copy_from_slice(head);
            rest = tail;
        };
        take(&mut self.agg_w);
        take(&mut self.agg_b);
        take(&mut self.beta_w);
        take(std::slice::from_mut(&mut self.beta_b));
        take(&mut self.gamma_w);
        take(std::slice::from_mut(&mut self.gamma_b));
        take(&mut self.temp_w);
        take(std::slice::from_mut(&mut self.temp_b));
    }

    /// Field name of every flat coordinate, e.g. `beta_w[3]`.
    pub fn names(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.len());
        let mut push_vec = |name: &str, n: usize| out.extend((0..n).map(|i| format!("{name}[{i}]")));
        push_vec("agg_w", self.agg_w.len());
        push_vec("agg_b", self.agg_b.len());
        push_vec("beta_w", self.beta_w.len());
        out.push("beta_b".into());
        out.extend((0..self.gamma_w.len()).map(|i| format!("gamma_w[{i}]")));
        out.push("gamma_b".into());
        out.extend((0..self.temp_w.len()).map(|i| format!("temp_w[{i}]")));
        out.push("temp_b".into());
        out
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, other: &Weights, scale: f64) {
        fn axpy(a: &mut [f64], b: &[f64], s: f64) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += s * y;
            }
        }
        axpy(&mut self.agg_w, &other.agg_w, scale);
        axpy(&mut self.agg_b, &other.agg_b, scale);
        axpy(&mut self.beta_w, &other.beta_w, scale);
        self.beta_b += scale * other.beta_b;
        axpy(&mut self.gamma_w, &other.gamma_w, scale);
        self.gamma_b += scale * other.gamma_b;
        axpy(&mut self.temp_w, &other.temp_w, scale);
        self.temp_b += scale * other.temp_b;
    }

    pub fn all_finite(&self) -> bool {
        self.to_flat().iter().all(|x| x.is_finite())
    }
}

/// A complete head: hyperparameters, input dimensions and weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadParams {
    pub config: HeadConfig,
    pub d_img: usize,
    pub d_txt: usize,
    pub weights: Weights,
}

/// Everything computed by one forward pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadOutput {
    pub theta: f64,
    pub beta1_prior: f64,
    pub gamma_prior: f64,
    pub tau: f64,
    pub beta1: f64,
    pub gamma: f64,
    pub probs: ProbVector,
    pub q: f64,
    pub q_rescaled: f64,
    /// `gamma` is at or below `2 ln 2 / (D alpha)`, so unimodality is not guaranteed.
    pub below_threshold: bool,
}

/// Intermediates kept for the backward pass.
#[derive(Debug, Clone)]
pub(crate) struct ForwardCache {
    /// Softmax probabilities of the ability logits (softmax mode only).
    pub agg_probs: Vec<f64>,
    pub pre_beta: f64,
    pub pre_gamma: f64,
}

impl ForwardCache {
    /// Signs of every relu pre-activation; used to detect kinks.
    pub(crate) fn kink_signature(&self, act: Activation) -> [bool; 2] {
        if act.has_kink() {
            [self.pre_beta > 0.0, self.pre_gamma > 0.0]
        } else {
            [false; 2]
        }
    }
}

impl HeadParams {
    /// Number of rows of the aggregation layer.
    pub fn agg_rows(&self) -> usize {
        agg_rows(&self.config)
    }

    pub fn prior_dim(&self) -> usize {
        match self.config.modality {
            Modality::ImageOnly => self.d_img,
            _ => self.d_txt,
        }
    }

    pub fn temp_dim(&self) -> usize {
        match self.config.modality {
            Modality::TextOnly => self.d_txt,
            _ => self.d_img,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        if self.d_img == 0 || self.d_txt == 0 {
            return arg("feature dimensions must be positive");
        }
        let w = &self.weights;
        let cols = self.d_img + self.d_txt;
        let rows = self.agg_rows();
        let shapes = [
            ("agg_w", w.agg_w.len(), rows * cols),
            ("agg_b", w.agg_b.len(), rows),
            ("beta_w", w.beta_w.len(), self.prior_dim()),
            ("gamma_w", w.gamma_w.len(), self.prior_dim()),
            ("temp_w", w.temp_w.len(), self.temp_dim()),
        ];
        for (name, got, want) in shapes {
            if got != want {
                return arg(format!("{name} has {got} entries, expected {want}"));
            }
        }
        if !w.all_finite() {
            return arg("weights must be finite");
        }
        Ok(())
    }

    fn check_pair(&self, fp: &FeaturePair) -> Result<()> {
        if fp.f_i.len() != self.d_img || fp.f_t.len() != self.d_txt {
            return arg(format!(
                "feature dimensions ({}, {}) do not match head ({}, {})",
                fp.f_i.len(),
                fp.f_t.len(),
                self.d_img,
                self.d_txt
            ));
        }
        if fp.f_i.iter().chain(&fp.f_t).any(|x| !x.is_finite()) {
            return arg("features must be finite");
        }
        Ok(())
    }

    /// Inputs to the prior projections and to the temperature.
    pub(crate) fn difficulty_inputs<'a>(&self, fp: &'a FeaturePair) -> (&'a [f64], &'a [f64]) {
        match self.config.modality {
            Modality::ImageOnly => (&fp.f_i, &fp.f_i),
            Modality::TextOnly => (&fp.f_t, &fp.f_t),
            Modality::Joint | Modality::TempAblated => (&fp.f_t, &fp.f_i),
        }
    }

    /// `(theta, softmax probabilities)`; the second is empty in linear mode.
    pub(crate) fn ability_inner(&self, fp: &FeaturePair) -> (f64, Vec<f64>) {
        let cols = self.d_txt + self.d_img;
        let w = &self.weights;
        let logit = |r: usize| {
            let row = &w.agg_w[r * cols..(r + 1) * cols];
            dot(&row[..self.d_txt], &fp.f_t) + dot(&row[self.d_txt..], &fp.f_i) + w.agg_b[r]
        };
        match self.config.agg_mode {
            AggMode::Linear => (logit(0), Vec::new()),
            AggMode::Softmax => {
                let k = self.config.k;
                let logits: Vec<f64> = (0..k).map(logit).collect();
                let probs = softmax(&logits);
                let pos = grade_positions(k);
                (self.config.lambda_s * dot(&probs, &pos), probs)
            }
        }
    }

    /// `(beta1_prior, gamma_prior, tau)`.
    pub(crate) fn difficulty_inner(&self, fp: &FeaturePair) -> (f64, f64, f64) {
        let (prior_in, temp_in) = self.difficulty_inputs(fp);
        let w = &self.weights;
        let beta_prior = dot(&w.beta_w, prior_in) + w.beta_b;
        let gamma_prior = dot(&w.gamma_w, prior_in) + w.gamma_b;
        let tau = dot(&w.temp_w, temp_in) + w.temp_b;
        (beta_prior, gamma_prior, tau)
    }

    pub(crate) fn forward_cached(&self, fp: &FeaturePair) -> Result<(HeadOutput, ForwardCache)> {
        self.check_pair(fp)?;
        let cfg = &self.config;
        let (theta, agg_probs) = self.ability_inner(fp);
        let (beta1_prior, gamma_prior, tau) = self.difficulty_inner(fp);
        let shift = if cfg.modality == Modality::TempAblated { 0.0 } else { tau };
        let pre_beta = beta1_prior + shift;
        let pre_gamma = gamma_prior + shift;
        let beta1 = cfg.activation.apply(pre_beta);
        let gamma = cfg.activation.apply(pre_gamma) + cfg.eta;
        if !(theta.is_finite() && beta1.is_finite() && gamma.is_finite()) {
            return Err(AgrmError::Domain(format!(
                "non-finite head state: theta={theta}, beta1={beta1}, gamma={gamma}"
            )));
        }
        if gamma <= 0.0 {
            return Err(AgrmError::Domain(format!(
                "gamma = {gamma} <= 0 violates the ordered-threshold constraint; \
                 eta = {} is too small for activation {}",
                cfg.eta,
                cfg.activation.name()
            )));
        }
        let threshold = grm::gamma_threshold(cfg.d, cfg.alpha)?;
        let raw = grm::agrm_probs_raw(theta, beta1, gamma, cfg.d * cfg.alpha, cfg.k);
        let probs = ProbVector::new(raw)?;
        let q = grm::expected_score(&probs);
        let q_rescaled = grm::rescale_score(q, cfg.k)?;
        let out = HeadOutput {
            theta,
            beta1_prior,
            gamma_prior,
            tau,
            beta1,
            gamma,
            probs,
            q,
            q_rescaled,
            below_threshold: gamma <= threshold,
        };
        let cache = ForwardCache {
            agg_probs,
            pre_beta,
            pre_gamma,
        };
        Ok((out, cache))
    }
}

fn agg_rows(cfg: &HeadConfig) -> usize {
    match cfg.agg_mode {
        AggMode::Linear => 1,
        AggMode::Softmax => cfg.k,
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Normalized grade positions `j / (k - 1)` for `j = 0..k`.
pub(crate) fn grade_positions(k: usize) -> Vec<f64> {
    (0..k).map(|j| j as f64 / (k as f64 - 1.0)).collect()
}

/// Ability `theta` for one feature pair.
pub fn ability_forward(hp: &HeadParams, fp: &FeaturePair) -> Result<f64> {
    hp.check_pair(fp)?;
    Ok(hp.ability_inner(fp).0)
}

/// Final `(beta1, gamma)` for one feature pair.
pub fn difficulty_forward(hp: &HeadParams, fp: &FeaturePair) -> Result<(f64, f64)> {
    hp.check_pair(fp)?;
    let cfg = &hp.config;
    let (bp, gp, tau) = hp.difficulty_inner(fp);
    let shift = if cfg.modality == Modality::TempAblated { 0.0 } else { tau };
    Ok((
        cfg.activation.apply(bp + shift),
        cfg.activation.apply(gp + shift) + cfg.eta,
    ))
}

/// Full forward pass: ability, difficulty, grade distribution and score.
pub fn head_forward(hp: &HeadParams, fp: &FeaturePair) -> Result<HeadOutput> {
    hp.forward_cached(fp).map(|(out, _)| out)
}

/// Fresh head with uniform `+-1/sqrt(fan_in)` weights.
///
/// Biases are zero except the gamma projection's, which is raised so that
/// the centre of the initial `gamma` distribution sits half a unit above
/// the unimodality threshold.
pub fn init_head(d_img: usize, d_txt: usize, config: HeadConfig, seed: u64) -> Result<HeadParams> {
    config.validate()?;
    if d_img == 0 || d_txt == 0 {
        return arg("feature dimensions must be positive");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = agg_rows(&config);
    let mut hp = HeadParams {
        config,
        d_img,
        d_txt,
        weights: Weights {
            agg_w: Vec::new(),
            agg_b: vec![0.0; rows],
            beta_w: Vec::new(),
            beta_b: 0.0,
            gamma_w: Vec::new(),
            gamma_b: 0.0,
            temp_w: Vec::new(),
            temp_b: 0.0,
        },
    };
    let mut draw = |n: usize, fan_in: usize| -> Vec<f64> {
        let scale = 1.0 / (fan_in as f64).sqrt();
        (0..n).map(|_| rng.random_range(-scale..scale)).collect()
    };
    let cols = d_img + d_txt;
    let (prior_dim, temp_dim) = (hp.prior_dim(), hp.temp_dim());
    hp.weights.agg_w = draw(rows * cols, cols);
    hp.weights.beta_w = draw(prior_dim, prior_dim);
    hp.weights.gamma_w = draw(prior_dim, prior_dim);
    hp.weights.temp_w = draw(temp_dim, temp_dim);
    hp.weights.gamma_b = initial_gamma_bias(&config)?;
    Ok(hp)
}

fn initial_gamma_bias(cfg: &HeadConfig) -> Result<f64> {
    let act = cfg.activation;
    let target = grm::gamma_threshold(cfg.d, cfg.alpha)? + 0.5 - cfg.eta;
    if act.apply(0.0) >= target {
        return Ok(0.0);
    }
    // every activation here is increasing on [0, inf); sigmoid saturates at 1
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    while act.apply(hi) < target {
        if hi > 1e3 {
            return Ok(hi);
        }
        hi *= 2.0;
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if act.apply(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}
