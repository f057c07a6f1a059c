//! Command implementations for the `agrm` binary.
//!
//! Exit codes: 0 success, 1 a verification or gradient check failed,
//! 2 bad usage or input. Every command accepts `--json` for a single
//! machine-readable JSON document on stdout.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::data::{self, Dimension, SynthConfig};
use crate::error::{AgrmError, Result};
use crate::grad::{fd_check, LossConfig, Sample};
use crate::grm::{self, AgrmParams, ProbVector};
use crate::head::{init_head, Activation, AggMode, FeaturePair, HeadConfig, Modality};
use crate::metrics::PlccForm;
use crate::train::{self, Checkpoint, TrainConfig};

/// Write to stdout, ignoring a closed pipe so `agrm ... | head` exits cleanly.
macro_rules! out {
    ($($arg:tt)*) => {{
        let _ = write!(std::io::stdout(), $($arg)*);
    }};
}

macro_rules! outln {
    ($($arg:tt)*) => {{
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Format with 9 significant digits, switching to scientific notation
/// outside `[1e-5, 1e9)`.
pub fn sig9(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".into() } else { x.to_string() };
    }
    let sci = format!("{x:.8e}");
    let exp: i32 = sci[sci.find('e').unwrap() + 1..].parse().unwrap();
    if (-5..9).contains(&exp) {
        format!("{:.*}", (8 - exp) as usize, x)
    } else {
        sci
    }
}

#[derive(Debug, Parser)]
#[command(name = "agrm", version, about = "Arithmetic graded response model toolkit")]
pub struct Cli {
    /// Emit one JSON document instead of the human-readable report.
    #[arg(long, global = true)]
    pub json: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Grade distribution and derived quantities at one parameter point.
    Probe(ProbeArgs),
    /// Category curves over a range of abilities, as CSV.
    Curves(CurvesArgs),
    /// Randomized check of unimodality, shift, boundary and score properties.
    Verify(VerifyArgs),
    /// Generate a synthetic dataset from a planted head.
    Synth(SynthArgs),
    /// Train a head on a record file.
    Train(TrainArgs),
    /// Score a checkpoint against a record file.
    Eval(EvalArgs),
    /// Compare analytic gradients with finite differences.
    FdCheck(FdCheckArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    #[arg(long, default_value_t = grm::DEFAULT_D)]
    pub d: f64,
    #[arg(long, default_value_t = grm::DEFAULT_ALPHA)]
    pub alpha: f64,
    #[arg(long, default_value_t = grm::DEFAULT_K)]
    pub k: usize,
}

#[derive(Debug, Clone, Args)]
pub struct HeadArgs {
    #[arg(long, default_value_t = grm::DEFAULT_K)]
    pub k: usize,
    #[arg(long, default_value_t = grm::DEFAULT_D)]
    pub d: f64,
    #[arg(long, default_value_t = grm::DEFAULT_ALPHA)]
    pub alpha: f64,
    #[arg(long, default_value_t = 10.0)]
    pub lambda_s: f64,
    #[arg(long, default_value_t = 1.2)]
    pub eta: f64,
    #[arg(long, value_enum, default_value_t = Activation::Telu)]
    pub activation: Activation,
    #[arg(long, value_enum, default_value_t = AggMode::Linear)]
    pub agg: AggMode,
    #[arg(long, value_enum, default_value_t = Modality::Joint)]
    pub modality: Modality,
}

impl HeadArgs {
    pub fn config(&self) -> HeadConfig {
        HeadConfig {
            k: self.k,
            d: self.d,
            alpha: self.alpha,
            lambda_s: self.lambda_s,
            eta: self.eta,
            activation: self.activation,
            agg_mode: self.agg,
            modality: self.modality,
        }
    }
}

#[derive(Debug, Args)]
pub struct ProbeArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub theta: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub beta1: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub gamma: f64,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Args)]
pub struct CurvesArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub beta1: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub gamma: f64,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Defaults to beta1 - 4 gamma K.
    #[arg(long, allow_hyphen_values = true)]
    pub theta_min: Option<f64>,
    /// Defaults to beta1 + 4 gamma K.
    #[arg(long, allow_hyphen_values = true)]
    pub theta_max: Option<f64>,
    #[arg(long, default_value_t = 512)]
    pub steps: usize,
    /// Output CSV path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 2)]
    pub k_min: usize,
    #[arg(long, default_value_t = 9)]
    pub k_max: usize,
    /// Gamma is drawn from (threshold, threshold + margin].
    #[arg(long, default_value_t = 10.0)]
    pub gamma_margin: f64,
    /// How far beyond the outer thresholds theta is drawn.
    #[arg(long, default_value_t = 20.0)]
    pub theta_pad: f64,
    /// Fix gamma instead of drawing it.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Permit gamma at or below the threshold; unimodality failures are then
    /// expected and reported separately.
    #[arg(long)]
    pub allow_sub_threshold: bool,
    /// Fix D instead of drawing it from [0.5, 2.5].
    #[arg(long)]
    pub d: Option<f64>,
    /// Fix alpha instead of drawing it from [0.5, 2].
    #[arg(long)]
    pub alpha: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 2000)]
    pub n: usize,
    #[arg(long, default_value_t = 16)]
    pub d_img: usize,
    #[arg(long, default_value_t = 16)]
    pub d_txt: usize,
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Also split the data and write the held-out part here.
    #[arg(long)]
    pub test_out: Option<PathBuf>,
    #[arg(long, default_value_t = 0.8)]
    pub train_fraction: f64,
    /// Write the planted head as a checkpoint.
    #[arg(long)]
    pub planted_out: Option<PathBuf>,
    #[command(flatten)]
    pub head: HeadArgs,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Evaluation records; the training records are used when omitted.
    #[arg(long)]
    pub eval_data: Option<PathBuf>,
    #[arg(long, default_value = "recovery", value_parser = ["paper", "recovery"])]
    pub preset: String,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub t_max: Option<usize>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Smooth cosine without warm restarts.
    #[arg(long)]
    pub no_restarts: bool,
    /// Use the raw target in the second PLCC-loss term.
    #[arg(long)]
    pub plcc_loss_literal: bool,
    /// Min-max map MOS onto [0, 5] before training.
    #[arg(long)]
    pub normalize_mos: bool,
    /// Seed for the initial head weights.
    #[arg(long, default_value_t = 1)]
    pub init_seed: u64,
    #[command(flatten)]
    pub head: HeadArgs,
    #[arg(long)]
    pub out: PathBuf,
    /// Per-epoch history CSV.
    #[arg(long)]
    pub history: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
}

#[derive(Debug, Args)]
pub struct FdCheckArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 8)]
    pub batch: usize,
    #[arg(long, default_value_t = 16)]
    pub d_img: usize,
    #[arg(long, default_value_t = 16)]
    pub d_txt: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub step: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    #[command(flatten)]
    pub head: HeadArgs,
}

/// Parse `args` (including the program name) and run; returns the exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(cli),
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            code
        }
    }
}

pub fn run(cli: Cli) -> i32 {
    let json = cli.json;
    let result = match cli.command {
        Command::Probe(a) => cmd_probe(&a, json),
        Command::Curves(a) => cmd_curves(&a, json),
        Command::Verify(a) => cmd_verify(&a, json),
        Command::Synth(a) => cmd_synth(&a, json),
        Command::Train(a) => cmd_train(&a, json),
        Command::Eval(a) => cmd_eval(&a, json),
        Command::FdCheck(a) => cmd_fd_check(&a, json),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}

fn emit_json<T: Serialize>(value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    outln!("{text}");
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct ProbeReport {
    pub params: AgrmParams,
    pub probs: ProbVector,
    pub q: f64,
    pub q_rescaled: f64,
    pub modal_grade: usize,
    pub gamma_threshold: f64,
    pub theta1: Option<f64>,
    pub theta2: Option<f64>,
    pub constraint_satisfied: bool,
    pub unimodal: bool,
}

pub fn probe_report(p: &AgrmParams) -> Result<ProbeReport> {
    let probs = grm::agrm_probs(p)?;
    let q = grm::expected_score(&probs);
    let threshold = grm::gamma_threshold(p.d, p.alpha)?;
    let (theta1, theta2) = match grm::boundary_thetas(p) {
        Ok((a, b)) => (Some(a), Some(b)),
        Err(_) => (None, None),
    };
    Ok(ProbeReport {
        params: *p,
        q_rescaled: grm::rescale_score(q, p.k)?,
        modal_grade: grm::modal_grade(&probs),
        unimodal: grm::is_unimodal(&probs, 1e-12),
        probs,
        q,
        gamma_threshold: threshold,
        theta1,
        theta2,
        constraint_satisfied: p.gamma > threshold,
    })
}

fn cmd_probe(a: &ProbeArgs, json: bool) -> Result<i32> {
    let p = AgrmParams::new(a.theta, a.beta1, a.gamma, a.model.d, a.model.alpha, a.model.k)?;
    let r = probe_report(&p)?;
    if json {
        emit_json(&r)?;
        return Ok(EXIT_OK);
    }
    outln!(
        "theta = {}  beta1 = {}  gamma = {}  D = {}  alpha = {}  K = {}",
        sig9(p.theta),
        sig9(p.beta1),
        sig9(p.gamma),
        sig9(p.d),
        sig9(p.alpha),
        p.k
    );
    for (m, v) in r.probs.as_slice().iter().enumerate() {
        outln!("P_{} = {}", m + 1, sig9(*v));
    }
    outln!("sum = {}", sig9(r.probs.as_slice().iter().sum::<f64>()));
    outln!("Q = {}", sig9(r.q));
    outln!("Q_rescaled = {}", sig9(r.q_rescaled));
    outln!("modal_grade = {}", r.modal_grade);
    outln!("gamma_threshold = {}", sig9(r.gamma_threshold));
    match (r.theta1, r.theta2) {
        (Some(t1), Some(t2)) => outln!("theta1 = {}  theta2 = {}", sig9(t1), sig9(t2)),
        _ => outln!("theta1, theta2 undefined (needs K >= 3 and D alpha gamma > ln 2)"),
    }
    let shape = if r.unimodal { "unimodal" } else { "NOT unimodal" };
    if r.constraint_satisfied {
        outln!("verdict: {shape}; gamma > 2 ln 2 / (D alpha) holds, unimodality guaranteed");
    } else {
        outln!(
            "verdict: {shape}; constraint violated: gamma = {} <= 2 ln 2 / (D alpha) = {}",
            sig9(p.gamma),
            sig9(r.gamma_threshold)
        );
    }
    Ok(EXIT_OK)
}

/// CSV of `theta, P_1..P_K, Q` sampled at `steps` evenly spaced abilities.
pub fn curves_csv(base: &AgrmParams, theta_min: f64, theta_max: f64, steps: usize) -> Result<String> {
    if steps < 2 {
        return Err(AgrmError::Argument(format!("steps must be >= 2, got {steps}")));
    }
    if !(theta_max > theta_min) {
        return Err(AgrmError::Argument("theta range is empty".into()));
    }
    let mut s = String::from("theta");
    for m in 1..=base.k {
        s.push_str(&format!(",P{m}"));
    }
    s.push_str(",Q\n");
    for i in 0..steps {
        let theta = theta_min + (theta_max - theta_min) * i as f64 / (steps - 1) as f64;
        let probs = grm::agrm_probs(&base.at(theta))?;
        s.push_str(&sig9(theta));
        for v in probs.as_slice() {
            s.push(',');
            s.push_str(&sig9(*v));
        }
        s.push(',');
        s.push_str(&sig9(grm::expected_score(&probs)));
        s.push('\n');
    }
    Ok(s)
}

fn cmd_curves(a: &CurvesArgs, json: bool) -> Result<i32> {
    let base = AgrmParams::new(a.beta1, a.beta1, a.gamma, a.model.d, a.model.alpha, a.model.k)?;
    let span = 4.0 * a.gamma.abs() * a.model.k as f64;
    let span = if span > 0.0 { span } else { 4.0 };
    let lo = a.theta_min.unwrap_or(a.beta1 - span);
    let hi = a.theta_max.unwrap_or(a.beta1 + span);
    let csv = curves_csv(&base, lo, hi, a.steps)?;
    match &a.out {
        Some(path) => std::fs::write(path, &csv)?,
        None if !json => out!("{csv}"),
        None => {}
    }
    if json {
        emit_json(&json!({
            "rows": a.steps,
            "theta_min": lo,
            "theta_max": hi,
            "out": a.out,
            "csv": if a.out.is_none() { Some(&csv) } else { None },
        }))?;
    } else if let Some(path) = &a.out {
        eprintln!("wrote {} rows to {}", a.steps, path.display());
    }
    Ok(EXIT_OK)
}

/// Violation tallies from a randomized sweep.
#[derive(Debug, Clone, Default, Serialize)]
pub struct VerifyReport {
    pub samples: usize,
    pub seed: u64,
    pub sub_threshold: bool,
    pub normalization: usize,
    pub unimodality: usize,
    /// Unimodality failures in sub-threshold mode, where they are expected.
    pub expected_non_unimodal: usize,
    pub closed_form: usize,
    pub closed_form_checked: usize,
    pub shift: usize,
    pub boundary: usize,
    pub monotone_score: usize,
    pub counterexamples: Vec<String>,
}

impl VerifyReport {
    pub fn violations(&self) -> usize {
        self.normalization + self.unimodality + self.closed_form + self.shift + self.boundary + self.monotone_score
    }

    fn record(&mut self, what: &str, p: &AgrmParams) {
        if self.counterexamples.len() < 10 {
            self.counterexamples.push(format!(
                "{what}: theta={:e} beta1={:e} gamma={:e} D={:e} alpha={:e} K={}",
                p.theta, p.beta1, p.gamma, p.d, p.alpha, p.k
            ));
        }
    }
}

/// Run the randomized property sweep.
pub fn verify_sweep(a: &VerifyArgs) -> Result<VerifyReport> {
    if a.k_min < 2 || a.k_max < a.k_min {
        return Err(AgrmError::Argument(format!("invalid K range [{}, {}]", a.k_min, a.k_max)));
    }
    if !(a.gamma_margin > 0.0) {
        return Err(AgrmError::Argument("gamma margin must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let mut rep = VerifyReport {
        samples: a.samples,
        seed: a.seed,
        sub_threshold: a.allow_sub_threshold,
        ..Default::default()
    };
    for _ in 0..a.samples {
        let d = a.d.unwrap_or_else(|| rng.random_range(0.5..=2.5));
        let alpha = a.alpha.unwrap_or_else(|| rng.random_range(0.5..=2.0));
        let thr = grm::gamma_threshold(d, alpha)?;
        let gamma = match a.gamma {
            Some(g) => g,
            None if a.allow_sub_threshold => thr * (1.0 - rng.random::<f64>()),
            // (thr, thr + margin]
            None => thr + a.gamma_margin * (1.0 - rng.random::<f64>()),
        };
        if gamma <= thr && !a.allow_sub_threshold {
            return Err(AgrmError::Argument(format!(
                "gamma = {gamma} is not above 2 ln 2 / (D alpha) = {thr}; pass --allow-sub-threshold"
            )));
        }
        let k = rng.random_range(a.k_min..=a.k_max);
        let beta1 = rng.random_range(-5.0..=5.0);
        let top = beta1 + (k as f64 - 2.0) * gamma;
        let theta = rng.random_range(beta1 - a.theta_pad..=top + a.theta_pad);
        let p = AgrmParams::new(theta, beta1, gamma, d, alpha, k)?;
        check_point(&p, thr, &mut rng, &mut rep);
    }
    Ok(rep)
}

fn check_point(p: &AgrmParams, thr: f64, rng: &mut ChaCha8Rng, rep: &mut VerifyReport) {
    let probs = match grm::agrm_probs(p) {
        Ok(v) => v,
        Err(_) => {
            rep.normalization += 1;
            rep.record("normalization", p);
            return;
        }
    };
    let above = p.gamma > thr;

    if !grm::is_unimodal(&probs, 1e-12) {
        if above {
            rep.unimodality += 1;
            rep.record("unimodality", p);
        } else {
            rep.expected_non_unimodal += 1;
        }
    }

    // closed form against plain sigmoid differences where both are well conditioned
    let slope = p.slope();
    if p.thresholds().iter().all(|b| (slope * (p.theta - b)).abs() <= 30.0) {
        rep.closed_form_checked += 1;
        let naive = grm::category_probs(&p.to_general());
        let ok = naive.is_ok_and(|n| {
            n.as_slice()
                .iter()
                .zip(probs.as_slice())
                .all(|(x, y)| (x - y).abs() <= 1e-12)
        });
        if !ok {
            rep.closed_form += 1;
            rep.record("closed-form", p);
        }
    }

    // P_{m+1}(theta) = P_m(theta - gamma)
    if p.k >= 4 {
        if let Ok(shifted) = grm::agrm_probs(&p.at(p.theta - p.gamma)) {
            if (2..=p.k - 2).any(|m| (probs.grade(m + 1) - shifted.grade(m)).abs() > 1e-12) {
                rep.shift += 1;
                rep.record("shift", p);
            }
        }
    }

    if above && p.k >= 3 {
        let ok = grm::boundary_thetas(p).is_ok_and(|(t1, t2)| {
            let (Ok(a), Ok(b)) = (grm::agrm_probs(&p.at(t1)), grm::agrm_probs(&p.at(t2))) else {
                return false;
            };
            let peak_lo = 0.5 * (p.threshold(1) + p.threshold(2));
            let peak_hi = 0.5 * (p.threshold(p.k - 2) + p.threshold(p.k - 1));
            (a.grade(1) - a.grade(2)).abs() < 1e-9
                && (b.grade(p.k - 1) - b.grade(p.k)).abs() < 1e-9
                && t1 < peak_lo
                && t2 > peak_hi
        });
        if !ok {
            rep.boundary += 1;
            rep.record("boundary", p);
        }
    }

    // monotone score, on a window where Q differences are representable
    let lo = p.beta1 - 5.0 / slope;
    let hi = p.threshold(p.k - 1) + 5.0 / slope;
    let t0 = rng.random_range(lo..=hi);
    let t1 = t0 + rng.random_range(1e-3..=5.0);
    let q = |t: f64| grm::agrm_probs(&p.at(t)).map(|v| grm::expected_score(&v));
    if !matches!((q(t0), q(t1)), (Ok(a), Ok(b)) if b > a) {
        rep.monotone_score += 1;
        rep.record("monotone-score", &p.at(t0));
    }
}

fn cmd_verify(a: &VerifyArgs, json: bool) -> Result<i32> {
    if a.samples == 0 {
        eprintln!("warning: 0 samples requested; nothing to verify");
    }
    let rep = verify_sweep(a)?;
    let code = if rep.violations() == 0 { EXIT_OK } else { EXIT_CHECK_FAILED };
    if json {
        emit_json(&rep)?;
        return Ok(code);
    }
    outln!("# verify seed={} samples={} K=[{}, {}]", a.seed, a.samples, a.k_min, a.k_max);
    outln!("normalization violations: {}", rep.normalization);
    outln!("unimodality violations: {}", rep.unimodality);
    outln!("closed-form mismatches: {} (of {} checked)", rep.closed_form, rep.closed_form_checked);
    outln!("shift violations: {}", rep.shift);
    outln!("boundary violations: {}", rep.boundary);
    outln!("monotone-score violations: {}", rep.monotone_score);
    if rep.sub_threshold {
        outln!(
            "sub-threshold mode: {} non-unimodal distributions found (expected below 2 ln 2 / (D alpha))",
            rep.expected_non_unimodal
        );
    }
    for c in &rep.counterexamples {
        outln!("counterexample {c}");
    }
    outln!("{}", if code == EXIT_OK { "PASS" } else { "FAIL" });
    Ok(code)
}

fn cmd_synth(a: &SynthArgs, json: bool) -> Result<i32> {
    let cfg = SynthConfig {
        head: a.head.config(),
        ..SynthConfig::new(a.n, a.d_img, a.d_txt, a.noise, a.seed)
    };
    let (records, planted) = data::synth_generate(&cfg)?;
    let (train_n, test_n) = match &a.test_out {
        Some(test_path) => {
            let (tr, te) = data::split(&records, a.train_fraction, a.seed)?;
            data::save_records(&a.out, &tr)?;
            data::save_records(test_path, &te)?;
            (tr.len(), te.len())
        }
        None => {
            data::save_records(&a.out, &records)?;
            (records.len(), 0)
        }
    };
    if let Some(path) = &a.planted_out {
        Checkpoint::from_head(planted, TrainConfig::recovery()).save(path)?;
    }
    if json {
        emit_json(&json!({ "seed": a.seed, "records": records.len(), "train": train_n, "test": test_n }))?;
    } else {
        outln!(
            "# synth seed={} n={} noise={} -> {} train, {} test",
            a.seed,
            a.n,
            sig9(a.noise),
            train_n,
            test_n
        );
    }
    Ok(EXIT_OK)
}

fn cmd_train(a: &TrainArgs, json: bool) -> Result<i32> {
    let mut cfg = TrainConfig::preset(&a.preset)?;
    if let Some(v) = a.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = a.lr {
        cfg.lr = v;
    }
    if let Some(v) = a.batch_size {
        cfg.batch_size = v;
    }
    if let Some(v) = a.t_max {
        cfg.t_max = v;
    }
    if let Some(v) = a.weight_decay {
        cfg.weight_decay = v;
    }
    if let Some(v) = a.lambda {
        cfg.lambda = v;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    cfg.restarts = !a.no_restarts;
    if a.plcc_loss_literal {
        cfg.plcc_form = PlccForm::Literal;
    }
    let mut train_set = data::load_records(&a.data)?;
    let mut eval_set = match &a.eval_data {
        Some(p) => data::load_records(p)?,
        None => train_set.clone(),
    };
    if a.normalize_mos {
        let (norm, t) = data::normalize_mos(&train_set, 0.0, 5.0)?;
        train_set = norm;
        for r in &mut eval_set {
            r.mos = t.apply(r.mos);
        }
    }
    let first = train_set
        .first()
        .ok_or_else(|| AgrmError::Argument("training set is empty".into()))?;
    let (d_img, d_txt) = (first.features.f_i.len(), first.features.f_t.len());
    let head = init_head(d_img, d_txt, a.head.config(), a.init_seed)?;
    let ckpt = train::train(&cfg, &train_set, &eval_set, head)?;
    ckpt.save(&a.out)?;
    if let Some(path) = &a.history {
        std::fs::write(path, ckpt.history_csv())?;
    }
    let last = ckpt.history.last().expect("at least one epoch");
    if json {
        emit_json(&json!({
            "seed": cfg.seed,
            "epochs": ckpt.history.len(),
            "final": last,
            "checkpoint": a.out,
        }))?;
    } else {
        outln!(
            "# train preset={} seed={} epochs={} lr={}",
            a.preset,
            cfg.seed,
            cfg.epochs,
            sig9(cfg.lr)
        );
        outln!(
            "final: train_loss={} eval_srcc={} eval_plcc={}",
            sig9(last.train_loss),
            sig9(last.eval_srcc),
            sig9(last.eval_plcc)
        );
        outln!("checkpoint written to {}", a.out.display());
    }
    Ok(EXIT_OK)
}

fn cmd_eval(a: &EvalArgs, json: bool) -> Result<i32> {
    let ckpt = Checkpoint::load(&a.checkpoint)?;
    let records = data::load_records(&a.data)?;
    let rep = train::evaluate(&ckpt, &records)?;
    if json {
        emit_json(&rep)?;
        return Ok(EXIT_OK);
    }
    let o = &rep.overall;
    outln!("overall n={} SRCC={} PLCC={}", o.n, sig9(o.srcc), sig9(o.plcc));
    for (dim, s) in &rep.per_dim {
        outln!("{} n={} SRCC={} PLCC={}", Dimension::name(*dim), s.n, sig9(s.srcc), sig9(s.plcc));
    }
    if o.degenerate {
        eprintln!("warning: zero variance in predictions or MOS; correlations reported as 0");
    }
    Ok(EXIT_OK)
}

/// Random feature batch with uniform targets on [0, 5].
pub fn random_batch(d_img: usize, d_txt: usize, n: usize, seed: u64) -> Vec<(FeaturePair, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let fp = FeaturePair::new(
                (0..d_img).map(|_| rng.random_range(-1.5..1.5)).collect(),
                (0..d_txt).map(|_| rng.random_range(-1.5..1.5)).collect(),
            );
            (fp, rng.random_range(0.0..5.0))
        })
        .collect()
}

fn cmd_fd_check(a: &FdCheckArgs, json: bool) -> Result<i32> {
    let hp = init_head(a.d_img, a.d_txt, a.head.config(), a.seed)?;
    let data = random_batch(a.d_img, a.d_txt, a.batch, a.seed.wrapping_add(1));
    let batch: Vec<Sample> = data.iter().map(|(f, m)| (f, *m)).collect();
    let loss = LossConfig {
        lambda: a.lambda,
        ..LossConfig::default()
    };
    let rep = fd_check(&hp, &batch, &loss, a.step, a.tol)?;
    let fd = rep.fd.as_ref().expect("fd_check fills the summary");
    let code = if fd.passed { EXIT_OK } else { EXIT_CHECK_FAILED };
    if json {
        emit_json(&json!({ "seed": a.seed, "loss": rep.loss, "fd": fd }))?;
        return Ok(code);
    }
    outln!("# fd-check seed={} step={} tol={}", a.seed, sig9(a.step), sig9(a.tol));
    outln!("loss = {}", sig9(rep.loss));
    outln!("checked = {}  skipped = {}", fd.checked, fd.skipped);
    outln!(
        "max_rel_err = {} at {} (analytic {}, numeric {})",
        sig9(fd.max_rel_err),
        fd.worst,
        sig9(fd.analytic_at_worst),
        sig9(fd.numeric_at_worst)
    );
    outln!("{}", if fd.passed { "PASS" } else { "FAIL" });
    Ok(code)
}
