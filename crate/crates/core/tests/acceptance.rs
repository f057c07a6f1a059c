//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.
//!
//! Run with `cargo test -p agrm --test acceptance`.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use agrm::cli::{random_batch, verify_sweep, VerifyArgs};
use agrm::grad::{fd_check, LossConfig, Sample};
use agrm::grm::{self, AgrmParams, DEFAULT_ALPHA, DEFAULT_D};
use agrm::head::{head_forward, init_head, Activation, AggMode, FeaturePair, HeadConfig, Modality};
use agrm::metrics::{plcc_metric, srcc};
use agrm::train::TrainConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

/// Random D, alpha, K and a gamma strictly above the threshold.
fn draw_model(rng: &mut ChaCha8Rng, k_min: usize) -> (f64, f64, usize, f64, f64) {
    let d = rng.random_range(0.5..=2.5);
    let alpha = rng.random_range(0.5..=2.0);
    let k = rng.random_range(k_min..=9);
    let thr = grm::gamma_threshold(d, alpha).unwrap();
    let gamma = thr + rng.random_range(1e-6..=10.0);
    let beta1 = rng.random_range(-5.0..=5.0);
    (d, alpha, k, gamma, beta1)
}

fn c1_unimodality_sweep() -> Outcome {
    let args = VerifyArgs {
        samples: 100_000,
        seed: 20240501,
        k_min: 2,
        k_max: 9,
        gamma_margin: 10.0,
        theta_pad: 20.0,
        gamma: None,
        allow_sub_threshold: false,
        d: None,
        alpha: None,
    };
    let start = Instant::now();
    let rep = match verify_sweep(&args) {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("sweep error: {e}")),
    };
    let secs = start.elapsed().as_secs_f64();
    outcome(
        rep.samples == 100_000 && rep.unimodality == 0 && rep.violations() == 0 && secs <= 30.0,
        format!(
            "{} draws, {} unimodality violations, {} total violations, {secs:.2} s",
            rep.samples,
            rep.unimodality,
            rep.violations()
        ),
    )
}

fn c2_closed_form() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let d = rng.random_range(0.5..=2.5);
        let alpha = rng.random_range(0.5..=2.0);
        let k = rng.random_range(3..=9);
        let slope = d * alpha;
        let thr = grm::gamma_threshold(d, alpha).unwrap();
        // keep every |slope (theta - beta_m)| within 30
        let gmax = (thr + 10.0).min(60.0 / (slope * (k as f64 - 2.0)));
        let gamma = rng.random_range(thr * 1.000001..=gmax);
        let beta1 = rng.random_range(-5.0..=5.0);
        let top = beta1 + (k as f64 - 2.0) * gamma;
        let theta = rng.random_range((top - 30.0 / slope)..=(beta1 + 30.0 / slope));
        let p = AgrmParams::new(theta, beta1, gamma, d, alpha, k).unwrap();
        assert!(p.thresholds().iter().all(|b| (slope * (theta - b)).abs() <= 30.0 + 1e-9));
        let closed = grm::agrm_probs(&p).unwrap();
        let naive = grm::category_probs(&p.to_general()).unwrap();
        for (a, b) in closed.as_slice().iter().zip(naive.as_slice()) {
            worst = worst.max((a - b).abs());
        }
    }
    outcome(worst <= 1e-12, format!("max |closed - naive| = {worst:.3e} over 10000 draws"))
}

fn c3_shift() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let (d, alpha, k, gamma, beta1) = draw_model(&mut rng, 4);
        let slope = d * alpha;
        let top = beta1 + (k as f64 - 2.0) * gamma;
        let theta = rng.random_range((beta1 - 20.0 / slope)..=(top + 20.0 / slope));
        let p = AgrmParams::new(theta, beta1, gamma, d, alpha, k).unwrap();
        let now = grm::agrm_probs(&p).unwrap();
        let back = grm::agrm_probs(&p.at(theta - gamma)).unwrap();
        // interior grades only: P_{m+1}(theta) against P_m(theta - gamma)
        for m in 2..=k - 2 {
            worst = worst.max((now.grade(m + 1) - back.grade(m)).abs());
        }
    }
    outcome(worst <= 1e-12, format!("max |P_(m+1)(theta) - P_m(theta - gamma)| = {worst:.3e} over 10000 draws"))
}

fn c4_boundaries() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    let mut order_fail = 0;
    for _ in 0..1_000 {
        let (d, alpha, k, gamma, beta1) = draw_model(&mut rng, 3);
        let p = AgrmParams::new(0.0, beta1, gamma, d, alpha, k).unwrap();
        let (t1, t2) = grm::boundary_thetas(&p).unwrap();
        let lo = grm::agrm_probs(&p.at(t1)).unwrap();
        let hi = grm::agrm_probs(&p.at(t2)).unwrap();
        worst = worst.max((lo.grade(1) - lo.grade(2)).abs());
        worst = worst.max((hi.grade(k - 1) - hi.grade(k)).abs());
        let b = |m: usize| p.threshold(m);
        let left_ok = t1 < (b(1) + b(2)) / 2.0;
        let right_ok = t2 > (b(k - 2) + b(k - 1)) / 2.0;
        if !(left_ok && right_ok) {
            order_fail += 1;
        }
    }
    outcome(
        worst < 1e-9 && order_fail == 0,
        format!("max boundary gap {worst:.3e}, {order_fail} ordering failures over 1000 draws"),
    )
}

fn c5_counterexample() -> Outcome {
    // frozen from a grid search over theta in [-5, 5]
    let frozen = [
        0.43659321373780635,
        0.04216957129591956,
        0.04247442993254818,
        0.04216957129591956,
        0.43659321373780635,
    ];
    let p = AgrmParams::new(0.15, 0.0, 0.1, 1.7, 1.0, 5).unwrap();
    let v = grm::agrm_probs(&p).unwrap();
    let matches = v.as_slice().iter().zip(frozen).all(|(a, b)| (a - b).abs() < 1e-12);
    let frozen_bimodal = !grm::is_unimodal(&v, 1e-12);
    let grid_hits = (0..=1000)
        .map(|i| -5.0 + 0.01 * i as f64)
        .filter(|&t| !grm::is_unimodal(&grm::agrm_probs(&p.at(t)).unwrap(), 1e-12))
        .count();
    let below = 0.1 < grm::gamma_threshold(1.7, 1.0).unwrap();
    outcome(
        matches && frozen_bimodal && grid_hits > 0 && below,
        format!("theta=0.15 beta1=0 gamma=0.1: probs {:?}, {grid_hits}/1001 grid points non-unimodal", v.as_slice()),
    )
}

fn c6_gradients() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    let mut runs = 0;
    for activation in Activation::ALL {
        for agg_mode in [AggMode::Linear, AggMode::Softmax] {
            for k in [3, 5] {
                let config = HeadConfig {
                    k,
                    activation,
                    agg_mode,
                    ..HeadConfig::default()
                };
                for seed in 0..10u64 {
                    let hp = init_head(16, 16, config, seed).unwrap();
                    let data = random_batch(16, 16, 8, seed.wrapping_add(1));
                    let batch: Vec<Sample> = data.iter().map(|(f, m)| (f, *m)).collect();
                    let rep = fd_check(&hp, &batch, &LossConfig::default(), 1e-4, 1e-4).unwrap();
                    let fd = rep.fd.unwrap();
                    runs += 1;
                    worst = worst.max(fd.max_rel_err);
                    if !fd.passed || fd.max_rel_err >= 1e-4 {
                        failures.push(format!("{}/{agg_mode:?}/K={k}/seed={seed}", activation.name()));
                    }
                }
            }
        }
    }
    outcome(
        failures.is_empty() && runs == 160,
        format!("{runs} runs, worst relative error {worst:.3e}, failures {failures:?}"),
    )
}

fn c7_normalization_range() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst_sum: f64 = 0.0;
    let mut out_of_range = 0;
    for _ in 0..10_000 {
        let (d, alpha, k, gamma, beta1) = draw_model(&mut rng, 2);
        let theta = rng.random_range(-60.0..=60.0);
        let p = AgrmParams::new(theta, beta1, gamma, d, alpha, k).unwrap();
        let v = grm::agrm_probs(&p).unwrap();
        worst_sum = worst_sum.max((v.as_slice().iter().sum::<f64>() - 1.0).abs());
        let q = grm::rescale_score(grm::expected_score(&v), k).unwrap();
        if !(0.0..=5.0).contains(&q) {
            out_of_range += 1;
        }
    }
    let mut heads = 0;
    for activation in Activation::ALL {
        for agg_mode in [AggMode::Linear, AggMode::Softmax] {
            for modality in [Modality::Joint, Modality::ImageOnly, Modality::TextOnly, Modality::TempAblated] {
                for k in [2, 3, 5, 9] {
                    let config = HeadConfig {
                        k,
                        activation,
                        agg_mode,
                        modality,
                        ..HeadConfig::default()
                    };
                    let hp = init_head(8, 8, config, heads).unwrap();
                    heads += 1;
                    for (f, _) in random_batch(8, 8, 16, heads) {
                        let scaled = FeaturePair {
                            f_i: f.f_i.iter().map(|x| x * 25.0).collect(),
                            f_t: f.f_t.iter().map(|x| x * 25.0).collect(),
                        };
                        for fp in [&f, &scaled] {
                            let out = head_forward(&hp, fp).unwrap();
                            worst_sum = worst_sum.max((out.probs.as_slice().iter().sum::<f64>() - 1.0).abs());
                            if !(0.0..=5.0).contains(&out.q_rescaled) {
                                out_of_range += 1;
                            }
                        }
                    }
                }
            }
        }
    }
    outcome(
        worst_sum <= 1e-12 && out_of_range == 0,
        format!("max |sum - 1| = {worst_sum:.3e}, {out_of_range} rescaled scores outside [0, 5]"),
    )
}

fn c8_monotone_score() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut fails = 0;
    for _ in 0..10_000 {
        let (d, alpha, k, gamma, beta1) = draw_model(&mut rng, 2);
        let p = AgrmParams::new(0.0, beta1, gamma, d, alpha, k).unwrap();
        let slope = p.slope();
        let lo = beta1 - 5.0 / slope;
        let hi = p.threshold(k - 1) + 5.0 / slope;
        let t0 = rng.random_range(lo..=hi);
        let t1 = t0 + rng.random_range(1e-3..=5.0);
        let q = |t: f64| grm::expected_score(&grm::agrm_probs(&p.at(t)).unwrap());
        if q(t1) <= q(t0) || q(t1).is_nan() {
            fails += 1;
        }
    }
    outcome(fails == 0, format!("{fails} non-increasing pairs over 10000 draws"))
}

fn run_bin(args: &[&str], dir: &Path) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_agrm"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("spawn agrm");
    (out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stdout).into_owned())
}

fn pipeline(dir: &Path, noise: &str) -> Result<(String, f64, f64), String> {
    let steps: [&[&str]; 3] = [
        &["synth", "--n", "2000", "--noise", noise, "--seed", "0", "--out", "train.jsonl", "--test-out", "test.jsonl"],
        &["train", "--data", "train.jsonl", "--eval-data", "test.jsonl", "--preset", "recovery", "--out", "ckpt.json"],
        &["--json", "eval", "--checkpoint", "ckpt.json", "--data", "test.jsonl"],
    ];
    let mut last = String::new();
    for args in steps {
        let (code, stdout) = run_bin(args, dir);
        if code != 0 {
            return Err(format!("`agrm {}` exited {code}", args.join(" ")));
        }
        last = stdout;
    }
    let v: serde_json::Value = serde_json::from_str(&last).map_err(|e| e.to_string())?;
    let srcc = v["overall"]["srcc"].as_f64().ok_or("missing srcc")?;
    let plcc = v["overall"]["plcc"].as_f64().ok_or("missing plcc")?;
    Ok((last, srcc, plcc))
}

fn c9_recovery() -> Outcome {
    let start = Instant::now();
    let clean = tempfile::tempdir().unwrap();
    let noisy = tempfile::tempdir().unwrap();
    let r = pipeline(clean.path(), "0").and_then(|a| pipeline(noisy.path(), "0.25").map(|b| (a, b)));
    let secs = start.elapsed().as_secs_f64();
    match r {
        Ok(((_, s0, p0), (_, s1, p1))) => outcome(
            s0 >= 0.95 && p0 >= 0.95 && s1 >= 0.85 && secs <= 300.0,
            format!("noiseless SRCC {s0:.6} PLCC {p0:.6}; sigma 0.25 SRCC {s1:.6} PLCC {p1:.6}; {secs:.1} s"),
        ),
        Err(e) => outcome(false, e),
    }
}

fn c10_metric_oracles() -> Outcome {
    let tie = srcc(&[1.0, 2.0, 2.0, 3.0], &[1.0, 2.0, 3.0, 4.0]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst: f64 = 0.0;
    for _ in 0..1_000 {
        let n = rng.random_range(3..50);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let a = rng.random_range(0.1..10.0);
        let b = rng.random_range(-10.0..10.0);
        let ax: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        worst = worst.max((plcc_metric(&ax, &y).unwrap() - plcc_metric(&x, &y).unwrap()).abs());
    }
    outcome(
        (tie - 0.9487).abs() <= 1e-4 && worst <= 1e-12,
        format!("tie SRCC {tie:.6}; max PLCC change under affine maps {worst:.3e}"),
    )
}

fn c11_determinism() -> Outcome {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    match (pipeline(a.path(), "0.25"), pipeline(b.path(), "0.25")) {
        (Ok((ea, ..)), Ok((eb, ..))) => {
            let ca = std::fs::read(a.path().join("ckpt.json")).unwrap();
            let cb = std::fs::read(b.path().join("ckpt.json")).unwrap();
            let ta = std::fs::read(a.path().join("train.jsonl")).unwrap();
            let tb = std::fs::read(b.path().join("train.jsonl")).unwrap();
            outcome(
                ca == cb && ta == tb && ea == eb,
                format!(
                    "checkpoints identical: {}, data identical: {}, metrics identical: {}",
                    ca == cb,
                    ta == tb,
                    ea == eb
                ),
            )
        }
        (Err(e), _) | (_, Err(e)) => outcome(false, e),
    }
}

fn c12_paper_preset() -> Outcome {
    let t = TrainConfig::paper();
    let h = HeadConfig::default();
    let snapshot = serde_json::json!({
        "D": DEFAULT_D, "alpha": DEFAULT_ALPHA, "lambda_s": h.lambda_s, "lambda": t.lambda,
        "lr": t.lr, "weight_decay": t.weight_decay, "batch_size": t.batch_size,
        "epochs": t.epochs, "t_max": t.t_max,
    });
    let expected = serde_json::json!({
        "D": 1.7, "alpha": 1.0, "lambda_s": 10.0, "lambda": 1.0,
        "lr": 1e-5, "weight_decay": 1e-3, "batch_size": 16,
        "epochs": 100, "t_max": 5,
    });
    let from_name = TrainConfig::preset("paper").unwrap() == t;
    let head_ok = h.d == 1.7 && h.alpha == 1.0;
    outcome(snapshot == expected && from_name && head_ok, format!("snapshot {snapshot}"))
}

fn main() {
    let criteria: [Criterion; 12] = [
        ("unimodality sweep", c1_unimodality_sweep),
        ("closed-form equivalence", c2_closed_form),
        ("shift property", c3_shift),
        ("boundary intersections", c4_boundaries),
        ("sub-threshold counterexample", c5_counterexample),
        ("gradient correctness", c6_gradients),
        ("normalization and range", c7_normalization_range),
        ("monotone expected score", c8_monotone_score),
        ("synthetic recovery", c9_recovery),
        ("metric oracles", c10_metric_oracles),
        ("determinism", c11_determinism),
        ("paper preset", c12_paper_preset),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!("{} criterion {:>2} ({name}): {}", if o.pass { "PASS" } else { "FAIL" }, i + 1, o.detail);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
