//! Randomized unimodality sweep above the threshold, then the same sweep
//! with gamma fixed below it to show the guarantee disappearing.
//!
//! cargo run --release --example unimodality_sweep

use agrm::cli::{verify_sweep, VerifyArgs};

fn args(gamma: Option<f64>, sub: bool) -> VerifyArgs {
    VerifyArgs {
        samples: 50_000,
        seed: 1,
        k_min: 2,
        k_max: 9,
        gamma_margin: 10.0,
        theta_pad: 20.0,
        gamma,
        allow_sub_threshold: sub,
        d: if sub { Some(1.7) } else { None },
        alpha: if sub { Some(1.0) } else { None },
    }
}

fn main() -> agrm::Result<()> {
    let above = verify_sweep(&args(None, false))?;
    println!(
        "above threshold: {} draws, {} violations ({} closed-form comparisons)",
        above.samples,
        above.violations(),
        above.closed_form_checked
    );

    let below = verify_sweep(&args(Some(0.1), true))?;
    println!(
        "gamma = 0.1, D = 1.7, alpha = 1: {} of {} draws are not unimodal",
        below.expected_non_unimodal, below.samples
    );
    for c in below.counterexamples.iter().take(3) {
        println!("  {c}");
    }
    Ok(())
}
