//! Analytic gradients against Richardson-extrapolated central differences.
//!
//! cargo run --release --example gradient_check

use agrm::cli::random_batch;
use agrm::grad::{fd_check, LossConfig, Sample};
use agrm::head::{init_head, Activation, AggMode, HeadConfig};
use agrm::metrics::PlccForm;

fn main() -> agrm::Result<()> {
    for form in [PlccForm::Standardized, PlccForm::Literal] {
        let loss = LossConfig {
            plcc_form: form,
            ..LossConfig::default()
        };
        for activation in Activation::ALL {
            for agg_mode in [AggMode::Linear, AggMode::Softmax] {
                let config = HeadConfig {
                    activation,
                    agg_mode,
                    ..HeadConfig::default()
                };
                let head = init_head(16, 16, config, 3)?;
                let data = random_batch(16, 16, 8, 4);
                let batch: Vec<Sample> = data.iter().map(|(f, m)| (f, *m)).collect();
                let rep = fd_check(&head, &batch, &loss, 1e-4, 1e-4)?;
                let fd = rep.fd.expect("summary");
                println!(
                    "{form:?} {}/{agg_mode:?}: loss {:.6} max rel err {:.2e} ({} checked, {} skipped) {}",
                    activation.name(),
                    rep.loss,
                    fd.max_rel_err,
                    fd.checked,
                    fd.skipped,
                    if fd.passed { "ok" } else { "FAIL" }
                );
            }
        }
    }
    Ok(())
}
