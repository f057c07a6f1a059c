//! Forward pass of the grading head for every activation, aggregation
//! mode and modality on one random feature pair.
//!
//! cargo run --example head_forward

use agrm::cli::random_batch;
use agrm::head::{head_forward, init_head, Activation, AggMode, HeadConfig, Modality};

fn main() -> agrm::Result<()> {
    let (pair, _) = random_batch(8, 8, 1, 42).remove(0);
    for agg_mode in [AggMode::Linear, AggMode::Softmax] {
        for modality in [Modality::Joint, Modality::ImageOnly, Modality::TextOnly, Modality::TempAblated] {
            for activation in Activation::ALL {
                let config = HeadConfig {
                    activation,
                    agg_mode,
                    modality,
                    ..HeadConfig::default()
                };
                let head = init_head(8, 8, config, 7)?;
                let out = head_forward(&head, &pair)?;
                println!(
                    "{agg_mode:?}/{modality:?}/{}: theta {:+.4} beta1 {:+.4} gamma {:.4} score {:.4}{}",
                    activation.name(),
                    out.theta,
                    out.beta1,
                    out.gamma,
                    out.q_rescaled,
                    if out.below_threshold { " (gamma below threshold)" } else { "" }
                );
            }
        }
    }
    Ok(())
}
