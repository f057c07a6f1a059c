//! Plant a head, generate data from it, train a fresh head and compare
//! held-out correlations against the planted oracle.
//!
//! cargo run --release --example synthetic_recovery

use agrm::data::{split, synth_generate, SynthConfig};
use agrm::head::{init_head, HeadConfig};
use agrm::train::{evaluate_head, train, TrainConfig};

fn main() -> agrm::Result<()> {
    for noise in [0.0, 0.25] {
        let (records, planted) = synth_generate(&SynthConfig::new(2000, 16, 16, noise, 0))?;
        let (train_set, test_set) = split(&records, 0.8, 0)?;
        let oracle = evaluate_head(&planted, &test_set)?.overall;

        let init = init_head(16, 16, HeadConfig::default(), 1)?;
        let ckpt = train(&TrainConfig::recovery(), &train_set, &test_set, init)?;
        for h in ckpt.history.iter().step_by(20) {
            println!("  epoch {:>3} lr {:.2e} loss {:.4} srcc {:.4}", h.epoch, h.lr, h.train_loss, h.eval_srcc);
        }
        let fit = evaluate_head(&ckpt.head, &test_set)?.overall;
        println!(
            "noise {noise}: trained SRCC {:.4} PLCC {:.4}; planted SRCC {:.4} PLCC {:.4}",
            fit.srcc, fit.plcc, oracle.srcc, oracle.plcc
        );
    }
    Ok(())
}
