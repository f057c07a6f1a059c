//! Losses and correlation metrics on small hand-checkable batches.
//!
//! cargo run --example metrics

use agrm::metrics::{self, mae_loss, mid_ranks, plcc_loss, plcc_metric, srcc, srcc_checked, ScoreBatch};

fn main() -> agrm::Result<()> {
    let pred = [1.0, 2.0, 2.0, 3.0];
    let mos = [1.0, 2.0, 3.0, 4.0];
    println!("mid ranks of {pred:?}: {:?}", mid_ranks(&pred));
    println!("SRCC with ties {:.6}", srcc(&pred, &mos)?);
    println!("PLCC {:.6}", plcc_metric(&pred, &mos)?);

    let b = ScoreBatch::new(&pred, &mos)?;
    println!("MAE {:.6}", mae_loss(&b));
    println!("PLCC loss {:.6}", plcc_loss(&b, metrics::DEFAULT_EPSILON)?);
    println!("total (lambda 1) {:.6}", metrics::total_loss(&b, 1.0, metrics::DEFAULT_EPSILON)?);

    let flat = [2.0; 4];
    let c = srcc_checked(&flat, &mos)?;
    println!("constant predictions: SRCC {} degenerate {}", c.value, c.degenerate);
    Ok(())
}
