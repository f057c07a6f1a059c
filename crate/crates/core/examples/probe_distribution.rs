//! Grade distribution at a few abilities, plus the derived quantities.
//!
//! cargo run --example probe_distribution

use agrm::grm::{self, AgrmParams};

fn main() -> agrm::Result<()> {
    let base = AgrmParams::with_defaults(0.0, -1.0, 1.0)?;
    println!("thresholds {:?}", base.thresholds());
    println!("gamma threshold {:.6}", grm::gamma_threshold(base.d, base.alpha)?);
    let (t1, t2) = grm::boundary_thetas(&base)?;
    println!("P1 = P2 at theta {t1:.6}, P4 = P5 at theta {t2:.6}");
    for m in 2..base.k {
        println!("grade {m} peaks at theta {:.3}", grm::peak_ability(&base, m)?);
    }

    for theta in [-3.0, -1.5, 0.0, 1.5, 3.0] {
        let p = base.at(theta);
        let v = grm::agrm_probs(&p)?;
        let q = grm::expected_score(&v);
        let probs: Vec<String> = v.as_slice().iter().map(|x| format!("{x:.4}")).collect();
        println!(
            "theta {theta:>5.1}: [{}] mode {} Q {q:.4} score {:.4}",
            probs.join(", "),
            grm::modal_grade(&v),
            grm::rescale_score(q, p.k)?
        );
    }
    Ok(())
}
