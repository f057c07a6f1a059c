use agrm::data::{read_records, write_records, Dimension, FeatureRecord};
use agrm::grm::{self, AgrmParams};
use agrm::head::FeaturePair;
use agrm::metrics::{plcc_metric, srcc};
use proptest::prelude::*;

/// Parameters with gamma strictly above the unimodality threshold.
fn above_threshold() -> impl Strategy<Value = AgrmParams> {
    (0.5f64..2.5, 0.5f64..2.0, 2usize..=9, 1e-6f64..10.0, -5.0f64..5.0, -40.0f64..40.0).prop_map(
        |(d, alpha, k, margin, beta1, theta)| {
            let gamma = grm::gamma_threshold(d, alpha).unwrap() + margin;
            AgrmParams::new(theta, beta1, gamma, d, alpha, k).unwrap()
        },
    )
}

proptest! {
    #[test]
    fn probabilities_normalize(p in above_threshold()) {
        let v = grm::agrm_probs(&p).unwrap();
        let sum: f64 = v.as_slice().iter().sum();
        prop_assert!((sum - 1.0).abs() <= 1e-12);
        prop_assert!(v.as_slice().iter().all(|x| (0.0..=1.0).contains(x)));
    }

    #[test]
    fn unimodal_above_threshold(p in above_threshold()) {
        prop_assert!(grm::is_unimodal(&grm::agrm_probs(&p).unwrap(), 1e-12));
    }

    #[test]
    fn mirror_symmetry_about_center(p in above_threshold(), off in -10.0f64..10.0) {
        // reflecting theta about the ladder midpoint reverses the distribution
        let c = p.center();
        let a = grm::agrm_probs(&p.at(c + off)).unwrap();
        let b = grm::agrm_probs(&p.at(c - off)).unwrap();
        for (x, y) in a.as_slice().iter().zip(b.as_slice().iter().rev()) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn boundary_thetas_mirror(p in above_threshold().prop_filter("k >= 3", |p| p.k >= 3)) {
        let (t1, t2) = grm::boundary_thetas(&p).unwrap();
        prop_assert!((t1 + t2 - 2.0 * p.center()).abs() <= 1e-9 * (1.0 + p.center().abs()));
    }

    #[test]
    fn modal_grade_never_decreases(p in above_threshold(), delta in 0.0f64..5.0) {
        let lo = grm::modal_grade(&grm::agrm_probs(&p).unwrap());
        let hi = grm::modal_grade(&grm::agrm_probs(&p.at(p.theta + delta)).unwrap());
        prop_assert!(hi >= lo);
    }

    #[test]
    fn rescaled_score_in_range(p in above_threshold()) {
        let q = grm::expected_score(&grm::agrm_probs(&p).unwrap());
        let r = grm::rescale_score(q, p.k).unwrap();
        prop_assert!((0.0..=5.0).contains(&r));
    }

    #[test]
    fn srcc_invariant_under_monotone_maps(
        xs in prop::collection::vec(-5.0f64..5.0, 3..40),
        seed in any::<u64>(),
    ) {
        let ys: Vec<f64> = xs.iter().enumerate().map(|(i, x)| x.sin() + (seed % 7) as f64 * i as f64 * 0.01).collect();
        let mapped: Vec<f64> = xs.iter().map(|x| x.exp()).collect();
        let a = srcc(&xs, &ys).unwrap();
        let b = srcc(&mapped, &ys).unwrap();
        prop_assert!((a - b).abs() <= 1e-12);
        prop_assert!((-1.0..=1.0).contains(&a));
    }

    #[test]
    fn correlations_are_symmetric(
        pairs in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 3..40),
    ) {
        let (x, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        prop_assert!((plcc_metric(&x, &y).unwrap() - plcc_metric(&y, &x).unwrap()).abs() <= 1e-12);
        prop_assert!((srcc(&x, &y).unwrap() - srcc(&y, &x).unwrap()).abs() <= 1e-12);
    }

    #[test]
    fn records_round_trip(
        rows in prop::collection::vec(
            (prop::collection::vec(-1e3f64..1e3, 3), prop::collection::vec(-1e3f64..1e3, 2), 0.0f64..5.0, 0usize..3),
            1..20,
        ),
    ) {
        let dims = [Dimension::Quality, Dimension::Consistency, Dimension::Authenticity];
        let records: Vec<FeatureRecord> = rows
            .into_iter()
            .enumerate()
            .map(|(i, (fi, ft, mos, d))| FeatureRecord {
                id: format!("r{i}"),
                features: FeaturePair { f_i: fi, f_t: ft },
                mos,
                dim: dims[d],
            })
            .collect();
        let mut buf = Vec::new();
        write_records(&mut buf, &records).unwrap();
        let back = read_records(buf.as_slice(), std::path::Path::new("mem")).unwrap();
        prop_assert_eq!(back, records);
    }
}
