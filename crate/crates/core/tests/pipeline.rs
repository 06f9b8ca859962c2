use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rashgam_core::apps::{vi_range, ViMode};
use rashgam_core::gam::{bin, make_quantile_spec, BinningSpec, GamObjective, RawDataset, SmoothLoss, Support};
use rashgam_core::io::{to_json, EllipsoidDoc, ModelDoc};
use rashgam_core::rset_block::explore;
use rashgam_core::rset_fit::{approximate, RashomonConfig};
use rashgam_core::gam::GamModel;

fn diabetes() -> RawDataset {
    RawDataset::from_csv_path(concat!(env!("CARGO_MANIFEST_DIR"), "/data/diabetes.csv")).unwrap()
}

/// Feature 0 has four bins; bins 1 and 2 hold identical rows, so their ERM
/// coefficients coincide by symmetry.
fn tied_bins() -> RawDataset {
    let positives = [(0.0, 10, 40), (1.0, 25, 25), (2.0, 25, 25), (3.0, 40, 10)];
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (x, pos, neg) in positives {
        for i in 0..pos + neg {
            rows.push(vec![x, (i % 3) as f64]);
            labels.push(u8::from(i < pos));
        }
    }
    RawDataset::new(vec!["a".into(), "b".into()], rows, labels).unwrap()
}

#[test]
fn merging_equal_erm_bins_has_largest_u() {
    let raw = tied_bins();
    let spec = BinningSpec::new(vec![vec![-0.5, 0.5, 1.5, 2.5, 3.5], vec![-0.5, 0.5, 1.5, 2.5]]).unwrap();
    let data = bin(&raw, &spec).unwrap();
    let support = Support::full(&data.bins_per_feature());
    let fit = approximate(&data, &support, &RashomonConfig::default(), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    assert!((fit.erm[2] - fit.erm[3]).abs() < 1e-6);

    let k = support.size();
    let slices = explore(&fit.ellipsoid, &support, k - 1, 1000, fit.theta, fit.lambda_s, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
    let best = slices.iter().max_by(|a, b| a.1.u.total_cmp(&b.1.u)).unwrap();
    // pair 1 ties runs 1 and 2 of feature 0
    assert_eq!(best.0.pairs(), &[1]);
    assert!(best.1.u > 0.99);
    for (_, s) in &slices {
        assert!((s.loss_bound - (fit.theta - fit.lambda_s)).abs() < 1e-15);
    }
}

#[test]
fn diabetes_glucose_has_dominant_lower_importance() {
    let raw = diabetes();
    let spec = make_quantile_spec(&raw, 16).unwrap();
    let data = bin(&raw, &spec).unwrap();
    let support = Support::full(&data.bins_per_feature());
    let fit = approximate(&data, &support, &RashomonConfig::default(), &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
    let glucose = raw.feature_names().iter().position(|n| n == "Glucose").unwrap();
    for mode in [ViMode::Free, ViMode::FixOthers] {
        let ranges: Vec<_> = support
            .blocks()
            .iter()
            .enumerate()
            .map(|(j, b)| {
                let coords = b.start + 1..b.end + 1;
                let w: Vec<f64> = b.clone().map(|c| data.pi()[c]).collect();
                vi_range(&fit.ellipsoid, j, coords, &w, mode).unwrap()
            })
            .collect();
        let top = ranges.iter().max_by(|a, b| a.vi_minus.total_cmp(&b.vi_minus)).unwrap();
        assert_eq!(top.feature, glucose, "{mode:?}");
        for r in &ranges {
            assert!(r.vi_minus <= r.vi_center + 1e-12 && r.vi_center <= r.vi_plus + 1e-12);
        }
    }
}

#[test]
fn artifacts_are_reproducible() {
    let raw = tied_bins();
    let spec = make_quantile_spec(&raw, 4).unwrap();
    let data = bin(&raw, &spec).unwrap();
    let support = Support::full(&data.bins_per_feature());
    let run = || {
        let cfg = RashomonConfig::default();
        let fit = approximate(&data, &support, &cfg, &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
        let model = GamModel::from_reduced(&fit.erm, support.clone()).unwrap();
        let doc = ModelDoc::new(&model, &spec, raw.feature_names(), cfg.lambda2, cfg.lambda_s, data.pi()).unwrap();
        let loss = GamObjective::for_support(&data, &support, cfg.lambda2, cfg.lambda_s).unwrap();
        let center_loss = loss.value(fit.ellipsoid.center().as_slice());
        let e = EllipsoidDoc::new(&fit.ellipsoid, fit.theta, cfg.lambda2, cfg.lambda_s, center_loss);
        (to_json(&doc).unwrap(), to_json(&e).unwrap(), fit.trace.to_csv())
    };
    assert_eq!(run(), run());
}
