use ieca::dataset_io::{read_csv, DataMatrix, LoadOptions};
use ieca::engine::{self, result_sse, sigma_matrix, EngineConfig, KSelection, Mode};
use ieca::metrics::{ari, validate};
use ieca::synth::{gaussian_blobs, liver_like, triangle_blobs};
use proptest::prelude::*;

#[test]
fn mixed_csv_end_to_end() {
    let text = "\
temp,cough,city,age,class
38.5,yes,north,40,sick
36.6,no,south,35,well
39.1,yes,north,?,sick
36.7,no,south,29,well
38.9,yes,north,51,sick
36.5,no,south,33,well
38.7,yes,north,47,sick
36.8,no,south,31,well
";
    let m = read_csv(text.as_bytes(), &LoadOptions::default()).unwrap();
    let (x, truth) = m.split_target("class").unwrap();
    let cfg = EngineConfig {
        k: KSelection::Fixed(2),
        ..Default::default()
    };
    let r = engine::run(&x, &cfg).unwrap();
    assert_eq!(r.labels.len(), 8);
    assert_eq!(r.k(), 2);
    assert_eq!(r.centroids.ncols(), 4);
    let kept: Vec<&str> = r.rows.iter().map(|&i| truth.labels[i].as_str()).collect();
    assert_eq!(ari(&r.labels, &kept).unwrap(), 1.0);
}

#[test]
fn liver_shaped_table_recovers_both_classes() {
    let (m, truth) = liver_like(11);
    let r = engine::run(&m, &EngineConfig::default()).unwrap();
    let p = engine::prepare(&m, &EngineConfig::default()).unwrap();
    let kept: Vec<&str> = r.rows.iter().map(|&i| truth.labels[i].as_str()).collect();
    let report = validate(p.data.view(), &r.labels, &kept, r.normalized_centroids.view()).unwrap();
    assert!(report.is_finite());
    assert_eq!(report.k_pred, 2);
    assert!(report.ari > 0.9, "{report:?}");
}

#[test]
fn baseline_matches_contract_on_numeric_data() {
    let b = triangle_blobs(150, 0.1, 6.0, 5);
    let cfg = EngineConfig {
        mode: Mode::Eca,
        social_class_ranks: 3,
        ..Default::default()
    };
    let r = engine::run_baseline_eca(&b.to_matrix(), &cfg).unwrap();
    assert_eq!(r.k_initial, 3);
    assert!(r.elbow.is_none());
    assert!(ari(&r.labels, &b.labels).unwrap() > 0.9);
}

fn check_invariants(m: &DataMatrix, cfg: &EngineConfig) -> Result<(), TestCaseError> {
    let r = engine::run(m, cfg).unwrap();
    let p = engine::prepare(m, cfg).unwrap();
    let n = p.data.nrows();
    prop_assert_eq!(r.labels.len(), n);
    prop_assert_eq!(r.sizes().iter().sum::<usize>(), n);
    prop_assert!(r.sizes().iter().all(|&s| s > 0));
    prop_assert!(r.normalized_centroids.iter().all(|&v| (0.0..=1.0).contains(&v)));
    if let Some(last) = r.trace.last() {
        let sse = result_sse(p.data.view(), &r).unwrap();
        prop_assert!((last.sse - sse).abs() <= 1e-9, "trace {} vs recomputed {}", last.sse, sse);
        prop_assert_eq!(last.k_live, r.k());
    }
    let s = sigma_matrix(p.data.view(), &r.labels);
    prop_assert!(s.iter().all(|&v| v > 0.0));
    prop_assert_eq!(&engine::run(m, cfg).unwrap(), &r);
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn run_invariants_on_blobs(
        k in 2usize..5,
        d in 2usize..4,
        sigma in 0.05f64..1.0,
        seed in 0u64..1000,
        baseline in any::<bool>(),
    ) {
        let b = gaussian_blobs(k, d, 120, sigma, 6.0, seed);
        let cfg = EngineConfig {
            mode: if baseline { Mode::Eca } else { Mode::Ieca },
            seed,
            ..Default::default()
        };
        check_invariants(&b.to_matrix(), &cfg)?;
    }

    #[test]
    fn fixed_k_start_never_grows(k in 1usize..9, seed in 0u64..1000) {
        let b = triangle_blobs(90, 0.1, 6.0, seed);
        let cfg = EngineConfig { k: KSelection::Fixed(k), seed, ..Default::default() };
        let r = engine::run(&b.to_matrix(), &cfg).unwrap();
        prop_assert!(r.k() <= k);
        prop_assert!(r.k() >= 1);
    }
}
