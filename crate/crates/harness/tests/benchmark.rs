use labelshift_core::model::TrainerConfig;
use labelshift_harness::config::{ExperimentConfig, UolsMethod};
use labelshift_harness::experiment::run_uols_experiment;
use labelshift_harness::summary::summarize_runs;
use labelshift_harness::synthetic::{gaussian_source, SyntheticBenchmark};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn source_classifier_accuracy_is_in_band() {
    for seed in 0..3 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let source = gaussian_source(ExperimentConfig::default().data_seed).unwrap();
        let b = SyntheticBenchmark::build(source, 0.1, &TrainerConfig::default(), &mut rng).unwrap();
        let acc = b.setup.holdout_accuracy;
        assert!((0.88..=0.94).contains(&acc), "seed {seed}: accuracy {acc}");
        assert!(b.setup.q0.iter().all(|&p| (p - 1.0 / 3.0).abs() < 0.01));
    }
}

#[test]
fn halving_the_holdout_barely_moves_flh_error() {
    let error = |frac: f64| {
        let cfg = ExperimentConfig {
            holdout_frac: frac,
            methods: vec![UolsMethod::FlhFtl],
            ..ExperimentConfig::default()
        };
        let m = summarize_runs(&run_uols_experiment(&cfg).0);
        100.0 * m["flh-ftl"].error_mean.unwrap()
    };
    let (full, half) = (error(0.1), error(0.05));
    assert!((full - half).abs() < 1.0, "{full:.2} vs {half:.2}");
}

#[test]
fn low_switching_method_reports_switches() {
    let cfg = ExperimentConfig {
        methods: vec![UolsMethod::FlhFtl, UolsMethod::Lpa],
        ..ExperimentConfig::default()
    };
    let m = summarize_runs(&run_uols_experiment(&cfg).0);
    let lpa = &m["lpa"];
    assert_eq!(lpa.status, "ok");
    let switches = lpa.switches_mean.unwrap();
    assert!(switches < cfg.uols_horizon() as f64 / 2.0, "{switches} switches");
    assert!(lpa.error_mean.unwrap() < m["flh-ftl"].error_mean.unwrap() + 0.015);
}
