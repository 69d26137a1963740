use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use smfc_core::dataset::{split_chrono, Horizon, SplitSpec, SupervisedDataset, SupervisedWindow};
use smfc_core::forecast::{
    fingerprint, forecast_series, load_ensemble, quantile_crossing_rate, save_ensemble, train_ensemble, ForecastError,
};
use smfc_core::{ModelConfig, TrainConfig};

/// Fixed inputs, targets = centre + N(0, sigma) per output.
fn noisy_constant(n: usize, seed: u64) -> SupervisedDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.05).unwrap();
    let row = [0.1, 0.45, 0.3, 210.0, 18.0, 2400.0, 1.0, 12.0];
    SupervisedDataset {
        horizon: Horizon::Min15,
        deployment_start: 0.0,
        windows: (0..n)
            .map(|i| SupervisedWindow {
                inputs: [row; 4],
                target: [0.45, 0.3, 0.135].map(|c| c + noise.sample(&mut rng)),
                target_interval_start: 900.0 * i as f64,
            })
            .collect(),
    }
}

#[test]
fn quantile_members_are_ordered_on_symmetric_noise() {
    let data = noisy_constant(600, 3);
    let split = split_chrono(&data, SplitSpec::default()).unwrap();
    let tc = TrainConfig::for_horizon(Horizon::Min15);
    let ens = train_ensemble(&split.train, &split.val, &ModelConfig { seed: 21, ..Default::default() }, &tc).unwrap();
    let series = forecast_series(&ens, &split.test).unwrap();
    let ordered = series
        .forecasts
        .iter()
        .filter(|f| (0..3).all(|k| f.lower[k] <= f.median[k] && f.median[k] <= f.upper[k]))
        .count();
    assert!(ordered as f64 >= 0.95 * series.len() as f64, "{ordered}/{}", series.len());
    assert!(quantile_crossing_rate(&series).unwrap().iter().all(|&c| c <= 0.05));
    // Nominal 90% interval on N(0, 0.05): half-width ~0.082.
    for k in 0..3 {
        let f = &series.forecasts[0];
        let width = f.upper[k] - f.lower[k];
        assert!((0.1..0.25).contains(&width), "output {k}: width {width}");
    }

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ens.bin");
    save_ensemble(&ens, &path).unwrap();
    let back = load_ensemble(&path).unwrap();
    assert_eq!(back, ens);
    assert_eq!(back.fingerprint, fingerprint(&split.train));
    assert_eq!(forecast_series(&back, &split.test).unwrap(), series);

    let other = noisy_constant(600, 4);
    assert_ne!(fingerprint(&other), ens.fingerprint);
    let wrong_horizon = SupervisedDataset { horizon: Horizon::Min5, ..split.test.clone() };
    assert!(matches!(forecast_series(&ens, &wrong_horizon), Err(ForecastError::HorizonMismatch { .. })));
}
