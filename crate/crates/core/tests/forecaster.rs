mod support;

use mvts_core::codec::{self, BinaryVisionTensor, CodecParams, NumericSeries};
use mvts_core::forecaster::{
    evaluate_predictor, predict, quantization_floor, sweep, train, NetShape, SweepMode, TrainingSample,
};
use mvts_core::pipeline::{make_windows, split_dataset, SplitRatios, WindowSpec};
use mvts_core::sme::solve_optimal_ms;
use mvts_core::synthetic::{gaussian_noise, noisy_sine};
use mvts_core::{Dataset, DecodeMode, Persistence, Predictor, ReferenceNet, ReferenceNetConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::relative_error;

fn random_hard(rng: &mut ChaCha8Rng, h: usize, t: usize) -> BinaryVisionTensor {
    BinaryVisionTensor::from_hot_bins(1, h, t, (0..t).map(|_| rng.random_range(1..=h)).collect()).unwrap()
}

#[test]
fn full_chain_gradient_matches_central_differences() {
    let shape = NetShape {
        height: 6,
        lookback: 4,
        horizon: 2,
        hidden: 8,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for trial in 0..5 {
        let net = ReferenceNet::initialize(shape, 1.0, &mut rng).unwrap();
        let samples: Vec<TrainingSample> = (0..3)
            .map(|_| TrainingSample {
                vx: random_hard(&mut rng, 6, 4),
                vy: random_hard(&mut rng, 6, 2),
            })
            .collect();
        let (_, analytic) = net.loss_and_grad(&samples).unwrap();
        let loss = |theta: &[f64]| {
            ReferenceNet::from_parameters(shape, theta.to_vec())
                .unwrap()
                .loss(&samples)
                .unwrap()
        };
        let numeric: Vec<f64> = (0..net.theta().len())
            .map(|i| support::central_difference(loss, net.theta(), i, 1e-6))
            .collect();
        let err = relative_error(&analytic, &numeric);
        assert!(err < 1e-4, "trial {trial}: relative error {err}");
    }
}

#[test]
fn one_sample_is_memorized() {
    let params = CodecParams::new(8, 2.0).unwrap();
    let data = Dataset::from_series(noisy_sine(20, 10.0, 0.0, 0), None);
    let spec = WindowSpec::new(6, 3, 1).unwrap();
    let pair = make_windows(&data, &spec, 0..9, false).unwrap().next().unwrap();
    let mut cfg = ReferenceNetConfig::new(3);
    cfg.hidden = 16;
    cfg.learning_rate = 2.0;
    cfg.epochs = 500;
    let out = train([&pair], &cfg, &params).unwrap();
    let last = *out.loss_curve.last().unwrap();
    assert!(last < 0.05 * out.loss_curve[0] && last < 0.05, "{:?}", &out.loss_curve[..5]);
    let hard = codec::harden(&out.net.forward(&codec::encode(&pair.x, &params)).unwrap());
    assert_eq!(hard, codec::encode(&pair.y, &params));
}

#[test]
fn fixed_seed_gives_identical_loss_curve() {
    let params = CodecParams::new(10, 2.3).unwrap();
    let data = Dataset::from_series(noisy_sine(200, 20.0, 0.1, 3), None);
    let spec = WindowSpec::new(12, 4, 1).unwrap();
    let pairs: Vec<_> = make_windows(&data, &spec, 0..200, true).unwrap().collect();
    let mut cfg = ReferenceNetConfig::new(4);
    cfg.hidden = 12;
    cfg.epochs = 3;
    let a = train(&pairs, &cfg, &params).unwrap();
    let b = train(&pairs, &cfg, &params).unwrap();
    let bits = |c: &[f64]| c.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a.loss_curve), bits(&b.loss_curve));
    assert_eq!(bits(a.net.theta()), bits(b.net.theta()));
    cfg.seed = 1;
    assert_ne!(train(&pairs, &cfg, &params).unwrap().loss_curve, a.loss_curve);
}

#[test]
fn persistence_on_constant_window_continues_the_constant() {
    let params = CodecParams::new(50, 2.29).unwrap();
    let window = NumericSeries::new(1, 8, vec![4.25; 8]).unwrap();
    let f = predict(&Persistence::new(5).unwrap(), &window, 8, &params, DecodeMode::Argmax).unwrap();
    assert!(f.norm[0].floored);
    for v in f.values.values() {
        assert!((v - 4.25).abs() <= params.ms() / 50.0 * f.norm[0].std + 1e-12);
    }
    assert!(predict(&Persistence::new(5).unwrap(), &window, 7, &params, DecodeMode::Argmax).is_err());
}

#[test]
fn predicted_values_re_encode_to_the_hardened_output() {
    let params = CodecParams::new(16, 2.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let shape = NetShape {
        height: 16,
        lookback: 10,
        horizon: 4,
        hidden: 8,
    };
    let net = ReferenceNet::initialize(shape, 3.0, &mut rng).unwrap();
    let window = noisy_sine(10, 7.0, 0.2, 8);
    let f = predict(&net, &window, 10, &params, DecodeMode::Argmax).unwrap();
    assert_eq!(codec::encode(&f.normalized, &params), f.hard);
}

#[test]
fn smoke_run_beats_persistence() {
    let steps = 2000;
    let data = Dataset::from_series(noisy_sine(steps, 48.0, 0.1, 42), None);
    let spec = WindowSpec::new(96, 24, 1).unwrap();
    let ranges = split_dataset(steps, SplitRatios::default(), &spec).unwrap();
    let train_pairs: Vec<_> = make_windows(&data, &spec, ranges.train, true).unwrap().collect();
    let test_pairs: Vec<_> = make_windows(&data, &spec, ranges.test, true).unwrap().collect();
    let h = 32;
    let params = CodecParams::new(h, solve_optimal_ms(h, 1e-6).unwrap()).unwrap();
    let mut cfg = ReferenceNetConfig::new(24);
    cfg.hidden = 64;

    let out = train(&train_pairs, &cfg, &params).unwrap();
    let drop = 1.0 - out.loss_curve.last().unwrap() / out.loss_curve[0];
    assert!(drop >= 0.3, "loss dropped {drop}");

    let model = evaluate_predictor(&out.net, &test_pairs, &params, DecodeMode::Argmax).unwrap();
    let baseline = evaluate_predictor(&Persistence::new(24).unwrap(), &test_pairs, &params, DecodeMode::Argmax).unwrap();
    let floor = quantization_floor(&test_pairs, &params).unwrap();
    assert!(model.mae < baseline.mae, "model {} vs persistence {}", model.mae, baseline.mae);
    assert!(model.mae >= floor.mae, "model {} vs floor {}", model.mae, floor.mae);
}

#[test]
fn codec_only_sweep_tracks_the_optimal_scale() {
    let data = Dataset::from_series(gaussian_noise(1, 40_000, 17), None);
    let spec = WindowSpec::new(96, 24, 24).unwrap();
    let pairs: Vec<_> = make_windows(&data, &spec, 0..40_000, true).unwrap().collect();
    let grid: Vec<CodecParams> = (0..=40)
        .map(|n| CodecParams::new(200, 1.5 + 0.05 * n as f64).unwrap())
        .collect();
    let rows = sweep(&[], &pairs, &grid, &SweepMode::CodecOnly, DecodeMode::Argmax).unwrap();
    assert_eq!(rows.len(), grid.len());
    let best = rows.iter().min_by(|a, b| a.mae.total_cmp(&b.mae)).unwrap();
    let target = solve_optimal_ms(200, 1e-6).unwrap();
    assert!((best.ms - target).abs() <= 0.3, "argmin {} vs {target}", best.ms);

    let by_h: Vec<CodecParams> = [10, 20, 50, 100, 200, 400, 800]
        .iter()
        .map(|&h| CodecParams::new(h, 2.79).unwrap())
        .collect();
    let rows = sweep(&[], &pairs, &by_h, &SweepMode::CodecOnly, DecodeMode::Argmax).unwrap();
    assert!(rows.windows(2).all(|w| w[1].mae <= w[0].mae));
}
