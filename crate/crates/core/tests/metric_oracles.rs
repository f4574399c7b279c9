mod support;

use mvts_core::codec::{BinaryVisionTensor, SoftVisionTensor};
use mvts_core::metric::{emd_distance, emd_loss_and_grad, w1_column};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::{random_distribution, relative_error, transport_cost};

#[test]
fn closed_form_matches_transport_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..500 {
        let h = rng.random_range(2..=6);
        let p = random_distribution(h, &mut rng);
        let q = random_distribution(h, &mut rng);
        let closed = w1_column(&p, &q).unwrap();
        let oracle = transport_cost(&p, &q);
        assert!((closed - oracle).abs() <= 1e-9, "p={p:?} q={q:?}: {closed} vs {oracle}");
    }
}

fn random_hard(rng: &mut ChaCha8Rng, c: usize, h: usize, t: usize) -> BinaryVisionTensor {
    let hot = (0..c * t).map(|_| rng.random_range(1..=h)).collect();
    BinaryVisionTensor::from_hot_bins(c, h, t, hot).unwrap()
}

#[test]
fn metric_axioms_on_hard_tensors() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..500 {
        let (c, h, t) = (rng.random_range(1..4), rng.random_range(2..30), rng.random_range(1..12));
        let a = random_hard(&mut rng, c, h, t);
        let b = random_hard(&mut rng, c, h, t);
        let x = random_hard(&mut rng, c, h, t);
        let ab = emd_distance(&a, &b).unwrap();
        assert_eq!(emd_distance(&a, &a).unwrap(), 0.0);
        assert!(ab >= 0.0);
        assert_eq!(ab == 0.0, a == b);
        assert_eq!(ab, emd_distance(&b, &a).unwrap());
        assert!(ab <= emd_distance(&a, &x).unwrap() + emd_distance(&x, &b).unwrap());
    }
}

#[test]
fn soft_and_hard_paths_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..50 {
        let a = random_hard(&mut rng, 2, 9, 5);
        let b = random_hard(&mut rng, 2, 9, 5);
        let soft = SoftVisionTensor::from(&a);
        assert_eq!(emd_distance(&soft, &b).unwrap(), emd_distance(&a, &b).unwrap());
    }
}

fn random_soft(rng: &mut ChaCha8Rng, c: usize, h: usize, t: usize) -> Vec<f64> {
    let mut probs = Vec::with_capacity(c * h * t);
    for _ in 0..c * t {
        let logits: Vec<f64> = (0..h).map(|_| rng.random_range(-2.0..2.0)).collect();
        let z: f64 = logits.iter().map(|l| l.exp()).sum();
        probs.extend(logits.iter().map(|l| l.exp() / z));
    }
    probs
}

#[test]
fn loss_gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let step = 1e-7;
    for _ in 0..100 {
        let (c, h, t) = (rng.random_range(1..3), rng.random_range(2..8), rng.random_range(1..4));
        let probs = random_soft(&mut rng, c, h, t);
        let target = random_hard(&mut rng, c, h, t);
        let pred = SoftVisionTensor::from_columns(c, h, t, probs.clone()).unwrap();
        let report = emd_loss_and_grad(&pred, &target).unwrap();
        let loss = |p: &[f64]| {
            let s = SoftVisionTensor::from_columns(c, h, t, p.to_vec()).unwrap();
            emd_loss_and_grad(&s, &target).unwrap().loss
        };

        // mass-preserving directions e_a - e_b inside each column keep the tensor valid
        let mut analytic = Vec::new();
        let mut numeric = Vec::new();
        for col in 0..c * t {
            for a in 0..h {
                for b in 0..h {
                    if a == b {
                        continue;
                    }
                    let (ia, ib) = (col * h + a, col * h + b);
                    let mut plus = probs.clone();
                    let mut minus = probs.clone();
                    plus[ia] += step;
                    plus[ib] -= step;
                    minus[ia] -= step;
                    minus[ib] += step;
                    numeric.push((loss(&plus) - loss(&minus)) / (2.0 * step));
                    analytic.push(report.gradient[ia] - report.gradient[ib]);
                }
            }
        }
        let err = relative_error(&analytic, &numeric);
        assert!(err < 1e-4, "relative error {err}");
    }
}
