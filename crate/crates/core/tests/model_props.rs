use labelshift_core::data::GaussianMixtureSource;
use labelshift_core::model::{train_weighted, Dataset, SoftmaxLinear, TrainerConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_case(rng: &mut ChaCha8Rng) -> (SoftmaxLinear<f64>, Dataset<f64>, Vec<f64>, f64) {
    let k = rng.random_range(2..6);
    let d = rng.random_range(1..8);
    let n = rng.random_range(1..20);
    let w = (0..k * d).map(|_| rng.random_range(-2.0..2.0)).collect();
    let b = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
    let model = SoftmaxLinear::from_parts(k, d, w, b).unwrap();
    let mut data = Dataset::new(d);
    for _ in 0..n {
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(-1.5..1.5)).collect();
        data.push(&x, rng.random_range(0..k));
    }
    let weights = (0..n).map(|_| rng.random_range(0.0..3.0)).collect();
    let l2 = if rng.random_bool(0.5) {
        rng.random_range(0.0..0.1)
    } else {
        0.0
    };
    (model, data, weights, l2)
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

#[test]
fn gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let h = 1e-5;
    for case in 0..20 {
        let (model, data, weights, l2) = random_case(&mut rng);
        let idx: Vec<usize> = (0..data.len()).collect();
        let (_, grad) = model.loss_gradient(&data, &idx, Some(&weights), l2);
        let f = |m: &SoftmaxLinear<f64>| m.objective(&data, Some(&weights), l2);
        for j in 0..model.weights().len() {
            let (mut plus, mut minus) = (model.clone(), model.clone());
            plus.weights_mut()[j] += h;
            minus.weights_mut()[j] -= h;
            let fd = (f(&plus) - f(&minus)) / (2.0 * h);
            let e = rel_err(grad.weights[j], fd);
            assert!(e <= 1e-5, "case {case}, weight {j}: {} vs {fd} ({e})", grad.weights[j]);
        }
        for c in 0..model.bias().len() {
            let (mut plus, mut minus) = (model.clone(), model.clone());
            plus.bias_mut()[c] += h;
            minus.bias_mut()[c] -= h;
            let fd = (f(&plus) - f(&minus)) / (2.0 * h);
            let e = rel_err(grad.bias[c], fd);
            assert!(e <= 1e-5, "case {case}, bias {c}: {} vs {fd} ({e})", grad.bias[c]);
        }
    }
}

#[test]
fn full_batch_objective_never_increases() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let source = GaussianMixtureSource::<f64>::random(3, 12, 0.215, &mut rng).unwrap();
    let data = source.balanced_dataset(100, &mut rng);
    for lr in [0.001, 0.005, 0.01] {
        let cfg = TrainerConfig {
            learning_rate: lr,
            momentum: 0.0,
            batch_size: data.len(),
            l2: 1e-4,
            epochs: 50,
        };
        let mut model = SoftmaxLinear::zeros(3, 12);
        let report = train_weighted(&mut model, &data, None, &cfg, &mut rng).unwrap();
        for pair in report.epoch_losses.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-12, "lr {lr}: {pair:?}");
        }
    }
}

#[test]
fn extreme_logits_stay_finite() {
    for scale in [1.0f64, 1e2, 1e4] {
        let model = SoftmaxLinear::<f64>::from_parts(3, 1, vec![scale, -scale, 0.0], vec![0.0; 3]).unwrap();
        for x in [-1.0, 0.0, 1.0] {
            let p = model.predict_proba(&[x]).unwrap();
            assert!(p.iter().all(|v| v.is_finite()));
            assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
    }
}
