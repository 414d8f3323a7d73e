use labelshift_core::data::{ClassPools, Exhaustion};
use labelshift_core::shift::{corner_anchors, draw_stream, make_schedule, ShiftKind, ShiftParams};
use labelshift_core::simplex::SimplexVector;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn simplex(k: usize) -> impl Strategy<Value = SimplexVector<f64>> {
    prop::collection::vec(0.0f64..1.0, k).prop_filter_map("zero mass", |v| SimplexVector::normalized(v).ok())
}

fn kind() -> impl Strategy<Value = ShiftKind> {
    prop::sample::select(ShiftKind::ALL.to_vec())
}

proptest! {
    #[test]
    fn every_marginal_is_a_distribution(
        (mu1, mu2) in (2usize..6).prop_flat_map(|k| (simplex(k), simplex(k))),
        kind in kind(),
        horizon in 1usize..300,
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = make_schedule(kind, horizon, (mu1, mu2), ShiftParams::default(), &mut rng).unwrap();
        prop_assert_eq!(s.marginals().len(), horizon);
        for (q, &a) in s.marginals().iter().zip(s.alphas()) {
            prop_assert!((0.0..=1.0).contains(&a));
            prop_assert!(q.iter().all(|&x| x >= 0.0));
            prop_assert!((q.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn square_wave_has_period_two_l(period in 1usize..40, horizon in 1usize..400) {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let params = ShiftParams { period: Some(period), ..Default::default() };
        let s = make_schedule(ShiftKind::Square, horizon, corner_anchors::<f64>(3, 0.01).unwrap(), params, &mut rng).unwrap();
        let a = s.alphas();
        for t in 0..a.len().saturating_sub(2 * period) {
            prop_assert_eq!(a[t], a[t + 2 * period]);
        }
    }
}

#[test]
fn bernoulli_flip_count_is_near_sqrt_t() {
    let horizon = 1000;
    let root = (horizon as f64).sqrt();
    let flips: usize = (0..200)
        .map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let anchors = corner_anchors::<f64>(3, 0.01).unwrap();
            make_schedule(ShiftKind::Bernoulli, horizon, anchors, ShiftParams::default(), &mut rng)
                .unwrap()
                .alpha_changes()
        })
        .sum();
    let mean = flips as f64 / 200.0;
    assert!((0.8 * root..=1.2 * root).contains(&mean), "mean flips {mean}");
}

#[test]
fn default_sinusoid_period_at_t_1000() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let anchors = corner_anchors::<f64>(3, 0.01).unwrap();
    let s = make_schedule(ShiftKind::Sinusoidal, 1000, anchors, ShiftParams::default(), &mut rng).unwrap();
    assert_eq!(s.period(), 31);
}

#[test]
fn stream_labels_follow_the_schedule() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let anchors = corner_anchors::<f64>(3, 0.05).unwrap();
    let s = make_schedule(ShiftKind::Monotone, 200, anchors, ShiftParams::default(), &mut rng).unwrap();
    let items = (0..3).flat_map(|c| (0..100).map(move |i| (c, (c, i))));
    let mut pools = ClassPools::from_labelled(items, 3, Exhaustion::Recycle, &mut rng).unwrap();
    let rounds = draw_stream(&s, &mut pools, 50, &mut rng).unwrap();
    let mut counts = [0.0; 3];
    let mut expected = [0.0; 3];
    for (r, q) in rounds.iter().zip(s.marginals()) {
        assert_eq!(r.labels.len(), 50);
        for (&y, item) in r.labels.iter().zip(&r.items) {
            assert_eq!(item.0, y);
            counts[y] += 1.0;
        }
        expected.iter_mut().zip(q.iter()).for_each(|(e, p)| *e += 50.0 * p);
    }
    for c in 0..3 {
        assert!((counts[c] - expected[c]).abs() <= 4.0 * expected[c].sqrt() + 1.0);
    }
}
