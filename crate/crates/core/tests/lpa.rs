mod common;

use common::{four_segment_truth, noisy, rng, sq_dist, tse};
use labelshift_core::lpa::{Lpa, LpaConfig, SwitchReason};
use labelshift_core::regression::{FlhFtl, OnlineRegressor, RunningAverage};
use proptest::prelude::*;

/// Direct transcription of the phased-averaging loop, recomputing the drift
/// sum from stored estimates every round.
struct Naive<R> {
    inner: R,
    threshold: f64,
    prev: Vec<f64>,
    b: usize,
    t: usize,
    zs: Vec<Vec<f64>>,
    estimates: Vec<Vec<f64>>,
    restarts: Vec<usize>,
}

impl<R: OnlineRegressor<f64>> Naive<R> {
    fn new(inner: R, threshold: f64) -> Self {
        let k = inner.dim();
        Self {
            inner,
            threshold,
            prev: vec![0.0; k],
            b: 1,
            t: 0,
            zs: Vec::new(),
            estimates: Vec::new(),
            restarts: Vec::new(),
        }
    }

    fn step(&mut self, z: &[f64]) -> Vec<f64> {
        self.t += 1;
        let t = self.t;
        let out = self.prev.clone();
        self.zs.push(z.to_vec());
        self.estimates.push(self.inner.predict());
        let stat: f64 = (self.b + 1..=t)
            .map(|j| sq_dist(&self.prev, &self.estimates[j - 1]))
            .sum();
        if stat > self.threshold {
            self.restarts.push(t);
            self.b = t + 1;
            self.prev = z.to_vec();
            self.inner.reset();
        } else if (t - self.b + 1).is_power_of_two() {
            let n = (t - self.b + 1) as f64;
            let k = z.len();
            self.prev = (0..k)
                .map(|i| self.zs[self.b - 1..t].iter().map(|v| v[i]).sum::<f64>() / n)
                .collect();
        }
        self.inner.update(z).unwrap();
        out
    }
}

fn config(sigma_sq: f64, horizon: usize) -> LpaConfig<f64> {
    LpaConfig {
        delta: 0.05,
        sigma_sq,
        horizon,
    }
}

fn close(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-9 * (1.0 + x.abs()))
}

fn piecewise_stream(levels: &[Vec<f64>], len: usize, noise: &[Vec<f64>]) -> Vec<Vec<f64>> {
    (0..levels.len() * len)
        .map(|t| levels[t / len].iter().zip(&noise[t]).map(|(a, e)| a + e).collect())
        .collect()
}

proptest! {
    #[test]
    fn matches_naive_reference(
        levels in prop::collection::vec(prop::collection::vec(-2.0f64..2.0, 2), 1..5),
        noise in prop::collection::vec(prop::collection::vec(-0.3f64..0.3, 2), 160),
        len in 5usize..40,
        sigma_sq in 0.001f64..0.05,
    ) {
        let z = piecewise_stream(&levels, len, &noise);
        let cfg = config(sigma_sq, z.len());
        let mut lpa = Lpa::new(RunningAverage::new(2), cfg).unwrap();
        let mut naive = Naive::new(RunningAverage::new(2), cfg.threshold(2));
        for x in &z {
            let ours = lpa.step(x).unwrap();
            let theirs = naive.step(x);
            prop_assert!(close(&ours.output, &theirs), "{:?} vs {:?}", ours.output, theirs);
        }
        prop_assert_eq!(lpa.restarts(), &naive.restarts[..]);
    }

    #[test]
    fn output_changes_only_at_logged_rounds(
        z in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 3), 1..200),
        sigma_sq in 0.0f64..0.2,
    ) {
        let mut lpa = Lpa::new(FlhFtl::new(3, 0.3).unwrap(), config(sigma_sq, z.len())).unwrap();
        let mut outputs = Vec::new();
        for x in &z {
            let s = lpa.step(x).unwrap();
            outputs.push(s.output);
            if s.restart {
                prop_assert_eq!(&lpa.predict(), x);
            }
        }
        let logged: Vec<usize> = lpa.switch_log().iter().map(|e| e.round).collect();
        for t in 2..=z.len() {
            if outputs[t - 1] != outputs[t - 2] {
                prop_assert!(logged.contains(&(t - 1)), "undeclared change at round {}", t);
            }
        }
        prop_assert!(lpa.drift_stat() >= 0.0);
        prop_assert!(lpa.count_switches() <= lpa.switch_log().len());
    }
}

#[test]
fn constant_noise_free_stream_never_restarts() {
    let theta = vec![0.3, 0.3, 0.4];
    let mut lpa = Lpa::new(FlhFtl::new(3, 0.5).unwrap(), config(0.01, 100)).unwrap();
    for _ in 0..100 {
        lpa.step(&theta).unwrap();
    }
    assert!(lpa.restarts().is_empty());
    assert!(close(&lpa.predict(), &theta));
}

#[test]
fn refreshes_happen_at_powers_of_two() {
    let mut lpa = Lpa::new(RunningAverage::new(1), config(1e6, 64)).unwrap();
    for t in 1..=64 {
        lpa.step(&[t as f64]).unwrap();
    }
    let rounds: Vec<usize> = lpa.switch_log().iter().map(|e| e.round).collect();
    assert_eq!(rounds, vec![1, 2, 4, 8, 16, 32, 64]);
    assert!(lpa.switch_log().iter().all(|e| e.reason == SwitchReason::Refresh));
    assert!(lpa.count_switches() <= 7);
}

#[test]
fn all_zero_stream_never_switches() {
    let mut lpa = Lpa::new(RunningAverage::new(2), config(0.1, 50)).unwrap();
    for _ in 0..50 {
        assert!(!lpa.step(&[0.0, 0.0]).unwrap().switched);
    }
    assert_eq!(lpa.count_switches(), 0);
}

#[test]
fn single_jump_is_detected_once_and_quickly() {
    let horizon = 400;
    let cfg = config(0.1, horizon);
    let threshold = cfg.threshold(3);
    let jump_sq = 2.0;
    // The inner oracle needs a few rounds to follow the jump.
    let bound = (threshold / jump_sq).ceil() as usize + 15;
    for seed in 0..20 {
        let truth: Vec<Vec<f64>> = (0..horizon)
            .map(|t| {
                if t < 200 {
                    vec![1.0, 0.0, 0.0]
                } else {
                    vec![0.0, 1.0, 0.0]
                }
            })
            .collect();
        let z = noisy(&truth, &mut rng(seed));
        let mut lpa = Lpa::new(FlhFtl::new(3, 1.0 / 3.0).unwrap(), cfg).unwrap();
        let mut naive = Naive::new(FlhFtl::new(3, 1.0 / 3.0).unwrap(), threshold);
        for x in &z {
            lpa.step(x).unwrap();
            naive.step(x);
        }
        assert_eq!(lpa.restarts(), &naive.restarts[..]);
        assert_eq!(lpa.restarts().len(), 1, "seed {seed}: {:?}", lpa.restarts());
        let delay = lpa.restarts()[0] - 200;
        assert!(delay <= bound, "seed {seed}: delay {delay} > {bound}");
    }
}

#[test]
fn switches_and_error_on_four_segments() {
    let horizon = 1024;
    let truth = four_segment_truth(horizon);
    let cfg = config(0.1, horizon);
    let slack = cfg.threshold(3) * 5.0;
    let bound = 4.0 * ((horizon as f64).log2() + 2.0);
    let mut failures = 0;
    for seed in 0..20 {
        let z = noisy(&truth, &mut rng(1000 + seed));
        let mut lpa = Lpa::new(FlhFtl::new(3, 1.0 / 3.0).unwrap(), cfg).unwrap();
        let mut flh = FlhFtl::new(3, 1.0 / 3.0).unwrap();
        let (mut ours, mut plain) = (Vec::new(), Vec::new());
        for x in &z {
            ours.push(lpa.step(x).unwrap().output);
            plain.push(flh.predict());
            flh.update(x).unwrap();
        }
        let ok = lpa.restarts().len() <= 4
            && lpa.count_switches() as f64 <= bound
            && tse(&ours, &truth) <= 3.0 * tse(&plain, &truth) + slack;
        failures += usize::from(!ok);
    }
    assert!(failures <= 1, "{failures} of 20 seeds broke the bounds");
}
