//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

use std::collections::BTreeMap;
use std::time::Instant;

use labelshift_core::lpa::{Lpa, LpaConfig};
use labelshift_core::model::{SoftmaxLinear, TrainerConfig};
use labelshift_core::regression::{FixedEstimate, FlhFtl, OnlineRegressor};
use labelshift_core::shift::{corner_anchors, make_schedule, ShiftKind, ShiftParams};
use labelshift_core::simplex::{project_simplex, SimplexVector};
use labelshift_core::sols::{LearnerKind, SolsConfig, SolsLearner};
use labelshift_harness::config::{ExperimentConfig, UolsMethod};
use labelshift_harness::experiment::{prepare_sols, run_sols_experiment, run_uols_experiment, MethodRun};
use labelshift_harness::summary::{summarize_runs, MethodSummary};
use labelshift_harness::synthetic::{gaussian_source, SyntheticBenchmark};
use labelshift_harness::trace::write_trace;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

type Methods = BTreeMap<String, MethodSummary>;

fn pct(m: &Methods, name: &str) -> f64 {
    100.0 * m[name].error_mean.expect("method ran")
}

fn uols(shift: ShiftKind) -> (Methods, Vec<MethodRun>, f64) {
    let cfg = ExperimentConfig {
        shift,
        ..ExperimentConfig::default()
    };
    let start = Instant::now();
    let (runs, _) = run_uols_experiment(&cfg);
    let secs = start.elapsed().as_secs_f64();
    (summarize_runs(&runs), runs, secs)
}

fn all_ok(m: &Methods) -> bool {
    m.values().all(|s| s.status == "ok")
}

fn within(m: &Methods, targets: &[(&str, f64)], tol: f64) -> (bool, String) {
    let mut ok = true;
    let parts: Vec<String> = targets
        .iter()
        .map(|&(name, target)| {
            let got = pct(m, name);
            let hit = (got - target).abs() <= tol;
            ok &= hit;
            format!(
                "{name} {got:.2} (target {target}{})",
                if hit { "" } else { ", out of band" }
            )
        })
        .collect();
    (ok, parts.join(", "))
}

fn criterion_1(m: &Methods, secs: f64) -> Outcome {
    let (band, text) = within(
        m,
        &[
            ("base", 8.6),
            ("fth", 6.5),
            ("ftfwh", 6.6),
            ("flh-ftl", 5.4),
            ("oracle", 3.7),
        ],
        1.5,
    );
    let order =
        pct(m, "oracle") < pct(m, "flh-ftl") && pct(m, "flh-ftl") < pct(m, "fth") && pct(m, "fth") <= pct(m, "base");
    outcome(
        all_ok(m) && band && order && secs < 300.0,
        format!(
            "{text}; ordering {}; {secs:.1}s",
            if order { "holds" } else { "violated" }
        ),
    )
}

fn criterion_2(m: &Methods) -> Outcome {
    let (band, text) = within(
        m,
        &[("base", 8.2), ("fth", 5.7), ("flh-ftl", 5.4), ("oracle", 3.9)],
        1.5,
    );
    let (o, f, h, b) = (pct(m, "oracle"), pct(m, "flh-ftl"), pct(m, "fth"), pct(m, "base"));
    let order = o < f && o < h && f < b && h < b;
    outcome(
        all_ok(m) && band && order,
        format!("{text}; ordering {}", if order { "holds" } else { "violated" }),
    )
}

fn criterion_3(ber: &Methods, sin: &Methods) -> Outcome {
    let per_seed = |m: &Methods| m["flh-ftl"].mses.iter().zip(&m["fth"].mses).all(|(f, h)| f < h);
    let mean = |m: &Methods, n: &str| m[n].mse_mean.expect("method ran");
    let ratio = mean(ber, "flh-ftl") / mean(ber, "fth");
    let pass = per_seed(ber) && per_seed(sin) && ratio <= 0.8;
    outcome(
        pass,
        format!(
            "Ber FLH-FTL {:.4} vs FTH {:.4} (ratio {ratio:.2}); Sin FLH-FTL {:.4} vs FTH {:.4}; per-seed dominance Ber {} Sin {}",
            mean(ber, "flh-ftl"),
            mean(ber, "fth"),
            mean(sin, "flh-ftl"),
            mean(sin, "fth"),
            per_seed(ber),
            per_seed(sin)
        ),
    )
}

fn criterion_4() -> Outcome {
    const M: usize = 100_000;
    let mut worst: f64 = 0.0;
    let mut pass = true;
    for seed in 0..3u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let source = gaussian_source(ExperimentConfig::default().data_seed).unwrap();
        let bench = SyntheticBenchmark::build(source, 1.0, &TrainerConfig::default(), &mut rng).unwrap();
        let c = &bench.setup.confusion;
        let bound = 5.0 / ((M as f64).sqrt() * c.sigma_min());
        let raw: Vec<f64> = (0..3).map(|_| -rng.random::<f64>().max(1e-12).ln()).collect();
        let q = SimplexVector::normalized(raw).unwrap();
        let mut mean = [0.0; 3];
        for _ in 0..M {
            let y = q.sample(&mut rng);
            let x = bench.source.sample(y, &mut rng);
            let s = c.estimate_marginal(&bench.setup.model.predict_proba(&x).unwrap());
            mean.iter_mut().zip(&s).for_each(|(m, v)| *m += v / M as f64);
        }
        let dist = mean
            .iter()
            .zip(q.iter())
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        worst = worst.max(dist / bound);
        pass &= dist <= bound;
    }
    outcome(pass, format!("worst |mean - q| / bound = {worst:.2} over 3 random q"))
}

const NOISE: f64 = 0.547_722_557_505_166_1;

fn four_segments(horizon: usize) -> Vec<Vec<f64>> {
    let levels = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]];
    (0..horizon)
        .map(|t| levels[(4 * t / horizon).min(3)].to_vec())
        .collect()
}

fn noisy(truth: &[Vec<f64>], seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    truth
        .iter()
        .map(|th| th.iter().map(|&x| x + rng.random_range(-NOISE..NOISE)).collect())
        .collect()
}

fn tse(est: &[Vec<f64>], truth: &[Vec<f64>]) -> f64 {
    est.iter()
        .zip(truth)
        .map(|(e, t)| e.iter().zip(t).map(|(a, b)| (a - b).powi(2)).sum::<f64>())
        .sum()
}

fn flh_run(z: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut flh = FlhFtl::new(3, FlhFtl::<f64>::experimental_rate(3)).unwrap();
    z.iter()
        .map(|x| {
            let p = flh.predict();
            flh.update(x).unwrap();
            p
        })
        .collect()
}

fn criterion_5() -> Outcome {
    let truth = four_segments(1000);
    let (mut ours, mut raw) = (0.0, 0.0);
    for seed in 0..5 {
        let z = noisy(&truth, seed);
        ours += tse(&flh_run(&z), &truth);
        raw += tse(&z, &truth);
    }
    let ratio = ours / raw;
    let mut growth = Vec::new();
    for t in [250, 500] {
        let mean = |h: usize| {
            let truth = vec![vec![0.2, 0.3, 0.5]; h];
            (0..5)
                .map(|s| tse(&flh_run(&noisy(&truth, 100 + s)), &truth))
                .sum::<f64>()
                / 5.0
        };
        growth.push(mean(2 * t) / mean(t));
    }
    let pass = ratio <= 0.5 && growth.iter().all(|&g| g <= 1.6);
    outcome(
        pass,
        format!(
            "TSE ratio {ratio:.3}; TSE(2T)/TSE(T) {:.2} at T=250, {:.2} at T=500",
            growth[0], growth[1]
        ),
    )
}

fn criterion_6() -> Outcome {
    let horizon = 1000;
    let segments = 4;
    let truth = four_segments(horizon);
    let cfg = LpaConfig {
        delta: 0.05,
        sigma_sq: 0.1,
        horizon,
    };
    let threshold = cfg.threshold(3);
    // Squared jump between vertices against the per-round share of the threshold.
    let jump_ratio = 2.0 / (threshold / (horizon / segments) as f64);
    let switch_bound = segments as f64 * ((horizon as f64).log2() + 2.0);
    let slack = threshold * (segments + 1) as f64;
    let mut failures = 0;
    let (mut max_switches, mut max_restarts) = (0, 0);
    for seed in 0..20 {
        let z = noisy(&truth, 2000 + seed);
        let mut lpa = Lpa::new(FlhFtl::new(3, FlhFtl::<f64>::experimental_rate(3)).unwrap(), cfg).unwrap();
        let ours: Vec<Vec<f64>> = z.iter().map(|x| lpa.step(x).unwrap().output).collect();
        let plain = flh_run(&z);
        max_switches = max_switches.max(lpa.count_switches());
        max_restarts = max_restarts.max(lpa.restarts().len());
        let ok = lpa.restarts().len() <= segments
            && lpa.count_switches() as f64 <= switch_bound
            && tse(&ours, &truth) <= 3.0 * tse(&plain, &truth) + slack;
        failures += usize::from(!ok);
    }
    let mut quiet = Lpa::new(FlhFtl::new(3, 1.0 / 3.0).unwrap(), cfg).unwrap();
    for _ in 0..horizon {
        quiet.step(&[0.2, 0.3, 0.5]).unwrap();
    }
    let failure_rate = failures as f64 / 20.0;
    let pass = jump_ratio >= 10.0 && failure_rate <= 0.05 && quiet.restarts().is_empty();
    outcome(
        pass,
        format!(
            "jump/threshold share {jump_ratio:.1}; failures {failures}/20; max switches {max_switches} (bound {switch_bound:.0}); max restarts {max_restarts}; noise-free restarts {}",
            quiet.restarts().len()
        ),
    )
}

/// Changes its estimate every round.
struct Wobble(usize);

impl OnlineRegressor<f64> for Wobble {
    fn dim(&self) -> usize {
        3
    }

    fn predict(&self) -> Vec<f64> {
        let e = 0.1 * ((self.0 % 7) as f64 + 1.0) / 7.0;
        vec![1.0 / 3.0 + e, 1.0 / 3.0 - e, 1.0 / 3.0]
    }

    fn update(&mut self, _: &[f64]) -> labelshift_core::Result<()> {
        self.0 += 1;
        Ok(())
    }

    fn reset(&mut self) {
        self.0 = 0;
    }
}

fn lockstep(
    a: LearnerKind,
    oa: Box<dyn OnlineRegressor<f64>>,
    b: LearnerKind,
    ob: Box<dyn OnlineRegressor<f64>>,
    rounds: &[labelshift_core::sols::SolsRound<f64>],
) -> (usize, usize) {
    let learner = |kind, oracle| {
        let mut cfg = SolsConfig::new(kind);
        cfg.seed = 17;
        SolsLearner::new(cfg, oracle, SoftmaxLinear::zeros(3, 12)).unwrap()
    };
    let (mut x, mut y) = (learner(a, oa), learner(b, ob));
    let mut identical = 0;
    for r in rounds {
        let px = x.predict(&r.items).unwrap();
        let py = y.predict(&r.items).unwrap();
        if x.model() == y.model() && px.predictions == py.predictions {
            identical += 1;
        }
        x.reveal(&r.labels).unwrap();
        y.reveal(&r.labels).unwrap();
    }
    (identical, rounds.len())
}

fn criterion_7() -> Outcome {
    let data = prepare_sols(&ExperimentConfig::default(), 0).unwrap();
    let uniform = || -> Box<dyn OnlineRegressor<f64>> { Box::new(FixedEstimate::new(vec![1.0 / 3.0; 3])) };
    let (erm_same, n) = lockstep(LearnerKind::Werm, uniform(), LearnerKind::Erm, uniform(), &data.rounds);
    let (lazy_same, _) = lockstep(
        LearnerKind::Lazy,
        Box::new(Wobble(0)),
        LearnerKind::Werm,
        Box::new(Wobble(0)),
        &data.rounds,
    );
    outcome(
        erm_same == n && lazy_same == n,
        format!("uniform wERM = ERM in {erm_same}/{n} rounds; lazy = eager in {lazy_same}/{n} rounds"),
    )
}

fn criterion_8() -> Outcome {
    let cfg = ExperimentConfig::default();
    let (runs, _) = run_sols_experiment(&cfg);
    let m = summarize_runs(&runs);
    if !all_ok(&m) {
        return outcome(false, "a learner failed".into());
    }
    let (w, r, c, l) = (pct(&m, "werm"), pct(&m, "ct-rs"), pct(&m, "ct"), pct(&m, "lazy"));
    let horizon = cfg.sols_horizon();
    let max_refits = runs
        .iter()
        .filter(|x| x.method == "lazy")
        .filter_map(|x| x.outcome.as_ref().ok().and_then(|o| o.refits))
        .max()
        .unwrap_or(usize::MAX);
    let pass = w <= r + 0.3 && r <= c + 0.3 && 2 * max_refits <= horizon && (l - w).abs() <= 1.5;
    outcome(
        pass,
        format!("wERM {w:.2}, CT-RS {r:.2}, CT {c:.2}, lazy {l:.2} with at most {max_refits} refits of {horizon}"),
    )
}

fn sort_threshold(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let (mut cum, mut tau) = (0.0, 0.0);
    for (i, &x) in u.iter().enumerate() {
        cum += x;
        let cand = (cum - 1.0) / (i + 1) as f64;
        if x > cand {
            tau = cand;
        }
    }
    v.iter().map(|&x| (x - tau).max(0.0)).collect()
}

fn projection_suite() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let k = rng.random_range(1..12);
        let v: Vec<f64> = (0..k).map(|_| rng.random_range(-10.0..10.0)).collect();
        let p = project_simplex(&v).unwrap();
        let o = sort_threshold(&v);
        worst = worst.max(p.iter().zip(&o).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
    }
    (worst <= 1e-12, format!("projection max dev {worst:.1e}"))
}

fn gradient_suite() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    let h = 1e-5;
    for _ in 0..20 {
        let (k, d, n) = (rng.random_range(2..6), rng.random_range(1..8), rng.random_range(1..20));
        let w = (0..k * d).map(|_| rng.random_range(-2.0..2.0)).collect();
        let b = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
        let model = SoftmaxLinear::from_parts(k, d, w, b).unwrap();
        let mut data = labelshift_core::model::Dataset::new(d);
        for _ in 0..n {
            let x: Vec<f64> = (0..d).map(|_| rng.random_range(-1.5..1.5)).collect();
            data.push(&x, rng.random_range(0..k));
        }
        let weights: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..3.0)).collect();
        let l2 = 0.01;
        let idx: Vec<usize> = (0..n).collect();
        let (_, grad) = model.loss_gradient(&data, &idx, Some(&weights), l2);
        for j in 0..k * d {
            let (mut p, mut m) = (model.clone(), model.clone());
            p.weights_mut()[j] += h;
            m.weights_mut()[j] -= h;
            let fd = (p.objective(&data, Some(&weights), l2) - m.objective(&data, Some(&weights), l2)) / (2.0 * h);
            let g = grad.weights[j];
            worst = worst.max((g - fd).abs() / g.abs().max(fd.abs()).max(1e-6));
        }
    }
    (worst <= 1e-5, format!("gradient max rel err {worst:.1e}"))
}

fn schedule_suite() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut valid = true;
    for _ in 0..200 {
        let k = rng.random_range(2..6);
        let mut anchor = || SimplexVector::normalized((0..k).map(|_| rng.random::<f64>() + 1e-9).collect()).unwrap();
        let anchors = (anchor(), anchor());
        for kind in ShiftKind::ALL {
            let s = make_schedule(kind, 300, anchors.clone(), ShiftParams::default(), &mut rng).unwrap();
            valid &= s
                .marginals()
                .iter()
                .all(|q| q.iter().all(|&x| x >= 0.0) && (q.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        }
    }
    let horizon = 1000;
    let flips: usize = (0..200)
        .map(|seed| {
            let anchors = corner_anchors(3, 0.06).unwrap();
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            make_schedule::<f64, _>(ShiftKind::Bernoulli, horizon, anchors, ShiftParams::default(), &mut r)
                .unwrap()
                .alpha_changes()
        })
        .sum();
    let mean = flips as f64 / 200.0;
    let root = (horizon as f64).sqrt();
    let band = (0.8 * root..=1.2 * root).contains(&mean);
    (
        valid && band,
        format!("schedules valid {valid}; mean Ber flips {mean:.1}"),
    )
}

fn traces(runs: &[MethodRun]) -> Vec<Vec<u8>> {
    runs.iter()
        .map(|r| {
            let mut buf = Vec::new();
            write_trace(&mut buf, &r.outcome.as_ref().unwrap().trace).unwrap();
            buf
        })
        .collect()
}

fn determinism_suite() -> (bool, String) {
    let cfg = ExperimentConfig {
        methods: UolsMethod::ALL.to_vec(),
        horizon: Some(300),
        ..ExperimentConfig::default()
    };
    let same_uols = traces(&run_uols_experiment(&cfg).0) == traces(&run_uols_experiment(&cfg).0);
    let sols_cfg = ExperimentConfig {
        horizon: Some(30),
        seeds: vec![0],
        ..ExperimentConfig::default()
    };
    let same_sols = traces(&run_sols_experiment(&sols_cfg).0) == traces(&run_sols_experiment(&sols_cfg).0);
    (
        same_uols && same_sols,
        format!("byte-identical reruns uols {same_uols} sols {same_sols}"),
    )
}

fn criterion_9() -> Outcome {
    let parts = [
        projection_suite(),
        gradient_suite(),
        schedule_suite(),
        determinism_suite(),
    ];
    outcome(
        parts.iter().all(|p| p.0),
        parts.iter().map(|p| p.1.as_str()).collect::<Vec<_>>().join("; "),
    )
}

fn main() {
    let (ber, _, secs) = uols(ShiftKind::Bernoulli);
    let (sin, _, _) = uols(ShiftKind::Sinusoidal);
    let results = [
        ("synthetic UOLS, Bernoulli shift", criterion_1(&ber, secs)),
        ("synthetic UOLS, sinusoidal shift", criterion_2(&sin)),
        ("marginal-estimation MSE ordering", criterion_3(&ber, &sin)),
        ("unbiased confusion-inverse estimate", criterion_4()),
        ("oracle TSE sublinearity", criterion_5()),
        ("low-switching wrapper bounds", criterion_6()),
        ("supervised learner equivalences", criterion_7()),
        ("supervised learner orderings", criterion_8()),
        ("property suites", criterion_9()),
    ];
    let mut failed = 0;
    for (i, (name, o)) in results.iter().enumerate() {
        println!(
            "criterion {}: {} | {name} | {}",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        failed += usize::from(!o.pass);
    }
    println!(
        "acceptance: {} of {} criteria passed",
        results.len() - failed,
        results.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
