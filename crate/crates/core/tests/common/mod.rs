//! Random small instances and a brute-force neighbor enumerator shared by
//! the oracle and acceptance targets.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use replisel::{Dataset, EpochContext, Example, ModelParams, Pace, StrategyConfig};

pub const CAP: f64 = 4.0;

pub struct Instance {
    pub ds: Dataset,
    pub pool: Vec<Example>,
    pub model: ModelParams,
    pub h0: ModelParams,
    pub epoch: usize,
    pub epochs: usize,
    pub source_counts: Vec<usize>,
}

pub fn example(rng: &mut ChaCha8Rng, id: u64, d: usize, c: usize, f: usize) -> Example {
    Example {
        id,
        features: (0..d).map(|_| rng.random_range(-2.0..2.0)).collect(),
        label: rng.random_range(0..c),
        domain: rng.random_range(0..f),
    }
}

pub fn params(rng: &mut ChaCha8Rng, d: usize, c: usize) -> ModelParams {
    ModelParams::from_parts(
        c,
        d,
        (0..c * d).map(|_| rng.random_range(-1.5..1.5)).collect(),
        (0..c).map(|_| rng.random_range(-0.5..0.5)).collect(),
    )
    .unwrap()
}

pub fn instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (d, c, f) = (rng.random_range(1..=3), rng.random_range(2..=3), rng.random_range(1..=3));
    let n = rng.random_range(1..=6);
    let pool_size = rng.random_range(1..=4);
    let examples: Vec<Example> = (0..n).map(|i| example(&mut rng, i as u64, d, c, f)).collect();
    let pool = (0..pool_size).map(|i| example(&mut rng, 100 + i as u64, d, c, f)).collect();
    let epochs = rng.random_range(1..=5);
    Instance {
        ds: Dataset::new(d, c, f, examples).unwrap(),
        pool,
        model: params(&mut rng, d, c),
        h0: params(&mut rng, d, c),
        epoch: rng.random_range(0..epochs),
        epochs,
        source_counts: (0..f).map(|_| rng.random_range(0..20)).collect(),
    }
}

pub fn strategies(seed: u64) -> Vec<StrategyConfig> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcdef);
    let pace = [Pace::Linear, Pace::Exp, Pace::Log][rng.random_range(0..3)];
    let alpha = rng.random_range(0.1..=1.0);
    let beta = rng.random_range(alpha..=1.0);
    let w_min = rng.random_range(0.0..0.1);
    let w_max = rng.random_range(w_min + 0.5..5.0);
    vec![
        StrategyConfig::Uniform,
        StrategyConfig::ImportanceWeighting {
            lambda: rng.random_range(0.1..2.0),
        },
        StrategyConfig::ConfidenceSampling {
            tau: rng.random_range(0.1..2.0),
            w_min,
            w_max,
        },
        StrategyConfig::Curriculum {
            alpha,
            beta,
            pace,
            k: rng.random_range(1.0..5.0),
        },
        StrategyConfig::UncertaintyCurriculum {
            tau_unc: rng.random_range(0.1..1.0),
            tau_curr: rng.random_range(0.1..1.0),
            alpha,
            beta,
            pace,
            k: rng.random_range(1.0..5.0),
        },
        StrategyConfig::GradientBased {
            tau_gb: rng.random_range(0.2..1.0),
            w_min,
            w_max,
            use_gradients: rng.random_bool(0.5),
        },
    ]
}

pub fn ctx(inst: &Instance) -> EpochContext<'_> {
    EpochContext::new(inst.epoch, inst.epochs, &inst.model, &inst.h0)
        .with_source_counts(&inst.source_counts)
        .with_loss_cap(CAP)
}

pub fn library_weights(s: &StrategyConfig, ds: &Dataset, inst: &Instance) -> Vec<f64> {
    s.select(ds, &ctx(inst)).unwrap().weights.into_inner()
}

pub fn tv(p: &[f64], q: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..p.len() {
        acc += (p[i] - q[i]).abs();
    }
    (0.5 * acc).clamp(0.0, 1.0)
}

/// Max TV over every (index, pool candidate) neighbor.
pub fn brute_force(inst: &Instance, weights: impl Fn(&Dataset) -> Vec<f64>) -> (f64, usize) {
    let base = weights(&inst.ds);
    let mut best: f64 = 0.0;
    let mut count = 0;
    for j in 0..inst.ds.len() {
        for cand in &inst.pool {
            let mut examples = inst.ds.examples().to_vec();
            examples[j] = Example {
                id: examples[j].id,
                ..cand.clone()
            };
            let neighbor = Dataset::new(inst.ds.dim(), inst.ds.classes(), inst.ds.domains(), examples).unwrap();
            best = best.max(tv(&base, &weights(&neighbor)));
            count += 1;
        }
    }
    (best, count)
}
