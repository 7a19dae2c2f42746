//! Selection sensitivity: how far a strategy's distribution moves when one
//! training example is replaced.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Example};
use crate::error::{Error, Result};
use crate::model::{Hyper, ModelParams, Trainer};
use crate::strategies::{EpochContext, SelectionWeights, StrategyConfig, SUM_TOLERANCE};

/// Selection-sensitivity values reported alongside the six strategies'
/// default settings: uniform, importance weighting, confidence sampling,
/// curriculum, uncertainty-aware curriculum, gradient-based.
pub const REFERENCE_SENSITIVITY: [(&str, f64); 6] = [
    ("uniform", 0.0),
    ("importance_weighting", 0.625),
    ("confidence_sampling", 5.0),
    ("curriculum", 6.67),
    ("uncertainty_curriculum", 8.33),
    ("gradient_based", 10.0),
];

/// `½ Σ |p_i − q_i|`.
pub fn tv_distance(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::LengthMismatch {
            left: p.len(),
            right: q.len(),
        });
    }
    for v in [p, q] {
        let total: f64 = v.iter().sum();
        if (total - 1.0).abs() > SUM_TOLERANCE || v.iter().any(|x| *x < 0.0) {
            return Err(Error::InvalidArgument(format!(
                "not a probability vector (sum {total})"
            )));
        }
    }
    Ok(tv_unchecked(p, q))
}

fn tv_unchecked(p: &[f64], q: &[f64]) -> f64 {
    let half_l1 = 0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>();
    half_l1.clamp(0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum EstimatorMode {
    /// Recompute weights for each neighbor under the same model snapshot.
    Immediate,
    /// Retrain from the context's initial model on each neighbor for the
    /// context's number of completed epochs, then recompute weights.
    Retrained { hyper: Hyper, seed: u64 },
}

impl EstimatorMode {
    pub fn name(&self) -> &'static str {
        match self {
            EstimatorMode::Immediate => "immediate",
            EstimatorMode::Retrained { .. } => "retrained",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityOptions {
    /// Pool candidates tried per replaced index. At or above the pool size
    /// every candidate is tried.
    pub candidates_per_index: usize,
    /// Indices to replace; `None` means every index.
    pub indices: Option<Vec<usize>>,
    pub mode: EstimatorMode,
    /// Seeds candidate subsampling.
    pub seed: u64,
    pub keep_per_index: bool,
}

impl Default for SensitivityOptions {
    fn default() -> Self {
        Self {
            candidates_per_index: usize::MAX,
            indices: None,
            mode: EstimatorMode::Immediate,
            seed: 0,
            keep_per_index: false,
        }
    }
}

impl SensitivityOptions {
    pub fn exhaustive() -> Self {
        Self::default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexMax {
    pub index: usize,
    pub max_tv: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityEstimate {
    /// Largest TV distance observed, in `[0, 1]`.
    pub delta_hat: f64,
    pub n_perturbations: usize,
    pub mode: String,
    /// True when every index was paired with every pool candidate.
    pub exhaustive: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_index_max: Option<Vec<IndexMax>>,
}

/// Weights of `strategy` on `ds`, with difficulty recomputed from the
/// context's initial model so that neighbors are treated identically.
fn weights_for(
    strategy: &StrategyConfig,
    ds: &Dataset,
    ctx: &EpochContext<'_>,
    mode: &EstimatorMode,
) -> Result<SelectionWeights> {
    let mut local = *ctx;
    local.difficulty = None;
    match mode {
        EstimatorMode::Immediate => Ok(strategy.select(ds, &local)?.weights),
        EstimatorMode::Retrained { hyper, seed } => {
            let hyper = Hyper {
                epochs: ctx.total_epochs,
                ..hyper.clone()
            };
            let model: ModelParams = if ctx.epoch == 0 {
                ctx.initial_model.clone()
            } else {
                let mut trainer = Trainer::new(ds, strategy, &hyper).with_stop_after(ctx.epoch);
                if let Some(c) = ctx.source_counts {
                    trainer = trainer.with_source_counts(c);
                }
                trainer.run_from(ctx.initial_model.clone(), *seed)?.params
            };
            local.model = &model;
            Ok(strategy.select(ds, &local)?.weights)
        }
    }
}

/// Max TV distance between the strategy's weights on `ds` and on the
/// neighbors obtained by replacing one index with a pool example.
///
/// Replacement candidates inherit the id of the example they replace.
pub fn empirical_sensitivity(
    strategy: &StrategyConfig,
    ds: &Dataset,
    ctx: &EpochContext<'_>,
    pool: &[Example],
    options: &SensitivityOptions,
) -> Result<SensitivityEstimate> {
    if pool.is_empty() {
        return Err(Error::EmptyPool);
    }
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if options.candidates_per_index == 0 {
        return Err(Error::InvalidArgument("candidates_per_index must be >= 1".into()));
    }
    let indices: Vec<usize> = match &options.indices {
        Some(ix) => {
            if let Some(&bad) = ix.iter().find(|&&i| i >= ds.len()) {
                return Err(Error::IndexOutOfRange {
                    index: bad,
                    len: ds.len(),
                });
            }
            ix.clone()
        }
        None => (0..ds.len()).collect(),
    };
    let k = options.candidates_per_index.min(pool.len());
    let all_indices = {
        let mut seen = vec![false; ds.len()];
        indices.iter().for_each(|&i| seen[i] = true);
        seen.into_iter().all(|s| s)
    };
    let exhaustive = k == pool.len() && all_indices;

    let base = weights_for(strategy, ds, ctx, &options.mode)?;

    let per_index: Vec<IndexMax> = indices
        .par_iter()
        .map(|&j| -> Result<IndexMax> {
            let candidates: Vec<usize> = if k == pool.len() {
                (0..pool.len()).collect()
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
                rng.set_stream(j as u64);
                let mut picked = sample(&mut rng, pool.len(), k).into_vec();
                picked.sort_unstable();
                picked
            };
            let mut max_tv: f64 = 0.0;
            for c in candidates {
                let mut e = pool[c].clone();
                e.id = ds.examples()[j].id;
                let neighbor = ds.replace_example(j, e)?;
                let w = weights_for(strategy, &neighbor, ctx, &options.mode)?;
                max_tv = max_tv.max(tv_unchecked(base.as_slice(), w.as_slice()));
            }
            Ok(IndexMax { index: j, max_tv })
        })
        .collect::<Result<_>>()?;

    let delta_hat = per_index.iter().map(|m| m.max_tv).fold(0.0, f64::max);
    Ok(SensitivityEstimate {
        delta_hat,
        n_perturbations: indices.len() * k,
        mode: options.mode.name().to_string(),
        exhaustive,
        per_index_max: options.keep_per_index.then_some(per_index),
    })
}

/// Closed-form sensitivity of a strategy configuration. `t_pace` is only
/// consulted for the plain curriculum.
pub fn theoretical_sensitivity(cfg: &StrategyConfig, t_pace: Option<f64>) -> Result<f64> {
    let positive = |name: &str, v: f64| -> Result<f64> {
        if v > 0.0 && v.is_finite() {
            Ok(v)
        } else {
            Err(Error::InvalidArgument(format!("{name} must be > 0, got {v}")))
        }
    };
    Ok(match *cfg {
        StrategyConfig::Uniform => 0.0,
        StrategyConfig::ImportanceWeighting { lambda } => 1.0 / (2.0 * positive("lambda", lambda)?),
        StrategyConfig::ConfidenceSampling { tau, .. } => 1.0 / positive("tau", tau)?,
        StrategyConfig::Curriculum { .. } => {
            0.8 / positive("t_pace", t_pace.ok_or(Error::MissingPace)?)?
        }
        StrategyConfig::UncertaintyCurriculum {
            tau_unc, tau_curr, ..
        } => (1.0 / positive("tau_unc", tau_unc)?).max(1.0 / positive("tau_curr", tau_curr)?),
        StrategyConfig::GradientBased { tau_gb, .. } => 1.0 / positive("tau_gb", tau_gb)?,
    })
}
