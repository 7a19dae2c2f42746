//! Weighted SGD with per-epoch selection, direct and two-stage.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{argmax, bounded_from_prob, init_params_scaled, Gradient, ModelParams, DEFAULT_INIT_SCALE, DEFAULT_LOSS_CAP};
use crate::data::{Dataset, DomainPair};
use crate::error::{Error, Result};
use crate::stats::population_std;
use crate::strategies::{curriculum_difficulty, EpochContext, StrategyConfig};

pub const TRAINED_MODEL_SCHEMA_VERSION: u32 = 1;

const STREAM_SAMPLING: u64 = 11;
const STREAM_SOURCE_SAMPLING: u64 = 12;

fn default_loss_cap() -> f64 {
    DEFAULT_LOSS_CAP
}

fn default_eval_every() -> usize {
    1
}

/// Optimization hyper-parameters for one training stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hyper {
    pub lr: f64,
    pub epochs: usize,
    /// Values at or above the dataset size switch to full-batch descent
    /// on the selection-weighted mean loss.
    pub batch_size: usize,
    #[serde(default = "default_loss_cap")]
    pub loss_cap: f64,
    #[serde(default = "default_eval_every")]
    pub eval_every: usize,
}

impl Default for Hyper {
    fn default() -> Self {
        Self {
            lr: 0.05,
            epochs: 10,
            batch_size: 32,
            loss_cap: DEFAULT_LOSS_CAP,
            eval_every: 1,
        }
    }
}

impl Hyper {
    pub fn violations(&self, prefix: &str) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            v.push(format!("{prefix}.lr must be finite and >= 0 (got {})", self.lr));
        }
        if self.epochs == 0 {
            v.push(format!("{prefix}.epochs must be >= 1"));
        }
        if self.batch_size == 0 {
            v.push(format!("{prefix}.batch_size must be >= 1"));
        }
        if !(self.loss_cap > 0.0 && self.loss_cap.is_finite()) {
            v.push(format!("{prefix}.loss_cap must be > 0 (got {})", self.loss_cap));
        }
        if self.eval_every == 0 {
            v.push(format!("{prefix}.eval_every must be >= 1"));
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations("hyper");
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(v))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightStats {
    pub min: f64,
    pub max: f64,
    /// Population standard deviation.
    pub std: f64,
}

impl WeightStats {
    pub fn of(w: &[f64]) -> Self {
        Self {
            min: w.iter().copied().fold(f64::INFINITY, f64::min),
            max: w.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            std: population_std(w),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Accuracy on the target-domain eval set (the mismatched analog).
    pub target_accuracy: Option<f64>,
    /// Accuracy on the source-domain eval set (the matched analog).
    pub source_accuracy: Option<f64>,
    pub target_risk: Option<f64>,
    pub weights: WeightStats,
    /// Largest per-example gradient norm seen during the epoch's updates.
    pub max_grad_norm: f64,
    pub degenerate_selection: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub records: Vec<EpochRecord>,
}

impl TrainTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&EpochRecord> {
        self.records.last()
    }

    pub fn max_grad_norm(&self) -> Option<f64> {
        self.records
            .iter()
            .map(|r| r.max_grad_norm)
            .reduce(f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub schema_version: u32,
    pub params: ModelParams,
    pub trace: TrainTrace,
    pub seed: u64,
    pub strategy: String,
}

impl TrainedModel {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: TrainedModel = serde_json::from_str(text)?;
        if m.schema_version != TRAINED_MODEL_SCHEMA_VERSION {
            return Err(Error::InvalidArgument(format!(
                "unsupported model schema version {}",
                m.schema_version
            )));
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub accuracy: f64,
    /// Mean normalized loss.
    pub risk: f64,
}

/// Accuracy (argmax, ties to the lowest class) and mean normalized loss.
pub fn evaluate(params: &ModelParams, ds: &Dataset, loss_cap: f64) -> Result<Evaluation> {
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    params.check_dataset(ds)?;
    let mut probs = vec![0.0; params.classes()];
    let mut correct = 0usize;
    let mut risk = 0.0;
    for e in ds.examples() {
        params.proba_into(&e.features, &mut probs);
        if argmax(&probs) == e.label {
            correct += 1;
        }
        risk += bounded_from_prob(probs[e.label], loss_cap);
    }
    let n = ds.len() as f64;
    Ok(Evaluation {
        accuracy: correct as f64 / n,
        risk: risk / n,
    })
}

#[derive(Debug, Clone, Copy, Default)]
pub struct EvalSets<'a> {
    pub target: Option<&'a Dataset>,
    pub source: Option<&'a Dataset>,
}

impl<'a> EvalSets<'a> {
    pub fn target(ds: &'a Dataset) -> Self {
        Self {
            target: Some(ds),
            source: None,
        }
    }

    pub fn of_pair(pair: &'a DomainPair) -> Self {
        Self {
            target: Some(&pair.target_eval),
            source: Some(&pair.source_eval),
        }
    }
}

/// One training stage: a dataset, its strategy and hyper-parameters.
#[derive(Debug, Clone, Copy)]
pub struct Trainer<'a> {
    pub data: &'a Dataset,
    pub eval: EvalSets<'a>,
    pub strategy: &'a StrategyConfig,
    pub hyper: &'a Hyper,
    /// Source-domain feature counts for importance weighting.
    pub source_counts: Option<&'a [usize]>,
    pub init_scale: f64,
    /// Stop after this many epochs of the `hyper.epochs` schedule.
    pub stop_after: Option<usize>,
}

impl<'a> Trainer<'a> {
    pub fn new(data: &'a Dataset, strategy: &'a StrategyConfig, hyper: &'a Hyper) -> Self {
        Self {
            data,
            eval: EvalSets::default(),
            strategy,
            hyper,
            source_counts: None,
            init_scale: DEFAULT_INIT_SCALE,
            stop_after: None,
        }
    }

    pub fn with_stop_after(mut self, epochs: usize) -> Self {
        self.stop_after = Some(epochs);
        self
    }

    pub fn with_eval(mut self, eval: EvalSets<'a>) -> Self {
        self.eval = eval;
        self
    }

    pub fn with_source_counts(mut self, counts: &'a [usize]) -> Self {
        self.source_counts = Some(counts);
        self
    }

    /// Trains from parameters initialized with `seed`.
    pub fn run(&self, seed: u64) -> Result<TrainedModel> {
        let init = init_params_scaled(
            self.data.dim(),
            self.data.classes(),
            seed,
            self.init_scale,
        );
        self.run_from(init, seed)
    }

    /// Trains from `init`; batch sampling is seeded by `seed`.
    pub fn run_from(&self, init: ModelParams, seed: u64) -> Result<TrainedModel> {
        self.run_stage(init, seed, STREAM_SAMPLING)
    }

    fn run_stage(&self, init: ModelParams, seed: u64, stream: u64) -> Result<TrainedModel> {
        let ds = self.data;
        let h = self.hyper;
        if ds.is_empty() {
            return Err(Error::EmptyDataset);
        }
        h.validate()?;
        self.strategy.validate()?;
        init.check_dataset(ds)?;

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);

        let initial = init.clone();
        let mut params = init;
        let n = ds.len();
        let difficulty = if self.strategy.is_curriculum() {
            Some(curriculum_difficulty(ds, &initial, h.loss_cap)?)
        } else {
            None
        };

        let mut grad = Gradient::zeros(ds.dim(), params.classes());
        let mut probs = vec![0.0; params.classes()];
        let mut records = Vec::new();

        let run_epochs = self.stop_after.map_or(h.epochs, |s| s.min(h.epochs));
        for epoch in 0..run_epochs {
            let mut ctx = EpochContext::new(epoch, h.epochs, &params, &initial).with_loss_cap(h.loss_cap);
            if let Some(d) = difficulty.as_deref() {
                ctx = ctx.with_difficulty(d);
            }
            if let Some(c) = self.source_counts {
                ctx = ctx.with_source_counts(c);
            }
            let selection = self.strategy.select(ds, &ctx)?;
            let w = selection.weights.as_slice();
            if !w.iter().any(|v| *v > 0.0) {
                return Err(Error::ZeroWeights);
            }
            let stats = WeightStats::of(w);

            let mut max_norm: f64 = 0.0;
            if h.batch_size >= n {
                // Full batch: exact gradient of the weighted objective.
                grad.clear();
                for (e, &wi) in ds.examples().iter().zip(w) {
                    if wi == 0.0 {
                        continue;
                    }
                    max_norm = max_norm.max(residual(&params, e, &mut probs));
                    grad.accumulate(&probs, &e.features, wi);
                }
                params.apply_step(&grad, h.lr);
            } else {
                let sampler = WeightedIndex::new(w).map_err(|_| Error::ZeroWeights)?;
                let batches = n.div_ceil(h.batch_size);
                let scale = 1.0 / h.batch_size as f64;
                for _ in 0..batches {
                    grad.clear();
                    for _ in 0..h.batch_size {
                        let e = &ds.examples()[sampler.sample(&mut rng)];
                        max_norm = max_norm.max(residual(&params, e, &mut probs));
                        grad.accumulate(&probs, &e.features, scale);
                    }
                    params.apply_step(&grad, h.lr);
                }
            }
            if !params.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "training diverged at epoch {epoch} (non-finite parameters)"
                )));
            }

            if (epoch + 1) % h.eval_every == 0 || epoch + 1 == run_epochs {
                let target = self
                    .eval
                    .target
                    .map(|t| evaluate(&params, t, h.loss_cap))
                    .transpose()?;
                let source = self
                    .eval
                    .source
                    .map(|s| evaluate(&params, s, h.loss_cap))
                    .transpose()?;
                records.push(EpochRecord {
                    epoch,
                    target_accuracy: target.map(|t| t.accuracy),
                    source_accuracy: source.map(|s| s.accuracy),
                    target_risk: target.map(|t| t.risk),
                    weights: stats,
                    max_grad_norm: max_norm,
                    degenerate_selection: selection.degenerate,
                });
            }
        }

        Ok(TrainedModel {
            schema_version: TRAINED_MODEL_SCHEMA_VERSION,
            params,
            trace: TrainTrace { records },
            seed,
            strategy: self.strategy.tag().to_string(),
        })
    }
}

/// Leaves `p − onehot(y)` in `probs`; returns the example's gradient norm.
fn residual(params: &ModelParams, e: &crate::data::Example, probs: &mut [f64]) -> f64 {
    params.proba_into(&e.features, probs);
    probs[e.label] -= 1.0;
    let r_sq: f64 = probs.iter().map(|r| r * r).sum();
    let x_sq: f64 = e.features.iter().map(|v| v * v).sum();
    (r_sq * (x_sq + 1.0)).sqrt()
}

/// Direct fine-tuning on `ds` from a seeded initialization.
pub fn train(
    ds: &Dataset,
    eval: EvalSets<'_>,
    strategy: &StrategyConfig,
    hyper: &Hyper,
    seed: u64,
) -> Result<TrainedModel> {
    Trainer::new(ds, strategy, hyper).with_eval(eval).run(seed)
}

/// Both stages of a two-stage run.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoStageRun {
    pub source_stage: TrainedModel,
    pub target_stage: TrainedModel,
}

/// Uniform training on the source domain, then `strategy` on the target
/// domain starting from the stage-one parameters.
pub fn two_stage_train_detailed(
    pair: &DomainPair,
    strategy: &StrategyConfig,
    h_source: &Hyper,
    h_target: &Hyper,
    seed: u64,
) -> Result<TwoStageRun> {
    let uniform = StrategyConfig::Uniform;
    let eval = EvalSets::of_pair(pair);
    let source_trainer = Trainer::new(&pair.source_train, &uniform, h_source).with_eval(eval);
    let init = init_params_scaled(
        pair.source_train.dim(),
        pair.source_train.classes(),
        seed,
        source_trainer.init_scale,
    );
    let source_stage = source_trainer.run_stage(init, seed, STREAM_SOURCE_SAMPLING)?;

    let counts = pair.source_train.domain_counts();
    let target_stage = Trainer::new(&pair.target_train, strategy, h_target)
        .with_eval(eval)
        .with_source_counts(&counts)
        .run_stage(source_stage.params.clone(), seed, STREAM_SAMPLING)?;
    Ok(TwoStageRun {
        source_stage,
        target_stage,
    })
}

/// Two-stage fine-tuning; the returned trace covers the target stage.
pub fn two_stage_train(
    pair: &DomainPair,
    strategy: &StrategyConfig,
    h_source: &Hyper,
    h_target: &Hyper,
    seed: u64,
) -> Result<TrainedModel> {
    Ok(two_stage_train_detailed(pair, strategy, h_source, h_target, seed)?.target_stage)
}
