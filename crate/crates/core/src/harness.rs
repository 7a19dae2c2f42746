//! Multi-seed replication studies: run one model per seed, compare their
//! target accuracies pairwise and set the observed failure rate against the
//! closed-form sensitivity and the concentration bound.

use std::fmt;
use std::path::PathBuf;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{estimate_c, replicability_bound, stability_bound, strategy_bound, BoundInputs, StabilityConstants};
use crate::data::{load_csv, CsvSchema, Dataset, DomainPair, Example, SynthConfig, SynthTask};
use crate::error::{Error, Result};
use crate::model::{two_stage_train_detailed, EvalSets, Hyper, TrainTrace, TrainedModel, Trainer, WeightStats};
use crate::sensitivity::{empirical_sensitivity, theoretical_sensitivity, EstimatorMode, SensitivityEstimate, SensitivityOptions};
use crate::stats::{mean, population_std, sample_std, spearman};
use crate::strategies::{EpochContext, StrategyConfig};

pub const STUDY_SCHEMA_VERSION: u32 = 1;

/// Stream for picking which indices the sensitivity estimate perturbs.
const STREAM_SENSITIVITY: u64 = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    /// Train on the target domain from a fresh initialization.
    Direct,
    /// Uniform training on the source domain first, then the strategy on
    /// the target domain.
    TwoStage,
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Protocol::Direct => "direct",
            Protocol::TwoStage => "two_stage",
        })
    }
}

/// Four CSV files sharing one schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvData {
    pub source_train: PathBuf,
    pub source_eval: PathBuf,
    pub target_train: PathBuf,
    pub target_eval: PathBuf,
    #[serde(default)]
    pub schema: CsvSchema,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSource {
    Synthetic(SynthConfig),
    Csv(CsvData),
}

impl Default for DataSource {
    fn default() -> Self {
        DataSource::Synthetic(SynthConfig::default())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensitivityMode {
    Immediate,
    Retrained,
}

/// Empirical-sensitivity settings for a study. The estimate is taken on
/// the first seed's final model and training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensitivitySettings {
    pub enabled: bool,
    /// Replacement candidates drawn from outside the training set.
    pub pool_size: usize,
    pub candidates_per_index: usize,
    /// Indices to perturb; 0 means all of them.
    pub max_indices: usize,
    pub mode: SensitivityMode,
}

impl Default for SensitivitySettings {
    fn default() -> Self {
        Self {
            enabled: true,
            pool_size: 16,
            candidates_per_index: 16,
            max_indices: 64,
            mode: SensitivityMode::Immediate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    /// Label for reports; derived from strategy and protocol when empty.
    pub name: String,
    pub protocol: Protocol,
    pub strategy: StrategyConfig,
    pub data: DataSource,
    pub hyper_source: Hyper,
    pub hyper_target: Hyper,
    pub seeds: Vec<u64>,
    pub epsilon: f64,
    /// Draw fresh training splits per seed (synthetic data only). Eval
    /// splits stay fixed either way.
    pub resample_per_seed: bool,
    pub histogram_bin_width: f64,
    /// Pacing constant for the plain curriculum's closed-form sensitivity.
    pub t_pace: f64,
    /// Loss Lipschitz constant `M`; defaults to the observed gradient bound.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lipschitz: Option<f64>,
    pub sensitivity: SensitivitySettings,
}

pub mod defaults {
    pub const SEEDS: std::ops::RangeInclusive<u64> = 42..=51;
    pub const EPSILON: f64 = 0.01;
    pub const RESAMPLE_PER_SEED: bool = true;
    pub const HISTOGRAM_BIN_WIDTH: f64 = 0.005;
    pub const T_PACE: f64 = 0.12;
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            name: String::new(),
            protocol: Protocol::TwoStage,
            strategy: StrategyConfig::Uniform,
            data: DataSource::default(),
            hyper_source: Hyper::default(),
            hyper_target: Hyper::default(),
            seeds: defaults::SEEDS.collect(),
            epsilon: defaults::EPSILON,
            resample_per_seed: defaults::RESAMPLE_PER_SEED,
            histogram_bin_width: defaults::HISTOGRAM_BIN_WIDTH,
            t_pace: defaults::T_PACE,
            lipschitz: None,
            sensitivity: SensitivitySettings::default(),
        }
    }
}

impl StudyConfig {
    pub fn display_name(&self) -> String {
        if self.name.is_empty() {
            format!("{}-{}", self.strategy.tag(), self.protocol)
        } else {
            self.name.clone()
        }
    }

    /// Every violated constraint, with dotted field names.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.seeds.len() < 2 {
            v.push(format!("seeds must list at least 2 seeds (got {})", self.seeds.len()));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            v.push("seeds must be distinct".to_string());
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            v.push(format!("epsilon must be finite and > 0 (got {})", self.epsilon));
        }
        if !(self.histogram_bin_width > 0.0 && self.histogram_bin_width.is_finite()) {
            v.push(format!(
                "histogram_bin_width must be finite and > 0 (got {})",
                self.histogram_bin_width
            ));
        }
        if !(self.t_pace > 0.0 && self.t_pace.is_finite()) {
            v.push(format!("t_pace must be finite and > 0 (got {})", self.t_pace));
        }
        if let Some(m) = self.lipschitz {
            if !(m >= 0.0 && m.is_finite()) {
                v.push(format!("lipschitz must be finite and >= 0 (got {m})"));
            }
        }
        if let DataSource::Synthetic(s) = &self.data {
            v.extend(s.violations());
        }
        v.extend(self.strategy.violations("strategy"));
        if self.protocol == Protocol::TwoStage {
            v.extend(self.hyper_source.violations("hyper_source"));
        }
        v.extend(self.hyper_target.violations("hyper_target"));
        let s = &self.sensitivity;
        if s.enabled {
            if s.pool_size == 0 {
                v.push("sensitivity.pool_size must be >= 1".to_string());
            }
            if s.candidates_per_index == 0 {
                v.push("sensitivity.candidates_per_index must be >= 1".to_string());
            }
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(v))
        }
    }
}

/// Materialized data for a study: either a fixed pair or a task that can
/// draw a fresh training pair per seed.
enum StudyData {
    Fixed(DomainPair),
    Resampled(SynthTask),
}

impl StudyData {
    fn load(cfg: &StudyConfig) -> Result<Self> {
        match &cfg.data {
            DataSource::Synthetic(s) => {
                let task = SynthTask::new(s)?;
                Ok(if cfg.resample_per_seed {
                    StudyData::Resampled(task)
                } else {
                    StudyData::Fixed(task.pair())
                })
            }
            DataSource::Csv(c) => {
                if cfg.resample_per_seed {
                    log::info!("CSV data is fixed; resample_per_seed has no effect");
                }
                Ok(StudyData::Fixed(DomainPair::new(
                    load_csv(&c.source_train, &c.schema)?,
                    load_csv(&c.source_eval, &c.schema)?,
                    load_csv(&c.target_train, &c.schema)?,
                    load_csv(&c.target_eval, &c.schema)?,
                )?))
            }
        }
    }

    fn pair(&self, seed: u64) -> std::borrow::Cow<'_, DomainPair> {
        match self {
            StudyData::Fixed(p) => std::borrow::Cow::Borrowed(p),
            StudyData::Resampled(t) => std::borrow::Cow::Owned(t.pair_with_training_seed(Some(seed))),
        }
    }

    fn replacement_pool(&self, pair: &DomainPair, n: usize) -> Vec<Example> {
        match self {
            StudyData::Resampled(t) => t.replacement_pool(n).examples().to_vec(),
            StudyData::Fixed(_) => pair.target_eval.examples().iter().take(n).cloned().collect(),
        }
    }
}

/// One seed's outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed: u64,
    pub target_accuracy: f64,
    pub source_accuracy: Option<f64>,
    pub target_risk: Option<f64>,
    pub epochs: usize,
    pub final_weights: WeightStats,
    pub max_grad_norm: f64,
    pub degenerate_epochs: usize,
}

impl RunRecord {
    fn from_model(model: &TrainedModel) -> Result<Self> {
        let last = model.trace.last().ok_or(Error::EmptyTrace)?;
        let target_accuracy = last
            .target_accuracy
            .ok_or_else(|| Error::InvalidArgument("final epoch was not evaluated".into()))?;
        Ok(Self {
            seed: model.seed,
            target_accuracy,
            source_accuracy: last.source_accuracy,
            target_risk: last.target_risk,
            epochs: model.trace.len(),
            final_weights: last.weights,
            max_grad_norm: model.trace.max_grad_norm().unwrap_or(0.0),
            degenerate_epochs: model.trace.records.iter().filter(|r| r.degenerate_selection).count(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairDiff {
    pub i: usize,
    pub j: usize,
    pub diff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_width: f64,
    /// `counts.len() + 1` edges starting at 0.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    /// Threshold marker.
    pub epsilon: f64,
    pub exceed_fraction: f64,
}

/// Weight statistics of every run at one epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochDynamics {
    pub epoch: usize,
    pub runs: Vec<WeightStats>,
    pub mean_min: f64,
    pub mean_max: f64,
    pub mean_std: f64,
    /// Population std of the per-run max weight.
    pub max_weight_spread: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub constants: StabilityConstants,
    pub n: u64,
    pub stability: f64,
    pub theorem: f64,
    pub strategy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationStudy {
    pub schema_version: u32,
    pub name: String,
    pub config: StudyConfig,
    pub n_target: usize,
    pub runs: Vec<RunRecord>,
    pub pairs: Vec<PairDiff>,
    pub failure_rate: f64,
    pub mean_accuracy: f64,
    /// Sample standard deviation across seeds.
    pub std_accuracy: f64,
    pub histogram: Histogram,
    pub dynamics: Vec<EpochDynamics>,
    pub delta_closed_form: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sensitivity: Option<SensitivityEstimate>,
    pub bound: BoundReport,
}

impl ReplicationStudy {
    pub fn accuracies(&self) -> Vec<f64> {
        self.runs.iter().map(|r| r.target_accuracy).collect()
    }

    pub fn delta_hat(&self) -> Option<f64> {
        self.sensitivity.as_ref().map(|s| s.delta_hat)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn exceeds(diffs: impl IntoIterator<Item = f64>, epsilon: f64) -> (usize, usize) {
    diffs
        .into_iter()
        .fold((0, 0), |(hit, all), d| (hit + usize::from(d > epsilon), all + 1))
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("epsilon must be > 0, got {epsilon}")))
    }
}

/// All unordered pairs `(i < j)` in lexicographic order.
pub fn pairwise_diffs(values: &[f64]) -> Vec<PairDiff> {
    let mut out = Vec::with_capacity(values.len() * values.len().saturating_sub(1) / 2);
    for i in 0..values.len() {
        for j in i + 1..values.len() {
            out.push(PairDiff {
                i,
                j,
                diff: (values[i] - values[j]).abs(),
            });
        }
    }
    out
}

/// Fraction of unordered pairs whose accuracies differ by more than
/// `epsilon`, together with those pairs.
pub fn pairwise_failure_rate(accuracies: &[f64], epsilon: f64) -> Result<(f64, Vec<PairDiff>)> {
    if accuracies.len() < 2 {
        return Err(Error::TooFewValues(accuracies.len()));
    }
    check_epsilon(epsilon)?;
    let pairs = pairwise_diffs(accuracies);
    let (hit, all) = exceeds(pairs.iter().map(|p| p.diff), epsilon);
    Ok((hit as f64 / all as f64, pairs))
}

/// Fixed-width bins from 0. The last bin always contains the maximum.
pub fn histogram(diffs: &[f64], bin_width: f64, epsilon: f64) -> Result<Histogram> {
    if diffs.is_empty() {
        return Err(Error::TooFewValues(0));
    }
    if !(bin_width > 0.0 && bin_width.is_finite()) {
        return Err(Error::InvalidArgument(format!("bin_width must be > 0, got {bin_width}")));
    }
    check_epsilon(epsilon)?;
    if let Some(bad) = diffs.iter().find(|d| !(**d >= 0.0 && d.is_finite())) {
        return Err(Error::InvalidArgument(format!("differences must be finite and >= 0, got {bad}")));
    }
    let bin = |d: f64| (d / bin_width).floor() as usize;
    let max = diffs.iter().copied().fold(0.0, f64::max);
    let nbins = bin(max) + 1;
    let mut counts = vec![0; nbins];
    for &d in diffs {
        counts[bin(d)] += 1;
    }
    let (hit, all) = exceeds(diffs.iter().copied(), epsilon);
    Ok(Histogram {
        bin_width,
        edges: (0..=nbins).map(|k| k as f64 * bin_width).collect(),
        counts,
        epsilon,
        exceed_fraction: hit as f64 / all as f64,
    })
}

/// Per-epoch weight statistics across runs.
pub fn weight_dynamics(traces: &[&TrainTrace]) -> Result<Vec<EpochDynamics>> {
    let first = traces.first().ok_or(Error::EmptyTrace)?;
    for (run, t) in traces.iter().enumerate() {
        if t.len() != first.len() {
            return Err(Error::RaggedTraces {
                run,
                expected: first.len(),
                got: t.len(),
            });
        }
    }
    (0..first.len())
        .map(|k| {
            let runs: Vec<WeightStats> = traces.iter().map(|t| t.records[k].weights).collect();
            let col = |f: fn(&WeightStats) -> f64| runs.iter().map(f).collect::<Vec<f64>>();
            let maxes = col(|w| w.max);
            Ok(EpochDynamics {
                epoch: first.records[k].epoch,
                mean_min: mean(&col(|w| w.min)),
                mean_max: mean(&maxes),
                mean_std: mean(&col(|w| w.std)),
                max_weight_spread: population_std(&maxes),
                runs,
            })
        })
        .collect()
}

struct SeedRun {
    model: TrainedModel,
    init: crate::model::ModelParams,
}

fn run_seed(cfg: &StudyConfig, pair: &DomainPair, seed: u64) -> Result<SeedRun> {
    let counts = pair.source_train.domain_counts();
    match cfg.protocol {
        Protocol::Direct => {
            let trainer = Trainer::new(&pair.target_train, &cfg.strategy, &cfg.hyper_target)
                .with_eval(EvalSets::of_pair(pair))
                .with_source_counts(&counts);
            let init = crate::model::init_params_scaled(
                pair.target_train.dim(),
                pair.target_train.classes(),
                seed,
                trainer.init_scale,
            );
            let model = trainer.run_from(init.clone(), seed)?;
            Ok(SeedRun { model, init })
        }
        Protocol::TwoStage => {
            let run = two_stage_train_detailed(pair, &cfg.strategy, &cfg.hyper_source, &cfg.hyper_target, seed)?;
            Ok(SeedRun {
                init: run.source_stage.params,
                model: run.target_stage,
            })
        }
    }
}

fn estimate_sensitivity(
    cfg: &StudyConfig,
    data: &StudyData,
    pair: &DomainPair,
    run: &SeedRun,
    seed: u64,
) -> Result<SensitivityEstimate> {
    let s = &cfg.sensitivity;
    let ds: &Dataset = &pair.target_train;
    let counts = pair.source_train.domain_counts();
    let epochs = cfg.hyper_target.epochs;
    let ctx = EpochContext::new(epochs - 1, epochs, &run.model.params, &run.init)
        .with_source_counts(&counts)
        .with_loss_cap(cfg.hyper_target.loss_cap);
    let indices = if s.max_indices == 0 || s.max_indices >= ds.len() {
        None
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(STREAM_SENSITIVITY);
        let mut ix = sample(&mut rng, ds.len(), s.max_indices).into_vec();
        ix.sort_unstable();
        Some(ix)
    };
    let mode = match s.mode {
        SensitivityMode::Immediate => EstimatorMode::Immediate,
        SensitivityMode::Retrained => EstimatorMode::Retrained {
            hyper: cfg.hyper_target.clone(),
            seed,
        },
    };
    let pool = data.replacement_pool(pair, s.pool_size);
    empirical_sensitivity(
        &cfg.strategy,
        ds,
        &ctx,
        &pool,
        &SensitivityOptions {
            candidates_per_index: s.candidates_per_index,
            indices,
            mode,
            seed,
            keep_per_index: false,
        },
    )
}

/// Train one model per seed and assemble the report. Seeds run in
/// parallel; everything downstream is reduced in seed order.
pub fn run_study(cfg: &StudyConfig) -> Result<ReplicationStudy> {
    cfg.validate()?;
    let data = StudyData::load(cfg)?;
    let name = cfg.display_name();
    log::info!("study {name}: {} seeds, protocol {}", cfg.seeds.len(), cfg.protocol);

    let runs: Vec<SeedRun> = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            run_seed(cfg, &data.pair(seed), seed).map_err(|e| Error::Seed {
                seed,
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;

    let records: Vec<RunRecord> = runs
        .iter()
        .map(|r| RunRecord::from_model(&r.model))
        .collect::<Result<_>>()?;
    let accuracies: Vec<f64> = records.iter().map(|r| r.target_accuracy).collect();
    let (failure_rate, pairs) = pairwise_failure_rate(&accuracies, cfg.epsilon)?;
    let diffs: Vec<f64> = pairs.iter().map(|p| p.diff).collect();
    let histogram = histogram(&diffs, cfg.histogram_bin_width, cfg.epsilon)?;
    let traces: Vec<&TrainTrace> = runs.iter().map(|r| &r.model.trace).collect();
    let dynamics = weight_dynamics(&traces)?;

    let first_seed = cfg.seeds[0];
    let first_pair = data.pair(first_seed);
    let n_target = first_pair.target_train.len();
    let sensitivity = if cfg.sensitivity.enabled {
        Some(estimate_sensitivity(cfg, &data, &first_pair, &runs[0], first_seed)?)
    } else {
        None
    };

    let delta = theoretical_sensitivity(&cfg.strategy, Some(cfg.t_pace))?;
    let merged = TrainTrace {
        records: runs.iter().flat_map(|r| r.model.trace.records.iter().cloned()).collect(),
    };
    let constants = estimate_c(&merged, &cfg.hyper_target, cfg.lipschitz)?;
    let n = n_target as u64;
    let bound = BoundReport {
        constants,
        n,
        stability: stability_bound(constants.c, delta, n)?,
        theorem: replicability_bound(&BoundInputs {
            epsilon: cfg.epsilon,
            n,
            c: constants.c,
            delta_q: delta,
        })?,
        strategy: strategy_bound(&cfg.strategy, cfg.epsilon, n, constants.c, Some(cfg.t_pace))?,
    };

    Ok(ReplicationStudy {
        schema_version: STUDY_SCHEMA_VERSION,
        name,
        config: cfg.clone(),
        n_target,
        mean_accuracy: mean(&accuracies),
        std_accuracy: sample_std(&accuracies),
        runs: records,
        pairs,
        failure_rate,
        histogram,
        dynamics,
        delta_closed_form: delta,
        sensitivity,
        bound,
    })
}

/// One training run under the study's protocol and data.
pub fn train_single(cfg: &StudyConfig, seed: u64) -> Result<TrainedModel> {
    cfg.validate()?;
    let data = StudyData::load(cfg)?;
    Ok(run_seed(cfg, &data.pair(seed), seed)?.model)
}

/// Closed-form and empirical sensitivity for one trained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub strategy: String,
    pub seed: u64,
    pub n: usize,
    pub delta_closed_form: f64,
    pub estimate: SensitivityEstimate,
}

/// Trains on the first seed and estimates sensitivity at its final epoch,
/// regardless of `sensitivity.enabled`.
pub fn sensitivity_report(cfg: &StudyConfig) -> Result<SensitivityReport> {
    cfg.validate()?;
    let data = StudyData::load(cfg)?;
    let seed = cfg.seeds[0];
    let pair = data.pair(seed);
    let run = run_seed(cfg, &pair, seed)?;
    Ok(SensitivityReport {
        strategy: cfg.strategy.tag().to_string(),
        seed,
        n: pair.target_train.len(),
        delta_closed_form: theoretical_sensitivity(&cfg.strategy, Some(cfg.t_pace))?,
        estimate: estimate_sensitivity(cfg, &data, &pair, &run, seed)?,
    })
}

/// One row of the comparative table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub name: String,
    pub strategy: String,
    pub protocol: Protocol,
    pub n_target: usize,
    pub seeds: usize,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    pub failure_rate: f64,
    pub delta_closed_form: f64,
    pub delta_hat: Option<f64>,
    pub c: f64,
    pub bound_theorem: f64,
    pub bound_strategy: f64,
}

impl SweepRow {
    pub fn of(study: &ReplicationStudy) -> Self {
        Self {
            name: study.name.clone(),
            strategy: study.config.strategy.tag().to_string(),
            protocol: study.config.protocol,
            n_target: study.n_target,
            seeds: study.runs.len(),
            mean_accuracy: study.mean_accuracy,
            std_accuracy: study.std_accuracy,
            failure_rate: study.failure_rate,
            delta_closed_form: study.delta_closed_form,
            delta_hat: study.delta_hat(),
            c: study.bound.constants.c,
            bound_theorem: study.bound.theorem,
            bound_strategy: study.bound.strategy,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterPoint {
    pub name: String,
    pub delta: f64,
    pub failure_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub schema_version: u32,
    pub rows: Vec<SweepRow>,
    pub scatter: Vec<ScatterPoint>,
    /// Spearman correlation between closed-form sensitivity and failure
    /// rate; absent when either is constant.
    pub rank_correlation: Option<f64>,
    pub studies: Vec<ReplicationStudy>,
}

/// Run every study (concurrently) and tabulate them in input order.
pub fn sweep(cfgs: &[StudyConfig]) -> Result<SweepReport> {
    if cfgs.is_empty() {
        return Err(Error::InvalidConfig("sweep needs at least one study".into()));
    }
    let studies: Vec<ReplicationStudy> = cfgs
        .par_iter()
        .enumerate()
        .map(|(index, cfg)| {
            run_study(cfg).map_err(|e| Error::Study {
                index,
                name: cfg.display_name(),
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;
    let rows: Vec<SweepRow> = studies.iter().map(SweepRow::of).collect();
    let scatter: Vec<ScatterPoint> = rows
        .iter()
        .map(|r| ScatterPoint {
            name: r.name.clone(),
            delta: r.delta_closed_form,
            failure_rate: r.failure_rate,
        })
        .collect();
    let deltas: Vec<f64> = scatter.iter().map(|p| p.delta).collect();
    let rates: Vec<f64> = scatter.iter().map(|p| p.failure_rate).collect();
    Ok(SweepReport {
        schema_version: STUDY_SCHEMA_VERSION,
        rank_correlation: spearman(&deltas, &rates),
        rows,
        scatter,
        studies,
    })
}
