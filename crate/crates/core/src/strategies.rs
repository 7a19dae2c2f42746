//! Selection strategies: each maps a dataset and the current training
//! state to a probability distribution over dataset indices.
//!
//! All six strategies are pure functions of `(dataset, model state,
//! config, epoch)`. Degenerate inputs that leave a strategy without a
//! well-defined distribution fall back to uniform and set
//! [`Selection::degenerate`].

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{example_stats, ModelParams, DEFAULT_LOSS_CAP};

/// Tolerance on the sum of a selection distribution.
pub const SUM_TOLERANCE: f64 = 1e-9;

/// Probability vector over dataset indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SelectionWeights(Vec<f64>);

impl SelectionWeights {
    /// Checks non-negativity, the unit sum and that some entry is positive.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidArgument(
                "selection weights must be finite and non-negative".into(),
            ));
        }
        let total: f64 = values.iter().sum();
        if total == 0.0 {
            return Err(Error::ZeroWeights);
        }
        if (total - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidArgument(format!(
                "selection weights sum to {total}, not 1"
            )));
        }
        Ok(Self(values))
    }

    /// Divides by the total. Errors when nothing is positive.
    pub fn normalize(mut raw: Vec<f64>) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if raw.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidArgument(
                "raw selection weights must be finite and non-negative".into(),
            ));
        }
        let total: f64 = raw.iter().sum();
        if total <= 0.0 {
            return Err(Error::ZeroWeights);
        }
        raw.iter_mut().for_each(|v| *v /= total);
        Ok(Self(raw))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Number of strictly positive entries.
    pub fn support_size(&self) -> usize {
        self.0.iter().filter(|v| **v > 0.0).count()
    }
}

/// Strategy output plus the fallback flag.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub weights: SelectionWeights,
    /// Set when a degenerate case was resolved to uniform.
    pub degenerate: bool,
}

impl Selection {
    fn exact(weights: SelectionWeights) -> Self {
        Self {
            weights,
            degenerate: false,
        }
    }

    fn fallback(n: usize, why: &str) -> Result<Self> {
        log::debug!("selection fell back to uniform: {why}");
        Ok(Self {
            weights: uniform_weights(n)?,
            degenerate: true,
        })
    }
}

/// Pacing schedule shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pace {
    Linear,
    Exp,
    Log,
}

impl fmt::Display for Pace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Pace::Linear => "linear",
            Pace::Exp => "exp",
            Pace::Log => "log",
        })
    }
}

impl FromStr for Pace {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Pace::Linear),
            "exp" => Ok(Pace::Exp),
            "log" => Ok(Pace::Log),
            other => Err(Error::InvalidArgument(format!(
                "unknown pacing kind `{other}` (expected linear, exp or log)"
            ))),
        }
    }
}

impl Pace {
    /// Growth shape `g(t) ∈ [0, 1]` with `g(1) = 1`: the pacing value is
    /// `α + (1 − α)·g(t)`.
    pub fn progress(self, t_ratio: f64, k: f64) -> f64 {
        let t = t_ratio.clamp(0.0, 1.0);
        match self {
            Pace::Linear => t,
            Pace::Exp => (k * t - k).exp().min(1.0),
            Pace::Log => ((1.0 + 9.0 * t).ln() / 10f64.ln()).min(1.0),
        }
    }
}

/// Fraction of data a pacing schedule admits at progress `t_ratio = t / t_max`.
pub fn pacing(kind: Pace, t_ratio: f64, alpha: f64, k: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&t_ratio) {
        return Err(Error::InvalidArgument(format!(
            "t_ratio {t_ratio} outside [0, 1]"
        )));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidArgument(format!("alpha {alpha} outside (0, 1]")));
    }
    if kind == Pace::Exp && !(k > 0.0) {
        return Err(Error::InvalidArgument(format!("exp pacing needs k > 0, got {k}")));
    }
    Ok(alpha + (1.0 - alpha) * kind.progress(t_ratio, k))
}

/// Size of the curriculum's active set for ratio `r`: `⌊r·n⌋` clamped to `[1, n]`.
///
/// A relative slack of 1e-9 keeps products such as `(2/3)·3` from
/// flooring one short.
pub fn active_count(ratio: f64, n: usize) -> usize {
    let raw = ratio * n as f64;
    let k = (raw + 1e-9 * raw.abs().max(1.0)).floor();
    (k.max(1.0) as usize).min(n)
}

/// `α + (β − α)·g(e/E)` where `g` is the pace shape.
pub fn curriculum_ratio(epoch: usize, total_epochs: usize, alpha: f64, beta: f64, pace: Pace, k: f64) -> f64 {
    let t = epoch as f64 / total_epochs.max(1) as f64;
    alpha + (beta - alpha) * pace.progress(t, k)
}

pub mod defaults {
    use super::Pace;

    pub const LAMBDA: f64 = 0.8;
    pub const TAU: f64 = 0.2;
    pub const TAU_UNC: f64 = 0.12;
    pub const TAU_CURR: f64 = 0.12;
    pub const TAU_GB: f64 = 0.1;
    pub const ALPHA: f64 = 0.25;
    pub const BETA: f64 = 1.0;
    pub const K: f64 = 3.0;
    pub const W_MIN: f64 = 0.01;
    pub const W_MAX: f64 = 5.0;
    pub const PACE: Pace = Pace::Linear;
    pub const USE_GRADIENTS: bool = true;

    pub(super) fn lambda() -> f64 {
        LAMBDA
    }
    pub(super) fn tau() -> f64 {
        TAU
    }
    pub(super) fn tau_unc() -> f64 {
        TAU_UNC
    }
    pub(super) fn tau_curr() -> f64 {
        TAU_CURR
    }
    pub(super) fn tau_gb() -> f64 {
        TAU_GB
    }
    pub(super) fn alpha() -> f64 {
        ALPHA
    }
    pub(super) fn beta() -> f64 {
        BETA
    }
    pub(super) fn k() -> f64 {
        K
    }
    pub(super) fn w_min() -> f64 {
        W_MIN
    }
    pub(super) fn w_max() -> f64 {
        W_MAX
    }
    pub(super) fn pace() -> Pace {
        PACE
    }
    pub(super) fn use_gradients() -> bool {
        USE_GRADIENTS
    }
}

/// The six strategies with their parameters. Missing parameters take the
/// values in [`defaults`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StrategyConfig {
    Uniform,
    ImportanceWeighting {
        #[serde(default = "defaults::lambda")]
        lambda: f64,
    },
    ConfidenceSampling {
        #[serde(default = "defaults::tau")]
        tau: f64,
        #[serde(default = "defaults::w_min")]
        w_min: f64,
        #[serde(default = "defaults::w_max")]
        w_max: f64,
    },
    Curriculum {
        #[serde(default = "defaults::alpha")]
        alpha: f64,
        #[serde(default = "defaults::beta")]
        beta: f64,
        #[serde(default = "defaults::pace")]
        pace: Pace,
        #[serde(default = "defaults::k")]
        k: f64,
    },
    UncertaintyCurriculum {
        #[serde(default = "defaults::tau_unc")]
        tau_unc: f64,
        #[serde(default = "defaults::tau_curr")]
        tau_curr: f64,
        #[serde(default = "defaults::alpha")]
        alpha: f64,
        #[serde(default = "defaults::beta")]
        beta: f64,
        #[serde(default = "defaults::pace")]
        pace: Pace,
        #[serde(default = "defaults::k")]
        k: f64,
    },
    GradientBased {
        #[serde(default = "defaults::tau_gb")]
        tau_gb: f64,
        #[serde(default = "defaults::w_min")]
        w_min: f64,
        #[serde(default = "defaults::w_max")]
        w_max: f64,
        #[serde(default = "defaults::use_gradients")]
        use_gradients: bool,
    },
}

impl StrategyConfig {
    pub const TAGS: [&'static str; 6] = [
        "uniform",
        "importance_weighting",
        "confidence_sampling",
        "curriculum",
        "uncertainty_curriculum",
        "gradient_based",
    ];

    /// The strategy with every parameter at its default.
    pub fn default_for(tag: &str) -> Result<Self> {
        use defaults::*;
        Ok(match tag {
            "uniform" => StrategyConfig::Uniform,
            "importance_weighting" => StrategyConfig::ImportanceWeighting { lambda: LAMBDA },
            "confidence_sampling" => StrategyConfig::ConfidenceSampling {
                tau: TAU,
                w_min: W_MIN,
                w_max: W_MAX,
            },
            "curriculum" => StrategyConfig::Curriculum {
                alpha: ALPHA,
                beta: BETA,
                pace: PACE,
                k: K,
            },
            "uncertainty_curriculum" => StrategyConfig::UncertaintyCurriculum {
                tau_unc: TAU_UNC,
                tau_curr: TAU_CURR,
                alpha: ALPHA,
                beta: BETA,
                pace: PACE,
                k: K,
            },
            "gradient_based" => StrategyConfig::GradientBased {
                tau_gb: TAU_GB,
                w_min: W_MIN,
                w_max: W_MAX,
                use_gradients: USE_GRADIENTS,
            },
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown strategy `{other}` (expected one of {})",
                    Self::TAGS.join(", ")
                )))
            }
        })
    }

    /// All six strategies at their defaults, in canonical order.
    pub fn all_defaults() -> Vec<Self> {
        Self::TAGS
            .iter()
            .map(|t| Self::default_for(t).expect("known tag"))
            .collect()
    }

    pub fn tag(&self) -> &'static str {
        match self {
            StrategyConfig::Uniform => "uniform",
            StrategyConfig::ImportanceWeighting { .. } => "importance_weighting",
            StrategyConfig::ConfidenceSampling { .. } => "confidence_sampling",
            StrategyConfig::Curriculum { .. } => "curriculum",
            StrategyConfig::UncertaintyCurriculum { .. } => "uncertainty_curriculum",
            StrategyConfig::GradientBased { .. } => "gradient_based",
        }
    }

    pub fn is_curriculum(&self) -> bool {
        matches!(
            self,
            StrategyConfig::Curriculum { .. } | StrategyConfig::UncertaintyCurriculum { .. }
        )
    }

    /// Whether the weights depend on the current model.
    pub fn is_model_dependent(&self) -> bool {
        !matches!(
            self,
            StrategyConfig::Uniform | StrategyConfig::ImportanceWeighting { .. }
        )
    }

    /// Every violated parameter constraint, prefixed with `prefix`.
    pub fn violations(&self, prefix: &str) -> Vec<String> {
        let mut v = Vec::new();
        let mut positive = |name: &str, x: f64| {
            if !(x > 0.0 && x.is_finite()) {
                v.push(format!("{prefix}.{name} must be > 0 (got {x})"));
            }
        };
        match *self {
            StrategyConfig::Uniform => {}
            StrategyConfig::ImportanceWeighting { lambda } => positive("lambda", lambda),
            StrategyConfig::ConfidenceSampling { tau, .. } => positive("tau", tau),
            StrategyConfig::Curriculum { k, .. } => positive("k", k),
            StrategyConfig::UncertaintyCurriculum {
                tau_unc, tau_curr, k, ..
            } => {
                positive("tau_unc", tau_unc);
                positive("tau_curr", tau_curr);
                positive("k", k);
            }
            StrategyConfig::GradientBased { tau_gb, .. } => positive("tau_gb", tau_gb),
        }
        match *self {
            StrategyConfig::ConfidenceSampling { w_min, w_max, .. }
            | StrategyConfig::GradientBased { w_min, w_max, .. } => {
                if !(w_min >= 0.0 && w_min.is_finite()) {
                    v.push(format!("{prefix}.w_min must be >= 0 (got {w_min})"));
                }
                if !(w_max >= w_min && w_max.is_finite()) {
                    v.push(format!("{prefix}.w_max must be >= w_min (got {w_max})"));
                }
            }
            StrategyConfig::Curriculum { alpha, beta, .. }
            | StrategyConfig::UncertaintyCurriculum { alpha, beta, .. } => {
                if !(alpha > 0.0 && alpha <= 1.0) {
                    v.push(format!("{prefix}.alpha must lie in (0, 1] (got {alpha})"));
                }
                if !(beta >= alpha && beta <= 1.0) {
                    v.push(format!("{prefix}.beta must lie in [alpha, 1] (got {beta})"));
                }
            }
            _ => {}
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations("strategy");
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(v))
        }
    }

    /// Computes this epoch's selection distribution.
    pub fn select(&self, ds: &Dataset, ctx: &EpochContext<'_>) -> Result<Selection> {
        match *self {
            StrategyConfig::Uniform => Ok(Selection::exact(uniform_weights(ds.len())?)),
            StrategyConfig::ImportanceWeighting { lambda } => {
                let counts = ctx.source_counts.ok_or_else(|| {
                    Error::InvalidArgument(
                        "importance weighting needs source-domain feature counts".into(),
                    )
                })?;
                importance_weights(ds, counts, lambda).map(Selection::exact)
            }
            StrategyConfig::ConfidenceSampling { tau, w_min, w_max } => {
                confidence_weights(ds, ctx.model, tau, w_min, w_max, ctx.loss_cap)
            }
            StrategyConfig::Curriculum {
                alpha,
                beta,
                pace,
                k,
            } => curriculum_weights(ctx, ds, alpha, beta, pace, k).map(Selection::exact),
            StrategyConfig::UncertaintyCurriculum {
                tau_unc,
                tau_curr,
                alpha,
                beta,
                pace,
                k,
            } => uncertainty_curriculum_weights(ctx, ds, tau_unc, tau_curr, alpha, beta, pace, k)
                .map(Selection::exact),
            StrategyConfig::GradientBased {
                tau_gb,
                w_min,
                w_max,
                use_gradients,
            } => gradient_weights(ds, ctx.model, tau_gb, w_min, w_max, use_gradients, ctx.loss_cap),
        }
    }
}

/// Training state a strategy may consult.
#[derive(Debug, Clone, Copy)]
pub struct EpochContext<'a> {
    pub epoch: usize,
    pub total_epochs: usize,
    pub model: &'a ModelParams,
    /// The model difficulty is measured under (`h0`).
    pub initial_model: &'a ModelParams,
    /// Cached per-example difficulty. Recomputed from `initial_model`
    /// when absent.
    pub difficulty: Option<&'a [f64]>,
    /// Per-domain-feature counts of the source sample.
    pub source_counts: Option<&'a [usize]>,
    pub loss_cap: f64,
}

impl<'a> EpochContext<'a> {
    pub fn new(epoch: usize, total_epochs: usize, model: &'a ModelParams, initial_model: &'a ModelParams) -> Self {
        Self {
            epoch,
            total_epochs,
            model,
            initial_model,
            difficulty: None,
            source_counts: None,
            loss_cap: DEFAULT_LOSS_CAP,
        }
    }

    pub fn with_source_counts(mut self, counts: &'a [usize]) -> Self {
        self.source_counts = Some(counts);
        self
    }

    pub fn with_difficulty(mut self, difficulty: &'a [f64]) -> Self {
        self.difficulty = Some(difficulty);
        self
    }

    pub fn with_loss_cap(mut self, loss_cap: f64) -> Self {
        self.loss_cap = loss_cap;
        self
    }

    fn check(&self, n: usize) -> Result<()> {
        if self.total_epochs == 0 || self.epoch >= self.total_epochs {
            return Err(Error::InvalidArgument(format!(
                "epoch {} outside 0..{}",
                self.epoch, self.total_epochs
            )));
        }
        if let Some(d) = self.difficulty {
            if d.len() != n {
                return Err(Error::LengthMismatch {
                    left: d.len(),
                    right: n,
                });
            }
        }
        Ok(())
    }
}

/// Every entry `1/n`.
pub fn uniform_weights(n: usize) -> Result<SelectionWeights> {
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    Ok(SelectionWeights(vec![1.0 / n as f64; n]))
}

/// `w(f) = (P_T(f) + λ) / (P_S(f) + λ)` per example, normalized. `P_T` is
/// the empirical feature distribution of `ds`, `P_S` that of `source_counts`.
pub fn importance_weights(ds: &Dataset, source_counts: &[usize], lambda: f64) -> Result<SelectionWeights> {
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if !(lambda > 0.0) {
        return Err(Error::InvalidArgument(format!("lambda must be > 0, got {lambda}")));
    }
    if source_counts.len() < ds.domains() {
        return Err(Error::LengthMismatch {
            left: source_counts.len(),
            right: ds.domains(),
        });
    }
    let source_total: usize = source_counts.iter().sum();
    let n = ds.len() as f64;
    let target_counts = ds.domain_counts();
    let ratio: Vec<f64> = (0..ds.domains())
        .map(|f| {
            let p_t = target_counts[f] as f64 / n;
            let p_s = if source_total == 0 {
                0.0
            } else {
                source_counts[f] as f64 / source_total as f64
            };
            (p_t + lambda) / (p_s + lambda)
        })
        .collect();
    SelectionWeights::normalize(ds.examples().iter().map(|e| ratio[e.domain]).collect())
}

/// Raw weights `(1 − c_i)^{1/τ}` clipped to `[w_min, w_max]`.
pub fn confidence_raw_weights(confidences: &[f64], tau: f64, w_min: f64, w_max: f64) -> Vec<f64> {
    confidences
        .iter()
        .map(|c| (1.0 - c).max(0.0).powf(1.0 / tau).clamp(w_min, w_max))
        .collect()
}

/// `(1 − c_i)^{1/τ}`, clipped, then normalized; `c_i` is the model's
/// probability of the true label.
pub fn confidence_weights(
    ds: &Dataset,
    model: &ModelParams,
    tau: f64,
    w_min: f64,
    w_max: f64,
    loss_cap: f64,
) -> Result<Selection> {
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let confidences: Vec<f64> = example_stats(model, ds, loss_cap)?
        .iter()
        .map(|s| s.confidence)
        .collect();
    confidence_from_scores(&confidences, tau, w_min, w_max)
}

/// Confidence weighting from precomputed confidences.
pub fn confidence_from_scores(confidences: &[f64], tau: f64, w_min: f64, w_max: f64) -> Result<Selection> {
    if !(tau > 0.0) || !(w_min >= 0.0) || !(w_max >= w_min) {
        return Err(Error::InvalidArgument(format!(
            "confidence sampling needs tau > 0 and 0 <= w_min <= w_max (tau={tau}, w_min={w_min}, w_max={w_max})"
        )));
    }
    let raw = confidence_raw_weights(confidences, tau, w_min, w_max);
    match SelectionWeights::normalize(raw) {
        Ok(w) => Ok(Selection::exact(w)),
        Err(Error::ZeroWeights) => Selection::fallback(confidences.len(), "every confidence is 1"),
        Err(e) => Err(e),
    }
}

/// Per-example difficulty: the normalized loss under `initial_model`.
pub fn curriculum_difficulty(ds: &Dataset, initial_model: &ModelParams, loss_cap: f64) -> Result<Vec<f64>> {
    Ok(example_stats(initial_model, ds, loss_cap)?
        .into_iter()
        .map(|s| s.loss)
        .collect())
}

/// Indices ordered by `key` with `cmp`, ties by ascending index.
fn ranked(keys: &[f64], descending: bool) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..keys.len()).collect();
    idx.sort_by(|&a, &b| {
        let ord = keys[a].total_cmp(&keys[b]);
        let ord = if descending { ord.reverse() } else { ord };
        ord.then(a.cmp(&b))
    });
    idx
}

/// The `k` lowest-difficulty examples at `1/k` each; ties admit the lower index.
pub fn easiest_k(difficulty: &[f64], k: usize) -> Result<SelectionWeights> {
    let n = difficulty.len();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let k = k.clamp(1, n);
    let mut w = vec![0.0; n];
    for &i in ranked(difficulty, false).iter().take(k) {
        w[i] = 1.0 / k as f64;
    }
    Ok(SelectionWeights(w))
}

/// Keeps the `k` highest scores (ties by index), zeroes the rest, normalizes.
pub fn top_k_scores(scores: &[f64], k: usize) -> Result<SelectionWeights> {
    let n = scores.len();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let k = k.clamp(1, n);
    let mut w = vec![0.0; n];
    for &i in ranked(scores, true).iter().take(k) {
        w[i] = scores[i];
    }
    SelectionWeights::normalize(w)
}

fn difficulty_for<'a>(ctx: &EpochContext<'a>, ds: &Dataset) -> Result<std::borrow::Cow<'a, [f64]>> {
    match ctx.difficulty {
        Some(d) => Ok(std::borrow::Cow::Borrowed(d)),
        None => Ok(std::borrow::Cow::Owned(curriculum_difficulty(
            ds,
            ctx.initial_model,
            ctx.loss_cap,
        )?)),
    }
}

/// Uniform over the `⌊r·n⌋` easiest examples, `r = α + (β − α)·g(e/E)`.
pub fn curriculum_weights(
    ctx: &EpochContext<'_>,
    ds: &Dataset,
    alpha: f64,
    beta: f64,
    pace: Pace,
    k: f64,
) -> Result<SelectionWeights> {
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    ctx.check(ds.len())?;
    let difficulty = difficulty_for(ctx, ds)?;
    let r = curriculum_ratio(ctx.epoch, ctx.total_epochs, alpha, beta, pace, k);
    easiest_k(&difficulty, active_count(r, ds.len()))
}

/// Combined score `exp((1 − c_i)/τ_unc) · exp(−l_i/τ_curr)`.
pub fn uncertainty_curriculum_scores(confidence: &[f64], loss: &[f64], tau_unc: f64, tau_curr: f64) -> Vec<f64> {
    confidence
        .iter()
        .zip(loss)
        .map(|(c, l)| ((1.0 - c) / tau_unc).exp() * (-l / tau_curr).exp())
        .collect()
}

/// Top-`⌊r·n⌋` examples by combined uncertainty and easiness score,
/// weighted by that score.
#[allow(clippy::too_many_arguments)]
pub fn uncertainty_curriculum_weights(
    ctx: &EpochContext<'_>,
    ds: &Dataset,
    tau_unc: f64,
    tau_curr: f64,
    alpha: f64,
    beta: f64,
    pace: Pace,
    k: f64,
) -> Result<SelectionWeights> {
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if !(tau_unc > 0.0 && tau_curr > 0.0) {
        return Err(Error::InvalidArgument(
            "tau_unc and tau_curr must be > 0".into(),
        ));
    }
    ctx.check(ds.len())?;
    let stats = example_stats(ctx.model, ds, ctx.loss_cap)?;
    let confidence: Vec<f64> = stats.iter().map(|s| s.confidence).collect();
    let loss: Vec<f64> = stats.iter().map(|s| s.loss).collect();
    let scores = uncertainty_curriculum_scores(&confidence, &loss, tau_unc, tau_curr);
    let r = curriculum_ratio(ctx.epoch, ctx.total_epochs, alpha, beta, pace, k);
    top_k_scores(&scores, active_count(r, ds.len()))
}

/// Gradient-magnitude weighting: `exp(‖g_i‖/τ)` (or the loss proxy
/// `exp(−l_i/τ)`), min-max rescaled into `[w_min, w_max]`, normalized.
pub fn gradient_weights(
    ds: &Dataset,
    model: &ModelParams,
    tau_gb: f64,
    w_min: f64,
    w_max: f64,
    use_gradients: bool,
    loss_cap: f64,
) -> Result<Selection> {
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let stats = example_stats(model, ds, loss_cap)?;
    // Exponents of the raw weights; the exponentials are never formed.
    let exponents: Vec<f64> = if use_gradients {
        stats.iter().map(|s| s.grad_norm / tau_gb).collect()
    } else {
        stats.iter().map(|s| -s.loss / tau_gb).collect()
    };
    gradient_from_exponents(&exponents, w_min, w_max)
}

/// Min-max rescaling of `exp(a_i)` computed as
/// `(e^{a_i − a_max} − e^{a_min − a_max}) / (1 − e^{a_min − a_max})`,
/// which never overflows.
pub fn gradient_from_exponents(exponents: &[f64], w_min: f64, w_max: f64) -> Result<Selection> {
    if exponents.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if !(w_min >= 0.0) || !(w_max >= w_min) {
        return Err(Error::InvalidArgument(format!(
            "gradient weighting needs 0 <= w_min <= w_max (w_min={w_min}, w_max={w_max})"
        )));
    }
    if exponents.iter().any(|a| a.is_nan()) {
        return Err(Error::InvalidArgument("NaN score".into()));
    }
    let hi = exponents.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = exponents.iter().copied().fold(f64::INFINITY, f64::min);
    let floor = (lo - hi).exp();
    if hi == lo || floor == 1.0 {
        return Selection::fallback(exponents.len(), "all raw gradient weights equal");
    }
    let span = 1.0 - floor;
    let raw: Vec<f64> = exponents
        .iter()
        .map(|a| {
            let unit = (((a - hi).exp() - floor) / span).clamp(0.0, 1.0);
            w_min + (w_max - w_min) * unit
        })
        .collect();
    match SelectionWeights::normalize(raw) {
        Ok(w) => Ok(Selection::exact(w)),
        Err(Error::ZeroWeights) => Selection::fallback(exponents.len(), "w_max is zero"),
        Err(e) => Err(e),
    }
}

/// Summary used in traces.
pub fn weight_range(w: &[f64]) -> (f64, f64) {
    let min = w.iter().copied().fold(f64::INFINITY, f64::min);
    let max = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (min, max)
}
