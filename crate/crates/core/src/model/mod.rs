//! Linear softmax classifier and its per-example quantities.

mod train;

pub use train::{
    evaluate, train, two_stage_train, two_stage_train_detailed, EpochRecord, EvalSets,
    Evaluation, Hyper, TrainTrace, TrainedModel, Trainer, TwoStageRun, WeightStats,
    TRAINED_MODEL_SCHEMA_VERSION,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Example};
use crate::error::{Error, Result};

/// Probabilities are floored here before taking logs.
pub const PROB_FLOOR: f64 = 1e-12;

/// Default cap (in nats) of the normalized loss.
pub const DEFAULT_LOSS_CAP: f64 = 4.0;

/// Default standard deviation of initial parameters.
pub const DEFAULT_INIT_SCALE: f64 = 0.01;

pub(crate) const STREAM_INIT: u64 = 10;

/// Weights `W` (C×d, row-major) and bias `b` (length C).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "ParamsDoc", try_from = "ParamsDoc")]
pub struct ModelParams {
    classes: usize,
    dim: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

/// Nested-array JSON form.
#[derive(Serialize, Deserialize)]
struct ParamsDoc {
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
}

impl From<ModelParams> for ParamsDoc {
    fn from(p: ModelParams) -> Self {
        ParamsDoc {
            weights: p.weights.chunks(p.dim).map(<[f64]>::to_vec).collect(),
            bias: p.bias,
        }
    }
}

impl TryFrom<ParamsDoc> for ModelParams {
    type Error = Error;

    fn try_from(doc: ParamsDoc) -> Result<Self> {
        let classes = doc.weights.len();
        let dim = doc.weights.first().map_or(0, Vec::len);
        if doc.weights.iter().any(|row| row.len() != dim) {
            return Err(Error::InvalidArgument("ragged weight matrix".into()));
        }
        ModelParams::from_parts(
            classes,
            dim,
            doc.weights.into_iter().flatten().collect(),
            doc.bias,
        )
    }
}

impl ModelParams {
    pub fn zeros(dim: usize, classes: usize) -> Self {
        Self {
            classes,
            dim,
            weights: vec![0.0; classes * dim],
            bias: vec![0.0; classes],
        }
    }

    pub fn from_parts(classes: usize, dim: usize, weights: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if classes == 0 || dim == 0 {
            return Err(Error::InvalidArgument("model needs d, C >= 1".into()));
        }
        if weights.len() != classes * dim {
            return Err(Error::DimensionMismatch {
                expected: classes * dim,
                got: weights.len(),
            });
        }
        if bias.len() != classes {
            return Err(Error::DimensionMismatch {
                expected: classes,
                got: bias.len(),
            });
        }
        if weights.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite model parameter".into()));
        }
        Ok(Self {
            classes,
            dim,
            weights,
            bias,
        })
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Row-major C×d.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn weight(&self, class: usize, feature: usize) -> f64 {
        self.weights[class * self.dim + feature]
    }

    /// `self -= scale * grad`.
    pub fn apply_step(&mut self, grad: &Gradient, scale: f64) {
        for (w, g) in self.weights.iter_mut().zip(&grad.weights) {
            *w -= scale * g;
        }
        for (b, g) in self.bias.iter_mut().zip(&grad.bias) {
            *b -= scale * g;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().chain(&self.bias).all(|v| v.is_finite())
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    pub(crate) fn check_example(&self, e: &Example) -> Result<()> {
        self.check_input(&e.features)?;
        if e.label >= self.classes {
            return Err(Error::UnknownLabel {
                row: 0,
                label: e.label,
                classes: self.classes,
            });
        }
        Ok(())
    }

    pub(crate) fn check_dataset(&self, ds: &Dataset) -> Result<()> {
        if ds.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: ds.dim(),
            });
        }
        if ds.classes() > self.classes {
            return Err(Error::DimensionMismatch {
                expected: self.classes,
                got: ds.classes(),
            });
        }
        Ok(())
    }

    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut out = vec![0.0; self.classes];
        self.logits_into(x, &mut out);
        Ok(out)
    }

    pub(crate) fn logits_into(&self, x: &[f64], out: &mut [f64]) {
        for (c, o) in out.iter_mut().enumerate() {
            let row = &self.weights[c * self.dim..(c + 1) * self.dim];
            *o = self.bias[c] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        }
    }

    pub(crate) fn proba_into(&self, x: &[f64], out: &mut [f64]) {
        self.logits_into(x, out);
        softmax_in_place(out);
    }
}

/// Small Gaussian initialization (standard deviation 0.01), deterministic per seed.
pub fn init_params(dim: usize, classes: usize, seed: u64) -> ModelParams {
    init_params_scaled(dim, classes, seed, DEFAULT_INIT_SCALE)
}

pub fn init_params_scaled(dim: usize, classes: usize, seed: u64, scale: f64) -> ModelParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(STREAM_INIT);
    let mut p = ModelParams::zeros(dim, classes);
    for v in p.weights.iter_mut().chain(p.bias.iter_mut()) {
        *v = scale * rng.sample::<f64, _>(StandardNormal);
    }
    p
}

/// Numerically stable softmax.
pub fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    for v in z.iter_mut() {
        *v /= total;
    }
}

pub fn predict_proba(params: &ModelParams, x: &[f64]) -> Result<Vec<f64>> {
    let mut z = params.logits(x)?;
    softmax_in_place(&mut z);
    Ok(z)
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate().skip(1) {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// Cross-entropy of a true-class probability, with the probability floored.
pub fn cross_entropy_from_prob(p_true: f64) -> f64 {
    -p_true.max(PROB_FLOOR).ln()
}

/// `min(ce, cap) / cap`, in `[0, 1]`.
pub fn bounded_from_prob(p_true: f64, loss_cap: f64) -> f64 {
    cross_entropy_from_prob(p_true).min(loss_cap) / loss_cap
}

pub fn cross_entropy(params: &ModelParams, e: &Example) -> Result<f64> {
    params.check_example(e)?;
    let p = predict_proba(params, &e.features)?;
    Ok(cross_entropy_from_prob(p[e.label]))
}

/// Cross-entropy capped at `loss_cap` nats and scaled into `[0, 1]`.
pub fn bounded_loss(params: &ModelParams, e: &Example, loss_cap: f64) -> Result<f64> {
    params.check_example(e)?;
    let p = predict_proba(params, &e.features)?;
    Ok(bounded_from_prob(p[e.label], loss_cap))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    /// C×d row-major, same layout as [`ModelParams::weights`].
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Gradient {
    pub fn zeros(dim: usize, classes: usize) -> Self {
        Self {
            weights: vec![0.0; classes * dim],
            bias: vec![0.0; classes],
        }
    }

    /// L2 norm of the flattened gradient.
    pub fn norm(&self) -> f64 {
        self.weights
            .iter()
            .chain(&self.bias)
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt()
    }

    pub(crate) fn clear(&mut self) {
        self.weights.iter_mut().for_each(|g| *g = 0.0);
        self.bias.iter_mut().for_each(|g| *g = 0.0);
    }

    /// Adds `scale * residual ⊗ [x, 1]`.
    pub(crate) fn accumulate(&mut self, residual: &[f64], x: &[f64], scale: f64) {
        let dim = x.len();
        for (c, r) in residual.iter().enumerate() {
            let s = scale * r;
            if s == 0.0 {
                continue;
            }
            for (g, v) in self.weights[c * dim..(c + 1) * dim].iter_mut().zip(x) {
                *g += s * v;
            }
            self.bias[c] += s;
        }
    }
}

/// Gradient of the raw cross-entropy with respect to `(W, b)` and its L2 norm.
pub fn per_example_gradient(params: &ModelParams, e: &Example) -> Result<(Gradient, f64)> {
    params.check_example(e)?;
    let mut residual = predict_proba(params, &e.features)?;
    residual[e.label] -= 1.0;
    let mut g = Gradient::zeros(params.dim, params.classes);
    g.accumulate(&residual, &e.features, 1.0);
    let norm = g.norm();
    Ok((g, norm))
}

/// Per-example quantities the strategies consume, from one forward pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExampleStats {
    /// Predicted probability of the true class.
    pub confidence: f64,
    /// Normalized loss in `[0, 1]`.
    pub loss: f64,
    /// L2 norm of the cross-entropy gradient.
    pub grad_norm: f64,
}

/// The gradient is `(p - onehot(y)) ⊗ [x, 1]`, so its norm factors as
/// `‖p - onehot(y)‖ · sqrt(‖x‖² + 1)`.
pub fn example_stats(params: &ModelParams, ds: &Dataset, loss_cap: f64) -> Result<Vec<ExampleStats>> {
    params.check_dataset(ds)?;
    let mut probs = vec![0.0; params.classes];
    Ok(ds
        .examples()
        .iter()
        .map(|e| {
            params.proba_into(&e.features, &mut probs);
            let confidence = probs[e.label];
            let residual_sq: f64 = probs
                .iter()
                .enumerate()
                .map(|(c, p)| {
                    let r = if c == e.label { p - 1.0 } else { *p };
                    r * r
                })
                .sum();
            let x_sq: f64 = e.features.iter().map(|v| v * v).sum();
            ExampleStats {
                confidence,
                loss: bounded_from_prob(confidence, loss_cap),
                grad_norm: (residual_sq * (x_sq + 1.0)).sqrt(),
            }
        })
        .collect())
}
