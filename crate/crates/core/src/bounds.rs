//! Stability and replicability bounds, and the sample sizes they imply.
//!
//! The generic replicability bound carries a prefactor of 4, while the
//! per-strategy expressions carry 2. Both are evaluated as written.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Hyper, TrainTrace};
use crate::sensitivity::theoretical_sensitivity;
use crate::strategies::StrategyConfig;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub epsilon: f64,
    pub n: u64,
    /// Stability constant `c`.
    pub c: f64,
    pub delta_q: f64,
}

impl BoundInputs {
    fn check(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "epsilon must be > 0, got {}",
                self.epsilon
            )));
        }
        if self.n == 0 {
            return Err(Error::InvalidArgument("n must be >= 1".into()));
        }
        check_nonneg("c", self.c)?;
        check_nonneg("delta_q", self.delta_q)
    }
}

fn check_nonneg(name: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name} must be finite and >= 0, got {v}")))
    }
}

/// `M`, `η`, `E`, `G` and their product `c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityConstants {
    /// Lipschitz constant of the loss.
    pub lipschitz: f64,
    pub lr: f64,
    pub epochs: usize,
    /// Gradient-norm bound.
    pub grad_bound: f64,
    pub c: f64,
    /// Set when `c` came out as zero.
    pub degenerate: bool,
}

impl StabilityConstants {
    pub fn new(lipschitz: f64, lr: f64, epochs: usize, grad_bound: f64) -> Self {
        let c = lipschitz * lr * epochs as f64 * grad_bound;
        Self {
            lipschitz,
            lr,
            epochs,
            grad_bound,
            c,
            degenerate: c == 0.0,
        }
    }
}

/// `c·Δ_Q / n`: how far one replaced example can move the risk.
pub fn stability_bound(c: f64, delta_q: f64, n: u64) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be >= 1".into()));
    }
    check_nonneg("c", c)?;
    check_nonneg("delta_q", delta_q)?;
    Ok(c * delta_q / n as f64)
}

/// `prefactor · exp(−ε²n / (2c²Δ²))` before clamping. Zero when `c·Δ = 0`.
fn concentration(prefactor: f64, epsilon: f64, n: u64, scale: f64) -> f64 {
    if scale == 0.0 {
        return 0.0;
    }
    prefactor * (-(epsilon * epsilon) * n as f64 / (2.0 * scale * scale)).exp()
}

/// `4·exp(−ε²n / (2c²Δ_Q²))` without the clamp to 1.
pub fn replicability_expression(b: &BoundInputs) -> Result<f64> {
    b.check()?;
    Ok(concentration(4.0, b.epsilon, b.n, b.c * b.delta_q))
}

/// Replicability failure probability bound, clamped into `[0, 1]`.
/// `Δ_Q = 0` gives 0.
pub fn replicability_bound(b: &BoundInputs) -> Result<f64> {
    Ok(replicability_expression(b)?.min(1.0))
}

/// Per-strategy expression without the clamp:
///
/// | strategy | expression |
/// |---|---|
/// | uniform | 0 |
/// | importance weighting | `2·exp(−2ε²nλ²/c²)` |
/// | confidence sampling | `2·exp(−ε²nτ²/(2c²))` |
/// | curriculum | `2·exp(−ε²n·t_pace²/(1.28c²))` |
/// | uncertainty curriculum, gradient-based | generic bound with their closed-form Δ_Q |
pub fn strategy_expression(cfg: &StrategyConfig, epsilon: f64, n: u64, c: f64, t_pace: Option<f64>) -> Result<f64> {
    let delta_q = theoretical_sensitivity(cfg, t_pace)?;
    let inputs = BoundInputs {
        epsilon,
        n,
        c,
        delta_q,
    };
    inputs.check()?;
    let eps2n = epsilon * epsilon * n as f64;
    let c2 = c * c;
    if c2 == 0.0 {
        return Ok(0.0);
    }
    Ok(match *cfg {
        StrategyConfig::Uniform => 0.0,
        StrategyConfig::ImportanceWeighting { lambda } => {
            2.0 * (-2.0 * eps2n * lambda * lambda / c2).exp()
        }
        StrategyConfig::ConfidenceSampling { tau, .. } => 2.0 * (-eps2n * tau * tau / (2.0 * c2)).exp(),
        StrategyConfig::Curriculum { .. } => {
            let t = t_pace.ok_or(Error::MissingPace)?;
            2.0 * (-eps2n * t * t / (1.28 * c2)).exp()
        }
        StrategyConfig::UncertaintyCurriculum { .. } | StrategyConfig::GradientBased { .. } => {
            replicability_expression(&inputs)?
        }
    })
}

/// [`strategy_expression`] clamped into `[0, 1]`.
pub fn strategy_bound(cfg: &StrategyConfig, epsilon: f64, n: u64, c: f64, t_pace: Option<f64>) -> Result<f64> {
    Ok(strategy_expression(cfg, epsilon, n, c, t_pace)?.min(1.0))
}

/// Smallest `n` with `2·exp(−ε²n/(2c²Δ_Q²)) ≤ ρ`:
/// `⌈2c²Δ_Q² ln(2/ρ) / ε²⌉`, and 0 when `Δ_Q = 0`.
pub fn required_sample_size(rho_target: f64, epsilon: f64, c: f64, delta_q: f64) -> Result<u64> {
    if !(rho_target > 0.0 && rho_target < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "rho_target must lie in (0, 1), got {rho_target}"
        )));
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidArgument(format!("epsilon must be > 0, got {epsilon}")));
    }
    check_nonneg("c", c)?;
    check_nonneg("delta_q", delta_q)?;
    let scale = c * delta_q;
    if scale == 0.0 {
        return Ok(0);
    }
    let n = 2.0 * scale * scale * (2.0 / rho_target).ln() / (epsilon * epsilon);
    Ok(n.ceil() as u64)
}

/// Instantiates the stability constants from a training trace.
///
/// `G` is the largest per-example gradient norm the trace recorded; `η`
/// and `E` come from `hyper`; `M` defaults to `G`.
pub fn estimate_c(trace: &TrainTrace, hyper: &Hyper, lipschitz_hint: Option<f64>) -> Result<StabilityConstants> {
    let g = trace.max_grad_norm().ok_or(Error::EmptyTrace)?;
    let m = lipschitz_hint.unwrap_or(g);
    let constants = StabilityConstants::new(m, hyper.lr, hyper.epochs, g);
    if constants.degenerate {
        log::warn!("stability constant is zero (G = {g}, M = {m}, lr = {})", hyper.lr);
    }
    Ok(constants)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{EpochRecord, WeightStats};

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    fn trace(norms: &[f64]) -> TrainTrace {
        TrainTrace {
            records: norms
                .iter()
                .enumerate()
                .map(|(epoch, &g)| EpochRecord {
                    epoch,
                    target_accuracy: None,
                    source_accuracy: None,
                    target_risk: None,
                    weights: WeightStats {
                        min: 0.0,
                        max: 0.0,
                        std: 0.0,
                    },
                    max_grad_norm: g,
                    degenerate_selection: false,
                })
                .collect(),
        }
    }

    #[test]
    fn stability_reference_values() {
        assert_eq!(stability_bound(3.0, 0.0, 10).unwrap(), 0.0);
        assert!(rel(stability_bound(1.0, 0.625, 6000).unwrap(), 1.041_666_666_666_666_7e-4) < 1e-12);
        let a = stability_bound(2.0, 5.0, 1000).unwrap();
        assert_eq!(stability_bound(2.0, 5.0, 2000).unwrap(), a / 2.0);
        assert!(stability_bound(1.0, 1.0, 0).is_err());
    }

    #[test]
    fn replicability_reference_values() {
        let b = BoundInputs {
            epsilon: 0.01,
            n: 6000,
            c: 1.0,
            delta_q: 0.625,
        };
        assert!(rel(replicability_expression(&b).unwrap(), 1.855_760_084_366_587) < 1e-12);
        assert_eq!(replicability_bound(&b).unwrap(), 1.0);
        let zero = BoundInputs { delta_q: 0.0, ..b };
        assert_eq!(replicability_bound(&zero).unwrap(), 0.0);
    }

    #[test]
    fn replicability_monotone_on_grid() {
        let deltas = [0.01, 0.05, 0.1, 0.5, 1.0];
        let ns = [1_000u64, 10_000, 50_000, 100_000, 1_000_000];
        for &n in &ns {
            let vals: Vec<f64> = deltas
                .iter()
                .map(|&d| {
                    replicability_expression(&BoundInputs {
                        epsilon: 0.01,
                        n,
                        c: 1.0,
                        delta_q: d,
                    })
                    .unwrap()
                })
                .collect();
            assert!(vals.windows(2).all(|w| w[0] <= w[1]), "{vals:?}");
        }
        for &d in &deltas {
            let vals: Vec<f64> = ns
                .iter()
                .map(|&n| {
                    replicability_expression(&BoundInputs {
                        epsilon: 0.01,
                        n,
                        c: 1.0,
                        delta_q: d,
                    })
                    .unwrap()
                })
                .collect();
            assert!(vals.windows(2).all(|w| w[0] >= w[1]), "{vals:?}");
        }
    }

    #[test]
    fn strategy_reference_values() {
        let get = |t: &str| StrategyConfig::default_for(t).unwrap();
        assert_eq!(strategy_bound(&get("uniform"), 0.01, 6000, 1.0, None).unwrap(), 0.0);
        let cbs = strategy_expression(&get("confidence_sampling"), 0.01, 1_000_000, 1.0, None).unwrap();
        assert!(rel(cbs, 0.270_670_566_473_225_4) < 1e-12);
        let iw_big = strategy_bound(
            &StrategyConfig::ImportanceWeighting { lambda: 1e4 },
            0.01,
            6000,
            1.0,
            None,
        )
        .unwrap();
        assert_eq!(iw_big, 0.0);
        assert!(matches!(
            strategy_bound(&get("curriculum"), 0.01, 6000, 1.0, None),
            Err(Error::MissingPace)
        ));
    }

    #[test]
    fn cbs_family_ratio_is_two() {
        for &tau in &[0.1, 0.2, 0.5, 1.0, 5.0] {
            for &n in &[500u64, 5000, 50_000] {
                let cfg = StrategyConfig::ConfidenceSampling {
                    tau,
                    w_min: 0.01,
                    w_max: 5.0,
                };
                let s = strategy_expression(&cfg, 0.01, n, 1.0, None).unwrap();
                let g = replicability_expression(&BoundInputs {
                    epsilon: 0.01,
                    n,
                    c: 1.0,
                    delta_q: 1.0 / tau,
                })
                .unwrap();
                assert!(rel(g / s, 2.0) < 1e-12);
            }
        }
    }

    #[test]
    fn sample_size_reference_values() {
        assert_eq!(required_sample_size(0.05, 0.01, 1.0, 0.0).unwrap(), 0);
        assert_eq!(required_sample_size(0.05, 0.01, 1.0, 0.625).unwrap(), 28_820);
        assert!(required_sample_size(1.0, 0.01, 1.0, 0.5).is_err());
        assert!(required_sample_size(0.0, 0.01, 1.0, 0.5).is_err());
    }

    #[test]
    fn sample_size_scales_with_delta_squared() {
        // Exact powers of two keep the 16× scaling free of rounding.
        let a = required_sample_size(0.5, 0.5, 1.0, 0.25).unwrap();
        let b = required_sample_size(0.5, 0.5, 1.0, 1.0).unwrap();
        let raw = |d: f64| 2.0 * d * d * 4f64.ln() / 0.25;
        assert_eq!(raw(1.0), 16.0 * raw(0.25));
        assert_eq!(a, raw(0.25).ceil() as u64);
        assert_eq!(b, raw(1.0).ceil() as u64);
    }

    #[test]
    fn sample_size_inverts_bound() {
        for &(rho, eps, c, d) in &[(0.05, 0.01, 1.0, 0.625), (0.2, 0.05, 3.0, 5.0), (0.01, 0.02, 0.5, 10.0)] {
            let n = required_sample_size(rho, eps, c, d).unwrap();
            let at_n = 2.0 * (-(eps * eps) * n as f64 / (2.0 * c * c * d * d)).exp();
            assert!(at_n <= rho, "{at_n} > {rho}");
            let before = 2.0 * (-(eps * eps) * (n - 1) as f64 / (2.0 * c * c * d * d)).exp();
            assert!(before > rho);
        }
    }

    #[test]
    fn estimate_c_from_trace() {
        let h = Hyper {
            lr: 0.1,
            epochs: 4,
            ..Hyper::default()
        };
        let k = estimate_c(&trace(&[1.5, 2.5, 2.0]), &h, None).unwrap();
        assert_eq!(k.grad_bound, 2.5);
        assert_eq!(k.lipschitz, 2.5);
        assert_eq!(k.c, 2.5 * 0.1 * 4.0 * 2.5);
        let doubled = estimate_c(&trace(&[1.5, 2.5, 2.0]), &Hyper { lr: 0.2, ..h.clone() }, None).unwrap();
        assert_eq!(doubled.c, 2.0 * k.c);
        let hinted = estimate_c(&trace(&[2.5]), &h, Some(1.0)).unwrap();
        assert_eq!(hinted.c, 1.0 * 0.1 * 4.0 * 2.5);
        let zero = estimate_c(&trace(&[0.0, 0.0]), &h, None).unwrap();
        assert!(zero.degenerate && zero.c == 0.0);
        assert!(matches!(estimate_c(&trace(&[]), &h, None), Err(Error::EmptyTrace)));
    }
}
