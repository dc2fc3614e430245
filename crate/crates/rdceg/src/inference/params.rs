//! Conjugate parameter blocks.
//!
//! Transition probabilities get Dirichlet priors updated by edge counts:
//! `α*_m = α_m + n_m`. Weibull scales (with the shape κ fixed per cluster)
//! get Inverse-Gamma priors updated by `ζ* = ζ + n` and
//! `β* = β + Σ_l h_l^κ`.

use serde::{Deserialize, Serialize};

use crate::error::{RdcegError, Result};

/// Dirichlet prior and accumulated edge counts for one stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirichletParams {
    /// Prior concentrations, in phantom-count units, one per out-edge.
    pub alpha: Vec<f64>,
    /// Observed traversal counts, aligned with `alpha`.
    pub counts: Vec<u64>,
}

impl DirichletParams {
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        if alpha.is_empty() || alpha.iter().any(|&a| !a.is_finite() || a <= 0.0) {
            return Err(RdcegError::InvalidParameter(
                "Dirichlet concentrations must be positive".into(),
            ));
        }
        let counts = vec![0; alpha.len()];
        Ok(DirichletParams { alpha, counts })
    }

    /// Posterior concentrations `α* = α + n`.
    pub fn alpha_star(&self) -> Vec<f64> {
        self.alpha
            .iter()
            .zip(&self.counts)
            .map(|(a, &n)| a + n as f64)
            .collect()
    }

    /// Posterior mean transition probabilities.
    pub fn posterior_mean(&self) -> Vec<f64> {
        let star = self.alpha_star();
        let total: f64 = star.iter().sum();
        star.iter().map(|a| a / total).collect()
    }

    /// Per-component posterior standard deviation (Dirichlet marginal Beta).
    pub fn posterior_sd(&self) -> Vec<f64> {
        let star = self.alpha_star();
        let total: f64 = star.iter().sum();
        star.iter()
            .map(|&a| {
                let b = total - a;
                (a * b / (total * total * (total + 1.0))).sqrt()
            })
            .collect()
    }

    pub fn total_count(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Componentwise conjugate update `α* = α + n`.
pub fn update_dirichlet(prior: &DirichletParams, counts: &[u64]) -> Result<DirichletParams> {
    if counts.len() != prior.alpha.len() {
        return Err(RdcegError::InvalidParameter(format!(
            "count vector length {} does not match prior length {}",
            counts.len(),
            prior.alpha.len()
        )));
    }
    let mut out = prior.clone();
    for (acc, &n) in out.counts.iter_mut().zip(counts) {
        *acc += n;
    }
    Ok(out)
}

/// Inverse-Gamma prior and accumulated holding-time statistics for one
/// cluster of timed edges with fixed Weibull shape κ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IgParams {
    pub zeta: f64,
    /// Prior scale, in time^κ units.
    pub beta: f64,
    pub kappa: f64,
    /// Number of complete holding times observed.
    pub n: u64,
    /// Σ_l h_l^κ over complete holding times.
    pub sum_h_kappa: f64,
    /// Survivor mass from censored sojourns (only populated in the
    /// survival-likelihood censoring mode); adds to β* without touching ζ*.
    pub censored_mass: f64,
}

impl IgParams {
    pub fn new(zeta: f64, beta: f64, kappa: f64) -> Result<Self> {
        if !(zeta.is_finite() && zeta > 0.0 && beta.is_finite() && beta > 0.0 && kappa > 0.0) {
            return Err(RdcegError::InvalidParameter(
                "Inverse-Gamma and Weibull parameters must be positive".into(),
            ));
        }
        Ok(IgParams {
            zeta,
            beta,
            kappa,
            n: 0,
            sum_h_kappa: 0.0,
            censored_mass: 0.0,
        })
    }

    pub fn zeta_star(&self) -> f64 {
        self.zeta + self.n as f64
    }

    pub fn beta_star(&self) -> f64 {
        self.beta + self.sum_h_kappa + self.censored_mass
    }

    /// Posterior mean of the Weibull scale θ, `β*/(ζ*−1)`; `None` when the
    /// posterior mean does not exist (ζ* ≤ 1).
    pub fn posterior_mean_theta(&self) -> Option<f64> {
        let z = self.zeta_star();
        (z > 1.0).then(|| self.beta_star() / (z - 1.0))
    }
}

/// Conjugate update for complete holding times: `ζ* = ζ + |holds|`,
/// `β* = β + Σ h^κ`.
pub fn update_ig(prior: &IgParams, holds: &[f64]) -> Result<IgParams> {
    if holds.iter().any(|&h| !h.is_finite() || h < 0.0) {
        return Err(RdcegError::InvalidParameter(
            "holding times must be nonnegative".into(),
        ));
    }
    let mut out = prior.clone();
    out.n += holds.len() as u64;
    out.sum_h_kappa += holds.iter().map(|&h| h.powf(prior.kappa)).sum::<f64>();
    Ok(out)
}

/// Adds the Weibull survivor mass of a censored sojourn (time `h` spent in a
/// state without transitioning). Raises β* by h^κ, leaves ζ* unchanged.
pub fn censor_ig(prior: &IgParams, h: f64) -> Result<IgParams> {
    if !h.is_finite() || h < 0.0 {
        return Err(RdcegError::InvalidParameter(
            "censored time must be nonnegative".into(),
        ));
    }
    let mut out = prior.clone();
    out.censored_mass += h.powf(prior.kappa);
    Ok(out)
}

/// Joint density of transitioning along an edge after holding for time `h`:
/// `π · f(h)`. Edges without holding times use the constant density 1, so the
/// factor reduces to the transition probability.
pub fn joint_density<F: Fn(f64) -> f64>(
    transition_prob: f64,
    holding_density: F,
    h: f64,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&transition_prob) {
        return Err(RdcegError::InvalidParameter(format!(
            "transition probability {transition_prob} outside [0, 1]"
        )));
    }
    if !h.is_finite() || h < 0.0 {
        return Err(RdcegError::InvalidParameter(format!(
            "holding time {h} must be nonnegative"
        )));
    }
    Ok(transition_prob * holding_density(h))
}
