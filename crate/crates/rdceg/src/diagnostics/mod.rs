//! Model accuracy metrics and leave-one-out monitors.
//!
//! The situational error totals, over the situations of the shared modified
//! tree, the Euclidean distance between the fitted stage's posterior-mean
//! transition vector and the generating one. The cluster error totals, over
//! the timed edges, the Hellinger distance between the fitted and generating
//! Weibull holding densities at the shared shape; for equal shapes the
//! Hellinger distance has the closed form
//!
//!   d_H(Wei(θ₁,κ), Wei(θ₂,κ)) = sqrt(1 − 2·sqrt(θ₁θ₂)/(θ₁+θ₂)),
//!
//! verified against quadrature of the defining integral in the acceptance
//! suite. The leave-one-out monitor recomputes each cell's score with one
//! element removed and compares the element's observed mean with the cell's
//! posterior band (two standard deviations for stages, one for clusters).

use serde::{Deserialize, Serialize};

use crate::error::{RdcegError, Result};
use crate::inference::{ClusterCell, StageCell};
use crate::search::{tree_fingerprint, FittedModel};
use crate::sim::GroundTruthModel;
use crate::smp::{compound_moments, Moment};

/// Which fitted quantity stands in for the Weibull scale λ*(e): the
/// posterior mean of θ (default), or the scale matching the compound law's
/// mean holding time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LambdaStarMode {
    #[default]
    PosteriorMeanTheta,
    CompoundMeanMatched,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SituationErrorRow {
    pub situation: String,
    pub fitted_mean: Vec<f64>,
    pub true_mean: Vec<f64>,
    pub error: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClusterErrorRow {
    pub source: String,
    pub label: String,
    pub lambda_fitted: f64,
    pub lambda_true: f64,
    pub kappa: f64,
    pub hellinger: f64,
}

/// Accuracy of a fitted model against the generating model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorReport {
    pub truth_model: String,
    pub lambda_mode: LambdaStarMode,
    pub situations: Vec<SituationErrorRow>,
    pub total_situational_error: f64,
    pub edges: Vec<ClusterErrorRow>,
    pub total_cluster_error: f64,
}

/// Hellinger distance between two Weibull densities sharing the shape κ, in
/// the t^κ/θ parametrization. The distance depends on the scales only.
pub fn hellinger_weibull(theta1: f64, theta2: f64, _kappa: f64) -> f64 {
    (1.0 - 2.0 * (theta1 * theta2).sqrt() / (theta1 + theta2))
        .max(0.0)
        .sqrt()
}

/// Total situational error Σ_s ‖μ*(s) − μ†(s)‖₂.
pub fn situational_error(
    truth: &GroundTruthModel,
    fit: &FittedModel,
) -> Result<(Vec<SituationErrorRow>, f64)> {
    if tree_fingerprint(truth.modified()) != tree_fingerprint(&fit.modified) {
        return Err(RdcegError::Incomparable(
            "truth and fit are defined over different modified trees".into(),
        ));
    }
    let m = &fit.modified;
    let mut rows = Vec::new();
    let mut total = 0.0;
    for v in m.situations() {
        let cell = fit
            .result
            .staging
            .cell_of(v)
            .ok_or_else(|| RdcegError::Staging(format!("{v:?} missing from fitted staging")))?;
        let fitted = fit.stage_posteriors[cell].posterior_mean();
        let truth_mean = truth.situation_probs(v).to_vec();
        if fitted.len() != truth_mean.len() {
            return Err(RdcegError::Incomparable(format!(
                "situation {} has mismatched arity between truth and fit",
                m.vertex(v).name
            )));
        }
        let error: f64 = fitted
            .iter()
            .zip(&truth_mean)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        total += error;
        rows.push(SituationErrorRow {
            situation: m.vertex(v).name.clone(),
            fitted_mean: fitted,
            true_mean: truth_mean,
            error,
        });
    }
    Ok((rows, total))
}

/// Total cluster error Σ_e d_H(Wei(λ*(e),κ), Wei(λ†(e),κ)).
pub fn cluster_error(
    truth: &GroundTruthModel,
    fit: &FittedModel,
    mode: LambdaStarMode,
) -> Result<(Vec<ClusterErrorRow>, f64)> {
    if tree_fingerprint(truth.modified()) != tree_fingerprint(&fit.modified) {
        return Err(RdcegError::Incomparable(
            "truth and fit are defined over different modified trees".into(),
        ));
    }
    let m = &fit.modified;
    let mut rows = Vec::new();
    let mut total = 0.0;
    for e in m.timed_edges() {
        let tc = truth.clustering.cell_of(e).ok_or_else(|| {
            RdcegError::Staging(format!("{e:?} missing from generating clustering"))
        })?;
        let fc =
            fit.result.clustering.cell_of(e).ok_or_else(|| {
                RdcegError::Staging(format!("{e:?} missing from fitted clustering"))
            })?;
        let kappa_true = truth.clustering.kappa(tc);
        let kappa_fit = fit.result.clustering.kappa(fc);
        if (kappa_true - kappa_fit).abs() > 1e-12 {
            return Err(RdcegError::Incomparable(format!(
                "edge '{}' out of {} has shape {} in truth but {} in fit",
                m.edge(e).label,
                m.vertex(m.edge(e).source).name,
                kappa_true,
                kappa_fit
            )));
        }
        let post = &fit.cluster_posteriors[fc];
        // When the posterior scale diverges (zeta* <= 1, e.g. an unvisited
        // cluster under a tiny phantom prior), the Hellinger distance
        // attains its continuous limit of 1.
        let lambda_fitted = match mode {
            LambdaStarMode::PosteriorMeanTheta => {
                post.posterior_mean_theta().unwrap_or(f64::INFINITY)
            }
            LambdaStarMode::CompoundMeanMatched => {
                let (mean, _) = compound_moments(post.zeta_star(), post.beta_star(), post.kappa);
                match mean {
                    Moment::Finite(mh) => {
                        // Scale of the fixed Weibull with that mean.
                        (mh / crate::numeric::gamma(1.0 + 1.0 / kappa_fit)).powf(kappa_fit)
                    }
                    Moment::Infinite => f64::INFINITY,
                }
            }
        };
        let lambda_true = truth.cluster_theta[tc];
        let h = if lambda_fitted.is_finite() {
            hellinger_weibull(lambda_fitted, lambda_true, kappa_true)
        } else {
            1.0
        };
        total += h;
        rows.push(ClusterErrorRow {
            source: m.vertex(m.edge(e).source).name.clone(),
            label: m.edge(e).label.clone(),
            lambda_fitted,
            lambda_true,
            kappa: kappa_true,
            hellinger: h,
        });
    }
    Ok((rows, total))
}

/// Builds the full error report.
pub fn error_report(
    truth: &GroundTruthModel,
    fit: &FittedModel,
    mode: LambdaStarMode,
) -> Result<ErrorReport> {
    let (situations, total_situational_error) = situational_error(truth, fit)?;
    let (edges, total_cluster_error) = cluster_error(truth, fit, mode)?;
    Ok(ErrorReport {
        truth_model: truth.name.clone(),
        lambda_mode: mode,
        situations,
        total_situational_error,
        edges,
        total_cluster_error,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LooKind {
    Stage,
    Cluster,
}

/// One leave-one-out record: an element pulled from its cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LooRecord {
    pub kind: LooKind,
    pub cell_index: usize,
    pub element: String,
    /// Log marginal score of the element on its own.
    pub standalone_score: f64,
    /// Log marginal score of the cell with the element removed.
    pub cell_without_score: f64,
    /// Log marginal score of the intact cell.
    pub intact_score: f64,
    /// Posterior expectation of the cell without the element (per edge for
    /// stages, mean holding time for clusters).
    pub expectation: Vec<f64>,
    /// Band half-width: two posterior standard deviations for stages, one
    /// for clusters.
    pub band: Vec<f64>,
    /// Observed mean of the element (empirical transition proportions or
    /// mean holding time).
    pub observed_mean: Vec<f64>,
    /// Observed mean falls outside the band.
    pub flagged: bool,
    /// The element carries no observations; reported, never flagged.
    pub low_information: bool,
    /// The cluster's posterior variance is infinite; no band available.
    pub infinite_moment: bool,
}

/// Leave-one-out monitors over every non-singleton stage and cluster of a
/// fitted model. Singleton cells are skipped (nothing to leave out).
pub fn leave_one_out(fit: &FittedModel) -> Result<Vec<LooRecord>> {
    let m = &fit.modified;
    let mut records = Vec::new();

    for (ci, cell) in fit.result.staging.cells().iter().enumerate() {
        if cell.len() < 2 {
            continue;
        }
        let pooled: StageCell = {
            let key: Vec<u32> = cell.iter().map(|v| v.0).collect();
            fit.scored.stages[&key].clone()
        };
        let intact_score = pooled.log_term()?;
        for &v in cell {
            let atom = &fit.stage_atoms[&v];
            let without = StageCell {
                alpha: pooled
                    .alpha
                    .iter()
                    .zip(&atom.alpha)
                    .map(|(a, b)| a - b)
                    .collect(),
                counts: pooled
                    .counts
                    .iter()
                    .zip(&atom.counts)
                    .map(|(a, b)| a - b)
                    .collect(),
            };
            let standalone_score = atom.log_term()?;
            let cell_without_score = without.log_term()?;
            let without_params = crate::inference::DirichletParams {
                alpha: without.alpha.clone(),
                counts: without.counts.clone(),
            };
            let expectation = without_params.posterior_mean();
            let band: Vec<f64> = without_params
                .posterior_sd()
                .iter()
                .map(|s| 2.0 * s)
                .collect();
            let n: u64 = atom.counts.iter().sum();
            let low_information = n == 0;
            let observed_mean: Vec<f64> = if low_information {
                vec![0.0; atom.counts.len()]
            } else {
                atom.counts.iter().map(|&c| c as f64 / n as f64).collect()
            };
            let flagged = !low_information
                && expectation
                    .iter()
                    .zip(&band)
                    .zip(&observed_mean)
                    .any(|((e, b), o)| (o - e).abs() > *b);
            records.push(LooRecord {
                kind: LooKind::Stage,
                cell_index: ci,
                element: m.vertex(v).name.clone(),
                standalone_score,
                cell_without_score,
                intact_score,
                expectation,
                band,
                observed_mean,
                flagged,
                low_information,
                infinite_moment: false,
            });
        }
    }

    for (ci, cell) in fit.result.clustering.cells().iter().enumerate() {
        if cell.len() < 2 {
            continue;
        }
        let pooled: ClusterCell = {
            let key: Vec<u32> = cell.iter().map(|e| e.0).collect();
            fit.scored.clusters[&key].clone()
        };
        let intact_score = pooled.log_term()?;
        for &e in cell {
            let atom = &fit.cluster_atoms[&e];
            let without = ClusterCell {
                zeta: pooled.zeta - atom.zeta,
                beta: pooled.beta - atom.beta,
                kappa: pooled.kappa,
                n: pooled.n - atom.n,
                sum_h_kappa: pooled.sum_h_kappa - atom.sum_h_kappa,
                censored_mass: pooled.censored_mass - atom.censored_mass,
            };
            let standalone_score = atom.log_term()?;
            let cell_without_score = without.log_term()?;
            let zeta_star = without.zeta + without.n as f64;
            let beta_star = without.beta + without.sum_h_kappa + without.censored_mass;
            let (mean, var) = compound_moments(zeta_star, beta_star, without.kappa);
            let (expectation, band, infinite_moment) = match (mean, var) {
                (Moment::Finite(mh), Moment::Finite(v)) => (vec![mh], vec![v.sqrt()], false),
                (Moment::Finite(mh), Moment::Infinite) => (vec![mh], vec![], true),
                _ => (vec![], vec![], true),
            };
            let low_information = atom.n == 0;
            let observed_mean = if low_information {
                vec![0.0]
            } else {
                vec![fit.edge_observed_mean.get(&e).copied().unwrap_or(0.0)]
            };
            let flagged = !low_information
                && !infinite_moment
                && !expectation.is_empty()
                && (observed_mean[0] - expectation[0]).abs() > band[0];
            let edge = m.edge(e);
            records.push(LooRecord {
                kind: LooKind::Cluster,
                cell_index: ci,
                element: format!("{}:{}", m.vertex(edge.source).name, edge.label),
                standalone_score,
                cell_without_score,
                intact_score,
                expectation,
                band,
                observed_mean,
                flagged,
                low_information,
                infinite_moment,
            });
        }
    }

    Ok(records)
}
