//! Phantom-unit prior construction.
//!
//! A total of `alpha_total` imaginary units enters the root and splits
//! equally across each situation's out-edges, recursively: a situation
//! receiving α′ units with k out-edges assigns α′/k to each. The
//! Inverse-Gamma shape on a timed edge equals that edge's phantom count,
//! ζ_e = α_e, and its scale is β_e = τ^κ_e where τ is the phantom waiting
//! time.

use std::collections::BTreeMap;

use crate::error::{RdcegError, Result};
use crate::graph::tree::{EdgeId, ModifiedTree, VertexId};

/// Phantom-derived hyperparameters for every situation and timed edge of a
/// modified tree.
#[derive(Debug, Clone, PartialEq)]
pub struct PhantomPriors {
    /// Per-situation Dirichlet concentrations, aligned with the situation's
    /// surviving out-edges in base order.
    pub alpha: BTreeMap<VertexId, Vec<f64>>,
    /// Per-timed-edge Inverse-Gamma (ζ, β).
    pub ig: BTreeMap<EdgeId, (f64, f64)>,
    /// Phantom units flowing into each alive vertex.
    pub inflow: BTreeMap<VertexId, f64>,
}

/// Spreads `alpha_total` phantom units through the modified tree.
/// `kappa_of` supplies the fixed Weibull shape per timed edge.
pub fn phantom_priors(
    m: &ModifiedTree,
    alpha_total: f64,
    tau: f64,
    kappa_of: &BTreeMap<EdgeId, f64>,
) -> Result<PhantomPriors> {
    if !alpha_total.is_finite() || alpha_total <= 0.0 {
        return Err(RdcegError::InvalidParameter(format!(
            "alpha_total must be positive, got {alpha_total}"
        )));
    }
    if !tau.is_finite() || tau <= 0.0 {
        return Err(RdcegError::InvalidParameter(format!(
            "phantom holding time tau must be positive, got {tau}"
        )));
    }

    let mut alpha = BTreeMap::new();
    let mut ig = BTreeMap::new();
    let mut inflow = BTreeMap::new();
    inflow.insert(m.root(), alpha_total);

    // Situations come out of `situations()` in BFS id order, so every
    // parent's inflow is settled before its children are visited.
    for v in m.situations() {
        let units = *inflow.get(&v).unwrap_or(&0.0);
        let edges = m.out_edges(v);
        let k = edges.len() as f64;
        let per_edge = units / k;
        let mut row = Vec::with_capacity(edges.len());
        for e in edges {
            row.push(per_edge);
            let edge = m.edge(e);
            if edge.timed {
                let kappa = kappa_of.get(&e).copied().ok_or_else(|| {
                    RdcegError::MissingPrior(format!(
                        "no Weibull shape configured for timed edge '{}' out of {}",
                        edge.label,
                        m.vertex(v).name
                    ))
                })?;
                ig.insert(e, (per_edge, tau.powf(kappa)));
            }
            *inflow.entry(edge.target).or_insert(0.0) += per_edge;
        }
        alpha.insert(v, row);
    }

    Ok(PhantomPriors { alpha, ig, inflow })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::tree::{modify_tree, TreeBuilder};
    use std::collections::BTreeSet;

    fn two_level_tree() -> ModifiedTree {
        let mut b = TreeBuilder::new();
        let r = b.root();
        let a = b.child(r, "left", true);
        let c = b.child(r, "right", true);
        b.child(a, "x", true);
        b.child(a, "y", true);
        b.child(c, "x", true);
        b.child(c, "y", true);
        let t = b.finish().unwrap();
        let critical: BTreeSet<_> = t.leaves().collect();
        modify_tree(&t, &critical, None).unwrap()
    }

    #[test]
    fn equal_split_down_the_tree() {
        let m = two_level_tree();
        let kappa: BTreeMap<EdgeId, f64> = m.timed_edges().into_iter().map(|e| (e, 1.0)).collect();
        let p = phantom_priors(&m, 4.0, 1.0, &kappa).unwrap();
        assert_eq!(p.alpha[&m.root()], vec![2.0, 2.0]);
        for v in m.situations() {
            if v != m.root() {
                assert_eq!(p.alpha[&v], vec![1.0, 1.0]);
            }
        }
    }

    #[test]
    fn tau_one_gives_unit_beta_for_any_kappa() {
        let m = two_level_tree();
        let kappa: BTreeMap<EdgeId, f64> = m
            .timed_edges()
            .into_iter()
            .enumerate()
            .map(|(i, e)| (e, 0.5 + i as f64))
            .collect();
        let p = phantom_priors(&m, 4.0, 1.0, &kappa).unwrap();
        for (_, beta) in p.ig.values() {
            assert!((*beta - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn zeta_equals_edge_alpha_and_beta_is_tau_pow_kappa() {
        let m = two_level_tree();
        let kappa: BTreeMap<EdgeId, f64> = m.timed_edges().into_iter().map(|e| (e, 2.0)).collect();
        let p = phantom_priors(&m, 8.0, 3.0, &kappa).unwrap();
        let left = m.base().edge_by_source_label(m.root(), "left").unwrap();
        let (zeta, beta) = p.ig[&left];
        assert_eq!(zeta, 4.0);
        assert!((beta - 9.0).abs() < 1e-12);
    }

    #[test]
    fn mass_is_conserved_across_leaf_inflow() {
        let m = two_level_tree();
        let kappa: BTreeMap<EdgeId, f64> = m.timed_edges().into_iter().map(|e| (e, 1.0)).collect();
        let p = phantom_priors(&m, 5.0, 2.0, &kappa).unwrap();
        let leaf_total: f64 = m
            .base()
            .leaves()
            .filter(|v| m.is_alive(*v))
            .map(|v| p.inflow.get(&v).copied().unwrap_or(0.0))
            .sum();
        assert!((leaf_total - 5.0).abs() < 1e-12);
    }

    #[test]
    fn nonpositive_alpha_rejected() {
        let m = two_level_tree();
        let kappa: BTreeMap<EdgeId, f64> = m.timed_edges().into_iter().map(|e| (e, 1.0)).collect();
        assert!(phantom_priors(&m, 0.0, 1.0, &kappa).is_err());
        assert!(phantom_priors(&m, -1.0, 1.0, &kappa).is_err());
    }
}
