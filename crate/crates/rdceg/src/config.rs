//! Configuration surfaces: prior specification and search constraints.
//!
//! JSON schemas are versioned by a `schema` field. Situations are referenced
//! by vertex name and edges by `[source name, label]` pairs, resolved against
//! the modified tree at validation time.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{RdcegError, Result};
use crate::graph::tree::{EdgeId, ModifiedTree, VertexId};

/// How study-end censored sojourns enter the likelihood.
///
/// The default keeps them out of both ζ* and β*, matching plain
/// transition-count bookkeeping. The survival mode adds the Weibull survivor
/// mass of the partial sojourn to β* of each timed out-edge of the occupied
/// situation (treating competing transitions as independent latent clocks)
/// without incrementing ζ*.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CensoringMode {
    #[default]
    Ignore,
    SurvivalMass,
}

/// Phantom waiting time: fixed, or the empirical median of all observed
/// holding times (falling back to 1.0 when there are none).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum TauSpec {
    EmpiricalMedian {
        #[serde(default = "default_scale")]
        scale: f64,
    },
    Fixed {
        value: f64,
    },
}

fn default_scale() -> f64 {
    1.0
}

impl Default for TauSpec {
    fn default() -> Self {
        TauSpec::EmpiricalMedian { scale: 1.0 }
    }
}

impl TauSpec {
    pub fn resolve(&self, all_holds: &[f64]) -> f64 {
        match *self {
            TauSpec::Fixed { value } => value,
            TauSpec::EmpiricalMedian { scale } => {
                if all_holds.is_empty() {
                    return scale;
                }
                let mut sorted = all_holds.to_vec();
                sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let mid = sorted.len() / 2;
                let median = if sorted.len() % 2 == 1 {
                    sorted[mid]
                } else {
                    0.5 * (sorted[mid - 1] + sorted[mid])
                };
                (median * scale).max(f64::MIN_POSITIVE)
            }
        }
    }
}

/// Prior configuration: total phantom units, phantom waiting time, censoring
/// mode. When `alpha_total` is absent it defaults to the root's out-degree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct PriorConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_total: Option<f64>,
    #[serde(default)]
    pub tau: TauSpec,
    #[serde(default)]
    pub censoring: CensoringMode,
}

impl PriorConfig {
    pub fn resolve_alpha(&self, m: &ModifiedTree) -> f64 {
        self.alpha_total
            .unwrap_or_else(|| m.out_edges(m.root()).len() as f64)
    }
}

/// JSON form of a hyperstage: pools of situation names that may be
/// hypothesized to share a stage. Situations not listed stay singletons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct HyperstageConfig {
    pub sets: Vec<Vec<String>>,
}

/// JSON form of a hypercluster set: edges (by `[source, label]`) allowed to
/// share a cluster, all with the same known Weibull shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperclusterSetConfig {
    pub kappa: f64,
    pub edges: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct HyperclusterConfig {
    pub sets: Vec<HyperclusterSetConfig>,
}

/// Full search configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct SearchConfig {
    #[serde(default = "schema_search")]
    pub schema: String,
    #[serde(default)]
    pub prior: PriorConfig,
    #[serde(default)]
    pub hyperstage: HyperstageConfig,
    #[serde(default)]
    pub hypercluster: HyperclusterConfig,
    /// Bound on position-refinement rounds; 0 means exact fixed point.
    #[serde(default)]
    pub max_depth: usize,
    /// Reserved for future randomized tie-breaking; merges currently break
    /// ties lexicographically.
    #[serde(default)]
    pub tie_break_seed: u64,
}

fn schema_search() -> String {
    "rdceg.search/1".to_string()
}

/// Hyperstage resolved to vertex ids and validated against a modified tree.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperstage {
    pub sets: Vec<BTreeSet<VertexId>>,
}

impl Hyperstage {
    pub fn resolve(cfg: &HyperstageConfig, m: &ModifiedTree) -> Result<Hyperstage> {
        let situations: BTreeSet<VertexId> = m.situations().into_iter().collect();
        let mut seen: BTreeSet<VertexId> = BTreeSet::new();
        let mut sets = Vec::new();
        for group in &cfg.sets {
            let mut set = BTreeSet::new();
            for name in group {
                let v = m.base().vertex_by_name(name).ok_or_else(|| {
                    RdcegError::Config(format!("hyperstage references unknown situation '{name}'"))
                })?;
                if !situations.contains(&v) {
                    return Err(RdcegError::Config(format!(
                        "hyperstage member '{name}' is not a situation of the modified tree"
                    )));
                }
                if !seen.insert(v) {
                    return Err(RdcegError::Config(format!(
                        "situation '{name}' appears in two hyperstage sets"
                    )));
                }
                set.insert(v);
            }
            if set.is_empty() {
                continue;
            }
            let first = *set.iter().next().unwrap();
            let labels = m.sorted_labels(first);
            for &v in &set {
                if m.sorted_labels(v) != labels {
                    return Err(RdcegError::Config(format!(
                        "hyperstage pools situations with incompatible out-edge labels ({} vs {})",
                        m.vertex(first).name,
                        m.vertex(v).name
                    )));
                }
            }
            sets.push(set);
        }
        Ok(Hyperstage { sets })
    }

    pub fn set_of(&self, v: VertexId) -> Option<usize> {
        self.sets.iter().position(|s| s.contains(&v))
    }
}

/// Hypercluster resolved to edge ids; carries the per-edge shape map.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypercluster {
    pub sets: Vec<BTreeSet<EdgeId>>,
    pub kappa: Vec<f64>,
}

impl Hypercluster {
    pub fn resolve(cfg: &HyperclusterConfig, m: &ModifiedTree) -> Result<Hypercluster> {
        let timed: BTreeSet<EdgeId> = m.timed_edges().into_iter().collect();
        let mut seen: BTreeSet<EdgeId> = BTreeSet::new();
        let mut sets = Vec::new();
        let mut kappas = Vec::new();
        for group in &cfg.sets {
            if !group.kappa.is_finite() || group.kappa <= 0.0 {
                return Err(RdcegError::Config(format!(
                    "hypercluster shape must be positive, got {}",
                    group.kappa
                )));
            }
            let mut set = BTreeSet::new();
            for (source, label) in &group.edges {
                let v = m.base().vertex_by_name(source).ok_or_else(|| {
                    RdcegError::Config(format!(
                        "hypercluster references unknown situation '{source}'"
                    ))
                })?;
                let e = m
                    .out_edges(v)
                    .into_iter()
                    .find(|&e| m.edge(e).label == *label)
                    .ok_or_else(|| {
                        RdcegError::Config(format!(
                            "hypercluster references unknown edge '{source}' -> '{label}'"
                        ))
                    })?;
                if !timed.contains(&e) {
                    return Err(RdcegError::Config(format!(
                        "hypercluster edge '{source}' -> '{label}' carries no holding time"
                    )));
                }
                if !seen.insert(e) {
                    return Err(RdcegError::Config(format!(
                        "edge '{source}' -> '{label}' appears in two hypercluster sets"
                    )));
                }
                set.insert(e);
            }
            if set.is_empty() {
                continue;
            }
            sets.push(set);
            kappas.push(group.kappa);
        }
        // Timed edges outside every set still need a shape; they stay
        // singleton clusters with shape 1 unless configured.
        Ok(Hypercluster {
            sets,
            kappa: kappas,
        })
    }

    pub fn set_of(&self, e: EdgeId) -> Option<usize> {
        self.sets.iter().position(|s| s.contains(&e))
    }

    /// Shape per timed edge: the set's shape, default 1 (exponential) for
    /// edges outside every set.
    pub fn kappa_of(&self, m: &ModifiedTree) -> BTreeMap<EdgeId, f64> {
        let mut out = BTreeMap::new();
        for e in m.timed_edges() {
            let k = self.set_of(e).map(|i| self.kappa[i]).unwrap_or(1.0);
            out.insert(e, k);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::tree::{modify_tree, TreeBuilder};

    #[test]
    fn tau_median_resolution() {
        let spec = TauSpec::EmpiricalMedian { scale: 1.0 };
        assert_eq!(spec.resolve(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(spec.resolve(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        let scaled = TauSpec::EmpiricalMedian { scale: 2.0 };
        assert_eq!(scaled.resolve(&[3.0, 1.0, 2.0]), 4.0);
        let fixed = TauSpec::Fixed { value: 7.0 };
        assert_eq!(fixed.resolve(&[1.0]), 7.0);
    }

    #[test]
    fn hyperstage_rejects_unknown_and_mismatched() {
        let mut b = TreeBuilder::new();
        let r = b.root();
        let a = b.child(r, "x", false);
        b.child(a, "y", false);
        b.child(a, "z", false);
        let t = b.finish().unwrap();
        let critical = t.leaves().collect();
        let m = modify_tree(&t, &critical, None).unwrap();
        let bad = HyperstageConfig {
            sets: vec![vec!["nope".into()]],
        };
        assert!(Hyperstage::resolve(&bad, &m).is_err());
        // s0 has labels {x}; s1 has labels {y, z}; pooling them is invalid.
        let mismatched = HyperstageConfig {
            sets: vec![vec!["s0".into(), "s1".into()]],
        };
        assert!(Hyperstage::resolve(&mismatched, &m).is_err());
    }

    #[test]
    fn search_config_round_trips_json() {
        let cfg = SearchConfig {
            schema: "rdceg.search/1".into(),
            prior: PriorConfig {
                alpha_total: Some(2.0),
                tau: TauSpec::Fixed { value: 10.0 },
                censoring: CensoringMode::Ignore,
            },
            hyperstage: HyperstageConfig {
                sets: vec![vec!["s1".into(), "s2".into()]],
            },
            hypercluster: HyperclusterConfig {
                sets: vec![HyperclusterSetConfig {
                    kappa: 1.5,
                    edges: vec![("s1".into(), "fall".into())],
                }],
            },
            max_depth: 0,
            tie_break_seed: 0,
        };
        let json = serde_json::to_string(&cfg).unwrap();
        let back: SearchConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(cfg, back);
    }
}
