//! Stages, clusters and the hued tree.
//!
//! A stage is an equivalence class of situations hypothesized to share one
//! conditional transition distribution; the bijection aligning their out-edges
//! is literal label equality (a stage is only valid when its members carry
//! identical out-edge label sets). A cluster is an equivalence class of timed
//! edges sharing one holding-time distribution with a common fixed Weibull
//! shape. Coloring a modified tree by both partitions yields the hued tree.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{RdcegError, Result};
use crate::graph::tree::{EdgeId, ModifiedTree, VertexId};

/// Partition of the situations of a modified tree into stages.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Staging {
    cells: Vec<BTreeSet<VertexId>>,
}

impl Staging {
    /// Builds and validates a staging. Cells must be disjoint, cover the
    /// situations exactly, and members of one cell must have identical
    /// out-edge label sets.
    pub fn new(m: &ModifiedTree, mut cells: Vec<BTreeSet<VertexId>>) -> Result<Staging> {
        cells.retain(|c| !c.is_empty());
        cells.sort_by_key(|c| *c.iter().next().unwrap());
        let situations: BTreeSet<VertexId> = m.situations().into_iter().collect();
        let mut seen = BTreeSet::new();
        for cell in &cells {
            for &v in cell {
                if !situations.contains(&v) {
                    return Err(RdcegError::Staging(format!(
                        "{:?} is not a situation of the modified tree",
                        v
                    )));
                }
                if !seen.insert(v) {
                    return Err(RdcegError::Staging(format!("{v:?} appears in two stages")));
                }
            }
            let first = *cell.iter().next().unwrap();
            let labels = m.sorted_labels(first);
            for &v in cell.iter().skip(1) {
                if m.sorted_labels(v) != labels {
                    return Err(RdcegError::Staging(format!(
                        "situations {} and {} are staged together but their edge labels differ",
                        m.vertex(first).name,
                        m.vertex(v).name
                    )));
                }
            }
        }
        if seen != situations {
            return Err(RdcegError::Staging(
                "staging does not cover every situation".into(),
            ));
        }
        Ok(Staging { cells })
    }

    /// The finest staging: every situation alone.
    pub fn singletons(m: &ModifiedTree) -> Staging {
        let cells = m
            .situations()
            .into_iter()
            .map(|v| BTreeSet::from([v]))
            .collect();
        Staging { cells }
    }

    pub fn cells(&self) -> &[BTreeSet<VertexId>] {
        &self.cells
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn cell_of(&self, v: VertexId) -> Option<usize> {
        self.cells.iter().position(|c| c.contains(&v))
    }

    /// True when `self` is a refinement of `other` (every cell of `self`
    /// lies inside one cell of `other`).
    pub fn refines(&self, other: &Staging) -> bool {
        self.cells.iter().all(|cell| {
            let first = *cell.iter().next().unwrap();
            match other.cells.iter().find(|c| c.contains(&first)) {
                None => false,
                Some(big) => cell.is_subset(big),
            }
        })
    }
}

/// Partition of the timed edges E* into clusters, each with a fixed Weibull
/// shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    cells: Vec<BTreeSet<EdgeId>>,
    kappa: Vec<f64>,
}

impl Clustering {
    pub fn new(m: &ModifiedTree, mut cells: Vec<(BTreeSet<EdgeId>, f64)>) -> Result<Clustering> {
        cells.retain(|(c, _)| !c.is_empty());
        cells.sort_by_key(|(c, _)| *c.iter().next().unwrap());
        let timed: BTreeSet<EdgeId> = m.timed_edges().into_iter().collect();
        let mut seen = BTreeSet::new();
        for (cell, kappa) in &cells {
            if !kappa.is_finite() || *kappa <= 0.0 {
                return Err(RdcegError::InvalidParameter(format!(
                    "cluster shape must be positive, got {kappa}"
                )));
            }
            for &e in cell {
                if !timed.contains(&e) {
                    return Err(RdcegError::Staging(format!(
                        "{e:?} is not a timed edge of the modified tree"
                    )));
                }
                if !seen.insert(e) {
                    return Err(RdcegError::Staging(format!(
                        "{e:?} appears in two clusters"
                    )));
                }
            }
        }
        if seen != timed {
            return Err(RdcegError::Staging(
                "clustering does not cover every timed edge".into(),
            ));
        }
        let kappa = cells.iter().map(|(_, k)| *k).collect();
        let cells = cells.into_iter().map(|(c, _)| c).collect();
        Ok(Clustering { cells, kappa })
    }

    /// Every timed edge alone, shapes taken from the supplied map.
    pub fn singletons(m: &ModifiedTree, kappa_of: &BTreeMap<EdgeId, f64>) -> Result<Clustering> {
        let mut cells = Vec::new();
        for e in m.timed_edges() {
            let k = kappa_of.get(&e).copied().ok_or_else(|| {
                RdcegError::MissingPrior(format!("no Weibull shape configured for {e:?}"))
            })?;
            cells.push((BTreeSet::from([e]), k));
        }
        Clustering::new(m, cells)
    }

    pub fn cells(&self) -> &[BTreeSet<EdgeId>] {
        &self.cells
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn kappa(&self, cell: usize) -> f64 {
        self.kappa[cell]
    }

    pub fn cell_of(&self, e: EdgeId) -> Option<usize> {
        self.cells.iter().position(|c| c.contains(&e))
    }

    pub fn kappa_of_edge(&self, e: EdgeId) -> Option<f64> {
        self.cell_of(e).map(|c| self.kappa[c])
    }
}

/// A modified tree together with its stage and cluster colorings. Singleton
/// stages and clusters are treated as uncolored when exported.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HuedTree {
    modified: ModifiedTree,
    staging: Staging,
    clustering: Clustering,
}

impl HuedTree {
    pub fn new(
        modified: ModifiedTree,
        staging: Staging,
        clustering: Clustering,
    ) -> Result<HuedTree> {
        // Re-validate against this particular tree.
        let staging = Staging::new(&modified, staging.cells.clone())?;
        let clustering = Clustering::new(
            &modified,
            clustering
                .cells
                .iter()
                .cloned()
                .zip(clustering.kappa.iter().copied())
                .collect(),
        )?;
        Ok(HuedTree {
            modified,
            staging,
            clustering,
        })
    }

    pub fn modified(&self) -> &ModifiedTree {
        &self.modified
    }

    pub fn staging(&self) -> &Staging {
        &self.staging
    }

    pub fn clustering(&self) -> &Clustering {
        &self.clustering
    }

    pub fn stage_of(&self, v: VertexId) -> Option<usize> {
        self.staging.cell_of(v)
    }

    pub fn cluster_of(&self, e: EdgeId) -> Option<usize> {
        self.clustering.cell_of(e)
    }
}
