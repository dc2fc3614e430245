//! Path observations and sufficient statistics.
//!
//! One observation records an individual's walk: the labels of the edges
//! traversed, the holding time wherever the edge carries one, and how the
//! trajectory ended. Replaying the walk on a modified tree (jumping through
//! continuation markers) aggregates exactly the statistics the likelihood
//! factorizes over: per-edge traversal counts N and per-edge holding-time
//! lists H.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{RdcegError, Result};
use crate::graph::tree::{EdgeId, ModifiedTree, VertexId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Terminal {
    /// Reached a critical terminating event (collected into the sink).
    CriticalTerminated,
    /// Left the extant population for a non-critical reason.
    DroppedOut,
    /// Still in a state when observation ended.
    CensoredAtStudyEnd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathStep {
    pub label: String,
    /// Present iff the traversed edge carries a holding time.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hold: Option<f64>,
}

/// One individual's trajectory through the process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathObservation {
    pub id: u64,
    /// Entry marker: name of the state where the individual entered.
    pub entry: String,
    pub steps: Vec<PathStep>,
    pub terminal: Terminal,
    /// Partial sojourn in the final state for censored individuals, when
    /// recorded.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub censored_hold: Option<f64>,
}

/// Aggregated sufficient statistics over a modified tree: traversal counts
/// and holding-time lists per tree edge, plus censored sojourns per
/// situation.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SufficientStats {
    pub counts: BTreeMap<EdgeId, u64>,
    pub holds: BTreeMap<EdgeId, Vec<f64>>,
    pub censored: BTreeMap<VertexId, Vec<f64>>,
    pub n_individuals: u64,
}

impl SufficientStats {
    pub fn count(&self, e: EdgeId) -> u64 {
        self.counts.get(&e).copied().unwrap_or(0)
    }

    pub fn holds_on(&self, e: EdgeId) -> &[f64] {
        self.holds.get(&e).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Pointwise merge; statistics are additive over dataset concatenation.
    pub fn merge(&mut self, other: &SufficientStats) {
        for (e, n) in &other.counts {
            *self.counts.entry(*e).or_insert(0) += n;
        }
        for (e, hs) in &other.holds {
            self.holds.entry(*e).or_default().extend_from_slice(hs);
        }
        for (v, hs) in &other.censored {
            self.censored.entry(*v).or_default().extend_from_slice(hs);
        }
        self.n_individuals += other.n_individuals;
    }
}

/// Replays one observation on the modified tree, starting at the root and
/// jumping through continuation markers, and accumulates its statistics.
pub fn accumulate_observation(
    m: &ModifiedTree,
    obs: &PathObservation,
    record_index: usize,
    stats: &mut SufficientStats,
) -> Result<()> {
    let mut at = m.root();
    // An empty entry marker (flat CSV ingestion) defaults to the root.
    if !obs.entry.is_empty() && obs.entry != m.vertex(at).name {
        return Err(RdcegError::Data {
            record: record_index,
            message: format!(
                "entry state '{}' is not the root '{}'",
                obs.entry,
                m.vertex(at).name
            ),
        });
    }
    for (step_idx, step) in obs.steps.iter().enumerate() {
        // Resolve the labeled edge out of the current situation.
        let edge = m
            .out_edges(at)
            .into_iter()
            .find(|&e| m.edge(e).label == step.label)
            .ok_or_else(|| RdcegError::Data {
                record: record_index,
                message: format!(
                    "step {}: no edge labeled '{}' out of {} (pruned or unknown)",
                    step_idx,
                    step.label,
                    m.vertex(at).name
                ),
            })?;
        let e = m.edge(edge);
        match (e.timed, step.hold) {
            (true, Some(h)) => {
                if !h.is_finite() || h < 0.0 {
                    return Err(RdcegError::Data {
                        record: record_index,
                        message: format!("step {step_idx}: negative or non-finite holding time"),
                    });
                }
                stats.holds.entry(edge).or_default().push(h);
            }
            (true, None) => {
                return Err(RdcegError::Data {
                    record: record_index,
                    message: format!(
                        "step {step_idx}: edge '{}' carries a holding time but none was recorded",
                        step.label
                    ),
                })
            }
            (false, Some(_)) => {
                return Err(RdcegError::Data {
                    record: record_index,
                    message: format!(
                        "step {step_idx}: edge '{}' carries no holding time but one was recorded",
                        step.label
                    ),
                })
            }
            (false, None) => {}
        }
        *stats.counts.entry(edge).or_insert(0) += 1;

        // Advance, jumping through continuations.
        let mut next = e.target;
        if let Some(t) = m.vertex(next).continuation {
            next = t;
        }
        at = next;
    }
    if obs.terminal == Terminal::CensoredAtStudyEnd {
        if let Some(h) = obs.censored_hold {
            if !h.is_finite() || h < 0.0 {
                return Err(RdcegError::Data {
                    record: record_index,
                    message: "censored sojourn must be nonnegative".into(),
                });
            }
            stats.censored.entry(at).or_default().push(h);
        }
    }
    stats.n_individuals += 1;
    Ok(())
}

/// Aggregates a whole collection of observations.
pub fn sufficient_stats(
    m: &ModifiedTree,
    observations: &[PathObservation],
) -> Result<SufficientStats> {
    let mut stats = SufficientStats::default();
    for (i, obs) in observations.iter().enumerate() {
        accumulate_observation(m, obs, i, &mut stats)?;
    }
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::tree::{modify_tree, TreeBuilder};
    use std::collections::BTreeSet;

    fn loop_tree() -> ModifiedTree {
        // root --go[timed]--> s1; s1 --stop--> leaf(critical); s1 --again[timed]--> cont(root)
        let mut b = TreeBuilder::new();
        let r = b.root();
        let s1 = b.child(r, "go", true);
        b.child(s1, "stop", false);
        b.continuation(s1, "again", true, r);
        let t = b.finish().unwrap();
        let critical: BTreeSet<VertexId> = t.leaves().collect();
        modify_tree(&t, &critical, None).unwrap()
    }

    #[test]
    fn walk_with_continuations_accumulates() {
        let m = loop_tree();
        let obs = PathObservation {
            id: 0,
            entry: "s0".into(),
            steps: vec![
                PathStep {
                    label: "go".into(),
                    hold: Some(1.5),
                },
                PathStep {
                    label: "again".into(),
                    hold: Some(2.0),
                },
                PathStep {
                    label: "go".into(),
                    hold: Some(0.5),
                },
                PathStep {
                    label: "stop".into(),
                    hold: None,
                },
            ],
            terminal: Terminal::CriticalTerminated,
            censored_hold: None,
        };
        let stats = sufficient_stats(&m, &[obs]).unwrap();
        let go = m.base().edge_by_source_label(m.root(), "go").unwrap();
        assert_eq!(stats.count(go), 2);
        assert_eq!(stats.holds_on(go), &[1.5, 0.5]);
    }

    #[test]
    fn unknown_label_reports_record() {
        let m = loop_tree();
        let obs = PathObservation {
            id: 0,
            entry: "s0".into(),
            steps: vec![PathStep {
                label: "missing".into(),
                hold: None,
            }],
            terminal: Terminal::DroppedOut,
            censored_hold: None,
        };
        let err = sufficient_stats(&m, &[obs]).unwrap_err();
        match err {
            RdcegError::Data { record, .. } => assert_eq!(record, 0),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn stats_are_additive_over_concatenation() {
        let m = loop_tree();
        let mk = |id: u64| PathObservation {
            id,
            entry: "s0".into(),
            steps: vec![
                PathStep {
                    label: "go".into(),
                    hold: Some(1.0),
                },
                PathStep {
                    label: "stop".into(),
                    hold: None,
                },
            ],
            terminal: Terminal::CriticalTerminated,
            censored_hold: None,
        };
        let a = sufficient_stats(&m, &[mk(0)]).unwrap();
        let b = sufficient_stats(&m, &[mk(1), mk(2)]).unwrap();
        let joint = sufficient_stats(&m, &[mk(0), mk(1), mk(2)]).unwrap();
        let mut merged = a.clone();
        merged.merge(&b);
        assert_eq!(merged, joint);
    }

    #[test]
    fn empty_dataset_zero_stats() {
        let m = loop_tree();
        let stats = sufficient_stats(&m, &[]).unwrap();
        assert_eq!(stats.n_individuals, 0);
        assert!(stats.counts.is_empty());
    }
}
