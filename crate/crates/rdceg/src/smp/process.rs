//! Semi-Markov representation of an RDCEG.
//!
//! States are the vertices touching timed edges plus the entry state. The
//! embedded chain's transition matrix collapses parallel edges by summing
//! their probabilities and mixing their holding laws; purely instantaneous
//! decision vertices are condensed through by probability products. Untimed
//! edges between states either get a configured standard law or are
//! renormalized away, conditioning on a timed transition being taken.
//! The renewal kernel factorizes as Q_ij(t) = p_ij F_ij(t).

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{RdcegError, Result};
use crate::graph::{PositionId, Rdceg};
use crate::smp::law::HoldingLaw;

pub const ROW_SUM_TOL: f64 = 1e-12;

/// Transition probability and holding law attached to each RDCEG edge.
#[derive(Debug, Clone, Default)]
pub struct EdgeNumbers {
    /// Probability per RDCEG edge id.
    pub prob: BTreeMap<usize, f64>,
    /// Holding law per timed RDCEG edge id.
    pub law: BTreeMap<usize, HoldingLaw>,
}

/// Policy for untimed edges between SMP states.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum UntimedPolicy {
    /// Drop untimed edges and renormalize the remaining probabilities,
    /// conditioning on a timed transition. States with no timed out-edge
    /// keep their untimed edges as instantaneous (flagged in the notes).
    #[default]
    Renormalize,
    /// Attach this law to untimed edges.
    StandardLaw(HoldingLaw),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SmpState {
    pub index: usize,
    pub name: String,
    pub position: Option<PositionId>,
    pub absorbing: bool,
}

/// A semi-Markov process: embedded transition matrix, per-transition holding
/// laws, initial distribution concentrated at the entry state.
#[derive(Debug, Clone)]
pub struct Smp {
    pub states: Vec<SmpState>,
    /// Row-stochastic over non-absorbing states.
    pub trans: Vec<Vec<f64>>,
    pub laws: Vec<Vec<Option<HoldingLaw>>>,
    pub initial: Vec<f64>,
    /// Transitions arising from cyclic edges of the source RDCEG (repetition
    /// of structure; condensation may not pass through them).
    pub cyclic: BTreeSet<(usize, usize)>,
    /// Construction diagnostics (renormalizations, forced instants, mixture
    /// collapses).
    pub notes: Vec<String>,
}

impl Smp {
    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn state_by_name(&self, name: &str) -> Option<usize> {
        self.states.iter().position(|s| s.name == name)
    }

    /// Renewal kernel entry Q_ij(t) = p_ij F_ij(t).
    pub fn renewal_kernel(&self, i: usize, j: usize, t: f64) -> Result<f64> {
        if i >= self.n_states() || j >= self.n_states() {
            return Err(RdcegError::UnknownState(format!(
                "kernel index out of range: ({i}, {j})"
            )));
        }
        if t < 0.0 {
            return Err(RdcegError::InvalidParameter(format!("negative time {t}")));
        }
        let p = self.trans[i][j];
        if p == 0.0 {
            return Ok(0.0);
        }
        let f = self.laws[i][j]
            .as_ref()
            .map(|law| law.cdf(t))
            .unwrap_or(1.0);
        Ok(p * f)
    }

    /// Verifies row-stochasticity of the embedded chain.
    pub fn check_rows(&self) -> Result<()> {
        for (i, row) in self.trans.iter().enumerate() {
            if self.states[i].absorbing {
                continue;
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(RdcegError::Structure(format!(
                    "row {} of the embedded chain sums to {sum}",
                    self.states[i].name
                )));
            }
        }
        Ok(())
    }
}

/// Converts an RDCEG with attached probabilities and laws into its SMP
/// representation.
pub fn to_smp(r: &Rdceg, numbers: &EdgeNumbers, policy: &UntimedPolicy) -> Result<Smp> {
    for e in r.edges() {
        if !numbers.prob.contains_key(&e.id) {
            return Err(RdcegError::MissingPrior(format!(
                "edge '{}' out of {} has no transition probability attached",
                e.label,
                r.position(e.source).name
            )));
        }
        if e.timed && !numbers.law.contains_key(&e.id) {
            return Err(RdcegError::MissingPrior(format!(
                "timed edge '{}' out of {} has no holding law attached",
                e.label,
                r.position(e.source).name
            )));
        }
    }

    let mut notes = Vec::new();

    // State space: endpoints of timed edges, plus the entry position. The
    // sink is a state whenever any timed edge enters it.
    let mut state_set: BTreeSet<PositionId> = BTreeSet::new();
    state_set.insert(r.root());
    for e in r.edges() {
        if e.timed {
            state_set.insert(e.source);
            state_set.insert(e.target);
        }
    }
    if let Some(sink) = r.sink() {
        state_set.insert(sink);
    }
    let states: Vec<PositionId> = state_set.iter().copied().collect();
    let index_of: BTreeMap<PositionId, usize> =
        states.iter().enumerate().map(|(i, p)| (*p, i)).collect();

    // Instantaneous pass-through of non-state vertices: paths of untimed
    // edges through vertices outside the state space collapse into composite
    // transitions with multiplied probabilities.
    // reach(v) = list of (state, prob, first_edge_chain) from vertex v.
    #[derive(Clone)]
    struct Arrival {
        state: PositionId,
        prob: f64,
        labels: Vec<String>,
        law: Option<HoldingLaw>,
        timed: bool,
        cyclic: bool,
    }
    fn explore(
        r: &Rdceg,
        numbers: &EdgeNumbers,
        state_set: &BTreeSet<PositionId>,
        from: PositionId,
    ) -> Result<Vec<Arrival>> {
        let mut out = Vec::new();
        for e in r.out_edges(from) {
            let p = numbers.prob[&e.id];
            let law = numbers.law.get(&e.id).cloned();
            if state_set.contains(&e.target) {
                out.push(Arrival {
                    state: e.target,
                    prob: p,
                    labels: vec![e.label.clone()],
                    law,
                    timed: e.timed,
                    cyclic: e.cyclic,
                });
            } else {
                // Interior vertex: recurse; the hop itself must be untimed
                // (timed edges always end at states by construction).
                let deeper = explore(r, numbers, state_set, e.target)?;
                if deeper.is_empty() {
                    return Err(RdcegError::Structure(format!(
                        "vertex {} dead-ends outside the SMP state space",
                        r.position(e.target).name
                    )));
                }
                for mut a in deeper {
                    a.prob *= p;
                    let mut labels = vec![e.label.clone()];
                    labels.extend(a.labels);
                    a.labels = labels;
                    a.cyclic = a.cyclic || e.cyclic;
                    out.push(a);
                }
            }
        }
        Ok(out)
    }

    let n = states.len();
    let mut trans = vec![vec![0.0; n]; n];
    let mut laws: Vec<Vec<Option<HoldingLaw>>> = vec![vec![None; n]; n];
    let mut cyclic: BTreeSet<(usize, usize)> = BTreeSet::new();

    for (i, &pos) in states.iter().enumerate() {
        if Some(pos) == r.sink() {
            continue;
        }
        let arrivals = explore(r, numbers, &state_set, pos)?;
        if arrivals.is_empty() {
            continue; // absorbing non-sink state
        }
        // Group arrivals by target state; parallel routes mix.
        let mut grouped: BTreeMap<usize, Vec<Arrival>> = BTreeMap::new();
        for a in arrivals {
            grouped.entry(index_of[&a.state]).or_default().push(a);
        }

        // Untimed-edge policy applies per arrival before mixing.
        let any_timed = grouped.values().flatten().any(|a| a.timed);
        let mut kept: BTreeMap<usize, Vec<(f64, HoldingLaw, bool)>> = BTreeMap::new();
        for (j, group) in grouped {
            for a in group {
                let law = match (&a.law, a.timed) {
                    (Some(law), true) => law.clone(),
                    _ => match policy {
                        UntimedPolicy::StandardLaw(law) => law.clone(),
                        UntimedPolicy::Renormalize => {
                            if any_timed {
                                // Dropped; remaining mass renormalized below.
                                notes.push(format!(
                                    "untimed route {} -> {} via [{}] renormalized away",
                                    r.position(pos).name,
                                    r.position(states[j]).name,
                                    a.labels.join(", ")
                                ));
                                continue;
                            }
                            // No timed alternative: keep as instantaneous.
                            notes.push(format!(
                                "state {} has no timed out-edge; untimed route kept instantaneous",
                                r.position(pos).name
                            ));
                            HoldingLaw::Instant
                        }
                    },
                };
                kept.entry(j).or_default().push((a.prob, law, a.cyclic));
            }
        }
        let total: f64 = kept.values().flatten().map(|(p, _, _)| p).sum();
        if total <= 0.0 {
            return Err(RdcegError::Structure(format!(
                "state {} lost all outgoing probability under the untimed-edge policy",
                r.position(pos).name
            )));
        }
        if (total - 1.0).abs() > ROW_SUM_TOL {
            notes.push(format!(
                "row {} renormalized from mass {total:.6}",
                r.position(pos).name
            ));
        }
        for (j, routes) in kept {
            let p: f64 = routes.iter().map(|(p, _, _)| p).sum();
            trans[i][j] = p / total;
            if routes.iter().any(|(_, _, b)| *b) {
                cyclic.insert((i, j));
            }
            let law = if routes.len() == 1 {
                routes.into_iter().next().unwrap().1
            } else {
                notes.push(format!(
                    "parallel routes {} -> {} collapsed into a mixture",
                    r.position(pos).name,
                    r.position(states[j]).name
                ));
                let weights: Vec<f64> = routes.iter().map(|(p, _, _)| *p).collect();
                let comps: Vec<HoldingLaw> = routes.into_iter().map(|(_, l, _)| l).collect();
                HoldingLaw::mixture(weights, comps)?
            };
            laws[i][j] = Some(law);
        }
    }

    let state_records: Vec<SmpState> = states
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let absorbing = trans[i].iter().all(|&x| x == 0.0);
            SmpState {
                index: i,
                name: r.position(p).name.clone(),
                position: Some(p),
                absorbing,
            }
        })
        .collect();
    let mut initial = vec![0.0; n];
    initial[index_of[&r.root()]] = 1.0;

    Ok(Smp {
        states: state_records,
        trans,
        laws,
        initial,
        cyclic,
        notes,
    })
}

/// Condenses an SMP onto a subset of kept states. Through-paths whose
/// interiors avoid the kept set become single edges with multiplied
/// probabilities and convolved holding laws; parallel condensed paths mix.
/// Paths crossing a cyclic edge are rejected: passing through repeated
/// structure leaves the condensation's passage-slice.
pub fn condense_smp(smp: &Smp, keep: &BTreeSet<usize>) -> Result<Smp> {
    for &k in keep {
        if k >= smp.n_states() {
            return Err(RdcegError::UnknownState(format!("state index {k}")));
        }
    }
    if keep.is_empty() {
        return Err(RdcegError::InvalidParameter("kept set is empty".into()));
    }

    let mut notes = vec![];
    let kept: Vec<usize> = keep.iter().copied().collect();
    let new_index: BTreeMap<usize, usize> = kept.iter().enumerate().map(|(i, &s)| (s, i)).collect();
    let n = kept.len();
    let mut trans = vec![vec![0.0; n]; n];
    let mut laws: Vec<Vec<Option<HoldingLaw>>> = vec![vec![None; n]; n];
    let mut cyclic = BTreeSet::new();

    // Enumerate simple paths from each kept state through non-kept interiors.
    struct PathAcc {
        prob: f64,
        laws: Vec<HoldingLaw>,
    }
    for (li, &start) in kept.iter().enumerate() {
        // collected[j] = list of condensed route accumulators into kept j
        let mut collected: BTreeMap<usize, Vec<PathAcc>> = BTreeMap::new();
        let mut crossed_boundary = false;
        // DFS over (state, prob, laws chain, visited interior set)
        let mut stack: Vec<(usize, f64, Vec<HoldingLaw>, BTreeSet<usize>)> =
            vec![(start, 1.0, Vec::new(), BTreeSet::new())];
        while let Some((at, prob, chain, visited)) = stack.pop() {
            let first_hop = at == start && chain.is_empty();
            for j in 0..smp.n_states() {
                let p = smp.trans[at][j];
                if p == 0.0 {
                    continue;
                }
                // Direct edges between kept states stay as they are, cyclic
                // or not; a cyclic edge inside a condensed path means the
                // path re-enters repeated structure.
                if smp.cyclic.contains(&(at, j)) && !(first_hop && keep.contains(&j)) {
                    crossed_boundary = true;
                    continue;
                }
                let mut chain_j = chain.clone();
                if let Some(l) = &smp.laws[at][j] {
                    chain_j.push(l.clone());
                }
                if keep.contains(&j) {
                    collected.entry(j).or_default().push(PathAcc {
                        prob: prob * p,
                        laws: chain_j,
                    });
                } else {
                    if visited.contains(&j) {
                        return Err(RdcegError::Condense(format!(
                            "cycle through non-kept state {} during condensation",
                            smp.states[j].name
                        )));
                    }
                    let mut visited_j = visited.clone();
                    visited_j.insert(j);
                    stack.push((j, prob * p, chain_j, visited_j));
                }
            }
        }
        if collected.is_empty() && crossed_boundary {
            return Err(RdcegError::Condense(format!(
                "every route out of {} crosses a cyclic edge; condensation is defined within the first passage-slice",
                smp.states[start].name
            )));
        }
        let total: f64 = collected.values().flatten().map(|acc| acc.prob).sum();
        if total <= 0.0 {
            continue; // absorbing after condensation
        }
        for (j, routes) in collected {
            let p: f64 = routes.iter().map(|r| r.prob).sum();
            let law = if routes.len() == 1 {
                let route = routes.into_iter().next().unwrap();
                route_law(route.laws)?
            } else {
                notes.push(format!(
                    "parallel condensed paths {} -> {} mixed by path probability",
                    smp.states[start].name, smp.states[j].name
                ));
                let weights: Vec<f64> = routes.iter().map(|r| r.prob).collect();
                let comps: Vec<HoldingLaw> = routes
                    .into_iter()
                    .map(|r| route_law(r.laws))
                    .collect::<Result<_>>()?;
                HoldingLaw::mixture(weights, comps)?
            };
            let jj = new_index[&j];
            trans[li][jj] = p / total;
            laws[li][jj] = Some(law);
            if smp.cyclic.contains(&(start, j)) {
                cyclic.insert((li, jj));
            }
        }
        if (total - 1.0).abs() > ROW_SUM_TOL {
            notes.push(format!(
                "row {} renormalized from mass {total:.6} after condensation",
                smp.states[start].name
            ));
        }
    }

    let states: Vec<SmpState> = kept
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            let absorbing = trans[i].iter().all(|&x| x == 0.0);
            SmpState {
                index: i,
                name: smp.states[s].name.clone(),
                position: smp.states[s].position,
                absorbing,
            }
        })
        .collect();
    let initial: Vec<f64> = kept.iter().map(|&s| smp.initial[s]).collect();

    Ok(Smp {
        states,
        trans,
        laws,
        initial,
        cyclic,
        notes,
    })
}

fn route_law(mut chain: Vec<HoldingLaw>) -> Result<HoldingLaw> {
    chain.retain(|l| *l != HoldingLaw::Instant);
    match chain.len() {
        0 => Ok(HoldingLaw::Instant),
        1 => Ok(chain.into_iter().next().unwrap()),
        _ => HoldingLaw::convolution(chain),
    }
}
