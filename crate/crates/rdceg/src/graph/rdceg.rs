//! The reduced dynamic chain event graph.
//!
//! An RDCEG is a directed colored multigraph over positions plus an optional
//! sink collecting critical terminating events. It is built from a hued tree
//! by coalescing situations that share a position. Edges arising from
//! continuation markers are cyclic edges; cyclic edges (and declared
//! recurrence boundaries) delimit passage-slices, the graph's analogue of
//! time-slices.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{RdcegError, Result};
use crate::graph::iso::position_partition;
use crate::graph::staging::HuedTree;
use crate::graph::tree::{EdgeId, VertexId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PositionId(pub u32);

impl PositionId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Position {
    pub id: PositionId,
    pub name: String,
    /// Stage cell index in the underlying staging; `None` for the sink.
    pub stage: Option<usize>,
    /// Member situations in the hued tree; empty for the sink.
    pub situations: Vec<VertexId>,
    pub is_sink: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RdcegEdge {
    pub id: usize,
    pub source: PositionId,
    pub target: PositionId,
    pub label: String,
    pub timed: bool,
    /// Cluster cell index for timed edges.
    pub cluster: Option<usize>,
    /// Represents a repetition of structure in the underlying hued tree.
    pub cyclic: bool,
    /// Starts a new passage-slice when traversed (cyclic edges always do;
    /// unrolled recurrent structure may declare extra boundaries).
    pub boundary: bool,
    /// The hued-tree edges this RDCEG edge represents, one per member
    /// situation of the source position.
    pub tree_edges: Vec<EdgeId>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Rdceg {
    positions: Vec<Position>,
    edges: Vec<RdcegEdge>,
    root: PositionId,
    sink: Option<PositionId>,
    out: Vec<Vec<usize>>,
}

/// Groups the situations of a hued tree into positions. Two situations share
/// a position iff they share a stage and their colored rooted subtrees are
/// isomorphic; `max_depth` bounds the refinement rounds (0 = exact).
pub fn positions_from_staging(hued: &HuedTree, max_depth: usize) -> Vec<BTreeSet<VertexId>> {
    position_partition(hued, max_depth)
}

/// Coalesces the positions of a hued tree into an RDCEG, collecting critical
/// terminated trajectories into a single sink.
pub fn build_rdceg(hued: &HuedTree, positions: &[BTreeSet<VertexId>]) -> Result<Rdceg> {
    let m = hued.modified();

    let mut cell_of: BTreeMap<VertexId, usize> = BTreeMap::new();
    for (i, cell) in positions.iter().enumerate() {
        for &v in cell {
            if cell_of.insert(v, i).is_some() {
                return Err(RdcegError::Staging(format!(
                    "situation {} belongs to two positions",
                    m.vertex(v).name
                )));
            }
        }
    }
    let situations: BTreeSet<VertexId> = m.situations().into_iter().collect();
    if cell_of.keys().copied().collect::<BTreeSet<_>>() != situations {
        return Err(RdcegError::Staging(
            "position partition does not cover the situations".into(),
        ));
    }
    // Positions must refine stages.
    for cell in positions {
        let mut stages: BTreeSet<usize> = BTreeSet::new();
        for &v in cell {
            stages.insert(hued.stage_of(v).expect("situation has a stage"));
        }
        if stages.len() > 1 {
            return Err(RdcegError::Staging(
                "a position straddles two stages".into(),
            ));
        }
    }

    // Resolve the position an edge target belongs to: child situation's
    // position, the sink for critical leaves, or the continuation target's
    // position (a cyclic edge).
    enum Target {
        Pos(usize, bool), // (cell, via_continuation)
        Sink,
    }
    let resolve = |target: VertexId| -> Result<Target> {
        let vx = m.vertex(target);
        if let Some(t) = vx.continuation {
            let cell = cell_of.get(&t).ok_or_else(|| {
                RdcegError::Structure(format!(
                    "continuation target {} is not a situation",
                    m.vertex(t).name
                ))
            })?;
            return Ok(Target::Pos(*cell, true));
        }
        if m.out_edges(target).is_empty() {
            if m.critical().contains(&target) {
                return Ok(Target::Sink);
            }
            return Err(RdcegError::Structure(format!(
                "leaf {} is neither critical nor a continuation; prune dropouts first",
                vx.name
            )));
        }
        Ok(Target::Pos(cell_of[&target], false))
    };

    // Signature of a situation's out-structure: label -> (timed, cluster,
    // target kind). Representatives of one position must agree.
    #[derive(PartialEq, Eq, Debug)]
    enum Kind {
        ToPos(usize, bool),
        ToSink,
    }
    type EdgeSig = BTreeMap<String, (bool, Option<usize>, Kind, bool)>;
    let signature = |v: VertexId| -> Result<EdgeSig> {
        let mut sig = BTreeMap::new();
        for e in m.out_edges(v) {
            let edge = m.edge(e);
            let kind = match resolve(edge.target)? {
                Target::Pos(c, cont) => Kind::ToPos(c, cont),
                Target::Sink => Kind::ToSink,
            };
            sig.insert(
                edge.label.clone(),
                (edge.timed, hued.cluster_of(e), kind, edge.boundary),
            );
        }
        Ok(sig)
    };
    for cell in positions {
        let mut iter = cell.iter();
        let first = *iter.next().unwrap();
        let base = signature(first)?;
        for &v in iter {
            if signature(v)? != base {
                return Err(RdcegError::Staging(format!(
                    "situations {} and {} share a position but their out-edge structure differs",
                    m.vertex(first).name,
                    m.vertex(v).name
                )));
            }
        }
    }

    // Order positions breadth-first from the root's position for stable ids.
    let root_cell = cell_of[&m.root()];
    let mut order: Vec<usize> = Vec::new();
    let mut seen = vec![false; positions.len()];
    let mut queue = VecDeque::new();
    queue.push_back(root_cell);
    seen[root_cell] = true;
    while let Some(c) = queue.pop_front() {
        order.push(c);
        let rep = *positions[c].iter().next().unwrap();
        for e in m.out_edges(rep) {
            if let Target::Pos(t, _) = resolve(m.edge(e).target)? {
                if !seen[t] {
                    seen[t] = true;
                    queue.push_back(t);
                }
            }
        }
    }
    // Positions unreachable from the root would be dead structure.
    if order.len() != positions.len() {
        return Err(RdcegError::Staging(
            "some positions are unreachable from the root position".into(),
        ));
    }
    let mut new_id = vec![0usize; positions.len()];
    for (i, &c) in order.iter().enumerate() {
        new_id[c] = i;
    }

    let position_name = |cell: &BTreeSet<VertexId>, fallback: usize| -> Result<String> {
        let hints: BTreeSet<String> = cell
            .iter()
            .filter_map(|&v| m.vertex(v).position_hint.clone())
            .collect();
        match hints.len() {
            0 => Ok(format!("w{fallback}")),
            1 => Ok(hints.into_iter().next().unwrap()),
            _ => Err(RdcegError::Staging(format!(
                "position merges situations with conflicting hints: {hints:?}"
            ))),
        }
    };

    let has_critical = !m.critical().is_empty();
    let mut out_positions: Vec<Position> = Vec::with_capacity(positions.len() + 1);
    for (i, &c) in order.iter().enumerate() {
        let cell = &positions[c];
        out_positions.push(Position {
            id: PositionId(i as u32),
            name: position_name(cell, i)?,
            stage: Some(hued.stage_of(*cell.iter().next().unwrap()).unwrap()),
            situations: cell.iter().copied().collect(),
            is_sink: false,
        });
    }
    let sink = if has_critical {
        let id = PositionId(out_positions.len() as u32);
        out_positions.push(Position {
            id,
            name: "w_inf".to_string(),
            stage: None,
            situations: Vec::new(),
            is_sink: true,
        });
        Some(id)
    } else {
        None
    };

    // Edges: one RDCEG edge per (position, label), aggregating the member
    // tree edges. Parallel edges between two positions arise from distinct
    // labels and stay distinct records.
    let mut edges: Vec<RdcegEdge> = Vec::new();
    let mut out = vec![Vec::new(); out_positions.len()];
    for (i, &c) in order.iter().enumerate() {
        let cell = &positions[c];
        let rep = *cell.iter().next().unwrap();
        for e in m.out_edges(rep) {
            let edge = m.edge(e);
            let (target_pid, cyclic) = match resolve(edge.target)? {
                Target::Pos(t, cont) => (PositionId(new_id[t] as u32), cont),
                Target::Sink => (sink.expect("critical leaves imply a sink"), false),
            };
            let source_pid = PositionId(i as u32);
            if source_pid == target_pid {
                return Err(RdcegError::Structure(format!(
                    "edge '{}' out of position {} would be a self-loop",
                    edge.label, out_positions[i].name
                )));
            }
            let tree_edges: Vec<EdgeId> = cell
                .iter()
                .map(|&v| {
                    m.out_edges(v)
                        .into_iter()
                        .find(|&x| m.edge(x).label == edge.label)
                        .expect("signature check guarantees the label")
                })
                .collect();
            let id = edges.len();
            out[i].push(id);
            edges.push(RdcegEdge {
                id,
                source: source_pid,
                target: target_pid,
                label: edge.label.clone(),
                timed: edge.timed,
                cluster: if edge.timed { hued.cluster_of(e) } else { None },
                cyclic,
                boundary: cyclic || edge.boundary,
                tree_edges,
            });
        }
    }

    Ok(Rdceg {
        positions: out_positions,
        edges,
        root: PositionId(0),
        sink,
        out,
    })
}

impl Rdceg {
    pub fn root(&self) -> PositionId {
        self.root
    }

    pub fn sink(&self) -> Option<PositionId> {
        self.sink
    }

    pub fn positions(&self) -> &[Position] {
        &self.positions
    }

    /// Positions excluding the sink.
    pub fn non_sink_positions(&self) -> impl Iterator<Item = &Position> {
        self.positions.iter().filter(|p| !p.is_sink)
    }

    pub fn position(&self, id: PositionId) -> &Position {
        &self.positions[id.index()]
    }

    pub fn position_by_name(&self, name: &str) -> Option<PositionId> {
        self.positions.iter().find(|p| p.name == name).map(|p| p.id)
    }

    pub fn edges(&self) -> &[RdcegEdge] {
        &self.edges
    }

    pub fn edge(&self, id: usize) -> &RdcegEdge {
        &self.edges[id]
    }

    pub fn out_edges(&self, p: PositionId) -> impl Iterator<Item = &RdcegEdge> {
        self.out[p.index()].iter().map(|&i| &self.edges[i])
    }

    pub fn cyclic_edges(&self) -> impl Iterator<Item = &RdcegEdge> {
        self.edges.iter().filter(|e| e.cyclic)
    }

    pub fn boundary_edges(&self) -> impl Iterator<Item = &RdcegEdge> {
        self.edges.iter().filter(|e| e.boundary)
    }

    /// Expands every position back to its member situations and checks the
    /// result against a hued tree's edge and label structure.
    pub fn round_trips_with(&self, hued: &HuedTree) -> bool {
        let m = hued.modified();
        for p in self.non_sink_positions() {
            for &v in &p.situations {
                let mut tree_labels: Vec<(String, bool)> = m
                    .out_edges(v)
                    .into_iter()
                    .map(|e| (m.edge(e).label.clone(), m.edge(e).timed))
                    .collect();
                tree_labels.sort();
                let mut graph_labels: Vec<(String, bool)> = self
                    .out_edges(p.id)
                    .map(|e| (e.label.clone(), e.timed))
                    .collect();
                graph_labels.sort();
                if tree_labels != graph_labels {
                    return false;
                }
            }
        }
        true
    }
}

/// One passage-slice of an RDCEG: evolution from the slice roots up to a
/// boundary edge or the sink.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PassageSlice {
    pub index: usize,
    pub roots: Vec<PositionId>,
    pub vertices: Vec<PositionId>,
    /// Interior (non-boundary) edges of the slice.
    pub edges: Vec<usize>,
    /// Boundary edges terminating paths of this slice.
    pub terminal_edges: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SliceDecomposition {
    pub slices: Vec<PassageSlice>,
    /// When the decomposition cycles, the slice after the last listed one
    /// equals `slices[repeats_to]` and the process repeats forever.
    pub repeats_to: Option<usize>,
}

/// Splits an RDCEG into passage-slices. The first slice is rooted at the
/// root; each later slice is rooted at the targets of the previous slice's
/// boundary edges. Stops when the root set recurs (marking repetition) or no
/// boundary edge is crossed.
pub fn passage_slices(r: &Rdceg) -> SliceDecomposition {
    let mut slices = Vec::new();
    let mut seen_roots: Vec<BTreeSet<PositionId>> = Vec::new();
    let mut roots: BTreeSet<PositionId> = BTreeSet::from([r.root()]);
    let mut repeats_to = None;

    loop {
        if let Some(idx) = seen_roots.iter().position(|s| *s == roots) {
            repeats_to = Some(idx);
            break;
        }
        seen_roots.push(roots.clone());

        let mut vertices: BTreeSet<PositionId> = BTreeSet::new();
        let mut interior: Vec<usize> = Vec::new();
        let mut terminal: Vec<usize> = Vec::new();
        let mut queue: VecDeque<PositionId> = roots.iter().copied().collect();
        for &x in &roots {
            vertices.insert(x);
        }
        while let Some(v) = queue.pop_front() {
            for e in r.out_edges(v) {
                if e.boundary {
                    terminal.push(e.id);
                    continue;
                }
                interior.push(e.id);
                if vertices.insert(e.target) {
                    queue.push_back(e.target);
                }
            }
        }
        interior.sort_unstable();
        terminal.sort_unstable();
        let next_roots: BTreeSet<PositionId> = terminal.iter().map(|&i| r.edge(i).target).collect();
        slices.push(PassageSlice {
            index: slices.len() + 1,
            roots: roots.iter().copied().collect(),
            vertices: vertices.into_iter().collect(),
            edges: interior,
            terminal_edges: terminal,
        });
        if next_roots.is_empty() {
            break;
        }
        roots = next_roots;
    }

    SliceDecomposition { slices, repeats_to }
}
