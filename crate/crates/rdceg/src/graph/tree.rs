//! Event trees and modified trees.
//!
//! An event tree is a rooted labeled directed tree. Vertices are states, edges
//! are transitional events, and a flagged subset of edges carries holding
//! times. Infinite trees are represented by finite templates plus repetition
//! markers: a leaf may declare that the process continues from it exactly as
//! it does from some interior situation (a *continuation*). Continuations are
//! what become cyclic edges once positions are coalesced.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{RdcegError, Result};

pub const PROB_SUM_TOL: f64 = 1e-12;

/// Stable vertex identifier. Assigned in breadth-first order from the root so
/// serialization and fixtures are reproducible.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VertexId(pub u32);

/// Stable edge identifier (breadth-first order of the source vertex, then
/// insertion order among siblings).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EdgeId(pub u32);

impl VertexId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl EdgeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Vertex {
    pub id: VertexId,
    pub name: String,
    /// Repetition marker: the subtree rooted here is the subtree rooted at
    /// the target situation, repeated. Only leaves carry this.
    pub continuation: Option<VertexId>,
    /// Optional display name for the position this situation is expected to
    /// fall into (used when exporting graphs of shipped models).
    pub position_hint: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TreeEdge {
    pub id: EdgeId,
    pub source: VertexId,
    pub target: VertexId,
    pub label: String,
    /// Member of E*: carries a holding time.
    pub timed: bool,
    /// Marks a recurrence boundary: traversing this edge starts a new
    /// passage-slice even when the graph is drawn without cyclic edges
    /// (unrolled recurrent structure). Edges into continuations are
    /// boundaries implicitly.
    pub boundary: bool,
}

/// A rooted labeled event tree.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EventTree {
    vertices: Vec<Vertex>,
    edges: Vec<TreeEdge>,
    root: VertexId,
    out: Vec<Vec<EdgeId>>,
    parent: Vec<Option<EdgeId>>,
}

impl EventTree {
    pub fn root(&self) -> VertexId {
        self.root
    }

    pub fn vertex(&self, v: VertexId) -> &Vertex {
        &self.vertices[v.index()]
    }

    pub fn edge(&self, e: EdgeId) -> &TreeEdge {
        &self.edges[e.index()]
    }

    pub fn vertices(&self) -> impl Iterator<Item = &Vertex> {
        self.vertices.iter()
    }

    pub fn edges(&self) -> impl Iterator<Item = &TreeEdge> {
        self.edges.iter()
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn out_edges(&self, v: VertexId) -> &[EdgeId] {
        &self.out[v.index()]
    }

    pub fn parent_edge(&self, v: VertexId) -> Option<EdgeId> {
        self.parent[v.index()]
    }

    /// Non-leaf vertices (continuation markers are leaves, not situations).
    pub fn situations(&self) -> impl Iterator<Item = VertexId> + '_ {
        self.vertices
            .iter()
            .filter(|v| !self.out[v.id.index()].is_empty())
            .map(|v| v.id)
    }

    /// True leaves: no out-edges and no continuation marker.
    pub fn leaves(&self) -> impl Iterator<Item = VertexId> + '_ {
        self.vertices
            .iter()
            .filter(|v| self.out[v.id.index()].is_empty() && v.continuation.is_none())
            .map(|v| v.id)
    }

    pub fn is_leaf(&self, v: VertexId) -> bool {
        self.out[v.index()].is_empty() && self.vertex(v).continuation.is_none()
    }

    pub fn is_continuation(&self, v: VertexId) -> bool {
        self.vertex(v).continuation.is_some()
    }

    pub fn vertex_by_name(&self, name: &str) -> Option<VertexId> {
        self.vertices.iter().find(|v| v.name == name).map(|v| v.id)
    }

    pub fn edge_by_source_label(&self, source: VertexId, label: &str) -> Option<EdgeId> {
        self.out[source.index()]
            .iter()
            .copied()
            .find(|&e| self.edge(e).label == label)
    }

    /// Timed edges E*.
    pub fn timed_edges(&self) -> impl Iterator<Item = EdgeId> + '_ {
        self.edges.iter().filter(|e| e.timed).map(|e| e.id)
    }
}

/// Incremental builder. `finish` renumbers vertices breadth-first and
/// validates the tree invariants.
pub struct TreeBuilder {
    vertices: Vec<BuilderVertex>,
    edges: Vec<BuilderEdge>,
    children: Vec<Vec<usize>>,
}

struct BuilderVertex {
    name: Option<String>,
    continuation: Option<usize>,
    position_hint: Option<String>,
}

struct BuilderEdge {
    source: usize,
    target: usize,
    label: String,
    timed: bool,
    boundary: bool,
}

/// Handle into a [`TreeBuilder`]; becomes a [`VertexId`] after `finish`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BuildVertex(usize);

impl TreeBuilder {
    pub fn new() -> Self {
        TreeBuilder {
            vertices: vec![BuilderVertex {
                name: None,
                continuation: None,
                position_hint: None,
            }],
            edges: Vec::new(),
            children: vec![Vec::new()],
        }
    }

    pub fn root(&self) -> BuildVertex {
        BuildVertex(0)
    }

    /// Adds a child under `parent` connected by an edge with the given label.
    pub fn child(&mut self, parent: BuildVertex, label: &str, timed: bool) -> BuildVertex {
        let id = self.vertices.len();
        self.vertices.push(BuilderVertex {
            name: None,
            continuation: None,
            position_hint: None,
        });
        self.children.push(Vec::new());
        self.edges.push(BuilderEdge {
            source: parent.0,
            target: id,
            label: label.to_string(),
            timed,
            boundary: false,
        });
        self.children[parent.0].push(self.edges.len() - 1);
        BuildVertex(id)
    }

    /// Adds a continuation leaf under `parent`: the process repeats from
    /// `target` after traversing this edge. The edge is a slice boundary.
    pub fn continuation(
        &mut self,
        parent: BuildVertex,
        label: &str,
        timed: bool,
        target: BuildVertex,
    ) -> BuildVertex {
        let v = self.child(parent, label, timed);
        self.vertices[v.0].continuation = Some(target.0);
        let e = *self.children[parent.0].last().unwrap();
        self.edges[e].boundary = true;
        v
    }

    /// Flags the most recently added edge under `parent`→`child` as a
    /// passage-slice boundary (for unrolled recurrent structure).
    pub fn mark_boundary(&mut self, child: BuildVertex) {
        for e in self.edges.iter_mut() {
            if e.target == child.0 {
                e.boundary = true;
            }
        }
    }

    pub fn name(&mut self, v: BuildVertex, name: &str) {
        self.vertices[v.0].name = Some(name.to_string());
    }

    pub fn position_hint(&mut self, v: BuildVertex, hint: &str) {
        self.vertices[v.0].position_hint = Some(hint.to_string());
    }

    /// Validates and freezes the tree. Vertices are renumbered in
    /// breadth-first order from the root; edges follow the BFS order of their
    /// source and the insertion order among siblings.
    pub fn finish(self) -> Result<EventTree> {
        // BFS renumbering.
        let n = self.vertices.len();
        let mut order = Vec::with_capacity(n);
        let mut new_id = vec![usize::MAX; n];
        let mut queue = VecDeque::new();
        queue.push_back(0usize);
        while let Some(v) = queue.pop_front() {
            new_id[v] = order.len();
            order.push(v);
            for &e in &self.children[v] {
                queue.push_back(self.edges[e].target);
            }
        }
        if order.len() != n {
            return Err(RdcegError::Structure(
                "tree has vertices unreachable from the root".into(),
            ));
        }

        let mut vertices = Vec::with_capacity(n);
        for (bfs, &old) in order.iter().enumerate() {
            let bv = &self.vertices[old];
            if let Some(t) = bv.continuation {
                if self.children[t].is_empty() {
                    return Err(RdcegError::Structure(format!(
                        "continuation target of vertex {bfs} is not a situation"
                    )));
                }
                if !self.children[old].is_empty() {
                    return Err(RdcegError::Structure(format!(
                        "continuation vertex {bfs} must be a leaf"
                    )));
                }
            }
            vertices.push(Vertex {
                id: VertexId(bfs as u32),
                name: bv.name.clone().unwrap_or_else(|| format!("s{bfs}")),
                continuation: bv.continuation.map(|t| VertexId(new_id[t] as u32)),
                position_hint: bv.position_hint.clone(),
            });
        }

        let mut edges = Vec::with_capacity(self.edges.len());
        let mut out = vec![Vec::new(); n];
        let mut parent = vec![None; n];
        for &old_v in &order {
            for &old_e in &self.children[old_v] {
                let be = &self.edges[old_e];
                let id = EdgeId(edges.len() as u32);
                let source = VertexId(new_id[be.source] as u32);
                let target = VertexId(new_id[be.target] as u32);
                edges.push(TreeEdge {
                    id,
                    source,
                    target,
                    label: be.label.clone(),
                    timed: be.timed,
                    boundary: be.boundary,
                });
                out[source.index()].push(id);
                parent[target.index()] = Some(id);
            }
        }

        let tree = EventTree {
            vertices,
            edges,
            root: VertexId(0),
            out,
            parent,
        };
        tree.validate()?;
        Ok(tree)
    }
}

impl Default for TreeBuilder {
    fn default() -> Self {
        Self::new()
    }
}

impl EventTree {
    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeMap::new();
        for v in self.situations() {
            seen.clear();
            for &e in self.out_edges(v) {
                let label = &self.edge(e).label;
                if seen.insert(label.clone(), e).is_some() {
                    return Err(RdcegError::Structure(format!(
                        "situation {} has duplicate out-edge label '{}'",
                        self.vertex(v).name,
                        label
                    )));
                }
            }
        }
        let mut names = BTreeSet::new();
        for v in self.vertices() {
            if !names.insert(v.name.as_str()) {
                return Err(RdcegError::Structure(format!(
                    "duplicate vertex name '{}'",
                    v.name
                )));
            }
        }
        Ok(())
    }
}

/// Per-situation transition probabilities keyed by out-edge, used when a tree
/// carries a known parametrization (ground-truth models, renormalization).
pub type SituationProbs = BTreeMap<VertexId, Vec<f64>>;

/// An event tree with non-critical dropout leaves pruned and, when
/// probabilities are attached, out-edge probabilities renormalized to sum to
/// one at every situation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModifiedTree {
    base: EventTree,
    removed_vertices: BTreeSet<VertexId>,
    removed_edges: BTreeSet<EdgeId>,
    critical: BTreeSet<VertexId>,
    renormalized: BTreeSet<VertexId>,
    probs: Option<SituationProbs>,
}

/// Prunes leaves outside the critical terminating set and renormalizes the
/// surviving out-edge probabilities of every situation.
///
/// Continuation markers are repetition structure, not terminating events, and
/// are never pruned. A situation left with no out-edges becomes a leaf of the
/// modified tree.
pub fn modify_tree(
    tree: &EventTree,
    critical: &BTreeSet<VertexId>,
    probs: Option<&SituationProbs>,
) -> Result<ModifiedTree> {
    for &c in critical {
        if c.index() >= tree.n_vertices() || !tree.is_leaf(c) {
            return Err(RdcegError::Structure(format!(
                "critical set member {c:?} is not a leaf of the tree"
            )));
        }
    }
    if let Some(p) = probs {
        for v in tree.situations() {
            let k = tree.out_edges(v).len();
            match p.get(&v) {
                None => {
                    return Err(RdcegError::InvalidParameter(format!(
                        "no probabilities supplied for situation {}",
                        tree.vertex(v).name
                    )))
                }
                Some(row) => {
                    if row.len() != k {
                        return Err(RdcegError::InvalidParameter(format!(
                            "probability vector for {} has length {} but out-degree is {}",
                            tree.vertex(v).name,
                            row.len(),
                            k
                        )));
                    }
                    let sum: f64 = row.iter().sum();
                    if row.iter().any(|&x| x < 0.0) || sum > 1.0 + PROB_SUM_TOL {
                        return Err(RdcegError::InvalidParameter(format!(
                            "probabilities at {} must be nonnegative and sum to at most 1",
                            tree.vertex(v).name
                        )));
                    }
                }
            }
        }
    }

    let mut removed_vertices = BTreeSet::new();
    let mut removed_edges = BTreeSet::new();
    for v in tree.leaves() {
        if !critical.contains(&v) {
            removed_vertices.insert(v);
            if let Some(e) = tree.parent_edge(v) {
                removed_edges.insert(e);
            }
        }
    }

    let mut renormalized = BTreeSet::new();
    let new_probs = match probs {
        None => None,
        Some(p) => {
            let mut out = SituationProbs::new();
            for v in tree.situations() {
                let row = &p[&v];
                let keep: Vec<(usize, EdgeId)> = tree
                    .out_edges(v)
                    .iter()
                    .copied()
                    .enumerate()
                    .filter(|(_, e)| !removed_edges.contains(e))
                    .collect();
                if keep.is_empty() {
                    // The situation becomes a leaf; all onward mass was dropout.
                    continue;
                }
                let mass: f64 = keep.iter().map(|&(i, _)| row[i]).sum();
                if mass <= 0.0 {
                    return Err(RdcegError::Structure(format!(
                        "situation {} retains edges but zero probability mass after pruning",
                        tree.vertex(v).name
                    )));
                }
                let kept_row: Vec<f64> = keep.iter().map(|&(i, _)| row[i] / mass).collect();
                if (mass - 1.0).abs() > PROB_SUM_TOL {
                    renormalized.insert(v);
                }
                out.insert(v, kept_row);
            }
            Some(out)
        }
    };

    Ok(ModifiedTree {
        base: tree.clone(),
        removed_vertices,
        removed_edges,
        critical: critical.clone(),
        renormalized,
        probs: new_probs,
    })
}

impl ModifiedTree {
    pub fn base(&self) -> &EventTree {
        &self.base
    }

    pub fn root(&self) -> VertexId {
        self.base.root()
    }

    pub fn is_alive(&self, v: VertexId) -> bool {
        !self.removed_vertices.contains(&v)
    }

    pub fn critical(&self) -> &BTreeSet<VertexId> {
        &self.critical
    }

    pub fn vertex(&self, v: VertexId) -> &Vertex {
        self.base.vertex(v)
    }

    pub fn edge(&self, e: EdgeId) -> &TreeEdge {
        self.base.edge(e)
    }

    /// Surviving out-edges of a situation, in base-tree order.
    pub fn out_edges(&self, v: VertexId) -> Vec<EdgeId> {
        self.base
            .out_edges(v)
            .iter()
            .copied()
            .filter(|e| !self.removed_edges.contains(e))
            .collect()
    }

    /// Situations of the modified tree: alive vertices with at least one
    /// surviving out-edge.
    pub fn situations(&self) -> Vec<VertexId> {
        self.base
            .vertices()
            .map(|v| v.id)
            .filter(|&v| self.is_alive(v) && !self.out_edges(v).is_empty())
            .collect()
    }

    /// Timed edges E* of the modified tree.
    pub fn timed_edges(&self) -> Vec<EdgeId> {
        self.base
            .edges()
            .filter(|e| e.timed && !self.removed_edges.contains(&e.id))
            .map(|e| e.id)
            .collect()
    }

    pub fn renormalized(&self) -> &BTreeSet<VertexId> {
        &self.renormalized
    }

    pub fn probs(&self) -> Option<&SituationProbs> {
        self.probs.as_ref()
    }

    /// Renormalized probability of a single surviving edge, when attached.
    pub fn edge_prob(&self, e: EdgeId) -> Option<f64> {
        let probs = self.probs.as_ref()?;
        let edge = self.edge(e);
        let row = probs.get(&edge.source)?;
        let idx = self.out_edges(edge.source).iter().position(|&x| x == e)?;
        row.get(idx).copied()
    }

    /// Sorted out-edge labels of a situation (the stage alignment order).
    pub fn sorted_labels(&self, v: VertexId) -> Vec<String> {
        let mut labels: Vec<String> = self
            .out_edges(v)
            .iter()
            .map(|&e| self.edge(e).label.clone())
            .collect();
        labels.sort();
        labels
    }

    /// Materializes the pruned structure as a standalone event tree
    /// (renumbered breadth-first). Names and hints are preserved.
    pub fn to_event_tree(&self) -> Result<(EventTree, BTreeSet<VertexId>, SituationProbs)> {
        let rebuilt = self.rebuild_with_continuations()?;
        let critical: BTreeSet<VertexId> = self
            .critical
            .iter()
            .filter_map(|c| rebuilt.vertex_by_name(&self.vertex(*c).name))
            .collect();
        let probs = match &self.probs {
            None => SituationProbs::new(),
            Some(p) => {
                let mut out = SituationProbs::new();
                for (v, row) in p {
                    if let Some(nv) = rebuilt.vertex_by_name(&self.vertex(*v).name) {
                        out.insert(nv, row.clone());
                    }
                }
                out
            }
        };
        Ok((rebuilt, critical, probs))
    }

    fn rebuild_with_continuations(&self) -> Result<EventTree> {
        let mut b = TreeBuilder::new();
        let root = self.root();
        b.name(b.root(), &self.vertex(root).name);
        if let Some(h) = &self.vertex(root).position_hint {
            let r = b.root();
            b.position_hint(r, h);
        }
        let mut map: BTreeMap<VertexId, BuildVertex> = BTreeMap::new();
        map.insert(root, b.root());
        // Two-phase: create all non-continuation vertices first (BFS), then
        // attach continuation leaves whose targets are now mapped.
        let mut queue = VecDeque::new();
        queue.push_back(root);
        let mut cont_edges: Vec<(VertexId, EdgeId)> = Vec::new();
        while let Some(v) = queue.pop_front() {
            let bv = map[&v];
            for e in self.out_edges(v) {
                let edge = self.edge(e);
                let cv = self.vertex(edge.target);
                if cv.continuation.is_some() {
                    cont_edges.push((v, e));
                    continue;
                }
                let child = b.child(bv, &edge.label, edge.timed);
                if edge.boundary {
                    b.mark_boundary(child);
                }
                b.name(child, &cv.name);
                if let Some(h) = &cv.position_hint {
                    b.position_hint(child, h);
                }
                map.insert(edge.target, child);
                queue.push_back(edge.target);
            }
        }
        for (v, e) in cont_edges {
            let edge = self.edge(e);
            let cv = self.vertex(edge.target);
            let target = cv.continuation.unwrap();
            let bt = *map.get(&target).ok_or_else(|| {
                RdcegError::Structure(format!(
                    "continuation target {} was pruned",
                    self.vertex(target).name
                ))
            })?;
            let child = b.continuation(map[&v], &edge.label, edge.timed, bt);
            b.name(child, &cv.name);
            if let Some(h) = &cv.position_hint {
                b.position_hint(child, h);
            }
        }
        b.finish()
    }
}
