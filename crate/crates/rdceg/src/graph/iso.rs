//! Canonical forms for colored rooted trees.
//!
//! Two situations share a position exactly when they share a stage and their
//! colored rooted subtrees are isomorphic under a structure-, color- and
//! edge-label-preserving map. Trees admit polynomial canonicalization, so
//! isomorphism is decided by a bottom-up canonical encoding (sorted child
//! encodings + vertex color + edge labels) rather than general
//! graph-isomorphism machinery.
//!
//! Templates with continuation markers describe infinite repeating trees, so
//! the encoding is computed by partition refinement: classes start from stage
//! colors and are refined round by round until they stabilize. On a
//! continuation-free tree the fixed point coincides with the one-pass
//! bottom-up encoding.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::graph::staging::HuedTree;
use crate::graph::tree::VertexId;

/// A plain colored rooted tree used by the canonical encoder and its tests:
/// `children[v]` lists `(child, edge_label, edge_color)`, `vertex_color[v]`
/// colors the vertex.
#[derive(Debug, Clone)]
pub struct ColoredTree {
    pub children: Vec<Vec<(usize, String, u32)>>,
    pub vertex_color: Vec<u32>,
}

/// Canonical encoding of the subtree rooted at `v`. Equal strings iff the
/// colored rooted subtrees are isomorphic.
pub fn colored_tree_code(t: &ColoredTree, v: usize) -> String {
    let mut parts: Vec<String> = t.children[v]
        .iter()
        .map(|(c, label, ecolor)| format!("{label}\u{1}{ecolor}\u{1}{}", colored_tree_code(t, *c)))
        .collect();
    parts.sort();
    format!("({}\u{2}{})", t.vertex_color[v], parts.join("\u{2}"))
}

/// Equivalence classes of the alive vertices of a hued tree under colored
/// subtree isomorphism, continuation markers resolved by repetition.
///
/// `max_depth` caps the number of refinement rounds; rounds beyond the number
/// of vertices never split further, so the default (0 = automatic) always
/// reaches the exact fixed point.
pub fn subtree_classes(hued: &HuedTree, max_depth: usize) -> BTreeMap<VertexId, u64> {
    let m = hued.modified();
    let mut alive: Vec<VertexId> = m
        .base()
        .vertices()
        .map(|v| v.id)
        .filter(|&v| m.is_alive(v))
        .collect();
    alive.sort();

    // Initial classes: situations by stage, critical leaves together,
    // continuations by their (eventual) target class.
    let mut class: BTreeMap<VertexId, u64> = BTreeMap::new();
    for &v in &alive {
        let key = if m.out_edges(v).is_empty() && m.vertex(v).continuation.is_none() {
            0u64
        } else if m.vertex(v).continuation.is_some() {
            1u64
        } else {
            2 + hued.stage_of(v).expect("situation has a stage") as u64
        };
        class.insert(v, key);
    }

    let rounds = if max_depth == 0 {
        alive.len() + 1
    } else {
        max_depth
    };
    for _ in 0..rounds {
        // Continuation markers adopt their target's class before each round.
        let mut effective = class.clone();
        for &v in &alive {
            if let Some(t) = m.vertex(v).continuation {
                effective.insert(v, class[&t]);
            }
        }
        let mut intern: HashMap<String, u64> = HashMap::new();
        let mut next: BTreeMap<VertexId, u64> = BTreeMap::new();
        for &v in &alive {
            let key = if m.vertex(v).continuation.is_some() {
                format!("cont\u{2}{}", effective[&v])
            } else if m.out_edges(v).is_empty() {
                "leaf".to_string()
            } else {
                let mut parts: Vec<String> = m
                    .out_edges(v)
                    .iter()
                    .map(|&e| {
                        let edge = m.edge(e);
                        let cluster = match hued.cluster_of(e) {
                            Some(c) if edge.timed => format!("c{c}"),
                            _ => "-".to_string(),
                        };
                        format!(
                            "{}\u{1}{}\u{1}{}",
                            edge.label, cluster, effective[&edge.target]
                        )
                    })
                    .collect();
                parts.sort();
                format!(
                    "s{}\u{2}{}",
                    hued.stage_of(v).expect("situation has a stage"),
                    parts.join("\u{2}")
                )
            };
            let n = intern.len() as u64;
            let id = *intern.entry(key).or_insert(n);
            next.insert(v, id);
        }
        // Detect stabilization: same partition as before.
        let same = partition_signature(&class, &alive) == partition_signature(&next, &alive);
        class = next;
        if same {
            break;
        }
    }
    class
}

fn partition_signature(class: &BTreeMap<VertexId, u64>, order: &[VertexId]) -> Vec<usize> {
    let mut remap: BTreeMap<u64, usize> = BTreeMap::new();
    let mut sig = Vec::with_capacity(order.len());
    for v in order {
        let c = class[v];
        let n = remap.len();
        let id = *remap.entry(c).or_insert(n);
        sig.push(id);
    }
    sig
}

/// Groups the situations of a hued tree into positions: members share a stage
/// and have isomorphic colored subtrees.
pub fn position_partition(hued: &HuedTree, max_depth: usize) -> Vec<BTreeSet<VertexId>> {
    let class = subtree_classes(hued, max_depth);
    let m = hued.modified();
    let mut groups: BTreeMap<(usize, u64), BTreeSet<VertexId>> = BTreeMap::new();
    for v in m.situations() {
        let stage = hued.stage_of(v).expect("situation has a stage");
        groups.entry((stage, class[&v])).or_default().insert(v);
    }
    let mut cells: Vec<BTreeSet<VertexId>> = groups.into_values().collect();
    cells.sort_by_key(|c| *c.iter().next().unwrap());
    cells
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn code_ignores_child_order() {
        let a = ColoredTree {
            children: vec![vec![(1, "x".into(), 0), (2, "y".into(), 1)], vec![], vec![]],
            vertex_color: vec![0, 1, 2],
        };
        let b = ColoredTree {
            children: vec![vec![(2, "y".into(), 1), (1, "x".into(), 0)], vec![], vec![]],
            vertex_color: vec![0, 1, 2],
        };
        assert_eq!(colored_tree_code(&a, 0), colored_tree_code(&b, 0));
    }

    #[test]
    fn code_distinguishes_edge_labels() {
        let a = ColoredTree {
            children: vec![vec![(1, "x".into(), 0)], vec![]],
            vertex_color: vec![0, 0],
        };
        let b = ColoredTree {
            children: vec![vec![(1, "z".into(), 0)], vec![]],
            vertex_color: vec![0, 0],
        };
        assert_ne!(colored_tree_code(&a, 0), colored_tree_code(&b, 0));
    }

    #[test]
    fn code_distinguishes_vertex_colors() {
        let a = ColoredTree {
            children: vec![vec![(1, "x".into(), 0)], vec![]],
            vertex_color: vec![0, 1],
        };
        let b = ColoredTree {
            children: vec![vec![(1, "x".into(), 0)], vec![]],
            vertex_color: vec![0, 2],
        };
        assert_ne!(colored_tree_code(&a, 0), colored_tree_code(&b, 0));
    }
}
