//! Property tests: canonical colored-tree codes against brute-force
//! isomorphism search, flow-accounting cut checks against brute-force path
//! enumeration, intrinsic events against induced-subgraph enumeration, and
//! algebraic invariants of the conjugate machinery.

use std::collections::BTreeSet;

use proptest::prelude::*;

use rdceg::ci::{
    classify_set, is_intrinsic, CutKind, DagView, RolledCeg, RolledEdge, RolledVertex,
};
use rdceg::graph::iso::{colored_tree_code, ColoredTree};
use rdceg::inference::{log_marginal_likelihood, update_dirichlet, DirichletParams, StageCell};
use rdceg::smp::HoldingLaw;

// ---------------------------------------------------------------------------
// Colored rooted trees.

#[derive(Debug, Clone)]
struct TreeSpec {
    parents: Vec<usize>,     // parents[i] < i+1 is the parent of vertex i+1
    vertex_colors: Vec<u32>, // per vertex
    edge_labels: Vec<u8>,    // per non-root vertex
    edge_colors: Vec<u32>,   // per non-root vertex
}

fn tree_strategy(max_n: usize) -> impl Strategy<Value = TreeSpec> {
    (2..=max_n).prop_flat_map(|n| {
        let parents: Vec<BoxedStrategy<usize>> = (1..n).map(|i| (0..i).boxed()).collect();
        (
            parents,
            proptest::collection::vec(0u32..3, n),
            proptest::collection::vec(0u8..3, n - 1),
            proptest::collection::vec(0u32..2, n - 1),
        )
            .prop_map(
                |(parents, vertex_colors, edge_labels, edge_colors)| TreeSpec {
                    parents,
                    vertex_colors,
                    edge_labels,
                    edge_colors,
                },
            )
    })
}

fn build_tree(spec: &TreeSpec) -> ColoredTree {
    let n = spec.vertex_colors.len();
    let mut children: Vec<Vec<(usize, String, u32)>> = vec![Vec::new(); n];
    for i in 1..n {
        children[spec.parents[i - 1]].push((
            i,
            format!("L{}", spec.edge_labels[i - 1]),
            spec.edge_colors[i - 1],
        ));
    }
    ColoredTree {
        children,
        vertex_color: spec.vertex_colors.clone(),
    }
}

/// Brute-force isomorphism of colored rooted trees by trying all child
/// bijections.
fn brute_iso(a: &ColoredTree, va: usize, b: &ColoredTree, vb: usize) -> bool {
    if a.vertex_color[va] != b.vertex_color[vb] {
        return false;
    }
    let ca = &a.children[va];
    let cb = &b.children[vb];
    if ca.len() != cb.len() {
        return false;
    }
    if ca.is_empty() {
        return true;
    }
    // Try every assignment of ca to cb (n <= 7 children).
    fn assign(
        a: &ColoredTree,
        b: &ColoredTree,
        ca: &[(usize, String, u32)],
        cb: &[(usize, String, u32)],
        used: &mut Vec<bool>,
        idx: usize,
    ) -> bool {
        if idx == ca.len() {
            return true;
        }
        for j in 0..cb.len() {
            if used[j] || ca[idx].1 != cb[j].1 || ca[idx].2 != cb[j].2 {
                continue;
            }
            if brute_iso(a, ca[idx].0, b, cb[j].0) {
                used[j] = true;
                if assign(a, b, ca, cb, used, idx + 1) {
                    return true;
                }
                used[j] = false;
            }
        }
        false
    }
    let mut used = vec![false; cb.len()];
    assign(a, b, ca, cb, &mut used, 0)
}

/// Shuffles child order without changing the tree.
fn permuted(t: &ColoredTree, rotate: usize) -> ColoredTree {
    let mut out = t.clone();
    for ch in out.children.iter_mut() {
        if !ch.is_empty() {
            let r = rotate % ch.len();
            ch.rotate_left(r);
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    /// Canonical codes are invariant to child order.
    #[test]
    fn code_is_order_invariant(spec in tree_strategy(8), rot in 1usize..5) {
        let t = build_tree(&spec);
        let p = permuted(&t, rot);
        prop_assert_eq!(colored_tree_code(&t, 0), colored_tree_code(&p, 0));
    }

    /// Code equality decides isomorphism exactly (checked against brute
    /// force on random pairs).
    #[test]
    fn code_equality_iff_isomorphic(a in tree_strategy(8), b in tree_strategy(8)) {
        let ta = build_tree(&a);
        let tb = build_tree(&b);
        let codes_equal = colored_tree_code(&ta, 0) == colored_tree_code(&tb, 0);
        let iso = brute_iso(&ta, 0, &tb, 0);
        prop_assert_eq!(codes_equal, iso);
    }
}

// ---------------------------------------------------------------------------
// Random single-root single-sink DAGs.

#[derive(Debug, Clone)]
struct DagSpec {
    n: usize,
    extra_edges: Vec<(usize, usize)>,
    colors: Vec<Option<usize>>,
}

fn dag_strategy(max_n: usize) -> impl Strategy<Value = DagSpec> {
    (4..=max_n).prop_flat_map(|n| {
        let pairs = proptest::collection::vec((0..n - 1, 1..n), 0..(2 * n));
        let colors = proptest::collection::vec(proptest::option::weighted(0.4, 0usize..3), n);
        (pairs, colors).prop_map(move |(raw, colors)| {
            let extra_edges = raw.into_iter().filter(|&(s, t)| s < t).collect();
            DagSpec {
                n,
                extra_edges,
                colors,
            }
        })
    })
}

fn build_dag(spec: &DagSpec) -> DagView {
    let mut edges: BTreeSet<(usize, usize)> = BTreeSet::new();
    // Backbone keeps every vertex on a root-to-sink path.
    for i in 0..spec.n - 1 {
        edges.insert((i, i + 1));
    }
    for &(s, t) in &spec.extra_edges {
        edges.insert((s, t));
    }
    let mut colors = spec.colors.clone();
    colors[0] = None;
    colors[spec.n - 1] = None;
    DagView {
        n: spec.n,
        edges: edges.into_iter().collect(),
        root: 0,
        sink: spec.n - 1,
        color: colors,
        names: (0..spec.n).map(|i| format!("v{i}")).collect(),
    }
}

fn all_paths(view: &DagView) -> Vec<Vec<usize>> {
    let mut out_adj = vec![Vec::new(); view.n];
    for &(s, t) in &view.edges {
        out_adj[s].push(t);
    }
    let mut paths = Vec::new();
    let mut stack = vec![vec![view.root]];
    while let Some(p) = stack.pop() {
        let v = *p.last().unwrap();
        if v == view.sink {
            paths.push(p);
            continue;
        }
        for &t in &out_adj[v] {
            let mut q = p.clone();
            q.push(t);
            stack.push(q);
        }
    }
    paths
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    /// Flow-accounting classification agrees with brute-force enumeration.
    #[test]
    fn cut_classification_matches_brute_force(
        spec in dag_strategy(12),
        picks in proptest::collection::vec(0usize..12, 1..4),
    ) {
        let view = build_dag(&spec);
        let set: BTreeSet<usize> = picks.into_iter().map(|p| p % view.n).collect();
        let report = classify_set(&view, &set).unwrap();
        let paths = all_paths(&view);
        let exactly_once = paths
            .iter()
            .all(|p| p.iter().filter(|v| set.contains(v)).count() == 1);
        prop_assert_eq!(report.kind != CutKind::Neither, exactly_once);
        if exactly_once {
            // Color closure und the cut/fine-cut split.
            let inside: BTreeSet<usize> =
                set.iter().filter_map(|&v| view.color[v]).collect();
            let closed = (0..view.n).all(|v| {
                set.contains(&v)
                    || view.color[v].map(|c| !inside.contains(&c)).unwrap_or(true)
            });
            prop_assert_eq!(report.kind == CutKind::Cut, closed);
        }
    }

    /// Intrinsic checking agrees with induced-subgraph path enumeration.
    #[test]
    fn intrinsic_matches_brute_force(
        spec in dag_strategy(10),
        selector in proptest::collection::vec(proptest::bool::ANY, 1..40),
    ) {
        let view = build_dag(&spec);
        let paths = all_paths(&view);
        let event: Vec<Vec<usize>> = paths
            .iter()
            .enumerate()
            .filter(|(i, _)| selector[i % selector.len()])
            .map(|(_, p)| p.clone())
            .collect();
        prop_assume!(!event.is_empty());

        // Pack the view into a rolled graph for the public API.
        let rolled = RolledCeg {
            vertices: (0..view.n)
                .map(|i| RolledVertex {
                    index: i,
                    name: view.names[i].clone(),
                    position: None,
                    slice: 1,
                    stage: view.color[i],
                    is_sink: i == view.sink,
                })
                .collect(),
            edges: view
                .edges
                .iter()
                .map(|&(s, t)| RolledEdge {
                    source: s,
                    target: t,
                    label: format!("e{s}_{t}"),
                    timed: false,
                    cluster: None,
                })
                .collect(),
            root: view.root,
            sink: view.sink,
        };
        let event_names: Vec<Vec<String>> = event
            .iter()
            .map(|p| p.iter().map(|&v| view.names[v].clone()).collect())
            .collect();
        let report = is_intrinsic(&rolled, &event_names).unwrap();

        // Brute force: induced edges, enumerate induced paths.
        let mut induced_edges: BTreeSet<(usize, usize)> = BTreeSet::new();
        let mut induced_vertices: BTreeSet<usize> = BTreeSet::new();
        for p in &event {
            induced_vertices.extend(p.iter().copied());
            for w in p.windows(2) {
                induced_edges.insert((w[0], w[1]));
            }
        }
        let event_set: BTreeSet<Vec<usize>> = event.iter().cloned().collect();
        let mut ok = true;
        let mut stack = vec![vec![view.root]];
        while let Some(p) = stack.pop() {
            let v = *p.last().unwrap();
            if v == view.sink {
                if !event_set.contains(&p) {
                    ok = false;
                }
                continue;
            }
            for &(s, t) in &induced_edges {
                if s == v && induced_vertices.contains(&t) {
                    let mut q = p.clone();
                    q.push(t);
                    stack.push(q);
                }
            }
        }
        prop_assert_eq!(report.intrinsic, ok);
    }

    /// The score is invariant to cell order within 1e-12.
    #[test]
    fn score_order_invariance(
        alphas in proptest::collection::vec((0.2f64..3.0, 0.2f64..3.0), 2..8),
        counts in proptest::collection::vec((0u64..100, 0u64..100), 2..8),
        rotation in 1usize..5,
    ) {
        let k = alphas.len().min(counts.len());
        let cells: Vec<StageCell> = (0..k)
            .map(|i| StageCell {
                alpha: vec![alphas[i].0, alphas[i].1],
                counts: vec![counts[i].0, counts[i].1],
            })
            .collect();
        let forward = log_marginal_likelihood(&cells, &[]).unwrap();
        let mut rotated = cells.clone();
        rotated.rotate_left(rotation % k);
        let backward = log_marginal_likelihood(&rotated, &[]).unwrap();
        prop_assert!((forward - backward).abs() < 1e-12);
    }

    /// Conjugate updates accumulate additively over data batches.
    #[test]
    fn dirichlet_batching(
        alpha in proptest::collection::vec(0.1f64..5.0, 2..5),
        d1 in proptest::collection::vec(0u64..50, 2..5),
        d2 in proptest::collection::vec(0u64..50, 2..5),
    ) {
        let k = alpha.len().min(d1.len()).min(d2.len());
        let prior = DirichletParams::new(alpha[..k].to_vec()).unwrap();
        let a = update_dirichlet(&update_dirichlet(&prior, &d1[..k]).unwrap(), &d2[..k]).unwrap();
        let joint: Vec<u64> = d1[..k].iter().zip(&d2[..k]).map(|(x, y)| x + y).collect();
        let b = update_dirichlet(&prior, &joint).unwrap();
        prop_assert_eq!(a.alpha_star(), b.alpha_star());
    }

    /// Compound CDF is monotone and the quantile inverts it.
    #[test]
    fn compound_cdf_monotone_and_invertible(
        zeta in 0.5f64..5.0,
        beta in 0.5f64..50.0,
        kappa in 0.6f64..2.5,
        p in 0.01f64..0.99,
    ) {
        let law = HoldingLaw::compound(zeta, beta, kappa).unwrap();
        let q = law.quantile(p);
        prop_assert!((law.cdf(q) - p).abs() < 1e-9);
        prop_assert!(law.cdf(q * 1.01 + 1e-9) >= law.cdf(q));
    }
}
