//! Greedy agglomerative search over stagings and clusterings.
//!
//! Situations (and, separately, timed edges) start as singleton cells.
//! Within each hyperstage / hypercluster pool, the pair whose merge yields
//! the largest strictly positive gain in log marginal likelihood is merged,
//! until no merge gains. Hyperparameters of a merged cell are the sums of its
//! members' (preserving total phantom mass), so every merge delta is an exact
//! local computation: only the two cells touched enter the delta.
//!
//! Ties break on the lexicographically smallest pair of minimum member ids,
//! and deltas are cached and invalidated only for cells touched by the last
//! merge, so a fixed dataset and configuration always reproduces the same
//! merge trace bit for bit.

use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeMap, BTreeSet};
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::config::{CensoringMode, Hypercluster, Hyperstage, SearchConfig};
use crate::error::{RdcegError, Result};
use crate::graph::tree::modify_tree;
use crate::graph::tree::{EdgeId, EventTree, VertexId};
use crate::graph::{
    build_rdceg, positions_from_staging, Clustering, HuedTree, ModifiedTree, Rdceg, Staging,
};
use crate::inference::{
    phantom_priors, sufficient_stats, ClusterCell, DirichletParams, IgParams, PathObservation,
    ScoredModel, StageCell, SufficientStats,
};

/// A model specification: the event-tree template, its critical terminating
/// leaves, and the search constraints.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelSpec {
    #[serde(default = "schema_model")]
    pub schema: String,
    pub tree: EventTree,
    pub critical: Vec<String>,
    pub search: SearchConfig,
}

fn schema_model() -> String {
    "rdceg.model-spec/1".to_string()
}

impl ModelSpec {
    pub fn critical_ids(&self) -> Result<BTreeSet<VertexId>> {
        self.critical
            .iter()
            .map(|name| {
                self.tree.vertex_by_name(name).ok_or_else(|| {
                    RdcegError::Config(format!("critical leaf '{name}' not found in tree"))
                })
            })
            .collect()
    }

    pub fn modified(&self) -> Result<ModifiedTree> {
        modify_tree(&self.tree, &self.critical_ids()?, None)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MergeKind {
    Stage,
    Cluster,
}

/// One accepted merge, with the score gain it contributed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MergeStep {
    pub kind: MergeKind,
    pub left: Vec<u32>,
    pub right: Vec<u32>,
    pub delta: f64,
}

/// Outcome of the greedy search.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchResult {
    pub staging: Staging,
    pub clustering: Clustering,
    pub log_marginal_likelihood: f64,
    pub trace: Vec<MergeStep>,
}

/// A fully fitted model: MAP partitions, posteriors, the RDCEG and the score.
#[derive(Debug, Clone)]
pub struct FittedModel {
    pub modified: ModifiedTree,
    pub hued: HuedTree,
    pub rdceg: Rdceg,
    pub result: SearchResult,
    /// Posterior per stage cell, aligned with the stage's sorted labels.
    pub stage_posteriors: Vec<DirichletParams>,
    /// Posterior per cluster cell.
    pub cluster_posteriors: Vec<IgParams>,
    pub scored: ScoredModel,
    /// Per-situation Dirichlet atoms (sorted-label aligned), for
    /// leave-one-out diagnostics and score decompositions.
    pub stage_atoms: BTreeMap<VertexId, StageCell>,
    /// Per-edge Inverse-Gamma atoms.
    pub cluster_atoms: BTreeMap<EdgeId, ClusterCell>,
    /// Observed mean holding time per timed edge (empty-data edges absent).
    pub edge_observed_mean: BTreeMap<EdgeId, f64>,
}

// ---------------------------------------------------------------------------
// Aligned per-situation and per-edge summaries.

/// Per-situation Dirichlet data aligned to the situation's sorted labels.
fn stage_atoms(
    m: &ModifiedTree,
    alpha: &BTreeMap<VertexId, Vec<f64>>,
    stats: &SufficientStats,
) -> BTreeMap<VertexId, StageCell> {
    let mut out = BTreeMap::new();
    for v in m.situations() {
        let mut edges: Vec<EdgeId> = m.out_edges(v);
        let base_order = edges.clone();
        edges.sort_by_key(|&e| m.edge(e).label.clone());
        let base_alpha = &alpha[&v];
        let cell = StageCell {
            alpha: edges
                .iter()
                .map(|e| {
                    let idx = base_order.iter().position(|x| x == e).unwrap();
                    base_alpha[idx]
                })
                .collect(),
            counts: edges.iter().map(|&e| stats.count(e)).collect(),
        };
        out.insert(v, cell);
    }
    out
}

fn cluster_atoms(
    m: &ModifiedTree,
    ig: &BTreeMap<EdgeId, (f64, f64)>,
    kappa_of: &BTreeMap<EdgeId, f64>,
    stats: &SufficientStats,
    censoring: CensoringMode,
) -> BTreeMap<EdgeId, ClusterCell> {
    // Censored sojourns contribute survivor mass to every timed out-edge of
    // the situation occupied at study end (survival-likelihood mode only).
    let mut censored_mass: BTreeMap<EdgeId, f64> = BTreeMap::new();
    if censoring == CensoringMode::SurvivalMass {
        for (&v, holds) in &stats.censored {
            for e in m.out_edges(v) {
                if m.edge(e).timed {
                    let kappa = kappa_of[&e];
                    let mass: f64 = holds.iter().map(|&h| h.powf(kappa)).sum();
                    *censored_mass.entry(e).or_insert(0.0) += mass;
                }
            }
        }
    }
    let mut out = BTreeMap::new();
    for e in m.timed_edges() {
        let (zeta, beta) = ig[&e];
        let kappa = kappa_of[&e];
        let holds = stats.holds_on(e);
        out.insert(
            e,
            ClusterCell {
                zeta,
                beta,
                kappa,
                n: holds.len() as u64,
                sum_h_kappa: holds.iter().map(|&h| h.powf(kappa)).sum(),
                censored_mass: censored_mass.get(&e).copied().unwrap_or(0.0),
            },
        );
    }
    out
}

fn merge_stage_cells(a: &StageCell, b: &StageCell) -> StageCell {
    StageCell {
        alpha: a.alpha.iter().zip(&b.alpha).map(|(x, y)| x + y).collect(),
        counts: a.counts.iter().zip(&b.counts).map(|(x, y)| x + y).collect(),
    }
}

fn merge_cluster_cells(a: &ClusterCell, b: &ClusterCell) -> ClusterCell {
    ClusterCell {
        zeta: a.zeta + b.zeta,
        beta: a.beta + b.beta,
        kappa: a.kappa,
        n: a.n + b.n,
        sum_h_kappa: a.sum_h_kappa + b.sum_h_kappa,
        censored_mass: a.censored_mass + b.censored_mass,
    }
}

// ---------------------------------------------------------------------------
// Generic greedy agglomeration.

/// One agglomeration cell: members, payload, hyper-pool index.
type Cell<K, C> = Option<(BTreeSet<K>, C, usize)>;

/// Accepted merges: (left members, right members, score gain).
type RawTrace<K> = Vec<(BTreeSet<K>, BTreeSet<K>, f64)>;

struct Agglomerator<K: Ord + Copy, C: Clone> {
    cells: Vec<Cell<K, C>>,
    merge: fn(&C, &C) -> C,
    term: fn(&C) -> Result<f64>,
}

impl<K: Ord + Copy, C: Clone> Agglomerator<K, C> {
    fn run(&mut self) -> Result<RawTrace<K>> {
        let n = self.cells.len();
        let merge = self.merge;
        let term = self.term;
        let mut deltas: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        let pair_delta = move |cells: &[Cell<K, C>], i: usize, j: usize| -> Result<Option<f64>> {
            let (Some(a), Some(b)) = (&cells[i], &cells[j]) else {
                return Ok(None);
            };
            if a.2 != b.2 {
                return Ok(None);
            }
            let merged = merge(&a.1, &b.1);
            Ok(Some(term(&merged)? - term(&a.1)? - term(&b.1)?))
        };
        for i in 0..n {
            for j in (i + 1)..n {
                if let Some(d) = pair_delta(&self.cells, i, j)? {
                    deltas.insert((i, j), d);
                }
            }
        }

        let mut trace = Vec::new();
        loop {
            // Highest strictly positive delta; ties broken by the smallest
            // (min-member, min-member) pair.
            let mut best: Option<((usize, usize), f64)> = None;
            for (&(i, j), &d) in &deltas {
                if d <= 0.0 {
                    continue;
                }
                let better = match best {
                    None => true,
                    Some((bk, bd)) => {
                        d > bd || (d == bd && self.pair_key(i, j) < self.pair_key(bk.0, bk.1))
                    }
                };
                if better {
                    best = Some(((i, j), d));
                }
            }
            let Some(((i, j), delta)) = best else { break };

            let (a_members, a_payload, pool) = self.cells[i].take().unwrap();
            let (b_members, b_payload, _) = self.cells[j].take().unwrap();
            trace.push((a_members.clone(), b_members.clone(), delta));
            let merged_payload = (self.merge)(&a_payload, &b_payload);
            let mut members = a_members;
            members.extend(b_members);
            self.cells[i] = Some((members, merged_payload, pool));

            // Only deltas touching i or j are stale.
            deltas.retain(|&(x, y), _| x != i && y != i && x != j && y != j);
            for k in 0..n {
                if k == i {
                    continue;
                }
                let (lo, hi) = if k < i { (k, i) } else { (i, k) };
                if let Some(d) = pair_delta(&self.cells, lo, hi)? {
                    deltas.insert((lo, hi), d);
                }
            }
        }
        Ok(trace)
    }

    fn pair_key(&self, i: usize, j: usize) -> (K, K) {
        let a = *self.cells[i].as_ref().unwrap().0.iter().next().unwrap();
        let b = *self.cells[j].as_ref().unwrap().0.iter().next().unwrap();
        if a < b {
            (a, b)
        } else {
            (b, a)
        }
    }
}

// ---------------------------------------------------------------------------
// Public search operations.

/// Greedy AHC over situations, constrained by the hyperstage.
pub fn ahc_stages(
    m: &ModifiedTree,
    atoms: &BTreeMap<VertexId, StageCell>,
    hyperstage: &Hyperstage,
) -> Result<(Staging, Vec<MergeStep>)> {
    let situations = m.situations();
    // Pool index per situation; situations outside every set are frozen as
    // their own pool.
    let mut cells = Vec::new();
    for (idx, &v) in situations.iter().enumerate() {
        let pool = match hyperstage.set_of(v) {
            Some(p) => p,
            None => hyperstage.sets.len() + idx,
        };
        cells.push(Some((BTreeSet::from([v]), atoms[&v].clone(), pool)));
    }
    let mut agg = Agglomerator {
        cells,
        merge: merge_stage_cells,
        term: StageCell::log_term,
    };
    let raw_trace = agg.run()?;
    let cells: Vec<BTreeSet<VertexId>> = agg
        .cells
        .into_iter()
        .flatten()
        .map(|(members, _, _)| members)
        .collect();
    let staging = Staging::new(m, cells)?;
    let trace = raw_trace
        .into_iter()
        .map(|(a, b, delta)| MergeStep {
            kind: MergeKind::Stage,
            left: a.iter().map(|v| v.0).collect(),
            right: b.iter().map(|v| v.0).collect(),
            delta,
        })
        .collect();
    Ok((staging, trace))
}

/// Greedy AHC over timed edges, constrained by the hypercluster.
pub fn ahc_clusters(
    m: &ModifiedTree,
    atoms: &BTreeMap<EdgeId, ClusterCell>,
    hypercluster: &Hypercluster,
) -> Result<(Clustering, Vec<MergeStep>)> {
    let edges = m.timed_edges();
    let mut cells = Vec::new();
    for (idx, &e) in edges.iter().enumerate() {
        let pool = match hypercluster.set_of(e) {
            Some(p) => p,
            None => hypercluster.sets.len() + idx,
        };
        cells.push(Some((BTreeSet::from([e]), atoms[&e].clone(), pool)));
    }
    let mut agg = Agglomerator {
        cells,
        merge: merge_cluster_cells,
        term: ClusterCell::log_term,
    };
    let raw_trace = agg.run()?;
    let final_cells: Vec<(BTreeSet<EdgeId>, f64)> = agg
        .cells
        .into_iter()
        .flatten()
        .map(|(members, payload, _)| (members, payload.kappa))
        .collect();
    let clustering = Clustering::new(m, final_cells)?;
    let trace = raw_trace
        .into_iter()
        .map(|(a, b, delta)| MergeStep {
            kind: MergeKind::Cluster,
            left: a.iter().map(|e| e.0).collect(),
            right: b.iter().map(|e| e.0).collect(),
            delta,
        })
        .collect();
    Ok((clustering, trace))
}

/// Structural fingerprint of a modified tree, used to guard model
/// comparisons.
pub fn tree_fingerprint(m: &ModifiedTree) -> u64 {
    let mut h = DefaultHasher::new();
    for v in m.base().vertices() {
        if !m.is_alive(v.id) {
            continue;
        }
        v.name.hash(&mut h);
        if let Some(t) = v.continuation {
            m.vertex(t).name.hash(&mut h);
        }
        for e in m.out_edges(v.id) {
            let edge = m.edge(e);
            edge.label.hash(&mut h);
            edge.timed.hash(&mut h);
            m.vertex(edge.target).name.hash(&mut h);
        }
    }
    for c in m.critical() {
        m.vertex(*c).name.hash(&mut h);
    }
    h.finish()
}

/// Assembles the scored-cell view of a staging/clustering pair.
pub fn assemble_scored(
    m: &ModifiedTree,
    staging: &Staging,
    clustering: &Clustering,
    stage_atoms: &BTreeMap<VertexId, StageCell>,
    cluster_atoms: &BTreeMap<EdgeId, ClusterCell>,
) -> ScoredModel {
    let mut stages = BTreeMap::new();
    for cell in staging.cells() {
        let mut iter = cell.iter();
        let first = *iter.next().unwrap();
        let mut pooled = stage_atoms[&first].clone();
        for &v in iter {
            pooled = merge_stage_cells(&pooled, &stage_atoms[&v]);
        }
        stages.insert(cell.iter().map(|v| v.0).collect::<Vec<u32>>(), pooled);
    }
    let mut clusters = BTreeMap::new();
    for cell in clustering.cells() {
        let mut iter = cell.iter();
        let first = *iter.next().unwrap();
        let mut pooled = cluster_atoms[&first].clone();
        for &e in iter {
            pooled = merge_cluster_cells(&pooled, &cluster_atoms[&e]);
        }
        clusters.insert(cell.iter().map(|e| e.0).collect::<Vec<u32>>(), pooled);
    }
    ScoredModel {
        tree_fingerprint: tree_fingerprint(m),
        stages,
        clusters,
    }
}

/// Runs the full pipeline: prune, aggregate, search both partitions, derive
/// positions and build the MAP RDCEG with posteriors attached.
pub fn select_model(observations: &[PathObservation], spec: &ModelSpec) -> Result<FittedModel> {
    let m = spec.modified()?;
    let stats = sufficient_stats(&m, observations)?;
    fit_with_stats(&m, &stats, spec)
}

/// Scores a hypothesized staging/clustering pair on the data without
/// searching: posteriors, score and the graph for exactly that partition.
/// Used to compare fixed competing structures by Bayes factor.
pub fn fit_fixed_partition(
    m: &ModifiedTree,
    stats: &SufficientStats,
    spec: &ModelSpec,
    staging: &Staging,
    clustering: &Clustering,
) -> Result<FittedModel> {
    let hypercluster = Hypercluster::resolve(&spec.search.hypercluster, m)?;
    let mut kappa_of = hypercluster.kappa_of(m);
    // The fixed clustering's shapes take precedence over the search config.
    for (i, cell) in clustering.cells().iter().enumerate() {
        for &e in cell {
            kappa_of.insert(e, clustering.kappa(i));
        }
    }
    let all_holds: Vec<f64> = stats.holds.values().flatten().copied().collect();
    let tau = spec.search.prior.tau.resolve(&all_holds);
    let alpha_total = spec.search.prior.resolve_alpha(m);
    let phantom = phantom_priors(m, alpha_total, tau, &kappa_of)?;
    let satoms = stage_atoms(m, &phantom.alpha, stats);
    let catoms = cluster_atoms(
        m,
        &phantom.ig,
        &kappa_of,
        stats,
        spec.search.prior.censoring,
    );

    let scored = assemble_scored(m, staging, clustering, &satoms, &catoms);
    let log_score = scored.log_score()?;
    let hued = HuedTree::new(m.clone(), staging.clone(), clustering.clone())?;
    let positions = positions_from_staging(&hued, spec.search.max_depth);
    let rdceg = build_rdceg(&hued, &positions)?;
    let stage_posteriors: Vec<DirichletParams> = staging
        .cells()
        .iter()
        .map(|cell| {
            let pooled = &scored.stages[&cell.iter().map(|v| v.0).collect::<Vec<u32>>()];
            DirichletParams {
                alpha: pooled.alpha.clone(),
                counts: pooled.counts.clone(),
            }
        })
        .collect();
    let cluster_posteriors: Vec<IgParams> = clustering
        .cells()
        .iter()
        .map(|cell| {
            let pooled = &scored.clusters[&cell.iter().map(|e| e.0).collect::<Vec<u32>>()];
            IgParams {
                zeta: pooled.zeta,
                beta: pooled.beta,
                kappa: pooled.kappa,
                n: pooled.n,
                sum_h_kappa: pooled.sum_h_kappa,
                censored_mass: pooled.censored_mass,
            }
        })
        .collect();
    Ok(FittedModel {
        modified: m.clone(),
        hued,
        rdceg,
        result: SearchResult {
            staging: staging.clone(),
            clustering: clustering.clone(),
            log_marginal_likelihood: log_score,
            trace: Vec::new(),
        },
        stage_posteriors,
        cluster_posteriors,
        scored,
        stage_atoms: satoms,
        cluster_atoms: catoms,
        edge_observed_mean: stats
            .holds
            .iter()
            .filter(|(_, hs)| !hs.is_empty())
            .map(|(e, hs)| (*e, hs.iter().sum::<f64>() / hs.len() as f64))
            .collect(),
    })
}

/// Same as [`select_model`] but starting from pre-aggregated statistics.
pub fn fit_with_stats(
    m: &ModifiedTree,
    stats: &SufficientStats,
    spec: &ModelSpec,
) -> Result<FittedModel> {
    let hyperstage = Hyperstage::resolve(&spec.search.hyperstage, m)?;
    let hypercluster = Hypercluster::resolve(&spec.search.hypercluster, m)?;
    let kappa_of = hypercluster.kappa_of(m);

    let all_holds: Vec<f64> = stats.holds.values().flatten().copied().collect();
    let tau = spec.search.prior.tau.resolve(&all_holds);
    let alpha_total = spec.search.prior.resolve_alpha(m);
    let phantom = phantom_priors(m, alpha_total, tau, &kappa_of)?;

    let satoms = stage_atoms(m, &phantom.alpha, stats);
    let catoms = cluster_atoms(
        m,
        &phantom.ig,
        &kappa_of,
        stats,
        spec.search.prior.censoring,
    );

    let (staging, mut trace) = ahc_stages(m, &satoms, &hyperstage)?;
    let (clustering, cluster_trace) = ahc_clusters(m, &catoms, &hypercluster)?;
    trace.extend(cluster_trace);

    let scored = assemble_scored(m, &staging, &clustering, &satoms, &catoms);
    let log_score = scored.log_score()?;

    let hued = HuedTree::new(m.clone(), staging.clone(), clustering.clone())?;
    let positions = positions_from_staging(&hued, spec.search.max_depth);
    let rdceg = build_rdceg(&hued, &positions)?;

    let stage_posteriors: Vec<DirichletParams> = staging
        .cells()
        .iter()
        .map(|cell| {
            let pooled = &scored.stages[&cell.iter().map(|v| v.0).collect::<Vec<u32>>()];
            DirichletParams {
                alpha: pooled.alpha.clone(),
                counts: pooled.counts.clone(),
            }
        })
        .collect();
    let cluster_posteriors: Vec<IgParams> = clustering
        .cells()
        .iter()
        .map(|cell| {
            let pooled = &scored.clusters[&cell.iter().map(|e| e.0).collect::<Vec<u32>>()];
            IgParams {
                zeta: pooled.zeta,
                beta: pooled.beta,
                kappa: pooled.kappa,
                n: pooled.n,
                sum_h_kappa: pooled.sum_h_kappa,
                censored_mass: pooled.censored_mass,
            }
        })
        .collect();

    Ok(FittedModel {
        modified: m.clone(),
        hued,
        rdceg,
        result: SearchResult {
            staging,
            clustering,
            log_marginal_likelihood: log_score,
            trace,
        },
        stage_posteriors,
        cluster_posteriors,
        scored,
        stage_atoms: satoms,
        cluster_atoms: catoms,
        edge_observed_mean: stats
            .holds
            .iter()
            .filter(|(_, hs)| !hs.is_empty())
            .map(|(e, hs)| (*e, hs.iter().sum::<f64>() / hs.len() as f64))
            .collect(),
    })
}

impl FittedModel {
    /// Posterior-mean transition probability of each RDCEG edge, keyed by
    /// edge id, derived from the source position's stage posterior.
    pub fn edge_probabilities(&self) -> BTreeMap<usize, f64> {
        let staging = &self.result.staging;
        let m = &self.modified;
        let mut out = BTreeMap::new();
        for e in self.rdceg.edges() {
            let rep = self.rdceg.position(e.source).situations[0];
            let stage = staging.cell_of(rep).expect("position has a stage");
            let mean = self.stage_posteriors[stage].posterior_mean();
            let labels = m.sorted_labels(rep);
            let idx = labels
                .iter()
                .position(|l| *l == e.label)
                .expect("label aligned");
            out.insert(e.id, mean[idx]);
        }
        out
    }

    /// Posterior compound holding law of each timed RDCEG edge.
    pub fn edge_posterior_laws(&self) -> BTreeMap<usize, IgParams> {
        let mut out = BTreeMap::new();
        for e in self.rdceg.edges() {
            if let Some(c) = e.cluster {
                out.insert(e.id, self.cluster_posteriors[c].clone());
            }
        }
        out
    }
}


/// Self-contained snapshot of a fitted model, suitable for JSON export and
/// for rebuilding the graph and its attached numbers without the data.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitBundle {
    #[serde(default = "schema_fit")]
    pub schema: String,
    pub spec: ModelSpec,
    pub staging: Vec<Vec<String>>,
    pub clustering: Vec<FitClusterEntry>,
    pub stage_posteriors: Vec<DirichletParams>,
    pub cluster_posteriors: Vec<IgParams>,
    pub log_marginal_likelihood: f64,
    pub trace: Vec<MergeStep>,
    /// Position names of the MAP RDCEG, for reference.
    pub positions: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitClusterEntry {
    pub edges: Vec<(String, String)>,
    pub kappa: f64,
}

fn schema_fit() -> String {
    "rdceg.fit/1".into()
}

impl FitBundle {
    pub fn from_fitted(spec: &ModelSpec, fit: &FittedModel) -> FitBundle {
        let m = &fit.modified;
        FitBundle {
            schema: schema_fit(),
            spec: spec.clone(),
            staging: fit
                .result
                .staging
                .cells()
                .iter()
                .map(|cell| cell.iter().map(|&v| m.vertex(v).name.clone()).collect())
                .collect(),
            clustering: fit
                .result
                .clustering
                .cells()
                .iter()
                .enumerate()
                .map(|(i, cell)| FitClusterEntry {
                    edges: cell
                        .iter()
                        .map(|&e| {
                            let edge = m.edge(e);
                            (m.vertex(edge.source).name.clone(), edge.label.clone())
                        })
                        .collect(),
                    kappa: fit.result.clustering.kappa(i),
                })
                .collect(),
            stage_posteriors: fit.stage_posteriors.clone(),
            cluster_posteriors: fit.cluster_posteriors.clone(),
            log_marginal_likelihood: fit.result.log_marginal_likelihood,
            trace: fit.result.trace.clone(),
            positions: fit
                .rdceg
                .positions()
                .iter()
                .map(|p| p.name.clone())
                .collect(),
        }
    }

    /// Rebuilds the MAP graph and attaches posterior-mean probabilities and
    /// compound posterior holding laws to its edges.
    pub fn restore(&self) -> Result<(ModifiedTree, HuedTree, Rdceg, crate::smp::EdgeNumbers)> {
        let m = self.spec.modified()?;
        let mut cells = Vec::new();
        for cell in &self.staging {
            let mut set = BTreeSet::new();
            for name in cell {
                let v = self.spec.tree.vertex_by_name(name).ok_or_else(|| {
                    RdcegError::Config(format!("fit bundle references unknown situation '{name}'"))
                })?;
                set.insert(v);
            }
            cells.push(set);
        }
        let staging = Staging::new(&m, cells)?;
        let mut ccells = Vec::new();
        for entry in &self.clustering {
            let mut set = BTreeSet::new();
            for (source, label) in &entry.edges {
                let v = self.spec.tree.vertex_by_name(source).ok_or_else(|| {
                    RdcegError::Config(format!(
                        "fit bundle references unknown situation '{source}'"
                    ))
                })?;
                let e = self
                    .spec
                    .tree
                    .edge_by_source_label(v, label)
                    .ok_or_else(|| {
                        RdcegError::Config(format!(
                            "fit bundle references unknown edge '{source}' -> '{label}'"
                        ))
                    })?;
                set.insert(e);
            }
            ccells.push((set, entry.kappa));
        }
        let clustering = Clustering::new(&m, ccells)?;
        if self.stage_posteriors.len() != staging.n_cells()
            || self.cluster_posteriors.len() != clustering.n_cells()
        {
            return Err(RdcegError::Config(
                "fit bundle posteriors do not match its partitions".into(),
            ));
        }
        // Bundle cells are serialized in stored (min-id) order, matching the
        // posterior tables; rebuild preserves that order.
        let hued = HuedTree::new(m.clone(), staging.clone(), clustering.clone())?;
        let positions = positions_from_staging(&hued, self.spec.search.max_depth);
        let rdceg = build_rdceg(&hued, &positions)?;
        let mut numbers = crate::smp::EdgeNumbers::default();
        for e in rdceg.edges() {
            let rep = rdceg.position(e.source).situations[0];
            let stage = staging.cell_of(rep).expect("staged");
            let mean = self.stage_posteriors[stage].posterior_mean();
            let labels = m.sorted_labels(rep);
            let idx = labels.iter().position(|l| *l == e.label).ok_or_else(|| {
                RdcegError::Config(format!("stage posterior missing label '{}'", e.label))
            })?;
            numbers.prob.insert(e.id, mean[idx]);
            if e.timed {
                let c = e.cluster.ok_or_else(|| {
                    RdcegError::Config(format!("timed edge '{}' has no cluster", e.label))
                })?;
                let post = &self.cluster_posteriors[c];
                numbers.law.insert(
                    e.id,
                    crate::smp::HoldingLaw::compound(
                        post.zeta_star(),
                        post.beta_star(),
                        post.kappa,
                    )?,
                );
            }
        }
        Ok((m, hued, rdceg, numbers))
    }
}
