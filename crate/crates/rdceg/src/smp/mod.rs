//! Semi-Markov representation and time-domain queries.

pub mod law;
pub mod passage;
pub mod process;

pub use law::{
    compound_cdf, compound_density, compound_moments, weibull_density, ConvolutionLaw, GridDensity,
    HoldingLaw, Moment,
};
pub use passage::{first_passage, FirstPassageSummary};
pub use process::{condense_smp, to_smp, EdgeNumbers, Smp, SmpState, UntimedPolicy};

#[cfg(test)]
mod tests {
    use std::collections::{BTreeMap, BTreeSet};

    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    use super::*;
    use crate::graph::tree::TreeBuilder;
    use crate::graph::{
        build_rdceg, modify_tree, positions_from_staging, Clustering, HuedTree, Rdceg, Staging,
    };

    /// Simple three-state chain: s0 --a[timed]--> s1 --b[timed]--> leaf.
    fn chain_rdceg() -> (Rdceg, EdgeNumbers) {
        let mut b = TreeBuilder::new();
        let root = b.root();
        let s1 = b.child(root, "a", true);
        b.child(s1, "b", true);
        let t = b.finish().unwrap();
        let critical: BTreeSet<_> = t.leaves().collect();
        let m = modify_tree(&t, &critical, None).unwrap();
        let staging = Staging::singletons(&m);
        let kappa: BTreeMap<_, _> = m.timed_edges().into_iter().map(|e| (e, 1.0)).collect();
        let clustering = Clustering::singletons(&m, &kappa).unwrap();
        let hued = HuedTree::new(m, staging, clustering).unwrap();
        let cells = positions_from_staging(&hued, 0);
        let r = build_rdceg(&hued, &cells).unwrap();
        let mut numbers = EdgeNumbers::default();
        for e in r.edges() {
            numbers.prob.insert(e.id, 1.0);
            numbers
                .law
                .insert(e.id, HoldingLaw::fixed_weibull(1.0, 1.0).unwrap());
        }
        (r, numbers)
    }

    /// Smoking variant (b): parallel service edges collapse to one mixture
    /// transition.
    fn parallel_rdceg(p_services: f64) -> (Rdceg, EdgeNumbers) {
        let mut b = TreeBuilder::new();
        let root = b.root();
        let s1 = b.child(root, "services", false);
        let s2 = b.child(root, "no services", false);
        b.child(s1, "quit", true);
        b.continuation(s1, "no quit", true, root);
        b.child(s2, "quit", true);
        b.continuation(s2, "no quit", true, root);
        let t = b.finish().unwrap();
        let quit1 = t
            .edge_by_source_label(t.vertex_by_name("s1").unwrap(), "quit")
            .unwrap();
        let quit2 = t
            .edge_by_source_label(t.vertex_by_name("s2").unwrap(), "quit")
            .unwrap();
        let critical: BTreeSet<_> = [t.edge(quit1).target, t.edge(quit2).target]
            .into_iter()
            .collect();
        let m = modify_tree(&t, &critical, None).unwrap();
        let s1 = t.vertex_by_name("s1").unwrap();
        let s2 = t.vertex_by_name("s2").unwrap();
        let staging = Staging::new(
            &m,
            vec![BTreeSet::from([m.root()]), BTreeSet::from([s1, s2])],
        )
        .unwrap();
        let nq1 = t.edge_by_source_label(s1, "no quit").unwrap();
        let nq2 = t.edge_by_source_label(s2, "no quit").unwrap();
        let clustering = Clustering::new(
            &m,
            vec![
                (BTreeSet::from([quit1, quit2]), 1.0),
                (BTreeSet::from([nq1, nq2]), 1.0),
            ],
        )
        .unwrap();
        let hued = HuedTree::new(m, staging, clustering).unwrap();
        let cells = positions_from_staging(&hued, 0);
        let r = build_rdceg(&hued, &cells).unwrap();
        let mut numbers = EdgeNumbers::default();
        for e in r.edges() {
            match e.label.as_str() {
                "services" => {
                    numbers.prob.insert(e.id, p_services);
                }
                "no services" => {
                    numbers.prob.insert(e.id, 1.0 - p_services);
                }
                "quit" => {
                    numbers.prob.insert(e.id, 0.3);
                    numbers
                        .law
                        .insert(e.id, HoldingLaw::fixed_weibull(2.0, 1.0).unwrap());
                }
                _ => {
                    numbers.prob.insert(e.id, 0.7);
                    numbers
                        .law
                        .insert(e.id, HoldingLaw::fixed_weibull(5.0, 1.0).unwrap());
                }
            }
        }
        (r, numbers)
    }

    #[test]
    fn simple_all_timed_keeps_probabilities() {
        let (r, numbers) = chain_rdceg();
        let smp = to_smp(&r, &numbers, &UntimedPolicy::Renormalize).unwrap();
        assert_eq!(smp.n_states(), 3);
        smp.check_rows().unwrap();
        let s0 = smp.state_by_name("w0").unwrap();
        let s1 = smp.state_by_name("w1").unwrap();
        assert_eq!(smp.trans[s0][s1], 1.0);
    }

    #[test]
    fn parallel_edges_become_weighted_mixture() {
        let (r, numbers) = parallel_rdceg(0.6);
        let smp = to_smp(&r, &numbers, &UntimedPolicy::Renormalize).unwrap();
        smp.check_rows().unwrap();
        // Root has no timed out-edge, so the two untimed service routes are
        // kept instantaneous; they both land in the merged attempt position.
        let w0 = smp.state_by_name("w0").unwrap();
        let w1 = smp.state_by_name("w1").unwrap();
        assert!((smp.trans[w0][w1] - 1.0).abs() < 1e-12);
        match &smp.laws[w0][w1] {
            Some(HoldingLaw::Mixture { weights, .. }) => {
                assert!((weights[0] - 0.6).abs() < 1e-12);
                assert!((weights[1] - 0.4).abs() < 1e-12);
            }
            other => panic!("expected mixture, got {other:?}"),
        }
    }

    #[test]
    fn renewal_kernel_factorizes() {
        let (r, numbers) = parallel_rdceg(0.5);
        let smp = to_smp(&r, &numbers, &UntimedPolicy::Renormalize).unwrap();
        let w1 = smp.state_by_name("w1").unwrap();
        let sink = smp.state_by_name("w_inf").unwrap();
        // Q(0) = 0 for continuous laws; Q(∞) = p.
        assert_eq!(smp.renewal_kernel(w1, sink, 0.0).unwrap(), 0.0);
        let q_large = smp.renewal_kernel(w1, sink, 1e9).unwrap();
        assert!((q_large - smp.trans[w1][sink]).abs() < 1e-9);
        // Row sums of Q(t) are <= 1 and monotone in t.
        let mut prev = 0.0;
        for step in 1..=10 {
            let t = step as f64;
            let row: f64 = (0..smp.n_states())
                .map(|j| smp.renewal_kernel(w1, j, t).unwrap())
                .sum();
            assert!(row <= 1.0 + 1e-12);
            assert!(row >= prev - 1e-12);
            prev = row;
        }
        assert!(smp.renewal_kernel(99, 0, 1.0).is_err());
    }

    #[test]
    fn condense_identity_when_keeping_all() {
        let (r, numbers) = chain_rdceg();
        let smp = to_smp(&r, &numbers, &UntimedPolicy::Renormalize).unwrap();
        let keep: BTreeSet<usize> = (0..smp.n_states()).collect();
        let c = condense_smp(&smp, &keep).unwrap();
        assert_eq!(c.trans, smp.trans);
    }

    #[test]
    fn condense_two_exponentials_gives_erlang() {
        let (r, numbers) = chain_rdceg();
        let smp = to_smp(&r, &numbers, &UntimedPolicy::Renormalize).unwrap();
        let w0 = smp.state_by_name("w0").unwrap();
        let sink = smp.state_by_name("w_inf").unwrap();
        let keep: BTreeSet<usize> = [w0, sink].into_iter().collect();
        let c = condense_smp(&smp, &keep).unwrap();
        let i = c.state_by_name("w0").unwrap();
        let j = c.state_by_name("w_inf").unwrap();
        assert!((c.trans[i][j] - 1.0).abs() < 1e-12);
        let law = c.laws[i][j].as_ref().unwrap();
        for t in [0.5f64, 1.0, 2.0, 4.0] {
            let exact = 1.0 - (-t).exp() * (1.0 + t);
            assert!((law.cdf(t) - exact).abs() < 1e-4, "t={t}");
        }
    }

    #[test]
    fn condense_across_cyclic_edge_rejected() {
        let (r, numbers) = parallel_rdceg(0.5);
        let smp = to_smp(&r, &numbers, &UntimedPolicy::Renormalize).unwrap();
        // Keep only the root: every route from w0 back to w0 crosses the
        // cyclic no-quit edge.
        let w0 = smp.state_by_name("w0").unwrap();
        let keep: BTreeSet<usize> = [w0].into_iter().collect();
        let err = condense_smp(&smp, &keep).unwrap_err();
        assert!(err.to_string().contains("passage-slice"));
    }

    #[test]
    fn first_passage_two_state_exponential() {
        let (r, numbers) = chain_rdceg();
        let smp = to_smp(&r, &numbers, &UntimedPolicy::Renormalize).unwrap();
        let w0 = smp.state_by_name("w0").unwrap();
        let w1 = smp.state_by_name("w1").unwrap();
        let fp = first_passage(&smp, w0, w1, 1e6, 100_000, 99).unwrap();
        assert_eq!(fp.hits, fp.n_samples);
        let mean = fp.mean_hit_time.unwrap();
        let se = fp.mean_hit_time_se.unwrap();
        assert!(
            (mean - 1.0).abs() < 3.0 * se.max(1e-3),
            "mean {mean} se {se}"
        );
    }

    #[test]
    fn first_passage_from_equals_to() {
        let (r, numbers) = chain_rdceg();
        let smp = to_smp(&r, &numbers, &UntimedPolicy::Renormalize).unwrap();
        let fp = first_passage(&smp, 1, 1, 10.0, 100, 7).unwrap();
        assert_eq!(fp.hit_probability, 1.0);
        assert_eq!(fp.mean_hit_time, Some(0.0));
    }

    #[test]
    fn first_passage_unreachable_diagnostic() {
        let (r, numbers) = chain_rdceg();
        let smp = to_smp(&r, &numbers, &UntimedPolicy::Renormalize).unwrap();
        let sink = smp.state_by_name("w_inf").unwrap();
        let fp = first_passage(&smp, sink, 0, 10.0, 100, 7).unwrap();
        assert_eq!(fp.hit_probability, 0.0);
        assert!(fp.diagnostic.is_some());
    }

    #[test]
    fn sampling_matches_cdf_roughly() {
        let law = HoldingLaw::compound(2.0, 10.0, 1.5).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let n = 50_000;
        let mut samples: Vec<f64> = (0..n).map(|_| law.sample(&mut rng)).collect();
        samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut ks: f64 = 0.0;
        for (i, &x) in samples.iter().enumerate() {
            let emp = (i + 1) as f64 / n as f64;
            ks = ks.max((emp - law.cdf(x)).abs());
        }
        assert!(ks < 0.01, "KS distance {ks}");
    }
}
