//! Shipped example models.
//!
//! Three model families are built in:
//!
//! * `falls` — an elderly falls intervention with different referral
//!   pathways for community and communal-establishment residents, risk
//!   assessment, discretionary treatment, recurrent falls and complications.
//! * `epilepsy_like` — a two-passage-slice structure over three age groups,
//!   three EEG statuses and two treatment arms, tracking a first and second
//!   seizure.
//! * `smoking_a` / `smoking_b` — competing structures for the uptake of
//!   smoking-cessation services: quitting depends on service use in (a) and
//!   is unaffected by it in (b).
//!
//! All numeric generating parameters are synthetic defaults chosen for the
//! shipped regression suite; they are not estimates from any study data.

use std::collections::BTreeMap;

use crate::config::{
    HyperclusterConfig, HyperclusterSetConfig, HyperstageConfig, PriorConfig, SearchConfig, TauSpec,
};
use crate::error::Result;
use crate::graph::tree::TreeBuilder;
use crate::search::ModelSpec;
use crate::sim::GroundTruthModel;

/// Constructor of a builtin model.
pub type ModelConstructor = fn() -> Result<GroundTruthModel>;

/// All builtin models by CLI name.
pub fn builtin_models() -> Vec<(&'static str, ModelConstructor)> {
    vec![
        ("falls", falls as ModelConstructor),
        ("epilepsy-like", epilepsy_like),
        ("smoking-a", smoking_a),
        ("smoking-b", smoking_b),
    ]
}

pub fn by_name(name: &str) -> Option<Result<GroundTruthModel>> {
    builtin_models()
        .into_iter()
        .find(|(n, _)| *n == name)
        .map(|(_, f)| f())
}

/// The falls intervention model: 16 positions w1..w16 plus the entry state
/// w0 and the sink.
///
/// Structure: residents of the community (w1) or a communal establishment
/// (w2) are assessed for fall risk. Low-risk individuals (w4, w5) either
/// fall (w9, w10) and are reassessed, or exit without further falls.
/// High-risk individuals (w3, w6) are treated at the clinician's discretion
/// (treated w7, w11; untreated w8, w12). High-risk fallers (w13..w16) either
/// recover to their at-risk state, move from the community into a communal
/// establishment (w13, w14 only), or leave the population with
/// complications. Repetition is expressed through continuation markers, so
/// recoveries and reassessments become cyclic edges.
pub fn falls() -> Result<GroundTruthModel> {
    let mut b = TreeBuilder::new();
    let root = b.root();
    b.position_hint(root, "w0");

    let a1 = b.child(root, "community", false);
    let a2 = b.child(root, "communal", false);
    b.position_hint(a1, "w1");
    b.position_hint(a2, "w2");

    let h1 = b.child(a1, "high risk", false);
    let l1 = b.child(a1, "low risk", false);
    b.position_hint(h1, "w3");
    b.position_hint(l1, "w4");
    let l2 = b.child(a2, "low risk", false);
    let h2 = b.child(a2, "high risk", false);
    b.position_hint(l2, "w5");
    b.position_hint(h2, "w6");

    let t1 = b.child(h1, "treated", false);
    let u1 = b.child(h1, "not treated", false);
    b.position_hint(t1, "w7");
    b.position_hint(u1, "w8");
    let t2 = b.child(h2, "treated", false);
    let u2 = b.child(h2, "not treated", false);
    b.position_hint(t2, "w11");
    b.position_hint(u2, "w12");

    // At-risk situations: fall, exit without further falls, or deregister
    // (dropout, pruned from the modified tree).
    let f1 = b.child(l1, "falls", true);
    b.child(l1, "no more falls", false);
    b.child(l1, "deregisters", false);
    b.position_hint(f1, "w9");
    let f2 = b.child(l2, "falls", true);
    b.child(l2, "no more falls", false);
    b.child(l2, "deregisters", false);
    b.position_hint(f2, "w10");

    let g1 = b.child(t1, "falls", true);
    b.child(t1, "no more falls", false);
    b.child(t1, "deregisters", false);
    b.position_hint(g1, "w13");
    let g2 = b.child(u1, "falls", true);
    b.child(u1, "no more falls", false);
    b.child(u1, "deregisters", false);
    b.position_hint(g2, "w14");
    let g3 = b.child(t2, "falls", true);
    b.child(t2, "no more falls", false);
    b.child(t2, "deregisters", false);
    b.position_hint(g3, "w15");
    let g4 = b.child(u2, "falls", true);
    b.child(u2, "no more falls", false);
    b.child(u2, "deregisters", false);
    b.position_hint(g4, "w16");

    // Low-risk fallers are reassessed: structure repeats from assessment.
    b.continuation(f1, "reassessed", true, a1);
    b.continuation(f2, "reassessed", true, a2);

    // Community high-risk fallers: recover, move to a communal
    // establishment (repetition of the communal at-risk structure, so the
    // move becomes a cyclic edge into w11/w12), or leave with complications.
    b.continuation(g1, "recovers", true, t1);
    b.continuation(g1, "moves to communal", true, t2);
    b.child(g1, "complications", true);
    b.continuation(g2, "recovers", true, u1);
    b.continuation(g2, "moves to communal", true, u2);
    b.child(g2, "complications", true);

    // Communal high-risk fallers: recover or leave with complications.
    b.continuation(g3, "recovers", true, t2);
    b.child(g3, "complications", true);
    b.continuation(g4, "recovers", true, u2);
    b.child(g4, "complications", true);

    // Names for readability in exports and configs.
    for (v, name) in [
        (a1, "a_community"),
        (a2, "a_communal"),
        (h1, "h_community"),
        (h2, "h_communal"),
        (l1, "l_community"),
        (l2, "l_communal"),
        (t1, "t_community"),
        (u1, "u_community"),
        (t2, "t_communal"),
        (u2, "u_communal"),
        (f1, "f_low_community"),
        (f2, "f_low_communal"),
        (g1, "g_treated_community"),
        (g2, "g_untreated_community"),
        (g3, "g_treated_communal"),
        (g4, "g_untreated_communal"),
    ] {
        b.name(v, name);
    }
    b.name(root, "entry");

    let tree = b.finish()?;
    let critical: Vec<String> = tree
        .leaves()
        .filter(|&v| {
            let parent = tree.parent_edge(v).map(|e| &tree.edge(e).label);
            parent != Some(&"deregisters".to_string())
        })
        .map(|v| tree.vertex(v).name.clone())
        .collect();

    let at_risk = [
        "l_community",
        "l_communal",
        "t_community",
        "u_community",
        "t_communal",
        "u_communal",
    ];
    let fall_edges: Vec<(String, String)> = at_risk
        .iter()
        .map(|s| (s.to_string(), "falls".to_string()))
        .collect();
    let outcome3 = ["g_treated_community", "g_untreated_community"];
    let outcome2 = ["g_treated_communal", "g_untreated_communal"];
    let mut admin_edges: Vec<(String, String)> = vec![
        ("f_low_community".into(), "reassessed".into()),
        ("f_low_communal".into(), "reassessed".into()),
    ];
    admin_edges.extend(
        outcome3
            .iter()
            .map(|s| (s.to_string(), "moves to communal".to_string())),
    );
    let mut outcome_edges: Vec<(String, String)> = Vec::new();
    for s in outcome3.iter().chain(outcome2.iter()) {
        outcome_edges.push((s.to_string(), "recovers".into()));
        outcome_edges.push((s.to_string(), "complications".into()));
    }

    let search = SearchConfig {
        schema: "rdceg.search/1".into(),
        prior: PriorConfig {
            alpha_total: None,
            tau: TauSpec::EmpiricalMedian { scale: 1.0 },
            ..Default::default()
        },
        hyperstage: HyperstageConfig {
            sets: vec![
                vec!["a_community".into(), "a_communal".into()],
                vec!["h_community".into(), "h_communal".into()],
                at_risk.iter().map(|s| s.to_string()).collect(),
                vec!["f_low_community".into(), "f_low_communal".into()],
                outcome3.iter().map(|s| s.to_string()).collect(),
                outcome2.iter().map(|s| s.to_string()).collect(),
            ],
        },
        hypercluster: HyperclusterConfig {
            sets: vec![
                HyperclusterSetConfig {
                    kappa: 1.5,
                    edges: fall_edges.clone(),
                },
                HyperclusterSetConfig {
                    kappa: 1.0,
                    edges: admin_edges.clone(),
                },
                HyperclusterSetConfig {
                    kappa: 2.0,
                    edges: outcome_edges.clone(),
                },
            ],
        },
        max_depth: 0,
        tie_break_seed: 0,
    };
    let spec = ModelSpec {
        schema: "rdceg.model-spec/1".into(),
        tree,
        critical,
        search,
    };

    // Generating partitions (synthetic defaults).
    let staging = vec![
        vec!["entry"],
        vec!["a_community"],
        vec!["a_communal"],
        vec!["h_community", "h_communal"],
        vec!["l_community", "l_communal"],
        vec!["t_community", "t_communal"],
        vec!["u_community"],
        vec!["u_communal"],
        vec!["f_low_community"],
        vec!["f_low_communal"],
        vec!["g_treated_community", "g_untreated_community"],
        vec!["g_treated_communal", "g_untreated_communal"],
    ];
    // Aligned with each cell's sorted out-edge labels.
    let stage_probs = vec![
        vec![0.45, 0.55],       // entry: [communal, community]
        vec![0.45, 0.55],       // a_community: [high risk, low risk]
        vec![0.75, 0.25],       // a_communal: [high risk, low risk]
        vec![0.40, 0.60],       // h_*: [not treated, treated]
        vec![0.35, 0.65],       // l_*: [falls, no more falls]
        vec![0.55, 0.45],       // treated: [falls, no more falls]
        vec![0.90, 0.10],       // u_community: [falls, no more falls]
        vec![0.75, 0.25],       // u_communal: [falls, no more falls]
        vec![1.0],              // f_low_community: [reassessed]
        vec![1.0],              // f_low_communal: [reassessed]
        vec![0.18, 0.32, 0.50], // g community: [complications, moves, recovers]
        vec![0.35, 0.65],       // g communal: [complications, recovers]
    ];
    let clustering: Vec<(Vec<(&str, &str)>, f64)> = vec![
        (vec![("l_community", "falls"), ("l_communal", "falls")], 1.5),
        (vec![("t_community", "falls"), ("t_communal", "falls")], 1.5),
        (vec![("u_community", "falls"), ("u_communal", "falls")], 1.5),
        (
            vec![
                ("f_low_community", "reassessed"),
                ("f_low_communal", "reassessed"),
            ],
            1.0,
        ),
        (
            vec![
                ("g_treated_community", "moves to communal"),
                ("g_untreated_community", "moves to communal"),
            ],
            1.0,
        ),
        (
            vec![
                ("g_treated_community", "recovers"),
                ("g_untreated_community", "recovers"),
                ("g_treated_communal", "recovers"),
                ("g_untreated_communal", "recovers"),
            ],
            2.0,
        ),
        (
            vec![
                ("g_treated_community", "complications"),
                ("g_untreated_community", "complications"),
                ("g_treated_communal", "complications"),
                ("g_untreated_communal", "complications"),
            ],
            2.0,
        ),
    ];
    // θ in the t^κ/θ parametrization (time unit: days).
    let cluster_theta = vec![1600.0, 400.0, 100.0, 30.0, 120.0, 10000.0, 625.0];

    let spec_ref = &spec;
    let dropout: BTreeMap<_, _> = at_risk
        .iter()
        .map(|name| (spec_ref.tree.vertex_by_name(name).unwrap(), 0.03))
        .collect();

    GroundTruthModel::new(
        "falls",
        spec.clone(),
        staging,
        stage_probs,
        clustering,
        cluster_theta,
        dropout,
        20,
    )
}

/// Two-passage-slice model over age group x EEG status x treatment arm,
/// tracking a first and a second seizure. No cyclic edges: the recurrence is
/// unrolled, with the first-seizure edges marked as slice boundaries.
///
/// The generating staging encodes arm effects per covariate context:
/// treatment arms share a seizure risk in every (age, EEG) context except
/// abnormal EEG, where the deferred arm is at high risk. Hyperstages pool
/// only arms within one context, mirroring the trial's question.
pub fn epilepsy_like() -> Result<GroundTruthModel> {
    let mut b = TreeBuilder::new();
    let root = b.root();
    b.name(root, "entry");
    b.position_hint(root, "w0");

    let ages = ["group1", "group2", "group3"];
    let eegs = ["abnormal eeg", "normal eeg", "unknown eeg"];
    let arms = ["immediate", "deferred"];

    let mut arm_situations: Vec<String> = Vec::new();
    let mut age_names: Vec<String> = Vec::new();
    // Per (age, eeg): the [immediate, deferred] first- and second-seizure
    // situation names.
    let mut risk_pairs: Vec<(usize, Vec<String>)> = Vec::new(); // (eeg index, pair)
    let mut after_pairs: Vec<Vec<String>> = Vec::new();
    let mut seizure1_edges: Vec<(String, String)> = Vec::new();
    let mut seizure2_imm: Vec<(String, String)> = Vec::new();
    let mut seizure2_def: Vec<(String, String)> = Vec::new();

    for (ai, age) in ages.iter().enumerate() {
        let a = b.child(root, age, false);
        let a_name = format!("age{}", ai + 1);
        b.name(a, &a_name);
        b.position_hint(a, &format!("w{}", ai + 1));
        age_names.push(a_name.clone());
        for (ei, eeg) in eegs.iter().enumerate() {
            let e = b.child(a, eeg, false);
            let e_name = format!("eeg{}_{}", ai + 1, ei + 1);
            b.name(e, &e_name);
            arm_situations.push(e_name.clone());
            let mut rp = Vec::new();
            let mut qp = Vec::new();
            for (ri, arm) in arms.iter().enumerate() {
                let r = b.child(e, arm, false);
                let r_name = format!("risk{}_{}_{}", ai + 1, ei + 1, ri);
                b.name(r, &r_name);
                rp.push(r_name.clone());
                // First seizure: slice boundary.
                let q = b.child(r, "seizure", true);
                b.mark_boundary(q);
                b.child(r, "no more seizures", false);
                let q_name = format!("after{}_{}_{}", ai + 1, ei + 1, ri);
                b.name(q, &q_name);
                qp.push(q_name.clone());
                b.child(q, "seizure", true);
                b.child(q, "no more seizures", false);
                seizure1_edges.push((r_name.clone(), "seizure".into()));
                let pair = (q_name.clone(), "seizure".to_string());
                if ri == 0 {
                    seizure2_imm.push(pair);
                } else {
                    seizure2_def.push(pair);
                }
            }
            risk_pairs.push((ei, rp));
            after_pairs.push(qp);
        }
    }

    let tree = b.finish()?;
    let critical: Vec<String> = tree.leaves().map(|v| tree.vertex(v).name.clone()).collect();

    let mut hyperstage_sets: Vec<Vec<String>> = vec![age_names.clone(), arm_situations.clone()];
    for (_, pair) in &risk_pairs {
        hyperstage_sets.push(pair.clone());
    }
    for pair in &after_pairs {
        hyperstage_sets.push(pair.clone());
    }

    let search = SearchConfig {
        schema: "rdceg.search/1".into(),
        prior: PriorConfig {
            alpha_total: Some(0.5),
            tau: TauSpec::EmpiricalMedian { scale: 1.0 },
            ..Default::default()
        },
        hyperstage: HyperstageConfig {
            sets: hyperstage_sets,
        },
        hypercluster: HyperclusterConfig {
            sets: vec![
                HyperclusterSetConfig {
                    kappa: 1.0,
                    edges: seizure1_edges.clone(),
                },
                HyperclusterSetConfig {
                    kappa: 1.0,
                    edges: seizure2_imm.iter().chain(&seizure2_def).cloned().collect(),
                },
            ],
        },
        max_depth: 0,
        tie_break_seed: 0,
    };
    let spec = ModelSpec {
        schema: "rdceg.model-spec/1".into(),
        tree,
        critical,
        search,
    };

    let mut staging: Vec<Vec<&str>> = vec![
        vec!["entry"],
        vec!["age1"],
        vec!["age2"],
        vec!["age3"],
        arm_situations.iter().map(String::as_str).collect(),
    ];
    // Sorted out-edge labels for this tree:
    // entry: [group1, group2, group3]
    // age:   [abnormal eeg, normal eeg, unknown eeg]
    // eeg:   [deferred, immediate]
    // risk:  [no more seizures, seizure]
    let mut stage_probs = vec![
        vec![1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
        vec![0.24, 0.60, 0.16],
        vec![0.42, 0.42, 0.16],
        vec![0.60, 0.24, 0.16],
        vec![0.5, 0.5],
    ];
    for (ei, pair) in &risk_pairs {
        if *ei == 0 {
            // Abnormal EEG: the arms differ; deferred is high risk.
            staging.push(vec![pair[0].as_str()]);
            stage_probs.push(vec![0.60, 0.40]);
            staging.push(vec![pair[1].as_str()]);
            stage_probs.push(vec![0.20, 0.80]);
        } else {
            staging.push(pair.iter().map(String::as_str).collect());
            stage_probs.push(vec![0.60, 0.40]);
        }
    }
    for pair in &after_pairs {
        staging.push(pair.iter().map(String::as_str).collect());
        stage_probs.push(vec![0.38, 0.62]);
    }

    let clustering: Vec<(Vec<(&str, &str)>, f64)> = vec![
        (
            seizure1_edges
                .iter()
                .map(|(s, l)| (s.as_str(), l.as_str()))
                .collect(),
            1.0,
        ),
        (
            seizure2_imm
                .iter()
                .map(|(s, l)| (s.as_str(), l.as_str()))
                .collect(),
            1.0,
        ),
        (
            seizure2_def
                .iter()
                .map(|(s, l)| (s.as_str(), l.as_str()))
                .collect(),
            1.0,
        ),
    ];
    let cluster_theta = vec![360.0, 580.0, 190.0];

    GroundTruthModel::new(
        "epilepsy-like",
        spec,
        staging,
        stage_probs,
        clustering,
        cluster_theta,
        BTreeMap::new(),
        20,
    )
}

fn smoking_spec() -> Result<ModelSpec> {
    let mut b = TreeBuilder::new();
    let root = b.root();
    b.name(root, "attempt");
    b.position_hint(root, "w0");
    let s1 = b.child(root, "services", false);
    let s2 = b.child(root, "no services", false);
    b.name(s1, "with_services");
    b.name(s2, "without_services");
    b.child(s1, "quit", true);
    b.continuation(s1, "no quit", true, root);
    b.child(s1, "deregisters", false);
    b.child(s2, "quit", true);
    b.continuation(s2, "no quit", true, root);
    b.child(s2, "deregisters", false);
    let tree = b.finish()?;
    let critical: Vec<String> = tree
        .leaves()
        .filter(|&v| tree.parent_edge(v).map(|e| tree.edge(e).label.as_str()) == Some("quit"))
        .map(|v| tree.vertex(v).name.clone())
        .collect();
    let search = SearchConfig {
        schema: "rdceg.search/1".into(),
        prior: PriorConfig::default(),
        hyperstage: HyperstageConfig {
            sets: vec![vec!["with_services".into(), "without_services".into()]],
        },
        hypercluster: HyperclusterConfig {
            sets: vec![HyperclusterSetConfig {
                kappa: 1.0,
                edges: vec![
                    ("with_services".into(), "quit".into()),
                    ("without_services".into(), "quit".into()),
                    ("with_services".into(), "no quit".into()),
                    ("without_services".into(), "no quit".into()),
                ],
            }],
        },
        max_depth: 0,
        tie_break_seed: 0,
    };
    Ok(ModelSpec {
        schema: "rdceg.model-spec/1".into(),
        tree,
        critical,
        search,
    })
}

/// Smoking-cessation variant (a): quitting depends on service use, so the
/// two attempt situations stay distinct positions with their own quit edges
/// into the sink.
pub fn smoking_a() -> Result<GroundTruthModel> {
    let spec = smoking_spec()?;
    GroundTruthModel::new(
        "smoking-a",
        spec,
        vec![
            vec!["attempt"],
            vec!["with_services"],
            vec!["without_services"],
        ],
        vec![
            vec![0.45, 0.55], // [no services, services]
            vec![0.55, 0.45], // with services: [no quit, quit]
            vec![0.75, 0.25], // without services: [no quit, quit]
        ],
        vec![
            (
                vec![("with_services", "quit"), ("without_services", "quit")],
                1.0,
            ),
            (
                vec![
                    ("with_services", "no quit"),
                    ("without_services", "no quit"),
                ],
                1.0,
            ),
        ],
        vec![60.0, 120.0],
        BTreeMap::new(),
        20,
    )
}

/// Smoking-cessation variant (b): quitting is unaffected by service use, so
/// the attempt situations coalesce into one position reached by parallel
/// edges.
pub fn smoking_b() -> Result<GroundTruthModel> {
    let spec = smoking_spec()?;
    GroundTruthModel::new(
        "smoking-b",
        spec,
        vec![vec!["attempt"], vec!["with_services", "without_services"]],
        vec![
            vec![0.45, 0.55], // [no services, services]
            vec![0.65, 0.35], // [no quit, quit]
        ],
        vec![
            (
                vec![("with_services", "quit"), ("without_services", "quit")],
                1.0,
            ),
            (
                vec![
                    ("with_services", "no quit"),
                    ("without_services", "no quit"),
                ],
                1.0,
            ),
        ],
        vec![60.0, 120.0],
        BTreeMap::new(),
        20,
    )
}
