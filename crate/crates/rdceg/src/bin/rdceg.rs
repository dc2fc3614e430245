//! Command-line frontend: simulate populations, fit models, query
//! conditional independence, convert to semi-Markov processes, run
//! diagnostics, and reproduce the shipped simulation studies.
//!
//! Exit codes: 0 success, 1 runtime error, 2 usage or validation error.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use rdceg::ci::{
    ci_statements, classify_set, find_fine_cuts_bounded, is_intrinsic, roll_out, CutKind, DagView,
};
use rdceg::config::TauSpec;
use rdceg::diagnostics::{error_report, leave_one_out, LambdaStarMode};
use rdceg::graph::dot::rdceg_dot;
use rdceg::search::{select_model, FitBundle, ModelSpec};
use rdceg::sim::{
    builtin, load_dataset, save_dataset, simulate_population, Dataset, DatasetFormat,
    GroundTruthConfig, GroundTruthModel,
};
use rdceg::smp::{
    condense_smp, first_passage, to_smp, EdgeNumbers, HoldingLaw, Smp, UntimedPolicy,
};
use rdceg::RdcegError;

#[derive(Parser)]
#[command(
    name = "rdceg",
    version,
    about = "Reduced dynamic chain event graphs: model selection, semi-Markov queries and simulation for recurrent-event processes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate an open population from a generating model.
    Simulate(SimulateArgs),
    /// Fit the MAP staging and clustering to a dataset.
    Fit(FitArgs),
    /// Cut, fine-cut and conditional-independence queries.
    Query(QueryArgs),
    /// Semi-Markov conversion, condensation and first-passage analysis.
    Smp(SmpArgs),
    /// Accuracy and leave-one-out diagnostics against a generating model.
    Diagnose(DiagnoseArgs),
    /// One-command reproduction of the shipped simulation studies.
    Repro(ReproArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutFormat {
    Json,
    Csv,
    Dot,
    Text,
}

#[derive(Args)]
struct ModelSource {
    /// Builtin model name (falls | epilepsy-like | smoking-a | smoking-b).
    #[arg(long)]
    model: Option<String>,
    /// Generating-model config JSON (skeleton + parameter tables).
    #[arg(long, value_name = "FILE")]
    model_file: Option<PathBuf>,
}

impl ModelSource {
    fn load(&self) -> Result<GroundTruthModel, CliError> {
        match (&self.model, &self.model_file) {
            (Some(name), None) => match builtin::by_name(name) {
                Some(r) => r.map_err(runtime),
                None => Err(usage(format!(
                    "unknown builtin model '{name}' (have: falls, epilepsy-like, smoking-a, smoking-b)"
                ))),
            },
            (None, Some(path)) => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    usage(format!("cannot read model file {}: {e}", path.display()))
                })?;
                let cfg: GroundTruthConfig =
                    serde_json::from_str(&text).map_err(|e| usage(format!("bad model file: {e}")))?;
                GroundTruthModel::from_config(&cfg).map_err(runtime)
            }
            _ => Err(usage("provide exactly one of --model or --model-file".into())),
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    source: ModelSource,
    /// Population size.
    #[arg(long)]
    n: usize,
    /// Simulation seed (64-bit).
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output path (stdout when omitted).
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: OutFormat,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    source: ModelSource,
    /// Dataset (JSONL or CSV, by extension).
    #[arg(long, value_name = "FILE")]
    data: PathBuf,
    /// Search configuration JSON overriding the model's own.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Total phantom units (overrides the configured prior).
    #[arg(long)]
    alpha: Option<f64>,
    /// Phantom holding time as a multiple of the empirical median.
    #[arg(long)]
    tau_scale: Option<f64>,
    /// Fit bundle output path (stdout when omitted).
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Also write the MAP graph in DOT format.
    #[arg(long, value_name = "FILE")]
    dot: Option<PathBuf>,
}

#[derive(Args)]
struct QueryArgs {
    #[command(flatten)]
    source: ModelSource,
    /// Fitted-model bundle to query instead of a generating model.
    #[arg(long, value_name = "FILE")]
    fit: Option<PathBuf>,
    /// Comma-separated position names to classify within a passage-slice.
    #[arg(long, value_delimiter = ',')]
    set: Vec<String>,
    /// Passage-slice index the set lives in.
    #[arg(long, default_value_t = 1)]
    slice: usize,
    /// Number of future passage-slices a fine-cut statement covers.
    #[arg(long, default_value_t = 1)]
    horizon: usize,
    /// Enumerate all cuts and fine cuts of the rolled-out graph.
    #[arg(long)]
    enumerate: bool,
    /// Roll-out depth for enumeration and intrinsic checks.
    #[arg(long, default_value_t = 2)]
    depth: usize,
    /// JSON file with an event (array of root-to-sink vertex-name paths) to
    /// check for intrinsicness.
    #[arg(long, value_name = "FILE")]
    paths: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "text")]
    format: OutFormat,
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SmpArgs {
    #[command(flatten)]
    source: ModelSource,
    /// Fitted-model bundle to convert instead of a generating model.
    #[arg(long, value_name = "FILE")]
    fit: Option<PathBuf>,
    /// Untimed-edge policy.
    #[arg(long, value_enum, default_value = "renormalize")]
    policy: PolicyArg,
    /// Keep only these states (comma-separated), condensing through others.
    #[arg(long, value_delimiter = ',')]
    condense: Vec<String>,
    /// First-passage query: FROM,TO state names.
    #[arg(long, value_delimiter = ',', value_name = "FROM,TO")]
    first_passage: Vec<String>,
    #[arg(long, default_value_t = 1e4)]
    horizon: f64,
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// SMP export path (stdout when omitted).
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// First-passage CSV output path.
    #[arg(long, value_name = "FILE")]
    csv: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PolicyArg {
    /// Drop untimed edges and renormalize (condition on timed transitions).
    Renormalize,
    /// Attach an instantaneous law to untimed edges.
    Instant,
}

#[derive(Args)]
struct DiagnoseArgs {
    #[command(flatten)]
    source: ModelSource,
    /// Dataset to fit and compare against the generating model.
    #[arg(long, value_name = "FILE")]
    data: PathBuf,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    tau_scale: Option<f64>,
    /// Use the compound-mean-matched scale instead of the posterior mean of
    /// theta for the fitted Weibull scale.
    #[arg(long)]
    lambda_compound_mean: bool,
    #[arg(long, value_enum, default_value = "json")]
    format: OutFormat,
    /// Error report output (stdout when omitted).
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Leave-one-out monitor table (CSV).
    #[arg(long, value_name = "FILE")]
    loo: Option<PathBuf>,
}

#[derive(Args)]
struct ReproArgs {
    /// Study to reproduce.
    #[arg(value_parser = ["falls-study", "epilepsy-like-study"])]
    study: String,
    /// Replicate-count scale factor (1.0 = 100 replicates per cell).
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    /// Worker threads for replicate-level parallelism.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Output CSV (stdout when omitted).
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Base seed; replicate r at size n uses a derived stream.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

struct CliError {
    code: u8,
    message: String,
}

fn usage(message: String) -> CliError {
    CliError { code: 2, message }
}

fn runtime(err: RdcegError) -> CliError {
    let code = match err {
        RdcegError::Config(_) | RdcegError::InvalidParameter(_) => 2,
        _ => 1,
    };
    CliError {
        code,
        message: err.to_string(),
    }
}

fn io_err(err: std::io::Error) -> CliError {
    CliError {
        code: 1,
        message: err.to_string(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Fit(args) => cmd_fit(args),
        Command::Query(args) => cmd_query(args),
        Command::Smp(args) => cmd_smp(args),
        Command::Diagnose(args) => cmd_diagnose(args),
        Command::Repro(args) => cmd_repro(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

fn write_output(out: &Option<PathBuf>, content: &str) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, content).map_err(io_err),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(content.as_bytes()).map_err(io_err)?;
            if !content.ends_with('\n') {
                stdout.write_all(b"\n").map_err(io_err)?;
            }
            Ok(())
        }
    }
}

// ---------------------------------------------------------------------------

fn cmd_simulate(args: SimulateArgs) -> Result<(), CliError> {
    let format = match args.format {
        OutFormat::Json => DatasetFormat::Jsonl,
        OutFormat::Csv => DatasetFormat::Csv,
        _ => return Err(usage("simulate supports --format json or csv".into())),
    };
    let model = args.source.load()?;
    if args.n == 0 {
        return Err(usage("population size must be at least 1".into()));
    }
    let dataset = simulate_population(&model, args.n, args.seed).map_err(runtime)?;
    match &args.out {
        Some(path) => save_dataset(&dataset, path, format).map_err(runtime),
        None => {
            let tmp = std::env::temp_dir().join(format!("rdceg-sim-{}.tmp", std::process::id()));
            save_dataset(&dataset, &tmp, format).map_err(runtime)?;
            let content = std::fs::read_to_string(&tmp).map_err(io_err)?;
            let _ = std::fs::remove_file(&tmp);
            write_output(&None, &content)
        }
    }
}

fn fit_once(
    model: &GroundTruthModel,
    dataset: &Dataset,
    alpha: Option<f64>,
    tau_scale: Option<f64>,
    config: Option<&PathBuf>,
) -> Result<(ModelSpec, rdceg::search::FittedModel), CliError> {
    let mut spec = model.spec.clone();
    if let Some(path) = config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
        spec.search =
            serde_json::from_str(&text).map_err(|e| usage(format!("bad search config: {e}")))?;
    }
    if let Some(a) = alpha {
        if !a.is_finite() || a <= 0.0 {
            return Err(usage("alpha must be positive".into()));
        }
        spec.search.prior.alpha_total = Some(a);
    }
    if let Some(t) = tau_scale {
        if !t.is_finite() || t <= 0.0 {
            return Err(usage("tau-scale must be positive".into()));
        }
        spec.search.prior.tau = TauSpec::EmpiricalMedian { scale: t };
    }
    let fit = select_model(&dataset.observations, &spec).map_err(runtime)?;
    Ok((spec, fit))
}

fn cmd_fit(args: FitArgs) -> Result<(), CliError> {
    if !args.data.exists() {
        return Err(usage(format!(
            "dataset {} does not exist",
            args.data.display()
        )));
    }
    let model = args.source.load()?;
    let format = DatasetFormat::from_path(&args.data);
    let dataset = load_dataset(&args.data, format).map_err(runtime)?;
    let (spec, fit) = fit_once(
        &model,
        &dataset,
        args.alpha,
        args.tau_scale,
        args.config.as_ref(),
    )?;
    let bundle = FitBundle::from_fitted(&spec, &fit);
    let json = serde_json::to_string_pretty(&bundle).map_err(|e| runtime(e.into()))?;
    if let Some(dot_path) = &args.dot {
        let sizes: Vec<usize> = fit.result.staging.cells().iter().map(|c| c.len()).collect();
        let csizes: Vec<usize> = fit
            .result
            .clustering
            .cells()
            .iter()
            .map(|c| c.len())
            .collect();
        let dot = rdceg_dot(&fit.rdceg, Some(&sizes), Some(&csizes));
        std::fs::write(dot_path, dot).map_err(io_err)?;
    }
    eprintln!(
        "log marginal likelihood {:.6}; {} stages, {} clusters, {} positions",
        fit.result.log_marginal_likelihood,
        fit.result.staging.n_cells(),
        fit.result.clustering.n_cells(),
        fit.rdceg.positions().len(),
    );
    write_output(&args.out, &json)
}

fn graph_and_numbers(
    source: &ModelSource,
    fit: &Option<PathBuf>,
) -> Result<(rdceg::graph::Rdceg, EdgeNumbers), CliError> {
    if let Some(path) = fit {
        let text = std::fs::read_to_string(path)
            .map_err(|e| usage(format!("cannot read fit bundle {}: {e}", path.display())))?;
        let bundle: FitBundle =
            serde_json::from_str(&text).map_err(|e| usage(format!("bad fit bundle: {e}")))?;
        let (_, _, rdceg, numbers) = bundle.restore().map_err(runtime)?;
        Ok((rdceg, numbers))
    } else {
        let model = source.load()?;
        let numbers = model.edge_numbers().map_err(runtime)?;
        Ok((model.rdceg().clone(), numbers))
    }
}

fn cmd_query(args: QueryArgs) -> Result<(), CliError> {
    let (rdceg, _) = graph_and_numbers(&args.source, &args.fit)?;
    let mut sections: Vec<String> = Vec::new();
    let mut json = serde_json::Map::new();

    if let Some(path) = &args.paths {
        let text = std::fs::read_to_string(path)
            .map_err(|e| usage(format!("cannot read paths file {}: {e}", path.display())))?;
        let event: Vec<Vec<String>> =
            serde_json::from_str(&text).map_err(|e| usage(format!("bad paths file: {e}")))?;
        let rolled = roll_out(&rdceg, args.depth).map_err(runtime)?;
        let report = is_intrinsic(&rolled, &event).map_err(runtime)?;
        sections.push(match (&report.intrinsic, &report.counterexample) {
            (true, _) => "event is intrinsic".into(),
            (false, Some(cx)) => format!(
                "event is NOT intrinsic; induced subgraph also contains: {}",
                cx.join(" -> ")
            ),
            (false, None) => "event is NOT intrinsic".into(),
        });
        json.insert(
            "intrinsic".into(),
            serde_json::to_value(&report).map_err(|e| runtime(e.into()))?,
        );
    }

    if !args.set.is_empty() {
        let view = DagView::from_slice(&rdceg, args.slice).map_err(runtime)?;
        let mut set = BTreeSet::new();
        for name in &args.set {
            let idx = view.names.iter().position(|n| n == name).ok_or_else(|| {
                usage(format!(
                    "vertex '{name}' not in passage-slice {}",
                    args.slice
                ))
            })?;
            set.insert(idx);
        }
        let report = classify_set(&view, &set).map_err(runtime)?;
        sections.push(format!(
            "set {{{}}}: {:?}",
            args.set.join(", "),
            report.kind
        ));
        json.insert(
            "cut_report".into(),
            serde_json::to_value(&report).map_err(|e| runtime(e.into()))?,
        );
        match ci_statements(&rdceg, args.slice, &args.set, args.horizon) {
            Ok(statements) => {
                for s in &statements {
                    sections.push(s.sentence.clone());
                }
                json.insert(
                    "statements".into(),
                    serde_json::to_value(&statements).map_err(|e| runtime(e.into()))?,
                );
            }
            Err(RdcegError::InvalidParameter(msg)) => sections.push(msg),
            Err(e) => return Err(runtime(e)),
        }
    }

    if args.enumerate {
        let rolled = roll_out(&rdceg, args.depth).map_err(runtime)?;
        let view = DagView::from_rolled(&rolled);
        let (fine_sets, truncated) = find_fine_cuts_bounded(&view, 4_000_000);
        let cut_sets: Vec<_> = fine_sets
            .iter()
            .filter(|set| matches!(classify_set(&view, set).map(|r| r.kind), Ok(CutKind::Cut)))
            .cloned()
            .collect();
        let names = |sets: &[BTreeSet<usize>]| -> Vec<Vec<String>> {
            sets.iter()
                .map(|s| s.iter().map(|&v| view.names[v].clone()).collect())
                .collect()
        };
        let fine = names(&fine_sets);
        let cuts = names(&cut_sets);
        sections.push(format!(
            "rolled to depth {}: {} fine cuts, of which {} are cuts{}",
            args.depth,
            fine.len(),
            cuts.len(),
            if truncated {
                " (enumeration truncated by the work budget)"
            } else {
                ""
            }
        ));
        for c in &fine {
            let is_cut = cuts.contains(c);
            sections.push(format!(
                "  {{{}}}{}",
                c.join(", "),
                if is_cut { "  [cut]" } else { "  [fine cut]" }
            ));
        }
        json.insert("truncated".into(), serde_json::Value::Bool(truncated));
        json.insert(
            "fine_cuts".into(),
            serde_json::to_value(&fine).map_err(|e| runtime(e.into()))?,
        );
        json.insert(
            "cuts".into(),
            serde_json::to_value(&cuts).map_err(|e| runtime(e.into()))?,
        );
    }

    if sections.is_empty() {
        return Err(usage(
            "nothing to do: pass --set, --paths or --enumerate".into(),
        ));
    }
    match args.format {
        OutFormat::Json => write_output(
            &args.out,
            &serde_json::to_string_pretty(&serde_json::Value::Object(json))
                .map_err(|e| runtime(e.into()))?,
        ),
        _ => write_output(&args.out, &sections.join("\n")),
    }
}

fn smp_to_json(smp: &Smp) -> serde_json::Value {
    let laws: Vec<serde_json::Value> = smp
        .laws
        .iter()
        .enumerate()
        .flat_map(|(i, row)| {
            row.iter().enumerate().filter_map(move |(j, law)| {
                law.as_ref().map(|l| {
                    serde_json::json!({
                        "from": i,
                        "to": j,
                        "law": l,
                    })
                })
            })
        })
        .collect();
    serde_json::json!({
        "schema": "rdceg.smp/1",
        "states": smp.states,
        "transition_matrix": smp.trans,
        "initial": smp.initial,
        "holding_laws": laws,
        "notes": smp.notes,
    })
}

fn cmd_smp(args: SmpArgs) -> Result<(), CliError> {
    let (rdceg, numbers) = graph_and_numbers(&args.source, &args.fit)?;
    let policy = match args.policy {
        PolicyArg::Renormalize => UntimedPolicy::Renormalize,
        PolicyArg::Instant => UntimedPolicy::StandardLaw(HoldingLaw::Instant),
    };
    let mut smp = to_smp(&rdceg, &numbers, &policy).map_err(runtime)?;
    if !args.condense.is_empty() {
        let mut keep = BTreeSet::new();
        for name in &args.condense {
            let idx = smp
                .state_by_name(name)
                .ok_or_else(|| usage(format!("unknown state '{name}'")))?;
            keep.insert(idx);
        }
        smp = condense_smp(&smp, &keep).map_err(runtime)?;
    }
    if !args.first_passage.is_empty() {
        if args.first_passage.len() != 2 {
            return Err(usage("--first-passage needs exactly FROM,TO".into()));
        }
        let from = smp
            .state_by_name(&args.first_passage[0])
            .ok_or_else(|| usage(format!("unknown state '{}'", args.first_passage[0])))?;
        let to = smp
            .state_by_name(&args.first_passage[1])
            .ok_or_else(|| usage(format!("unknown state '{}'", args.first_passage[1])))?;
        if args.samples == 0 {
            return Err(usage("samples must be at least 1".into()));
        }
        let fp = first_passage(&smp, from, to, args.horizon, args.samples, args.seed)
            .map_err(runtime)?;
        let mut csv = String::from("metric,value\n");
        csv.push_str(&format!("from,{}\n", fp.from));
        csv.push_str(&format!("to,{}\n", fp.to));
        csv.push_str(&format!("horizon,{}\n", fp.horizon));
        csv.push_str(&format!("n_samples,{}\n", fp.n_samples));
        csv.push_str(&format!("hits,{}\n", fp.hits));
        csv.push_str(&format!("hit_probability,{}\n", fp.hit_probability));
        csv.push_str(&format!("standard_error,{}\n", fp.standard_error));
        if let Some(m) = fp.mean_hit_time {
            csv.push_str(&format!("mean_hit_time,{m}\n"));
        }
        if let Some(se) = fp.mean_hit_time_se {
            csv.push_str(&format!("mean_hit_time_se,{se}\n"));
        }
        for (p, q) in &fp.quantiles {
            csv.push_str(&format!("q{p},{q}\n"));
        }
        if let Some(d) = &fp.diagnostic {
            csv.push_str(&format!("diagnostic,\"{d}\"\n"));
        }
        match &args.csv {
            Some(path) => std::fs::write(path, &csv).map_err(io_err)?,
            None => eprintln!("{csv}"),
        }
    }
    let json = serde_json::to_string_pretty(&smp_to_json(&smp)).map_err(|e| runtime(e.into()))?;
    write_output(&args.out, &json)
}

fn cmd_diagnose(args: DiagnoseArgs) -> Result<(), CliError> {
    if !args.data.exists() {
        return Err(usage(format!(
            "dataset {} does not exist",
            args.data.display()
        )));
    }
    let model = args.source.load()?;
    let dataset =
        load_dataset(&args.data, DatasetFormat::from_path(&args.data)).map_err(runtime)?;
    let (_, fit) = fit_once(&model, &dataset, args.alpha, args.tau_scale, None)?;
    let mode = if args.lambda_compound_mean {
        LambdaStarMode::CompoundMeanMatched
    } else {
        LambdaStarMode::PosteriorMeanTheta
    };
    let report = error_report(&model, &fit, mode).map_err(runtime)?;
    if let Some(loo_path) = &args.loo {
        let records = leave_one_out(&fit).map_err(runtime)?;
        let mut csv = String::from(
            "kind,cell,element,standalone_score,cell_without_score,intact_score,expectation,band,observed_mean,flagged,low_information,infinite_moment\n",
        );
        for r in &records {
            let join = |xs: &Vec<f64>| {
                xs.iter()
                    .map(|x| format!("{x:.6}"))
                    .collect::<Vec<_>>()
                    .join(";")
            };
            csv.push_str(&format!(
                "{:?},{},{},{:.6},{:.6},{:.6},{},{},{},{},{},{}\n",
                r.kind,
                r.cell_index,
                r.element,
                r.standalone_score,
                r.cell_without_score,
                r.intact_score,
                join(&r.expectation),
                join(&r.band),
                join(&r.observed_mean),
                r.flagged,
                r.low_information,
                r.infinite_moment,
            ));
        }
        std::fs::write(loo_path, csv).map_err(io_err)?;
    }
    match args.format {
        OutFormat::Csv => {
            let mut csv = String::from("kind,element,error\n");
            for row in &report.situations {
                csv.push_str(&format!("situation,{},{}\n", row.situation, row.error));
            }
            for row in &report.edges {
                csv.push_str(&format!(
                    "edge,{}:{},{}\n",
                    row.source, row.label, row.hellinger
                ));
            }
            csv.push_str(&format!(
                "total,situational,{}\n",
                report.total_situational_error
            ));
            csv.push_str(&format!("total,cluster,{}\n", report.total_cluster_error));
            write_output(&args.out, &csv)
        }
        _ => write_output(
            &args.out,
            &serde_json::to_string_pretty(&report).map_err(|e| runtime(e.into()))?,
        ),
    }
}

// ---------------------------------------------------------------------------
// repro

struct ReproCell {
    n: usize,
    alpha: f64,
    tau_scale: f64,
    replicates: usize,
    exact: usize,
    mean_eu: f64,
    mean_ec: f64,
    mean_stages: f64,
    mean_clusters: f64,
}

/// Default prior grid for the shipped studies: total phantom units x
/// phantom-holding-time scale.
fn default_grid() -> Vec<(f64, f64)> {
    let alphas = [0.5, 1.0, 2.0];
    let taus = [0.75, 1.0, 1.5];
    alphas
        .iter()
        .flat_map(|&a| taus.iter().map(move |&t| (a, t)))
        .collect()
}

fn cmd_repro(args: ReproArgs) -> Result<(), CliError> {
    if args.scale <= 0.0 {
        return Err(usage("scale must be positive".into()));
    }
    if args.jobs == 0 {
        return Err(usage("jobs must be at least 1".into()));
    }
    let (model, sizes): (GroundTruthModel, Vec<usize>) = match args.study.as_str() {
        "falls-study" => (
            builtin::falls().map_err(runtime)?,
            vec![500, 1500, 2500, 5000, 7500, 10000],
        ),
        "epilepsy-like-study" => (
            builtin::epilepsy_like().map_err(runtime)?,
            vec![500, 1420, 2500],
        ),
        other => return Err(usage(format!("unknown study '{other}'"))),
    };
    let replicates = ((100.0 * args.scale).round() as usize).max(1);
    let grid = default_grid();

    // Work items: one per (size, replicate); each evaluates the whole prior
    // grid on one simulated dataset. Results land in a pre-sized table so
    // aggregation order does not depend on the worker schedule.
    let tasks: Vec<(usize, usize)> = sizes
        .iter()
        .flat_map(|&n| (0..replicates).map(move |r| (n, r)))
        .collect();
    #[derive(Clone, Default)]
    struct RepOut {
        exact: Vec<bool>,
        eu: Vec<f64>,
        ec: Vec<f64>,
        stages: Vec<usize>,
        clusters: Vec<usize>,
    }
    let outputs: Vec<std::sync::Mutex<Option<RepOut>>> = (0..tasks.len())
        .map(|_| std::sync::Mutex::new(None))
        .collect();
    let next = std::sync::atomic::AtomicUsize::new(0);
    let next_ref = &next;
    let model_ref = &model;
    let grid_ref = &grid;
    let tasks_ref = &tasks;
    let outputs_ref = &outputs;
    let base_seed = args.seed;
    std::thread::scope(|scope| -> Result<(), CliError> {
        let mut handles = Vec::new();
        for _ in 0..args.jobs {
            handles.push(scope.spawn(move || -> Result<(), RdcegError> {
                loop {
                    let idx = next_ref.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                    if idx >= tasks_ref.len() {
                        return Ok(());
                    }
                    let (n, rep) = tasks_ref[idx];
                    let seed = base_seed
                        .wrapping_add((n as u64) << 32)
                        .wrapping_add(rep as u64);
                    let data = simulate_population(model_ref, n, seed)?;
                    let mut out = RepOut::default();
                    for &(a, t) in grid_ref.iter() {
                        let mut spec = model_ref.spec.clone();
                        spec.search.prior.alpha_total = Some(a);
                        spec.search.prior.tau = TauSpec::EmpiricalMedian { scale: t };
                        let fit = select_model(&data.observations, &spec)?;
                        let exact = fit.result.staging == model_ref.staging
                            && fit.result.clustering == model_ref.clustering;
                        let report =
                            error_report(model_ref, &fit, LambdaStarMode::PosteriorMeanTheta)?;
                        out.exact.push(exact);
                        out.eu.push(report.total_situational_error);
                        out.ec.push(report.total_cluster_error);
                        out.stages.push(fit.result.staging.n_cells());
                        out.clusters.push(fit.result.clustering.n_cells());
                    }
                    *outputs_ref[idx].lock().unwrap() = Some(out);
                }
            }));
        }
        for h in handles {
            h.join()
                .map_err(|_| CliError {
                    code: 1,
                    message: "worker panicked".into(),
                })?
                .map_err(runtime)?;
        }
        Ok(())
    })?;

    // Aggregate per (grid point, n), deterministic order.
    let mut rows: Vec<ReproCell> = Vec::new();
    for (gi, &(a, t)) in grid.iter().enumerate() {
        for &n in &sizes {
            let mut cell = ReproCell {
                n,
                alpha: a,
                tau_scale: t,
                replicates,
                exact: 0,
                mean_eu: 0.0,
                mean_ec: 0.0,
                mean_stages: 0.0,
                mean_clusters: 0.0,
            };
            for (ti, &(tn, _)) in tasks.iter().enumerate() {
                if tn != n {
                    continue;
                }
                let guard = outputs[ti].lock().unwrap();
                let out = guard.as_ref().expect("task completed");
                if out.exact[gi] {
                    cell.exact += 1;
                }
                cell.mean_eu += out.eu[gi];
                cell.mean_ec += out.ec[gi];
                cell.mean_stages += out.stages[gi] as f64;
                cell.mean_clusters += out.clusters[gi] as f64;
            }
            cell.mean_eu /= replicates as f64;
            cell.mean_ec /= replicates as f64;
            cell.mean_stages /= replicates as f64;
            cell.mean_clusters /= replicates as f64;
            rows.push(cell);
        }
    }

    let mut csv = String::from(
        "n,alpha,tau_scale,replicates,exact_recoveries,recovery_rate,mean_situational_error,mean_cluster_error,mean_stages,mean_clusters\n",
    );
    for c in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{:.4},{:.6},{:.6},{:.3},{:.3}\n",
            c.n,
            c.alpha,
            c.tau_scale,
            c.replicates,
            c.exact,
            c.exact as f64 / c.replicates as f64,
            c.mean_eu,
            c.mean_ec,
            c.mean_stages,
            c.mean_clusters,
        ));
    }
    write_output(&args.out, &csv)
}
