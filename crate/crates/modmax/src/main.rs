//! Command-line surface: `detect`, `eval`, `generate`, `bench`.
//!
//! Exit codes: 0 success, 2 input/validation error, 3 solver failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use modmax::bench::{
    ideal_graph, louvain, planted_partition, IdealGraphSpec, PlantedPartitionSpec,
};
use modmax::graph::{modularity_score, parse_edge_list, LabelMode, ParsedGraph};
use modmax::metrics::{ami, nmi};
use modmax::partition::Partition;
use modmax::report::{canonical_json, ConfigEcho, DatasetSummary, RunReport};
use modmax::solver::{detect_communities, SolverConfig};

#[derive(Parser)]
#[command(
    name = "modmax",
    version,
    about = "Community detection by sparse modularity maximization on a constrained Stiefel manifold"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Detect communities in an edge-list graph.
    Detect(DetectArgs),
    /// Score a predicted labeling against a reference labeling.
    Eval(EvalArgs),
    /// Generate a synthetic benchmark graph with ground truth.
    Generate(GenerateArgs),
    /// Generate a benchmark instance and compare the solver against Louvain.
    Bench(BenchArgs),
}

#[derive(Args)]
struct DetectArgs {
    /// Edge-list input file.
    #[arg(long)]
    input: PathBuf,
    /// Number of communities to detect.
    #[arg(long)]
    q: usize,
    /// Reference labels (one integer per line, in internal node order).
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Treat node labels as one-based (default: auto).
    #[arg(long)]
    one_based: bool,
    #[arg(long, default_value_t = 0.2)]
    lambda0: f64,
    #[arg(long, default_value_t = 1.3)]
    lambda_growth: f64,
    /// Prox step as a fraction of 1/L.
    #[arg(long, default_value_t = 1.0)]
    mu_scale: f64,
    #[arg(long, default_value_t = 1e-4)]
    sigma: f64,
    #[arg(long, default_value_t = 0.5)]
    beta: f64,
    /// Safeguard period N.
    #[arg(long, default_value_t = 5)]
    safeguard_n: usize,
    #[arg(long, default_value_t = 2000)]
    max_iter: usize,
    /// Stationarity tolerance (default: 1e-6 * sqrt(n*q)).
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    restarts: usize,
    /// Write the report here instead of standard output; also writes the
    /// node remap table next to it as `<output>.remap`.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Args)]
struct EvalArgs {
    /// Predicted labels, one integer per line.
    #[arg(long)]
    pred: PathBuf,
    /// Reference labels, one integer per line.
    #[arg(long)]
    truth: PathBuf,
    /// Optional edge list; when given, the predicted partition's modularity
    /// is reported too.
    #[arg(long)]
    graph: Option<PathBuf>,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_enum)]
    kind: Kind,
    /// Comma-separated community sizes, e.g. 5,6,7.
    #[arg(long)]
    sizes: String,
    /// Target mean degree (planted only).
    #[arg(long, default_value_t = 20.0)]
    avg_degree: f64,
    /// Mixing parameter in [0, 1) (planted only).
    #[arg(long, default_value_t = 0.1)]
    mixing: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output prefix; writes `<prefix>.edges` and `<prefix>.truth`.
    #[arg(long)]
    out_prefix: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_enum)]
    kind: Kind,
    #[arg(long)]
    sizes: String,
    #[arg(long, default_value_t = 20.0)]
    avg_degree: f64,
    #[arg(long, default_value_t = 0.1)]
    mixing: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Solver community count; defaults to the number of generated communities.
    #[arg(long)]
    q: Option<usize>,
    /// Louvain restarts to take the best of.
    #[arg(long, default_value_t = 20)]
    louvain_runs: u64,
    /// Also write `<prefix>.edges` and `<prefix>.truth`.
    #[arg(long)]
    out_prefix: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Tsv,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Ideal,
    Planted,
}

/// An error plus the process exit code it maps to.
struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn input(message: impl std::fmt::Display) -> Self {
        CliError { code: 2, message: message.to_string() }
    }

    fn solver(message: impl std::fmt::Display) -> Self {
        CliError { code: 3, message: message.to_string() }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Detect(args) => cmd_detect(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Generate(args) => cmd_generate(args),
        Command::Bench(args) => cmd_bench(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", err.message);
            ExitCode::from(err.code)
        }
    }
}

fn read_to_string(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn load_graph(path: &Path, mode: LabelMode) -> Result<ParsedGraph, CliError> {
    let text = read_to_string(path)?;
    parse_edge_list(&text, mode).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn load_labels(path: &Path) -> Result<Partition, CliError> {
    let text = read_to_string(path)?;
    Partition::parse_labels(&text)
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn cmd_detect(args: DetectArgs) -> Result<(), CliError> {
    let mode = if args.one_based { LabelMode::OneBased } else { LabelMode::Auto };
    let parsed = load_graph(&args.input, mode)?;
    if args.q >= parsed.graph.node_count() {
        return Err(CliError::input(format!(
            "q = {} but the graph has only {} nodes",
            args.q,
            parsed.graph.node_count()
        )));
    }
    let truth = args.truth.as_deref().map(load_labels).transpose()?;
    if let Some(t) = &truth {
        if t.len() != parsed.graph.node_count() {
            return Err(CliError::input(format!(
                "truth labels {} nodes but the graph has {}",
                t.len(),
                parsed.graph.node_count()
            )));
        }
    }

    let config = SolverConfig {
        q: args.q,
        lambda0: args.lambda0,
        lambda_growth: args.lambda_growth,
        mu_scale: args.mu_scale,
        sigma: args.sigma,
        beta: args.beta,
        safeguard_period: args.safeguard_n,
        max_outer_iter: args.max_iter,
        grad_tol: args.tol,
        seed: args.seed,
        restarts: args.restarts,
        ..SolverConfig::new(args.q)
    };
    config.validate().map_err(|e| CliError::input(e.to_string()))?;

    let op = modmax::graph::ModularityOperator::new(&parsed.graph);
    let result = detect_communities(&op, &config).map_err(|e| CliError::solver(e.to_string()))?;

    let (nmi_value, ami_value) = match &truth {
        Some(t) => (
            Some(nmi(&result.partition, t).map_err(|e| CliError::input(e.to_string()))?),
            Some(ami(&result.partition, t).map_err(|e| CliError::input(e.to_string()))?),
        ),
        None => (None, None),
    };

    let format_name = match args.format {
        Format::Json => "json",
        Format::Tsv => "tsv",
    };
    let echo = ConfigEcho::from_solver_config(
        &config,
        args.input.display().to_string(),
        args.truth.as_ref().map(|p| p.display().to_string()),
        format_name.to_string(),
    );
    let summary = DatasetSummary {
        nodes: parsed.graph.node_count(),
        edges: parsed.graph.edge_count(),
        self_loops_dropped: parsed.self_loops_dropped,
        duplicates_dropped: parsed.duplicates_dropped,
    };
    let report = RunReport::new(
        echo,
        summary,
        parsed.graph.labels().to_vec(),
        &result,
        nmi_value,
        ami_value,
    );

    let body = match args.format {
        Format::Json => report.to_canonical_json(),
        Format::Tsv => report.to_tsv(),
    };
    match &args.output {
        Some(path) => {
            std::fs::write(path, &body)
                .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
            let remap_path = PathBuf::from(format!("{}.remap", path.display()));
            std::fs::write(&remap_path, parsed.graph.remap_table())
                .map_err(|e| CliError::input(format!("{}: {e}", remap_path.display())))?;
        }
        None => print!("{body}"),
    }
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<(), CliError> {
    let pred = load_labels(&args.pred)?;
    let truth = load_labels(&args.truth)?;
    let nmi_value = nmi(&pred, &truth).map_err(|e| CliError::input(e.to_string()))?;
    let ami_value = ami(&pred, &truth).map_err(|e| CliError::input(e.to_string()))?;
    println!("nmi\t{nmi_value:.6}");
    println!("ami\t{ami_value:.6}");
    if let Some(path) = &args.graph {
        let parsed = load_graph(path, LabelMode::Auto)?;
        let q = modularity_score(&parsed.graph, &pred)
            .map_err(|e| CliError::input(e.to_string()))?;
        println!("modularity\t{q:.6}");
    }
    Ok(())
}

fn parse_sizes(text: &str) -> Result<Vec<usize>, CliError> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| CliError::input(format!("bad community size {t:?}")))
        })
        .collect()
}

fn generate_instance(
    kind: Kind,
    sizes: Vec<usize>,
    avg_degree: f64,
    mixing: f64,
    seed: u64,
) -> Result<(modmax::graph::Graph, Partition, Option<f64>), CliError> {
    match kind {
        Kind::Ideal => {
            let spec = IdealGraphSpec::new(sizes).map_err(|e| CliError::input(e.to_string()))?;
            let (graph, truth) = ideal_graph(&spec).map_err(|e| CliError::input(e.to_string()))?;
            Ok((graph, truth, None))
        }
        Kind::Planted => {
            let spec = PlantedPartitionSpec { sizes, avg_degree, mixing, seed };
            let out = planted_partition(&spec).map_err(|e| CliError::input(e.to_string()))?;
            Ok((out.graph, out.truth, Some(out.realized_mixing)))
        }
    }
}

fn write_instance(
    prefix: &Path,
    graph: &modmax::graph::Graph,
    truth: &Partition,
) -> Result<(), CliError> {
    let edges_path = PathBuf::from(format!("{}.edges", prefix.display()));
    let truth_path = PathBuf::from(format!("{}.truth", prefix.display()));
    let mut edges = String::new();
    for (u, v) in graph.edges() {
        edges.push_str(&format!("{u} {v}\n"));
    }
    let mut labels = String::new();
    for &l in truth.normalized().labels() {
        labels.push_str(&format!("{l}\n"));
    }
    std::fs::write(&edges_path, edges)
        .map_err(|e| CliError::input(format!("{}: {e}", edges_path.display())))?;
    std::fs::write(&truth_path, labels)
        .map_err(|e| CliError::input(format!("{}: {e}", truth_path.display())))?;
    Ok(())
}

fn cmd_generate(args: GenerateArgs) -> Result<(), CliError> {
    let sizes = parse_sizes(&args.sizes)?;
    let (graph, truth, realized) =
        generate_instance(args.kind, sizes, args.avg_degree, args.mixing, args.seed)?;
    write_instance(&args.out_prefix, &graph, &truth)?;
    eprintln!(
        "wrote {} nodes, {} edges to {}.edges",
        graph.node_count(),
        graph.edge_count(),
        args.out_prefix.display()
    );
    if let Some(mu) = realized {
        eprintln!("realized mixing: {mu:.4}");
    }
    Ok(())
}

fn cmd_bench(args: BenchArgs) -> Result<(), CliError> {
    let sizes = parse_sizes(&args.sizes)?;
    let q_default = sizes.len();
    let (graph, truth, realized) =
        generate_instance(args.kind, sizes, args.avg_degree, args.mixing, args.seed)?;
    if let Some(prefix) = &args.out_prefix {
        write_instance(prefix, &graph, &truth)?;
    }

    let q = args.q.unwrap_or(q_default);
    let op = modmax::graph::ModularityOperator::new(&graph);
    let config = SolverConfig { seed: args.seed, ..SolverConfig::new(q) };
    let result = detect_communities(&op, &config).map_err(|e| CliError::solver(e.to_string()))?;

    let mut best_louvain: Option<(Partition, f64)> = None;
    for run in 0..args.louvain_runs {
        let p = louvain(&graph, args.seed.wrapping_add(run));
        let q_val = modularity_score(&graph, &p).map_err(|e| CliError::input(e.to_string()))?;
        let better = match &best_louvain {
            None => true,
            Some((_, best_q)) => q_val > *best_q,
        };
        if better {
            best_louvain = Some((p, q_val));
        }
    }
    let (louvain_partition, louvain_q) = best_louvain.expect("at least one run");

    #[derive(serde::Serialize)]
    struct MethodRow {
        method: String,
        communities: usize,
        modularity: f64,
        nmi: f64,
        ami: f64,
    }
    #[derive(serde::Serialize)]
    struct BenchReport {
        nodes: usize,
        edges: usize,
        realized_mixing: Option<f64>,
        truth_modularity: f64,
        methods: Vec<MethodRow>,
    }

    let row = |name: &str, p: &Partition, q_val: f64| -> Result<MethodRow, CliError> {
        Ok(MethodRow {
            method: name.to_string(),
            communities: p.num_communities(),
            modularity: q_val,
            nmi: nmi(p, &truth).map_err(|e| CliError::input(e.to_string()))?,
            ami: ami(p, &truth).map_err(|e| CliError::input(e.to_string()))?,
        })
    };
    let report = BenchReport {
        nodes: graph.node_count(),
        edges: graph.edge_count(),
        realized_mixing: realized,
        truth_modularity: modularity_score(&graph, &truth)
            .map_err(|e| CliError::input(e.to_string()))?,
        methods: vec![
            row("stiefel", &result.partition, result.modularity)?,
            row("louvain", &louvain_partition, louvain_q)?,
        ],
    };
    print!("{}", canonical_json(&report));
    Ok(())
}
