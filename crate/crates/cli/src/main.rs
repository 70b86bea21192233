use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use gkmeans::io::{
    read_fvecs, read_graph, read_partition, write_fvecs, write_graph, write_ivecs, write_partition,
};
use gkmeans::{
    brute_force_knn, build_knn_graph, build_knn_graph_observed, co_membership_curve, distortion,
    gen_mixture, gk_means, random_graph_init, recall_at_1, rng, sample_ids, Config, Dataset,
    KnnGraph, MetricsTrace, Mode, RecallMode, TraceRow,
};

const DEFAULT_KAPPA: usize = 50;
const DEFAULT_XI: usize = 50;
const DEFAULT_TAU: usize = 10;

#[derive(Parser)]
#[command(name = "gkmeans", version, about = "KNN-graph accelerated k-means")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cluster a corpus: build or load a KNN graph, then run graph-guided k-means.
    Cluster(ClusterArgs),
    /// Build an approximate KNN graph.
    BuildGraph(BuildGraphArgs),
    /// Report distortion, recall@1 and the neighbour co-membership curve.
    Eval(EvalArgs),
    /// Generate a synthetic Gaussian mixture.
    Gen(GenArgs),
    /// Compute the exact KNN graph by brute force.
    OracleKnn(OracleArgs),
}

#[derive(Args)]
struct SeedArg {
    /// RNG seed; falls back to $GKMEANS_SEED, then 0.
    #[arg(long, env = "GKMEANS_SEED", default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Boost,
    Traditional,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Boost => Mode::Boost,
            ModeArg::Traditional => Mode::Traditional,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum GraphSource {
    Build,
    Exact,
    Random,
    File(PathBuf),
}

impl GraphSource {
    fn name(&self) -> &'static str {
        match self {
            GraphSource::Build => "build",
            GraphSource::Exact => "exact",
            GraphSource::Random => "random",
            GraphSource::File(_) => "file:PATH",
        }
    }
}

fn parse_graph_source(s: &str) -> std::result::Result<GraphSource, String> {
    match s {
        "build" => Ok(GraphSource::Build),
        "exact" => Ok(GraphSource::Exact),
        "random" => Ok(GraphSource::Random),
        other => match other.strip_prefix("file:") {
            Some(p) if !p.is_empty() => Ok(GraphSource::File(PathBuf::from(p))),
            _ => Err(format!(
                "expected build, exact, random or file:PATH, got {other:?}"
            )),
        },
    }
}

#[derive(Args)]
struct ClusterArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    k: usize,
    #[arg(long, value_enum, default_value = "boost")]
    mode: ModeArg,
    /// Where the KNN graph comes from: build, exact, random or file:PATH.
    #[arg(long, default_value = "build", value_parser = parse_graph_source)]
    graph: GraphSource,
    #[arg(long)]
    kappa: Option<usize>,
    #[arg(long)]
    xi: Option<usize>,
    #[arg(long)]
    tau: Option<usize>,
    #[arg(long, default_value_t = 30)]
    max_iter: usize,
    /// Seed each graph-construction round with the previous round's clusters.
    #[arg(long)]
    warm_start: bool,
    #[command(flatten)]
    seed: SeedArg,
    /// Cluster ids, one-column ivecs.
    #[arg(long)]
    out: PathBuf,
    /// Per-iteration metrics CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Exact graph used to fill the recall column of the trace.
    #[arg(long)]
    exact_graph: Option<PathBuf>,
}

#[derive(Args)]
struct BuildGraphArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = DEFAULT_KAPPA)]
    kappa: usize,
    #[arg(long, default_value_t = DEFAULT_XI)]
    xi: usize,
    #[arg(long, default_value_t = DEFAULT_TAU)]
    tau: usize,
    #[arg(long)]
    warm_start: bool,
    #[command(flatten)]
    seed: SeedArg,
    /// Neighbour ids, kappa-column ivecs.
    #[arg(long)]
    out: PathBuf,
    /// Squared distances, kappa-column fvecs.
    #[arg(long)]
    dists: Option<PathBuf>,
    /// Per-round metrics CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Exact graph used to report recall@1 per round.
    #[arg(long)]
    exact_graph: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum RecallArg {
    /// Exact nearest neighbour anywhere in the approximate list.
    Any,
    /// Exact nearest neighbour at the head of the approximate list.
    Top,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    partition: PathBuf,
    #[arg(long)]
    exact_graph: Option<PathBuf>,
    #[arg(long)]
    approx_graph: Option<PathBuf>,
    /// Estimate recall on this many random samples instead of all rows.
    #[arg(long)]
    recall_sample: Option<usize>,
    #[arg(long, value_enum, default_value = "any")]
    recall_mode: RecallArg,
    /// Write the co-membership curve here instead of stdout.
    #[arg(long)]
    curve_out: Option<PathBuf>,
    #[command(flatten)]
    seed: SeedArg,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    d: usize,
    #[arg(long)]
    centers: usize,
    #[arg(long)]
    sigma: f64,
    #[command(flatten)]
    seed: SeedArg,
    #[arg(long)]
    out: PathBuf,
    /// Ground-truth labels, one-column ivecs.
    #[arg(long)]
    labels: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = DEFAULT_KAPPA)]
    kappa: usize,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    dists: Option<PathBuf>,
}

fn load(path: &Path) -> Result<Dataset> {
    read_fvecs(path).with_context(|| format!("reading {}", path.display()))
}

fn load_graph(path: &Path, data: &Dataset) -> Result<KnnGraph> {
    read_graph(path, data).with_context(|| format!("reading graph {}", path.display()))
}

fn write_trace(path: &Path, trace: &MetricsTrace) -> Result<()> {
    trace
        .write_csv_file(path)
        .with_context(|| format!("writing {}", path.display()))
}

fn cluster(args: ClusterArgs) -> Result<()> {
    match &args.graph {
        GraphSource::Build => {}
        GraphSource::File(_) if args.kappa.is_some() => {
            bail!("--kappa conflicts with --graph file:PATH; the file fixes the list length")
        }
        other => {
            if args.xi.is_some() || args.tau.is_some() {
                bail!(
                    "--xi and --tau only apply to --graph build, not {}",
                    other.name()
                );
            }
        }
    }
    let data = load(&args.input)?;
    let config = Config {
        k: args.k,
        kappa: args.kappa.unwrap_or(DEFAULT_KAPPA),
        xi: args.xi.unwrap_or(DEFAULT_XI),
        tau: args.tau.unwrap_or(DEFAULT_TAU),
        max_iter: args.max_iter,
        seed: args.seed.seed,
        mode: args.mode.into(),
        warm_start: args.warm_start,
    };
    let mut r = rng(config.seed);
    let graph = match &args.graph {
        GraphSource::Build => build_knn_graph(&data, &config, &mut r)?.graph,
        GraphSource::Exact => brute_force_knn(&data, config.kappa)?,
        GraphSource::Random => random_graph_init(&data, config.kappa, &mut r)?,
        GraphSource::File(p) => load_graph(p, &data)?,
    };
    let config = Config {
        kappa: graph.kappa(),
        ..config
    };
    let mut result = gk_means(&data, &graph, &config, &mut r)?;
    let recall = match (&args.graph, &args.exact_graph) {
        (_, Some(p)) => Some(recall_at_1(
            &graph,
            &load_graph(p, &data)?,
            None,
            RecallMode::AnyRank,
        )?),
        (GraphSource::Exact, None) => Some(1.0),
        _ => None,
    };
    if let Some(recall) = recall {
        result.trace.set_recall(recall);
    }
    write_partition(&args.out, &result.partition)
        .with_context(|| format!("writing {}", args.out.display()))?;
    if let Some(p) = &args.trace {
        write_trace(p, &result.trace)?;
    }
    let last = result.trace.last().expect("trace has an initial row");
    eprintln!(
        "k = {}, passes = {}, moves = {}, distortion = {}",
        config.k,
        result.passes(),
        result.total_moves,
        last.distortion
    );
    Ok(())
}

fn build_graph(args: BuildGraphArgs) -> Result<()> {
    let data = load(&args.input)?;
    let exact = args
        .exact_graph
        .as_deref()
        .map(|p| load_graph(p, &data))
        .transpose()?;
    let config = Config {
        kappa: args.kappa,
        xi: args.xi,
        tau: args.tau,
        seed: args.seed.seed,
        warm_start: args.warm_start,
        ..Config::default()
    };
    let mut recalls = Vec::with_capacity(config.tau);
    let built = build_knn_graph_observed(&data, &config, &mut rng(config.seed), |_, g, _| {
        if let Some(exact) = &exact {
            recalls.push(recall_at_1(g, exact, None, RecallMode::AnyRank).ok());
        }
    })?;
    write_graph(&args.out, args.dists.as_deref(), &built.graph)
        .with_context(|| format!("writing {}", args.out.display()))?;
    if let Some(p) = &args.trace {
        let mut trace = MetricsTrace::default();
        for (t, round) in built.rounds.iter().enumerate() {
            trace.push(TraceRow {
                iteration: t + 1,
                elapsed_seconds: round.elapsed_seconds,
                distortion: round.distortion,
                recall_at_1: recalls.get(t).copied().flatten(),
                moves_accepted: round.moves_accepted,
                distance_evals: round.cluster_evals + round.pair_evals,
            });
        }
        write_trace(p, &trace)?;
    }
    if let Some(recall) = recalls.last().copied().flatten() {
        eprintln!("recall@1 = {recall}");
    }
    Ok(())
}

fn eval(args: EvalArgs) -> Result<()> {
    let data = load(&args.input)?;
    let part = read_partition(&args.partition, &data)
        .with_context(|| format!("reading {}", args.partition.display()))?;
    let exact = args
        .exact_graph
        .as_deref()
        .map(|p| load_graph(p, &data))
        .transpose()?;
    let approx = args
        .approx_graph
        .as_deref()
        .map(|p| load_graph(p, &data))
        .transpose()?;
    if approx.is_some() && exact.is_none() {
        bail!("--approx-graph needs --exact-graph to measure recall");
    }
    if args.recall_sample.is_some() && approx.is_none() {
        bail!("--recall-sample only applies together with --approx-graph");
    }

    let stdout = io::stdout();
    let mut out = stdout.lock();
    writeln!(out, "metric,value")?;
    writeln!(out, "n,{}", data.n())?;
    writeln!(out, "k,{}", part.k())?;
    writeln!(out, "distortion,{}", distortion(&data, &part)?)?;
    if let (Some(approx), Some(exact)) = (&approx, &exact) {
        let subset = args
            .recall_sample
            .map(|m| sample_ids(data.n(), m, &mut rng(args.seed.seed)));
        let mode = match args.recall_mode {
            RecallArg::Any => RecallMode::AnyRank,
            RecallArg::Top => RecallMode::TopOnly,
        };
        writeln!(
            out,
            "recall_at_1,{}",
            recall_at_1(approx, exact, subset.as_deref(), mode)?
        )?;
    }
    if let Some(exact) = &exact {
        let mut curve = String::from("rank,co_membership_rate\n");
        for (r, rate) in co_membership_curve(&part, exact)?.into_iter().enumerate() {
            curve.push_str(&format!("{},{}\n", r + 1, rate));
        }
        match &args.curve_out {
            Some(p) => fs::write(p, curve).with_context(|| format!("writing {}", p.display()))?,
            None => write!(out, "\n{curve}")?,
        }
    } else if args.curve_out.is_some() {
        bail!("--curve-out needs --exact-graph");
    }
    Ok(())
}

fn gen(args: GenArgs) -> Result<()> {
    let (data, labels) = gen_mixture(args.n, args.d, args.centers, args.sigma, args.seed.seed)?;
    write_fvecs(&args.out, &data).with_context(|| format!("writing {}", args.out.display()))?;
    if let Some(p) = &args.labels {
        let ids: Vec<i32> = labels.iter().map(|&l| l as i32).collect();
        write_ivecs(p, 1, &ids).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

fn oracle_knn(args: OracleArgs) -> Result<()> {
    let data = load(&args.input)?;
    let graph = brute_force_knn(&data, args.kappa)?;
    write_graph(&args.out, args.dists.as_deref(), &graph)
        .with_context(|| format!("writing {}", args.out.display()))?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Cluster(a) => cluster(a),
        Command::BuildGraph(a) => build_graph(a),
        Command::Eval(a) => eval(a),
        Command::Gen(a) => gen(a),
        Command::OracleKnn(a) => oracle_knn(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
