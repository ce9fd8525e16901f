//! `labelflow`: community detection, flood-fill diagnostics and planted
//! partition benchmarks from the command line.

mod manifest;

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use labelflow::benchgen::{self, BenchmarkSpec};
use labelflow::diagnostics::{self, FloodFillThresholds};
use labelflow::metrics::{self, CommunityReport};
use labelflow::propagation::{self, Anneal, Mode, PropagationConfig, Variant};
use labelflow::{Graph, LoadOptions};
use serde::Serialize;

use crate::manifest::RunManifest;

#[derive(Parser)]
#[command(name = "labelflow", version, about = "Label propagation community detection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Detect communities in an edge list
    Detect(DetectArgs),
    /// Attraction-power profile and flood-fill risk of a graph
    Diagnose(DiagnoseArgs),
    /// Generate a planted-partition benchmark graph
    Generate(GenerateArgs),
    /// Sweep the mixing parameter over generated graphs
    Bench(BenchArgs),
}

#[derive(Args)]
struct InputArgs {
    /// Edge list: two node ids per line
    graph: PathBuf,
    /// Token separator (default: any whitespace)
    #[arg(long)]
    delimiter: Option<char>,
    /// Comment line prefix
    #[arg(long, default_value = "#")]
    comment: String,
    /// Node ids start at 1 (used with --nodes)
    #[arg(long)]
    one_based: bool,
    /// Declared node count; keeps isolated nodes
    #[arg(long)]
    nodes: Option<usize>,
    /// Output file prefix (default: input path without extension)
    #[arg(long)]
    out: Option<String>,
}

impl InputArgs {
    fn load(&self, manifest: &mut RunManifest) -> Result<Graph> {
        let bytes = fs::read(&self.graph).with_context(|| format!("reading {}", self.graph.display()))?;
        manifest.add_input(&self.graph, &bytes);
        let opts = LoadOptions {
            delimiter: self.delimiter,
            comment_prefix: self.comment.clone(),
            one_based: self.one_based,
            node_count: self.nodes,
        };
        let (graph, stats) = Graph::load_edge_list(BufReader::new(bytes.as_slice()), &opts)
            .with_context(|| format!("loading {}", self.graph.display()))?;
        if stats.duplicates_dropped + stats.self_loops_dropped > 0 {
            eprintln!(
                "warning: dropped {} duplicate edges and {} self-loops",
                stats.duplicates_dropped, stats.self_loops_dropped
            );
        }
        Ok(graph)
    }

    fn prefix(&self) -> String {
        self.out
            .clone()
            .unwrap_or_else(|| self.graph.with_extension("").display().to_string())
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Async,
    Sync,
}

#[derive(Clone, Copy, ValueEnum)]
enum AnnealArg {
    Linear,
    Off,
}

#[derive(Args)]
struct SeedArgs {
    /// RNG seed
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Draw the seed from system entropy (recorded in the manifest)
    #[arg(long, conflicts_with = "seed")]
    random_seed: bool,
}

impl SeedArgs {
    fn resolve(&self) -> u64 {
        if self.random_seed {
            rand::random()
        } else {
            self.seed
        }
    }
}

#[derive(Args)]
struct AlgoArgs {
    /// Number of capacity cycles (clpa)
    #[arg(long, default_value_t = 100)]
    k: usize,
    /// Maximum iterations (default: 5k for clpa, 100 otherwise)
    #[arg(long = "T", visible_alias = "max-iterations")]
    max_iterations: Option<usize>,
    #[arg(long, value_enum, default_value_t = ModeArg::Async)]
    mode: ModeArg,
    /// Hop attenuation (leung)
    #[arg(long, default_value_t = PropagationConfig::DEFAULT_DELTA)]
    delta: f64,
    /// Node preference exponent (leung)
    #[arg(long, default_value_t = PropagationConfig::DEFAULT_PREF_EXPONENT)]
    pref_exponent: f64,
    /// Tie-hopping schedule (clpa)
    #[arg(long, value_enum, default_value_t = AnnealArg::Linear)]
    anneal: AnnealArg,
}

impl AlgoArgs {
    fn config(&self, variant: Variant, seed: u64) -> Result<PropagationConfig> {
        let mut cfg = PropagationConfig::for_variant(variant, self.k);
        if let Some(t) = self.max_iterations {
            cfg.max_iterations = t;
        }
        cfg.mode = match self.mode {
            ModeArg::Async => Mode::Asynchronous,
            ModeArg::Sync => Mode::Synchronous,
        };
        cfg.delta = self.delta;
        cfg.pref_exponent = self.pref_exponent;
        if variant == Variant::Clpa {
            cfg.anneal = match self.anneal {
                AnnealArg::Linear => Anneal::Linear,
                AnnealArg::Off => Anneal::Off,
            };
        }
        cfg.seed = seed;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct DetectArgs {
    #[command(flatten)]
    input: InputArgs,
    /// classic, leung or clpa
    #[arg(long, default_value = "clpa")]
    algo: String,
    #[command(flatten)]
    algo_args: AlgoArgs,
    #[command(flatten)]
    seed: SeedArgs,
}

#[derive(Args)]
struct DiagnoseArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, default_value_t = 5.0)]
    variance_warn: f64,
    #[arg(long, default_value_t = 0.1)]
    hub_degree_fraction: f64,
    #[arg(long, default_value_t = 0.0)]
    hub_fraction_level: f64,
}

#[derive(Args)]
struct SpecArgs {
    #[arg(long, default_value_t = 1000)]
    n: usize,
    /// Mean degree
    #[arg(long, default_value_t = 20.0)]
    dbar: f64,
    /// Maximum degree
    #[arg(long, default_value_t = 100)]
    dmax: usize,
    /// Degree power-law exponent
    #[arg(long, default_value_t = 2.5)]
    tau: f64,
    /// Smallest community size
    #[arg(long, default_value_t = 20)]
    cmin: usize,
    /// Largest community size
    #[arg(long, default_value_t = 100)]
    cmax: usize,
}

impl SpecArgs {
    fn spec(&self, mu: f64, seed: u64) -> BenchmarkSpec {
        BenchmarkSpec {
            node_count: self.n,
            mean_degree: self.dbar,
            max_degree: self.dmax,
            mu,
            community_size_range: (self.cmin, self.cmax),
            degree_exponent: self.tau,
            seed,
        }
    }
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    spec: SpecArgs,
    /// Mixing parameter in [0, 1)
    #[arg(long, default_value_t = 0.3)]
    mu: f64,
    #[command(flatten)]
    seed: SeedArgs,
    /// Output file prefix
    #[arg(long, default_value = "planted")]
    out: String,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    spec: SpecArgs,
    /// Comma-separated mixing values
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8")]
    mu_list: Vec<f64>,
    /// Graphs per mixing value
    #[arg(long, default_value_t = 10)]
    seeds: usize,
    /// Comma-separated algorithms
    #[arg(long, value_delimiter = ',', default_value = "classic,clpa")]
    algos: Vec<String>,
    #[command(flatten)]
    algo_args: AlgoArgs,
    #[command(flatten)]
    seed: SeedArgs,
    /// Worker threads (default: all cores)
    #[arg(long, env = "LABELFLOW_JOBS")]
    jobs: Option<usize>,
    /// Output file prefix
    #[arg(long, default_value = "sweep")]
    out: String,
}

fn output(prefix: &str, suffix: &str) -> PathBuf {
    PathBuf::from(format!("{prefix}.{suffix}"))
}

fn write_file(manifest: &mut RunManifest, path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))?;
    manifest.add_output(path);
    Ok(())
}

fn json_bytes(value: &impl Serialize) -> Result<Vec<u8>> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(text.into_bytes())
}

fn cmd_detect(args: &DetectArgs) -> Result<()> {
    let variant: Variant = args.algo.parse()?;
    let seed = args.seed.resolve();
    let cfg = args.algo_args.config(variant, seed)?;
    let mut manifest = RunManifest::new("detect", seed, &cfg)?;
    let graph = args.input.load(&mut manifest)?;

    let (labeling, trace) = propagation::run(&graph, &cfg)?;
    let report = CommunityReport::compute(&graph, labeling.labels())?;

    let prefix = args.input.prefix();
    let mut buf = Vec::new();
    labeling.write_csv(&graph, &mut buf)?;
    write_file(&mut manifest, &output(&prefix, "communities.csv"), &buf)?;
    write_file(&mut manifest, &output(&prefix, "report.json"), &json_bytes(&report)?)?;
    buf.clear();
    trace.write_csv(&mut buf)?;
    write_file(&mut manifest, &output(&prefix, "trace.csv"), &buf)?;
    buf.clear();
    graph.write_remap_csv(&mut buf)?;
    write_file(&mut manifest, &output(&prefix, "remap.csv"), &buf)?;
    manifest.write(&output(&prefix, "manifest.json"))?;

    println!(
        "{}: {} communities, modularity {:.6}, {} iterations{}",
        variant.name(),
        report.community_count,
        report.modularity,
        trace.iterations_used,
        if trace.converged { " (converged)" } else { "" }
    );
    Ok(())
}

fn cmd_diagnose(args: &DiagnoseArgs) -> Result<()> {
    let thresholds = FloodFillThresholds {
        variance_warn: args.variance_warn,
        hub_degree_fraction: args.hub_degree_fraction,
        hub_fraction_level: args.hub_fraction_level,
    };
    let mut manifest = RunManifest::new("diagnose", 0, thresholds)?;
    let graph = args.input.load(&mut manifest)?;
    let profile = diagnostics::attraction_power(&graph);
    let report = diagnostics::flood_fill_report(&graph, &thresholds);

    let prefix = args.input.prefix();
    let mut buf = Vec::new();
    profile.write_csv(&graph, &mut buf)?;
    write_file(&mut manifest, &output(&prefix, "attraction.csv"), &buf)?;
    write_file(&mut manifest, &output(&prefix, "risk.json"), &json_bytes(&report)?)?;
    manifest.write(&output(&prefix, "manifest.json"))?;

    println!(
        "var(A) = {:.6}, hub fraction = {:.6}, risk = {}",
        report.attraction_variance,
        report.hub_fraction,
        serde_json::to_value(report.risk)?.as_str().unwrap_or("?")
    );
    Ok(())
}

fn cmd_generate(args: &GenerateArgs) -> Result<()> {
    let seed = args.seed.resolve();
    let spec = args.spec.spec(args.mu, seed);
    let mut manifest = RunManifest::new("generate", seed, &spec)?;
    let planted = benchgen::generate(&spec)?;

    let mut buf = Vec::new();
    planted.graph.write_edge_list(&mut buf)?;
    write_file(&mut manifest, &output(&args.out, "edges.txt"), &buf)?;
    buf.clear();
    metrics::write_ground_truth(&planted.graph, planted.ground_truth.labels(), &mut buf)?;
    write_file(&mut manifest, &output(&args.out, "groundtruth.txt"), &buf)?;
    write_file(&mut manifest, &output(&args.out, "meta.json"), &json_bytes(&planted.metadata(&spec))?)?;
    manifest.write(&output(&args.out, "manifest.json"))?;

    println!(
        "N = {}, M = {}, communities = {}, realized mu = {:.4}, mean degree = {:.3}",
        planted.graph.node_count(),
        planted.graph.edge_count(),
        planted.community_sizes.len(),
        planted.realized_mu,
        planted.realized_mean_degree
    );
    Ok(())
}

fn cmd_bench(args: &BenchArgs) -> Result<()> {
    if args.mu_list.is_empty() {
        bail!("--mu-list is empty");
    }
    let seed = args.seed.resolve();
    let base = args.spec.spec(args.mu_list[0], seed);
    let algorithms = args
        .algos
        .iter()
        .map(|name| args.algo_args.config(name.parse()?, seed))
        .collect::<Result<Vec<_>>>()?;

    #[derive(Serialize)]
    struct BenchConfig<'a> {
        spec: &'a BenchmarkSpec,
        mu_list: &'a [f64],
        seeds: usize,
        algorithms: &'a [PropagationConfig],
    }
    let mut manifest = RunManifest::new(
        "bench",
        seed,
        BenchConfig {
            spec: &base,
            mu_list: &args.mu_list,
            seeds: args.seeds,
            algorithms: &algorithms,
        },
    )?;
    let result = benchgen::sweep(&base, &args.mu_list, args.seeds, &algorithms, args.jobs)?;

    let mut buf = Vec::new();
    result.write_csv(&mut buf)?;
    write_file(&mut manifest, &output(&args.out, "csv"), &buf)?;
    buf.clear();
    result.write_summary_csv(&mut buf)?;
    write_file(&mut manifest, &output(&args.out, "summary.csv"), &buf)?;
    manifest.write(&output(&args.out, "manifest.json"))?;

    println!("mu\talgorithm\tmean_nmi\tmean_modularity\tmean_gt_dissatisfied");
    for s in &result.summary {
        println!(
            "{}\t{}\t{:.4}\t{:.4}\t{:.1}",
            s.mu, s.algorithm, s.mean_nmi, s.mean_modularity, s.mean_gt_dissatisfied
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::Detect(a) => cmd_detect(a),
        Command::Diagnose(a) => cmd_diagnose(a),
        Command::Generate(a) => cmd_generate(a),
        Command::Bench(a) => cmd_bench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            match err.downcast_ref::<labelflow::Error>() {
                Some(labelflow::Error::Invariant(_)) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
