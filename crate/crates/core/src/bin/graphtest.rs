//! Command-line front end. Machine-readable output goes to stdout (or
//! `--out`), progress and summaries to stderr.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use graphtest::distances::{euclidean_distances, network_distance_d1, network_distance_d2};
use graphtest::inference::{run_tests, GraphInfo, PValueMode, PermutationConfig, StatisticKind, TestResult};
use graphtest::simulation::{pvalue_accuracy_study, run_power_study, ScenarioSpec};
use graphtest::{io as gio, DistanceMatrix, Error, GraphSpec, Result};

#[derive(Parser)]
#[command(name = "graphtest", version, about = "Graph-based two-sample tests")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "GRAPHTEST_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one or all statistics on a labelled data set.
    Test(TestArgs),
    /// Build a similarity graph and write it as an edge list.
    Graph(GraphArgs),
    /// Report degree and neighbourhood diagnostics of a graph.
    Diagnose(DiagnoseArgs),
    /// Simulated power study from a scenario JSON file.
    Power(StudyArgs),
    /// Asymptotic versus permutation p-values on simulated null data.
    Accuracy(StudyArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum NetDist {
    D1,
    D2,
}

#[derive(Args)]
struct Input {
    /// Vector data CSV (Euclidean distances).
    #[arg(long, conflicts_with_all = ["dist", "networks"])]
    data: Option<PathBuf>,
    /// Precomputed distance matrix CSV.
    #[arg(long, conflicts_with = "networks")]
    dist: Option<PathBuf>,
    /// Adjacency bundle: directory of CSVs or a JSON array.
    #[arg(long)]
    networks: Option<PathBuf>,
    /// Network distance for --networks.
    #[arg(long, value_enum, default_value = "d1")]
    net_dist: NetDist,
}

impl Input {
    fn distances(&self) -> Result<DistanceMatrix> {
        if let Some(path) = &self.data {
            euclidean_distances(&gio::read_vectors(path)?)
        } else if let Some(path) = &self.dist {
            gio::read_distance_matrix(path)
        } else if let Some(path) = &self.networks {
            let nets = gio::read_networks(path)?;
            match self.net_dist {
                NetDist::D1 => network_distance_d1(&nets),
                NetDist::D2 => network_distance_d2(&nets),
            }
        } else {
            Err(Error::InvalidSpec("one of --data, --dist or --networks is required".into()))
        }
    }
}

#[derive(Args)]
struct TestArgs {
    #[command(flatten)]
    input: Input,
    /// Sample labels (1 or 2 per line).
    #[arg(long)]
    labels: PathBuf,
    #[arg(long, default_value = "kmst:5")]
    graph: GraphSpec,
    /// Statistic name or `all`.
    #[arg(long, default_value = "weighted")]
    stat: String,
    /// perm, asym or both (default: both when N <= 1000, else asym).
    #[arg(long)]
    pvalue: Option<PValueMode>,
    #[arg(long, default_value_t = 1000)]
    nperm: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write JSON here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GraphArgs {
    #[command(flatten)]
    input: Input,
    #[arg(long, default_value = "kmst:5")]
    graph: GraphSpec,
    /// Edge list destination (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DiagnoseArgs {
    #[command(flatten)]
    input: Input,
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long, default_value = "kmst:5")]
    graph: GraphSpec,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct StudyArgs {
    /// Scenario JSON file.
    #[arg(long)]
    spec: PathBuf,
    /// CSV report destination; the JSON report always goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn parse_stats(stat: &str) -> Result<Vec<StatisticKind>> {
    if stat == "all" {
        Ok(StatisticKind::ALL.to_vec())
    } else {
        stat.split(',').map(str::parse).collect()
    }
}

fn cmd_test(args: &TestArgs) -> Result<()> {
    let kinds = parse_stats(&args.stat)?;
    let dist = args.input.distances()?;
    let layout = gio::read_labels(&args.labels)?;
    if layout.total() != dist.size() {
        return Err(Error::LengthMismatch { expected: dist.size(), found: layout.total() });
    }
    let graph = args.graph.build(&dist)?;
    let mode = args.pvalue.unwrap_or(if dist.size() <= 1000 { PValueMode::Both } else { PValueMode::Asym });
    let config = PermutationConfig::new(args.nperm, args.seed)?;
    let mut results: Vec<TestResult> = run_tests(&graph, &layout, &kinds, mode, &config)?;
    let info = GraphInfo::new(&args.graph, &graph);
    for r in &mut results {
        r.graph = info.clone();
    }
    eprintln!("graph {} on N = {} (m = {}, n = {}), |G| = {}", args.graph, dist.size(), layout.m(), layout.n(), graph.edge_count());
    eprintln!("{:<15} {:>12} {:>12} {:>10} {:>9} {:>9} {:>9}", "statistic", "value", "mean", "sd", "z", "p_perm", "p_asym");
    let fmt_p = |p: Option<f64>| p.map_or("-".to_string(), |p| format!("{p:.4}"));
    for r in &results {
        eprintln!(
            "{:<15} {:>12.4} {:>12.4} {:>10.4} {:>9.3} {:>9} {:>9}",
            r.statistic.name(),
            r.value,
            r.mean,
            r.sd,
            r.z,
            fmt_p(r.p_perm),
            fmt_p(r.p_asym)
        );
    }
    let mut out = output(args.out.as_deref())?;
    gio::write_test_results(&mut out, &results)?;
    out.flush()?;
    Ok(())
}

fn cmd_graph(args: &GraphArgs) -> Result<()> {
    let dist = args.input.distances()?;
    let graph = args.graph.build(&dist)?;
    eprintln!("graph {}: {} nodes, {} edges", args.graph, graph.node_count(), graph.edge_count());
    let mut out = output(args.out.as_deref())?;
    gio::write_edge_list(&mut out, &graph)?;
    out.flush()?;
    Ok(())
}

fn cmd_diagnose(args: &DiagnoseArgs) -> Result<()> {
    let dist = args.input.distances()?;
    let layout = args.labels.as_deref().map(gio::read_labels).transpose()?;
    let graph = args.graph.build(&dist)?;
    let diag = graph.diagnose(layout.as_ref())?;
    eprintln!(
        "|G| = {}, D = {:.4}, D/|G| = {:.4}, alpha_hat = {:.4}",
        diag.edge_count, diag.flatness_gap, diag.flatness_gap_over_edges, diag.alpha_hat
    );
    let mut out = output(args.out.as_deref())?;
    serde_json::to_writer_pretty(&mut out, &diag)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn read_spec(path: &Path) -> Result<ScenarioSpec> {
    let text = std::fs::read_to_string(path)?;
    let spec: ScenarioSpec =
        serde_json::from_str(&text).map_err(|e| Error::InvalidSpec(format!("{}: {e}", path.display())))?;
    spec.validate()?;
    Ok(spec)
}

fn cmd_power(args: &StudyArgs) -> Result<()> {
    let spec = read_spec(&args.spec)?;
    eprintln!("power study: {} trials, m = {}, n = {}, d = {}, shift = {}", spec.trials, spec.m, spec.n, spec.d, spec.shift);
    let report = run_power_study(&spec)?;
    for r in &report.rows {
        eprintln!("k = {:<3} {:<15} power {:.3} (se {:.3})", r.k, r.statistic.name(), r.power, r.stderr);
    }
    if let Some(path) = &args.out {
        report.write_csv(BufWriter::new(File::create(path)?))?;
    }
    let mut out = output(None)?;
    serde_json::to_writer_pretty(&mut out, &report)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn cmd_accuracy(args: &StudyArgs) -> Result<()> {
    let spec = read_spec(&args.spec)?;
    eprintln!("accuracy study: {} runs, m = {}, n = {}, d = {}", spec.trials, spec.m, spec.n, spec.d);
    let report = pvalue_accuracy_study(&spec)?;
    for s in &report.summaries {
        eprintln!(
            "{:<15} median |diff| {:.4}, p95 {:.4}, max {:.4}",
            s.statistic.name(),
            s.median_abs_diff,
            s.p95_abs_diff,
            s.max_abs_diff
        );
    }
    if let Some(path) = &args.out {
        let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
        let to_err = |e: csv::Error| Error::Internal(format!("csv writer: {e}"));
        w.write_record(["statistic", "run", "p_asym", "p_perm"]).map_err(to_err)?;
        for s in &report.summaries {
            for (run, (a, p)) in s.pairs.iter().enumerate() {
                w.write_record([s.statistic.name().to_string(), run.to_string(), a.to_string(), p.to_string()])
                    .map_err(to_err)?;
            }
        }
        w.flush()?;
    }
    let mut out = output(None)?;
    serde_json::to_writer_pretty(&mut out, &report)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Error::Internal(format!("thread pool: {e}")))?;
    }
    match &cli.command {
        Command::Test(a) => cmd_test(a),
        Command::Graph(a) => cmd_graph(a),
        Command::Diagnose(a) => cmd_diagnose(a),
        Command::Power(a) => cmd_power(a),
        Command::Accuracy(a) => cmd_accuracy(a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
