mod output;

use clap::{Args, Parser, Subcommand, ValueEnum};
use output::{emit, Cell, Format, Table};
use rayon::prelude::*;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use tree_entropy::certify::{certify, CertKind, ModeReport};
use tree_entropy::energy::{
    anneal_max, energy_bounds, estimate_log_partition, log_partition, max_config, optimum_bounds, partition_schedule,
    Bounds, EnergySettings, FactorPotential,
};
use tree_entropy::graph::{
    annealed_from_counts, count_microstates_multi, estimate_microstates, quantile, ColoredGraph, GraphModel, LogValue,
    McmcSettings, DEFAULT_MAX_REJECTS,
};
use tree_entropy::io::{parse_law, split_lines, write_law};
use tree_entropy::markov::{is_markov, is_vertex_markov, markov_defect, vertex_defect, vertex_markov_star};
use tree_entropy::ugw::{parse_ugw_law, sigma_e_ugw, sigma_e_ugw_pair, sigma_r_ugw, sigma_r_ugw_conditional, DegreeDistribution};
use tree_entropy::{sigma_e, sigma_r, sigma_unlabeled, BallShape, EntropyReport, Error, LocalLaw, ShapeKind};

/// Annealed entropies, typicality certificates and micro-state counts for colorings of
/// regular and Galton-Watson trees and random regular graphs.
#[derive(Parser, Debug)]
#[command(name = "tree-entropy", version)]
struct Cli {
    /// Worker threads (default: available cores). Results do not depend on it.
    #[arg(long, global = true, env = "TREE_ENTROPY_THREADS")]
    threads: Option<usize>,
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Write results here (plus a `.meta` file with run metadata) instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Annealed entropies of a ball or edge law.
    Sigma(SigmaArgs),
    /// Entropy defects measuring distance from the Markov extension.
    Defect(DefectArgs),
    /// Certify typicality through the coupling second-moment condition.
    Certify(CertifyArgs),
    /// Micro-state count or Monte Carlo estimate on one graph.
    Microstate(MicrostateArgs),
    /// Per-graph micro-state entropies and their quantiles.
    Hn(HnArgs),
    /// Annealed entropy from the mean micro-state count.
    SigmaN(SigmaNArgs),
    /// Free energy of a local potential: entropy bounds and small-graph values.
    Energy(EnergyArgs),
    /// Optimum of a local potential: entropy bounds and small-graph values.
    Optimum(EnergyArgs),
    /// Annealed entropies on a unimodular Galton-Watson tree.
    UgwSigma(UgwSigmaArgs),
    /// Check that a law file is a valid invariant law.
    Validate(ValidateArgs),
}

#[derive(Args, Debug)]
struct SigmaArgs {
    /// Law file.
    #[arg(long)]
    law: PathBuf,
    /// Degree; must match the law.
    #[arg(long)]
    d: Option<usize>,
    /// Report entropies in bits instead of nats.
    #[arg(long)]
    bits: bool,
}

#[derive(Args, Debug)]
struct DefectArgs {
    /// Ball law file of radius >= 1.
    #[arg(long)]
    law: PathBuf,
    /// Tolerance for the Markov property tests.
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum KindArg {
    /// Edge law, vertex-Markov extension.
    Vertex,
    /// Radius-1 ball law, 1-Markov extension.
    Ball,
    /// Edge law, vertex-Markov extension on a Galton-Watson tree.
    UgwVertex,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    /// Branch-and-bound over a net of cells; certifies when it closes.
    Net,
    /// Projected ascent from random starts; never certifies.
    Heuristic,
}

#[derive(Args, Debug)]
struct CertifyArgs {
    /// Law file: an edge law for the vertex kinds, a radius-1 ball law for `ball`.
    #[arg(long)]
    law: PathBuf,
    /// Which Markov extension to certify.
    #[arg(long, value_enum)]
    kind: KindArg,
    /// Degree used by the vertex kind (may be fractional); defaults to the law's degree.
    #[arg(long)]
    d: Option<f64>,
    /// Degree distribution `k:p,k:p,...` for the ugw-vertex kind.
    #[arg(long)]
    pi: Option<String>,
    /// Search mode.
    #[arg(long, value_enum, default_value_t = ModeArg::Net)]
    mode: ModeArg,
    /// Initial net cells per unit length.
    #[arg(long, default_value_t = 32)]
    resolution: u32,
    /// Cell budget of the net search.
    #[arg(long, default_value_t = tree_entropy::certify::DEFAULT_MAX_CELLS)]
    max_cells: usize,
    /// Random starts of the heuristic mode.
    #[arg(long, default_value_t = 16)]
    restarts: usize,
    /// Ascent iterations per start.
    #[arg(long, default_value_t = 400)]
    iters: usize,
    /// Seed (required by the heuristic mode).
    #[arg(long)]
    seed: Option<u64>,
    /// Write the best coupling found as a law file.
    #[arg(long)]
    coupling_out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct GraphArgs {
    /// Number of vertices of sampled graphs.
    #[arg(long)]
    n: Option<usize>,
    /// Degree of sampled regular graphs.
    #[arg(long)]
    d: Option<usize>,
    /// File with one vertex degree per line, instead of `--d`.
    #[arg(long, conflicts_with = "d")]
    degrees: Option<PathBuf>,
    /// Seed for graph sampling and Monte Carlo.
    #[arg(long)]
    seed: Option<u64>,
    /// Rejected pairings allowed per sampled graph.
    #[arg(long, default_value_t = DEFAULT_MAX_REJECTS)]
    max_rejects: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum CountMode {
    /// Enumerate every coloring.
    Exhaustive,
    /// Stepping-stone estimate of the relaxed count.
    Mcmc,
}

#[derive(Args, Debug)]
struct MicrostateArgs {
    /// Target law; an edge law stands for its vertex-Markov star law.
    #[arg(long)]
    law: PathBuf,
    /// Edge-list graph file; otherwise graph `--index` of the run seeded with `--seed` is sampled.
    #[arg(long)]
    graph: Option<PathBuf>,
    #[command(flatten)]
    g: GraphArgs,
    /// Which sampled graph to use.
    #[arg(long, default_value_t = 0)]
    index: u64,
    /// Radius of the ball statistics (default: the law's radius).
    #[arg(long)]
    r: Option<usize>,
    /// Total-variation tolerances.
    #[arg(long, value_delimiter = ',', default_values_t = [0.05, 0.1, 0.2])]
    eps: Vec<f64>,
    /// Exact enumeration or Monte Carlo estimate.
    #[arg(long, value_enum, default_value_t = CountMode::Exhaustive)]
    mode: CountMode,
    /// Largest inverse temperature of the Monte Carlo estimate.
    #[arg(long, default_value_t = 4.0)]
    beta: f64,
    /// Sweeps per Monte Carlo stage.
    #[arg(long, default_value_t = 4000)]
    sweeps: usize,
}

#[derive(Args, Debug)]
struct HnArgs {
    /// Target law; an edge law stands for its vertex-Markov star law.
    #[arg(long)]
    law: PathBuf,
    #[command(flatten)]
    g: GraphArgs,
    /// Radius of the ball statistics (default: the law's radius).
    #[arg(long)]
    r: Option<usize>,
    /// Total-variation tolerances.
    #[arg(long, value_delimiter = ',', default_values_t = [0.05, 0.1, 0.2])]
    eps: Vec<f64>,
    /// Number of sampled graphs.
    #[arg(long, default_value_t = 50)]
    graphs: usize,
    /// Quantile levels.
    #[arg(long, value_delimiter = ',', default_values_t = [0.5])]
    alpha: Vec<f64>,
}

#[derive(Args, Debug)]
struct SigmaNArgs {
    /// Target law; an edge law stands for its vertex-Markov star law.
    #[arg(long)]
    law: PathBuf,
    #[command(flatten)]
    g: GraphArgs,
    /// Radius of the ball statistics (default: the law's radius).
    #[arg(long)]
    r: Option<usize>,
    /// Total-variation tolerances.
    #[arg(long, value_delimiter = ',', default_values_t = [0.05, 0.1, 0.2])]
    eps: Vec<f64>,
    /// Number of sampled graphs.
    #[arg(long, default_value_t = 50)]
    graphs: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum SolveMode {
    /// Enumerate every coloring.
    Exhaustive,
    /// Monte Carlo for the free energy, simulated annealing for the optimum.
    Estimate,
}

#[derive(Args, Debug)]
struct EnergyArgs {
    /// Potential file.
    #[arg(long)]
    potential: PathBuf,
    /// Degree of the limiting regular tree; also used for sampled graphs.
    #[arg(long)]
    d: usize,
    /// Edge-list graph to evaluate on.
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Vertices of sampled graphs.
    #[arg(long)]
    n: Option<usize>,
    /// Number of sampled graphs.
    #[arg(long, default_value_t = 0)]
    graphs: usize,
    /// Seed for sampled graphs and the estimate mode.
    #[arg(long)]
    seed: Option<u64>,
    /// Exact enumeration or estimate.
    #[arg(long, value_enum, default_value_t = SolveMode::Exhaustive)]
    mode: SolveMode,
    /// Sweeps of the estimate mode.
    #[arg(long, default_value_t = 4000)]
    sweeps: usize,
    /// Skip the entropy bounds.
    #[arg(long)]
    skip_bounds: bool,
    /// Initial net cells per unit length of the bound search.
    #[arg(long, default_value_t = 32)]
    resolution: u32,
    /// Cell budget of the bound search.
    #[arg(long, default_value_t = 100_000)]
    max_cells: usize,
    /// Target width of the upper bound search.
    #[arg(long, default_value_t = 1e-6)]
    tolerance: f64,
}

#[derive(Args, Debug)]
struct UgwSigmaArgs {
    /// UGW law file (`kind=ugw`) or an edge law on `E_1`.
    #[arg(long)]
    law: PathBuf,
    /// Degree distribution `k:p,...`; required for edge laws, overrides the one in UGW files.
    #[arg(long)]
    pi: Option<String>,
    /// Report entropies in bits instead of nats.
    #[arg(long)]
    bits: bool,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    /// Law file (regular or `kind=ugw`).
    #[arg(long)]
    law: PathBuf,
}

enum Fail {
    Usage(String),
    Domain(Error),
    Io(String),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Domain(e)
    }
}

type Run<T> = std::result::Result<T, Fail>;

fn read(path: &Path) -> Run<String> {
    std::fs::read_to_string(path).map_err(|e| Fail::Io(format!("{}: {e}", path.display())))
}

fn load_law(path: &Path) -> Run<LocalLaw<f64>> {
    Ok(parse_law::<f64>(&read(path)?)?.0)
}

fn need_seed(seed: Option<u64>, what: &str) -> Run<u64> {
    seed.ok_or_else(|| Fail::Usage(format!("--seed is required for {what}")))
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = Cli::parse();
    let threads = cli.threads.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if threads == 0 {
        return usage("--threads must be positive");
    }
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
        eprintln!("warning: thread pool already initialized: {e}");
    }
    let result = match &cli.command {
        Command::Sigma(a) => cmd_sigma(a),
        Command::Defect(a) => cmd_defect(a),
        Command::Certify(a) => cmd_certify(a),
        Command::Microstate(a) => cmd_microstate(a),
        Command::Hn(a) => cmd_hn(a),
        Command::SigmaN(a) => cmd_sigma_n(a),
        Command::Energy(a) => cmd_energy(a, false),
        Command::Optimum(a) => cmd_energy(a, true),
        Command::UgwSigma(a) => cmd_ugw_sigma(a),
        Command::Validate(a) => cmd_validate(a),
    };
    let (table, rejected) = match result {
        Ok(Outcome::Table(t)) => (t, None),
        Ok(Outcome::Rejected(t, e)) => (t, Some(e)),
        Err(Fail::Usage(msg)) => return usage(&msg),
        Err(Fail::Domain(e)) => return domain(e.kind(), &e.to_string()),
        Err(Fail::Io(msg)) => return domain("io", &msg),
    };
    if let Err(e) = emit(&table, cli.format, cli.out.as_deref(), &argv, threads) {
        return domain("io", &e.to_string());
    }
    match rejected {
        Some(e) => domain(e.kind(), &e.to_string()),
        None => ExitCode::SUCCESS,
    }
}

/// A table, or a table followed by a domain error (used by `validate`).
enum Outcome {
    Table(Table),
    Rejected(Table, Error),
}

impl From<Table> for Outcome {
    fn from(t: Table) -> Self {
        Outcome::Table(t)
    }
}

fn usage(msg: &str) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(2)
}

fn domain(kind: &str, msg: &str) -> ExitCode {
    let rec = serde_json::json!({ "schema": output::SCHEMA, "error": kind, "message": msg });
    eprintln!("{rec}");
    ExitCode::from(1)
}

fn report_rows(t: &mut Table, name: &str, rep: &EntropyReport<f64>, scale: f64) {
    t.kv(name, rep.value * scale);
    for (k, v) in &rep.components {
        t.kv(&format!("{name}.{k}"), v * scale);
    }
}

fn cmd_sigma(a: &SigmaArgs) -> Run<Outcome> {
    let law = load_law(&a.law)?;
    let d = law.d();
    if a.d.is_some_and(|x| x != d) {
        return Err(Error::ShapeMismatch(format!("law has degree {d}, --d is {}", a.d.unwrap())).into());
    }
    let scale = if a.bits { 1.0 / std::f64::consts::LN_2 } else { 1.0 };
    let mut t = Table::new(&["quantity", "value"]);
    t.kv("unit", if a.bits { "bits" } else { "nats" });
    if law.r() >= 1 {
        let edge = law.restrict(&BallShape::edge(d, 1)?)?;
        report_rows(&mut t, "sigma_e", &sigma_e(&edge, d)?, scale);
    }
    if law.kind() == ShapeKind::Ball {
        for r in 1..=law.r() {
            let ball = law.restrict_to_ball(r)?;
            report_rows(&mut t, &format!("sigma_{r}"), &sigma_r(&ball, d)?, scale);
        }
        if law.r() >= 1 {
            t.kv(&format!("sigma_{}.unlabeled", law.r()), sigma_unlabeled(&law, d)?.value * scale);
        }
    }
    if law.r() == 0 {
        return Err(Error::InvalidLaw("annealed entropies need radius >= 1".into()).into());
    }
    Ok(t.into())
}

fn cmd_defect(a: &DefectArgs) -> Run<Outcome> {
    let law = load_law(&a.law)?;
    let d = law.d();
    if law.kind() != ShapeKind::Ball || law.r() == 0 {
        return Err(Error::InvalidLaw("expected a ball law of radius >= 1".into()).into());
    }
    let mut t = Table::new(&["quantity", "value"]);
    t.kv("vertex_defect", vertex_defect(&law.restrict_to_ball(1)?, d)?);
    t.kv("vertex_markov", is_vertex_markov(&law.restrict_to_ball(1)?, a.tol)?.to_string());
    for r in 2..=law.r() {
        let ball = law.restrict_to_ball(r)?;
        t.kv(&format!("markov_defect_{}", r - 1), markov_defect(&ball, d)?);
        t.kv(&format!("markov_{}", r - 1), is_markov(&ball, a.tol)?.to_string());
    }
    Ok(t.into())
}

fn cmd_certify(a: &CertifyArgs) -> Run<Outcome> {
    let law = load_law(&a.law)?;
    let kind = match a.kind {
        KindArg::Vertex => CertKind::Vertex { d: a.d.unwrap_or(law.d() as f64) },
        KindArg::Ball => CertKind::Ball,
        KindArg::UgwVertex => {
            let pi = a.pi.as_deref().ok_or_else(|| Fail::Usage("--pi is required for --kind ugw-vertex".into()))?;
            CertKind::UgwVertex { pi: DegreeDistribution::parse(pi)? }
        }
    };
    if a.resolution == 0 {
        return Err(Fail::Usage("--resolution must be positive".into()));
    }
    let mode = match a.mode {
        ModeArg::Net => tree_entropy::certify::Mode::RigorousNet {
            resolution: 1.0 / f64::from(a.resolution),
            max_cells: a.max_cells,
        },
        ModeArg::Heuristic => tree_entropy::certify::Mode::Heuristic {
            restarts: a.restarts,
            seed: need_seed(a.seed, "the heuristic mode")?,
            iters: a.iters,
        },
    };
    let cert = certify(&law, &kind, &mode)?;
    let mut t = Table::new(&["quantity", "value"]);
    t.kv("theorem", cert.theorem.as_str());
    t.kv("verdict", cert.verdict.as_str());
    t.kv("sigma", cert.sigma);
    t.kv("threshold", cert.threshold);
    t.kv("coupling_sigma", cert.s);
    t.kv("upper", cert.upper);
    t.kv("gap", cert.gap_bound());
    t.kv("entropy", cert.entropy);
    match cert.mode {
        ModeReport::RigorousNet { resolution, bound, cells } => {
            t.kv("mode", "net");
            t.kv("resolution", resolution);
            t.kv("net_bound", bound);
            t.kv("cells", cells);
        }
        ModeReport::Heuristic { restarts } => {
            t.kv("mode", "heuristic");
            t.kv("restarts", restarts);
        }
    }
    for note in &cert.notes {
        t.kv("note", note.as_str());
    }
    if let (Some(path), Some(c)) = (&a.coupling_out, &cert.coupling) {
        std::fs::write(path, write_law(c.joint(), &[])).map_err(|e| Fail::Io(format!("{}: {e}", path.display())))?;
    }
    Ok(t.into())
}

fn degrees_of(g: &GraphArgs) -> Run<(Vec<usize>, String)> {
    let n = g.n.ok_or_else(|| Fail::Usage("--n is required to sample graphs".into()))?;
    if let Some(path) = &g.degrees {
        let (_, body) = split_lines(&read(path)?)?;
        let degs = body
            .iter()
            .map(|(line, s)| {
                s.trim().parse::<usize>().map_err(|_| Error::Parse { line: *line, msg: format!("bad degree {s:?}") })
            })
            .collect::<Result<Vec<_>, _>>()?;
        if degs.len() != n {
            return Err(Error::Degree(format!("degree file lists {} vertices, --n is {n}", degs.len())).into());
        }
        return Ok((degs, path.display().to_string()));
    }
    let d = g.d.ok_or_else(|| Fail::Usage("--d or --degrees is required to sample graphs".into()))?;
    Ok((vec![d; n], d.to_string()))
}

fn model_of(g: &GraphArgs) -> Run<(GraphModel, String)> {
    let (degrees, label) = degrees_of(g)?;
    Ok((GraphModel { degrees, max_rejects: g.max_rejects }, label))
}

/// Target ball law for counting: an edge law stands for its vertex-Markov star law;
/// a ball law is restricted to radius `r` when asked.
fn law_at_radius(law: LocalLaw<f64>, r: Option<usize>) -> Run<LocalLaw<f64>> {
    let law = if law.kind() == ShapeKind::Edge && law.r() == 1 { vertex_markov_star(&law)? } else { law };
    match r {
        None => Ok(law),
        Some(r) if r == law.r() => Ok(law),
        Some(r) if r < law.r() && law.kind() == ShapeKind::Ball => Ok(law.restrict_to_ball(r)?),
        Some(r) => Err(Error::Radius { found: r, limit: law.r() }.into()),
    }
}

fn check_eps(eps: &[f64]) -> Run<()> {
    if eps.is_empty() || eps.iter().any(|e| !(0.0..=1.0).contains(e)) {
        return Err(Fail::Usage("--eps values must lie in [0, 1]".into()));
    }
    Ok(())
}

fn cmd_microstate(a: &MicrostateArgs) -> Run<Outcome> {
    check_eps(&a.eps)?;
    let law = law_at_radius(load_law(&a.law)?, a.r)?;
    let (g, dlabel, seed) = match &a.graph {
        Some(path) => {
            let g = ColoredGraph::parse_edge_list(&read(path)?)?;
            (g, path.display().to_string(), a.g.seed)
        }
        None => {
            let (model, label) = model_of(&a.g)?;
            let seed = need_seed(a.g.seed, "sampled graphs")?;
            (model.sample(seed, a.index)?, label, Some(seed))
        }
    };
    let n = g.n();
    let cols = ["n", "d", "r", "eps", "seed", "mode", "quantity", "value", "stderr"];
    let mut t = Table::new(&cols);
    let row = |t: &mut Table, eps: f64, mode: &str, q: &str, v: Cell, se: Cell| {
        t.push(vec![n.into(), dlabel.clone().into(), law.r().into(), eps.into(), seed.into(), mode.into(), q.into(), v, se]);
    };
    match a.mode {
        CountMode::Exhaustive => {
            for c in count_microstates_multi(&g, &law, &a.eps)? {
                row(&mut t, c.eps, "exhaustive", "count", c.count.into(), Cell::Missing);
                row(&mut t, c.eps, "exhaustive", "H_G", c.h.into(), Cell::Missing);
            }
        }
        CountMode::Mcmc => {
            let seed = need_seed(seed, "the Monte Carlo mode")?;
            let mut settings = McmcSettings::for_beta(a.beta, n);
            settings.sweeps = a.sweeps;
            for &eps in &a.eps {
                let z = estimate_microstates(&g, &law, eps, &settings, seed)?;
                row(&mut t, eps, "mcmc", "ln_Z/n", z.value.into(), z.stderr.into());
                row(&mut t, eps, "mcmc", "H_G_lower", z.f_lower.into(), Cell::Missing);
                row(&mut t, eps, "mcmc", "H_G_upper", z.f_upper.into(), Cell::Missing);
                row(&mut t, eps, "mcmc", "min_ess", z.min_ess.into(), Cell::Missing);
                row(&mut t, eps, "mcmc", "flagged", z.flagged.to_string().into(), Cell::Missing);
            }
        }
    }
    Ok(t.into())
}

/// Exhaustive counts for every sampled graph and every `eps`: `counts[graph][eps]`.
fn sampled_counts(law: &LocalLaw<f64>, model: &GraphModel, graphs: usize, eps: &[f64], seed: u64) -> Run<Vec<Vec<u64>>> {
    let per: Vec<tree_entropy::Result<Vec<u64>>> = (0..graphs)
        .into_par_iter()
        .map(|i| Ok(count_microstates_multi(&model.sample(seed, i as u64)?, law, eps)?.iter().map(|c| c.count).collect()))
        .collect();
    Ok(per.into_iter().collect::<tree_entropy::Result<_>>()?)
}

fn to_log(count: u64, n: usize) -> LogValue {
    if count == 0 {
        LogValue::Empty
    } else {
        LogValue::Finite((count as f64).ln() / n as f64)
    }
}

fn cmd_hn(a: &HnArgs) -> Run<Outcome> {
    check_eps(&a.eps)?;
    if a.alpha.iter().any(|x| !(*x > 0.0 && *x <= 1.0)) {
        return Err(Fail::Usage("--alpha values must lie in (0, 1]".into()));
    }
    let law = law_at_radius(load_law(&a.law)?, a.r)?;
    let (model, dlabel) = model_of(&a.g)?;
    let seed = need_seed(a.g.seed, "sampled graphs")?;
    let n = model.n();
    let counts = sampled_counts(&law, &model, a.graphs, &a.eps, seed)?;
    let mut t = Table::new(&["n", "d", "r", "eps", "seed", "mode", "quantity", "graph", "count", "value"]);
    for (j, &eps) in a.eps.iter().enumerate() {
        let base = |q: String, graph: Cell, count: Cell, v: Cell| {
            vec![n.into(), dlabel.clone().into(), law.r().into(), eps.into(), seed.into(), "exhaustive".into(), q.into(), graph, count, v]
        };
        let values: Vec<LogValue> = counts.iter().map(|c| to_log(c[j], n)).collect();
        for (i, c) in counts.iter().enumerate() {
            t.push(base("H_G".into(), i.into(), c[j].into(), values[i].into()));
        }
        for &alpha in &a.alpha {
            let q = quantile(&values, alpha)?;
            t.push(base(format!("h_n(alpha={alpha})"), Cell::Missing, Cell::Missing, q.into()));
        }
    }
    Ok(t.into())
}

fn reference_sigma(law: &LocalLaw<f64>) -> Run<f64> {
    Ok(match law.kind() {
        ShapeKind::Ball => sigma_r(law, law.d())?.value,
        ShapeKind::Edge => sigma_e(&law.restrict(&BallShape::edge(law.d(), 1)?)?, law.d())?.value,
    })
}

fn cmd_sigma_n(a: &SigmaNArgs) -> Run<Outcome> {
    check_eps(&a.eps)?;
    let law = law_at_radius(load_law(&a.law)?, a.r)?;
    let (model, dlabel) = model_of(&a.g)?;
    let seed = need_seed(a.g.seed, "sampled graphs")?;
    let n = model.n();
    let counts = sampled_counts(&law, &model, a.graphs, &a.eps, seed)?;
    let sigma = reference_sigma(&law)?;
    let mut t = Table::new(&["n", "d", "r", "eps", "seed", "mode", "quantity", "value"]);
    for (j, &eps) in a.eps.iter().enumerate() {
        let col: Vec<u64> = counts.iter().map(|c| c[j]).collect();
        let est = annealed_from_counts(&col, n, seed);
        let mut row = |q: &str, v: Cell| {
            t.push(vec![n.into(), dlabel.clone().into(), law.r().into(), eps.into(), seed.into(), "exhaustive".into(), q.into(), v]);
        };
        row("sigma_n", est.value.into());
        row("ci_low", est.ci_low.into());
        row("ci_high", est.ci_high.into());
        row("flagged", est.flagged.to_string().into());
        row("sigma_reference", sigma.into());
    }
    Ok(t.into())
}

fn bound_rows(t: &mut Table, b: &Bounds) {
    t.push(vec!["lower".into(), b.lower.into(), Cell::Missing]);
    t.push(vec!["upper".into(), b.upper.into(), Cell::Missing]);
    t.push(vec!["upper_slack".into(), b.upper_slack.into(), Cell::Missing]);
    t.push(vec!["closed_form".into(), b.closed_form.to_string().into(), Cell::Missing]);
    t.push(vec!["candidates".into(), b.candidates.into(), Cell::Missing]);
    t.push(vec!["certified".into(), b.certified.into(), Cell::Missing]);
    for note in &b.notes {
        t.push(vec!["note".into(), note.as_str().into(), Cell::Missing]);
    }
}

fn cmd_energy(a: &EnergyArgs, optimum: bool) -> Run<Outcome> {
    let psi = FactorPotential::parse(&read(&a.potential)?)?;
    let mut t = Table::new(&["quantity", "value", "stderr"]);
    if !a.skip_bounds {
        if a.resolution == 0 {
            return Err(Fail::Usage("--resolution must be positive".into()));
        }
        let settings = EnergySettings {
            resolution: 1.0 / f64::from(a.resolution),
            max_cells: a.max_cells,
            tolerance: a.tolerance,
            ..EnergySettings::default()
        };
        let b = if optimum { optimum_bounds(&psi, a.d, &settings)? } else { energy_bounds(&psi, a.d, &settings)? };
        bound_rows(&mut t, &b);
    }
    let mut graphs: Vec<(String, ColoredGraph)> = Vec::new();
    if let Some(path) = &a.graph {
        graphs.push((path.display().to_string(), ColoredGraph::parse_edge_list(&read(path)?)?));
    }
    let seed = if a.graphs > 0 || a.mode == SolveMode::Estimate {
        Some(need_seed(a.seed, "sampled graphs and the estimate mode")?)
    } else {
        a.seed
    };
    if a.graphs > 0 {
        let n = a.n.ok_or_else(|| Fail::Usage("--n is required with --graphs".into()))?;
        let model = GraphModel::regular(n, a.d);
        for i in 0..a.graphs {
            graphs.push((format!("graph[{i}]"), model.sample(seed.unwrap(), i as u64)?));
        }
    }
    let values: Vec<tree_entropy::Result<(f64, Option<f64>)>> = graphs
        .par_iter()
        .map(|(_, g)| match (a.mode, optimum) {
            (SolveMode::Exhaustive, false) => log_partition(g, &psi).map(|v| (v, None)),
            (SolveMode::Exhaustive, true) => max_config(g, &psi).map(|v| (v.0, None)),
            (SolveMode::Estimate, false) => {
                let mut s = partition_schedule(g, &psi)?;
                s.sweeps = a.sweeps;
                estimate_log_partition(g, &psi, &s, seed.unwrap()).map(|e| (e.value, Some(e.stderr)))
            }
            (SolveMode::Estimate, true) => anneal_max(g, &psi, a.sweeps, seed.unwrap()).map(|v| (v.0, None)),
        })
        .collect();
    let name = if optimum { "L/n" } else { "ln_Z/n" };
    let mut sampled = Vec::new();
    for ((label, _), v) in graphs.iter().zip(values) {
        let (v, se) = v?;
        t.push(vec![format!("{name}[{label}]").into(), v.into(), se.into()]);
        if label.starts_with("graph[") {
            sampled.push(v);
        }
    }
    if sampled.len() > 1 {
        let k = sampled.len() as f64;
        let mean = sampled.iter().sum::<f64>() / k;
        let var = sampled.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0);
        t.push(vec![format!("{name}[mean]").into(), mean.into(), (var / k).sqrt().into()]);
    }
    Ok(t.into())
}

fn is_ugw_file(text: &str) -> Run<bool> {
    let (headers, _) = split_lines(text)?;
    Ok(headers.get("kind") == Some("ugw"))
}

fn cmd_ugw_sigma(a: &UgwSigmaArgs) -> Run<Outcome> {
    let text = read(&a.law)?;
    let scale = if a.bits { 1.0 / std::f64::consts::LN_2 } else { 1.0 };
    let mut t = Table::new(&["quantity", "value"]);
    t.kv("unit", if a.bits { "bits" } else { "nats" });
    if is_ugw_file(&text)? {
        let law = parse_ugw_law(&text)?;
        let pi = match &a.pi {
            Some(s) => DegreeDistribution::parse(s)?,
            None => law.degrees().clone(),
        };
        report_rows(&mut t, "sigma_r", &sigma_r_ugw(&law, &pi)?, scale);
        report_rows(&mut t, "sigma_r.conditional", &sigma_r_ugw_conditional(&law, &pi)?, scale);
        if law.radius() >= 1 {
            report_rows(&mut t, "sigma_e", &sigma_e_ugw(&law, &pi)?, scale);
        }
    } else {
        let law = parse_law::<f64>(&text)?.0;
        let pi = a.pi.as_deref().ok_or_else(|| Fail::Usage("--pi is required with an edge law".into()))?;
        report_rows(&mut t, "sigma_e", &sigma_e_ugw_pair(&law, &DegreeDistribution::parse(pi)?)?, scale);
    }
    Ok(t.into())
}

fn cmd_validate(a: &ValidateArgs) -> Run<Outcome> {
    let text = read(&a.law)?;
    let mut t = Table::new(&["check", "discrepancy", "message"]);
    let problems = if is_ugw_file(&text)? {
        let law = parse_ugw_law(&text)?;
        let v = law.validate();
        for msg in &v {
            t.push(vec!["ugw".into(), Cell::Missing, msg.as_str().into()]);
        }
        v.len()
    } else {
        let law = parse_law::<f64>(&text)?.0;
        let v = law.validate();
        for x in &v {
            t.push(vec![format!("{:?}", x.kind).to_lowercase().into(), x.discrepancy.into(), x.message.as_str().into()]);
        }
        v.len()
    };
    if problems == 0 {
        t.push(vec!["valid".into(), Cell::Missing, "all invariance checks passed".into()]);
        return Ok(t.into());
    }
    Ok(Outcome::Rejected(t, Error::InvalidLaw(format!("{problems} violation(s)"))))
}
