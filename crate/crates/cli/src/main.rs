//! `ssr`: optimize routed circuits, synthesize CNOT blocks, train depth
//! models and run benchmark suites.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ssr_core::commute::GaParams;
use ssr_core::driver::{run_benchmark, ssr_optimize_with, PredictorMode, SsrParams};
use ssr_core::predictor::{self, load_model, save_model, Dataset, DepthPredictor, MlpPredictor, OraclePredictor};
use ssr_core::qasm::{emit_qasm, parse_qasm};
use ssr_core::sweep::SweepParams;
use ssr_core::synth::{self, BlockedPosition, Cadical, Cnf, SatBackend, Subprocess, Varisat};
use ssr_core::{ArchitectureGraph, Error, GF2Matrix, Result};

#[derive(Parser)]
#[command(name = "ssr", version, about = "Depth optimization of hardware-compliant quantum circuits")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Optimize a routed OpenQASM circuit
    Optimize(OptimizeArgs),
    /// Depth-optimal synthesis of one GF(2) matrix
    Synth(SynthArgs),
    /// Train a depth model for a graph of at most five nodes
    Train(TrainArgs),
    /// Optimize every .qasm file of a directory
    Bench(BenchArgs),
    /// Solve a DIMACS file and print competition-style output
    #[command(hide = true)]
    SolveDimacs { file: PathBuf },
}

#[derive(Args)]
struct AgArg {
    /// `grid RxC`, `path N`, `cycle N`, `complete N`, `file PATH`, or sycamore|rochester|heron
    #[arg(long, num_args = 1..=2, required = true, value_names = ["KIND", "ARG"])]
    ag: Vec<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Backend {
    Cadical,
    Varisat,
}

#[derive(Args)]
struct SolverArgs {
    /// In-process SAT solver
    #[arg(long, value_enum, default_value = "cadical")]
    backend: Backend,
    /// External DIMACS solver executable, used instead of the in-process one
    #[arg(long)]
    solver: Option<PathBuf>,
    /// Argument passed to the external solver before the formula path (repeatable)
    #[arg(long, allow_hyphen_values = true)]
    solver_arg: Vec<String>,
}

impl SolverArgs {
    fn backend(&self) -> Box<dyn SatBackend> {
        match (&self.solver, self.backend) {
            (Some(p), _) => Box::new(Subprocess { program: p.clone(), args: self.solver_arg.clone() }),
            (None, Backend::Cadical) => Box::new(Cadical),
            (None, Backend::Varisat) => Box::new(Varisat),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Mlp,
    Oracle,
}

#[derive(Args)]
struct OptArgs {
    #[arg(long, default_value_t = 5)]
    nq: usize,
    #[arg(long, default_value_t = 0.5)]
    nt: f64,
    #[arg(long, default_value_t = 0.9)]
    alpha: f64,
    #[arg(long, default_value_t = 0.4)]
    mu: f64,
    #[arg(long, default_value_t = 10)]
    nspecies: usize,
    #[arg(long, default_value_t = 50)]
    tmax: usize,
    #[arg(long, default_value_t = 15)]
    tidle: usize,
    #[arg(long, default_value_t = 20)]
    max_iters: usize,
    #[arg(long, value_enum, default_value = "oracle")]
    predictor: Mode,
    /// Trained model files (repeatable)
    #[arg(long)]
    model: Vec<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Check every rewrite for equivalence
    #[arg(long)]
    verify: bool,
    /// Ignore the surrounding gates when resynthesizing windows
    #[arg(long)]
    no_blocking: bool,
    #[command(flatten)]
    solver: SolverArgs,
}

impl OptArgs {
    fn params(&self) -> SsrParams {
        SsrParams {
            ga: GaParams {
                n_species: self.nspecies,
                alpha: self.alpha,
                alpha_mu: self.mu,
                t_max: self.tmax,
                t_idle: self.tidle,
                seed: self.seed,
            },
            sweep: SweepParams { n_q: self.nq, n_t: self.nt },
            predictor_mode: match self.predictor {
                Mode::Mlp => PredictorMode::Mlp,
                Mode::Oracle => PredictorMode::Oracle,
            },
            blocking: !self.no_blocking,
            max_outer_iters: self.max_iters,
            seed: self.seed,
            safety_verify: self.verify,
        }
    }

    fn predictor(&self) -> Result<Box<dyn DepthPredictor>> {
        Ok(match self.predictor {
            Mode::Oracle => Box::new(OraclePredictor),
            Mode::Mlp => {
                let models = self.model.iter().map(|p| load_model(&read(p)?)).collect::<Result<Vec<_>>>()?;
                Box::new(MlpPredictor::new(models))
            }
        })
    }
}

#[derive(Args)]
struct OptimizeArgs {
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    ag: AgArg,
    #[command(flatten)]
    opt: OptArgs,
    /// Write the report as JSON
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    /// Matrix file: one row of 0/1 digits per line
    #[arg(long)]
    matrix: PathBuf,
    #[command(flatten)]
    ag: AgArg,
    /// Blocked positions: one `layer qubit` pair per line
    #[arg(long)]
    blocked: Option<PathBuf>,
    /// First depth to try; defaults to the exact optimum for at most five qubits
    #[arg(long)]
    start: Option<usize>,
    /// Also write the CNF of the first trial
    #[arg(long)]
    dimacs: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    ag: AgArg,
    #[arg(long, default_value_t = 2000)]
    count: usize,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[arg(long, default_value_t = 500)]
    iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Train on this dataset file instead of generating one
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Also save the generated dataset
    #[arg(long)]
    save_dataset: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    dir: PathBuf,
    #[command(flatten)]
    ag: AgArg,
    #[command(flatten)]
    opt: OptArgs,
    /// Write the table as JSON
    #[arg(long)]
    json: Option<PathBuf>,
}

fn read(p: &Path) -> Result<String> {
    fs::read_to_string(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))
}

fn write(p: &Path, text: &str) -> Result<()> {
    fs::write(p, text).map_err(|e| Error::Io(format!("{}: {e}", p.display())))
}

fn count_arg(kind: &str, arg: Option<&String>) -> Result<usize> {
    arg.and_then(|a| a.parse().ok())
        .ok_or_else(|| Error::Config(format!("`--ag {kind}` needs a node count")))
}

fn parse_ag(words: &[String]) -> Result<ArchitectureGraph> {
    let bad = Error::Config;
    let kind = words[0].as_str();
    let arg = words.get(1);
    // also accept `grid:3x3` and `grid=3x3`
    if arg.is_none() {
        if let Some((k, a)) = kind.split_once([':', '=']) {
            return parse_ag(&[k.to_string(), a.to_string()]);
        }
    }
    match kind {
        "grid" => {
            let a = arg.ok_or_else(|| bad("`--ag grid` needs RxC".into()))?;
            let (r, c) = a
                .split_once(['x', 'X'])
                .and_then(|(r, c)| Some((r.parse().ok()?, c.parse().ok()?)))
                .ok_or_else(|| bad(format!("bad grid size `{a}`, expected RxC")))?;
            Ok(ArchitectureGraph::grid(r, c))
        }
        "path" => Ok(ArchitectureGraph::path(count_arg(kind, arg)?)),
        "cycle" => Ok(ArchitectureGraph::cycle(count_arg(kind, arg)?)),
        "complete" => Ok(ArchitectureGraph::complete(count_arg(kind, arg)?)),
        "file" => {
            let p = arg.ok_or_else(|| bad("`--ag file` needs a path".into()))?;
            ArchitectureGraph::from_edge_list(&read(Path::new(p))?)
        }
        "sycamore" => Ok(ArchitectureGraph::sycamore()),
        "rochester" => Ok(ArchitectureGraph::rochester()),
        "heron" => Ok(ArchitectureGraph::heron()),
        other => Err(bad(format!("unknown architecture `{other}`"))),
    }
}

fn parse_blocked(text: &str) -> Result<Vec<BlockedPosition>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let nums: Vec<usize> = line.split_whitespace().filter_map(|t| t.parse().ok()).collect();
        match nums.as_slice() {
            [d, q] if line.split_whitespace().count() == 2 => out.push(BlockedPosition { d: *d, q: *q }),
            _ => return Err(Error::Parse { line: i + 1, col: 1, msg: "expected `layer qubit`".into() }),
        }
    }
    Ok(out)
}

fn optimize(a: OptimizeArgs) -> Result<()> {
    let c = parse_qasm(&read(&a.input)?)?;
    let ag = parse_ag(&a.ag.ag)?;
    let predictor = a.opt.predictor()?;
    let backend = a.opt.solver.backend();
    let (out, report) = ssr_optimize_with(&c, &ag, &a.opt.params(), predictor.as_ref(), backend.as_ref())?;
    write(&a.output, &emit_qasm(&out))?;
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    match &a.report {
        Some(p) => write(p, &json)?,
        None => eprintln!("{json}"),
    }
    Ok(())
}

fn synth_cmd(a: SynthArgs) -> Result<()> {
    let target = GF2Matrix::parse(&read(&a.matrix)?)?;
    let ag = parse_ag(&a.ag.ag)?;
    if ag.num_qubits() != target.n() {
        return Err(Error::Dimension(format!("{}x{} matrix on a {}-node graph", target.n(), target.n(), ag.num_qubits())));
    }
    if !target.is_invertible() {
        return Err(Error::Singular);
    }
    let blocked = match &a.blocked {
        Some(p) => parse_blocked(&read(p)?)?,
        None => Vec::new(),
    };
    if let Some(b) = blocked.iter().find(|b| b.q >= target.n()) {
        return Err(Error::QubitOutOfRange { index: b.q, num_qubits: target.n() });
    }
    let start = match a.start {
        Some(d) => d,
        None if target.n() <= predictor::FRAME && ag.is_connected() => OraclePredictor.predict(&target, &ag)?,
        None => 0,
    };
    if let Some(p) = &a.dimacs {
        write(p, &synth::encode(&target, &ag, start, &blocked).to_dimacs())?;
    }
    let r = synth::synthesize(&target, &ag, &blocked, start, a.solver.backend().as_ref())?;
    print!("{}", emit_qasm(&r.circuit));
    eprintln!("depth {} with {} SAT calls", r.achieved_depth, r.sat_calls);
    Ok(())
}

fn train_cmd(a: TrainArgs) -> Result<()> {
    let ag = parse_ag(&a.ag.ag)?;
    let dataset = match &a.dataset {
        Some(p) => Dataset::from_text(&read(p)?)?,
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
            predictor::generate_dataset(&ag, a.count, &mut rng, &[])?
        }
    };
    let (key, _) = predictor::frame_form(&ag)?;
    if dataset.ag_key != key {
        return Err(Error::Schema(format!("dataset is for topology {}, graph is {key}", dataset.ag_key)));
    }
    if let Some(p) = &a.save_dataset {
        write(p, &dataset.to_text())?;
    }
    let params = predictor::TrainParams { beta: a.beta, max_iters: a.iters, seed: a.seed, ..Default::default() };
    let (model, report) = predictor::train(&dataset, &params)?;
    write(&a.out, &save_model(&model))?;
    eprintln!(
        "{} samples, loss {:.4} -> {:.4} in {} iterations",
        dataset.samples.len(),
        report.initial_loss(),
        report.final_loss(),
        report.losses.len() - 1
    );
    Ok(())
}

fn bench(a: BenchArgs) -> Result<()> {
    let ag = parse_ag(&a.ag.ag)?;
    let table = run_benchmark(&a.dir, &ag, &a.opt.params())?;
    print!("{}", table.to_text());
    if let Some(p) = &a.json {
        write(p, &table.to_json())?;
    }
    Ok(())
}

fn solve_dimacs(file: &Path) -> Result<()> {
    let cnf = Cnf::parse_dimacs(&read(file)?)?;
    print!("{}", Cadical.solve(&cnf)?.to_solver_output());
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Invariant(_) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.cmd {
        Cmd::Optimize(a) => optimize(a),
        Cmd::Synth(a) => synth_cmd(a),
        Cmd::Train(a) => train_cmd(a),
        Cmd::Bench(a) => bench(a),
        Cmd::SolveDimacs { file } => solve_dimacs(&file),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
