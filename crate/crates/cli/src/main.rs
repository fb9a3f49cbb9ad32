use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use noma_coexist::sim::{run, solve_document, write_csv, ExperimentConfig, ExperimentOverrides, Method, Scenario, SolveDocument};

#[derive(Parser)]
#[command(name = "noma-sim", version, about = "Far-field NOMA on near-field ZF beams")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo over random half-ring drops.
    Random(ExperimentArgs),
    /// Fixed grid of users, swept over D_x and K, with exact baselines.
    Deterministic(ExperimentArgs),
    /// Random drops with imperfect far-field CSI.
    CsiSweep(ExperimentArgs),
    /// Solves one instance described by a JSON or TOML document.
    Solve(SolveArgs),
}

#[derive(Args)]
struct ExperimentArgs {
    /// Antenna counts, comma separated.
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    /// Near-field users.
    #[arg(long)]
    m: Option<usize>,
    /// Far-field users.
    #[arg(long)]
    k: Option<usize>,
    /// Beams per far-field user.
    #[arg(long)]
    dx: Option<usize>,
    /// Per-beam power budgets in dBm, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pdbm: Option<Vec<f64>>,
    /// CSI quality values, comma separated.
    #[arg(long, value_delimiter = ',')]
    rho: Option<Vec<f64>>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// greedy, sca, closed-form, bb; comma separated.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<Method>>,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// TOML config; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Record wall time per solve (makes output non-reproducible).
    #[arg(long)]
    timing: bool,
}

#[derive(Args)]
struct SolveArgs {
    /// Document path, `-` for stdin.
    document: PathBuf,
    /// Overrides the document's method.
    #[arg(long)]
    method: Option<Method>,
    /// JSON destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl ExperimentArgs {
    fn overrides(&self) -> ExperimentOverrides {
        ExperimentOverrides {
            n: self.n.clone(),
            m: self.m,
            k: self.k,
            dx: self.dx,
            pdbm: self.pdbm.clone(),
            rho: self.rho.clone(),
            trials: self.trials,
            seed: self.seed,
            methods: self.methods.clone(),
            timing: self.timing.then_some(true),
            ..Default::default()
        }
    }
}

type BoxError = Box<dyn std::error::Error>;

fn read_input(path: &Path) -> Result<String, BoxError> {
    if path.as_os_str() == "-" {
        let mut s = String::new();
        io::stdin().read_to_string(&mut s)?;
        Ok(s)
    } else {
        fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()).into())
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>, BoxError> {
    Ok(match path {
        Some(p) => Box::new(io::BufWriter::new(
            fs::File::create(p).map_err(|e| format!("{}: {e}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn experiment(scenario: Scenario, args: &ExperimentArgs) -> Result<(), BoxError> {
    let text = args.config.as_deref().map(read_input).transpose()?;
    let cfg = ExperimentConfig::resolve(scenario, text.as_deref(), &args.overrides())?;
    log::info!("{scenario}: config digest {}", cfg.digest());
    let rows = run(&cfg)?;
    let mut out = output(args.out.as_deref())?;
    write_csv(&mut out, &cfg, &rows)?;
    out.flush()?;
    Ok(())
}

fn solve(args: &SolveArgs) -> Result<(), BoxError> {
    let mut doc = SolveDocument::parse(&read_input(&args.document)?)?;
    if let Some(m) = args.method {
        doc.method = m;
    }
    let result = solve_document(&doc)?;
    let mut out = output(args.out.as_deref())?;
    serde_json::to_writer_pretty(&mut out, &result)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Random(a) => experiment(Scenario::Random, a),
        Command::Deterministic(a) => experiment(Scenario::Deterministic, a),
        Command::CsiSweep(a) => experiment(Scenario::CsiSweep, a),
        Command::Solve(a) => solve(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("noma-sim: {e}");
            ExitCode::FAILURE
        }
    }
}
