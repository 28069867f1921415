//! `ncpot`: command-line front end.
//!
//! Exit codes: 0 success, 2 invalid input, 3 I/O failure, 4 incomplete data,
//! 5 non-convergence.

mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ncpot_core::analysis::{
    fit_rho_qr, fit_with_intent, locate_extrema, sweep_interpolation, FamilyParams, FitOptions,
};
use ncpot_core::format::fmt_sig;
use ncpot_core::linalg::DensityMatrixFile;
use ncpot_core::reconstruction::{reconstruct_file, ReconstructionOutput};
use ncpot_core::simulator::{simulate_schedule, CountsFile, SourceInfo};
use ncpot_core::states::{
    basis_state, mix_on_ideal_bs, mix_on_imperfect_bs, qubit_matrix, singlet, werner_state,
};
use ncpot_core::wigner::{qutrit_encode, wigner_function, wigner_negativity, GridSpec};
use ncpot_core::{
    fidelity, potentials, BeamSplitter, DensityMatrix, Error, QubitState, Tolerances, C64,
};

use crate::config::RunConfig;

#[derive(Debug, Parser)]
#[command(
    name = "ncpot",
    version,
    about = "Nonclassicality potentials of single-qubit states"
)]
struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true, env = "NCPOT_CONFIG")]
    config: Option<PathBuf>,
    /// Seed for every stochastic step.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory against which relative output paths are resolved.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Concurrence, steering and Bell potentials of a qubit state as JSON.
    Potentials(SourceArgs),
    /// Simulate the measurement schedule and write a counts file.
    Simulate(SimulateArgs),
    /// Reconstruct the output state from a counts file.
    Reconstruct(ReconstructArgs),
    /// Fit a two-qubit state to the imperfect-splitter family.
    Fit(FitArgs),
    /// Measures along the interpolation between two states as CSV.
    Interpolate(InterpolateArgs),
    /// Wigner function of a qubit or qutrit state on a grid as CSV.
    Wigner(WignerArgs),
    /// Print the effective configuration.
    ShowConfig,
}

#[derive(Debug, Args)]
struct SourceArgs {
    /// One-photon population.
    #[arg(long, allow_hyphen_values = true)]
    p: f64,
    /// Real part of the coherence.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    x: f64,
    /// Imaginary part of the coherence.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    x_im: f64,
    /// Splitter reflection amplitude (balanced when omitted).
    #[arg(long, allow_hyphen_values = true)]
    r: Option<f64>,
    /// Splitter transmission amplitude (defaults to sqrt(1 - r^2)).
    #[arg(long, allow_hyphen_values = true)]
    t: Option<f64>,
    /// Splitter decoherence.
    #[arg(long, allow_hyphen_values = true)]
    q: Option<f64>,
}

impl SourceArgs {
    fn qubit(&self) -> Result<QubitState, Error> {
        QubitState::new(self.p, C64::new(self.x, self.x_im))
    }

    /// `None` when no splitter flag is given (ideal 50:50 splitter).
    fn splitter(&self) -> Result<Option<BeamSplitter>, Error> {
        if self.r.is_none() && self.t.is_none() && self.q.is_none() {
            return Ok(None);
        }
        let q = self.q.unwrap_or(0.0);
        let bs = match (self.r, self.t) {
            (Some(r), Some(t)) => BeamSplitter::new(r, t, q)?,
            (Some(r), None) => BeamSplitter::from_reflection(r, q)?,
            (None, Some(t)) => BeamSplitter::new((1.0 - t * t).max(0.0).sqrt(), t, q)?,
            (None, None) => BeamSplitter::new(
                std::f64::consts::FRAC_1_SQRT_2,
                std::f64::consts::FRAC_1_SQRT_2,
                q,
            )?,
        };
        Ok(Some(bs))
    }
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    source: SourceArgs,
    /// Emitted pairs per 50 s record (overrides the configured pair rate).
    #[arg(long)]
    pairs: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ReconstructArgs {
    #[arg(long)]
    counts: PathBuf,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct FitArgs {
    /// Density-matrix or reconstruction file, or a built-in state name.
    #[arg(long)]
    state: String,
    #[arg(long, requires = "intent_x", allow_hyphen_values = true)]
    intent_p: Option<f64>,
    #[arg(long, requires = "intent_p", allow_hyphen_values = true)]
    intent_x: Option<f64>,
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    max_evals: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct InterpolateArgs {
    /// State at β = 1.
    #[arg(long)]
    a: String,
    /// State at β = 0.
    #[arg(long)]
    b: String,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct WignerArgs {
    /// State file or built-in name; a 4×4 state is read on |00>, |01>, |10>.
    #[arg(long, conflicts_with = "p")]
    state: Option<String>,
    /// Qubit population, instead of --state.
    #[arg(long, requires = "x", allow_hyphen_values = true)]
    p: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    x: Option<f64>,
    /// `lo:hi:n` or `lo:hi:n,lo:hi:n`.
    #[arg(long)]
    grid: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug)]
enum Failure {
    Core(Error),
    Io(PathBuf, std::io::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Core(e) => e.exit_code() as u8,
            Failure::Io(..) => 3,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Core(e) => write!(f, "{e}"),
            Failure::Io(path, e) => write!(f, "{}: {e}", path.display()),
        }
    }
}

type CliResult<T> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn load_config(cli: &Cli) -> CliResult<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::from_toml(&read(path)?)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(dir) = &cli.output_dir {
        cfg.output_dir = dir.clone();
    }
    Ok(cfg)
}

fn run(cli: Cli) -> CliResult<()> {
    let cfg = load_config(&cli)?;
    match &cli.command {
        Command::Potentials(args) => cmd_potentials(args),
        Command::Simulate(args) => cmd_simulate(&cfg, args),
        Command::Reconstruct(args) => cmd_reconstruct(&cfg, args),
        Command::Fit(args) => cmd_fit(&cfg, args),
        Command::Interpolate(args) => cmd_interpolate(&cfg, args),
        Command::Wigner(args) => cmd_wigner(&cfg, args),
        Command::ShowConfig => {
            print!("{}", cfg.to_toml());
            Ok(())
        }
    }
}

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| Failure::Io(path.to_path_buf(), e))
}

/// Writes to the resolved path, or to stdout when `out` is `None`.
/// Returns the path written, if any.
fn emit(cfg: &RunConfig, out: Option<&Path>, content: &str) -> CliResult<Option<PathBuf>> {
    match out {
        Some(out) => {
            let path = cfg.resolve(out);
            fs::write(&path, content).map_err(|e| Failure::Io(path.clone(), e))?;
            Ok(Some(path))
        }
        None => {
            print!("{content}");
            Ok(None)
        }
    }
}

/// Reads a state from a file (bare density matrix or reconstruction output)
/// or from a built-in name: `singlet`, `vacuum`, `ket:<bits>`, `werner:<w>`,
/// `qubit:<p>,<x>`, `ideal:<p>,<x>`, `qr:<p>,<x>,<r>,<q>`.
fn load_state(spec: &str, tol: &Tolerances) -> CliResult<DensityMatrix> {
    let path = Path::new(spec);
    if path.exists() {
        let text = read(path)?;
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| Error::Format(format!("{spec}: {e}")))?;
        let file: DensityMatrixFile = if value.get("density_matrix").is_some() {
            ReconstructionOutput::from_json(&text)?.density_matrix
        } else {
            serde_json::from_value(value).map_err(|e| Error::Format(format!("{spec}: {e}")))?
        };
        let rho = DensityMatrix::new_with(file.into_matrix()?, tol)?;
        let tr = rho.matrix().trace().re;
        return Ok(DensityMatrix::new_with(
            rho.into_matrix().scale_real(1.0 / tr),
            tol,
        )?);
    }
    builtin_state(spec).ok_or_else(|| {
        Failure::Io(
            path.to_path_buf(),
            std::io::Error::new(
                std::io::ErrorKind::NotFound,
                "no such file or built-in state",
            ),
        )
    })?
}

fn builtin_state(spec: &str) -> Option<CliResult<DensityMatrix>> {
    let numbers = |s: &str| -> CliResult<Vec<f64>> {
        s.split(',')
            .map(|v| {
                v.trim().parse::<f64>().map_err(|_| {
                    Failure::Core(Error::Format(format!("bad number '{v}' in '{spec}'")))
                })
            })
            .collect()
    };
    let arity = |v: &[f64], n: usize| -> CliResult<()> {
        if v.len() == n {
            Ok(())
        } else {
            Err(Error::Format(format!("'{spec}' needs {n} numbers")).into())
        }
    };
    let (name, rest) = spec.split_once(':').unwrap_or((spec, ""));
    let state = match name {
        "singlet" => Ok(singlet()),
        "vacuum" => Ok(basis_state(4, 0)),
        "ket" => {
            if rest.is_empty() || rest.len() > 4 || !rest.chars().all(|c| c == '0' || c == '1') {
                return Some(Err(
                    Error::Format(format!("'{spec}': expected ket:<bits>")).into()
                ));
            }
            let k = usize::from_str_radix(rest, 2).expect("binary digits");
            Ok(basis_state(1 << rest.len(), k))
        }
        "werner" => numbers(rest).and_then(|v| {
            arity(&v, 1)?;
            Ok(werner_state(v[0])?)
        }),
        "qubit" => numbers(rest).and_then(|v| {
            arity(&v, 2)?;
            Ok(qubit_matrix(&QubitState::real(v[0], v[1])?))
        }),
        "ideal" => numbers(rest).and_then(|v| {
            arity(&v, 2)?;
            Ok(mix_on_ideal_bs(&QubitState::real(v[0], v[1])?))
        }),
        "qr" => numbers(rest).and_then(|v| {
            arity(&v, 4)?;
            Ok(FamilyParams {
                p: v[0],
                x: v[1],
                r: v[2],
                q: v[3],
            }
            .state()?)
        }),
        _ => return None,
    };
    Some(state)
}

fn triple_json(c: f64, s: f64, b: f64) -> String {
    format!(
        "{{\"c\":{},\"s\":{},\"b\":{}}}\n",
        fmt_sig(c),
        fmt_sig(s),
        fmt_sig(b)
    )
}

fn cmd_potentials(args: &SourceArgs) -> CliResult<()> {
    let qubit = args.qubit()?;
    let bs = args.splitter()?;
    let t = potentials(&qubit, bs.as_ref())?;
    print!("{}", triple_json(t.c, t.s, t.b));
    Ok(())
}

fn cmd_simulate(cfg: &RunConfig, args: &SimulateArgs) -> CliResult<()> {
    let qubit = args.source.qubit()?;
    let bs = args
        .source
        .splitter()?
        .unwrap_or_else(BeamSplitter::balanced);
    let mut det = cfg.detector;
    if let Some(pairs) = args.pairs {
        if !(pairs >= 0.0 && pairs.is_finite()) {
            return Err(Error::OutOfRange(format!(
                "pairs = {pairs} must be finite and nonnegative"
            ))
            .into());
        }
        det = det.with_pairs_per_record(pairs);
    }
    let file = simulate_schedule(&qubit, &bs, &det, cfg.seed)?;
    let path = emit(cfg, Some(&args.out), &file.to_json())?.expect("file output");
    println!("wrote {} records to {}", file.records.len(), path.display());
    Ok(())
}

/// Source state recorded in a counts header, with rounding slack removed.
fn source_state(info: &SourceInfo) -> Result<DensityMatrix, Error> {
    let bound = (info.p * (1.0 - info.p)).max(0.0).sqrt();
    let mut x = C64::new(info.x_re, info.x_im);
    if x.norm() > bound {
        x *= bound / x.norm();
    }
    let qubit = QubitState::new(info.p, x)?;
    let bs = BeamSplitter::from_reflection(info.r, info.q)?;
    Ok(mix_on_imperfect_bs(&qubit, &bs))
}

fn cmd_reconstruct(cfg: &RunConfig, args: &ReconstructArgs) -> CliResult<()> {
    let counts = CountsFile::from_json(&read(&args.counts)?)?;
    let mut rec = reconstruct_file(&counts)?;
    if let Some(info) = &counts.header.source {
        let truth = source_state(info)?;
        rec.metadata.fidelity_to_source = Some(fidelity(&rec.two_qubit(), &truth)?);
    }
    let out = rec.to_output();
    if let Some(path) = emit(cfg, args.out.as_deref(), &out.to_json())? {
        println!("wrote reconstruction to {}", path.display());
        if let Some(f) = out.metadata.fidelity_to_source {
            println!("fidelity_to_source = {}", fmt_sig(f));
        }
    }
    Ok(())
}

fn cmd_fit(cfg: &RunConfig, args: &FitArgs) -> CliResult<()> {
    let target = load_state(&args.state, &cfg.tolerances()?)?;
    let opts = FitOptions {
        seed: cfg.seed,
        restarts: args.restarts.unwrap_or(cfg.fit.restarts),
        max_evals: args.max_evals.unwrap_or(cfg.fit.max_evals),
    };
    let fit = match (args.intent_p, args.intent_x) {
        (Some(p), Some(x)) => fit_with_intent(&target, &QubitState::real(p, x)?, &opts)?,
        _ => fit_rho_qr(&target, &opts)?,
    };
    if let Some(path) = emit(cfg, args.out.as_deref(), &fit.to_json())? {
        println!(
            "wrote fit to {} (bures = {})",
            path.display(),
            fmt_sig(fit.bures)
        );
    }
    Ok(())
}

fn cmd_interpolate(cfg: &RunConfig, args: &InterpolateArgs) -> CliResult<()> {
    let tol = cfg.tolerances()?;
    let a = load_state(&args.a, &tol)?;
    let b = load_state(&args.b, &tol)?;
    let steps = args.steps.unwrap_or(cfg.steps);
    let curve = sweep_interpolation(&a, &b, steps)?;
    let written = emit(cfg, args.out.as_deref(), &curve.to_csv())?;
    let mut table = String::from("measure,kind,beta\n");
    if curve.len() >= ncpot_core::analysis::MIN_EXTREMA_POINTS {
        for e in locate_extrema(&curve)? {
            let kind = match e.kind {
                ncpot_core::analysis::ExtremumKind::Minimum => "minimum",
                ncpot_core::analysis::ExtremumKind::Maximum => "maximum",
            };
            table.push_str(&format!(
                "{},{},{}\n",
                e.measure.name(),
                kind,
                fmt_sig(e.beta)
            ));
        }
    }
    match written {
        Some(path) => {
            println!("wrote {} points to {}", curve.len(), path.display());
            print!("{table}");
        }
        None => eprint!("{table}"),
    }
    Ok(())
}

fn cmd_wigner(cfg: &RunConfig, args: &WignerArgs) -> CliResult<()> {
    let rho = match (&args.state, args.p, args.x) {
        (Some(spec), _, _) => load_state(spec, &cfg.tolerances()?)?,
        (None, Some(p), Some(x)) => qubit_matrix(&QubitState::real(p, x)?),
        _ => return Err(Error::Format("wigner needs --state or --p/--x".into()).into()),
    };
    let rho = if rho.dim() == 4 {
        qutrit_encode(&rho)?
    } else {
        rho
    };
    let grid: GridSpec = match &args.grid {
        Some(g) => g.parse()?,
        None => cfg.grid()?,
    };
    let g = wigner_function(&rho, &grid)?;
    let summary = format!(
        "min = {}\nmax = {}\nnormalization = {}\nnegativity = {}\n",
        fmt_sig(g.min()),
        fmt_sig(g.max()),
        fmt_sig(g.normalization()),
        fmt_sig(wigner_negativity(&g))
    );
    match emit(cfg, args.out.as_deref(), &g.to_csv())? {
        Some(path) => {
            println!(
                "wrote {}x{} grid to {}",
                g.alpha_re.len(),
                g.alpha_im.len(),
                path.display()
            );
            print!("{summary}");
        }
        None => eprint!("{summary}"),
    }
    Ok(())
}
