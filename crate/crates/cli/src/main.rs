//! `sarlab` — command-line driver for the storage-and-retrieval laboratory:
//! figure sweep tables, oracle verification reports, retrieval-circuit dumps,
//! wave-plate angle tables, and virtual tomographic experiments.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage error.  Output
//! files land in the directory named by `SARLAB_OUT_DIR` (falling back to
//! the working directory) unless `--out` gives a full path.  Identical
//! arguments and seeds produce byte-identical output files.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use sarlab_core::analytics;
use sarlab_core::canonical_pair::CanonicalPair;
use sarlab_core::experiment_harness::{sweep_figures, NoiseModel, SweepConfig, SweepTable};
use sarlab_core::optics_compiler::compile_angles;
use sarlab_core::retrieval_circuits::{simulate_qubit_retrieval, RetrievalInstrument};
use sarlab_core::verification_oracle::{
    lemma_battery, verify_grid, LemmaRecord, VerificationRecord,
};

/// Instances fed to the structural battery behind `verify --lemmas`.
const LEMMA_INSTANCES: usize = 500;

// ---------------------------------------------------------------------------
// Argument surface
// ---------------------------------------------------------------------------

#[derive(Parser)]
#[command(
    name = "sarlab",
    version,
    about = "Storage-and-retrieval laboratory: sweeps, verification, circuit dumps, optics tables",
    after_help = "Exit codes: 0 success, 1 verification failure, 2 usage error.\n\
                  SARLAB_OUT_DIR names the default output directory."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate figure-family sweep tables (families 4, 6, 7, 8).
    Sweep(SweepArgs),
    /// Compare the brute-force oracles against the closed forms; write a
    /// JSON report and exit 1 if any check fails.
    Verify(VerifyArgs),
    /// Dump the heralded retrieval instrument at one grid point as JSON.
    Circuit(CircuitArgs),
    /// Compile the retrieval measurement into a wave-plate angle table.
    Optics(OpticsArgs),
    /// Run the virtual tomographic experiment (figure family 8) end to end.
    Experiment(ExperimentArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct SweepArgs {
    /// Figure families to emit (comma separated, from {4, 6, 7, 8}).
    #[arg(long = "figure", value_delimiter = ',', default_values_t = vec![4u32, 6, 7, 8])]
    figures: Vec<u32>,
    /// Use counts (comma separated).
    #[arg(long = "n", value_delimiter = ',', default_values_t = vec![1u32, 2, 3])]
    ns: Vec<u32>,
    /// Alpha grid size per use count.
    #[arg(long, default_value_t = 21)]
    alpha_points: usize,
    /// Beta grid size for the processor families (6 and 7).
    #[arg(long, default_value_t = 21)]
    beta_points: usize,
    /// Shots per tomography setting in family 8; 0 selects exact
    /// (infinite-shot) probability mode.
    #[arg(long, default_value_t = 0)]
    shots: u64,
    /// Sampling seed; required whenever shots > 0.
    #[arg(long)]
    seed: Option<u64>,
    /// Also emit family-8 rows under a depolarized-CNOT model with this
    /// process fidelity.
    #[arg(long)]
    cnot_fidelity: Option<f64>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Output file; defaults to sweep.{csv,json} in the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Largest use count on the comparison grid.
    #[arg(long, default_value_t = 5)]
    n_max: u32,
    /// Interior alpha values per use count.
    #[arg(long, default_value_t = 20)]
    alpha_points: usize,
    /// Brute-force scan resolution (at least 256).
    #[arg(long, default_value_t = 1024)]
    resolution: usize,
    /// Residual tolerance for a passing check.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// Seed for the random instances of the structural battery.
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Also run the structural battery: symmetry commutation, block
    /// round-trip/containment, pairing and trace-constraint identities.
    #[arg(long)]
    lemmas: bool,
    /// Corrupt one comparison on purpose; the run must then exit 1.
    #[arg(long)]
    inject_error: bool,
    /// Output report; defaults to verify_report.json in the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CircuitArgs {
    /// Number of stored uses.
    #[arg(long)]
    n: u32,
    /// Discrimination half-angle in radians, in (0, pi/(4 n)].
    #[arg(long, conflicts_with = "alpha_frac")]
    alpha: Option<f64>,
    /// Half-angle as a fraction of the domain top: alpha = FRAC * pi/(4 n).
    #[arg(long)]
    alpha_frac: Option<f64>,
    /// Which pair member was stored (0 or 1).
    #[arg(long, default_value_t = 0)]
    which: usize,
    /// Output file; defaults to circuit.json in the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OpticsArgs {
    /// Number of stored uses.
    #[arg(long, default_value_t = 1)]
    n: u32,
    /// Number of evenly spaced interior alpha values.
    #[arg(long, default_value_t = 10)]
    alpha_points: usize,
    /// Output file; defaults to optics.csv in the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Use counts (comma separated).
    #[arg(long = "n", value_delimiter = ',', default_values_t = vec![1u32, 2, 3])]
    ns: Vec<u32>,
    /// Alpha grid size per use count (alpha = 0 is skipped in this family).
    #[arg(long, default_value_t = 21)]
    alpha_points: usize,
    /// Shots per tomography setting; 0 selects exact probability mode.
    #[arg(long, default_value_t = 0)]
    shots: u64,
    /// Sampling seed; required whenever shots > 0.
    #[arg(long)]
    seed: Option<u64>,
    /// Also emit rows under a depolarized-CNOT model with this process
    /// fidelity.
    #[arg(long)]
    cnot_fidelity: Option<f64>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Output file; defaults to experiment.{csv,json} in the output
    /// directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

// ---------------------------------------------------------------------------
// Dispatch
// ---------------------------------------------------------------------------

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Sweep(args) => cmd_sweep(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Circuit(args) => cmd_circuit(args),
        Command::Optics(args) => cmd_optics(args),
        Command::Experiment(args) => cmd_experiment(args),
    }
}

// ---------------------------------------------------------------------------
// sweep / experiment
// ---------------------------------------------------------------------------

fn cmd_sweep(args: SweepArgs) -> Result<ExitCode> {
    let (noise, noise_tag, include_noisy) = resolve_noise(args.cnot_fidelity)?;
    let cfg = SweepConfig {
        figures: args.figures,
        ns: args.ns,
        alpha_points: args.alpha_points,
        beta_points: args.beta_points,
        shots: args.shots,
        seed: resolve_seed(args.shots, args.seed)?,
        noise,
        noise_tag,
        include_noisy,
    };
    let table = sweep_figures(&cfg).context("sweep grid rejected")?;
    let path = resolve_out(
        args.out,
        match args.format {
            Format::Csv => "sweep.csv",
            Format::Json => "sweep.json",
        },
    );
    write_table(&table, args.format, &path)?;
    println!("wrote {} rows to {}", table.rows.len(), path.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_experiment(args: ExperimentArgs) -> Result<ExitCode> {
    let (noise, noise_tag, include_noisy) = resolve_noise(args.cnot_fidelity)?;
    let cfg = SweepConfig {
        figures: vec![8],
        ns: args.ns,
        alpha_points: args.alpha_points,
        // Family 8 has no beta axis; this is just the smallest valid grid.
        beta_points: 2,
        shots: args.shots,
        seed: resolve_seed(args.shots, args.seed)?,
        noise,
        noise_tag,
        include_noisy,
    };
    let table = sweep_figures(&cfg).context("experiment grid rejected")?;
    let path = resolve_out(
        args.out,
        match args.format {
            Format::Csv => "experiment.csv",
            Format::Json => "experiment.json",
        },
    );
    write_table(&table, args.format, &path)?;
    println!("wrote {} rows to {}", table.rows.len(), path.display());
    Ok(ExitCode::SUCCESS)
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

/// Everything one `verify` run measured; serialized whether or not it passed.
#[derive(Serialize, Deserialize)]
struct VerifyReport {
    n_max: u32,
    alpha_points: usize,
    resolution: usize,
    tolerance: f64,
    seed: u64,
    max_residual: f64,
    records: Vec<VerificationRecord>,
    /// Empty unless `--lemmas` was given.
    lemmas: Vec<LemmaRecord>,
    all_pass: bool,
}

fn cmd_verify(args: VerifyArgs) -> Result<ExitCode> {
    if args.resolution < 256 {
        bail!("--resolution must be at least 256");
    }
    if args.n_max == 0 || args.alpha_points == 0 {
        bail!("the comparison grid needs --n-max >= 1 and --alpha-points >= 1");
    }
    let mut records = verify_grid(args.n_max, args.alpha_points, args.resolution, args.tol);
    if args.inject_error {
        records.push(injected_control(args.tol)?);
    }
    let lemmas = if args.lemmas {
        lemma_battery(LEMMA_INSTANCES, args.seed)
    } else {
        Vec::new()
    };
    let max_residual = records.iter().map(|r| r.residual).fold(0.0f64, f64::max);
    let all_pass = records.iter().all(|r| r.pass) && lemmas.iter().all(|l| l.pass);
    let report = VerifyReport {
        n_max: args.n_max,
        alpha_points: args.alpha_points,
        resolution: args.resolution,
        tolerance: args.tol,
        seed: args.seed,
        max_residual,
        records,
        lemmas,
        all_pass,
    };
    let path = resolve_out(args.out, "verify_report.json");
    let mut contents = serde_json::to_string_pretty(&report)?;
    contents.push('\n');
    write_file(&path, &contents)?;

    println!(
        "checked {} grid comparisons, max residual {:.3e}",
        report.records.len(),
        report.max_residual
    );
    for l in &report.lemmas {
        println!(
            "lemma {}: worst residual {:.3e} (tol {:.0e}) -> {}",
            l.property,
            l.worst_residual,
            l.tolerance,
            if l.pass { "pass" } else { "FAIL" }
        );
    }
    println!("report: {}", path.display());
    if report.all_pass {
        println!("verification passed");
        Ok(ExitCode::SUCCESS)
    } else {
        println!("verification FAILED");
        Ok(ExitCode::from(1))
    }
}

/// Negative control: compare the closed form against itself at a shifted
/// angle, so exactly one extra check fails at the default tolerance.
fn injected_control(tol: f64) -> Result<VerificationRecord> {
    let (n, alpha, shift) = (1u32, 0.1f64, 1e-3);
    let analytic = analytics::deterministic_fidelity(n, alpha)?;
    let corrupted = analytics::deterministic_fidelity(n, alpha + shift)?;
    let residual = (analytic - corrupted).abs();
    Ok(VerificationRecord {
        quantity: "injected_alpha_corruption".into(),
        n,
        alpha,
        analytic,
        oracle: corrupted,
        residual,
        pass: residual <= tol,
    })
}

// ---------------------------------------------------------------------------
// circuit / optics
// ---------------------------------------------------------------------------

/// JSON payload of `circuit`: the instrument plus the derived numbers a
/// reader checks first.
#[derive(Serialize, Deserialize)]
struct CircuitDump {
    instrument: RetrievalInstrument,
    /// `Tr(K^dag K)/2` per branch, in branch order (success 0, success 1,
    /// fail).
    branch_weights: Vec<f64>,
    success_probability: f64,
    completeness_residual: f64,
}

fn cmd_circuit(args: CircuitArgs) -> Result<ExitCode> {
    if args.which > 1 {
        bail!("--which selects a pair member (0 or 1)");
    }
    let alpha = resolve_alpha(args.n, args.alpha, args.alpha_frac)?;
    let pair = CanonicalPair::qubit(args.n, alpha)?;
    let instrument = simulate_qubit_retrieval(&pair, args.which)?;
    let dump = CircuitDump {
        branch_weights: instrument.branches.iter().map(|b| b.weight()).collect(),
        success_probability: instrument.success_probability(),
        completeness_residual: instrument.completeness_residual(),
        instrument,
    };
    let path = resolve_out(args.out, "circuit.json");
    let mut contents = serde_json::to_string_pretty(&dump)?;
    contents.push('\n');
    write_file(&path, &contents)?;
    println!(
        "success branches carry probabilities {:.6} and {:.6} (total {:.6})",
        dump.branch_weights[0], dump.branch_weights[1], dump.success_probability
    );
    println!("wrote {}", path.display());
    Ok(ExitCode::SUCCESS)
}

const OPTICS_CSV_HEADER: &str = "n,alpha,regime,B,Gamma,Delta,residual_norm";

fn cmd_optics(args: OpticsArgs) -> Result<ExitCode> {
    if args.n == 0 {
        bail!("--n must be at least 1");
    }
    if args.alpha_points == 0 {
        bail!("--alpha-points must be at least 1");
    }
    let top = std::f64::consts::FRAC_PI_4 / args.n as f64;
    let mut lines = vec![OPTICS_CSV_HEADER.to_string()];
    let mut worst = 0.0f64;
    for k in 1..=args.alpha_points {
        // Interior grid: it crosses the regime seam for any point count >= 2
        // while avoiding the degenerate endpoints.
        let alpha = top * k as f64 / (args.alpha_points + 1) as f64;
        let comp = compile_angles(args.n, alpha)?;
        worst = worst.max(comp.residual_norm);
        lines.push(comp.csv_row());
    }
    let path = resolve_out(args.out, "optics.csv");
    let mut contents = lines.join("\n");
    contents.push('\n');
    write_file(&path, &contents)?;
    println!(
        "compiled {} angle rows, worst residual {:.3e}",
        args.alpha_points, worst
    );
    println!("wrote {}", path.display());
    Ok(ExitCode::SUCCESS)
}

// ---------------------------------------------------------------------------
// Shared plumbing
// ---------------------------------------------------------------------------

fn resolve_noise(cnot_fidelity: Option<f64>) -> Result<(NoiseModel, String, bool)> {
    match cnot_fidelity {
        None => Ok((NoiseModel::ideal(), "ideal".into(), false)),
        Some(f) => {
            if !(0.0..=1.0).contains(&f) {
                bail!("--cnot-fidelity must lie in [0, 1], got {f}");
            }
            Ok((NoiseModel::depolarized_cnot(f), format!("depol_cnot_{f}"), true))
        }
    }
}

fn resolve_seed(shots: u64, seed: Option<u64>) -> Result<u64> {
    match (shots, seed) {
        (0, s) => Ok(s.unwrap_or(1)),
        (_, Some(s)) => Ok(s),
        (_, None) => bail!("--seed is required when sampling (shots > 0)"),
    }
}

fn resolve_alpha(n: u32, alpha: Option<f64>, alpha_frac: Option<f64>) -> Result<f64> {
    if n == 0 {
        bail!("--n must be at least 1");
    }
    let top = std::f64::consts::FRAC_PI_4 / n as f64;
    match (alpha, alpha_frac) {
        (Some(a), None) => {
            if !(a > 0.0 && a <= top) {
                bail!("--alpha must lie in (0, pi/(4*{n})] = (0, {top:.6}]");
            }
            Ok(a)
        }
        (None, Some(k)) => {
            if !(k > 0.0 && k <= 1.0) {
                bail!("--alpha-frac must lie in (0, 1]");
            }
            Ok(k * top)
        }
        (None, None) => bail!("one of --alpha or --alpha-frac is required"),
        (Some(_), Some(_)) => bail!("--alpha conflicts with --alpha-frac"),
    }
}

fn out_dir() -> PathBuf {
    std::env::var_os("SARLAB_OUT_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("."))
}

fn resolve_out(out: Option<PathBuf>, default_name: &str) -> PathBuf {
    out.unwrap_or_else(|| out_dir().join(default_name))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .with_context(|| format!("creating {}", parent.display()))?;
        }
    }
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn write_table(table: &SweepTable, format: Format, path: &Path) -> Result<()> {
    let contents = match format {
        Format::Csv => table.to_csv(),
        Format::Json => {
            let mut s = serde_json::to_string_pretty(table)?;
            s.push('\n');
            s
        }
    };
    write_file(path, &contents)
}
