//! Command-line surface. Exit codes: 0 success, 1 domain or runtime error,
//! 2 usage error, 3 failed verification.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::blocks::{block_labels, BlockLabel, BlockOperator, SpectrumParams};
use crate::error::{domain, Error, Result};
use crate::format::{full_precision, to_json_string};
use crate::machines::{closed_form_report, unbalanced_report, MachineKind, MachineReport, Method};
use crate::mixed::{
    gamma_up_mixed, learning_machine_problem, mixed_lm_risk, mixed_programmable_risk, run_sweep, SweepConfig,
};
use crate::sdp::{solve, SolverOptions, DEFAULT_MAX_ITERATIONS, DEFAULT_TOL};
use crate::su2::{clebsch_gordan, multiplicity, recoupling_overlap, wigner_6j, Branch, HalfInteger};
use crate::verify::{self, Suite, VerifyOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_VERIFY_FAILED: i32 = 3;

pub const DEFAULT_SEED: u64 = 7;

#[derive(Debug, Parser)]
#[command(
    name = "qclass",
    version,
    about = "Quantum learning machines for qubit classification"
)]
pub struct Cli {
    /// Worker threads for parallel sweeps (0 lets rayon decide).
    #[arg(long, global = true, env = "QCLASS_THREADS", default_value_t = 0)]
    pub threads: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Error probability and excess risk of one machine.
    Machine(MachineArgs),
    /// Purity sweep of learning machine against the optimum, written as CSV.
    Sweep(SweepArgs),
    /// Run invariant checks and print a JSON report.
    Verify(VerifyArgs),
    /// Angular-momentum coefficients.
    #[command(subcommand)]
    Su2(Su2Command),
    /// JSON dumps of block operators and optimized seeds.
    #[command(subcommand)]
    Dump(DumpCommand),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MachineChoice {
    Opt,
    Lm,
    Ed,
    EdN1,
    Reversed,
}

impl From<MachineChoice> for MachineKind {
    fn from(choice: MachineChoice) -> Self {
        match choice {
            MachineChoice::Opt => MachineKind::Opt,
            MachineChoice::Lm => MachineKind::Lm,
            MachineChoice::Ed => MachineKind::EdContinuous,
            MachineChoice::EdN1 => MachineKind::EdN1,
            MachineChoice::Reversed => MachineKind::Reversed,
        }
    }
}

#[derive(Debug, Args)]
pub struct MachineArgs {
    pub machine: MachineChoice,
    /// Copies of each training state.
    #[arg(long)]
    pub n: Option<i64>,
    /// Purity of the source states; values below 1 solve the mixed-state problem.
    #[arg(long, default_value_t = 1.0)]
    pub r: f64,
    /// Copies labelled 0 (unbalanced optimum).
    #[arg(long = "nA", requires = "n_c")]
    pub n_a: Option<i64>,
    /// Copies labelled 1 (unbalanced optimum).
    #[arg(long = "nC", requires = "n_a")]
    pub n_c: Option<i64>,
    /// SDP duality-gap tolerance for mixed learning machines.
    #[arg(long, env = "QCLASS_TOL", default_value_t = DEFAULT_TOL)]
    pub tol: f64,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Figure {
    /// Excess risks against purity for n = 1..n_max.
    Fig1,
}

#[derive(Debug, Args, Serialize)]
pub struct SweepArgs {
    pub figure: Figure,
    #[arg(long, default_value_t = 1)]
    pub n_min: i64,
    #[arg(long, default_value_t = 5)]
    pub n_max: i64,
    #[arg(long, default_value_t = 0.1)]
    pub r_min: f64,
    #[arg(long, default_value_t = 1.0)]
    pub r_max: f64,
    #[arg(long, default_value_t = 46)]
    pub steps: usize,
    #[arg(long, default_value = "fig1.csv")]
    pub out: PathBuf,
    #[arg(long, env = "QCLASS_TOL", default_value_t = DEFAULT_TOL)]
    pub tol: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_ITERATIONS)]
    pub max_iterations: usize,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, default_value = "all", value_parser = parse_suite)]
    pub suite: Suite,
    #[arg(long, env = "QCLASS_SEED", default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, env = "QCLASS_TOL", default_value_t = DEFAULT_TOL)]
    pub tol: f64,
    /// Monte Carlo trials for the sampled learning machine.
    #[arg(long, default_value_t = 200_000)]
    pub trials: usize,
    /// Also write the report to this file, with a manifest sidecar.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_suite(s: &str) -> std::result::Result<Suite, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_half(s: &str) -> std::result::Result<HalfInteger, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BranchChoice {
    Plus,
    Minus,
}

#[derive(Debug, Subcommand)]
pub enum Su2Command {
    /// ⟨j1 m1; j2 m2 | J M⟩. Spins accept forms like 3/2 or 1.5.
    Cg {
        #[arg(value_parser = parse_half, allow_hyphen_values = true, num_args = 6, value_names = ["J1", "M1", "J2", "M2", "J", "M"])]
        args: Vec<HalfInteger>,
    },
    /// Wigner 6j symbol {j1 j2 j3; j4 j5 j6}.
    Sixj {
        #[arg(value_parser = parse_half, num_args = 6, value_names = ["J1", "J2", "J3", "J4", "J5", "J6"])]
        args: Vec<HalfInteger>,
    },
    /// Number of spin-j irreps in n qubits.
    Multiplicity {
        #[arg(long)]
        n: i64,
        #[arg(long, value_parser = parse_half)]
        j: HalfInteger,
    },
    /// Overlap between the two coupling orders of training set and data qubit.
    Recoupling {
        #[arg(long)]
        n: i64,
        #[arg(long, value_parser = parse_half)]
        j: HalfInteger,
        #[arg(long, value_enum)]
        branch: BranchChoice,
    },
}

#[derive(Debug, Subcommand)]
pub enum DumpCommand {
    /// Γ↑ blocks with their probabilities.
    Gamma {
        #[arg(long)]
        n: i64,
        #[arg(long, default_value_t = 1.0)]
        r: f64,
    },
    /// Optimized mixed-state seed with constraint residuals.
    Seed {
        #[arg(long)]
        n: i64,
        #[arg(long)]
        r: f64,
        #[arg(long, env = "QCLASS_TOL", default_value_t = DEFAULT_TOL)]
        tol: f64,
        #[arg(long, default_value_t = DEFAULT_MAX_ITERATIONS)]
        max_iterations: usize,
    },
}

/// Provenance written next to every output file.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command_line: Vec<String>,
    pub config: serde_json::Value,
    pub version: String,
    pub seed: Option<u64>,
    pub timestamp: String,
    pub tolerances: BTreeMap<String, f64>,
    pub output: String,
}

impl RunManifest {
    fn new(config: serde_json::Value, seed: Option<u64>, tolerances: BTreeMap<String, f64>, output: &Path) -> Self {
        Self {
            command_line: std::env::args().collect(),
            config,
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            timestamp: chrono::Utc::now().to_rfc3339(),
            tolerances,
            output: output.display().to_string(),
        }
    }
}

/// `fig1.csv` → `fig1.manifest.json`.
pub fn manifest_path(output: &Path) -> PathBuf {
    let stem = output
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    output.with_file_name(format!("{stem}.manifest.json"))
}

fn write_manifest(manifest: &RunManifest, output: &Path) -> Result<PathBuf> {
    let path = manifest_path(output);
    std::fs::write(&path, to_json_string(manifest)? + "\n")?;
    Ok(path)
}

/// Parses `args` (including the program name) and runs the command; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = err.print();
            return code;
        }
    };
    if cli.threads > 0 {
        // A second initialization only happens in-process (tests); the first pool stays.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global();
    }
    let mut stdout = std::io::stdout().lock();
    match execute(cli.command, &mut stdout) {
        Ok(code) => code,
        Err(err) => {
            let _ = stdout.flush();
            eprintln!("error: {err}");
            EXIT_ERROR
        }
    }
}

fn execute(command: Command, out: &mut impl Write) -> Result<i32> {
    match command {
        Command::Machine(args) => cmd_machine(args, out),
        Command::Sweep(args) => cmd_sweep(args, out),
        Command::Verify(args) => cmd_verify(args, out),
        Command::Su2(cmd) => cmd_su2(cmd, out),
        Command::Dump(cmd) => cmd_dump(cmd, out),
    }
}

pub fn machine_report(args: &MachineArgs) -> Result<MachineReport> {
    if let (Some(n_a), Some(n_c)) = (args.n_a, args.n_c) {
        if args.machine != MachineChoice::Opt {
            return domain("--nA/--nC apply to the optimal machine only");
        }
        if args.r != 1.0 {
            return domain("the unbalanced optimum is available for pure states only");
        }
        return unbalanced_report(n_a, n_c);
    }
    let Some(n) = args.n else {
        return domain("--n is required unless --nA and --nC are given");
    };
    if !(args.r > 0.0 && args.r <= 1.0) {
        return domain(format!("purity must lie in (0, 1], got {}", args.r));
    }
    if args.r == 1.0 {
        return closed_form_report(args.machine.into(), n);
    }
    match args.machine {
        MachineChoice::Opt => mixed_programmable_risk(n, args.r),
        MachineChoice::Lm => {
            let options = SolverOptions {
                tol: args.tol,
                max_iterations: DEFAULT_MAX_ITERATIONS,
            };
            Ok(mixed_lm_risk(n, args.r, options)?.report)
        }
        _ => domain("mixed states are supported for the opt and lm machines"),
    }
}

fn method_name(method: Method) -> &'static str {
    match method {
        Method::ClosedForm => "closed form",
        Method::Sdp => "sdp",
        Method::Oracle => "oracle",
    }
}

fn cmd_machine(args: MachineArgs, out: &mut impl Write) -> Result<i32> {
    let report = machine_report(&args)?;
    if args.json {
        writeln!(out, "{}", to_json_string(&report)?)?;
    } else {
        writeln!(out, "machine            {:?}", report.machine)?;
        match (report.n_a, report.n_c) {
            (Some(a), Some(c)) => writeln!(out, "nA, nC             {a}, {c}")?,
            _ => writeln!(out, "n                  {}", report.n)?,
        }
        writeln!(out, "r                  {}", full_precision(report.r))?;
        writeln!(out, "error probability  {}", full_precision(report.error_probability))?;
        writeln!(out, "excess risk        {}", full_precision(report.excess_risk))?;
        writeln!(out, "method             {}", method_name(report.method))?;
    }
    Ok(EXIT_OK)
}

fn cmd_sweep(args: SweepArgs, out: &mut impl Write) -> Result<i32> {
    let config = SweepConfig {
        n_min: args.n_min,
        n_max: args.n_max,
        r_min: args.r_min,
        r_max: args.r_max,
        steps: args.steps,
        tol: args.tol,
        max_iterations: args.max_iterations,
    };
    let table = run_sweep(&config)?;
    table.write_csv_file(&args.out)?;
    let tolerances = BTreeMap::from([("sdp_gap".to_string(), args.tol)]);
    let manifest = RunManifest::new(serde_json::to_value(&args)?, None, tolerances, &args.out);
    let manifest_file = write_manifest(&manifest, &args.out)?;
    let failures = table.failures().count();
    writeln!(
        out,
        "wrote {} rows to {} (manifest {}); {failures} failed points",
        table.rows.len(),
        args.out.display(),
        manifest_file.display()
    )?;
    for row in table.failures() {
        writeln!(
            out,
            "n={} r={}: {}",
            row.n,
            full_precision(row.r),
            row.failure.as_deref().unwrap_or("")
        )?;
    }
    Ok(if failures == 0 { EXIT_OK } else { EXIT_ERROR })
}

fn cmd_verify(args: VerifyArgs, out: &mut impl Write) -> Result<i32> {
    let options = VerifyOptions {
        seed: args.seed,
        tol: args.tol,
        trials: args.trials,
    };
    let report = verify::run(args.suite, options)?;
    let json = to_json_string(&report)? + "\n";
    out.write_all(json.as_bytes())?;
    if let Some(path) = &args.out {
        std::fs::write(path, &json)?;
        let config = serde_json::json!({
            "suite": args.suite,
            "seed": args.seed,
            "tol": args.tol,
            "trials": args.trials,
        });
        let tolerances = report.checks.iter().map(|c| (c.id.clone(), c.tolerance)).collect();
        write_manifest(&RunManifest::new(config, Some(args.seed), tolerances, path), path)?;
    }
    Ok(if report.all_pass() { EXIT_OK } else { EXIT_VERIFY_FAILED })
}

#[derive(Serialize)]
struct Value<'a> {
    quantity: &'a str,
    value: f64,
}

fn cmd_su2(cmd: Su2Command, out: &mut impl Write) -> Result<i32> {
    let value = match &cmd {
        Su2Command::Cg { args } => Value {
            quantity: "clebsch_gordan",
            value: clebsch_gordan(args[0], args[1], args[2], args[3], args[4], args[5])?,
        },
        Su2Command::Sixj { args } => Value {
            quantity: "wigner_6j",
            value: wigner_6j(args[0], args[1], args[2], args[3], args[4], args[5])?,
        },
        Su2Command::Multiplicity { n, j } => Value {
            quantity: "multiplicity",
            value: multiplicity(*n, *j)? as f64,
        },
        Su2Command::Recoupling { n, j, branch } => {
            let branch = match branch {
                BranchChoice::Plus => Branch::Plus,
                BranchChoice::Minus => Branch::Minus,
            };
            Value {
                quantity: "recoupling_overlap",
                value: recoupling_overlap(*n, *j, branch)?,
            }
        }
    };
    writeln!(out, "{}", to_json_string(&value)?)?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct GammaBlock {
    label: BlockLabel,
    probability: f64,
    gamma: BlockOperator,
}

fn cmd_dump(cmd: DumpCommand, out: &mut impl Write) -> Result<i32> {
    let json = match cmd {
        DumpCommand::Gamma { n, r } => {
            let params = SpectrumParams::new(n, r)?;
            let blocks = block_labels(params)?
                .into_iter()
                .map(|(label, probability)| {
                    Ok(GammaBlock {
                        label,
                        probability,
                        gamma: gamma_up_mixed(label, params)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            to_json_string(&blocks)?
        }
        DumpCommand::Seed {
            n,
            r,
            tol,
            max_iterations,
        } => {
            let problem = learning_machine_problem(SpectrumParams::new(n, r)?)?;
            let seed = solve(&problem, SolverOptions { tol, max_iterations })?;
            to_json_string(&seed.dump(&problem))?
        }
    };
    writeln!(out, "{json}")?;
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("qclass").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn manifest_sits_next_to_output() {
        assert_eq!(
            manifest_path(Path::new("out/fig1.csv")),
            Path::new("out/fig1.manifest.json")
        );
    }

    #[test]
    fn machine_flags() {
        let Command::Machine(args) = parse(&["machine", "opt", "--nA", "3", "--nC", "1"]).command else {
            panic!()
        };
        let report = machine_report(&args).unwrap();
        assert!(report.error_probability > 1.0 / 6.0 && report.error_probability < 0.5);
        let Command::Machine(args) = parse(&["machine", "reversed", "--n", "1"]).command else {
            panic!()
        };
        assert!((machine_report(&args).unwrap().error_probability - 11.0 / 24.0).abs() < 1e-15);
        let Command::Machine(args) = parse(&["machine", "ed", "--n", "2", "--r", "0.5"]).command else {
            panic!()
        };
        assert!(matches!(machine_report(&args), Err(Error::Domain(_))));
        assert!(Cli::try_parse_from(["qclass", "machine", "opt", "--nA", "3"]).is_err());
    }

    #[test]
    fn suite_and_half_integer_arguments() {
        let Command::Verify(args) = parse(&["verify", "--suite", "mixed"]).command else {
            panic!()
        };
        assert_eq!(args.suite, Suite::Mixed);
        assert!(Cli::try_parse_from(["qclass", "verify", "--suite", "bogus"]).is_err());
        let Command::Su2(Su2Command::Cg { args }) =
            parse(&["su2", "cg", "1", "-1", "1/2", "1/2", "3/2", "-1/2"]).command
        else {
            panic!()
        };
        assert_eq!(args[2], HalfInteger::HALF);
    }
}
