//! Library side of the `trotsens` binary.
//!
//! Every subcommand is a plain function over parsed arguments so that tests
//! can drive the commands in-process. [`execute`] maps outcomes to the stable
//! exit codes: 0 success, 1 runtime failure, 2 configuration failure.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;
use trotsens_core::pipeline::{
    analyze, csv_preamble, run_experiment_with, set_threads, validate_report_dir, write_indices_csv,
    write_report_dir, ReportFiles, Violation, CONFIG_TOML, INDICES_CSV, REFERENCE_DENSE, REFERENCE_SPARSE,
};
use trotsens_core::{DirectionNumbers, ExperimentConfig, ExperimentReport, Order};

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "TROTSENS_OUT";
pub const DEFAULT_OUT: &str = "trotsens-out";
pub const SWEEP_CSV: &str = "sweep.csv";

#[derive(Debug, Parser)]
#[command(name = "trotsens", version, about = "Sensitivity-guided truncation of Trotter-Suzuki product formulas")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one experiment and write a report directory.
    Run(RunArgs),
    /// Run one experiment per qubit count and collect a plottable CSV.
    Sweep(SweepArgs),
    /// Estimate sensitivity indices only.
    Indices(RunArgs),
    /// Re-check the invariants of an existing report directory.
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub qubits: Option<u32>,
    #[command(flatten)]
    pub common: ExperimentArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    /// Qubit counts, repeatable or comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub qubits: Vec<u32>,
    #[command(flatten)]
    pub common: ExperimentArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    /// Report directory written by `run`.
    pub dir: PathBuf,
}

/// Flags shared by the experiment subcommands. Each one overrides the
/// matching field of `--config`, which in turn overrides the defaults.
#[derive(Debug, Clone, Args)]
pub struct ExperimentArgs {
    /// TOML file with `ExperimentConfig` fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub terms: Option<usize>,
    #[arg(long)]
    pub density: Option<f64>,
    #[arg(long)]
    pub weaken_count: Option<usize>,
    #[arg(long)]
    pub weaken_factor: Option<f64>,
    /// Base Saltelli sample count; must be a power of two.
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub threshold_ratio: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Evolution times, repeatable or comma separated.
    #[arg(long = "time", value_delimiter = ',', allow_negative_numbers = true)]
    pub times: Vec<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    /// Product-formula orders (1, 2), repeatable or comma separated.
    #[arg(long, value_delimiter = ',', value_parser = parse_order)]
    pub orders: Vec<Order>,
    /// Also estimate the indices at twice the sample count.
    #[arg(long)]
    pub convergence_check: bool,
    /// Joe-Kuo style direction-number file replacing the bundled table.
    #[arg(long)]
    pub directions: Option<PathBuf>,
    /// Worker thread cap for the linear-algebra kernels.
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long, env = OUT_ENV, default_value = DEFAULT_OUT)]
    pub out: PathBuf,
}

fn parse_order(s: &str) -> Result<Order, String> {
    let v: u8 = s.trim().parse().map_err(|_| format!("invalid order {s:?}"))?;
    Order::try_from(v)
}

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, config file or inputs; exit code 2.
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] trotsens_core::Error),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(e) if e.is_config() => 2,
            _ => 1,
        }
    }
}

type CliResult<T> = Result<T, CliError>;

impl ExperimentArgs {
    /// Defaults, then `--config`, then individual flags.
    pub fn resolve(&self, qubits: Option<u32>) -> CliResult<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
                ExperimentConfig::from_toml(&text)
                    .map_err(|e| CliError::Config(format!("config {}: {e}", path.display())))?
            }
            None => ExperimentConfig::default(),
        };
        macro_rules! apply {
            ($($flag:ident => $field:ident),*) => {$(
                if let Some(v) = self.$flag {
                    cfg.$field = v;
                }
            )*};
        }
        apply!(terms => n_terms, density => density, weaken_count => weaken_count,
               weaken_factor => weaken_factor, samples => samples, seed => seed, steps => steps);
        if let Some(q) = qubits {
            cfg.qubits = q;
        }
        if self.threshold_ratio.is_some() {
            cfg.threshold_ratio = self.threshold_ratio;
        }
        if !self.times.is_empty() {
            cfg.time_grid = self.times.clone();
        }
        if !self.orders.is_empty() {
            cfg.orders = self.orders.clone();
        }
        cfg.convergence_check |= self.convergence_check;
        cfg.validate()?;
        Ok(cfg.resolved())
    }

    fn directions(&self) -> CliResult<Option<DirectionNumbers>> {
        self.directions
            .as_deref()
            .map(|p| {
                DirectionNumbers::from_path(p)
                    .map_err(|e| CliError::Config(format!("direction numbers {}: {e}", p.display())))
            })
            .transpose()
    }

    fn apply_threads(&self) -> CliResult<()> {
        match self.threads {
            Some(0) => Err(CliError::Config("--threads must be positive".into())),
            Some(n) => {
                set_threads(n);
                Ok(())
            }
            None => Ok(()),
        }
    }
}

pub struct RunOutcome {
    pub report: ExperimentReport,
    pub files: ReportFiles,
}

pub fn cmd_run(args: &RunArgs) -> CliResult<RunOutcome> {
    let cfg = args.common.resolve(args.qubits)?;
    args.common.apply_threads()?;
    let owned = args.common.directions()?;
    let table = owned.as_ref().unwrap_or_else(|| DirectionNumbers::bundled());
    let report = run_experiment_with(&cfg, table)?;
    let files = write_report_dir(&report, &args.common.out)?;
    Ok(RunOutcome { report, files })
}

/// Human-readable digest of a report.
pub fn render_summary(report: &ExperimentReport) -> String {
    let c = &report.config;
    let mut s = String::new();
    let _ = writeln!(
        s,
        "qubits {} (dim {}), {} terms, {} weakened by {}, N = {}, seed {}",
        c.qubits,
        report.dim,
        c.n_terms,
        report.weakened.len(),
        c.weaken_factor,
        c.samples,
        c.seed
    );
    let _ = writeln!(
        s,
        "removed {} terms below {:.3e}; all removed were weakened: {}",
        report.removed.len(),
        report.threshold,
        if report.removed_is_subset_of_weakened { "yes" } else { "no" }
    );
    let _ = writeln!(s, "{:>5} {:>8} {:>10} {:>6} {:>22}", "order", "variant", "t", "gates", "epsilon");
    for e in &report.errors {
        let _ = writeln!(
            s,
            "{:>5} {:>8} {:>10} {:>6} {:>22.15e}",
            e.order,
            e.variant.as_str(),
            e.time,
            e.gate_count,
            e.epsilon
        );
    }
    if let Some(r) = report.reference_remaining_gates {
        let _ = writeln!(
            s,
            "remaining terms {} (reference for this setting: {r})",
            report.reduced_term_count()
        );
    }
    s
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub qubits: u32,
    pub order: Order,
    pub variant: &'static str,
    pub epsilon: f64,
    pub gates: usize,
    pub time: f64,
}

pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    pub csv: PathBuf,
    /// Qubit counts whose experiment failed, with the error message.
    pub failures: Vec<(u32, String)>,
}

/// Runs every qubit count, writing each report to `<out>/q<n>` and the
/// combined table to `<out>/sweep.csv`. A failing point does not stop the
/// remaining ones.
pub fn cmd_sweep(args: &SweepArgs) -> CliResult<SweepOutcome> {
    let configs = args
        .qubits
        .iter()
        .map(|&q| args.common.resolve(Some(q)))
        .collect::<CliResult<Vec<_>>>()?;
    args.common.apply_threads()?;
    let owned = args.common.directions()?;
    let table = owned.as_ref().unwrap_or_else(|| DirectionNumbers::bundled());
    let out = &args.common.out;
    fs::create_dir_all(out).map_err(|e| CliError::Runtime(format!("{}: {e}", out.display())))?;

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for cfg in &configs {
        let result = run_experiment_with(cfg, table)
            .and_then(|r| write_report_dir(&r, &out.join(format!("q{}", cfg.qubits))).map(|_| r));
        match result {
            Ok(report) => rows.extend(report.errors.iter().map(|e| SweepRow {
                qubits: cfg.qubits,
                order: e.order,
                variant: e.variant.as_str(),
                epsilon: e.epsilon,
                gates: e.gate_count,
                time: e.time,
            })),
            Err(e) => failures.push((cfg.qubits, e.to_string())),
        }
    }

    let csv = out.join(SWEEP_CSV);
    write_sweep_csv(&csv, &configs[0], &args.qubits, &rows)?;
    Ok(SweepOutcome { rows, csv, failures })
}

fn write_sweep_csv(path: &Path, base: &ExperimentConfig, qubits: &[u32], rows: &[SweepRow]) -> CliResult<()> {
    let q: Vec<String> = qubits.iter().map(u32::to_string).collect();
    let mut bytes = format!("# sweep qubits={}\n", q.join(",")).into_bytes();
    bytes.extend(csv_preamble(base).into_bytes());
    let mut w = csv::Writer::from_writer(&mut bytes);
    let write = |w: &mut csv::Writer<&mut Vec<u8>>| -> csv::Result<()> {
        w.write_record(["qubits", "order", "variant", "epsilon", "gates", "time"])?;
        for r in rows {
            w.write_record([
                r.qubits.to_string(),
                r.order.to_string(),
                r.variant.to_string(),
                r.epsilon.to_string(),
                r.gates.to_string(),
                r.time.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    };
    write(&mut w).map_err(|e| CliError::Runtime(e.to_string()))?;
    drop(w);
    fs::write(path, bytes).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

pub struct IndicesOutcome {
    pub removed: Vec<usize>,
    pub weakened: Vec<usize>,
    pub threshold: f64,
    pub csv: PathBuf,
}

/// Sensitivity analysis without the product-formula stage. Writes
/// `indices.csv` and `config.toml` to the output directory.
pub fn cmd_indices(args: &RunArgs) -> CliResult<IndicesOutcome> {
    let cfg = args.common.resolve(args.qubits)?;
    args.common.apply_threads()?;
    let owned = args.common.directions()?;
    let table = owned.as_ref().unwrap_or_else(|| DirectionNumbers::bundled());
    let a = analyze(&cfg, table)?;
    let out = &args.common.out;
    fs::create_dir_all(out).map_err(trotsens_core::Error::from)?;
    let csv = out.join(INDICES_CSV);
    write_indices_csv(&csv, &cfg, &a.sensitivity, a.terms.weakened(), &a.removed)?;
    fs::write(out.join(CONFIG_TOML), cfg.to_toml()).map_err(trotsens_core::Error::from)?;
    Ok(IndicesOutcome {
        removed: a.removed,
        weakened: a.terms.weakened().to_vec(),
        threshold: a.threshold,
        csv,
    })
}

/// All violated invariants of a report directory; empty when it is valid.
pub fn cmd_validate(args: &ValidateArgs) -> CliResult<Vec<Violation>> {
    let files = ReportFiles::in_dir(&args.dir);
    for p in [&files.report, &files.config, &files.indices, &files.errors] {
        if !p.is_file() {
            return Err(CliError::Config(format!("missing report file {}", p.display())));
        }
    }
    validate_report_dir(&args.dir).map_err(|e| CliError::Runtime(format!("unreadable report: {e}")))
}

fn reference_table() -> String {
    let fmt = |t: &[(u32, usize)]| {
        t.iter()
            .map(|(q, g)| format!("q={q}: {g}"))
            .collect::<Vec<_>>()
            .join(", ")
    };
    format!(
        "reference remaining terms, dense [{}], sparse [{}]",
        fmt(&REFERENCE_DENSE),
        fmt(&REFERENCE_SPARSE)
    )
}

/// Runs a parsed command line and returns the process exit code.
pub fn execute(cli: &Cli, out: &mut impl Write, err: &mut impl Write) -> u8 {
    let result: CliResult<u8> = (|| match &cli.command {
        Command::Run(args) => {
            let o = cmd_run(args)?;
            let _ = write!(out, "{}", render_summary(&o.report));
            let _ = writeln!(out, "wrote {}", args.common.out.display());
            Ok(0)
        }
        Command::Sweep(args) => {
            let o = cmd_sweep(args)?;
            let _ = writeln!(out, "{} rows written to {}", o.rows.len(), o.csv.display());
            let _ = writeln!(out, "{}", reference_table());
            if o.failures.is_empty() {
                return Ok(0);
            }
            for (q, msg) in &o.failures {
                let _ = writeln!(err, "error: qubits {q}: {msg}");
            }
            let _ = writeln!(
                err,
                "partial failure: {} of {} sweep points failed",
                o.failures.len(),
                args.qubits.len()
            );
            Ok(1)
        }
        Command::Indices(args) => {
            let o = cmd_indices(args)?;
            let _ = writeln!(
                out,
                "removed {} terms below {:.3e}: {:?}",
                o.removed.len(),
                o.threshold,
                o.removed
            );
            let _ = writeln!(out, "weakened: {:?}", o.weakened);
            let _ = writeln!(out, "wrote {}", o.csv.display());
            Ok(0)
        }
        Command::Validate(args) => {
            let violations = cmd_validate(args)?;
            if violations.is_empty() {
                let _ = writeln!(out, "{}: all invariants hold", args.dir.display());
                return Ok(0);
            }
            for v in &violations {
                let _ = writeln!(err, "violated {}: {}", v.invariant, v.detail);
            }
            Ok(1)
        }
    })();
    result.unwrap_or_else(|e| {
        let _ = writeln!(err, "error: {e}");
        e.exit_code()
    })
}
