//! Command-line front end.
//!
//! Options come from flags and from an optional `key = value` file given by
//! `--config`; keys are the long flag names without dashes. Flags win over
//! the file, with a warning on stderr when both set a key to different
//! values.
//!
//! Exit codes: 0 success, 1 invariant failure, 2 configuration or I/O error,
//! 3 solver failure.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::analysis::{
    run_convergence_study, ErrorMeasurement, ManufacturedSolution, NormFamily, StudyConfig, StudyResult, Variant,
};
use crate::error::StokesError;
use crate::linsolve::DEFAULT_TOLERANCE;
use crate::postprocess::{collocate_with, CollocationMode, InterpolationTrajectory};
use crate::quadrature::MAX_POINTS_PER_AXIS;
use crate::report::{emit_report, format_sci, to_csv, to_markdown, OutputFormat, CSV_HEADER};
use crate::timestepping::{march, Discretization, LoadOptions, TimeMesh};
use crate::verify::{verify, Fault};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVARIANT: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

/// Largest accepted refinement level (level 8 has 1024² cells).
pub const MAX_LEVEL: usize = 8;

#[derive(Debug, Parser)]
#[command(
    name = "stokes",
    about = "Taylor–Hood / cGP(1) Stokes solver with pressure post-processing"
)]
struct Args {
    #[command(subcommand)]
    command: Option<Cmd>,

    /// key = value configuration file; flags take precedence
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Refinement levels: `2`, `0..3` (inclusive) or `0..=3`
    #[arg(long, global = true)]
    levels: Option<String>,

    /// collocation, interpolation or both
    #[arg(long, global = true)]
    variant: Option<String>,

    /// Relative residual tolerance of the saddle solves, in (0, 1e-4]
    #[arg(long = "solver-tol", global = true)]
    solver_tol: Option<String>,

    /// Output directory; stdout when absent
    #[arg(long, global = true)]
    output: Option<String>,

    /// csv or markdown
    #[arg(long, global = true)]
    format: Option<String>,

    /// Gauss points per time interval for L2-in-time norms
    #[arg(long = "time-points", global = true)]
    time_points: Option<String>,

    /// Gauss points per cell axis for spatial norms
    #[arg(long = "error-points", global = true)]
    error_points: Option<String>,

    /// Load treatment: gauss2-interpolated or lobatto
    #[arg(long, global = true)]
    load: Option<String>,

    /// Collocation data: local or recurrence
    #[arg(long, global = true)]
    collocation: Option<String>,

    /// Seed for the random points of `verify`
    #[arg(long, global = true)]
    seed: Option<String>,

    /// Test hook: corrupt the divergence operator during `verify`
    #[arg(long = "inject-fault", global = true, hide = true)]
    inject_fault: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
enum Cmd {
    /// Simulate individual levels and report final-time errors
    Run,
    /// Convergence study over a range of levels
    Convergence,
    /// Cross-module invariant suite
    Verify,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Run,
    Convergence,
    Verify,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VariantChoice {
    Collocation,
    Interpolation,
    Both,
}

impl VariantChoice {
    pub fn variants(self) -> Vec<Variant> {
        match self {
            VariantChoice::Collocation => vec![Variant::Collocation],
            VariantChoice::Interpolation => vec![Variant::Interpolation],
            VariantChoice::Both => vec![Variant::Collocation, Variant::Interpolation],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub levels: RangeInclusive<usize>,
    pub variant: VariantChoice,
    pub tolerance: f64,
    pub output: Option<PathBuf>,
    pub format: OutputFormat,
    pub time_points: usize,
    pub error_points: usize,
    pub load: LoadOptions,
    pub collocation: CollocationMode,
    pub seed: u64,
    pub fault: Fault,
}

impl Default for RunConfig {
    fn default() -> Self {
        let study = StudyConfig::default();
        Self {
            command: Command::Convergence,
            levels: study.levels,
            variant: VariantChoice::Both,
            tolerance: DEFAULT_TOLERANCE,
            output: None,
            format: OutputFormat::Csv,
            time_points: study.time_points,
            error_points: study.error_points,
            load: study.load,
            collocation: study.collocation,
            seed: 42,
            fault: Fault::None,
        }
    }
}

impl RunConfig {
    pub fn study(&self) -> StudyConfig {
        StudyConfig {
            levels: self.levels.clone(),
            tolerance: self.tolerance,
            time_points: self.time_points,
            error_points: self.error_points,
            load: self.load,
            collocation: self.collocation,
            ..StudyConfig::default()
        }
    }
}

/// Configuration error with a user-facing message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

const KEYS: [&str; 11] = [
    "command",
    "levels",
    "variant",
    "solver-tol",
    "output",
    "format",
    "time-points",
    "error-points",
    "load",
    "collocation",
    "seed",
];

/// Parses `key = value` lines; blank lines and `#` comments are skipped.
pub fn parse_config_file(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return err(format!("config line {}: expected `key = value`", i + 1));
        };
        let (k, v) = (k.trim(), v.trim());
        if !KEYS.contains(&k) {
            return err(format!("config line {}: unknown key `{k}`", i + 1));
        }
        if v.is_empty() {
            return err(format!("config line {}: empty value for `{k}`", i + 1));
        }
        if map.insert(k.to_string(), v.to_string()).is_some() {
            return err(format!("config line {}: duplicate key `{k}`", i + 1));
        }
    }
    Ok(map)
}

/// Parses `2`, `0..3` or `0..=3`; both bounds are inclusive.
pub fn parse_levels(s: &str) -> Result<RangeInclusive<usize>, ConfigError> {
    let num = |x: &str| {
        x.trim()
            .parse::<usize>()
            .map_err(|_| ConfigError(format!("invalid level `{x}` in `{s}`")))
    };
    let (lo, hi) = match s.split_once("..") {
        Some((a, b)) => (num(a)?, num(b.strip_prefix('=').unwrap_or(b))?),
        None => {
            let l = num(s)?;
            (l, l)
        }
    };
    if lo > hi {
        return err(format!("empty level range `{s}`"));
    }
    if hi > MAX_LEVEL {
        return err(format!("level {hi} exceeds the maximum {MAX_LEVEL}"));
    }
    Ok(lo..=hi)
}

fn parse_value(cfg: &mut RunConfig, key: &str, v: &str) -> Result<(), ConfigError> {
    let int = |lo: usize, hi: usize| -> Result<usize, ConfigError> {
        match v.parse::<usize>() {
            Ok(n) if (lo..=hi).contains(&n) => Ok(n),
            _ => err(format!("`{key}` must be an integer in [{lo}, {hi}], got `{v}`")),
        }
    };
    match key {
        "command" => {
            cfg.command = match v {
                "run" => Command::Run,
                "convergence" => Command::Convergence,
                "verify" => Command::Verify,
                _ => return err(format!("unknown command `{v}`")),
            }
        }
        "levels" => cfg.levels = parse_levels(v)?,
        "variant" => {
            cfg.variant = match v {
                "collocation" => VariantChoice::Collocation,
                "interpolation" => VariantChoice::Interpolation,
                "both" => VariantChoice::Both,
                _ => return err(format!("unknown variant `{v}`")),
            }
        }
        "solver-tol" => {
            cfg.tolerance = match v.parse::<f64>() {
                Ok(t) if t > 0.0 && t <= 1e-4 => t,
                _ => return err(format!("solver-tol must lie in (0, 1e-4], got `{v}`")),
            }
        }
        "output" => cfg.output = Some(PathBuf::from(v)),
        "format" => {
            cfg.format = match v {
                "csv" => OutputFormat::Csv,
                "markdown" | "md" => OutputFormat::Markdown,
                _ => return err(format!("unknown format `{v}`")),
            }
        }
        "time-points" => cfg.time_points = int(5, 20)?,
        "error-points" => cfg.error_points = int(3, MAX_POINTS_PER_AXIS)?,
        "load" => {
            cfg.load = match v {
                "gauss2-interpolated" => LoadOptions::INTERPOLATED_GAUSS,
                "lobatto" => LoadOptions::LOBATTO,
                _ => return err(format!("unknown load treatment `{v}`")),
            }
        }
        "collocation" => {
            cfg.collocation = match v {
                "local" => CollocationMode::LocalSolve,
                "recurrence" => CollocationMode::Recurrence,
                _ => return err(format!("unknown collocation mode `{v}`")),
            }
        }
        "seed" => {
            cfg.seed = v
                .parse()
                .map_err(|_| ConfigError(format!("seed must be a non-negative integer, got `{v}`")))?
        }
        _ => return err(format!("unknown key `{key}`")),
    }
    Ok(())
}

/// Outcome of argument parsing.
#[derive(Debug)]
pub enum Parsed {
    Config(RunConfig),
    /// Help or version text to print; exit 0.
    Info(String),
}

/// Builds a [`RunConfig`] from arguments (without the program name) and the
/// optional config file contents. Warnings go to `warnings`.
pub fn parse_config<I, S>(args: I, warnings: &mut Vec<String>) -> Result<Parsed, ConfigError>
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let argv = std::iter::once(std::ffi::OsString::from("stokes")).chain(args.into_iter().map(Into::into));
    let a = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => Ok(Parsed::Info(e.to_string())),
                _ => Err(ConfigError(e.to_string().trim_end().to_string())),
            };
        }
    };
    let file = match &a.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| ConfigError(format!("{}: {e}", p.display())))?;
            parse_config_file(&text)?
        }
        None => BTreeMap::new(),
    };
    let command = a.command.map(|c| match c {
        Cmd::Run => "run",
        Cmd::Convergence => "convergence",
        Cmd::Verify => "verify",
    });
    let flags: [(&str, Option<&str>); 11] = [
        ("command", command),
        ("levels", a.levels.as_deref()),
        ("variant", a.variant.as_deref()),
        ("solver-tol", a.solver_tol.as_deref()),
        ("output", a.output.as_deref()),
        ("format", a.format.as_deref()),
        ("time-points", a.time_points.as_deref()),
        ("error-points", a.error_points.as_deref()),
        ("load", a.load.as_deref()),
        ("collocation", a.collocation.as_deref()),
        ("seed", a.seed.as_deref()),
    ];
    let mut cfg = RunConfig::default();
    for (key, flag) in flags {
        let from_file = file.get(key).map(String::as_str);
        if let (Some(f), Some(v)) = (flag, from_file) {
            if f != v {
                warnings.push(format!(
                    "warning: `{key}` given as `{f}` on the command line and `{v}` in the config file; using `{f}`"
                ));
            }
        }
        if let Some(v) = flag.or(from_file) {
            parse_value(&mut cfg, key, v)?;
        }
    }
    if a.inject_fault {
        cfg.fault = Fault::FlipDivergenceSign;
    }
    Ok(Parsed::Config(cfg))
}

/// Creates `dir` and checks that a file can be written into it.
fn check_writable(dir: &Path) -> Result<(), ConfigError> {
    fs::create_dir_all(dir).map_err(|e| ConfigError(format!("{}: {e}", dir.display())))?;
    let probe = dir.join(".stokes-write-check");
    fs::write(&probe, b"").map_err(|e| ConfigError(format!("{} is not writable: {e}", dir.display())))?;
    let _ = fs::remove_file(&probe);
    Ok(())
}

fn study_exit(e: &StokesError) -> i32 {
    if e.is_solver_failure() {
        EXIT_SOLVER
    } else {
        EXIT_CONFIG
    }
}

/// Combined CSV of several reports with `variant,norm` prefix columns.
pub fn combined_csv(result: &StudyResult, variants: &[Variant]) -> String {
    let mut out = format!("variant,norm,{CSV_HEADER}\n");
    for &v in variants {
        for family in NormFamily::ALL {
            for line in to_csv(result.report(v), family).lines().skip(1) {
                writeln!(out, "{},{},{line}", v.name(), family.name()).unwrap();
            }
        }
    }
    out
}

/// Final-time errors of one level.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub level: usize,
    pub tau: f64,
    pub h: f64,
    pub n_velocity: usize,
    pub n_pressure: usize,
    pub max_divergence: f64,
    pub velocity_h1_final: f64,
    pub pressure_interpolation_final: f64,
    pub pressure_collocation_final: f64,
}

pub const RUN_CSV_HEADER: &str = "level,tau,h,n_u,n_p,max_div,err_u_H1_T,err_p_interp_T,err_p_colloc_T";

/// Simulates one level and measures errors at the final time.
pub fn run_single(level: usize, cfg: &RunConfig) -> crate::Result<RunSummary> {
    let study = cfg.study();
    let ex = ManufacturedSolution;
    let f = |x: [f64; 2], t: f64| ex.forcing(x, t);
    let disc = Discretization::unit_square(study.cells(level))?.with_load_options(cfg.load)?;
    let solver = disc.solver(cfg.tolerance);
    let tm = TimeMesh::uniform(ManufacturedSolution::FINAL_TIME, study.steps(level))?;
    let traj = march(&disc, &solver, &vec![0.0; disc.space.n_velocity()], &tm, &f)?;
    let ct = collocate_with(cfg.collocation, &disc, &solver, &traj, &f)?;
    let it = InterpolationTrajectory::new(&traj)?;
    let meas = ErrorMeasurement::new(&disc, cfg.error_points, cfg.time_points)?;
    let end = tm.end();
    let n = tm.num_intervals();
    let max_divergence = (1..=n)
        .flat_map(|k| disc.ops.divergence_of(traj.midpoint_velocity(k)))
        .fold(0.0f64, |m, x| m.max(x.abs()));
    Ok(RunSummary {
        level,
        tau: tm.tau(1),
        h: disc.space.mesh().h(),
        n_velocity: disc.space.n_velocity(),
        n_pressure: disc.space.n_pressure(),
        max_divergence,
        velocity_h1_final: meas.velocity_h1(traj.nodal_velocity(n), end),
        pressure_interpolation_final: meas.pressure_l2(&it.eval(end)?, end),
        pressure_collocation_final: meas.pressure_l2(&ct.eval_p_tilde(end)?, end),
    })
}

fn render_run(rows: &[RunSummary], format: OutputFormat) -> String {
    let mut out = String::new();
    match format {
        OutputFormat::Csv => {
            writeln!(out, "{RUN_CSV_HEADER}").unwrap();
            for r in rows {
                writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{}",
                    r.level,
                    format_sci(r.tau),
                    format_sci(r.h),
                    r.n_velocity,
                    r.n_pressure,
                    format_sci(r.max_divergence),
                    format_sci(r.velocity_h1_final),
                    format_sci(r.pressure_interpolation_final),
                    format_sci(r.pressure_collocation_final)
                )
                .unwrap();
            }
        }
        OutputFormat::Markdown => {
            out.push_str("| level | τ | h | velocity DOFs | pressure DOFs | max div | ‖u − u_h‖ H1 at T | ‖p − pbar‖ at T | ‖p − p~‖ at T |\n");
            out.push_str("|---:|---|---|---:|---:|---:|---:|---:|---:|\n");
            for r in rows {
                writeln!(
                    out,
                    "| {} | {} | {} | {} | {} | {} | {} | {} | {} |",
                    r.level,
                    format_sci(r.tau),
                    format_sci(r.h),
                    r.n_velocity,
                    r.n_pressure,
                    format_sci(r.max_divergence),
                    format_sci(r.velocity_h1_final),
                    format_sci(r.pressure_interpolation_final),
                    format_sci(r.pressure_collocation_final)
                )
                .unwrap();
            }
        }
    }
    out
}

/// Executes a parsed configuration.
pub fn execute(cfg: &RunConfig, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    if let Some(dir) = &cfg.output {
        if let Err(e) = check_writable(dir) {
            let _ = writeln!(stderr, "error: {e}");
            return EXIT_CONFIG;
        }
    }
    let io_fail = |stderr: &mut dyn Write, e: &dyn std::fmt::Display| {
        let _ = writeln!(stderr, "error: {e}");
        EXIT_CONFIG
    };
    match cfg.command {
        Command::Verify => {
            let report = verify(cfg.seed, cfg.fault);
            let text = report.to_string();
            if let Err(e) = stdout.write_all(text.as_bytes()) {
                return io_fail(stderr, &e);
            }
            if let Some(dir) = &cfg.output {
                if let Err(e) = fs::write(dir.join("verify.txt"), &text) {
                    return io_fail(stderr, &e);
                }
            }
            if report.passed() {
                EXIT_OK
            } else {
                for c in report.failed() {
                    let _ = writeln!(stderr, "invariant violated: {}", c.name);
                }
                EXIT_INVARIANT
            }
        }
        Command::Run => {
            let mut rows = Vec::new();
            for level in cfg.levels.clone() {
                match run_single(level, cfg) {
                    Ok(r) => rows.push(r),
                    Err(e) => {
                        let _ = writeln!(stderr, "error: level {level}: {e}");
                        return study_exit(&e);
                    }
                }
            }
            let text = render_run(&rows, cfg.format);
            let written = match &cfg.output {
                Some(dir) => {
                    let ext = if cfg.format == OutputFormat::Csv { "csv" } else { "md" };
                    fs::write(dir.join(format!("run.{ext}")), &text)
                }
                None => stdout.write_all(text.as_bytes()),
            };
            match written {
                Ok(()) => EXIT_OK,
                Err(e) => io_fail(stderr, &e),
            }
        }
        Command::Convergence => {
            let result = match run_convergence_study(&cfg.study()) {
                Ok(r) => r,
                Err(e) => {
                    let _ = writeln!(stderr, "error: {e}");
                    return study_exit(&e);
                }
            };
            let variants = cfg.variant.variants();
            match &cfg.output {
                Some(dir) => {
                    let reports: Vec<_> = variants.iter().map(|&v| result.report(v)).collect();
                    match emit_report(&reports, cfg.format, dir) {
                        Ok(paths) => {
                            for p in paths {
                                let _ = writeln!(stderr, "wrote {}", p.display());
                            }
                            EXIT_OK
                        }
                        Err(e) => io_fail(stderr, &e),
                    }
                }
                None => {
                    let text = match cfg.format {
                        OutputFormat::Csv => combined_csv(&result, &variants),
                        OutputFormat::Markdown => variants
                            .iter()
                            .map(|&v| to_markdown(result.report(v)))
                            .collect::<Vec<_>>()
                            .join("\n"),
                    };
                    match stdout.write_all(text.as_bytes()) {
                        Ok(()) => EXIT_OK,
                        Err(e) => io_fail(stderr, &e),
                    }
                }
            }
        }
    }
}

/// Parses `args` (without the program name) and runs the command. Data goes
/// to `stdout`, diagnostics to `stderr`; returns the process exit code.
pub fn run<I, S>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let mut warnings = Vec::new();
    let parsed = parse_config(args, &mut warnings);
    for w in &warnings {
        let _ = writeln!(stderr, "{w}");
    }
    match parsed {
        Ok(Parsed::Info(text)) => {
            let _ = write!(stdout, "{text}");
            EXIT_OK
        }
        Ok(Parsed::Config(cfg)) => execute(&cfg, stdout, stderr),
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_CONFIG
        }
    }
}
