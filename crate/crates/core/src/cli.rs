//! Command-line front end.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage error,
//! 3 numerical error.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bath::{Environment, Mode, SpectralDensity};
use crate::decoherence::{curve_with, linear_grid, log_grid, QuadratureConfig};
use crate::error::Error;
use crate::general_bath::{verify_sequence_order, Arithmetic, OrderReport};
use crate::optimizer::{
    perturbed_start, solve_order_conditions, verify_closed_form, verify_closed_form_exact,
    DEFAULT_FTOL,
};
use crate::sequences::{make_udd, parse_sequence};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Residual tolerance for the closed-form check in `verify`.
const CLOSED_FORM_TOL: f64 = 1e-10;
/// Half-width of the uniform noise added to the CPMG grid for a seeded `optimize` start.
const SEED_AMPLITUDE: f64 = 0.02;

#[derive(Debug, Parser)]
#[command(
    name = "ddpulse",
    version,
    about = "Pi-pulse dynamical decoupling toolkit"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// List the pulse instants of one or more sequences
    Sequence {
        /// e.g. udd:10, cpmg:4, bb:3, cdd:4, iudd:3x4, custom:0.2,0.7
        #[arg(required = true)]
        specs: Vec<String>,
    },
    /// Tabulate the signal deviation 1 - s(t) as CSV
    Signal(SignalArgs),
    /// Solve the order conditions by Newton iteration
    Optimize {
        #[arg(long)]
        n: usize,
        /// Start from a randomly perturbed CPMG grid instead of the default start
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = DEFAULT_FTOL)]
        ftol: f64,
    },
    /// Check the optimal timings against both sets of order conditions
    Verify {
        #[arg(long)]
        n: usize,
        /// Use rational arithmetic (only for rational timings)
        #[arg(long, conflicts_with = "precision")]
        exact: bool,
        /// Decimal digits for the coefficient recursion
        #[arg(long)]
        precision: Option<u32>,
        /// Longest word checked, defaults to n
        #[arg(long)]
        max_len: Option<usize>,
    },
    /// Run the general-bath coefficient recursion for one sequence
    VerifyGeneral {
        #[arg(long, required_unless_present = "sequence")]
        n: Option<usize>,
        #[arg(long)]
        max_len: Option<usize>,
        #[arg(long)]
        precision: Option<u32>,
        /// Sequence to check instead of the optimal n-pulse timings
        #[arg(long)]
        sequence: Option<String>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GridKind {
    Log,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Quantum,
    Classical,
}

#[derive(Debug, Args)]
pub struct SignalArgs {
    /// Sequence spec, repeat for several columns
    #[arg(long = "sequence", short = 's', required = true)]
    pub sequences: Vec<String>,
    #[arg(long, default_value_t = 0.25)]
    pub alpha: f64,
    #[arg(long = "omega-d", default_value_t = 1.0)]
    pub omega_d: f64,
    /// Cutoff exponent or `inf` for a hard cutoff
    #[arg(long, default_value = "inf", value_parser = parse_extended)]
    pub gamma: f64,
    /// Inverse temperature or `inf` for zero temperature
    #[arg(long, default_value = "inf", value_parser = parse_extended)]
    pub beta: f64,
    #[arg(long, value_enum, default_value_t = ModeArg::Quantum)]
    pub mode: ModeArg,
    /// Smallest omega_d * t
    #[arg(long, default_value_t = 1e-2)]
    pub t_min: f64,
    /// Largest omega_d * t
    #[arg(long, default_value_t = 1e2)]
    pub t_max: f64,
    #[arg(long, default_value_t = 300)]
    pub points: usize,
    #[arg(long, value_enum, default_value_t = GridKind::Log)]
    pub grid: GridKind,
    #[arg(long, default_value_t = QuadratureConfig::default().abs_tol)]
    pub abs_tol: f64,
    #[arg(long, default_value_t = QuadratureConfig::default().rel_tol)]
    pub rel_tol: f64,
    /// Write CSV here instead of standard output
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_extended(s: &str) -> Result<f64, String> {
    match s.trim().to_ascii_lowercase().as_str() {
        "inf" | "+inf" | "infinity" => Ok(f64::INFINITY),
        other => other
            .parse::<f64>()
            .map_err(|_| format!("`{s}` is neither a number nor `inf`")),
    }
}

/// Shortest decimal that parses back to the same double.
///
/// Plain notation in `[1e-4, 1e15)`, exponent notation elsewhere.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let a = x.abs();
    if a == 0.0 || (1e-4..1e15).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

/// `x` rounded to `digits` significant digits, printed without trailing zeros.
pub fn format_significant(x: f64, digits: usize) -> String {
    let rounded: f64 = format!("{:.*e}", digits.saturating_sub(1), x)
        .parse()
        .unwrap_or(x);
    format_float(rounded)
}

fn exit_code(err: &Error) -> i32 {
    if err.is_usage() {
        EXIT_USAGE
    } else {
        EXIT_NUMERICAL
    }
}

/// Parse `args` and run, writing results to `out` and diagnostics to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let sink: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = sink.write_all(text.as_bytes());
            return code;
        }
    };
    match execute(&cli.command, out) {
        Ok(code) => code,
        Err(CliError::Domain(e)) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
        Err(CliError::Io(e)) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_NUMERICAL
        }
    }
}

enum CliError {
    Domain(Error),
    Io(io::Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Domain(e)
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e)
    }
}

fn execute(command: &Command, out: &mut dyn Write) -> Result<i32, CliError> {
    match command {
        Command::Sequence { specs } => {
            for spec in specs {
                let seq = parse_sequence(spec)?;
                writeln!(out, "# {} n={}", seq.label(), seq.len())?;
                let values: Vec<String> = seq
                    .deltas()
                    .iter()
                    .map(|&d| format_significant(d, 15))
                    .collect();
                writeln!(out, "{}", values.join(" "))?;
            }
            Ok(EXIT_OK)
        }
        Command::Signal(args) => {
            let csv = signal_csv(args)?;
            match &args.out {
                Some(path) => fs::write(path, csv)?,
                None => out.write_all(csv.as_bytes())?,
            }
            Ok(EXIT_OK)
        }
        Command::Optimize { n, seed, ftol } => optimize(*n, *seed, *ftol, out),
        Command::Verify {
            n,
            exact,
            precision,
            max_len,
        } => verify(*n, *exact, *precision, *max_len, out),
        Command::VerifyGeneral {
            n,
            max_len,
            precision,
            sequence,
        } => {
            let seq = match (sequence, n) {
                (Some(spec), _) => parse_sequence(spec)?,
                (None, Some(n)) => make_udd(*n)?,
                (None, None) => unreachable!("clap requires one of --n or --sequence"),
            };
            let arithmetic = precision.map_or(Arithmetic::Auto, |digits| {
                Arithmetic::HighPrecision { digits }
            });
            let report = verify_sequence_order(&seq, max_len.unwrap_or(seq.len()), arithmetic)?;
            write_order_report(out, &report)?;
            write_summary(out, usize::from(report.passed), 1)
        }
    }
}

/// Build the full CSV text for a `signal` run.
pub fn signal_csv(args: &SignalArgs) -> Result<String, Error> {
    let sd = if args.gamma.is_infinite() && args.gamma > 0.0 {
        SpectralDensity::hard_cutoff(args.alpha, args.omega_d)?
    } else {
        SpectralDensity::power_law(args.alpha, args.omega_d, args.gamma)?
    };
    let mode = match args.mode {
        ModeArg::Quantum => Mode::Quantum,
        ModeArg::Classical => Mode::Classical,
    };
    let env = Environment::new(args.beta, mode)?;
    let grid = match args.grid {
        GridKind::Log => log_grid(args.t_min, args.t_max, args.points)?,
        GridKind::Linear => linear_grid(args.t_min, args.t_max, args.points)?,
    };
    let times: Vec<f64> = grid.iter().map(|x| x / args.omega_d).collect();
    let config = QuadratureConfig {
        abs_tol: args.abs_tol,
        rel_tol: args.rel_tol,
        ..QuadratureConfig::default()
    };
    let sequences = args
        .sequences
        .iter()
        .map(|s| parse_sequence(s))
        .collect::<Result<Vec<_>, _>>()?;
    let curves = sequences
        .iter()
        .map(|seq| curve_with(seq, &sd, &env, &times, config))
        .collect::<Result<Vec<_>, _>>()?;

    let mut csv = String::new();
    let _ = writeln!(
        csv,
        "# command=signal sequences={} {} beta={} mode={} grid={} t_min={} t_max={} points={} abs_tol={} rel_tol={}",
        args.sequences.join(";"),
        sd,
        format_float(args.beta),
        env.mode(),
        match args.grid {
            GridKind::Log => "log",
            GridKind::Linear => "linear",
        },
        format_float(args.t_min),
        format_float(args.t_max),
        args.points,
        format_float(args.abs_tol),
        format_float(args.rel_tol),
    );
    csv.push_str("omega_d_t");
    for seq in &sequences {
        let _ = write!(csv, ",deviation:{}", seq.label());
    }
    csv.push('\n');
    for (i, x) in grid.iter().enumerate() {
        csv.push_str(&format_float(*x));
        for c in &curves {
            csv.push(',');
            csv.push_str(&format_float(c.points[i].deviation));
        }
        csv.push('\n');
    }
    Ok(csv)
}

fn optimize(n: usize, seed: Option<u64>, ftol: f64, out: &mut dyn Write) -> Result<i32, CliError> {
    let start = seed.map(|s| perturbed_start(n, SEED_AMPLITUDE, &mut ChaCha8Rng::seed_from_u64(s)));
    let result = solve_order_conditions(n, start.as_deref(), ftol)?;
    let reference = make_udd(n)?;
    writeln!(
        out,
        "# n={n} iterations={} converged={} residual_max={}",
        result.iterations,
        result.converged,
        format_float(result.residual_norm)
    )?;
    writeln!(out, "j,delta,closed_form,difference")?;
    for (j, (&d, &u)) in result.deltas.iter().zip(reference.deltas()).enumerate() {
        writeln!(
            out,
            "{},{},{},{}",
            j + 1,
            format_float(d),
            format_float(u),
            format_float(d - u)
        )?;
    }
    Ok(if result.converged {
        EXIT_OK
    } else {
        EXIT_NUMERICAL
    })
}

fn verify(
    n: usize,
    exact: bool,
    precision: Option<u32>,
    max_len: Option<usize>,
    out: &mut dyn Write,
) -> Result<i32, CliError> {
    let mut passed = 0;
    let total = 2;
    if exact {
        let ok = verify_closed_form_exact(n)?;
        writeln!(
            out,
            "order conditions n={n}: exact residuals {} {}",
            if ok { "all zero" } else { "nonzero" },
            pass_word(ok)
        )?;
        passed += usize::from(ok);
    } else {
        let report = verify_closed_form(n, CLOSED_FORM_TOL)?;
        writeln!(
            out,
            "order conditions n={n}: max residual {} (tolerance {}) {}",
            format_float(report.max_residual),
            format_float(report.tolerance),
            pass_word(report.passed)
        )?;
        passed += usize::from(report.passed);
    }
    let arithmetic = match (exact, precision) {
        (true, _) => Arithmetic::Exact,
        (false, Some(digits)) => Arithmetic::HighPrecision { digits },
        (false, None) => Arithmetic::Auto,
    };
    let report = verify_sequence_order(&make_udd(n)?, max_len.unwrap_or(n), arithmetic)?;
    write_order_report(out, &report)?;
    passed += usize::from(report.passed);
    write_summary(out, passed, total)
}

fn pass_word(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

fn write_order_report(out: &mut dyn Write, r: &OrderReport) -> io::Result<()> {
    let arithmetic = match r.digits {
        Some(d) => format!("{d} digits"),
        None => "exact".to_string(),
    };
    write!(
        out,
        "general bath {} words<={} ({arithmetic}): odd max {} even max {}",
        r.sequence,
        r.max_len,
        format_significant(r.odd_max, 4),
        format_significant(r.even_max, 4),
    )?;
    if r.exact_zeros {
        write!(out, " exact zeros")?;
    } else {
        write!(out, " separation {:.1} orders", r.separation)?;
    }
    writeln!(out, " {}", pass_word(r.passed))?;
    for s in &r.per_length {
        writeln!(
            out,
            "  length {:>2}: log10 odd max {:>8.2} log10 even max {:>7.2}",
            s.len, s.odd_max_log10, s.even_max_log10
        )?;
    }
    Ok(())
}

fn write_summary(out: &mut dyn Write, passed: usize, total: usize) -> Result<i32, CliError> {
    if passed == total {
        writeln!(out, "PASS {passed}/{total}")?;
        Ok(EXIT_OK)
    } else {
        writeln!(out, "FAIL {passed}/{total}")?;
        Ok(EXIT_VERIFY_FAILED)
    }
}
