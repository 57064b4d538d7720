//! `rdl`: evaluate, sweep, and cross-validate the rate-distortion-leakage
//! quantities of the symmetric Gaussian estimation network.
//!
//! Exit codes: 0 success, 1 invalid parameter, 2 infeasible request,
//! 3 I/O failure, 4 validation failure.

mod row;
mod validate;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use rdl_core::protocols::sigma_q2_for_distortion;
use rdl_core::{Error, ModelParams, Units};
use row::{Row, RowOptions, HEADER};

const EXIT_INVALID_PARAMETER: u8 = 1;
const EXIT_INFEASIBLE: u8 = 2;
const EXIT_IO: u8 = 3;
const EXIT_VALIDATION: u8 = 4;

#[derive(Parser)]
#[command(
    name = "rdl",
    version,
    about = "Rate-distortion-leakage calculator for symmetric Gaussian multi-agent estimation",
    after_help = "Rates diverge at --sigma-q2 0: distortion and leakage columns stay defined \
                  there but every rate column is NA. Outer-bound columns are NA whenever the \
                  bounding estimator cannot reach the operating distortion."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Units for rate and leakage columns.
    #[arg(long, global = true, value_enum, default_value_t = UnitsArg::Bits)]
    units: UnitsArg,
    /// Output format for single-point evaluation.
    #[arg(long, global = true, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
    /// Write output to this path instead of standard output.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Seed for Monte-Carlo validation.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum UnitsArg {
    Bits,
    Nats,
}

impl From<UnitsArg> for Units {
    fn from(u: UnitsArg) -> Units {
        match u {
            UnitsArg::Bits => Units::Bits,
            UnitsArg::Nats => Units::Nats,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Text,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate every quantity at one operating point.
    Point(PointArgs),
    /// Sweep the agent count and emit one CSV row per value.
    Sweep(SweepArgs),
    /// Reference sweep at h = 0.5 and quantization-noise variance 6.
    Figure1(Figure1Args),
    /// Run the oracle cross-validation suites.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct PointArgs {
    /// Number of agents (at least 2).
    #[arg(long)]
    k: usize,
    /// Interference coefficient (positive).
    #[arg(long, allow_negative_numbers = true)]
    h: f64,
    /// State variance (positive).
    #[arg(long, allow_negative_numbers = true)]
    sigma_x2: f64,
    /// Quantization-noise variance (nonnegative).
    #[arg(long, allow_negative_numbers = true)]
    sigma_q2: Option<f64>,
    /// Target distortion; converted into the equivalent quantization noise.
    #[arg(long, conflicts_with = "sigma_q2", allow_negative_numbers = true)]
    distortion: Option<f64>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    k_min: Option<usize>,
    #[arg(long)]
    k_max: Option<usize>,
    #[arg(long, default_value_t = 1)]
    k_step: usize,
    /// Comma-separated agent counts, strictly increasing (alternative to --k-min/--k-max).
    #[arg(long, conflicts_with_all = ["k_min", "k_max"])]
    k_list: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    h: f64,
    #[arg(long, allow_negative_numbers = true)]
    sigma_x2: f64,
    #[arg(long, allow_negative_numbers = true)]
    sigma_q2: f64,
    /// Leave the outer-bound columns NA.
    #[arg(long)]
    skip_outer: bool,
    /// Leave the exact-leakage column NA (its cost grows cubically with k).
    #[arg(long)]
    skip_exact_leakage: bool,
}

#[derive(Args)]
struct Figure1Args {
    /// Largest agent count; rows run over 2..=k-max.
    #[arg(long, default_value_t = 100)]
    k_max: usize,
    /// State variance used for the sweep (recorded in every row).
    #[arg(long, default_value_t = 1.0)]
    sigma_x2: f64,
    /// Print a gnuplot script (to standard output) referencing the CSV
    /// written via --output.
    #[arg(long)]
    emit_plot_script: bool,
    /// Leave the exact-leakage column NA (its cost grows cubically with k).
    #[arg(long)]
    skip_exact_leakage: bool,
}

#[derive(Args)]
struct ValidateArgs {
    /// Grid density for the cross-validation suites.
    #[arg(long, value_enum, default_value_t = GridArg::Small)]
    grid: GridArg,
    /// Monte-Carlo sample count.
    #[arg(long, default_value_t = 200_000)]
    mc_samples: usize,
    /// Per-suite tolerance overrides, as suite=value (repeatable).
    #[arg(long)]
    tolerance: Vec<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum GridArg {
    Small,
    Full,
}

struct CliFailure {
    code: u8,
    message: String,
}

impl CliFailure {
    fn invalid(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INVALID_PARAMETER,
            message: message.into(),
        }
    }

    fn infeasible(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INFEASIBLE,
            message: message.into(),
        }
    }

    fn io(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_IO,
            message: message.into(),
        }
    }

    fn validation(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_VALIDATION,
            message: message.into(),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e)
            if matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            ) =>
        {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("{e}");
            return ExitCode::from(EXIT_INVALID_PARAMETER);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> Result<(), CliFailure> {
    let units: Units = cli.units.into();
    match cli.command {
        Command::Point(args) => cmd_point(args, units, cli.format, cli.output.as_deref()),
        Command::Sweep(args) => cmd_sweep(args, units, cli.output.as_deref()),
        Command::Figure1(args) => cmd_figure1(args, units, cli.output.as_deref()),
        Command::Validate(args) => cmd_validate(args, cli.seed),
    }
}

fn build_params(k: usize, h: f64, sigma_x2: f64) -> Result<ModelParams, CliFailure> {
    ModelParams::new(k, h, sigma_x2).map_err(|e| match e {
        Error::InvalidParameter { name, reason, .. } => {
            CliFailure::invalid(format!("invalid value for --{}: {reason}", flag_name(name)))
        }
        other => CliFailure::invalid(other.to_string()),
    })
}

fn flag_name(param: &str) -> String {
    param.replace('_', "-")
}

fn check_sigma_q2(sigma_q2: f64) -> Result<(), CliFailure> {
    // written so that NaN lands in the error branch
    if sigma_q2.is_nan() || sigma_q2 < 0.0 || !sigma_q2.is_finite() {
        return Err(CliFailure::invalid(
            "invalid value for --sigma-q2: must be nonnegative and finite",
        ));
    }
    Ok(())
}

fn write_output(path: Option<&Path>, contents: &str) -> Result<(), CliFailure> {
    match path {
        Some(p) => fs::write(p, contents)
            .map_err(|e| CliFailure::io(format!("cannot write {}: {e}", p.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(contents.as_bytes())
                .map_err(|e| CliFailure::io(format!("cannot write to standard output: {e}")))
        }
    }
}

fn cmd_point(
    args: PointArgs,
    units: Units,
    format: FormatArg,
    output: Option<&Path>,
) -> Result<(), CliFailure> {
    let params = build_params(args.k, args.h, args.sigma_x2)?;
    let sigma_q2 = match (args.sigma_q2, args.distortion) {
        (Some(s), None) => {
            check_sigma_q2(s)?;
            s
        }
        (None, Some(d)) => sigma_q2_for_distortion(&params, d).map_err(|e| match e {
            Error::InfeasibleDistortion { .. } => CliFailure::infeasible(e.to_string()),
            other => CliFailure::invalid(other.to_string()),
        })?,
        (None, None) => {
            return Err(CliFailure::invalid(
                "one of --sigma-q2 or --distortion is required",
            ))
        }
        (Some(_), Some(_)) => unreachable!("clap conflicts_with"),
    };
    let row = Row::evaluate(&params, sigma_q2, units, RowOptions::default());
    let rendered = match format {
        FormatArg::Csv => format!("{HEADER}\n{}\n", row.to_csv()),
        FormatArg::Text => row.to_text(),
    };
    write_output(output, &rendered)
}

fn parse_k_values(args: &SweepArgs) -> Result<Vec<usize>, CliFailure> {
    if let Some(list) = &args.k_list {
        let mut values = Vec::new();
        for item in list.split(',') {
            let v: usize = item
                .trim()
                .parse()
                .map_err(|_| CliFailure::invalid(format!("invalid value for --k-list: '{item}'")))?;
            values.push(v);
        }
        if values.is_empty() {
            return Err(CliFailure::invalid("invalid value for --k-list: empty"));
        }
        if !values.windows(2).all(|w| w[0] < w[1]) {
            return Err(CliFailure::invalid(
                "invalid value for --k-list: values must be strictly increasing",
            ));
        }
        if values[0] < 2 {
            return Err(CliFailure::invalid(
                "invalid value for --k-list: agent counts must be at least 2",
            ));
        }
        return Ok(values);
    }
    let (Some(k_min), Some(k_max)) = (args.k_min, args.k_max) else {
        return Err(CliFailure::invalid(
            "either --k-list or both --k-min and --k-max are required",
        ));
    };
    if k_min < 2 {
        return Err(CliFailure::invalid(
            "invalid value for --k-min: must be at least 2",
        ));
    }
    if k_max < k_min {
        return Err(CliFailure::invalid(
            "invalid value for --k-max: must be at least --k-min",
        ));
    }
    if args.k_step == 0 {
        return Err(CliFailure::invalid(
            "invalid value for --k-step: must be positive",
        ));
    }
    Ok((k_min..=k_max).step_by(args.k_step).collect())
}

fn cmd_sweep(args: SweepArgs, units: Units, output: Option<&Path>) -> Result<(), CliFailure> {
    check_sigma_q2(args.sigma_q2)?;
    let k_values = parse_k_values(&args)?;
    let opts = RowOptions {
        include_outer: !args.skip_outer,
        include_exact_leakage: !args.skip_exact_leakage,
    };
    let mut out = String::from(HEADER);
    out.push('\n');
    for k in k_values {
        let params = build_params(k, args.h, args.sigma_x2)?;
        out.push_str(&Row::evaluate(&params, args.sigma_q2, units, opts).to_csv());
        out.push('\n');
    }
    write_output(output, &out)
}

fn cmd_figure1(args: Figure1Args, units: Units, output: Option<&Path>) -> Result<(), CliFailure> {
    if args.k_max < 2 {
        return Err(CliFailure::invalid(
            "invalid value for --k-max: must be at least 2",
        ));
    }
    if args.emit_plot_script && output.is_none() {
        return Err(CliFailure::invalid(
            "--emit-plot-script requires --output for the CSV it references",
        ));
    }
    let opts = RowOptions {
        include_outer: true,
        include_exact_leakage: !args.skip_exact_leakage,
    };
    let mut out = String::from(HEADER);
    out.push('\n');
    for k in 2..=args.k_max {
        let params = build_params(k, 0.5, args.sigma_x2)?;
        out.push_str(&Row::evaluate(&params, 6.0, units, opts).to_csv());
        out.push('\n');
    }
    write_output(output, &out)?;
    if args.emit_plot_script {
        let path = output.expect("checked above").display();
        let script = format!(
            "# per-user rates and leakage vs agent count\n\
             set datafile separator ','\n\
             set key outside\n\
             set logscale x\n\
             set xlabel 'agents (k)'\n\
             set ylabel '{}'\n\
             plot '{path}' using 1:12 with lines title 'per-user rate, distributed', \\\n\
             \x20    '' using 1:14 with lines title 'per-user rate, centralized', \\\n\
             \x20    '' using 1:15 with lines title 'per-user rate limit', \\\n\
             \x20    '' using 1:16 with lines title 'leakage, closed form', \\\n\
             \x20    '' using 1:17 with lines title 'leakage, exact', \\\n\
             \x20    '' using 1:18 with lines title 'rate bound', \\\n\
             \x20    '' using 1:19 with lines title 'leakage bound'\n",
            units.label()
        );
        print!("{script}");
    }
    Ok(())
}

fn cmd_validate(args: ValidateArgs, seed: u64) -> Result<(), CliFailure> {
    let grid = match args.grid {
        GridArg::Small => validate::Grid::Small,
        GridArg::Full => validate::Grid::Full,
    };
    let tolerances =
        validate::Tolerances::parse(&args.tolerance).map_err(CliFailure::invalid)?;
    let results = validate::run_all(grid, args.mc_samples, seed, &tolerances);
    let mut worst_offender: Option<&validate::SuiteResult> = None;
    for r in &results {
        println!(
            "suite {:<26} {}  measured {:.3e} (tolerance {:.1e})  {}",
            r.name,
            if r.pass { "pass" } else { "FAIL" },
            r.worst,
            r.tolerance,
            r.note
        );
        if !r.pass {
            let ratio = r.worst / r.tolerance;
            let current = worst_offender.map(|w| w.worst / w.tolerance).unwrap_or(0.0);
            if ratio >= current {
                worst_offender = Some(r);
            }
        }
    }
    let passed = results.iter().filter(|r| r.pass).count();
    println!("validation: {passed}/{} suites passed", results.len());
    if let Some(w) = worst_offender {
        return Err(CliFailure::validation(format!(
            "suite {} exceeded its tolerance: measured {:.3e} vs {:.1e}",
            w.name, w.worst, w.tolerance
        )));
    }
    Ok(())
}
