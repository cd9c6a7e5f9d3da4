//! `refcurve`: one-sample log-rank testing against an estimated reference
//! curve, trial sizing, type I error inflation and Monte Carlo studies.
//!
//! Exit codes: 0 success, 2 input error, 3 numeric or degenerate-data error.

mod input;
mod output;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use refcurve::design::{self, TrialDesign};
use refcurve::inflation::{self, InflationInput, SweepAxis};
use refcurve::logrank::{self, TestKind};
use refcurve::simulation::{self, OslrReference, SimulationConfig, TableId};
use refcurve::survival::{nelson_aalen, split_by_group, Group};

use input::{Mapping, TimeUnit};
use output::{emit, Format};

/// An error tagged with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn input(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    pub fn numeric(message: impl Into<String>) -> Self {
        Self {
            code: 3,
            message: message.into(),
        }
    }
}

impl From<refcurve::Error> for Failure {
    fn from(e: refcurve::Error) -> Self {
        if e.is_input_error() {
            Failure::input(e.to_string())
        } else {
            Failure::numeric(e.to_string())
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

#[derive(Parser)]
#[command(name = "refcurve", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Test an experimental cohort against a control cohort.
    Test(TestArgs),
    /// Size a trial for the new test or the Schoenfeld comparator.
    Design(DesignArgs),
    /// Type I error of the classical test with a historical reference.
    Inflate(InflateArgs),
    /// Monte Carlo rejection rates, or reproduction of a published table.
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct OutputArgs {
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Write to this file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MappingArgs {
    #[arg(long, value_enum, default_value = "years")]
    time_unit: TimeUnit,
    #[arg(long, default_value = "time")]
    time_column: String,
    #[arg(long, default_value = "status")]
    status_column: String,
    #[arg(long, default_value = "group")]
    group_column: String,
    /// Status values meaning an observed event.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    event_codes: Vec<i64>,
    /// Status values meaning censoring.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    censor_codes: Vec<i64>,
}

impl MappingArgs {
    fn mapping(&self) -> Result<Mapping, Failure> {
        if let Some(c) = self.event_codes.iter().find(|c| self.censor_codes.contains(c)) {
            return Err(Failure::input(format!(
                "status code {c} is both an event and a censoring code"
            )));
        }
        Ok(Mapping {
            time_column: self.time_column.clone(),
            status_column: self.status_column.clone(),
            group_column: self.group_column.clone(),
            event_codes: self.event_codes.clone(),
            censor_codes: self.censor_codes.clone(),
            unit: self.time_unit,
        })
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    New,
    Oslr,
    TwoSample,
    All,
}

#[derive(Args)]
struct TestArgs {
    /// Control (reference) arm.
    #[arg(long, requires = "experimental", conflicts_with = "data")]
    control: Option<PathBuf>,
    /// Experimental arm.
    #[arg(long, requires = "control")]
    experimental: Option<PathBuf>,
    /// One file holding both arms, told apart by the group column.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, value_enum, default_value = "new")]
    mode: Mode,
    #[command(flatten)]
    mapping: MappingArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct DesignParams {
    #[arg(long)]
    kappa: f64,
    #[arg(long)]
    s1: f64,
    #[arg(long)]
    omega0: f64,
    /// Accrual rate in patients per year.
    #[arg(long)]
    rate: f64,
    /// Follow-up after the end of accrual, in years.
    #[arg(long = "followup", visible_alias = "f")]
    followup: f64,
    #[arg(long, default_value_t = 1.0)]
    pi: f64,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
}

impl DesignParams {
    fn design(&self, accrual: f64) -> TrialDesign {
        TrialDesign {
            accrual_a: accrual,
            followup_f: self.followup,
            rate_r: self.rate,
            pi: self.pi,
            alpha: self.alpha,
            omega0: self.omega0,
            kappa: self.kappa,
            s1: self.s1,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    New,
    Schoenfeld,
}

#[derive(Args)]
struct DesignArgs {
    #[command(flatten)]
    params: DesignParams,
    #[arg(long, default_value_t = 0.8)]
    power: f64,
    #[arg(long, value_enum, default_value = "new")]
    method: Method,
    /// Instead of sizing, tabulate power of the new test at these accrual
    /// durations (comma separated years).
    #[arg(long, value_delimiter = ',')]
    power_curve: Option<Vec<f64>>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Axis {
    Pi,
    Followup,
}

#[derive(Args)]
struct InflateArgs {
    /// Historical control cohort.
    #[arg(long)]
    historical: PathBuf,
    #[arg(long)]
    accrual: f64,
    #[arg(long = "followup", visible_alias = "f")]
    followup: f64,
    #[arg(long, default_value_t = 1.0)]
    pi: f64,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Sweep one parameter over `--grid`.
    #[arg(long, value_enum, requires = "grid")]
    sweep: Option<Axis>,
    /// Comma-separated values, or `start:stop:step`.
    #[arg(long)]
    grid: Option<String>,
    #[command(flatten)]
    mapping: MappingArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TestName {
    New,
    Oslr,
    TwoSample,
}

impl From<TestName> for TestKind {
    fn from(t: TestName) -> Self {
        match t {
            TestName::New => TestKind::New,
            TestName::Oslr => TestKind::Oslr,
            TestName::TwoSample => TestKind::TwoSample,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Reference {
    Estimated,
    True,
}

#[derive(Args)]
struct SimulateArgs {
    /// Reproduce cells of a published table instead of a single design.
    #[arg(long, value_enum)]
    table: Option<TableArg>,
    /// Cell indices for `--table` (comma separated).
    #[arg(long, value_delimiter = ',', requires = "table")]
    cells: Option<Vec<usize>>,
    #[arg(long, required_unless_present = "table")]
    kappa: Option<f64>,
    #[arg(long, default_value_t = 0.5)]
    s1: f64,
    #[arg(long, default_value_t = 100.0)]
    rate: f64,
    #[arg(long, required_unless_present_any = ["table", "n_total"])]
    accrual: Option<f64>,
    #[arg(long)]
    n_total: Option<u64>,
    #[arg(long = "followup", visible_alias = "f", default_value_t = 3.0)]
    followup: f64,
    #[arg(long, default_value_t = 1.0)]
    pi: f64,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// True hazard ratio of the experimental arm.
    #[arg(long, default_value_t = 1.0)]
    omega: f64,
    #[arg(long, default_value_t = 10_000)]
    replications: u64,
    #[arg(long)]
    seed: u64,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "new,oslr,two-sample")]
    tests: Vec<TestName>,
    #[arg(long, value_enum, default_value = "estimated")]
    oslr_reference: Reference,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TableArg {
    T1,
    T2,
    T3,
    T4,
}

fn parse_grid(spec: &str) -> Result<Vec<f64>, Failure> {
    let number = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| Failure::input(format!("grid value `{s}` is not a number")))
    };
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() == 3 {
        let (start, stop, step) = (number(parts[0])?, number(parts[1])?, number(parts[2])?);
        if step.is_nan() || step <= 0.0 || stop < start {
            return Err(Failure::input("grid range needs start <= stop and a positive step"));
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize;
        return Ok((0..=count).map(|k| start + k as f64 * step).collect());
    }
    spec.split(',').map(number).collect()
}

fn run_test(args: &TestArgs) -> Result<(), Failure> {
    let mapping = args.mapping.mapping()?;
    let (control, experimental) = match (&args.data, &args.control, &args.experimental) {
        (Some(data), _, _) => split_by_group(&input::read_records(data, &mapping, None)?)?,
        (None, Some(c), Some(e)) => (
            input::read_cohort(c, &mapping, Group::A)?,
            input::read_cohort(e, &mapping, Group::B)?,
        ),
        _ => return Err(Failure::input("give --control and --experimental, or --data")),
    };
    let kinds: Vec<TestKind> = match args.mode {
        Mode::New => vec![TestKind::New],
        Mode::Oslr => vec![TestKind::Oslr],
        Mode::TwoSample => vec![TestKind::TwoSample],
        Mode::All => vec![TestKind::New, TestKind::Oslr, TestKind::TwoSample],
    };
    let mut results = Vec::new();
    for kind in kinds {
        let r = match kind {
            TestKind::New => logrank::new_test(&control, &experimental, args.alpha)?,
            TestKind::Oslr => logrank::classical_oslr(&nelson_aalen(&control)?, &experimental, args.alpha)?,
            TestKind::TwoSample => logrank::two_sample_logrank(&control, &experimental, args.alpha)?,
        };
        results.push(r);
    }
    if results.len() == 1 {
        emit(&results[0], &results, &args.output.format, args.output.out.as_deref())
    } else {
        emit(&results, &results, &args.output.format, args.output.out.as_deref())
    }
}

fn run_design(args: &DesignArgs) -> Result<(), Failure> {
    let out = args.output.out.as_deref();
    if let Some(grid) = &args.power_curve {
        let rows: Vec<output::CurveRow> = design::power_curve(&args.params.design(1.0), grid)?
            .into_iter()
            .map(|(accrual_a, power)| output::CurveRow {
                accrual_a,
                n: args.params.rate * accrual_a,
                power,
            })
            .collect();
        return emit(&rows, &rows, &args.output.format, out);
    }
    let base = args.params.design(1.0);
    let result = match args.method {
        Method::New => design::required_accrual(&base, args.power)?,
        Method::Schoenfeld => design::schoenfeld_sample_size(&base, args.power)?,
    };
    emit(&result, std::slice::from_ref(&result), &args.output.format, out)
}

fn run_inflate(args: &InflateArgs) -> Result<(), Failure> {
    let mapping = args.mapping.mapping()?;
    let historical = input::read_cohort(&args.historical, &mapping, Group::A)?;
    let inp = InflationInput {
        historical,
        accrual_a: args.accrual,
        followup_f: args.followup,
        pi: args.pi,
        alpha: args.alpha,
    };
    let out = args.output.out.as_deref();
    match (args.sweep, &args.grid) {
        (Some(axis), Some(grid)) => {
            let axis = match axis {
                Axis::Pi => SweepAxis::Pi,
                Axis::Followup => SweepAxis::Followup,
            };
            let rows = inflation::sweep(&inp, axis, &parse_grid(grid)?)?;
            emit(&rows, &rows, &args.output.format, out)
        }
        _ => {
            let summary = output::InflationSummary {
                accrual_a: inp.accrual_a,
                followup_f: inp.followup_f,
                pi: inp.pi,
                alpha: inp.alpha,
                expected_var_oslr: inflation::expected_var_oslr(&inp)?,
                expected_var_new: inflation::expected_var_new(&inp)?,
                inflated_level: inflation::inflated_level(&inp)?,
            };
            emit(&summary, std::slice::from_ref(&summary), &args.output.format, out)
        }
    }
}

fn run_simulate(args: &SimulateArgs) -> Result<(), Failure> {
    let out = args.output.out.as_deref();
    if let Some(table) = args.table {
        let table = match table {
            TableArg::T1 => TableId::T1,
            TableArg::T2 => TableId::T2,
            TableArg::T3 => TableId::T3,
            TableArg::T4 => TableId::T4,
        };
        let cells: Vec<usize> = match &args.cells {
            Some(c) => c.clone(),
            None => (0..table.len()).collect(),
        };
        let rows = simulation::table_repro(table, &cells, args.replications, args.seed)?;
        return emit(&rows, &rows, &args.output.format, out);
    }
    let config = SimulationConfig {
        design: TrialDesign {
            accrual_a: args.accrual.unwrap_or(f64::NAN),
            followup_f: args.followup,
            rate_r: args.rate,
            pi: args.pi,
            alpha: args.alpha,
            omega0: 1.0,
            kappa: args.kappa.expect("required by clap"),
            s1: args.s1,
        },
        omega_true: args.omega,
        n_total: args.n_total,
        replications: args.replications,
        seed: args.seed,
        tests: args.tests.iter().map(|&t| t.into()).collect(),
        oslr_reference: match args.oslr_reference {
            Reference::Estimated => OslrReference::Estimated,
            Reference::True => OslrReference::True,
        },
    };
    let report = simulation::rejection_study(&config)?;
    emit(&report, &report.tallies, &args.output.format, out)
}

fn configure_threads() -> Result<(), Failure> {
    if let Ok(value) = std::env::var("REFCURVE_THREADS") {
        let threads: usize = value
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Failure::input(format!("REFCURVE_THREADS must be a positive integer, got `{value}`")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Failure::input(e.to_string()))?;
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<(), Failure> {
    configure_threads()?;
    match &cli.command {
        Command::Test(a) => run_test(a),
        Command::Design(a) => run_design(a),
        Command::Inflate(a) => run_inflate(a),
        Command::Simulate(a) => run_simulate(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
