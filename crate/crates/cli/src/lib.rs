//! `qpqlab` command-line driver.
//!
//! Every subcommand writes one table, as CSV (header row, fixed column
//! order) or as a single JSON object `{"command": ..., "rows": [...]}` whose
//! rows mirror the CSV rows one-to-one. Exit codes: 0 success, 1 when an
//! empirical metric misses its analytic value, 2 on usage errors.

use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use qpqlab_core::adversary::{self, Concealment, FakeState};
use qpqlab_core::baselines::{self, BaselineKind};
use qpqlab_core::harness::{self, ExperimentConfig, Scenario, TPolicy};
use qpqlab_core::interrogation::{self, InitialState, InterrogationSpec, ZerosResult};
use qpqlab_core::QpqError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_METRIC_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "qpqlab",
    version,
    about = "Quantum private query protocol simulator"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Number of database items.
    #[arg(long, global = true)]
    pub n: Option<usize>,
    /// Fixed rhetoric-set size (implies --t-policy fixed).
    #[arg(long, global = true)]
    pub t: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub t_policy: Option<TPolicyArg>,
    #[arg(long, global = true, default_value_t = 10_000)]
    pub trials: u64,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Output file; stdout when omitted.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Worker threads (0 = all cores). Results do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    pub workers: usize,
    /// Add exact analytic cross-checks at 1e-9.
    #[arg(long, global = true)]
    pub strict: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TPolicyArg {
    Basic,
    Fixed,
    UniformSubset,
    Optimal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StrategyArg {
    /// Measurement and probe round only.
    Confirm,
    /// Probe round followed by a concealing fake.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ConcealmentArg {
    Uniform,
    Outcome,
    Optimal,
    RandomAlpha,
    Param,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BaselineArg {
    Qpq,
    Phase,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InitialArg {
    Psi,
    Qpq,
    Uniform,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Brute,
    Analytic,
    Both,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Honest protocol runs; every answer must be correct.
    Honest,
    /// Computational-basis attack by the database.
    Attack {
        #[arg(long, value_enum, default_value_t = StrategyArg::Full)]
        strategy: StrategyArg,
        #[arg(long, value_enum, default_value_t = ConcealmentArg::Optimal)]
        concealment: ConcealmentArg,
        /// `a` for `--concealment param`.
        #[arg(long)]
        a: Option<f64>,
        /// `b` for `--concealment param`.
        #[arg(long)]
        b: Option<f64>,
    },
    /// Detection probability against the rhetoric count t.
    SweepT {
        /// Largest number of t values visited; larger N is strided.
        #[arg(long, default_value_t = 256)]
        max_rows: usize,
    },
    /// Best concealing fake on the k != j branch.
    OptimalFake {
        #[arg(long, default_value_t = 0.005)]
        grid_step: f64,
    },
    /// Expected correctly estimated database bits via interrogation.
    Interrogate {
        #[arg(long, value_enum, default_value_t = InitialArg::All)]
        initial: InitialArg,
        #[arg(long, value_enum, default_value_t = MethodArg::Both)]
        method: MethodArg,
        /// True query index of the initial state.
        #[arg(long, default_value_t = 0)]
        j: usize,
    },
    /// Attack on a baseline scheme.
    Baseline {
        #[arg(long, value_enum)]
        kind: BaselineArg,
    },
    /// Side-by-side comparison of all schemes under the same attack.
    Table1,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Core(QpqError),
    Io(String),
}

impl From<QpqError> for CliError {
    fn from(e: QpqError) -> Self {
        match e {
            QpqError::Config { .. } => CliError::Usage(e.to_string()),
            other => CliError::Core(other),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

/// Rendered table plus whether every check in it passed.
struct Output {
    passed: bool,
    body: Vec<u8>,
}

fn render<R: Serialize>(command: &str, rows: &[R], format: Format) -> Result<Vec<u8>, CliError> {
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            for r in rows {
                w.serialize(r)?;
            }
            w.into_inner().map_err(|e| CliError::Io(e.to_string()))
        }
        Format::Json => {
            #[derive(Serialize)]
            struct Doc<'a, R> {
                command: &'a str,
                rows: &'a [R],
            }
            let mut body = serde_json::to_vec_pretty(&Doc { command, rows })?;
            body.push(b'\n');
            Ok(body)
        }
    }
}

fn require_n(g: &GlobalArgs) -> Result<usize, CliError> {
    g.n.ok_or_else(|| CliError::Usage("missing required --n".into()))
}

fn t_policy(g: &GlobalArgs, default: TPolicy) -> Result<TPolicy, CliError> {
    match (g.t_policy, g.t) {
        (None, Some(t)) | (Some(TPolicyArg::Fixed), Some(t)) => Ok(TPolicy::Fixed(t)),
        (Some(TPolicyArg::Fixed), None) => {
            Err(CliError::Usage("--t-policy fixed requires --t".into()))
        }
        (Some(_), Some(_)) => Err(CliError::Usage(
            "--t only combines with --t-policy fixed".into(),
        )),
        (None, None) => Ok(default),
        (Some(TPolicyArg::Basic), None) => Ok(TPolicy::Basic),
        (Some(TPolicyArg::UniformSubset), None) => Ok(TPolicy::UniformSubset),
        (Some(TPolicyArg::Optimal), None) => Ok(TPolicy::Optimal),
    }
}

#[derive(Serialize)]
struct MetricRow<'a> {
    scenario: &'a str,
    n: usize,
    t_policy: &'a str,
    trials: u64,
    seed: u64,
    metric: &'a str,
    analytic: f64,
    empirical: f64,
    three_sigma: f64,
    pass: bool,
}

fn run_scenario(
    g: &GlobalArgs,
    scenario: Scenario,
    default_policy: TPolicy,
    command: &str,
    log: &mut dyn Write,
) -> Result<Output, CliError> {
    let config = ExperimentConfig {
        scenario,
        n: require_n(g)?,
        t_policy: t_policy(g, default_policy)?,
        trials: g.trials,
        master_seed: g.seed,
        workers: g.workers,
        strict: g.strict,
    };
    let record = harness::run_trials(&config)?;
    let _ = writeln!(
        log,
        "{} n={} trials={} seed={} in {:.3}s: {}",
        record.scenario,
        record.n,
        record.trials,
        record.seed,
        record.wall_clock.as_secs_f64(),
        if record.passed() { "PASS" } else { "FAIL" }
    );
    let rows: Vec<MetricRow> = record
        .metrics
        .iter()
        .map(|m| MetricRow {
            scenario: &record.scenario,
            n: record.n,
            t_policy: &record.t_policy,
            trials: m.trials,
            seed: record.seed,
            metric: &m.metric,
            analytic: m.analytic,
            empirical: m.empirical,
            three_sigma: m.three_sigma,
            pass: m.pass,
        })
        .collect();
    Ok(Output {
        passed: record.passed(),
        body: render(command, &rows, g.format)?,
    })
}

#[derive(Serialize)]
struct SweepCsvRow {
    n: usize,
    t: usize,
    analytic: f64,
    empirical: f64,
    branch_trials: u64,
    three_sigma: f64,
    pass: bool,
    argmax: bool,
}

fn sweep(g: &GlobalArgs, max_rows: usize, log: &mut dyn Write) -> Result<Output, CliError> {
    let n = require_n(g)?;
    let table = harness::sweep_t(n, g.trials, g.seed, g.workers, max_rows)?;
    let _ = writeln!(
        log,
        "sweep-t n={n}: t*={:.4}, argmax row t={:?}",
        table.optimal_t,
        table.argmax_t()
    );
    let rows: Vec<SweepCsvRow> = table
        .rows
        .iter()
        .map(|r| SweepCsvRow {
            n,
            t: r.t,
            analytic: r.analytic,
            empirical: r.empirical,
            branch_trials: r.branch_trials,
            three_sigma: r.three_sigma,
            pass: r.pass,
            argmax: r.argmax,
        })
        .collect();
    Ok(Output {
        passed: table.passed(),
        body: render("sweep-t", &rows, g.format)?,
    })
}

#[derive(Serialize)]
struct OptimalFakeRow {
    n: usize,
    a: f64,
    b: f64,
    exact_expected_detection: f64,
    approx_expected_detection: f64,
    reference_minimum: f64,
    grid_argmin_a: f64,
    grid_step: f64,
    overall_detection_analytic: f64,
    overall_detection_empirical: f64,
    trials: u64,
    three_sigma: f64,
    pass: bool,
}

/// Minimizes the exact T-average over `a ∈ [0, 1]` on a uniform grid.
pub fn grid_argmin_a(n: usize, step: f64) -> Result<f64, QpqError> {
    let steps = (1.0 / step).round() as usize;
    let mut best = (f64::INFINITY, 0.0);
    for i in 0..=steps {
        let a = (i as f64 * step).min(1.0);
        let b = ((1.0 - a * a) / (n - 1) as f64).max(0.0).sqrt();
        let v = adversary::expected_detection_over_t(n, a, b)?;
        if v < best.0 {
            best = (v, a);
        }
    }
    Ok(best.1)
}

fn optimal_fake(g: &GlobalArgs, grid_step: f64) -> Result<Output, CliError> {
    let n = require_n(g)?;
    if !(grid_step > 0.0 && grid_step <= 1.0) {
        return Err(CliError::Usage("--grid-step must lie in (0, 1]".into()));
    }
    let FakeState::ParamFake { a, b, .. } = adversary::optimal_fake(n, 0)? else {
        unreachable!()
    };
    let config = ExperimentConfig {
        scenario: Scenario::Attack(Concealment::Optimal),
        n,
        t_policy: t_policy(g, TPolicy::UniformSubset)?,
        trials: g.trials,
        master_seed: g.seed,
        workers: g.workers,
        strict: false,
    };
    let record = harness::run_trials(&config)?;
    let det = record
        .metrics
        .iter()
        .find(|m| m.metric == "detection")
        .expect("attack runs report detection");
    let row = OptimalFakeRow {
        n,
        a,
        b,
        exact_expected_detection: adversary::expected_detection_over_t(n, a, b)?,
        approx_expected_detection: adversary::expected_detection_over_t_approx(n, a, b),
        reference_minimum: 0.5 - 1.0 / (n as f64 + 3.0),
        grid_argmin_a: grid_argmin_a(n, grid_step)?,
        grid_step,
        overall_detection_analytic: det.analytic,
        overall_detection_empirical: det.empirical,
        trials: det.trials,
        three_sigma: det.three_sigma,
        pass: det.pass,
    };
    Ok(Output {
        passed: row.pass,
        body: render("optimal-fake", &[row], g.format)?,
    })
}

#[derive(Serialize)]
struct InterrogateRow {
    initial: &'static str,
    n: usize,
    method: &'static str,
    expected_zeros: f64,
    reference: f64,
    tolerance: f64,
    pass: bool,
}

/// Rounds away last-bit noise from the transform so exact values print as
/// such (`5.0`, not `5.000000000000001`).
fn round_decimals(x: f64, places: i32) -> f64 {
    let scale = 10f64.powi(places);
    (x * scale).round() / scale
}

fn interrogate(
    g: &GlobalArgs,
    initial: InitialArg,
    method: MethodArg,
    j: usize,
) -> Result<Output, CliError> {
    let n = require_n(g)?;
    let nf = n as f64;
    let states: Vec<InitialState> = match initial {
        InitialArg::Psi => vec![InitialState::PsiPrime0 { j }],
        InitialArg::Qpq => vec![InitialState::QpqState { j }],
        InitialArg::Uniform => vec![InitialState::UniformSuperposition],
        InitialArg::All => vec![
            InitialState::PsiPrime0 { j },
            InitialState::QpqState { j },
            InitialState::UniformSuperposition,
        ],
    };
    let cap = interrogation::brute_force_cap();
    let mut rows = Vec::new();
    for state in states {
        let spec = InterrogationSpec::new(state, n)?;
        let (reference, tolerance) = match state {
            InitialState::PsiPrime0 { .. } => (nf / 2.0, 1e-9),
            InitialState::QpqState { .. } => (nf / 2.0 + 0.5, 1e-9),
            InitialState::UniformSuperposition => (nf / 2.0 + nf.sqrt() / 2.0, 0.05),
        };
        let mut results: Vec<ZerosResult> = Vec::new();
        let want_brute = method != MethodArg::Analytic;
        let want_analytic =
            method != MethodArg::Brute && state != InitialState::UniformSuperposition;
        if want_brute && (n <= cap || method == MethodArg::Brute) {
            results.push(interrogation::interrogate_bruteforce_with_cap(&spec, cap)?);
        }
        if want_analytic {
            results.push(interrogation::expected_zeros_analytic(&spec)?);
        }
        for r in results {
            rows.push(InterrogateRow {
                initial: state.label(),
                n,
                method: match r.method {
                    interrogation::Method::BruteForce => "BruteForce",
                    interrogation::Method::Analytic => "Analytic",
                },
                expected_zeros: round_decimals(r.expected_zeros, 10),
                reference,
                tolerance,
                pass: (r.expected_zeros - reference).abs() <= tolerance,
            });
        }
    }
    if rows.is_empty() {
        return Err(CliError::Usage(format!(
            "nothing to evaluate: N = {n} exceeds the brute-force cap {cap} and no analytic path applies"
        )));
    }
    Ok(Output {
        passed: rows.iter().all(|r| r.pass),
        body: render("interrogate", &rows, g.format)?,
    })
}

#[derive(Serialize)]
struct Table1Row {
    n: usize,
    protocol: String,
    deterministic_data_bits: usize,
    cheat_sensitive: &'static str,
    identified_j_rate: f64,
    detection_rate: f64,
    leakage_bits: f64,
}

fn table1(g: &GlobalArgs) -> Result<Output, CliError> {
    let n = require_n(g)?;
    let mut rng = harness::trial_rng(g.seed, 0);
    let rows: Vec<Table1Row> = baselines::comparison_table(n, g.trials, &mut rng)?
        .into_iter()
        .map(|r| Table1Row {
            n,
            protocol: r.protocol,
            deterministic_data_bits: r.deterministic_data_bits,
            cheat_sensitive: if r.cheat_sensitive { "yes" } else { "no" },
            identified_j_rate: r.identified_j_rate,
            detection_rate: r.detection_rate,
            leakage_bits: r.leakage_bits,
        })
        .collect();
    Ok(Output {
        passed: true,
        body: render("table1", &rows, g.format)?,
    })
}

fn dispatch(cli: &Cli, log: &mut dyn Write) -> Result<Output, CliError> {
    let g = &cli.global;
    match &cli.command {
        Command::Honest => run_scenario(g, Scenario::Honest, TPolicy::UniformSubset, "honest", log),
        Command::Attack {
            strategy,
            concealment,
            a,
            b,
        } => {
            let scenario = match strategy {
                StrategyArg::Confirm => Scenario::Confirmation,
                StrategyArg::Full => Scenario::Attack(match concealment {
                    ConcealmentArg::Uniform => Concealment::Uniform,
                    ConcealmentArg::Outcome => Concealment::OutcomeState,
                    ConcealmentArg::Optimal => Concealment::Optimal,
                    ConcealmentArg::RandomAlpha => Concealment::RandomAlpha,
                    ConcealmentArg::Param => match (a, b) {
                        (Some(a), Some(b)) => Concealment::Param { a: *a, b: *b },
                        _ => {
                            return Err(CliError::Usage(
                                "--concealment param requires --a and --b".into(),
                            ))
                        }
                    },
                }),
            };
            run_scenario(g, scenario, TPolicy::UniformSubset, "attack", log)
        }
        Command::SweepT { max_rows } => sweep(g, *max_rows, log),
        Command::OptimalFake { grid_step } => optimal_fake(g, *grid_step),
        Command::Interrogate { initial, method, j } => interrogate(g, *initial, *method, *j),
        Command::Baseline { kind } => {
            let kind = match kind {
                BaselineArg::Qpq => BaselineKind::Qpq,
                BaselineArg::Phase => BaselineKind::PhaseEncoded,
            };
            run_scenario(g, Scenario::Baseline(kind), TPolicy::Basic, "baseline", log)
        }
        Command::Table1 => table1(g),
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK {
                write!(stdout, "{text}")
            } else {
                write!(stderr, "{text}")
            };
            return code;
        }
    };
    let usage = |stderr: &mut dyn Write, msg: &str| {
        let _ = writeln!(stderr, "error: {msg}\n\nUsage: qpqlab [OPTIONS] <COMMAND>\n\nFor more information, try '--help'.");
        EXIT_USAGE
    };
    let output = match dispatch(&cli, stderr) {
        Ok(o) => o,
        Err(CliError::Usage(msg)) => return usage(stderr, &msg),
        Err(CliError::Core(e)) => return usage(stderr, &e.to_string()),
        Err(CliError::Io(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            return EXIT_USAGE;
        }
    };
    let written = match &cli.global.out {
        Some(path) => File::create(path).and_then(|mut f| f.write_all(&output.body)),
        None => stdout.write_all(&output.body),
    };
    if let Err(e) = written {
        let _ = writeln!(stderr, "error: {e}");
        return EXIT_USAGE;
    }
    if output.passed {
        EXIT_OK
    } else {
        EXIT_METRIC_FAILURE
    }
}
