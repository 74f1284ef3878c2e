//! Command-line front end: evaluate the tube map and its inverse, the
//! bump and deleting maps, export plot data as CSV, dump the measured
//! path constants, and run the library's verification suites.
//!
//! Output goes to standard output as JSON by default (`--format csv`
//! flattens it to `path,value` rows); every float is printed with 17
//! significant digits so a round trip through text is exact. Exit codes:
//! 0 on success, 1 when an invariant or precondition is violated (a JSON
//! failure list is printed), 2 for usage errors.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rand::{Rng as _, SeedableRng as _};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use tubelab::gradient_cone::{BlockFunctionalU, BlockSum};
use tubelab::iso_path::{conservative_k_bound, MeasuredConstants};
use tubelab::negligibility::{BallRetraction, DeletingDiffeo};
use tubelab::rolle_bump::{approx_rolle_probe, NonRolleBump};
use tubelab::seq_space::SparseVec;
use tubelab::tube::{CylPoint, KMode, ScaleMode, TubeChart};
use tubelab::verify::{run_all, run_suite, SuiteReport, SUITES};

#[derive(Parser)]
#[command(name = "tubelab", version, about = "Smooth geometry in l2: tubes, bumps, deleting maps")]
struct Cli {
    /// JSON config file: {"epsilon", "k_mode", "scale_mode", "tolerances", "seed"}
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output format (plot commands are CSV regardless)
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Dump the measured path constants as JSON
    Constants,
    /// Evaluate the tube map at a cylinder point
    EvalPi {
        /// Cross-section coordinate as JSON [[index, coeff], ...]
        #[arg(long)]
        x: String,
        /// Fiber time, > 0
        #[arg(long)]
        t: f64,
    },
    /// Invert the tube map at an ambient point
    InvertPi {
        /// Ambient point as JSON [[index, coeff], ...]
        #[arg(long)]
        y: String,
    },
    /// Evaluate the non-Rolle bump at an ambient point
    BumpEval {
        #[arg(long)]
        point: String,
    },
    /// Gradient of the non-Rolle bump at an ambient point
    BumpGrad {
        #[arg(long)]
        point: String,
    },
    /// Sample the bump for near-critical points on a ball
    ProbeRolle {
        /// Ball radius around the origin
        #[arg(long, default_value_t = 1.0)]
        radius: f64,
        #[arg(long, default_value_t = 2000)]
        samples: usize,
        /// Overrides the config seed
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Apply the tube-deleting diffeomorphism
    DeleteMap {
        #[arg(long)]
        point: String,
    },
    /// Retract a point of the unit ball onto the unit sphere
    Retract {
        #[arg(long)]
        point: String,
    },
    /// Evaluate the contraction homotopy between the identity and R(0)
    Homotopy {
        /// Homotopy time in [0, 1]
        #[arg(long)]
        t: f64,
        #[arg(long)]
        point: String,
    },
    /// CSV sweep of the tube centerline: fiber time, leading coordinates,
    /// norm, twist component
    SampleTube {
        #[arg(long)]
        tmax: f64,
        #[arg(long)]
        count: usize,
    },
    /// CSV sweep of the block-sum square root against the norm
    PsiApprox {
        #[arg(long, default_value_t = 0.1)]
        epsilon: f64,
        #[arg(long, default_value_t = 200)]
        samples: usize,
    },
    /// Certificate that every active gradient block is nonzero
    ConeCert {
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        /// Overrides the config seed
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run a named invariant suite, or all of them
    Verify {
        /// One of the module suites, or "all"
        #[arg(value_parser = suite_names())]
        suite: String,
    },
}

fn suite_names() -> clap::builder::PossibleValuesParser {
    let mut names: Vec<&'static str> = SUITES.to_vec();
    names.push("all");
    clap::builder::PossibleValuesParser::new(names)
}

/// The raw config file. Unknown keys are rejected so a typo cannot
/// silently fall back to defaults.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    epsilon: Option<f64>,
    #[serde(alias = "K_mode")]
    k_mode: Option<KModeName>,
    scale_mode: Option<ScaleModeName>,
    tolerances: Option<TolerancesFile>,
    seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
enum KModeName {
    Paper,
    Measured,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
enum ScaleModeName {
    UnitBall,
    Raw,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
struct TolerancesFile {
    root: Option<f64>,
    fd: Option<f64>,
    equality: Option<f64>,
}

/// Resolved run configuration. The chart is built once from the file
/// settings; `root_tol` guards recovered fiber times in `invert-pi`,
/// the other two tolerances are accepted and echoed for scripting but
/// the verification suites keep their contracted constants.
struct Config {
    chart: TubeChart,
    seed: u64,
    root_tol: f64,
}

#[derive(Debug, Serialize)]
struct Failure {
    name: String,
    detail: String,
}

enum CliError {
    /// Exit 2: malformed invocation or unreadable config.
    Usage(String),
    /// Exit 1: a violated invariant or precondition, as a failure list.
    Failures(Vec<Failure>),
}

impl CliError {
    fn failure(name: &str, detail: impl ToString) -> Self {
        CliError::Failures(vec![Failure { name: name.to_string(), detail: detail.to_string() }])
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Failures(failures)) => {
            let body = serde_json::json!({ "failures": failures });
            emit(&body, cli.format);
            ExitCode::from(1)
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let file_cfg = load_config(cli.config.as_deref())?;
    let cfg = resolve_config(&file_cfg)?;
    match &cli.command {
        Command::Constants => {
            emit(MeasuredConstants::shared(), cli.format);
            Ok(())
        }
        Command::EvalPi { x, t } => {
            let x = parse_vec(x, "--x")?;
            let y = cfg
                .chart
                .pi(&CylPoint::new(x, *t))
                .map_err(|e| CliError::failure("eval-pi", e))?;
            emit(&y, cli.format);
            Ok(())
        }
        Command::InvertPi { y } => {
            let y = parse_vec(y, "--y")?;
            let pt = cfg.chart.pi_inverse(&y).map_err(|e| CliError::failure("invert-pi", e))?;
            let residual = cfg.chart.f_val(&y, pt.t).abs();
            if residual > cfg.root_tol * y.norm().max(1.0) {
                return Err(CliError::failure(
                    "invert-pi",
                    format!("fiber residual {residual:e} above the root tolerance {:e}", cfg.root_tol),
                ));
            }
            emit(&pt, cli.format);
            Ok(())
        }
        Command::BumpEval { point } => {
            let y = parse_vec(point, "--point")?;
            let (value, _) = NonRolleBump::new(cfg.chart.clone()).f_eval(&y);
            emit(&serde_json::json!({ "value": value }), cli.format);
            Ok(())
        }
        Command::BumpGrad { point } => {
            let y = parse_vec(point, "--point")?;
            let (value, gradient) = NonRolleBump::new(cfg.chart.clone()).f_eval(&y);
            emit(
                &serde_json::json!({ "value": value, "gradient": gradient }),
                cli.format,
            );
            Ok(())
        }
        Command::ProbeRolle { radius, samples, seed } => {
            let bump = NonRolleBump::new(cfg.chart.clone());
            let report =
                approx_rolle_probe(&bump, &SparseVec::zero(), *radius, *samples, seed.unwrap_or(cfg.seed))
                    .map_err(|e| CliError::failure("probe-rolle", e))?;
            emit(&report, cli.format);
            Ok(())
        }
        Command::DeleteMap { point } => {
            let y = parse_vec(point, "--point")?;
            let image = DeletingDiffeo::new(cfg.chart.clone()).apply(&y);
            emit(&image, cli.format);
            Ok(())
        }
        Command::Retract { point } => {
            let x = parse_vec(point, "--point")?;
            let image = BallRetraction::new()
                .retract(&x)
                .map_err(|e| CliError::failure("retract", e))?;
            emit(&image, cli.format);
            Ok(())
        }
        Command::Homotopy { t, point } => {
            let x = parse_vec(point, "--point")?;
            let image = BallRetraction::new()
                .homotopy(*t, &x)
                .map_err(|e| CliError::failure("homotopy", e))?;
            emit(&image, cli.format);
            Ok(())
        }
        Command::SampleTube { tmax, count } => sample_tube(&cfg, *tmax, *count),
        Command::PsiApprox { epsilon, samples } => psi_approx(&cfg, *epsilon, *samples),
        Command::ConeCert { samples, seed } => {
            cone_cert(cli.format, *samples, seed.unwrap_or(cfg.seed))
        }
        Command::Verify { suite } => verify(cli.format, suite, cfg.seed),
    }
}

fn load_config(path: Option<&std::path::Path>) -> Result<FileConfig, CliError> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("cannot parse config {}: {e}", path.display())))
}

fn resolve_config(file: &FileConfig) -> Result<Config, CliError> {
    let scale = match file.scale_mode {
        None | Some(ScaleModeName::UnitBall) => ScaleMode::UnitBall,
        Some(ScaleModeName::Raw) => ScaleMode::Raw,
    };
    let chart = match (file.k_mode, file.epsilon) {
        // no tube constants requested: the desk chart at unit-ball scale,
        // the faithful measured chart at raw scale
        (None, None) => match scale {
            ScaleMode::UnitBall => TubeChart::desk_scaled(),
            ScaleMode::Raw => TubeChart::measured(ScaleMode::Raw),
        },
        (Some(kmode), None) => TubeChart::by_mode(
            match kmode {
                KModeName::Paper => KMode::PaperBound,
                KModeName::Measured => KMode::Measured,
            },
            scale,
        ),
        (kmode, Some(epsilon)) => {
            let k = match kmode.unwrap_or(KModeName::Measured) {
                KModeName::Paper => conservative_k_bound(),
                KModeName::Measured => TubeChart::premise_k(scale),
            };
            TubeChart::with_constants(scale, k, epsilon)
                .map_err(|e| CliError::failure("config", e))?
        }
    };
    let tol = file.tolerances.unwrap_or(TolerancesFile { root: None, fd: None, equality: None });
    for (name, value) in [("root", tol.root), ("fd", tol.fd), ("equality", tol.equality)] {
        if let Some(v) = value {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CliError::Usage(format!("tolerance {name} must be positive, got {v}")));
            }
        }
    }
    let seed = match std::env::var("TUBELAB_SEED") {
        Ok(text) => text
            .parse::<u64>()
            .map_err(|_| CliError::Usage(format!("TUBELAB_SEED must be a u64, got {text:?}")))?,
        Err(_) => file.seed.unwrap_or(0),
    };
    Ok(Config { chart, seed, root_tol: tol.root.unwrap_or(1e-12) })
}

fn parse_vec(text: &str, flag: &str) -> Result<SparseVec, CliError> {
    serde_json::from_str(text)
        .map_err(|e| CliError::Usage(format!("{flag} expects JSON [[index, coeff], ...]: {e}")))
}

fn sample_tube(cfg: &Config, tmax: f64, count: usize) -> Result<(), CliError> {
    if !(tmax > 0.0 && tmax.is_finite()) || count < 2 {
        return Err(CliError::Usage(format!(
            "sample-tube needs tmax > 0 and count >= 2, got {tmax} and {count}"
        )));
    }
    let z = cfg.chart.z().clone();
    let mut out = String::new();
    out.push_str("t,p0,p1,p2,p3,p4,p5,p6,p7,norm,twist\n");
    for k in 0..count {
        let t = tmax * k as f64 / (count - 1) as f64;
        let p = cfg.chart.center(t);
        let _ = write!(out, "{}", sci(t));
        for j in 0..8 {
            let _ = write!(out, ",{}", sci(p.get(j)));
        }
        let _ = writeln!(out, ",{},{}", sci(p.norm()), sci(p.dot(&z)));
    }
    print_stdout(&out);
    Ok(())
}

fn psi_approx(cfg: &Config, epsilon: f64, samples: usize) -> Result<(), CliError> {
    if samples < 2 {
        return Err(CliError::Usage(format!("psi-approx needs samples >= 2, got {samples}")));
    }
    let u = BlockFunctionalU::new(epsilon).map_err(|e| CliError::failure("psi-approx", e))?;
    let sum = BlockSum::new(u);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = String::new();
    out.push_str("norm,psi\n");
    for k in 0..samples {
        let r = 10.0 * k as f64 / (samples - 1) as f64;
        let mut dir = SparseVec::zero();
        while dir.norm() == 0.0 {
            let i = rng.gen_range(0..24);
            let j = rng.gen_range(0..24);
            let a = rng.gen_range(-1.0..1.0);
            let b = rng.gen_range(-1.0..1.0);
            dir = SparseVec::from_pairs([(i, a), (j, b)]);
        }
        let x = dir.scale(r / dir.norm());
        let (psi, _) = sum.sqrt_eval(&x);
        let _ = writeln!(out, "{},{}", sci(x.norm()), sci(psi));
    }
    print_stdout(&out);
    Ok(())
}

fn cone_cert(format: Format, samples: usize, seed: u64) -> Result<(), CliError> {
    if samples < 1 {
        return Err(CliError::Usage(format!("cone-cert needs samples >= 1, got {samples}")));
    }
    let sum = BlockSum::standard();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // the origin, a point parked on the building block's identity shell,
    // and seeded random points at mixed scales
    let mut points = vec![SparseVec::zero()];
    let cut = sum.epsilon() * sum.building_block().deleter().nontrivial_radius();
    points.push(SparseVec::basis(1).scale(cut / 2.0));
    while points.len() < samples.max(2) {
        let i = rng.gen_range(0..32);
        let j = rng.gen_range(0..32);
        let a = rng.gen_range(-1.0..1.0);
        let b = rng.gen_range(-1.0..1.0);
        let scale = rng.gen_range(0.01..2.0);
        let v = SparseVec::from_pairs([(i, a), (j, b)]).scale(scale);
        points.push(v);
    }
    let report = sum.cone_certificate(&points).map_err(|e| CliError::failure("cone-cert", e))?;
    emit(&report, format);
    Ok(())
}

fn verify(format: Format, suite: &str, seed: u64) -> Result<(), CliError> {
    let reports: Vec<SuiteReport> = if suite == "all" {
        run_all(seed)
    } else {
        vec![run_suite(suite, seed).map_err(|e| CliError::Usage(e.to_string()))?]
    };
    let failures: Vec<Failure> = reports
        .iter()
        .flat_map(|r| {
            r.checks.iter().filter(|c| !c.passed).map(|c| Failure {
                name: format!("{}/{}", r.suite, c.name),
                detail: c.detail.clone(),
            })
        })
        .collect();
    if failures.is_empty() {
        emit(&serde_json::json!({ "reports": reports, "failures": [] }), format);
        Ok(())
    } else {
        // keep the full reports next to the failure list so the exit-1
        // payload is self-contained
        emit(&serde_json::json!({ "reports": reports, "failures": failures }), format);
        let _ = std::io::stdout().flush();
        std::process::exit(1);
    }
}

/// One float, 17 significant digits, exponent notation. Valid as a JSON
/// number and exact under round trip. Negative zero prints as zero.
fn sci(v: f64) -> String {
    if v.is_finite() {
        let v = if v == 0.0 { 0.0 } else { v };
        format!("{v:.16e}")
    } else {
        "null".to_string()
    }
}

/// JSON serializer whose only deviation from the stock pretty printer is
/// floats: always 17 significant digits.
struct SciFormatter<'a> {
    inner: serde_json::ser::PrettyFormatter<'a>,
}

impl serde_json::ser::Formatter for SciFormatter<'_> {
    fn write_f64<W: ?Sized + std::io::Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        writer.write_all(sci(value).as_bytes())
    }

    fn begin_array<W: ?Sized + std::io::Write>(&mut self, writer: &mut W) -> std::io::Result<()> {
        self.inner.begin_array(writer)
    }

    fn end_array<W: ?Sized + std::io::Write>(&mut self, writer: &mut W) -> std::io::Result<()> {
        self.inner.end_array(writer)
    }

    fn begin_array_value<W: ?Sized + std::io::Write>(
        &mut self,
        writer: &mut W,
        first: bool,
    ) -> std::io::Result<()> {
        self.inner.begin_array_value(writer, first)
    }

    fn end_array_value<W: ?Sized + std::io::Write>(&mut self, writer: &mut W) -> std::io::Result<()> {
        self.inner.end_array_value(writer)
    }

    fn begin_object<W: ?Sized + std::io::Write>(&mut self, writer: &mut W) -> std::io::Result<()> {
        self.inner.begin_object(writer)
    }

    fn end_object<W: ?Sized + std::io::Write>(&mut self, writer: &mut W) -> std::io::Result<()> {
        self.inner.end_object(writer)
    }

    fn begin_object_key<W: ?Sized + std::io::Write>(
        &mut self,
        writer: &mut W,
        first: bool,
    ) -> std::io::Result<()> {
        self.inner.begin_object_key(writer, first)
    }

    fn begin_object_value<W: ?Sized + std::io::Write>(&mut self, writer: &mut W) -> std::io::Result<()> {
        self.inner.begin_object_value(writer)
    }

    fn end_object_value<W: ?Sized + std::io::Write>(&mut self, writer: &mut W) -> std::io::Result<()> {
        self.inner.end_object_value(writer)
    }
}

/// Writes to stdout, treating a closed pipe as a normal early exit so
/// `tubelab ... | head` ends quietly instead of panicking.
fn print_stdout(text: &str) {
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    if let Err(err) = lock.write_all(text.as_bytes()) {
        if err.kind() == std::io::ErrorKind::BrokenPipe {
            std::process::exit(0);
        }
        panic!("write to stdout failed: {err}");
    }
}

/// Prints a serializable value: pretty JSON with 17-digit floats, or
/// flattened `path,value` CSV rows.
fn emit<T: Serialize>(value: &T, format: Format) {
    match format {
        Format::Json => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            let fmt = SciFormatter { inner: serde_json::ser::PrettyFormatter::new() };
            let mut ser = serde_json::Serializer::with_formatter(&mut lock, fmt);
            if let Err(err) = value.serialize(&mut ser) {
                if err.io_error_kind() == Some(std::io::ErrorKind::BrokenPipe) {
                    std::process::exit(0);
                }
                panic!("output values serialize to JSON: {err}");
            }
            let _ = lock.write_all(b"\n");
        }
        Format::Csv => {
            let tree = serde_json::to_value(value).expect("output values serialize to JSON");
            let mut out = String::from("path,value\n");
            flatten("", &tree, &mut out);
            print_stdout(&out);
        }
    }
}

/// Depth-first flattening of a JSON tree into `path,value` rows, arrays
/// indexed numerically. Floats keep the 17-digit format; strings are
/// quoted when they contain a delimiter.
fn flatten(prefix: &str, value: &serde_json::Value, out: &mut String) {
    match value {
        serde_json::Value::Object(map) => {
            for (key, child) in map {
                let path = if prefix.is_empty() { key.clone() } else { format!("{prefix}.{key}") };
                flatten(&path, child, out);
            }
        }
        serde_json::Value::Array(items) => {
            for (idx, child) in items.iter().enumerate() {
                flatten(&format!("{prefix}[{idx}]"), child, out);
            }
        }
        leaf => {
            let cell = match leaf {
                serde_json::Value::Number(n) => match n.as_f64() {
                    Some(v) if n.is_f64() => sci(v),
                    _ => n.to_string(),
                },
                serde_json::Value::String(s) => csv_escape(s),
                other => other.to_string(),
            };
            let _ = writeln!(out, "{},{}", csv_escape(prefix), cell);
        }
    }
}

fn csv_escape(cell: &str) -> String {
    if cell.contains(',') || cell.contains('"') || cell.contains('\n') {
        format!("\"{}\"", cell.replace('"', "\"\""))
    } else {
        cell.to_string()
    }
}
