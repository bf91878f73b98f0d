//! Command-line front end: `generate`, `fit`, `classify` and `verify`.
//!
//! Every JSON document is written with sorted keys and exact rational
//! strings, so identical inputs give byte-identical output.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::characterize::{
    aux_sequences, classify, pearson_check, pearson_data, verify_difference_system,
    MIN_CLASSIFY_HORIZON,
};
use crate::families::{generate_ops, Base, FamilyError, FamilySpec, TtrrDocument, TtrrSpec};
use crate::scalar::{format_rational, parse_rational, QContext, Rational, ScalarError};
use crate::structure::{fit_structure, five_term, verify_structure, StructureError, StructureFit};

pub const DEFAULT_N: usize = 10;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_NOT_CHARACTERIZED: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Scalar(#[from] ScalarError),
    #[error(transparent)]
    Family(#[from] FamilyError),
    #[error(transparent)]
    Structure(#[from] StructureError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: invalid recurrence document: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("{0}")]
    Usage(String),
}

#[derive(Debug, Parser)]
#[command(name = "qstruct", version, about = "Exact structure relations for q-orthogonal polynomials")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Upper bound applied to every requested horizon.
    #[arg(long = "n-max-cap", env = "QSTRUCT_NMAX", global = true, hide = true)]
    pub n_max_cap: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a family recurrence and its monic polynomials.
    Generate(Box<GenerateArgs>),
    /// Fit the structure relation to a recurrence.
    Fit(FitArgs),
    /// Identify the family that produced a recurrence.
    Classify(ClassifyArgs),
    /// Run the exact verification checks on a recurrence.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub family: String,
    #[arg(long = "q-quarter", default_value = "1/2", value_parser = parse_rational_arg)]
    pub q_quarter: Rational,
    #[arg(long, value_parser = parse_rational_arg)]
    pub c: Option<Rational>,
    #[arg(long, value_parser = parse_rational_arg)]
    pub d: Option<Rational>,
    #[arg(long = "p-a", value_parser = parse_rational_arg, allow_hyphen_values = true)]
    pub p_a: Option<Rational>,
    #[arg(long = "p-b", value_parser = parse_rational_arg, allow_hyphen_values = true)]
    pub p_b: Option<Rational>,
    #[arg(long, value_enum, default_value_t = BaseArg::Q)]
    pub base: BaseArg,
    #[arg(short = 'N', default_value_t = DEFAULT_N)]
    pub n: usize,
    /// Write the recurrence here and the polynomial table next to it as
    /// `<stem>.ops.json`; without it both go to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BaseArg {
    Q,
    QInverse,
}

impl From<BaseArg> for Base {
    fn from(b: BaseArg) -> Base {
        match b {
            BaseArg::Q => Base::Q,
            BaseArg::QInverse => Base::QInverse,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DegPi {
    Auto,
    Fixed(usize),
}

fn parse_deg_pi(s: &str) -> Result<DegPi, String> {
    match s {
        "auto" => Ok(DegPi::Auto),
        "0" | "1" | "2" => Ok(DegPi::Fixed(s.parse().expect("digit"))),
        other => Err(format!("expected 0, 1, 2 or auto, got `{other}`")),
    }
}

fn parse_rational_arg(s: &str) -> Result<Rational, String> {
    parse_rational(s).map_err(|e| e.to_string())
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Recurrence document `{ "q_quarter", "B", "C" }`.
    pub input: PathBuf,
    /// Overrides the document's `q_quarter`.
    #[arg(long = "q-quarter", value_parser = parse_rational_arg)]
    pub q_quarter: Option<Rational>,
    #[arg(short = 'N', default_value_t = DEFAULT_N)]
    pub n: usize,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long = "deg-pi", default_value = "auto", value_parser = parse_deg_pi)]
    pub deg_pi: DegPi,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[command(flatten)]
    pub input: InputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, ValueEnum)]
pub enum CheckKind {
    All,
    Structure,
    System,
    Pearson,
    FiveTerm,
}

impl CheckKind {
    fn name(self) -> &'static str {
        match self {
            CheckKind::All => "all",
            CheckKind::Structure => "structure",
            CheckKind::System => "system",
            CheckKind::Pearson => "pearson",
            CheckKind::FiveTerm => "five-term",
        }
    }
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "all")]
    pub checks: Vec<CheckKind>,
    #[arg(long = "deg-pi", default_value = "auto", value_parser = parse_deg_pi)]
    pub deg_pi: DegPi,
    /// Include wall-clock timings, which makes the report nondeterministic.
    #[arg(long)]
    pub timing: bool,
}

/// Text for stdout and the process exit code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Output {
    pub stdout: String,
    pub code: i32,
}

impl Output {
    fn json(value: &Value, code: i32) -> Output {
        Output {
            stdout: render(value),
            code,
        }
    }
}

/// Pretty JSON with a trailing newline. `serde_json::Map` keeps keys sorted.
pub fn render(value: &Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("values serialize");
    s.push('\n');
    s
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("values serialize")
}

/// Parses arguments, runs the command and prints its output. Returns the
/// exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(out) => {
            print!("{}", out.stdout);
            out.code
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_INVALID
        }
    }
}

pub fn execute(cli: &Cli) -> Result<Output, CliError> {
    let cap = cli.n_max_cap.unwrap_or(usize::MAX);
    match &cli.command {
        Command::Generate(args) => cmd_generate(args, cap),
        Command::Fit(args) => cmd_fit(args, cap),
        Command::Classify(args) => cmd_classify(args, cap),
        Command::Verify(args) => cmd_verify(args, cap),
    }
}

fn cmd_generate(args: &GenerateArgs, cap: usize) -> Result<Output, CliError> {
    let ctx = QContext::new(args.q_quarter.clone())?;
    let spec = FamilySpec::from_parts(
        &args.family,
        args.c.clone(),
        args.d.clone(),
        args.p_a.clone(),
        args.p_b.clone(),
        args.base.into(),
    )?;
    let n = args.n.min(cap);
    let ttrr = spec.ttrr(&ctx, n)?;
    let ops = generate_ops(&ttrr, n)?;
    let ttrr_json = to_value(&ttrr.to_document(ctx.t()));
    let ops_json = json!({
        "q_quarter": format_rational(ctx.t()),
        "polys": to_value(&ops),
        "text": ops.polys.iter().map(|p| p.to_string()).collect::<Vec<_>>(),
    });
    match &args.out {
        Some(path) => {
            write_file(path, &render(&ttrr_json))?;
            let ops_path = ops_sibling(path);
            write_file(&ops_path, &render(&ops_json))?;
            Ok(Output {
                stdout: String::new(),
                code: EXIT_OK,
            })
        }
        None => Ok(Output::json(
            &json!({ "family": to_value(&spec), "ttrr": ttrr_json, "ops": ops_json }),
            EXIT_OK,
        )),
    }
}

/// `dir/name.json` -> `dir/name.ops.json`
pub fn ops_sibling(path: &Path) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "ttrr".into());
    path.with_file_name(format!("{stem}.ops.json"))
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

struct Loaded {
    ctx: QContext,
    ttrr: TtrrSpec,
    n: usize,
}

fn load(args: &InputArgs, cap: usize) -> Result<Loaded, CliError> {
    let text = fs::read_to_string(&args.input).map_err(|source| CliError::Io {
        path: args.input.clone(),
        source,
    })?;
    let doc: TtrrDocument = serde_json::from_str(&text).map_err(|source| CliError::Json {
        path: args.input.clone(),
        source,
    })?;
    let t = args.q_quarter.clone().unwrap_or_else(|| doc.q_quarter.clone());
    let ctx = QContext::new(t)?;
    let ttrr = doc.ttrr()?;
    let n = args.n.min(cap).min(ttrr.n_max());
    if n == 0 {
        return Err(CliError::Usage("horizon must be at least 1".into()));
    }
    Ok(Loaded { ctx, ttrr, n })
}

fn input_echo(args: &InputArgs, loaded: &Loaded) -> Value {
    json!({
        "path": args.input.to_string_lossy(),
        "q_quarter": format_rational(loaded.ctx.t()),
        "N": loaded.n,
    })
}

fn fit_json(fit: &StructureFit) -> Value {
    let mut v = to_value(fit);
    v["pi_text"] = match &fit.pi {
        Some(p) => Value::String(p.to_string()),
        None => Value::Null,
    };
    v
}

/// Fits with the requested degree, or with 0, 1, 2 in turn for `auto`,
/// stopping at the first exact fit.
fn fit_with(loaded: &Loaded, deg: DegPi) -> Result<StructureFit, CliError> {
    let ops = generate_ops(&loaded.ttrr, loaded.n)?;
    let degrees = match deg {
        DegPi::Auto => vec![0, 1, 2],
        DegPi::Fixed(d) => vec![d],
    };
    let mut last = None;
    for d in degrees {
        let fit = fit_structure(&loaded.ctx, &ops, d, loaded.n)?;
        if fit.is_exact() {
            return Ok(fit);
        }
        last = Some(fit);
    }
    Ok(last.expect("at least one degree"))
}

fn cmd_fit(args: &FitArgs, cap: usize) -> Result<Output, CliError> {
    let loaded = load(&args.input, cap)?;
    let fit = fit_with(&loaded, args.deg_pi)?;
    let code = if fit.is_exact() { EXIT_OK } else { EXIT_FAILURE };
    Ok(Output::json(&fit_json(&fit), code))
}

fn cmd_classify(args: &ClassifyArgs, cap: usize) -> Result<Output, CliError> {
    let loaded = load(&args.input, cap)?;
    if loaded.n < MIN_CLASSIFY_HORIZON {
        return Err(CliError::Usage(format!(
            "classification needs N >= {MIN_CLASSIFY_HORIZON}, got {}",
            loaded.n
        )));
    }
    let cl = classify(&loaded.ctx, &loaded.ttrr, loaded.n).map_err(|e| CliError::Usage(e.to_string()))?;
    let mut v = to_value(&cl);
    if let Some(fit) = &cl.fit {
        v["fit"] = fit_json(fit);
    }
    let code = if cl.is_characterized() {
        EXIT_OK
    } else {
        EXIT_NOT_CHARACTERIZED
    };
    Ok(Output::json(&v, code))
}

/// One entry of a verification report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    pub witness: String,
}

fn check(name: &str, res: Result<String, String>) -> CheckResult {
    let (pass, witness) = match res {
        Ok(w) => (true, w),
        Err(w) => (false, w),
    };
    CheckResult {
        name: name.to_string(),
        pass,
        witness,
    }
}

fn run_check(kind: CheckKind, loaded: &Loaded, fit: &StructureFit) -> Result<String, String> {
    let (ctx, ttrr, n) = (&loaded.ctx, &loaded.ttrr, loaded.n);
    let ops = generate_ops(ttrr, n).map_err(|e| e.to_string())?;
    let exact = || {
        if fit.is_exact() {
            Ok(())
        } else {
            Err(format!(
                "no exact structure fit (deg pi = {}, {})",
                fit.deg_pi, fit.status
            ))
        }
    };
    match kind {
        CheckKind::Structure => {
            exact()?;
            verify_structure(ctx, &ops, fit).map_err(|e| e.to_string())?;
            Ok(format!(
                "pi = {}, n <= {n}",
                fit.pi.as_ref().expect("exact fit carries pi")
            ))
        }
        CheckKind::System => {
            exact()?;
            let aux = aux_sequences(ctx, ttrr, fit).map_err(|e| e.to_string())?;
            let rep = verify_difference_system(ctx, ttrr, fit, &aux).map_err(|e| e.to_string())?;
            let first = rep.failures().next().map(|e| {
                format!(
                    "{} at n = {}: residual {}",
                    e.name,
                    e.n,
                    format_rational(&e.residual)
                )
            });
            match first {
                Some(w) => Err(w),
                None => Ok(format!("{} identities vanish", rep.residuals.len())),
            }
        }
        CheckKind::Pearson => {
            exact()?;
            let pd = pearson_data(ctx, ttrr, fit).map_err(|e| e.to_string())?;
            pearson_check(ctx, ttrr, &pd, n).map_err(|e| e.to_string())?;
            Ok(format!("phi = {}, psi = {}, n <= {n}", pd.phi, pd.psi))
        }
        CheckKind::FiveTerm => {
            exact()?;
            if n < 2 {
                return Err("five-term check needs N >= 2".into());
            }
            five_term(ctx, ttrr, &ops, fit, n - 2).map_err(|e| e.to_string())?;
            Ok(format!("n <= {}", n - 2))
        }
        CheckKind::All => unreachable!("expanded by the caller"),
    }
}

fn cmd_verify(args: &VerifyArgs, cap: usize) -> Result<Output, CliError> {
    let loaded = load(&args.input, cap)?;
    let mut kinds: Vec<CheckKind> = if args.checks.contains(&CheckKind::All) {
        vec![
            CheckKind::Structure,
            CheckKind::System,
            CheckKind::Pearson,
            CheckKind::FiveTerm,
        ]
    } else {
        args.checks.clone()
    };
    kinds.sort();
    kinds.dedup();
    let fit = fit_with(&loaded, args.deg_pi)?;
    let mut checks = Vec::new();
    let mut timings = serde_json::Map::new();
    for kind in kinds {
        let start = Instant::now();
        checks.push(check(kind.name(), run_check(kind, &loaded, &fit)));
        timings.insert(
            kind.name().to_string(),
            json!(start.elapsed().as_secs_f64()),
        );
    }
    checks.sort_by(|a, b| a.name.cmp(&b.name));
    let pass = checks.iter().all(|c| c.pass);
    let mut report = json!({
        "input": input_echo(&args.input, &loaded),
        "checks": to_value(&checks),
        "pass": pass,
        "version": env!("CARGO_PKG_VERSION"),
    });
    report["input"]["checks"] = json!(args
        .checks
        .iter()
        .map(|c| c.name())
        .collect::<Vec<_>>());
    report["input"]["deg_pi"] = match args.deg_pi {
        DegPi::Auto => json!("auto"),
        DegPi::Fixed(d) => json!(d),
    };
    if args.timing {
        report["timing_seconds"] = Value::Object(timings);
    }
    Ok(Output::json(
        &report,
        if pass { EXIT_OK } else { EXIT_FAILURE },
    ))
}
