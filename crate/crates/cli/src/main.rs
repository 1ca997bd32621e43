use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use cvsep::channels::{dual_spec, ChannelSpec};
use cvsep::criteria::StandardFormParams;
use cvsep::decision::{all_measurements_separable, dual_povm_check};
use cvsep::measurements::cv_bell;
use cvsep::scalar::round_significant;
use cvsep::swapping_sim::{
    simulate_swap, threshold_scan, write_scan_csv, ScanGrid, SwapParams, DEFAULT_R,
};
use cvsep::verify::{self, VerifyConfig};
use cvsep::Error;

const EXIT_VERIFY: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_IO: u8 = 3;

#[derive(Parser)]
#[command(
    name = "cvsep",
    version,
    about = "Separability of Gaussian measurements behind Gaussian error channels"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decide whether every measurement behind a channel pair is separable.
    Decide(DecideArgs),
    /// Swap two two-mode squeezed vacua through amplification and loss.
    Swap(SwapArgs),
    /// Tabulate verdicts and swap outcomes over a parameter grid.
    Sweep(SweepArgs),
    /// Print the dual of a channel and optionally test the Bell element.
    Dual(DualArgs),
    /// Run the built-in verification suites.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct SideA {
    /// Channel on side A, e.g. `amp:2,loss:0.3`.
    #[arg(id = "a", long = "a", value_name = "SPEC", allow_hyphen_values = true)]
    inline: Option<String>,
    /// JSON channel spec for side A.
    #[arg(
        id = "spec_file_a",
        long = "spec-file-a",
        value_name = "PATH",
        conflicts_with = "a"
    )]
    file: Option<PathBuf>,
}

#[derive(Args)]
struct SideB {
    /// Channel on side B.
    #[arg(id = "b", long = "b", value_name = "SPEC", allow_hyphen_values = true)]
    inline: Option<String>,
    /// JSON channel spec for side B.
    #[arg(
        id = "spec_file_b",
        long = "spec-file-b",
        value_name = "PATH",
        conflicts_with = "b"
    )]
    file: Option<PathBuf>,
}

#[derive(Args)]
struct DecideArgs {
    #[command(flatten)]
    a: SideA,
    #[command(flatten)]
    b: SideB,
}

#[derive(Args)]
struct SwapArgs {
    #[arg(long, default_value_t = DEFAULT_R)]
    r: f64,
    #[arg(long, default_value_t = 0.0)]
    la: f64,
    #[arg(long, default_value_t = 0.0)]
    lb: f64,
    #[arg(long, default_value_t = 1.0)]
    aa: f64,
    #[arg(long, default_value_t = 1.0)]
    ab: f64,
    #[arg(long, default_value_t = 0.0)]
    na: f64,
    #[arg(long, default_value_t = 0.0)]
    nb: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

/// Grid axes take a comma list (`0,0.5,1`) or `start:stop:count`.
#[derive(Args)]
struct SweepArgs {
    #[arg(long, default_value = "0:1:11")]
    la: String,
    #[arg(long, default_value = "0:1:11")]
    lb: String,
    #[arg(long, default_value = "1")]
    aa: String,
    #[arg(long, default_value = "1")]
    ab: String,
    #[arg(long, default_value = "0")]
    na: String,
    #[arg(long, default_value = "0")]
    nb: String,
    #[arg(long, default_value_t = 4.0)]
    r: f64,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Worker threads (defaults to all cores).
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct DualArgs {
    #[command(flatten)]
    a: SideA,
    /// Test the dual-mapped Bell POVM element over a range of regularizers.
    #[arg(long)]
    check_bell: bool,
    /// Partner channel for `--check-bell` (identity when omitted).
    #[command(flatten)]
    b: SideB,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = verify::DEFAULT_SEED)]
    seed: u64,
    #[arg(long, default_value_t = verify::DEFAULT_SAMPLES)]
    samples: usize,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long, hide = true)]
    inject_fault: bool,
}

enum Failure {
    /// Standard output was closed by the reader.
    Closed,
    Input(String),
    Io(String),
    Verify(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Consistency(_) => Failure::Verify(e.to_string()),
            _ => Failure::Input(e.to_string()),
        }
    }
}

type CmdResult = Result<(), Failure>;

fn io_err(e: io::Error) -> Failure {
    if e.kind() == io::ErrorKind::BrokenPipe {
        Failure::Closed
    } else {
        Failure::Io(e.to_string())
    }
}

fn json_err(e: serde_json::Error) -> Failure {
    match e.io_error_kind() {
        Some(io::ErrorKind::BrokenPipe) => Failure::Closed,
        _ => Failure::Io(e.to_string()),
    }
}

/// Round every float in `v` to 12 significant digits.
fn round_floats(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => n
            .as_f64()
            .map(|x| json!(round_significant(x, 12)))
            .unwrap_or(Value::Number(n)),
        Value::Array(xs) => Value::Array(xs.into_iter().map(round_floats).collect()),
        Value::Object(m) => {
            Value::Object(m.into_iter().map(|(k, v)| (k, round_floats(v))).collect())
        }
        other => other,
    }
}

fn print_json(v: impl Serialize) -> CmdResult {
    let v = serde_json::to_value(v).map_err(json_err)?;
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, &round_floats(v)).map_err(json_err)?;
    writeln!(out).map_err(io_err)
}

fn load_spec(
    inline: &Option<String>,
    file: &Option<PathBuf>,
    side: &str,
) -> Result<Option<ChannelSpec>, Failure> {
    match (inline, file) {
        (Some(s), _) => Ok(Some(s.parse()?)),
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
            Ok(Some(ChannelSpec::from_json(&text)?))
        }
        (None, None) => Ok(None),
    }
    .map_err(|e: Failure| match e {
        Failure::Input(msg) => Failure::Input(format!("side {side}: {msg}")),
        other => other,
    })
}

fn require(spec: Option<ChannelSpec>, side: &str) -> Result<ChannelSpec, Failure> {
    spec.ok_or_else(|| Failure::Input(format!("a channel for side {side} is required")))
}

fn cmd_decide(args: &DecideArgs) -> CmdResult {
    let a = require(load_spec(&args.a.inline, &args.a.file, "A")?, "A")?;
    let b = require(load_spec(&args.b.inline, &args.b.file, "B")?, "B")?;
    let report = all_measurements_separable::<f64>(&a, &b)?;
    print_json(report.to_record())
}

fn std_json(p: &StandardFormParams<f64>) -> Value {
    json!({ "n_a": p.n_a, "n_b": p.n_b, "c": p.c })
}

fn cmd_swap(args: &SwapArgs) -> CmdResult {
    let p = SwapParams::new(args.r, args.aa, args.ab, args.la, args.lb)?
        .with_noise(args.na, args.nb)?;
    let res = simulate_swap(&p)?;
    print_json(json!({
        "r": p.r,
        "a_a": p.a_a,
        "a_b": p.a_b,
        "l_a": p.l_a,
        "l_b": p.l_b,
        "n_a_noise": p.n_a_noise,
        "n_b_noise": p.n_b_noise,
        "simulated": std_json(&res.std),
        "closed_form": res.closed_form.as_ref().map(std_json),
        "closed_form_deviation": res.closed_form_deviation,
        "kappa_a": res.kappa_a,
        "kappa_b": res.kappa_b,
        "eta": res.eta,
        "duan": res.duan,
        "duan_limit": res.duan_limit,
        "logneg": res.logneg,
        "ppt_separable": res.ppt.separable,
        "ppt_margin": res.ppt.margin,
    }))
}

fn parse_axis(name: &str, s: &str) -> Result<Vec<f64>, Failure> {
    let bad = |what: String| Failure::Input(format!("--{name} `{s}`: {what}"));
    let num = |t: &str| t.trim().parse::<f64>().map_err(|e| bad(e.to_string()));
    let s = s.trim();
    if s.is_empty() {
        return Ok(Vec::new());
    }
    if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        let [start, stop, count] = parts[..] else {
            return Err(bad("expected start:stop:count".into()));
        };
        let (start, stop) = (num(start)?, num(stop)?);
        let count: usize = count.trim().parse().map_err(|e| bad(format!("{e}")))?;
        return Ok(match count {
            0 => Vec::new(),
            1 => vec![start],
            n => (0..n)
                .map(|i| start + (stop - start) * i as f64 / (n - 1) as f64)
                .collect(),
        });
    }
    s.split(',').map(num).collect()
}

fn set_jobs(jobs: Option<usize>) -> CmdResult {
    if let Some(n) = jobs {
        if n == 0 {
            return Err(Failure::Input("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Io(e.to_string()))?;
    }
    Ok(())
}

fn cmd_sweep(args: &SweepArgs) -> CmdResult {
    set_jobs(args.jobs)?;
    let grid = ScanGrid {
        l_a: parse_axis("la", &args.la)?,
        l_b: parse_axis("lb", &args.lb)?,
        a_a: parse_axis("aa", &args.aa)?,
        a_b: parse_axis("ab", &args.ab)?,
        n_a_noise: parse_axis("na", &args.na)?,
        n_b_noise: parse_axis("nb", &args.nb)?,
        r: args.r,
    };
    let rows = threshold_scan(&grid)?;
    let sink: Box<dyn Write> = match &args.out {
        Some(path) => Box::new(
            File::create(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?,
        ),
        None => Box::new(io::stdout().lock()),
    };
    let mut sink = BufWriter::new(sink);
    match args.format {
        Format::Csv => write_scan_csv(&rows, &mut sink).map_err(io_err)?,
        Format::Json => {
            let rounded: Vec<_> = rows.into_iter().map(|r| r.rounded()).collect();
            serde_json::to_writer_pretty(&mut sink, &rounded).map_err(json_err)?;
            writeln!(sink).map_err(io_err)?;
        }
    }
    sink.flush().map_err(io_err)
}

const BELL_REGULARIZERS: [f64; 5] = [2.0, 3.0, 4.0, 5.0, 6.0];

fn cmd_dual(args: &DualArgs) -> CmdResult {
    let a = require(load_spec(&args.a.inline, &args.a.file, "A")?, "A")?;
    let dual = dual_spec(&a)?;
    let mut out = json!({
        "channel": a.to_string(),
        "dual": dual.to_string(),
        "dual_primitives": dual,
    });
    if args.check_bell {
        let b = load_spec(&args.b.inline, &args.b.file, "B")?.unwrap_or_else(ChannelSpec::identity);
        let bell = cv_bell::<f64>();
        let trend = BELL_REGULARIZERS
            .iter()
            .map(|&r_reg| {
                let c = dual_povm_check(&bell, &a, &b, r_reg)?;
                Ok(json!({ "r_reg": r_reg, "separable": c.separable, "margin": c.margin }))
            })
            .collect::<Result<Vec<_>, Error>>()?;
        out["partner"] = json!(b.to_string());
        out["bell_check"] = Value::Array(trend);
    }
    print_json(out)
}

fn cmd_verify(args: &VerifyArgs) -> CmdResult {
    set_jobs(args.jobs)?;
    let cfg = VerifyConfig {
        seed: args.seed,
        samples: args.samples,
        inject_fault: args.inject_fault,
    };
    let report = verify::run_all(&cfg)?;
    let mut out = io::stdout().lock();
    writeln!(out, "seed {} samples {}", report.seed, report.samples).map_err(io_err)?;
    for s in &report.suites {
        let status = if s.passed() { "PASS" } else { "FAIL" };
        writeln!(
            out,
            "{status} {:<26} {:>6} checked {:>6} failed",
            s.name, s.checked, s.failed
        )
        .map_err(io_err)?;
        if let Some(msg) = &s.first_failure {
            writeln!(out, "     first failure: {msg}").map_err(io_err)?;
        }
    }
    let failed = report.suites.iter().filter(|s| !s.passed()).count();
    writeln!(
        out,
        "{} of {} suites passed",
        report.suites.len() - failed,
        report.suites.len()
    )
    .map_err(io_err)?;
    if failed > 0 {
        return Err(Failure::Verify(format!("{failed} suite(s) failed")));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Decide(a) => cmd_decide(a),
        Command::Swap(a) => cmd_swap(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Dual(a) => cmd_dual(a),
        Command::Verify(a) => cmd_verify(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (code, msg) = match f {
                Failure::Closed => return ExitCode::SUCCESS,
                Failure::Input(m) => (EXIT_INPUT, m),
                Failure::Io(m) => (EXIT_IO, m),
                Failure::Verify(m) => (EXIT_VERIFY, m),
            };
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
