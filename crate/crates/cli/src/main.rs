//! `hyperunif`: command-line driver.
//!
//! Exit codes: 0 success, 1 usage, 2 data, 3 numerical failure.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use hyperunif::asymptotic::{build_mixture, coef_closed_form, coef_spectral_range, dof, dof_f64, truncation_error_profile};
use hyperunif::engine::{
    asymptotic_evaluator, calibrate_critical_values, ccf_test, cvm_test, gine_fn_test, ks_test, rayleigh_test,
    render_null_table_csv, Method, NullRow, TestOutcome, DEFAULT_CCF_DIRECTIONS, DEFAULT_K, DEFAULT_MC_REPS,
};
use hyperunif::io::{parse_catalogue, render_results, CatalogueFormat, CatalogueOptions, ColumnMapping, OutputFormat};
use hyperunif::sphere::sample_uniform;
use hyperunif::{Error, RngStream};

#[derive(Parser, Debug)]
#[command(name = "hyperunif", version, about = "Uniformity tests on the hypersphere")]
struct Cli {
    /// Base seed for every random draw.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Worker threads: a positive integer or `auto`.
    #[arg(long, global = true, default_value = "auto", value_parser = parse_threads)]
    threads: Threads,
    /// Write the primary output here instead of stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run uniformity tests on a data file.
    Test(TestArgs),
    /// Critical values, asymptotic (Imhof) or by Monte Carlo.
    CriticalValue(CriticalArgs),
    /// Upper tail probability of the truncated asymptotic null law.
    Tail(TailArgs),
    /// Truncation error of the tail probability between two K values.
    TruncationError(TruncationArgs),
    /// Kernel coefficients b, degrees of freedom d and weights w.
    Coefficients(CoefficientArgs),
    /// A uniform sample on Ω_q as cartesian CSV.
    Sample(SampleArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Format {
    Json,
    Csv,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum InputFormat {
    #[value(name = "lonlat_deg")]
    LonLatDeg,
    #[value(name = "latlon_deg")]
    LatLonDeg,
    Cartesian,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum TestChoice {
    Cvm,
    Ks,
    Ccf,
    Rayleigh,
    GineFn,
    All,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum PvalueChoice {
    Asymptotic,
    Mc,
}

impl From<PvalueChoice> for Method {
    fn from(p: PvalueChoice) -> Self {
        match p {
            PvalueChoice::Asymptotic => Method::Asymptotic,
            PvalueChoice::Mc => Method::MonteCarlo,
        }
    }
}

#[derive(Args, Debug)]
struct TestArgs {
    #[arg(long)]
    file: PathBuf,
    /// Input layout.
    #[arg(long, value_enum, default_value = "lonlat_deg")]
    format: InputFormat,
    #[arg(long, value_enum, default_value = "all")]
    test: TestChoice,
    /// p-value method for CvM, KS and Rayleigh; CCF and Giné are always Monte Carlo.
    #[arg(long, value_enum, default_value = "asymptotic")]
    pvalue: PvalueChoice,
    #[arg(long, default_value_t = DEFAULT_MC_REPS)]
    mc_reps: usize,
    /// Number of random directions for CCF.
    #[arg(long, default_value_t = DEFAULT_CCF_DIRECTIONS)]
    k_dirs: usize,
    /// Per-direction KS p-values inside CCF.
    #[arg(long, value_enum, default_value = "asymptotic")]
    ccf_direction_pvalue: PvalueChoice,
    /// Series truncation for asymptotic CvM p-values.
    #[arg(long = "K", default_value_t = DEFAULT_K)]
    k: usize,
    /// Drop invalid rows instead of failing (they are reported on stderr).
    #[arg(long)]
    skip_bad: bool,
    #[arg(long)]
    lat_col: Option<String>,
    #[arg(long)]
    lon_col: Option<String>,
    #[arg(long)]
    name_col: Option<String>,
    #[arg(long, value_enum, default_value = "json")]
    output_format: Format,
}

#[derive(Args, Debug)]
struct CriticalArgs {
    #[arg(long)]
    q: usize,
    /// Invert the truncated asymptotic law instead of simulating.
    #[arg(long, conflicts_with_all = ["n", "reps"])]
    asymptotic: bool,
    /// Sample size for Monte Carlo calibration.
    #[arg(long, required_unless_present = "asymptotic")]
    n: Option<usize>,
    #[arg(long, default_value_t = 1_000_000)]
    reps: usize,
    /// Repeatable; defaults to 0.10, 0.05 and 0.01.
    #[arg(long, value_parser = parse_alpha)]
    alpha: Vec<f64>,
    #[arg(long = "K", default_value_t = DEFAULT_K)]
    k: usize,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Args, Debug)]
struct TailArgs {
    #[arg(long)]
    q: usize,
    #[arg(long)]
    x: f64,
    #[arg(long = "K", default_value_t = DEFAULT_K)]
    k: usize,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Args, Debug)]
struct TruncationArgs {
    #[arg(long)]
    q: usize,
    #[arg(long = "K-small")]
    k_small: usize,
    #[arg(long = "K-ref")]
    k_ref: usize,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Args, Debug)]
struct CoefficientArgs {
    #[arg(long)]
    q: usize,
    #[arg(long)]
    k_max: usize,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Args, Debug)]
struct SampleArgs {
    #[arg(long)]
    q: usize,
    #[arg(long)]
    n: usize,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

/// `None` leaves the pool size to rayon.
#[derive(Clone, Copy, Debug)]
struct Threads(Option<usize>);

fn parse_threads(s: &str) -> Result<Threads, String> {
    if s == "auto" {
        return Ok(Threads(None));
    }
    match s.parse::<usize>() {
        Ok(n) if n > 0 => Ok(Threads(Some(n))),
        _ => Err(format!("expected a positive integer or `auto`, got `{s}`")),
    }
}

fn parse_alpha(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(a) if a > 0.0 && a < 1.0 => Ok(a),
        _ => Err(format!("alpha must lie in (0, 1), got `{s}`")),
    }
}

/// A failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Domain(_) => 1,
            Error::Numerical(_) => 3,
            Error::Unsupported(_) | Error::Parse { .. } | Error::Io { .. } | Error::Serde(_) => 2,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

type CmdResult = Result<Vec<u8>, Failure>;

fn table(format: Format, header: &[&str], rows: Vec<Vec<Value>>) -> CmdResult {
    match format {
        Format::Csv => {
            let mut out = header.join(",");
            out.push('\n');
            for row in rows {
                let cells: Vec<String> = row
                    .into_iter()
                    .map(|v| match v {
                        Value::String(s) => s,
                        Value::Null => String::new(),
                        other => other.to_string(),
                    })
                    .collect();
                out.push_str(&cells.join(","));
                out.push('\n');
            }
            Ok(out.into_bytes())
        }
        Format::Json => {
            let objects: Vec<Value> = rows
                .into_iter()
                .map(|row| Value::Object(header.iter().map(|h| h.to_string()).zip(row).collect()))
                .collect();
            json_bytes(&Value::Array(objects))
        }
    }
}

fn json_bytes(v: &Value) -> CmdResult {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| Failure::from(Error::from(e)))?;
    s.push('\n');
    Ok(s.into_bytes())
}

fn cmd_test(a: &TestArgs, seed: u64) -> CmdResult {
    let format = match a.format {
        InputFormat::LonLatDeg => CatalogueFormat::LonLatDeg,
        InputFormat::LatLonDeg => CatalogueFormat::LatLonDeg,
        InputFormat::Cartesian => CatalogueFormat::Cartesian,
    };
    let opts = CatalogueOptions {
        format,
        columns: ColumnMapping {
            lat: a.lat_col.clone(),
            lon: a.lon_col.clone(),
            name: a.name_col.clone(),
            ..Default::default()
        },
        skip_bad: a.skip_bad,
    };
    let parsed = parse_catalogue(&a.file, &opts)?;
    for (line, msg) in &parsed.skipped {
        eprintln!("skipped line {line}: {msg}");
    }
    let s = &parsed.sample;
    let method: Method = a.pvalue.into();
    // Rayleigh, Giné F_n, CCF, CvM.
    let chosen: Vec<TestChoice> = match a.test {
        TestChoice::All => {
            let mut v = vec![TestChoice::Rayleigh, TestChoice::GineFn, TestChoice::Ccf, TestChoice::Cvm];
            if s.q() < 2 {
                eprintln!("note: Giné F_n needs q >= 2 and is left out of `all`");
                v.retain(|t| *t != TestChoice::GineFn);
            }
            v
        }
        t => vec![t],
    };
    let mut outcomes: Vec<TestOutcome> = Vec::new();
    for t in chosen {
        // Each test draws from its own stream.
        let rng = |stream: u64| RngStream::new(seed, stream);
        let outcome = match t {
            TestChoice::Cvm => cvm_test(s, method, a.k, rng(0), a.mc_reps)?,
            TestChoice::Ks => ks_test(s, method, rng(1), a.mc_reps)?,
            TestChoice::Ccf => ccf_test(s, a.k_dirs, rng(2), a.mc_reps, a.ccf_direction_pvalue.into())?,
            TestChoice::Rayleigh => rayleigh_test(s, method, rng(3), a.mc_reps)?,
            TestChoice::GineFn => gine_fn_test(s, rng(4), a.mc_reps)?,
            TestChoice::All => unreachable!("expanded above"),
        };
        outcomes.push(outcome);
    }
    let format = match a.output_format {
        Format::Json => OutputFormat::Json,
        Format::Csv => OutputFormat::Csv,
    };
    Ok(render_results(&outcomes, format)?)
}

fn cmd_critical_value(a: &CriticalArgs, seed: u64) -> CmdResult {
    let alphas = if a.alpha.is_empty() { vec![0.10, 0.05, 0.01] } else { a.alpha.clone() };
    let rows: Vec<NullRow> = if a.asymptotic {
        let ev = asymptotic_evaluator(a.q, a.k)?;
        alphas
            .iter()
            .map(|&alpha| {
                Ok(NullRow {
                    q: a.q,
                    n: None,
                    alpha,
                    critical_value: ev.critical_value(alpha)?,
                    m: None,
                    seed: None,
                    standard_error: None,
                })
            })
            .collect::<Result<_, Error>>()?
    } else {
        let n = a.n.expect("clap requires --n without --asymptotic");
        calibrate_critical_values(a.q, n, &alphas, a.reps, RngStream::new(seed, 0))?
    };
    match a.format {
        Format::Csv => Ok(render_null_table_csv(&rows)?),
        Format::Json => json_bytes(&serde_json::to_value(&rows).map_err(|e| Failure::from(Error::from(e)))?),
    }
}

fn cmd_tail(a: &TailArgs) -> CmdResult {
    let p = if a.x == 0.0 {
        if a.q < 1 || a.k < 1 {
            return Err(Error::domain("q and K must be at least 1").into());
        }
        1.0
    } else {
        asymptotic_evaluator(a.q, a.k)?.tail(a.x)?
    };
    match a.format {
        None => Ok(format!("{p:?}\n").into_bytes()),
        Some(f) => table(f, &["q", "x", "K", "tail"], vec![vec![json!(a.q), json!(a.x), json!(a.k), json!(p)]]),
    }
}

fn cmd_truncation(a: &TruncationArgs) -> CmdResult {
    let profile = truncation_error_profile(a.q, a.k_small, a.k_ref, None)?;
    let rows = profile.into_iter().map(|(p, e)| vec![json!(p), json!(e)]).collect();
    table(a.format, &["probability", "abs_error"], rows)
}

fn cmd_coefficients(a: &CoefficientArgs) -> CmdResult {
    if a.q < 1 || a.k_max < 1 {
        return Err(Error::domain("q and k-max must be at least 1").into());
    }
    let mixture = build_mixture(a.q, a.k_max)?;
    let b: Vec<f64> = if a.q <= 3 {
        (1..=a.k_max).map(|k| coef_closed_form(k, a.q)).collect::<Result<_, _>>()?
    } else {
        coef_spectral_range(a.q, a.k_max)?
    };
    let rows = (0..mixture.len())
        .map(|i| {
            let k = i + 1;
            let d = match dof(k, a.q) {
                Ok(d) if d <= (1u128 << 53) => json!(d as u64),
                Ok(d) => Value::String(d.to_string()),
                Err(_) => json!(dof_f64(k, a.q)),
            };
            vec![json!(k), json!(b[i]), d, json!(mixture.weights[i])]
        })
        .collect();
    table(a.format, &["k", "b", "d", "w"], rows)
}

fn cmd_sample(a: &SampleArgs, seed: u64) -> CmdResult {
    let s = sample_uniform(a.q, a.n, RngStream::new(seed, 0))?;
    let header: Vec<String> = if a.q == 2 {
        vec!["x".into(), "y".into(), "z".into()]
    } else {
        (1..=a.q + 1).map(|i| format!("x{i}")).collect()
    };
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = s.points().map(|p| p.iter().map(|v| json!(v)).collect()).collect();
    table(a.format, &header, rows)
}

fn run(cli: &Cli) -> Result<(), Failure> {
    if let Threads(Some(n)) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| Failure {
            code: 1,
            message: format!("cannot configure {n} threads: {e}"),
        })?;
    }
    let bytes = match &cli.command {
        Command::Test(a) => cmd_test(a, cli.seed)?,
        Command::CriticalValue(a) => cmd_critical_value(a, cli.seed)?,
        Command::Tail(a) => cmd_tail(a)?,
        Command::TruncationError(a) => cmd_truncation(a)?,
        Command::Coefficients(a) => cmd_coefficients(a)?,
        Command::Sample(a) => cmd_sample(a, cli.seed)?,
    };
    match &cli.output {
        Some(path) => hyperunif::io::atomic_write(path, &bytes)?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(&bytes).and_then(|_| out.flush()).map_err(|e| Failure {
                code: 2,
                message: format!("cannot write to stdout: {e}"),
            })?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
