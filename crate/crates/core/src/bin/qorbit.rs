//! Command-line front end for the experiment harness.
//!
//! Each subcommand selects one experiment family; the shared flags select
//! the moduli, the embedding variant, the unit subgroup, and the output
//! format.  A flat `key=value` config file may supply any flag; explicit
//! flags override the file.  Exit codes: 0 on success, 2 on configuration
//! errors, 3 on internal-consistency failures.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qorbit::harness::{run_experiment, ExperimentConfig, ExperimentKind, HarnessError, RunReport};
use qorbit::modgroup::EmbeddingVariant;

#[derive(Parser)]
#[command(name = "qorbit", about = "Orbits of closed geodesics: experiments and reports")]
struct Cli {
    #[command(subcommand)]
    command: CliCommand,
}

#[derive(Subcommand)]
enum CliCommand {
    /// Orbit geometry: lengths, traces, and shift statistics per modulus.
    Orbit(CommonArgs),
    /// Equidistribution ratios of the observable suite against Haar.
    Equidist(CommonArgs),
    /// Coset Kloosterman sums by direct and character-expansion paths.
    Kloosterman(CommonArgs),
    /// Birch–Stevens residuals for every character of each modulus.
    BirchStevens(CommonArgs),
    /// Homology classes of the orbit and concentration distances.
    Homology(CommonArgs),
    /// Torus statistics: trace and lift means over the coset.
    Torus(CommonArgs),
}

impl CliCommand {
    fn kind(&self) -> ExperimentKind {
        match self {
            CliCommand::Orbit(_) => ExperimentKind::Orbit,
            CliCommand::Equidist(_) => ExperimentKind::Equidist,
            CliCommand::Kloosterman(_) => ExperimentKind::Kloosterman,
            CliCommand::BirchStevens(_) => ExperimentKind::BirchStevens,
            CliCommand::Homology(_) => ExperimentKind::Homology,
            CliCommand::Torus(_) => ExperimentKind::Torus,
        }
    }

    fn args(&self) -> &CommonArgs {
        match self {
            CliCommand::Orbit(a)
            | CliCommand::Equidist(a)
            | CliCommand::Kloosterman(a)
            | CliCommand::BirchStevens(a)
            | CliCommand::Homology(a)
            | CliCommand::Torus(a) => a,
        }
    }
}

#[derive(Args, Default)]
struct CommonArgs {
    /// Flat key=value config file; explicit flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// One modulus (repeatable).
    #[arg(long)]
    q: Vec<i128>,
    /// Arithmetic progression of moduli, `A:B:step` inclusive of A.
    #[arg(long = "q-range")]
    q_range: Option<String>,
    /// Level N of the congruence subgroup.
    #[arg(long)]
    level: Option<i64>,
    /// Trace selection: `minimal`, `explicit:<n>`, or `epsreg:<eps>`.
    #[arg(long)]
    variant: Option<String>,
    /// Comma-separated generators of the unit subgroup H.
    #[arg(long)]
    subgroup: Option<String>,
    /// Coset representative c for cH sums.
    #[arg(long)]
    coset: Option<i64>,
    /// Output path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format: `json` or `csv`.
    #[arg(long)]
    format: Option<String>,
    /// Numerical tolerance for quadrature and cross-checks.
    #[arg(long)]
    tol: Option<f64>,
    /// Cache directory for orbit reports.
    #[arg(long)]
    cache: Option<PathBuf>,
    /// Worker count (scheduling hint; results are order-independent).
    #[arg(long)]
    threads: Option<usize>,
    /// Seed for the optional Monte Carlo oracle.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum OutputFormat {
    Json,
    Csv,
}

struct ResolvedCli {
    experiment: ExperimentConfig,
    out: Option<PathBuf>,
    format: OutputFormat,
}

fn config_error(message: impl Into<String>) -> HarnessError {
    HarnessError::Config {
        field: "cli".into(),
        message: message.into(),
    }
}

/// Parse a flat `key=value` file into a map; `#` starts a comment line.
fn parse_config_file(path: &PathBuf) -> Result<BTreeMap<String, String>, HarnessError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| config_error(format!("cannot read config file {}: {e}", path.display())))?;
    let mut map = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| config_error(format!("line {}: expected key=value", lineno + 1)))?;
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    const KNOWN: [&str; 12] = [
        "q", "q-range", "level", "variant", "subgroup", "coset", "out", "format", "tol", "cache",
        "threads", "seed",
    ];
    for key in map.keys() {
        if !KNOWN.contains(&key.as_str()) {
            return Err(config_error(format!("unknown config key `{key}`")));
        }
    }
    Ok(map)
}

fn parse_variant(text: &str) -> Result<EmbeddingVariant, HarnessError> {
    if text == "minimal" {
        return Ok(EmbeddingVariant::MinimalTrace);
    }
    if let Some(n) = text.strip_prefix("explicit:") {
        let n: i64 = n
            .parse()
            .map_err(|_| config_error(format!("bad explicit shift `{n}`")))?;
        return Ok(EmbeddingVariant::ExplicitShift(n));
    }
    if let Some(eps) = text.strip_prefix("epsreg:") {
        let eps: f64 = eps
            .parse()
            .map_err(|_| config_error(format!("bad epsilon `{eps}`")))?;
        if !(eps > 0.0) {
            return Err(config_error("epsilon must be positive"));
        }
        return Ok(EmbeddingVariant::EpsRegular {
            eps,
            base: Box::new(EmbeddingVariant::MinimalTrace),
        });
    }
    Err(config_error(format!(
        "unknown variant `{text}` (expected minimal, explicit:<n>, or epsreg:<eps>)"
    )))
}

fn parse_q_range(text: &str) -> Result<Vec<i128>, HarnessError> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(config_error(format!("bad q-range `{text}` (want A:B:step)")));
    }
    let a: i128 = parts[0]
        .parse()
        .map_err(|_| config_error("bad q-range start"))?;
    let b: i128 = parts[1]
        .parse()
        .map_err(|_| config_error("bad q-range end"))?;
    let step: i128 = parts[2]
        .parse()
        .map_err(|_| config_error("bad q-range step"))?;
    if step <= 0 || b < a {
        return Err(config_error("q-range needs step > 0 and end ≥ start"));
    }
    Ok((a..=b).step_by(step as usize).collect())
}

fn parse_int_list(text: &str) -> Result<Vec<i64>, HarnessError> {
    text.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| config_error(format!("bad integer `{s}` in list")))
        })
        .collect()
}

/// Merge the config file (if any) under the explicit flags and build the
/// experiment description.
fn resolve(kind: ExperimentKind, args: &CommonArgs) -> Result<ResolvedCli, HarnessError> {
    let file = match &args.config {
        Some(path) => parse_config_file(path)?,
        None => BTreeMap::new(),
    };
    let get = |key: &str| file.get(key).map(String::as_str);

    let mut q_list: Vec<i128> = args.q.clone();
    if q_list.is_empty() {
        if let Some(text) = get("q") {
            q_list = parse_int_list(text)?.into_iter().map(i128::from).collect();
        }
    }
    let range_text = args.q_range.clone().or_else(|| get("q-range").map(String::from));
    if let Some(text) = &range_text {
        q_list.extend(parse_q_range(text)?);
    }
    q_list.sort_unstable();
    q_list.dedup();

    let mut config = ExperimentConfig::new(kind, q_list);
    if let Some(level) = args.level.or_else(|| get("level").and_then(|s| s.parse().ok())) {
        config.level = level;
    }
    let variant_text = args.variant.clone().or_else(|| get("variant").map(String::from));
    if let Some(text) = &variant_text {
        config.variant = parse_variant(text)?;
    }
    let subgroup_text = args
        .subgroup
        .clone()
        .or_else(|| get("subgroup").map(String::from));
    if let Some(text) = &subgroup_text {
        config.subgroup_generators = parse_int_list(text)?;
    }
    if let Some(c) = args.coset.or_else(|| get("coset").and_then(|s| s.parse().ok())) {
        config.coset_rep = c;
    }
    if let Some(tol) = args.tol.or_else(|| get("tol").and_then(|s| s.parse().ok())) {
        config.tol = tol;
    }
    let cache = args
        .cache
        .clone()
        .or_else(|| get("cache").map(PathBuf::from));
    config.cache_dir = cache;
    if let Some(threads) = args
        .threads
        .or_else(|| get("threads").and_then(|s| s.parse().ok()))
    {
        if threads == 0 {
            return Err(config_error("threads must be ≥ 1"));
        }
        config.threads = threads;
    }
    if let Some(seed) = args.seed.or_else(|| get("seed").and_then(|s| s.parse().ok())) {
        config.seed = seed;
    }

    let format_text = args
        .format
        .clone()
        .or_else(|| get("format").map(String::from))
        .unwrap_or_else(|| "json".to_string());
    let format = match format_text.as_str() {
        "json" => OutputFormat::Json,
        "csv" => OutputFormat::Csv,
        other => return Err(config_error(format!("unknown format `{other}`"))),
    };
    let out = args.out.clone().or_else(|| get("out").map(PathBuf::from));

    Ok(ResolvedCli {
        experiment: config,
        out,
        format,
    })
}

fn render_csv(report: &RunReport) -> String {
    let mut out = String::new();
    out.push_str(
        "q,level,subgroup_size,total_length,sum_n_psi,max_trace_over_q,trace_mean_over_phi,\
         max_ratio_deviation,concentration_distance,birch_stevens_max_residual,lift_mean\n",
    );
    for r in &report.reports {
        let max_dev = r
            .ratios
            .iter()
            .map(|x| x.deviation)
            .fold(f64::NAN, f64::max);
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let dev = if r.ratios.is_empty() {
            String::new()
        } else {
            max_dev.to_string()
        };
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            r.q,
            r.level,
            r.subgroup_size,
            r.total_length,
            r.sum_n_psi,
            r.max_trace_over_q,
            r.trace_mean_over_phi,
            dev,
            opt(r.concentration_distance),
            opt(r.birch_stevens_max_residual),
            opt(r.lift_mean),
        ));
    }
    out
}

fn emit(resolved: &ResolvedCli, report: &RunReport) -> Result<(), HarnessError> {
    let text = match resolved.format {
        OutputFormat::Json => {
            let mut s = serde_json::to_string_pretty(report)
                .map_err(|e| config_error(format!("serialization failed: {e}")))?;
            s.push('\n');
            s
        }
        OutputFormat::Csv => render_csv(report),
    };
    match &resolved.out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| config_error(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run() -> Result<(), HarnessError> {
    let cli = Cli::parse();
    let resolved = resolve(cli.command.kind(), cli.command.args())?;
    let report = run_experiment(&resolved.experiment)?;
    emit(&resolved, &report)
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                HarnessError::Config { .. } | HarnessError::Io(_) => ExitCode::from(2),
                _ => ExitCode::from(3),
            }
        }
    }
}
