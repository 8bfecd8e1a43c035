use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fsvd_core::data::{format_f64, ingest_long_csv, write_long_csv_file, FunctionalDataset, IngestOptions};
use fsvd_core::decomposition::{fsvd, FitConfig, FsvdModel, NuChoice, RankChoice};
use fsvd_core::error::FsvdError;
use fsvd_core::io::{
    load_model, save_model, to_json, truth_to_json, ClusterFile, FactorFile, RegressFile, CLUSTER_SCHEMA,
    FACTOR_SCHEMA, REGRESS_SCHEMA,
};
use fsvd_core::parallel::with_threads;
use fsvd_core::selection::{default_nu_grid, FoldScheme};
use fsvd_core::simlab::bench::{
    format_table, run_bench, write_report_csv, write_samples_csv, BenchConfig, Method, ScenarioSpec,
};
use fsvd_core::simlab::{gen_clustering, gen_completion, gen_factor, gen_regression, ScenarioKind, ScenarioTruth};
use fsvd_core::tasks::{cluster, complete, factor_model, regress, EmConfig, DEFAULT_R_USE};
use nalgebra::DMatrix;

const EXIT_INPUT: u8 = 2;
const EXIT_NUMERIC: u8 = 3;
const EXIT_NOT_FOUND: u8 = 4;
const VERIFY_TOL: f64 = 1e-10;

#[derive(Parser, Debug)]
#[command(name = "fsvd", version, about = "Functional SVD for irregularly observed functional data")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for folds, initialization and simulation.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit a model to a long CSV (subject_id,time,value).
    Fit(FitArgs),
    /// Evaluate a fitted subject trajectory at new times.
    Complete(CompleteArgs),
    /// Cluster subjects with the mixture model on fitted scores.
    Cluster(ClusterArgs),
    /// Regress a scalar response on fitted scores.
    Regress(RegressArgs),
    /// Rotate leading components into a factor model.
    Factor(FactorArgs),
    /// Write a synthetic dataset and its ground truth.
    Simulate(SimulateArgs),
    /// Run Monte Carlo replicates and summarize accuracy.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, Debug)]
enum RankArg {
    Fixed(usize),
    AutoRatio,
    AutoAic,
}

impl FromStr for RankArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "auto-ratio" => Ok(RankArg::AutoRatio),
            "auto-aic" => Ok(RankArg::AutoAic),
            _ => match s.parse::<usize>() {
                Ok(r) if r >= 1 => Ok(RankArg::Fixed(r)),
                _ => Err(format!("expected a positive integer, auto-ratio or auto-aic, got `{s}`")),
            },
        }
    }
}

#[derive(Clone, Copy, Debug)]
enum NuArg {
    Cv,
    Fixed(f64),
}

impl FromStr for NuArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        if s == "cv" {
            return Ok(NuArg::Cv);
        }
        match s.parse::<f64>() {
            Ok(v) if v.is_finite() && v >= 0.0 => Ok(NuArg::Fixed(v)),
            _ => Err(format!("expected `cv` or a nonnegative number, got `{s}`")),
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Folds {
    Cyclic,
    Random,
}

#[derive(Args, Debug, Clone)]
struct DataArgs {
    /// Map the observed time range onto [0,1] (otherwise times must already lie in [0,1]).
    #[arg(long)]
    rescale_time: bool,
}

#[derive(Args, Debug)]
struct FitArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "auto-ratio")]
    rank: RankArg,
    #[arg(long, default_value = "cv")]
    nu: NuArg,
    #[arg(long, default_value_t = fsvd_core::decomposition::DEFAULT_TAU)]
    tau: f64,
    #[arg(long, default_value_t = fsvd_core::decomposition::DEFAULT_MAX_ITER)]
    max_iter: usize,
    /// Components fitted before automatic rank selection.
    #[arg(long)]
    r_max: Option<usize>,
    #[arg(long, value_enum, default_value = "cyclic")]
    folds: Folds,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct CompleteArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    subject: String,
    /// Comma-separated times in [0,1], or `grid:N` for N equispaced points.
    #[arg(long)]
    times: String,
}

#[derive(Args, Debug)]
struct ClusterArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    clusters: usize,
    /// Number of components used as scores (default: min(3, rank)).
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = 500)]
    max_iter: usize,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RegressArgs {
    #[arg(long)]
    model: PathBuf,
    /// CSV with columns subject_id,z.
    #[arg(long)]
    response: PathBuf,
    #[arg(long, default_value_t = DEFAULT_R_USE)]
    r_use: usize,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct FactorArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    k: usize,
    /// K x K orthogonal rotation as a headerless CSV.
    #[arg(long)]
    basis: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SimScenario {
    Completion,
    Clustering,
    Regression,
    Factor,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    scenario: SimScenario,
    /// Shared singular vectors (completion only).
    #[arg(long)]
    homogeneous: bool,
    /// Number of clusters (clustering only).
    #[arg(long, default_value_t = 3)]
    clusters: usize,
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 6)]
    j_low: usize,
    #[arg(long, default_value_t = 10)]
    j_high: usize,
    #[arg(long)]
    out_prefix: String,
    /// Check generator invariants and report them on stderr.
    #[arg(long)]
    verify: bool,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// hetero, homo, clustering, regression or factor.
    #[arg(long)]
    scenario: String,
    #[arg(long, default_value = "50,100")]
    n_list: String,
    #[arg(long, default_value = "6-10")]
    j_specs: String,
    #[arg(long, default_value_t = 100)]
    replicates: usize,
    /// Comma-separated method names (default: all that apply).
    #[arg(long)]
    methods: Option<String>,
    #[arg(long, default_value = "cv")]
    nu: NuArg,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-replicate values in tidy CSV form.
    #[arg(long)]
    samples_out: Option<PathBuf>,
    /// Run replicates one at a time.
    #[arg(long)]
    sequential: bool,
}

#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Failure { code: EXIT_INPUT, message: message.into() }
    }

    fn not_found(message: impl Into<String>) -> Self {
        Failure { code: EXIT_NOT_FOUND, message: message.into() }
    }

    fn numeric(message: impl Into<String>) -> Self {
        Failure { code: EXIT_NUMERIC, message: message.into() }
    }
}

impl From<FsvdError> for Failure {
    fn from(e: FsvdError) -> Self {
        let code = if e.is_input_error() { EXIT_INPUT } else { EXIT_NUMERIC };
        Failure { code, message: e.to_string() }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::input(e.to_string())
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn with_path<T>(path: &Path, r: Result<T, FsvdError>) -> CliResult<T> {
    r.map_err(|e| {
        let f = Failure::from(e);
        Failure { code: f.code, message: format!("{}: {}", path.display(), f.message) }
    })
}

fn write_file(path: &Path, contents: &str) -> CliResult {
    fs::write(path, contents).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn ingest(path: &Path, data: &DataArgs) -> CliResult<FunctionalDataset> {
    let opts = IngestOptions { rescale_time: data.rescale_time, ..IngestOptions::default() };
    let (ds, scaling, report) = with_path(path, ingest_long_csv(path, &opts))?;
    if data.rescale_time {
        eprintln!(
            "rescaled time range [{}, {}] to [0,1]",
            scaling.time_offset,
            scaling.time_offset + scaling.time_scale
        );
    }
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    Ok(ds)
}

fn load(path: &Path) -> CliResult<FsvdModel> {
    with_path(path, load_model(path))
}

fn cmd_fit(args: &FitArgs, seed: u64) -> CliResult {
    let cfg = FitConfig {
        tau: args.tau,
        max_iter: args.max_iter,
        nu: match args.nu {
            NuArg::Cv => NuChoice::Cv(default_nu_grid()),
            NuArg::Fixed(v) => NuChoice::Fixed(v),
        },
        rank: match args.rank {
            RankArg::Fixed(r) => RankChoice::Fixed(r),
            RankArg::AutoRatio => RankChoice::AutoRatio,
            RankArg::AutoAic => RankChoice::AutoAic,
        },
        r_max: args.r_max,
        folds: match args.folds {
            Folds::Cyclic => FoldScheme::Cyclic,
            Folds::Random => FoldScheme::Random,
        },
        seed,
        ..FitConfig::default()
    };
    cfg.validate()?;
    let ds = ingest(&args.input, &args.data)?;
    let model = fsvd(&ds, &cfg)?;
    for w in &model.warnings {
        eprintln!("warning: {w}");
    }
    eprintln!("rank {} on {} subjects", model.rank(), model.n());
    with_path(&args.output, save_model(&model, &args.output))?;

    let mut out = String::from("component,rho,nu,iterations,converged\n");
    for (r, c) in model.components.iter().enumerate() {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r + 1,
            format_f64(c.rho),
            format_f64(model.nus[r]),
            c.iterations_used,
            c.converged
        );
    }
    print!("{out}");
    Ok(())
}

fn parse_times(spec: &str) -> CliResult<Vec<f64>> {
    if let Some(n) = spec.strip_prefix("grid:") {
        let n: usize = n
            .trim()
            .parse()
            .map_err(|_| Failure::input(format!("bad grid size in `{spec}`")))?;
        return match n {
            0 => Err(Failure::input("grid needs at least one point")),
            1 => Ok(vec![0.0]),
            _ => Ok((0..n).map(|k| k as f64 / (n - 1) as f64).collect()),
        };
    }
    spec.split(',')
        .map(|s| match s.trim().parse::<f64>() {
            Ok(t) if t.is_finite() => Ok(t),
            _ => Err(Failure::input(format!("bad time `{s}`"))),
        })
        .collect()
}

fn cmd_complete(args: &CompleteArgs) -> CliResult {
    let times = parse_times(&args.times)?;
    let model = load(&args.model)?;
    let i = model
        .subject_index(&args.subject)
        .ok_or_else(|| Failure::not_found(format!("unknown subject `{}`", args.subject)))?;
    let values = complete(&model, i, &times)?;
    let mut out = String::from("time,value\n");
    for (t, v) in times.iter().zip(&values) {
        let _ = writeln!(out, "{},{}", format_f64(*t), format_f64(*v));
    }
    print!("{out}");
    Ok(())
}

fn cmd_cluster(args: &ClusterArgs, seed: u64) -> CliResult {
    let model = load(&args.model)?;
    let ds = ingest(&args.input, &args.data)?;
    let ds = ds
        .select_subjects(&model.subject_ids)
        .map_err(|id| Failure::not_found(format!("model subject `{id}` is missing from the input")))?;
    let k = args.k.unwrap_or_else(|| model.rank().min(3));
    let cfg = EmConfig { max_iter: args.max_iter, seed, ..EmConfig::default() };
    let fit = cluster(&ds, &model, args.clusters, k, &cfg)?;
    for w in &fit.warnings {
        eprintln!("warning: {w}");
    }
    eprintln!(
        "EM: {} iterations, final log-likelihood {}",
        fit.loglik_trace.len(),
        fit.loglik_trace.last().copied().unwrap_or(f64::NAN)
    );
    if let Some(path) = &args.output {
        let file = ClusterFile {
            schema: CLUSTER_SCHEMA.to_string(),
            subject_ids: model.subject_ids.clone(),
            model: fit.clone(),
        };
        write_file(path, &to_json(&file)?)?;
    }
    let mut out = String::from("subject_id,label\n");
    for (id, l) in model.subject_ids.iter().zip(&fit.labels) {
        let _ = writeln!(out, "{id},{l}");
    }
    print!("{out}");
    Ok(())
}

fn read_response(path: &Path, ids: &[String]) -> CliResult<Vec<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    let mut map = std::collections::HashMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
        let (id, z) = match (rec.get(0), rec.get(1)) {
            (Some(id), Some(z)) => (id, z),
            _ => return Err(Failure::input(format!("{}: expected subject_id,z rows", path.display()))),
        };
        let z: f64 = z
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| Failure::input(format!("{}: bad response `{z}`", path.display())))?;
        map.insert(id.to_string(), z);
    }
    ids.iter()
        .map(|id| {
            map.get(id)
                .copied()
                .ok_or_else(|| Failure::not_found(format!("no response for subject `{id}`")))
        })
        .collect()
}

fn cmd_regress(args: &RegressArgs) -> CliResult {
    let model = load(&args.model)?;
    let z = read_response(&args.response, &model.subject_ids)?;
    let fit = regress(&model, &z, args.r_use)?;
    let summary = fit.summary();
    eprintln!("score matrix condition number {:e}", summary.score_matrix_cond);
    if let Some(path) = &args.output {
        let file = RegressFile {
            schema: REGRESS_SCHEMA.to_string(),
            subject_ids: model.subject_ids.clone(),
            r_use: args.r_use,
            model: summary.clone(),
        };
        write_file(path, &to_json(&file)?)?;
    }
    let mut out = String::from("term,estimate\n");
    let _ = writeln!(out, "alpha,{}", format_f64(summary.alpha));
    for (r, b) in summary.beta_coeffs.iter().enumerate() {
        let _ = writeln!(out, "beta_{},{}", r + 1, format_f64(*b));
    }
    print!("{out}");
    Ok(())
}

fn read_matrix(path: &Path, k: usize) -> CliResult<DMatrix<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
        let row = rec
            .iter()
            .map(|s| s.parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect::<Option<Vec<f64>>>()
            .ok_or_else(|| Failure::input(format!("{}: non-numeric entry", path.display())))?;
        rows.push(row);
    }
    if rows.len() != k || rows.iter().any(|r| r.len() != k) {
        return Err(Failure::input(format!("{}: expected a {k}x{k} matrix", path.display())));
    }
    Ok(DMatrix::from_fn(k, k, |i, j| rows[i][j]))
}

fn cmd_factor(args: &FactorArgs) -> CliResult {
    let b = args.basis.as_deref().map(|p| read_matrix(p, args.k)).transpose()?;
    let model = load(&args.model)?;
    let fm = factor_model(&model, args.k, b.as_ref())?;
    let summary = fm.summary();
    if let Some(path) = &args.output {
        let file = FactorFile {
            schema: FACTOR_SCHEMA.to_string(),
            subject_ids: model.subject_ids.clone(),
            model: summary.clone(),
        };
        write_file(path, &to_json(&file)?)?;
    }
    let mut out = String::from("subject_id");
    for k in 1..=args.k {
        let _ = write!(out, ",L{k}");
    }
    out.push('\n');
    for (id, row) in model.subject_ids.iter().zip(&summary.loadings) {
        out.push_str(id);
        for v in row {
            let _ = write!(out, ",{}", format_f64(*v));
        }
        out.push('\n');
    }
    print!("{out}");
    Ok(())
}

/// Largest |⟨a_r, a_s⟩ − δ_rs| over the nonzero true vectors.
fn orthonormality_gap(cols: &[Vec<f64>]) -> f64 {
    let live: Vec<&Vec<f64>> = cols.iter().filter(|c| c.iter().any(|v| *v != 0.0)).collect();
    let mut gap: f64 = 0.0;
    for (r, u) in live.iter().enumerate() {
        for (s, v) in live.iter().enumerate() {
            let ip: f64 = u.iter().zip(v.iter()).map(|(x, y)| x * y).sum();
            gap = gap.max((ip - if r == s { 1.0 } else { 0.0 }).abs());
        }
    }
    gap
}

fn verify_truth(truth: &ScenarioTruth, scenario: SimScenario) -> CliResult {
    let gap = orthonormality_gap(&truth.true_vectors);
    if gap > VERIFY_TOL {
        return Err(Failure::numeric(format!("verify: loadings deviate from orthonormal by {gap:e}")));
    }
    if let SimScenario::Clustering = scenario {
        if truth.labels.as_ref().map_or(true, |l| l.len() != truth.n) {
            return Err(Failure::numeric("verify: missing cluster labels"));
        }
    }
    if let SimScenario::Regression = scenario {
        if truth.beta_coeffs.is_none() {
            return Err(Failure::numeric("verify: missing regression coefficients"));
        }
    }
    eprintln!("verify: ok (orthonormality gap {gap:e})");
    Ok(())
}

fn cmd_simulate(args: &SimulateArgs, seed: u64) -> CliResult {
    let (n, lo, hi) = (args.n, args.j_low, args.j_high);
    let (ds, truth, z) = match args.scenario {
        SimScenario::Completion => {
            let (ds, t) = gen_completion(n, lo, hi, args.homogeneous, seed)?;
            (ds, t, None)
        }
        SimScenario::Clustering => {
            let (ds, t) = gen_clustering(n, lo, hi, args.clusters, seed)?;
            (ds, t, None)
        }
        SimScenario::Regression => {
            let (ds, z, t) = gen_regression(n, lo, hi, false, seed)?;
            (ds, t, Some(z))
        }
        SimScenario::Factor => {
            let (ds, t) = gen_factor(n, lo, hi, seed)?;
            (ds, t, None)
        }
    };
    if args.verify {
        verify_truth(&truth, args.scenario)?;
    }
    let data_path = PathBuf::from(format!("{}_data.csv", args.out_prefix));
    with_path(&data_path, write_long_csv_file(&ds, &data_path))?;
    write_file(Path::new(&format!("{}_truth.json", args.out_prefix)), &truth_to_json(&truth)?)?;
    if let Some(z) = z {
        let mut out = String::from("subject_id,z\n");
        for (id, v) in ds.subject_ids().iter().zip(&z) {
            let _ = writeln!(out, "{id},{}", format_f64(*v));
        }
        write_file(Path::new(&format!("{}_z.csv", args.out_prefix)), &out)?;
    }
    eprintln!("wrote {} subjects to {}", ds.n(), data_path.display());
    Ok(())
}

fn parse_list<T: FromStr>(s: &str, what: &str) -> CliResult<Vec<T>> {
    s.split(',')
        .map(|x| x.trim().parse::<T>().map_err(|_| Failure::input(format!("bad {what} `{x}`"))))
        .collect()
}

fn parse_j_spec(s: &str) -> CliResult<(usize, usize)> {
    let (lo, hi) = s
        .trim()
        .split_once('-')
        .ok_or_else(|| Failure::input(format!("J spec `{s}` should look like 4-8")))?;
    match (lo.parse::<usize>(), hi.parse::<usize>()) {
        (Ok(lo), Ok(hi)) if lo >= 1 && lo <= hi => Ok((lo, hi)),
        _ => Err(Failure::input(format!("bad J spec `{s}`"))),
    }
}

fn cmd_bench(args: &BenchArgs, seed: u64) -> CliResult {
    let kind = ScenarioKind::parse(&args.scenario).ok_or_else(|| {
        Failure::input(format!(
            "unknown scenario `{}` (valid: hetero, homo, clustering, regression, factor)",
            args.scenario
        ))
    })?;
    let valid: Vec<&str> = Method::ALL.iter().map(|m| m.name()).collect();
    let methods = match &args.methods {
        None => Method::ALL.iter().copied().filter(|m| m.applies_to(kind)).collect(),
        Some(list) => list
            .split(',')
            .map(|s| {
                Method::parse(s.trim()).ok_or_else(|| {
                    Failure::input(format!("unknown method `{s}` (valid: {})", valid.join(", ")))
                })
            })
            .collect::<CliResult<Vec<Method>>>()?,
    };
    if !methods.iter().any(|m| m.applies_to(kind)) {
        return Err(Failure::input(format!("no selected method applies to scenario `{}`", kind.name())));
    }
    let ns: Vec<usize> = parse_list(&args.n_list, "n")?;
    let js = args
        .j_specs
        .split(',')
        .map(parse_j_spec)
        .collect::<CliResult<Vec<_>>>()?;
    let mut fit = FitConfig::default().with_rank(fsvd_core::simlab::TRUE_RANK);
    if let NuArg::Fixed(v) = args.nu {
        fit.nu = NuChoice::Fixed(v);
    }
    let cfg = BenchConfig {
        replicates: args.replicates,
        methods,
        seed,
        fit,
        em: EmConfig::default(),
        sequential: args.sequential,
    };

    let mut reports = Vec::new();
    for &n in &ns {
        for &(j_low, j_high) in &js {
            let spec = ScenarioSpec { kind, n, j_low, j_high };
            eprintln!("running {} n={n} J={j_low}-{j_high} x{}", kind.name(), cfg.replicates);
            reports.push(run_bench(&spec, &cfg)?);
        }
    }
    let rows: Vec<_> = reports.iter().flat_map(|r| r.rows.iter().cloned()).collect();
    if let Some(path) = &args.out {
        let f = fs::File::create(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
        with_path(path, write_report_csv(&rows, f))?;
    }
    if let Some(path) = &args.samples_out {
        let f = fs::File::create(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
        with_path(path, write_samples_csv(&reports, f))?;
    }
    print!("{}", format_table(&rows));
    let failed: usize = rows.iter().map(|r| r.failures).sum();
    if failed > 0 {
        eprintln!("{failed} metric evaluations failed; see the fail column");
    }
    if rows.iter().all(|r| r.failures == cfg.replicates) {
        return Err(Failure::numeric("every replicate failed"));
    }
    Ok(())
}

fn run(cli: &Cli) -> CliResult {
    match &cli.command {
        Command::Fit(a) => cmd_fit(a, cli.seed),
        Command::Complete(a) => cmd_complete(a),
        Command::Cluster(a) => cmd_cluster(a, cli.seed),
        Command::Regress(a) => cmd_regress(a),
        Command::Factor(a) => cmd_factor(a),
        Command::Simulate(a) => cmd_simulate(a, cli.seed),
        Command::Bench(a) => cmd_bench(a, cli.seed),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads == Some(0) {
        eprintln!("error: --threads must be at least 1");
        return ExitCode::from(EXIT_INPUT);
    }
    let result = with_threads(cli.threads, || run(&cli));
    let _ = io::stdout().flush();
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
