//! Command-line front end.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;
use weylscope_core::catalog::{catalog_get, list_catalog, CatalogEntry};
use weylscope_core::geometry::ChartPoint;
use weylscope_core::pipeline::PipelineOptions;
use weylscope_core::weyl::{Orientation, DEFAULT_GAP_TOL};

use crate::analysis::{analysis_report, records_csv, scan_points, with_threads};
use crate::error::{Failure, Result};
use crate::metric_file::resolve_metric;
use crate::report::{emit, nums, to_json, MetricDescriptor, Num, SCHEMA, TOOL};
use crate::suites::{verify, SuiteParams, DEFAULT_POINTS};

#[derive(Debug, Parser)]
#[command(
    name = "weylscope",
    version,
    about = "Curvature laboratory for oriented Riemannian 4-manifolds on coordinate charts"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Full analysis at a single point.
    Analyze(AnalyzeArgs),
    /// Analysis over a grid or random sample of the chart.
    Scan(ScanArgs),
    /// Run verification suites.
    Verify(VerifyArgs),
    /// List the built-in metrics.
    Catalog(CatalogArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum OrientationArg {
    Standard,
    Reversed,
}

impl From<OrientationArg> for Orientation {
    fn from(o: OrientationArg) -> Self {
        match o {
            OrientationArg::Standard => Orientation::Standard,
            OrientationArg::Reversed => Orientation::Reversed,
        }
    }
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    /// Orientation of the chart (reversed swaps Λ⁺ and Λ⁻).
    #[arg(long, value_enum, default_value = "standard")]
    pub orientation: OrientationArg,
    /// Relative spectral gap below which the top eigenvalue counts as degenerate.
    #[arg(long, default_value_t = DEFAULT_GAP_TOL)]
    pub gap_tol: f64,
    /// Relative band around β = 0 classified as a zero determinant.
    #[arg(long, default_value_t = 1e-9)]
    pub det_tol: f64,
    /// Kähler residual allowed for the conformally-Kähler verdict.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
}

impl PipelineArgs {
    fn options(&self) -> PipelineOptions {
        PipelineOptions {
            gap_tol: self.gap_tol,
            det_tol: self.det_tol,
            orientation: self.orientation.into(),
        }
    }

    fn parameters(&self) -> serde_json::Value {
        json!({
            "orientation": Orientation::from(self.orientation).as_str(),
            "gap_tol": Num(self.gap_tol),
            "det_tol": Num(self.det_tol),
            "tol": Num(self.tol),
        })
    }
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Catalog name (e.g. `fs_perturbed:0.05:7`) or path to a metric JSON file.
    #[arg(long)]
    pub metric: String,
    /// Chart point as four comma-separated coordinates.
    #[arg(long, allow_hyphen_values = true)]
    pub point: String,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("points").required(true).args(["grid", "random"])))]
pub struct ScanArgs {
    #[arg(long)]
    pub metric: String,
    /// Grid points per axis (n⁴ points, x3 fastest).
    #[arg(long)]
    pub grid: Option<usize>,
    /// Number of uniformly random points.
    #[arg(long)]
    pub random: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Distance kept from the edges of the sampling box.
    #[arg(long, default_value_t = 1e-3)]
    pub margin: f64,
    /// Abort with the exit code of the first failing point.
    #[arg(long)]
    pub strict: bool,
    #[arg(long, env = "WEYLSCOPE_THREADS")]
    pub threads: Option<usize>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// einstein, weighted, weitzenboeck, lemmas, oracle, quadrature, pipeline, roundtrip or all.
    #[arg(long)]
    pub suite: String,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Samples for the oracle and quadrature suites.
    #[arg(long)]
    pub samples: Option<u64>,
    /// Replaces each suite's primary tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Replaces each suite's default metrics.
    #[arg(long)]
    pub metric: Option<String>,
    /// Points per metric for pointwise suites.
    #[arg(long, default_value_t = DEFAULT_POINTS)]
    pub points: usize,
    #[arg(long, env = "WEYLSCOPE_THREADS")]
    pub threads: Option<usize>,
    #[arg(long, value_enum, default_value = "standard")]
    pub orientation: OrientationArg,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CatalogArgs {
    /// Machine-readable listing.
    #[arg(long)]
    pub json: bool,
    /// Show a single entry (parameters allowed, e.g. `s2xs2_unequal:1:3`).
    #[arg(long)]
    pub name: Option<String>,
}

fn default_threads(requested: Option<usize>) -> usize {
    requested
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn parse_point(text: &str) -> Result<ChartPoint> {
    let coords: Vec<f64> = text
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Failure::Input(format!("--point `{text}`: {e}")))?;
    let x: [f64; 4] = coords.try_into().map_err(|v: Vec<f64>| {
        Failure::Input(format!("--point needs 4 coordinates, got {}", v.len()))
    })?;
    Ok(ChartPoint::new(x)?)
}

fn render(report: &crate::analysis::AnalysisReport, format: Format) -> Result<String> {
    match format {
        Format::Json => Ok(to_json(report)),
        Format::Csv => records_csv(&report.records),
    }
}

fn analyze(a: &AnalyzeArgs) -> Result<()> {
    let resolved = resolve_metric(&a.metric)?;
    let p = parse_point(&a.point)?;
    if !resolved.metric.domain().contains(&p) {
        return Err(Failure::Input(format!(
            "point {:?} lies outside the chart domain of `{}`",
            p.0, a.metric
        )));
    }
    let opts = a.pipeline.options();
    let outcome = scan_points(resolved.metric.clone(), &[p], &opts, a.pipeline.tol);
    if let Some(f) = outcome.failures.first() {
        return Err(if f.kind == "math-domain" {
            Failure::Math(f.error.clone())
        } else {
            Failure::Input(f.error.clone())
        });
    }
    let mut params = a.pipeline.parameters();
    params["point"] = json!(nums(p.0));
    let report = analysis_report(
        "analyze",
        MetricDescriptor::new(&resolved),
        &opts,
        params,
        outcome,
    );
    emit(&render(&report, a.format)?, a.out.as_deref())
}

fn scan(a: &ScanArgs) -> Result<()> {
    let resolved = resolve_metric(&a.metric)?;
    if a.margin.is_nan() || a.margin < 0.0 {
        return Err(Failure::Input(format!(
            "--margin must be non-negative, got {}",
            a.margin
        )));
    }
    let domain = resolved.metric.domain();
    let b = domain.sampling_bounds();
    if b.iter().any(|[lo, hi]| hi - lo <= 2.0 * a.margin) {
        return Err(Failure::Input(format!(
            "--margin {} leaves no room in the sampling box",
            a.margin
        )));
    }
    let (points, mode) = match (a.grid, a.random) {
        (Some(n), _) => (domain.grid(n, a.margin), json!({ "grid": n })),
        (_, Some(n)) => (
            domain.random_points(n, a.seed, a.margin),
            json!({ "random": n, "seed": a.seed }),
        ),
        _ => unreachable!("clap requires --grid or --random"),
    };
    let opts = a.pipeline.options();
    let metric = resolved.metric.clone();
    let outcome = with_threads(default_threads(a.threads), || {
        scan_points(metric, &points, &opts, a.pipeline.tol)
    })?;
    let strict_failure = a
        .strict
        .then(|| outcome.failures.first().cloned())
        .flatten();
    let mut params = a.pipeline.parameters();
    params["points"] = mode;
    params["margin"] = json!(Num(a.margin));
    params["strict"] = json!(a.strict);
    let report = analysis_report(
        "scan",
        MetricDescriptor::new(&resolved),
        &opts,
        params,
        outcome,
    );
    emit(&render(&report, a.format)?, a.out.as_deref())?;
    match strict_failure {
        Some(f) if f.kind == "math-domain" => {
            Err(Failure::Math(format!("point {}: {}", f.index, f.error)))
        }
        Some(f) => Err(Failure::Input(format!("point {}: {}", f.index, f.error))),
        None => Ok(()),
    }
}

fn run_verify(a: &VerifyArgs) -> Result<()> {
    let params = SuiteParams {
        seed: a.seed,
        samples: a.samples,
        tol: a.tol,
        metric: a.metric.clone(),
        points: a.points,
        orientation: a.orientation.into(),
    };
    let report = with_threads(default_threads(a.threads), || verify(&a.suite, &params))??;
    emit(&to_json(&report), a.out.as_deref())?;
    if report.pass {
        return Ok(());
    }
    let first = report.suites.iter().find_map(|s| s.counterexample.as_ref());
    Err(Failure::Check(match first {
        Some(c) => format!(
            "verification failed: {}{}",
            c.check,
            c.error
                .as_deref()
                .map(|e| format!(" ({e})"))
                .unwrap_or_default()
        ),
        None => "verification failed".to_string(),
    }))
}

#[derive(Serialize)]
struct CatalogRow {
    name: String,
    coverage: &'static str,
    provenance: &'static str,
    source: Vec<String>,
    s: Option<Num>,
    wplus: Option<[Num; 3]>,
    einstein: Option<Num>,
    kahler: bool,
    det_sign: &'static str,
}

impl CatalogRow {
    fn new(e: &CatalogEntry) -> CatalogRow {
        CatalogRow {
            name: e.name.clone(),
            coverage: e.coverage,
            provenance: e.metric.provenance().as_str(),
            source: e.metric.source_text().to_vec(),
            s: e.truth.s.map(Num),
            wplus: e.truth.wplus.map(nums),
            einstein: e.truth.einstein.map(Num),
            kahler: e.truth.kahler,
            det_sign: e.truth.det_sign.as_str(),
        }
    }
}

fn catalog(a: &CatalogArgs) -> Result<()> {
    let entries = match &a.name {
        Some(n) => vec![catalog_get(n).map_err(|e| Failure::Input(e.to_string()))?],
        None => list_catalog()?,
    };
    let rows: Vec<CatalogRow> = entries.iter().map(CatalogRow::new).collect();
    let text = if a.json {
        to_json(&json!({ "schema": SCHEMA, "tool": TOOL, "command": "catalog", "entries": rows }))
    } else {
        let opt = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v}"));
        let mut out = format!(
            "{:<24} {:>6} {:<24} {:>8} {:<6} {:<10} {}\n",
            "name", "s", "W+ eigenvalues", "einstein", "kahler", "det W+", "coverage"
        );
        for e in &entries {
            let w = e.truth.wplus.map_or("-".to_string(), |w| {
                w.iter()
                    .map(|v| format!("{:.4}", v))
                    .collect::<Vec<_>>()
                    .join(", ")
            });
            out.push_str(&format!(
                "{:<24} {:>6} {:<24} {:>8} {:<6} {:<10} {}\n",
                e.name,
                opt(e.truth.s),
                w,
                opt(e.truth.einstein),
                if e.truth.kahler { "yes" } else { "no" },
                e.truth.det_sign.as_str(),
                e.coverage
            ));
        }
        out
    };
    emit(&text, None)
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Analyze(a) => analyze(a),
        Command::Scan(a) => scan(a),
        Command::Verify(a) => run_verify(a),
        Command::Catalog(a) => catalog(a),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
