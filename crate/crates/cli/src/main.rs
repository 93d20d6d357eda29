//! `lightcone` — chart inspection, volume/variation reports, null-space
//! checks and the acceptance suite, as JSON reports.
//!
//! Exit codes: 0 success, 2 check failure, 1 usage/config error.
//! `LIGHTCONE_THREADS` caps the worker pool; reports are byte-identical
//! across runs for a fixed configuration.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use lightcone_core::chart::{ChartConfig, ImmersionChart};
use lightcone_core::frame::{build_frame, FrameReport};
use lightcone_core::functional::{
    bump, fd_derivative, grid_for_chart, node_diagnostics, variation_report, variational_fields,
    volume, volume_sweep, FdOrder, VariationSpec,
};
use lightcone_core::nullspace::{null_variation_volume, sample_checks, NullVariation};
use lightcone_core::verify::run_acceptance_filtered;
use lightcone_core::{Error as CoreError, Tolerances};

#[derive(Parser)]
#[command(
    name = "lightcone",
    about = "Spacelike hypersurfaces in the light-cone: duals, curvatures, volume variations, null-spaces",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ChartArgs {
    /// `builtin:<name>` (euclidean | hs_product | round_sphere) or a path to
    /// a chart config JSON file.
    #[arg(long)]
    chart: String,
    /// Builtin parameter n (intrinsic dimension is 2n for hs_product).
    #[arg(long)]
    n: Option<usize>,
    /// Parameter box as `a,b;c,d;...` (defaults to the chart's own box).
    #[arg(long = "box", allow_hyphen_values = true)]
    box_spec: Option<String>,
}

#[derive(Args, Clone)]
struct ReportArgs {
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Pointwise geometry at a parameter point: dual map, shape operator,
    /// curvatures, residuals.
    Frame {
        #[command(flatten)]
        chart: ChartArgs,
        /// Parameter point, comma separated.
        #[arg(long, allow_hyphen_values = true)]
        at: String,
        #[command(flatten)]
        report: ReportArgs,
    },
    /// Volume of the base immersion over a quadrature grid.
    Volume {
        #[command(flatten)]
        chart: ChartArgs,
        #[arg(long, default_value_t = 16)]
        order: usize,
        #[command(flatten)]
        report: ReportArgs,
    },
    /// Variation report: closed-form first/second variations against the
    /// finite-difference oracle, with optional Vol(t) sweep to CSV.
    Vary {
        #[command(flatten)]
        chart: ChartArgs,
        /// Variation profile: `const`, `coord:<i>`, `quad:<i>` or
        /// `poly:<c0,c1,...,cn>` (affine in the parameters).
        #[arg(long)]
        phi: String,
        /// Drive the family through the characteristic or the general
        /// evaluation path.
        #[arg(long, default_value = "characteristic")]
        kind: String,
        #[arg(long, default_value_t = 16)]
        order: usize,
        /// Half-width of the trusted t-interval.
        #[arg(long, default_value_t = 0.5)]
        eps: f64,
        /// Sample Vol(t) on `t0:t1:steps` and write CSV to --csv.
        #[arg(long, allow_hyphen_values = true)]
        sweep: Option<String>,
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Include per-node frame diagnostics in the report.
        #[arg(long)]
        verbose: bool,
        #[command(flatten)]
        report: ReportArgs,
    },
    /// Null-space checks: de Sitter/hyperbolic slices, degenerate kernel,
    /// or the volume-maximality theorem.
    Nullspace {
        #[command(flatten)]
        chart: ChartArgs,
        /// Fiber coordinates to sample, comma separated.
        #[arg(
            long = "t-samples",
            default_value = "-0.5,-0.25,0.1,0.25,0.5",
            allow_hyphen_values = true
        )]
        t_samples: String,
        /// One of slices | kernel | theorem.
        #[arg(long, default_value = "slices")]
        check: String,
        #[arg(long, default_value_t = 12)]
        order: usize,
        #[command(flatten)]
        report: ReportArgs,
    },
    /// Run the acceptance suite and emit a machine-readable summary.
    Verify {
        /// Restrict chart-parameterized criteria to charts matching this
        /// name (e.g. `builtin:euclidean`).
        #[arg(long)]
        chart: Option<String>,
        /// Accepted for symmetry with other subcommands; the built-in suite
        /// picks its own dimensions.
        #[arg(long)]
        n: Option<usize>,
        #[command(flatten)]
        report: ReportArgs,
    },
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("LIGHTCONE_THREADS") {
        match threads.parse::<usize>() {
            Ok(k) if k >= 1 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(k).build_global();
            }
            _ => {
                eprintln!("LIGHTCONE_THREADS must be a positive integer, got `{threads}`");
                return ExitCode::from(1);
            }
        }
    }
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap's exit code conventions differ from ours: usage errors
            // must exit 1 (help/version are still success).
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(classify(&e))
        }
    }
}

/// Usage and configuration problems exit 1; failed geometric checks exit 2.
fn classify(e: &CoreError) -> u8 {
    match e {
        CoreError::Config(_)
        | CoreError::Dimension { .. }
        | CoreError::Domain { .. }
        | CoreError::Spec(_) => 1,
        _ => 2,
    }
}

#[derive(Serialize)]
struct RunConfig {
    chart: String,
    n: usize,
    #[serde(rename = "box")]
    domain: Vec<[f64; 2]>,
    order: Option<usize>,
    eps: Option<f64>,
    threads: Option<usize>,
    tolerances: Tolerances,
}

impl RunConfig {
    fn new(chart: &ImmersionChart, order: Option<usize>, eps: Option<f64>, tol: &Tolerances) -> Self {
        Self {
            chart: chart.name.clone(),
            n: chart.n(),
            domain: chart.domain().iter().map(|(a, b)| [*a, *b]).collect(),
            order,
            eps,
            threads: std::env::var("LIGHTCONE_THREADS")
                .ok()
                .and_then(|v| v.parse().ok()),
            tolerances: tol.clone(),
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, CoreError> {
    let tol = Tolerances::default();
    match cli.command {
        Command::Frame { chart, at, report } => {
            let chart = load_chart(&chart)?;
            let x = parse_floats(&at)?;
            let frame = build_frame(&chart, &x, &tol)?;
            let fr = FrameReport::from(&frame);
            let ok = fr.residuals.pq_minus_one < tol.dual_tol
                && fr.residuals.qq < tol.dual_tol
                && fr.residuals.max_tangent < tol.dual_tol;
            let payload = json!({
                "command": "frame",
                "config": RunConfig::new(&chart, None, None, &tol),
                "frame": fr,
                "passed": ok,
            });
            emit(&payload, report.report.as_deref())?;
            Ok(check_code(ok))
        }
        Command::Volume { chart, order, report } => {
            let (chart, sub_box) = load_chart_and_box(&chart)?;
            let grid = grid_for_chart(&chart, sub_box.as_deref(), order)?;
            let v = volume(&chart, &grid, None, 0.0, &tol)?;
            let payload = json!({
                "command": "volume",
                "config": RunConfig::new(&chart, Some(order), None, &tol),
                "grid_box": grid.domain.iter().map(|(a, b)| [*a, *b]).collect::<Vec<_>>(),
                "nodes": grid.len(),
                "volume": v,
            });
            emit(&payload, report.report.as_deref())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Vary {
            chart,
            phi,
            kind,
            order,
            eps,
            sweep,
            csv,
            verbose,
            report,
        } => {
            let (chart, sub_box) = load_chart_and_box(&chart)?;
            let grid = grid_for_chart(&chart, sub_box.as_deref(), order)?;
            let phi0 = parse_phi(&phi, chart.n())?;
            let spec = build_spec(&chart, &grid.domain, phi0, &kind, eps, &tol)?;

            let rep = variation_report(&chart, &grid, &spec, &tol)?;
            let fields = variational_fields(&chart, &grid, &spec, &tol)?;

            let mut payload = json!({
                "command": "vary",
                "config": RunConfig::new(&chart, Some(order), Some(eps), &tol),
                "grid_box": grid.domain.iter().map(|(a, b)| [*a, *b]).collect::<Vec<_>>(),
                "phi": phi,
                "kind": kind,
                "report": rep,
                "max_off_dual_residual": fields.max_off_dual_residual,
            });
            if verbose {
                payload["nodes"] = serde_json::to_value(node_diagnostics(&chart, &grid, &tol)?)
                    .expect("diagnostics serialize");
            }
            if let Some(sweep_spec) = sweep {
                let csv_path = csv.ok_or_else(|| {
                    CoreError::Config("--sweep requires --csv <path> for the output".into())
                })?;
                let (t0, t1, steps) = parse_sweep(&sweep_spec)?;
                let rows = volume_sweep(&chart, &grid, &spec, t0, t1, steps, &tol)?;
                let mut out = String::from("t,volume\n");
                for (t, v) in &rows {
                    out.push_str(&format!("{t:.17e},{v:.17e}\n"));
                }
                std::fs::write(&csv_path, out)
                    .map_err(|e| CoreError::Config(format!("cannot write {csv_path:?}: {e}")))?;
                payload["sweep"] = json!({
                    "t0": t0, "t1": t1, "steps": steps,
                    "csv": csv_path.display().to_string(),
                });
            }
            emit(&payload, report.report.as_deref())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Nullspace {
            chart,
            t_samples,
            check,
            order,
            report,
        } => {
            let (chart, _sub) = load_chart_and_box(&chart)?;
            let ts = parse_floats(&t_samples)?;
            run_nullspace(&chart, &ts, &check, order, report.report.as_deref(), &tol)
        }
        Command::Verify { chart, n: _, report } => {
            let filter_store;
            let filter = match &chart {
                Some(c) => {
                    filter_store = c.strip_prefix("builtin:").unwrap_or(c).to_string();
                    Some(filter_store.as_str())
                }
                None => None,
            };
            let outcomes = run_acceptance_filtered(filter);
            for o in &outcomes {
                eprintln!("{}", o.line());
            }
            let all_green = outcomes.iter().all(|o| o.passed);
            let payload = json!({
                "command": "verify",
                "chart_filter": chart,
                "criteria": outcomes,
                "passed": all_green,
            });
            emit(&payload, report.report.as_deref())?;
            Ok(check_code(all_green))
        }
    }
}

fn run_nullspace(
    chart: &ImmersionChart,
    ts: &[f64],
    check: &str,
    order: usize,
    report: Option<&std::path::Path>,
    tol: &Tolerances,
) -> Result<ExitCode, CoreError> {
    let points = lightcone_core::chart::interior_samples(chart, 50, 0x7e57);
    let payload;
    let ok;
    match check {
        "slices" | "kernel" => {
            let checks = sample_checks(chart, ts, &points, tol)?;
            ok = if check == "slices" {
                checks.max_slice_residual < 1e-9
            } else {
                checks.max_kernel_residual < tol.kernel_tol
            };
            payload = json!({
                "command": "nullspace",
                "check": check,
                "config": RunConfig::new(chart, Some(order), None, tol),
                "t_samples": ts,
                "checks": checks,
                "passed": ok,
            });
        }
        "theorem" => {
            // Operational form of the volume-maximality theorem: scalar-flat
            // charts are stationary with nonpositive second variation for
            // variations inside the null-space; non-flat charts must witness
            // a nonzero first variation.
            let grid = grid_for_chart(chart, None, order)?;
            let max_abs_s = {
                let mut m: f64 = 0.0;
                for x in &points {
                    m = m.max(build_frame(chart, x, tol)?.scalar_curvature.abs());
                }
                m
            };
            let nv = NullVariation::lift(chart, |_| 1.0, 0.4);
            let vol_fn = |t: f64| null_variation_volume(chart, &nv, &grid, t, tol).unwrap_or(f64::NAN);
            let h = tol.fd_t_step * nv.t_half_width;
            let d1 = fd_derivative(&vol_fn, FdOrder::First, h)?;
            let d2 = fd_derivative(&vol_fn, FdOrder::Second, h)?;
            let flat = max_abs_s < tol.s_flat_tol;
            ok = if flat {
                d1.value.abs() < 1e-6 && d2.value <= 1e-6
            } else {
                d1.value.abs() > 1e-3
            };
            payload = json!({
                "command": "nullspace",
                "check": "theorem",
                "config": RunConfig::new(chart, Some(order), None, tol),
                "max_abs_scalar_curvature": max_abs_s,
                "scalar_flat": flat,
                "fd_d1": d1.value,
                "fd_d2": d2.value,
                "passed": ok,
            });
        }
        other => {
            return Err(CoreError::Config(format!(
                "unknown --check `{other}` (expected slices | kernel | theorem)"
            )))
        }
    }
    emit(&payload, report)?;
    Ok(check_code(ok))
}

fn check_code(ok: bool) -> ExitCode {
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}

fn load_chart(args: &ChartArgs) -> Result<ImmersionChart, CoreError> {
    Ok(load_chart_and_box(args)?.0)
}

type SubBox = Option<Vec<(f64, f64)>>;

/// A chart plus the optional quadrature sub-box from --box. For builtin
/// charts --box restricts integration; the chart keeps its default domain.
fn load_chart_and_box(args: &ChartArgs) -> Result<(ImmersionChart, SubBox), CoreError> {
    let sub_box = args.box_spec.as_deref().map(parse_box).transpose()?;
    if let Some(name) = args.chart.strip_prefix("builtin:") {
        let n = args.n.ok_or_else(|| {
            CoreError::Config("--n is required with builtin charts".into())
        })?;
        let chart = ImmersionChart::builtin(name, n)?;
        return Ok((chart, sub_box));
    }
    let text = std::fs::read_to_string(&args.chart)
        .map_err(|e| CoreError::Config(format!("cannot read chart config {}: {e}", args.chart)))?;
    let mut cfg: ChartConfig = serde_json::from_str(&text)
        .map_err(|e| CoreError::Config(format!("invalid chart config: {e}")))?;
    if let Some(n) = args.n {
        cfg.n = n;
    }
    Ok((ImmersionChart::from_config(&cfg)?, sub_box))
}

fn parse_floats(s: &str) -> Result<Vec<f64>, CoreError> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|e| CoreError::Config(format!("bad number `{p}`: {e}")))
        })
        .collect()
}

fn parse_box(s: &str) -> Result<Vec<(f64, f64)>, CoreError> {
    s.split(';')
        .map(|axis| {
            let parts = parse_floats(axis)?;
            if parts.len() != 2 || parts[0] >= parts[1] {
                return Err(CoreError::Config(format!(
                    "box axis `{axis}` must be `a,b` with a < b"
                )));
            }
            Ok((parts[0], parts[1]))
        })
        .collect()
}

fn parse_sweep(s: &str) -> Result<(f64, f64, usize), CoreError> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(CoreError::Config(format!(
            "sweep `{s}` must be t0:t1:steps"
        )));
    }
    let t0 = parts[0]
        .parse()
        .map_err(|e| CoreError::Config(format!("bad t0: {e}")))?;
    let t1 = parts[1]
        .parse()
        .map_err(|e| CoreError::Config(format!("bad t1: {e}")))?;
    let steps = parts[2]
        .parse()
        .map_err(|e| CoreError::Config(format!("bad steps: {e}")))?;
    Ok((t0, t1, steps))
}

type Phi0 = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

fn parse_phi(spec: &str, n: usize) -> Result<Phi0, CoreError> {
    if spec == "const" {
        return Ok(Arc::new(|_: &[f64]| 1.0));
    }
    if let Some(i) = spec.strip_prefix("coord:") {
        let i: usize = i
            .parse()
            .map_err(|e| CoreError::Config(format!("bad coordinate index: {e}")))?;
        if i >= n {
            return Err(CoreError::Config(format!(
                "coord:{i} out of range for n = {n}"
            )));
        }
        return Ok(Arc::new(move |x: &[f64]| x[i]));
    }
    if let Some(i) = spec.strip_prefix("quad:") {
        let i: usize = i
            .parse()
            .map_err(|e| CoreError::Config(format!("bad coordinate index: {e}")))?;
        if i >= n {
            return Err(CoreError::Config(format!(
                "quad:{i} out of range for n = {n}"
            )));
        }
        return Ok(Arc::new(move |x: &[f64]| x[i] * x[i]));
    }
    if let Some(coeffs) = spec.strip_prefix("poly:") {
        let c = parse_floats(coeffs)?;
        if c.len() != n + 1 {
            return Err(CoreError::Config(format!(
                "poly profile needs {} coefficients (c0 plus one per axis), got {}",
                n + 1,
                c.len()
            )));
        }
        return Ok(Arc::new(move |x: &[f64]| {
            c[0] + x.iter().zip(&c[1..]).map(|(xi, ci)| xi * ci).sum::<f64>()
        }));
    }
    Err(CoreError::Config(format!(
        "unknown phi profile `{spec}` (expected const | coord:<i> | quad:<i> | poly:<c0,...>)"
    )))
}

fn build_spec(
    chart: &ImmersionChart,
    window: &[(f64, f64)],
    phi0: Phi0,
    kind: &str,
    eps: f64,
    tol: &Tolerances,
) -> Result<VariationSpec, CoreError> {
    match kind {
        "characteristic" => {
            let p = Arc::clone(&phi0);
            Ok(VariationSpec::admissible_lift(
                window,
                move |x: &[f64]| p(x),
                eps,
            ))
        }
        "general" => {
            // Same family, but supplied as a raw F(t,x) so the general
            // extraction path (Richardson in t) is exercised.
            let chart = chart.clone();
            let window = window.to_vec();
            let tol = tol.clone();
            let p = Arc::clone(&phi0);
            Ok(VariationSpec::general(
                move |t, x: &[f64]| {
                    let jet = chart.eval_jet2(x)?;
                    let q = lightcone_core::frame::dual_map(&jet, &tol)?;
                    let c = t * p(x) * bump(&window, x);
                    Ok(jet.value.axpy(c, &q))
                },
                eps,
            ))
        }
        other => Err(CoreError::Config(format!(
            "unknown --kind `{other}` (expected characteristic | general)"
        ))),
    }
}

fn emit(payload: &serde_json::Value, path: Option<&std::path::Path>) -> Result<(), CoreError> {
    let text = serde_json::to_string_pretty(payload).expect("report serializes");
    match path {
        Some(p) => std::fs::write(p, text + "\n")
            .map_err(|e| CoreError::Config(format!("cannot write report {p:?}: {e}"))),
        None => {
            let mut out = std::io::stdout().lock();
            writeln!(out, "{text}").map_err(|e| CoreError::Config(format!("stdout: {e}")))
        }
    }
}
