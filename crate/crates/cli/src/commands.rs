use std::fmt::Write as _;

use bhflow_core::bihermitian::{self, IdentityCheck};
use bhflow_core::ellcurve;
use bhflow_core::flow;
use bhflow_core::sampling::random_points;
use bhflow_core::{ChartPoint, DelPezzo, Error, C64};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::CliError;

pub const REPORT_SCHEMA: &str = "bhflow-report/1";
pub const GRID_SCHEMA: &str = "bhflow-grid/1";

pub const GRID_COLUMNS: [&str; 10] = [
    "re_z1",
    "im_z1",
    "re_z2",
    "im_z2",
    "section_norm_sq",
    "f",
    "p",
    "g_min_eigenvalue",
    "phi_norm_sq",
    "rho_sq",
];

/// Result of a command: the document to write and whether it passed.
pub struct Outcome {
    pub body: String,
    pub pass: bool,
}

fn core(e: Error) -> CliError {
    CliError::Failed(e.to_string())
}

fn environment(cfg: &RunConfig, dp: &DelPezzo, t: &[f64]) -> Value {
    json!({
        "surface": cfg.surface,
        "section_sha256": dp.section.digest(),
        "metric": cfg.metric,
        "chart_radius": cfg.chart_radius,
        "t": t,
        "samples": cfg.samples,
        "seed": cfg.seed,
        "integrator": cfg.integrator,
        "tolerances": cfg.tolerances,
    })
}

fn report(command: &str, env: Value, body: Value, pass: bool) -> Outcome {
    let mut doc = json!({
        "schema": REPORT_SCHEMA,
        "command": command,
        "environment": env,
        "pass": pass,
    });
    if let (Value::Object(d), Value::Object(b)) = (&mut doc, body) {
        d.extend(b);
    }
    let mut text = serde_json::to_string_pretty(&doc).expect("report serializes");
    text.push('\n');
    Outcome { body: text, pass }
}

fn sample_points(cfg: &RunConfig, dp: &DelPezzo) -> Result<Vec<ChartPoint>, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    random_points(dp, &mut rng, cfg.samples, cfg.min_section_norm).map_err(core)
}

#[derive(Default, Serialize)]
struct FlowChecks {
    f_conservation: f64,
    omega_preservation: f64,
    group_law: f64,
}

fn flow_checks(dp: &DelPezzo, p: &ChartPoint, t: f64, cfg: &RunConfig) -> Result<FlowChecks, Error> {
    let ic = &cfg.integrator;
    let whole = flow::flow(dp, p, t, ic)?;
    let half = flow::flow(dp, p, 0.5 * t, ic)?;
    let twice = flow::flow(dp, &half.point, 0.5 * t, ic)?;
    let twice = flow::same_chart(dp, &twice.point, &whole.point)?;
    let omega = dp.holomorphic_symplectic(p)?.re();
    let omega_preservation = match flow::pullback_holsymp(dp, &whole, flow::NEAR_CURVE_CUTOFF) {
        Ok(w) => (w.re() - omega).norm() / omega.norm().max(1.0),
        Err(_) => 0.0,
    };
    Ok(FlowChecks {
        f_conservation: (dp.potential(&whole.point)? - dp.potential(p)?).abs(),
        omega_preservation,
        group_law: (twice.z - whole.point.z).norm(),
    })
}

pub fn verify(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let dp = cfg.surface()?;
    let points = sample_points(cfg, &dp)?;
    let tol = cfg.tolerances;
    let jobs: Vec<(f64, &ChartPoint)> = cfg.t.iter().flat_map(|&t| points.iter().map(move |p| (t, p))).collect();
    let results: Vec<Result<(bihermitian::VerificationReport, FlowChecks, bool), Error>> = jobs
        .par_iter()
        .map(|&(t, p)| {
            let d = bihermitian::assemble(&dp, p, t, &cfg.integrator)?;
            let omega_ref = d.omega_ref.ok_or(Error::OnAnticanonicalCurve)?;
            let r = bihermitian::verify_identities(&d, &omega_ref, &tol)?;
            Ok((r, flow_checks(&dp, p, t, cfg)?, d.valid))
        })
        .collect();
    let mut reports = Vec::new();
    let mut worst = FlowChecks::default();
    let mut invalid = 0usize;
    let mut errors = Vec::new();
    for (k, r) in results.into_iter().enumerate() {
        match r {
            Ok((rep, fc, valid)) => {
                reports.push(rep);
                worst.f_conservation = worst.f_conservation.max(fc.f_conservation);
                worst.omega_preservation = worst.omega_preservation.max(fc.omega_preservation);
                worst.group_law = worst.group_law.max(fc.group_law);
                invalid += usize::from(!valid);
            }
            Err(e) => errors.push(json!({"job": k, "t": jobs[k].0, "error": e.to_string()})),
        }
    }
    let mut summary = bihermitian::summarize(&reports, &tol);
    for (name, value) in [
        ("f_conservation", worst.f_conservation),
        ("omega_preservation", worst.omega_preservation),
        ("group_law", worst.group_law),
    ] {
        summary.checks.push(IdentityCheck {
            name: name.into(),
            max_residual: value,
            tolerance: tol.flow,
            pass: value <= tol.flow,
        });
    }
    summary.checks.push(IdentityCheck {
        name: "positive_metric".into(),
        max_residual: invalid as f64,
        tolerance: 0.0,
        pass: invalid == 0,
    });
    let pass = errors.is_empty() && summary.checks.iter().all(|c| c.pass);
    let body = json!({
        "checks": summary.checks,
        "ratio_constant": summary.ratio_constant,
        "points_checked": reports.len(),
        "errors": errors,
    });
    Ok(report("verify", environment(cfg, &dp, &cfg.t), body, pass))
}

pub fn scan(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let dp = cfg.surface()?;
    let points = sample_points(cfg, &dp)?;
    let r = bihermitian::positivity_scan(&dp, &points, &cfg.t_grid, &cfg.integrator);
    let pass = r.t_max > 0.0;
    let body = json!({
        "t_max": r.t_max,
        "first_failure": r.first_failure,
        "failure_count": r.failures.len(),
    });
    Ok(report("scan", environment(cfg, &dp, &cfg.t_grid), body, pass))
}

fn first_t(cfg: &RunConfig) -> Result<f64, CliError> {
    cfg.t.first().copied().ok_or_else(|| CliError::Usage("field `t` is empty".into()))
}

fn grid_row(dp: &DelPezzo, p: &ChartPoint, t: f64, cfg: &RunConfig) -> [f64; 10] {
    let nan = f64::NAN;
    let norm_sq = dp.section_norm_sq(p).unwrap_or(nan);
    let head = [p.z[0].re, p.z[0].im, p.z[1].re, p.z[1].im, norm_sq, norm_sq.ln()];
    let tail = match bihermitian::assemble(dp, p, t, &cfg.integrator) {
        Ok(d) => [
            d.p,
            d.g.min_eigenvalue(),
            d.norm_phi_sq.unwrap_or(nan),
            d.rho.wedge(&d.rho).re,
        ],
        Err(_) => [nan; 4],
    };
    let mut row = [0.0; 10];
    row[..6].copy_from_slice(&head);
    row[6..].copy_from_slice(&tail);
    row
}

pub fn export(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let dp = cfg.surface()?;
    let t = first_t(cfg)?;
    let n = cfg.grid;
    if n == 0 {
        return Err(CliError::Usage("grid size must be positive".into()));
    }
    let r = cfg.chart_radius;
    let coord = |k: usize| if n == 1 { 0.0 } else { -r + 2.0 * r * k as f64 / (n - 1) as f64 };
    let points: Vec<ChartPoint> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| ChartPoint::new(cfg.chart, C64::new(coord(i), 0.0), C64::new(coord(j), 0.0)))
        .collect();
    let rows: Vec<[f64; 10]> = points.par_iter().map(|p| grid_row(&dp, p, t, cfg)).collect();
    let mut out = String::new();
    writeln!(out, "# {GRID_SCHEMA} surface={} chart={} t={t:e}", cfg.surface.name(), cfg.chart).unwrap();
    writeln!(out, "{}", GRID_COLUMNS.join(",")).unwrap();
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.17e}")).collect();
        writeln!(out, "{}", cells.join(",")).unwrap();
    }
    Ok(Outcome { body: out, pass: true })
}

/// Acceptance thresholds for the translation diagnostics.
const TANGENCY_TOL: f64 = 1e-10;
const ETA_TOL: f64 = 1e-8;
const DISPLACEMENT_TOL: f64 = 1e-6;
const DRIFT_TOL: f64 = 1e-8;

pub fn curve(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let dp = cfg.surface()?;
    let t = first_t(cfg)?;
    let start = ellcurve::locate_curve(&dp, &cfg.curve.seed.to_point()).map_err(core)?;
    let samples = ellcurve::sample_curve(&dp, &start, cfg.curve.samples).map_err(core)?;
    let r = ellcurve::translation_diagnostics(&dp, &samples, t, &cfg.integrator).map_err(core)?;
    let eta_dev = r.eta_deviation(C64::new(-1.0, 0.0));
    let disp_dev = r.displacement_deviation(C64::new(-t, 0.0));
    let pass = r.max_tangency() <= TANGENCY_TOL
        && eta_dev <= ETA_TOL
        && disp_dev <= DISPLACEMENT_TOL
        && r.max_spread <= DISPLACEMENT_TOL
        && r.max_drift <= DRIFT_TOL;
    let body = json!({
        "curve": {
            "samples": samples.len(),
            "max_tangency": r.max_tangency(),
            "eta_deviation": eta_dev,
            "displacement_deviation": disp_dev,
            "diagnostics": r,
        }
    });
    Ok(report("curve", environment(cfg, &dp, &[t]), body, pass))
}

pub fn limit(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let dp = cfg.surface()?;
    if cfg.t_sequence.len() < 3 {
        return Err(CliError::Usage(format!(
            "limit needs at least 3 times for a rate estimate, got {}",
            cfg.t_sequence.len()
        )));
    }
    let p0 = cfg.point.to_point();
    let table = bihermitian::limit_check(&dp, &p0, &cfg.t_sequence, &cfg.integrator).map_err(|e| match e {
        Error::Precondition(m) => CliError::Usage(m),
        e => core(e),
    })?;
    let pass = table.pass;
    let body = json!({ "point": cfg.point, "limit": table });
    Ok(report("limit", environment(cfg, &dp, &cfg.t_sequence), body, pass))
}
