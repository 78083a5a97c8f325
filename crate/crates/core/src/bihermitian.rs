//! The bihermitian package `(g, I⁺, I⁻)` at a point and time `t`, and
//! numerical verifiers for the identities it satisfies.
//!
//! Normalization: `ω⁺ := (ω'')^{1,1} = ρ^{1,1}` with no extra factor, and
//! `g(v,u) = ω⁺(v, I⁺u)`. With this choice
//!
//! ```text
//! φ'' = −2ω⁺ + 2pω⁻,   φ' = 2ω⁻ − 2pω⁺,   ‖φ‖² = 4(1 − p²),
//! (φ − iφ')/(2‖φ‖²) = ¼(ω + iω'),
//! ω'' − ω' = (ω⁺ + ω⁻)/(1 + p),   ρ∧ρ = 2 ω⁺∧ω⁺/(1 + p).
//! ```

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{self, FlowState, NEAR_CURVE_CUTOFF};
use crate::geom::{
    angle_p, commutator, conjugate_structure, metric_from_form, quaternion_package, real_basis, ComplexStructure,
    PointMetric, Tangent, TwoForm, C64,
};
use crate::ode::IntegratorConfig;
use crate::quadrature;
use crate::surface::{ChartPoint, DelPezzo, SurfaceKind};

/// Expected `c` in `(φ − iφ')/(2‖φ‖²) = c(ω + iω')`.
pub const RATIO_CONSTANT: f64 = 0.25;

/// Minimum `‖σ‖` at which the direct and accumulated paths are compared.
pub const TWO_PATH_MIN_NORM: f64 = 1e-2;

#[derive(Clone, Debug)]
pub struct BihermitianData {
    pub start: ChartPoint,
    pub t: f64,
    pub state: FlowState,
    /// `‖σ‖` at the start point.
    pub section_norm: f64,
    /// `ω + iω'` at the start point, `None` on the curve.
    pub omega_ref: Option<TwoForm>,
    /// `ω'' = ω' + ρ`, `None` on the curve.
    pub omega2: Option<TwoForm>,
    /// `Im φ_t*(σ⁻¹)` when the endpoint is far enough from the curve.
    pub omega2_direct: Option<TwoForm>,
    pub rho: TwoForm,
    pub omega_plus: TwoForm,
    pub g: PointMetric,
    pub i_minus: ComplexStructure,
    pub p: f64,
    pub phi: TwoForm,
    pub phi1: TwoForm,
    pub phi2: TwoForm,
    /// `None` when `g` is singular.
    pub norm_phi_sq: Option<f64>,
    /// `g` positive definite and hermitian for both structures.
    pub valid: bool,
}

impl BihermitianData {
    /// `ω⁻(v,w) = g(I⁻v, w)`.
    pub fn omega_minus(&self) -> TwoForm {
        self.g.hermitian_form(&self.i_minus)
    }
}

fn phi_forms(ip: &ComplexStructure, im: &ComplexStructure, g: &PointMetric) -> (TwoForm, TwoForm, TwoForm) {
    let cm = commutator(ip, im).real_matrix();
    let form = |m: nalgebra::Matrix4<f64>| TwoForm::from_real_matrix_f64(&(m.transpose() * g.gram));
    (
        form(cm),
        form(cm * ip.op().real_matrix()),
        form(cm * im.op().real_matrix()),
    )
}

pub fn assemble(dp: &DelPezzo, p0: &ChartPoint, t: f64, cfg: &IntegratorConfig) -> Result<BihermitianData> {
    let state = flow::flow(dp, p0, t, cfg)?;
    from_state(dp, state)
}

/// Builds the package from a finished flow.
pub fn from_state(dp: &DelPezzo, state: FlowState) -> Result<BihermitianData> {
    let start = state.start;
    let section_norm = dp.section_norm(&start)?;
    let omega_ref = dp.holomorphic_symplectic(&start).ok();
    let rho = state.rho;
    let omega2 = omega_ref.map(|w| w.im() + rho);
    let omega2_direct = flow::pullback_holsymp(dp, &state, NEAR_CURVE_CUTOFF).ok().map(|w| w.im());
    let omega_plus = rho.p11().re();
    let ip = ComplexStructure::standard();
    let g = metric_from_form(&omega_plus, &ip)?;
    let i_minus = conjugate_structure(&ip, &state.jacobian)?;

    let package = if g.is_positive_definite() {
        quaternion_package(&ip, &i_minus, &g).ok()
    } else {
        None
    };
    let valid = package.is_some();
    let (p, phi, phi1, phi2, norm_phi_sq) = match package {
        Some(q) => (q.p, q.phi, q.phi1, q.phi2, Some(q.norm_phi_sq)),
        None => {
            let (phi, phi1, phi2) = phi_forms(&ip, &i_minus, &g);
            let norm = g.gram.try_inverse().map(|ginv| {
                let cm = commutator(&ip, &i_minus).real_matrix();
                0.25 * (ginv * cm.transpose() * g.gram * cm).trace()
            });
            (angle_p(&ip, &i_minus), phi, phi1, phi2, norm)
        }
    };
    Ok(BihermitianData {
        start,
        t: state.t,
        state,
        section_norm,
        omega_ref,
        omega2,
        omega2_direct,
        rho,
        omega_plus,
        g,
        i_minus,
        p,
        phi,
        phi1,
        phi2,
        norm_phi_sq,
        valid,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Pointwise identities (φ expansions, the ratio, the `ρ` identities).
    pub identity: f64,
    /// `‖φ‖² = 4(1 − p²)`.
    pub norm: f64,
    /// Decomposability, relative to `ω∧ω`.
    pub decomposable: f64,
    /// `g` hermitian for `I⁺` and `I⁻`.
    pub compatibility: f64,
    /// Direct pullback vs accumulated `ρ`.
    pub two_path: f64,
    /// Relative spread of the ratio constant across points.
    pub ratio_spread: f64,
    /// Flow invariants: conservation of `f`, of `ω`, and the group law.
    pub flow: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            identity: 1e-7,
            norm: 1e-9,
            decomposable: 1e-9,
            compatibility: 1e-7,
            two_path: 1e-6,
            ratio_spread: 1e-6,
            flow: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub name: String,
    pub max_residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl IdentityCheck {
    fn new(name: &str, residual: f64, tolerance: f64) -> Self {
        Self {
            name: name.to_string(),
            max_residual: residual,
            tolerance,
            pass: residual <= tolerance,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub checks: Vec<IdentityCheck>,
    /// Measured `c` in `(φ − iφ')/(2‖φ‖²) = c(ω + iω')`, as `[re, im]`.
    pub ratio_constant: [f64; 2],
    pub pass: bool,
}

impl VerificationReport {
    pub fn check(&self, name: &str) -> Option<&IdentityCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &IdentityCheck> {
        self.checks.iter().filter(|c| !c.pass)
    }
}

fn rel(diff: f64, scale: f64) -> f64 {
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

pub fn verify_identities(d: &BihermitianData, omega_ref: &TwoForm, tol: &Tolerances) -> Result<VerificationReport> {
    if !(d.t > 0.0) {
        return Err(Error::Precondition(format!("verification needs t > 0, got {}", d.t)));
    }
    if d.section_norm == 0.0 {
        return Err(Error::OnAnticanonicalCurve);
    }
    if (1.0 - d.p.abs()) < 1e-12 {
        return Err(Error::Precondition(format!("p = {} is ±1", d.p)));
    }
    let norm_sq = d.norm_phi_sq.ok_or(Error::DegenerateMetric)?;
    let p = d.p;
    let omega_minus = d.omega_minus();
    let omega_plus = d.omega_plus;
    let omega = omega_ref.re();
    let omega1 = omega_ref.im();
    let omega2 = omega1 + d.rho;
    let mut checks = Vec::new();

    let e2 = (d.phi2 - (omega_plus * -2.0 + omega_minus * (2.0 * p))).norm();
    checks.push(IdentityCheck::new("phi2_expansion", e2, tol.identity));
    let e1 = (d.phi1 - (omega_minus * 2.0 - omega_plus * (2.0 * p))).norm();
    checks.push(IdentityCheck::new("phi1_expansion", e1, tol.identity));
    checks.push(IdentityCheck::new("norm_phi", (norm_sq - 4.0 * (1.0 - p * p)).abs(), tol.norm));

    let ratio = (d.phi - d.phi1 * C64::i()) * (0.5 / norm_sq);
    let target = omega + omega1 * C64::i();
    let c = inner(&target, &ratio) / inner(&target, &target);
    let prop = rel((ratio - target * c).norm(), ratio.norm());
    checks.push(IdentityCheck::new("ratio_proportional", prop, tol.identity));
    checks.push(IdentityCheck::new("ratio_constant", (c - RATIO_CONSTANT).norm(), tol.identity));

    let drho = (d.rho - (omega_plus + omega_minus) * (1.0 / (1.0 + p))).norm();
    checks.push(IdentityCheck::new("rho_decomposition", drho, tol.identity));
    let rho_sq = d.rho.wedge(&d.rho);
    let rhs = omega_plus.wedge(&omega_plus) * (2.0 / (1.0 + p));
    checks.push(IdentityCheck::new(
        "rho_square",
        rel((rho_sq - rhs).norm(), rho_sq.norm().max(rhs.norm())),
        tol.identity,
    ));

    let vol = omega.wedge(&omega).norm();
    let hol = omega + omega2 * C64::i();
    checks.push(IdentityCheck::new("decomposable", rel(hol.wedge(&hol).norm(), vol), tol.decomposable));
    checks.push(IdentityCheck::new(
        "omega_omega2",
        rel(omega.wedge(&omega2).norm(), vol),
        tol.decomposable,
    ));

    let ip = ComplexStructure::standard();
    checks.push(IdentityCheck::new("compat_plus", d.g.compatibility_defect(&ip), tol.compatibility));
    checks.push(IdentityCheck::new(
        "compat_minus",
        d.g.compatibility_defect(&d.i_minus),
        tol.compatibility,
    ));
    checks.push(IdentityCheck::new("phi_type", d.phi.p11().norm(), tol.identity));

    if let Some(direct) = d.omega2_direct {
        if d.section_norm >= TWO_PATH_MIN_NORM {
            let diff = (direct.p11() - omega2.p11()).norm();
            checks.push(IdentityCheck::new("two_path", diff, tol.two_path));
        }
    }

    let pass = checks.iter().all(|c| c.pass);
    Ok(VerificationReport {
        checks,
        ratio_constant: [c.re, c.im],
        pass,
    })
}

/// Hermitian inner product of coefficient vectors, conjugate-linear in `a`.
fn inner(a: &TwoForm, b: &TwoForm) -> C64 {
    let mut s = a.c20.conj() * b.c20 + a.c02.conj() * b.c02;
    for (x, y) in a.c11.iter().zip(b.c11.iter()) {
        s += x.conj() * y;
    }
    s
}

/// Merges per-point reports: worst residual per identity plus the spread of
/// the ratio constant across points.
pub fn summarize(reports: &[VerificationReport], tol: &Tolerances) -> VerificationReport {
    let mut checks: Vec<IdentityCheck> = Vec::new();
    for r in reports {
        for c in &r.checks {
            match checks.iter_mut().find(|x| x.name == c.name) {
                Some(x) => {
                    // NaN residuals must stick.
                    if !(c.max_residual <= x.max_residual) {
                        x.max_residual = c.max_residual;
                    }
                    x.pass &= c.pass;
                }
                None => checks.push(c.clone()),
            }
        }
    }
    let cs: Vec<C64> = reports.iter().map(|r| C64::new(r.ratio_constant[0], r.ratio_constant[1])).collect();
    let mean = if cs.is_empty() {
        C64::new(0.0, 0.0)
    } else {
        cs.iter().sum::<C64>() / cs.len() as f64
    };
    if cs.len() > 1 {
        let var = cs.iter().map(|c| (c - mean).norm_sqr()).sum::<f64>() / (cs.len() - 1) as f64;
        checks.push(IdentityCheck::new("ratio_spread", rel(var.sqrt(), mean.norm()), tol.ratio_spread));
    }
    let pass = checks.iter().all(|c| c.pass);
    VerificationReport {
        checks,
        ratio_constant: [mean.re, mean.im],
        pass,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanFailure {
    pub t: f64,
    pub sample: usize,
    /// Smallest eigenvalue of `g`, absent when the flow itself failed.
    pub min_eigenvalue: Option<f64>,
    pub reason: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    /// Largest grid `t > 0` such that `g` is positive at every sample for
    /// every grid time in `(0, t]`; `0` when there is none.
    pub t_max: f64,
    pub first_failure: Option<ScanFailure>,
    pub failures: Vec<ScanFailure>,
}

/// Positivity of `ω⁺(t)` over a time grid.
pub fn positivity_scan(dp: &DelPezzo, samples: &[ChartPoint], t_grid: &[f64], cfg: &IntegratorConfig) -> ScanResult {
    let mut grid = t_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    let jobs: Vec<(f64, usize)> = grid
        .iter()
        .flat_map(|&t| (0..samples.len()).map(move |i| (t, i)))
        .collect();
    let failures: Vec<ScanFailure> = jobs
        .par_iter()
        .filter_map(|&(t, i)| {
            let fail = |min_eigenvalue, reason| Some(ScanFailure { t, sample: i, min_eigenvalue, reason });
            match assemble(dp, &samples[i], t, cfg) {
                Ok(d) => {
                    let lam = d.g.min_eigenvalue();
                    if lam > 0.0 {
                        None
                    } else {
                        fail(Some(lam), None)
                    }
                }
                Err(e) => fail(None, Some(e.to_string())),
            }
        })
        .collect();
    let first_bad = failures.iter().map(|f| f.t).filter(|&t| t > 0.0).fold(f64::INFINITY, f64::min);
    let t_max = grid
        .iter()
        .copied()
        .filter(|&t| t > 0.0 && t < first_bad)
        .fold(0.0, f64::max);
    ScanResult {
        t_max,
        first_failure: failures.first().cloned(),
        failures,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitRow {
    pub t: f64,
    /// `‖ρ(t)/t − F‖`.
    pub rho_error: f64,
    /// `‖g(t)/t − g₀‖` (Frobenius norm of Gram matrices).
    pub metric_error: f64,
    /// `ρ∧ρ`, positive when `ρ` is symplectic.
    pub rho_sq: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitTable {
    pub rows: Vec<LimitRow>,
    /// Successive `error(t_k)/error(t_{k+1})`; `None` when both vanish.
    pub rho_ratios: Vec<Option<f64>>,
    pub metric_ratios: Vec<Option<f64>>,
    pub pass: bool,
}

/// Builds the convergence table from `(t, ρ(t), g(t))` samples.
pub fn convergence_table(samples: &[(f64, TwoForm, PointMetric)], f: &TwoForm, g0: &PointMetric) -> LimitTable {
    let rows: Vec<LimitRow> = samples
        .iter()
        .map(|(t, rho, g)| LimitRow {
            t: *t,
            rho_error: (*rho * (1.0 / t) - *f).norm(),
            metric_error: (g.gram / *t - g0.gram).norm(),
            rho_sq: rho.wedge(rho).re,
        })
        .collect();
    let ratios = |err: fn(&LimitRow) -> f64| -> Vec<Option<f64>> {
        rows.windows(2)
            .map(|w| {
                let (a, b) = (err(&w[0]), err(&w[1]));
                (a != 0.0 || b != 0.0).then(|| a / b)
            })
            .collect()
    };
    let rho_ratios = ratios(|r| r.rho_error);
    let metric_ratios = ratios(|r| r.metric_error);
    let rate_ok = |rs: &[Option<f64>]| {
        rs.iter().zip(rows.windows(2)).all(|(r, w)| match r {
            None => true,
            Some(r) => {
                let expect = w[0].t / w[1].t;
                (0.8 * expect..=1.2 * expect).contains(r)
            }
        })
    };
    let pass = rate_ok(&rho_ratios) && rate_ok(&metric_ratios) && rows.iter().all(|r| r.rho_sq > 0.0);
    LimitTable {
        rows,
        rho_ratios,
        metric_ratios,
        pass,
    }
}

/// `ρ(t)/t → F` and `g(t)/t → g₀` as `t → 0`.
pub fn limit_check(dp: &DelPezzo, p0: &ChartPoint, ts: &[f64], cfg: &IntegratorConfig) -> Result<LimitTable> {
    if ts.len() < 3 {
        return Err(Error::Precondition(format!(
            "rate estimate needs at least 3 times, got {}",
            ts.len()
        )));
    }
    if ts.iter().any(|t| !(*t > 0.0)) || ts.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Precondition("times must be positive and strictly decreasing".into()));
    }
    let ip = ComplexStructure::standard();
    let f = dp.curvature_form(p0);
    let g0 = metric_from_form(&f, &ip)?;
    let samples = ts
        .par_iter()
        .map(|&t| {
            let s = flow::flow(dp, p0, t, cfg)?;
            let g = metric_from_form(&s.rho.p11().re(), &ip)?;
            Ok((t, s.rho, g))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(convergence_table(&samples, &f, &g0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CohomologyResult {
    pub curve: String,
    pub t: f64,
    /// `∫ρ` at `2n` radial nodes.
    pub integral: f64,
    /// `∫ρ` at `n` radial nodes.
    pub coarse: f64,
    /// `t·∫F` by the same rule.
    pub expected: f64,
    /// `2πt` times the degree of `c₁` on the curve.
    pub class_value: f64,
    pub n: usize,
}

/// The reference curve of each model: `{w = 0}` on CP¹×CP¹, `{z₂ = 0}` on CP².
/// Both are `(u, 0)` in charts 0 and 1, each chart covering `|u| ≤ 1`.
fn reference_curve(kind: SurfaceKind) -> (&'static str, f64) {
    match kind {
        SurfaceKind::Cp1xCp1 => ("sphere w=0", 2.0),
        SurfaceKind::Cp2 => ("line z2=0", 3.0),
    }
}

fn disk_integral(n: usize, integrand: &(dyn Fn(&ChartPoint, &Tangent, &Tangent) -> Result<f64> + Sync)) -> Result<f64> {
    let radial = quadrature::rule_on(n, 0.0, 1.0);
    let n_theta = 2 * n;
    let dtheta = std::f64::consts::TAU / n_theta as f64;
    let nodes: Vec<(usize, f64, f64, f64)> = (0..2)
        .flat_map(|chart| {
            radial.iter().flat_map(move |&(r, w)| {
                (0..n_theta).map(move |k| (chart, r, w, k as f64 * dtheta))
            })
        })
        .collect();
    let parts = nodes
        .par_iter()
        .map(|&(chart, r, w, th)| {
            let e = C64::from_polar(1.0, th);
            let zero = C64::new(0.0, 0.0);
            let p = ChartPoint::new(chart, e * r, zero);
            let dr = Tangent::new(e, zero);
            let dth = Tangent::new(C64::i() * e * r, zero);
            Ok(integrand(&p, &dr, &dth)? * w * dtheta)
        })
        .collect::<Result<Vec<f64>>>()?;
    // Sequential sum keeps the result independent of the thread count.
    Ok(parts.iter().sum())
}

/// `∫_curve ρ(t)` against `t∫_curve F` and `2πt·c₁`.
pub fn cohomology_check(dp: &DelPezzo, t: f64, n: usize, cfg: &IntegratorConfig) -> Result<CohomologyResult> {
    if n == 0 {
        return Err(Error::InvalidInput("quadrature needs at least one node".into()));
    }
    let (name, degree) = reference_curve(dp.kind());
    let rho_integrand = |p: &ChartPoint, a: &Tangent, b: &Tangent| -> Result<f64> {
        if t == 0.0 {
            return Ok(0.0);
        }
        let s = flow::flow(dp, p, t, cfg)?;
        Ok(s.rho.evaluate(a, b).re)
    };
    let f_integrand = |p: &ChartPoint, a: &Tangent, b: &Tangent| -> Result<f64> {
        Ok(dp.curvature_form(p).evaluate(a, b).re)
    };
    let coarse = disk_integral(n, &rho_integrand)?;
    let fine = disk_integral(2 * n, &rho_integrand)?;
    let scale = coarse.abs().max(fine.abs());
    if scale > 0.0 && (fine - coarse).abs() > 5e-3 * scale {
        return Err(Error::QuadratureNotConverged { n, coarse, fine });
    }
    let expected = t * disk_integral(2 * n, &f_integrand)?;
    Ok(CohomologyResult {
        curve: name.to_string(),
        t,
        integral: fine,
        coarse,
        expected,
        class_value: std::f64::consts::TAU * t * degree,
        n,
    })
}

/// Largest component of the finite-difference `dω''` at `p0`, relative to
/// the size of `ω''`.
pub fn closure_residual(dp: &DelPezzo, p0: &ChartPoint, t: f64, h: f64, cfg: &IntegratorConfig) -> Result<f64> {
    let omega2_at = |q: &ChartPoint| -> Result<nalgebra::Matrix4<f64>> {
        let s = flow::flow(dp, q, t, cfg)?;
        let w = dp.holomorphic_symplectic(q)?.im() + s.rho;
        Ok(w.real_matrix().map(|z| z.re))
    };
    let center = omega2_at(p0)?;
    let mut deriv = Vec::with_capacity(4);
    for a in 0..4 {
        let step = real_basis(a) * C64::new(h, 0.0);
        let plus = omega2_at(&ChartPoint { z: p0.z + step, ..*p0 })?;
        let minus = omega2_at(&ChartPoint { z: p0.z - step, ..*p0 })?;
        deriv.push((plus - minus) / (2.0 * h));
    }
    let mut worst = 0.0f64;
    for a in 0..4 {
        for b in a + 1..4 {
            for c in b + 1..4 {
                let d = deriv[a][(b, c)] + deriv[b][(c, a)] + deriv[c][(a, b)];
                worst = worst.max(d.abs());
            }
        }
    }
    Ok(worst / center.amax().max(1.0))
}
