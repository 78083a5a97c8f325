//! The anticanonical curve `C = {s = 0}`: locating points, continuation
//! along it, the residue 1-form `η` of `σ⁻¹`, and the translation
//! diagnostics of the flow restricted to `C`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::flow::{self, hamiltonian_field};
use crate::geom::{Tangent, C64};
use crate::ode::IntegratorConfig;
use crate::quadrature;
use crate::surface::{ChartPoint, DelPezzo};

/// `|s|` accepted as on the curve.
pub const ON_CURVE_TOL: f64 = 1e-12;
/// Smallest `|ds|` at a smooth curve point.
pub const SMOOTHNESS_FLOOR: f64 = 1e-6;
pub const NEWTON_MAX_ITER: usize = 50;
/// Continuation step in arc length.
pub const CONTINUATION_STEP: f64 = 0.05;
/// `‖σ‖` after the flow above which a sample counts as lost.
pub const DRIFT_LIMIT: f64 = 1e-6;

const GAUSS_NODES: usize = 8;

/// A smooth point of `C` with a (1,0) vector spanning `ker ds`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvePoint {
    pub point: ChartPoint,
    pub tangent: Tangent,
}

impl CurvePoint {
    pub fn new(dp: &DelPezzo, point: ChartPoint) -> Result<Self> {
        let jet = dp.section_jet(&point)?;
        if jet.value.norm() > ON_CURVE_TOL {
            return Err(Error::DriftedOffCurve { residual: jet.value.norm() });
        }
        let grad = jet.grad_norm();
        if grad < SMOOTHNESS_FLOOR {
            return Err(Error::SingularCurvePoint { grad });
        }
        Ok(Self {
            point,
            tangent: Tangent::new(-jet.grad[1], jet.grad[0]),
        })
    }
}

/// Newton iteration `z ← z − s·conj(∇s)/|∇s|²`, the minimal-norm step.
pub fn locate_curve(dp: &DelPezzo, seed: &ChartPoint) -> Result<CurvePoint> {
    let mut p = *seed;
    let mut residual = f64::INFINITY;
    for _ in 0..NEWTON_MAX_ITER {
        let jet = dp.section_jet(&p)?;
        residual = jet.value.norm();
        if residual <= 1e-15 {
            break;
        }
        let grad = jet.grad_norm();
        if grad < SMOOTHNESS_FLOOR {
            return Err(if residual <= ON_CURVE_TOL {
                Error::SingularCurvePoint { grad }
            } else {
                Error::DegenerateDivisor
            });
        }
        let step = Tangent::new(jet.grad[0].conj(), jet.grad[1].conj()) * (jet.value / (grad * grad));
        p.z -= step;
        if step.norm() < 1e-16 * (1.0 + p.z.norm()) {
            residual = dp.section_jet(&p)?.value.norm();
            break;
        }
    }
    let residual = dp.section_jet(&p)?.value.norm().min(residual);
    if residual > ON_CURVE_TOL {
        return Err(Error::NewtonDiverged {
            iterations: NEWTON_MAX_ITER,
            residual,
        });
    }
    CurvePoint::new(dp, p)
}

/// `count` points along `C` starting at `start`, spaced by
/// [`CONTINUATION_STEP`] in arc length, each Newton-corrected.
pub fn sample_curve(dp: &DelPezzo, start: &CurvePoint, count: usize) -> Result<Vec<CurvePoint>> {
    let mut out = Vec::with_capacity(count);
    if count == 0 {
        return Ok(out);
    }
    out.push(*start);
    let mut dir = start.tangent / C64::new(start.tangent.norm(), 0.0);
    while out.len() < count {
        let last = out.last().unwrap();
        let predicted = ChartPoint {
            z: last.point.z + dir * C64::new(CONTINUATION_STEP, 0.0),
            ..last.point
        };
        let next = locate_curve(dp, &predicted)?;
        // Keep the direction phase-continuous.
        let t = next.tangent / C64::new(next.tangent.norm(), 0.0);
        let overlap = t.dotc(&dir);
        let phase = if overlap.norm() > 0.0 {
            overlap.conj() / overlap.norm()
        } else {
            C64::new(1.0, 0.0)
        };
        dir = t * phase;
        out.push(next);
    }
    Ok(out)
}

/// The residue of `σ⁻¹ = s⁻¹ dz₁∧dz₂` at a curve point, `η(W) = ν(V, W)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResidueForm {
    /// `V = conj(∇s)/|∇s|²`, so `ds(V) = 1`.
    pub v: Tangent,
}

impl ResidueForm {
    pub fn eval(&self, w: &Tangent) -> C64 {
        Self::eval_with(&self.v, w)
    }

    /// `ν(V, W)` for any `V` with `ds(V) = 1`.
    pub fn eval_with(v: &Tangent, w: &Tangent) -> C64 {
        v[0] * w[1] - v[1] * w[0]
    }
}

fn transversal(dp: &DelPezzo, p: &ChartPoint) -> Result<Tangent> {
    let jet = dp.section_jet(p)?;
    let grad = jet.grad_norm();
    if grad < SMOOTHNESS_FLOOR {
        return Err(Error::SingularCurvePoint { grad });
    }
    Ok(Tangent::new(jet.grad[0].conj(), jet.grad[1].conj()) / C64::new(grad * grad, 0.0))
}

pub fn residue_form(dp: &DelPezzo, c: &CurvePoint) -> Result<ResidueForm> {
    Ok(ResidueForm {
        v: transversal(dp, &c.point)?,
    })
}

/// `η(Y)` at a point near `C`.
pub fn eta_of_field(dp: &DelPezzo, p: &ChartPoint) -> Result<C64> {
    let v = transversal(dp, p)?;
    Ok(ResidueForm::eval_with(&v, &hamiltonian_field(dp, p)?))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TranslationReport {
    pub t: f64,
    /// `|ds(Y)|` at each sample.
    pub tangency: Vec<f64>,
    /// `η(Y)` at each sample, as `[re, im]`.
    pub eta_y: Vec<[f64; 2]>,
    /// `∫₀ᵗ η(Y(φ_s)) ds` for each sample, as `[re, im]`.
    pub displacements: Vec<[f64; 2]>,
    /// Largest pairwise distance between displacements.
    pub max_spread: f64,
    /// Largest `‖σ‖` at a flowed sample.
    pub max_drift: f64,
}

impl TranslationReport {
    pub fn max_tangency(&self) -> f64 {
        self.tangency.iter().copied().fold(0.0, f64::max)
    }

    /// Largest `|η(Y) − target|`.
    pub fn eta_deviation(&self, target: C64) -> f64 {
        self.eta_y
            .iter()
            .map(|e| (C64::new(e[0], e[1]) - target).norm())
            .fold(0.0, f64::max)
    }

    pub fn displacement_deviation(&self, target: C64) -> f64 {
        self.displacements
            .iter()
            .map(|e| (C64::new(e[0], e[1]) - target).norm())
            .fold(0.0, f64::max)
    }
}

struct SampleDiagnostics {
    tangency: f64,
    eta: C64,
    displacement: C64,
    drift: f64,
}

fn diagnose(dp: &DelPezzo, c: &CurvePoint, t: f64, cfg: &IntegratorConfig) -> Result<SampleDiagnostics> {
    let jet = dp.section_jet(&c.point)?;
    let y = hamiltonian_field(dp, &c.point)?;
    let tangency = (jet.grad[0] * y[0] + jet.grad[1] * y[1]).norm();
    let eta = eta_of_field(dp, &c.point)?;
    let (state, traj) = flow::flow_with_trajectory(dp, &c.point, t, cfg)?;
    let mut displacement = C64::new(0.0, 0.0);
    for (chart, seg) in traj.segments() {
        for (s, w) in quadrature::rule_on(GAUSS_NODES, seg.t0, seg.t1()) {
            let z = seg.eval(s);
            let q = ChartPoint::new(chart, C64::new(z[0], z[1]), C64::new(z[2], z[3]));
            displacement += eta_of_field(dp, &q)? * w;
        }
    }
    let drift = dp.section_norm(&state.point)?;
    if drift > DRIFT_LIMIT {
        return Err(Error::DriftedOffCurve { residual: drift });
    }
    Ok(SampleDiagnostics {
        tangency,
        eta,
        displacement,
        drift,
    })
}

/// Tangency of `Y` to `C`, the value `η(Y)` and the displacement
/// `∫₀ᵗ η(Y(φ_s)) ds` of each sample under the flow.
pub fn translation_diagnostics(
    dp: &DelPezzo,
    samples: &[CurvePoint],
    t: f64,
    cfg: &IntegratorConfig,
) -> Result<TranslationReport> {
    let diags = samples
        .par_iter()
        .map(|c| diagnose(dp, c, t, cfg))
        .collect::<Result<Vec<_>>>()?;
    let mut max_spread = 0.0f64;
    for a in &diags {
        for b in &diags {
            max_spread = max_spread.max((a.displacement - b.displacement).norm());
        }
    }
    let pair = |z: C64| [z.re, z.im];
    Ok(TranslationReport {
        t,
        tangency: diags.iter().map(|d| d.tangency).collect(),
        eta_y: diags.iter().map(|d| pair(d.eta)).collect(),
        displacements: diags.iter().map(|d| pair(d.displacement)).collect(),
        max_spread,
        max_drift: diags.iter().map(|d| d.drift).fold(0.0, f64::max),
    })
}
