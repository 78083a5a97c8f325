//! The Hamiltonian vector field of `f = log‖σ‖²` and its flow.
//!
//! In a chart with `σ⁻¹ = s⁻¹ dz₁∧dz₂` the (1,0) field
//!
//! ```text
//! Y₁ =   ∂s/∂z₂ + s ∂ψ/∂z₂,    Y₂ = −(∂s/∂z₁ + s ∂ψ/∂z₁),    ψ = log h₀
//! ```
//!
//! solves `i_Y dz₁∧dz₂ = s ∂f` and is polynomial-plus-smooth, hence defined
//! on the curve `s = 0` as well. Under the no-½ wedge convention the real
//! field `X = Y + Ȳ` satisfies `i_X ω = ½ df` and `L_X ω' = −F`.
//!
//! The flow `φ_t` integrates `dz/dt = −Y`, the orientation for which
//! `d/dt φ_t*ω' = φ_t*F` with `F` positive, so `ρ(t) = ∫₀ᵗ φ_s*F ds` and
//! `ω'' = ω' + ρ` has a positive (1,1) part for small `t > 0`.
//! Along with the point the integrator carries the Jacobian `dφ_t`
//! (variational equation with the analytic derivative of the field) and
//! the accumulated form `ρ`.

use std::cell::Cell;

use nalgebra::Matrix2;

use crate::error::{Error, Result};
use crate::geom::{RealLinearMap, Tangent, TwoForm, C64};
use crate::ode::{self, DenseStep, IntegratorConfig, StepAction};
use crate::surface::{ChartPoint, DelPezzo};

/// Largest admissible `|t|`.
pub const MAX_FLOW_TIME: f64 = 5.0;

/// Largest admissible condition number of the flow Jacobian.
pub const MAX_CONDITION: f64 = 1e10;

/// Cutoff in `‖σ‖` below which the direct pullback of `σ⁻¹` is refused.
pub const NEAR_CURVE_CUTOFF: f64 = 1e-3;

const STATE_LEN: usize = 32;

pub fn hamiltonian_field(dp: &DelPezzo, p: &ChartPoint) -> Result<Tangent> {
    let jet = dp.section_jet(p)?;
    let lw = dp.metric.log_jet(p);
    let s = jet.value;
    Ok(Tangent::new(
        jet.grad[1] + s * lw.d[1],
        -(jet.grad[0] + s * lw.d[0]),
    ))
}

/// `(∂Y/∂z, ∂Y/∂z̄)` as a real-linear map.
pub fn field_jacobian(dp: &DelPezzo, p: &ChartPoint) -> Result<RealLinearMap> {
    let jet = dp.section_jet(p)?;
    let lw = dp.metric.log_jet(p);
    let s = jet.value;
    let mut a = Matrix2::zeros();
    let mut b = Matrix2::zeros();
    // Row r of Y is ±(∂s/∂z_k + s ∂ψ/∂z_k) with (r, k, sign) below.
    for (r, k, sign) in [(0usize, 1usize, 1.0), (1, 0, -1.0)] {
        for j in 0..2 {
            a[(r, j)] = (jet.hess[(k, j)] + jet.grad[j] * lw.d[k] + s * lw.dd[(k, j)]) * sign;
            b[(r, j)] = s * lw.dd_mixed[(k, j)] * sign;
        }
    }
    Ok(RealLinearMap::new(a, b))
}

/// Velocity of the flow, `dz/dt = −Y`.
pub fn flow_velocity(dp: &DelPezzo, p: &ChartPoint) -> Result<Tangent> {
    Ok(-hamiltonian_field(dp, p)?)
}

/// Endpoint, Jacobian and accumulated `ρ` of a trajectory.
#[derive(Clone, Copy, Debug)]
pub struct FlowState {
    pub start: ChartPoint,
    pub point: ChartPoint,
    /// `dφ_t` from the start chart to the chart of `point`.
    pub jacobian: RealLinearMap,
    /// `∫₀ᵗ φ_s*F ds` at the start point.
    pub rho: TwoForm,
    pub t: f64,
    pub chart_switches: usize,
}

impl FlowState {
    pub fn initial(start: ChartPoint) -> Self {
        Self {
            start,
            point: start,
            jacobian: RealLinearMap::identity(),
            rho: TwoForm::zero(),
            t: 0.0,
            chart_switches: 0,
        }
    }
}

/// Dense output of a trajectory, one segment per accepted step.
#[derive(Clone, Debug, Default)]
pub struct Trajectory {
    segments: Vec<(usize, DenseStep)>,
}

impl Trajectory {
    pub fn segments(&self) -> impl Iterator<Item = (usize, &DenseStep)> {
        self.segments.iter().map(|(c, d)| (*c, d))
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// Point on the trajectory at time `t`, in the chart of its step.
    pub fn point_at(&self, t: f64) -> Option<ChartPoint> {
        self.segments.iter().find_map(|(chart, d)| {
            let (lo, hi) = if d.h >= 0.0 { (d.t0, d.t1()) } else { (d.t1(), d.t0) };
            (t >= lo - 1e-15 && t <= hi + 1e-15).then(|| {
                let y = d.eval(t);
                unpack_point(*chart, &y)
            })
        })
    }
}

fn pack(state: &FlowState, y: &mut [f64]) {
    let mut i = 0;
    let mut put = |z: C64| {
        y[i] = z.re;
        y[i + 1] = z.im;
        i += 2;
    };
    put(state.point.z[0]);
    put(state.point.z[1]);
    for m in [&state.jacobian.a, &state.jacobian.b] {
        for r in 0..2 {
            for c in 0..2 {
                put(m[(r, c)]);
            }
        }
    }
    put(state.rho.c20);
    for r in 0..2 {
        for c in 0..2 {
            put(state.rho.c11[(r, c)]);
        }
    }
    put(state.rho.c02);
}

fn read(y: &[f64], i: usize) -> C64 {
    C64::new(y[i], y[i + 1])
}

fn unpack_point(chart: usize, y: &[f64]) -> ChartPoint {
    ChartPoint::new(chart, read(y, 0), read(y, 2))
}

fn unpack_jacobian(y: &[f64]) -> RealLinearMap {
    let m = |o: usize| Matrix2::new(read(y, o), read(y, o + 2), read(y, o + 4), read(y, o + 6));
    RealLinearMap::new(m(4), m(12))
}

fn unpack_rho(y: &[f64]) -> TwoForm {
    TwoForm::new(
        read(y, 20),
        Matrix2::new(read(y, 22), read(y, 24), read(y, 26), read(y, 28)),
        read(y, 30),
    )
}

fn rhs(dp: &DelPezzo, chart: usize, y: &[f64], dy: &mut [f64]) {
    let p = unpack_point(chart, y);
    let j = unpack_jacobian(y);
    // Chart indices are validated before the integration starts.
    let v = flow_velocity(dp, &p).expect("valid chart");
    let dv = field_jacobian(dp, &p).expect("valid chart").scale(-1.0);
    let dj = dv.compose(&j);
    let drho = dp.curvature_form(&p).pullback(&j);
    let tmp = FlowState {
        start: p,
        point: ChartPoint { chart, z: v },
        jacobian: dj,
        rho: drho,
        t: 0.0,
        chart_switches: 0,
    };
    pack(&tmp, dy);
}

/// Flows `p` for time `t`, switching charts whenever a coordinate leaves the
/// chart-switch radius.
pub fn flow(dp: &DelPezzo, p: &ChartPoint, t: f64, cfg: &IntegratorConfig) -> Result<FlowState> {
    flow_impl(dp, p, t, cfg, false).map(|(s, _)| s)
}

/// [`flow`] that also keeps the dense output of every step.
pub fn flow_with_trajectory(dp: &DelPezzo, p: &ChartPoint, t: f64, cfg: &IntegratorConfig) -> Result<(FlowState, Trajectory)> {
    flow_impl(dp, p, t, cfg, true)
}

fn flow_impl(dp: &DelPezzo, p: &ChartPoint, t: f64, cfg: &IntegratorConfig, keep: bool) -> Result<(FlowState, Trajectory)> {
    if !t.is_finite() || t.abs() > MAX_FLOW_TIME {
        return Err(Error::FlowTimeTooLarge { t, bound: MAX_FLOW_TIME });
    }
    let start = dp.model.normalize(p)?;
    let mut state = FlowState::initial(start);
    let mut traj = Trajectory::default();
    if t == 0.0 {
        return Ok((state, traj));
    }
    let chart = Cell::new(start.chart);
    let switches = Cell::new(0usize);
    let mut failure: Option<Error> = None;
    let mut y0 = vec![0.0; STATE_LEN];
    pack(&state, &mut y0);

    let sol = ode::integrate(
        |_, y, dy| rhs(dp, chart.get(), y, dy),
        0.0,
        &y0,
        t,
        cfg,
        |dense, y| {
            if keep {
                traj.segments.push((chart.get(), dense.clone()));
            }
            let here = unpack_point(chart.get(), y);
            if here.max_modulus() <= dp.model.radius || failure.is_some() {
                return StepAction::Continue;
            }
            let x = match dp.model.homogeneous(&here) {
                Ok(x) => x,
                Err(e) => {
                    failure = Some(e);
                    return StepAction::Continue;
                }
            };
            let target = dp.model.best_chart_for(&x);
            match (dp.model.transition(&here, target), dp.model.transition_jacobian(&here, target)) {
                (Ok(q), Ok(tj)) => {
                    let j = tj.compose(&unpack_jacobian(y));
                    let moved = FlowState {
                        start,
                        point: q,
                        jacobian: j,
                        rho: unpack_rho(y),
                        t: 0.0,
                        chart_switches: 0,
                    };
                    pack(&moved, y);
                    chart.set(target);
                    switches.set(switches.get() + 1);
                    StepAction::StateChanged
                }
                (Err(e), _) | (_, Err(e)) => {
                    failure = Some(e);
                    StepAction::Continue
                }
            }
        },
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    state.point = unpack_point(chart.get(), &sol.y);
    state.jacobian = unpack_jacobian(&sol.y);
    state.rho = unpack_rho(&sol.y).re();
    state.t = t;
    state.chart_switches = switches.get();
    let cond = state.jacobian.condition_number();
    if !(cond <= MAX_CONDITION) {
        return Err(Error::DegenerateJacobian { condition: cond });
    }
    Ok((state, traj))
}

/// `φ_t*(σ⁻¹) = ω + iω''` at the start point, by direct pullback of the
/// endpoint form.
pub fn pullback_holsymp(dp: &DelPezzo, state: &FlowState, cutoff: f64) -> Result<TwoForm> {
    let norm = dp.section_norm(&state.point)?;
    if norm < cutoff {
        return Err(Error::TooCloseToCurve { norm, cutoff });
    }
    Ok(dp.holomorphic_symplectic(&state.point)?.pullback(&state.jacobian))
}

/// Expresses `q` in the chart of `reference` (for comparing endpoints).
pub fn same_chart(dp: &DelPezzo, q: &ChartPoint, reference: &ChartPoint) -> Result<ChartPoint> {
    if q.chart == reference.chart {
        Ok(*q)
    } else {
        dp.model.transition(q, reference.chart)
    }
}
