//! Dormand–Prince 5(4) with step-size control and the standard quartic
//! dense output.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_step: f64,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            max_step: 0.05,
            max_steps: 100_000,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0 && self.max_step > 0.0 && self.max_steps > 0) {
            return Err(Error::InvalidInput("integrator tolerances and step bounds must be positive".into()));
        }
        Ok(())
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.abs_tol = tol;
        self.rel_tol = tol;
        self
    }
}

/// Continuous extension over one accepted step.
#[derive(Clone, Debug)]
pub struct DenseStep {
    pub t0: f64,
    pub h: f64,
    rcont: [Vec<f64>; 5],
}

impl DenseStep {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        let th = (t - self.t0) / self.h;
        let th1 = 1.0 - th;
        let [r1, r2, r3, r4, r5] = &self.rcont;
        (0..r1.len())
            .map(|i| r1[i] + th * (r2[i] + th1 * (r3[i] + th * (r4[i] + th1 * r5[i]))))
            .collect()
    }
}

/// What the step observer asks the driver to do after an accepted step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepAction {
    Continue,
    /// The observer rewrote the state (e.g. a change of coordinates); the
    /// cached derivative is invalid.
    StateChanged,
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub t: f64,
    pub y: Vec<f64>,
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

fn err_norm(y0: &[f64], y1: &[f64], err: &[f64], cfg: &IntegratorConfig) -> f64 {
    let n = y0.len() as f64;
    let sum: f64 = (0..y0.len())
        .map(|i| {
            let sc = cfg.abs_tol + cfg.rel_tol * y0[i].abs().max(y1[i].abs());
            (err[i] / sc).powi(2)
        })
        .sum();
    (sum / n).sqrt()
}

fn axpy(out: &mut [f64], y: &[f64], h: f64, terms: &[(f64, &[f64])]) {
    for i in 0..y.len() {
        let mut acc = 0.0;
        for (c, k) in terms {
            acc += c * k[i];
        }
        out[i] = y[i] + h * acc;
    }
}

/// Integrates `y' = f(t, y)` from `t0` to `t1` (either direction).
///
/// After every accepted step `observer` receives the dense output of the
/// step and mutable access to the new state.
pub fn integrate<F, O>(mut f: F, t0: f64, y0: &[f64], t1: f64, cfg: &IntegratorConfig, mut observer: O) -> Result<Solution>
where
    F: FnMut(f64, &[f64], &mut [f64]),
    O: FnMut(&DenseStep, &mut Vec<f64>) -> StepAction,
{
    cfg.validate()?;
    let n = y0.len();
    let dir = if t1 >= t0 { 1.0 } else { -1.0 };
    let span = (t1 - t0).abs();
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut sol = Solution {
        t,
        y: y.clone(),
        accepted: 0,
        rejected: 0,
        evaluations: 0,
    };
    if span == 0.0 {
        return Ok(sol);
    }

    let mut k1 = vec![0.0; n];
    let (mut k2, mut k3, mut k4, mut k5, mut k6, mut k7) =
        (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut ytmp = vec![0.0; n];
    let mut y1 = vec![0.0; n];
    let mut err = vec![0.0; n];

    f(t, &y, &mut k1);
    sol.evaluations += 1;
    let mut h = initial_step(&mut f, t, &y, &k1, dir, cfg).min(span).min(cfg.max_step);
    sol.evaluations += 1;
    let mut steps = 0usize;
    let mut last_rejected = false;

    loop {
        let remaining = (t1 - t) * dir;
        if remaining <= 1e-14 * span.max(1.0) {
            break;
        }
        if steps >= cfg.max_steps {
            return Err(Error::StepLimit {
                max_steps: cfg.max_steps,
                t,
            });
        }
        steps += 1;
        h = h.min(remaining).min(cfg.max_step);
        if h < 1e-14 * span.max(1.0) {
            return Err(Error::StepUnderflow { t });
        }
        let hs = h * dir;

        axpy(&mut ytmp, &y, hs, &[(A21, &k1)]);
        f(t + C2 * hs, &ytmp, &mut k2);
        axpy(&mut ytmp, &y, hs, &[(A31, &k1), (A32, &k2)]);
        f(t + C3 * hs, &ytmp, &mut k3);
        axpy(&mut ytmp, &y, hs, &[(A41, &k1), (A42, &k2), (A43, &k3)]);
        f(t + C4 * hs, &ytmp, &mut k4);
        axpy(&mut ytmp, &y, hs, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]);
        f(t + C5 * hs, &ytmp, &mut k5);
        axpy(&mut ytmp, &y, hs, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]);
        f(t + hs, &ytmp, &mut k6);
        axpy(&mut y1, &y, hs, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
        f(t + hs, &y1, &mut k7);
        sol.evaluations += 6;

        for i in 0..n {
            err[i] = hs * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        }
        let e = err_norm(&y, &y1, &err, cfg);
        if !e.is_finite() {
            h *= 0.25;
            last_rejected = true;
            sol.rejected += 1;
            continue;
        }
        let fac = (0.9 * e.powf(-0.2)).clamp(0.2, 10.0);
        if e <= 1.0 {
            let mut rcont = [y.clone(), vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
            for i in 0..n {
                let dy = y1[i] - y[i];
                let bspl = hs * k1[i] - dy;
                rcont[1][i] = dy;
                rcont[2][i] = bspl;
                rcont[3][i] = dy - hs * k7[i] - bspl;
                rcont[4][i] = hs * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
            }
            let dense = DenseStep { t0: t, h: hs, rcont };
            t += hs;
            std::mem::swap(&mut y, &mut y1);
            sol.accepted += 1;
            match observer(&dense, &mut y) {
                StepAction::Continue => std::mem::swap(&mut k1, &mut k7),
                StepAction::StateChanged => {
                    f(t, &y, &mut k1);
                    sol.evaluations += 1;
                }
            }
            h *= if last_rejected { fac.min(1.0) } else { fac };
            last_rejected = false;
        } else {
            h *= fac.min(1.0);
            last_rejected = true;
            sol.rejected += 1;
        }
    }
    sol.t = t;
    sol.y = y;
    Ok(sol)
}

fn initial_step<F>(f: &mut F, t: f64, y: &[f64], k1: &[f64], dir: f64, cfg: &IntegratorConfig) -> f64
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = y.len();
    let sc: Vec<f64> = y.iter().map(|v| cfg.abs_tol + cfg.rel_tol * v.abs()).collect();
    let rms = |v: &[f64]| ((0..n).map(|i| (v[i] / sc[i]).powi(2)).sum::<f64>() / n as f64).sqrt();
    let d0 = rms(y);
    let d1 = rms(k1);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let y1: Vec<f64> = (0..n).map(|i| y[i] + dir * h0 * k1[i]).collect();
    let mut k2 = vec![0.0; n];
    f(t + dir * h0, &y1, &mut k2);
    let diff: Vec<f64> = (0..n).map(|i| k2[i] - k1[i]).collect();
    let d2 = rms(&diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1)
}
