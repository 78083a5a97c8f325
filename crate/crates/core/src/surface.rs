//! Del Pezzo models: chart atlases of CP² and CP¹×CP¹, anticanonical
//! sections, the Fubini–Study type metric on K*, the potential
//! `f = log‖σ‖²` and the curvature form `F`.
//!
//! Points are stored in affine charts. A chart fixes one homogeneous slot per
//! projective factor to 1 and reads the two remaining slots as coordinates:
//!
//! * CP², chart k: `x_k = 1`, coordinates are the other two slots in order.
//! * CP¹×CP¹ with slots `(a₀, a₁, b₀, b₁)`, chart `c = fa + 2·fb`: factor A
//!   uses `a₁/a₀` when `fa = 0` and `a₀/a₁` when `fa = 1`; likewise for B.
//!
//! In every chart `σ = s ∂/∂z₁∧∂/∂z₂`, so `σ⁻¹ = s⁻¹ dz₁∧dz₂`.

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geom::{RealLinearMap, Tangent, TwoForm, C64, I};

/// Default chart-switch radius.
pub const DEFAULT_RADIUS: f64 = 2.0;

const PIVOT_FLOOR: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SurfaceKind {
    #[serde(rename = "cp2")]
    Cp2,
    #[serde(rename = "cp1xcp1")]
    Cp1xCp1,
}

impl SurfaceKind {
    pub fn chart_count(self) -> usize {
        match self {
            SurfaceKind::Cp2 => 3,
            SurfaceKind::Cp1xCp1 => 4,
        }
    }

    pub fn slot_count(self) -> usize {
        match self {
            SurfaceKind::Cp2 => 3,
            SurfaceKind::Cp1xCp1 => 4,
        }
    }

    /// Dimension of `H⁰(K*)`.
    pub fn section_dimension(self) -> usize {
        match self {
            SurfaceKind::Cp2 => 10,
            SurfaceKind::Cp1xCp1 => 9,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SurfaceKind::Cp2 => "cp2",
            SurfaceKind::Cp1xCp1 => "cp1xcp1",
        }
    }

    fn factors(self) -> &'static [&'static [usize]] {
        match self {
            SurfaceKind::Cp2 => &[&[0, 1, 2]],
            SurfaceKind::Cp1xCp1 => &[&[0, 1], &[2, 3]],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChartPoint {
    pub chart: usize,
    pub z: Tangent,
}

impl ChartPoint {
    pub fn new(chart: usize, z1: C64, z2: C64) -> Self {
        Self {
            chart,
            z: Tangent::new(z1, z2),
        }
    }

    pub fn max_modulus(&self) -> f64 {
        self.z[0].norm().max(self.z[1].norm())
    }
}

#[derive(Clone, Copy, Debug)]
struct ChartLayout {
    coord_slots: [usize; 2],
    /// Fixed slot dividing each coordinate.
    pivots: [usize; 2],
    /// Orientation sign ε with `s_chart = ε · S(homogeneous)`.
    sign: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurfaceModel {
    pub kind: SurfaceKind,
    pub radius: f64,
}

impl SurfaceModel {
    pub fn new(kind: SurfaceKind) -> Self {
        Self {
            kind,
            radius: DEFAULT_RADIUS,
        }
    }

    pub fn with_radius(kind: SurfaceKind, radius: f64) -> Self {
        Self { kind, radius }
    }

    pub fn chart_count(&self) -> usize {
        self.kind.chart_count()
    }

    fn layout(&self, chart: usize) -> Result<ChartLayout> {
        match self.kind {
            SurfaceKind::Cp2 => {
                let (coord_slots, sign) = match chart {
                    0 => ([1, 2], 1.0),
                    1 => ([0, 2], -1.0),
                    2 => ([0, 1], 1.0),
                    _ => return Err(Error::InvalidChart { chart }),
                };
                Ok(ChartLayout {
                    coord_slots,
                    pivots: [chart, chart],
                    sign,
                })
            }
            SurfaceKind::Cp1xCp1 => {
                if chart >= 4 {
                    return Err(Error::InvalidChart { chart });
                }
                let fa = chart & 1;
                let fb = (chart >> 1) & 1;
                Ok(ChartLayout {
                    coord_slots: [1 - fa, 3 - fb],
                    pivots: [fa, 2 + fb],
                    sign: if (fa + fb) % 2 == 0 { 1.0 } else { -1.0 },
                })
            }
        }
    }

    /// `ε` with `s_chart = ε·S` for the homogeneous polynomial `S`.
    pub fn orientation_sign(&self, chart: usize) -> Result<f64> {
        Ok(self.layout(chart)?.sign)
    }

    pub fn homogeneous(&self, p: &ChartPoint) -> Result<Vec<C64>> {
        let lay = self.layout(p.chart)?;
        let mut x = vec![C64::new(0.0, 0.0); self.kind.slot_count()];
        for &pv in &lay.pivots {
            x[pv] = C64::new(1.0, 0.0);
        }
        for (k, &slot) in lay.coord_slots.iter().enumerate() {
            x[slot] = p.z[k];
        }
        Ok(x)
    }

    pub fn from_homogeneous(&self, x: &[C64], chart: usize) -> Result<ChartPoint> {
        let lay = self.layout(chart)?;
        for factor in self.kind.factors() {
            let scale = factor.iter().map(|&s| x[s].norm()).fold(0.0, f64::max);
            for &pv in &lay.pivots {
                if factor.contains(&pv) && x[pv].norm() < PIVOT_FLOOR * scale.max(f64::MIN_POSITIVE) {
                    return Err(Error::Unrepresentable {
                        chart,
                        pivot: x[pv].norm() / scale,
                    });
                }
            }
        }
        Ok(ChartPoint {
            chart,
            z: Tangent::new(
                x[lay.coord_slots[0]] / x[lay.pivots[0]],
                x[lay.coord_slots[1]] / x[lay.pivots[1]],
            ),
        })
    }

    /// Chart in which the largest homogeneous coordinate of every factor is
    /// the pivot, so all affine coordinates have modulus ≤ 1.
    pub fn best_chart_for(&self, x: &[C64]) -> usize {
        let argmax = |slots: &[usize]| {
            slots
                .iter()
                .copied()
                .max_by(|&a, &b| x[a].norm().total_cmp(&x[b].norm()))
                .unwrap()
        };
        match self.kind {
            SurfaceKind::Cp2 => argmax(&[0, 1, 2]),
            SurfaceKind::Cp1xCp1 => argmax(&[0, 1]) + 2 * (argmax(&[2, 3]) - 2),
        }
    }

    pub fn point_from_homogeneous(&self, x: &[C64]) -> Result<ChartPoint> {
        self.from_homogeneous(x, self.best_chart_for(x))
    }

    pub fn transition(&self, p: &ChartPoint, target: usize) -> Result<ChartPoint> {
        let x = self.homogeneous(p)?;
        self.from_homogeneous(&x, target)
    }

    /// Re-expresses `p` in its best chart when it lies outside the
    /// chart-switch radius.
    pub fn normalize(&self, p: &ChartPoint) -> Result<ChartPoint> {
        if p.max_modulus() <= self.radius {
            return Ok(*p);
        }
        let x = self.homogeneous(p)?;
        self.point_from_homogeneous(&x)
    }

    /// Derivative of the coordinate change from `p.chart` to `target`.
    pub fn transition_jacobian(&self, p: &ChartPoint, target: usize) -> Result<RealLinearMap> {
        let src = self.layout(p.chart)?;
        let dst = self.layout(target)?;
        let x = self.homogeneous(p)?;
        // Validates the pivots.
        self.from_homogeneous(&x, target)?;
        let mut a = Matrix2::zeros();
        for j in 0..2 {
            let num = dst.coord_slots[j];
            let den = dst.pivots[j];
            for i in 0..2 {
                let di = src.coord_slots[i];
                let dnum = if num == di { 1.0 } else { 0.0 };
                let dden = if den == di { 1.0 } else { 0.0 };
                a[(j, i)] = (x[den] * dnum - x[num] * dden) / (x[den] * x[den]);
            }
        }
        Ok(RealLinearMap::complex_linear(a))
    }
}

/// Value, gradient and holomorphic Hessian of the local section `s`.
#[derive(Clone, Copy, Debug)]
pub struct SectionJet {
    pub value: C64,
    pub grad: [C64; 2],
    pub hess: Matrix2<C64>,
}

impl SectionJet {
    pub fn grad_norm(&self) -> f64 {
        (self.grad[0].norm_sqr() + self.grad[1].norm_sqr()).sqrt()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnticanonicalSection {
    pub kind: SurfaceKind,
    coeffs: Vec<C64>,
    exponents: Vec<[u32; 4]>,
}

/// Monomial exponents in coefficient order.
fn monomials(kind: SurfaceKind) -> Vec<[u32; 4]> {
    let mut out = Vec::new();
    match kind {
        SurfaceKind::Cp2 => {
            for a0 in (0..=3u32).rev() {
                for a1 in (0..=3 - a0).rev() {
                    out.push([a0, a1, 3 - a0 - a1, 0]);
                }
            }
        }
        SurfaceKind::Cp1xCp1 => {
            // z^a w^b with z = a₁/a₀, w = b₁/b₀.
            for a in 0..=2u32 {
                for b in 0..=2u32 {
                    out.push([2 - a, a, 2 - b, b]);
                }
            }
        }
    }
    out
}

fn monomial(x: &[C64], e: &[u32; 4], d: &[usize]) -> C64 {
    let mut e = *e;
    let mut coef = 1.0;
    for &slot in d {
        if e[slot] == 0 {
            return C64::new(0.0, 0.0);
        }
        coef *= e[slot] as f64;
        e[slot] -= 1;
    }
    let mut v = C64::new(coef, 0.0);
    for (slot, &k) in e.iter().enumerate().take(x.len()) {
        if k > 0 {
            v *= x[slot].powu(k);
        }
    }
    v
}

impl AnticanonicalSection {
    pub fn new(kind: SurfaceKind, coeffs: Vec<C64>) -> Result<Self> {
        let expected = kind.section_dimension();
        if coeffs.len() != expected {
            return Err(Error::CoefficientCount {
                expected,
                got: coeffs.len(),
            });
        }
        Ok(Self {
            kind,
            coeffs,
            exponents: monomials(kind),
        })
    }

    /// `s ≡ 1` in chart 0 of CP¹×CP¹; the curve is the doubled pair of lines
    /// at infinity.
    pub fn e1() -> Self {
        let mut c = vec![C64::new(0.0, 0.0); 9];
        c[0] = C64::new(1.0, 0.0);
        Self::new(SurfaceKind::Cp1xCp1, c).unwrap()
    }

    /// Fermat cubic `x₀³ + x₁³ + x₂³`.
    pub fn e2() -> Self {
        let mut c = vec![C64::new(0.0, 0.0); 10];
        for k in [0, 6, 9] {
            c[k] = C64::new(1.0, 0.0);
        }
        Self::new(SurfaceKind::Cp2, c).unwrap()
    }

    /// Exponents of the monomial each coefficient multiplies, per slot.
    pub fn exponents(&self) -> &[[u32; 4]] {
        &self.exponents
    }

    pub fn coefficients(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn scaled(&self, k: C64) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|c| c * k).collect(),
            ..self.clone()
        }
    }

    /// Hex SHA-256 of the surface kind and coefficient bit patterns.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.kind.name().as_bytes());
        for c in &self.coeffs {
            h.update(c.re.to_le_bytes());
            h.update(c.im.to_le_bytes());
        }
        hex::encode(h.finalize())
    }

    fn poly(&self, x: &[C64], d: &[usize]) -> C64 {
        self.coeffs
            .iter()
            .zip(&self.exponents)
            .filter(|(c, _)| **c != C64::new(0.0, 0.0))
            .map(|(c, e)| c * monomial(x, e, d))
            .sum()
    }

    pub fn jet(&self, model: &SurfaceModel, p: &ChartPoint) -> Result<SectionJet> {
        let lay = model.layout(p.chart)?;
        let x = model.homogeneous(p)?;
        let cs = lay.coord_slots;
        let e = lay.sign;
        let value = self.poly(&x, &[]) * e;
        let grad = [self.poly(&x, &[cs[0]]) * e, self.poly(&x, &[cs[1]]) * e];
        let mut hess = Matrix2::zeros();
        for i in 0..2 {
            for j in 0..2 {
                hess[(i, j)] = self.poly(&x, &[cs[i], cs[j]]) * e;
            }
        }
        Ok(SectionJet { value, grad, hess })
    }

    pub fn value(&self, model: &SurfaceModel, p: &ChartPoint) -> Result<C64> {
        let lay = model.layout(p.chart)?;
        let x = model.homogeneous(p)?;
        Ok(self.poly(&x, &[]) * lay.sign)
    }
}

/// Fubini–Study type weight `h₀` on K*, optionally inverted (`h₀⁻¹`), which
/// flips the sign of the curvature.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KstarMetric {
    pub kind: SurfaceKind,
    /// +1 for the ample Fubini–Study weight, −1 for its inverse.
    pub sign: f64,
}

/// Derivatives of `ψ = log h₀` in a chart.
#[derive(Clone, Copy, Debug)]
pub struct LogWeightJet {
    pub value: f64,
    /// `∂ψ/∂z_k`.
    pub d: [C64; 2],
    /// `∂²ψ/∂z_k∂z_j`.
    pub dd: Matrix2<C64>,
    /// `∂²ψ/∂z_k∂z̄_j`.
    pub dd_mixed: Matrix2<C64>,
}

impl KstarMetric {
    pub fn fubini_study(kind: SurfaceKind) -> Self {
        Self { kind, sign: 1.0 }
    }

    pub fn inverted(kind: SurfaceKind) -> Self {
        Self { kind, sign: -1.0 }
    }

    pub fn log_jet(&self, p: &ChartPoint) -> LogWeightJet {
        let z = p.z;
        let zb = [z[0].conj(), z[1].conj()];
        let zero = C64::new(0.0, 0.0);
        match self.kind {
            SurfaceKind::Cp2 => {
                let c = 3.0 * self.sign;
                let q = 1.0 + z[0].norm_sqr() + z[1].norm_sqr();
                let d = [zb[0] * (-c / q), zb[1] * (-c / q)];
                let mut dd = Matrix2::zeros();
                let mut mixed = Matrix2::zeros();
                for k in 0..2 {
                    for j in 0..2 {
                        dd[(k, j)] = zb[k] * zb[j] * (c / (q * q));
                        let delta = if k == j { q } else { 0.0 };
                        mixed[(k, j)] = (C64::new(delta, 0.0) - zb[k] * z[j]) * (-c / (q * q));
                    }
                }
                LogWeightJet {
                    value: -c * q.ln(),
                    d,
                    dd,
                    dd_mixed: mixed,
                }
            }
            SurfaceKind::Cp1xCp1 => {
                let c = 2.0 * self.sign;
                let q = [1.0 + z[0].norm_sqr(), 1.0 + z[1].norm_sqr()];
                let d = [zb[0] * (-c / q[0]), zb[1] * (-c / q[1])];
                let dd = Matrix2::new(zb[0] * zb[0] * (c / (q[0] * q[0])), zero, zero, zb[1] * zb[1] * (c / (q[1] * q[1])));
                let mixed = Matrix2::new(
                    C64::new(-c / (q[0] * q[0]), 0.0),
                    zero,
                    zero,
                    C64::new(-c / (q[1] * q[1]), 0.0),
                );
                LogWeightJet {
                    value: -c * (q[0].ln() + q[1].ln()),
                    d,
                    dd,
                    dd_mixed: mixed,
                }
            }
        }
    }

    pub fn weight(&self, p: &ChartPoint) -> f64 {
        self.log_jet(p).value.exp()
    }

    /// `F = −i ∂∂̄ log h₀`, positive for the ample weight.
    pub fn curvature_form(&self, p: &ChartPoint) -> TwoForm {
        let m = self.log_jet(p).dd_mixed;
        TwoForm::real(C64::new(0.0, 0.0), m * (-I))
    }
}

/// A Del Pezzo model with its section and metric: all the data of the
/// construction.
#[derive(Clone, Debug)]
pub struct DelPezzo {
    pub model: SurfaceModel,
    pub section: AnticanonicalSection,
    pub metric: KstarMetric,
}

impl DelPezzo {
    pub fn new(model: SurfaceModel, section: AnticanonicalSection, metric: KstarMetric) -> Result<Self> {
        if section.kind != model.kind || metric.kind != model.kind {
            return Err(Error::InvalidInput("surface, section and metric kinds differ".into()));
        }
        Ok(Self { model, section, metric })
    }

    pub fn from_section(section: AnticanonicalSection) -> Self {
        let kind = section.kind;
        Self {
            model: SurfaceModel::new(kind),
            section,
            metric: KstarMetric::fubini_study(kind),
        }
    }

    /// CP¹×CP¹ with `s ≡ 1` in chart 0.
    pub fn e1() -> Self {
        Self::from_section(AnticanonicalSection::e1())
    }

    /// CP² with the Fermat cubic.
    pub fn e2() -> Self {
        Self::from_section(AnticanonicalSection::e2())
    }

    pub fn kind(&self) -> SurfaceKind {
        self.model.kind
    }

    pub fn with_metric(mut self, metric: KstarMetric) -> Self {
        self.metric = metric;
        self
    }

    pub fn with_radius(mut self, radius: f64) -> Self {
        self.model.radius = radius;
        self
    }

    pub fn section_jet(&self, p: &ChartPoint) -> Result<SectionJet> {
        self.section.jet(&self.model, p)
    }

    /// `‖σ‖² = |s|² h₀`.
    pub fn section_norm_sq(&self, p: &ChartPoint) -> Result<f64> {
        let s = self.section.value(&self.model, p)?;
        Ok(s.norm_sqr() * self.metric.weight(p))
    }

    pub fn section_norm(&self, p: &ChartPoint) -> Result<f64> {
        Ok(self.section_norm_sq(p)?.sqrt())
    }

    /// `f = log‖σ‖²`; `−∞` on the curve.
    pub fn potential(&self, p: &ChartPoint) -> Result<f64> {
        Ok(self.section_norm_sq(p)?.ln())
    }

    /// `∂f/∂z_k = (∂s/∂z_k)/s + ∂ log h₀/∂z_k`.
    pub fn grad_f(&self, p: &ChartPoint) -> Result<[C64; 2]> {
        let jet = self.section_jet(p)?;
        if jet.value.norm() == 0.0 {
            return Err(Error::OnAnticanonicalCurve);
        }
        let lw = self.metric.log_jet(p);
        Ok([jet.grad[0] / jet.value + lw.d[0], jet.grad[1] / jet.value + lw.d[1]])
    }

    pub fn curvature_form(&self, p: &ChartPoint) -> TwoForm {
        self.metric.curvature_form(p)
    }

    /// `σ⁻¹ = s⁻¹ dz₁∧dz₂ = ω + iω'`.
    pub fn holomorphic_symplectic(&self, p: &ChartPoint) -> Result<TwoForm> {
        let s = self.section.value(&self.model, p)?;
        if s.norm() == 0.0 {
            return Err(Error::OnAnticanonicalCurve);
        }
        Ok(TwoForm::dz12() * s.inv())
    }

    /// Maps a point from homogeneous coordinates into its best chart.
    pub fn point(&self, x: &[C64]) -> Result<ChartPoint> {
        self.model.point_from_homogeneous(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cx(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn pt(chart: usize, a: C64, b: C64) -> ChartPoint {
        ChartPoint::new(chart, a, b)
    }

    /// Deterministic pseudo-random points, no RNG dependency needed here.
    fn lcg_points(kind: SurfaceKind, n: usize) -> Vec<Vec<C64>> {
        let mut state: u64 = 0x9E37_79B9_7F4A_7C15;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        (0..n)
            .map(|_| (0..kind.slot_count()).map(|_| cx(next(), next())).collect())
            .collect()
    }

    #[test]
    fn cp2_transition_examples() {
        let m = SurfaceModel::new(SurfaceKind::Cp2);
        let q = m.transition(&pt(0, cx(1.0, 0.0), cx(1.0, 0.0)), 1).unwrap();
        assert!((q.z - Tangent::new(cx(1.0, 0.0), cx(1.0, 0.0))).norm() < 1e-15);
        let q = m.transition(&pt(0, cx(2.0, 0.0), cx(0.0, 0.0)), 1).unwrap();
        assert!((q.z - Tangent::new(cx(0.5, 0.0), cx(0.0, 0.0))).norm() < 1e-15);
        let err = m.transition(&pt(0, cx(0.0, 0.0), cx(0.0, 0.0)), 1).unwrap_err();
        assert!(matches!(err, Error::Unrepresentable { chart: 1, .. }));
        assert!(matches!(m.transition(&pt(0, cx(0.0, 0.0), cx(0.0, 0.0)), 3), Err(Error::InvalidChart { chart: 3 })));
    }

    #[test]
    fn transitions_round_trip_and_cocycle() {
        for kind in [SurfaceKind::Cp2, SurfaceKind::Cp1xCp1] {
            let m = SurfaceModel::new(kind);
            for x in lcg_points(kind, 50) {
                let p = m.point_from_homogeneous(&x).unwrap();
                for a in 0..m.chart_count() {
                    let Ok(pa) = m.transition(&p, a) else { continue };
                    let back = m.transition(&pa, p.chart).unwrap();
                    assert!((back.z - p.z).norm() < 1e-12 * (1.0 + p.z.norm()));
                    for b in 0..m.chart_count() {
                        let (Ok(pb), Ok(direct)) = (m.transition(&pa, b), m.transition(&p, b)) else { continue };
                        assert!((pb.z - direct.z).norm() < 1e-10 * (1.0 + direct.z.norm()));
                        // Jacobian cocycle: J_{a→b} J_{p→a} = J_{p→b}.
                        let jab = m.transition_jacobian(&pa, b).unwrap();
                        let jpa = m.transition_jacobian(&p, a).unwrap();
                        let jpb = m.transition_jacobian(&p, b).unwrap();
                        let defect = jab.compose(&jpa).sub(&jpb).frobenius();
                        assert!(defect < 1e-9 * (1.0 + jpb.frobenius()), "{defect}");
                    }
                }
            }
        }
    }

    #[test]
    fn jacobian_examples() {
        let m = SurfaceModel::new(SurfaceKind::Cp1xCp1);
        let p = pt(0, cx(1.0, 0.0), cx(0.3, 0.0));
        let j = m.transition_jacobian(&p, 1).unwrap();
        assert!((j.a[(0, 0)] - cx(-1.0, 0.0)).norm() < 1e-15);
        assert!((j.a[(1, 1)] - cx(1.0, 0.0)).norm() < 1e-15);
        assert!(j.is_complex_linear(0.0));
        let q = m.transition(&p, 1).unwrap();
        let round = m.transition_jacobian(&q, 0).unwrap().compose(&j);
        assert!(round.sub(&RealLinearMap::identity()).frobenius() < 1e-14);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        for kind in [SurfaceKind::Cp2, SurfaceKind::Cp1xCp1] {
            let m = SurfaceModel::new(kind);
            for x in lcg_points(kind, 20) {
                let p = m.point_from_homogeneous(&x).unwrap();
                let target = (p.chart + 1) % m.chart_count();
                let Ok(j) = m.transition_jacobian(&p, target) else { continue };
                let h = 1e-6;
                for i in 0..2 {
                    let mut zp = p;
                    let mut zm = p;
                    zp.z[i] += h;
                    zm.z[i] -= h;
                    let d = (m.transition(&zp, target).unwrap().z - m.transition(&zm, target).unwrap().z) / cx(2.0 * h, 0.0);
                    for r in 0..2 {
                        assert!((d[r] - j.a[(r, i)]).norm() < 1e-6 * (1.0 + j.a[(r, i)].norm()));
                    }
                }
            }
        }
    }

    #[test]
    fn monomial_orders() {
        let m = monomials(SurfaceKind::Cp2);
        assert_eq!(m.len(), 10);
        assert_eq!(&m[..3], &[[3, 0, 0, 0], [2, 1, 0, 0], [2, 0, 1, 0]]);
        assert_eq!(m[4], [1, 1, 1, 0]);
        assert_eq!(m[9], [0, 0, 3, 0]);
        let m = monomials(SurfaceKind::Cp1xCp1);
        assert_eq!(m.len(), 9);
        // z^0 w^1 then z^0 w^2 then z^1 w^0.
        assert_eq!(&m[1..4], &[[2, 0, 1, 1], [2, 0, 0, 2], [1, 1, 2, 0]]);
    }

    #[test]
    fn coefficient_count_checked() {
        let err = AnticanonicalSection::new(SurfaceKind::Cp2, vec![C64::new(1.0, 0.0); 8]).unwrap_err();
        assert_eq!(err, Error::CoefficientCount { expected: 10, got: 8 });
    }

    #[test]
    fn section_norm_examples() {
        let e1 = DelPezzo::e1();
        let v = e1.section_norm_sq(&pt(0, cx(0.0, 0.0), cx(0.0, 0.0))).unwrap();
        assert!((v - 1.0).abs() < 1e-15);
        let v = e1.section_norm_sq(&pt(0, cx(1.0, 0.0), cx(0.0, 0.0))).unwrap();
        assert!((v - 0.25).abs() < 1e-15);
        let e2 = DelPezzo::e2();
        assert_eq!(e2.section_norm_sq(&pt(0, cx(-1.0, 0.0), cx(0.0, 0.0))).unwrap(), 0.0);
    }

    #[test]
    fn section_transforms_with_jacobian_determinant() {
        let random = {
            let pts = lcg_points(SurfaceKind::Cp1xCp1, 1);
            AnticanonicalSection::new(SurfaceKind::Cp1xCp1, (0..9).map(|k| pts[0][k % 4] * (k as f64 + 1.0)).collect()).unwrap()
        };
        for dp in [DelPezzo::e1(), DelPezzo::e2(), DelPezzo::from_section(random)] {
            let m = dp.model;
            for x in lcg_points(dp.kind(), 40) {
                let p = m.point_from_homogeneous(&x).unwrap();
                let s = dp.section.value(&m, &p).unwrap();
                let n = dp.section_norm_sq(&p).unwrap();
                for b in 0..m.chart_count() {
                    let Ok(q) = m.transition(&p, b) else { continue };
                    let j = m.transition_jacobian(&p, b).unwrap();
                    let s_b = dp.section.value(&m, &q).unwrap();
                    assert!((s_b - s * j.a.determinant()).norm() <= 1e-10 * (1.0 + s_b.norm()));
                    let n_b = dp.section_norm_sq(&q).unwrap();
                    assert!((n_b - n).abs() <= 1e-10 * n.max(1e-300));
                }
            }
        }
    }

    /// Central differences of `f` in the real directions.
    fn fd_grad(dp: &DelPezzo, p: &ChartPoint, h: f64) -> [f64; 4] {
        let mut out = [0.0; 4];
        for (a, o) in out.iter_mut().enumerate() {
            let dir = crate::geom::real_basis(a) * cx(h, 0.0);
            let fp = dp.potential(&ChartPoint { z: p.z + dir, ..*p }).unwrap();
            let fm = dp.potential(&ChartPoint { z: p.z - dir, ..*p }).unwrap();
            *o = (fp - fm) / (2.0 * h);
        }
        out
    }

    #[test]
    fn grad_f_examples() {
        let e1 = DelPezzo::e1();
        let g = e1.grad_f(&pt(0, cx(1.0, 0.0), cx(0.0, 0.0))).unwrap();
        assert!((g[0] - cx(-1.0, 0.0)).norm() < 1e-15 && g[1].norm() < 1e-15);
        let g = e1.grad_f(&pt(0, cx(0.0, 0.0), cx(0.0, 0.0))).unwrap();
        assert!(g[0].norm() < 1e-15 && g[1].norm() < 1e-15);
        let e2 = DelPezzo::e2();
        let g = e2.grad_f(&pt(0, cx(1.0, 0.0), cx(1.0, 0.0))).unwrap();
        assert!(g[0].norm() < 1e-15 && g[1].norm() < 1e-15);
        assert_eq!(
            e2.grad_f(&pt(0, cx(-1.0, 0.0), cx(0.0, 0.0))).unwrap_err(),
            Error::OnAnticanonicalCurve
        );
    }

    #[test]
    fn grad_f_matches_finite_differences() {
        for dp in [DelPezzo::e1(), DelPezzo::e2()] {
            for x in lcg_points(dp.kind(), 100) {
                let p = dp.point(&x).unwrap();
                if dp.section_norm(&p).unwrap() < 1e-3 {
                    continue;
                }
                let g = dp.grad_f(&p).unwrap();
                let fd = fd_grad(&dp, &p, 1e-5);
                // ∂f/∂z = ½(∂_x − i∂_y) f
                for k in 0..2 {
                    let expect = cx(0.5 * fd[2 * k], -0.5 * fd[2 * k + 1]);
                    assert!((g[k] - expect).norm() <= 1e-6 * (1.0 + g[k].norm()), "{:?} {:?}", g[k], expect);
                }
            }
        }
    }

    #[test]
    fn curvature_examples() {
        let origin = pt(0, cx(0.0, 0.0), cx(0.0, 0.0));
        let f = DelPezzo::e1().curvature_form(&origin);
        let expect = (TwoForm::dz_dzbar(0, 0) + TwoForm::dz_dzbar(1, 1)) * cx(0.0, 2.0);
        assert!((f - expect).norm() < 1e-15);
        let f = DelPezzo::e2().curvature_form(&origin);
        let expect = (TwoForm::dz_dzbar(0, 0) + TwoForm::dz_dzbar(1, 1)) * cx(0.0, 3.0);
        assert!((f - expect).norm() < 1e-15);
    }

    #[test]
    fn curvature_positive_everywhere() {
        for dp in [DelPezzo::e1(), DelPezzo::e2()] {
            for x in lcg_points(dp.kind(), 1000) {
                let p = dp.point(&x).unwrap();
                let f = dp.curvature_form(&p);
                assert!(f.is_real(1e-14));
                let h = f.hermitian_part();
                let herm = nalgebra::Matrix2::from_fn(|r, c| h[(r, c)]);
                assert!(herm[(0, 0)].re > 0.0 && herm.determinant().re > 0.0);
            }
            let inv = dp.clone().with_metric(KstarMetric::inverted(dp.kind()));
            let f = inv.curvature_form(&pt(0, cx(0.1, 0.0), cx(0.0, 0.2)));
            assert!(f.hermitian_part()[(0, 0)].re < 0.0);
        }
    }

    /// `F = −i∂∂̄ log h₀ = −i∂∂̄ f` off the curve; the Levi matrix
    /// `f_{jk̄} = ¼[(H_{xx} + H_{yy}) + i(H_{x_j y_k} − H_{y_j x_k})]` comes from
    /// a central-difference real Hessian of `f`.
    #[test]
    fn curvature_matches_second_differences_of_f() {
        for dp in [DelPezzo::e1(), DelPezzo::e2()] {
            for x in lcg_points(dp.kind(), 60) {
                let p = dp.point(&x).unwrap();
                if dp.section_norm(&p).unwrap() < 1e-2 {
                    continue;
                }
                // Step scaled to the distance from the curve.
                let jet = dp.section_jet(&p).unwrap();
                let h = 2e-4 * (jet.value.norm() / jet.grad_norm().max(1e-300)).min(1.0);
                let f_at = |da: usize, sa: f64, db: usize, sb: f64| {
                    let z = p.z + crate::geom::real_basis(da) * cx(sa * h, 0.0) + crate::geom::real_basis(db) * cx(sb * h, 0.0);
                    dp.potential(&ChartPoint { z, ..p }).unwrap()
                };
                let mut hess = [[0.0; 4]; 4];
                for a in 0..4 {
                    for b in 0..4 {
                        hess[a][b] = (f_at(a, 1.0, b, 1.0) - f_at(a, 1.0, b, -1.0) - f_at(a, -1.0, b, 1.0)
                            + f_at(a, -1.0, b, -1.0))
                            / (4.0 * h * h);
                    }
                }
                let curv = dp.curvature_form(&p);
                for j in 0..2 {
                    for k in 0..2 {
                        let (xj, yj, xk, yk) = (2 * j, 2 * j + 1, 2 * k, 2 * k + 1);
                        let levi = cx(hess[xj][xk] + hess[yj][yk], hess[xj][yk] - hess[yj][xk]) * 0.25;
                        let expect = levi * cx(0.0, -1.0);
                        assert!((curv.c11[(j, k)] - expect).norm() < 1e-5, "{:?} {:?} {}", curv.c11[(j, k)], expect, dp.section_norm(&p).unwrap());
                    }
                }
            }
        }
    }
}
