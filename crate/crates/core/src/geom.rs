//! Pointwise linear algebra on the tangent space `C²` of a complex surface.
//!
//! Tangent vectors are written in complex coordinates, `v = (dz₁(v), dz₂(v))`.
//! The real basis used for Gram matrices and real matrices is
//! `(∂x₁, ∂y₁, ∂x₂, ∂y₂)`, i.e. `(1,0), (i,0), (0,1), (0,i)`.
//!
//! Wedge convention: `(α∧β)(v,w) = α(v)β(w) − α(w)β(v)` (no factor ½). Under
//! it `i dz₁∧dz̄₁ = 2 dx₁∧dy₁`.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{Matrix2, Matrix4, Vector2};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// A real tangent vector written in complex coordinates.
pub type Tangent = Vector2<C64>;

pub const I: C64 = C64::new(0.0, 1.0);

/// Tolerance for the g-compatibility checks of two complex structures.
pub const COMPAT_TOL: f64 = 1e-8;

/// Tolerance for the `op∘op = −1` check on complex structures.
pub const SQUARE_TOL: f64 = 1e-10;

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Rows map real coordinates `(x₁,y₁,x₂,y₂)` to `(v₁, v₂, v̄₁, v̄₂)`.
fn real_to_xi() -> Matrix4<C64> {
    let o = C64::new(0.0, 0.0);
    let one = c(1.0);
    Matrix4::new(
        one, I, o, o, //
        o, o, one, I, //
        one, -I, o, o, //
        o, o, one, -I,
    )
}

fn xi_to_real() -> Matrix4<C64> {
    let o = C64::new(0.0, 0.0);
    let h = c(0.5);
    let ih = C64::new(0.0, 0.5);
    Matrix4::new(
        h, o, h, o, //
        -ih, o, ih, o, //
        o, h, o, h, //
        o, -ih, o, ih,
    )
}

/// The real basis vector `e_a` as a complex tangent vector.
pub fn real_basis(a: usize) -> Tangent {
    let o = C64::new(0.0, 0.0);
    match a {
        0 => Tangent::new(c(1.0), o),
        1 => Tangent::new(I, o),
        2 => Tangent::new(o, c(1.0)),
        3 => Tangent::new(o, I),
        _ => panic!("real basis index {a} out of range"),
    }
}

pub fn tangent_to_real(v: &Tangent) -> [f64; 4] {
    [v[0].re, v[0].im, v[1].re, v[1].im]
}

pub fn tangent_from_real(x: &[f64; 4]) -> Tangent {
    Tangent::new(C64::new(x[0], x[1]), C64::new(x[2], x[3]))
}

/// A 2-form `c20 dz₁∧dz₂ + Σ c11[j,k] dz_j∧dz̄_k + c02 dz̄₁∧dz̄₂`.
///
/// Coefficients are complex, so the same type carries real forms such as
/// `ω`, `F`, `ρ` and complex ones such as `ω + iω'`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoForm {
    pub c20: C64,
    pub c11: Matrix2<C64>,
    pub c02: C64,
}

impl Default for TwoForm {
    fn default() -> Self {
        Self::zero()
    }
}

impl TwoForm {
    pub fn zero() -> Self {
        Self {
            c20: C64::new(0.0, 0.0),
            c11: Matrix2::zeros(),
            c02: C64::new(0.0, 0.0),
        }
    }

    pub fn new(c20: C64, c11: Matrix2<C64>, c02: C64) -> Self {
        Self { c20, c11, c02 }
    }

    /// `dz₁∧dz₂`.
    pub fn dz12() -> Self {
        Self {
            c20: c(1.0),
            ..Self::zero()
        }
    }

    /// `dz̄₁∧dz̄₂`.
    pub fn dzbar12() -> Self {
        Self {
            c02: c(1.0),
            ..Self::zero()
        }
    }

    /// `dz_j∧dz̄_k`.
    pub fn dz_dzbar(j: usize, k: usize) -> Self {
        let mut f = Self::zero();
        f.c11[(j, k)] = c(1.0);
        f
    }

    /// Real form from a (2,0) coefficient and an arbitrary (1,1) block: the
    /// (0,2) part and the anti-hermitian part of the block are forced so the
    /// result is real.
    pub fn real(c20: C64, c11: Matrix2<C64>) -> Self {
        Self {
            c20,
            c11: (c11 - c11.adjoint()) * c(0.5),
            c02: c20.conj(),
        }
    }

    /// The real (1,1) form `i Σ h_jk dz_j∧dz̄_k` for a hermitian matrix `h`.
    pub fn from_hermitian(h: &Matrix2<C64>) -> Self {
        Self::real(C64::new(0.0, 0.0), h * I)
    }

    /// Hermitian matrix `h` with `self^{1,1} = i Σ h_jk dz_j∧dz̄_k`.
    ///
    /// A real (1,1) form is positive iff this matrix is positive-definite.
    pub fn hermitian_part(&self) -> Matrix2<C64> {
        self.c11 * (-I)
    }

    /// Complex conjugate form.
    pub fn conj(&self) -> Self {
        Self {
            c20: self.c02.conj(),
            c11: -self.c11.adjoint(),
            c02: self.c20.conj(),
        }
    }

    pub fn re(&self) -> Self {
        (*self + self.conj()) * 0.5
    }

    pub fn im(&self) -> Self {
        (*self - self.conj()) * C64::new(0.0, -0.5)
    }

    /// Distance from the real subspace.
    pub fn reality_defect(&self) -> f64 {
        (*self - self.conj()).norm()
    }

    pub fn is_real(&self, tol: f64) -> bool {
        self.reality_defect() <= tol * self.norm().max(1.0)
    }

    /// Frobenius norm of the coefficient vector.
    pub fn norm(&self) -> f64 {
        (self.c20.norm_sqr() + self.c11.iter().map(|z| z.norm_sqr()).sum::<f64>() + self.c02.norm_sqr())
            .sqrt()
    }

    /// Coefficient matrix `M` with `β(v,w) = ξ(v)ᵀ M ξ(w)`, `ξ = (v₁,v₂,v̄₁,v̄₂)`.
    pub fn xi_matrix(&self) -> Matrix4<C64> {
        let mut m = Matrix4::zeros();
        m[(0, 1)] = self.c20;
        m[(1, 0)] = -self.c20;
        m[(2, 3)] = self.c02;
        m[(3, 2)] = -self.c02;
        for j in 0..2 {
            for k in 0..2 {
                m[(j, 2 + k)] = self.c11[(j, k)];
                m[(2 + k, j)] = -self.c11[(j, k)];
            }
        }
        m
    }

    fn from_xi_matrix(m: &Matrix4<C64>) -> Self {
        // Antisymmetrize so rounding in the inputs cannot leak into the blocks.
        let a = (m - m.transpose()) * c(0.5);
        Self {
            c20: a[(0, 1)],
            c11: Matrix2::new(a[(0, 2)], a[(0, 3)], a[(1, 2)], a[(1, 3)]),
            c02: a[(2, 3)],
        }
    }

    /// Components `Ω_ab = β(e_a, e_b)` in the real basis.
    pub fn real_matrix(&self) -> Matrix4<C64> {
        let p = real_to_xi();
        p.transpose() * self.xi_matrix() * p
    }

    /// Inverse of [`TwoForm::real_matrix`]; the input is antisymmetrized.
    pub fn from_real_matrix(omega: &Matrix4<C64>) -> Self {
        let q = xi_to_real();
        Self::from_xi_matrix(&(q.transpose() * omega * q))
    }

    pub fn from_real_matrix_f64(omega: &Matrix4<f64>) -> Self {
        Self::from_real_matrix(&omega.map(c))
    }

    pub fn evaluate(&self, v: &Tangent, w: &Tangent) -> C64 {
        let xv = nalgebra::Vector4::new(v[0], v[1], v[0].conj(), v[1].conj());
        let xw = nalgebra::Vector4::new(w[0], w[1], w[0].conj(), w[1].conj());
        (xv.transpose() * self.xi_matrix() * xw)[(0, 0)]
    }

    /// The (1,1) component with respect to the standard structure.
    pub fn p11(&self) -> Self {
        Self {
            c20: C64::new(0.0, 0.0),
            c11: self.c11,
            c02: C64::new(0.0, 0.0),
        }
    }

    /// `(J*β)(v,w) = β(Jv, Jw)`.
    pub fn pullback(&self, j: &RealLinearMap) -> Self {
        let t = j.xi_matrix();
        Self::from_xi_matrix(&(t.transpose() * self.xi_matrix() * t))
    }

    /// Coefficient of `dx₁∧dy₁∧dx₂∧dy₂` in `self ∧ other`.
    pub fn wedge(&self, other: &Self) -> C64 {
        let a = self.real_matrix();
        let b = other.real_matrix();
        a[(0, 1)] * b[(2, 3)] - a[(0, 2)] * b[(1, 3)] + a[(0, 3)] * b[(1, 2)] + a[(1, 2)] * b[(0, 3)]
            - a[(1, 3)] * b[(0, 2)]
            + a[(2, 3)] * b[(0, 1)]
    }

    /// Real form `(v,w) ↦ β(Av, w)` for an endomorphism `A`.
    pub fn compose_first(&self, a: &RealLinearMap) -> Self {
        let m = self.real_matrix();
        let r = a.real_matrix().map(c);
        Self::from_real_matrix(&(r.transpose() * m))
    }
}

impl Add for TwoForm {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            c20: self.c20 + o.c20,
            c11: self.c11 + o.c11,
            c02: self.c02 + o.c02,
        }
    }
}

impl Sub for TwoForm {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self {
            c20: self.c20 - o.c20,
            c11: self.c11 - o.c11,
            c02: self.c02 - o.c02,
        }
    }
}

impl Neg for TwoForm {
    type Output = Self;
    fn neg(self) -> Self {
        self * -1.0
    }
}

impl Mul<f64> for TwoForm {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        self * c(s)
    }
}

impl Mul<C64> for TwoForm {
    type Output = Self;
    fn mul(self, s: C64) -> Self {
        Self {
            c20: self.c20 * s,
            c11: self.c11 * s,
            c02: self.c02 * s,
        }
    }
}

/// A real-linear map of `C²`, `v ↦ A v + B v̄`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RealLinearMap {
    pub a: Matrix2<C64>,
    pub b: Matrix2<C64>,
}

impl RealLinearMap {
    pub fn new(a: Matrix2<C64>, b: Matrix2<C64>) -> Self {
        Self { a, b }
    }

    pub fn identity() -> Self {
        Self::complex_linear(Matrix2::identity())
    }

    pub fn complex_linear(a: Matrix2<C64>) -> Self {
        Self {
            a,
            b: Matrix2::zeros(),
        }
    }

    /// Coordinate conjugation `v ↦ v̄`.
    pub fn conjugation() -> Self {
        Self {
            a: Matrix2::zeros(),
            b: Matrix2::identity(),
        }
    }

    pub fn apply(&self, v: &Tangent) -> Tangent {
        self.a * v + self.b * v.map(|z| z.conj())
    }

    /// `self ∘ first`.
    pub fn compose(&self, first: &Self) -> Self {
        Self {
            a: self.a * first.a + self.b * first.b.map(|z| z.conj()),
            b: self.a * first.b + self.b * first.a.map(|z| z.conj()),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            a: self.a * c(s),
            b: self.b * c(s),
        }
    }

    pub fn sub(&self, o: &Self) -> Self {
        Self {
            a: self.a - o.a,
            b: self.b - o.b,
        }
    }

    /// Action on `ξ = (v, v̄)`: `[[A, B], [B̄, Ā]]`.
    pub fn xi_matrix(&self) -> Matrix4<C64> {
        let mut t = Matrix4::zeros();
        for r in 0..2 {
            for k in 0..2 {
                t[(r, k)] = self.a[(r, k)];
                t[(r, 2 + k)] = self.b[(r, k)];
                t[(2 + r, k)] = self.b[(r, k)].conj();
                t[(2 + r, 2 + k)] = self.a[(r, k)].conj();
            }
        }
        t
    }

    /// Real 4×4 matrix in the basis `(∂x₁, ∂y₁, ∂x₂, ∂y₂)`.
    pub fn real_matrix(&self) -> Matrix4<f64> {
        let mut m = Matrix4::zeros();
        for a in 0..4 {
            let col = tangent_to_real(&self.apply(&real_basis(a)));
            for r in 0..4 {
                m[(r, a)] = col[r];
            }
        }
        m
    }

    pub fn from_real_matrix(m: &Matrix4<f64>) -> Self {
        let q = xi_to_real();
        let mut a = Matrix2::zeros();
        let mut b = Matrix2::zeros();
        for col in 0..4 {
            let w = Tangent::new(C64::new(m[(0, col)], m[(1, col)]), C64::new(m[(2, col)], m[(3, col)]));
            for r in 0..2 {
                for k in 0..2 {
                    a[(r, k)] += w[r] * q[(col, k)];
                    b[(r, k)] += w[r] * q[(col, 2 + k)];
                }
            }
        }
        Self { a, b }
    }

    pub fn inverse(&self) -> Result<Self> {
        let m = self.real_matrix();
        let cond = condition_number(&m);
        if !cond.is_finite() || cond > 1e12 {
            return Err(Error::DegenerateJacobian { condition: cond });
        }
        let inv = m.try_inverse().ok_or(Error::DegenerateJacobian {
            condition: f64::INFINITY,
        })?;
        Ok(Self::from_real_matrix(&inv))
    }

    pub fn condition_number(&self) -> f64 {
        condition_number(&self.real_matrix())
    }

    /// Largest singular value.
    pub fn operator_norm(&self) -> f64 {
        self.real_matrix().svd(false, false).singular_values.max()
    }

    pub fn frobenius(&self) -> f64 {
        self.real_matrix().norm()
    }

    pub fn is_complex_linear(&self, tol: f64) -> bool {
        self.b.iter().all(|z| z.norm() <= tol)
    }
}

pub fn condition_number(m: &Matrix4<f64>) -> f64 {
    let sv = m.svd(false, false).singular_values;
    let lo = sv.min();
    if lo == 0.0 {
        f64::INFINITY
    } else {
        sv.max() / lo
    }
}

/// An almost complex structure on the tangent space.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ComplexStructure {
    op: RealLinearMap,
}

impl ComplexStructure {
    pub fn new(op: RealLinearMap) -> Result<Self> {
        // Roundoff in K² scales with ‖K‖², so the bound is relative to it.
        let residual = square_defect(&op);
        if residual > SQUARE_TOL * op.operator_norm().powi(2).max(1.0) {
            return Err(Error::NotComplexStructure { residual });
        }
        Ok(Self { op })
    }

    /// `I⁺`, the standard structure `v ↦ iv` of any holomorphic chart.
    pub fn standard() -> Self {
        Self {
            op: RealLinearMap::complex_linear(Matrix2::identity() * I),
        }
    }

    pub fn op(&self) -> &RealLinearMap {
        &self.op
    }

    pub fn negate(&self) -> Self {
        Self { op: self.op.scale(-1.0) }
    }

    pub fn apply(&self, v: &Tangent) -> Tangent {
        self.op.apply(v)
    }

    pub fn square_defect(&self) -> f64 {
        square_defect(&self.op)
    }
}

fn square_defect(op: &RealLinearMap) -> f64 {
    let sq = op.compose(op);
    sq.sub(&RealLinearMap::identity().scale(-1.0)).operator_norm()
}

/// `J⁻¹ ∘ I ∘ J`, the structure `J*I` at the source of `J`.
pub fn conjugate_structure(cs: &ComplexStructure, j: &RealLinearMap) -> Result<ComplexStructure> {
    let inv = j.inverse()?;
    ComplexStructure::new(inv.compose(&cs.op).compose(j))
}

/// A bilinear form on the real tangent space, stored as its Gram matrix in
/// the basis `(∂x₁, ∂y₁, ∂x₂, ∂y₂)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointMetric {
    pub gram: Matrix4<f64>,
}

impl PointMetric {
    pub fn new(gram: Matrix4<f64>) -> Self {
        Self { gram }
    }

    pub fn eval(&self, v: &Tangent, w: &Tangent) -> f64 {
        let x = nalgebra::Vector4::from(tangent_to_real(v));
        let y = nalgebra::Vector4::from(tangent_to_real(w));
        (x.transpose() * self.gram * y)[(0, 0)]
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let sym = (self.gram + self.gram.transpose()) * 0.5;
        sym.symmetric_eigenvalues().min()
    }

    pub fn is_positive_definite(&self) -> bool {
        self.min_eigenvalue() > 0.0
    }

    /// `max |g(Iv, Iw) − g(v, w)|` over the real basis.
    pub fn compatibility_defect(&self, cs: &ComplexStructure) -> f64 {
        let r = cs.op.real_matrix();
        (r.transpose() * self.gram * r - self.gram).amax()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { gram: self.gram * s }
    }

    /// Hermitian form `(v,w) ↦ g(Iv, w)`.
    pub fn hermitian_form(&self, cs: &ComplexStructure) -> TwoForm {
        let r = cs.op.real_matrix();
        TwoForm::from_real_matrix_f64(&(r.transpose() * self.gram))
    }
}

/// `g(v,u) = w(v, I u)`. For a real (1,1) form this is symmetric and agrees
/// with `ω⁺(X,Y) = g(IX, Y)`.
pub fn metric_from_form(w: &TwoForm, cs: &ComplexStructure) -> Result<PointMetric> {
    let mut gram = Matrix4::zeros();
    for a in 0..4 {
        let ea = real_basis(a);
        for b in 0..4 {
            gram[(a, b)] = w.evaluate(&ea, &cs.apply(&real_basis(b))).re;
        }
    }
    let asym = (gram - gram.transpose()).amax();
    if asym > COMPAT_TOL * gram.amax().max(1.0) {
        return Err(Error::NotType11 { asymmetry: asym });
    }
    Ok(PointMetric::new((gram + gram.transpose()) * 0.5))
}

/// The quantities relating two g-orthogonal complex structures.
#[derive(Clone, Copy, Debug)]
pub struct QuaternionPackage {
    /// `I⁺I⁻ + I⁻I⁺ = −2p`.
    pub p: f64,
    /// `[I⁺, I⁻]`.
    pub commutator: RealLinearMap,
    /// `φ(v,w) = g([I⁺,I⁻]v, w)`.
    pub phi: TwoForm,
    /// `φ'(v,w) = φ(I⁺v, w)`.
    pub phi1: TwoForm,
    /// `φ''(v,w) = φ(I⁻v, w)`.
    pub phi2: TwoForm,
    pub norm_phi_sq: f64,
}

/// `p = −¼ tr(I⁺I⁻)`; needs no metric.
pub fn angle_p(iplus: &ComplexStructure, iminus: &ComplexStructure) -> f64 {
    -0.25 * (iplus.op.real_matrix() * iminus.op.real_matrix()).trace()
}

pub fn commutator(iplus: &ComplexStructure, iminus: &ComplexStructure) -> RealLinearMap {
    iplus.op.compose(&iminus.op).sub(&iminus.op.compose(&iplus.op))
}

/// Orientation class of a complex structure: sign of `det[v, Jv, w, Jw]`.
fn orientation(cs: &ComplexStructure) -> f64 {
    let v = real_basis(0);
    let jv = cs.apply(&v);
    let mut best = 0.0f64;
    for b in 1..4 {
        let w = real_basis(b);
        let jw = cs.apply(&w);
        let cols = [v, jv, w, jw].map(|t| tangent_to_real(&t));
        let m = Matrix4::from_fn(|r, k| cols[k][r]);
        let d = m.determinant();
        if d.abs() > best.abs() {
            best = d;
        }
    }
    best.signum()
}

pub fn quaternion_package(
    iplus: &ComplexStructure,
    iminus: &ComplexStructure,
    g: &PointMetric,
) -> Result<QuaternionPackage> {
    let scale = g.gram.amax().max(f64::MIN_POSITIVE);
    for (name, cs) in [("I+", iplus), ("I-", iminus)] {
        let defect = g.compatibility_defect(cs);
        if defect > COMPAT_TOL * scale.max(1.0) {
            return Err(Error::IncompatibleMetric {
                structure: name,
                defect,
            });
        }
    }
    if orientation(iplus) != orientation(iminus) {
        return Err(Error::OppositeOrientation);
    }
    let p = angle_p(iplus, iminus);
    let comm = commutator(iplus, iminus);
    let cm = comm.real_matrix();
    let gram = g.gram;
    let phi = TwoForm::from_real_matrix_f64(&(cm.transpose() * gram));
    let phi1 = TwoForm::from_real_matrix_f64(&((cm * iplus.op.real_matrix()).transpose() * gram));
    let phi2 = TwoForm::from_real_matrix_f64(&((cm * iminus.op.real_matrix()).transpose() * gram));
    let norm_phi_sq = if cm.amax() == 0.0 {
        0.0
    } else {
        let ginv = gram.try_inverse().ok_or(Error::DegenerateMetric)?;
        0.25 * (ginv * cm.transpose() * gram * cm).trace()
    };
    Ok(QuaternionPackage {
        p,
        commutator: comm,
        phi,
        phi1,
        phi2,
        norm_phi_sq,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cx(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn e(a: usize) -> Tangent {
        real_basis(a)
    }

    #[test]
    fn basis_pairing() {
        let v = Tangent::new(cx(1.0, 0.0), cx(0.0, 0.0));
        let w = Tangent::new(cx(0.0, 0.0), cx(1.0, 0.0));
        assert_eq!(TwoForm::dz12().evaluate(&v, &w), cx(1.0, 0.0));
    }

    #[test]
    fn golden_kahler_pairing() {
        // i dz₁∧dz̄₁ (∂x₁, ∂y₁): dz₁(∂x₁) dz̄₁(∂y₁) − dz₁(∂y₁) dz̄₁(∂x₁) = −i − i,
        // times i gives 2.
        let f = TwoForm::dz_dzbar(0, 0) * I;
        let val = f.evaluate(&e(0), &e(1));
        assert!((val - cx(2.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn p11_examples() {
        assert_eq!(TwoForm::dz12().p11(), TwoForm::zero());
        let k = (TwoForm::dz_dzbar(0, 0) + TwoForm::dz_dzbar(1, 1)) * I;
        assert_eq!(k.p11(), k);
        let sigma_inv = TwoForm::dz12() * cx(0.3, -1.2).inv();
        assert_eq!(sigma_inv.im().p11().norm(), 0.0);
        assert_eq!(sigma_inv.re().p11().norm(), 0.0);
    }

    #[test]
    fn pullback_examples() {
        let f = TwoForm::dz12();
        assert_eq!(f.pullback(&RealLinearMap::identity()), f);
        let two = RealLinearMap::identity().scale(2.0);
        assert!((f.pullback(&two) - f * 4.0).norm() < 1e-14);
        let conj = f.pullback(&RealLinearMap::conjugation());
        assert!((conj - TwoForm::dzbar12()).norm() < 1e-14);
    }

    #[test]
    fn conjugate_structure_examples() {
        let ip = ComplexStructure::standard();
        let same = conjugate_structure(&ip, &RealLinearMap::identity()).unwrap();
        assert!(same.op().sub(ip.op()).frobenius() < 1e-14);

        let hol = RealLinearMap::complex_linear(Matrix2::new(cx(1.0, 2.0), cx(0.5, 0.0), cx(-1.0, 0.3), cx(2.0, -1.0)));
        let still = conjugate_structure(&ip, &hol).unwrap();
        assert!(still.op().sub(ip.op()).frobenius() < 1e-12);

        // Conjugation: C⁻¹ (i·) C v = conj(i v̄) = −i v.
        let flipped = conjugate_structure(&ip, &RealLinearMap::conjugation()).unwrap();
        assert!(flipped.op().sub(&ip.negate().op().clone()).frobenius() < 1e-14);
        assert!(flipped.op().is_complex_linear(0.0));
    }

    #[test]
    fn singular_map_is_degenerate() {
        let j = RealLinearMap::complex_linear(Matrix2::new(cx(1.0, 0.0), cx(0.0, 0.0), cx(0.0, 0.0), cx(0.0, 0.0)));
        let err = conjugate_structure(&ComplexStructure::standard(), &j).unwrap_err();
        assert!(matches!(err, Error::DegenerateJacobian { .. }));
    }

    #[test]
    fn metric_from_forms() {
        let ip = ComplexStructure::standard();
        let h = Matrix2::new(cx(2.0, 0.0), cx(0.0, 0.0), cx(0.0, 0.0), cx(2.0, 0.0));
        let f = TwoForm::from_hermitian(&h);
        let g = metric_from_form(&f, &ip).unwrap();
        // g(v,v) = 2 Re Σ h_jk v_j v̄_k: diagonal 4.
        assert!((g.gram - Matrix4::identity() * 4.0).amax() < 1e-14);
        assert!(g.is_positive_definite());
        assert_eq!(metric_from_form(&TwoForm::zero(), &ip).unwrap().gram, Matrix4::zeros());
        let neg = metric_from_form(&(-f), &ip).unwrap();
        assert!(neg.min_eigenvalue() < 0.0 && neg.gram.symmetric_eigenvalues().max() < 0.0);
        // A (2,0)+(0,2) form is not (1,1): asymmetric result.
        assert!(matches!(
            metric_from_form(&TwoForm::dz12().re(), &ip),
            Err(Error::NotType11 { .. })
        ));
    }

    #[test]
    fn package_trivial_pairs() {
        let ip = ComplexStructure::standard();
        let g = PointMetric::new(Matrix4::identity());
        let q = quaternion_package(&ip, &ip, &g).unwrap();
        assert!((q.p - 1.0).abs() < 1e-15);
        assert_eq!(q.phi.norm(), 0.0);
        assert_eq!(q.norm_phi_sq, 0.0);
        let q = quaternion_package(&ip, &ip.negate(), &g).unwrap();
        assert!((q.p + 1.0).abs() < 1e-15);
        assert_eq!(q.commutator.frobenius(), 0.0);
        // Conjugating only z₂ reverses the orientation.
        let other = ComplexStructure::new(RealLinearMap::new(
            Matrix2::new(I, cx(0.0, 0.0), cx(0.0, 0.0), -I),
            Matrix2::zeros(),
        ))
        .unwrap();
        assert!(matches!(
            quaternion_package(&ip, &other, &g),
            Err(Error::OppositeOrientation)
        ));
    }

    fn arb_c() -> impl Strategy<Value = C64> {
        (-2.0f64..2.0, -2.0f64..2.0).prop_map(|(a, b)| cx(a, b))
    }

    fn arb_m2() -> impl Strategy<Value = Matrix2<C64>> {
        proptest::collection::vec(arb_c(), 4).prop_map(|v| Matrix2::new(v[0], v[1], v[2], v[3]))
    }

    fn arb_map() -> impl Strategy<Value = RealLinearMap> {
        (arb_m2(), arb_m2()).prop_map(|(a, b)| RealLinearMap::new(a, b))
    }

    fn arb_form() -> impl Strategy<Value = TwoForm> {
        (arb_c(), arb_m2(), arb_c()).prop_map(|(a, b, c)| TwoForm::new(a, b, c))
    }

    fn arb_real_form() -> impl Strategy<Value = TwoForm> {
        (arb_c(), arb_m2()).prop_map(|(a, b)| TwoForm::real(a, b))
    }

    fn arb_tangent() -> impl Strategy<Value = Tangent> {
        (arb_c(), arb_c()).prop_map(|(a, b)| Tangent::new(a, b))
    }

    /// Orthogonal complex structure for the flat metric built from a unit
    /// imaginary quaternion acting on the right: same orientation as I⁺.
    fn structure_from_angles(theta: f64, psi: f64) -> ComplexStructure {
        // Structures compatible with the flat metric and orientation of I⁺
        // are v ↦ cosθ·iv + sinθ·e^{iψ}·(−v̄₂, v̄₁).
        let (s, c_) = theta.sin_cos();
        let ph = C64::from_polar(s, psi);
        let a = Matrix2::identity() * (I * c_);
        let b = Matrix2::new(cx(0.0, 0.0), -ph, ph, cx(0.0, 0.0));
        ComplexStructure::new(RealLinearMap::new(a, b)).unwrap()
    }

    proptest! {
        #[test]
        fn evaluate_is_antisymmetric(f in arb_form(), v in arb_tangent(), w in arb_tangent()) {
            prop_assert!((f.evaluate(&v, &w) + f.evaluate(&w, &v)).norm() < 1e-12);
            prop_assert!(f.evaluate(&v, &v).norm() < 1e-12);
        }

        #[test]
        fn real_forms_evaluate_real(f in arb_real_form(), v in arb_tangent(), w in arb_tangent()) {
            prop_assert!(f.evaluate(&v, &w).im.abs() < 1e-12);
            prop_assert!(f.is_real(1e-14));
        }

        #[test]
        fn real_matrix_roundtrip(f in arb_form()) {
            prop_assert!((TwoForm::from_real_matrix(&f.real_matrix()) - f).norm() < 1e-12);
        }

        #[test]
        fn p11_idempotent_and_linear(f in arb_form(), g in arb_form(), s in -3.0f64..3.0) {
            prop_assert_eq!(f.p11().p11(), f.p11());
            prop_assert!(((f * s + g).p11() - (f.p11() * s + g.p11())).norm() < 1e-12);
        }

        #[test]
        fn pullback_matches_evaluation(f in arb_form(), j in arb_map(), v in arb_tangent(), w in arb_tangent()) {
            let lhs = f.pullback(&j).evaluate(&v, &w);
            let rhs = f.evaluate(&j.apply(&v), &j.apply(&w));
            prop_assert!((lhs - rhs).norm() < 1e-10 * (1.0 + rhs.norm()));
        }

        #[test]
        fn pullback_functorial(f in arb_real_form(), j1 in arb_map(), j2 in arb_map()) {
            let lhs = f.pullback(&j1.compose(&j2));
            let rhs = f.pullback(&j1).pullback(&j2);
            prop_assert!((lhs - rhs).norm() <= 1e-12 * (1.0 + lhs.norm()));
            prop_assert!(f.pullback(&j1).is_real(1e-12));
        }

        #[test]
        fn composition_associative(a in arb_map(), b in arb_map(), c_ in arb_map(), v in arb_tangent()) {
            let left = a.compose(&b).compose(&c_);
            let right = a.compose(&b.compose(&c_));
            prop_assert!(left.sub(&right).frobenius() < 1e-10);
            let direct = a.apply(&b.apply(&v));
            prop_assert!((a.compose(&b).apply(&v) - direct).norm() < 1e-10);
        }

        #[test]
        fn inverse_both_sides(j in arb_map()) {
            prop_assume!(j.condition_number() < 1e6);
            let inv = j.inverse().unwrap();
            let id = RealLinearMap::identity();
            prop_assert!(inv.compose(&j).sub(&id).frobenius() < 1e-8);
            prop_assert!(j.compose(&inv).sub(&id).frobenius() < 1e-8);
        }

        #[test]
        fn real_matrix_roundtrip_maps(j in arb_map()) {
            let back = RealLinearMap::from_real_matrix(&j.real_matrix());
            prop_assert!(back.sub(&j).frobenius() < 1e-12);
        }

        #[test]
        fn conjugated_structure_squares(j in arb_map()) {
            prop_assume!(j.condition_number() < 1e4);
            let cs = conjugate_structure(&ComplexStructure::standard(), &j).unwrap();
            prop_assert!(cs.square_defect() <= SQUARE_TOL * cs.op().operator_norm().powi(2).max(1.0));
        }

        #[test]
        fn quaternion_identities(theta in 0.05f64..3.0, psi in 0.0f64..6.28, scale in 0.1f64..3.0) {
            let ip = ComplexStructure::standard();
            let im = structure_from_angles(theta, psi);
            let g = PointMetric::new(Matrix4::identity() * scale);
            let q = quaternion_package(&ip, &im, &g).unwrap();
            prop_assert!((q.p - theta.cos()).abs() < 1e-12);
            prop_assert!((q.norm_phi_sq - 4.0 * (1.0 - q.p * q.p)).abs() < 1e-9);
            // φ is of type (2,0)+(0,2) for both structures.
            prop_assert!((q.phi.pullback(ip.op()) + q.phi).norm() < 1e-12);
            prop_assert!((q.phi.pullback(im.op()) + q.phi).norm() < 1e-12);
            prop_assert!(q.phi.p11().norm() < 1e-12);
            // I⁺I⁻ + I⁻I⁺ = −2p.
            let anti = ip.op().compose(im.op()).real_matrix() + im.op().compose(ip.op()).real_matrix();
            prop_assert!((anti + Matrix4::identity() * (2.0 * q.p)).amax() < 1e-12);
        }
    }

    #[test]
    fn phi_type_identity_fixed_case() {
        let ip = ComplexStructure::standard();
        let im = structure_from_angles(1.0, 0.4);
        let g = PointMetric::new(Matrix4::identity());
        let q = quaternion_package(&ip, &im, &g).unwrap();
        let (v, w) = (e(0) + e(3), e(1) - e(2) * cx(2.0, 0.0));
        let base = q.phi.evaluate(&v, &w);
        assert!((q.phi.evaluate(&ip.apply(&v), &ip.apply(&w)) + base).norm() < 1e-12);
        assert!((q.phi.evaluate(&im.apply(&v), &im.apply(&w)) + base).norm() < 1e-12);
    }

    #[test]
    fn wedge_of_kahler_form() {
        let k = TwoForm::from_hermitian(&Matrix2::identity());
        // k = 2(dx₁∧dy₁ + dx₂∧dy₂) so k∧k = 8 dx₁dy₁dx₂dy₂.
        assert!((k.wedge(&k) - cx(8.0, 0.0)).norm() < 1e-14);
        let hs = TwoForm::dz12();
        assert!(hs.wedge(&hs).norm() < 1e-15);
    }
}
