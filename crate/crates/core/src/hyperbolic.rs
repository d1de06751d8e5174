//! Möbius transformations acting on the hyperbolic plane and on hyperbolic 3-space.
//!
//! Both models use 2×2 unimodular complex matrices. In the plane model the
//! entries are real and the boundary is `ℝ ∪ {∞}`; in the space model the
//! boundary is `ℂ ∪ {∞}` and points of the upper half-space are written
//! `x + t·j` with `x ∈ ℂ`, `t > 0`. The base point is `i` (resp. `j`).

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{cx, real, Cx, Real};

/// Tolerance on `|trace| - 2` separating the conjugacy types.
pub const TRACE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Model {
    UpperHalfPlane2D,
    UpperHalfSpace3D,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HyperbolicError {
    #[error("matrix is singular")]
    Singular,
    #[error("plane model requires real entries")]
    NonRealEntries,
    #[error("plane model requires positive determinant")]
    OrientationReversing,
    #[error("element is {0:?}, not hyperbolic/loxodromic")]
    NotLoxodromic(Classification),
    #[error("boundary point is the pole of the map")]
    PoleAtPoint,
    #[error("maps live in different models")]
    ModelMismatch,
}

/// Conjugacy type of a nontrivial isometry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    Identity,
    Elliptic,
    Parabolic,
    HyperbolicOrLoxodromic,
}

/// Translation length and rotation angle of a hyperbolic/loxodromic element.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeodesicInvariants<T> {
    pub length: T,
    /// Rotation about the axis, in `(-π, π]`; always zero in the plane model.
    pub holonomy: T,
}

/// A point of the upper half-plane (`x` real) or upper half-space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HPoint<T> {
    pub x: Cx<T>,
    pub t: T,
}

impl<T: Real> HPoint<T> {
    /// The base point `i` / `j`.
    pub fn origin() -> Self {
        Self { x: Cx::new(T::zero(), T::zero()), t: T::one() }
    }

    pub fn distance(&self, other: &Self) -> T {
        let dx = self.x - other.x;
        let dt = self.t - other.t;
        let num = dx.norm_sqr() + dt * dt;
        acosh_one_plus(num / (T::lit(2.0) * self.t * other.t))
    }

    /// Hyperbolic distance to the closed half-space bounded by the hemisphere
    /// over `disk` (zero when the point lies inside it).
    pub fn distance_to_halfspace(&self, disk: &Disk<T>) -> T {
        let q = (self.x - disk.center).norm_sqr() + self.t * self.t - disk.radius * disk.radius;
        if q <= T::zero() {
            T::zero()
        } else {
            (q / (T::lit(2.0) * disk.radius * self.t)).asinh()
        }
    }
}

/// A round disk in the boundary plane; in the plane model its center is real.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Disk<T> {
    pub center: Cx<T>,
    pub radius: T,
}

impl<T: Real> Disk<T> {
    pub fn new(center: Cx<T>, radius: T) -> Self {
        Self { center, radius }
    }

    pub fn contains(&self, z: Cx<T>) -> bool {
        (z - self.center).norm() <= self.radius
    }

    /// Signed Euclidean gap between the two closed disks (negative on overlap).
    pub fn gap(&self, other: &Self) -> T {
        (self.center - other.center).norm() - self.radius - other.radius
    }
}

/// `acosh(1 + u)` for `u ≥ 0` without cancellation near zero.
fn acosh_one_plus<T: Real>(u: T) -> T {
    let u = u.max(T::zero());
    T::lit(2.0) * (u / T::lit(2.0)).sqrt().asinh()
}

fn wrap_angle<T: Real>(theta: T) -> T {
    let two_pi = T::TAU();
    let mut r = theta % two_pi;
    if r <= -T::PI() {
        r = r + two_pi;
    } else if r > T::PI() {
        r = r - two_pi;
    }
    r
}

/// An orientation-preserving isometry, stored as a unimodular matrix
/// `[[a, b], [c, d]]` up to sign.
#[derive(Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MoebiusRepr", into = "MoebiusRepr")]
#[serde(bound = "T: Real")]
pub struct Moebius<T> {
    pub a: Cx<T>,
    pub b: Cx<T>,
    pub c: Cx<T>,
    pub d: Cx<T>,
    pub model: Model,
}

impl<T: fmt::Debug> fmt::Debug for Moebius<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Moebius[{:?} {:?}; {:?} {:?}]", self.a, self.b, self.c, self.d)
    }
}

impl<T: Real> Moebius<T> {
    /// Builds a map from arbitrary nonsingular entries, rescaling to determinant one.
    pub fn new(a: Cx<T>, b: Cx<T>, c: Cx<T>, d: Cx<T>, model: Model) -> Result<Self, HyperbolicError> {
        let det = a * d - b * c;
        let scale = a.norm().max(b.norm()).max(c.norm()).max(d.norm());
        if scale == T::zero() || det.norm() <= T::epsilon() * scale * scale {
            return Err(HyperbolicError::Singular);
        }
        match model {
            Model::UpperHalfPlane2D => {
                let tol = T::lit(1e-12) * scale;
                if [a, b, c, d].iter().any(|z| z.im.abs() > tol) {
                    return Err(HyperbolicError::NonRealEntries);
                }
                let det = det.re;
                if det <= T::zero() {
                    return Err(HyperbolicError::OrientationReversing);
                }
                let k = det.sqrt().recip();
                Ok(Self { a: real(a.re * k), b: real(b.re * k), c: real(c.re * k), d: real(d.re * k), model })
            }
            Model::UpperHalfSpace3D => {
                let k = det.sqrt().inv();
                Ok(Self { a: a * k, b: b * k, c: c * k, d: d * k, model })
            }
        }
    }

    pub fn from_real(a: T, b: T, c: T, d: T) -> Result<Self, HyperbolicError> {
        Self::new(real(a), real(b), real(c), real(d), Model::UpperHalfPlane2D)
    }

    pub fn identity(model: Model) -> Self {
        let one = real(T::one());
        let zero = real(T::zero());
        Self { a: one, b: zero, c: zero, d: one, model }
    }

    /// `diag(λ, 1/λ)`: translation along the vertical axis with complex
    /// multiplier `λ²`.
    pub fn diagonal(lambda: Cx<T>, model: Model) -> Result<Self, HyperbolicError> {
        Self::new(lambda, real(T::zero()), real(T::zero()), lambda.inv(), model)
    }

    /// Rotation of the plane model about `i` by angle `alpha`.
    pub fn rotation_about_i(alpha: T) -> Self {
        let h = alpha / T::lit(2.0);
        let (s, c) = h.sin_cos();
        Self { a: real(c), b: real(s), c: real(-s), d: real(c), model: Model::UpperHalfPlane2D }
    }

    pub fn det(&self) -> Cx<T> {
        self.a * self.d - self.b * self.c
    }

    pub fn trace(&self) -> Cx<T> {
        self.a + self.d
    }

    /// Matrix product `self · other`.
    ///
    /// Not renormalized: for long words `ad − bc` cancels catastrophically,
    /// while the entries themselves stay accurate to relative precision.
    pub fn compose(&self, other: &Self) -> Self {
        debug_assert_eq!(self.model, other.model);
        Self {
            a: self.a * other.a + self.b * other.c,
            b: self.a * other.b + self.b * other.d,
            c: self.c * other.a + self.d * other.c,
            d: self.c * other.b + self.d * other.d,
            model: self.model,
        }
    }

    pub fn inverse(&self) -> Self {
        Self { a: self.d, b: -self.b, c: -self.c, d: self.a, model: self.model }
    }

    pub fn negated(&self) -> Self {
        Self { a: -self.a, b: -self.b, c: -self.c, d: -self.d, model: self.model }
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut acc = Self::identity(self.model);
        for _ in 0..k {
            acc = acc.compose(self);
        }
        acc
    }

    /// Equality in `PSL₂`: `g` and `-g` compare equal.
    pub fn projectively_eq(&self, other: &Self, tol: T) -> bool {
        let same = [(self.a, other.a), (self.b, other.b), (self.c, other.c), (self.d, other.d)];
        let plus = same.iter().all(|(x, y)| (*x - *y).norm() <= tol);
        let minus = same.iter().all(|(x, y)| (*x + *y).norm() <= tol);
        self.model == other.model && (plus || minus)
    }

    /// Action on a finite boundary point; `None` at the pole.
    pub fn apply_boundary(&self, x: Cx<T>) -> Option<Cx<T>> {
        let den = self.c * x + self.d;
        if den.norm_sqr() == T::zero() {
            None
        } else {
            Some((self.a * x + self.b) / den)
        }
    }

    /// Image of `∞`; `None` when `∞` is fixed.
    pub fn image_of_infinity(&self) -> Option<Cx<T>> {
        if self.c.norm_sqr() == T::zero() {
            None
        } else {
            Some(self.a / self.c)
        }
    }

    /// Action on the upper half-plane / half-space (determinant one assumed).
    pub fn apply_point(&self, p: &HPoint<T>) -> HPoint<T> {
        let t2 = p.t * p.t;
        let num = self.a * p.x + self.b;
        let den = self.c * p.x + self.d;
        let denom = den.norm_sqr() + self.c.norm_sqr() * t2;
        let x = (num * den.conj() + self.a * self.c.conj() * t2) / denom;
        HPoint { x, t: p.t / denom }
    }

    /// Image of the base point.
    pub fn apply_origin(&self) -> HPoint<T> {
        // Specialization of `apply_point` at x = 0, t = 1.
        let denom = self.d.norm_sqr() + self.c.norm_sqr();
        let x = (self.b * self.d.conj() + self.a * self.c.conj()) / denom;
        HPoint { x, t: denom.recip() }
    }

    /// Preimage of the base point, `g⁻¹(o)`.
    pub fn apply_inverse_origin(&self) -> HPoint<T> {
        self.inverse().apply_origin()
    }

    /// Hyperbolic distance from the base point to its image.
    pub fn displacement(&self) -> T {
        let frob = self.a.norm_sqr() + self.b.norm_sqr() + self.c.norm_sqr() + self.d.norm_sqr();
        // cosh d = |g|_F^2 / 2 for unimodular g.
        acosh_one_plus((frob - T::lit(2.0)) / T::lit(2.0))
    }

    pub fn classify(&self) -> Classification {
        let tol = T::lit(TRACE_TOL);
        let tr = self.trace();
        if tr.im.abs() > tol {
            return Classification::HyperbolicOrLoxodromic;
        }
        let r = tr.re.abs();
        let two = T::lit(2.0);
        if r > two + tol {
            Classification::HyperbolicOrLoxodromic
        } else if r < two - tol {
            Classification::Elliptic
        } else if self.projectively_eq(&Self::identity(self.model), T::lit(1e-9)) {
            Classification::Identity
        } else {
            Classification::Parabolic
        }
    }

    /// Translation length and holonomy from `trace = ±2 cosh((ℓ + iθ)/2)`.
    pub fn geodesic_invariants(&self) -> Result<GeodesicInvariants<T>, HyperbolicError> {
        match self.classify() {
            Classification::HyperbolicOrLoxodromic => {}
            other => return Err(HyperbolicError::NotLoxodromic(other)),
        }
        let tr = self.trace();
        let four = real(T::lit(4.0));
        let mut s = (tr * tr - four).sqrt();
        // Pick the root of λ² - tr·λ + 1 with |λ| > 1 without cancellation.
        if (tr.conj() * s).re < T::zero() {
            s = -s;
        }
        let lambda = (tr + s) / T::lit(2.0);
        let length = T::lit(2.0) * lambda.norm().ln();
        let holonomy = match self.model {
            Model::UpperHalfPlane2D => T::zero(),
            Model::UpperHalfSpace3D => wrap_angle(T::lit(2.0) * lambda.arg()),
        };
        Ok(GeodesicInvariants { length, holonomy })
    }

    /// Attracting boundary fixed point of a hyperbolic/loxodromic map that
    /// does not fix `∞`.
    pub fn attracting_fixed_point(&self) -> Option<Cx<T>> {
        if self.c.norm_sqr() == T::zero() {
            return None;
        }
        let amd = self.a - self.d;
        let mut root = (amd * amd + real(T::lit(4.0)) * self.b * self.c).sqrt();
        // Add the root with the sign of a − d; the other fixed point follows
        // from p·q = −b/c without cancellation.
        if (amd.conj() * root).re < T::zero() {
            root = -root;
        }
        let big = amd + root;
        if big.norm_sqr() == T::zero() {
            return None;
        }
        let p = big / (self.c * T::lit(2.0));
        let q = -(self.b * T::lit(2.0)) / big;
        // The attracting point has the larger |cz + d|.
        let stretch = |z: Cx<T>| (self.c * z + self.d).norm_sqr();
        Some(if stretch(p) >= stretch(q) { p } else { q })
    }

    /// Complex derivative `1/(cx+d)²` at a finite boundary point.
    pub fn complex_derivative(&self, x: Cx<T>) -> Result<Cx<T>, HyperbolicError> {
        let den = self.c * x + self.d;
        if den.norm_sqr() == T::zero() {
            return Err(HyperbolicError::PoleAtPoint);
        }
        Ok((den * den).inv())
    }

    /// Euclidean stretch `|g'(x)| = 1/|cx+d|²` at a finite boundary point.
    pub fn boundary_derivative(&self, x: Cx<T>) -> Result<T, HyperbolicError> {
        let den = (self.c * x + self.d).norm_sqr();
        if den == T::zero() {
            return Err(HyperbolicError::PoleAtPoint);
        }
        Ok(den.recip())
    }

    /// Image under the adjoint representation `PSL₂(ℝ) → SO(2,1)`.
    ///
    /// Vectors are rows `v = (x, y, z)` encoding `X = [[x, y+z], [y−z, −x]]`;
    /// `v · R(g)` encodes `g⁻¹ X g`. The form `Q = x² + y² − z² = −det X` is
    /// preserved and `R(gh) = R(g) R(h)`.
    pub fn adjoint_so21(&self) -> [[T; 3]; 3] {
        let (a, b, c, d) = (self.a.re, self.b.re, self.c.re, self.d.re);
        let inv = [[d, -b], [-c, a]];
        let g = [[a, b], [c, d]];
        let one = T::one();
        let zero = T::zero();
        let basis = [[[one, zero], [zero, -one]], [[zero, one], [one, zero]], [[zero, one], [-one, zero]]];
        let mut out = [[T::zero(); 3]; 3];
        for (row, e) in out.iter_mut().zip(basis.iter()) {
            let y = mat2(&mat2(&inv, e), &g);
            let half = T::lit(0.5);
            *row = [y[0][0], (y[0][1] + y[1][0]) * half, (y[0][1] - y[1][0]) * half];
        }
        out
    }

    pub fn cast<U: Real>(&self) -> Moebius<U> {
        let f = |z: Cx<T>| cx(U::lit(z.re.to_f64_lossy()), U::lit(z.im.to_f64_lossy()));
        Moebius { a: f(self.a), b: f(self.b), c: f(self.c), d: f(self.d), model: self.model }
    }
}

fn mat2<T: Real>(x: &[[T; 2]; 2], y: &[[T; 2]; 2]) -> [[T; 2]; 2] {
    [
        [x[0][0] * y[0][0] + x[0][1] * y[1][0], x[0][0] * y[0][1] + x[0][1] * y[1][1]],
        [x[1][0] * y[0][0] + x[1][1] * y[1][0], x[1][0] * y[0][1] + x[1][1] * y[1][1]],
    ]
}

/// The quadratic form `x² + y² − z²` preserved by [`Moebius::adjoint_so21`].
pub fn so21_form<T: Real>(v: &[T; 3]) -> T {
    v[0] * v[0] + v[1] * v[1] - v[2] * v[2]
}

pub fn row_times<T: Real>(v: &[T; 3], m: &[[T; 3]; 3]) -> [T; 3] {
    let mut out = [T::zero(); 3];
    for (j, o) in out.iter_mut().enumerate() {
        *o = v[0] * m[0][j] + v[1] * m[1][j] + v[2] * m[2][j];
    }
    out
}

/// JSON form: `{"model": ..., "entries": [[re, im], ...]}` row-major.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MoebiusRepr {
    pub model: Model,
    pub entries: [[f64; 2]; 4],
}

impl<T: Real> From<Moebius<T>> for MoebiusRepr {
    fn from(m: Moebius<T>) -> Self {
        let e = |z: Cx<T>| [z.re.to_f64_lossy(), z.im.to_f64_lossy()];
        MoebiusRepr { model: m.model, entries: [e(m.a), e(m.b), e(m.c), e(m.d)] }
    }
}

impl<T: Real> TryFrom<MoebiusRepr> for Moebius<T> {
    type Error = HyperbolicError;

    fn try_from(r: MoebiusRepr) -> Result<Self, Self::Error> {
        let z = |p: [f64; 2]| cx(T::lit(p[0]), T::lit(p[1]));
        Moebius::new(z(r.entries[0]), z(r.entries[1]), z(r.entries[2]), z(r.entries[3]), r.model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    type M = Moebius<f64>;

    fn c(re: f64, im: f64) -> Cx<f64> {
        Cx::new(re, im)
    }

    fn real_map(a: f64, b: f64, cc: f64, d: f64) -> M {
        M::from_real(a, b, cc, d).unwrap()
    }

    fn arb_real() -> impl Strategy<Value = M> {
        (-3.0..3.0f64, -3.0..3.0f64, -3.0..3.0f64, -3.0..3.0f64).prop_filter_map("nonsingular", |(a, b, cc, d)| {
            let det = a * d - b * cc;
            if det > 0.05 {
                M::from_real(a, b, cc, d).ok()
            } else if det < -0.05 {
                M::from_real(b, a, d, cc).ok()
            } else {
                None
            }
        })
    }

    fn arb_complex() -> impl Strategy<Value = M> {
        proptest::array::uniform8(-2.0..2.0f64).prop_filter_map("nonsingular", |e| {
            M::new(c(e[0], e[1]), c(e[2], e[3]), c(e[4], e[5]), c(e[6], e[7]), Model::UpperHalfSpace3D)
                .ok()
                .filter(|m| m.a.norm() + m.b.norm() + m.c.norm() + m.d.norm() < 40.0)
        })
    }

    #[test]
    fn construction_normalizes_determinant() {
        let m = real_map(2.0, 1.0, 1.0, 3.0);
        assert!((m.det().re - 1.0).abs() < 1e-12);
        assert_eq!(M::from_real(1.0, 2.0, 2.0, 4.0).unwrap_err(), HyperbolicError::Singular);
        assert_eq!(M::from_real(0.0, 1.0, 1.0, 0.0).unwrap_err(), HyperbolicError::OrientationReversing);
        let z = M::new(c(1.0, 1.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0), Model::UpperHalfPlane2D);
        assert_eq!(z.unwrap_err(), HyperbolicError::NonRealEntries);
    }

    #[test]
    fn compose_with_identity_and_inverse() {
        let g = real_map(2.0, 1.0, 3.0, 2.0);
        let id = M::identity(Model::UpperHalfPlane2D);
        assert!(g.compose(&id).projectively_eq(&g, 1e-14));
        assert!(g.compose(&g.inverse()).projectively_eq(&id, 1e-12));
        assert!(g.negated().projectively_eq(&g, 0.0));
    }

    #[test]
    fn rotations_add_angles() {
        let (alpha, beta) = (0.7, 1.9);
        let lhs = M::rotation_about_i(alpha).compose(&M::rotation_about_i(beta));
        let rhs = M::rotation_about_i(alpha + beta);
        // A Möbius map is determined by the images of three boundary points.
        for x in [0.0, 1.0, -2.5] {
            let p = lhs.apply_boundary(c(x, 0.0)).unwrap();
            let q = rhs.apply_boundary(c(x, 0.0)).unwrap();
            assert!((p - q).norm() < 1e-12, "{p} vs {q}");
        }
    }

    #[test]
    fn long_products_stay_accurate() {
        let g = M::new(c(2.0, 1.0), c(1.0, -0.5), c(0.5, 0.25), c(1.0, 0.3), Model::UpperHalfSpace3D).unwrap();
        let tr = g.trace();
        let disc = (tr * tr - c(4.0, 0.0)).sqrt();
        let lam = (tr + disc) / 2.0;
        let k = 60;
        let exact = lam.powi(k) + lam.inv().powi(k);
        let got = g.pow(k as u32).trace();
        assert!(((got - exact) / exact).norm() < 1e-10);
    }

    #[test]
    fn displacement_examples() {
        assert_eq!(M::identity(Model::UpperHalfPlane2D).displacement(), 0.0);
        let t: f64 = 2.3;
        let a = M::diagonal(c((t / 2.0).exp(), 0.0), Model::UpperHalfPlane2D).unwrap();
        assert!((a.displacement() - t).abs() < 1e-12);
        let o = HPoint::<f64>::origin();
        assert!((o.distance(&a.apply_origin()) - t).abs() < 1e-12);
        let b = M::diagonal(c((t / 2.0).exp(), 0.0), Model::UpperHalfSpace3D).unwrap();
        assert!((b.displacement() - t).abs() < 1e-12);
    }

    #[test]
    fn classification() {
        assert_eq!(M::identity(Model::UpperHalfPlane2D).classify(), Classification::Identity);
        assert_eq!(M::identity(Model::UpperHalfPlane2D).negated().classify(), Classification::Identity);
        assert_eq!(M::rotation_about_i(0.3).classify(), Classification::Elliptic);
        assert_eq!(real_map(1.0, 1.0, 0.0, 1.0).classify(), Classification::Parabolic);
        let nearly = M {
            a: c(1.0000000000001, 0.0),
            b: c(1.0, 0.0),
            c: c(0.0, 0.0),
            d: c(1.0, 0.0),
            model: Model::UpperHalfPlane2D,
        };
        assert!((nearly.trace().re - 2.0000000000001).abs() < 1e-15);
        assert_eq!(nearly.classify(), Classification::Parabolic);
        assert_eq!(real_map(2.0, 0.0, 0.0, 0.5).classify(), Classification::HyperbolicOrLoxodromic);
        let lox = M::diagonal(c(1.0, 0.0) * c(0.0, 0.4).exp(), Model::UpperHalfSpace3D).unwrap();
        assert_eq!(lox.classify(), Classification::Elliptic);
        let lox = M::diagonal(c(0.2, 0.4).exp(), Model::UpperHalfSpace3D).unwrap();
        assert_eq!(lox.classify(), Classification::HyperbolicOrLoxodromic);
    }

    #[test]
    fn invariants_of_diagonal_maps() {
        let a = M::diagonal(c(0.5f64.exp(), 0.0), Model::UpperHalfPlane2D).unwrap();
        let inv = a.geodesic_invariants().unwrap();
        assert!((inv.length - 1.0).abs() < 1e-12);
        assert_eq!(inv.holonomy, 0.0);

        let lam = c(0.5, PI / 6.0).exp();
        let b = M::diagonal(lam, Model::UpperHalfSpace3D).unwrap();
        let inv = b.geodesic_invariants().unwrap();
        assert!((inv.length - 1.0).abs() < 1e-12);
        assert!((inv.holonomy - PI / 3.0).abs() < 1e-12);
        // trace = ±2 cosh((ℓ + iθ)/2)
        let pred = c(inv.length, inv.holonomy) / 2.0;
        let pred = pred.cosh() * 2.0;
        assert!((b.trace() - pred).norm() < 1e-10 || (b.trace() + pred).norm() < 1e-10);

        let e = M::rotation_about_i(0.3).geodesic_invariants();
        assert_eq!(e.unwrap_err(), HyperbolicError::NotLoxodromic(Classification::Elliptic));
    }

    #[test]
    fn negative_trace_has_zero_holonomy_in_plane() {
        let g = real_map(-3.0, 1.0, -1.0, 0.0);
        let inv = g.geodesic_invariants().unwrap();
        assert_eq!(inv.holonomy, 0.0);
        assert!((2.0 * (inv.length / 2.0).cosh() - 3.0).abs() < 1e-10);
    }

    #[test]
    fn boundary_derivative_examples() {
        let id = M::identity(Model::UpperHalfPlane2D);
        assert_eq!(id.boundary_derivative(c(3.7, 0.0)).unwrap(), 1.0);

        let g = M::diagonal(c(0.5f64.exp(), 0.0), Model::UpperHalfPlane2D).unwrap();
        // Finite-difference oracle for the action at 0.
        let h = 1e-6;
        let fd = (g.apply_boundary(c(h, 0.0)).unwrap() - g.apply_boundary(c(-h, 0.0)).unwrap()).re / (2.0 * h);
        let exact = g.boundary_derivative(c(0.0, 0.0)).unwrap();
        assert!(((exact - fd) / fd).abs() < 1e-4);
        assert!((exact - 1f64.exp()).abs() < 1e-12);

        let p = real_map(1.0, 0.0, 1.0, 1.0);
        assert_eq!(p.boundary_derivative(c(-1.0, 0.0)).unwrap_err(), HyperbolicError::PoleAtPoint);
    }

    #[test]
    fn attracting_fixed_point_is_fixed_and_attracting() {
        let g = M::new(c(2.0, 0.5), c(1.0, -1.0), c(0.7, 0.2), c(1.0, 0.3), Model::UpperHalfSpace3D).unwrap();
        let z = g.attracting_fixed_point().unwrap();
        assert!((g.apply_boundary(z).unwrap() - z).norm() < 1e-12);
        assert!(g.boundary_derivative(z).unwrap() < 1.0);
        assert!(M::diagonal(c(2.0, 0.0), Model::UpperHalfPlane2D).unwrap().attracting_fixed_point().is_none());
    }

    #[test]
    fn fixed_point_of_high_power_is_stable() {
        let g = M::from_real(3.0, 5.0, 1.0, 2.0).unwrap();
        let z = g.attracting_fixed_point().unwrap();
        let zn = g.pow(30).attracting_fixed_point().unwrap();
        assert!((z - zn).norm() < 1e-13 * z.norm(), "{z} vs {zn}");
    }

    #[test]
    fn adjoint_of_identity() {
        let r = M::identity(Model::UpperHalfPlane2D).adjoint_so21();
        for (i, row) in r.iter().enumerate() {
            for (j, x) in row.iter().enumerate() {
                assert_eq!(*x, if i == j { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn halfspace_distance_matches_geodesic_formula() {
        // Vertical geodesic through i is the hemisphere of radius 1 at 0.
        let disk = Disk::new(c(0.0, 0.0), 1.0);
        let p = HPoint { x: c(0.0, 0.0), t: 3.0 };
        assert!((p.distance_to_halfspace(&disk) - 3f64.ln()).abs() < 1e-12);
        assert_eq!(HPoint { x: c(0.1, 0.0), t: 0.5 }.distance_to_halfspace(&disk), 0.0);
    }

    #[test]
    fn json_round_trip() {
        let g = M::new(c(1.0, 0.5), c(0.3, -0.2), c(0.1, 0.0), c(1.0, 0.0), Model::UpperHalfSpace3D).unwrap();
        let s = serde_json::to_string(&g).unwrap();
        assert!(s.contains("UpperHalfSpace3D"));
        let back: M = serde_json::from_str(&s).unwrap();
        assert!(back.projectively_eq(&g, 1e-14));
    }

    #[test]
    fn works_in_single_precision() {
        let g = Moebius::<f32>::diagonal(Cx::new(1.5f32, 0.0), Model::UpperHalfPlane2D).unwrap();
        let inv = g.geodesic_invariants().unwrap();
        assert!((inv.length - 2.0 * 1.5f32.ln()).abs() < 1e-5);
    }

    proptest! {
        #[test]
        fn displacement_is_symmetric(g in arb_complex()) {
            let d1 = g.displacement();
            let d2 = g.inverse().displacement();
            prop_assert!((d1 - d2).abs() < 1e-9 * (1.0 + d1));
        }

        #[test]
        fn displacement_triangle(g in arb_complex(), h in arb_complex()) {
            let gh = g.compose(&h);
            prop_assert!(gh.displacement() <= g.displacement() + h.displacement() + 1e-9);
        }

        #[test]
        fn invariants_conjugation_invariant(h in arb_complex(), re in 0.2..2.0f64, im in -3.0..3.0f64) {
            let g = M::diagonal(c(re, im).exp(), Model::UpperHalfSpace3D).unwrap();
            let conj = h.compose(&g).compose(&h.inverse());
            let a = g.geodesic_invariants().unwrap();
            let b = conj.geodesic_invariants().unwrap();
            prop_assert!((a.length - b.length).abs() < 1e-9);
            let dtheta = wrap_angle(a.holonomy - b.holonomy);
            prop_assert!(dtheta.abs() < 1e-9);
        }

        #[test]
        fn invariants_of_powers(h in arb_complex(), re in 0.1..0.8f64, im in -3.0..3.0f64, k in 1u32..=5) {
            let g = h.compose(&M::diagonal(c(re, im).exp(), Model::UpperHalfSpace3D).unwrap()).compose(&h.inverse());
            let base = g.geodesic_invariants().unwrap();
            let pw = g.pow(k).geodesic_invariants().unwrap();
            let kf = k as f64;
            prop_assert!((pw.length - kf * base.length).abs() < 1e-8);
            prop_assert!(wrap_angle(pw.holonomy - kf * base.holonomy).abs() < 1e-8);
        }

        #[test]
        fn chain_rule(g in arb_complex(), h in arb_complex(), xr in -3.0..3.0f64, xi in -3.0..3.0f64) {
            let x = c(xr, xi);
            let gh = g.compose(&h);
            if let (Ok(dgh), Some(hx), Ok(dh)) = (gh.boundary_derivative(x), h.apply_boundary(x), h.boundary_derivative(x)) {
                if let Ok(dg) = g.boundary_derivative(hx) {
                    prop_assume!(dgh.is_finite() && dgh < 1e8 && dgh > 1e-8);
                    prop_assert!(((dgh - dg * dh) / dgh).abs() < 1e-9);
                }
            }
        }

        #[test]
        fn adjoint_preserves_form(g in arb_real(), v in proptest::array::uniform3(-5.0..5.0f64)) {
            let r = g.adjoint_so21();
            let w = row_times(&v, &r);
            let scale = 1.0 + w.iter().map(|x| x * x).sum::<f64>();
            prop_assert!((so21_form(&w) - so21_form(&v)).abs() < 1e-10 * scale);
        }

        #[test]
        fn adjoint_is_homomorphism(g in arb_real(), h in arb_real()) {
            let lhs = g.compose(&h).adjoint_so21();
            let rg = g.adjoint_so21();
            let rh = h.adjoint_so21();
            for i in 0..3 {
                let rhs = row_times(&rg[i], &rh);
                for j in 0..3 {
                    prop_assert!((lhs[i][j] - rhs[j]).abs() < 1e-10 * (1.0 + rhs[j].abs()));
                }
            }
        }

        #[test]
        fn point_action_is_isometric(g in arb_complex(), xr in -2.0..2.0f64, xi in -2.0..2.0f64, t in 0.1..3.0f64) {
            let p = HPoint { x: c(xr, xi), t };
            let o = HPoint::origin();
            let d0 = p.distance(&o);
            let d1 = g.apply_point(&p).distance(&g.apply_origin());
            prop_assert!((d0 - d1).abs() < 1e-8 * (1.0 + d0));
        }
    }
}
