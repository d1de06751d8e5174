//! The twisted transfer operator `L_{s,v,p}`, its leading eigenvalue, the
//! critical exponent, the pressure surface and spectral-radius scans.
//!
//! For a tabulated shift the operator is the exact `k×k` matrix
//! `(L h)(b) = Σ_a A_ab w_ab h(a)` with `w_ab = e^{−sτ_ab + i⟨v,f_ab⟩ + ipθ_ab}`.
//! For the plane Schottky coding it acts on functions on the disk intervals,
//! `(L h)(y) = Σ_{a ≠ c⁻¹} |a′(y)|^s e^{i⟨v,f_a⟩} h(a·y)` for `y ∈ I_c`, and
//! is discretized by Chebyshev–Lobatto collocation on each interval.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::hyperbolic::Model;
use crate::linalg::{dominant_eigenpair, inverse_iteration, normalize_phase, residual, CMat};
use crate::scalar::{Cx, Real};
use crate::schottky::inverse_symbol;
use crate::shift::{MarkovShift, Source};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TransferError {
    #[error("holonomy character requested but the shift carries no holonomy")]
    HolonomyUnavailable,
    #[error("eigenvalue iteration did not converge after {0} iterations")]
    NotConverged(usize),
    #[error("eigenvalue changed by {relative_change:e} (relative) when doubling nodes")]
    DiscretizationUnstable { relative_change: f64 },
    #[error("eigen residual {0:e} exceeds tolerance")]
    ResidualTooLarge(f64),
    #[error("could not bracket the root of λ(s) = 1")]
    BracketFailed,
    #[error("Hessian of the pressure is not positive definite (min eigenvalue {0:e})")]
    HessianNotPD(f64),
    #[error("pressure gradient at 0 is {0:e}, expected ≈ 0")]
    GradientNonzero(f64),
    #[error("invalid operator specification: {0}")]
    InvalidSpec(String),
    #[error("parameter dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// How the operator is turned into a matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Discretization {
    ExactMatrix,
    Collocation { nodes_per_disk: usize },
}

/// Chebyshev–Lobatto nodes on `[−1, 1]` with barycentric weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ChebyshevGrid<T> {
    nodes: Vec<T>,
    weights: Vec<T>,
}

impl<T: Real> ChebyshevGrid<T> {
    pub fn new(n: usize) -> Self {
        assert!(n >= 2, "need at least two nodes");
        let nodes = (0..n).map(|k| (T::PI() * T::from_count(k) / T::from_count(n - 1)).cos()).collect();
        let weights = (0..n)
            .map(|k| {
                let sign = if k % 2 == 0 { T::one() } else { -T::one() };
                if k == 0 || k == n - 1 {
                    sign * T::lit(0.5)
                } else {
                    sign
                }
            })
            .collect();
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn reference_nodes(&self) -> &[T] {
        &self.nodes
    }

    /// Interpolation weights at `t`: `p(t) = Σ row[k]·values[k]`.
    pub fn row(&self, t: T) -> Vec<T> {
        if let Some(k) = self.nodes.iter().position(|&x| x == t) {
            let mut row = vec![T::zero(); self.len()];
            row[k] = T::one();
            return row;
        }
        let mut row: Vec<T> = self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w / (t - x)).collect();
        let s = row.iter().fold(T::zero(), |a, b| a + *b);
        for r in row.iter_mut() {
            *r = *r / s;
        }
        row
    }

    pub fn evaluate(&self, values: &[T], t: T) -> T {
        self.row(t).iter().zip(values).fold(T::zero(), |a, (r, v)| a + *r * *v)
    }

    pub fn evaluate_complex(&self, values: &[Cx<T>], t: T) -> Cx<T> {
        self.row(t).iter().zip(values).fold(Cx::new(T::zero(), T::zero()), |a, (r, v)| a + *v * *r)
    }
}

/// A shift together with its discretization.
#[derive(Debug, Clone)]
pub struct OperatorSpec<T> {
    shift: MarkovShift<T>,
    discretization: Discretization,
}

impl<T: Real> OperatorSpec<T> {
    pub fn new(shift: MarkovShift<T>, discretization: Discretization) -> Result<Self, TransferError> {
        match (shift.source(), discretization) {
            (Source::Toy, Discretization::ExactMatrix) => {}
            (Source::SchottkyCoding, Discretization::Collocation { nodes_per_disk }) => {
                if nodes_per_disk < 8 {
                    return Err(TransferError::InvalidSpec("collocation needs at least 8 nodes per disk".into()));
                }
                let model = shift.group().map(|g| g.model());
                if model != Some(Model::UpperHalfPlane2D) {
                    return Err(TransferError::InvalidSpec("collocation is implemented for plane groups only".into()));
                }
            }
            (Source::Toy, _) => return Err(TransferError::InvalidSpec("tabulated shifts use the exact matrix".into())),
            (Source::SchottkyCoding, _) => {
                return Err(TransferError::InvalidSpec("coding shifts need a collocation grid".into()))
            }
        }
        Ok(Self { shift, discretization })
    }

    pub fn shift(&self) -> &MarkovShift<T> {
        &self.shift
    }

    pub fn discretization(&self) -> Discretization {
        self.discretization
    }

    /// Same shift, `nodes_per_disk` doubled.
    pub fn refined(&self) -> Self {
        let discretization = match self.discretization {
            Discretization::Collocation { nodes_per_disk } => {
                Discretization::Collocation { nodes_per_disk: 2 * nodes_per_disk }
            }
            d => d,
        };
        Self { shift: self.shift.clone(), discretization }
    }

    /// SHA-256 of the shift data and discretization, hex encoded.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.shift.fingerprint_bytes());
        hasher.update(format!("{:?}", self.discretization).as_bytes());
        hex(&hasher.finalize())
    }

    fn check_params(&self, z: &[Cx<T>], p: i32) -> Result<(), TransferError> {
        let d = self.shift.homology_dim();
        if z.len() != d {
            return Err(TransferError::DimensionMismatch { expected: d, got: z.len() });
        }
        if p != 0 && !self.shift.has_holonomy() {
            return Err(TransferError::HolonomyUnavailable);
        }
        Ok(())
    }

    /// Matrix of `L` with weights `e^{−sτ + ⟨z, f⟩ + ipθ}` (`z = iv` for the
    /// unitary twist, `z = u` real for the pressure tilt).
    pub fn matrix(&self, s: Cx<T>, z: &[Cx<T>], p: i32) -> Result<CMat<T>, TransferError> {
        self.check_params(z, p)?;
        let k = self.shift.symbol_count();
        let tilt = |f: &[i64]| {
            f.iter().zip(z).fold(Cx::new(T::zero(), T::zero()), |acc, (fi, zi)| acc + *zi * T::lit(*fi as f64))
        };
        let ip = Cx::new(T::zero(), T::lit(p as f64));
        match self.discretization {
            Discretization::ExactMatrix => {
                let mut m = CMat::zeros(k);
                for a in 0..k {
                    for b in 0..k {
                        if !self.shift.allowed(a, b) {
                            continue;
                        }
                        let tau = self.shift.roof_table(a, b).expect("tabulated roof");
                        let theta = self.shift.holonomy_table(a, b).unwrap_or(T::zero());
                        let w = (-s * tau + tilt(self.shift.cocycle(a, b)) + ip * theta).exp();
                        m.set(b, a, w);
                    }
                }
                Ok(m)
            }
            Discretization::Collocation { nodes_per_disk: n } => {
                let group = self.shift.group().expect("coding shift has a group");
                let grid = ChebyshevGrid::new(n);
                let mut m = CMat::zeros(k * n);
                for c in 0..k {
                    let dc = group.symbol_disk(c);
                    for (i, &xi) in grid.reference_nodes().iter().enumerate() {
                        let y = dc.center + Cx::new(dc.radius * xi, T::zero());
                        for a in (0..k).filter(|&a| a != inverse_symbol(c)) {
                            let g = group.symbol_map(a);
                            let ay = g.apply_boundary(y).expect("branch is regular off its source disk");
                            let der = g.boundary_derivative(y).expect("branch is regular off its source disk");
                            let w = (s * der.ln()).exp() * tilt(self.shift.cocycle(a, c)).exp();
                            let da = group.symbol_disk(a);
                            let row = grid.row((ay.re - da.center.re) / da.radius);
                            for (j, r) in row.into_iter().enumerate() {
                                m.add_to(c * n + i, a * n + j, w * r);
                            }
                        }
                    }
                }
                Ok(m)
            }
        }
    }

    /// Pointwise branch sum `(L g)(y)` for `y` in the interval of symbol `c`,
    /// with `g` given by its node values (collocation only).
    pub fn branch_sum_at(&self, s: Cx<T>, v: &[T], g: &[Cx<T>], c: usize, y: T) -> Result<Cx<T>, TransferError> {
        let Discretization::Collocation { nodes_per_disk: n } = self.discretization else {
            return Err(TransferError::InvalidSpec("pointwise evaluation needs a collocation grid".into()));
        };
        let z: Vec<Cx<T>> = v.iter().map(|x| Cx::new(T::zero(), *x)).collect();
        self.check_params(&z, 0)?;
        let group = self.shift.group().expect("coding shift has a group");
        let grid = ChebyshevGrid::new(n);
        let mut acc = Cx::new(T::zero(), T::zero());
        let y = Cx::new(y, T::zero());
        for a in (0..self.shift.symbol_count()).filter(|&a| a != inverse_symbol(c)) {
            let m = group.symbol_map(a);
            let ay = m.apply_boundary(y).expect("branch is regular off its source disk");
            let der = m.boundary_derivative(y).expect("branch is regular off its source disk");
            let phase = self
                .shift
                .cocycle(a, c)
                .iter()
                .zip(&z)
                .fold(Cx::new(T::zero(), T::zero()), |acc, (f, zi)| acc + *zi * T::lit(*f as f64));
            let da = group.symbol_disk(a);
            let ga = grid.evaluate_complex(&g[a * n..(a + 1) * n], (ay.re - da.center.re) / da.radius);
            acc = acc + (s * der.ln()).exp() * phase.exp() * ga;
        }
        Ok(acc)
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn imag_twist<T: Real>(v: &[T]) -> Vec<Cx<T>> {
    v.iter().map(|x| Cx::new(T::zero(), *x)).collect()
}

/// `L_{s,v,p} g`.
pub fn apply<T: Real>(
    spec: &OperatorSpec<T>,
    s: Cx<T>,
    v: &[T],
    p: i32,
    g: &[Cx<T>],
) -> Result<Vec<Cx<T>>, TransferError> {
    let m = spec.matrix(s, &imag_twist(v), p)?;
    if g.len() != m.dim() {
        return Err(TransferError::DimensionMismatch { expected: m.dim(), got: g.len() });
    }
    Ok(m.mul_vec(g))
}

/// Leading eigen-data of `L_{s,v,p}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralResult<T> {
    pub s: Cx<T>,
    pub v: Vec<T>,
    pub p: i32,
    pub lambda: Cx<T>,
    /// Right eigenvector (eigenfunction node values).
    pub h: Vec<Cx<T>>,
    /// Left eigenvector (eigenmeasure as a functional on node values).
    pub rho: Vec<Cx<T>>,
    pub residual: T,
    pub discretization: Discretization,
}

const RESIDUAL_TOL: f64 = 1e-8;
const DOUBLING_TOL: f64 = 1e-8;

/// `(λ, h, ρ, residual)`.
type Eigen<T> = (Cx<T>, Vec<Cx<T>>, Vec<Cx<T>>, T);

fn eigen_of<T: Real>(m: &CMat<T>) -> Result<Eigen<T>, TransferError> {
    let (mut lambda, mut h) = dominant_eigenpair(m).map_err(|e| TransferError::NotConverged(e.0))?;
    let mt = m.transpose();
    let mut rho = inverse_iteration(&mt, lambda, 3);
    // Two-sided Rayleigh quotient sharpens λ; one more sweep for h.
    let mh = m.mul_vec(&h);
    let num = rho.iter().zip(&mh).fold(Cx::new(T::zero(), T::zero()), |a, (r, x)| a + *r * *x);
    let den = rho.iter().zip(&h).fold(Cx::new(T::zero(), T::zero()), |a, (r, x)| a + *r * *x);
    if den.norm() > T::zero() {
        let refined = num / den;
        if (refined - lambda).norm() < T::lit(1e-6) * lambda.norm().max(T::one()) {
            lambda = refined;
        }
    }
    let res = residual(m, lambda, &h);
    if res > T::epsilon() * T::lit(1e4) {
        h = inverse_iteration(m, lambda, 2);
    }
    normalize_phase(&mut h);
    normalize_phase(&mut rho);
    let res = residual(m, lambda, &h);
    if !(res < T::lit(RESIDUAL_TOL)) {
        return Err(TransferError::ResidualTooLarge(res.to_f64_lossy()));
    }
    Ok((lambda, h, rho, res))
}

/// Leading eigenvalue without the node-doubling certificate.
pub fn leading_eigenvalue_unchecked<T: Real>(
    spec: &OperatorSpec<T>,
    s: Cx<T>,
    v: &[T],
    p: i32,
) -> Result<SpectralResult<T>, TransferError> {
    let m = spec.matrix(s, &imag_twist(v), p)?;
    let (lambda, h, rho, residual) = eigen_of(&m)?;
    Ok(SpectralResult { s, v: v.to_vec(), p, lambda, h, rho, residual, discretization: spec.discretization })
}

/// Leading eigenvalue, certified by residual and (for collocation) by
/// stability under doubling of the node count.
pub fn leading_eigenvalue<T: Real>(
    spec: &OperatorSpec<T>,
    s: Cx<T>,
    v: &[T],
    p: i32,
) -> Result<SpectralResult<T>, TransferError> {
    let coarse = leading_eigenvalue_unchecked(spec, s, v, p)?;
    if let Discretization::Collocation { .. } = spec.discretization {
        let fine = leading_eigenvalue_unchecked(&spec.refined(), s, v, p)?;
        let change = (fine.lambda - coarse.lambda).norm() / fine.lambda.norm().max(T::min_positive_value());
        if !(change < T::lit(DOUBLING_TOL)) {
            return Err(TransferError::DiscretizationUnstable { relative_change: change.to_f64_lossy() });
        }
    }
    Ok(coarse)
}

/// Leading eigenvalue of the real-tilted operator `e^{−sτ + ⟨u,f⟩}`.
pub fn tilted_eigenvalue<T: Real>(spec: &OperatorSpec<T>, s: T, u: &[T]) -> Result<T, TransferError> {
    let z: Vec<Cx<T>> = u.iter().map(|x| Cx::new(*x, T::zero())).collect();
    let m = spec.matrix(Cx::new(s, T::zero()), &z, 0)?;
    let (lambda, _) = dominant_eigenpair(&m).map_err(|e| TransferError::NotConverged(e.0))?;
    Ok(lambda.re)
}

/// Root of the decreasing function `f` near `[lo, hi]`, expanding the bracket
/// as needed; regula falsi with the Illinois safeguard.
fn find_root<T: Real, F>(mut f: F, mut lo: T, mut hi: T) -> Result<T, TransferError>
where
    F: FnMut(T) -> Result<T, TransferError>,
{
    let mut flo = f(lo)?;
    let mut fhi = f(hi)?;
    let mut expand = 0;
    while flo < T::zero() || fhi > T::zero() {
        expand += 1;
        if expand > 60 {
            return Err(TransferError::BracketFailed);
        }
        let width = hi - lo;
        if flo < T::zero() {
            hi = lo;
            fhi = flo;
            lo = lo - width;
            flo = f(lo)?;
        } else {
            lo = hi;
            flo = fhi;
            hi = hi + width * T::lit(2.0);
            fhi = f(hi)?;
        }
    }
    if flo == T::zero() {
        return Ok(lo);
    }
    if fhi == T::zero() {
        return Ok(hi);
    }
    let tol = T::epsilon() * T::lit(4.0);
    let mut side = 0i8;
    let mut best = (lo + hi) / T::lit(2.0);
    for _ in 0..200 {
        let mut x = (lo * fhi - hi * flo) / (fhi - flo);
        if !(x > lo && x < hi) {
            x = (lo + hi) / T::lit(2.0);
        }
        let fx = f(x)?;
        best = x;
        if fx.abs() <= tol || (hi - lo) <= tol * x.abs().max(T::one()) {
            break;
        }
        if fx > T::zero() {
            lo = x;
            flo = fx;
            if side == 1 {
                fhi = fhi / T::lit(2.0);
            }
            side = 1;
        } else {
            hi = x;
            fhi = fx;
            if side == -1 {
                flo = flo / T::lit(2.0);
            }
            side = -1;
        }
    }
    Ok(best)
}

/// `δ`: the root of `λ(s, 0, 0) = 1`.
pub fn critical_exponent<T: Real>(spec: &OperatorSpec<T>) -> Result<T, TransferError> {
    pressure(spec, &vec![T::zero(); spec.shift.homology_dim()])
}

/// `P(u)`: the root in `s` of `λ(s; e^{⟨u,f⟩}) = 1`.
pub fn pressure<T: Real>(spec: &OperatorSpec<T>, u: &[T]) -> Result<T, TransferError> {
    find_root(|s| tilted_eigenvalue(spec, s, u).map(|l| l - T::one()), T::lit(1e-3), T::lit(20.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PressureSurface<T> {
    pub delta: T,
    /// `(u, P(u))` at every point used by the finite differences.
    pub samples: Vec<(Vec<T>, T)>,
    pub gradient: Vec<T>,
    pub hessian: Vec<Vec<T>>,
    pub sigma: T,
    pub c0: T,
    pub min_hessian_eigenvalue: T,
}

/// Eigenvalues of a small symmetric matrix (cyclic Jacobi).
pub fn symmetric_eigenvalues<T: Real>(a: &[Vec<T>]) -> Vec<T> {
    let n = a.len();
    let mut m = a.to_vec();
    for _ in 0..100 {
        let off = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .fold(T::zero(), |acc, (i, j)| acc + m[i][j] * m[i][j]);
        if off <= T::epsilon() * T::epsilon() {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[p][q] == T::zero() {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (T::lit(2.0) * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = (t * t + T::one()).sqrt().recip();
                let s = t * c;
                for k in 0..n {
                    let (x, y) = (m[k][p], m[k][q]);
                    m[k][p] = c * x - s * y;
                    m[k][q] = s * x + c * y;
                }
                for k in 0..n {
                    let (x, y) = (m[p][k], m[q][k]);
                    m[p][k] = c * x - s * y;
                    m[q][k] = s * x + c * y;
                }
            }
        }
    }
    (0..n).map(|i| m[i][i]).collect()
}

fn determinant<T: Real>(a: &[Vec<T>]) -> T {
    let n = a.len();
    let mut m = a.to_vec();
    let mut det = T::one();
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| m[i][k].abs().partial_cmp(&m[j][k].abs()).expect("finite")).expect("nonempty");
        if m[p][k] == T::zero() {
            return T::zero();
        }
        if p != k {
            m.swap(p, k);
            det = -det;
        }
        det = det * m[k][k];
        for i in k + 1..n {
            let f = m[i][k] / m[k][k];
            for j in k..n {
                m[i][j] = m[i][j] - f * m[k][j];
            }
        }
    }
    det
}

/// `δ`, `∇P(0)`, `∇²P(0)` (central differences at steps `h` and `h/2`,
/// Richardson-extrapolated), `σ = det(∇²P(0))^{1/d}` and `C₀ = (2π/σ)^{d/2}`.
pub fn pressure_surface<T: Real>(spec: &OperatorSpec<T>, h: T) -> Result<PressureSurface<T>, TransferError> {
    let d = spec.shift.homology_dim();
    if d == 0 {
        return Err(TransferError::InvalidSpec("pressure surface needs d ≥ 1".into()));
    }
    let delta = critical_exponent(spec)?;
    let mut samples = vec![(vec![T::zero(); d], delta)];
    let mut at = |u: Vec<T>| -> Result<T, TransferError> {
        let p = pressure(spec, &u)?;
        samples.push((u, p));
        Ok(p)
    };
    let unit = |i: usize, x: T| {
        let mut u = vec![T::zero(); d];
        u[i] = x;
        u
    };
    let two = T::lit(2.0);
    let mut gradient = vec![T::zero(); d];
    let mut hess = |step: T, gradient: &mut Vec<T>| -> Result<Vec<Vec<T>>, TransferError> {
        let mut out = vec![vec![T::zero(); d]; d];
        for i in 0..d {
            let plus = at(unit(i, step))?;
            let minus = at(unit(i, -step))?;
            gradient[i] = (plus - minus) / (two * step);
            out[i][i] = (plus - two * delta + minus) / (step * step);
            for j in 0..i {
                let mut corner = |si: T, sj: T| {
                    let mut u = unit(i, si * step);
                    u[j] = sj * step;
                    at(u)
                };
                let pp = corner(T::one(), T::one())?;
                let pm = corner(T::one(), -T::one())?;
                let mp = corner(-T::one(), T::one())?;
                let mm = corner(-T::one(), -T::one())?;
                let mixed = (pp - pm - mp + mm) / (T::lit(4.0) * step * step);
                out[i][j] = mixed;
                out[j][i] = mixed;
            }
        }
        Ok(out)
    };
    let coarse = hess(h, &mut gradient)?;
    let mut fine_gradient = vec![T::zero(); d];
    let fine = hess(h / two, &mut fine_gradient)?;
    let hessian: Vec<Vec<T>> =
        (0..d).map(|i| (0..d).map(|j| (T::lit(4.0) * fine[i][j] - coarse[i][j]) / T::lit(3.0)).collect()).collect();
    let gradient: Vec<T> = (0..d).map(|i| (T::lit(4.0) * fine_gradient[i] - gradient[i]) / T::lit(3.0)).collect();
    let gmax = gradient.iter().fold(T::zero(), |a, g| a.max(g.abs()));
    if !(gmax < T::lit(1e-4)) {
        return Err(TransferError::GradientNonzero(gmax.to_f64_lossy()));
    }
    let min_eig = symmetric_eigenvalues(&hessian).into_iter().fold(T::infinity(), T::min);
    if !(min_eig > T::zero()) {
        return Err(TransferError::HessianNotPD(min_eig.to_f64_lossy()));
    }
    let dd = T::from_count(d);
    let sigma = determinant(&hessian).powf(dd.recip());
    let c0 = (T::TAU() / sigma).powf(dd / two);
    Ok(PressureSurface { delta, samples, gradient, hessian, sigma, c0, min_hessian_eigenvalue: min_eig })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow<T> {
    pub t: T,
    pub v: Vec<T>,
    pub p: i32,
    pub modulus: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanReport<T> {
    pub fingerprint: String,
    pub delta: T,
    pub margin: T,
    pub rows: Vec<ScanRow<T>>,
    /// Grid points other than `(0, 0, 0)` with `|λ| > 1 − margin`.
    pub violations: Vec<ScanRow<T>>,
    pub max_off_origin: T,
}

/// `|λ(δ + it, v, p)|` over the product grid, rows sorted by `(t, v, p)`.
pub fn spectral_radius_scan<T: Real>(
    spec: &OperatorSpec<T>,
    delta: T,
    t_grid: &[T],
    v_grid: &[Vec<T>],
    p_list: &[i32],
    margin: T,
) -> Result<ScanReport<T>, TransferError> {
    let mut points = Vec::new();
    for &t in t_grid {
        for v in v_grid {
            for &p in p_list {
                points.push((t, v.clone(), p));
            }
        }
    }
    points.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .expect("finite grid")
            .then_with(|| a.1.partial_cmp(&b.1).expect("finite grid"))
            .then(a.2.cmp(&b.2))
    });
    let rows: Vec<ScanRow<T>> = points
        .into_par_iter()
        .map(|(t, v, p)| {
            let r = leading_eigenvalue_unchecked(spec, Cx::new(delta, t), &v, p)?;
            Ok(ScanRow { t, v, p, modulus: r.lambda.norm() })
        })
        .collect::<Result<_, TransferError>>()?;
    let is_origin = |r: &ScanRow<T>| r.t == T::zero() && r.p == 0 && r.v.iter().all(|x| *x == T::zero());
    let violations: Vec<ScanRow<T>> =
        rows.iter().filter(|r| !is_origin(r) && r.modulus > T::one() - margin).cloned().collect();
    let max_off_origin = rows.iter().filter(|r| !is_origin(r)).fold(T::zero(), |a, r| a.max(r.modulus));
    Ok(ScanReport { fingerprint: spec.fingerprint(), delta, margin, rows, violations, max_off_origin })
}

/// `n` equally spaced points covering `[lo, hi]`.
pub fn linspace<T: Real>(lo: T, hi: T, n: usize) -> Vec<T> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * T::from_count(i) / T::from_count(n - 1)).collect()
}

/// `m^d` points of the torus grid `(2π j/m)`.
pub fn torus_grid<T: Real>(d: usize, m: usize) -> Vec<Vec<T>> {
    let mut out = vec![vec![]];
    for _ in 0..d {
        out = out
            .into_iter()
            .flat_map(|prefix: Vec<T>| {
                (0..m).map(move |j| {
                    let mut v = prefix.clone();
                    v.push(T::TAU() * T::from_count(j) / T::from_count(m));
                    v
                })
            })
            .collect();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use std::f64::consts::{LN_2, PI};

    fn toy_spec() -> OperatorSpec<f64> {
        OperatorSpec::new(fixtures::toy_two_shift(), Discretization::ExactMatrix).unwrap()
    }

    fn pair_spec(n: usize) -> OperatorSpec<f64> {
        let shift = MarkovShift::from_schottky(&fixtures::fuchsian_pair()).unwrap();
        OperatorSpec::new(shift, Discretization::Collocation { nodes_per_disk: n }).unwrap()
    }

    fn one() -> Cx<f64> {
        Cx::new(1.0, 0.0)
    }

    #[test]
    fn toy_apply_examples() {
        let spec = toy_spec();
        let g = vec![one(); 2];
        let out = apply(&spec, Cx::new(LN_2, 0.0), &[0.0], 0, &g).unwrap();
        for z in out {
            assert!((z - one()).norm() < 1e-15);
        }
        let (s, v) = (0.3, 0.7);
        let out = apply(&spec, Cx::new(s, 0.0), &[v], 0, &g).unwrap();
        for z in out {
            assert!((z - Cx::new((-s).exp() * 2.0 * v.cos(), 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn toy_eigenvalues() {
        let spec = toy_spec();
        for s in [0.0, 0.5, 1.3] {
            for v in [0.0, 0.4, 2.0] {
                let r = leading_eigenvalue(&spec, Cx::new(s, 0.0), &[v], 0).unwrap();
                let expect = 2.0 * (-s).exp() * v.cos();
                assert!((r.lambda.re.abs() - expect.abs()).abs() < 1e-12, "s={s} v={v}");
                assert!(r.residual < 1e-8);
            }
        }
    }

    #[test]
    fn toy_closed_forms() {
        let spec = toy_spec();
        assert!((critical_exponent(&spec).unwrap() - LN_2).abs() < 1e-12);
        for i in -10..=10 {
            let u = i as f64 / 10.0;
            let p = pressure(&spec, &[u]).unwrap();
            assert!((p - (2.0 * u.cosh()).ln()).abs() < 1e-10);
        }
        let surf = pressure_surface(&spec, 1e-3).unwrap();
        assert!((surf.sigma - 1.0).abs() < 1e-6);
        assert!((surf.c0 - (2.0 * PI).sqrt()).abs() < 1e-6);

        let three = MarkovShift::<f64>::toy_full_shift(3, 2.0, &[vec![], vec![], vec![]]).unwrap();
        let spec3 = OperatorSpec::new(three, Discretization::ExactMatrix).unwrap();
        assert!((critical_exponent(&spec3).unwrap() - 3f64.ln() / 2.0).abs() < 1e-12);
    }

    #[test]
    fn toy_product_has_identity_hessian() {
        let f = vec![vec![1, 1], vec![1, -1], vec![-1, 1], vec![-1, -1]];
        let shift = MarkovShift::<f64>::toy_full_shift(4, 1.0, &f).unwrap();
        let spec = OperatorSpec::new(shift, Discretization::ExactMatrix).unwrap();
        let surf = pressure_surface(&spec, 1e-3).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let e: f64 = if i == j { 1.0 } else { 0.0 };
                assert!((surf.hessian[i][j] - e).abs() < 1e-6);
            }
        }
        assert!((surf.sigma - 1.0).abs() < 1e-6);
        assert!((surf.c0 - 2.0 * PI).abs() < 1e-5);
    }

    #[test]
    fn holonomy_needs_theta() {
        let spec = toy_spec();
        assert_eq!(
            leading_eigenvalue(&spec, Cx::new(1.0, 0.0), &[0.0], 1).unwrap_err(),
            TransferError::HolonomyUnavailable
        );
        let with_theta = MarkovShift::toy(
            vec![vec![true; 2]; 2],
            vec![vec![1.0; 2]; 2],
            vec![vec![vec![]; 2]; 2],
            Some(vec![vec![0.3, -0.2], vec![1.1, 0.0]]),
        )
        .unwrap();
        let spec = OperatorSpec::new(with_theta, Discretization::ExactMatrix).unwrap();
        let a = leading_eigenvalue(&spec, Cx::new(0.4, 0.9), &[], 2).unwrap().lambda;
        let b = leading_eigenvalue(&spec, Cx::new(0.4, -0.9), &[], -2).unwrap().lambda;
        assert!((a - b.conj()).norm() < 1e-10);
    }

    #[test]
    fn toy_positive_control_is_flagged() {
        let spec = toy_spec();
        let delta = critical_exponent(&spec).unwrap();
        let report = spectral_radius_scan(&spec, delta, &[0.0, 1.0, 2.0 * PI], &[vec![0.0]], &[0], 1e-3).unwrap();
        assert!((report.rows[0].modulus - 1.0).abs() < 1e-8);
        // constant roof: every t is on the unit circle, 2π/c included
        assert_eq!(report.violations.len(), 2);
        assert!(report.violations.iter().any(|r| (r.t - 2.0 * PI).abs() < 1e-15));
    }

    #[test]
    fn chebyshev_interpolation_is_exact_on_polynomials() {
        let grid = ChebyshevGrid::<f64>::new(9);
        let f = |x: f64| 3.0 * x.powi(8) - x.powi(3) + 0.5;
        let values: Vec<f64> = grid.reference_nodes().iter().map(|&x| f(x)).collect();
        for t in [-0.93, -0.1, 0.0, 0.37, 1.0] {
            assert!((grid.evaluate(&values, t) - f(t)).abs() < 1e-12);
        }
    }

    #[test]
    fn collocation_matches_pointwise_branch_sum() {
        let spec = pair_spec(32);
        let group = spec.shift().group().unwrap().clone();
        let grid = ChebyshevGrid::<f64>::new(32);
        // Smooth test function on each interval.
        let g: Vec<Cx<f64>> = (0..4)
            .flat_map(|c| grid.reference_nodes().iter().map(move |&x| Cx::new((0.3 * x + c as f64).cos(), 0.2 * x)))
            .collect();
        let s = Cx::new(0.7, 0.4);
        let v = [0.9];
        let lg = apply(&spec, s, &v, 0, &g).unwrap();
        let mut rng = 0x2545F4914F6CDD1Du64;
        for _ in 0..50 {
            rng ^= rng << 13;
            rng ^= rng >> 7;
            rng ^= rng << 17;
            let c = (rng % 4) as usize;
            let t = ((rng >> 8) % 1_000_000) as f64 / 500_000.0 - 1.0;
            let disk = group.symbol_disk(c);
            let y = disk.center.re + disk.radius * t;
            let direct = spec.branch_sum_at(s, &v, &g, c, y).unwrap();
            let interp = grid.evaluate_complex(&lg[c * 32..(c + 1) * 32], t);
            assert!((direct - interp).norm() < 1e-8, "{direct} vs {interp}");
        }
    }

    #[test]
    fn schottky_eigenvalue_structure() {
        let spec = pair_spec(32);
        let delta = critical_exponent(&spec).unwrap();
        let r = leading_eigenvalue(&spec, Cx::new(delta, 0.0), &[0.0], 0).unwrap();
        assert!((r.lambda - one()).norm() < 1e-8);
        assert!(r.h.iter().all(|z| z.re > 0.0 && z.im.abs() < 1e-10));
        let mut last = f64::INFINITY;
        for s in linspace(0.1, 1.5, 15) {
            let l = tilted_eigenvalue(&spec, s, &[0.0]).unwrap();
            assert!(l < last);
            last = l;
        }
        let a = leading_eigenvalue_unchecked(&spec, Cx::new(0.8, 1.3), &[0.6], 0).unwrap().lambda;
        let b = leading_eigenvalue_unchecked(&spec, Cx::new(0.8, -1.3), &[-0.6], 0).unwrap().lambda;
        assert!((a - b.conj()).norm() < 1e-10);
    }

    #[test]
    fn pressure_is_even_and_convex() {
        let spec = pair_spec(24);
        for u in [0.1, 0.5, 1.0] {
            assert!((pressure(&spec, &[u]).unwrap() - pressure(&spec, &[-u]).unwrap()).abs() < 1e-8);
        }
        let (u1, u2) = (-0.8, 0.6);
        let (p1, p2) = (pressure(&spec, &[u1]).unwrap(), pressure(&spec, &[u2]).unwrap());
        for a in [0.25, 0.5, 0.75] {
            let mid = pressure(&spec, &[a * u1 + (1.0 - a) * u2]).unwrap();
            assert!(mid <= a * p1 + (1.0 - a) * p2 + 1e-8);
        }
    }

    #[test]
    fn invalid_specs() {
        let toy = fixtures::toy_two_shift();
        assert!(OperatorSpec::new(toy, Discretization::Collocation { nodes_per_disk: 16 }).is_err());
        let shift = MarkovShift::from_schottky(&fixtures::fuchsian_pair()).unwrap();
        assert!(OperatorSpec::new(shift.clone(), Discretization::Collocation { nodes_per_disk: 4 }).is_err());
        assert!(OperatorSpec::new(shift, Discretization::ExactMatrix).is_err());
        let space = MarkovShift::from_schottky(&fixtures::kleinian_pair(0)).unwrap();
        assert!(OperatorSpec::new(space, Discretization::Collocation { nodes_per_disk: 16 }).is_err());
    }

    #[test]
    fn grids() {
        assert_eq!(linspace(0.0, 1.0, 5), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        let g = torus_grid::<f64>(2, 3);
        assert_eq!(g.len(), 9);
        assert_eq!(g[0], vec![0.0, 0.0]);
    }

    #[test]
    fn fingerprint_is_stable_and_discriminating() {
        assert_eq!(toy_spec().fingerprint(), toy_spec().fingerprint());
        assert_ne!(pair_spec(16).fingerprint(), pair_spec(24).fingerprint());
    }
}
