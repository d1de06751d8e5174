//! Small dense complex linear algebra: dominant eigenpairs, the full
//! spectrum via shifted Hessenberg QR, and LU solves.

use crate::scalar::{Cx, Real};

/// Square complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CMat<T> {
    n: usize,
    data: Vec<Cx<T>>,
}

impl<T: Real> CMat<T> {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![Cx::new(T::zero(), T::zero()); n * n] }
    }

    pub fn from_rows(rows: Vec<Vec<Cx<T>>>) -> Self {
        let n = rows.len();
        assert!(rows.iter().all(|r| r.len() == n), "matrix must be square");
        Self { n, data: rows.into_iter().flatten().collect() }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Cx<T> {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, z: Cx<T>) {
        self.data[i * self.n + j] = z;
    }

    #[inline]
    pub fn add_to(&mut self, i: usize, j: usize, z: Cx<T>) {
        self.data[i * self.n + j] = self.data[i * self.n + j] + z;
    }

    pub fn transpose(&self) -> Self {
        let n = self.n;
        let mut t = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn mul_vec(&self, x: &[Cx<T>]) -> Vec<Cx<T>> {
        self.data
            .chunks_exact(self.n)
            .map(|row| row.iter().zip(x).fold(Cx::new(T::zero(), T::zero()), |acc, (a, b)| acc + *a * *b))
            .collect()
    }

    /// Largest row sum of moduli.
    pub fn norm_inf(&self) -> T {
        self.data
            .chunks_exact(self.n)
            .map(|row| row.iter().fold(T::zero(), |acc, z| acc + z.norm()))
            .fold(T::zero(), T::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoConvergence(pub usize);

pub fn vec_norm<T: Real>(x: &[Cx<T>]) -> T {
    x.iter().fold(T::zero(), |acc, z| acc + z.norm_sqr()).sqrt()
}

fn scale<T: Real>(x: &mut [Cx<T>], s: Cx<T>) {
    for z in x.iter_mut() {
        *z = *z * s;
    }
}

/// Scales so the entry of largest modulus is real and positive with modulus one.
pub fn normalize_phase<T: Real>(x: &mut [Cx<T>]) {
    let Some(big) = x.iter().copied().max_by(|a, b| a.norm_sqr().partial_cmp(&b.norm_sqr()).expect("finite")) else {
        return;
    };
    if big.norm_sqr() > T::zero() {
        scale(x, big.inv());
    }
}

/// Relative residual `‖Ax − λx‖ / ‖x‖`.
pub fn residual<T: Real>(a: &CMat<T>, lambda: Cx<T>, x: &[Cx<T>]) -> T {
    let ax = a.mul_vec(x);
    let r: Vec<Cx<T>> = ax.iter().zip(x).map(|(p, q)| *p - *q * lambda).collect();
    vec_norm(&r) / vec_norm(x)
}

/// Eigenvalues of a general complex matrix: Householder reduction to
/// Hessenberg form, then single-shift QR with Wilkinson shifts and deflation.
pub fn eigenvalues<T: Real>(a: &CMat<T>) -> Result<Vec<Cx<T>>, NoConvergence> {
    let n = a.dim();
    let mut h: Vec<Vec<Cx<T>>> = (0..n).map(|i| (0..n).map(|j| a.get(i, j)).collect()).collect();
    hessenberg(&mut h);
    let eps = T::epsilon();
    let zero = Cx::new(T::zero(), T::zero());
    let mut out = vec![zero; n];
    let mut hi = n;
    let mut iter = 0usize;
    let mut total = 0usize;
    while hi > 0 {
        let top = hi - 1;
        // Find the start of the active unreduced block.
        let mut lo = top;
        while lo > 0 {
            let s = h[lo][lo].norm() + h[lo - 1][lo - 1].norm();
            let s = if s == T::zero() { T::one() } else { s };
            if h[lo][lo - 1].norm() <= eps * s {
                h[lo][lo - 1] = zero;
                break;
            }
            lo -= 1;
        }
        if lo == top {
            out[top] = h[top][top];
            hi -= 1;
            iter = 0;
            continue;
        }
        iter += 1;
        total += 1;
        if total > 60 * n.max(10) {
            return Err(NoConvergence(total));
        }
        let mu = if iter % 11 == 10 {
            // Exceptional shift to break cycles.
            h[top][top] + Cx::new(h[top][top - 1].norm() * T::lit(0.75), T::zero())
        } else {
            wilkinson_shift(h[top - 1][top - 1], h[top - 1][top], h[top][top - 1], h[top][top])
        };
        qr_step(&mut h, lo, top, mu);
    }
    Ok(out)
}

fn hessenberg<T: Real>(h: &mut [Vec<Cx<T>>]) {
    let n = h.len();
    let zero = Cx::new(T::zero(), T::zero());
    for k in 0..n.saturating_sub(2) {
        let mut v: Vec<Cx<T>> = (k + 1..n).map(|i| h[i][k]).collect();
        let alpha = vec_norm(&v);
        if alpha == T::zero() {
            continue;
        }
        let phase = if v[0].norm() == T::zero() { Cx::new(T::one(), T::zero()) } else { v[0] / v[0].norm() };
        v[0] = v[0] + phase * alpha;
        let vn = vec_norm(&v);
        if vn == T::zero() {
            continue;
        }
        scale(&mut v, Cx::new(vn.recip(), T::zero()));
        let two = T::lit(2.0);
        // H ← (I − 2vvᴴ) H
        for j in k..n {
            let mut dot = zero;
            for (idx, vi) in v.iter().enumerate() {
                dot = dot + vi.conj() * h[k + 1 + idx][j];
            }
            for (idx, vi) in v.iter().enumerate() {
                h[k + 1 + idx][j] = h[k + 1 + idx][j] - *vi * dot * two;
            }
        }
        // H ← H (I − 2vvᴴ)
        for row in h.iter_mut() {
            let mut dot = zero;
            for (idx, vi) in v.iter().enumerate() {
                dot = dot + row[k + 1 + idx] * *vi;
            }
            for (idx, vi) in v.iter().enumerate() {
                row[k + 1 + idx] = row[k + 1 + idx] - dot * vi.conj() * two;
            }
        }
        for row in h.iter_mut().skip(k + 2) {
            row[k] = zero;
        }
    }
}

fn wilkinson_shift<T: Real>(p: Cx<T>, q: Cx<T>, r: Cx<T>, s: Cx<T>) -> Cx<T> {
    let half = T::lit(0.5);
    let m = (p - s) * half;
    let disc = (m * m + q * r).sqrt();
    let mid = (p + s) * half;
    let a = mid + disc;
    let b = mid - disc;
    if (a - s).norm() <= (b - s).norm() {
        a
    } else {
        b
    }
}

/// One explicit shifted QR sweep on the block `lo..=hi` via Givens rotations.
fn qr_step<T: Real>(h: &mut [Vec<Cx<T>>], lo: usize, hi: usize, mu: Cx<T>) {
    for i in lo..=hi {
        h[i][i] = h[i][i] - mu;
    }
    let mut rots = Vec::with_capacity(hi - lo);
    for i in lo..hi {
        let a = h[i][i];
        let b = h[i + 1][i];
        let r = (a.norm_sqr() + b.norm_sqr()).sqrt();
        let (c, s) =
            if r == T::zero() { (Cx::new(T::one(), T::zero()), Cx::new(T::zero(), T::zero())) } else { (a / r, b / r) };
        for j in i..=hi {
            let x = h[i][j];
            let y = h[i + 1][j];
            h[i][j] = c.conj() * x + s.conj() * y;
            h[i + 1][j] = c * y - s * x;
        }
        rots.push((c, s));
    }
    for (off, (c, s)) in rots.into_iter().enumerate() {
        let i = lo + off;
        for row in h.iter_mut().take((i + 2).min(hi) + 1).skip(lo) {
            let x = row[i];
            let y = row[i + 1];
            row[i] = x * c + y * s;
            row[i + 1] = y * c.conj() - x * s.conj();
        }
    }
    for i in lo..=hi {
        h[i][i] = h[i][i] + mu;
    }
}

/// LU factorization with partial pivoting.
pub struct Lu<T> {
    n: usize,
    lu: Vec<Cx<T>>,
    piv: Vec<usize>,
}

impl<T: Real> Lu<T> {
    /// Factors `a − shift·I`; exactly singular pivots are nudged so inverse
    /// iteration still makes progress.
    pub fn factor_shifted(a: &CMat<T>, shift: Cx<T>) -> Self {
        let n = a.dim();
        let mut lu = a.data.clone();
        for i in 0..n {
            lu[i * n + i] = lu[i * n + i] - shift;
        }
        let tiny = T::epsilon() * a.norm_inf().max(T::one());
        let mut piv: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let p = (k..n)
                .max_by(|&i, &j| lu[i * n + k].norm_sqr().partial_cmp(&lu[j * n + k].norm_sqr()).expect("finite"))
                .expect("nonempty");
            if p != k {
                for j in 0..n {
                    lu.swap(k * n + j, p * n + j);
                }
                piv.swap(k, p);
            }
            if lu[k * n + k].norm() < tiny {
                lu[k * n + k] = Cx::new(tiny, T::zero());
            }
            let d = lu[k * n + k];
            for i in k + 1..n {
                let f = lu[i * n + k] / d;
                lu[i * n + k] = f;
                if f.norm_sqr() != T::zero() {
                    for j in k + 1..n {
                        lu[i * n + j] = lu[i * n + j] - f * lu[k * n + j];
                    }
                }
            }
        }
        Self { n, lu, piv }
    }

    pub fn solve(&self, b: &[Cx<T>]) -> Vec<Cx<T>> {
        let n = self.n;
        let mut x: Vec<Cx<T>> = self.piv.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for j in 0..i {
                x[i] = x[i] - self.lu[i * n + j] * x[j];
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                x[i] = x[i] - self.lu[i * n + j] * x[j];
            }
            x[i] = x[i] / self.lu[i * n + i];
        }
        x
    }
}

/// Eigenvector for a known eigenvalue by inverse iteration.
pub fn inverse_iteration<T: Real>(a: &CMat<T>, lambda: Cx<T>, sweeps: usize) -> Vec<Cx<T>> {
    let n = a.dim();
    let lu = Lu::factor_shifted(a, lambda);
    let mut x: Vec<Cx<T>> =
        (0..n).map(|i| Cx::new(T::one() + T::lit(0.01) * T::from_count(i % 7), T::zero())).collect();
    for _ in 0..sweeps {
        x = lu.solve(&x);
        normalize_phase(&mut x);
    }
    x
}

/// Dominant eigenpair: power iteration when it converges quickly, otherwise
/// the full spectrum followed by inverse iteration.
pub fn dominant_eigenpair<T: Real>(a: &CMat<T>) -> Result<(Cx<T>, Vec<Cx<T>>), NoConvergence> {
    let n = a.dim();
    let tol = T::epsilon() * T::lit(64.0);
    let mut x = vec![Cx::new(T::one(), T::zero()); n];
    let mut lambda = Cx::new(T::zero(), T::zero());
    for _ in 0..400 {
        let y = a.mul_vec(&x);
        let num = y.iter().zip(&x).fold(Cx::new(T::zero(), T::zero()), |acc, (p, q)| acc + q.conj() * *p);
        let den = x.iter().fold(T::zero(), |acc, q| acc + q.norm_sqr());
        let next = num / den;
        let mut y = y;
        normalize_phase(&mut y);
        let settled = (next - lambda).norm() <= tol * next.norm().max(T::min_positive_value());
        lambda = next;
        x = y;
        if settled && residual(a, lambda, &x) <= T::lit(1e3) * tol * a.norm_inf().max(T::one()) {
            return Ok((lambda, x));
        }
    }
    let spectrum = eigenvalues(a)?;
    let lambda = spectrum
        .into_iter()
        .max_by(|p, q| p.norm().partial_cmp(&q.norm()).expect("finite"))
        .unwrap_or(Cx::new(T::zero(), T::zero()));
    let x = inverse_iteration(a, lambda, 3);
    Ok((lambda, x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn c(re: f64, im: f64) -> Cx<f64> {
        Cx::new(re, im)
    }

    #[test]
    fn triangular_spectrum() {
        let a = CMat::from_rows(vec![
            vec![c(1.0, 0.0), c(2.0, 1.0), c(0.0, 3.0)],
            vec![c(0.0, 0.0), c(-2.0, 0.5), c(1.0, 0.0)],
            vec![c(0.0, 0.0), c(0.0, 0.0), c(0.5, -1.0)],
        ]);
        let mut ev = eigenvalues(&a).unwrap();
        ev.sort_by(|p, q| p.re.partial_cmp(&q.re).unwrap());
        assert!((ev[0] - c(-2.0, 0.5)).norm() < 1e-12);
        assert!((ev[1] - c(0.5, -1.0)).norm() < 1e-12);
        assert!((ev[2] - c(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn random_spectrum_satisfies_trace_and_residuals() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for n in [2usize, 5, 17, 40] {
            let rows: Vec<Vec<Cx<f64>>> = (0..n)
                .map(|_| (0..n).map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect())
                .collect();
            let a = CMat::from_rows(rows);
            let ev = eigenvalues(&a).unwrap();
            let tr: Cx<f64> = (0..n).map(|i| a.get(i, i)).sum();
            let sum: Cx<f64> = ev.iter().sum();
            assert!((tr - sum).norm() < 1e-9 * n as f64);
            for l in ev {
                let x = inverse_iteration(&a, l, 3);
                assert!(residual(&a, l, &x) < 1e-9, "n={n}");
            }
        }
    }

    #[test]
    fn rotation_has_unimodular_pair() {
        // Equal-modulus pair defeats power iteration; the QR fallback handles it.
        let a = CMat::from_rows(vec![vec![c(0.0, 0.0), c(-1.0, 0.0)], vec![c(1.0, 0.0), c(0.0, 0.0)]]);
        let (l, x) = dominant_eigenpair(&a).unwrap();
        assert!((l.norm() - 1.0).abs() < 1e-12);
        assert!(residual(&a, l, &x) < 1e-12);
    }

    #[test]
    fn lu_solves() {
        let a = CMat::from_rows(vec![
            vec![c(0.0, 0.0), c(2.0, 0.0), c(1.0, 1.0)],
            vec![c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)],
            vec![c(3.0, -1.0), c(0.0, 0.0), c(1.0, 0.0)],
        ]);
        let b = vec![c(1.0, 0.0), c(0.0, 2.0), c(-1.0, 0.0)];
        let x = Lu::factor_shifted(&a, c(0.0, 0.0)).solve(&b);
        let ax = a.mul_vec(&x);
        for (p, q) in ax.iter().zip(&b) {
            assert!((p - q).norm() < 1e-12);
        }
    }
}
