//! Subshifts of finite type carrying a roof `τ`, a `ℤ^d` cocycle `f` and an
//! optional holonomy `θ`, together with the Gibbs (Parry) chain at `s = δ`.
//!
//! Per-transition data on `(a → b)` describes the point whose first two
//! symbols are `a b`. For the Schottky coding the symbol sequence of a
//! boundary point `x ∈ D_a` is read off by repeatedly applying `a⁻¹`; the
//! roof is `τ(x) = log|(a⁻¹)′(x)|`, the holonomy is its argument, and `f`
//! is the homology of the leading letter `a`.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hyperbolic::{Model, Moebius};
use crate::scalar::{Cx, Real};
use crate::schottky::{inverse_symbol, Schottky, ValidationError, Word};
use crate::transfer::{ChebyshevGrid, Discretization, SpectralResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Source {
    Toy,
    SchottkyCoding,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ShiftError {
    #[error("transition matrix is not aperiodic (no positive power up to k²)")]
    NotAperiodic,
    #[error("roof must be positive on allowed transitions")]
    NonPositiveRoof,
    #[error("malformed shift data: {0}")]
    Malformed(String),
    #[error("spectral data is not at the critical exponent (|λ − 1| = {0:e})")]
    NotAtCriticalExponent(f64),
    #[error(transparent)]
    Validation(#[from] ValidationError),
}

#[derive(Debug, Clone)]
enum Roof<T> {
    Table(Vec<Vec<T>>),
    /// `log|(a⁻¹)′|` of the coding branches.
    BranchDerivative,
}

#[derive(Debug, Clone)]
enum Holonomy<T> {
    None,
    Table(Vec<Vec<T>>),
    /// Argument of the complex branch derivative.
    BranchArgument,
}

/// Suspension data of a subshift of finite type.
#[derive(Debug, Clone)]
pub struct MarkovShift<T> {
    k: usize,
    transition: Vec<Vec<bool>>,
    roof: Roof<T>,
    cocycle: Vec<Vec<Vec<i64>>>,
    holonomy: Holonomy<T>,
    source: Source,
    homology_dim: usize,
    aperiodicity_power: usize,
    group: Option<Box<Schottky<T>>>,
}

/// Smallest `N ≤ k²` with `A^N` entrywise positive.
pub fn aperiodicity_certificate(a: &[Vec<bool>]) -> Option<usize> {
    let k = a.len();
    let mut p = a.to_vec();
    for n in 1..=k * k {
        if p.iter().all(|row| row.iter().all(|&x| x)) {
            return Some(n);
        }
        p = (0..k).map(|i| (0..k).map(|j| (0..k).any(|m| p[i][m] && a[m][j])).collect()).collect();
    }
    None
}

impl<T: Real> MarkovShift<T> {
    /// A shift with tabulated per-transition data.
    pub fn toy(
        transition: Vec<Vec<bool>>,
        roof: Vec<Vec<T>>,
        cocycle: Vec<Vec<Vec<i64>>>,
        holonomy: Option<Vec<Vec<T>>>,
    ) -> Result<Self, ShiftError> {
        let k = transition.len();
        let square = |n: usize| n == k;
        if k < 2 || !transition.iter().all(|r| square(r.len())) {
            return Err(ShiftError::Malformed("transition matrix must be k×k with k ≥ 2".into()));
        }
        if roof.len() != k || !roof.iter().all(|r| square(r.len())) {
            return Err(ShiftError::Malformed("roof table must be k×k".into()));
        }
        if cocycle.len() != k || !cocycle.iter().all(|r| square(r.len())) {
            return Err(ShiftError::Malformed("cocycle table must be k×k".into()));
        }
        let d = cocycle[0][0].len();
        if cocycle.iter().flatten().any(|f| f.len() != d) {
            return Err(ShiftError::Malformed("cocycle vectors must share one dimension".into()));
        }
        if let Some(h) = &holonomy {
            if h.len() != k || !h.iter().all(|r| square(r.len())) {
                return Err(ShiftError::Malformed("holonomy table must be k×k".into()));
            }
        }
        for i in 0..k {
            for j in 0..k {
                if transition[i][j] && !(roof[i][j] > T::zero()) {
                    return Err(ShiftError::NonPositiveRoof);
                }
            }
        }
        let aperiodicity_power = aperiodicity_certificate(&transition).ok_or(ShiftError::NotAperiodic)?;
        Ok(Self {
            k,
            transition,
            roof: Roof::Table(roof),
            cocycle,
            holonomy: holonomy.map_or(Holonomy::None, Holonomy::Table),
            source: Source::Toy,
            homology_dim: d,
            aperiodicity_power,
            group: None,
        })
    }

    /// Full shift on `k` symbols, constant roof `c`, cocycle `f_values[a]` on every transition out of `a`.
    pub fn toy_full_shift(k: usize, c: T, f_values: &[Vec<i64>]) -> Result<Self, ShiftError> {
        if f_values.len() != k {
            return Err(ShiftError::Malformed("one cocycle value per symbol".into()));
        }
        let cocycle = (0..k).map(|a| vec![f_values[a].clone(); k]).collect();
        Self::toy(vec![vec![true; k]; k], vec![vec![c; k]; k], cocycle, None)
    }

    /// The Bowen–Series coding of a validated Schottky group.
    pub fn from_schottky(group: &Schottky<T>) -> Result<Self, ShiftError> {
        group.validate()?;
        let k = group.symbol_count();
        let transition: Vec<Vec<bool>> = (0..k).map(|a| (0..k).map(|b| b != inverse_symbol(a)).collect()).collect();
        let cocycle = (0..k).map(|a| vec![group.symbol_homology(a).to_vec(); k]).collect();
        let aperiodicity_power = aperiodicity_certificate(&transition).ok_or(ShiftError::NotAperiodic)?;
        let holonomy = match group.model() {
            Model::UpperHalfPlane2D => Holonomy::None,
            Model::UpperHalfSpace3D => Holonomy::BranchArgument,
        };
        Ok(Self {
            k,
            transition,
            roof: Roof::BranchDerivative,
            cocycle,
            holonomy,
            source: Source::SchottkyCoding,
            homology_dim: group.homology_dim(),
            aperiodicity_power,
            group: Some(Box::new(group.clone())),
        })
    }

    pub fn symbol_count(&self) -> usize {
        self.k
    }

    pub fn source(&self) -> Source {
        self.source
    }

    pub fn homology_dim(&self) -> usize {
        self.homology_dim
    }

    pub fn aperiodicity_power(&self) -> usize {
        self.aperiodicity_power
    }

    pub fn allowed(&self, a: usize, b: usize) -> bool {
        self.transition[a][b]
    }

    pub fn transition_matrix(&self) -> &[Vec<bool>] {
        &self.transition
    }

    pub fn cocycle(&self, a: usize, b: usize) -> &[i64] {
        &self.cocycle[a][b]
    }

    pub fn group(&self) -> Option<&Schottky<T>> {
        self.group.as_deref()
    }

    pub fn has_holonomy(&self) -> bool {
        !matches!(self.holonomy, Holonomy::None)
    }

    /// Tabulated roof; `None` for the analytic coding roof.
    pub fn roof_table(&self, a: usize, b: usize) -> Option<T> {
        match &self.roof {
            Roof::Table(t) => Some(t[a][b]),
            Roof::BranchDerivative => None,
        }
    }

    pub fn holonomy_table(&self, a: usize, b: usize) -> Option<T> {
        match &self.holonomy {
            Holonomy::Table(t) => Some(t[a][b]),
            _ => None,
        }
    }

    /// Coding branch of symbol `a` (the letter itself).
    pub fn branch(&self, a: usize) -> Option<&Moebius<T>> {
        self.group.as_ref().map(|g| g.symbol_map(a))
    }

    /// `(τ, θ)` at the point `a·y`: `log (a⁻¹)′(a·y) = −log a′(y)`.
    pub fn branch_roof(&self, a: usize, y: Cx<T>) -> Option<(T, T)> {
        let g = self.group.as_ref()?;
        let der = g.symbol_map(a).complex_derivative(y).ok()?;
        let theta = match self.holonomy {
            Holonomy::BranchArgument => -der.arg(),
            _ => T::zero(),
        };
        Some((-der.norm().ln(), theta))
    }

    /// Minimal roof over the allowed transitions (a lower bound for the
    /// coding roof, from the derivative bound on each disk).
    pub fn min_roof(&self) -> T {
        match &self.roof {
            Roof::Table(t) => (0..self.k)
                .flat_map(|a| (0..self.k).filter(move |&b| self.transition[a][b]).map(move |b| t[a][b]))
                .fold(T::infinity(), T::min),
            Roof::BranchDerivative => self.group.as_ref().expect("coding shift has a group").min_contraction(),
        }
    }

    /// Sum of `(τ, θ, f)` along the cycle of a cyclically reduced word,
    /// evaluated at its periodic point (the attracting fixed point).
    pub fn cycle_sums(&self, w: &Word) -> Option<(T, T, Vec<i64>)> {
        let g = self.group.as_ref()?;
        let n = w.len();
        if n == 0 || !w.is_cyclically_reduced() {
            return None;
        }
        let syms = w.to_symbols();
        let (mut tau, mut theta) = (T::zero(), T::zero());
        let mut f = vec![0i64; self.homology_dim];
        for (i, &a) in syms.iter().enumerate() {
            // Each point of the cycle is the fixed point of a rotation of `w`;
            // walking the orbit with the expanding inverse branches would
            // amplify rounding by e^ℓ.
            let rotated: Vec<usize> = syms[i..].iter().chain(&syms[..i]).copied().collect();
            let x = g.evaluate(&Word::from_symbols(&rotated).ok()?).attracting_fixed_point()?;
            let der = g.symbol_map(inverse_symbol(a)).complex_derivative(x).ok()?;
            tau = tau + der.norm().ln();
            if matches!(self.holonomy, Holonomy::BranchArgument) {
                theta = theta + der.arg();
            }
            for (acc, v) in f.iter_mut().zip(self.cocycle(a, syms[(i + 1) % n])) {
                *acc += v;
            }
        }
        Some((tau, theta, f))
    }

    /// Cocycle sum along an admissible finite path `x₀ … x_n` (n transitions).
    pub fn path_cocycle(&self, path: &[usize]) -> Option<Vec<i64>> {
        let mut f = vec![0i64; self.homology_dim];
        for w in path.windows(2) {
            if !self.allowed(w[0], w[1]) {
                return None;
            }
            for (acc, v) in f.iter_mut().zip(self.cocycle(w[0], w[1])) {
                *acc += v;
            }
        }
        Some(f)
    }

    /// Stable digest of the shift data, recorded in report manifests.
    pub fn fingerprint_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        let mut put = |s: String| {
            out.extend_from_slice(s.as_bytes());
            out.push(b'\n');
        };
        put(format!("k={} source={:?} d={}", self.k, self.source, self.homology_dim));
        for a in 0..self.k {
            for b in 0..self.k {
                put(format!(
                    "{a} {b} {} {:?} {:?} {:?}",
                    u8::from(self.transition[a][b]),
                    self.roof_table(a, b).map(|x| x.to_f64_lossy().to_bits()),
                    self.cocycle[a][b],
                    self.holonomy_table(a, b).map(|x| x.to_f64_lossy().to_bits()),
                ));
            }
        }
        if let Some(g) = &self.group {
            for m in g.generators() {
                let repr: crate::hyperbolic::MoebiusRepr = (*m).into();
                let bits: Vec<u64> = repr.entries.iter().flatten().map(|x| x.to_bits()).collect();
                put(format!("gen {bits:?}"));
            }
            put(format!("hom {:?}", g.homology_matrix()));
        }
        out
    }
}

/// On-disk form of a toy shift.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ToyShiftFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub transition: Vec<Vec<u8>>,
    pub roof: Vec<Vec<f64>>,
    pub cocycle: Vec<Vec<Vec<i64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub holonomy: Option<Vec<Vec<f64>>>,
}

impl ToyShiftFile {
    pub fn full_shift(k: usize, c: f64, f_values: &[Vec<i64>]) -> Self {
        ToyShiftFile {
            name: Some(format!("full-{k}-shift")),
            transition: vec![vec![1; k]; k],
            roof: vec![vec![c; k]; k],
            cocycle: (0..k).map(|a| vec![f_values[a].clone(); k]).collect(),
            holonomy: None,
        }
    }

    pub fn build<T: Real>(&self) -> Result<MarkovShift<T>, ShiftError> {
        let lift = |t: &Vec<Vec<f64>>| t.iter().map(|r| r.iter().map(|&x| T::lit(x)).collect()).collect();
        let a = self.transition.iter().map(|r| r.iter().map(|&x| x != 0).collect()).collect();
        MarkovShift::toy(a, lift(&self.roof), self.cocycle.clone(), self.holonomy.as_ref().map(lift))
    }
}

#[derive(Debug, Clone)]
enum Kernel<T> {
    /// Finite-state chain on symbols.
    Symbolic,
    /// Backward g-measure chain on boundary points: from `y ∈ D_c`, move to
    /// `a·y` with probability `|a′(y)|^δ h(a·y)/h(y)`.
    Boundary { delta: T, grid: ChebyshevGrid<T>, h: Vec<T> },
}

/// The equilibrium (Parry/Gibbs) chain of `−δτ`.
#[derive(Debug, Clone)]
pub struct ParryChain<T> {
    /// Stationary mass of each symbol.
    pub stationary: Vec<T>,
    /// `p(i → j)`. For the coding chain this is the symbol marginal of the
    /// boundary kernel: from leading symbol `i`, the next prepended letter is `j`.
    pub transition: Vec<Vec<T>>,
    kernel: Kernel<T>,
}

/// Partial sums after `n` steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocycleSample<T> {
    pub n: usize,
    pub tau: T,
    pub f: Vec<i64>,
}

/// One row of a trajectory dump.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow<T> {
    pub step: usize,
    pub symbol: usize,
    pub tau_cum: T,
    pub f_cum: Vec<i64>,
}

/// Steps discarded before a coding trajectory starts accumulating; the
/// kernel contracts at least by `e^{−min τ}` per step.
const BURN_IN: usize = 64;

impl<T: Real> ParryChain<T> {
    pub fn new(shift: &MarkovShift<T>, spectral: &SpectralResult<T>) -> Result<Self, ShiftError> {
        let miss = (spectral.lambda - Cx::new(T::one(), T::zero())).norm();
        if miss > T::lit(1e-8) || spectral.v.iter().any(|x| *x != T::zero()) || spectral.p != 0 {
            return Err(ShiftError::NotAtCriticalExponent(miss.to_f64_lossy()));
        }
        let delta = spectral.s.re;
        let k = shift.symbol_count();
        match spectral.discretization {
            Discretization::ExactMatrix => {
                let table = |a: usize, b: usize| shift.roof_table(a, b).expect("toy roof");
                // ρ solves Bρ = ρ with B_ij = A_ij e^{−δτ_ij}; then p(i→j) = B_ij ρ_j / ρ_i.
                let rho: Vec<T> = spectral.rho.iter().map(|z| z.re.abs()).collect();
                let h: Vec<T> = spectral.h.iter().map(|z| z.re.abs()).collect();
                let mut transition = vec![vec![T::zero(); k]; k];
                for i in 0..k {
                    let mut row_sum = T::zero();
                    for j in 0..k {
                        if shift.allowed(i, j) {
                            let w = (-delta * table(i, j)).exp() * rho[j] / rho[i];
                            transition[i][j] = w;
                            row_sum = row_sum + w;
                        }
                    }
                    for x in transition[i].iter_mut() {
                        *x = *x / row_sum;
                    }
                }
                let stationary = normalized((0..k).map(|i| h[i] * rho[i]).collect());
                Ok(Self { stationary, transition, kernel: Kernel::Symbolic })
            }
            Discretization::Collocation { nodes_per_disk } => {
                let grid = ChebyshevGrid::new(nodes_per_disk);
                let n = nodes_per_disk;
                let sign = if spectral.h.iter().map(|z| z.re).fold(T::zero(), |a, b| a + b) < T::zero() {
                    -T::one()
                } else {
                    T::one()
                };
                let h: Vec<T> = spectral.h.iter().map(|z| z.re * sign).collect();
                let rho: Vec<T> = spectral.rho.iter().map(|z| z.re).collect();
                let kernel = Kernel::Boundary { delta, grid, h };
                let group = shift.group().ok_or_else(|| ShiftError::Malformed("coding shift without group".into()))?;
                let mut stationary = vec![T::zero(); k];
                let mut transition = vec![vec![T::zero(); k]; k];
                let grid_ref = match &kernel {
                    Kernel::Boundary { grid, .. } => grid,
                    Kernel::Symbolic => unreachable!(),
                };
                for c in 0..k {
                    let disk = group.symbol_disk(c);
                    for (i, xi) in grid_ref.reference_nodes().iter().enumerate() {
                        let idx = c * n + i;
                        let y = disk.center + Cx::new(disk.radius * *xi, T::zero());
                        let mass = rho[idx] * spectral.h[idx].re * sign;
                        stationary[c] = stationary[c] + mass;
                        let probs = branch_probabilities(shift, &kernel, c, y);
                        for (a, p) in probs.iter().enumerate() {
                            transition[c][a] = transition[c][a] + mass * *p;
                        }
                    }
                }
                for c in 0..k {
                    let row: T = transition[c].iter().fold(T::zero(), |a, b| a + *b);
                    for x in transition[c].iter_mut() {
                        *x = *x / row;
                    }
                }
                Ok(Self { stationary: normalized(stationary), transition, kernel })
            }
        }
    }

    /// Largest `|πP − π|` entry.
    pub fn stationarity_defect(&self) -> T {
        let k = self.stationary.len();
        (0..k)
            .map(|j| {
                let s = (0..k).fold(T::zero(), |acc, i| acc + self.stationary[i] * self.transition[i][j]);
                (s - self.stationary[j]).abs()
            })
            .fold(T::zero(), T::max)
    }

    pub fn is_boundary_chain(&self) -> bool {
        matches!(self.kernel, Kernel::Boundary { .. })
    }

    /// Per-trajectory RNG: ChaCha stream `index` of key `master_seed`.
    pub fn rng(master_seed: u64, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(index);
        rng
    }

    /// One trajectory of `n` steps.
    pub fn sample_cocycle(&self, shift: &MarkovShift<T>, n: usize, master_seed: u64, index: u64) -> CocycleSample<T> {
        let mut last = CocycleSample { n: 0, tau: T::zero(), f: vec![0; shift.homology_dim()] };
        self.walk(shift, n, master_seed, index, |row| {
            last.n = row.step;
            last.tau = row.tau_cum;
            last.f.clone_from(&row.f_cum);
        });
        last
    }

    /// Full trajectory, one row per step (row 0 is the starting symbol).
    pub fn trajectory(&self, shift: &MarkovShift<T>, n: usize, master_seed: u64, index: u64) -> Vec<TrajectoryRow<T>> {
        let mut rows = Vec::with_capacity(n + 1);
        self.walk(shift, n, master_seed, index, |row| rows.push(row.clone()));
        rows
    }

    fn walk<F: FnMut(&TrajectoryRow<T>)>(
        &self,
        shift: &MarkovShift<T>,
        n: usize,
        master_seed: u64,
        index: u64,
        mut visit: F,
    ) {
        let mut rng = Self::rng(master_seed, index);
        let mut row = TrajectoryRow {
            step: 0,
            symbol: draw(&mut rng, &self.stationary),
            tau_cum: T::zero(),
            f_cum: vec![0; shift.homology_dim()],
        };
        match &self.kernel {
            Kernel::Symbolic => {
                visit(&row);
                for step in 1..=n {
                    let a = row.symbol;
                    let b = draw(&mut rng, &self.transition[a]);
                    row.tau_cum = row.tau_cum + shift.roof_table(a, b).expect("toy roof");
                    add(&mut row.f_cum, shift.cocycle(a, b));
                    row.step = step;
                    row.symbol = b;
                    visit(&row);
                }
            }
            Kernel::Boundary { .. } => {
                let group = shift.group().expect("coding shift has a group");
                let mut c = row.symbol;
                let mut y = group.symbol_disk(c).center;
                for _ in 0..BURN_IN {
                    let a = draw(&mut rng, &branch_probabilities(shift, &self.kernel, c, y));
                    y = group.symbol_map(a).apply_boundary(y).expect("branch is regular on its domain");
                    c = a;
                }
                row.symbol = c;
                visit(&row);
                for step in 1..=n {
                    let a = draw(&mut rng, &branch_probabilities(shift, &self.kernel, c, y));
                    let (tau, _) = shift.branch_roof(a, y).expect("branch is regular on its domain");
                    row.tau_cum = row.tau_cum + tau;
                    add(&mut row.f_cum, shift.cocycle(a, c));
                    y = group.symbol_map(a).apply_boundary(y).expect("branch is regular on its domain");
                    c = a;
                    row.step = step;
                    row.symbol = a;
                    visit(&row);
                }
            }
        }
    }
}

/// Writes `step,symbol,tau_cum,f_0..f_{d-1}`.
pub fn write_trajectory_csv<T: Real, W: Write>(rows: &[TrajectoryRow<T>], mut out: W) -> std::io::Result<()> {
    let d = rows.first().map_or(0, |r| r.f_cum.len());
    let mut header = String::from("step,symbol,tau_cum");
    for i in 0..d {
        header.push_str(&format!(",f_{i}"));
    }
    writeln!(out, "{header}")?;
    for r in rows {
        write!(out, "{},{},{:.12e}", r.step, r.symbol, r.tau_cum.to_f64_lossy())?;
        for x in &r.f_cum {
            write!(out, ",{x}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

fn branch_probabilities<T: Real>(shift: &MarkovShift<T>, kernel: &Kernel<T>, c: usize, y: Cx<T>) -> Vec<T> {
    let Kernel::Boundary { delta, grid, h } = kernel else { unreachable!("symbolic chains have no branches") };
    let group = shift.group().expect("coding shift has a group");
    let n = grid.len();
    let k = shift.symbol_count();
    let mut w = vec![T::zero(); k];
    for (a, wa) in w.iter_mut().enumerate() {
        if a == inverse_symbol(c) {
            continue;
        }
        let m = group.symbol_map(a);
        let ay = m.apply_boundary(y).expect("branch is regular on its domain");
        let disk = group.symbol_disk(a);
        let t = (ay.re - disk.center.re) / disk.radius;
        let ha = grid.evaluate(&h[a * n..(a + 1) * n], t).max(T::zero());
        *wa = m.boundary_derivative(y).expect("branch is regular on its domain").powf(*delta) * ha;
    }
    normalized(w)
}

fn normalized<T: Real>(v: Vec<T>) -> Vec<T> {
    let s = v.iter().fold(T::zero(), |a, b| a + *b);
    v.into_iter().map(|x| x / s).collect()
}

fn draw<T: Real, R: Rng>(rng: &mut R, probs: &[T]) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, p) in probs.iter().enumerate() {
        let p = p.to_f64_lossy();
        if p > 0.0 {
            acc += p;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

fn add(acc: &mut [i64], v: &[i64]) {
    for (a, b) in acc.iter_mut().zip(v) {
        *a += b;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::transfer::{critical_exponent, leading_eigenvalue, OperatorSpec};

    fn critical_spectral(spec: &OperatorSpec<f64>) -> SpectralResult<f64> {
        let delta = critical_exponent(spec).unwrap();
        leading_eigenvalue(spec, Cx::new(delta, 0.0), &vec![0.0; spec.shift().homology_dim()], 0).unwrap()
    }

    #[test]
    fn coding_of_two_generator_group() {
        let s = MarkovShift::from_schottky(&fixtures::fuchsian_pair()).unwrap();
        assert_eq!(s.symbol_count(), 4);
        let zeros: Vec<(usize, usize)> =
            (0..4).flat_map(|a| (0..4).map(move |b| (a, b))).filter(|&(a, b)| !s.allowed(a, b)).collect();
        assert_eq!(zeros, vec![(0, 1), (1, 0), (2, 3), (3, 2)]);
        assert_eq!(s.aperiodicity_power(), 2);
        assert_eq!(s.cocycle(0, 2), &[1]);
        assert_eq!(s.cocycle(1, 3), &[-1]);
        assert!(s.min_roof() > 0.0);
    }

    #[test]
    fn aperiodicity_is_checked() {
        let cycle = vec![vec![false, true], vec![true, false]];
        assert_eq!(aperiodicity_certificate(&cycle), None);
        let err = MarkovShift::<f64>::toy(cycle, vec![vec![1.0; 2]; 2], vec![vec![vec![]; 2]; 2], None).unwrap_err();
        assert_eq!(err, ShiftError::NotAperiodic);
        let golden = vec![vec![true, true], vec![true, false]];
        assert_eq!(aperiodicity_certificate(&golden), Some(2));
    }

    #[test]
    fn nonpositive_roof_is_rejected() {
        let err = MarkovShift::<f64>::toy(
            vec![vec![true; 2]; 2],
            vec![vec![1.0, 0.0], vec![1.0, 1.0]],
            vec![vec![vec![]; 2]; 2],
            None,
        )
        .unwrap_err();
        assert_eq!(err, ShiftError::NonPositiveRoof);
    }

    #[test]
    fn cycle_sums_reproduce_translation_length() {
        for g in [fixtures::fuchsian_pair(), fixtures::kleinian_pair(1)] {
            let s = MarkovShift::from_schottky(&g).unwrap();
            g.primitive_classes(7.0, 1_000_000, |c| {
                let w = Word::new(c.cyclic_word.to_vec()).unwrap();
                let (tau, theta, f) = s.cycle_sums(&w).unwrap();
                assert!((tau - c.length).abs() < 1e-9 * c.length.max(1.0), "{w}: {tau} vs {}", c.length);
                let dtheta = (theta - c.holonomy).rem_euclid(std::f64::consts::TAU);
                assert!(!(1e-8..=std::f64::consts::TAU - 1e-8).contains(&dtheta));
                assert_eq!(f, c.homology);
            })
            .unwrap();
        }
    }

    #[test]
    fn cocycle_is_additive() {
        let s = MarkovShift::from_schottky(&fixtures::fuchsian_triple()).unwrap();
        let p = [0, 2, 4, 4, 3, 1, 5];
        let total = s.path_cocycle(&p).unwrap();
        let split = s.path_cocycle(&p[..4]).unwrap();
        let rest = s.path_cocycle(&p[3..]).unwrap();
        let sum: Vec<i64> = split.iter().zip(&rest).map(|(a, b)| a + b).collect();
        assert_eq!(total, sum);
        assert_eq!(s.path_cocycle(&[0, 1]), None);
    }

    #[test]
    fn toy_json_round_trip() {
        let f = fixtures::toy_two_shift_file();
        let text = serde_json::to_string(&f).unwrap();
        let back: ToyShiftFile = serde_json::from_str(&text).unwrap();
        let s: MarkovShift<f64> = back.build().unwrap();
        assert_eq!(s.fingerprint_bytes(), fixtures::toy_two_shift().fingerprint_bytes());
    }

    #[test]
    fn toy_parry_chains_are_uniform() {
        for k in [2usize, 3] {
            let f: Vec<Vec<i64>> = (0..k).map(|_| vec![]).collect();
            let shift = MarkovShift::toy_full_shift(k, 1.0, &f).unwrap();
            let spec = OperatorSpec::new(shift.clone(), Discretization::ExactMatrix).unwrap();
            let chain = ParryChain::new(&shift, &critical_spectral(&spec)).unwrap();
            for row in &chain.transition {
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                for p in row {
                    assert!((p - 1.0 / k as f64).abs() < 1e-12);
                }
            }
            assert!(chain.stationarity_defect() < 1e-10);
        }
    }

    #[test]
    fn nonuniform_toy_chain_is_stationary() {
        let shift = MarkovShift::toy(
            vec![vec![true, true, false], vec![true, false, true], vec![true, true, true]],
            vec![vec![1.0, 2.0, 1.0], vec![0.5, 1.0, 1.5], vec![1.0, 0.7, 2.0]],
            vec![vec![vec![1], vec![0], vec![0]], vec![vec![-1], vec![0], vec![1]], vec![vec![0], vec![0], vec![-1]]],
            None,
        )
        .unwrap();
        let spec = OperatorSpec::new(shift.clone(), Discretization::ExactMatrix).unwrap();
        let chain = ParryChain::new(&shift, &critical_spectral(&spec)).unwrap();
        for row in &chain.transition {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert!(chain.stationarity_defect() < 1e-10);
    }

    #[test]
    fn chain_requires_critical_exponent() {
        let shift = fixtures::toy_two_shift();
        let spec = OperatorSpec::new(shift.clone(), Discretization::ExactMatrix).unwrap();
        let off = leading_eigenvalue(&spec, Cx::new(0.5, 0.0), &[0.0], 0).unwrap();
        assert!(matches!(ParryChain::new(&shift, &off), Err(ShiftError::NotAtCriticalExponent(_))));
    }

    #[test]
    fn coding_chain_respects_reflection_symmetry() {
        let g = fixtures::fuchsian_pair();
        let shift = MarkovShift::from_schottky(&g).unwrap();
        let spec = OperatorSpec::new(shift.clone(), Discretization::Collocation { nodes_per_disk: 32 }).unwrap();
        let chain = ParryChain::new(&shift, &critical_spectral(&spec)).unwrap();
        for c in 0..4 {
            assert!((chain.stationary[c] - chain.stationary[c ^ 1]).abs() < 1e-6);
            for a in 0..4 {
                assert!((chain.transition[c][a] - chain.transition[c ^ 1][a ^ 1]).abs() < 1e-6);
            }
            assert!((chain.transition[c].iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert_eq!(chain.transition[c][c ^ 1], 0.0);
        }
        assert!(chain.stationarity_defect() < 1e-8);
    }

    #[test]
    fn samples_basic_properties() {
        let shift = fixtures::toy_two_shift();
        let spec = OperatorSpec::new(shift.clone(), Discretization::ExactMatrix).unwrap();
        let chain = ParryChain::new(&shift, &critical_spectral(&spec)).unwrap();
        let zero = chain.sample_cocycle(&shift, 0, 7, 0);
        assert_eq!(zero, CocycleSample { n: 0, tau: 0.0, f: vec![0] });
        for seed in 0..5 {
            let s = chain.sample_cocycle(&shift, 100, seed, 3);
            assert_eq!(s.tau, 100.0);
            assert_eq!(s, chain.sample_cocycle(&shift, 100, seed, 3));
        }
        assert_ne!(chain.sample_cocycle(&shift, 100, 1, 0), chain.sample_cocycle(&shift, 100, 1, 1));
    }

    #[test]
    fn coding_samples_have_zero_drift() {
        let g = fixtures::fuchsian_pair();
        let shift = MarkovShift::from_schottky(&g).unwrap();
        let spec = OperatorSpec::new(shift.clone(), Discretization::Collocation { nodes_per_disk: 32 }).unwrap();
        let chain = ParryChain::new(&shift, &critical_spectral(&spec)).unwrap();
        let n = 50;
        let m = 10_000;
        let xs: Vec<f64> = (0..m)
            .map(|i| {
                let s = chain.sample_cocycle(&shift, n, 42, i);
                assert!(s.tau >= n as f64 * shift.min_roof());
                s.f[0] as f64 / n as f64
            })
            .collect();
        let mean = xs.iter().sum::<f64>() / m as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
        assert!(mean.abs() < 3.0 * (var / m as f64).sqrt(), "mean {mean}");
    }

    #[test]
    fn trajectory_csv_layout() {
        let shift = fixtures::toy_two_shift();
        let spec = OperatorSpec::new(shift.clone(), Discretization::ExactMatrix).unwrap();
        let chain = ParryChain::new(&shift, &critical_spectral(&spec)).unwrap();
        let rows = chain.trajectory(&shift, 3, 1, 0);
        let mut buf = Vec::new();
        write_trajectory_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "step,symbol,tau_cum,f_0");
        assert_eq!(lines.len(), 5);
        assert!(lines[4].starts_with("3,"));
    }
}
