//! Schottky groups with a `ℤ^d` homology cocycle: validation, reduced words,
//! orbit enumeration and primitive conjugacy classes.
//!
//! Symbols are indexed `0..2g` with `2i ↦ gᵢ` and `2i+1 ↦ gᵢ⁻¹`; this is also
//! the total order `g₁ < g₁⁻¹ < g₂ < …` used for canonical rotations. The
//! disk attached to a symbol is the one its letter maps the outside into, so
//! a reduced word beginning with symbol `s` moves the base point into the
//! half-space over disk `s`.

use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hyperbolic::{Disk, HPoint, Model, Moebius, MoebiusRepr};
use crate::scalar::{cx, Cx, Real};

/// A generator `gᵢ` (positive) or its inverse (negative), 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Letter(pub i32);

impl Letter {
    pub fn from_symbol(s: usize) -> Self {
        let i = (s / 2) as i32 + 1;
        if s.is_multiple_of(2) {
            Letter(i)
        } else {
            Letter(-i)
        }
    }

    pub fn symbol(self) -> usize {
        let i = (self.0.unsigned_abs() - 1) as usize;
        2 * i + usize::from(self.0 < 0)
    }

    pub fn inverse(self) -> Self {
        Letter(-self.0)
    }

    pub fn generator(self) -> usize {
        (self.0.unsigned_abs() - 1) as usize
    }

    pub fn exponent(self) -> i64 {
        self.0.signum() as i64
    }
}

#[inline]
pub fn inverse_symbol(s: usize) -> usize {
    s ^ 1
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WordError {
    #[error("letter {0} is out of range")]
    BadLetter(i32),
    #[error("word is not reduced at position {0}")]
    NotReduced(usize),
}

/// A reduced word in the free generators.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Word {
    letters: Vec<Letter>,
}

impl Word {
    pub fn empty() -> Self {
        Self { letters: Vec::new() }
    }

    pub fn new(letters: Vec<Letter>) -> Result<Self, WordError> {
        if let Some(l) = letters.iter().find(|l| l.0 == 0) {
            return Err(WordError::BadLetter(l.0));
        }
        if let Some(i) = letters.windows(2).position(|w| w[1] == w[0].inverse()) {
            return Err(WordError::NotReduced(i + 1));
        }
        Ok(Self { letters })
    }

    pub fn from_ints(xs: &[i32]) -> Result<Self, WordError> {
        Self::new(xs.iter().map(|&x| Letter(x)).collect())
    }

    pub fn from_symbols(xs: &[usize]) -> Result<Self, WordError> {
        Self::new(xs.iter().map(|&s| Letter::from_symbol(s)).collect())
    }

    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn inverse(&self) -> Self {
        Self { letters: self.letters.iter().rev().map(|l| l.inverse()).collect() }
    }

    /// Concatenation, defined only when no cancellation occurs.
    pub fn concat(&self, other: &Self) -> Result<Self, WordError> {
        let mut v = self.letters.clone();
        v.extend_from_slice(&other.letters);
        Self::new(v)
    }

    pub fn is_cyclically_reduced(&self) -> bool {
        match (self.letters.first(), self.letters.last()) {
            (Some(a), Some(b)) => self.letters.len() == 1 || *a != b.inverse(),
            _ => true,
        }
    }

    /// Least rotation under the symbol order.
    pub fn canonical_rotation(&self) -> Self {
        let s: Vec<usize> = self.letters.iter().map(|l| l.symbol()).collect();
        let n = s.len();
        let best = (0..n.max(1))
            .min_by(|&i, &j| (0..n).map(|k| s[(i + k) % n]).cmp((0..n).map(|k| s[(j + k) % n])))
            .unwrap_or(0);
        let letters = (0..n).map(|k| self.letters[(best + k) % n]).collect();
        Self { letters }
    }

    /// Whether the word is a proper power `u^k`, `k ≥ 2`.
    pub fn is_proper_power(&self) -> bool {
        let n = self.letters.len();
        (1..n).any(|p| n.is_multiple_of(p) && (p..n).all(|i| self.letters[i] == self.letters[i - p]))
    }

    pub fn to_symbols(&self) -> Vec<usize> {
        self.letters.iter().map(|l| l.symbol()).collect()
    }
}

impl std::fmt::Display for Word {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.letters.is_empty() {
            return write!(f, "e");
        }
        for (k, l) in self.letters.iter().enumerate() {
            if k > 0 {
                write!(f, " ")?;
            }
            write!(f, "{}", l.0)?;
        }
        Ok(())
    }
}

/// One problem found while validating group data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ValidationIssue {
    /// Symbol disks `i` and `j` intersect.
    DisksOverlap(usize, usize),
    /// Generator `i` does not carry the outside of its source disk onto its target disk.
    PairingBroken(usize),
    RankDeficientHomology,
    /// The base point lies over disk `s`.
    BasePointCovered(usize),
    /// Plane-model data with a non-real disk center or entry.
    NotFuchsian(usize),
    Malformed(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid Schottky data: {issues:?}")]
pub struct ValidationError {
    pub issues: Vec<ValidationIssue>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EnumerationError {
    #[error("enumeration budget of {0} records exceeded")]
    BudgetExceeded(u64),
}

/// Source and target disks of one generator: `g` maps the outside of
/// `minus` onto the inside of `plus`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiskPair<T> {
    pub minus: Disk<T>,
    pub plus: Disk<T>,
}

/// `d × g` integer matrix sending exponent sums to `ℤ^d`.
pub type HomologyMatrix = Vec<Vec<i64>>;

/// A validated Schottky group with its homology projection.
#[derive(Debug, Clone)]
pub struct Schottky<T> {
    model: Model,
    generators: Vec<Moebius<T>>,
    disks: Vec<DiskPair<T>>,
    homology: HomologyMatrix,
    /// Letter matrix per symbol.
    symbol_maps: Vec<Moebius<T>>,
    /// Disk per symbol (the target disk of that letter).
    symbol_disks: Vec<Disk<T>>,
    /// Homology vector per symbol.
    symbol_homology: Vec<Vec<i64>>,
    /// Per first symbol `b`: `ℓ(w) ≥ d(o, w·o) − margin[b]` for cyclically reduced `w` starting with `b`.
    length_margin: Vec<T>,
    /// `min −log|a′|` over letters `a` acting on disks `D_c`, `c ≠ a⁻¹`.
    min_contraction: T,
}

/// Rank over ℚ by fraction-free elimination.
pub fn integer_rank(m: &[Vec<i64>]) -> usize {
    let mut a: Vec<Vec<i128>> = m.iter().map(|r| r.iter().map(|&x| x as i128).collect()).collect();
    let rows = a.len();
    let cols = a.first().map_or(0, |r| r.len());
    let mut rank = 0;
    let mut prev = 1i128;
    for col in 0..cols {
        let Some(p) = (rank..rows).find(|&r| a[r][col] != 0) else { continue };
        a.swap(rank, p);
        for r in rank + 1..rows {
            for c in col + 1..cols {
                a[r][c] = (a[rank][col] * a[r][c] - a[r][col] * a[rank][c]) / prev;
            }
            a[r][col] = 0;
        }
        prev = a[rank][col];
        rank += 1;
        if rank == rows {
            break;
        }
    }
    rank
}

impl<T: Real> Schottky<T> {
    /// Validates the data and precomputes coding and pruning tables.
    pub fn new(
        model: Model,
        generators: Vec<Moebius<T>>,
        disks: Vec<DiskPair<T>>,
        homology: HomologyMatrix,
    ) -> Result<Self, ValidationError> {
        let mut issues = Vec::new();
        let g = generators.len();
        if g < 2 {
            issues.push(ValidationIssue::Malformed("need at least two generators".into()));
        }
        if disks.len() != g {
            issues.push(ValidationIssue::Malformed(format!("{} generators but {} disk pairs", g, disks.len())));
        }
        if homology.len() > g {
            issues.push(ValidationIssue::Malformed("homology dimension exceeds rank".into()));
        }
        if homology.iter().any(|r| r.len() != g) {
            issues.push(ValidationIssue::Malformed("homology matrix must have one column per generator".into()));
        }
        if generators.iter().any(|m| m.model != model) {
            issues.push(ValidationIssue::Malformed("generator model differs from group model".into()));
        }
        if !issues.is_empty() {
            return Err(ValidationError { issues });
        }

        let mut symbol_maps = Vec::with_capacity(2 * g);
        let mut symbol_disks = Vec::with_capacity(2 * g);
        let mut symbol_homology = Vec::with_capacity(2 * g);
        for (i, (m, dp)) in generators.iter().zip(disks.iter()).enumerate() {
            symbol_maps.push(*m);
            symbol_maps.push(m.inverse());
            symbol_disks.push(dp.plus);
            symbol_disks.push(dp.minus);
            let col: Vec<i64> = homology.iter().map(|r| r[i]).collect();
            symbol_homology.push(col.clone());
            symbol_homology.push(col.iter().map(|x| -x).collect());
        }

        let tol = T::lit(1e-8);
        for (s, d) in symbol_disks.iter().enumerate() {
            if model == Model::UpperHalfPlane2D && d.center.im.abs() > T::lit(1e-12) {
                issues.push(ValidationIssue::NotFuchsian(s));
            }
            if !(d.radius > T::zero()) {
                issues.push(ValidationIssue::Malformed(format!("disk {s} has non-positive radius")));
            }
            if HPoint::origin().distance_to_halfspace(d) <= T::zero() {
                issues.push(ValidationIssue::BasePointCovered(s));
            }
        }
        for i in 0..symbol_disks.len() {
            for j in i + 1..symbol_disks.len() {
                if symbol_disks[i].gap(&symbol_disks[j]) <= T::zero() {
                    issues.push(ValidationIssue::DisksOverlap(i, j));
                }
            }
        }
        for (i, (m, dp)) in generators.iter().zip(disks.iter()).enumerate() {
            if !pairing_holds(m, dp, tol) {
                issues.push(ValidationIssue::PairingBroken(i));
            }
        }
        if integer_rank(&homology) < homology.len() {
            issues.push(ValidationIssue::RankDeficientHomology);
        }
        if !issues.is_empty() {
            return Err(ValidationError { issues });
        }

        let length_margin = (0..2 * g)
            .map(|b| {
                let db = symbol_disks[b];
                let reach = db.center.norm() + db.radius;
                let k_b = T::one() + reach * reach;
                (0..2 * g)
                    .filter(|&c| c != b)
                    .map(|c| {
                        let dc = symbol_disks[c];
                        let r_c = dc.center.norm() + dc.radius;
                        let gap = dc.gap(&db);
                        (k_b * (r_c * r_c + dc.radius * dc.radius + T::one()) / (gap * gap)).ln()
                    })
                    .fold(T::neg_infinity(), T::max)
            })
            .collect();

        let mut min_contraction = T::infinity();
        for (a, m) in symbol_maps.iter().enumerate() {
            for (c, dc) in symbol_disks.iter().enumerate() {
                if c != inverse_symbol(a) {
                    min_contraction = min_contraction.min(min_log_stretch(m, dc));
                }
            }
        }

        Ok(Self {
            model,
            generators,
            disks,
            homology,
            symbol_maps,
            symbol_disks,
            symbol_homology,
            length_margin,
            min_contraction,
        })
    }

    /// Re-runs every check on the stored data.
    pub fn validate(&self) -> Result<(), ValidationError> {
        Self::new(self.model, self.generators.clone(), self.disks.clone(), self.homology.clone()).map(|_| ())
    }

    /// Synthesizes generators from disk pairs: `x ↦ c⁺ − r⁺r⁻e^{iψ}/(x − c⁻)`,
    /// with the sign fixed so the trace has nonnegative real part.
    pub fn pairing_map(dp: &DiskPair<T>, twist: T, model: Model) -> Result<Moebius<T>, ValidationError> {
        let (cm, cp) = (dp.minus.center, dp.plus.center);
        let k = Cx::from_polar(dp.minus.radius * dp.plus.radius, twist);
        let one = cx(T::one(), T::zero());
        let m = Moebius::new(cp, -(cp * cm) - k, one, -cm, model)
            .map_err(|e| ValidationError { issues: vec![ValidationIssue::Malformed(e.to_string())] })?;
        Ok(if m.trace().re < T::zero() { m.negated() } else { m })
    }

    pub fn model(&self) -> Model {
        self.model
    }

    pub fn rank(&self) -> usize {
        self.generators.len()
    }

    pub fn symbol_count(&self) -> usize {
        2 * self.generators.len()
    }

    pub fn homology_dim(&self) -> usize {
        self.homology.len()
    }

    pub fn generators(&self) -> &[Moebius<T>] {
        &self.generators
    }

    pub fn disk_pairs(&self) -> &[DiskPair<T>] {
        &self.disks
    }

    pub fn homology_matrix(&self) -> &HomologyMatrix {
        &self.homology
    }

    pub fn symbol_map(&self, s: usize) -> &Moebius<T> {
        &self.symbol_maps[s]
    }

    pub fn symbol_disk(&self, s: usize) -> &Disk<T> {
        &self.symbol_disks[s]
    }

    pub fn symbol_homology(&self, s: usize) -> &[i64] {
        &self.symbol_homology[s]
    }

    pub fn length_margin(&self, first_symbol: usize) -> T {
        self.length_margin[first_symbol]
    }

    /// Lower bound of `−log|a′(y)|` over letters `a` and `y ∈ D_c`, `c ≠ a⁻¹`.
    pub fn min_contraction(&self) -> T {
        self.min_contraction
    }

    /// Same group with a different homology projection.
    pub fn with_homology(&self, homology: HomologyMatrix) -> Result<Self, ValidationError> {
        Self::new(self.model, self.generators.clone(), self.disks.clone(), homology)
    }

    /// Smallest positive gap between two symbol disks.
    pub fn min_gap(&self) -> T {
        let n = self.symbol_disks.len();
        let mut best = T::infinity();
        for i in 0..n {
            for j in i + 1..n {
                best = best.min(self.symbol_disks[i].gap(&self.symbol_disks[j]));
            }
        }
        best
    }

    pub fn evaluate(&self, w: &Word) -> Moebius<T> {
        w.letters().iter().fold(Moebius::identity(self.model), |acc, l| acc.compose(&self.symbol_maps[l.symbol()]))
    }

    pub fn exponent_sum(&self, w: &Word) -> Vec<i64> {
        let mut v = vec![0i64; self.rank()];
        for l in w.letters() {
            v[l.generator()] += l.exponent();
        }
        v
    }

    /// Image of the word in `ℤ^d` (exponent sums pushed through the homology matrix).
    pub fn abelianize(&self, w: &Word) -> Vec<i64> {
        let e = self.exponent_sum(w);
        self.homology.iter().map(|row| row.iter().zip(&e).map(|(a, b)| a * b).sum()).collect()
    }

    pub fn kernel_membership(&self, w: &Word) -> bool {
        self.abelianize(w).iter().all(|&x| x == 0)
    }

    /// Emits every reduced word `w` with `d(o, w·o) ≤ t_max` exactly once and
    /// returns the count. Shards by first letter and merges in symbol order.
    pub fn enumerate_orbit<F>(&self, t_max: T, budget: u64, mut emit: F) -> Result<u64, EnumerationError>
    where
        F: FnMut(&OrbitRecord<'_, T>),
    {
        let counter = AtomicU64::new(0);
        let mut walker = OrbitWalker::new(self, t_max, budget, &counter);
        walker.root(&mut emit)?;
        for s in 0..self.symbol_count() {
            walker.shard(s, &mut emit)?;
        }
        Ok(counter.load(Ordering::Relaxed))
    }

    /// Parallel fold over the orbit enumeration; one accumulator per shard.
    /// The identity is folded into the first shard.
    pub fn fold_orbit<A, I, F>(&self, t_max: T, budget: u64, init: I, fold: F) -> Result<Vec<A>, EnumerationError>
    where
        A: Send,
        I: Fn() -> A + Sync,
        F: Fn(&mut A, &OrbitRecord<'_, T>) + Sync,
    {
        let counter = AtomicU64::new(0);
        (0..self.symbol_count())
            .into_par_iter()
            .map(|s| {
                let mut acc = init();
                let mut walker = OrbitWalker::new(self, t_max, budget, &counter);
                let mut sink = |r: &OrbitRecord<'_, T>| fold(&mut acc, r);
                if s == 0 {
                    walker.root(&mut sink)?;
                }
                walker.shard(s, &mut sink)?;
                Ok(acc)
            })
            .collect()
    }

    /// Brute-force reference: all reduced words of length ≤ `max_len`, no
    /// geometric pruning, filtered by displacement.
    pub fn enumerate_orbit_exhaustive<F>(&self, t_max: T, max_len: usize, mut emit: F) -> u64
    where
        F: FnMut(&OrbitRecord<'_, T>),
    {
        let mut count = 0;
        let mut word = Vec::new();
        let mut hom = vec![0i64; self.homology_dim()];
        self.exhaustive_rec(Moebius::identity(self.model), t_max, max_len, &mut word, &mut hom, &mut count, &mut emit);
        count
    }

    #[allow(clippy::too_many_arguments)]
    fn exhaustive_rec<F: FnMut(&OrbitRecord<'_, T>)>(
        &self,
        g: Moebius<T>,
        t_max: T,
        max_len: usize,
        word: &mut Vec<Letter>,
        hom: &mut Vec<i64>,
        count: &mut u64,
        emit: &mut F,
    ) {
        let d = g.displacement();
        if d <= t_max {
            *count += 1;
            emit(&OrbitRecord { word, element: &g, displacement: d, homology: hom });
        }
        if word.len() == max_len {
            return;
        }
        for s in 0..self.symbol_count() {
            if let Some(last) = word.last() {
                if s == inverse_symbol(last.symbol()) {
                    continue;
                }
            }
            word.push(Letter::from_symbol(s));
            add_assign(hom, &self.symbol_homology[s]);
            self.exhaustive_rec(g.compose(&self.symbol_maps[s]), t_max, max_len, word, hom, count, emit);
            sub_assign(hom, &self.symbol_homology[s]);
            word.pop();
        }
    }

    /// Emits each oriented primitive conjugacy class with `ℓ ≤ l_max` once,
    /// represented by its least rotation.
    pub fn primitive_classes<F>(&self, l_max: T, budget: u64, mut emit: F) -> Result<u64, EnumerationError>
    where
        F: FnMut(&GeodesicRecord<'_, T>),
    {
        let counter = AtomicU64::new(0);
        for s in 0..self.symbol_count() {
            ClassWalker::new(self, l_max, budget, &counter, s).run(&mut emit)?;
        }
        Ok(counter.load(Ordering::Relaxed))
    }

    /// Parallel fold over primitive classes, sharded by first symbol.
    pub fn fold_classes<A, I, F>(&self, l_max: T, budget: u64, init: I, fold: F) -> Result<Vec<A>, EnumerationError>
    where
        A: Send,
        I: Fn() -> A + Sync,
        F: Fn(&mut A, &GeodesicRecord<'_, T>) + Sync,
    {
        let counter = AtomicU64::new(0);
        (0..self.symbol_count())
            .into_par_iter()
            .map(|s| {
                let mut acc = init();
                let mut sink = |r: &GeodesicRecord<'_, T>| fold(&mut acc, r);
                ClassWalker::new(self, l_max, budget, &counter, s).run(&mut sink)?;
                Ok(acc)
            })
            .collect()
    }
}

fn pairing_holds<T: Real>(m: &Moebius<T>, dp: &DiskPair<T>, tol: T) -> bool {
    let scale = T::one().max(dp.plus.radius);
    let on_circle = (0..12).all(|k| {
        let phi = T::TAU() * T::from_count(k) / T::lit(12.0);
        let x = dp.minus.center + Cx::from_polar(dp.minus.radius, phi);
        match m.apply_boundary(x) {
            Some(y) => ((y - dp.plus.center).norm() - dp.plus.radius).abs() <= tol * scale,
            None => false,
        }
    });
    // The outside of the source disk contains ∞; its image must fall inside the target.
    let outside_in = m.image_of_infinity().map(|y| (y - dp.plus.center).norm() < dp.plus.radius).unwrap_or(false);
    on_circle && outside_in
}

/// `min_{y ∈ D} −log|g′(y)|` for unimodular `g` whose pole lies outside `D`;
/// `|g′(y)| = 1/|cy + d|²` peaks at the point of `D` nearest the pole.
pub(crate) fn min_log_stretch<T: Real>(g: &Moebius<T>, disk: &Disk<T>) -> T {
    let cn = g.c.norm();
    if cn == T::zero() {
        return T::lit(2.0) * g.d.norm().ln();
    }
    let pole = -g.d / g.c;
    let dist = (pole - disk.center).norm() - disk.radius;
    if dist <= T::zero() {
        return T::neg_infinity();
    }
    T::lit(2.0) * (cn * dist).ln()
}

fn add_assign(acc: &mut [i64], v: &[i64]) {
    for (a, b) in acc.iter_mut().zip(v) {
        *a += b;
    }
}

fn sub_assign(acc: &mut [i64], v: &[i64]) {
    for (a, b) in acc.iter_mut().zip(v) {
        *a -= b;
    }
}

/// One orbit point `w·o`, borrowed from the enumerator's stack.
#[derive(Debug, Clone, Copy)]
pub struct OrbitRecord<'a, T> {
    pub word: &'a [Letter],
    pub element: &'a Moebius<T>,
    pub displacement: T,
    pub homology: &'a [i64],
}

/// One oriented primitive closed geodesic, represented by its least rotation.
#[derive(Debug, Clone, Copy)]
pub struct GeodesicRecord<'a, T> {
    pub cyclic_word: &'a [Letter],
    pub length: T,
    pub holonomy: T,
    pub homology: &'a [i64],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OwnedGeodesic {
    pub cyclic_word: Word,
    pub length: f64,
    pub holonomy: f64,
    pub homology: Vec<i64>,
}

impl<T: Real> GeodesicRecord<'_, T> {
    pub fn to_owned(&self) -> OwnedGeodesic {
        OwnedGeodesic {
            cyclic_word: Word { letters: self.cyclic_word.to_vec() },
            length: self.length.to_f64_lossy(),
            holonomy: self.holonomy.to_f64_lossy(),
            homology: self.homology.to_vec(),
        }
    }
}

struct OrbitWalker<'g, T> {
    group: &'g Schottky<T>,
    t_max: T,
    budget: u64,
    counter: &'g AtomicU64,
    word: Vec<Letter>,
    hom: Vec<i64>,
}

impl<'g, T: Real> OrbitWalker<'g, T> {
    fn new(group: &'g Schottky<T>, t_max: T, budget: u64, counter: &'g AtomicU64) -> Self {
        Self { group, t_max, budget, counter, word: Vec::new(), hom: vec![0; group.homology_dim()] }
    }

    fn bump(&self) -> Result<(), EnumerationError> {
        if self.counter.fetch_add(1, Ordering::Relaxed) >= self.budget {
            return Err(EnumerationError::BudgetExceeded(self.budget));
        }
        Ok(())
    }

    fn root<F: FnMut(&OrbitRecord<'_, T>)>(&mut self, emit: &mut F) -> Result<(), EnumerationError> {
        if self.t_max >= T::zero() {
            self.bump()?;
            let id = Moebius::identity(self.group.model);
            emit(&OrbitRecord { word: &[], element: &id, displacement: T::zero(), homology: &self.hom });
        }
        Ok(())
    }

    fn shard<F: FnMut(&OrbitRecord<'_, T>)>(&mut self, s: usize, emit: &mut F) -> Result<(), EnumerationError> {
        let id = Moebius::identity(self.group.model);
        self.child(&id, s, emit)
    }

    /// Visits `parent · s` and its subtree unless the subtree provably lies
    /// beyond `t_max`: every reduced `w = p·s·…` has `w·o ∈ p(H_s)`.
    fn child<F: FnMut(&OrbitRecord<'_, T>)>(
        &mut self,
        parent: &Moebius<T>,
        s: usize,
        emit: &mut F,
    ) -> Result<(), EnumerationError> {
        let z = parent.apply_inverse_origin();
        if z.distance_to_halfspace(&self.group.symbol_disks[s]) > self.t_max {
            return Ok(());
        }
        let g = parent.compose(&self.group.symbol_maps[s]);
        self.word.push(Letter::from_symbol(s));
        add_assign(&mut self.hom, &self.group.symbol_homology[s]);
        let d = g.displacement();
        let mut result = Ok(());
        if d <= self.t_max {
            result = self.bump();
            if result.is_ok() {
                emit(&OrbitRecord { word: &self.word, element: &g, displacement: d, homology: &self.hom });
            }
        }
        if result.is_ok() {
            let inv = inverse_symbol(s);
            for next in 0..self.group.symbol_count() {
                if next != inv {
                    result = self.child(&g, next, emit);
                    if result.is_err() {
                        break;
                    }
                }
            }
        }
        sub_assign(&mut self.hom, &self.group.symbol_homology[s]);
        self.word.pop();
        result
    }
}

/// Depth-first generation of reduced Lyndon words (FKM prenecklace rule)
/// with a geometric lower bound on translation length.
struct ClassWalker<'g, T> {
    group: &'g Schottky<T>,
    l_max: T,
    budget: u64,
    counter: &'g AtomicU64,
    first: usize,
    margin: T,
    symbols: Vec<usize>,
    word: Vec<Letter>,
    hom: Vec<i64>,
}

impl<'g, T: Real> ClassWalker<'g, T> {
    fn new(group: &'g Schottky<T>, l_max: T, budget: u64, counter: &'g AtomicU64, first: usize) -> Self {
        Self {
            group,
            l_max,
            budget,
            counter,
            first,
            margin: group.length_margin[first],
            symbols: Vec::new(),
            word: Vec::new(),
            hom: vec![0; group.homology_dim()],
        }
    }

    fn run<F: FnMut(&GeodesicRecord<'_, T>)>(&mut self, emit: &mut F) -> Result<(), EnumerationError> {
        let id = Moebius::identity(self.group.model);
        self.visit(&id, self.first, 1, emit)
    }

    /// Whether no cyclically reduced `w = parent·s·…` has `ℓ(w) ≤ l_max`.
    ///
    /// With `w = p·q` and `x` the attracting fixed point, `ℓ(w) = −log|p′(q·x)|
    /// − log|q′(x)|` and `q·x ∈ D_s`; when every letter contracts the second
    /// term is nonnegative. Otherwise fall back to `ℓ ≥ d(o, w·o) − margin`.
    fn prune(&self, parent: &Moebius<T>, s: usize) -> bool {
        let disk = &self.group.symbol_disks[s];
        if self.group.min_contraction > T::zero() {
            min_log_stretch(parent, disk) > self.l_max
        } else {
            parent.apply_inverse_origin().distance_to_halfspace(disk) - self.margin > self.l_max
        }
    }

    /// `lyn` is the FKM period of the prefix after appending `s`.
    fn visit<F: FnMut(&GeodesicRecord<'_, T>)>(
        &mut self,
        parent: &Moebius<T>,
        s: usize,
        lyn: usize,
        emit: &mut F,
    ) -> Result<(), EnumerationError> {
        if self.prune(parent, s) {
            return Ok(());
        }
        let g = parent.compose(&self.group.symbol_maps[s]);
        self.symbols.push(s);
        self.word.push(Letter::from_symbol(s));
        add_assign(&mut self.hom, &self.group.symbol_homology[s]);
        let n = self.symbols.len();
        let mut result = Ok(());
        if lyn == n && (n == 1 || s != inverse_symbol(self.first)) {
            if let Ok(inv) = g.geodesic_invariants() {
                if inv.length <= self.l_max {
                    result = if self.counter.fetch_add(1, Ordering::Relaxed) >= self.budget {
                        Err(EnumerationError::BudgetExceeded(self.budget))
                    } else {
                        Ok(())
                    };
                    if result.is_ok() {
                        emit(&GeodesicRecord {
                            cyclic_word: &self.word,
                            length: inv.length,
                            holonomy: inv.holonomy,
                            homology: &self.hom,
                        });
                    }
                }
            }
        }
        if result.is_ok() {
            let floor = self.symbols[n - lyn];
            let inv = inverse_symbol(s);
            for next in floor..self.group.symbol_count() {
                if next == inv {
                    continue;
                }
                let next_lyn = if next == floor { lyn } else { n + 1 };
                result = self.visit(&g, next, next_lyn, emit);
                if result.is_err() {
                    break;
                }
            }
        }
        sub_assign(&mut self.hom, &self.group.symbol_homology[s]);
        self.word.pop();
        self.symbols.pop();
        result
    }
}

/// Disk in the group file: `{"center": [re, im], "radius": r}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiskSpec {
    pub center: [f64; 2],
    pub radius: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeneratorSpec {
    /// Explicit matrix; synthesized from the disks when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<MoebiusRepr>,
    pub minus: DiskSpec,
    pub plus: DiskSpec,
    /// Rotation `ψ` used when synthesizing a space-model generator.
    #[serde(default)]
    pub twist: f64,
}

/// On-disk group definition.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub model: Model,
    pub generators: Vec<GeneratorSpec>,
    pub homology_matrix: HomologyMatrix,
}

impl GroupFile {
    pub fn build<T: Real>(&self) -> Result<Schottky<T>, ValidationError> {
        let disk = |d: &DiskSpec| Disk::new(cx(T::lit(d.center[0]), T::lit(d.center[1])), T::lit(d.radius));
        let mut gens = Vec::new();
        let mut pairs = Vec::new();
        for (i, spec) in self.generators.iter().enumerate() {
            let dp = DiskPair { minus: disk(&spec.minus), plus: disk(&spec.plus) };
            let m = match &spec.matrix {
                Some(repr) => Moebius::try_from(repr.clone()).map_err(|e| ValidationError {
                    issues: vec![ValidationIssue::Malformed(format!("generator {i}: {e}"))],
                })?,
                None => Schottky::pairing_map(&dp, T::lit(spec.twist), self.model)?,
            };
            gens.push(m);
            pairs.push(dp);
        }
        Schottky::new(self.model, gens, pairs, self.homology_matrix.clone())
    }

    pub fn from_group<T: Real>(name: Option<String>, g: &Schottky<T>) -> Self {
        let disk = |d: &Disk<T>| DiskSpec {
            center: [d.center.re.to_f64_lossy(), d.center.im.to_f64_lossy()],
            radius: d.radius.to_f64_lossy(),
        };
        GroupFile {
            name,
            model: g.model,
            generators: g
                .generators
                .iter()
                .zip(&g.disks)
                .map(|(m, dp)| GeneratorSpec {
                    matrix: Some((*m).into()),
                    minus: disk(&dp.minus),
                    plus: disk(&dp.plus),
                    twist: 0.0,
                })
                .collect(),
            homology_matrix: g.homology.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use std::collections::{BTreeMap, HashSet};

    fn spec_disk(c: f64, r: f64) -> DiskSpec {
        DiskSpec { center: [c, 0.0], radius: r }
    }

    fn small_group(radius: f64, homology: HomologyMatrix) -> Result<Schottky<f64>, ValidationError> {
        GroupFile {
            name: None,
            model: Model::UpperHalfPlane2D,
            generators: vec![
                GeneratorSpec {
                    matrix: None,
                    minus: spec_disk(-3.0, radius),
                    plus: spec_disk(3.0, radius),
                    twist: 0.0,
                },
                GeneratorSpec {
                    matrix: None,
                    minus: spec_disk(-9.0, radius),
                    plus: spec_disk(9.0, radius),
                    twist: 0.0,
                },
            ],
            homology_matrix: homology,
        }
        .build()
    }

    #[test]
    fn validate_examples() {
        // Centers ±3, ±9 with radius 1: nearest centers are 6 apart, gaps 4 > 0.
        let g = small_group(1.0, vec![vec![1, 0]]).unwrap();
        assert!(g.validate().is_ok());
        assert!(g.min_gap() > 3.99);

        let err = small_group(5.0, vec![vec![1, 0]]).unwrap_err();
        assert!(err.issues.iter().any(|i| matches!(i, ValidationIssue::DisksOverlap(_, _))));
        let overlaps = err.issues.iter().filter(|i| matches!(i, ValidationIssue::DisksOverlap(_, _))).count();
        assert!(overlaps >= 3, "every overlapping pair is listed: {:?}", err.issues);

        let err = small_group(1.0, vec![vec![0, 0]]).unwrap_err();
        assert_eq!(err.issues, vec![ValidationIssue::RankDeficientHomology]);
    }

    #[test]
    fn broken_pairing_is_reported() {
        let mut f = GroupFile::from_group(None, &small_group(1.0, vec![]).unwrap());
        f.generators[1].matrix = Some(Moebius::<f64>::from_real(2.0, 0.0, 0.0, 0.5).unwrap().into());
        let err = f.build::<f64>().unwrap_err();
        assert_eq!(err.issues, vec![ValidationIssue::PairingBroken(1)]);
    }

    #[test]
    fn integer_rank_cases() {
        assert_eq!(integer_rank(&[vec![1, 2, 3], vec![2, 4, 6]]), 1);
        assert_eq!(integer_rank(&[vec![1, 0, 1], vec![0, 1, 1]]), 2);
        assert_eq!(integer_rank(&[vec![0, 0], vec![0, 0]]), 0);
        assert_eq!(integer_rank(&[]), 0);
    }

    #[test]
    fn words_and_abelianization() {
        let g = small_group(1.0, vec![vec![1, 0], vec![0, 1]]).unwrap();
        assert_eq!(g.abelianize(&Word::empty()), vec![0, 0]);
        let comm = Word::from_ints(&[1, 2, -1, -2]).unwrap();
        assert_eq!(g.abelianize(&comm), vec![0, 0]);
        assert!(g.kernel_membership(&comm));
        assert!(g.kernel_membership(&Word::empty()));
        assert_eq!(g.abelianize(&Word::from_ints(&[1, 2, 1]).unwrap()), vec![2, 1]);
        assert!(!g.kernel_membership(&Word::from_ints(&[1]).unwrap()));
        assert_eq!(Word::from_ints(&[1, -1]).unwrap_err(), WordError::NotReduced(1));
    }

    #[test]
    fn evaluation_is_multiplicative() {
        let g = fixtures::fuchsian_pair();
        let w1 = Word::from_ints(&[1, 2, 2]).unwrap();
        let w2 = Word::from_ints(&[-1, 2]).unwrap();
        let lhs = g.evaluate(&w1.concat(&w2).unwrap());
        let rhs = g.evaluate(&w1).compose(&g.evaluate(&w2));
        assert!(lhs.projectively_eq(&rhs, 1e-10));
    }

    #[test]
    fn generators_are_loxodromic() {
        for g in [fixtures::fuchsian_pair(), fixtures::fuchsian_triple(), fixtures::kleinian_pair(1)] {
            for m in g.generators() {
                assert_eq!(m.classify(), crate::hyperbolic::Classification::HyperbolicOrLoxodromic);
            }
        }
    }

    #[test]
    fn orbit_small_radius() {
        let g = fixtures::fuchsian_pair();
        assert_eq!(g.enumerate_orbit(0.0, 100, |_| {}).unwrap(), 1);
        let min_d = g.generators().iter().map(|m| m.displacement()).fold(f64::INFINITY, f64::min);
        assert_eq!(g.enumerate_orbit(min_d * 0.99, 100, |_| {}).unwrap(), 1);
    }

    fn orbit_set(g: &Schottky<f64>, t: f64) -> HashSet<Vec<Letter>> {
        let mut set = HashSet::new();
        let n = g
            .enumerate_orbit(t, 10_000_000, |r| {
                assert!(set.insert(r.word.to_vec()), "duplicate word");
            })
            .unwrap();
        assert_eq!(n as usize, set.len());
        set
    }

    #[test]
    fn pruned_matches_exhaustive() {
        for g in [fixtures::fuchsian_pair(), fixtures::fuchsian_triple(), fixtures::kleinian_pair(1)] {
            let t = 6.0;
            let pruned = orbit_set(&g, t);
            // Depth large enough that the shortest words of that length are beyond t.
            let mut max_len = 1;
            loop {
                let mut shortest = f64::INFINITY;
                g.enumerate_orbit_exhaustive(f64::INFINITY, max_len, |r| {
                    if r.word.len() == max_len {
                        shortest = shortest.min(r.displacement);
                    }
                });
                if shortest > t + 3.0 {
                    break;
                }
                max_len += 1;
            }
            let mut brute = HashSet::new();
            g.enumerate_orbit_exhaustive(t, max_len, |r| {
                brute.insert(r.word.to_vec());
            });
            assert_eq!(pruned, brute);
        }
    }

    #[test]
    fn homology_counts_are_symmetric() {
        let g = fixtures::fuchsian_triple();
        for t in [3.0, 5.0, 7.0] {
            let mut counts: BTreeMap<Vec<i64>, u64> = BTreeMap::new();
            g.enumerate_orbit(t, 10_000_000, |r| *counts.entry(r.homology.to_vec()).or_default() += 1).unwrap();
            for (xi, n) in &counts {
                let neg: Vec<i64> = xi.iter().map(|x| -x).collect();
                assert_eq!(counts.get(&neg), Some(n));
            }
        }
    }

    #[test]
    fn records_carry_consistent_homology() {
        let g = fixtures::fuchsian_triple();
        g.enumerate_orbit(5.0, 1_000_000, |r| {
            let w = Word::new(r.word.to_vec()).unwrap();
            assert_eq!(g.abelianize(&w), r.homology);
            assert!((g.evaluate(&w).displacement() - r.displacement).abs() < 1e-9);
        })
        .unwrap();
    }

    #[test]
    fn parallel_fold_matches_sequential() {
        let g = fixtures::fuchsian_pair();
        let seq = g.enumerate_orbit(7.0, 10_000_000, |_| {}).unwrap();
        let shards = g.fold_orbit(7.0, 10_000_000, || 0u64, |acc, _| *acc += 1).unwrap();
        assert_eq!(shards.iter().sum::<u64>(), seq);
    }

    #[test]
    fn budget_is_enforced() {
        let g = fixtures::fuchsian_pair();
        assert_eq!(g.enumerate_orbit(8.0, 10, |_| {}).unwrap_err(), EnumerationError::BudgetExceeded(10));
    }

    fn classes(g: &Schottky<f64>, l: f64) -> Vec<OwnedGeodesic> {
        let mut out = Vec::new();
        g.primitive_classes(l, 10_000_000, |r| out.push(r.to_owned())).unwrap();
        out
    }

    #[test]
    fn no_classes_below_shortest_short_word() {
        let g = fixtures::fuchsian_pair();
        let words: [&[i32]; 4] = [&[1], &[2], &[1, 2], &[1, -2]];
        let min_l = words
            .iter()
            .map(|w| g.evaluate(&Word::from_ints(w).unwrap()).geodesic_invariants().unwrap().length)
            .fold(f64::INFINITY, f64::min);
        assert!(classes(&g, min_l * 0.99).is_empty());
        assert!(!classes(&g, min_l * 1.01).is_empty());
    }

    #[test]
    fn classes_are_canonical_primitive_and_unique() {
        let g = fixtures::fuchsian_pair();
        let list = classes(&g, 9.0);
        let mut seen = HashSet::new();
        for c in &list {
            let w = &c.cyclic_word;
            assert!(w.is_cyclically_reduced());
            assert!(!w.is_proper_power());
            assert_eq!(&w.canonical_rotation(), w);
            assert!(seen.insert(w.clone()));
            let inv = g.evaluate(w).geodesic_invariants().unwrap();
            assert!((inv.length - c.length).abs() < 1e-9);
        }
        let square = Word::from_ints(&[1, 1]).unwrap();
        assert!(!seen.contains(&square));
        assert!(seen.contains(&Word::from_ints(&[1]).unwrap()));
    }

    #[test]
    fn classes_match_brute_force() {
        // Every cyclically reduced word up to the length bound, reduced to its
        // least rotation and filtered by primitivity and translation length.
        let g = fixtures::fuchsian_pair();
        let l = 8.0;
        let found: HashSet<Word> = classes(&g, l).into_iter().map(|c| c.cyclic_word).collect();
        let mut brute = HashSet::new();
        let max_len = 12;
        g.enumerate_orbit_exhaustive(f64::INFINITY, max_len, |r| {
            let w = Word::new(r.word.to_vec()).unwrap();
            if w.is_empty() || !w.is_cyclically_reduced() || w.is_proper_power() {
                return;
            }
            if g.evaluate(&w).geodesic_invariants().unwrap().length <= l {
                brute.insert(w.canonical_rotation());
            }
        });
        // Nothing of word length max_len survives, so the brute force is complete.
        assert!(brute.iter().all(|w| w.len() < max_len));
        assert_eq!(found, brute);
    }

    #[test]
    fn reversed_classes_pair_up() {
        for g in [fixtures::fuchsian_pair(), fixtures::kleinian_pair(1)] {
            let list = classes(&g, 8.0);
            let by_word: BTreeMap<Word, &OwnedGeodesic> = list.iter().map(|c| (c.cyclic_word.clone(), c)).collect();
            for c in &list {
                let rev = c.cyclic_word.inverse().canonical_rotation();
                assert_ne!(rev, c.cyclic_word, "a free group element is never conjugate to its inverse");
                let partner = by_word.get(&rev).expect("reversed class emitted");
                assert!((partner.length - c.length).abs() < 1e-9);
                let neg: Vec<i64> = c.homology.iter().map(|x| -x).collect();
                assert_eq!(partner.homology, neg);
                // γ and γ⁻¹ share the trace, hence the complex length.
                let dtheta = (partner.holonomy - c.holonomy).rem_euclid(std::f64::consts::TAU);
                assert!(!(1e-8..=std::f64::consts::TAU - 1e-8).contains(&dtheta));
            }
        }
    }

    #[test]
    fn length_margin_bounds_translation_length() {
        let g = fixtures::kleinian_pair(1);
        g.enumerate_orbit(7.0, 10_000_000, |r| {
            let w = Word::new(r.word.to_vec()).unwrap();
            if w.is_empty() || !w.is_cyclically_reduced() {
                return;
            }
            let m = g.evaluate(&w);
            let l = m.geodesic_invariants().unwrap().length;
            assert!(l >= r.displacement - g.length_margin(w.letters()[0].symbol()) - 1e-9);
        })
        .unwrap();
    }

    #[test]
    fn group_file_round_trip() {
        let g = fixtures::kleinian_pair(1);
        let f = GroupFile::from_group(Some("k".into()), &g);
        let s = serde_json::to_string_pretty(&f).unwrap();
        let back: GroupFile = serde_json::from_str(&s).unwrap();
        let h = back.build::<f64>().unwrap();
        for (a, b) in g.generators().iter().zip(h.generators()) {
            assert!(a.projectively_eq(b, 1e-12));
        }
    }
}
