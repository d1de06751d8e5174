//! Empirical counts from the orbit and closed-geodesic enumerations, binned at
//! checkpoints and compared with the predicted growth.

use std::collections::{BTreeMap, HashSet};
use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hyperbolic::{row_times, Model};
use crate::scalar::Real;
use crate::schottky::{EnumerationError, Schottky};
use crate::stats::{least_squares, plateau_spread, StatsError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CensusError {
    #[error(transparent)]
    Enumeration(#[from] EnumerationError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("need at least {needed} checkpoints, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("checkpoints must be finite, positive and strictly increasing")]
    InvalidCheckpoints,
    #[error("counts must be positive to fit growth")]
    NonPositiveCounts,
    #[error("operation needs a {0:?} group")]
    WrongModel(Model),
    #[error("operation needs homology dimension at least {0}")]
    HomologyTooSmall(usize),
    #[error("base vector must be timelike (x² + y² − z² < 0)")]
    InvalidVector,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CensusKind {
    OrbitByHomology,
    GeodesicByHomology,
    HolonomyHistogram,
    VectorNorm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConstantsMode {
    /// One multiplicative constant fitted on the first half of the checkpoints.
    UpToConstant,
    Absolute,
}

/// Parameters of the predicted growth law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub delta: f64,
    pub sigma: f64,
    pub d: usize,
    pub mode: ConstantsMode,
}

impl Prediction {
    pub fn up_to_constant(delta: f64, d: usize) -> Self {
        Self { delta, sigma: 1.0, d, mode: ConstantsMode::UpToConstant }
    }

    pub fn absolute(delta: f64, sigma: f64, d: usize) -> Self {
        Self { delta, sigma, d, mode: ConstantsMode::Absolute }
    }

    /// `e^{δT}/T^{d/2}`.
    pub fn orbit_shape(&self, t: f64) -> f64 {
        (self.delta * t).exp() / t.powf(self.d as f64 / 2.0)
    }

    /// `e^{δL}/((2πσ)^{d/2} δ L^{d/2+1})`.
    pub fn geodesic_main_term(&self, l: f64) -> f64 {
        let h = self.d as f64 / 2.0;
        (self.delta * l).exp() / ((std::f64::consts::TAU * self.sigma).powf(h) * self.delta * l.powf(h + 1.0))
    }

    /// `T^δ/(log T)^{d/2}`.
    pub fn vector_shape(&self, t: f64) -> f64 {
        t.powf(self.delta) / t.ln().powf(self.d as f64 / 2.0)
    }
}

/// Cumulative counts for one homology class, angle bin or norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub label: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub class: Vec<i64>,
    pub counts: Vec<u64>,
    pub predictions: Vec<f64>,
    pub ratios: Vec<f64>,
}

impl Series {
    fn bare(label: String, counts: Vec<u64>) -> Self {
        Self { label, class: Vec::new(), counts, predictions: Vec::new(), ratios: Vec::new() }
    }

    fn for_class(xi: &[i64], counts: Vec<u64>) -> Self {
        Self { class: xi.to_vec(), ..Self::bare(class_label(xi), counts) }
    }

    fn predict(&mut self, predictions: Vec<f64>) {
        self.ratios = self
            .counts
            .iter()
            .zip(&predictions)
            .map(|(&c, &p)| if p > 0.0 { c as f64 / p } else { f64::NAN })
            .collect();
        self.predictions = predictions;
    }
}

/// `|Σ e^{ipθ}| / count` over classes up to each checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacterSeries {
    pub p: i32,
    pub sum_re: Vec<f64>,
    pub sum_im: Vec<f64>,
    pub ratio: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensusReport {
    pub kind: CensusKind,
    pub checkpoints: Vec<f64>,
    pub series: Vec<Series>,
    /// Unrestricted count at each checkpoint.
    pub total: Vec<u64>,
    pub prediction: Option<Prediction>,
    pub fitted_constant: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub characters: Vec<CharacterSeries>,
    /// Vectors reached by more than one group element (deduplicated).
    #[serde(default)]
    pub stabilizer_detected: u64,
}

impl CensusReport {
    pub fn series(&self, label: &str) -> Option<&Series> {
        self.series.iter().find(|s| s.label == label)
    }

    pub fn class(&self, xi: &[i64]) -> Option<&Series> {
        self.series.iter().find(|s| s.class == xi)
    }

    /// One row per (checkpoint, series).
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "checkpoint,series,count,prediction,ratio")?;
        for (i, t) in self.checkpoints.iter().enumerate() {
            for s in &self.series {
                let p = s.predictions.get(i).copied().unwrap_or(f64::NAN);
                let r = s.ratios.get(i).copied().unwrap_or(f64::NAN);
                writeln!(w, "{t},{},{},{},{}", s.label, s.counts[i], csv_float(p), csv_float(r))?;
            }
        }
        Ok(())
    }

    /// Whitespace-separated columns: checkpoint, then one count per series.
    pub fn write_plot_data<W: Write>(&self, mut w: W) -> io::Result<()> {
        let labels: Vec<&str> = self.series.iter().map(|s| s.label.as_str()).collect();
        writeln!(w, "# T {}", labels.join(" "))?;
        for (i, t) in self.checkpoints.iter().enumerate() {
            let row: Vec<String> = self.series.iter().map(|s| s.counts[i].to_string()).collect();
            writeln!(w, "{t} {}", row.join(" "))?;
        }
        Ok(())
    }
}

fn csv_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x}")
    } else {
        String::new()
    }
}

/// Label of a homology class, e.g. `[0]` or `[1,-2]`.
pub fn class_label(xi: &[i64]) -> String {
    let parts: Vec<String> = xi.iter().map(|x| x.to_string()).collect();
    format!("[{}]", parts.join(","))
}

/// `n` checkpoints equally spaced in `T` over `[t_min, t_max]`.
pub fn checkpoints(t_min: f64, t_max: f64, n: usize) -> Vec<f64> {
    crate::transfer::linspace(t_min, t_max, n)
}

fn check_checkpoints(cp: &[f64]) -> Result<(), CensusError> {
    if cp.is_empty() {
        return Err(CensusError::InsufficientData { needed: 1, got: 0 });
    }
    let ok = cp.iter().all(|t| t.is_finite() && *t > 0.0) && cp.windows(2).all(|w| w[0] < w[1]);
    if ok {
        Ok(())
    } else {
        Err(CensusError::InvalidCheckpoints)
    }
}

fn bin_of(cp: &[f64], x: f64) -> Option<usize> {
    let i = cp.partition_point(|&c| c < x);
    (i < cp.len()).then_some(i)
}

fn cumulate(bins: &[u64]) -> Vec<u64> {
    bins.iter()
        .scan(0u64, |acc, &b| {
            *acc += b;
            Some(*acc)
        })
        .collect()
}

fn merge_bins(into: &mut [u64], from: &[u64]) {
    for (a, b) in into.iter_mut().zip(from) {
        *a += b;
    }
}

/// Geometric-mean fit of `c` in `count ≈ c·shape` over the first half of the
/// checkpoints (those with a positive count).
fn fit_constant(counts: &[u64], shape: &[f64]) -> Option<f64> {
    let half = counts.len().div_ceil(2);
    let logs: Vec<f64> = counts[..half]
        .iter()
        .zip(&shape[..half])
        .filter(|(c, s)| **c > 0 && **s > 0.0)
        .map(|(&c, &s)| (c as f64 / s).ln())
        .collect();
    (!logs.is_empty()).then(|| (logs.iter().sum::<f64>() / logs.len() as f64).exp())
}

/// `N_ξ(T) = #{γ : d(o, γo) ≤ T, homology(γ) = ξ}` for each class in
/// `classes` (every class met when `None`), with the prediction
/// `c·e^{δT}/T^{d/2}` when `delta` is given.
pub fn orbit_by_homology<T: Real>(
    group: &Schottky<T>,
    checkpoints: &[f64],
    classes: Option<&[Vec<i64>]>,
    delta: Option<f64>,
    budget: u64,
) -> Result<CensusReport, CensusError> {
    check_checkpoints(checkpoints)?;
    let n = checkpoints.len();
    let t_max = T::lit(*checkpoints.last().expect("nonempty"));
    let shards = group.fold_orbit(t_max, budget, BTreeMap::<Vec<i64>, Vec<u64>>::new, |acc, r| {
        if let Some(i) = bin_of(checkpoints, r.displacement.to_f64_lossy()) {
            acc.entry(r.homology.to_vec()).or_insert_with(|| vec![0; n])[i] += 1;
        }
    })?;
    let mut by_class: BTreeMap<Vec<i64>, Vec<u64>> = BTreeMap::new();
    for shard in shards {
        for (k, v) in shard {
            merge_bins(by_class.entry(k).or_insert_with(|| vec![0; n]), &v);
        }
    }
    let mut total = vec![0u64; n];
    for v in by_class.values() {
        merge_bins(&mut total, v);
    }
    let wanted: Vec<Vec<i64>> = match classes {
        Some(c) => c.to_vec(),
        None => by_class.keys().cloned().collect(),
    };
    let mut series: Vec<Series> = wanted
        .iter()
        .map(|xi| {
            let raw = by_class.get(xi).cloned().unwrap_or_else(|| vec![0; n]);
            Series::for_class(xi, cumulate(&raw))
        })
        .collect();

    let d = group.homology_dim();
    let mut prediction = None;
    let mut fitted = None;
    if let Some(delta) = delta {
        let pred = Prediction::up_to_constant(delta, d);
        let shape: Vec<f64> = checkpoints.iter().map(|&t| pred.orbit_shape(t)).collect();
        // a single constant, fitted on the first requested class
        let reference = series.first().map(|s| s.counts.clone()).unwrap_or_default();
        if let Some(c) = fit_constant(&reference, &shape) {
            for s in &mut series {
                s.predict(shape.iter().map(|x| c * x).collect());
            }
            fitted = Some(c);
        }
        prediction = Some(pred);
    }

    Ok(CensusReport {
        kind: CensusKind::OrbitByHomology,
        checkpoints: checkpoints.to_vec(),
        series,
        total: cumulate(&total),
        prediction,
        fitted_constant: fitted,
        characters: Vec::new(),
        stabilizer_detected: 0,
    })
}

/// Primitive closed geodesics with `ℓ ≤ L` per homology class. The series for
/// class `0` carries the absolute prediction.
pub fn geodesics_by_homology<T: Real>(
    group: &Schottky<T>,
    checkpoints: &[f64],
    classes: &[Vec<i64>],
    prediction: Option<Prediction>,
    budget: u64,
) -> Result<CensusReport, CensusError> {
    check_checkpoints(checkpoints)?;
    let n = checkpoints.len();
    let l_max = T::lit(*checkpoints.last().expect("nonempty"));
    let d = group.homology_dim();
    let wanted: Vec<Vec<i64>> = if classes.is_empty() { vec![vec![0; d]] } else { classes.to_vec() };
    let index: BTreeMap<Vec<i64>, usize> = wanted.iter().cloned().enumerate().map(|(i, k)| (k, i)).collect();
    let shards = group.fold_classes(
        l_max,
        budget,
        || (vec![vec![0u64; n]; wanted.len()], vec![0u64; n]),
        |(per, all), r| {
            if let Some(i) = bin_of(checkpoints, r.length.to_f64_lossy()) {
                all[i] += 1;
                if let Some(&k) = index.get(r.homology) {
                    per[k][i] += 1;
                }
            }
        },
    )?;
    let mut per = vec![vec![0u64; n]; wanted.len()];
    let mut total = vec![0u64; n];
    for (p, a) in shards {
        for (x, y) in per.iter_mut().zip(&p) {
            merge_bins(x, y);
        }
        merge_bins(&mut total, &a);
    }
    let mut series: Vec<Series> =
        wanted.iter().zip(per).map(|(xi, raw)| Series::for_class(xi, cumulate(&raw))).collect();
    if let Some(pred) = prediction {
        let zero = vec![0i64; d];
        let main: Vec<f64> = checkpoints.iter().map(|&l| pred.geodesic_main_term(l)).collect();
        for (s, xi) in series.iter_mut().zip(&wanted) {
            if *xi == zero {
                s.predict(main.clone());
            }
        }
    }
    Ok(CensusReport {
        kind: CensusKind::GeodesicByHomology,
        checkpoints: checkpoints.to_vec(),
        series,
        total: cumulate(&total),
        prediction,
        fitted_constant: None,
        characters: Vec::new(),
        stabilizer_detected: 0,
    })
}

/// Holonomy histogram (`bins` equal arcs of `[0, 2π)`) and normalized
/// character sums `|Σ e^{ipθ}|/#` of primitive closed geodesics.
pub fn holonomy_equidistribution<T: Real>(
    group: &Schottky<T>,
    checkpoints: &[f64],
    p_list: &[i32],
    bins: usize,
    budget: u64,
) -> Result<CensusReport, CensusError> {
    if group.model() != Model::UpperHalfSpace3D {
        return Err(CensusError::WrongModel(Model::UpperHalfSpace3D));
    }
    check_checkpoints(checkpoints)?;
    let n = checkpoints.len();
    let bins = bins.max(1);
    let l_max = T::lit(*checkpoints.last().expect("nonempty"));
    let tau = std::f64::consts::TAU;

    #[derive(Clone)]
    struct Acc {
        hist: Vec<Vec<u64>>,
        re: Vec<Vec<f64>>,
        im: Vec<Vec<f64>>,
    }
    let shards = group.fold_classes(
        l_max,
        budget,
        || Acc {
            hist: vec![vec![0; n]; bins],
            re: vec![vec![0.0; n]; p_list.len()],
            im: vec![vec![0.0; n]; p_list.len()],
        },
        |acc, r| {
            if let Some(i) = bin_of(checkpoints, r.length.to_f64_lossy()) {
                let theta = r.holonomy.to_f64_lossy().rem_euclid(tau);
                let b = ((theta / tau * bins as f64) as usize).min(bins - 1);
                acc.hist[b][i] += 1;
                for (k, &p) in p_list.iter().enumerate() {
                    let (s, c) = (p as f64 * theta).sin_cos();
                    acc.re[k][i] += c;
                    acc.im[k][i] += s;
                }
            }
        },
    )?;
    // shard order is fixed, so the floating-point sums are reproducible
    let mut hist = vec![vec![0u64; n]; bins];
    let mut re = vec![vec![0.0; n]; p_list.len()];
    let mut im = vec![vec![0.0; n]; p_list.len()];
    for acc in shards {
        for (x, y) in hist.iter_mut().zip(&acc.hist) {
            merge_bins(x, y);
        }
        for k in 0..p_list.len() {
            for i in 0..n {
                re[k][i] += acc.re[k][i];
                im[k][i] += acc.im[k][i];
            }
        }
    }
    let mut total = vec![0u64; n];
    for h in &hist {
        merge_bins(&mut total, h);
    }
    let total = cumulate(&total);
    let series = hist.iter().enumerate().map(|(b, h)| Series::bare(format!("bin{b}"), cumulate(h))).collect();
    let cum = |xs: &[f64]| -> Vec<f64> {
        xs.iter()
            .scan(0.0, |acc, x| {
                *acc += x;
                Some(*acc)
            })
            .collect()
    };
    let characters = p_list
        .iter()
        .enumerate()
        .map(|(k, &p)| {
            let (sr, si) = (cum(&re[k]), cum(&im[k]));
            let ratio =
                (0..n).map(|i| if total[i] > 0 { sr[i].hypot(si[i]) / total[i] as f64 } else { f64::NAN }).collect();
            CharacterSeries { p, sum_re: sr, sum_im: si, ratio }
        })
        .collect();
    Ok(CensusReport {
        kind: CensusKind::HolonomyHistogram,
        checkpoints: checkpoints.to_vec(),
        series,
        total,
        prediction: None,
        fitted_constant: None,
        characters,
        stabilizer_detected: 0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VectorNorm {
    Euclidean,
    Sup,
}

impl VectorNorm {
    pub fn eval(self, v: &[f64; 3]) -> f64 {
        match self {
            VectorNorm::Euclidean => (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt(),
            VectorNorm::Sup => v.iter().fold(0.0, |m, x| m.max(x.abs())),
        }
    }
}

/// Hash key identifying a vector up to rounding: direction plus log-norm.
fn vector_key(v: &[f64; 3]) -> [i64; 4] {
    let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    let q = |x: f64| (x * 1e8).round() as i64;
    [q(v[0] / r), q(v[1] / r), q(v[2] / r), q(r.ln())]
}

/// Distinct vectors `w₀·R(γ)` with `‖·‖ ≤ T` over the homology kernel, for a
/// timelike `w₀` (`x² + y² − z² < 0`), with the prediction `c·T^δ/(log T)^{d/2}`.
pub fn vector_orbit<T: Real>(
    group: &Schottky<T>,
    w0: [f64; 3],
    norm: VectorNorm,
    checkpoints: &[f64],
    delta: Option<f64>,
    budget: u64,
) -> Result<CensusReport, CensusError> {
    if group.model() != Model::UpperHalfPlane2D {
        return Err(CensusError::WrongModel(Model::UpperHalfPlane2D));
    }
    check_checkpoints(checkpoints)?;
    let q2 = w0[2] * w0[2] - w0[0] * w0[0] - w0[1] * w0[1];
    if !(q2 > 0.0) {
        return Err(CensusError::InvalidVector);
    }
    let q = q2.sqrt();
    let n = checkpoints.len();
    let t_top = *checkpoints.last().expect("nonempty");
    // Both norms dominate |z| = q·cosh d(o, γ⁻¹p₀), where w₀ sits over p₀.
    let reach = (t_top / q).max(1.0).acosh() + (w0[2].abs() / q).acosh();
    let w = [T::lit(w0[0]), T::lit(w0[1]), T::lit(w0[2])];

    let shards = group.fold_orbit(T::lit(reach), budget, Vec::new, |acc: &mut Vec<(f64, [i64; 4])>, r| {
        if r.homology.iter().any(|&x| x != 0) {
            return;
        }
        let v = row_times(&w, &r.element.adjoint_so21());
        let v = [v[0].to_f64_lossy(), v[1].to_f64_lossy(), v[2].to_f64_lossy()];
        let size = norm.eval(&v);
        if size <= t_top {
            acc.push((size, vector_key(&v)));
        }
    })?;

    let mut seen = HashSet::new();
    let mut dup = 0u64;
    let mut raw = vec![0u64; n];
    for shard in shards {
        for (size, key) in shard {
            if !seen.insert(key) {
                dup += 1;
                continue;
            }
            if let Some(i) = bin_of(checkpoints, size) {
                raw[i] += 1;
            }
        }
    }
    let counts = cumulate(&raw);
    let label = match norm {
        VectorNorm::Euclidean => "euclidean",
        VectorNorm::Sup => "sup",
    };
    let mut s = Series::bare(label.into(), counts.clone());
    let mut prediction = None;
    let mut fitted = None;
    if let Some(delta) = delta {
        let pred = Prediction::up_to_constant(delta, group.homology_dim());
        let shape: Vec<f64> = checkpoints.iter().map(|&t| pred.vector_shape(t)).collect();
        if let Some(c) = fit_constant(&counts, &shape) {
            s.predict(shape.iter().map(|x| c * x).collect());
            fitted = Some(c);
        }
        prediction = Some(pred);
    }
    Ok(CensusReport {
        kind: CensusKind::VectorNorm,
        checkpoints: checkpoints.to_vec(),
        series: vec![s],
        total: counts,
        prediction,
        fitted_constant: fitted,
        characters: Vec::new(),
        stabilizer_detected: dup,
    })
}

/// Least-squares growth fit of a checkpoint series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthFit {
    /// Slope of `log N` against `x`.
    pub exponent: f64,
    /// Slope of `log(N e^{−rate·x})` against `log x`, when a rate is given.
    pub log_power: Option<f64>,
    /// `N` with the fitted growth divided out.
    pub normalized: Vec<f64>,
    /// Largest pairwise relative deviation of `normalized` over the last 3 points.
    pub plateau: f64,
}

/// Fits `N(x) ≈ c·e^{a x}` and, given `rate`, `N(x) ≈ c·e^{rate·x}·x^{b}`.
pub fn fit_growth(x: &[f64], counts: &[f64], rate: Option<f64>) -> Result<GrowthFit, CensusError> {
    if x.len() < 5 || counts.len() != x.len() {
        return Err(CensusError::InsufficientData { needed: 5, got: x.len().min(counts.len()) });
    }
    if counts.iter().any(|c| !(*c > 0.0)) {
        return Err(CensusError::NonPositiveCounts);
    }
    let logs: Vec<f64> = counts.iter().map(|c| c.ln()).collect();
    let (_, exponent) = least_squares(x, &logs);
    let (log_power, normalized): (Option<f64>, Vec<f64>) = match rate {
        Some(r) => {
            if x.iter().any(|v| !(*v > 0.0)) {
                return Err(CensusError::InvalidCheckpoints);
            }
            let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
            let y: Vec<f64> = logs.iter().zip(x).map(|(l, v)| l - r * v).collect();
            let (_, b) = least_squares(&lx, &y);
            let norm = counts.iter().zip(x).map(|(c, v)| c * (-r * v).exp() * v.powf(-b)).collect();
            (Some(b), norm)
        }
        None => (None, counts.iter().zip(x).map(|(c, v)| c * (-exponent * v).exp()).collect()),
    };
    let plateau = plateau_spread(&normalized, 3)?;
    Ok(GrowthFit { exponent, log_power, normalized, plateau })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    const BUDGET: u64 = 50_000_000;

    #[test]
    fn fit_growth_examples() {
        let x: Vec<f64> = (1..=8).map(|i| i as f64).collect();
        let exp2: Vec<f64> = x.iter().map(|t| 3.0 * (2.0 * t).exp()).collect();
        let f = fit_growth(&x, &exp2, None).unwrap();
        assert!((f.exponent - 2.0).abs() < 1e-6);
        assert!(f.plateau < 1e-9);

        let x: Vec<f64> = (2..=12).map(|i| i as f64).collect();
        let mixed: Vec<f64> = x.iter().map(|t| t.exp() / t.sqrt()).collect();
        let f = fit_growth(&x, &mixed, Some(1.0)).unwrap();
        assert!((f.log_power.unwrap() + 0.5).abs() < 0.05);

        let flat = vec![7.0; 6];
        let f = fit_growth(&x[..6], &flat, None).unwrap();
        assert!(f.exponent.abs() < 1e-12);
    }

    #[test]
    fn fit_growth_needs_five_positive_points() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert!(matches!(fit_growth(&x, &[1.0; 4], None), Err(CensusError::InsufficientData { .. })));
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(fit_growth(&x, &[1.0, 0.0, 1.0, 1.0, 1.0], None), Err(CensusError::NonPositiveCounts));
    }

    #[test]
    fn orbit_classes_are_symmetric_and_sum_to_total() {
        let g = fixtures::fuchsian_pair();
        let cp = checkpoints(2.0, 9.0, 8);
        let r = orbit_by_homology(&g, &cp, None, None, BUDGET).unwrap();
        let mut sum = vec![0u64; cp.len()];
        for s in &r.series {
            merge_bins(&mut sum, &s.counts);
            let neg: Vec<i64> = s.class.iter().map(|x| -x).collect();
            assert_eq!(r.class(&neg).unwrap().counts, s.counts, "{}", s.label);
            assert!(s.counts.windows(2).all(|w| w[0] <= w[1]));
        }
        assert_eq!(sum, r.total);
    }

    #[test]
    fn small_radius_sees_only_identity() {
        let g = fixtures::fuchsian_pair();
        let r = orbit_by_homology(&g, &[0.1, 0.2], Some(&[vec![0]]), None, BUDGET).unwrap();
        assert_eq!(r.series[0].counts, vec![1, 1]);
    }

    #[test]
    fn geodesic_classes_pair_under_reversal() {
        let g = fixtures::fuchsian_pair();
        let cp = checkpoints(3.0, 10.0, 6);
        let r = geodesics_by_homology(&g, &cp, &[vec![1], vec![-1], vec![2], vec![-2]], None, BUDGET).unwrap();
        assert_eq!(r.series[0].counts, r.series[1].counts);
        assert_eq!(r.series[2].counts, r.series[3].counts);
        assert!(r.series[0].counts.last().unwrap() > &0);
    }

    #[test]
    fn geodesic_prediction_attaches_to_class_zero() {
        let g = fixtures::fuchsian_pair();
        let cp = checkpoints(4.0, 8.0, 5);
        let pred = Prediction::absolute(0.6, 1.0, 1);
        let r = geodesics_by_homology(&g, &cp, &[vec![0], vec![1]], Some(pred), BUDGET).unwrap();
        assert_eq!(r.series[0].predictions.len(), 5);
        assert!(r.series[1].predictions.is_empty());
        let l: f64 = 8.0;
        let expect = (0.6 * l).exp() / ((std::f64::consts::TAU).sqrt() * 0.6 * l.powf(1.5));
        assert!((r.series[0].predictions[4] - expect).abs() < 1e-9 * expect);
    }

    #[test]
    fn holonomy_trivial_and_conjugate_characters() {
        let g = fixtures::kleinian_pair(0);
        let cp = checkpoints(3.0, 7.0, 5);
        let r = holonomy_equidistribution(&g, &cp, &[0, 2, -2], 8, BUDGET).unwrap();
        let top = cp.len() - 1;
        assert!(r.characters[0].ratio.iter().filter(|x| x.is_finite()).all(|x| (x - 1.0).abs() < 1e-12));
        assert!((r.characters[1].ratio[top] - r.characters[2].ratio[top]).abs() < 1e-12);
        assert!((r.characters[1].sum_im[top] + r.characters[2].sum_im[top]).abs() < 1e-9);
        let binned: u64 = r.series.iter().map(|s| s.counts[top]).sum();
        assert_eq!(binned, r.total[top]);
    }

    #[test]
    fn holonomy_rejects_plane_groups() {
        let g = fixtures::fuchsian_pair();
        assert_eq!(
            holonomy_equidistribution(&g, &[1.0], &[1], 4, BUDGET).unwrap_err(),
            CensusError::WrongModel(Model::UpperHalfSpace3D)
        );
    }

    #[test]
    fn vector_counts_start_at_base_norm() {
        let g = fixtures::fuchsian_pair();
        let w0 = [0.0, 0.0, 2.0];
        let r = vector_orbit(&g, w0, VectorNorm::Euclidean, &[1.9, 2.1], None, BUDGET).unwrap();
        assert_eq!(r.total, vec![0, 1]);
    }

    #[test]
    fn vector_counts_are_deduplicated_and_norm_equivalent() {
        let g = fixtures::fuchsian_pair();
        let w0 = [0.3, 0.2, 1.5];
        let cp = checkpoints(50.0, 2000.0, 5);
        let e = vector_orbit(&g, w0, VectorNorm::Euclidean, &cp, None, BUDGET).unwrap();
        let s = vector_orbit(&g, w0, VectorNorm::Sup, &cp, None, BUDGET).unwrap();
        assert_eq!(e.stabilizer_detected, 0);
        // ‖v‖∞ ≤ ‖v‖₂ ≤ √3‖v‖∞
        for i in 0..cp.len() {
            assert!(s.total[i] >= e.total[i]);
        }
        let e_big = vector_orbit(&g, w0, VectorNorm::Euclidean, &[2000.0 * 3f64.sqrt()], None, BUDGET).unwrap();
        assert!(e_big.total[0] >= s.total[cp.len() - 1]);
    }

    #[test]
    fn vector_orbit_rejects_spacelike_base() {
        let g = fixtures::fuchsian_pair();
        assert_eq!(
            vector_orbit(&g, [1.0, 0.0, 0.5], VectorNorm::Sup, &[10.0], None, BUDGET).unwrap_err(),
            CensusError::InvalidVector
        );
    }

    #[test]
    fn csv_has_one_row_per_checkpoint_and_series() {
        let g = fixtures::fuchsian_pair();
        let r = orbit_by_homology(&g, &[3.0, 4.0], Some(&[vec![0], vec![1]]), Some(0.6), BUDGET).unwrap();
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 2 * 2);
        assert!(text.lines().nth(1).unwrap().starts_with("3,[0],"));
    }
}
