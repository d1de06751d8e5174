//! Goodness-of-fit and trend tests used by the census and CLT checks.
//!
//! Everything here works in `f64`: these are summaries of counts and samples,
//! not part of the scalar-generic numerical core.

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal, StudentsT};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("need at least {needed} points, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("reference covariance is not positive definite")]
    SingularReference,
    #[error("sample has dimension {got}, reference has {expected}")]
    DimensionMismatch { expected: usize, got: usize },
}

const KS_MIN: usize = 20;
const TREND_MIN: usize = 5;
const CLT_MIN: usize = 1000;

fn need(needed: usize, got: usize) -> Result<(), StatsError> {
    if got < needed {
        Err(StatsError::InsufficientData { needed, got })
    } else {
        Ok(())
    }
}

/// Survival function of the Kolmogorov distribution, `P(K > x)`.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 1.18 {
        // theta-function form, fast for small x
        let c = std::f64::consts::PI * std::f64::consts::PI / (8.0 * x * x);
        let s: f64 = (1..=8).map(|j| (-((2 * j - 1) as f64).powi(2) * c).exp()).sum();
        (1.0 - (2.0 * std::f64::consts::PI).sqrt() / x * s).clamp(0.0, 1.0)
    } else {
        let s: f64 = (1..=100)
            .map(|j| {
                let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
                sign * (-2.0 * (j * j) as f64 * x * x).exp()
            })
            .sum();
        (2.0 * s).clamp(0.0, 1.0)
    }
}

/// Two-sided one-sample KS statistic `sup |F_n − F|`.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter().enumerate().fold(0.0, |d, (i, &x)| {
        let f = cdf(x);
        d.max(f - i as f64 / n).max((i + 1) as f64 / n - f)
    })
}

/// One-sample KS test with the asymptotic p-value (small-sample corrected
/// argument `(√n + 0.12 + 0.11/√n)·D`).
pub fn ks_test<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> Result<f64, StatsError> {
    need(KS_MIN, samples.len())?;
    let d = ks_statistic(samples, cdf);
    let rn = (samples.len() as f64).sqrt();
    Ok(kolmogorov_sf((rn + 0.12 + 0.11 / rn) * d))
}

/// Upper tail `P(χ²_df > stat)`.
pub fn chi2_sf(stat: f64, df: usize) -> f64 {
    if stat <= 0.0 {
        return 1.0;
    }
    ChiSquared::new(df as f64).expect("df > 0").sf(stat)
}

/// Pearson goodness-of-fit of `samples` against `χ²_df`, on equiprobable bins.
pub fn chi2_test(samples: &[f64], df: usize) -> Result<f64, StatsError> {
    need(KS_MIN, samples.len())?;
    let dist = ChiSquared::new(df as f64).expect("df > 0");
    let n = samples.len();
    let bins = (n / 50).clamp(4, 20);
    let mut observed = vec![0usize; bins];
    for &x in samples {
        let u = if x <= 0.0 { 0.0 } else { dist.cdf(x) };
        observed[((u * bins as f64) as usize).min(bins - 1)] += 1;
    }
    let expected = n as f64 / bins as f64;
    let stat: f64 = observed.iter().map(|&o| (o as f64 - expected).powi(2) / expected).sum();
    Ok(chi2_sf(stat, bins - 1))
}

/// Spearman rank correlation of a series against its index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Trend {
    pub rho: f64,
    /// One-sided p-value for a decreasing trend.
    pub p_decreasing: f64,
    /// One-sided p-value for an increasing trend.
    pub p_increasing: f64,
}

fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut r = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            r[idx[k]] = avg;
        }
        i = j + 1;
    }
    r
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        0.0
    } else {
        sab / (saa * sbb).sqrt()
    }
}

/// Spearman trend test against the index, with the Student-t approximation.
pub fn trend_test(series: &[f64]) -> Result<Trend, StatsError> {
    need(TREND_MIN, series.len())?;
    let index: Vec<f64> = (1..=series.len()).map(|i| i as f64).collect();
    let rho = pearson(&index, &ranks(series)).clamp(-1.0, 1.0);
    let df = (series.len() - 2) as f64;
    let (p_dec, p_inc) = if rho <= -1.0 {
        (0.0, 1.0)
    } else if rho >= 1.0 {
        (1.0, 0.0)
    } else {
        let t = rho * (df / (1.0 - rho * rho)).sqrt();
        let st = StudentsT::new(0.0, 1.0, df).expect("df > 0");
        (st.cdf(t), st.sf(t))
    };
    Ok(Trend { rho, p_decreasing: p_dec, p_increasing: p_inc })
}

/// Largest pairwise relative deviation `|a − b| / min(a, b)` among the last
/// `k` entries.
pub fn plateau_spread(series: &[f64], k: usize) -> Result<f64, StatsError> {
    need(k, series.len())?;
    let tail = &series[series.len() - k..];
    let mut worst: f64 = 0.0;
    for (i, &a) in tail.iter().enumerate() {
        for &b in &tail[i + 1..] {
            worst = worst.max((a - b).abs() / a.abs().min(b.abs()));
        }
    }
    Ok(worst)
}

/// Ordinary least squares `y ≈ a + b·x`; returns `(a, b)`.
pub fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let b = if sxx == 0.0 { 0.0 } else { sxy / sxx };
    (my - b * mx, b)
}

fn cholesky(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = a[i][i] - s;
                if !(d > 0.0) {
                    return None;
                }
                l[i][j] = d.sqrt();
            } else {
                l[i][j] = (a[i][j] - s) / l[j][j];
            }
        }
    }
    Some(l)
}

fn forward_solve(l: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let mut x = vec![0.0; b.len()];
    for i in 0..b.len() {
        let s: f64 = (0..i).map(|k| l[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / l[i][i];
    }
    x
}

/// Comparison of `f_n/√τ_n` with `N(0, Σ)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GaussianCheck {
    pub count: usize,
    pub mean: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    pub reference: Vec<Vec<f64>>,
    /// Per coordinate of the whitened samples.
    pub ks_p: Vec<f64>,
    /// Squared Mahalanobis radii against `χ²_d`.
    pub chi2_p: f64,
}

impl GaussianCheck {
    /// Worst relative deviation of the empirical diagonal from the reference.
    pub fn variance_error(&self) -> f64 {
        (0..self.reference.len())
            .map(|i| (self.covariance[i][i] / self.reference[i][i] - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn min_ks_p(&self) -> f64 {
        self.ks_p.iter().copied().fold(1.0, f64::min)
    }
}

/// CLT check of samples `(τ_n, f_n)` against the reference covariance.
pub fn clt_check(samples: &[(f64, Vec<f64>)], reference: &[Vec<f64>]) -> Result<GaussianCheck, StatsError> {
    need(CLT_MIN, samples.len())?;
    let d = reference.len();
    if d == 0 || reference.iter().any(|r| r.len() != d) {
        return Err(StatsError::SingularReference);
    }
    if let Some((_, f)) = samples.iter().find(|(_, f)| f.len() != d) {
        return Err(StatsError::DimensionMismatch { expected: d, got: f.len() });
    }
    let l = cholesky(reference).ok_or(StatsError::SingularReference)?;
    let n = samples.len() as f64;
    let xs: Vec<Vec<f64>> = samples.iter().map(|(t, f)| f.iter().map(|x| x / t.sqrt()).collect()).collect();

    let mut mean = vec![0.0; d];
    for x in &xs {
        for i in 0..d {
            mean[i] += x[i];
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut cov = vec![vec![0.0; d]; d];
    for x in &xs {
        for i in 0..d {
            for j in 0..d {
                cov[i][j] += (x[i] - mean[i]) * (x[j] - mean[j]);
            }
        }
    }
    cov.iter_mut().flatten().for_each(|c| *c /= n - 1.0);

    let z: Vec<Vec<f64>> = xs.iter().map(|x| forward_solve(&l, x)).collect();
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let ks_p = (0..d)
        .map(|i| {
            let col: Vec<f64> = z.iter().map(|v| v[i]).collect();
            ks_test(&col, |x| normal.cdf(x))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let radii: Vec<f64> = z.iter().map(|v| v.iter().map(|x| x * x).sum()).collect();
    let chi2_p = chi2_test(&radii, d)?;

    Ok(GaussianCheck { count: samples.len(), mean, covariance: cov, reference: reference.to_vec(), ks_p, chi2_p })
}
