//! The acceptance suite behind `verify-all`: eleven named checks on the
//! reference fixtures, each reduced to a pass/fail verdict plus the numbers
//! it was decided on.

use std::cell::OnceCell;
use std::f64::consts::{LN_2, TAU};
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};

use schottky_thermo::census::{self, Prediction, VectorNorm};
use schottky_thermo::schottky::{inverse_symbol, Word};
use schottky_thermo::stats::{plateau_spread, trend_test};
use schottky_thermo::transfer;
use schottky_thermo::{Cx, OperatorSpec, PressureSurface};

use crate::commands::{run_clt, vector_fit, Outcome};
use crate::config::{Budget, Fixture, Params, RunConfig};
use crate::input::Input;
use crate::report::Report;
use crate::CliError;

/// Seed of the CLT check when none is given.
pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuiteOptions {
    pub budget: Budget,
    pub seed: u64,
    pub nodes_per_disk: usize,
    pub fd_step: f64,
}

impl SuiteOptions {
    pub fn from_params(p: &Params) -> Self {
        Self {
            budget: p.budget,
            seed: p.seed.unwrap_or(DEFAULT_SEED),
            nodes_per_disk: p.nodes_per_disk,
            fd_step: p.fd_step,
        }
    }
}

/// Problem sizes of the counting checks.
#[derive(Debug, Clone, Copy, Serialize)]
struct Sizes {
    slope_t: f64,
    orbit_t: f64,
    geodesic_l: f64,
    holonomy_l: f64,
    vector_log_t: f64,
}

impl Sizes {
    fn of(budget: Budget) -> Self {
        match budget {
            Budget::Small => {
                Sizes { slope_t: 12.0, orbit_t: 24.0, geodesic_l: 24.0, holonomy_l: 36.0, vector_log_t: 20.0 }
            }
            Budget::Full => {
                Sizes { slope_t: 16.0, orbit_t: 28.0, geodesic_l: 28.0, holonomy_l: 38.0, vector_log_t: 22.0 }
            }
        }
    }
}

const ENUMERATION_CAP: u64 = 2_000_000_000;

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub summary: String,
    pub data: Value,
}

impl CheckResult {
    pub fn file_name(&self) -> String {
        format!("c{:02}-{}.json", self.id, self.name)
    }
}

struct Verdict {
    passed: bool,
    summary: String,
    data: Value,
}

/// Fixture (b) with its operator and pressure surface.
type Pair = (Input, OperatorSpec, PressureSurface);

/// Shared inputs, built on first use.
struct Ctx {
    opts: SuiteOptions,
    sizes: Sizes,
    pair: OnceCell<Result<Pair, String>>,
}

impl Ctx {
    fn pair(&self) -> Result<&Pair, CliError> {
        self.pair
            .get_or_init(|| {
                let build = || -> Result<_, CliError> {
                    let input = Input::fixture(Fixture::FuchsianPair)?;
                    let spec = input.operator(self.opts.nodes_per_disk)?;
                    let surface = transfer::pressure_surface(&spec, self.opts.fd_step)?;
                    Ok((input, spec, surface))
                };
                build().map_err(|e| e.to_string())
            })
            .as_ref()
            .map_err(|e| CliError::Computation(e.clone()))
    }
}

type CheckFn = fn(&Ctx) -> Result<Verdict, CliError>;

const CHECKS: [(u8, &str, CheckFn); 10] = [
    (1, "toy-closed-forms", toy_closed_forms),
    (2, "coding-correctness", coding_correctness),
    (3, "two-method-delta", two_method_delta),
    (4, "pressure-structure", pressure_structure),
    (5, "spectral-gap-scan", spectral_gap_scan),
    (6, "orbit-local-mixing", orbit_local_mixing),
    (7, "prime-geodesic-homology", prime_geodesic_homology),
    (8, "cocycle-clt", cocycle_clt),
    (9, "holonomy-equidistribution", holonomy_equidistribution),
    (10, "vector-orbit-growth", vector_orbit_growth),
];

pub const DETERMINISM: (u8, &str) = (11, "determinism");

/// Runs checks 1–10; `progress` sees each result with its wall time.
pub fn run_suite(opts: SuiteOptions, mut progress: impl FnMut(&CheckResult, f64)) -> Vec<CheckResult> {
    let ctx = Ctx { opts, sizes: Sizes::of(opts.budget), pair: OnceCell::new() };
    CHECKS
        .iter()
        .map(|&(id, name, f)| {
            let start = Instant::now();
            let v = f(&ctx).unwrap_or_else(|e| Verdict {
                passed: false,
                summary: format!("error: {e}"),
                data: json!({"error": e.to_string()}),
            });
            let r = CheckResult { id, name, passed: v.passed, summary: v.summary, data: v.data };
            progress(&r, start.elapsed().as_secs_f64());
            r
        })
        .collect()
}

fn suite_report(cfg: &RunConfig, opts: SuiteOptions, results: &[CheckResult]) -> Report {
    let mut report = Report::new(cfg.command, &cfg.hash, None);
    report.add_json(
        "options.json",
        &json!({"options": {"budget": opts.budget, "seed": opts.seed,
        "nodes_per_disk": opts.nodes_per_disk, "fd_step": opts.fd_step}, "sizes": Sizes::of(opts.budget)}),
    );
    for r in results {
        report.add_json(&r.file_name(), r);
    }
    report
}

pub fn table_line(r: &CheckResult, seconds: Option<f64>) -> String {
    let time = seconds.map(|s| format!("{s:>7.1}s")).unwrap_or_else(|| " ".repeat(8));
    format!("{:>2}  {:<26} {}  {time}  {}", r.id, r.name, if r.passed { "PASS" } else { "FAIL" }, r.summary)
}

/// Runs the suite, then reruns it on a single worker and compares the report
/// manifests byte for byte.
pub fn verify_all(cfg: &RunConfig, mut echo: impl FnMut(&str)) -> Result<Outcome, CliError> {
    let opts = SuiteOptions::from_params(&cfg.params);
    let mut lines = Vec::new();
    let mut emit = |line: String, lines: &mut Vec<String>| {
        echo(&line);
        lines.push(line);
    };
    emit(format!("{:>2}  {:<26} {}  {:>8}  {}", "#", "criterion", "    ", "time", "detail"), &mut lines);
    let results = run_suite(opts, |r, s| emit(table_line(r, Some(s)), &mut lines));
    let report_a = suite_report(cfg, opts, &results);

    let start = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .stack_size(crate::STACK_SIZE)
        .build()
        .map_err(|e| CliError::Computation(e.to_string()))?;
    let rerun = pool.install(|| run_suite(opts, |_, _| {}));
    let report_b = suite_report(cfg, opts, &rerun);
    let (ma, mb) = (report_a.manifest_bytes(), report_b.manifest_bytes());
    let differing: Vec<String> = report_a
        .manifest()
        .files
        .iter()
        .zip(report_b.manifest().files.iter())
        .filter(|(a, b)| a != b)
        .map(|(a, _)| a.name.clone())
        .collect();
    let same = ma == mb;
    let determinism = CheckResult {
        id: DETERMINISM.0,
        name: DETERMINISM.1,
        passed: same,
        summary: if same {
            format!("rerun on 1 thread: manifests identical ({} files)", report_a.manifest().files.len())
        } else {
            format!("rerun on 1 thread: manifests differ in {}", differing.join(", "))
        },
        data: json!({"identical": same, "differing_files": differing}),
    };
    emit(table_line(&determinism, Some(start.elapsed().as_secs_f64())), &mut lines);

    let mut report = report_a;
    report.add_json(&determinism.file_name(), &determinism);
    let all: Vec<&CheckResult> = results.iter().chain(std::iter::once(&determinism)).collect();
    let failures = all.iter().filter(|r| !r.passed).count();
    report.add_json(
        "summary.json",
        &json!({
            "passed": failures == 0,
            "failures": failures,
            "criteria": all.iter().map(|r| json!({"id": r.id, "name": r.name, "passed": r.passed})).collect::<Vec<_>>(),
        }),
    );
    emit(format!("{} of {} criteria passed", all.len() - failures, all.len()), &mut lines);
    Ok(Outcome { report, lines, failures })
}

fn max_abs(xs: impl IntoIterator<Item = f64>) -> f64 {
    xs.into_iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn toy_closed_forms(_: &Ctx) -> Result<Verdict, CliError> {
    let input = Input::fixture(Fixture::ToyTwoShift)?;
    let spec = input.operator(0)?;
    let delta = transfer::critical_exponent(&spec)?;
    let grid = transfer::linspace(-1.0, 1.0, 21);
    let mut pressure_err: f64 = 0.0;
    for &u in &grid {
        let p = transfer::pressure(&spec, &[u])?;
        pressure_err = pressure_err.max((p - (2.0 * u.cosh()).ln()).abs());
    }
    let surface = transfer::pressure_surface(&spec, 1e-3)?;
    let (de, se, ce) = ((delta - LN_2).abs(), (surface.sigma - 1.0).abs(), (surface.c0 - TAU.sqrt()).abs());
    let passed = de < 1e-12 && pressure_err < 1e-10 && se < 1e-6 && ce < 1e-6;
    Ok(Verdict {
        passed,
        summary: format!("|δ−log2| {de:.1e}, max|P−log2cosh| {pressure_err:.1e}, |σ−1| {se:.1e}, |C0−√2π| {ce:.1e}"),
        data: json!({"delta": delta, "delta_error": de, "pressure_grid": grid, "pressure_error": pressure_err,
            "sigma": surface.sigma, "sigma_error": se, "c0": surface.c0, "c0_error": ce}),
    })
}

/// Every cyclically reduced symbol sequence of length `n`.
fn cyclic_words(k: usize, n: usize, out: &mut Vec<Vec<usize>>) {
    fn rec(k: usize, n: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == n {
            if inverse_symbol(cur[0]) != cur[n - 1] {
                out.push(cur.clone());
            }
            return;
        }
        for s in 0..k {
            if cur.last().is_some_and(|&l| inverse_symbol(l) == s) {
                continue;
            }
            cur.push(s);
            rec(k, n, cur, out);
            cur.pop();
        }
    }
    rec(k, n, &mut Vec::new(), out);
}

fn coding_correctness(_: &Ctx) -> Result<Verdict, CliError> {
    let input = Input::fixture(Fixture::FuchsianPair)?;
    let g = input.require_group("verify-all")?;
    let mut words = Vec::new();
    for n in 1..=8 {
        cyclic_words(g.symbol_count(), n, &mut words);
    }
    let mut worst: f64 = 0.0;
    for syms in &words {
        let w = Word::from_symbols(syms).map_err(|e| CliError::Computation(e.to_string()))?;
        let (tau, _, _) =
            input.shift.cycle_sums(&w).ok_or_else(|| CliError::Computation(format!("no periodic point for {w}")))?;
        let length =
            g.evaluate(&w).geodesic_invariants().map_err(|e| CliError::Computation(format!("{w}: {e}")))?.length;
        worst = worst.max((tau - length).abs());
    }
    Ok(Verdict {
        passed: worst < 1e-6,
        summary: format!("{} cyclic words of length ≤ 8, max |τ_n − ℓ| {worst:.1e}", words.len()),
        data: json!({"words": words.len(), "max_length": 8, "max_error": worst}),
    })
}

fn two_method_delta(ctx: &Ctx) -> Result<Verdict, CliError> {
    let t = ctx.sizes.slope_t;
    let cp = census::checkpoints(t / 2.0, t, 10);
    let mut rows = Vec::new();
    let mut passed = true;
    let mut parts = Vec::new();
    for f in [Fixture::FuchsianPair, Fixture::FuchsianTriple] {
        let input = Input::fixture(f)?;
        let delta = transfer::critical_exponent(&input.operator(ctx.opts.nodes_per_disk)?)?;
        let report =
            census::orbit_by_homology(input.require_group("verify-all")?, &cp, Some(&[]), None, ENUMERATION_CAP)?;
        let top = cp.len() / 2;
        let counts: Vec<f64> = report.total[top..].iter().map(|&c| c as f64).collect();
        let slope = census::fit_growth(&cp[top..], &counts, None)?.exponent;
        let diff = (slope - delta).abs();
        passed &= diff < 2e-2;
        parts.push(format!("{}: δ {delta:.4} slope {slope:.4}", f.name()));
        rows.push(json!({"fixture": f.name(), "delta": delta, "slope": slope, "difference": diff,
            "checkpoints": cp, "totals": report.total}));
    }
    Ok(Verdict { passed, summary: parts.join("; "), data: json!({"tolerance": 2e-2, "fixtures": rows}) })
}

fn pressure_structure(ctx: &Ctx) -> Result<Verdict, CliError> {
    let mut passed = true;
    let mut rows = Vec::new();
    let mut parts = Vec::new();
    for f in [Fixture::FuchsianPair, Fixture::FuchsianTriple] {
        let input = Input::fixture(f)?;
        let spec = input.operator(ctx.opts.nodes_per_disk)?;
        let s = transfer::pressure_surface(&spec, ctx.opts.fd_step)?;
        let d = s.gradient.len();
        let at = transfer::leading_eigenvalue(&spec, Cx::new(s.delta, 0.0), &vec![0.0; d], 0)?;
        let miss = (at.lambda - Cx::new(1.0, 0.0)).norm();
        let grad = max_abs(s.gradient.iter().copied());
        let probes: Vec<Vec<f64>> = match d {
            1 => vec![vec![0.25], vec![0.5]],
            _ => vec![vec![0.25, 0.0], vec![0.0, 0.25], vec![0.2, -0.15], vec![0.3, 0.3]],
        };
        let mut asym: f64 = 0.0;
        for u in &probes {
            let neg: Vec<f64> = u.iter().map(|x| -x).collect();
            asym = asym.max((transfer::pressure(&spec, u)? - transfer::pressure(&spec, &neg)?).abs());
        }
        let ok = miss < 1e-8 && grad < 1e-4 && s.min_hessian_eigenvalue > 0.0 && asym < 1e-8;
        passed &= ok;
        parts.push(format!(
            "{}: |λ−1| {miss:.0e} ‖∇P‖ {grad:.0e} λmin(∇²P) {:.3} asym {asym:.0e}",
            f.name(),
            s.min_hessian_eigenvalue
        ));
        rows.push(json!({"fixture": f.name(), "delta": s.delta, "eigenvalue_defect": miss, "gradient": s.gradient,
            "hessian": s.hessian, "min_hessian_eigenvalue": s.min_hessian_eigenvalue, "symmetry_probes": probes,
            "max_asymmetry": asym, "passed": ok}));
    }
    Ok(Verdict { passed, summary: parts.join("; "), data: json!({"fixtures": rows}) })
}

fn spectral_gap_scan(ctx: &Ctx) -> Result<Verdict, CliError> {
    let (_, spec, surface) = ctx.pair()?;
    let t_grid = transfer::linspace(0.05, 5.0, 25);
    let v_grid = transfer::torus_grid(1, 16);
    let scan = transfer::spectral_radius_scan(spec, surface.delta, &t_grid, &v_grid, &[0], 1e-3)?;
    let toy = Input::fixture(Fixture::ToyTwoShift)?;
    let toy_spec = toy.operator(0)?;
    let toy_delta = transfer::critical_exponent(&toy_spec)?;
    let control = transfer::spectral_radius_scan(&toy_spec, toy_delta, &[TAU], &[vec![0.0]], &[0], 1e-3)?;
    let flagged = control.violations.iter().any(|r| (r.t - TAU).abs() < 1e-12);
    let passed = scan.violations.is_empty() && flagged;
    Ok(Verdict {
        passed,
        summary: format!(
            "fixture (b): max |λ| {:.6} over {} points ({} violations); toy flagged at t = 2π: {flagged}",
            scan.max_off_origin,
            scan.rows.len(),
            scan.violations.len()
        ),
        data: json!({"max_off_origin": scan.max_off_origin, "points": scan.rows.len(), "violations": scan.violations,
            "toy_modulus_at_2pi": control.rows[0].modulus, "toy_flagged": flagged}),
    })
}

fn orbit_local_mixing(ctx: &Ctx) -> Result<Verdict, CliError> {
    let (input, _, surface) = ctx.pair()?;
    let g = input.require_group("verify-all")?;
    let t = ctx.sizes.orbit_t;
    let cp = census::checkpoints(t / 2.0, t, 9);
    let report = census::orbit_by_homology(g, &cp, None, Some(surface.delta), ENUMERATION_CAP)?;
    let zero = report.class(&[0]).ok_or_else(|| CliError::Computation("class 0 never met".into()))?;
    let normalized: Vec<f64> =
        zero.counts.iter().zip(&cp).map(|(&n, &t)| n as f64 * t.sqrt() * (-surface.delta * t).exp()).collect();
    let spread = plateau_spread(&normalized, 3).map_err(|e| CliError::Computation(e.to_string()))?;
    let mut asymmetric = Vec::new();
    for s in &report.series {
        let neg: Vec<i64> = s.class.iter().map(|x| -x).collect();
        if report.class(&neg).map(|m| &m.counts) != Some(&s.counts) {
            asymmetric.push(s.label.clone());
        }
    }
    let sums_match = (0..cp.len()).all(|i| report.series.iter().map(|s| s.counts[i]).sum::<u64>() == report.total[i]);
    let passed = spread < 0.10 && asymmetric.is_empty() && sums_match;
    Ok(Verdict {
        passed,
        summary: format!(
            "N_0·T^½·e^(−δT) last-3 spread {:.1}% ({} points at T = {t}); N_ξ = N_−ξ for {} classes: {}",
            100.0 * spread,
            report.total.last().copied().unwrap_or(0),
            report.series.len(),
            asymmetric.is_empty()
        ),
        data: json!({"checkpoints": cp, "zero_class_counts": zero.counts, "normalized": normalized, "spread": spread,
            "classes": report.series.len(), "asymmetric_classes": asymmetric, "class_sums_match_total": sums_match,
            "totals": report.total}),
    })
}

fn prime_geodesic_homology(ctx: &Ctx) -> Result<Verdict, CliError> {
    let (input, _, surface) = ctx.pair()?;
    let g = input.require_group("verify-all")?;
    let l = ctx.sizes.geodesic_l;
    let cp = census::checkpoints(l / 2.0, l, 9);
    let pred = Prediction::absolute(surface.delta, surface.sigma, 1);
    let report = census::geodesics_by_homology(g, &cp, &[vec![0]], Some(pred), ENUMERATION_CAP)?;
    let ratios = report.class(&[0]).ok_or_else(|| CliError::Computation("class 0 missing".into()))?.ratios.clone();
    let deviation: Vec<f64> = ratios.iter().map(|r| (r - 1.0).abs()).collect();
    let trend = trend_test(&deviation).map_err(|e| CliError::Computation(e.to_string()))?;
    let top = *ratios.last().expect("checkpoints");

    let d0 = Input::fixture(Fixture::FuchsianPairD0)?;
    let control_pred = Prediction::absolute(surface.delta, 1.0, 0);
    let control =
        census::geodesics_by_homology(d0.require_group("verify-all")?, &cp, &[], Some(control_pred), ENUMERATION_CAP)?;
    let control_ratios = control.series[0].ratios.clone();
    let control_top = *control_ratios.last().expect("checkpoints");

    let in_band = |r: f64| (0.7..=1.3).contains(&r);
    let passed = in_band(top) && trend.p_decreasing < 0.05 && in_band(control_top);
    Ok(Verdict {
        passed,
        summary: format!(
            "d=1 ratio {top:.4} at L = {l} (|ratio−1| trend p {:.1e}); d=0 ratio {control_top:.4}",
            trend.p_decreasing
        ),
        data: json!({"checkpoints": cp, "counts": report.class(&[0]).map(|s| &s.counts), "ratios": ratios,
            "trend": trend, "control_counts": control.series[0].counts, "control_ratios": control_ratios}),
    })
}

fn cocycle_clt(ctx: &Ctx) -> Result<Verdict, CliError> {
    let input = Input::fixture(Fixture::FuchsianPair)?;
    let params = Params {
        nodes_per_disk: ctx.opts.nodes_per_disk,
        fd_step: ctx.opts.fd_step,
        trajectories: 10_000,
        steps: 10_000,
        ..Params::default()
    };
    let run = run_clt(&input, &params, ctx.opts.seed)?;
    let c = &run.samples.check;
    let passed = c.variance_error() < 0.10 && c.min_ks_p() > 0.01;
    Ok(Verdict {
        passed,
        summary: format!(
            "Var {:.4} vs P''(0) {:.4} ({:.1}% off), KS p {:.3}",
            c.covariance[0][0],
            c.reference[0][0],
            100.0 * c.variance_error(),
            c.min_ks_p()
        ),
        data: json!({"spectral": run.spectral, "samples": run.samples}),
    })
}

fn holonomy_equidistribution(ctx: &Ctx) -> Result<Verdict, CliError> {
    let input = Input::fixture(Fixture::KleinianPairD0)?;
    let l = ctx.sizes.holonomy_l;
    let cp = census::checkpoints(l / 2.0, l, 7);
    let report =
        census::holonomy_equidistribution(input.require_group("verify-all")?, &cp, &[1, 2, 3], 16, ENUMERATION_CAP)?;
    let tops: Vec<(i32, f64)> =
        report.characters.iter().map(|c| (c.p, *c.ratio.last().expect("checkpoints"))).collect();
    let passed = tops.len() == 3 && tops.iter().all(|(_, r)| *r < 0.1);
    let parts: Vec<String> = tops.iter().map(|(p, r)| format!("p={p}: {r:.3}")).collect();
    Ok(Verdict {
        passed,
        summary: format!("{} geodesics with ℓ ≤ {l}; {}", report.total.last().copied().unwrap_or(0), parts.join(", ")),
        data: json!({"checkpoints": cp, "totals": report.total, "characters": report.characters}),
    })
}

fn vector_orbit_growth(ctx: &Ctx) -> Result<Verdict, CliError> {
    let (input, _, surface) = ctx.pair()?;
    let g = input.require_group("verify-all")?;
    let hi = ctx.sizes.vector_log_t;
    let cp: Vec<f64> = census::checkpoints(hi / 2.0, hi, 9).iter().map(|x| x.exp()).collect();
    let mut passed = true;
    let mut rows = Vec::new();
    let mut parts = Vec::new();
    for (name, norm) in [("euclidean", VectorNorm::Euclidean), ("sup", VectorNorm::Sup)] {
        let report = census::vector_orbit(g, [0.3, 0.2, 1.5], norm, &cp, Some(surface.delta), ENUMERATION_CAP)?;
        let fit = vector_fit(&report, g.homology_dim(), surface.delta)?;
        let ok = (fit.exponent - surface.delta).abs() < 0.05 && fit.plateau < 0.15;
        passed &= ok;
        parts.push(format!("{name}: exponent {:.4} plateau {:.1}%", fit.exponent, 100.0 * fit.plateau));
        rows.push(json!({"norm": name, "totals": report.total, "fit": fit, "stabilizer_detected": report.stabilizer_detected}));
    }
    Ok(Verdict {
        passed,
        summary: format!("δ {:.4}; {}", surface.delta, parts.join("; ")),
        data: json!({"w0": [0.3, 0.2, 1.5], "checkpoints": cp, "norms": rows}),
    })
}
