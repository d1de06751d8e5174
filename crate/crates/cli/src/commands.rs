//! One function per subcommand. Each returns the report files and the lines
//! printed to stdout; writing the report is left to the caller.

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use schottky_thermo::census::{self, CensusError, CensusReport, Prediction, VectorNorm};
use schottky_thermo::hyperbolic::Model;
use schottky_thermo::schottky::Letter;
use schottky_thermo::stats::{clt_check, plateau_spread, GaussianCheck};
use schottky_thermo::transfer::{self, TransferError};
use schottky_thermo::{Cx, ParryChain};

use crate::config::{NormArg, Params, RunConfig};
use crate::input::Input;
use crate::report::Report;
use crate::CliError;

pub struct Outcome {
    pub report: Report,
    pub lines: Vec<String>,
    /// Failed acceptance checks (`verify-all` only).
    pub failures: usize,
}

impl From<TransferError> for CliError {
    fn from(e: TransferError) -> Self {
        match e {
            TransferError::DimensionMismatch { .. } | TransferError::HolonomyUnavailable => {
                CliError::Config(e.to_string())
            }
            _ => CliError::Computation(e.to_string()),
        }
    }
}

impl From<CensusError> for CliError {
    fn from(e: CensusError) -> Self {
        match e {
            CensusError::WrongModel(_) | CensusError::InvalidVector | CensusError::HomologyTooSmall(_) => {
                CliError::Config(e.to_string())
            }
            _ => CliError::Computation(e.to_string()),
        }
    }
}

fn new_report(cfg: &RunConfig, input: &Input) -> Report {
    Report::new(cfg.command, &cfg.hash, Some(input.fingerprint.clone()))
}

fn model_name(m: Model) -> &'static str {
    match m {
        Model::UpperHalfPlane2D => "plane",
        Model::UpperHalfSpace3D => "space",
    }
}

fn letter_name(s: usize) -> String {
    let l = Letter::from_symbol(s);
    if l.0 > 0 {
        format!("g{}", l.0)
    } else {
        format!("g{}^-1", -l.0)
    }
}

pub fn validate(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let input = Input::from_params(&cfg.params)?;
    let mut report = new_report(cfg, &input);
    let mut lines = Vec::new();
    let certificate = match &input.group {
        Some(g) => {
            let k = g.symbol_count();
            let disks: Vec<_> = (0..k)
                .map(|s| {
                    let d = g.symbol_disk(s);
                    json!({"symbol": s, "letter": letter_name(s), "center": [d.center.re + 0.0, d.center.im + 0.0], "radius": d.radius})
                })
                .collect();
            let mut gaps = Vec::new();
            let mut closest = (f64::INFINITY, 0, 0);
            for i in 0..k {
                for j in i + 1..k {
                    let gap = g.symbol_disk(i).gap(g.symbol_disk(j));
                    if gap < closest.0 {
                        closest = (gap, i, j);
                    }
                    gaps.push(json!({"i": i, "j": j, "gap": gap}));
                }
            }
            lines.push(format!(
                "{}: valid {} Schottky group, rank {}, homology dimension {}",
                input.name,
                model_name(g.model()),
                g.rank(),
                g.homology_dim()
            ));
            for s in 0..k {
                let d = g.symbol_disk(s);
                lines.push(format!(
                    "  D{s} {:<7} center ({:.6}, {:.6})  radius {:.6}",
                    letter_name(s),
                    d.center.re + 0.0,
                    d.center.im + 0.0,
                    d.radius
                ));
            }
            lines.push(format!("  disjoint: min gap {:.6} (D{}, D{})", closest.0, closest.1, closest.2));
            lines.push("  pairing: each generator maps the outside of its source disk into its target disk".into());
            lines.push(format!("  min log-contraction of allowed branches {:.6}", g.min_contraction()));
            json!({
                "input": input.name,
                "kind": "group",
                "model": g.model(),
                "rank": g.rank(),
                "homology_dim": g.homology_dim(),
                "homology_matrix": g.homology_matrix(),
                "disks": disks,
                "gaps": gaps,
                "min_gap": closest.0,
                "pairing_verified": true,
                "homology_full_rank": true,
                "min_contraction": g.min_contraction(),
                "aperiodicity_power": input.shift.aperiodicity_power(),
            })
        }
        None => {
            let s = &input.shift;
            lines.push(format!(
                "{}: valid tabulated shift, {} symbols, homology dimension {}",
                input.name,
                s.symbol_count(),
                s.homology_dim()
            ));
            lines.push(format!("  aperiodic: A^{} > 0", s.aperiodicity_power()));
            lines.push(format!("  min roof {}", s.min_roof()));
            json!({
                "input": input.name,
                "kind": "shift",
                "symbols": s.symbol_count(),
                "homology_dim": s.homology_dim(),
                "aperiodicity_power": s.aperiodicity_power(),
                "min_roof": s.min_roof(),
                "holonomy": s.has_holonomy(),
            })
        }
    };
    report.add_json("certificate.json", &certificate);
    report.add_bytes("input.json", input.file.to_json());
    Ok(Outcome { report, lines, failures: 0 })
}

pub fn delta(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let input = Input::from_params(&cfg.params)?;
    let spec = input.operator(cfg.params.nodes_per_disk)?;
    let delta = transfer::critical_exponent(&spec)?;
    let d = input.shift.homology_dim();
    let at = transfer::leading_eigenvalue(&spec, Cx::new(delta, 0.0), &vec![0.0; d], 0)?;
    let miss = (at.lambda - Cx::new(1.0, 0.0)).norm();
    let mut report = new_report(cfg, &input);
    report.add_json(
        "summary.json",
        &json!({
            "input": input.name,
            "operator_fingerprint": spec.fingerprint(),
            "discretization": spec.discretization(),
            "delta": delta,
            "eigenvalue_defect": miss,
            "residual": at.residual,
        }),
    );
    let lines = vec![format!("delta = {delta:.15}"), format!("  |λ(δ) − 1| = {miss:.2e}")];
    Ok(Outcome { report, lines, failures: 0 })
}

pub fn pressure(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let input = Input::from_params(&cfg.params)?;
    if input.shift.homology_dim() == 0 {
        return Err(CliError::Config(format!("{}: pressure needs homology dimension ≥ 1", input.name)));
    }
    let spec = input.operator(cfg.params.nodes_per_disk)?;
    let surface = transfer::pressure_surface(&spec, cfg.params.fd_step)?;
    let mut report = new_report(cfg, &input);
    report.add_json(
        "summary.json",
        &json!({
            "input": input.name,
            "operator_fingerprint": spec.fingerprint(),
            "fd_step": cfg.params.fd_step,
            "delta": surface.delta,
            "gradient": surface.gradient,
            "hessian": surface.hessian,
            "min_hessian_eigenvalue": surface.min_hessian_eigenvalue,
            "sigma": surface.sigma,
            "c0": surface.c0,
        }),
    );
    let d = surface.gradient.len();
    let mut csv: String = (1..=d).map(|i| format!("u{i},")).collect();
    csv.push_str("pressure\n");
    for (u, p) in &surface.samples {
        for x in u {
            csv.push_str(&format!("{x},"));
        }
        csv.push_str(&format!("{p}\n"));
    }
    report.add_text("samples.csv", csv);
    let lines = vec![
        format!("delta = {:.15}", surface.delta),
        format!("  gradient {:?}", surface.gradient),
        format!("  hessian {:?}", surface.hessian),
        format!("  sigma = {:.10}  C(0) = {:.10}", surface.sigma, surface.c0),
    ];
    Ok(Outcome { report, lines, failures: 0 })
}

pub fn scan(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let p = &cfg.params;
    let input = Input::from_params(p)?;
    let spec = input.operator(p.nodes_per_disk)?;
    let delta = transfer::critical_exponent(&spec)?;
    let t_grid = transfer::linspace(p.scan_t_min, p.scan_t_max, p.scan_t_points);
    let d = input.shift.homology_dim();
    let v_grid = transfer::torus_grid(d, p.scan_v_points);
    let scan = transfer::spectral_radius_scan(&spec, delta, &t_grid, &v_grid, &p.scan_p, p.scan_margin)?;
    let mut report = new_report(cfg, &input);
    report.add_json(
        "summary.json",
        &json!({
            "input": input.name,
            "operator_fingerprint": scan.fingerprint,
            "delta": scan.delta,
            "margin": scan.margin,
            "grid": {"t": t_grid, "v_points": p.scan_v_points, "p": p.scan_p, "size": scan.rows.len()},
            "max_off_origin": scan.max_off_origin,
            "violations": scan.violations,
        }),
    );
    let mut csv = String::from("t,");
    csv.extend((1..=d).map(|i| format!("v{i},")));
    csv.push_str("p,modulus\n");
    for r in &scan.rows {
        csv.push_str(&format!("{},", r.t));
        csv.extend(r.v.iter().map(|x| format!("{x},")));
        csv.push_str(&format!("{},{}\n", r.p, r.modulus));
    }
    report.add_text("rows.csv", csv);
    let mut lines = vec![
        format!("delta = {delta:.15}, {} grid points", scan.rows.len()),
        format!("  max |λ| off the origin = {:.6} (margin {})", scan.max_off_origin, scan.margin),
    ];
    if scan.violations.is_empty() {
        lines.push("  no violations".into());
    } else {
        lines.push(format!("  {} violation(s):", scan.violations.len()));
        for v in scan.violations.iter().take(10) {
            lines.push(format!("    t = {:.6} v = {:?} p = {} |λ| = {:.9}", v.t, v.v, v.p, v.modulus));
        }
    }
    Ok(Outcome { report, lines, failures: 0 })
}

fn add_census(report: &mut Report, census: &CensusReport) -> Result<(), CliError> {
    report.add_json("census.json", census);
    let mut csv = Vec::new();
    census.write_csv(&mut csv).map_err(|e| CliError::Computation(e.to_string()))?;
    report.add_bytes("census.csv", csv);
    let mut dat = Vec::new();
    census.write_plot_data(&mut dat).map_err(|e| CliError::Computation(e.to_string()))?;
    report.add_bytes("census.dat", dat);
    Ok(())
}

fn census_lines(census: &CensusReport) -> Vec<String> {
    let mut lines = Vec::new();
    let last = census.checkpoints.len() - 1;
    lines.push(format!("checkpoint {} total {}", census.checkpoints[last], census.total[last]));
    for s in census.series.iter().take(12) {
        let ratio = s.ratios.get(last).map(|r| format!("  ratio {r:.4}")).unwrap_or_default();
        lines.push(format!("  {:<10} {:>14}{ratio}", s.label, s.counts[last]));
    }
    if census.series.len() > 12 {
        lines.push(format!("  … {} more series in the report", census.series.len() - 12));
    }
    for c in &census.characters {
        lines.push(format!("  p = {:>2}  |Σ e^(ipθ)|/count = {:.4}", c.p, c.ratio[last]));
    }
    lines
}

/// δ from the transfer operator when one exists for the input.
fn plane_delta(input: &Input, p: &Params) -> Result<Option<f64>, CliError> {
    match input.model() {
        Some(Model::UpperHalfPlane2D) => Ok(Some(transfer::critical_exponent(&input.operator(p.nodes_per_disk)?)?)),
        _ => Ok(None),
    }
}

pub fn count_orbit(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let p = &cfg.params;
    let input = Input::from_params(p)?;
    let group = input.require_group(cfg.command)?;
    let cp = census::checkpoints(p.t_max / 2.0, p.t_max, p.checkpoints);
    let delta = plane_delta(&input, p)?;
    let census = census::orbit_by_homology(group, &cp, p.classes.as_deref(), delta, p.max_points)?;
    let mut report = new_report(cfg, &input);
    add_census(&mut report, &census)?;
    Ok(Outcome { report, lines: census_lines(&census), failures: 0 })
}

pub fn count_geodesics(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let p = &cfg.params;
    let input = Input::from_params(p)?;
    let group = input.require_group(cfg.command)?;
    let cp = census::checkpoints(p.l_max / 2.0, p.l_max, p.checkpoints);
    let d = group.homology_dim();
    let prediction = match input.model() {
        Some(Model::UpperHalfPlane2D) if d == 0 => {
            Some(Prediction::absolute(transfer::critical_exponent(&input.operator(p.nodes_per_disk)?)?, 1.0, 0))
        }
        Some(Model::UpperHalfPlane2D) => {
            let s = transfer::pressure_surface(&input.operator(p.nodes_per_disk)?, p.fd_step)?;
            Some(Prediction::absolute(s.delta, s.sigma, d))
        }
        _ => None,
    };
    let classes = p.classes.clone().unwrap_or_default();
    let census = census::geodesics_by_homology(group, &cp, &classes, prediction, p.max_points)?;
    let mut report = new_report(cfg, &input);
    add_census(&mut report, &census)?;
    Ok(Outcome { report, lines: census_lines(&census), failures: 0 })
}

/// Exponent and plateau of `(log T)^{d/2}`-corrected vector counts.
#[derive(Debug, Clone, Serialize)]
pub struct VectorFit {
    pub delta: f64,
    pub exponent: f64,
    pub corrected: Vec<f64>,
    pub normalized: Vec<f64>,
    pub plateau: f64,
}

pub fn vector_fit(census: &CensusReport, d: usize, delta: f64) -> Result<VectorFit, CliError> {
    let lx: Vec<f64> = census.checkpoints.iter().map(|t| t.ln()).collect();
    let corrected: Vec<f64> = census.total.iter().zip(&lx).map(|(&n, x)| n as f64 * x.powf(d as f64 / 2.0)).collect();
    let fit = census::fit_growth(&lx, &corrected, None)?;
    let normalized: Vec<f64> = corrected.iter().zip(&lx).map(|(c, x)| c * (-delta * x).exp()).collect();
    let plateau = plateau_spread(&normalized, 3).map_err(|e| CliError::Computation(e.to_string()))?;
    Ok(VectorFit { delta, exponent: fit.exponent, corrected, normalized, plateau })
}

pub fn count_vectors(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let p = &cfg.params;
    let input = Input::from_params(p)?;
    let group = input.require_group(cfg.command)?;
    if group.model() != Model::UpperHalfPlane2D {
        return Err(CensusError::WrongModel(Model::UpperHalfPlane2D).into());
    }
    let delta = transfer::critical_exponent(&input.operator(p.nodes_per_disk)?)?;
    let cp: Vec<f64> = census::checkpoints(p.log_t_min, p.log_t_max, p.checkpoints).iter().map(|x| x.exp()).collect();
    let norm = match p.norm {
        NormArg::Euclidean => VectorNorm::Euclidean,
        NormArg::Sup => VectorNorm::Sup,
    };
    let census = census::vector_orbit(group, p.w0, norm, &cp, Some(delta), p.max_points)?;
    let mut report = new_report(cfg, &input);
    add_census(&mut report, &census)?;
    let mut lines = census_lines(&census);
    if cp.len() >= 5 {
        let fit = vector_fit(&census, group.homology_dim(), delta)?;
        lines.push(format!("  exponent {:.4} (δ = {delta:.4}), plateau spread {:.3}", fit.exponent, fit.plateau));
        report.add_json("fit.json", &fit);
    }
    Ok(Outcome { report, lines, failures: 0 })
}

pub fn holonomy(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let p = &cfg.params;
    let input = Input::from_params(p)?;
    let group = input.require_group(cfg.command)?;
    let cp = census::checkpoints(p.l_max / 2.0, p.l_max, p.checkpoints);
    let census = census::holonomy_equidistribution(group, &cp, &p.holonomy_p, p.holonomy_bins, p.max_points)?;
    let mut report = new_report(cfg, &input);
    add_census(&mut report, &census)?;
    Ok(Outcome { report, lines: census_lines(&census), failures: 0 })
}

/// Spectral side of the CLT: δ, the Hessian of the pressure and σ.
#[derive(Debug, Clone, Serialize)]
pub struct CltSpectral {
    pub delta: f64,
    pub hessian: Vec<Vec<f64>>,
    pub sigma: f64,
}

/// Sampling side of the CLT: seed, sizes and the Gaussian comparison.
#[derive(Debug, Clone, Serialize)]
pub struct CltSamples {
    pub seed: u64,
    pub trajectories: usize,
    pub steps: usize,
    pub check: GaussianCheck,
}

pub struct CltRun {
    pub spectral: CltSpectral,
    pub samples: CltSamples,
    pub draws: Vec<(f64, Vec<i64>)>,
}

pub fn run_clt(input: &Input, p: &Params, seed: u64) -> Result<CltRun, CliError> {
    if input.shift.homology_dim() == 0 {
        return Err(CliError::Config(format!("{}: the CLT needs homology dimension ≥ 1", input.name)));
    }
    let spec = input.operator(p.nodes_per_disk)?;
    let surface = transfer::pressure_surface(&spec, p.fd_step)?;
    let d = input.shift.homology_dim();
    let at = transfer::leading_eigenvalue(&spec, Cx::new(surface.delta, 0.0), &vec![0.0; d], 0)?;
    let chain = ParryChain::new(&input.shift, &at).map_err(|e| CliError::Computation(e.to_string()))?;
    let draws: Vec<(f64, Vec<i64>)> = (0..p.trajectories as u64)
        .into_par_iter()
        .map(|i| {
            let s = chain.sample_cocycle(&input.shift, p.steps, seed, i);
            (s.tau, s.f)
        })
        .collect();
    let samples: Vec<(f64, Vec<f64>)> =
        draws.iter().map(|(t, f)| (*t, f.iter().map(|&x| x as f64).collect())).collect();
    let check = clt_check(&samples, &surface.hessian).map_err(|e| CliError::Computation(e.to_string()))?;
    Ok(CltRun {
        spectral: CltSpectral { delta: surface.delta, hessian: surface.hessian, sigma: surface.sigma },
        samples: CltSamples { seed, trajectories: p.trajectories, steps: p.steps, check },
        draws,
    })
}

pub fn clt(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let p = &cfg.params;
    let seed = p.seed.ok_or_else(|| CliError::Config("`clt` samples trajectories and needs --seed".into()))?;
    let input = Input::from_params(p)?;
    let run = run_clt(&input, p, seed)?;
    let mut report = new_report(cfg, &input);
    report.add_json("summary.json", &json!({"input": input.name, "spectral": run.spectral, "samples": run.samples}));
    let d = input.shift.homology_dim();
    let mut csv = String::from("index,tau");
    csv.extend((1..=d).map(|i| format!(",f{i}")));
    csv.push('\n');
    for (i, (tau, f)) in run.draws.iter().enumerate() {
        csv.push_str(&format!("{i},{tau}"));
        csv.extend(f.iter().map(|x| format!(",{x}")));
        csv.push('\n');
    }
    report.add_text("samples.csv", csv);
    let c = &run.samples.check;
    let lines = vec![
        format!("delta = {:.15}, P''(0) = {:?}", run.spectral.delta, run.spectral.hessian),
        format!("  {} trajectories × {} steps, seed {seed}", p.trajectories, p.steps),
        format!("  empirical covariance {:?}", c.covariance),
        format!("  variance error {:.4}, KS p {:?}, χ² p {:.4}", c.variance_error(), c.ks_p, c.chi2_p),
    ];
    Ok(Outcome { report, lines, failures: 0 })
}
