//! Cross-module checks: coding, transfer operator, enumeration and sampling
//! have to agree with each other on the reference groups.

use schottky_thermo::census::{self, Prediction};
use schottky_thermo::fixtures;
use schottky_thermo::shift::{MarkovShift, ParryChain};
use schottky_thermo::stats::clt_check;
use schottky_thermo::transfer::{self, Discretization, OperatorSpec};
use schottky_thermo::Cx;

fn collocated(g: &schottky_thermo::SchottkyGroup) -> OperatorSpec<f64> {
    OperatorSpec::new(MarkovShift::from_schottky(g).unwrap(), Discretization::Collocation { nodes_per_disk: 32 })
        .unwrap()
}

#[test]
fn orbit_growth_tracks_critical_exponent() {
    let g = fixtures::fuchsian_pair();
    let delta = transfer::critical_exponent(&collocated(&g)).unwrap();
    let cp = census::checkpoints(6.0, 12.0, 10);
    let r = census::orbit_by_homology(&g, &cp, Some(&[]), None, u64::MAX).unwrap();
    let counts: Vec<f64> = r.total[5..].iter().map(|&c| c as f64).collect();
    let slope = census::fit_growth(&cp[5..], &counts, None).unwrap().exponent;
    assert!((slope - delta).abs() < 3e-2, "slope {slope} vs δ {delta}");
}

#[test]
fn closed_geodesics_match_classical_count() {
    let g = fixtures::fuchsian_pair_d0();
    let delta = transfer::critical_exponent(&collocated(&g)).unwrap();
    let cp = census::checkpoints(9.0, 18.0, 5);
    let r = census::geodesics_by_homology(&g, &cp, &[], Some(Prediction::absolute(delta, 1.0, 0)), u64::MAX).unwrap();
    let top = *r.series[0].ratios.last().unwrap();
    assert!((0.8..1.4).contains(&top), "ratio {top}");
}

#[test]
fn every_class_is_counted_once() {
    let g = fixtures::fuchsian_triple();
    let cp = census::checkpoints(4.0, 9.0, 6);
    let r = census::orbit_by_homology(&g, &cp, None, None, u64::MAX).unwrap();
    for i in 0..cp.len() {
        assert_eq!(r.series.iter().map(|s| s.counts[i]).sum::<u64>(), r.total[i]);
    }
}

#[test]
fn parry_samples_on_the_toy_have_unit_variance() {
    let shift = fixtures::toy_two_shift();
    let spec = OperatorSpec::new(shift.clone(), Discretization::ExactMatrix).unwrap();
    let delta = transfer::critical_exponent(&spec).unwrap();
    let at = transfer::leading_eigenvalue(&spec, Cx::new(delta, 0.0), &[0.0], 0).unwrap();
    let chain = ParryChain::new(&shift, &at).unwrap();
    let samples: Vec<(f64, Vec<f64>)> = (0..2000)
        .map(|i| {
            let s = chain.sample_cocycle(&shift, 400, 7, i);
            (s.tau, s.f.iter().map(|&x| x as f64).collect())
        })
        .collect();
    let check = clt_check(&samples, &[vec![1.0]]).unwrap();
    assert!(check.variance_error() < 0.1, "{:?}", check.covariance);
}
