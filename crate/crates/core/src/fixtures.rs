//! Reference inputs shipped with the crate.
//!
//! Plane groups pair symmetric intervals `−I ↔ I` on the real axis with
//! `x ↦ c − r²/(x + c)`, which makes each configuration invariant under
//! `x ↦ −x` (conjugation by the reflection swaps every letter with its
//! inverse).

use crate::hyperbolic::Model;
use crate::schottky::{DiskSpec, GeneratorSpec, GroupFile, HomologyMatrix, Schottky};
use crate::shift::{MarkovShift, ToyShiftFile};

fn symmetric_interval(lo: f64, hi: f64) -> GeneratorSpec {
    let (c, r) = ((lo + hi) / 2.0, (hi - lo) / 2.0);
    GeneratorSpec {
        matrix: None,
        minus: DiskSpec { center: [-c, 0.0], radius: r },
        plus: DiskSpec { center: [c, 0.0], radius: r },
        twist: 0.0,
    }
}

fn space_pair(center: [f64; 2], radius: f64, twist: f64) -> GeneratorSpec {
    GeneratorSpec {
        matrix: None,
        minus: DiskSpec { center: [0.0 - center[0], 0.0 - center[1]], radius },
        plus: DiskSpec { center, radius },
        twist,
    }
}

/// Fixture (a) as data: full 2-shift, unit roof, cocycle `±1`.
pub fn toy_two_shift_file() -> ToyShiftFile {
    ToyShiftFile { name: Some("toy-two-shift".into()), ..ToyShiftFile::full_shift(2, 1.0, &[vec![1], vec![-1]]) }
}

pub fn toy_two_shift() -> MarkovShift<f64> {
    toy_two_shift_file().build().expect("reference toy shift is valid")
}

/// Fixture (b): two generators on `±[0.37, 2.95]` and `±[3.05, 8]`, homology
/// = exponent sum of the first generator.
pub fn fuchsian_pair_file(homology: HomologyMatrix) -> GroupFile {
    GroupFile {
        name: Some("fuchsian-pair".into()),
        model: Model::UpperHalfPlane2D,
        generators: vec![symmetric_interval(3.05, 8.0), symmetric_interval(0.37, 2.95)],
        homology_matrix: homology,
    }
}

pub fn fuchsian_pair() -> Schottky<f64> {
    fuchsian_pair_file(vec![vec![1, 0]]).build().expect("reference group is valid")
}

/// Fixture (b) with trivial homology, for the classical counting control.
pub fn fuchsian_pair_d0() -> Schottky<f64> {
    fuchsian_pair_file(vec![]).build().expect("reference group is valid")
}

/// Fixture (c): three generators on `±[0.3, 1]`, `±[1.2, 3]`, `±[3.5, 10]`, `d = 2`.
pub fn fuchsian_triple_file() -> GroupFile {
    GroupFile {
        name: Some("fuchsian-triple".into()),
        model: Model::UpperHalfPlane2D,
        generators: vec![symmetric_interval(0.3, 1.0), symmetric_interval(1.2, 3.0), symmetric_interval(3.5, 10.0)],
        homology_matrix: vec![vec![1, 0, 0], vec![0, 1, 0]],
    }
}

pub fn fuchsian_triple() -> Schottky<f64> {
    fuchsian_triple_file().build().expect("reference group is valid")
}

/// Fixture (d): two loxodromic generators in `PSL₂(ℂ)` with twisted pairings;
/// `d ∈ {0, 1}`.
pub fn kleinian_pair_file(d: usize) -> GroupFile {
    let homology = if d == 0 { vec![] } else { vec![vec![1, 0]] };
    GroupFile {
        name: Some(format!("kleinian-pair-d{d}")),
        model: Model::UpperHalfSpace3D,
        generators: vec![space_pair([2.2, 0.0], 1.0, 1.0), space_pair([0.3, 2.2], 1.0, 1.6)],
        homology_matrix: homology,
    }
}

pub fn kleinian_pair(d: usize) -> Schottky<f64> {
    kleinian_pair_file(d).build().expect("reference group is valid")
}
