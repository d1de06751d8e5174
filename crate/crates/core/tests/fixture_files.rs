use std::path::PathBuf;

use schottky_thermo::fixtures;
use schottky_thermo::schottky::GroupFile;
use schottky_thermo::shift::ToyShiftFile;
use serde_json::Value;

fn shipped_text(name: &str) -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(format!("{name}.json"));
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn shipped(name: &str) -> Value {
    serde_json::from_str(&shipped_text(name)).unwrap()
}

fn pretty<S: serde::Serialize>(s: &S) -> String {
    serde_json::to_string_pretty(s).unwrap() + "\n"
}

#[test]
fn shipped_files_match_constructors() {
    let mut d0 = fixtures::fuchsian_pair_file(vec![]);
    d0.name = Some("fuchsian-pair-d0".into());
    let groups = [
        ("fuchsian-pair", fixtures::fuchsian_pair_file(vec![vec![1, 0]])),
        ("fuchsian-pair-d0", d0),
        ("fuchsian-triple", fixtures::fuchsian_triple_file()),
        ("kleinian-pair-d0", fixtures::kleinian_pair_file(0)),
        ("kleinian-pair-d1", fixtures::kleinian_pair_file(1)),
    ];
    for (name, file) in groups {
        assert_eq!(shipped_text(name), pretty(&file), "{name}");
        let parsed: GroupFile = serde_json::from_value(shipped(name)).unwrap();
        parsed.build::<f64>().unwrap_or_else(|e| panic!("{name}: {e}"));
    }
    assert_eq!(shipped_text("toy-two-shift"), pretty(&fixtures::toy_two_shift_file()));
    let toy: ToyShiftFile = serde_json::from_value(shipped("toy-two-shift")).unwrap();
    assert_eq!(toy.build::<f64>().unwrap().symbol_count(), 2);
}

#[test]
fn shipped_groups_have_expected_shape() {
    let b = fixtures::fuchsian_pair();
    assert_eq!((b.rank(), b.homology_dim()), (2, 1));
    let c = fixtures::fuchsian_triple();
    assert_eq!((c.rank(), c.homology_dim()), (3, 2));
    for d in [0, 1] {
        let k = fixtures::kleinian_pair(d);
        assert_eq!((k.rank(), k.homology_dim()), (2, d));
        assert!(k.min_gap() > 0.0);
    }
}
