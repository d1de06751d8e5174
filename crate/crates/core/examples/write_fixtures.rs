//! Writes the reference inputs as JSON files into the given directory.

use std::path::PathBuf;

use schottky_thermo::fixtures;

fn main() -> std::io::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "fixtures".into()));
    std::fs::create_dir_all(&dir)?;
    let write = |name: &str, json: String| std::fs::write(dir.join(format!("{name}.json")), json + "\n");
    write("toy-two-shift", serde_json::to_string_pretty(&fixtures::toy_two_shift_file())?)?;
    write("fuchsian-pair", serde_json::to_string_pretty(&fixtures::fuchsian_pair_file(vec![vec![1, 0]]))?)?;
    let mut d0 = fixtures::fuchsian_pair_file(vec![]);
    d0.name = Some("fuchsian-pair-d0".into());
    write("fuchsian-pair-d0", serde_json::to_string_pretty(&d0)?)?;
    write("fuchsian-triple", serde_json::to_string_pretty(&fixtures::fuchsian_triple_file())?)?;
    for d in [0, 1] {
        write(&format!("kleinian-pair-d{d}"), serde_json::to_string_pretty(&fixtures::kleinian_pair_file(d))?)?;
    }
    Ok(())
}
