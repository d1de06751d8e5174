fn main() {
    std::process::exit(schottky_thermo_cli::run(std::env::args_os()));
}
