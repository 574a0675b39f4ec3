fn main() {
    std::process::exit(normsol::run_cli(std::env::args_os()));
}
