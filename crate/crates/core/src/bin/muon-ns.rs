fn main() {
    std::process::exit(muon_ns::cli::main_with_args(std::env::args_os()));
}
