fn main() {
    std::process::exit(wadmm_cli::run(std::env::args_os()));
}
