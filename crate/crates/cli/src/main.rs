fn main() {
    std::process::exit(eitsim_cli::run(std::env::args_os()));
}
