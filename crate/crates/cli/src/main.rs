fn main() {
    std::process::exit(relax_shock_cli::main_with_args(std::env::args_os()));
}
