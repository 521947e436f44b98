fn main() {
    std::process::exit(opnorm_cli::main_with(std::env::args_os()));
}
