fn main() {
    std::process::exit(phytotwin::cli::main_with_args(std::env::args_os()));
}
