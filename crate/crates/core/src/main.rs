fn main() {
    std::process::exit(seedpart::cli::main_with_args(std::env::args_os()));
}
