fn main() {
    std::process::exit(hypercs::cli::run(std::env::args_os()));
}
