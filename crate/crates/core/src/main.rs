fn main() {
    std::process::exit(hypograph::cli::run(std::env::args_os()));
}
