fn main() {
    std::process::exit(rothman::cli::run(std::env::args_os()));
}
