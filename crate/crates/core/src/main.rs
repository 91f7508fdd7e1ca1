fn main() {
    std::process::exit(holderlab::cli::run(std::env::args_os()));
}
