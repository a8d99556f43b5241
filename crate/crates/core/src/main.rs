fn main() {
    std::process::exit(scorelab::cli::run(std::env::args_os()));
}
