fn main() {
    std::process::exit(markov_llt::cli::run_from_args(std::env::args_os()));
}
