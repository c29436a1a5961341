fn main() {
    std::process::exit(leaky_iv::cli::run(std::env::args_os()));
}
