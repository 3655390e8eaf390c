fn main() {
    std::process::exit(pmx::cli::run(std::env::args().skip(1).collect()));
}
