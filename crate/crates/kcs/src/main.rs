fn main() {
    std::process::exit(kcs::cli::run(std::env::args_os()));
}
