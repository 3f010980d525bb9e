fn main() {
    std::process::exit(subseg::cli::run(std::env::args_os()));
}
