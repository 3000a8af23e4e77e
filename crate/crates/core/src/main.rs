fn main() {
    std::process::exit(mixlasso::harness::cli::run(std::env::args_os()));
}
