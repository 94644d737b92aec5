fn main() {
    std::process::exit(few::harness::cli::run(std::env::args_os()));
}
