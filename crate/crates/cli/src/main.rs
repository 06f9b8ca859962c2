fn main() {
    std::process::exit(rashgam_cli::run(std::env::args_os()));
}
