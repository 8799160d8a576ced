fn main() {
    std::process::exit(gcm::cli::run(std::env::args_os()));
}
