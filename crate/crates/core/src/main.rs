fn main() {
    std::process::exit(dslab::cli::run(std::env::args_os()));
}
