fn main() {
    std::process::exit(rovist::cli::run(std::env::args_os()));
}
