fn main() {
    std::process::exit(wayforge::cli::run(std::env::args_os()));
}
