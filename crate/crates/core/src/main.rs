fn main() {
    std::process::exit(centerward::cli::run(std::env::args_os()));
}
