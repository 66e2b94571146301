fn main() {
    std::process::exit(typematch::cli::run(std::env::args_os()));
}
