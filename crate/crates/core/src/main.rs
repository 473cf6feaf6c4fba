fn main() {
    std::process::exit(prunefield::cli::run(std::env::args_os()));
}
