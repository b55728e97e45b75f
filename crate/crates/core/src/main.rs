fn main() {
    std::process::exit(funcsel::cli::run(std::env::args_os()));
}
