fn main() {
    std::process::exit(phasornet::cli::run(std::env::args_os()));
}
