fn main() {
    std::process::exit(lm_shooter::cli::run());
}
