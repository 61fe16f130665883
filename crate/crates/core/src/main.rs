fn main() {
    std::process::exit(sysrisk::cli::run());
}
