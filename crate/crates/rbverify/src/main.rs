fn main() {
    std::process::exit(rbverify::cli::run());
}
