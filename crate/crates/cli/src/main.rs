fn main() {
    std::process::exit(rlihf_cli::run());
}
