fn main() {
    std::process::exit(ban_evasion::cli::run(std::env::args_os()));
}
