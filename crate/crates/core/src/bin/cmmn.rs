fn main() {
    std::process::exit(cmmn::cli::run(std::env::args_os()));
}
