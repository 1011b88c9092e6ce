fn main() {
    std::process::exit(pafr::cli::run(std::env::args_os()));
}
