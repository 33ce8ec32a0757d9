fn main() {
    env_logger::init();
    std::process::exit(ratelab::cli::run(std::env::args_os()));
}
