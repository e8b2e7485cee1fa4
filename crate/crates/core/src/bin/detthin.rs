fn main() {
    env_logger::init();
    std::process::exit(detthin::cli::run(std::env::args_os()));
}
