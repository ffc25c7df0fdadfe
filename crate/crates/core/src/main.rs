fn main() {
    foramtrace::cli::init_logging();
    std::process::exit(foramtrace::cli::run(std::env::args_os()));
}
