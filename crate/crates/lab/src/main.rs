fn main() {
    tacsyn::cli::init_logging();
    std::process::exit(tacsyn::cli::main_with(std::env::args_os()));
}
