fn main() {
    std::process::exit(scenemem::cli::run(std::env::args_os()));
}
