fn main() {
    std::process::exit(qbethe_cli::run(std::env::args_os()));
}
