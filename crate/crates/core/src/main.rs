fn main() {
    std::process::exit(nomarg::cli::run(std::env::args_os()));
}
