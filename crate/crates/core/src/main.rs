fn main() {
    std::process::exit(newton_infer::cli::run(std::env::args_os()));
}
