fn main() {
    let code = quilt_cli::run(std::env::args_os());
    std::process::exit(code);
}
