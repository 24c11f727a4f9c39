fn main() {
    let (code, _) = deformed_sine_cli::run_command(std::env::args_os());
    std::process::exit(code);
}
