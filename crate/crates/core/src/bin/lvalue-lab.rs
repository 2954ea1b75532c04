fn main() {
    let stdout = std::io::stdout();
    let code = lvalue_lab::cli::run(std::env::args_os(), &mut stdout.lock());
    std::process::exit(code);
}
