fn main() {
    let code = lapformer::cli::dispatch(std::env::args_os(), &mut std::io::stdout());
    std::process::exit(code);
}
