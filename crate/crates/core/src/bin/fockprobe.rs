fn main() {
    let code = doubling_fock::cli::run(std::env::args_os(), &mut std::io::stderr());
    std::process::exit(code);
}
