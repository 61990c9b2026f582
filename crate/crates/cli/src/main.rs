fn main() {
    let code = simweight_cli::run(std::env::args_os().collect(), std::env::var_os(simweight_cli::CONFIG_ENV));
    std::process::exit(code);
}
