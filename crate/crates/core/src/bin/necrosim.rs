fn main() {
    std::process::exit(necrosim::cli::run_cli(std::env::args_os()));
}
