fn main() {
    std::process::exit(finconn_cli::run(std::env::args_os()));
}
