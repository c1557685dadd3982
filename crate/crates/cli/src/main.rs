fn main() {
    std::process::exit(mac_cli::run(std::env::args_os()));
}
