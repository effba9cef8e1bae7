fn main() {
    std::process::exit(macproj_cli::run(std::env::args_os()));
}
