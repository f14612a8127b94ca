fn main() {
    std::process::exit(fedkan_cli::main_with_args(std::env::args_os()));
}
