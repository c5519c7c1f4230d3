fn main() {
    std::process::exit(mems_cli::main_with(std::env::args_os()));
}
