fn main() {
    std::process::exit(veckin::cli::main_with(std::env::args_os()));
}
