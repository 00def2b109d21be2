fn main() {
    std::process::exit(infomech::cli::main_with_args(std::env::args_os()));
}
