fn main() {
    std::process::exit(weylscope::cli::main_with_args(std::env::args_os()));
}
