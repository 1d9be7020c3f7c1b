fn main() {
    std::process::exit(lqdemix::cli::main_with_args(std::env::args_os()));
}
