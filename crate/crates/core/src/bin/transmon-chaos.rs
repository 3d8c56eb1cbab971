fn main() {
    std::process::exit(transmon_chaos::cli::main_with_args(std::env::args_os()));
}
