fn main() {
    std::process::exit(bandedge::cli::main_with_args(std::env::args_os()));
}
