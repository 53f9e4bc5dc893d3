fn main() {
    std::process::exit(evtcn::cli::main_with_args(std::env::args_os()));
}
