fn main() {
    std::process::exit(tcm::run_cli(std::env::args_os().skip(1)));
}
