fn main() {
    std::process::exit(aggro::harness::run_cli(std::env::args_os()));
}
