fn main() {
    std::process::exit(distbh_core::harness::cli_main(std::env::args_os()));
}
