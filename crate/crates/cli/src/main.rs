fn main() {
    std::process::exit(i32::from(bilevel_cli::run_from(std::env::args_os())));
}
