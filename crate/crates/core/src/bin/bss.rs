fn main() {
    std::process::exit(bss::cli::run(std::env::args_os()));
}
