fn main() {
    std::process::exit(duplexnet::cli::main(std::env::args_os()));
}
