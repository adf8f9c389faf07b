fn main() {
    std::process::exit(qclass::cli::run(std::env::args_os()));
}
