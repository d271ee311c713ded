fn main() {
    std::process::exit(ringlattice::cli::run(std::env::args_os()));
}
