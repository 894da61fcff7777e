fn main() {
    std::process::exit(motionkit::cli::run(std::env::args_os()));
}
