fn main() {
    std::process::exit(scalekernel_cli::run(std::env::args_os()));
}
