fn main() {
    std::process::exit(kernelspect::run(std::env::args_os()));
}
