fn main() {
    std::process::exit(rslbfgs::harness::main_with_args(std::env::args_os()));
}
