fn main() {
    std::process::exit(semidim::main_with_args(std::env::args_os()));
}
