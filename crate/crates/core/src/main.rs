fn main() {
    std::process::exit(sensornet::cli::main_with_args(std::env::args_os()));
}
