fn main() {
    std::process::exit(measure_times::cli::run(std::env::args_os()));
}
