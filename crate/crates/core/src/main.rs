fn main() {
    std::process::exit(routine_dynamics::cli::run(std::env::args_os()));
}
