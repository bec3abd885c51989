fn main() {
    std::process::exit(lowrank::cli::main_exit_code());
}
