fn main() {
    std::process::exit(qsep_cli::main_with(std::env::args_os()));
}
