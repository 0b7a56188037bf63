fn main() {
    std::process::exit(satrules::cli::run(std::env::args_os()));
}
