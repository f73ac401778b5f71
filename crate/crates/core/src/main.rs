fn main() {
    std::process::exit(slagcond::cli::run(std::env::args_os()));
}
