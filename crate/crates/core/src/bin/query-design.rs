fn main() {
    std::process::exit(query_design::cli::run(std::env::args_os()));
}
