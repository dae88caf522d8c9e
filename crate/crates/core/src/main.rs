fn main() {
    std::process::exit(fermisea::cli::run(std::env::args_os()));
}
