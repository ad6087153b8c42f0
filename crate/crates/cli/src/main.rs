fn main() {
    std::process::exit(interdict_cli::run(std::env::args_os()));
}
