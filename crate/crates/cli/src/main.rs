fn main() {
    std::process::exit(gsmask_cli::run(std::env::args_os()));
}
