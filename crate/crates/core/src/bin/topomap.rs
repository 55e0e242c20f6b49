fn main() -> std::process::ExitCode {
    topomap::cli::run(std::env::args_os())
}
