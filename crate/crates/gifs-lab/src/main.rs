fn main() -> std::process::ExitCode {
    gifs_lab::cli::run(std::env::args_os())
}
