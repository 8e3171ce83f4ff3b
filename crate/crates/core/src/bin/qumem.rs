fn main() -> std::process::ExitCode {
    qumem::cli::main_with_args(std::env::args_os())
}
