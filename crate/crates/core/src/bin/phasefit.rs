fn main() -> std::process::ExitCode {
    phasefit::cli::main()
}
