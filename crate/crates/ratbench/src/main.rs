fn main() -> std::process::ExitCode {
    ratbench::cli::main()
}
