fn main() -> std::process::ExitCode {
    enerlyze::cli::main()
}
