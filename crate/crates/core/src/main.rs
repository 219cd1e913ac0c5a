fn main() -> std::process::ExitCode {
    moment_spectra::cli::main()
}
