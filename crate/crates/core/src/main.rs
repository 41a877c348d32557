fn main() -> std::process::ExitCode {
    chain_ribbons::cli::main()
}
