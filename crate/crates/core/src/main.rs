fn main() -> std::process::ExitCode {
    amm_sim::cli::main()
}
