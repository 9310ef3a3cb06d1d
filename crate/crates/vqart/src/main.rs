fn main() -> std::process::ExitCode {
    vqart::cmd::main()
}
