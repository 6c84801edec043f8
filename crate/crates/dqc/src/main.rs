use std::process::ExitCode;

fn main() -> ExitCode {
    dqc::cli::main()
}
