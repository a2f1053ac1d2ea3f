use std::process::ExitCode;

fn main() -> ExitCode {
    jump_kelly::cli::main()
}
