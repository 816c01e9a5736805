use std::process::ExitCode;

fn main() -> ExitCode {
    cuboid3d_cli::main_with_args(std::env::args_os())
}
