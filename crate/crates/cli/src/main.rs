use clap::Parser;
use phasealloc_cli::{execute, exit, Cli};

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { exit::INPUT } else { exit::OPTIMAL };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    std::process::exit(execute(cli));
}
