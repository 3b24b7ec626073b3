use clap::error::ErrorKind;
use clap::Parser;

use schurflow_cli::commands::{run, Cli};

fn fail(msg: &str) -> ! {
    eprintln!("error: {}", msg.replace('\n', " "));
    std::process::exit(1);
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => e.exit(),
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments");
            fail(first.trim_start_matches("error: "))
        }
    };
    if let Err(e) = run(cli) {
        fail(&format!("{e:#}"));
    }
}
