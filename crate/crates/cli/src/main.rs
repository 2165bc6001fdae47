use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use serde_json::json;
use twofactor_cli::{error_json, run, Cli};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            e.exit()
        }
        Err(e) => {
            let doc = json!({ "error": { "kind": "Usage", "message": e.to_string().trim_end() } });
            eprintln!("{doc}");
            return ExitCode::from(2);
        }
    };
    match run(&cli) {
        Ok(report) => {
            for line in report.lines {
                println!("{line}");
            }
            ExitCode::SUCCESS
        }
        Err(err) => {
            let doc = error_json(cli.command.name(), &err);
            eprintln!(
                "{}",
                serde_json::to_string(&doc).expect("json values serialize")
            );
            ExitCode::FAILURE
        }
    }
}
