//! Command-line workflows over the `twofactor` library.

pub mod args;
pub mod commands;
pub mod output;
pub mod pipeline;

use serde_json::{json, Value};

pub use args::Cli;
pub use commands::{run, Report};

/// Machine-readable description of a failed invocation.
pub fn error_json(subcommand: &str, err: &anyhow::Error) -> Value {
    let kind = if let Some(e) = err.downcast_ref::<twofactor::Error>() {
        variant_name(&format!("{e:?}"))
    } else if err.downcast_ref::<std::io::Error>().is_some() {
        "Io".to_string()
    } else if err.downcast_ref::<serde_json::Error>().is_some() {
        "Json".to_string()
    } else {
        "Usage".to_string()
    };
    json!({
        "error": {
            "kind": kind,
            "message": format!("{err:#}"),
        },
        "subcommand": subcommand,
    })
}

fn variant_name(debug: &str) -> String {
    debug
        .split(|c: char| !c.is_alphanumeric() && c != '_')
        .next()
        .unwrap_or("Error")
        .to_string()
}
