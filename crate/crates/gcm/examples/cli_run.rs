//! Driving the command-line front end in-process and reading its JSON document.

use gcm::cli::{dispatch, Cli};
use clap::Parser;

fn main() -> anyhow::Result<()> {
    let cli = Cli::try_parse_from(["gcm", "forest", "--n", "4"])?;
    let outcome = dispatch(&cli)?;
    println!("{} pass={}", outcome.schema, outcome.pass);
    print!("{}", outcome.document());

    let dir = std::env::temp_dir().join("gcm-example");
    let out = dir.join("compile.json");
    let code = gcm::cli::run(["gcm", "compile", "--tree", "S1", "--out", out.to_str().unwrap()]);
    println!("exit {code}; wrote {}", out.display());
    Ok(())
}
