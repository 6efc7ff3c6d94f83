//! Print the JSON schema of the suite config, or write it to a path.
//!
//!     cargo run --example config_schema -- crates/core/configs/suite.schema.json

use rwrl::suite::SuiteConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let schema = SuiteConfig::json_schema();
    match std::env::args().nth(1) {
        Some(path) => {
            std::fs::write(&path, &schema)?;
            eprintln!("wrote {path}");
        }
        None => print!("{schema}"),
    }
    Ok(())
}
