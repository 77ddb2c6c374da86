//! Runs every stage from raw CSV tables to the text report, the same work
//! as `creditshap run`.
//!
//! ```text
//! cargo run --release --example pipeline -- [out_dir]
//! ```

use std::path::PathBuf;

use creditshap::cli::{run_pipeline, PipelineConfig};
use creditshap::synthetic::{generate_ledger, write_source_tables, LedgerConfig};

fn main() -> creditshap::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "pipeline_out".into()));
    let data = out.join("data");
    write_source_tables(&generate_ledger(&LedgerConfig::default())?, &data)?;

    let mut config = PipelineConfig::from_json_str(r#"{"seed": 1, "resampling.strategy": "smote"}"#)?;
    config.data_dir = Some(data);
    config.out_dir = out.join("run");
    println!("config hash {}", config.hash());
    for path in run_pipeline(config)? {
        println!("{}", path.display());
    }
    Ok(())
}
