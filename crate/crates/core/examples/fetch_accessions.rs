//! Download the bundled accession list (or the given accessions) into a
//! snapshot directory. Needs network access to the efetch endpoint.
//!
//! cargo run --example fetch_accessions -- SNAPSHOT_DIR [ACCESSION...]

use std::path::PathBuf;

use mutarate::bundled::ns5b_manifest;
use mutarate::fetch::{fetch_genbank, DEFAULT_EFETCH_ENDPOINT};

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "ns5b-snapshot".into()));
    let mut accessions: Vec<String> = args.collect();
    if accessions.is_empty() {
        accessions = ns5b_manifest()
            .entries()
            .map(|(_, e)| e.accession.clone())
            .collect();
    }
    let endpoint = std::env::var("MUTARATE_EFETCH").unwrap_or_else(|_| DEFAULT_EFETCH_ENDPOINT.into());

    let out = fetch_genbank(&accessions, &endpoint, &dir)?;
    println!(
        "{} downloaded, {} already in {}, {} not found",
        out.downloaded.len(),
        out.from_snapshot.len(),
        dir.display(),
        out.misses.len()
    );
    if !out.misses.is_empty() {
        println!("missing: {}", out.misses.join(", "));
    }
    println!(
        "\nrun the pipeline on it with:\n  mutarate pipeline --config cfg.json --bundled-manifest --snapshot-dir {}",
        dir.display()
    );
    Ok(())
}
