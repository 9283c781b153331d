//! Pairwise and progressive alignment, then column-wise ambiguity
//! resolution.
//!
//! cargo run --example align_sequences -- [FASTA]

use mutarate::align::{pairwise_align, ScoringScheme};
use mutarate::dataset::{parse_fasta, SequenceRecord};
use mutarate::msa::{progressive_align, resolve_ambiguities_logged};

fn main() -> anyhow::Result<()> {
    let scheme = ScoringScheme::default();
    let records = match std::env::args().nth(1) {
        Some(path) => parse_fasta(&std::fs::read_to_string(path)?)?,
        None => vec![
            SequenceRecord::new("s1", "ACGTTGCAAGGCT"),
            SequenceRecord::new("s2", "ACGTGCAAGRCT"),
            SequenceRecord::new("s3", "ACCTTGCAAGGCTA"),
            SequenceRecord::new("s4", "ACGTTGCNAGGCT"),
        ],
    };

    let pair = pairwise_align(&records[0].residues, &records[1].residues, &scheme)?;
    println!("pairwise score {}\n  {}\n  {}\n", pair.score, pair.aligned_a, pair.aligned_b);

    let msa = progressive_align(&records, &scheme)?;
    println!("progressive alignment, width {}", msa.width());
    for row in &msa.rows {
        println!("  {:<6} {}", row.label, row.as_str());
    }

    let (resolved, log) = resolve_ambiguities_logged(&msa);
    for r in &log {
        println!("  {} column {}: {} -> {}", r.label, r.column, r.from, r.to);
    }
    println!("resolved:");
    for row in &resolved.rows {
        println!("  {:<6} {}", row.label, row.as_str());
    }
    Ok(())
}
