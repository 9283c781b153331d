//! Substitution distances between aligned pairs and a full matrix with
//! pairwise deletion.
//!
//! cargo run --example distances -- [FASTA] [jc|kimura|p-distance]

use mutarate::align::ScoringScheme;
use mutarate::distance::{compare_sites, jukes_cantor, kimura, DistanceMethod};
use mutarate::pipeline::distances_from_fasta;

const DEMO: &str = ">2007|a|2007\nACGTTGCAAGGCTAGCTAGGATCCA\n\
>2008|b|2008\nACGTTGCAGGGCTAGCTAGGATCTA\n\
>2009|c|2009\nACGTTACAGGGCTCGCTAGGATCTA\n\
>2010|d|2010\nACGCTGCAGGGCTAGCTAGATCTA\n";

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let text = match args.next() {
        Some(path) => std::fs::read_to_string(path)?,
        None => DEMO.to_string(),
    };
    let method: DistanceMethod = args.next().as_deref().unwrap_or("jc").parse()?;

    let c = compare_sites("ACGTTGCAAG-CT", "GCGTTACAAGTCA")?;
    println!(
        "sites {} transitions {} transversions {}: JC {:.4}, Kimura {:.4}",
        c.sites,
        c.transitions,
        c.transversions,
        jukes_cantor(&c)?,
        kimura(&c)?
    );

    let m = distances_from_fasta(&text, method, &ScoringScheme::default())?;
    println!("\n{method} distances");
    print!("{}", m.to_tsv());
    Ok(())
}
