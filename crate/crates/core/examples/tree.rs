//! Neighbor joining on a distance matrix, rerooting and Newick output.
//!
//! cargo run --example tree -- [MATRIX_TSV] [REROOT_LABEL]

use mutarate::distance::DistanceMatrix;
use mutarate::phylo::{neighbor_joining, parse_newick, to_newick};

// Jukes-Cantor distances between the four yearly representatives of the
// HCV-4a NS5B data.
const REFERENCE: &str = "\t2007\t2008\t2009\t2010
2007\t0\t0.1077\t0.1942\t0.1009
2008\t0.1077\t0\t0.184\t0.0579
2009\t0.1942\t0.184\t0\t0.1956
2010\t0.1009\t0.0579\t0.1956\t0
";

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let text = match args.next() {
        Some(path) => std::fs::read_to_string(path)?,
        None => REFERENCE.to_string(),
    };
    let d = DistanceMatrix::from_tsv(&text)?;
    let root_at = args.next().unwrap_or_else(|| d.labels[0].clone());

    let t = neighbor_joining(&d)?;
    println!("unrooted: {}", to_newick(&t));
    for e in t.clamp_events() {
        println!("clamped limb {} above {:?}", e.raw_length, e.descendants);
    }
    for split in t.splits() {
        println!("split {split:?}");
    }
    let rerooted = t.reroot(&root_at)?;
    let newick = to_newick(&rerooted);
    println!("rooted at {root_at}: {newick}");

    let back = parse_newick(&newick)?;
    let labels = d.labels.clone();
    let paths = back.path_length_matrix(&labels)?;
    println!("\nleaf-to-leaf path lengths after a Newick round trip");
    for (l, row) in labels.iter().zip(&paths) {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.4}")).collect();
        println!("{l}\t{}", cells.join("\t"));
    }
    Ok(())
}
