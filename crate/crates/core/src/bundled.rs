//! The NS5B HCV-4a accession list shipped with the crate.
//!
//! Only accessions are bundled; sequences come from a snapshot directory or
//! an efetch download.

use crate::dataset::{load_manifest, DatasetManifest};

pub const NS5B_MANIFEST_TSV: &str = include_str!("../data/ns5b_manifest.tsv");

/// Origin of the time axis used for this dataset.
pub const NS5B_REFERENCE_DATE: &str = "2007-03-23";

pub fn ns5b_manifest() -> DatasetManifest {
    load_manifest(NS5B_MANIFEST_TSV).expect("bundled manifest is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn group_sizes() {
        let m = ns5b_manifest();
        let sizes: Vec<(i32, usize)> = m.groups.iter().map(|(y, g)| (*y, g.len())).collect();
        assert_eq!(sizes, vec![(2007, 17), (2008, 35), (2009, 35), (2010, 11)]);
        assert_eq!(m.reference_year, 2007);
        assert!(m.entries().any(|(_, e)| e.accession == "B470039"));
        assert_eq!(m.groups[&2007][0].accession, "DQ911222");
    }
}
