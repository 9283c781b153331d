//! Year-tagged sequence records, the dataset manifest, FASTA I/O and
//! manifest/record cross-validation.
//!
//! FASTA headers carry `label|accession|year[|date]`. A header without a
//! pipe is read as a bare accession (GenBank style, version suffix dropped);
//! such records get their label and year from the manifest.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nucleotide::{is_ambiguity, is_residue, GAP};

const FASTA_LINE_WIDTH: usize = 70;
const DATE_FORMAT: &str = "%Y-%m-%d";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceRecord {
    pub accession: String,
    pub label: String,
    pub year: Option<i32>,
    pub collection_date: Option<NaiveDate>,
    /// Uppercase residues over `ACGT` plus IUPAC ambiguity codes.
    pub residues: String,
}

impl SequenceRecord {
    /// Record whose label doubles as its accession; mostly for tests and
    /// simulated data.
    pub fn new(label: impl Into<String>, residues: impl Into<String>) -> Self {
        let label = label.into();
        SequenceRecord {
            accession: label.clone(),
            label,
            year: None,
            collection_date: None,
            residues: residues.into(),
        }
    }

    pub fn with_year(mut self, year: i32) -> Self {
        self.year = Some(year);
        self
    }

    pub fn header(&self) -> String {
        match self.year {
            Some(year) => {
                let mut h = format!("{}|{}|{}", self.label, self.accession, year);
                if let Some(date) = self.collection_date {
                    let _ = write!(h, "|{}", date.format(DATE_FORMAT));
                }
                h
            }
            None => self.accession.clone(),
        }
    }
}

fn parse_date(s: &str) -> Option<NaiveDate> {
    NaiveDate::parse_from_str(s.trim(), DATE_FORMAT).ok()
}

fn strip_version(accession: &str) -> &str {
    match accession.rsplit_once('.') {
        Some((base, version))
            if !base.is_empty()
                && !version.is_empty()
                && version.bytes().all(|b| b.is_ascii_digit()) =>
        {
            base
        }
        _ => accession,
    }
}

struct RawEntry {
    header: String,
    header_line: usize,
    body: String,
}

fn split_entries(text: &str) -> Result<Vec<RawEntry>> {
    let mut entries: Vec<RawEntry> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.trim();
        if let Some(header) = line.strip_prefix('>') {
            entries.push(RawEntry {
                header: header.trim().to_string(),
                header_line: line_no,
                body: String::new(),
            });
        } else if line.is_empty() {
            continue;
        } else if let Some(entry) = entries.last_mut() {
            entry
                .body
                .extend(line.chars().filter(|c| !c.is_whitespace()));
        } else {
            return Err(Error::MalformedHeader {
                line: line_no,
                reason: "sequence data before the first header".into(),
            });
        }
    }
    Ok(entries)
}

fn parse_header(
    header: &str,
    line: usize,
) -> Result<(String, String, Option<i32>, Option<NaiveDate>)> {
    let malformed = |reason: String| Error::MalformedHeader { line, reason };
    if header.is_empty() {
        return Err(malformed("empty header".into()));
    }
    if !header.contains('|') {
        let token = header.split_whitespace().next().unwrap_or_default();
        let accession = strip_version(token).to_string();
        return Ok((accession.clone(), accession, None, None));
    }
    let fields: Vec<&str> = header.split('|').map(str::trim).collect();
    if !(3..=4).contains(&fields.len()) {
        return Err(malformed(format!(
            "expected label|accession|year[|date], got {} fields",
            fields.len()
        )));
    }
    if fields[0].is_empty() || fields[1].is_empty() {
        return Err(malformed("empty label or accession".into()));
    }
    let year = fields[2]
        .parse::<i32>()
        .map_err(|_| malformed(format!("year {:?} is not an integer", fields[2])))?;
    let date = match fields.get(3) {
        Some(d) => Some(parse_date(d).ok_or_else(|| malformed(format!("bad date {d:?}")))?),
        None => None,
    };
    Ok((
        fields[0].to_string(),
        fields[1].to_string(),
        Some(year),
        date,
    ))
}

fn normalize_residues(label: &str, body: &str, allow_gaps: bool) -> Result<String> {
    let upper = body.to_ascii_uppercase();
    for (i, b) in upper.bytes().enumerate() {
        if !(is_residue(b) || (allow_gaps && b == GAP)) {
            return Err(Error::InvalidResidue {
                label: label.to_string(),
                position: i + 1,
                character: b as char,
            });
        }
    }
    if upper.is_empty() {
        return Err(Error::EmptySequence {
            label: label.to_string(),
        });
    }
    Ok(upper)
}

pub(crate) fn parse_fasta_impl(text: &str, allow_gaps: bool) -> Result<Vec<SequenceRecord>> {
    let mut seen = HashSet::new();
    let mut records = Vec::new();
    for entry in split_entries(text)? {
        let (label, accession, year, collection_date) =
            parse_header(&entry.header, entry.header_line)?;
        let residues = normalize_residues(&label, &entry.body, allow_gaps)?;
        if !seen.insert(accession.clone()) {
            return Err(Error::DuplicateAccession(accession));
        }
        records.push(SequenceRecord {
            accession,
            label,
            year,
            collection_date,
            residues,
        });
    }
    Ok(records)
}

/// Parses unaligned FASTA. Residues are uppercased and wrapped lines joined.
pub fn parse_fasta(text: &str) -> Result<Vec<SequenceRecord>> {
    parse_fasta_impl(text, false)
}

pub fn write_fasta(records: &[SequenceRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push('>');
        out.push_str(&r.header());
        out.push('\n');
        for chunk in r.residues.as_bytes().chunks(FASTA_LINE_WIDTH) {
            out.push_str(std::str::from_utf8(chunk).expect("ASCII residues"));
            out.push('\n');
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub label: String,
    pub accession: String,
    pub date: Option<NaiveDate>,
}

/// Year → ordered `(label, accession)` groups. Intra-group order is the file
/// order and is what downstream tie-breaking relies on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub groups: BTreeMap<i32, Vec<ManifestEntry>>,
    pub reference_year: i32,
    pub reference_date: Option<NaiveDate>,
}

/// Parses the manifest TSV: `label<TAB>accession<TAB>year[<TAB>date]`, with
/// `#` comment lines and blank lines skipped.
pub fn load_manifest(text: &str) -> Result<DatasetManifest> {
    let mut groups: BTreeMap<i32, Vec<ManifestEntry>> = BTreeMap::new();
    let mut labels = HashSet::new();
    let mut accessions = HashSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim_end_matches(['\r', '\n']);
        if trimmed.trim().is_empty() || trimmed.trim_start().starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split('\t').map(str::trim).collect();
        if !(3..=4).contains(&fields.len()) {
            return Err(Error::Manifest {
                line,
                reason: format!("expected 3 or 4 tab-separated fields, got {}", fields.len()),
            });
        }
        let (label, accession) = (fields[0], fields[1]);
        if label.is_empty() || accession.is_empty() {
            return Err(Error::Manifest {
                line,
                reason: "empty label or accession".into(),
            });
        }
        let year: i32 = fields[2].parse().map_err(|_| Error::Manifest {
            line,
            reason: format!("year {:?} is not an integer", fields[2]),
        })?;
        let date = match fields.get(3).filter(|d| !d.is_empty()) {
            Some(d) => Some(parse_date(d).ok_or_else(|| Error::Manifest {
                line,
                reason: format!("bad date {d:?}"),
            })?),
            None => None,
        };
        if !labels.insert(label.to_string()) {
            return Err(Error::DuplicateLabel(label.to_string()));
        }
        if !accessions.insert(accession.to_string()) {
            return Err(Error::DuplicateAccession(accession.to_string()));
        }
        groups.entry(year).or_default().push(ManifestEntry {
            label: label.to_string(),
            accession: accession.to_string(),
            date,
        });
    }
    if groups.len() < 2 {
        return Err(Error::TooFewYears(groups.len()));
    }
    let reference_year = *groups.keys().next().expect("at least two groups");
    Ok(DatasetManifest {
        groups,
        reference_year,
        reference_date: None,
    })
}

impl DatasetManifest {
    pub fn with_reference_year(mut self, year: i32) -> Result<Self> {
        if !self.groups.contains_key(&year) {
            return Err(Error::MissingReference(year));
        }
        self.reference_year = year;
        Ok(self)
    }

    pub fn with_reference_date(mut self, date: NaiveDate) -> Self {
        self.reference_date = Some(date);
        self
    }

    pub fn years(&self) -> impl Iterator<Item = i32> + '_ {
        self.groups.keys().copied()
    }

    /// All entries in (year, file order).
    pub fn entries(&self) -> impl Iterator<Item = (i32, &ManifestEntry)> + '_ {
        self.groups
            .iter()
            .flat_map(|(&y, es)| es.iter().map(move |e| (y, e)))
    }

    pub fn len(&self) -> usize {
        self.groups.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Origin of the time axis: the explicit reference date, else March 23
    /// of the reference year.
    pub fn resolved_reference_date(&self) -> NaiveDate {
        self.reference_date.unwrap_or_else(|| {
            NaiveDate::from_ymd_opt(self.reference_year, 3, 23).expect("valid date")
        })
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("# label\taccession\tyear\tdate\n");
        for (year, e) in self.entries() {
            let _ = write!(out, "{}\t{}\t{}", e.label, e.accession, year);
            if let Some(d) = e.date {
                let _ = write!(out, "\t{}", d.format(DATE_FORMAT));
            }
            out.push('\n');
        }
        out
    }
}

/// Collection date used when a record carries none: July 1 of its year.
pub fn default_collection_date(year: i32) -> NaiveDate {
    NaiveDate::from_ymd_opt(year, 7, 1).expect("valid date")
}

/// Effective date of a record, falling back to the mid-year default.
pub fn effective_date(record: &SequenceRecord) -> Option<NaiveDate> {
    record
        .collection_date
        .filter(|d| Some(d.year()) == record.year || record.year.is_none())
        .or_else(|| record.year.map(default_collection_date))
}

/// Reorders records into manifest order and overwrites label, year and date
/// from the manifest. Records without a manifest entry are dropped, as are
/// manifest entries without a record; [`validate_dataset`] reports both.
pub fn attach_manifest(
    manifest: &DatasetManifest,
    records: &[SequenceRecord],
) -> Vec<SequenceRecord> {
    let by_accession: HashMap<&str, &SequenceRecord> =
        records.iter().map(|r| (r.accession.as_str(), r)).collect();
    manifest
        .entries()
        .filter_map(|(year, e)| {
            by_accession
                .get(e.accession.as_str())
                .map(|r| SequenceRecord {
                    accession: e.accession.clone(),
                    label: e.label.clone(),
                    year: Some(year),
                    collection_date: e.date.or(r.collection_date.filter(|d| d.year() == year)),
                    residues: r.residues.clone(),
                })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AmbiguitySite {
    pub label: String,
    /// 1-based position in the unaligned record.
    pub position: usize,
    pub code: char,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    /// Manifest accessions with no matching record.
    pub missing_records: Vec<String>,
    /// Record accessions absent from the manifest.
    pub unlisted_records: Vec<String>,
    pub ambiguity_sites: Vec<AmbiguitySite>,
    /// Per-record ambiguity totals, records without any omitted.
    pub ambiguity_counts: Vec<(String, usize)>,
}

impl ValidationReport {
    pub fn is_consistent(&self) -> bool {
        self.missing_records.is_empty() && self.unlisted_records.is_empty()
    }
}

pub fn validate_dataset(
    manifest: &DatasetManifest,
    records: &[SequenceRecord],
) -> ValidationReport {
    let record_accessions: HashSet<&str> = records.iter().map(|r| r.accession.as_str()).collect();
    let manifest_labels: HashMap<&str, &str> = manifest
        .entries()
        .map(|(_, e)| (e.accession.as_str(), e.label.as_str()))
        .collect();

    let mut report = ValidationReport::default();
    for (_, e) in manifest.entries() {
        if !record_accessions.contains(e.accession.as_str()) {
            report.missing_records.push(e.accession.clone());
        }
    }
    for r in records {
        let label = manifest_labels
            .get(r.accession.as_str())
            .copied()
            .unwrap_or(&r.label);
        if !manifest_labels.contains_key(r.accession.as_str()) {
            report.unlisted_records.push(r.accession.clone());
        }
        let mut count = 0;
        for (i, b) in r.residues.bytes().enumerate() {
            if is_ambiguity(b) {
                count += 1;
                report.ambiguity_sites.push(AmbiguitySite {
                    label: label.to_string(),
                    position: i + 1,
                    code: b as char,
                });
            }
        }
        if count > 0 {
            report.ambiguity_counts.push((label.to_string(), count));
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_piped_header() {
        let recs = parse_fasta(">2007_1|DQ911222|2007\nACGT").unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].accession, "DQ911222");
        assert_eq!(recs[0].label, "2007_1");
        assert_eq!(recs[0].year, Some(2007));
        assert_eq!(recs[0].residues, "ACGT");
    }

    #[test]
    fn empty_body_is_rejected() {
        let err = parse_fasta(">x|Y|2000\n").unwrap_err();
        assert!(matches!(err, Error::EmptySequence { .. }), "{err}");
    }

    #[test]
    fn case_folds_and_joins_lines() {
        let recs = parse_fasta(">a|A1|2001\nacg\nt").unwrap();
        assert_eq!(recs[0].residues, "ACGT");
    }

    #[test]
    fn bare_genbank_header_drops_version() {
        let recs =
            parse_fasta(">DQ911222.1 Hepatitis C virus isolate x NS5B gene\nACGTN\n").unwrap();
        assert_eq!(recs[0].accession, "DQ911222");
        assert_eq!(recs[0].year, None);
        assert_eq!(recs[0].residues, "ACGTN");
    }

    #[test]
    fn invalid_residue_reports_label_position_and_char() {
        match parse_fasta(">s1|A|2000\nACXT").unwrap_err() {
            Error::InvalidResidue {
                label,
                position,
                character,
            } => {
                assert_eq!((label.as_str(), position, character), ("s1", 3, 'X'));
            }
            e => panic!("unexpected {e}"),
        }
        // gaps are not residues in unaligned input
        assert!(parse_fasta(">s1|A|2000\nAC-T").is_err());
    }

    #[test]
    fn malformed_headers() {
        assert!(parse_fasta(">a|b\nACGT").is_err());
        assert!(parse_fasta(">a|b|year\nACGT").is_err());
        assert!(parse_fasta(">a|b|2000|notadate\nACGT").is_err());
        assert!(parse_fasta("ACGT\n>a|b|2000\nAC").is_err());
        assert!(parse_fasta(">\nACGT").is_err());
    }

    #[test]
    fn duplicate_accession_in_fasta() {
        let err = parse_fasta(">a|X|2000\nA\n>b|X|2001\nC").unwrap_err();
        assert!(matches!(err, Error::DuplicateAccession(ref a) if a == "X"));
    }

    #[test]
    fn write_then_parse_keeps_dates_and_wraps() {
        let mut r = SequenceRecord::new("s", "ACGT".repeat(40)).with_year(2009);
        r.collection_date = NaiveDate::from_ymd_opt(2009, 2, 3);
        let text = write_fasta(std::slice::from_ref(&r));
        assert!(text.lines().all(|l| l.len() <= FASTA_LINE_WIDTH));
        assert_eq!(parse_fasta(&text).unwrap(), vec![r]);
    }

    const MANIFEST: &str = "# demo\n2007_1\tDQ911222\t2007\n2008_1\tEF694448\t2008\n\
        2009_1\tAB470254\t2009\t2009-05-01\n2010_1\tFN668600\t2010\n";

    #[test]
    fn manifest_reference_year_is_minimum() {
        let m = load_manifest(MANIFEST).unwrap();
        assert_eq!(m.reference_year, 2007);
        assert_eq!(m.years().collect::<Vec<_>>(), vec![2007, 2008, 2009, 2010]);
        assert_eq!(
            m.resolved_reference_date(),
            NaiveDate::from_ymd_opt(2007, 3, 23).unwrap()
        );
        assert_eq!(load_manifest(&m.to_tsv()).unwrap(), m);
    }

    #[test]
    fn single_year_manifest_fails() {
        let err = load_manifest("a\tA\t2007\nb\tB\t2007\n").unwrap_err();
        assert!(matches!(err, Error::TooFewYears(1)));
    }

    #[test]
    fn duplicate_manifest_accession_is_named() {
        let err = load_manifest("a\tA\t2007\nb\tA\t2008\n").unwrap_err();
        assert!(err.to_string().contains('A'));
        assert!(matches!(err, Error::DuplicateAccession(ref a) if a == "A"));
        assert!(matches!(
            load_manifest("a\tA\t2007\na\tB\t2008\n").unwrap_err(),
            Error::DuplicateLabel(_)
        ));
    }

    #[test]
    fn reference_override_must_exist() {
        let m = load_manifest(MANIFEST).unwrap();
        assert_eq!(
            m.clone().with_reference_year(2008).unwrap().reference_year,
            2008
        );
        assert!(m.with_reference_year(1999).is_err());
    }

    #[test]
    fn validation_cross_checks_and_reports_ambiguities() {
        let m = load_manifest(MANIFEST).unwrap();
        let recs = vec![
            SequenceRecord::new("x", "ACGTRAC").with_year(2007),
            SequenceRecord::new("y", "ACGT").with_year(2008),
        ];
        let mut recs = recs;
        recs[0].accession = "DQ911222".into();
        recs[1].accession = "EF694448".into();
        let report = validate_dataset(&m, &recs);
        assert_eq!(report.missing_records, vec!["AB470254", "FN668600"]);
        assert!(report.unlisted_records.is_empty());
        assert_eq!(
            report.ambiguity_sites,
            vec![AmbiguitySite {
                label: "2007_1".into(),
                position: 5,
                code: 'R'
            }]
        );
        assert_eq!(report.ambiguity_counts, vec![("2007_1".to_string(), 1)]);
    }

    #[test]
    fn attach_manifest_is_authoritative() {
        let m = load_manifest(MANIFEST).unwrap();
        let recs =
            parse_fasta(">FN668600.1\nAAAA\n>wrong|DQ911222|1999\nCCCC\n>extra|ZZ1|2007\nG\n")
                .unwrap();
        let attached = attach_manifest(&m, &recs);
        let labels: Vec<_> = attached
            .iter()
            .map(|r| (r.label.as_str(), r.year))
            .collect();
        assert_eq!(labels, vec![("2007_1", Some(2007)), ("2010_1", Some(2010))]);
        assert_eq!(
            effective_date(&attached[0]),
            NaiveDate::from_ymd_opt(2007, 7, 1)
        );
    }
}
