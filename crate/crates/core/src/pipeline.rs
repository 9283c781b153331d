//! End-to-end run over an output directory.
//!
//! Each stage reads the artifacts of the stages before it and writes its own,
//! so any stage can be re-run alone and [`run_pipeline`] is exactly the chain
//! of stage calls. Everything except `timings.tsv` is deterministic for a
//! fixed config.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use chrono::NaiveDate;
use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::align::ScoringScheme;
use crate::bundled::ns5b_manifest;
use crate::dataset::{
    attach_manifest, effective_date, load_manifest, parse_fasta, validate_dataset, write_fasta,
    DatasetManifest, SequenceRecord, ValidationReport,
};
use crate::distance::{distance_matrix, DistanceMatrix, DistanceMethod};
use crate::error::{Error, Result};
use crate::fetch::{fetch_genbank, read_snapshot_dir};
use crate::msa::{progressive_align, resolve_ambiguities_logged, Msa, MsaRow, Replacement};
use crate::phmm::{
    baum_welch, init_from_msa, length_sweep, log_odds_score, select_representative, ModelDocument,
    ScoreRow, ScoreTable, TrainingConfig, MODEL_FORMAT_VERSION,
};
use crate::phylo::{neighbor_joining, parse_newick, to_newick, ClampEvent};
use crate::plot::fit_svg;
use crate::rate::{
    build_observations, fit_polynomial, observations_from_csv, observations_to_csv, FitDocument,
    Representative,
};
use crate::simulate::{simulate, SimulationConfig};

pub const STAGES: [&str; 9] = [
    "fetch",
    "align",
    "train",
    "score",
    "select",
    "distances",
    "tree",
    "rate",
    "report",
];

const BAND_GRID_POINTS: usize = 51;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Manifest TSV. Without one, years come from the FASTA headers.
    pub manifest: Option<PathBuf>,
    /// Use the bundled NS5B accession list as the manifest.
    pub bundled_manifest: bool,
    pub fasta: Vec<PathBuf>,
    /// Directory of `<accession>.fasta` snapshots; downloads land here too.
    pub snapshot_dir: Option<PathBuf>,
    /// efetch endpoint used for accessions not found locally.
    pub fetch_endpoint: Option<String>,
    /// Generate the dataset from `seed` instead of reading files.
    pub synthetic: Option<SimulationConfig>,
    pub reference_year: Option<i32>,
    pub reference_date: Option<NaiveDate>,
    pub scoring: ScoringScheme,
    pub training: TrainingConfig,
    /// Optional extra model lengths scored per year (written to
    /// `scores/<year>_sweep.tsv`); lengths wider than a year's alignment are
    /// skipped for that year.
    pub sweep_lengths: Vec<usize>,
    pub tree_distance: DistanceMethod,
    pub rate_distance: DistanceMethod,
    pub degree: usize,
    pub include_reference_point: bool,
    #[serde(skip_serializing)]
    pub out_dir: PathBuf,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            manifest: None,
            bundled_manifest: false,
            fasta: Vec::new(),
            snapshot_dir: None,
            fetch_endpoint: None,
            synthetic: None,
            reference_year: None,
            reference_date: None,
            scoring: ScoringScheme::default(),
            training: TrainingConfig::default(),
            sweep_lengths: Vec::new(),
            tree_distance: DistanceMethod::JukesCantor,
            rate_distance: DistanceMethod::Kimura,
            degree: 1,
            include_reference_point: true,
            out_dir: PathBuf::from("mutarate-out"),
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))
    }

    /// Reads a JSON config; relative paths are taken relative to its
    /// directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        cfg.manifest.as_mut().map(fix);
        cfg.snapshot_dir.as_mut().map(fix);
        cfg.fasta.iter_mut().for_each(fix);
        fix(&mut cfg.out_dir);
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.scoring.validate()?;
        self.training.validate()?;
        if self.sweep_lengths.contains(&0) {
            return Err(Error::Config("sweep lengths must be positive".into()));
        }
        let has_manifest = self.manifest.is_some() || self.bundled_manifest;
        if self.synthetic.is_some() && has_manifest {
            return Err(Error::Config(
                "synthetic data cannot be combined with a manifest".into(),
            ));
        }
        if self.synthetic.is_none() && !has_manifest && self.fasta.is_empty() {
            return Err(Error::Config(
                "no data source: set manifest, bundled_manifest, fasta or synthetic".into(),
            ));
        }
        if self.manifest.is_some() && self.bundled_manifest {
            return Err(Error::Config(
                "manifest and bundled_manifest are exclusive".into(),
            ));
        }
        Ok(())
    }

    pub fn layout(&self) -> Layout {
        Layout {
            root: self.out_dir.clone(),
        }
    }
}

/// Artifact paths under the output directory.
#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn dataset_fasta(&self) -> PathBuf {
        self.root.join("dataset.fasta")
    }
    pub fn manifest_tsv(&self) -> PathBuf {
        self.root.join("manifest.tsv")
    }
    pub fn dataset_json(&self) -> PathBuf {
        self.root.join("dataset.json")
    }
    pub fn aligned(&self, year: i32) -> PathBuf {
        self.root.join("aligned").join(format!("{year}.fasta"))
    }
    pub fn replacements_tsv(&self) -> PathBuf {
        self.root.join("aligned").join("ambiguity_resolution.tsv")
    }
    pub fn model(&self, year: i32) -> PathBuf {
        self.root.join("models").join(format!("{year}.json"))
    }
    pub fn scores(&self, year: i32) -> PathBuf {
        self.root.join("scores").join(format!("{year}.tsv"))
    }
    pub fn sweep(&self, year: i32) -> PathBuf {
        self.root.join("scores").join(format!("{year}_sweep.tsv"))
    }
    pub fn representatives_tsv(&self) -> PathBuf {
        self.root.join("representatives.tsv")
    }
    pub fn representatives_fasta(&self) -> PathBuf {
        self.root.join("representatives.fasta")
    }
    pub fn distances(&self, method: DistanceMethod) -> PathBuf {
        self.root.join(format!("distances_{}.tsv", method.name()))
    }
    pub fn tree(&self) -> PathBuf {
        self.root.join("tree.nwk")
    }
    pub fn tree_rerooted(&self) -> PathBuf {
        self.root.join("tree_rerooted.nwk")
    }
    pub fn tree_events(&self) -> PathBuf {
        self.root.join("tree_events.json")
    }
    pub fn observations(&self) -> PathBuf {
        self.root.join("observations.csv")
    }
    pub fn fit_json(&self) -> PathBuf {
        self.root.join("fit.json")
    }
    pub fn fit_svg(&self) -> PathBuf {
        self.root.join("fit.svg")
    }
    pub fn report(&self) -> PathBuf {
        self.root.join("report.json")
    }
    pub fn timings(&self) -> PathBuf {
        self.root.join("timings.tsv")
    }
    pub fn partial(&self) -> PathBuf {
        self.root.join(".partial")
    }
}

fn read_artifact(path: &Path) -> Result<String> {
    if !path.exists() {
        return Err(Error::MissingArtifact(path.to_path_buf()));
    }
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_artifact(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn to_json<T: Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

/// Summary of the loaded dataset, written as `dataset.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub source: String,
    pub reference_year: i32,
    pub reference_date: NaiveDate,
    pub sequences_per_year: BTreeMap<i32, usize>,
    pub validation: ValidationReport,
    pub downloaded: Vec<String>,
    pub fetch_misses: Vec<String>,
}

fn manifest_from_headers(records: &[SequenceRecord]) -> Result<DatasetManifest> {
    let mut tsv = String::new();
    for r in records {
        let year = r.year.ok_or_else(|| {
            Error::Config(format!(
                "record {} has no year and no manifest was given",
                r.accession
            ))
        })?;
        tsv.push_str(&format!("{}\t{}\t{}", r.label, r.accession, year));
        if let Some(d) = r.collection_date {
            tsv.push_str(&format!("\t{d}"));
        }
        tsv.push('\n');
    }
    load_manifest(&tsv)
}

fn load_sources(
    cfg: &PipelineConfig,
) -> Result<(
    String,
    DatasetManifest,
    Vec<SequenceRecord>,
    Vec<String>,
    Vec<String>,
)> {
    if let Some(sim) = &cfg.synthetic {
        let d = simulate(sim, cfg.seed)?;
        return Ok((
            "synthetic".into(),
            d.manifest,
            d.records,
            Vec::new(),
            Vec::new(),
        ));
    }
    let manifest = if cfg.bundled_manifest {
        Some(ns5b_manifest())
    } else if let Some(path) = &cfg.manifest {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e).in_stage("load"))?;
        Some(load_manifest(&text).map_err(|e| e.in_stage("load"))?)
    } else {
        None
    };
    let mut records = Vec::new();
    for path in &cfg.fasta {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        records.extend(parse_fasta(&text)?);
    }
    if let Some(dir) = cfg.snapshot_dir.as_ref().filter(|d| d.is_dir()) {
        let known: Vec<String> = records.iter().map(|r| r.accession.clone()).collect();
        let snap = parse_fasta(&read_snapshot_dir(dir)?)?;
        records.extend(snap.into_iter().filter(|r| !known.contains(&r.accession)));
    }
    let (mut downloaded, mut misses) = (Vec::new(), Vec::new());
    if let (Some(m), Some(endpoint)) = (&manifest, &cfg.fetch_endpoint) {
        let have: Vec<&str> = records.iter().map(|r| r.accession.as_str()).collect();
        let wanted: Vec<String> = m
            .entries()
            .map(|(_, e)| e.accession.clone())
            .filter(|a| !have.contains(&a.as_str()))
            .collect();
        if !wanted.is_empty() {
            let dir = cfg
                .snapshot_dir
                .clone()
                .unwrap_or_else(|| cfg.out_dir.join("snapshot"));
            let outcome = fetch_genbank(&wanted, endpoint, &dir)?;
            records.extend(parse_fasta(&outcome.fasta)?);
            downloaded = outcome.downloaded;
            misses = outcome.misses;
        }
    }
    let manifest = match manifest {
        Some(m) => m,
        None => manifest_from_headers(&records).map_err(|e| e.in_stage("load"))?,
    };
    Ok(("files".into(), manifest, records, downloaded, misses))
}

/// Loads (and if configured, downloads) the dataset, checks it against the
/// manifest and writes `dataset.fasta`, `manifest.tsv` and `dataset.json`.
pub fn stage_fetch(cfg: &PipelineConfig) -> Result<DatasetSummary> {
    let run = || -> Result<DatasetSummary> {
        let (source, mut manifest, records, downloaded, fetch_misses) = load_sources(cfg)?;
        if let Some(y) = cfg.reference_year {
            manifest = manifest.with_reference_year(y)?;
        }
        if let Some(d) = cfg.reference_date {
            manifest = manifest.with_reference_date(d);
        }
        let validation = validate_dataset(&manifest, &records);
        if !validation.missing_records.is_empty() {
            warn!(
                "{} manifest accessions have no sequence",
                validation.missing_records.len()
            );
        }
        let attached = attach_manifest(&manifest, &records);
        let mut per_year = BTreeMap::new();
        for y in manifest.years() {
            let count = attached.iter().filter(|r| r.year == Some(y)).count();
            if count == 0 {
                return Err(Error::InvalidInput(format!("year {y} has no sequences")));
            }
            per_year.insert(y, count);
        }
        let summary = DatasetSummary {
            source,
            reference_year: manifest.reference_year,
            reference_date: manifest.resolved_reference_date(),
            sequences_per_year: per_year,
            validation,
            downloaded,
            fetch_misses,
        };
        let l = cfg.layout();
        write_artifact(&l.dataset_fasta(), &write_fasta(&attached))?;
        write_artifact(&l.manifest_tsv(), &manifest.to_tsv())?;
        write_artifact(&l.dataset_json(), &to_json(&summary)?)?;
        info!(
            "loaded {} sequences in {} years",
            attached.len(),
            summary.sequences_per_year.len()
        );
        Ok(summary)
    };
    run().map_err(|e| e.in_stage("fetch"))
}

fn read_summary(l: &Layout) -> Result<DatasetSummary> {
    Ok(serde_json::from_str(&read_artifact(&l.dataset_json())?)?)
}

fn read_groups(l: &Layout) -> Result<BTreeMap<i32, Vec<SequenceRecord>>> {
    let mut groups: BTreeMap<i32, Vec<SequenceRecord>> = BTreeMap::new();
    for r in parse_fasta(&read_artifact(&l.dataset_fasta())?)? {
        let y = r
            .year
            .ok_or_else(|| Error::InvalidInput(format!("record {} has no year", r.label)))?;
        groups.entry(y).or_default().push(r);
    }
    Ok(groups)
}

fn read_msa(path: &Path) -> Result<Msa> {
    Msa::from_fasta(&read_artifact(path)?)
}

/// Aligns each year group and resolves ambiguity codes column-wise.
pub fn stage_align(cfg: &PipelineConfig) -> Result<Vec<Replacement>> {
    let run = || -> Result<Vec<Replacement>> {
        let l = cfg.layout();
        let mut tsv = String::from("year\tlabel\tcolumn\tfrom\tto\n");
        let mut all = Vec::new();
        for (year, recs) in read_groups(&l)? {
            let msa = if recs.len() == 1 {
                Msa::new(vec![MsaRow {
                    label: recs[0].label.clone(),
                    residues: recs[0].residues.as_bytes().to_vec(),
                }])?
            } else {
                progressive_align(&recs, &cfg.scoring)?
            };
            let (resolved, log) = resolve_ambiguities_logged(&msa);
            for r in &log {
                tsv.push_str(&format!(
                    "{year}\t{}\t{}\t{}\t{}\n",
                    r.label, r.column, r.from, r.to
                ));
            }
            write_artifact(&l.aligned(year), &resolved.to_fasta())?;
            info!(
                "aligned {year}: {} rows x {} columns",
                resolved.len(),
                resolved.width()
            );
            all.extend(log);
        }
        write_artifact(&l.replacements_tsv(), &tsv)?;
        Ok(all)
    };
    run().map_err(|e| e.in_stage("align"))
}

fn years_of(l: &Layout) -> Result<Vec<i32>> {
    Ok(read_summary(l)?
        .sequences_per_year
        .keys()
        .copied()
        .collect())
}

fn training_rows(msa: &Msa) -> Vec<String> {
    msa.rows.iter().map(MsaRow::ungapped).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub year: i32,
    pub model_length: usize,
    pub iterations: usize,
    pub converged: bool,
    pub initial_log_likelihood: f64,
    pub final_log_likelihood: f64,
}

/// One model per year: match columns from the gap threshold, then
/// Baum-Welch on the group's de-gapped rows.
pub fn stage_train(cfg: &PipelineConfig) -> Result<Vec<TrainingSummary>> {
    let run = || -> Result<Vec<TrainingSummary>> {
        let l = cfg.layout();
        let mut out = Vec::new();
        for year in years_of(&l)? {
            let msa = read_msa(&l.aligned(year))?;
            let h0 = init_from_msa(&msa, &cfg.training)?;
            let rows = training_rows(&msa);
            let refs: Vec<&str> = rows.iter().map(String::as_str).collect();
            let t = baum_welch(&h0, &refs, &cfg.training)?;
            let doc = ModelDocument {
                format_version: MODEL_FORMAT_VERSION,
                model: t.model.clone(),
                ll_trace: t.ll_trace.clone(),
            };
            write_artifact(&l.model(year), &to_json(&doc)?)?;
            info!(
                "trained {year}: length {}, {} iterations",
                t.model.length, t.iterations
            );
            out.push(TrainingSummary {
                year,
                model_length: t.model.length,
                iterations: t.iterations,
                converged: t.converged,
                initial_log_likelihood: t.ll_trace[0],
                final_log_likelihood: *t.ll_trace.last().unwrap(),
            });
        }
        Ok(out)
    };
    run().map_err(|e| e.in_stage("train"))
}

fn read_model(path: &Path) -> Result<ModelDocument> {
    ModelDocument::from_json(&read_artifact(path)?)
}

/// Log-odds score of every sequence under its year's model, plus the
/// optional length sweep.
pub fn stage_score(cfg: &PipelineConfig) -> Result<()> {
    let run = || -> Result<()> {
        let l = cfg.layout();
        for year in years_of(&l)? {
            let msa = read_msa(&l.aligned(year))?;
            let doc = read_model(&l.model(year))?;
            let rows = training_rows(&msa);
            let scores = rows
                .iter()
                .map(|s| log_odds_score(&doc.model, s))
                .collect::<Result<Vec<_>>>()?;
            let table = ScoreTable {
                labels: msa.rows.iter().map(|r| r.label.clone()).collect(),
                rows: vec![ScoreRow {
                    length: doc.model.length,
                    scores,
                }],
            };
            write_artifact(&l.scores(year), &table.to_tsv())?;
            let lengths: Vec<usize> = cfg
                .sweep_lengths
                .iter()
                .copied()
                .filter(|&n| n <= msa.width())
                .collect();
            if lengths.len() < cfg.sweep_lengths.len() {
                warn!(
                    "{year}: sweep lengths above alignment width {} skipped",
                    msa.width()
                );
            }
            if !lengths.is_empty() {
                let recs: Vec<SequenceRecord> = msa
                    .rows
                    .iter()
                    .map(|r| SequenceRecord::new(r.label.clone(), r.ungapped()))
                    .collect();
                let sweep = length_sweep(&msa, &recs, &lengths, &cfg.training)?;
                write_artifact(&l.sweep(year), &sweep.to_tsv())?;
            }
        }
        Ok(())
    };
    run().map_err(|e| e.in_stage("score"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepresentativeRow {
    pub year: i32,
    pub label: String,
    pub accession: String,
    pub date: NaiveDate,
    pub score: f64,
}

fn representatives_tsv(rows: &[RepresentativeRow]) -> String {
    let mut s = String::from("year\tlabel\taccession\tdate\tscore\n");
    for r in rows {
        s.push_str(&format!(
            "{}\t{}\t{}\t{}\t{:.6}\n",
            r.year, r.label, r.accession, r.date, r.score
        ));
    }
    s
}

pub fn parse_representatives(text: &str) -> Result<Vec<RepresentativeRow>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let bad = || Error::InvalidInput(format!("representatives line {}: {line:?}", i + 1));
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 5 {
            return Err(bad());
        }
        out.push(RepresentativeRow {
            year: f[0].parse().map_err(|_| bad())?,
            label: f[1].to_string(),
            accession: f[2].to_string(),
            date: NaiveDate::parse_from_str(f[3], "%Y-%m-%d").map_err(|_| bad())?,
            score: f[4].parse().map_err(|_| bad())?,
        });
    }
    Ok(out)
}

/// Highest-scoring sequence per year. The chosen sequences are written with
/// the year as their label, which is how they appear in matrices and trees.
pub fn stage_select(cfg: &PipelineConfig) -> Result<Vec<RepresentativeRow>> {
    let run = || -> Result<Vec<RepresentativeRow>> {
        let l = cfg.layout();
        let groups = read_groups(&l)?;
        let mut reps = Vec::new();
        let mut fasta = Vec::new();
        for year in years_of(&l)? {
            let table = ScoreTable::from_tsv(&read_artifact(&l.scores(year))?)?;
            let row = table
                .rows
                .first()
                .ok_or_else(|| Error::InvalidInput(format!("empty score table for {year}")))?;
            let scored = table.scored(row);
            let best = select_representative(&scored)?;
            let label = &scored[best].0;
            let msa = read_msa(&l.aligned(year))?;
            let record = groups
                .get(&year)
                .and_then(|g| g.iter().find(|r| &r.label == label))
                .ok_or_else(|| Error::UnknownLabel(label.clone()))?;
            let resolved = msa
                .rows
                .iter()
                .find(|r| &r.label == label)
                .ok_or_else(|| Error::UnknownLabel(label.clone()))?;
            let date = effective_date(record).expect("records carry a year");
            reps.push(RepresentativeRow {
                year,
                label: label.clone(),
                accession: record.accession.clone(),
                date,
                score: scored[best].1,
            });
            fasta.push(SequenceRecord {
                accession: record.accession.clone(),
                label: year.to_string(),
                year: Some(year),
                collection_date: Some(date),
                residues: resolved.ungapped(),
            });
            info!("{year}: representative {label}");
        }
        write_artifact(&l.representatives_tsv(), &representatives_tsv(&reps))?;
        write_artifact(&l.representatives_fasta(), &write_fasta(&fasta))?;
        Ok(reps)
    };
    run().map_err(|e| e.in_stage("select"))
}

/// Pairwise distance matrix of FASTA records, labelled by record label.
pub fn distances_from_fasta(
    text: &str,
    method: DistanceMethod,
    scheme: &ScoringScheme,
) -> Result<DistanceMatrix> {
    let seqs: Vec<(String, String)> = parse_fasta(text)?
        .into_iter()
        .map(|r| (r.label, r.residues))
        .collect();
    distance_matrix(&seqs, method, scheme)
}

/// Distances between representatives for the tree method and the rate
/// method.
pub fn stage_distances(cfg: &PipelineConfig) -> Result<()> {
    let run = || -> Result<()> {
        let l = cfg.layout();
        let text = read_artifact(&l.representatives_fasta())?;
        let mut methods = vec![cfg.tree_distance];
        if cfg.rate_distance != cfg.tree_distance {
            methods.push(cfg.rate_distance);
        }
        for m in methods {
            let d = distances_from_fasta(&text, m, &cfg.scoring)?;
            write_artifact(&l.distances(m), &d.to_tsv())?;
        }
        Ok(())
    };
    run().map_err(|e| e.in_stage("distances"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeEvents {
    pub clamped_limbs: Vec<ClampEvent>,
}

/// Neighbor joining on the tree-method matrix, plus a copy rerooted at the
/// reference year.
pub fn stage_tree(cfg: &PipelineConfig) -> Result<TreeEvents> {
    let run = || -> Result<TreeEvents> {
        let l = cfg.layout();
        let d = DistanceMatrix::from_tsv(&read_artifact(&l.distances(cfg.tree_distance))?)?;
        let reference = read_summary(&l)?.reference_year.to_string();
        let t = neighbor_joining(&d)?;
        let events = TreeEvents {
            clamped_limbs: t.clamp_events(),
        };
        for e in &events.clamped_limbs {
            warn!(
                "negative limb {} above {:?} clamped to 0",
                e.raw_length, e.descendants
            );
        }
        write_artifact(&l.tree(), &(to_newick(&t) + "\n"))?;
        write_artifact(
            &l.tree_rerooted(),
            &(to_newick(&t.reroot(&reference)?) + "\n"),
        )?;
        write_artifact(&l.tree_events(), &to_json(&events)?)?;
        Ok(events)
    };
    run().map_err(|e| e.in_stage("tree"))
}

/// Fits `observations.csv` text and renders the plot.
pub fn fit_observations(csv: &str, degree: usize) -> Result<(FitDocument, String)> {
    let obs = observations_from_csv(csv)?;
    let fit = fit_polynomial(&obs, degree)?;
    let doc = FitDocument::new(&fit, BAND_GRID_POINTS)?;
    let title = format!("distance vs days: rate {:.3e} per day", doc.rate_per_day);
    let svg = fit_svg(&obs, &doc.band, &title);
    Ok((doc, svg))
}

/// Builds the distance-versus-time observations and fits them.
pub fn stage_rate(cfg: &PipelineConfig) -> Result<FitDocument> {
    let run = || -> Result<FitDocument> {
        let l = cfg.layout();
        let summary = read_summary(&l)?;
        let reps: Vec<Representative> =
            parse_representatives(&read_artifact(&l.representatives_tsv())?)?
                .into_iter()
                .map(|r| Representative {
                    year: r.year,
                    label: r.year.to_string(),
                    date: r.date,
                })
                .collect();
        let d = DistanceMatrix::from_tsv(&read_artifact(&l.distances(cfg.rate_distance))?)?;
        let mut obs =
            build_observations(&reps, summary.reference_year, summary.reference_date, &d)?;
        if !cfg.include_reference_point {
            obs.retain(|o| o.elapsed_days != 0 || o.distance != 0.0);
        }
        let csv = observations_to_csv(&obs);
        write_artifact(&l.observations(), &csv)?;
        let (doc, svg) = fit_observations(&csv, cfg.degree)?;
        write_artifact(&l.fit_json(), &to_json(&doc)?)?;
        write_artifact(&l.fit_svg(), &svg)?;
        info!(
            "rate {:.6e} per day ({:.6e} per year)",
            doc.rate_per_day, doc.rate_per_year
        );
        Ok(doc)
    };
    run().map_err(|e| e.in_stage("rate"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub degree: usize,
    pub rate_per_day: f64,
    pub rate_per_year: f64,
    pub intercept: f64,
    pub rss: f64,
    pub n: usize,
    pub band_kind: String,
}

/// Machine-readable summary of a run, written as `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub tool: String,
    pub version: String,
    pub model_format_version: u32,
    pub config: PipelineConfig,
    pub seed: u64,
    pub dataset: DatasetSummary,
    pub ambiguity_replacements: usize,
    pub training: Vec<TrainingSummary>,
    pub representatives: Vec<RepresentativeRow>,
    pub tree_distance: String,
    pub rate_distance: String,
    pub clamped_limbs: Vec<ClampEvent>,
    pub fit: FitSummary,
    pub notes: Vec<String>,
    /// Seconds per stage; kept out of `report.json` and written to
    /// `timings.tsv` so the report stays byte-stable.
    #[serde(skip)]
    pub timings: Vec<(String, f64)>,
}

/// Collects the other artifacts into `report.json`.
pub fn stage_report(cfg: &PipelineConfig) -> Result<RunReport> {
    let run = || -> Result<RunReport> {
        let l = cfg.layout();
        let dataset = read_summary(&l)?;
        let replacements = read_artifact(&l.replacements_tsv())?
            .lines()
            .count()
            .saturating_sub(1);
        let mut training = Vec::new();
        for &year in dataset.sequences_per_year.keys() {
            let doc = read_model(&l.model(year))?;
            let trace = &doc.ll_trace;
            training.push(TrainingSummary {
                year,
                model_length: doc.model.length,
                iterations: trace.len().saturating_sub(1),
                converged: trace.len() >= 2
                    && (trace[trace.len() - 1] - trace[trace.len() - 2]).abs()
                        < cfg.training.ll_tolerance,
                initial_log_likelihood: trace.first().copied().unwrap_or(f64::NAN),
                final_log_likelihood: trace.last().copied().unwrap_or(f64::NAN),
            });
        }
        let representatives = parse_representatives(&read_artifact(&l.representatives_tsv())?)?;
        let events: TreeEvents = serde_json::from_str(&read_artifact(&l.tree_events())?)?;
        // the tree files must exist and parse
        parse_newick(read_artifact(&l.tree())?.trim())?;
        parse_newick(read_artifact(&l.tree_rerooted())?.trim())?;
        let fit: FitDocument = serde_json::from_str(&read_artifact(&l.fit_json())?)?;
        let report = RunReport {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            model_format_version: MODEL_FORMAT_VERSION,
            config: cfg.clone(),
            seed: cfg.seed,
            dataset,
            ambiguity_replacements: replacements,
            training,
            representatives,
            tree_distance: cfg.tree_distance.name().into(),
            rate_distance: cfg.rate_distance.name().into(),
            clamped_limbs: events.clamped_limbs,
            fit: FitSummary {
                degree: fit.degree,
                rate_per_day: fit.rate_per_day,
                rate_per_year: fit.rate_per_year,
                intercept: fit.intercept,
                rss: fit.rss,
                n: fit.n,
                band_kind: fit.band_kind,
            },
            notes: vec![
                "log-odds scores use an i.i.d. uniform (1/4) background, natural log".into(),
                "representatives are chosen with each year's gap-threshold model length; \
                 sweep tables are informational"
                    .into(),
                "sequences without a collection date are placed on July 1 of their year".into(),
                "saturated distance pairs abort the run with the pair named in the error".into(),
            ],
            timings: Vec::new(),
        };
        write_artifact(&l.report(), &to_json(&report)?)?;
        Ok(report)
    };
    run().map_err(|e| e.in_stage("report"))
}

/// Runs one stage by name.
pub fn run_stage(cfg: &PipelineConfig, stage: &str) -> Result<()> {
    match stage {
        "fetch" => stage_fetch(cfg).map(drop),
        "align" => stage_align(cfg).map(drop),
        "train" => stage_train(cfg).map(drop),
        "score" => stage_score(cfg),
        "select" => stage_select(cfg).map(drop),
        "distances" => stage_distances(cfg),
        "tree" => stage_tree(cfg).map(drop),
        "rate" => stage_rate(cfg).map(drop),
        "report" => stage_report(cfg).map(drop),
        other => Err(Error::Config(format!("unknown stage {other:?}"))),
    }
}

/// Every stage in order. On failure the output directory keeps whatever was
/// written and gains a `.partial` marker naming the failed stage.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<RunReport> {
    cfg.validate()?;
    let l = cfg.layout();
    fs::create_dir_all(&l.root).map_err(|e| Error::io(&l.root, e))?;
    let mut timings = Vec::new();
    for stage in &STAGES[..STAGES.len() - 1] {
        let t0 = Instant::now();
        if let Err(e) = run_stage(cfg, stage) {
            let name = match &e {
                Error::Stage { stage, .. } => *stage,
                _ => stage,
            };
            let _ = fs::write(l.partial(), format!("stage: {name}\nerror: {e}\n"));
            return Err(e);
        }
        timings.push((stage.to_string(), t0.elapsed().as_secs_f64()));
    }
    let t0 = Instant::now();
    let mut report = match stage_report(cfg) {
        Ok(r) => r,
        Err(e) => {
            let _ = fs::write(l.partial(), format!("stage: report\nerror: {e}\n"));
            return Err(e);
        }
    };
    timings.push(("report".into(), t0.elapsed().as_secs_f64()));
    let mut tsv = String::from("stage\tseconds\n");
    for (s, t) in &timings {
        tsv.push_str(&format!("{s}\t{t:.6}\n"));
    }
    write_artifact(&l.timings(), &tsv)?;
    if l.partial().exists() {
        fs::remove_file(l.partial()).map_err(|e| Error::io(l.partial(), e))?;
    }
    report.timings = timings;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults_and_overrides() {
        let cfg = PipelineConfig::from_json(
            r#"{"training": {"max_iterations": 5}, "degree": 2, "rate_distance": "jc"}"#,
        )
        .unwrap();
        assert_eq!(cfg.training.max_iterations, 5);
        assert_eq!(cfg.training.pseudocount, 0.01);
        assert_eq!(cfg.degree, 2);
        assert_eq!(cfg.rate_distance, DistanceMethod::JukesCantor);
        assert_eq!(cfg.tree_distance, DistanceMethod::JukesCantor);
        assert!(PipelineConfig::from_json(r#"{"bogus": 1}"#).is_err());
        assert!(PipelineConfig::default().validate().is_err());
    }

    #[test]
    fn unknown_stage_is_config_error() {
        let e = run_stage(&PipelineConfig::default(), "dance").unwrap_err();
        assert_eq!(e.kind(), crate::ErrorKind::Config);
    }

    #[test]
    fn missing_artifact_names_file() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = PipelineConfig {
            out_dir: dir.path().to_path_buf(),
            ..PipelineConfig::default()
        };
        let e = stage_tree(&cfg).unwrap_err();
        assert!(e.to_string().contains("distances_jc.tsv"), "{e}");
    }
}
