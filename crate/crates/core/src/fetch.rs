//! Snapshot-first retrieval of nucleotide FASTA records from an
//! E-utilities `efetch` endpoint.
//!
//! Every successfully fetched accession is written once to
//! `<snapshot_dir>/<accession>.fasta` and never overwritten; later runs read
//! the snapshot and make no network call for it.

use std::fs;
use std::io::Read as _;
use std::path::{Path, PathBuf};
use std::thread;
use std::time::Duration;

use log::{debug, warn};

use crate::error::{Error, Result};

pub const DEFAULT_EFETCH_ENDPOINT: &str =
    "https://eutils.ncbi.nlm.nih.gov/entrez/eutils/efetch.fcgi";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpResponse {
    pub status: u16,
    pub body: String,
}

/// Minimal GET transport so the retry and snapshot logic can run against
/// any HTTP stack (or none, in tests).
pub trait Transport {
    fn get(&self, url: &str) -> std::result::Result<HttpResponse, String>;
}

pub struct UreqTransport {
    agent: ureq::Agent,
}

impl UreqTransport {
    pub fn new(timeout: Duration) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        UreqTransport { agent }
    }
}

impl Default for UreqTransport {
    fn default() -> Self {
        UreqTransport::new(Duration::from_secs(30))
    }
}

impl Transport for UreqTransport {
    fn get(&self, url: &str) -> std::result::Result<HttpResponse, String> {
        let mut resp = self.agent.get(url).call().map_err(|e| e.to_string())?;
        let status = resp.status().as_u16();
        let mut body = String::new();
        resp.body_mut()
            .as_reader()
            .read_to_string(&mut body)
            .map_err(|e| e.to_string())?;
        Ok(HttpResponse { status, body })
    }
}

#[derive(Debug, Clone)]
pub struct FetchOptions {
    pub endpoint: String,
    pub snapshot_dir: PathBuf,
    pub max_attempts: u32,
    pub initial_backoff: Duration,
}

impl FetchOptions {
    pub fn new(endpoint: impl Into<String>, snapshot_dir: impl Into<PathBuf>) -> Self {
        FetchOptions {
            endpoint: endpoint.into(),
            snapshot_dir: snapshot_dir.into(),
            max_attempts: 3,
            initial_backoff: Duration::from_millis(500),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FetchOutcome {
    /// Concatenated FASTA of every accession found, in request order.
    pub fasta: String,
    pub downloaded: Vec<String>,
    pub from_snapshot: Vec<String>,
    pub misses: Vec<String>,
}

pub fn snapshot_path(dir: &Path, accession: &str) -> PathBuf {
    dir.join(format!("{accession}.fasta"))
}

/// Reads every `*.fasta` file of a snapshot directory in file-name order.
pub fn read_snapshot_dir(dir: &Path) -> Result<String> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "fasta"))
        .collect();
    paths.sort();
    let mut out = String::new();
    for p in paths {
        out.push_str(&fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?);
        if !out.ends_with('\n') {
            out.push('\n');
        }
    }
    Ok(out)
}

fn efetch_url(endpoint: &str, accession: &str) -> String {
    let sep = if endpoint.contains('?') { '&' } else { '?' };
    format!("{endpoint}{sep}db=nuccore&id={accession}&rettype=fasta&retmode=text")
}

enum Lookup {
    Found(String),
    Missing,
}

fn lookup(transport: &dyn Transport, url: &str, opts: &FetchOptions) -> Result<Lookup> {
    let mut backoff = opts.initial_backoff;
    let mut last_err = String::new();
    for attempt in 1..=opts.max_attempts.max(1) {
        match transport.get(url) {
            Ok(resp) if resp.status == 200 => {
                let body = resp.body.trim_start();
                return Ok(if body.starts_with('>') {
                    Lookup::Found(body.to_string())
                } else {
                    Lookup::Missing
                });
            }
            Ok(resp) if resp.status == 429 || resp.status >= 500 => {
                last_err = format!("status {}", resp.status);
            }
            Ok(resp) => {
                debug!("{url}: status {} treated as not found", resp.status);
                return Ok(Lookup::Missing);
            }
            Err(e) => last_err = e,
        }
        if attempt < opts.max_attempts {
            warn!("{url}: attempt {attempt} failed ({last_err}), retrying in {backoff:?}");
            thread::sleep(backoff);
            backoff *= 2;
        }
    }
    Err(Error::Http {
        url: url.to_string(),
        reason: last_err,
    })
}

fn write_snapshot(path: &Path, text: &str) -> Result<()> {
    let tmp = path.with_extension("fasta.tmp");
    fs::write(&tmp, text).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Fetches with an explicit transport. Misses are collected, not fatal;
/// HTTP failures that persist through every retry abort the fetch.
pub fn fetch_with(
    transport: &dyn Transport,
    accessions: &[String],
    opts: &FetchOptions,
) -> Result<FetchOutcome> {
    let mut outcome = FetchOutcome::default();
    if accessions.is_empty() {
        return Ok(outcome);
    }
    fs::create_dir_all(&opts.snapshot_dir).map_err(|e| Error::io(&opts.snapshot_dir, e))?;
    for acc in accessions {
        let path = snapshot_path(&opts.snapshot_dir, acc);
        let text = if path.exists() {
            outcome.from_snapshot.push(acc.clone());
            fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?
        } else {
            match lookup(transport, &efetch_url(&opts.endpoint, acc), opts)? {
                Lookup::Found(text) => {
                    write_snapshot(&path, &text)?;
                    outcome.downloaded.push(acc.clone());
                    text
                }
                Lookup::Missing => {
                    outcome.misses.push(acc.clone());
                    continue;
                }
            }
        };
        outcome.fasta.push_str(&text);
        if !outcome.fasta.ends_with('\n') {
            outcome.fasta.push('\n');
        }
    }
    Ok(outcome)
}

/// Fetches `accessions` from `endpoint` into `snapshot_dir` over HTTP.
pub fn fetch_genbank(
    accessions: &[String],
    endpoint: &str,
    snapshot_dir: &Path,
) -> Result<FetchOutcome> {
    fetch_with(
        &UreqTransport::default(),
        accessions,
        &FetchOptions::new(endpoint, snapshot_dir),
    )
}
