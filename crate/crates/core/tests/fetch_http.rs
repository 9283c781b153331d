//! The HTTP fetcher against a throwaway local server.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use mutarate::fetch::{fetch_with, snapshot_path, FetchOptions, UreqTransport};

/// Serves `id=<accession>` requests. Each accession maps to a queue of
/// (status, body) answers; the last answer repeats.
fn serve(script: HashMap<&'static str, Vec<(u16, &'static str)>>) -> (String, Arc<Mutex<Vec<String>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let hits = Arc::new(Mutex::new(Vec::new()));
    let log = Arc::clone(&hits);
    let script = Arc::new(Mutex::new(script));
    thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut request = String::new();
            reader.read_line(&mut request).unwrap();
            loop {
                let mut line = String::new();
                if reader.read_line(&mut line).unwrap() == 0 || line == "\r\n" {
                    break;
                }
            }
            let id = request
                .split(['?', '&', ' '])
                .find_map(|p| p.strip_prefix("id="))
                .unwrap_or_default()
                .to_string();
            log.lock().unwrap().push(id.clone());
            let (status, body) = {
                let mut s = script.lock().unwrap();
                match s.get_mut(id.as_str()) {
                    Some(q) if q.len() > 1 => q.remove(0),
                    Some(q) => q[0],
                    None => (200, "Error: id not found\n"),
                }
            };
            let _ = write!(
                stream,
                "HTTP/1.1 {status} X\r\nContent-Type: text/plain\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            );
        }
    });
    (format!("http://{addr}/efetch.fcgi"), hits)
}

fn options(endpoint: &str, dir: &std::path::Path) -> FetchOptions {
    FetchOptions {
        initial_backoff: Duration::from_millis(5),
        ..FetchOptions::new(endpoint, dir)
    }
}

fn transport() -> UreqTransport {
    UreqTransport::new(Duration::from_secs(5))
}

#[test]
fn found_missing_and_retried_accessions() {
    let (endpoint, hits) = serve(HashMap::from([
        ("AB1", vec![(200, ">AB1.1 test\nACGT\n")]),
        ("AB2", vec![(503, "busy"), (200, ">AB2.1 test\nGGCC\n")]),
        ("AB3", vec![(404, "nope")]),
    ]));
    let dir = tempfile::tempdir().unwrap();
    let accs: Vec<String> = ["AB1", "AB2", "AB3", "AB4"].map(String::from).to_vec();
    let out = fetch_with(&transport(), &accs, &options(&endpoint, dir.path())).unwrap();
    assert_eq!(out.downloaded, ["AB1", "AB2"]);
    assert_eq!(out.misses, ["AB3", "AB4"]);
    assert!(out.fasta.contains(">AB1.1") && out.fasta.contains("GGCC"));
    assert!(snapshot_path(dir.path(), "AB2").exists());
    assert!(!snapshot_path(dir.path(), "AB3").exists());
    assert_eq!(hits.lock().unwrap().iter().filter(|h| *h == "AB2").count(), 2);

    // second pass reads the snapshots and only asks for the misses
    hits.lock().unwrap().clear();
    let again = fetch_with(&transport(), &accs, &options(&endpoint, dir.path())).unwrap();
    assert_eq!(again.from_snapshot, ["AB1", "AB2"]);
    assert_eq!(again.fasta, out.fasta);
    assert_eq!(*hits.lock().unwrap(), ["AB3", "AB4"]);
}

#[test]
fn persistent_server_errors_abort() {
    let (endpoint, _) = serve(HashMap::from([("AB9", vec![(500, "down")])]));
    let dir = tempfile::tempdir().unwrap();
    let opts = FetchOptions {
        max_attempts: 2,
        ..options(&endpoint, dir.path())
    };
    let err = fetch_with(&transport(), &["AB9".to_string()], &opts).unwrap_err();
    assert!(err.to_string().contains("status 500"), "{err}");
}
