mod common;

use std::fs;

use chain_ribbons::ingest::{download, fetch_remote, load_snapshot, snapshot_path, AuthPlacement, RemoteSource};
use chain_ribbons::{Error, MetricCode};
use common::{date, mock_server};

const KEY: &str = "s3cret";
const BODY: &str = "Date,Value\n2022-10-03,19600.5\n2022-10-02,19300\n2022-10-01,19400.25\n";

/// Accepts the key either as `api_key` query parameter or `X-Api-Token` header.
fn datalink() -> String {
    mock_server(|req| {
        let authed = req.target.contains(&format!("api_key={KEY}")) || req.header("X-Api-Token") == Some(KEY);
        if !authed {
            return (401, "{\"quandl_error\":{\"code\":\"QEAx01\"}}".into());
        }
        if req.target.starts_with("/datasets/BCHAIN/MKPRU.csv") {
            (200, BODY.into())
        } else if req.target.starts_with("/datasets/BCHAIN/HRATE.csv") {
            (200, "{\"dataset\":{}}".into())
        } else {
            (404, "not found".into())
        }
    })
}

#[test]
fn downloads_three_rows_in_date_order() {
    let source = RemoteSource::new(datalink());
    let s = download(MetricCode::MKPRU, &source, Some(KEY)).unwrap();
    assert_eq!(s.dates(), &[date(2022, 10, 1), date(2022, 10, 2), date(2022, 10, 3)]);
    assert_eq!(s.values(), &[19400.25, 19300.0, 19600.5]);
}

#[test]
fn header_auth() {
    let mut source = RemoteSource::new(datalink());
    source.auth = AuthPlacement::Header("X-Api-Token".into());
    assert_eq!(download(MetricCode::MKPRU, &source, Some(KEY)).unwrap().len(), 3);
}

#[test]
fn bad_key_is_an_auth_error() {
    let source = RemoteSource::new(datalink());
    match download(MetricCode::MKPRU, &source, Some("wrong")) {
        Err(Error::HttpStatus { status: 401, url }) => assert!(url.ends_with("/datasets/BCHAIN/MKPRU.csv")),
        other => panic!("expected 401, got {other:?}"),
    }
    assert!(matches!(
        download(MetricCode::MKPRU, &source, None),
        Err(Error::HttpStatus { status: 401, .. })
    ));
}

#[test]
fn unexpected_payloads() {
    let source = RemoteSource::new(datalink());
    assert!(matches!(
        download(MetricCode::HRATE, &source, Some(KEY)),
        Err(Error::Schema(_))
    ));
    assert!(matches!(
        download(MetricCode::DIFF, &source, Some(KEY)),
        Err(Error::HttpStatus { status: 404, .. })
    ));
}

#[test]
fn unreachable_host_is_a_transport_error() {
    let port = std::net::TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port();
    let source = RemoteSource::new(format!("http://127.0.0.1:{port}"));
    assert!(matches!(
        download(MetricCode::MKPRU, &source, Some(KEY)),
        Err(Error::Transport(_))
    ));
}

#[test]
fn fetch_writes_snapshot_that_reloads_identically() {
    let dir = tempfile::tempdir().unwrap();
    let source = RemoteSource::new(datalink());
    let fetched = fetch_remote(MetricCode::MKPRU, &source, Some(KEY), dir.path()).unwrap();
    let reloaded = load_snapshot(dir.path(), MetricCode::MKPRU).unwrap();
    assert_eq!(fetched, reloaded);
    let archived: Vec<_> = fs::read_dir(dir.path().join("archive")).unwrap().collect();
    assert_eq!(archived.len(), 1);
}

#[test]
fn refetch_of_unchanged_source_gives_identical_file() {
    let dir = tempfile::tempdir().unwrap();
    let source = RemoteSource::new(datalink());
    let path = snapshot_path(dir.path(), MetricCode::MKPRU);
    fetch_remote(MetricCode::MKPRU, &source, Some(KEY), dir.path()).unwrap();
    let first = fs::read(&path).unwrap();
    fetch_remote(MetricCode::MKPRU, &source, Some(KEY), dir.path()).unwrap();
    assert_eq!(first, fs::read(&path).unwrap());
}

#[test]
fn failed_fetch_leaves_no_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    let source = RemoteSource::new(datalink());
    assert!(fetch_remote(MetricCode::MKPRU, &source, Some("wrong"), dir.path()).is_err());
    assert!(!snapshot_path(dir.path(), MetricCode::MKPRU).exists());
}
