//! Synthetic snapshots and a throwaway HTTP server shared by the integration tests.
#![allow(dead_code)]

use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;
use std::path::Path;

use chain_ribbons::ingest::write_snapshot;
use chain_ribbons::{MetricCode, MetricSeries};
use chrono::NaiveDate;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub fn date(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).unwrap()
}

/// Daily values for `code` from 2010-08-16 over `days` records. Prices follow
/// a seeded random walk, monotonic metrics accumulate positive steps, CPTRA
/// oscillates yearly around a rising trend and the rest are noisy cycles.
pub fn synthetic(code: MetricCode, days: usize, seed: u64) -> MetricSeries {
    let mut rng = StdRng::seed_from_u64(seed ^ (code as u64).wrapping_mul(0x9e37_79b9));
    let start = date(2010, 8, 16);
    let mut level: f64 = 10.0;
    let phase = rng.gen_range(0.0..6.0);
    let period = rng.gen_range(90.0..400.0);
    let values: Vec<f64> = (0..days)
        .map(|t| {
            let t = t as f64;
            match code {
                MetricCode::MKPRU => {
                    level *= (rng.gen_range(-0.04..0.045f64)).exp();
                    level
                }
                c if c.is_monotonic() => {
                    level += rng.gen_range(0.0..3.0);
                    level
                }
                MetricCode::CPTRA => {
                    (20.0 + t / 50.0) * (1.6 + (2.0 * std::f64::consts::PI * t / 365.25 + phase).sin())
                        + rng.gen_range(0.0..2.0)
                }
                _ => {
                    100.0
                        + 60.0 * (t / period * std::f64::consts::TAU + phase).sin()
                        + rng.gen_range(0.0..25.0)
                        + t / 20.0
                }
            }
        })
        .collect();
    let dates = (0..days as i64).map(|i| start + chrono::Duration::days(i)).collect();
    MetricSeries::new(code, dates, values).unwrap()
}

/// Writes all 21 snapshots into `dir`.
pub fn write_dataset(dir: &Path, days: usize, seed: u64) {
    for code in MetricCode::ALL {
        write_snapshot(dir, &synthetic(code, days, seed)).unwrap();
    }
}

/// One parsed request as seen by the mock server.
#[derive(Debug, Clone)]
pub struct Request {
    pub target: String,
    pub headers: Vec<(String, String)>,
}

impl Request {
    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_str())
    }
}

/// Serves requests on a loopback port until the test process exits and
/// returns the base URL.
pub fn mock_server<F>(respond: F) -> String
where
    F: Fn(&Request) -> (u16, String) + Send + 'static,
{
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut line = String::new();
            if reader.read_line(&mut line).is_err() {
                continue;
            }
            let target = line.split_whitespace().nth(1).unwrap_or("").to_string();
            let mut headers = Vec::new();
            loop {
                let mut h = String::new();
                if reader.read_line(&mut h).unwrap_or(0) == 0 || h.trim().is_empty() {
                    break;
                }
                if let Some((k, v)) = h.split_once(':') {
                    headers.push((k.trim().to_string(), v.trim().to_string()));
                }
            }
            let (status, body) = respond(&Request { target, headers });
            let _ = write!(
                stream,
                "HTTP/1.1 {status} X\r\nContent-Type: text/csv\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            );
        }
    });
    format!("http://{addr}")
}
