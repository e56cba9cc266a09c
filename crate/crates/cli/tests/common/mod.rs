#![allow(dead_code)]

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::Arc;
use std::thread;

pub const NOT_FOUND_BODY: &str =
    r#"{"chart":{"result":null,"error":{"code":"Not Found","description":"No data found, symbol may be delisted"}}}"#;

pub fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests").join("fixtures")
}

pub fn chart_fixture(name: &str) -> String {
    std::fs::read_to_string(fixtures_dir().join(format!("chart_{name}.json"))).unwrap()
}

/// Serves `/v8/finance/chart/{ticker}` from a fixed table; unknown tickers get 404.
pub struct ChartServer {
    pub url: String,
}

impl ChartServer {
    pub fn start(routes: HashMap<String, (u16, String)>) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}", listener.local_addr().unwrap());
        let routes = Arc::new(routes);
        thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(mut stream) = stream else { continue };
                let routes = Arc::clone(&routes);
                thread::spawn(move || {
                    let mut reader = BufReader::new(stream.try_clone().unwrap());
                    let mut request_line = String::new();
                    if reader.read_line(&mut request_line).is_err() {
                        return;
                    }
                    loop {
                        let mut line = String::new();
                        match reader.read_line(&mut line) {
                            Ok(0) | Err(_) => break,
                            Ok(_) if line == "\r\n" || line == "\n" => break,
                            Ok(_) => {}
                        }
                    }
                    let path = request_line.split_whitespace().nth(1).unwrap_or("");
                    let path = path.split('?').next().unwrap_or("");
                    let ticker = path.strip_prefix("/v8/finance/chart/").unwrap_or("");
                    let (status, body) = routes
                        .get(ticker)
                        .cloned()
                        .unwrap_or((404, NOT_FOUND_BODY.to_string()));
                    let reason = match status {
                        200 => "OK",
                        404 => "Not Found",
                        _ => "Error",
                    };
                    let _ = write!(
                        stream,
                        "HTTP/1.1 {status} {reason}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                        body.len()
                    );
                    let _ = stream.flush();
                });
            }
        });
        ChartServer { url }
    }

    /// ALPHA and BETA from the fixture files.
    pub fn with_fixtures() -> Self {
        let mut routes = HashMap::new();
        for name in ["ALPHA", "BETA"] {
            routes.insert(name.to_string(), (200, chart_fixture(name)));
        }
        routes.insert("BROKEN".to_string(), (503, "upstream unavailable".to_string()));
        Self::start(routes)
    }
}

/// A small, fast model over the fixture series.
pub fn small_config(dir: &Path, extra: &str) -> PathBuf {
    let text = format!(
        r#"{{
  "tickers": ["ALPHA", "BETA"],
  "start": "2019-01-01",
  "end": "2020-06-01",
  "pipeline": {{"no_steps": 10}},
  "model": {{"no_units": 6, "epochs": 2, "batch_size": 32}},
  "outdir": "{}",
  "seed": 7{extra}
}}"#,
        dir.join("out").display()
    );
    let path = dir.join("config.json");
    std::fs::write(&path, text).unwrap();
    path
}

pub fn stockcaster(endpoint: &str, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stockcaster"))
        .args(args)
        .env("STOCKCASTER_ENDPOINT", endpoint)
        .env_remove("STOCKCASTER_HTTP_PROXY")
        .env_remove("RUST_LOG")
        .output()
        .unwrap()
}

pub fn code(out: &Output) -> i32 {
    out.status.code().unwrap_or(-1)
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}
