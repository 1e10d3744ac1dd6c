#![allow(dead_code)]

use std::collections::HashMap;
use std::io::{BufRead, BufReader};
use std::net::SocketAddr;
use std::process::{Child, Command, Output, Stdio};

pub const BIN: &str = env!("CARGO_BIN_EXE_make-kex");

pub struct Run {
    pub code: i32,
    pub stdout: String,
    pub fields: HashMap<String, String>,
}

impl Run {
    pub fn get(&self, key: &str) -> &str {
        self.fields.get(key).map(String::as_str).unwrap_or_else(|| panic!("no {key} in\n{}", self.stdout))
    }

    /// Records other than timings, in order.
    pub fn stable_lines(&self) -> Vec<&str> {
        self.stdout.lines().filter(|l| !l.starts_with("time.")).collect()
    }
}

pub fn parse(out: Output) -> Run {
    let stdout = String::from_utf8(out.stdout).unwrap();
    let fields = stdout
        .lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
    Run { code: out.status.code().unwrap_or(-1), stdout, fields }
}

pub fn run(args: &[&str]) -> Run {
    parse(Command::new(BIN).args(args).stderr(Stdio::null()).output().unwrap())
}

/// Starts `serve` on an ephemeral port and returns it with its address.
pub fn spawn_server(extra: &[&str]) -> (Child, SocketAddr, BufReader<std::process::ChildStdout>) {
    let mut child = Command::new(BIN)
        .args(["serve", "--listen", "127.0.0.1:0"])
        .args(extra)
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let mut out = BufReader::new(child.stdout.take().unwrap());
    let mut line = String::new();
    out.read_line(&mut line).unwrap();
    let addr = line.trim().strip_prefix("listening=").expect("listening line").parse().unwrap();
    (child, addr, out)
}

/// Waits for a server started by [`spawn_server`] and parses the rest of
/// its output.
pub fn finish_server(mut child: Child, mut rest: BufReader<std::process::ChildStdout>) -> Run {
    let mut stdout = String::new();
    std::io::Read::read_to_string(&mut rest, &mut stdout).unwrap();
    let status = child.wait().unwrap();
    let fields = stdout
        .lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
    Run { code: status.code().unwrap_or(-1), stdout, fields }
}
