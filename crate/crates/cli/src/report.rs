use std::fmt::Display;
use std::io::{self, Write};
use std::time::Duration;

/// Output of one subcommand. Records go to stdout as `key=value` lines,
/// followed by `time.*` lines; a readable table goes to stderr.
#[derive(Debug)]
pub struct RunReport {
    command: &'static str,
    records: Vec<(String, String)>,
    timings: Vec<(String, Duration)>,
    pub exit_code: u8,
}

impl RunReport {
    pub fn new(command: &'static str) -> Self {
        RunReport { command, records: Vec::new(), timings: Vec::new(), exit_code: 0 }
    }

    pub fn field(&mut self, key: impl Into<String>, value: impl Display) -> &mut Self {
        self.records.push((key.into(), value.to_string()));
        self
    }

    pub fn time(&mut self, key: impl Into<String>, d: Duration) -> &mut Self {
        self.timings.push((key.into(), d));
        self
    }

    pub fn emit(&self) -> io::Result<()> {
        let mut out = io::stdout().lock();
        writeln!(out, "command={}", self.command)?;
        for (k, v) in &self.records {
            writeln!(out, "{k}={v}")?;
        }
        for (k, d) in &self.timings {
            writeln!(out, "time.{k}_ms={:.3}", d.as_secs_f64() * 1e3)?;
        }
        out.flush()?;

        let mut err = io::stderr().lock();
        writeln!(err, "make-kex {}", self.command)?;
        let width = self.records.iter().map(|(k, _)| k.len()).chain(self.timings.iter().map(|(k, _)| k.len())).max();
        let width = width.unwrap_or(0);
        for (k, v) in &self.records {
            let v = if v.len() > 72 { format!("{}... ({} chars)", &v[..64], v.len()) } else { v.clone() };
            writeln!(err, "  {k:<width$}  {v}")?;
        }
        for (k, d) in &self.timings {
            writeln!(err, "  {k:<width$}  {d:.3?}")?;
        }
        Ok(())
    }
}
