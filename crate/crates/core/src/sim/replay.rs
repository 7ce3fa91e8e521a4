use std::collections::VecDeque;
use std::path::Path;

use thiserror::Error;

use crate::config::ConfigError;
use crate::engine::Engine;
use crate::protocol::{decode, read_log_lines, EngineDriver, LogEntry, Stamped};

/// First log line whose recorded engine output differs from a fresh run.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("divergence at log line {line}: expected {expected}, replay produced {actual}")]
pub struct DivergenceError {
    pub line: usize,
    pub expected: String,
    pub actual: String,
}

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error(transparent)]
    Divergence(#[from] DivergenceError),
    #[error("cannot read log {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("log line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("log header: {0}")]
    Config(#[from] ConfigError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ReplayReport {
    /// Engine events re-fed (inbound messages and ticks).
    pub events: u64,
    /// Emissions compared.
    pub emissions: usize,
}

fn describe(s: &Stamped, n: u64) -> String {
    match s.to {
        Some(to) => format!("to={to} n={n} {}", s.line),
        None => format!("n={n} {}", s.line),
    }
}

fn describe_logged(to: Option<u64>, n: u64, line: &str) -> String {
    match to {
        Some(to) => format!("to={to} n={n} {line}"),
        None => format!("n={n} {line}"),
    }
}

/// Re-feeds the inbound side of a session log into a fresh engine and
/// checks every logged emission against what the engine produces.
///
/// `lines` are `(line number, text)` pairs as read from the log file.
pub fn replay(lines: &[(usize, String)]) -> Result<ReplayReport, ReplayError> {
    let mut report = ReplayReport::default();
    let Some((first_no, first)) = lines.first() else {
        return Ok(report);
    };
    let parse = |no: usize, text: &str| {
        serde_json::from_str::<LogEntry>(text).map_err(|e| ReplayError::Malformed {
            line: no,
            reason: e.to_string(),
        })
    };
    let mut driver = match parse(*first_no, first)? {
        LogEntry::Start { engine, pois, .. } => {
            let mut e = Engine::new(engine)?;
            for p in pois {
                e.add_poi(p);
            }
            EngineDriver::new(e)
        }
        _ => {
            return Err(ReplayError::Malformed {
                line: *first_no,
                reason: "log does not begin with a session header".into(),
            })
        }
    };

    let mut pending: VecDeque<(Stamped, u64)> = VecDeque::new();
    let unmatched = |line: usize, pending: &VecDeque<(Stamped, u64)>, logged: String| {
        let (s, n) = pending.front().expect("non-empty");
        DivergenceError {
            line,
            expected: logged,
            actual: describe(s, *n),
        }
    };

    for (no, text) in &lines[1..] {
        let no = *no;
        let entry = parse(no, text)?;
        let is_out = matches!(entry, LogEntry::Out { .. });
        if !is_out && !pending.is_empty() {
            return Err(unmatched(no, &pending, "no further emission".into()).into());
        }
        match entry {
            LogEntry::Start { .. } => {
                return Err(ReplayError::Malformed {
                    line: no,
                    reason: "second session header".into(),
                })
            }
            LogEntry::In { at, conn, line, .. } => {
                let msg = decode(line.as_bytes()).map_err(|e| DivergenceError {
                    line: no,
                    expected: line.clone(),
                    actual: format!("undecodable inbound line ({e})"),
                })?;
                let out = driver.feed(at, conn, &msg);
                report.events += 1;
                let n = driver.consumed();
                pending.extend(out.into_iter().map(|s| (s, n)));
            }
            LogEntry::Tick { at } => {
                let out = driver.tick(at);
                report.events += 1;
                let n = driver.consumed();
                pending.extend(out.into_iter().map(|s| (s, n)));
            }
            LogEntry::Session { line, .. } => {
                let msg = decode(line.as_bytes()).map_err(|e| ReplayError::Malformed {
                    line: no,
                    reason: format!("session reply does not decode: {e}"),
                })?;
                driver.reserve_through(msg.seq);
            }
            LogEntry::Ctl { .. } => {}
            LogEntry::Out { to, n, line, .. } => {
                let logged = describe_logged(to, n, &line);
                let Some((s, got_n)) = pending.pop_front() else {
                    return Err(DivergenceError {
                        line: no,
                        expected: logged,
                        actual: "no emission".into(),
                    }
                    .into());
                };
                if s.line != line || s.to != to || got_n != n {
                    return Err(DivergenceError {
                        line: no,
                        expected: logged,
                        actual: describe(&s, got_n),
                    }
                    .into());
                }
                report.emissions += 1;
            }
        }
    }
    if !pending.is_empty() {
        let eof = lines.last().map_or(1, |(no, _)| no + 1);
        return Err(unmatched(eof, &pending, "end of log".into()).into());
    }
    Ok(report)
}

pub fn replay_file(path: &Path) -> Result<ReplayReport, ReplayError> {
    let lines = read_log_lines(path).map_err(|source| ReplayError::Io {
        path: path.display().to_string(),
        source,
    })?;
    replay(&lines)
}
