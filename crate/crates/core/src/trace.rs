//! Trace records and their CSV form.
//!
//! Every row carries the network delay, the per-endpoint blocking delay and
//! the end-to-end delay, with `e2e = 2 * block + net`. For asymmetric sessions
//! `block` is the mean of the two endpoint delays so the identity still holds.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::TimeMs;
use crate::network::PathId;
use crate::scalar::Scalar;

pub const CSV_HEADER: &str = "t_ms,session,event,path,fs_hz,fr_samples,net_ms,block_ms,e2e_ms,detail";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TraceKind {
    Measurement,
    Reroute,
    ModeSwitch,
    BestEffortEnter,
    BestEffortExit,
    EndOfRun,
}

impl TraceKind {
    pub const ALL: [TraceKind; 6] = [
        TraceKind::Measurement,
        TraceKind::Reroute,
        TraceKind::ModeSwitch,
        TraceKind::BestEffortEnter,
        TraceKind::BestEffortExit,
        TraceKind::EndOfRun,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TraceKind::Measurement => "measurement",
            TraceKind::Reroute => "reroute",
            TraceKind::ModeSwitch => "mode-switch",
            TraceKind::BestEffortEnter => "best-effort-enter",
            TraceKind::BestEffortExit => "best-effort-exit",
            TraceKind::EndOfRun => "end-of-run",
        }
    }
}

impl fmt::Display for TraceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TraceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TraceKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::TraceFormat(format!("unknown event type {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEvent<S> {
    pub at_ms: TimeMs,
    pub session_id: String,
    pub kind: TraceKind,
    pub active_path: PathId,
    pub fs_hz: u32,
    pub fr_samples: u32,
    pub network_delay_ms: S,
    pub blocking_delay_ms: S,
    pub e2e_ms: S,
    pub detail: String,
}

impl<S: Scalar> TraceEvent<S> {
    /// `|e2e - (2 * block + net)|`.
    pub fn conservation_error(&self) -> S {
        (self.e2e_ms - (S::lit(2.0) * self.blocking_delay_ms + self.network_delay_ms)).abs()
    }

    /// Copy with delays at CSV resolution; `e2e` is recomputed from the
    /// rounded terms so the identity survives serialization.
    pub fn quantized(&self) -> Self {
        let block = self.blocking_delay_ms.round_4dp();
        let net = self.network_delay_ms.round_4dp();
        Self {
            blocking_delay_ms: block,
            network_delay_ms: net,
            e2e_ms: S::lit(2.0) * block + net,
            ..self.clone()
        }
    }
}

/// Largest conservation error over a trace.
pub fn max_conservation_error<S: Scalar>(trace: &[TraceEvent<S>]) -> S {
    trace
        .iter()
        .map(TraceEvent::conservation_error)
        .fold(S::zero(), S::max)
}

fn quote(detail: &str) -> String {
    format!("\"{}\"", detail.replace('"', "\"\""))
}

pub fn to_csv<S: Scalar>(trace: &[TraceEvent<S>]) -> String {
    let mut out = String::with_capacity(64 * (trace.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for ev in trace {
        let q = ev.quantized();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{:.4},{:.4},{:.4},{}",
            q.at_ms,
            q.session_id,
            q.kind,
            q.active_path,
            q.fs_hz,
            q.fr_samples,
            q.network_delay_ms,
            q.blocking_delay_ms,
            q.e2e_ms,
            quote(&q.detail)
        );
    }
    out
}

pub fn from_csv<S: Scalar>(text: &str) -> Result<Vec<TraceEvent<S>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| Error::TraceFormat(e.to_string()))?
        .iter()
        .collect::<Vec<_>>()
        .join(",");
    if header != CSV_HEADER {
        return Err(Error::TraceFormat(format!("unexpected header {header:?}")));
    }
    let mut out = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::TraceFormat(e.to_string()))?;
        let field = |i: usize| record.get(i).unwrap_or_default();
        let bad = |what: &str| Error::TraceFormat(format!("row {}: invalid {what}", line + 1));
        let num = |i: usize, what: &str| -> Result<S> {
            field(i).parse::<f64>().map(S::lit).map_err(|_| bad(what))
        };
        out.push(TraceEvent {
            at_ms: field(0).parse().map_err(|_| bad("t_ms"))?,
            session_id: field(1).to_owned(),
            kind: field(2).parse()?,
            active_path: PathId(field(3).to_owned()),
            fs_hz: field(4).parse().map_err(|_| bad("fs_hz"))?,
            fr_samples: field(5).parse().map_err(|_| bad("fr_samples"))?,
            network_delay_ms: num(6, "net_ms")?,
            blocking_delay_ms: num(7, "block_ms")?,
            e2e_ms: num(8, "e2e_ms")?,
            detail: field(9).to_owned(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(net: f64, block: f64) -> TraceEvent<f64> {
        TraceEvent {
            at_ms: 65_000,
            session_id: "A->B".into(),
            kind: TraceKind::Reroute,
            active_path: "P2".into(),
            fs_hz: 44_100,
            fr_samples: 512,
            network_delay_ms: net,
            blocking_delay_ms: block,
            e2e_ms: 2.0 * block + net,
            detail: "P1 \"4.0\" -> P2".into(),
        }
    }

    #[test]
    fn csv_layout() {
        let csv = to_csv(&[row(1.0, 512.0 / 44.1)]);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(CSV_HEADER));
        assert_eq!(
            lines.next(),
            Some("65000,A->B,reroute,P2,44100,512,1.0000,11.6100,24.2200,\"P1 \"\"4.0\"\" -> P2\"")
        );
    }

    #[test]
    fn csv_reads_back_and_conserves() {
        let trace = vec![row(1.23456, 512.0 / 44.1), row(0.00004, 16.0 / 3.0)];
        let back: Vec<TraceEvent<f64>> = from_csv(&to_csv(&trace)).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0].detail, trace[0].detail);
        assert!(max_conservation_error(&back) < 1e-9);
        assert!((back[0].e2e_ms - trace[0].e2e_ms).abs() < 2e-4);
    }

    #[test]
    fn csv_rejects_bad_input() {
        assert!(from_csv::<f64>("a,b\n1,2\n").is_err());
        let bad = format!("{CSV_HEADER}\n0,s,teleport,P1,1,1,0,0,0,\"\"\n");
        assert!(from_csv::<f64>(&bad).is_err());
    }
}
