//! Trace records and their CSV form.
//!
//! Values (and times) are snapped to their 9-significant-digit decimal form
//! when a record is created, so analysis over in-memory records and analysis
//! over a written-then-reparsed CSV agree bit for bit.

use std::fmt;
use std::io::{self, BufRead, Write};
use std::str::FromStr;

use thiserror::Error;

use crate::units::{PortId, VcId};

pub const CSV_HEADER: &str = "time_us,kind,subject,value";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TraceParseError {
    #[error("line {line}: expected header {CSV_HEADER:?}, got {got:?}")]
    BadHeader { line: usize, got: String },
    #[error("line {line}: expected 4 comma-separated fields, got {got}")]
    BadShape { line: usize, got: usize },
    #[error("line {line}: {message}")]
    BadField { line: usize, message: String },
}

/// What a record measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum TraceKind {
    /// A source's transmission rate, recorded when it changes.
    Tcr,
    /// A source's measured rate, recorded at each averaging expiry.
    Ocr,
    /// Adjustment factor delivered to a source by a feedback cell.
    LafFeedback,
    /// Fraction of a channel's bandwidth used over the last sample window.
    LinkUtil,
    /// Cells queued on a channel at the sample instant.
    QueueLen,
    /// A port's measured load level, recorded at each interval expiry.
    Z,
}

impl TraceKind {
    pub const ALL: [TraceKind; 6] = [
        TraceKind::Tcr,
        TraceKind::Ocr,
        TraceKind::LafFeedback,
        TraceKind::LinkUtil,
        TraceKind::QueueLen,
        TraceKind::Z,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TraceKind::Tcr => "tcr",
            TraceKind::Ocr => "ocr",
            TraceKind::LafFeedback => "laf_feedback",
            TraceKind::LinkUtil => "link_util",
            TraceKind::QueueLen => "queue_len",
            TraceKind::Z => "z",
        }
    }
}

impl fmt::Display for TraceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TraceKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TraceKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown trace kind {s:?}"))
    }
}

/// What a record is about: a VC or one directed link channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Subject {
    Vc(VcId),
    Link(PortId),
}

impl fmt::Display for Subject {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Subject::Vc(vc) => vc.fmt(f),
            Subject::Link(port) => port.fmt(f),
        }
    }
}

impl FromStr for Subject {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.starts_with("vc") {
            s.parse().map(Subject::Vc)
        } else {
            s.parse().map(Subject::Link)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub time_us: f64,
    pub kind: TraceKind,
    pub subject: Subject,
    pub value: f64,
}

impl TraceRecord {
    pub fn new(time_us: f64, kind: TraceKind, subject: Subject, value: f64) -> TraceRecord {
        TraceRecord {
            time_us: quantize(time_us),
            kind,
            subject,
            value: quantize(value),
        }
    }

    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{}",
            format_sig9(self.time_us),
            self.kind,
            self.subject,
            format_sig9(self.value)
        )
    }

    pub fn parse_csv_line(line: &str, line_no: usize) -> Result<TraceRecord, TraceParseError> {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(TraceParseError::BadShape {
                line: line_no,
                got: fields.len(),
            });
        }
        let field = |message: String| TraceParseError::BadField {
            line: line_no,
            message,
        };
        let time_us: f64 = fields[0]
            .parse()
            .map_err(|_| field(format!("bad time {:?}", fields[0])))?;
        let kind = fields[1].parse().map_err(field)?;
        let subject = fields[2].parse().map_err(field)?;
        let value: f64 = fields[3]
            .parse()
            .map_err(|_| field(format!("bad value {:?}", fields[3])))?;
        Ok(TraceRecord {
            time_us,
            kind,
            subject,
            value,
        })
    }
}

/// Nine significant digits, exponent form: the written form of every number
/// in a trace.
pub fn format_sig9(v: f64) -> String {
    format!("{v:.8e}")
}

/// The double nearest the written form; applied at record creation.
pub fn quantize(v: f64) -> f64 {
    debug_assert!(v.is_finite(), "trace values must be finite, got {v}");
    format_sig9(v).parse().expect("sig-9 form always parses")
}

/// Writes the header and one line per record.
pub fn write_csv<W: Write>(records: &[TraceRecord], mut out: W) -> io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for record in records {
        writeln!(out, "{}", record.csv_line())?;
    }
    Ok(())
}

/// Parses what [`write_csv`] wrote, header included.
pub fn read_csv<R: BufRead>(input: R) -> Result<Vec<TraceRecord>, TraceParseError> {
    let mut records = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| TraceParseError::BadField {
            line: i + 1,
            message: e.to_string(),
        })?;
        if i == 0 {
            if line.trim_end() != CSV_HEADER {
                return Err(TraceParseError::BadHeader { line: 1, got: line });
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        records.push(TraceRecord::parse_csv_line(&line, i + 1)?);
    }
    Ok(records)
}
