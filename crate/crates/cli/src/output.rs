//! Report envelopes and table rendering shared by the commands.

use clap::ValueEnum;
use serde::Serialize;

use crate::scenario::SCHEMA;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Json,
    Csv,
    Text,
}

/// How a command finished; maps onto the process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Status {
    Ok,
    /// Some piece has zero clearance along the plan.
    Saturated,
    /// A pairwise term missed its tolerance; the report is still complete.
    NotConverged,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Ok => 0,
            Status::Saturated => 2,
            Status::NotConverged => 3,
        }
    }

    /// Saturation is reported in preference to non-convergence.
    pub fn worst(self, other: Status) -> Status {
        match (self, other) {
            (Status::Saturated, _) | (_, Status::Saturated) => Status::Saturated,
            (Status::NotConverged, _) | (_, Status::NotConverged) => Status::NotConverged,
            _ => Status::Ok,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub body: String,
    pub status: Status,
}

#[derive(Debug, Clone, Serialize)]
pub struct Tool {
    pub name: &'static str,
    pub version: &'static str,
}

pub const TOOL: Tool = Tool {
    name: "brisk",
    version: env!("CARGO_PKG_VERSION"),
};

/// Every JSON artifact starts with the schema tag, the producing tool and
/// the command that made it.
#[derive(Debug, Clone, Serialize)]
pub struct Envelope<T: Serialize> {
    pub schema: &'static str,
    pub tool: Tool,
    pub command: &'static str,
    #[serde(flatten)]
    pub body: T,
}

pub fn envelope_json<T: Serialize>(command: &'static str, body: T) -> String {
    let env = Envelope {
        schema: SCHEMA,
        tool: TOOL,
        command,
        body,
    };
    let mut s = serde_json::to_string_pretty(&env).expect("report serializes");
    s.push('\n');
    s
}

/// One line per row from serializable records.
pub fn csv_table<T: Serialize>(rows: &[T]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("row serializes");
    }
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8 csv")
}

/// Left-aligned columns separated by two spaces.
pub fn text_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let line = |cells: Vec<&str>| {
        let s: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        s.join("  ").trim_end().to_string() + "\n"
    };
    let mut out = line(header.to_vec());
    for r in rows {
        out += &line(r.iter().map(String::as_str).collect());
    }
    out
}

/// Probabilities in text output.
pub fn num(v: f64) -> String {
    format!("{v:.6e}")
}
