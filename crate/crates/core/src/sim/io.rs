//! Line-delimited JSON formats for streams, queries and traces.

use std::io::{BufRead, Write};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::memory::Frame;
use crate::sim::pipeline::ActionTrace;
use crate::sim::queries::Query;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FrameRecord {
    index: usize,
    dim: usize,
    data: Vec<f64>,
}

fn io_err(e: std::io::Error) -> Error {
    Error::Data(e.to_string())
}

/// Reads one JSON record per line, reporting failures by line and byte offset.
fn read_records<R: BufRead, T: DeserializeOwned>(
    mut input: R,
    what: &str,
) -> Result<Vec<(T, usize, u64)>> {
    let mut out = Vec::new();
    let mut offset = 0u64;
    let mut line_no = 0usize;
    let mut line = String::new();
    loop {
        line.clear();
        let n = input.read_line(&mut line).map_err(io_err)?;
        if n == 0 {
            break;
        }
        line_no += 1;
        let start = offset;
        offset += n as u64;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(line.trim_end()).map_err(|e| {
            Error::Data(format!(
                "malformed {what} record at line {line_no} (byte offset {start}): {e}"
            ))
        })?;
        out.push((record, line_no, start));
    }
    Ok(out)
}

pub fn write_stream_jsonl<W: Write>(mut out: W, frames: &[Frame]) -> Result<()> {
    for f in frames {
        let record = FrameRecord {
            index: f.index,
            dim: f.dim(),
            data: f.tokens.iter().flatten().copied().collect(),
        };
        serde_json::to_writer(&mut out, &record).map_err(|e| Error::Data(e.to_string()))?;
        out.write_all(b"\n").map_err(io_err)?;
    }
    Ok(())
}

pub fn read_stream_jsonl<R: BufRead>(input: R) -> Result<Vec<Frame>> {
    let records: Vec<(FrameRecord, usize, u64)> = read_records(input, "frame")?;
    let mut frames = Vec::with_capacity(records.len());
    for (r, line, offset) in records {
        let bad = |msg: String| {
            Error::Data(format!(
                "frame record at line {line} (byte offset {offset}): {msg}"
            ))
        };
        if r.dim == 0 || r.data.len() % r.dim != 0 {
            return Err(bad(format!(
                "{} values do not split into tokens of dimension {}",
                r.data.len(),
                r.dim
            )));
        }
        if r.index != frames.len() + 1 {
            return Err(bad(format!(
                "expected frame index {}, found {}",
                frames.len() + 1,
                r.index
            )));
        }
        let tokens = r.data.chunks(r.dim).map(<[f64]>::to_vec).collect();
        frames.push(Frame::new(r.index, tokens).map_err(|e| bad(e.to_string()))?);
    }
    Ok(frames)
}

pub fn write_queries_jsonl<W: Write>(mut out: W, queries: &[Query]) -> Result<()> {
    for q in queries {
        serde_json::to_writer(&mut out, q).map_err(|e| Error::Data(e.to_string()))?;
        out.write_all(b"\n").map_err(io_err)?;
    }
    Ok(())
}

pub fn read_queries_jsonl<R: BufRead>(input: R) -> Result<Vec<Query>> {
    let records: Vec<(Query, usize, u64)> = read_records(input, "query")?;
    records
        .into_iter()
        .map(|(q, line, offset)| {
            q.validate().map_err(|e| {
                Error::Data(format!(
                    "query record at line {line} (byte offset {offset}): {e}"
                ))
            })?;
            Ok(q)
        })
        .collect()
}

pub fn write_trace_jsonl<W: Write>(mut out: W, trace: &[ActionTrace]) -> Result<()> {
    for t in trace {
        serde_json::to_writer(&mut out, t).map_err(|e| Error::Data(e.to_string()))?;
        out.write_all(b"\n").map_err(io_err)?;
    }
    Ok(())
}
