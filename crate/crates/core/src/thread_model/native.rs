//! Native JSONL corpus format, one thread per line.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{finalize_thread, ClaimLabel, Dataset, Reply, Split, Stance, Thread, VeracityLabel};
use crate::error::DataError;

#[derive(Serialize, Deserialize)]
struct ThreadRecord {
    thread_id: String,
    veracity: String,
    source: SourceRecord,
    replies: Vec<ReplyRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    split: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct SourceRecord {
    id: String,
    text: String,
    time: i64,
    /// Only written when the source is explicitly a non-claim.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    claim: Option<bool>,
}

#[derive(Serialize, Deserialize)]
struct ReplyRecord {
    id: String,
    parent_id: String,
    text: String,
    time: i64,
    stance: String,
    claim: bool,
}

fn record_to_thread(rec: ThreadRecord) -> Result<(Thread, Split), DataError> {
    let veracity: VeracityLabel = rec.veracity.parse()?;
    let split = match rec.split.as_deref() {
        None => Split::Train,
        Some(s) => s.parse()?,
    };
    let source = Reply {
        id: rec.source.id,
        parent_id: None,
        text: rec.source.text,
        time: rec.source.time,
        stance: Stance::Root,
        claim: rec.source.claim.unwrap_or(true).into(),
    };
    let replies = rec
        .replies
        .into_iter()
        .map(|r| {
            Ok(Reply {
                stance: r.stance.parse()?,
                id: r.id,
                parent_id: Some(r.parent_id),
                text: r.text,
                time: r.time,
                claim: r.claim.into(),
            })
        })
        .collect::<Result<Vec<_>, DataError>>()?;
    let thread = finalize_thread(Thread {
        thread_id: rec.thread_id,
        source,
        replies,
        veracity,
    })?;
    Ok((thread, split))
}

/// Reads a native JSONL corpus. Blank lines are skipped; a missing `split`
/// key means `train`.
pub fn read_native(path: &Path) -> Result<Dataset, DataError> {
    let io_err = |source| DataError::Io {
        path: path.to_path_buf(),
        source,
    };
    let reader = BufReader::new(File::open(path).map_err(io_err)?);
    let mut ds = Dataset::default();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |message: String| DataError::Malformed {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let rec: ThreadRecord =
            serde_json::from_str(&line).map_err(|e| malformed(e.to_string()))?;
        let (thread, split) = record_to_thread(rec).map_err(|e| match e {
            DataError::Malformed { .. } => e,
            other => malformed(other.to_string()),
        })?;
        ds.push(thread, split)
            .map_err(|e| malformed(e.to_string()))?;
    }
    Ok(ds)
}

/// Serializes one thread as a native JSONL line (without trailing newline).
pub fn to_native_line(t: &Thread, split: Split) -> String {
    let rec = ThreadRecord {
        thread_id: t.thread_id.clone(),
        veracity: t.veracity.as_str().to_string(),
        source: SourceRecord {
            id: t.source.id.clone(),
            text: t.source.text.clone(),
            time: t.source.time,
            claim: (t.source.claim == ClaimLabel::NonClaim).then_some(false),
        },
        replies: t
            .replies
            .iter()
            .map(|r| ReplyRecord {
                id: r.id.clone(),
                parent_id: r.parent_id.clone().unwrap_or_default(),
                text: r.text.clone(),
                time: r.time,
                stance: r.stance.as_str().to_string(),
                claim: r.claim.is_claim(),
            })
            .collect(),
        split: Some(split.as_str().to_string()),
    };
    serde_json::to_string(&rec).expect("thread records always serialize")
}

pub fn write_native(ds: &Dataset, path: &Path) -> Result<(), DataError> {
    let io_err = |source| DataError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut out = std::io::BufWriter::new(File::create(path).map_err(io_err)?);
    for t in &ds.threads {
        let split = ds.split_of(&t.thread_id).unwrap_or(Split::Train);
        writeln!(out, "{}", to_native_line(t, split)).map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}
