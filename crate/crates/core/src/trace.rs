//! Solar trace ingestion.
//!
//! Field recordings arrive as CSV with header `slot,harvest_ma,lux`:
//! one row per slot, indices dense from 0, harvested current in mA and
//! ambient light in lux. The harvest column drives the energy arrival
//! process directly; the light column becomes a value stream by scoring
//! how much each sliding window of readings diverges from the window
//! just before it — a burst of change in the environment is worth
//! observing, a steady signal is not.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::kl::voi_from_window;
use crate::sources::{HarvestProcess, VoiSource};

/// One validated trace row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    /// Slot index, dense from 0.
    pub slot: usize,
    /// Harvested current during the slot, mA.
    pub harvest_ma: f64,
    /// Ambient light during the slot, lux.
    pub lux: f64,
}

/// Expected header line.
pub const TRACE_HEADER: &str = "slot,harvest_ma,lux";

fn parse_field(raw: &str, name: &str, line: usize) -> Result<f64> {
    let value: f64 = raw
        .trim()
        .parse()
        .map_err(|_| Error::TraceFormat(format!("line {line}: {name} '{}' is not a number", raw.trim())))?;
    if value < 0.0 {
        return Err(Error::TraceFormat(format!("line {line}: negative {name} {value}")));
    }
    if !value.is_finite() {
        return Err(Error::TraceFormat(format!("line {line}: non-finite {name}")));
    }
    Ok(value)
}

/// Parses and validates a trace file.
///
/// Errors name what is wrong and where: a bad header, a row with the
/// wrong column count, a non-numeric or negative value (by line), or a
/// gap in the slot sequence (by the missing slot).
pub fn load_trace(path: &Path) -> Result<Vec<TraceRecord>> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::TraceFormat(format!("cannot read {}: {e}", path.display())))?;
    parse_trace(&text)
}

/// [`load_trace`] on already-read text.
pub fn parse_trace(text: &str) -> Result<Vec<TraceRecord>> {
    let mut lines = text.lines().enumerate();
    let header = match lines.next() {
        Some((_, line)) => line.trim(),
        None => return Err(Error::TraceFormat("empty file".into())),
    };
    if header != TRACE_HEADER {
        return Err(Error::TraceFormat(format!(
            "header '{header}' should be '{TRACE_HEADER}'"
        )));
    }

    let mut records = Vec::new();
    for (index, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let file_line = index + 1;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(Error::TraceFormat(format!(
                "line {file_line}: {} columns instead of 3",
                fields.len()
            )));
        }
        let slot: usize = fields[0].trim().parse().map_err(|_| {
            Error::TraceFormat(format!("line {file_line}: slot '{}' is not an index", fields[0].trim()))
        })?;
        let expected = records.len();
        if slot != expected {
            return Err(Error::TraceFormat(format!(
                "line {file_line}: slot {slot} where {expected} was expected (missing slot {expected})"
            )));
        }
        records.push(TraceRecord {
            slot,
            harvest_ma: parse_field(fields[1], "harvest_ma", file_line)?,
            lux: parse_field(fields[2], "lux", file_line)?,
        });
    }
    Ok(records)
}

/// Energy arrival process carried by the trace's harvest column.
pub fn harvest_from_trace(records: &[TraceRecord], threshold: f64) -> Result<HarvestProcess> {
    HarvestProcess::from_powers(records.iter().map(|r| r.harvest_ma).collect(), threshold)
}

/// Per-slot observation value derived from the light column.
///
/// Slot t compares the `window` readings ending at t against the
/// `window` readings just before them; slots without two full windows
/// of history score 0 (nothing to diverge from yet).
pub fn voi_from_lux(lux: &[f64], window: usize, bins: usize) -> Result<Vec<f64>> {
    if window == 0 {
        return Err(Error::InvalidParameter { name: "window", value: 0.0 });
    }
    let mut values = Vec::with_capacity(lux.len());
    for t in 0..lux.len() {
        if t + 1 < 2 * window {
            values.push(0.0);
        } else {
            let observed = &lux[t + 1 - window..=t];
            let reference = &lux[t + 1 - 2 * window..t + 1 - window];
            values.push(voi_from_window(observed, reference, bins)?);
        }
    }
    Ok(values)
}

/// Value stream carried by the trace's light column.
pub fn voi_from_trace(records: &[TraceRecord], window: usize, bins: usize) -> Result<VoiSource> {
    let lux: Vec<f64> = records.iter().map(|r| r.lux).collect();
    VoiSource::from_values(voi_from_lux(&lux, window, bins)?)
}
