//! Deterministic CSV and JSON writers.
//!
//! Every file opens with a `#`-prefixed header block carrying the config hash
//! and seed. Floats are printed with 17 significant digits.

use std::fmt::Display;
use std::io::Write;

use serde::Serialize;

use crate::error::Result;
use crate::processes::{ChainResult, StateSnapshot};
use crate::rng::hash64;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct OutputHeader {
    pub config_hash: String,
    pub seed: u64,
    /// Additional `key: value` lines.
    pub extra: Vec<(String, String)>,
}

impl OutputHeader {
    pub fn new(config_hash: impl Into<String>, seed: u64) -> Self {
        Self { config_hash: config_hash.into(), seed, extra: Vec::new() }
    }

    pub fn with(mut self, key: &str, value: impl Display) -> Self {
        self.extra.push((key.to_string(), value.to_string()));
        self
    }

    pub fn write<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "# config_hash: {}", self.config_hash)?;
        writeln!(w, "# seed: {}", self.seed)?;
        for (k, v) in &self.extra {
            writeln!(w, "# {k}: {v}")?;
        }
        Ok(())
    }
}

/// 16-hex-digit digest of a text, folding its bytes through [`hash64`].
pub fn digest(text: &str) -> String {
    let h = text.bytes().fold(0xcbf2_9ce4_8422_2325u64, |acc, b| hash64(acc, u64::from(b)));
    format!("{h:016x}")
}

/// Round-trip decimal form of a float.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn coordinate_header(prefix: &[&str], dim: usize) -> Vec<String> {
    prefix.iter().map(|s| s.to_string()).chain((0..dim).map(|i| format!("x{i}"))).collect()
}

fn dim_of<T>(rows: &[Vec<T>]) -> usize {
    rows.first().map_or(0, Vec::len)
}

/// Rows `chain, x0, ..., x{n-1}`.
pub fn write_samples_csv<W: Write>(header: &OutputHeader, mut w: W, samples: &[Vec<f64>]) -> Result<()> {
    header.write(&mut w)?;
    let mut wr = csv::WriterBuilder::new().flexible(true).from_writer(w);
    wr.write_record(coordinate_header(&["chain"], dim_of(samples)))?;
    for (i, x) in samples.iter().enumerate() {
        let row = std::iter::once(i.to_string()).chain(x.iter().map(|v| fmt_f64(*v)));
        wr.write_record(row)?;
    }
    wr.flush()?;
    Ok(())
}

/// Rows `chain, x0, ...` for integer-valued states.
pub fn write_discrete_samples_csv<W: Write, S: Display>(header: &OutputHeader, mut w: W, samples: &[Vec<S>]) -> Result<()> {
    header.write(&mut w)?;
    let mut wr = csv::WriterBuilder::new().flexible(true).from_writer(w);
    wr.write_record(coordinate_header(&["chain"], dim_of(samples)))?;
    for (i, x) in samples.iter().enumerate() {
        wr.write_record(std::iter::once(i.to_string()).chain(x.iter().map(|v| v.to_string())))?;
    }
    wr.flush()?;
    Ok(())
}

/// Long-format rows `chain_id, t, coordinate_index, y_value, x_value`, where
/// `y` is the observation and `x` the denoised estimate at that node.
pub fn write_snapshots_csv<W: Write>(header: &OutputHeader, mut w: W, chains: &[ChainResult]) -> Result<()> {
    header.write(&mut w)?;
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["chain_id", "t", "coordinate_index", "y_value", "x_value"])?;
    for (i, c) in chains.iter().enumerate() {
        for s in &c.snapshots {
            for (k, (y, x)) in s.observation.iter().zip(&s.sample).enumerate() {
                wr.write_record([i.to_string(), fmt_f64(s.t), k.to_string(), fmt_f64(*y), fmt_f64(*x)])?;
            }
        }
    }
    wr.flush()?;
    Ok(())
}

/// Long-format rows `chain_id, t, coordinate, value` of discrete-chain states.
pub fn write_state_snapshots_csv<W: Write, S: Display>(
    header: &OutputHeader,
    mut w: W,
    chains: &[Vec<StateSnapshot<S>>],
) -> Result<()> {
    header.write(&mut w)?;
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["chain_id", "t", "coordinate", "value"])?;
    for (i, snaps) in chains.iter().enumerate() {
        for s in snaps {
            for (k, v) in s.state.iter().enumerate() {
                wr.write_record([i.to_string(), fmt_f64(s.t), k.to_string(), v.to_string()])?;
            }
        }
    }
    wr.flush()?;
    Ok(())
}

/// Header block, then a CSV table of preformatted rows.
pub fn write_rows_csv<W, I>(header: &OutputHeader, mut w: W, columns: &[String], rows: I) -> Result<()>
where
    W: Write,
    I: IntoIterator<Item = Vec<String>>,
{
    header.write(&mut w)?;
    let mut wr = csv::WriterBuilder::new().flexible(true).from_writer(w);
    wr.write_record(columns)?;
    for row in rows {
        wr.write_record(row)?;
    }
    wr.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct JsonEnvelope<'a, T: Serialize> {
    config_hash: &'a str,
    seed: u64,
    extra: &'a [(String, String)],
    data: &'a T,
}

/// `{config_hash, seed, extra, data}`.
pub fn write_json<W: Write, T: Serialize>(header: &OutputHeader, w: W, data: &T) -> Result<()> {
    let env = JsonEnvelope { config_hash: &header.config_hash, seed: header.seed, extra: &header.extra, data };
    serde_json::to_writer_pretty(w, &env)?;
    Ok(())
}

/// Writes the header block then delegates to a CSV producer.
pub fn write_with_header<W: Write, F>(header: &OutputHeader, mut w: W, body: F) -> Result<()>
where
    F: FnOnce(&mut W) -> Result<()>,
{
    header.write(&mut w)?;
    body(&mut w)
}
