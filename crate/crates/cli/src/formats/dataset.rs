//! Dataset CSV files.
//!
//! A raw (decoded) file has one column per block, named after the block,
//! holding category labels; extra columns are ignored. An encoded file has
//! one 0/1 column per coordinate followed by a `freq` column.

use std::io::Write;
use std::path::Path;

use maxent_debias_core::{BlockKind, DataPoint, Dataset, DomainSchema};
use serde::Serialize;

use crate::error::{CliError, Result};

pub const FREQ_COLUMN: &str = "freq";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockCounts {
    pub name: String,
    pub counts: Vec<(String, u64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EncodeSummary {
    pub rows: u64,
    pub skipped_rows: u64,
    pub distinct_points: usize,
    pub dimension: usize,
    pub blocks: Vec<BlockCounts>,
}

impl EncodeSummary {
    pub fn new(schema: &DomainSchema, ds: &Dataset, skipped_rows: u64) -> Result<Self> {
        let mut blocks: Vec<BlockCounts> = schema
            .blocks()
            .iter()
            .map(|b| BlockCounts {
                name: b.name.clone(),
                counts: b.labels.iter().map(|l| (l.clone(), 0)).collect(),
            })
            .collect();
        for (p, n) in ds.iter() {
            for (b, v) in schema.block_values(p)?.into_iter().enumerate() {
                blocks[b].counts[v as usize].1 += n;
            }
        }
        Ok(Self {
            rows: ds.total(),
            skipped_rows,
            distinct_points: ds.len(),
            dimension: schema.dim(),
            blocks,
        })
    }
}

/// Column names of the encoded format: the block name for a bit, and
/// `block=category` for each coordinate of a categorical block.
pub fn coordinate_names(schema: &DomainSchema) -> Vec<String> {
    let mut out = Vec::with_capacity(schema.dim());
    for b in schema.blocks() {
        match b.kind {
            BlockKind::Bit => out.push(b.name.clone()),
            BlockKind::OneHot { .. } => out.extend(b.labels.iter().map(|l| format!("{}={l}", b.name))),
        }
    }
    out
}

fn reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

fn headers(rdr: &mut csv::Reader<std::fs::File>, path: &Path) -> Result<Vec<String>> {
    Ok(rdr
        .headers()
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?
        .iter()
        .map(str::to_string)
        .collect())
}

/// Whether the file looks like the encoded format.
pub fn is_encoded(path: &Path) -> Result<bool> {
    let mut rdr = reader(path)?;
    Ok(headers(&mut rdr, path)?.last().map(String::as_str) == Some(FREQ_COLUMN))
}

/// Reads raw rows. Every bad row is reported with its line number; unless
/// `skip_bad_rows` is set, any bad row fails the whole read.
pub fn read_raw_csv(schema: &DomainSchema, path: &Path, skip_bad_rows: bool) -> Result<(Dataset, u64)> {
    let mut rdr = reader(path)?;
    let header = headers(&mut rdr, path)?;
    let mut columns = Vec::with_capacity(schema.blocks().len());
    for b in schema.blocks() {
        let col = header.iter().position(|h| h == &b.name).ok_or_else(|| {
            CliError::data(format!("{}: no column named `{}`", path.display(), b.name))
        })?;
        columns.push(col);
    }
    let mut ds = Dataset::new();
    let mut errors = Vec::new();
    let mut skipped = 0;
    let mut values = vec![0u32; columns.len()];
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| CliError::data(format!("{}: line {line}: {e}", path.display())))?;
        let mut bad = None;
        for (b, (&col, block)) in columns.iter().zip(schema.blocks()).enumerate() {
            let cell = rec.get(col).unwrap_or("");
            match block.value_of(cell) {
                Some(v) => values[b] = v,
                None => {
                    bad = Some(format!(
                        "line {line}, column `{}`: unknown category `{cell}`",
                        block.name
                    ));
                    break;
                }
            }
        }
        match bad {
            Some(msg) => {
                log::warn!("{}: {msg}", path.display());
                errors.push(msg);
                skipped += 1;
            }
            None => ds.insert(schema.point_from_values(&values)?, 1),
        }
    }
    if !errors.is_empty() && !skip_bad_rows {
        let shown: Vec<&str> = errors.iter().take(10).map(String::as_str).collect();
        return Err(CliError::data(format!(
            "{}: {} bad row(s): {}",
            path.display(),
            errors.len(),
            shown.join("; ")
        )));
    }
    if ds.is_empty() {
        return Err(CliError::data(format!("{}: no usable rows", path.display())));
    }
    Ok((ds, skipped))
}

pub fn read_encoded_csv(schema: &DomainSchema, path: &Path) -> Result<Dataset> {
    let mut rdr = reader(path)?;
    let header = headers(&mut rdr, path)?;
    let mut expected = coordinate_names(schema);
    expected.push(FREQ_COLUMN.to_string());
    if header != expected {
        return Err(CliError::data(format!(
            "{}: header does not match the schema (expected {})",
            path.display(),
            expected.join(",")
        )));
    }
    let d = schema.dim();
    let mut ds = Dataset::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| CliError::data(format!("{}: line {line}: {e}", path.display())))?;
        let mut bits = Vec::with_capacity(d);
        for cell in rec.iter().take(d) {
            match cell {
                "0" => bits.push(0),
                "1" => bits.push(1),
                _ => return Err(CliError::data(format!("{}: line {line}: `{cell}` is not 0 or 1", path.display()))),
            }
        }
        let freq: u64 = rec[d]
            .parse()
            .map_err(|_| CliError::data(format!("{}: line {line}: bad frequency `{}`", path.display(), &rec[d])))?;
        let p = DataPoint::from_bits(bits);
        schema
            .block_values(&p)
            .map_err(|e| CliError::data(format!("{}: line {line}: {e}", path.display())))?;
        ds.insert(p, freq);
    }
    if ds.is_empty() {
        return Err(CliError::data(format!("{}: no rows", path.display())));
    }
    Ok(ds)
}

/// Reads either format, deciding by the header.
pub fn read_dataset(schema: &DomainSchema, path: &Path, skip_bad_rows: bool) -> Result<Dataset> {
    if is_encoded(path)? {
        read_encoded_csv(schema, path)
    } else {
        Ok(read_raw_csv(schema, path, skip_bad_rows)?.0)
    }
}

pub fn write_encoded_csv(schema: &DomainSchema, ds: &Dataset, path: &Path) -> Result<()> {
    super::write_atomic(path, |w| {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = coordinate_names(schema);
        header.push(FREQ_COLUMN.to_string());
        wtr.write_record(&header).map_err(|e| CliError::data(e.to_string()))?;
        for (p, n) in ds.iter() {
            let mut row: Vec<String> = p.bits().iter().map(|b| b.to_string()).collect();
            row.push(n.to_string());
            wtr.write_record(&row).map_err(|e| CliError::data(e.to_string()))?;
        }
        wtr.flush().map_err(|e| CliError::io(path, e))
    })
}

/// One row per point, in order, with category labels.
pub fn write_decoded_csv(schema: &DomainSchema, points: &[DataPoint], path: &Path) -> Result<()> {
    super::write_atomic(path, |w| write_decoded(schema, points, w))
}

fn write_decoded(schema: &DomainSchema, points: &[DataPoint], w: &mut dyn Write) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let header: Vec<&str> = schema.blocks().iter().map(|b| b.name.as_str()).collect();
    wtr.write_record(&header).map_err(|e| CliError::data(e.to_string()))?;
    for p in points {
        let values = schema.block_values(p)?;
        let row: Vec<&str> = values
            .iter()
            .zip(schema.blocks())
            .map(|(&v, b)| b.labels[v as usize].as_str())
            .collect();
        wtr.write_record(&row).map_err(|e| CliError::data(e.to_string()))?;
    }
    wtr.flush().map_err(|e| CliError::data(e.to_string()))
}
