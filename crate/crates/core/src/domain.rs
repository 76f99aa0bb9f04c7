//! Discrete product domains, record encoding and datasets with frequencies.
//!
//! A domain is an ordered list of attribute blocks. A [`BlockKind::Bit`]
//! contributes one coordinate taking values `{0, 1}`; a
//! [`BlockKind::OneHot`] block of cardinality `k` contributes `k`
//! coordinates of which exactly one is set. Every downstream computation
//! treats a block as a single variable with `values()` possible assignments,
//! so one-hot constraints are never violated by construction.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

/// Default floor for interior marginals.
pub const DEFAULT_ETA_MIN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockKind {
    Bit,
    OneHot { cardinality: usize },
}

impl BlockKind {
    /// Number of coordinates the block occupies.
    pub fn width(&self) -> usize {
        match *self {
            BlockKind::Bit => 1,
            BlockKind::OneHot { cardinality } => cardinality,
        }
    }

    /// Number of distinct assignments of the block.
    pub fn values(&self) -> usize {
        match *self {
            BlockKind::Bit => 2,
            BlockKind::OneHot { cardinality } => cardinality,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Feature,
    Label,
    Protected,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttributeBlock {
    pub name: String,
    pub kind: BlockKind,
    pub role: Role,
    /// First coordinate of the block in the flattened bit vector.
    pub offset: usize,
    /// Human-readable value labels, one per block value.
    pub labels: Vec<String>,
}

impl AttributeBlock {
    pub fn bit(name: &str, role: Role) -> Self {
        Self {
            name: name.to_string(),
            kind: BlockKind::Bit,
            role,
            offset: 0,
            labels: alloc::vec!["0".to_string(), "1".to_string()],
        }
    }

    pub fn one_hot(name: &str, cardinality: usize, role: Role) -> Self {
        Self {
            name: name.to_string(),
            kind: BlockKind::OneHot { cardinality },
            role,
            offset: 0,
            labels: (0..cardinality).map(|c| c.to_string()).collect(),
        }
    }

    pub fn with_labels<S: AsRef<str>>(mut self, labels: &[S]) -> Self {
        self.labels = labels.iter().map(|s| s.as_ref().to_string()).collect();
        self
    }

    pub fn width(&self) -> usize {
        self.kind.width()
    }

    pub fn values(&self) -> usize {
        self.kind.values()
    }

    pub fn coordinates(&self) -> core::ops::Range<usize> {
        self.offset..self.offset + self.width()
    }

    /// Coordinates (absolute indices) set to 1 when the block takes `value`.
    pub fn hot_coordinate(&self, value: u32) -> Option<usize> {
        match self.kind {
            BlockKind::Bit => (value == 1).then_some(self.offset),
            BlockKind::OneHot { .. } => Some(self.offset + value as usize),
        }
    }

    /// Looks up a value label.
    pub fn value_of(&self, label: &str) -> Option<u32> {
        self.labels.iter().position(|l| l == label).map(|i| i as u32)
    }

    fn read_value(&self, bits: &[u8]) -> Result<u32> {
        match self.kind {
            BlockKind::Bit => match bits[self.offset] {
                0 => Ok(0),
                1 => Ok(1),
                _ => Err(Error::InvalidOneHot {
                    block: self.name.clone(),
                }),
            },
            BlockKind::OneHot { .. } => {
                let slice = &bits[self.coordinates()];
                let mut hot = None;
                for (c, &b) in slice.iter().enumerate() {
                    match b {
                        0 => {}
                        1 if hot.is_none() => hot = Some(c as u32),
                        _ => {
                            return Err(Error::InvalidOneHot {
                                block: self.name.clone(),
                            })
                        }
                    }
                }
                hot.ok_or_else(|| Error::InvalidOneHot {
                    block: self.name.clone(),
                })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DomainSchema {
    blocks: Vec<AttributeBlock>,
    dim: usize,
    protected: Option<usize>,
    label: Option<usize>,
    scaled_group: u32,
}

impl DomainSchema {
    /// Builds a schema, assigning contiguous offsets in block order.
    pub fn new(mut blocks: Vec<AttributeBlock>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::InvalidSchema("schema has no blocks".to_string()));
        }
        let mut offset = 0;
        let mut protected = None;
        let mut label = None;
        for (i, block) in blocks.iter_mut().enumerate() {
            if let BlockKind::OneHot { cardinality } = block.kind {
                if cardinality < 2 {
                    return Err(Error::InvalidSchema(alloc::format!(
                        "one-hot block `{}` needs at least two categories",
                        block.name
                    )));
                }
            }
            if block.labels.len() != block.values() {
                return Err(Error::InvalidSchema(alloc::format!(
                    "block `{}` has {} labels for {} values",
                    block.name,
                    block.labels.len(),
                    block.values()
                )));
            }
            let slot = match block.role {
                Role::Protected => Some(&mut protected),
                Role::Label => Some(&mut label),
                Role::Feature => None,
            };
            if let Some(slot) = slot {
                if slot.is_some() {
                    return Err(Error::InvalidSchema(alloc::format!(
                        "more than one {:?} block",
                        block.role
                    )));
                }
                *slot = Some(i);
            }
            block.offset = offset;
            offset += block.width();
        }
        for (i, a) in blocks.iter().enumerate() {
            if blocks[..i].iter().any(|b| b.name == a.name) {
                return Err(Error::InvalidSchema(alloc::format!(
                    "duplicate block name `{}`",
                    a.name
                )));
            }
        }
        Ok(Self {
            blocks,
            dim: offset,
            protected,
            label,
            scaled_group: 0,
        })
    }

    /// Chooses which protected group receives the `tau` factor during
    /// reweighting (default 0).
    pub fn with_scaled_group(mut self, group: u32) -> Result<Self> {
        if group > 1 {
            return Err(Error::InvalidSchema(
                "scaled group must be 0 or 1".to_string(),
            ));
        }
        self.scaled_group = group;
        Ok(self)
    }

    pub fn blocks(&self) -> &[AttributeBlock] {
        &self.blocks
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn scaled_group(&self) -> u32 {
        self.scaled_group
    }

    pub fn protected_block(&self) -> Result<usize> {
        self.protected.ok_or(Error::MissingRole("protected"))
    }

    pub fn label_block(&self) -> Result<usize> {
        self.label.ok_or(Error::MissingRole("label"))
    }

    /// Coordinate index of the protected attribute (its block offset).
    pub fn protected_index(&self) -> Result<usize> {
        Ok(self.blocks[self.protected_block()?].offset)
    }

    pub fn block_by_name(&self, name: &str) -> Option<usize> {
        self.blocks.iter().position(|b| b.name == name)
    }

    /// Natural log of the number of points in the domain.
    pub fn log_domain_size(&self) -> f64 {
        self.blocks.iter().map(|b| math::ln(b.values() as f64)).sum()
    }

    /// Number of points in the domain, as a float (it can exceed `u64`).
    pub fn domain_size(&self) -> f64 {
        self.blocks.iter().map(|b| b.values() as f64).product()
    }

    /// Checks the one-hot invariants and returns the block values of `p`.
    pub fn block_values(&self, p: &DataPoint) -> Result<Vec<u32>> {
        if p.bits().len() != self.dim {
            return Err(Error::InvalidPoint {
                expected: self.dim,
                got: p.bits().len(),
            });
        }
        self.blocks.iter().map(|b| b.read_value(p.bits())).collect()
    }

    /// Builds a point directly from block values, with range checks.
    pub fn point_from_values(&self, values: &[u32]) -> Result<DataPoint> {
        if values.len() != self.blocks.len() {
            return Err(Error::ArityMismatch {
                expected: self.blocks.len(),
                got: values.len(),
            });
        }
        let mut bits = alloc::vec![0u8; self.dim];
        for (block, &v) in self.blocks.iter().zip(values) {
            if v as usize >= block.values() {
                return Err(Error::UnknownCategory {
                    block: block.name.clone(),
                    value: v,
                    cardinality: block.values(),
                });
            }
            if let Some(c) = block.hot_coordinate(v) {
                bits[c] = 1;
            }
        }
        Ok(DataPoint(bits.into_boxed_slice()))
    }
}

impl DomainSchema {
    /// Iterates over every point of the domain as block values, last block
    /// varying fastest. Fails if the domain has more than `limit` points.
    pub fn enumerate(&self, limit: f64) -> Result<DomainIter> {
        let size = self.domain_size();
        if size > limit {
            return Err(Error::DomainTooLarge { size, limit });
        }
        Ok(DomainIter {
            radix: self.blocks.iter().map(|b| b.values() as u32).collect(),
            next: Some(alloc::vec![0; self.blocks.len()]),
        })
    }
}

/// Odometer over block assignments; see [`DomainSchema::enumerate`].
#[derive(Debug, Clone)]
pub struct DomainIter {
    radix: Vec<u32>,
    next: Option<Vec<u32>>,
}

impl Iterator for DomainIter {
    type Item = Vec<u32>;

    fn next(&mut self) -> Option<Vec<u32>> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        for i in (0..succ.len()).rev() {
            succ[i] += 1;
            if succ[i] < self.radix[i] {
                self.next = Some(succ);
                return Some(current);
            }
            succ[i] = 0;
        }
        Some(current)
    }
}

/// A point of the domain as a flat 0/1 vector.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DataPoint(Box<[u8]>);

impl DataPoint {
    pub fn from_bits(bits: Vec<u8>) -> Self {
        Self(bits.into_boxed_slice())
    }

    pub fn bits(&self) -> &[u8] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Indices of coordinates equal to 1.
    pub fn active(&self) -> impl Iterator<Item = usize> + '_ {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &b)| b != 0)
            .map(|(i, _)| i)
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.0.iter().map(|&b| b as f64).collect()
    }
}

impl core::fmt::Display for DataPoint {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        for &b in self.0.iter() {
            f.write_str(if b == 0 { "0" } else { "1" })?;
        }
        Ok(())
    }
}

/// One-hot encodes a record given as one value index per block.
pub fn encode_record(schema: &DomainSchema, raw: &[u32]) -> Result<DataPoint> {
    schema.point_from_values(raw)
}

/// Inverse of [`encode_record`].
pub fn decode_point(schema: &DomainSchema, p: &DataPoint) -> Result<Vec<u32>> {
    schema.block_values(p)
}

/// Distinct points with positive integer frequencies.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    points: Vec<DataPoint>,
    freqs: Vec<u64>,
    index: BTreeMap<DataPoint, usize>,
    total: u64,
}

impl Dataset {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a dataset from encoded records, merging duplicates.
    pub fn from_records(schema: &DomainSchema, records: &[Vec<u32>]) -> Result<Self> {
        let mut ds = Self::new();
        for r in records {
            ds.insert(encode_record(schema, r)?, 1);
        }
        Ok(ds)
    }

    /// Adds `count` copies of `point`; duplicates merge their frequencies.
    /// A zero count is ignored.
    pub fn insert(&mut self, point: DataPoint, count: u64) {
        if count == 0 {
            return;
        }
        self.total += count;
        if let Some(&i) = self.index.get(&point) {
            self.freqs[i] += count;
            return;
        }
        self.index.insert(point.clone(), self.points.len());
        self.points.push(point);
        self.freqs.push(count);
    }

    /// Checks every point against `schema`.
    pub fn validate(&self, schema: &DomainSchema) -> Result<()> {
        for p in &self.points {
            schema.block_values(p)?;
        }
        Ok(())
    }

    pub fn points(&self) -> &[DataPoint] {
        &self.points
    }

    pub fn frequencies(&self) -> &[u64] {
        &self.freqs
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Total count `N`.
    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn frequency_of(&self, p: &DataPoint) -> u64 {
        self.index.get(p).map_or(0, |&i| self.freqs[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&DataPoint, u64)> {
        self.points.iter().zip(self.freqs.iter().copied())
    }
}

/// Frequency-weighted mean of the encoded points.
pub fn empirical_marginal(ds: &Dataset) -> Result<Vec<f64>> {
    let first = ds.points().first().ok_or(Error::EmptyDataset)?;
    let mut counts = alloc::vec![0u64; first.dim()];
    for (p, n) in ds.iter() {
        for i in p.active() {
            counts[i] += n;
        }
    }
    let total = ds.total() as f64;
    Ok(counts.into_iter().map(|c| c as f64 / total).collect())
}

/// Returns `eta = min_i min(theta_i, 1 - theta_i)` if it is at least
/// `eta_min`.
pub fn validate_interior(theta: &[f64], eta_min: f64) -> Result<f64> {
    let mut eta = f64::INFINITY;
    for (i, &t) in theta.iter().enumerate() {
        let e = f64::min(t, 1.0 - t);
        if !(e >= eta_min) {
            return Err(Error::BoundaryMarginal {
                coordinate: i,
                value: t,
                eta_min,
            });
        }
        eta = eta.min(e);
    }
    Ok(eta)
}

/// Pushes boundary coordinates to `[eta_min, 1 - eta_min]`, renormalizing
/// one-hot blocks, and logs a warning for every coordinate it touches.
pub fn clamp_interior(schema: &DomainSchema, theta: &[f64], eta_min: f64) -> Vec<f64> {
    let mut out = theta.to_vec();
    for block in schema.blocks() {
        let coords = block.coordinates();
        let mut touched = false;
        for i in coords.clone() {
            let c = out[i].clamp(eta_min, 1.0 - eta_min);
            if c != out[i] {
                log::warn!(
                    "clamping marginal coordinate {} of block `{}` from {} to {}",
                    i,
                    block.name,
                    out[i],
                    c
                );
                out[i] = c;
                touched = true;
            }
        }
        if touched && matches!(block.kind, BlockKind::OneHot { .. }) {
            let s: f64 = out[coords.clone()].iter().sum();
            for i in coords {
                out[i] /= s;
            }
        }
    }
    out
}
