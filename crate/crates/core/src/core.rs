//! Domain types shared by the analytics engine and the simulator.
//!
//! An [`EncoderSubset`] is a bitmask over the model's encoders where a set
//! bit means the encoder is ACTIVE (data sources typically mark the masked
//! ones; ingestion converts). All types here are immutable values.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};

/// Highest encoder count supported by exhaustive enumeration.
pub const MAX_ENCODERS: usize = 16;

/// A named encoder slot within one model.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EncoderId {
    pub index: usize,
    pub name: String,
}

impl EncoderId {
    pub fn new(index: usize, name: impl Into<String>) -> Self {
        Self {
            index,
            name: name.into(),
        }
    }
}

impl fmt::Display for EncoderId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name)
    }
}

/// Subset of a model's encoders, bit i set ⇔ encoder i active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EncoderSubset {
    bits: u32,
    n: usize,
}

impl EncoderSubset {
    pub fn new(bits: u32, n: usize) -> Result<Self> {
        if n == 0 || n > MAX_ENCODERS {
            return Err(Error::EncoderCountOutOfRange(n));
        }
        if u64::from(bits) >= 1u64 << n {
            return Err(Error::ShapeMismatch(format!(
                "subset bits {bits:#b} do not fit {n} encoders"
            )));
        }
        Ok(Self { bits, n })
    }

    pub fn empty(n: usize) -> Result<Self> {
        Self::new(0, n)
    }

    pub fn full(n: usize) -> Result<Self> {
        if n == 0 || n > MAX_ENCODERS {
            return Err(Error::EncoderCountOutOfRange(n));
        }
        Ok(Self {
            bits: ((1u64 << n) - 1) as u32,
            n,
        })
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn encoder_count(&self) -> usize {
        self.n
    }

    /// Number of active encoders.
    pub fn active_count(&self) -> usize {
        self.bits.count_ones() as usize
    }

    /// Number of masked encoders.
    pub fn masked_count(&self) -> usize {
        self.n - self.active_count()
    }

    pub fn contains(&self, index: usize) -> bool {
        index < self.n && self.bits & (1 << index) != 0
    }

    pub fn is_empty(&self) -> bool {
        self.bits == 0
    }

    pub fn is_full(&self) -> bool {
        self.active_count() == self.n
    }

    /// Indices of active encoders, ascending.
    pub fn active_indices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |i| self.contains(*i))
    }

    /// Indices of masked encoders, ascending.
    pub fn masked_indices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |i| !self.contains(*i))
    }

    /// The subset with encoder `index` additionally activated.
    pub fn with(&self, index: usize) -> Result<Self> {
        if index >= self.n {
            return Err(Error::EncoderIndexOutOfRange { index, n: self.n });
        }
        Ok(Self {
            bits: self.bits | (1 << index),
            n: self.n,
        })
    }
}

impl fmt::Display for EncoderSubset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in (0..self.n).rev() {
            write!(f, "{}", u32::from(self.contains(i)))?;
        }
        Ok(())
    }
}

/// All 2^n subsets in ascending bitmask order.
pub fn subset_enumerate(n: usize) -> Result<Vec<EncoderSubset>> {
    if n == 0 || n > MAX_ENCODERS {
        return Err(Error::EncoderCountOutOfRange(n));
    }
    Ok((0..1u64 << n)
        .map(|bits| EncoderSubset {
            bits: bits as u32,
            n,
        })
        .collect())
}

/// Clears bit `index` in `subset`; the encoder must currently be active.
pub fn subset_without(subset: EncoderSubset, index: usize) -> Result<EncoderSubset> {
    if index >= subset.n {
        return Err(Error::EncoderIndexOutOfRange {
            index,
            n: subset.n,
        });
    }
    if !subset.contains(index) {
        return Err(Error::EncoderNotActive {
            index,
            bits: subset.bits,
        });
    }
    Ok(EncoderSubset {
        bits: subset.bits & !(1 << index),
        n: subset.n,
    })
}

/// The four benchmark categories of the evaluation taxonomy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Category {
    General,
    Knowledge,
    OcrChart,
    VisionCentric,
}

impl Category {
    pub const ALL: [Category; 4] = [
        Category::General,
        Category::Knowledge,
        Category::OcrChart,
        Category::VisionCentric,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Category::General => "General",
            Category::Knowledge => "Knowledge",
            Category::OcrChart => "OCR & Chart",
            Category::VisionCentric => "Vision-Centric",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Category {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "General" => Ok(Category::General),
            "Knowledge" => Ok(Category::Knowledge),
            "OCR & Chart" => Ok(Category::OcrChart),
            "Vision-Centric" => Ok(Category::VisionCentric),
            other => Err(Error::UnknownCategory(other.to_string())),
        }
    }
}

/// Whether a table's rows are individual benchmarks or already per-category.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Granularity {
    PerBenchmark,
    PerCategory,
}

impl Granularity {
    pub fn as_str(&self) -> &'static str {
        match self {
            Granularity::PerBenchmark => "per-benchmark",
            Granularity::PerCategory => "per-category",
        }
    }
}

impl std::str::FromStr for Granularity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "per-benchmark" => Ok(Granularity::PerBenchmark),
            "per-category" => Ok(Granularity::PerCategory),
            other => Err(Error::Config(format!("unknown granularity '{other}'"))),
        }
    }
}

/// Benchmark scores for every evaluated encoder subset of one model.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable {
    pub model_name: String,
    pub encoders: Vec<EncoderId>,
    pub granularity: Granularity,
    entries: BTreeMap<(EncoderSubset, String), f64>,
}

impl ScoreTable {
    pub fn new(
        model_name: impl Into<String>,
        encoders: Vec<EncoderId>,
        granularity: Granularity,
    ) -> Result<Self> {
        let n = encoders.len();
        if n == 0 || n > MAX_ENCODERS {
            return Err(Error::EncoderCountOutOfRange(n));
        }
        for (i, e) in encoders.iter().enumerate() {
            if e.index != i {
                return Err(Error::Config(format!(
                    "encoder '{}' has index {} but sits at position {i}",
                    e.name, e.index
                )));
            }
            if encoders.iter().filter(|o| o.name == e.name).count() > 1 {
                return Err(Error::Config(format!("duplicate encoder name '{}'", e.name)));
            }
        }
        Ok(Self {
            model_name: model_name.into(),
            encoders,
            granularity,
            entries: BTreeMap::new(),
        })
    }

    pub fn encoder_count(&self) -> usize {
        self.encoders.len()
    }

    pub fn encoder_index(&self, name: &str) -> Option<usize> {
        self.encoders.iter().position(|e| e.name == name)
    }

    pub fn insert(&mut self, subset: EncoderSubset, benchmark: &str, score: f64) -> Result<()> {
        if subset.encoder_count() != self.encoder_count() {
            return Err(Error::ShapeMismatch(format!(
                "subset over {} encoders inserted into a table with {}",
                subset.encoder_count(),
                self.encoder_count()
            )));
        }
        if !score.is_finite() {
            return Err(Error::NonFiniteScore(score));
        }
        let key = (subset, benchmark.to_string());
        if self.entries.contains_key(&key) {
            return Err(Error::DuplicateEntry {
                subset: subset.to_string(),
                benchmark: benchmark.to_string(),
            });
        }
        self.entries.insert(key, score);
        Ok(())
    }

    pub fn get(&self, subset: EncoderSubset, benchmark: &str) -> Option<f64> {
        self.entries.get(&(subset, benchmark.to_string())).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries in ascending (subset bits, benchmark) order.
    pub fn iter(&self) -> impl Iterator<Item = (EncoderSubset, &str, f64)> {
        self.entries
            .iter()
            .map(|((s, b), v)| (*s, b.as_str(), *v))
    }

    /// Distinct subsets present, ascending by bitmask.
    pub fn subsets(&self) -> Vec<EncoderSubset> {
        let mut out: Vec<EncoderSubset> = Vec::new();
        for (s, _, _) in self.iter() {
            if out.last() != Some(&s) {
                out.push(s);
            }
        }
        out
    }

    /// Distinct benchmark names present, ascending.
    pub fn benchmarks(&self) -> Vec<String> {
        let mut out: Vec<String> = self.entries.keys().map(|(_, b)| b.clone()).collect();
        out.sort();
        out.dedup();
        out
    }
}
