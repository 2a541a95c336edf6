//! The quantitative machinery: score aggregation, the Conditional
//! Utilization Rate (CUR) of each encoder, the Information Gap (IG),
//! degradation summaries over masking levels, conditional max/min analyses
//! and the redundancy predicate.
//!
//! CUR of encoder i is the relative performance change when i is masked
//! while the rest of the subset stays active:
//!
//! ```text
//! u(E_i) = (acc(S) - acc(S \ {E_i})) / acc(S)
//! ```
//!
//! At sizes below the full set the value is aggregated over all qualifying
//! subsets; the aggregation rule is configurable because the source tables
//! do not pin it down (see [`CurRule`]).

use std::collections::BTreeMap;

use crate::core::{Category, EncoderId, EncoderSubset, Granularity, ScoreTable};
use crate::error::{Error, Result};
use crate::ingest::CategoryScheme;

/// Aggregation rule for CUR at subset sizes below the full set.
///
/// `PerSubsetMean` (the default) averages the per-subset relative drops and
/// reduces exactly to the single-subset formula at full size.
/// `MeanOfScores` first averages the with/without scores and takes the
/// relative drop of the means.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CurRule {
    #[default]
    PerSubsetMean,
    MeanOfScores,
}

impl CurRule {
    pub fn as_str(&self) -> &'static str {
        match self {
            CurRule::PerSubsetMean => "per-subset-mean",
            CurRule::MeanOfScores => "mean-of-scores",
        }
    }
}

impl std::str::FromStr for CurRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per-subset-mean" => Ok(CurRule::PerSubsetMean),
            "mean-of-scores" => Ok(CurRule::MeanOfScores),
            other => Err(Error::Usage(format!("unknown CUR rule '{other}'"))),
        }
    }
}

/// Aggregated per-category and overall scores for one subset.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetScores {
    pub per_category: BTreeMap<Category, f64>,
    /// Mean of the category scores; `None` when a category is missing.
    pub overall: Option<f64>,
}

/// Which subsets and categories the table actually covers.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Coverage {
    pub expected_subsets: usize,
    pub present_subsets: usize,
    pub incomplete_subsets: usize,
    pub notes: Vec<String>,
}

impl Coverage {
    pub fn is_complete(&self) -> bool {
        self.present_subsets == self.expected_subsets && self.incomplete_subsets == 0
    }
}

/// Normalized, category-aggregated view of a [`ScoreTable`].
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregates {
    pub model_name: String,
    pub encoders: Vec<EncoderId>,
    /// Categories present anywhere in the table, canonical order.
    pub categories: Vec<Category>,
    pub by_subset: BTreeMap<EncoderSubset, SubsetScores>,
    pub coverage: Coverage,
}

impl Aggregates {
    pub fn encoder_count(&self) -> usize {
        self.encoders.len()
    }

    pub fn category_score(&self, subset: EncoderSubset, category: Category) -> Option<f64> {
        self.by_subset
            .get(&subset)?
            .per_category
            .get(&category)
            .copied()
    }

    pub fn overall_score(&self, subset: EncoderSubset) -> Option<f64> {
        self.by_subset.get(&subset)?.overall
    }

    pub fn full_subset(&self) -> EncoderSubset {
        EncoderSubset::full(self.encoder_count()).expect("validated encoder count")
    }
}

/// Normalize benchmark scores by their divisors and aggregate to category
/// level; the overall score per subset is the mean of its category scores.
pub fn aggregate_scores(table: &ScoreTable, scheme: &CategoryScheme) -> Result<Aggregates> {
    let n = table.encoder_count();
    let mut by_subset: BTreeMap<EncoderSubset, BTreeMap<Category, (f64, usize)>> = BTreeMap::new();

    for (subset, benchmark, score) in table.iter() {
        let (category, value) = match table.granularity {
            Granularity::PerCategory => (benchmark.parse::<Category>()?, score),
            Granularity::PerBenchmark => {
                let category = scheme
                    .category_of(benchmark)
                    .ok_or_else(|| Error::UnmappedBenchmark(benchmark.to_string()))?;
                (category, score / scheme.divisor_of(benchmark))
            }
        };
        let slot = by_subset
            .entry(subset)
            .or_default()
            .entry(category)
            .or_insert((0.0, 0));
        slot.0 += value;
        slot.1 += 1;
    }

    let mut categories: Vec<Category> = Vec::new();
    for cat in Category::ALL {
        if by_subset.values().any(|m| m.contains_key(&cat)) {
            categories.push(cat);
        }
    }

    let mut coverage = Coverage {
        expected_subsets: 1usize << n,
        present_subsets: by_subset.len(),
        ..Coverage::default()
    };
    if coverage.present_subsets < coverage.expected_subsets {
        coverage.notes.push(format!(
            "{} of {} subsets present",
            coverage.present_subsets, coverage.expected_subsets
        ));
    }

    let mut out: BTreeMap<EncoderSubset, SubsetScores> = BTreeMap::new();
    for (subset, sums) in by_subset {
        let per_category: BTreeMap<Category, f64> = sums
            .into_iter()
            .map(|(c, (sum, count))| (c, sum / count as f64))
            .collect();
        let overall = if categories.iter().all(|c| per_category.contains_key(c)) {
            let mut sum = 0.0;
            for c in &categories {
                sum += per_category[c];
            }
            Some(sum / categories.len() as f64)
        } else {
            coverage.incomplete_subsets += 1;
            coverage
                .notes
                .push(format!("subset {subset} is missing categories"));
            None
        };
        out.insert(
            subset,
            SubsetScores {
                per_category,
                overall,
            },
        );
    }

    Ok(Aggregates {
        model_name: table.model_name.clone(),
        encoders: table.encoders.clone(),
        categories,
        by_subset: out,
        coverage,
    })
}

/// Relative performance change when one encoder is ablated from a context
/// scoring `full_score`. Positive means the encoder was contributing.
pub fn cur(full_score: f64, ablated_score: f64) -> Result<f64> {
    if full_score <= 0.0 || !full_score.is_finite() {
        return Err(Error::UndefinedCur(full_score));
    }
    Ok((full_score - ablated_score) / full_score)
}

/// CUR of encoder `index` in `category`, aggregated over every size-`size`
/// subset that contains it and whose ablated complement is also present.
pub fn cur_at_size(
    agg: &Aggregates,
    index: usize,
    size: usize,
    category: Category,
    rule: CurRule,
) -> Result<f64> {
    let n = agg.encoder_count();
    if index >= n {
        return Err(Error::EncoderIndexOutOfRange { index, n });
    }
    if size == 0 || size > n {
        return Err(Error::InsufficientCoverage(format!(
            "subset size {size} out of range 1..={n}"
        )));
    }

    let mut drops_sum = 0.0;
    let mut with_sum = 0.0;
    let mut without_sum = 0.0;
    let mut count = 0usize;

    for (subset, scores) in &agg.by_subset {
        if subset.active_count() != size || !subset.contains(index) {
            continue;
        }
        let Some(with_score) = scores.per_category.get(&category).copied() else {
            continue;
        };
        let complement = crate::core::subset_without(*subset, index)?;
        let Some(without_score) = agg.category_score(complement, category) else {
            continue;
        };
        drops_sum += cur(with_score, without_score)?;
        with_sum += with_score;
        without_sum += without_score;
        count += 1;
    }

    if count == 0 {
        return Err(Error::InsufficientCoverage(format!(
            "no size-{size} subset containing encoder {} has its ablated complement in the table",
            agg.encoders[index].name
        )));
    }

    match rule {
        CurRule::PerSubsetMean => Ok(drops_sum / count as f64),
        CurRule::MeanOfScores => {
            let mean_with = with_sum / count as f64;
            let mean_without = without_sum / count as f64;
            cur(mean_with, mean_without)
        }
    }
}

/// Information Gap: spread between the strongest and weakest encoder CUR.
pub fn information_gap(curs: &[f64]) -> Result<f64> {
    if curs.is_empty() {
        return Err(Error::EmptyCurList);
    }
    let mut max = curs[0];
    let mut min = curs[0];
    for &c in &curs[1..] {
        if c > max {
            max = c;
        }
        if c < min {
            min = c;
        }
    }
    Ok(max - min)
}

/// Max/min/mean scores at one masking level, relative to baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct DegradationRow {
    pub max: f64,
    pub min: f64,
    pub mean: f64,
    /// (mean − baseline) / baseline; `None` when the baseline is missing.
    pub rel_change: Option<f64>,
    pub subset_count: usize,
}

/// Report column: one of the categories or the overall average.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Column {
    Category(Category),
    Overall,
}

impl std::fmt::Display for Column {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Column::Category(c) => c.fmt(f),
            Column::Overall => f.write_str("Overall"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DegradationSummary {
    pub encoder_count: usize,
    /// Keyed by (column, number of masked encoders).
    pub rows: BTreeMap<(Column, usize), DegradationRow>,
    pub complete: bool,
}

impl DegradationSummary {
    pub fn get(&self, column: Column, masked: usize) -> Option<&DegradationRow> {
        self.rows.get(&(column, masked))
    }
}

/// Score distribution per number of masked encoders, per column.
pub fn degradation_summary(agg: &Aggregates) -> DegradationSummary {
    let n = agg.encoder_count();
    let full = agg.full_subset();
    let mut rows = BTreeMap::new();
    let mut complete = true;

    let mut columns: Vec<Column> = agg.categories.iter().map(|c| Column::Category(*c)).collect();
    columns.push(Column::Overall);

    for column in columns {
        let score_of = |s: &SubsetScores| match column {
            Column::Category(c) => s.per_category.get(&c).copied(),
            Column::Overall => s.overall,
        };
        let baseline = agg.by_subset.get(&full).and_then(score_of);
        if baseline.is_none() {
            complete = false;
        }
        for k in 0..=n {
            let mut sum = 0.0;
            let mut max = f64::NEG_INFINITY;
            let mut min = f64::INFINITY;
            let mut count = 0usize;
            for (subset, scores) in &agg.by_subset {
                if subset.masked_count() != k {
                    continue;
                }
                let Some(v) = score_of(scores) else { continue };
                sum += v;
                if v > max {
                    max = v;
                }
                if v < min {
                    min = v;
                }
                count += 1;
            }
            let expected = binomial(n, n - k);
            if count < expected {
                complete = false;
            }
            if count == 0 {
                continue;
            }
            let mean = sum / count as f64;
            let rel_change = baseline.map(|b| (mean - b) / b);
            rows.insert(
                (column, k),
                DegradationRow {
                    max,
                    min,
                    mean,
                    rel_change,
                    subset_count: count,
                },
            );
        }
    }

    DegradationSummary {
        encoder_count: n,
        rows,
        complete,
    }
}

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    (0..k.min(n - k)).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

/// Best and worst scores over nonempty subsets that contain vs. exclude one
/// encoder. Ties keep the first subset in enumeration order.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalExtremes {
    pub encoder: EncoderId,
    pub category: Category,
    pub max_with: (f64, EncoderSubset),
    pub min_with: (f64, EncoderSubset),
    pub max_without: (f64, EncoderSubset),
    pub min_without: (f64, EncoderSubset),
}

pub fn conditional_extremes(
    agg: &Aggregates,
    index: usize,
    category: Category,
) -> Result<ConditionalExtremes> {
    let n = agg.encoder_count();
    if index >= n {
        return Err(Error::EncoderIndexOutOfRange { index, n });
    }
    let mut with_pool: Vec<(f64, EncoderSubset)> = Vec::new();
    let mut without_pool: Vec<(f64, EncoderSubset)> = Vec::new();
    for (subset, scores) in &agg.by_subset {
        if subset.is_empty() {
            continue;
        }
        let Some(v) = scores.per_category.get(&category).copied() else {
            continue;
        };
        if subset.contains(index) {
            with_pool.push((v, *subset));
        } else {
            without_pool.push((v, *subset));
        }
    }
    let extremes = |pool: &[(f64, EncoderSubset)], which: &str| -> Result<((f64, EncoderSubset), (f64, EncoderSubset))> {
        let mut iter = pool.iter();
        let first = iter.next().ok_or_else(|| {
            Error::InsufficientCoverage(format!(
                "no nonempty subset {which} encoder {} has a {category} score",
                agg.encoders[index].name
            ))
        })?;
        let mut max = *first;
        let mut min = *first;
        for &(v, s) in iter {
            if v > max.0 {
                max = (v, s);
            }
            if v < min.0 {
                min = (v, s);
            }
        }
        Ok((max, min))
    };
    let (max_with, min_with) = extremes(&with_pool, "containing")?;
    let (max_without, min_without) = extremes(&without_pool, "excluding")?;
    Ok(ConditionalExtremes {
        encoder: agg.encoders[index].clone(),
        category,
        max_with,
        min_with,
        max_without,
        min_without,
    })
}

/// Outcome of the redundancy predicate: does some proper subset reach the
/// full set's overall score (within `epsilon`)?
#[derive(Debug, Clone, PartialEq)]
pub struct RedundancyFinding {
    pub raised: bool,
    pub epsilon: f64,
    pub baseline: f64,
    pub best_proper: f64,
    pub witness: EncoderSubset,
    /// (baseline − best_proper) / baseline; negative when a subset wins.
    pub relative_drop: f64,
}

/// Evaluate the redundancy predicate on overall scores. `epsilon` is in
/// score units; 0 demands a proper subset that matches or beats the full set.
pub fn redundancy_flag(agg: &Aggregates, epsilon: f64) -> Result<RedundancyFinding> {
    let full = agg.full_subset();
    let baseline = agg.overall_score(full).ok_or_else(|| {
        Error::InsufficientCoverage("full-set overall score missing".to_string())
    })?;
    let mut best: Option<(f64, EncoderSubset)> = None;
    for (subset, scores) in &agg.by_subset {
        if *subset == full {
            continue;
        }
        let Some(v) = scores.overall else { continue };
        if best.is_none_or(|(b, _)| v > b) {
            best = Some((v, *subset));
        }
    }
    let (best_proper, witness) = best.ok_or_else(|| {
        Error::InsufficientCoverage("no proper subset with an overall score".to_string())
    })?;
    Ok(RedundancyFinding {
        raised: best_proper >= baseline - epsilon,
        epsilon,
        baseline,
        best_proper,
        witness,
        relative_drop: (baseline - best_proper) / baseline,
    })
}
