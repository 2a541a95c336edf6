//! Independent brute-force recomputation of every report quantity, written
//! as straight-line loops over the raw table. Used by the self-test and the
//! equivalence suite to cross-check the engine bit for bit. Nothing here
//! calls into [`crate::metrics`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::core::{Category, EncoderId, EncoderSubset, Granularity, ScoreTable};
use crate::ingest::CategoryScheme;
use crate::metrics::{Column, CurRule};

/// Per-subset scores recomputed naively, indexed by raw subset bits.
pub struct BruteForce {
    pub n: usize,
    pub categories: Vec<Category>,
    /// per_category[bits][cat_index]
    pub per_category: Vec<Vec<Option<f64>>>,
    /// overall[bits]
    pub overall: Vec<Option<f64>>,
}

impl BruteForce {
    /// Recompute normalized category scores and overall means by scanning
    /// the table row by row.
    pub fn compute(table: &ScoreTable, scheme: &CategoryScheme) -> Self {
        let n = table.encoder_count();
        let size = 1usize << n;

        let mut categories: Vec<Category> = Vec::new();
        for cat in Category::ALL {
            let mut found = false;
            for (_, benchmark, _) in table.iter() {
                let c = match table.granularity {
                    Granularity::PerCategory => benchmark.parse::<Category>().ok(),
                    Granularity::PerBenchmark => scheme.category_of(benchmark),
                };
                if c == Some(cat) {
                    found = true;
                    break;
                }
            }
            if found {
                categories.push(cat);
            }
        }

        let mut per_category: Vec<Vec<Option<f64>>> = vec![vec![None; categories.len()]; size];
        for bits in 0..size {
            let subset = EncoderSubset::new(bits as u32, n).expect("bits in range");
            for (ci, cat) in categories.iter().enumerate() {
                let mut sum = 0.0;
                let mut count = 0usize;
                for (s, benchmark, score) in table.iter() {
                    if s != subset {
                        continue;
                    }
                    let (c, value) = match table.granularity {
                        Granularity::PerCategory => {
                            (benchmark.parse::<Category>().ok(), score)
                        }
                        Granularity::PerBenchmark => (
                            scheme.category_of(benchmark),
                            score / scheme.divisor_of(benchmark),
                        ),
                    };
                    if c == Some(*cat) {
                        sum += value;
                        count += 1;
                    }
                }
                if count > 0 {
                    per_category[bits][ci] = Some(sum / count as f64);
                }
            }
        }

        let mut overall: Vec<Option<f64>> = vec![None; size];
        for bits in 0..size {
            let mut sum = 0.0;
            let mut complete = !categories.is_empty();
            for ci in 0..categories.len() {
                match per_category[bits][ci] {
                    Some(v) => sum += v,
                    None => complete = false,
                }
            }
            if complete {
                overall[bits] = Some(sum / categories.len() as f64);
            }
        }

        Self {
            n,
            categories,
            per_category,
            overall,
        }
    }

    fn cat_index(&self, category: Category) -> Option<usize> {
        self.categories.iter().position(|c| *c == category)
    }

    pub fn category_score(&self, bits: usize, category: Category) -> Option<f64> {
        self.per_category[bits][self.cat_index(category)?]
    }

    /// CUR at a given size under either rule; None when no qualifying pair.
    pub fn cur_at_size(
        &self,
        index: usize,
        size: usize,
        category: Category,
        rule: CurRule,
    ) -> Option<f64> {
        let ci = self.cat_index(category)?;
        let mut drops_sum = 0.0;
        let mut with_sum = 0.0;
        let mut without_sum = 0.0;
        let mut count = 0usize;
        for bits in 0..(1usize << self.n) {
            if (bits.count_ones() as usize) != size || bits & (1 << index) == 0 {
                continue;
            }
            let Some(with_score) = self.per_category[bits][ci] else {
                continue;
            };
            let comp = bits & !(1 << index);
            let Some(without_score) = self.per_category[comp][ci] else {
                continue;
            };
            drops_sum += (with_score - without_score) / with_score;
            with_sum += with_score;
            without_sum += without_score;
            count += 1;
        }
        if count == 0 {
            return None;
        }
        match rule {
            CurRule::PerSubsetMean => Some(drops_sum / count as f64),
            CurRule::MeanOfScores => {
                let mean_with = with_sum / count as f64;
                let mean_without = without_sum / count as f64;
                Some((mean_with - mean_without) / mean_with)
            }
        }
    }

    pub fn information_gap(curs: &[f64]) -> Option<f64> {
        if curs.is_empty() {
            return None;
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
        Some(max - min)
    }

    fn column_score(&self, bits: usize, column: Column) -> Option<f64> {
        match column {
            Column::Category(c) => self.category_score(bits, c),
            Column::Overall => self.overall[bits],
        }
    }

    /// (max, min, mean, rel_change) at one masking level.
    pub fn degradation(
        &self,
        column: Column,
        masked: usize,
    ) -> Option<(f64, f64, f64, Option<f64>)> {
        let full_bits = (1usize << self.n) - 1;
        let baseline = self.column_score(full_bits, column);
        let mut sum = 0.0;
        let mut max = f64::NEG_INFINITY;
        let mut min = f64::INFINITY;
        let mut count = 0usize;
        for bits in 0..(1usize << self.n) {
            if self.n - (bits.count_ones() as usize) != masked {
                continue;
            }
            let Some(v) = self.column_score(bits, column) else {
                continue;
            };
            sum += v;
            if v > max {
                max = v;
            }
            if v < min {
                min = v;
            }
            count += 1;
        }
        if count == 0 {
            return None;
        }
        let mean = sum / count as f64;
        Some((max, min, mean, baseline.map(|b| (mean - b) / b)))
    }

    /// ((max_with, bits), (min_with, bits), (max_without, bits), (min_without, bits))
    #[allow(clippy::type_complexity)]
    pub fn extremes(
        &self,
        index: usize,
        category: Category,
    ) -> Option<((f64, u32), (f64, u32), (f64, u32), (f64, u32))> {
        let mut max_w: Option<(f64, u32)> = None;
        let mut min_w: Option<(f64, u32)> = None;
        let mut max_o: Option<(f64, u32)> = None;
        let mut min_o: Option<(f64, u32)> = None;
        for bits in 1..(1usize << self.n) {
            let Some(v) = self.category_score(bits, category) else {
                continue;
            };
            let slots = if bits & (1 << index) != 0 {
                (&mut max_w, &mut min_w)
            } else {
                (&mut max_o, &mut min_o)
            };
            if slots.0.is_none_or(|(b, _)| v > b) {
                *slots.0 = Some((v, bits as u32));
            }
            if slots.1.is_none_or(|(b, _)| v < b) {
                *slots.1 = Some((v, bits as u32));
            }
        }
        Some((max_w?, min_w?, max_o?, min_o?))
    }

    /// (raised, baseline, best_proper, witness_bits) of the predicate.
    pub fn redundancy(&self, epsilon: f64) -> Option<(bool, f64, f64, u32)> {
        let full_bits = (1usize << self.n) - 1;
        let baseline = self.overall[full_bits]?;
        let mut best: Option<(f64, u32)> = None;
        for bits in 0..full_bits {
            let Some(v) = self.overall[bits] else { continue };
            if best.is_none_or(|(b, _)| v > b) {
                best = Some((v, bits as u32));
            }
        }
        let (best_proper, witness) = best?;
        Some((best_proper >= baseline - epsilon, baseline, best_proper, witness))
    }
}

fn bits_differ(a: f64, b: f64) -> bool {
    a.to_bits() != b.to_bits()
}

/// Recompute every engine quantity by brute force and compare bit for bit.
pub fn check_engine_equivalence(
    table: &ScoreTable,
    scheme: &CategoryScheme,
    rule: CurRule,
    epsilon: f64,
) -> std::result::Result<(), String> {
    let brute = BruteForce::compute(table, scheme);
    let agg = crate::metrics::aggregate_scores(table, scheme)
        .map_err(|e| format!("engine aggregation failed: {e}"))?;
    let n = table.encoder_count();

    if agg.categories != brute.categories {
        return Err(format!(
            "category sets differ: engine {:?} vs brute {:?}",
            agg.categories, brute.categories
        ));
    }

    for bits in 0..(1usize << n) {
        let subset = EncoderSubset::new(bits as u32, n).expect("bits in range");
        for cat in &brute.categories {
            let engine = agg.category_score(subset, *cat);
            let ours = brute.category_score(bits, *cat);
            match (engine, ours) {
                (None, None) => {}
                (Some(a), Some(b)) if !bits_differ(a, b) => {}
                other => {
                    return Err(format!(
                        "category score mismatch at subset {subset} / {cat}: {other:?}"
                    ))
                }
            }
        }
        let engine = agg.overall_score(subset);
        let ours = brute.overall[bits];
        match (engine, ours) {
            (None, None) => {}
            (Some(a), Some(b)) if !bits_differ(a, b) => {}
            other => return Err(format!("overall mismatch at subset {subset}: {other:?}")),
        }
    }

    for cat in &brute.categories {
        for size in 1..=n {
            let mut engine_curs = Vec::new();
            for index in 0..n {
                let engine = crate::metrics::cur_at_size(&agg, index, size, *cat, rule).ok();
                let ours = brute.cur_at_size(index, size, *cat, rule);
                match (engine, ours) {
                    (None, None) => {}
                    (Some(a), Some(b)) if !bits_differ(a, b) => engine_curs.push(a),
                    other => {
                        return Err(format!(
                            "CUR mismatch at {cat} n'={size} encoder {index}: {other:?}"
                        ))
                    }
                }
            }
            let engine_ig = crate::metrics::information_gap(&engine_curs).ok();
            let brute_ig = BruteForce::information_gap(&engine_curs);
            match (engine_ig, brute_ig) {
                (None, None) => {}
                (Some(a), Some(b)) if !bits_differ(a, b) => {}
                other => return Err(format!("IG mismatch at {cat} n'={size}: {other:?}")),
            }
        }
    }

    let summary = crate::metrics::degradation_summary(&agg);
    let mut columns: Vec<Column> = brute.categories.iter().map(|c| Column::Category(*c)).collect();
    columns.push(Column::Overall);
    for column in columns {
        for k in 0..=n {
            let engine = summary.get(column, k);
            let ours = brute.degradation(column, k);
            match (engine, ours) {
                (None, None) => {}
                (Some(row), Some((max, min, mean, rel))) => {
                    if bits_differ(row.max, max)
                        || bits_differ(row.min, min)
                        || bits_differ(row.mean, mean)
                    {
                        return Err(format!("degradation mismatch at {column} k={k}"));
                    }
                    match (row.rel_change, rel) {
                        (None, None) => {}
                        (Some(a), Some(b)) if !bits_differ(a, b) => {}
                        other => {
                            return Err(format!(
                                "degradation rel mismatch at {column} k={k}: {other:?}"
                            ))
                        }
                    }
                }
                other => return Err(format!("degradation row presence at {column} k={k}: {}",
                    other.0.is_some())),
            }
        }
    }

    if n >= 2 {
        for cat in &brute.categories {
            for index in 0..n {
                let engine = crate::metrics::conditional_extremes(&agg, index, *cat).ok();
                let ours = brute.extremes(index, *cat);
                match (engine, ours) {
                    (None, None) => {}
                    (Some(e), Some((mw, nw, mo, no))) => {
                        let pairs = [
                            (e.max_with, mw),
                            (e.min_with, nw),
                            (e.max_without, mo),
                            (e.min_without, no),
                        ];
                        for ((ev, es), (bv, bb)) in pairs {
                            if bits_differ(ev, bv) || es.bits() != bb {
                                return Err(format!(
                                    "extremes mismatch at {cat} encoder {index}"
                                ));
                            }
                        }
                    }
                    other => {
                        return Err(format!(
                            "extremes presence mismatch at {cat} encoder {index}: {}",
                            other.0.is_some()
                        ))
                    }
                }
            }
        }
    }

    let engine = crate::metrics::redundancy_flag(&agg, epsilon).ok();
    let ours = brute.redundancy(epsilon);
    match (engine, ours) {
        (None, None) => {}
        (Some(f), Some((raised, baseline, best, witness))) => {
            if f.raised != raised
                || bits_differ(f.baseline, baseline)
                || bits_differ(f.best_proper, best)
                || f.witness.bits() != witness
            {
                return Err("redundancy predicate mismatch".to_string());
            }
        }
        other => return Err(format!("redundancy presence mismatch: {}", other.0.is_some())),
    }

    Ok(())
}

/// Random small table for the equivalence suite: n <= 4 encoders, a random
/// category subset, occasionally with one subset dropped.
pub fn random_table(seed: u64) -> ScoreTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=4usize);
    let n_cats = rng.gen_range(1..=4usize);
    let cats: Vec<Category> = Category::ALL.into_iter().take(n_cats).collect();
    let encoders: Vec<EncoderId> = (0..n)
        .map(|i| EncoderId::new(i, format!("E{i}")))
        .collect();
    let mut table = ScoreTable::new(format!("random-{seed}"), encoders, Granularity::PerCategory)
        .expect("valid table shape");
    let drop_subset = if rng.gen_bool(0.2) {
        Some(rng.gen_range(0..(1u32 << n)))
    } else {
        None
    };
    for subset in crate::core::subset_enumerate(n).expect("n in range") {
        if Some(subset.bits()) == drop_subset {
            continue;
        }
        for cat in &cats {
            let score: f64 = rng.gen_range(1.0..100.0);
            table
                .insert(subset, cat.as_str(), score)
                .expect("unique keys");
        }
    }
    table
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{default_scheme, fixtures};

    #[test]
    fn engine_matches_brute_force_on_fixtures() {
        let scheme = default_scheme();
        for table in [fixtures::eagle(), fixtures::cambrian()] {
            for rule in [CurRule::PerSubsetMean, CurRule::MeanOfScores] {
                check_engine_equivalence(&table, &scheme, rule, 0.0).unwrap();
            }
        }
    }

    #[test]
    fn engine_matches_brute_force_on_random_tables() {
        let scheme = default_scheme();
        for seed in 0..40 {
            let table = random_table(seed);
            check_engine_equivalence(&table, &scheme, CurRule::PerSubsetMean, 0.0)
                .unwrap_or_else(|e| panic!("seed {seed}: {e}"));
        }
    }
}
