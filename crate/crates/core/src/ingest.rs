//! Parsing, validation and serialization of score tables and category schemes.
//!
//! Both file formats are UTF-8, comma-delimited with a header row and '.' as
//! the decimal separator, versioned by a leading `# redundancy-lab v1` line.
//!
//! Score table columns: `model, masked_encoders, benchmark, score` where
//! `masked_encoders` is a semicolon-joined list of encoder names or `-` for
//! none. Rows list MASKED encoders (as the source tables do); loading
//! complements them against the declared encoder order into ACTIVE subsets.
//!
//! Category scheme columns: `benchmark, category, divisor`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::core::{Category, EncoderId, EncoderSubset, Granularity, ScoreTable};
use crate::error::{Error, Result};

pub const FORMAT_VERSION_LINE: &str = "# redundancy-lab v1";

/// One parsed data row of a score-table file.
#[derive(Debug, Clone, PartialEq)]
pub struct RawScoreRecord {
    pub model: String,
    pub masked_encoders: Vec<String>,
    pub benchmark_or_category: String,
    pub score: f64,
}

fn malformed(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::MalformedRow {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

/// Comment metadata some files carry in addition to the version line.
#[derive(Debug, Default, Clone)]
pub struct FileMetadata {
    pub encoders: Option<Vec<String>>,
    pub granularity: Option<Granularity>,
}

fn split_header_comments<'a>(
    text: &'a str,
    path: &Path,
) -> Result<(FileMetadata, Vec<(usize, &'a str)>)> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, first)) if first.trim() == FORMAT_VERSION_LINE => {}
        Some((_, first)) => {
            return Err(malformed(
                path,
                1,
                format!("expected version line '{FORMAT_VERSION_LINE}', found '{first}'"),
            ))
        }
        None => return Err(Error::EmptyFile(path.to_path_buf())),
    }
    let mut meta = FileMetadata::default();
    let mut rows = Vec::new();
    for (idx, raw) in lines {
        let line = raw.trim_end();
        if line.trim().is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            let comment = comment.trim();
            if let Some(v) = comment.strip_prefix("encoders:") {
                meta.encoders = Some(
                    v.split(';')
                        .map(|s| s.trim().to_string())
                        .filter(|s| !s.is_empty())
                        .collect(),
                );
            } else if let Some(v) = comment.strip_prefix("granularity:") {
                meta.granularity = Some(Granularity::from_str(v)?);
            }
            continue;
        }
        rows.push((idx + 1, line));
    }
    Ok((meta, rows))
}

const SCORE_HEADER: &str = "model,masked_encoders,benchmark,score";
const SCHEME_HEADER: &str = "benchmark,category,divisor";

/// The first non-comment line must be the column header.
fn expect_header<'a>(
    rows: &'a [(usize, &'a str)],
    header: &str,
    path: &Path,
) -> Result<&'a [(usize, &'a str)]> {
    match rows.first() {
        Some((_, line)) if line.trim() == header => Ok(&rows[1..]),
        Some((line_no, line)) => Err(malformed(
            path,
            *line_no,
            format!("expected header '{header}', found '{line}'"),
        )),
        None => Err(Error::EmptyFile(path.to_path_buf())),
    }
}

fn parse_records(rows: &[(usize, &str)], path: &Path) -> Result<Vec<RawScoreRecord>> {
    let rows = expect_header(rows, SCORE_HEADER, path)?;
    let mut out = Vec::with_capacity(rows.len());
    for &(line_no, line) in rows {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(malformed(
                path,
                line_no,
                format!("expected 4 comma-separated fields, found {}", fields.len()),
            ));
        }
        let masked = if fields[1] == "-" || fields[1].is_empty() {
            Vec::new()
        } else {
            fields[1].split(';').map(|s| s.trim().to_string()).collect()
        };
        let score: f64 = fields[3]
            .parse()
            .map_err(|_| malformed(path, line_no, format!("unparseable score '{}'", fields[3])))?;
        if !score.is_finite() {
            return Err(Error::NonFiniteScore(score));
        }
        out.push(RawScoreRecord {
            model: fields[0].to_string(),
            masked_encoders: masked,
            benchmark_or_category: fields[2].to_string(),
            score,
        });
    }
    Ok(out)
}

fn table_from_records(
    records: &[RawScoreRecord],
    encoder_order: &[String],
    granularity: Granularity,
    path: &Path,
) -> Result<ScoreTable> {
    if records.is_empty() {
        return Err(Error::EmptyFile(path.to_path_buf()));
    }
    let encoders: Vec<EncoderId> = encoder_order
        .iter()
        .enumerate()
        .map(|(i, name)| EncoderId::new(i, name.clone()))
        .collect();
    let model = records[0].model.clone();
    let mut table = ScoreTable::new(model.clone(), encoders, granularity)?;
    let n = encoder_order.len();
    let full = EncoderSubset::full(n)?;
    for rec in records {
        if rec.model != model {
            return Err(Error::Config(format!(
                "file mixes models '{}' and '{}'",
                model, rec.model
            )));
        }
        let mut subset = full;
        for name in &rec.masked_encoders {
            let index = encoder_order
                .iter()
                .position(|e| e == name)
                .ok_or_else(|| Error::UnknownEncoder(name.clone()))?;
            subset = crate::core::subset_without(subset, index)?;
        }
        if granularity == Granularity::PerCategory {
            Category::from_str(&rec.benchmark_or_category)?;
        }
        table.insert(subset, &rec.benchmark_or_category, rec.score)?;
    }
    Ok(table)
}

/// Parse a score table from text, complementing masked sets against
/// `encoder_order`.
pub fn parse_score_table(
    text: &str,
    source: &Path,
    encoder_order: &[String],
    granularity: Granularity,
) -> Result<ScoreTable> {
    let (_, rows) = split_header_comments(text, source)?;
    let records = parse_records(&rows, source)?;
    table_from_records(&records, encoder_order, granularity, source)
}

pub fn load_score_table(
    path: impl AsRef<Path>,
    encoder_order: &[String],
    granularity: Granularity,
) -> Result<ScoreTable> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_score_table(&text, path, encoder_order, granularity)
}

/// Load a score table whose encoder order and granularity come from the
/// file's own `# encoders:` / `# granularity:` metadata comments.
pub fn load_score_table_auto(path: impl AsRef<Path>) -> Result<ScoreTable> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_score_table_auto(&text, path)
}

pub fn parse_score_table_auto(text: &str, source: &Path) -> Result<ScoreTable> {
    let (meta, rows) = split_header_comments(text, source)?;
    let encoders = meta.encoders.ok_or_else(|| {
        Error::Config(format!(
            "{}: missing '# encoders: ...' metadata line",
            source.display()
        ))
    })?;
    let granularity = meta.granularity.ok_or_else(|| {
        Error::Config(format!(
            "{}: missing '# granularity: ...' metadata line",
            source.display()
        ))
    })?;
    let records = parse_records(&rows, source)?;
    table_from_records(&records, &encoders, granularity, source)
}

/// Serialize a table in the v1 format. Loading the output yields an
/// identical table.
pub fn write_score_table(table: &ScoreTable) -> String {
    let mut out = String::new();
    out.push_str(FORMAT_VERSION_LINE);
    out.push('\n');
    out.push_str("# encoders: ");
    out.push_str(
        &table
            .encoders
            .iter()
            .map(|e| e.name.as_str())
            .collect::<Vec<_>>()
            .join(";"),
    );
    out.push('\n');
    out.push_str(&format!("# granularity: {}\n", table.granularity.as_str()));
    out.push_str("model,masked_encoders,benchmark,score\n");
    for (subset, benchmark, score) in table.iter() {
        let masked: Vec<&str> = subset
            .masked_indices()
            .map(|i| table.encoders[i].name.as_str())
            .collect();
        let masked = if masked.is_empty() {
            "-".to_string()
        } else {
            masked.join(";")
        };
        out.push_str(&format!(
            "{},{},{},{}\n",
            table.model_name, masked, benchmark, score
        ));
    }
    out
}

pub fn save_score_table(table: &ScoreTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, write_score_table(table)).map_err(|e| Error::io(path, e))
}

/// Benchmark → category mapping with per-benchmark normalization divisors.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoryScheme {
    entries: BTreeMap<String, (Category, f64)>,
}

impl CategoryScheme {
    pub fn new() -> Self {
        Self {
            entries: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, benchmark: &str, category: Category, divisor: f64) -> Result<()> {
        if divisor <= 0.0 || !divisor.is_finite() {
            return Err(Error::NonPositiveDivisor {
                benchmark: benchmark.to_string(),
                divisor,
            });
        }
        if let Some((existing, _)) = self.entries.get(benchmark) {
            if *existing != category {
                return Err(Error::BenchmarkInTwoCategories(benchmark.to_string()));
            }
        }
        self.entries
            .insert(benchmark.to_string(), (category, divisor));
        Ok(())
    }

    pub fn category_of(&self, benchmark: &str) -> Option<Category> {
        self.entries.get(benchmark).map(|(c, _)| *c)
    }

    /// Normalization divisor; 1 for benchmarks not listed.
    pub fn divisor_of(&self, benchmark: &str) -> f64 {
        self.entries.get(benchmark).map_or(1.0, |(_, d)| *d)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, Category, f64)> {
        self.entries.iter().map(|(b, (c, d))| (b.as_str(), *c, *d))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl Default for CategoryScheme {
    fn default() -> Self {
        Self::new()
    }
}

/// The built-in 15-benchmark scheme: MME normalized by 20, OCRBench by 10,
/// everything else taken as-is.
pub fn default_scheme() -> CategoryScheme {
    parse_category_scheme(fixtures::DEFAULT_CATEGORIES, Path::new("<built-in>"))
        .expect("built-in scheme is valid")
}

pub fn parse_category_scheme(text: &str, source: &Path) -> Result<CategoryScheme> {
    let (_, rows) = split_header_comments(text, source)?;
    let rows = expect_header(&rows, SCHEME_HEADER, source)?;
    let mut scheme = CategoryScheme::new();
    for &(line_no, line) in rows {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(malformed(
                source,
                line_no,
                format!("expected 3 comma-separated fields, found {}", fields.len()),
            ));
        }
        let category = Category::from_str(fields[1])?;
        let divisor: f64 = fields[2].parse().map_err(|_| {
            malformed(source, line_no, format!("unparseable divisor '{}'", fields[2]))
        })?;
        if scheme.entries.contains_key(fields[0]) {
            return Err(Error::BenchmarkInTwoCategories(fields[0].to_string()));
        }
        scheme.insert(fields[0], category, divisor)?;
    }
    Ok(scheme)
}

pub fn load_category_scheme(path: impl AsRef<Path>) -> Result<CategoryScheme> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_category_scheme(&text, path)
}

pub fn write_category_scheme(scheme: &CategoryScheme) -> String {
    let mut out = String::new();
    out.push_str(FORMAT_VERSION_LINE);
    out.push('\n');
    out.push_str("benchmark,category,divisor\n");
    for (b, c, d) in scheme.iter() {
        out.push_str(&format!("{},{},{}\n", b, c, d));
    }
    out
}

/// The source tables of the two reference models, shipped verbatim.
pub mod fixtures {
    use super::*;

    pub const EAGLE_X5_7B: &str = include_str!("../fixtures/eagle_x5_7b.csv");
    pub const CAMBRIAN1_8B: &str = include_str!("../fixtures/cambrian1_8b.csv");
    pub const DEFAULT_CATEGORIES: &str = include_str!("../fixtures/categories_default.csv");

    pub fn eagle() -> ScoreTable {
        parse_score_table_auto(EAGLE_X5_7B, Path::new("<eagle fixture>"))
            .expect("bundled Eagle fixture is valid")
    }

    pub fn cambrian() -> ScoreTable {
        parse_score_table_auto(CAMBRIAN1_8B, Path::new("<cambrian fixture>"))
            .expect("bundled Cambrian fixture is valid")
    }

    /// Fixtures by short name, as accepted by the CLI.
    pub fn by_name(name: &str) -> Option<ScoreTable> {
        match name {
            "eagle" => Some(eagle()),
            "cambrian" => Some(cambrian()),
            _ => None,
        }
    }
}

/// Writes `content` to `path` atomically (temp file + rename).
pub fn write_atomic(path: &Path, content: &str) -> Result<()> {
    let tmp: PathBuf = {
        let mut name = path
            .file_name()
            .map(|s| s.to_os_string())
            .unwrap_or_default();
        name.push(".tmp");
        path.with_file_name(name)
    };
    std::fs::write(&tmp, content).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}
