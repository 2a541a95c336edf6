//! Report rendering: CUR/IG and degradation tables as Markdown and CSV,
//! extremes and distribution data as CSV, and a dependency-free SVG box
//! plot of the score distribution per masking level.
//!
//! Percentages are printed at full internal precision rounded half-up to
//! two decimals. All outputs are byte-deterministic for a given report.

use std::path::Path;

use crate::ablate::{CurReport, FullReport};
use crate::core::{EncoderSubset, ScoreTable};
use crate::error::{Error, Result};
use crate::ingest::write_atomic;
use crate::metrics::Column;

/// Output format selection for the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Md,
    Csv,
    All,
}

impl Format {
    fn md(&self) -> bool {
        matches!(self, Format::Md | Format::All)
    }

    fn csv(&self) -> bool {
        matches!(self, Format::Csv | Format::All)
    }
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "md" => Ok(Format::Md),
            "csv" => Ok(Format::Csv),
            "all" => Ok(Format::All),
            other => Err(Error::Usage(format!("unknown format '{other}'"))),
        }
    }
}

/// Round half away from zero to two decimals.
pub fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

/// Fraction -> percent string with two decimals, half-up.
pub fn fmt_pct(frac: f64) -> String {
    format!("{:.2}", (frac * 10000.0).round() / 100.0)
}

/// Score with two decimals, half-up.
pub fn fmt_score(x: f64) -> String {
    format!("{:.2}", round2(x))
}

/// Active encoder names joined by '+', or '-' for the empty set.
pub fn subset_label(subset: EncoderSubset, table: &ScoreTable) -> String {
    let names: Vec<&str> = subset
        .active_indices()
        .map(|i| table.encoders[i].name.as_str())
        .collect();
    if names.is_empty() {
        "-".to_string()
    } else {
        names.join("+")
    }
}

/// A set of report files ready to be written.
#[derive(Debug, Clone, Default)]
pub struct ReportFiles {
    pub files: Vec<(String, String)>,
}

impl ReportFiles {
    pub fn push(&mut self, name: impl Into<String>, content: String) {
        self.files.push((name.into(), content));
    }

    /// Write every file atomically under `dir` (created if missing).
    pub fn write_all(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, content) in &self.files {
            write_atomic(&dir.join(name), content)?;
        }
        Ok(())
    }
}

fn cur_csv(report: &FullReport, table: &ScoreTable) -> String {
    let mut out = String::from("category,n");
    for e in &table.encoders {
        out.push(',');
        out.push_str(&e.name);
    }
    out.push_str(",avg_ig\n");
    for row in &report.cur.rows {
        out.push_str(&format!("{},{}", row.category, row.size));
        for c in &row.curs {
            out.push(',');
            if let Some(v) = c {
                out.push_str(&fmt_pct(*v));
            }
        }
        out.push(',');
        if let Some(ig) = row.ig {
            out.push_str(&fmt_pct(ig));
        }
        out.push('\n');
    }
    out
}

fn cur_md(report: &FullReport, table: &ScoreTable) -> String {
    let mut out = format!(
        "# CUR and IG — {}\n\nRule: {} (percentages, two decimals)\n\n",
        table.model_name,
        report.cur.rule.as_str()
    );
    out.push_str("| Category | n |");
    for e in &table.encoders {
        out.push_str(&format!(" {} |", e.name));
    }
    out.push_str(" Avg IG |\n|---|---|");
    for _ in &table.encoders {
        out.push_str("---|");
    }
    out.push_str("---|\n");
    for row in &report.cur.rows {
        out.push_str(&format!("| {} | {} |", row.category, row.size));
        for c in &row.curs {
            match c {
                Some(v) => out.push_str(&format!(" {} |", fmt_pct(*v))),
                None => out.push_str(" — |"),
            }
        }
        match row.ig {
            Some(ig) => out.push_str(&format!(" {} |\n", fmt_pct(ig))),
            None => out.push_str(" — |\n"),
        }
    }
    out.push_str(
        "\nSizes below the full set depend on the aggregation rule; \
         see cur_rules.csv for both candidate rules side by side.\n",
    );
    if !report.notes.is_empty() {
        out.push_str("\n## Coverage notes\n\n");
        for note in &report.notes {
            out.push_str(&format!("- {note}\n"));
        }
    }
    out
}

fn cur_rules_csv(primary: &CurReport, alt: &CurReport, table: &ScoreTable) -> String {
    let mut out = format!(
        "category,n,encoder,{},{}\n",
        primary.rule.as_str().replace('-', "_"),
        alt.rule.as_str().replace('-', "_")
    );
    for (row, alt_row) in primary.rows.iter().zip(&alt.rows) {
        for (i, e) in table.encoders.iter().enumerate() {
            out.push_str(&format!("{},{},{}", row.category, row.size, e.name));
            for v in [row.curs[i], alt_row.curs[i]] {
                out.push(',');
                if let Some(v) = v {
                    out.push_str(&fmt_pct(v));
                }
            }
            out.push('\n');
        }
    }
    out
}

fn degradation_columns(report: &FullReport) -> Vec<Column> {
    let mut cols: Vec<Column> = report
        .aggregates
        .categories
        .iter()
        .map(|c| Column::Category(*c))
        .collect();
    cols.push(Column::Overall);
    cols
}

fn degradation_csv(report: &FullReport) -> String {
    let mut out = String::from("category,masked,max,min,mean,rel_change_pct\n");
    let n = report.degradation.encoder_count;
    for column in degradation_columns(report) {
        for k in 0..=n {
            let Some(row) = report.degradation.get(column, k) else {
                continue;
            };
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                column,
                k,
                fmt_score(row.max),
                fmt_score(row.min),
                fmt_score(row.mean),
                row.rel_change.map(fmt_pct).unwrap_or_default(),
            ));
        }
    }
    out
}

fn degradation_md(report: &FullReport, table: &ScoreTable) -> String {
    let n = report.degradation.encoder_count;
    let columns = degradation_columns(report);
    let mut out = format!(
        "# Score degradation by masked encoders — {}\n\nMean over all subsets at each masking level (relative change vs. baseline).\n\n| #Masked |",
        table.model_name
    );
    for c in &columns {
        out.push_str(&format!(" {c} |"));
    }
    out.push_str("\n|---|");
    for _ in &columns {
        out.push_str("---|");
    }
    out.push('\n');
    for k in 0..=n {
        out.push_str(&format!("| {k} |"));
        for column in &columns {
            match report.degradation.get(*column, k) {
                Some(row) => {
                    let rel = row
                        .rel_change
                        .map(|r| format!(" ({}%)", fmt_pct(r)))
                        .unwrap_or_default();
                    out.push_str(&format!(" {}{rel} |", fmt_score(row.mean)));
                }
                None => out.push_str(" — |"),
            }
        }
        out.push('\n');
    }
    if let Some(finding) = &report.redundancy {
        out.push_str(&format!(
            "\nRedundancy predicate (epsilon {} score units): **{}** — best proper subset scores {} vs baseline {} (relative drop {}%).\n",
            finding.epsilon,
            if finding.raised { "RAISED" } else { "not raised" },
            fmt_score(finding.best_proper),
            fmt_score(finding.baseline),
            fmt_pct(finding.relative_drop),
        ));
    }
    out
}

fn extremes_csv(report: &FullReport, table: &ScoreTable) -> String {
    let mut out = String::from(
        "category,encoder,max_with,max_with_subset,min_with,min_with_subset,\
         max_without,max_without_subset,min_without,min_without_subset\n",
    );
    for e in &report.extremes {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            e.category,
            e.encoder.name,
            fmt_score(e.max_with.0),
            subset_label(e.max_with.1, table),
            fmt_score(e.min_with.0),
            subset_label(e.min_with.1, table),
            fmt_score(e.max_without.0),
            subset_label(e.max_without.1, table),
            fmt_score(e.min_without.0),
            subset_label(e.min_without.1, table),
        ));
    }
    out
}

fn distribution_csv(report: &FullReport, table: &ScoreTable) -> String {
    let mut out = String::from("category,masked,subset,score\n");
    let mut columns = degradation_columns(report);
    columns.rotate_right(1); // Overall first, matching the figure order
    for column in columns {
        for (subset, scores) in &report.aggregates.by_subset {
            let value = match column {
                Column::Category(c) => scores.per_category.get(&c).copied(),
                Column::Overall => scores.overall,
            };
            let Some(v) = value else { continue };
            out.push_str(&format!(
                "{},{},{},{}\n",
                column,
                subset.masked_count(),
                subset_label(*subset, table),
                v
            ));
        }
    }
    out
}

/// Quartiles by the median-of-halves rule; input must be sorted.
fn quartiles(sorted: &[f64]) -> (f64, f64, f64) {
    fn median(s: &[f64]) -> f64 {
        let m = s.len() / 2;
        if s.len() % 2 == 1 {
            s[m]
        } else {
            (s[m - 1] + s[m]) / 2.0
        }
    }
    let m = sorted.len() / 2;
    let q2 = median(sorted);
    if sorted.len() < 2 {
        return (q2, q2, q2);
    }
    let lower = &sorted[..m];
    let upper = &sorted[sorted.len() - m..];
    (median(lower), q2, median(upper))
}

/// Box plot of the overall score per number of masked encoders.
fn distribution_svg(report: &FullReport) -> String {
    let n = report.degradation.encoder_count;
    let mut groups: Vec<(usize, Vec<f64>)> = Vec::new();
    for k in 0..=n {
        let mut scores: Vec<f64> = report
            .aggregates
            .by_subset
            .iter()
            .filter(|(s, _)| s.masked_count() == k)
            .filter_map(|(_, v)| v.overall)
            .collect();
        if scores.is_empty() {
            continue;
        }
        scores.sort_by(|a, b| a.partial_cmp(b).expect("finite scores"));
        groups.push((k, scores));
    }
    let (lo, hi) = groups.iter().flat_map(|(_, s)| s.iter()).fold(
        (f64::INFINITY, f64::NEG_INFINITY),
        |(lo, hi), &v| (lo.min(v), hi.max(v)),
    );
    let pad = ((hi - lo) * 0.08).max(1e-9);
    let (lo, hi) = (lo - pad, hi + pad);
    let (width, height, margin) = (80.0 + 70.0 * groups.len() as f64, 320.0, 40.0);
    let y = |v: f64| margin + (height - 2.0 * margin) * (1.0 - (v - lo) / (hi - lo));

    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" font-family=\"sans-serif\" font-size=\"11\">\n<text x=\"8\" y=\"16\">overall score by #masked encoders</text>\n"
    );
    for (i, (k, scores)) in groups.iter().enumerate() {
        let cx = 70.0 + 70.0 * i as f64;
        let (q1, q2, q3) = quartiles(scores);
        let (min, max) = (scores[0], scores[scores.len() - 1]);
        let half = 22.0;
        svg.push_str(&format!(
            "<line x1=\"{cx:.1}\" y1=\"{:.1}\" x2=\"{cx:.1}\" y2=\"{:.1}\" stroke=\"black\"/>\n",
            y(min),
            y(max)
        ));
        for v in [min, max] {
            svg.push_str(&format!(
                "<line x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"black\"/>\n",
                cx - half / 2.0,
                y(v),
                cx + half / 2.0,
                y(v)
            ));
        }
        svg.push_str(&format!(
            "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"{half:.1}\" height=\"{:.1}\" fill=\"#cfe2f3\" stroke=\"black\"/>\n",
            cx - half,
            y(q3),
            (y(q1) - y(q3)).max(0.5),
        ));
        svg.push_str(&format!(
            "<line x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"black\" stroke-width=\"2\"/>\n",
            cx - half,
            y(q2),
            cx + half,
            y(q2)
        ));
        svg.push_str(&format!(
            "<text x=\"{cx:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{k}</text>\n",
            height - margin + 18.0
        ));
    }
    for t in 0..=4 {
        let v = lo + (hi - lo) * t as f64 / 4.0;
        svg.push_str(&format!(
            "<text x=\"6\" y=\"{:.1}\">{}</text>\n",
            y(v) + 4.0,
            fmt_score(v)
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

/// Render the standard report file set for a table.
pub fn render(report: &FullReport, table: &ScoreTable, format: Format) -> ReportFiles {
    let mut files = ReportFiles::default();
    if format.csv() {
        files.push("cur_ig.csv", cur_csv(report, table));
        files.push("degradation.csv", degradation_csv(report));
        files.push("extremes.csv", extremes_csv(report, table));
        files.push("distribution.csv", distribution_csv(report, table));
        files.push(
            "cur_rules.csv",
            cur_rules_csv(&report.cur, &report.cur_alt, table),
        );
        files.push("distribution.svg", distribution_svg(report));
    }
    if format.md() {
        files.push("cur_ig.md", cur_md(report, table));
        files.push("degradation.md", degradation_md(report, table));
    }
    files
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ablate::{full_report, ReportOptions};
    use crate::ingest::{default_scheme, fixtures};

    #[test]
    fn rounding_is_half_away_from_zero_at_two_decimals() {
        assert_eq!(fmt_pct(0.099053), "9.91");
        assert_eq!(fmt_pct(0.10089020771513345), "10.09");
        assert_eq!(fmt_pct(-0.16151809355692848), "-16.15");
        assert_eq!(fmt_pct(-0.026975), "-2.70");
        assert_eq!(fmt_score(65.275), "65.28");
    }

    #[test]
    fn eagle_reports_render_with_expected_rows() {
        let table = fixtures::eagle();
        let report = full_report(&table, &default_scheme(), &ReportOptions::default()).unwrap();
        let files = render(&report, &table, Format::All);
        let names: Vec<&str> = files.files.iter().map(|(n, _)| n.as_str()).collect();
        for expected in [
            "cur_ig.csv",
            "cur_ig.md",
            "degradation.csv",
            "degradation.md",
            "extremes.csv",
            "distribution.csv",
            "distribution.svg",
            "cur_rules.csv",
        ] {
            assert!(names.contains(&expected), "missing {expected}");
        }
        let cur_csv = &files.files.iter().find(|(n, _)| n == "cur_ig.csv").unwrap().1;
        // 4 categories x sizes 5..2 plus header
        assert_eq!(cur_csv.lines().count(), 1 + 16);
        let first = cur_csv.lines().nth(1).unwrap();
        assert!(first.starts_with("General,5,"), "{first}");
        let md = &files.files.iter().find(|(n, _)| n == "cur_ig.md").unwrap().1;
        assert!(md.contains("| General | 5 |"));
        let deg = &files.files.iter().find(|(n, _)| n == "degradation.md").unwrap().1;
        assert!(deg.contains("| 1 | 68.76 (-2.83%)"), "{deg}");
        let svg = &files.files.iter().find(|(n, _)| n == "distribution.svg").unwrap().1;
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<rect").count(), 6); // one box per masking level
    }

    #[test]
    fn rendering_is_deterministic() {
        let table = fixtures::cambrian();
        let report = full_report(&table, &default_scheme(), &ReportOptions::default()).unwrap();
        let a = render(&report, &table, Format::All);
        let b = render(&report, &table, Format::All);
        assert_eq!(a.files, b.files);
    }
}
