//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line.
//!
//! Reference values come from the published result tables; the bundled
//! fixtures carry the corresponding raw per-subset scores. Percentage
//! comparisons happen at the tables' printed resolution: a computed value
//! matches when, rounded half-up to two decimals, it lies within one ULP
//! (0.01 pp) of the printed entry. The fixtures themselves are quantized to
//! two decimals, so finer agreement is not information the data contains.
//!
//! Two known data limitations are asserted faithfully and documented where
//! they fail:
//! * the full-size IG of one row compounds two opposite-direction rounding
//!   errors of its CUR extremes (criterion 3);
//! * the sub-full-size CUR rows are not derivable from the per-category
//!   fixture scores under either candidate aggregation rule (criterion 5).

use std::time::Instant;

use redundancy_lab::ablate::{run_ablation, scheme_for_model};
use redundancy_lab::core::Category;
use redundancy_lab::ingest::{default_scheme, fixtures};
use redundancy_lab::metrics::{
    aggregate_scores, cur_at_size, degradation_summary, information_gap, redundancy_flag,
    Aggregates, Column, CurRule,
};
use redundancy_lab::oracle;
use redundancy_lab::report::round2;
use redundancy_lab::simconfig::{load_config, SimSetup};
use redundancy_lab::simkit::model::Trainable;
use redundancy_lab::simkit::FusionSpec;
use redundancy_lab::train::{grad_check, grad_check_batch, train, GradCheckOptions};

const CATEGORIES: [Category; 4] = [
    Category::General,
    Category::Knowledge,
    Category::OcrChart,
    Category::VisionCentric,
];

/// Published CUR table for Eagle-X5-7B. Encoder column order matches the
/// fixture: CLIP, ConvNext, SAM, EVA, Pix2Struct. The source prints the
/// Knowledge size-4 row mislabeled as a second "3"; sizes here are corrected.
const EAGLE_CUR: [(Category, usize, [f64; 5], f64); 16] = [
    (Category::General, 5, [1.39, 1.94, 0.19, 10.08, 0.58], 9.89),
    (Category::General, 4, [4.1, 6.5, 0.92, 13.53, 2.18], 12.61),
    (Category::General, 3, [10.48, 13.31, 3.83, 18.64, 3.96], 14.81),
    (Category::General, 2, [22.8, 24.92, 13.86, 28.21, 12.6], 15.61),
    (Category::Knowledge, 5, [1.82, 4.95, 1.1, 6.78, 2.04], 5.68),
    (Category::Knowledge, 4, [1.56, 4.53, 0.55, 5.94, 2.55], 5.38),
    (Category::Knowledge, 3, [3.53, 5.77, 2.01, 6.09, 3.7], 4.08),
    (Category::Knowledge, 2, [9.87, 10.61, 9.07, 9.98, 3.42], 7.2),
    (Category::OcrChart, 5, [1.02, 30.26, 0.09, 13.34, 4.2], 30.17),
    (Category::OcrChart, 4, [6.47, 46.52, 2.93, 23.88, 22.29], 43.59),
    (Category::OcrChart, 3, [16.26, 54.86, 15.28, 28.16, 34.61], 39.58),
    (Category::OcrChart, 2, [42.01, 67.38, 40.16, 42.42, 45.86], 27.22),
    (Category::VisionCentric, 5, [0.15, 2.54, 0.24, 17.34, 1.04], 17.19),
    (Category::VisionCentric, 4, [3.16, 6.06, 1.72, 19.59, 3.08], 17.87),
    (Category::VisionCentric, 3, [6.21, 8.68, 4.37, 19.13, 4.8], 14.76),
    (Category::VisionCentric, 2, [9.41, 10.83, 7.95, 16.65, 7.75], 8.9),
];

/// Published CUR table for Cambrian1-8B, columns CLIP, ConvNext, DINO,
/// SigLIP. The fixture's encoder order is CLIP, SigLIP, DINO, ConvNext.
const CAMBRIAN_CUR: [(Category, usize, [f64; 4], f64); 12] = [
    (Category::General, 4, [1.33, 1.15, 1.17, -2.70], 4.03),
    (Category::General, 3, [7.01, 9.03, 2.02, 8.51], 7.00),
    (Category::General, 2, [27.78, 30.58, 14.39, 28.22], 16.19),
    (Category::Knowledge, 4, [3.00, 11.29, 3.52, -0.30], 11.59),
    (Category::Knowledge, 3, [2.66, 8.75, 1.45, 6.31], 7.31),
    (Category::Knowledge, 2, [5.34, 9.10, 4.09, 6.80], 5.00),
    (Category::OcrChart, 4, [2.69, 74.98, 1.91, 3.02], 73.07),
    (Category::OcrChart, 3, [15.52, 77.20, 10.17, 15.26], 67.03),
    (Category::OcrChart, 2, [35.19, 78.09, 31.23, 35.18], 46.86),
    (Category::VisionCentric, 4, [5.61, 1.43, -1.38, -16.16], 21.77),
    (Category::VisionCentric, 3, [3.27, 2.74, -0.80, 6.29], 7.08),
    (Category::VisionCentric, 2, [16.40, 20.26, 9.86, 15.22], 10.41),
];

/// Printed column order of the Cambrian table -> fixture encoder index.
const CAMBRIAN_COLUMN_TO_INDEX: [usize; 4] = [0, 3, 2, 1];

/// Published degradation summary for Eagle-X5-7B: per masking level,
/// (mean, relative change %) for the four categories then Overall.
const EAGLE_DEGRADATION: [[(f64, f64); 5]; 6] = [
    [(70.77, 0.0), (54.79, 0.0), (66.60, 0.0), (67.55, 0.0), (64.93, 0.0)],
    [(68.77, -2.8), (52.96, -3.3), (60.09, -9.8), (64.67, -4.3), (61.62, -5.1)],
    [(65.02, -8.1), (51.36, -6.3), (47.82, -28.2), (60.32, -10.7), (56.13, -13.6)],
    [(58.49, -17.4), (49.19, -10.2), (33.55, -49.6), (55.11, -18.4), (49.09, -24.4)],
    [(46.51, -34.3), (44.97, -17.9), (17.59, -73.6), (49.31, -27.0), (39.60, -39.0)],
    [(31.94, -54.9), (43.69, -20.3), (7.52, -88.7), (46.71, -30.9), (32.47, -50.0)],
];

const CAMBRIAN_DEGRADATION: [[(f64, f64); 5]; 5] = [
    [(67.47, 0.0), (57.88, 0.0), (70.08, 0.0), (56.65, 0.0), (63.02, 0.0)],
    [(67.31, -0.2), (55.34, -4.4), (55.61, -20.6), (58.14, 2.6), (59.10, -6.2)],
    [(62.84, -6.9), (52.69, -9.0), (39.19, -44.1), (56.47, -0.3), (52.80, -16.2)],
    [(46.98, -30.4), (49.35, -14.7), (21.58, -69.2), (47.75, -15.7), (41.42, -34.3)],
    [(23.33, -65.4), (45.07, -22.1), (5.91, -91.6), (35.83, -36.8), (27.54, -56.3)],
];

/// Published overall max/min/mean per masking level for the 8B model.
const CAMBRIAN_OVERALL_EXTREMA: [(f64, f64, f64); 5] = [
    (63.02, 63.02, 63.02),
    (65.28, 47.85, 59.10),
    (64.09, 44.00, 52.79),
    (56.81, 29.03, 41.41),
    (27.53, 27.53, 27.53),
];

fn eagle_agg() -> Aggregates {
    aggregate_scores(&fixtures::eagle(), &default_scheme()).expect("eagle fixture aggregates")
}

fn cambrian_agg() -> Aggregates {
    aggregate_scores(&fixtures::cambrian(), &default_scheme()).expect("cambrian fixture aggregates")
}

fn cur_pct(agg: &Aggregates, index: usize, size: usize, category: Category) -> f64 {
    100.0 * cur_at_size(agg, index, size, category, CurRule::PerSubsetMean).expect("full coverage")
}

/// Match at the printed resolution: one ULP of the two-decimal tables.
fn matches_printed(computed_pct: f64, printed: f64) -> bool {
    (round2(computed_pct) - printed).abs() <= 0.01 + 1e-9
}

#[test]
fn criterion_01_eagle_full_size_cur() {
    let agg = eagle_agg();
    let mut worst: (f64, String) = (0.0, String::new());
    for (category, size, printed, _) in EAGLE_CUR.iter().filter(|r| r.1 == 5) {
        for (index, expected) in printed.iter().enumerate() {
            let got = cur_pct(&agg, index, *size, *category);
            let delta = (round2(got) - expected).abs();
            if delta > worst.0 {
                worst = (delta, format!("{category} {}", agg.encoders[index].name));
            }
            assert!(
                matches_printed(got, *expected),
                "[criterion 1] FAIL — {category} n'=5 encoder {}: computed {got:.4} vs printed {expected}",
                agg.encoders[index].name
            );
        }
    }
    println!(
        "[criterion 1] PASS — Eagle n'=5 CUR reproduces all 20 cells within ±0.01 pp \
         (worst {:.3} pp at {})",
        worst.0, worst.1
    );
}

#[test]
fn criterion_02_cambrian_full_size_cur() {
    let agg = cambrian_agg();
    for (category, size, printed, _) in CAMBRIAN_CUR.iter().filter(|r| r.1 == 4) {
        for (col, expected) in printed.iter().enumerate() {
            let index = CAMBRIAN_COLUMN_TO_INDEX[col];
            let got = cur_pct(&agg, index, *size, *category);
            assert!(
                matches_printed(got, *expected),
                "[criterion 2] FAIL — {category} n'=4 encoder {}: computed {got:.4} vs printed {expected}",
                agg.encoders[index].name
            );
        }
    }
    let siglip = 1;
    let vc = cur_pct(&agg, siglip, 4, Category::VisionCentric);
    let convnext = 3;
    let ocr = cur_pct(&agg, convnext, 4, Category::OcrChart);
    println!(
        "[criterion 2] PASS — Cambrian n'=4 CUR reproduces all 16 cells within ±0.01 pp \
         (SigLIP Vision-Centric {vc:.2}%, ConvNext OCR & Chart {ocr:.2}%)"
    );
}

#[test]
fn criterion_03_full_size_information_gap() {
    struct Row {
        label: String,
        computed: f64,
        printed: f64,
    }
    let mut rows: Vec<Row> = Vec::new();
    let eagle = eagle_agg();
    for (category, size, _, printed_ig) in EAGLE_CUR.iter().filter(|r| r.1 == 5) {
        let curs: Vec<f64> = (0..5).map(|i| cur_pct(&eagle, i, *size, *category)).collect();
        rows.push(Row {
            label: format!("Eagle {category}"),
            computed: information_gap(&curs).unwrap(),
            printed: *printed_ig,
        });
    }
    let camb = cambrian_agg();
    for (category, size, _, printed_ig) in CAMBRIAN_CUR.iter().filter(|r| r.1 == 4) {
        let curs: Vec<f64> = (0..4).map(|i| cur_pct(&camb, i, *size, *category)).collect();
        rows.push(Row {
            label: format!("Cambrian {category}"),
            computed: information_gap(&curs).unwrap(),
            printed: *printed_ig,
        });
    }
    let mut failures = Vec::new();
    for row in &rows {
        let ok = matches_printed(row.computed, row.printed);
        println!(
            "[criterion 3] {} — {}: IG computed {:.4} vs printed {:.2} (delta at printed \
             resolution {:.2})",
            if ok { " ok " } else { "MISS" },
            row.label,
            row.computed,
            row.printed,
            (round2(row.computed) - row.printed).abs(),
        );
        if !ok {
            failures.push(row.label.clone());
        }
    }
    if failures.is_empty() {
        println!("[criterion 3] PASS — all 8 full-size IG entries within ±0.01 pp");
    } else {
        println!(
            "[criterion 3] FAIL — {}/8 IG entries beyond ±0.01 pp: {}. The fixture scores \
             are quantized to 0.01; for these rows the max- and min-CUR rounding errors \
             compound in opposite directions, so the printed IG is not recoverable from \
             the published per-category scores at this tolerance.",
            failures.len(),
            failures.join(", ")
        );
    }
    assert!(
        failures.is_empty(),
        "[criterion 3] FAIL — IG beyond tolerance for: {}",
        failures.join(", ")
    );
}

#[test]
fn criterion_04_degradation_summaries() {
    let mean_tol = 0.05;
    let rel_tol = 0.1;
    for (name, agg, table) in [
        ("Eagle", eagle_agg(), &EAGLE_DEGRADATION[..]),
        ("Cambrian", cambrian_agg(), &CAMBRIAN_DEGRADATION[..]),
    ] {
        let summary = degradation_summary(&agg);
        for (k, row) in table.iter().enumerate() {
            for (col, (printed_mean, printed_rel)) in row.iter().enumerate() {
                let column = if col < 4 {
                    Column::Category(CATEGORIES[col])
                } else {
                    Column::Overall
                };
                let got = summary.get(column, k).expect("complete fixture");
                assert!(
                    (got.mean - printed_mean).abs() <= mean_tol,
                    "[criterion 4] FAIL — {name} {column} k={k} mean {:.4} vs printed {printed_mean}",
                    got.mean
                );
                let rel_pct = 100.0 * got.rel_change.expect("baseline present");
                assert!(
                    (rel_pct - printed_rel).abs() <= rel_tol,
                    "[criterion 4] FAIL — {name} {column} k={k} rel {rel_pct:.4}% vs printed {printed_rel}%"
                );
            }
        }
    }
    let summary = degradation_summary(&cambrian_agg());
    for (k, (max, min, mean)) in CAMBRIAN_OVERALL_EXTREMA.iter().enumerate() {
        let got = summary.get(Column::Overall, k).expect("complete fixture");
        for (value, printed, what) in [(got.max, max, "max"), (got.min, min, "min"), (got.mean, mean, "mean")] {
            assert!(
                (value - printed).abs() <= 0.01,
                "[criterion 4] FAIL — Cambrian overall k={k} {what} {value:.4} vs printed {printed}"
            );
        }
    }
    println!(
        "[criterion 4] PASS — degradation means within ±0.05, relative changes within \
         ±0.1 pp, overall max/min/mean rows within ±0.01"
    );
}

#[test]
fn criterion_05_sub_full_size_cur() {
    let tolerance = 1.5;
    let mut checked = 0usize;
    let mut failures: Vec<String> = Vec::new();
    let mut worst: (f64, String) = (0.0, String::new());

    let mut check = |label: &str,
                     agg: &Aggregates,
                     category: Category,
                     size: usize,
                     index: usize,
                     printed: f64| {
        let psm = cur_pct(agg, index, size, category);
        let mos = 100.0
            * cur_at_size(agg, index, size, category, CurRule::MeanOfScores).expect("coverage");
        let delta = (psm - printed).abs();
        checked += 1;
        let cell = format!(
            "{label} {category} n'={size} {}: per-subset-mean {psm:.2} / mean-of-scores {mos:.2} vs printed {printed} (delta {delta:.2} pp)",
            agg.encoders[index].name
        );
        if delta > worst.0 {
            worst = (delta, cell.clone());
        }
        if delta > tolerance {
            println!("[criterion 5] MISS — {cell}");
            failures.push(cell);
        }
    };

    let eagle = eagle_agg();
    for (category, size, printed, _) in EAGLE_CUR.iter().filter(|r| r.1 < 5) {
        for (index, value) in printed.iter().enumerate() {
            check("Eagle", &eagle, *category, *size, index, *value);
        }
    }
    let camb = cambrian_agg();
    for (category, size, printed, _) in CAMBRIAN_CUR.iter().filter(|r| r.1 < 4) {
        for (col, value) in printed.iter().enumerate() {
            check("Cambrian", &camb, *category, *size, CAMBRIAN_COLUMN_TO_INDEX[col], *value);
        }
    }

    if failures.is_empty() {
        println!("[criterion 5] PASS — all {checked} sub-full-size cells within ±1.5 pp");
    } else {
        println!(
            "[criterion 5] FAIL — {}/{checked} sub-full-size cells beyond ±1.5 pp under the \
             per-subset-mean rule (worst: {}). The published sub-full-size rows evidently \
             derive from per-benchmark scores that the source only releases as category \
             aggregates; neither candidate rule recovers them from the per-category \
             fixtures. Both rules are emitted side by side in cur_rules.csv.",
            failures.len(),
            worst.1
        );
    }
    assert!(
        failures.is_empty(),
        "[criterion 5] FAIL — {}/{} cells beyond ±1.5 pp",
        failures.len(),
        checked
    );
}

#[test]
fn criterion_06_redundancy_predicate() {
    let camb = cambrian_agg();
    let finding = redundancy_flag(&camb, 0.0).expect("full coverage");
    assert!(finding.raised, "[criterion 6] FAIL — Cambrian flag not raised");
    assert_eq!(
        finding.witness.active_count(),
        3,
        "[criterion 6] FAIL — witness size {}",
        finding.witness.active_count()
    );
    assert!(
        (finding.best_proper - 65.275).abs() <= 0.01 && (finding.baseline - 63.0175).abs() <= 0.01,
        "[criterion 6] FAIL — witness {:.4} vs baseline {:.4}",
        finding.best_proper,
        finding.baseline
    );

    let eagle = eagle_agg();
    let summary = degradation_summary(&eagle);
    let baseline = summary.get(Column::Overall, 0).unwrap().mean;
    let best_3_masked = summary.get(Column::Overall, 3).unwrap().max;
    let drop = (baseline - best_3_masked) / baseline;
    assert!(
        drop < 0.04,
        "[criterion 6] FAIL — Eagle best 3-masked drop {:.4} >= 4%",
        drop
    );
    let relaxed = redundancy_flag(&eagle, 0.04 * baseline).expect("full coverage");
    assert!(relaxed.raised);
    println!(
        "[criterion 6] PASS — Cambrian raised strictly (witness {:.2} > baseline {:.2}); \
         Eagle best 3-masked overall {best_3_masked:.2} is {:.2}% below baseline (< 4%)",
        finding.best_proper,
        finding.baseline,
        100.0 * drop
    );
}

fn grad_model(fusion: &FusionSpec, seed: u64) -> redundancy_lab::simkit::Model {
    use rand::SeedableRng;
    use redundancy_lab::simkit::{EncoderSpec, HeadSpec, Model, SimWorld, TaskSpec};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let tasks = vec![
        TaskSpec::new("t0", Category::General, (0..6).collect(), 4, 8, &mut rng).unwrap(),
        TaskSpec::new("t1", Category::OcrChart, (4..8).collect(), 2, 8, &mut rng).unwrap(),
    ];
    let world = SimWorld::new(8, 0.05, tasks).unwrap();
    let specs = vec![
        EncoderSpec {
            name: "a".into(),
            visible_channels: (0..5).collect(),
            tokens_out: 3,
            token_dim: 4,
            frozen: false,
        },
        EncoderSpec {
            name: "b".into(),
            visible_channels: (3..8).collect(),
            tokens_out: 3,
            token_dim: 4,
            frozen: false,
        },
    ];
    Model::build(
        world,
        specs,
        fusion,
        HeadSpec {
            hidden: vec![6],
            class_count: 4,
        },
        &mut rng,
    )
    .unwrap()
}

#[test]
fn criterion_07_gradient_correctness() {
    use rand::SeedableRng;
    let started = Instant::now();
    let strategies = [
        FusionSpec::SequenceAppend,
        FusionSpec::ChannelConcat,
        FusionSpec::SharedMlp { dim: 5 },
        FusionSpec::CrossAttention { queries: 3, kv_dim: 4 },
    ];
    for (i, fusion) in strategies.iter().enumerate() {
        let model = grad_model(fusion, 200 + i as u64);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let batch = grad_check_batch(&model, 6, &mut rng);
        let report = grad_check(&model, &batch, &GradCheckOptions::default()).unwrap();
        assert!(
            report.checked >= 100,
            "[criterion 7] FAIL — only {} parameters sampled",
            report.checked
        );
        assert!(
            report.passed && report.max_rel_error < 1e-3,
            "[criterion 7] FAIL — {}: max rel error {:.3e} at {:?}",
            fusion.name(),
            report.max_rel_error,
            report.worst_param
        );

        // a sign flip in any exercised backward path must surface
        let tape = model.tape(Trainable {
            head: true,
            fusion: true,
            encoders: true,
        });
        for group in 0..tape.groups.len() {
            let clean = grad_check(
                &model,
                &batch,
                &GradCheckOptions {
                    only_group: Some(group),
                    min_params: usize::MAX,
                    ..GradCheckOptions::default()
                },
            )
            .unwrap();
            let corrupted = grad_check(
                &model,
                &batch,
                &GradCheckOptions {
                    corrupt_group: Some(group),
                    only_group: Some(group),
                    min_params: usize::MAX,
                    ..GradCheckOptions::default()
                },
            )
            .unwrap();
            assert!(clean.passed, "group {} clean check failed", tape.groups[group].0);
            assert!(
                !corrupted.passed,
                "[criterion 7] FAIL — {}: sign flip in {} went undetected",
                fusion.name(),
                tape.groups[group].0
            );
        }
    }
    let elapsed = started.elapsed();
    assert!(
        elapsed.as_secs() < 60,
        "[criterion 7] FAIL — took {elapsed:?}, budget is one minute"
    );
    println!(
        "[criterion 7] PASS — analytic vs central-difference gradients < 1e-3 across all \
         four fusion strategies (>= 100 sampled parameters each); sign flips detected in \
         every parameter group; finished in {elapsed:?}"
    );
}

fn run_scenario(config_name: &str) -> (SimSetup, Aggregates) {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("configs")
        .join(config_name);
    let config = load_config(&path).expect("bundled config parses");
    let mut setup = config.build(None).expect("bundled config builds");
    train(&mut setup.model, &setup.train).expect("training converges");
    let table = run_ablation(
        &setup.model,
        &setup.name,
        setup.eval_samples,
        redundancy_lab::train::mix_seed(&[setup.seed, 0x6576616c]),
    )
    .expect("ablation runs");
    let scheme = scheme_for_model(&setup.model).expect("scheme");
    let agg = aggregate_scores(&table, &scheme).expect("aggregates");
    (setup, agg)
}

#[test]
fn criterion_08_ground_truth_validation() {
    let started = Instant::now();

    // clone scenario: encoders 0/1 are exact clones, encoder 2 is the only
    // source for the OCR-analogue task
    let (_, clone_agg) = run_scenario("clone.toml");
    let clone_a = cur_at_size(&clone_agg, 0, 3, Category::General, CurRule::PerSubsetMean).unwrap();
    let clone_b = cur_at_size(&clone_agg, 1, 3, Category::General, CurRule::PerSubsetMean).unwrap();
    let solo = cur_at_size(&clone_agg, 2, 3, Category::OcrChart, CurRule::PerSubsetMean).unwrap();
    assert!(
        clone_a <= 0.05 && clone_b <= 0.05,
        "[criterion 8] FAIL — clone CURs {clone_a:.4} / {clone_b:.4} exceed 0.05"
    );
    assert!(
        solo >= 0.30,
        "[criterion 8] FAIL — unique-channel encoder CUR {solo:.4} below 0.30"
    );

    // specialist scenario: encoder 0 uniquely sees the OCR channels
    let (_, spec_agg) = run_scenario("specialist.toml");
    let spec_ocr = cur_at_size(&spec_agg, 0, 3, Category::OcrChart, CurRule::PerSubsetMean).unwrap();
    let gen_a_ocr = cur_at_size(&spec_agg, 1, 3, Category::OcrChart, CurRule::PerSubsetMean).unwrap();
    let gen_b_ocr = cur_at_size(&spec_agg, 2, 3, Category::OcrChart, CurRule::PerSubsetMean).unwrap();
    let spec_general = cur_at_size(&spec_agg, 0, 3, Category::General, CurRule::PerSubsetMean).unwrap();
    let margin = spec_ocr - gen_a_ocr.max(gen_b_ocr);
    assert!(
        margin >= 0.15,
        "[criterion 8] FAIL — specialist margin {margin:.4} below 0.15 \
         (spec {spec_ocr:.4}, others {gen_a_ocr:.4}/{gen_b_ocr:.4})"
    );
    assert!(
        spec_ocr > spec_general,
        "[criterion 8] FAIL — specialist CUR on its category {spec_ocr:.4} does not exceed \
         its shared-task CUR {spec_general:.4}"
    );

    let elapsed = started.elapsed();
    assert!(
        elapsed.as_secs() < 300,
        "[criterion 8] FAIL — took {elapsed:?}, budget is five minutes"
    );
    println!(
        "[criterion 8] PASS — clones CUR {clone_a:.3}/{clone_b:.3} <= 0.05 with solo {solo:.3} \
         >= 0.30; specialist leads its category by {margin:.3} >= 0.15 and beats its own \
         shared-task CUR ({spec_ocr:.3} > {spec_general:.3}); finished in {elapsed:?}"
    );
}

#[test]
fn criterion_09_oracle_equivalence() {
    let scheme = default_scheme();
    for seed in 0..60u64 {
        let table = oracle::random_table(seed);
        for rule in [CurRule::PerSubsetMean, CurRule::MeanOfScores] {
            oracle::check_engine_equivalence(&table, &scheme, rule, 0.0).unwrap_or_else(|e| {
                panic!("[criterion 9] FAIL — random table seed {seed} ({rule:?}): {e}")
            });
        }
    }
    for (name, table) in [("eagle", fixtures::eagle()), ("cambrian", fixtures::cambrian())] {
        oracle::check_engine_equivalence(&table, &scheme, CurRule::PerSubsetMean, 0.0)
            .unwrap_or_else(|e| panic!("[criterion 9] FAIL — {name} fixture: {e}"));
    }
    println!(
        "[criterion 9] PASS — brute-force recomputation matches the engine bit for bit on \
         60 random tables (n <= 4) and both fixtures"
    );
}

#[test]
fn criterion_10_simulate_determinism() {
    use std::process::Command;
    let bin = env!("CARGO_BIN_EXE_redundancy-lab");
    let work = tempfile::tempdir().expect("tempdir");
    let config_path = work.path().join("tiny.toml");
    std::fs::write(
        &config_path,
        r#"
name = "determinism-probe"
seed = 11

[world]
channels = 6

[[world.tasks]]
name = "t0"
category = "General"
channels = [0, 1, 2]
classes = 2

[[world.tasks]]
name = "t1"
category = "Vision-Centric"
channels = [3, 4, 5]
classes = 2

[[encoders]]
name = "a"
channels = [0, 1, 2, 3]
tokens = 2
dim = 4

[[encoders]]
name = "b"
channels = [2, 3, 4, 5]
tokens = 2
dim = 4

[fusion]
strategy = "cross_attention"
queries = 3
kv_dim = 5

[head]
hidden = [8]
classes = 2

[train]
steps = 150
encoder_dropout = 0.3

[eval]
samples = 256
"#,
    )
    .expect("write config");

    let mut trees = Vec::new();
    for run in 0..2 {
        let out = work.path().join(format!("run{run}"));
        let status = Command::new(bin)
            .args([
                "simulate",
                "--config",
                config_path.to_str().unwrap(),
                "--out",
                out.to_str().unwrap(),
                "--format",
                "all",
            ])
            .output()
            .expect("binary runs");
        assert!(
            status.status.success(),
            "simulate failed: {}",
            String::from_utf8_lossy(&status.stderr)
        );
        let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(&out)
            .expect("output dir")
            .map(|e| {
                let e = e.expect("dir entry");
                (
                    e.file_name().to_string_lossy().into_owned(),
                    std::fs::read(e.path()).expect("readable output"),
                )
            })
            .collect();
        files.sort();
        trees.push(files);
    }
    assert_eq!(trees[0].len(), trees[1].len());
    for ((name_a, bytes_a), (name_b, bytes_b)) in trees[0].iter().zip(&trees[1]) {
        assert_eq!(name_a, name_b);
        assert_eq!(
            bytes_a, bytes_b,
            "[criterion 10] FAIL — {name_a} differs between runs"
        );
    }
    println!(
        "[criterion 10] PASS — two simulate runs produced byte-identical trees \
         ({} files compared)",
        trees[0].len()
    );
}
