//! Command-line surface: `analyze` ingests score tables and emits reports,
//! `simulate` trains and ablates a toy model end to end, `selftest` runs the
//! built-in verification suite.
//!
//! Exit codes: 0 success, 1 usage error, 2 data/coverage error, 3 numerical
//! failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use redundancy_lab::ablate::{full_report, run_ablation, scheme_for_model, ReportOptions};
use redundancy_lab::core::ScoreTable;
use redundancy_lab::error::{Error, Result};
use redundancy_lab::ingest::{
    self, default_scheme, fixtures, load_category_scheme, load_score_table_auto,
    write_score_table,
};
use redundancy_lab::metrics::CurRule;
use redundancy_lab::oracle;
use redundancy_lab::report::{render, Format};
use redundancy_lab::simconfig::load_config;
use redundancy_lab::simkit::model::Trainable;
use redundancy_lab::simkit::FusionSpec;
use redundancy_lab::train::{grad_check, grad_check_batch, train, GradCheckOptions};

#[derive(Parser)]
#[command(
    name = "redundancy-lab",
    about = "Encoder-redundancy diagnostics (CUR / IG) and a toy fusion simulator",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute CUR/IG, degradation, extremes and distribution reports from a
    /// score-table file.
    Analyze(AnalyzeArgs),
    /// Train a simulated multi-encoder model, ablate every subset and emit
    /// the same report set plus the raw score table and loss curve.
    Simulate(SimulateArgs),
    /// Run the built-in checks: gradient verification, fixture round-trips
    /// and brute-force oracle equivalence.
    Selftest(SelftestArgs),
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Score-table file, or a bundled fixture name (`eagle`, `cambrian`).
    #[arg(long)]
    scores: String,
    /// Category-scheme file; the built-in scheme applies when omitted.
    #[arg(long)]
    categories: Option<PathBuf>,
    /// Output directory for the report files.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    report: ReportArgs,
}

#[derive(Args)]
struct SimulateArgs {
    /// Simulator configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the seed declared in the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for scores, loss curve and reports.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    report: ReportArgs,
}

#[derive(Args)]
struct ReportArgs {
    /// Report formats to emit.
    #[arg(long, default_value = "all", value_parser = ["md", "csv", "all"])]
    format: String,
    /// Aggregation rule for CUR below the full subset size.
    #[arg(long, default_value = "per-subset-mean",
          value_parser = ["per-subset-mean", "mean-of-scores"])]
    cur_rule: String,
    /// Epsilon for the redundancy predicate, in score units.
    #[arg(long, default_value_t = 0.0)]
    epsilon: f64,
}

#[derive(Args)]
struct SelftestArgs {
    /// Tolerance for the gradient check.
    #[arg(long, default_value_t = 1e-3)]
    grad_tol: f64,
    /// Score-table files to round-trip instead of the bundled fixtures.
    #[arg(long)]
    fixture: Vec<PathBuf>,
}

impl ReportArgs {
    fn format(&self) -> Format {
        self.format.parse().expect("validated by clap")
    }

    fn options(&self) -> ReportOptions {
        ReportOptions {
            rule: self.cur_rule.parse().expect("validated by clap"),
            epsilon: self.epsilon,
        }
    }
}

fn load_scores(spec: &str) -> Result<ScoreTable> {
    if let Some(table) = fixtures::by_name(spec) {
        return Ok(table);
    }
    load_score_table_auto(Path::new(spec))
}

fn cmd_analyze(args: &AnalyzeArgs) -> Result<()> {
    let table = load_scores(&args.scores)?;
    let scheme = match &args.categories {
        Some(path) => load_category_scheme(path)?,
        None => default_scheme(),
    };
    let report = full_report(&table, &scheme, &args.report.options())?;
    let files = render(&report, &table, args.report.format());
    files.write_all(&args.out)?;
    println!(
        "analyzed {}: {} subsets, {} report files -> {}",
        table.model_name,
        report.aggregates.coverage.present_subsets,
        files.files.len(),
        args.out.display()
    );
    if let Some(finding) = &report.redundancy {
        println!(
            "redundancy predicate: {} (best proper subset {:.2} vs baseline {:.2})",
            if finding.raised { "RAISED" } else { "not raised" },
            finding.best_proper,
            finding.baseline
        );
    }
    Ok(())
}

fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let config = load_config(&args.config)?;
    let mut setup = config.build(args.seed)?;
    println!(
        "training '{}' (seed {}, {} steps)...",
        setup.name, setup.seed, setup.train.steps
    );
    let curve = train(&mut setup.model, &setup.train)?;
    let table = run_ablation(
        &setup.model,
        &setup.name,
        setup.eval_samples,
        redundancy_lab::train::mix_seed(&[setup.seed, 0x6576616c]),
    )?;
    let scheme = scheme_for_model(&setup.model)?;
    let report = full_report(&table, &scheme, &args.report.options())?;

    let mut files = render(&report, &table, args.report.format());
    files.push("scores.csv", write_score_table(&table));
    let mut loss_curve = String::from("step,loss\n");
    for (step, loss) in curve.iter().enumerate() {
        loss_curve.push_str(&format!("{step},{loss}\n"));
    }
    files.push("loss_curve.csv", loss_curve);
    files.write_all(&args.out)?;
    println!(
        "simulated {} subsets x {} tasks -> {}",
        report.aggregates.coverage.present_subsets,
        setup.model.world.tasks.len(),
        args.out.display()
    );
    Ok(())
}

struct SelfTest {
    failures: Vec<(String, i32)>,
}

impl SelfTest {
    fn record(&mut self, name: &str, outcome: std::result::Result<String, (String, i32)>) {
        match outcome {
            Ok(detail) => println!("[PASS] {name} — {detail}"),
            Err((detail, code)) => {
                println!("[FAIL] {name} — {detail}");
                self.failures.push((name.to_string(), code));
            }
        }
    }
}

fn selftest_grad(st: &mut SelfTest, tolerance: f64) {
    use rand::SeedableRng;
    let strategies = [
        FusionSpec::SequenceAppend,
        FusionSpec::ChannelConcat,
        FusionSpec::SharedMlp { dim: 6 },
        FusionSpec::CrossAttention { queries: 3, kv_dim: 5 },
    ];
    for spec in strategies {
        let name = format!("grad-check {}", spec.name());
        let outcome = (|| {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
            let model = selftest_model(&spec, &mut rng)?;
            let batch = grad_check_batch(&model, 6, &mut rng);
            let report = grad_check(
                &model,
                &batch,
                &GradCheckOptions {
                    tolerance,
                    ..GradCheckOptions::default()
                },
            )?;
            if report.passed {
                Ok(format!(
                    "max rel error {:.3e} over {} params",
                    report.max_rel_error, report.checked
                ))
            } else {
                Err(Error::GradCheck(format!(
                    "max rel error {:.3e} at {:?} exceeds {tolerance:e}",
                    report.max_rel_error, report.worst_param
                )))
            }
        })();
        st.record(&name, outcome.map_err(|e| (e.to_string(), e.exit_code())));
    }
}

fn selftest_model(
    fusion: &FusionSpec,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Result<redundancy_lab::simkit::Model> {
    use redundancy_lab::core::Category;
    use redundancy_lab::simkit::{EncoderSpec, HeadSpec, Model, SimWorld, TaskSpec};
    let tasks = vec![
        TaskSpec::new("t0", Category::General, (0..6).collect(), 4, 8, rng)?,
        TaskSpec::new("t1", Category::OcrChart, (4..8).collect(), 2, 8, rng)?,
    ];
    let world = SimWorld::new(8, 0.05, tasks)?;
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
        rng,
    )
}

fn selftest_grad_sensitivity(st: &mut SelfTest, tolerance: f64) {
    use rand::SeedableRng;
    let outcome = (|| {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        let model = selftest_model(&FusionSpec::ChannelConcat, &mut rng)?;
        let batch = grad_check_batch(&model, 4, &mut rng);
        let tape = model.tape(Trainable {
            head: true,
            fusion: true,
            encoders: true,
        });
        let report = grad_check(
            &model,
            &batch,
            &GradCheckOptions {
                tolerance,
                corrupt_group: Some(0),
                min_params: tape.total(),
                ..GradCheckOptions::default()
            },
        )?;
        if report.passed {
            Err(Error::GradCheck(
                "sign-flipped gradient went undetected".into(),
            ))
        } else {
            Ok(format!(
                "sign flip surfaced as rel error {:.3e}",
                report.max_rel_error
            ))
        }
    })();
    st.record(
        "grad-check detects corruption",
        outcome.map_err(|e| (e.to_string(), e.exit_code())),
    );
}

fn selftest_fixture(st: &mut SelfTest, name: &str, load: impl FnOnce() -> Result<ScoreTable>) {
    let outcome = (|| {
        let table = load()?;
        let written = write_score_table(&table);
        let reloaded =
            ingest::parse_score_table_auto(&written, Path::new("<round-trip>"))?;
        if reloaded != table {
            return Err(Error::Config(format!(
                "{name}: round-trip produced a different table"
            )));
        }
        Ok(format!(
            "{} subsets x {} benchmarks round-trip cleanly",
            table.subsets().len(),
            table.benchmarks().len()
        ))
    })();
    st.record(
        &format!("fixture round-trip {name}"),
        outcome.map_err(|e| (e.to_string(), e.exit_code())),
    );
}

fn selftest_oracle(st: &mut SelfTest) {
    let scheme = default_scheme();
    let outcome = (|| {
        for table in [fixtures::eagle(), fixtures::cambrian()] {
            for rule in [CurRule::PerSubsetMean, CurRule::MeanOfScores] {
                oracle::check_engine_equivalence(&table, &scheme, rule, 0.0)
                    .map_err(Error::Config)?;
            }
        }
        for seed in 0..20 {
            let table = oracle::random_table(seed);
            oracle::check_engine_equivalence(&table, &scheme, CurRule::PerSubsetMean, 0.0)
                .map_err(|e| Error::Config(format!("random table {seed}: {e}")))?;
        }
        Ok("fixtures + 20 random tables match bit for bit".to_string())
    })();
    st.record(
        "brute-force oracle equivalence",
        outcome.map_err(|e: Error| (e.to_string(), e.exit_code())),
    );
}

fn cmd_selftest(args: &SelftestArgs) -> std::result::Result<(), i32> {
    let mut st = SelfTest {
        failures: Vec::new(),
    };
    selftest_grad(&mut st, args.grad_tol);
    selftest_grad_sensitivity(&mut st, args.grad_tol);
    if args.fixture.is_empty() {
        selftest_fixture(&mut st, "eagle", || {
            let t = fixtures::eagle();
            expect_counts(&t, 32, 4)?;
            Ok(t)
        });
        selftest_fixture(&mut st, "cambrian", || {
            let t = fixtures::cambrian();
            expect_counts(&t, 16, 4)?;
            Ok(t)
        });
    } else {
        for path in &args.fixture {
            let label = path.display().to_string();
            selftest_fixture(&mut st, &label, || load_score_table_auto(path));
        }
    }
    selftest_oracle(&mut st);

    if st.failures.is_empty() {
        println!("selftest: all checks passed");
        Ok(())
    } else {
        println!("selftest: {} check(s) failed", st.failures.len());
        // numerical failures dominate the exit code
        Err(st.failures.iter().map(|(_, c)| *c).max().unwrap_or(2))
    }
}

fn expect_counts(table: &ScoreTable, subsets: usize, benchmarks: usize) -> Result<()> {
    if table.subsets().len() != subsets || table.benchmarks().len() != benchmarks {
        return Err(Error::Config(format!(
            "expected {subsets} subsets x {benchmarks} benchmarks, found {} x {}",
            table.subsets().len(),
            table.benchmarks().len()
        )));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version requests are not usage errors
            if e.use_stderr() {
                eprint!("{e}");
                return ExitCode::from(1);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    let result: std::result::Result<(), i32> = match &cli.command {
        Command::Analyze(args) => cmd_analyze(args).map_err(report_error),
        Command::Simulate(args) => cmd_simulate(args).map_err(report_error),
        Command::Selftest(args) => cmd_selftest(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(code) => ExitCode::from(code as u8),
    }
}

fn report_error(e: Error) -> i32 {
    eprintln!("error: {e}");
    e.exit_code()
}
