use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use rtsusp::analysis::{analyze_taskset, AnalysisReport, TestKind};
use rtsusp::gen::{figure1_fixture, generate_tasksets, TasksetParams};
use rtsusp::harness::{
    acceptance_ratio_sweep, counterexample_search, soundness_fuzz, sweep_csv, FuzzConfig,
    SearchConfig, SweepConfig, UtilGrid,
};
use rtsusp::rational::Rational;
use rtsusp::sim::{idle_time, simulate, verify_trace, Scenario, Trace};
use rtsusp::task::TaskSet;
use rtsusp::time::TimeTicks;

#[derive(Parser)]
#[command(
    name = "rtsusp",
    version,
    about = "Schedulability analysis and simulation of self-suspending sporadic tasks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Table,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Run a schedulability test on every task of a task set.
    Analyze {
        taskset: PathBuf,
        #[arg(long, default_value = "tda-suspension", value_parser = parse_test)]
        test: TestKind,
        #[arg(long, value_enum, default_value = "table")]
        format: Format,
    },
    /// Simulate a scenario and check the resulting schedule.
    Simulate {
        taskset: PathBuf,
        #[arg(long)]
        scenario: PathBuf,
        /// Write the event trace (JSON lines) here.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "table")]
        format: Format,
    },
    /// Generate synthetic task sets.
    Generate {
        #[arg(long)]
        tasks: usize,
        #[arg(long, value_parser = parse_rational)]
        util: Rational,
        #[arg(long, default_value_t = 1)]
        sets: usize,
        #[arg(long, value_parser = parse_rational, default_value = "0")]
        beta: Rational,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        period_min: u64,
        #[arg(long, default_value_t = 100_000)]
        period_max: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a sound test against simulated scenarios of generated task sets.
    Fuzz {
        #[arg(long, value_parser = parse_test)]
        test: TestKind,
        #[arg(long, default_value_t = 200)]
        sets: usize,
        #[arg(long, default_value_t = 20)]
        scenarios: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_parser = parse_rational, default_value = "0.3")]
        beta: Rational,
        /// Write the JSON report here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Acceptance ratios of several tests over a utilization grid.
    Sweep {
        /// Comma-separated test names.
        #[arg(long, value_delimiter = ',', value_parser = parse_test, required = true)]
        tests: Vec<TestKind>,
        /// start:stop:step, e.g. 0.05:1:0.05
        #[arg(long, value_parser = parse_grid)]
        grid: UtilGrid,
        #[arg(long, default_value_t = 100)]
        sets_per_bin: usize,
        #[arg(long, default_value_t = 5)]
        tasks: usize,
        #[arg(long, value_parser = parse_rational, default_value = "0.3")]
        beta: Rational,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write CSV here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Search for a case where an unsound test accepts a task that misses.
    Counterexample {
        #[arg(long, default_value = "tda-naive", value_parser = parse_test)]
        baseline: TestKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        max_sets: usize,
        /// Skip the built-in canonical pair.
        #[arg(long)]
        no_seed_corpus: bool,
        /// Directory for the witness bundle.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Emit a built-in fixture and replay it.
    Fixture {
        #[arg(value_enum)]
        name: FixtureName,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FixtureName {
    Figure1,
}

fn parse_test(s: &str) -> Result<TestKind, String> {
    s.parse()
        .map_err(|e: rtsusp::analysis::AnalysisError| e.to_string())
}

fn parse_rational(s: &str) -> Result<Rational, String> {
    s.parse()
        .map_err(|e: rtsusp::rational::ParseRationalError| e.to_string())
}

fn parse_grid(s: &str) -> Result<UtilGrid, String> {
    s.parse()
        .map_err(|e: rtsusp::harness::HarnessError| e.to_string())
}

fn load_taskset(path: &Path) -> Result<TaskSet> {
    TaskSet::load(path).map_err(|e| match e {
        rtsusp::task::ModelError::Io { .. } => anyhow::anyhow!("{e}"),
        other => anyhow::anyhow!("{}: {other}", path.display()),
    })
}

fn load_scenario(path: &Path) -> Result<Scenario> {
    Scenario::load(path).map_err(|e| anyhow::anyhow!("{e}"))
}

fn write(path: &Path, body: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).with_context(|| format!("{}", parent.display()))?;
    }
    std::fs::write(path, body).with_context(|| format!("{}: cannot write", path.display()))
}

fn opt(v: Option<TimeTicks>) -> String {
    v.map_or_else(|| "-".into(), |t| t.to_string())
}

fn print_table(ts: &TaskSet, report: &AnalysisReport) {
    if report.test == TestKind::UtilRm {
        println!(
            "{:<8} {:>12} {:>10} {:>12}  outcome",
            "task", "lhs", "bound", "margin"
        );
        for v in &report.verdicts {
            let (lhs, bound, margin) = match &v.utilization {
                Some(u) => (
                    u.lhs.to_string(),
                    format!("{:.6}", u.bound),
                    format!("{:+.6}{}", u.margin, if u.borderline { "*" } else { "" }),
                ),
                None => ("-".into(), "-".into(), "-".into()),
            };
            println!(
                "{:<8} {lhs:>12} {bound:>10} {margin:>12}  {}",
                v.task_id, v.outcome
            );
        }
        return;
    }
    println!(
        "{:<8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8}  outcome",
        "task", "C", "S", "T", "D", "B_k", "R"
    );
    for (task, v) in ts.iter().zip(&report.verdicts) {
        println!(
            "{:<8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8}  {}",
            task.id(),
            task.wcet(),
            task.max_suspension(),
            task.period(),
            task.deadline(),
            opt(v.blocking.as_ref().map(|b| b.total)),
            opt(v.response_bound),
            v.outcome
        );
    }
    if !report.test.is_sound() {
        println!("note: {} ignores suspension and is unsound", report.test);
    }
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Analyze {
            taskset,
            test,
            format,
        } => {
            let ts = load_taskset(&taskset)?;
            let report =
                analyze_taskset(&ts, test).with_context(|| format!("{}", taskset.display()))?;
            match format {
                Format::Json => println!("{}", report.to_json()),
                Format::Table => print_table(&ts, &report),
            }
            Ok(if report.all_schedulable() { 0 } else { 1 })
        }
        Command::Simulate {
            taskset,
            scenario,
            trace,
            format,
        } => {
            let ts = load_taskset(&taskset)?;
            let sc = load_scenario(&scenario)?;
            let tr = simulate(&ts, &sc).with_context(|| format!("{}", scenario.display()))?;
            if let Some(path) = &trace {
                write(path, &tr.to_jsonl())?;
            }
            let violations = verify_trace(&tr, &ts)?;
            match format {
                Format::Json => println!("{}", serde_json::to_string_pretty(&violations)?),
                Format::Table => print_simulation(&tr, &violations)?,
            }
            Ok(if violations.is_empty() { 0 } else { 1 })
        }
        Command::Generate {
            tasks,
            util,
            sets,
            beta,
            seed,
            period_min,
            period_max,
            out,
        } => {
            let mut params = TasksetParams::new(tasks, util.clone(), sets, seed, beta);
            params.period_range = (period_min, period_max);
            let generated = generate_tasksets(&params)?;
            std::fs::create_dir_all(&out).with_context(|| format!("{}", out.display()))?;
            let width = sets.saturating_sub(1).to_string().len().max(3);
            for (i, ts) in generated.iter().enumerate() {
                let mut file = ts.to_file();
                let actual = rtsusp::task::total_utilization(ts, ts.len())?;
                file.note = Some(format!(
                    "generated: seed {seed}, set {i}, target utilization {util}, actual {actual}"
                ));
                let path = out.join(format!("set-{i:0width$}.json"));
                write(&path, &(serde_json::to_string_pretty(&file)? + "\n"))?;
            }
            eprintln!("wrote {} task sets to {}", generated.len(), out.display());
            Ok(0)
        }
        Command::Fuzz {
            test,
            sets,
            scenarios,
            seed,
            beta,
            out,
        } => {
            if !test.is_sound() {
                bail!("fuzz: {test} is not a sound test (use counterexample instead)");
            }
            let mut cfg = FuzzConfig::new(test, sets, scenarios, seed);
            cfg.beta = beta;
            let report = soundness_fuzz(&cfg)?;
            match &out {
                Some(path) => write(path, &(report.to_json() + "\n"))?,
                None => println!("{}", report.to_json()),
            }
            eprintln!(
                "{test}: {} task sets, {} simulations, {} misses, {} bound violations in {:.1?}",
                report.tasksets_tested,
                report.simulations,
                report.miss_count,
                report.bound_violations.len(),
                report.elapsed
            );
            Ok(if report.passed() { 0 } else { 1 })
        }
        Command::Sweep {
            tests,
            grid,
            sets_per_bin,
            tasks,
            beta,
            seed,
            out,
        } => {
            let cfg = SweepConfig {
                tests,
                grid,
                n_sets: sets_per_bin,
                n_tasks: tasks,
                beta,
                seed,
                period_range: (1000, 100_000),
            };
            let csv = sweep_csv(&acceptance_ratio_sweep(&cfg)?);
            match &out {
                Some(path) => write(path, &csv)?,
                None => print!("{csv}"),
            }
            Ok(0)
        }
        Command::Counterexample {
            baseline,
            seed,
            max_sets,
            no_seed_corpus,
            out,
        } => {
            if baseline.is_sound() {
                bail!("counterexample: {baseline} is sound; only tda-naive can be refuted");
            }
            let mut cfg = SearchConfig::new(baseline, max_sets, seed);
            cfg.seed_corpus = !no_seed_corpus;
            match counterexample_search(&cfg)? {
                Some(w) => {
                    if let Some(dir) = &out {
                        w.write_bundle(dir)?;
                    }
                    println!("{}", w.violation_json());
                    Ok(1)
                }
                None => {
                    println!("no counterexample found");
                    Ok(0)
                }
            }
        }
        Command::Fixture {
            name: FixtureName::Figure1,
            out,
        } => {
            let (ts, sc) = figure1_fixture();
            let tr = simulate(&ts, &sc)?;
            std::fs::create_dir_all(&out).with_context(|| format!("{}", out.display()))?;
            write(&out.join("taskset.json"), &(ts.to_json() + "\n"))?;
            write(&out.join("scenario.json"), &(sc.to_json() + "\n"))?;
            write(&out.join("trace.jsonl"), &tr.to_jsonl())?;
            let violations = verify_trace(&tr, &ts)?;
            print_simulation(&tr, &violations)?;
            let (from, to) = (sc.annotations["t_1"], 199);
            let idle = idle_time(&tr, from.into(), to.into())?;
            println!("idle over [{from}, {to}): {idle}");
            let marks: Vec<String> = sc
                .annotations
                .iter()
                .map(|(k, v)| format!("{k}={v}"))
                .collect();
            println!("landmarks: {}", marks.join(" "));
            Ok(if violations.is_empty() { 0 } else { 1 })
        }
    }
}

fn print_simulation(tr: &Trace, violations: &[rtsusp::sim::Violation]) -> Result<()> {
    println!("horizon {} (scale {})", tr.horizon, tr.scale);
    println!(
        "{:<8} {:>4} {:>10} {:>10} {:>10} {:>10}  status",
        "task", "job", "release", "deadline", "finish", "response"
    );
    for j in &tr.jobs {
        let status = if j.missed {
            "missed"
        } else if j.completion.is_some() {
            "ok"
        } else {
            "pending"
        };
        println!(
            "{:<8} {:>4} {:>10} {:>10} {:>10} {:>10}  {status}",
            j.task,
            j.job,
            j.release,
            j.deadline,
            opt(j.completion),
            opt(j.response_time())
        );
    }
    for v in violations {
        println!(
            "violation {}: {} job {} at {}: {}",
            serde_json::to_value(v.kind)?.as_str().unwrap_or("?"),
            v.task.as_deref().unwrap_or("-"),
            v.job.map_or_else(|| "-".into(), |j| j.to_string()),
            v.time,
            v.detail
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
