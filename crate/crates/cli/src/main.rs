//! `qrt`: run declarative scenarios against the toolkit.

mod builtin;
mod report;
mod run;
mod scenario;

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use report::{Report, Status, Summary};
use run::Overrides;
use scenario::Scenario;

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Parser, Debug)]
#[command(name = "qrt", version, about = "Scenario runner for composite resource theories")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Override the scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the Frank–Wolfe duality-gap target.
    #[arg(long, global = true)]
    gap: Option<f64>,
    /// Scenarios run concurrently by `suite`.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one scenario file or builtin scenario.
    Run { scenario: String },
    /// Run every `*.json` scenario in a directory, or the builtin set.
    Suite {
        dir: Option<PathBuf>,
        #[arg(long, conflicts_with = "dir")]
        builtin: bool,
    },
    /// Print what a scenario computes and expects; without an argument,
    /// list the builtin scenarios.
    Describe { scenario: Option<String> },
}

/// Text of a scenario given as a path or a builtin name.
fn load(arg: &str) -> Result<(String, String)> {
    let p = Path::new(arg);
    if p.exists() {
        let text = std::fs::read_to_string(p).with_context(|| format!("reading {arg}"))?;
        return Ok((arg.to_string(), text));
    }
    match builtin::get(arg) {
        Some(text) => Ok((arg.to_string(), text.to_string())),
        None => bail!("`{arg}` is neither a file nor a builtin scenario"),
    }
}

fn parse(name: &str, text: &str) -> std::result::Result<Scenario, Report> {
    Scenario::from_json(text).map_err(|e| Report::invalid(name, format!("{e:#}")))
}

fn emit(cli: &Cli, reports: &[Report], summary: Option<&Summary>) -> Result<()> {
    let text = match cli.format {
        Format::Json => match summary {
            Some(s) => serde_json::to_string_pretty(s)?,
            None => serde_json::to_string_pretty(&reports[0])?,
        },
        Format::Csv => report::to_csv(reports)?.trim_end().to_string(),
    };
    match &cli.out {
        Some(p) => std::fs::write(p, text + "\n").with_context(|| format!("writing {}", p.display()))?,
        None => println!("{text}"),
    }
    Ok(())
}

fn progress(r: &Report) {
    let status = serde_json::to_value(r.status).map(|v| v.as_str().unwrap_or("").to_string()).unwrap_or_default();
    let failed: Vec<&str> = r.checks.iter().filter(|c| !c.pass).map(|c| c.key.as_str()).collect();
    let mut line = format!("{status:<11} {} [{:.2}s]", r.scenario, r.wall_time_s);
    if !failed.is_empty() {
        line += &format!(" failed checks: {}", failed.join(", "));
    }
    if let Some(e) = &r.error {
        line += &format!(" ({e})");
    }
    eprintln!("{line}");
}

fn scenario_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("reading directory {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    Ok(files)
}

fn cmd_run(cli: &Cli, arg: &str, ov: Overrides) -> Result<i32> {
    let report = match load(arg) {
        Err(e) => Report::invalid(arg, format!("{e:#}")),
        Ok((name, text)) => match parse(&name, &text) {
            Ok(s) => run::run(&s, ov),
            Err(r) => r,
        },
    };
    progress(&report);
    let code = report.status.exit_code();
    emit(cli, std::slice::from_ref(&report), None)?;
    Ok(code)
}

fn cmd_suite(cli: &Cli, dir: Option<&Path>, use_builtin: bool, ov: Overrides) -> Result<i32> {
    let sources: Vec<(String, std::result::Result<String, String>)> = if use_builtin {
        builtin::ALL.iter().map(|(n, t)| (n.to_string(), Ok(t.to_string()))).collect()
    } else {
        let Some(dir) = dir else { bail!("give a directory or --builtin") };
        scenario_files(dir)?
            .into_iter()
            .map(|p| {
                let text = std::fs::read_to_string(&p).map_err(|e| e.to_string());
                (p.display().to_string(), text)
            })
            .collect()
    };
    let start = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs.max(1)).build()?;
    let reports: Vec<Report> = pool.install(|| {
        sources
            .par_iter()
            .map(|(name, text)| {
                let r = match text {
                    Err(e) => Report::invalid(name, e.clone()),
                    Ok(t) => match parse(name, t) {
                        Ok(s) => run::run(&s, ov),
                        Err(r) => r,
                    },
                };
                progress(&r);
                r
            })
            .collect()
    });
    let summary = Summary::new(reports, start.elapsed().as_secs_f64());
    eprintln!("{} of {} scenarios passed in {:.1}s", summary.passed, summary.reports.len(), summary.wall_time_s);
    emit(cli, &summary.reports, Some(&summary))?;
    Ok(summary.exit_code())
}

fn cmd_describe(arg: Option<&str>) -> Result<i32> {
    let Some(arg) = arg else {
        for (name, text) in builtin::ALL {
            let s = Scenario::from_json(text)?;
            println!("{name:<28} {:?}  {}", s.kind, s.description);
        }
        return Ok(0);
    };
    let (name, text) = load(arg)?;
    let s = match parse(&name, &text) {
        Ok(s) => s,
        Err(r) => {
            eprintln!("invalid scenario: {}", r.error.unwrap_or_default());
            return Ok(Status::Invalid.exit_code());
        }
    };
    println!("{} ({})", s.name, serde_json::to_value(s.kind)?.as_str().unwrap_or(""));
    if !s.description.is_empty() {
        println!("  {}", s.description);
    }
    println!("  seed: {}", s.seed);
    if !s.anchors.is_empty() {
        println!("  reproduces:");
        for a in &s.anchors {
            println!("    - {a}");
        }
    }
    if !s.expected.is_empty() {
        println!("  expects:");
        for (k, e) in &s.expected {
            println!("    {k}: {}", serde_json::to_string(e)?);
        }
    }
    Ok(0)
}

fn main() {
    let cli = Cli::parse();
    let ov = Overrides { seed: cli.seed, gap: cli.gap };
    let code = match &cli.command {
        Command::Run { scenario } => cmd_run(&cli, scenario, ov),
        Command::Suite { dir, builtin } => cmd_suite(&cli, dir.as_deref(), *builtin, ov),
        Command::Describe { scenario } => cmd_describe(scenario.as_deref()),
    };
    match code {
        Ok(c) => std::process::exit(c),
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(Status::Invalid.exit_code());
        }
    }
}
