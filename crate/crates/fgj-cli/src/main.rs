//! `fgj`: scenario runner for the finite-gap Jacobi toolkit.
//!
//! Exit status: 0 when every suite passes, 1 when a suite fails (reports are
//! still written), 2 for unreadable or invalid scenarios.

mod output;
mod scenario;
mod suites;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde_json::{json, Value};

use output::{normalize, to_value, write_json, write_series, Series};
use scenario::{InputError, Scenario};
use suites::{run_suite, SuiteError};

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser)]
#[command(name = "fgj", version, about = "Verification suites for finite-gap Jacobi matrices")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the suites of a scenario and write reports.
    Run {
        file: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Validate a scenario and print its normalized form.
    Validate { file: PathBuf },
    /// Regenerate CSV series from the reports in a directory.
    Series { dir: PathBuf },
}

fn tol_scale() -> Result<f64, InputError> {
    match std::env::var("FGJ_TOL_SCALE") {
        Ok(s) => s.trim().parse::<f64>().map_err(|_| InputError::new("scenario.invalid", format!("FGJ_TOL_SCALE={s:?} is not a number"))),
        Err(_) => Ok(1.0),
    }
}

fn load(file: &Path) -> Result<Scenario, InputError> {
    let text = fs::read_to_string(file).map_err(|e| InputError::new("io", format!("{}: {e}", file.display())))?;
    scenario::parse(&text, tol_scale()?)
}

fn input_failure(e: &InputError) -> ExitCode {
    eprintln!("{}", serde_json::to_string(&json!({ "error": e })).expect("error body serializes"));
    ExitCode::from(2)
}

fn report(sc: &Scenario, suite: &str, outcome: &Result<suites::Outcome, SuiteError>) -> (bool, Value, Vec<Series>) {
    let mut body = json!({
        "version": VERSION,
        "scenario": sc.name,
        "suite": suite,
        "tolerance": to_value(&sc.tol(suite)),
    });
    let obj = body.as_object_mut().expect("report is an object");
    match outcome {
        Ok(o) => {
            obj.insert("pass".into(), Value::Bool(o.pass));
            obj.insert("summary".into(), o.summary.clone());
            obj.insert("series".into(), to_value(&o.series));
            (o.pass, normalize(body), o.series.clone())
        }
        Err(e) => {
            let (code, message) = match e {
                SuiteError::Input(i) => (i.code.clone(), i.message.clone()),
                SuiteError::Core(c) => (c.code().to_string(), c.to_string()),
            };
            obj.insert("pass".into(), Value::Bool(false));
            obj.insert("error".into(), json!({ "code": code, "message": message }));
            (false, normalize(body), vec![])
        }
    }
}

fn run(file: &Path, out: Option<PathBuf>, jobs: Option<usize>) -> Result<ExitCode> {
    let sc = match load(file) {
        Ok(sc) => sc,
        Err(e) => return Ok(input_failure(&e)),
    };
    let dir = out.or_else(|| sc.out.as_ref().map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("reports"));
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs.unwrap_or(0)).build()?;
    let outcomes: Vec<_> = pool.install(|| sc.suites.par_iter().map(|s| run_suite(&sc, s)).collect());
    let mut all_pass = true;
    for (suite, outcome) in sc.suites.iter().zip(&outcomes) {
        let (pass, body, series) = report(&sc, suite, outcome);
        write_json(&dir.join(format!("{suite}.json")), &body)?;
        write_series(&dir, suite, &series)?;
        println!("{suite}: {}", if pass { "pass" } else { "FAIL" });
        all_pass &= pass;
    }
    Ok(ExitCode::from(if all_pass { 0 } else { 1 }))
}

fn validate(file: &Path) -> Result<ExitCode> {
    match load(file) {
        Ok(sc) => {
            println!("{}", serde_json::to_string_pretty(&to_value(&sc.normalized()))?);
            Ok(ExitCode::SUCCESS)
        }
        Err(e) => Ok(input_failure(&e)),
    }
}

fn series(dir: &Path) -> Result<ExitCode> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    paths.retain(|p| p.extension().is_some_and(|x| x == "json"));
    paths.sort();
    for p in paths {
        let v: Value = serde_json::from_str(&fs::read_to_string(&p)?).with_context(|| format!("parsing {}", p.display()))?;
        let (Some(suite), Some(list)) = (v["suite"].as_str(), v.get("series")) else { continue };
        let list: Vec<Series> = serde_json::from_value(list.clone()).with_context(|| format!("series in {}", p.display()))?;
        write_series(dir, suite, &list)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Run { file, out, jobs } => run(&file, out, jobs),
        Cmd::Validate { file } => validate(&file),
        Cmd::Series { dir } => series(&dir),
    };
    result.unwrap_or_else(|e| {
        eprintln!("{}", json!({ "error": { "code": "io", "message": format!("{e:#}") } }));
        ExitCode::from(2)
    })
}
