//! Suites: named batches of checks run concurrently on a bounded pool.

use std::sync::Mutex;
use std::time::Instant;

use rayon::prelude::*;
use serde_json::json;

use semireg::acceptance;
use semireg::corpus::{self, NAMES};
use semireg::moduli::ModulusKind;
use semireg::Settings;

use crate::commands::{self, Output};
use crate::config::{ConfigError, ConfigResult, MapRef, ModuliSection, ProblemRef, SolveSection, SuiteName, SuiteSection};
use crate::report::{Report, Verdict, Writer};

type Job<'a> = Box<dyn Fn() -> Vec<Output> + Send + Sync + 'a>;

/// An entry that errors is reported as a failure instead of ending the suite.
fn errored(check: String, seed: u64, e: ConfigError) -> Vec<Output> {
    vec![(Report::new(check, serde_json::Value::Null, seed, Verdict::Fail).note(format!("error: {e}")), Vec::new())]
}

fn acceptance_jobs<'a>(seed: u64) -> Vec<Job<'a>> {
    (1..=acceptance::COUNT)
        .map(|id| -> Job<'a> {
            Box::new(move || {
                let slug = acceptance::name(id).unwrap_or("criterion").replace([' ', '-'], "_");
                let check = format!("acceptance_{id:02}_{slug}");
                let res = match acceptance::run(id, seed) {
                    Ok(r) => r,
                    Err(e) => return errored(check, seed, e.into()),
                };
                let mut r = Report::new(check, json!({ "criterion": id, "name": res.name }), seed, Verdict::from_bool(res.passed))
                    .note(res.detail.clone());
                for (k, v) in &res.values {
                    r = r.value(k, *v);
                }
                vec![(r.details(&res), Vec::new())]
            })
        })
        .collect()
}

fn corpus_jobs<'a>(seed: u64) -> Vec<Job<'a>> {
    NAMES
        .iter()
        .map(|&name| -> Job<'a> {
            Box::new(move || {
                let check = format!("corpus_{name}");
                let checks = match acceptance::check_references(name, seed) {
                    Ok(c) => c,
                    Err(e) => return errored(check, seed, e.into()),
                };
                let all = checks.iter().all(|c| c.holds);
                let mut r = Report::new(check, json!({ "example": name }), seed, Verdict::from_bool(all));
                for c in &checks {
                    r = r.value(&c.reference.quantity, c.estimate);
                }
                let misses: Vec<_> = checks.iter().filter(|c| !c.holds).collect();
                vec![(r.witnesses(misses).details(&checks), Vec::new())]
            })
        })
        .collect()
}

fn moduli_job<'a>(map: String, seed: u64, settings: Settings) -> Job<'a> {
    Box::new(move || {
        let sec = ModuliSection {
            map: MapRef::Corpus(map.clone()),
            point: None,
            kinds: vec![ModulusKind::Lopen, ModulusKind::Semireg],
            schedule: Default::default(),
        };
        commands::moduli(&sec, seed, &settings).unwrap_or_else(|e| errored(format!("moduli_{map}"), seed, e))
    })
}

/// Runs the problem from its corpus starts; a documented iteration count
/// becomes part of each verdict.
fn solve_job<'a>(problem: String, seed: u64, settings: Settings) -> Job<'a> {
    Box::new(move || {
        let sec = SolveSection {
            problem: ProblemRef::Corpus(problem.clone()),
            x0: Vec::new(),
            model: Default::default(),
            options: Default::default(),
        };
        let mut outs = match commands::solve(&sec, seed, &settings) {
            Ok(o) => o,
            Err(e) => return errored(format!("solve_{problem}"), seed, e),
        };
        let reference = corpus::load_example(&problem, seed).ok().and_then(|e| e.reference("iterations").cloned());
        if let Some(rf) = reference {
            for (r, _) in &mut outs {
                let k = r.values.get("iterations").and_then(|v| v.as_f64()).unwrap_or(f64::NAN);
                if !rf.holds(k) {
                    r.verdict = Verdict::Fail;
                    r.notes.push(format!("{k} iterations, expected {}", rf.value));
                }
            }
        }
        outs
    })
}

/// Runs every entry of the suite and hands each report to `writer`.
pub fn run(sec: &SuiteSection, seed: u64, settings: &Settings, writer: &Writer, timing: bool) -> ConfigResult<()> {
    let settings = *settings;
    let jobs: Vec<Job> = match sec.name {
        SuiteName::Acceptance => acceptance_jobs(seed),
        SuiteName::Corpus => corpus_jobs(seed),
        SuiteName::Moduli => vec![moduli_job(sec.map.clone().unwrap_or_else(|| "two_branch".into()), seed, settings)],
        SuiteName::Solve => vec![solve_job(sec.problem.clone().unwrap_or_else(|| "abs_newton".into()), seed, settings)],
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(sec.workers)
        .build()
        .map_err(|e| ConfigError::Schema(format!("cannot start {} workers: {e}", sec.workers)))?;
    let io_error = Mutex::new(None);
    pool.install(|| {
        jobs.par_iter().for_each(|job| {
            let start = Instant::now();
            let outs = job();
            let ms = start.elapsed().as_millis() as u64;
            for (mut report, files) in outs {
                if timing {
                    report.runtime_ms = Some(ms);
                }
                if let Err(e) = writer.write(&report, &files) {
                    io_error.lock().expect("error slot").get_or_insert(e);
                }
            }
        })
    });
    match io_error.into_inner().expect("error slot") {
        Some(e) => Err(ConfigError::Write(e)),
        None => Ok(()),
    }
}
