//! Verification and benchmark reports behind the command-line tool.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde::Serialize;
use serde_json::{json, Value as Json};

use crate::instrument::{certify_operator, CertifyConfig, ConditionReport, InstrumentationOperator};
use crate::interp::{replays, Counterexample};
use crate::lang::{load, parse_expr, Lambda, Program, Quant};
use crate::opslib;
use crate::oracle::{validate_witness, OracleConfig, SolverConfig};
use crate::oracle::encode::HavocPolicy;
use crate::search::{search, SearchConfig, SearchEvent, SearchResult};

#[derive(Clone, Debug)]
pub struct Flags {
    /// Operator names; `None` picks operators from the program's constructs.
    pub operators: Option<Vec<String>>,
    pub timeout: Duration,
    pub max_ops: usize,
    pub solver_cmd: Option<String>,
    pub dump_smt: Option<PathBuf>,
    pub seed: Option<u64>,
    pub workers: usize,
}

impl Default for Flags {
    fn default() -> Self {
        Flags {
            operators: None,
            timeout: Duration::from_secs(300),
            max_ops: 2,
            solver_cmd: None,
            dump_smt: None,
            seed: None,
            workers: 1,
        }
    }
}

impl Flags {
    pub fn solver(&self) -> SolverConfig {
        let mut s = match &self.solver_cmd {
            Some(cmd) => SolverConfig::from_command_line(cmd),
            None => SolverConfig::default(),
        };
        s.seed = self.seed;
        s.dump_dir = self.dump_smt.clone();
        s
    }

    pub fn oracle(&self) -> OracleConfig {
        OracleConfig {
            solver: self.solver(),
            ..OracleConfig::default()
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{0}")]
    Frontend(#[from] crate::lang::FrontendError),
    #[error("unknown operator `{0}`")]
    UnknownOperator(String),
    #[error("only one worker is supported")]
    Workers,
}

#[derive(Clone, Debug, Serialize)]
pub struct ReportStats {
    pub inst_space: u128,
    pub inst_steps: usize,
    pub time_s: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub verdict: String,
    /// Rewritten points (by marker when the statement has one) and rules.
    pub selection: BTreeMap<String, String>,
    pub witness: Option<Json>,
    pub counterexample: Option<Json>,
    pub stats: ReportStats,
    /// Outcome of re-checking the witness or replaying the counterexample.
    pub checked: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

impl Report {
    pub fn exit_code(&self) -> i32 {
        match self.verdict.as_str() {
            "safe" => 0,
            "unsafe" => 1,
            _ => 2,
        }
    }

    pub fn to_json(&self) -> Json {
        serde_json::to_value(self).expect("serializable report")
    }
}

/// Operators named on the command line. Quantifier operators get one
/// instance per matching predicate of the program.
pub fn operators_by_name(p: &Program, names: &[String]) -> Result<Vec<InstrumentationOperator>, CliError> {
    let mut ops = Vec::new();
    for name in names {
        match name.as_str() {
            "forall" | "exists" => {
                let kind = if name == "forall" { Quant::Forall } else { Quant::Exists };
                for (k, pred) in opslib::quantifier_predicates(p).into_iter().filter(|(q, _)| *q == kind).map(|(_, l)| l).enumerate() {
                    let op = opslib::by_name(name, Some(&pred)).expect("quantifier operator");
                    ops.push(op.instance(k));
                }
            }
            _ => ops.push(opslib::by_name(name, None).ok_or_else(|| CliError::UnknownOperator(name.clone()))?),
        }
    }
    Ok(opslib::rename_shared_ghosts(ops))
}

/// Searches for an instrumentation of `p` and assembles the report.
pub fn verify_program(
    p: &Program,
    flags: &Flags,
    progress: Option<&mut dyn FnMut(&SearchEvent)>,
) -> Result<(Report, SearchResult), CliError> {
    if flags.workers != 1 {
        return Err(CliError::Workers);
    }
    let ops = match &flags.operators {
        Some(names) => operators_by_name(p, names)?,
        None => opslib::default_operators(p),
    };
    let start = Instant::now();
    let mut cfg = SearchConfig {
        oracle: flags.oracle(),
        timeout: flags.timeout,
        max_ops: flags.max_ops,
        progress,
        ..SearchConfig::default()
    };
    let res = search(p, &ops, &mut cfg);
    let stats = ReportStats {
        inst_space: res.stats().space,
        inst_steps: res.stats().iterations,
        time_s: start.elapsed().as_secs_f64(),
    };
    let report = match &res {
        SearchResult::VerifiedWith {
            selection,
            witness,
            inst_witness,
            instrumented,
            ..
        } => {
            let names = selection
                .chosen()
                .map(|(pt, rule)| {
                    let key = p
                        .find(pt)
                        .and_then(|s| s.marker.clone())
                        .unwrap_or_else(|| pt.to_string());
                    (key, rule.to_string())
                })
                .collect();
            let checked = validate_witness(&instrumented.program, inst_witness, &flags.solver(), HavocPolicy::default())
                .ok()
                .map(|c| c.valid());
            Report {
                verdict: "safe".into(),
                selection: names,
                witness: Some(witness.to_json()),
                counterexample: None,
                stats,
                checked,
                reason: None,
            }
        }
        SearchResult::Incorrect { cex, .. } => Report {
            verdict: "unsafe".into(),
            selection: BTreeMap::new(),
            witness: None,
            counterexample: Some(cex_json(cex)),
            stats,
            checked: Some(replays(p, cex)),
            reason: None,
        },
        SearchResult::Inconclusive { reason, .. } => Report {
            verdict: "inconclusive".into(),
            selection: BTreeMap::new(),
            witness: None,
            counterexample: None,
            stats,
            checked: None,
            reason: Some(reason.clone()),
        },
    };
    Ok((report, res))
}

pub fn cex_json(cex: &Counterexample) -> Json {
    json!({
        "initial": cex.initial,
        "failing": cex.failing.to_string(),
        "length": cex.len(),
        "steps": cex.steps,
    })
}

pub fn load_file(path: &Path) -> Result<Program, CliError> {
    let src = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(load(&src)?.program)
}

pub fn cmd_verify(
    path: &Path,
    flags: &Flags,
    progress: Option<&mut dyn FnMut(&SearchEvent)>,
) -> Result<Report, CliError> {
    let p = load_file(path)?;
    Ok(verify_program(&p, flags, progress)?.0)
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchRow {
    pub name: String,
    pub verdict: String,
    pub time_s: f64,
    pub inst_space: Option<u128>,
    pub inst_steps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CategoryRow {
    pub category: String,
    pub total: usize,
    pub safe: usize,
    pub unsafe_: usize,
    pub time_s: f64,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct BenchTable {
    pub rows: Vec<BenchRow>,
    pub categories: Vec<CategoryRow>,
}

const CATEGORIES: [&str; 4] = ["min", "max", "sum", "forall"];

/// Category of a benchmark named `<name>-<N|UB>`: the leading word of
/// its name when that is one of the aggregate or quantifier kinds.
pub fn category(name: &str) -> Option<&'static str> {
    let word = name.split(['_', '-']).next().unwrap_or("");
    let word = word.trim_end_matches(|c: char| c.is_ascii_digit());
    CATEGORIES.into_iter().find(|c| *c == word)
}

impl BenchTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("name,verdict,time_s,inst_space,inst_steps\n");
        let opt = |v: Option<String>| v.unwrap_or_default();
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{:.3},{},{}",
                r.name,
                r.verdict,
                r.time_s,
                opt(r.inst_space.map(|v| v.to_string())),
                opt(r.inst_steps.map(|v| v.to_string()))
            );
        }
        for c in &self.categories {
            let _ = writeln!(out, "[{}],{}/{} safe,{:.3},,", c.category, c.safe, c.total, c.time_s);
        }
        out
    }

    pub fn to_json(&self) -> Json {
        json!({
            "schema": 1,
            "rows": self.rows,
            "categories": self.categories,
        })
    }
}

/// Verifies every `.cw` file of `dir` in name order. Failures to load or
/// verify a file become rows of their own.
pub fn cmd_bench(dir: &Path, flags: &Flags, mut on_row: impl FnMut(&BenchRow)) -> Result<BenchTable, CliError> {
    let io = |source| CliError::Io {
        path: dir.display().to_string(),
        source,
    };
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(io)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "cw"))
        .collect();
    files.sort();
    let mut table = BenchTable::default();
    for f in files {
        let name = f.file_stem().unwrap_or_default().to_string_lossy().into_owned();
        let start = Instant::now();
        let row = match load_file(&f).and_then(|p| verify_program(&p, flags, None)) {
            Ok((rep, _)) => BenchRow {
                name,
                verdict: rep.verdict,
                time_s: rep.stats.time_s,
                inst_space: Some(rep.stats.inst_space),
                inst_steps: Some(rep.stats.inst_steps),
                error: None,
            },
            Err(e) => BenchRow {
                name,
                verdict: "error".into(),
                time_s: start.elapsed().as_secs_f64(),
                inst_space: None,
                inst_steps: None,
                error: Some(e.to_string()),
            },
        };
        on_row(&row);
        table.rows.push(row);
    }
    for c in CATEGORIES {
        let rows: Vec<&BenchRow> = table.rows.iter().filter(|r| category(&r.name) == Some(c)).collect();
        if rows.is_empty() {
            continue;
        }
        table.categories.push(CategoryRow {
            category: c.into(),
            total: rows.len(),
            safe: rows.iter().filter(|r| r.verdict == "safe").count(),
            unsafe_: rows.iter().filter(|r| r.verdict == "unsafe").count(),
            time_s: rows.iter().map(|r| r.time_s).sum(),
        });
    }
    Ok(table)
}

/// Predicate used to instantiate the quantifier operators for
/// certification.
pub fn certify_predicate() -> Lambda {
    Lambda::new("x", "i", parse_expr("x == i").expect("predicate"))
}

pub fn cmd_certify(name: &str, flags: &Flags) -> Result<ConditionReport, CliError> {
    let pred = certify_predicate();
    let op = opslib::by_name(name, Some(&pred)).ok_or_else(|| CliError::UnknownOperator(name.into()))?;
    let cfg = CertifyConfig {
        solver: Some(flags.solver()),
        ..CertifyConfig::default()
    };
    Ok(certify_operator(&op, &cfg))
}
