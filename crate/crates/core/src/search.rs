//! Counterexample-guided search over the instrumentation space.
//!
//! Selections are tried cheapest first. A counterexample that fails at an
//! assertion added by instrumentation refutes the rule choices it passed
//! through, and every selection agreeing with those choices is blocked.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::instrument::{
    applicable_points, apply_selection, back_translate_witness, project_counterexample, space_size,
    Applicable, Instrumented, InstrumentationOperator, Selection, Witness,
};
use crate::interp::Counterexample;
use crate::lang::{ControlPoint, Program};
use crate::oracle::{is_correct, OracleConfig, Verdict};

/// A forbidden partial assignment of rules to points.
pub type Constraint = BTreeMap<ControlPoint, Option<String>>;

/// `Cand`: the selections not yet refuted.
#[derive(Clone, Debug)]
pub struct CandidateSpace {
    /// Applicable points in program order, each with its rule menu.
    points: Vec<(ControlPoint, Vec<String>)>,
    blocked: Vec<Constraint>,
    removed: BTreeSet<Selection>,
}

impl CandidateSpace {
    pub fn new(p: &Program, q: &Applicable) -> CandidateSpace {
        let mut order = Vec::new();
        p.body.walk(&mut |s| order.push(s.label));
        let points = order
            .into_iter()
            .filter_map(|l| q.get(&l).map(|rules| (l, rules.clone())))
            .collect();
        CandidateSpace {
            points,
            blocked: Vec::new(),
            removed: BTreeSet::new(),
        }
    }

    /// Size of the full space, including the selections already excluded.
    pub fn initial_size(&self) -> u128 {
        let q: Applicable = self.points.iter().cloned().collect();
        space_size(&q)
    }

    pub fn points(&self) -> impl Iterator<Item = ControlPoint> + '_ {
        self.points.iter().map(|(p, _)| *p)
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.blocked
    }

    pub fn contains(&self, r: &Selection) -> bool {
        let well_formed = self.points.iter().all(|(p, rules)| match r.get(*p) {
            None => true,
            Some(rule) => rules.iter().any(|x| x == rule),
        });
        well_formed
            && !self.removed.contains(r)
            && !self.is_blocked(r)
    }

    /// Whether a blocking constraint excludes `r`, ignoring removals.
    pub fn is_blocked(&self, r: &Selection) -> bool {
        self.blocked.iter().any(|c| agrees(r, c))
    }

    pub fn block(&mut self, c: Constraint) {
        self.blocked.push(c);
    }

    /// Drops a single selection without refuting anything else.
    pub fn remove(&mut self, r: &Selection) {
        self.removed.insert(r.clone());
    }

    /// Every selection in pick order: fewest rewritten points first, then
    /// program order of the points, then rule order.
    pub fn ordered(&self) -> PickOrder {
        PickOrder {
            menus: self.points.clone(),
            k: 0,
            combo: Vec::new(),
            choice: Vec::new(),
            fresh: true,
        }
    }

    /// Number of members, by enumeration.
    pub fn count(&self) -> usize {
        self.ordered().filter(|r| self.contains(r)).count()
    }
}

fn agrees(r: &Selection, c: &Constraint) -> bool {
    c.iter().all(|(p, rule)| r.get(*p) == rule.as_deref())
}

/// Lazy enumeration of a space in pick order.
pub struct PickOrder {
    menus: Vec<(ControlPoint, Vec<String>)>,
    k: usize,
    combo: Vec<usize>,
    choice: Vec<usize>,
    fresh: bool,
}

impl PickOrder {
    fn advance(&mut self) -> bool {
        if self.fresh {
            self.fresh = false;
            return true;
        }
        for j in (0..self.k).rev() {
            self.choice[j] += 1;
            if self.choice[j] < self.menus[self.combo[j]].1.len() {
                return true;
            }
            self.choice[j] = 0;
        }
        let n = self.menus.len();
        if let Some(j) = (0..self.k).rev().find(|&j| self.combo[j] < n - self.k + j) {
            self.combo[j] += 1;
            for t in j + 1..self.k {
                self.combo[t] = self.combo[t - 1] + 1;
            }
            return true;
        }
        self.k += 1;
        if self.k > n {
            return false;
        }
        self.combo = (0..self.k).collect();
        self.choice = vec![0; self.k];
        true
    }
}

impl Iterator for PickOrder {
    type Item = Selection;

    fn next(&mut self) -> Option<Selection> {
        if self.k > self.menus.len() || !self.advance() {
            self.k = self.menus.len() + 1;
            return None;
        }
        let mut r = Selection(self.menus.iter().map(|(p, _)| (*p, None)).collect());
        for (j, &i) in self.combo.iter().enumerate() {
            let (p, rules) = &self.menus[i];
            r = r.with(*p, &rules[self.choice[j]]);
        }
        Some(r)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PruneError {
    #[error("the counterexample visits no rewritten point")]
    NoRewrittenPoint,
}

/// Blocks every selection agreeing with `r` on the points whose
/// replacement occurs on `cex`.
pub fn prune(cand: &mut CandidateSpace, inst: &Instrumented, cex: &Counterexample) -> Result<Constraint, PruneError> {
    let c: Constraint = cand
        .points()
        .filter(|p| cex.visits(inst.ins_r(*p)))
        .map(|p| (p, inst.selection.get(p).map(str::to_string)))
        .collect();
    if c.is_empty() {
        return Err(PruneError::NoRewrittenPoint);
    }
    cand.block(c.clone());
    Ok(c)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SearchStats {
    /// Oracle calls over all rounds.
    pub iterations: usize,
    /// Size of the space of the deciding round.
    pub space: u128,
    pub oracle_time_s: f64,
    pub time_s: f64,
    /// Operator instances used in the deciding round.
    pub rounds: usize,
}

#[derive(Clone, Debug)]
pub enum SearchResult {
    VerifiedWith {
        selection: Selection,
        /// Witness over the original program's variables.
        witness: Witness,
        /// Witness of the instrumented program, as returned by the oracle.
        inst_witness: Witness,
        instrumented: Instrumented,
        ops: Vec<InstrumentationOperator>,
        stats: SearchStats,
    },
    Incorrect {
        /// Projected onto the original program.
        cex: Counterexample,
        stats: SearchStats,
    },
    Inconclusive {
        reason: String,
        stats: SearchStats,
    },
}

impl SearchResult {
    pub fn stats(&self) -> &SearchStats {
        match self {
            SearchResult::VerifiedWith { stats, .. }
            | SearchResult::Incorrect { stats, .. }
            | SearchResult::Inconclusive { stats, .. } => stats,
        }
    }

    pub fn verdict_name(&self) -> &'static str {
        match self {
            SearchResult::VerifiedWith { .. } => "safe",
            SearchResult::Incorrect { .. } => "unsafe",
            SearchResult::Inconclusive { .. } => "inconclusive",
        }
    }
}

/// One line of the progress stream.
#[derive(Clone, Debug, Serialize)]
pub struct SearchEvent {
    pub round: usize,
    pub iteration: usize,
    pub candidate: String,
    pub verdict: String,
    pub time_s: f64,
}

pub struct SearchConfig<'a> {
    pub oracle: OracleConfig,
    /// Wall-clock budget for the whole search.
    pub timeout: Duration,
    /// Highest number of simultaneous instances of each operator.
    pub max_ops: usize,
    /// Times a selection with an inconclusive oracle answer is retried, each
    /// time with twice the solver timeout.
    pub retries: usize,
    pub progress: Option<&'a mut dyn FnMut(&SearchEvent)>,
}

impl Default for SearchConfig<'_> {
    fn default() -> Self {
        SearchConfig {
            oracle: OracleConfig::default(),
            timeout: Duration::from_secs(300),
            max_ops: 2,
            retries: 1,
            progress: None,
        }
    }
}

/// `ops` with `m` simultaneous instances of every operator, ghosts renamed
/// apart with suffixes `_1`, `_2` and so on.
pub fn escalate(base: &[InstrumentationOperator], m: usize) -> Vec<InstrumentationOperator> {
    let mut all = base.to_vec();
    for _ in 1..m {
        all.extend(base.iter().cloned());
    }
    crate::opslib::rename_shared_ghosts(all)
}

/// Runs the search round by round, adding operator instances while the
/// result stays inconclusive.
pub fn search(p: &Program, ops: &[InstrumentationOperator], cfg: &mut SearchConfig<'_>) -> SearchResult {
    let start = Instant::now();
    let mut total = SearchStats::default();
    let mut last = None;
    for m in 1..=cfg.max_ops.max(1) {
        let round_ops = escalate(ops, m);
        let res = search_round(p, &round_ops, m, cfg, start, &mut total);
        total.time_s = start.elapsed().as_secs_f64();
        let res = with_stats(res, &total);
        // Without operators every round would search the same space again.
        if !matches!(res, SearchResult::Inconclusive { .. }) || start.elapsed() >= cfg.timeout || ops.is_empty() {
            return res;
        }
        last = Some(res);
    }
    last.expect("at least one round")
}

fn with_stats(res: SearchResult, total: &SearchStats) -> SearchResult {
    match res {
        SearchResult::VerifiedWith {
            selection,
            witness,
            inst_witness,
            instrumented,
            ops,
            ..
        } => SearchResult::VerifiedWith {
            selection,
            witness,
            inst_witness,
            instrumented,
            ops,
            stats: total.clone(),
        },
        SearchResult::Incorrect { cex, .. } => SearchResult::Incorrect {
            cex,
            stats: total.clone(),
        },
        SearchResult::Inconclusive { reason, .. } => SearchResult::Inconclusive {
            reason,
            stats: total.clone(),
        },
    }
}

fn search_round(
    p: &Program,
    ops: &[InstrumentationOperator],
    round: usize,
    cfg: &mut SearchConfig<'_>,
    start: Instant,
    stats: &mut SearchStats,
) -> SearchResult {
    let q = applicable_points(p, ops);
    let mut cand = CandidateSpace::new(p, &q);
    stats.space = cand.initial_size();
    stats.rounds = round;
    let inconclusive = |reason: &str, stats: &SearchStats| SearchResult::Inconclusive {
        reason: reason.to_string(),
        stats: stats.clone(),
    };
    // A selection whose ghosts clash with program variables can never be
    // applied, and neither can any other in this round.
    if let Some(op) = ops.iter().find(|o| o.clashes_with(p)) {
        return inconclusive(&format!("ghosts of {} clash with program variables", op.name), stats);
    }
    let mut order = cand.ordered();
    let mut retry: VecDeque<(Selection, usize)> = VecDeque::new();
    let mut unknown_reason = String::from("no selection left");
    loop {
        if start.elapsed() >= cfg.timeout {
            return inconclusive("timeout", stats);
        }
        let (r, attempt) = match order.by_ref().find(|r| cand.contains(r)) {
            Some(r) => (r, 0),
            None => loop {
                match retry.pop_front() {
                    Some((r, a)) if !cand.is_blocked(&r) => break (r, a),
                    Some(_) => continue,
                    None => return inconclusive(&unknown_reason, stats),
                }
            },
        };
        let inst = match apply_selection(p, ops, &r) {
            Ok(i) => i,
            Err(_) => {
                cand.remove(&r);
                continue;
            }
        };
        let mut oracle = cfg.oracle.clone();
        oracle.solver.timeout_s *= f64::from(1u32 << attempt.min(16));
        let remaining = cfg.timeout.saturating_sub(start.elapsed()).as_secs_f64();
        oracle.solver.timeout_s = oracle.solver.timeout_s.min(remaining.max(1.0));
        let t = Instant::now();
        let verdict = is_correct(&inst.program, &oracle);
        let dt = t.elapsed().as_secs_f64();
        stats.iterations += 1;
        stats.oracle_time_s += dt;
        if let Some(cb) = cfg.progress.as_mut() {
            let verdict = match &verdict {
                Verdict::Safe(_) => "safe",
                Verdict::Unsafe(_) => "unsafe",
                Verdict::Unknown(_) => "unknown",
            };
            cb(&SearchEvent {
                round,
                iteration: stats.iterations,
                candidate: r.to_string(),
                verdict: verdict.into(),
                time_s: dt,
            });
        }
        match verdict {
            Verdict::Safe(w) => {
                return SearchResult::VerifiedWith {
                    witness: back_translate_witness(&w, ops),
                    inst_witness: w,
                    selection: r,
                    instrumented: inst,
                    ops: ops.to_vec(),
                    stats: stats.clone(),
                }
            }
            Verdict::Unsafe(cex) => match project_counterexample(&cex, &inst) {
                Ok(cex) => {
                    return SearchResult::Incorrect {
                        cex,
                        stats: stats.clone(),
                    }
                }
                Err(_) => {
                    if prune(&mut cand, &inst, &cex).is_err() {
                        cand.remove(&r);
                    }
                }
            },
            Verdict::Unknown(reason) => {
                unknown_reason = reason;
                cand.remove(&r);
                if attempt < cfg.retries {
                    retry.push_back((r, attempt + 1));
                }
            }
        }
    }
}
