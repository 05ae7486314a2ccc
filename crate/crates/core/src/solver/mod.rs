//! A minimal CDCL solver with pluggable restart / rephase / bump_var hooks.
//!
//! The backbone is deliberately small: two-watched-literal propagation,
//! first-UIP clause learning with non-chronological backjumping,
//! activity-ordered branching with saved phases, LBD tracking, and a simple
//! learned-clause cap. The three heuristic slots are filled from a
//! [`HeuristicEnsemble`]; everything else is fixed.
//!
//! Runs are deterministic given (formula, ensemble, seed, conflict limit).
//! Wall-clock budgets are the only nondeterministic exit and are checked
//! every 1024 conflicts to keep the hot loop cheap.

pub mod policies;

use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cnf::{check_model, Assignment, CnfFormula};
use crate::portfolio::{HeuristicEnsemble, PortfolioError};
use policies::{ActivityState, BumpPolicy, RephasePolicy, RestartPolicy};

/// Conflicts between wall-clock checks.
const TIME_CHECK_INTERVAL: u64 = 1024;
/// Learned clauses with LBD at or below this are never evicted.
const GLUE_LBD: u32 = 2;

/// Resource limits for one solve call. At least one of the two limits should
/// be set; with both unset the solver runs to completion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Budget {
    pub wall: Option<Duration>,
    pub conflicts: Option<u64>,
}

impl Budget {
    pub fn conflicts(limit: u64) -> Self {
        Budget {
            wall: None,
            conflicts: Some(limit),
        }
    }

    pub fn wall_seconds(seconds: f64) -> Self {
        Budget {
            wall: Some(Duration::from_secs_f64(seconds)),
            conflicts: None,
        }
    }

    pub fn unlimited() -> Self {
        Budget {
            wall: None,
            conflicts: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Sat,
    Unsat,
    Timeout,
}

/// Search counters. `elapsed` is wall time and is excluded from determinism
/// guarantees; everything else is reproducible under conflict budgets.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SolveStats {
    pub conflicts: u64,
    pub decisions: u64,
    pub propagations: u64,
    pub restarts: u64,
    pub rephases: u64,
    pub elapsed: f64,
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub status: SolveStatus,
    pub model: Option<Vec<bool>>,
    pub stats: SolveStats,
}

/// Learned-clause store settings.
#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    /// Cap on retained learned clauses with LBD above the glue threshold.
    pub learnt_cap: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            learnt_cap: 100_000,
        }
    }
}

/// Solves a formula with the given heuristic ensemble.
pub fn solve(
    formula: &CnfFormula,
    ensemble: &HeuristicEnsemble,
    budget: Budget,
    seed: u64,
) -> Result<SolveOutcome, PortfolioError> {
    solve_with_options(formula, ensemble, budget, seed, SolverOptions::default())
}

pub fn solve_with_options(
    formula: &CnfFormula,
    ensemble: &HeuristicEnsemble,
    budget: Budget,
    seed: u64,
    options: SolverOptions,
) -> Result<SolveOutcome, PortfolioError> {
    let restart = RestartPolicy::from_genome(&ensemble.restart)?;
    let rephase = RephasePolicy::from_genome(&ensemble.rephase)?;
    let bump = BumpPolicy::from_genome(&ensemble.bump_var)?;
    let mut solver = Solver::new(formula, restart, rephase, bump, seed, options);
    Ok(solver.run(budget))
}

/// Encoded literal: variable index (0-based) shifted left, low bit = negated.
type Lit = u32;

#[inline]
fn lit_from_dimacs(lit: i32) -> Lit {
    let var = lit.unsigned_abs() - 1;
    (var << 1) | u32::from(lit < 0)
}

#[inline]
fn lit_var(lit: Lit) -> usize {
    (lit >> 1) as usize
}

#[inline]
fn lit_is_pos(lit: Lit) -> bool {
    lit & 1 == 0
}

#[inline]
fn lit_neg(lit: Lit) -> Lit {
    lit ^ 1
}

#[derive(Debug)]
struct ClauseRec {
    lits: Vec<Lit>,
    learnt: bool,
    lbd: u32,
    deleted: bool,
}

#[derive(Debug, Clone, Copy)]
struct Watcher {
    clause: u32,
    blocker: Lit,
}

/// Indexed max-heap over variable activities; ties break toward the lower
/// variable index. Contains a superset of the unassigned variables.
#[derive(Debug)]
struct VarHeap {
    heap: Vec<u32>,
    pos: Vec<i32>,
}

impl VarHeap {
    fn full(n: usize) -> Self {
        let mut heap = VarHeap {
            heap: Vec::with_capacity(n),
            pos: vec![-1; n],
        };
        for v in 0..n as u32 {
            heap.heap.push(v);
            heap.pos[v as usize] = v as i32;
        }
        // All activities start equal; index order already satisfies the
        // heap property for the (activity, index) comparator.
        heap
    }

    #[inline]
    fn better(activity: &[f64], a: u32, b: u32) -> bool {
        let (aa, ab) = (activity[a as usize], activity[b as usize]);
        aa > ab || (aa == ab && a < b)
    }

    fn contains(&self, v: u32) -> bool {
        self.pos[v as usize] >= 0
    }

    fn sift_up(&mut self, activity: &[f64], mut i: usize) {
        let item = self.heap[i];
        while i > 0 {
            let parent = (i - 1) >> 1;
            if Self::better(activity, item, self.heap[parent]) {
                self.heap[i] = self.heap[parent];
                self.pos[self.heap[i] as usize] = i as i32;
                i = parent;
            } else {
                break;
            }
        }
        self.heap[i] = item;
        self.pos[item as usize] = i as i32;
    }

    fn sift_down(&mut self, activity: &[f64], mut i: usize) {
        let item = self.heap[i];
        let len = self.heap.len();
        loop {
            let left = 2 * i + 1;
            if left >= len {
                break;
            }
            let right = left + 1;
            let child = if right < len
                && Self::better(activity, self.heap[right], self.heap[left])
            {
                right
            } else {
                left
            };
            if Self::better(activity, self.heap[child], item) {
                self.heap[i] = self.heap[child];
                self.pos[self.heap[i] as usize] = i as i32;
                i = child;
            } else {
                break;
            }
        }
        self.heap[i] = item;
        self.pos[item as usize] = i as i32;
    }

    fn insert(&mut self, activity: &[f64], v: u32) {
        if self.contains(v) {
            return;
        }
        self.heap.push(v);
        self.pos[v as usize] = (self.heap.len() - 1) as i32;
        self.sift_up(activity, self.heap.len() - 1);
    }

    fn bumped(&mut self, activity: &[f64], v: u32) {
        let p = self.pos[v as usize];
        if p >= 0 {
            self.sift_up(activity, p as usize);
        }
    }

    fn pop(&mut self, activity: &[f64]) -> Option<u32> {
        let top = *self.heap.first()?;
        self.pos[top as usize] = -1;
        let last = self.heap.pop().expect("non-empty");
        if !self.heap.is_empty() {
            self.heap[0] = last;
            self.pos[last as usize] = 0;
            self.sift_down(activity, 0);
        }
        Some(top)
    }

    /// Restores the heap property after activities changed arbitrarily.
    fn rebuild(&mut self, activity: &[f64]) {
        for i in (0..self.heap.len() / 2).rev() {
            self.sift_down(activity, i);
        }
    }
}

struct Solver<'a> {
    formula: &'a CnfFormula,
    num_vars: usize,
    clauses: Vec<ClauseRec>,
    watches: Vec<Vec<Watcher>>,
    assignment: Assignment,
    reason: Vec<Option<u32>>,
    var_level: Vec<u32>,
    qhead: usize,
    level: usize,

    activity: ActivityState,
    heap: VarHeap,
    saved_phase: Vec<bool>,
    seen: Vec<bool>,

    restart: RestartPolicy,
    rephase: RephasePolicy,
    bump: BumpPolicy,
    rng: ChaCha8Rng,

    stats: SolveStats,
    conflicts_since_restart: u64,
    next_rephase: Option<u64>,
    learnt_count: u64,
    options: SolverOptions,
    trivially_unsat: bool,
}

enum Propagation {
    Done,
    Conflict(u32),
}

impl<'a> Solver<'a> {
    fn new(
        formula: &'a CnfFormula,
        restart: RestartPolicy,
        rephase: RephasePolicy,
        bump: BumpPolicy,
        seed: u64,
        options: SolverOptions,
    ) -> Self {
        let n = formula.num_variables();
        let next_rephase = rephase.period();
        let mut solver = Solver {
            formula,
            num_vars: n,
            clauses: Vec::with_capacity(formula.num_clauses()),
            watches: vec![Vec::new(); 2 * n],
            assignment: Assignment::new(n),
            reason: vec![None; n],
            var_level: vec![0; n],
            qhead: 0,
            level: 0,
            activity: ActivityState::new(n),
            heap: VarHeap::full(n),
            saved_phase: vec![false; n],
            seen: vec![false; n],
            restart,
            rephase,
            bump,
            rng: ChaCha8Rng::seed_from_u64(seed),
            stats: SolveStats::default(),
            conflicts_since_restart: 0,
            next_rephase,
            learnt_count: 0,
            options,
            trivially_unsat: formula.has_empty_clause(),
        };
        solver.attach_problem_clauses();
        solver
    }

    fn attach_problem_clauses(&mut self) {
        for clause in self.formula.clauses() {
            let lits: Vec<Lit> = clause.literals().iter().map(|&l| lit_from_dimacs(l)).collect();
            if lits.len() == 1 {
                match self.lit_value(lits[0]) {
                    Some(false) => self.trivially_unsat = true,
                    Some(true) => {}
                    None => self.enqueue(lits[0], None),
                }
                continue;
            }
            let idx = self.clauses.len() as u32;
            self.watches[lits[0] as usize].push(Watcher {
                clause: idx,
                blocker: lits[1],
            });
            self.watches[lits[1] as usize].push(Watcher {
                clause: idx,
                blocker: lits[0],
            });
            self.clauses.push(ClauseRec {
                lits,
                learnt: false,
                lbd: 0,
                deleted: false,
            });
        }
    }

    #[inline]
    fn lit_value(&self, lit: Lit) -> Option<bool> {
        self.assignment
            .value(lit_var(lit) + 1)
            .map(|v| v == lit_is_pos(lit))
    }

    #[inline]
    fn enqueue(&mut self, lit: Lit, reason: Option<u32>) {
        let var = lit_var(lit);
        self.assignment.assign(var + 1, lit_is_pos(lit), self.level);
        self.reason[var] = reason;
        self.var_level[var] = self.level as u32;
        if reason.is_some() {
            self.stats.propagations += 1;
        }
    }

    fn propagate(&mut self) -> Propagation {
        while self.qhead < self.assignment.trail().len() {
            let entry = self.assignment.trail()[self.qhead];
            self.qhead += 1;
            let p: Lit = ((entry.var as u32 - 1) << 1) | u32::from(!entry.value);
            let false_lit = lit_neg(p);

            let mut watchers = std::mem::take(&mut self.watches[false_lit as usize]);
            let mut kept = 0;
            let mut i = 0;
            let mut conflict = None;
            while i < watchers.len() {
                let w = watchers[i];
                i += 1;
                if self.lit_value(w.blocker) == Some(true) {
                    watchers[kept] = w;
                    kept += 1;
                    continue;
                }
                let clause_idx = w.clause as usize;
                // Put the falsified literal in slot 1.
                if self.clauses[clause_idx].lits[0] == false_lit {
                    self.clauses[clause_idx].lits.swap(0, 1);
                }
                let first = self.clauses[clause_idx].lits[0];
                let watcher = Watcher {
                    clause: w.clause,
                    blocker: first,
                };
                if first != w.blocker && self.lit_value(first) == Some(true) {
                    watchers[kept] = watcher;
                    kept += 1;
                    continue;
                }
                // Find a replacement watch.
                let mut moved = false;
                for k in 2..self.clauses[clause_idx].lits.len() {
                    if self.lit_value(self.clauses[clause_idx].lits[k]) != Some(false) {
                        self.clauses[clause_idx].lits.swap(1, k);
                        let new_watch = self.clauses[clause_idx].lits[1];
                        self.watches[new_watch as usize].push(watcher);
                        moved = true;
                        break;
                    }
                }
                if moved {
                    continue;
                }
                // Clause is unit or conflicting.
                watchers[kept] = watcher;
                kept += 1;
                if self.lit_value(first) == Some(false) {
                    // Conflict: keep the remaining watchers untouched.
                    while i < watchers.len() {
                        watchers[kept] = watchers[i];
                        kept += 1;
                        i += 1;
                    }
                    conflict = Some(w.clause);
                    break;
                }
                self.enqueue(first, Some(w.clause));
            }
            watchers.truncate(kept);
            self.watches[false_lit as usize] = watchers;
            if let Some(c) = conflict {
                self.qhead = self.assignment.trail().len();
                return Propagation::Conflict(c);
            }
        }
        Propagation::Done
    }

    /// First-UIP conflict analysis. Returns the learned clause (asserting
    /// literal first), the backjump level, the LBD, and the current-level
    /// variables resolved away (the reason side of the bump hook).
    fn analyze(&mut self, conflict: u32) -> (Vec<Lit>, usize, u32, Vec<usize>) {
        let mut learned: Vec<Lit> = vec![0];
        let mut resolved: Vec<usize> = Vec::new();
        let mut counter = 0usize;
        let mut clause = conflict;
        let mut p: Option<Lit> = None;
        let mut index = self.assignment.trail().len();

        loop {
            let rec = &self.clauses[clause as usize];
            let start = usize::from(p.is_some());
            for k in start..rec.lits.len() {
                let q = rec.lits[k];
                let v = lit_var(q);
                if !self.seen[v] && self.var_level[v] > 0 {
                    self.seen[v] = true;
                    if self.var_level[v] as usize >= self.level {
                        counter += 1;
                    } else {
                        learned.push(q);
                    }
                }
            }
            // Walk the trail backwards to the next marked literal.
            let uip = loop {
                index -= 1;
                let entry = self.assignment.trail()[index];
                let v = entry.var - 1;
                if self.seen[v] {
                    break ((v as u32) << 1) | u32::from(!entry.value);
                }
            };
            self.seen[lit_var(uip)] = false;
            counter -= 1;
            if counter == 0 {
                learned[0] = lit_neg(uip);
                break;
            }
            resolved.push(lit_var(uip));
            clause = self.reason[lit_var(uip)].expect("non-decision on conflict side");
            p = Some(uip);
        }

        // Backjump level: highest level below the current one; keep that
        // literal in slot 1 so the watches are valid after learning.
        let mut backjump = 0usize;
        if learned.len() > 1 {
            let mut max_idx = 1;
            for k in 2..learned.len() {
                if self.var_level[lit_var(learned[k])] > self.var_level[lit_var(learned[max_idx])] {
                    max_idx = k;
                }
            }
            learned.swap(1, max_idx);
            backjump = self.var_level[lit_var(learned[1])] as usize;
        }

        // LBD: distinct decision levels in the learned clause.
        let mut levels: Vec<u32> = learned.iter().map(|&l| self.var_level[lit_var(l)]).collect();
        levels.sort_unstable();
        levels.dedup();
        let lbd = levels.len() as u32;

        for &lit in &learned {
            self.seen[lit_var(lit)] = false;
        }

        (learned, backjump, lbd, resolved)
    }

    fn backtrack(&mut self, target_level: usize) {
        if self.level <= target_level {
            return;
        }
        while let Some(entry) = self.assignment.trail().last().copied() {
            if entry.level <= target_level {
                break;
            }
            let v = entry.var - 1;
            self.saved_phase[v] = entry.value;
            self.reason[v] = None;
            self.heap.insert(&self.activity.activity, v as u32);
            self.assignment.pop();
        }
        self.qhead = self.assignment.trail().len();
        self.level = target_level;
    }

    fn learn(&mut self, lits: Vec<Lit>, lbd: u32) -> Option<u32> {
        if lits.len() == 1 {
            return None;
        }
        let idx = self.clauses.len() as u32;
        self.watches[lits[0] as usize].push(Watcher {
            clause: idx,
            blocker: lits[1],
        });
        self.watches[lits[1] as usize].push(Watcher {
            clause: idx,
            blocker: lits[0],
        });
        self.clauses.push(ClauseRec {
            lits,
            learnt: true,
            lbd,
            deleted: false,
        });
        if lbd > GLUE_LBD {
            self.learnt_count += 1;
        }
        Some(idx)
    }

    /// Evicts the highest-LBD learned clauses once the non-glue count
    /// exceeds the cap. Glue and reason-locked clauses are kept.
    fn reduce_learnts(&mut self) {
        let cap = self.options.learnt_cap as u64;
        if self.learnt_count <= cap {
            return;
        }
        let mut candidates: Vec<(u32, u32)> = Vec::new(); // (lbd, idx)
        for (idx, rec) in self.clauses.iter().enumerate() {
            if !rec.learnt || rec.deleted || rec.lbd <= GLUE_LBD {
                continue;
            }
            let locked = {
                let first = rec.lits[0];
                self.lit_value(first) == Some(true)
                    && self.reason[lit_var(first)] == Some(idx as u32)
            };
            if !locked {
                candidates.push((rec.lbd, idx as u32));
            }
        }
        candidates.sort_unstable();
        let keep = (cap as usize / 2).min(candidates.len());
        let evict = &candidates[keep..];
        for &(_, idx) in evict {
            self.clauses[idx as usize].deleted = true;
        }
        self.learnt_count -= evict.len() as u64;
        for list in &mut self.watches {
            list.retain(|w| !self.clauses[w.clause as usize].deleted);
        }
    }

    fn decide(&mut self) -> bool {
        while let Some(v) = self.heap.pop(&self.activity.activity) {
            if self.assignment.value(v as usize + 1).is_none() {
                self.level += 1;
                self.stats.decisions += 1;
                let lit = (v << 1) | u32::from(!self.saved_phase[v as usize]);
                self.enqueue(lit, None);
                return true;
            }
        }
        false
    }

    fn handle_conflict(&mut self, conflict: u32) -> bool {
        self.stats.conflicts += 1;
        self.conflicts_since_restart += 1;
        if self.level == 0 {
            return false;
        }
        let (learned, backjump, lbd, resolved) = self.analyze(conflict);

        // bump_var hook: once per conflict, with learned + reason-side vars.
        let learned_vars: Vec<usize> = learned.iter().map(|&l| lit_var(l)).collect();
        self.bump
            .bump(&mut self.activity, &learned_vars, &resolved);
        for &v in learned_vars.iter().chain(resolved.iter()) {
            self.heap.bumped(&self.activity.activity, v as u32);
        }

        self.restart.on_conflict(lbd);
        self.backtrack(backjump);
        let asserting = learned[0];
        let reason = self.learn(learned, lbd);
        self.enqueue(asserting, reason);
        self.reduce_learnts();

        // rephase hook: on conflict-count period boundaries.
        if let Some(at) = self.next_rephase {
            if self.stats.conflicts >= at {
                self.rephase.apply(&mut self.saved_phase, &mut self.rng);
                self.stats.rephases += 1;
                self.next_rephase = Some(at + self.rephase.period().expect("periodic"));
            }
        }

        // restart hook: after the conflict is fully processed.
        if self.restart.should_restart(self.conflicts_since_restart) {
            self.backtrack(0);
            self.restart.on_restart();
            self.conflicts_since_restart = 0;
            self.stats.restarts += 1;
        }
        true
    }

    fn run(&mut self, budget: Budget) -> SolveOutcome {
        let start = Instant::now();
        let finish = |status: SolveStatus, model: Option<Vec<bool>>, stats: &mut SolveStats| {
            stats.elapsed = start.elapsed().as_secs_f64();
            SolveOutcome {
                status,
                model,
                stats: *stats,
            }
        };

        if self.trivially_unsat {
            return finish(SolveStatus::Unsat, None, &mut self.stats);
        }

        loop {
            match self.propagate() {
                Propagation::Conflict(c) => {
                    if !self.handle_conflict(c) {
                        return finish(SolveStatus::Unsat, None, &mut self.stats);
                    }
                    if let Some(limit) = budget.conflicts {
                        if self.stats.conflicts >= limit {
                            return finish(SolveStatus::Timeout, None, &mut self.stats);
                        }
                    }
                    if let Some(wall) = budget.wall {
                        if self.stats.conflicts % TIME_CHECK_INTERVAL == 0
                            && start.elapsed() >= wall
                        {
                            return finish(SolveStatus::Timeout, None, &mut self.stats);
                        }
                    }
                }
                Propagation::Done => {
                    if self.assignment.trail().len() == self.num_vars {
                        let model = self.assignment.to_model();
                        assert!(
                            check_model(self.formula, &model),
                            "internal error: model fails verification"
                        );
                        return finish(SolveStatus::Sat, Some(model), &mut self.stats);
                    }
                    if !self.decide() {
                        // Heap exhausted while variables remain unassigned
                        // cannot happen: it always holds a superset.
                        unreachable!("no decision candidate");
                    }
                }
            }
        }
    }
}
