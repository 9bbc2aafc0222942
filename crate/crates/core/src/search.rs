//! Best-first search over paths: GCS* with domination-based pruning and the
//! single-path-per-vertex A* adaptation used as a baseline.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};
use std::fmt;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domination::{not_dominated, CheckerConfig, Frontier, PathCacheEntry};
use crate::gcs::{ImplicitGcs, Path, Trajectory, VertexId};
use crate::heuristic::Heuristic;
use crate::lp::LpSolver;
use crate::restriction::{solve_restriction, RestrictionError, RestrictionOutcome, RestrictionSolution};

#[derive(Debug, Error)]
pub enum SearchError {
    #[error(transparent)]
    Restriction(#[from] RestrictionError),
    #[error("max_path_len is required for this graph")]
    MissingMaxPathLen,
}

#[derive(Debug, Clone, Default)]
pub struct SearchOptions {
    /// Longest path, counted in vertices. Defaults to the graph's own bound.
    pub max_path_len: Option<usize>,
    pub max_expansions: Option<usize>,
    pub timeout: Option<Duration>,
    /// Solve successor restrictions and checks on the rayon pool.
    pub parallel: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchStatus {
    Solved,
    Fail,
    TimedOut,
    ExpansionLimit,
}

impl fmt::Display for SearchStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SearchStatus::Solved => "solved",
            SearchStatus::Fail => "fail",
            SearchStatus::TimedOut => "timed_out",
            SearchStatus::ExpansionLimit => "expansion_limit",
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SearchStats {
    pub expansions: usize,
    pub queue_pushes: usize,
    pub domination_calls: usize,
    pub solver_calls: usize,
    pub wall_time: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub path: Path,
    pub trajectory: Trajectory,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub status: SearchStatus,
    pub solution: Option<Solution>,
    pub stats: SearchStats,
}

/// A queued path.
#[derive(Debug, Clone)]
pub struct SearchNode {
    pub path: Path,
    pub f_estimate: f64,
    pub insertion_seq: u64,
    pub entry: Arc<PathCacheEntry>,
}

struct Queued(SearchNode);

impl PartialEq for Queued {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Queued {}

impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Queued {
    // reversed so that BinaryHeap pops the smallest (f, seq)
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .0
            .f_estimate
            .total_cmp(&self.0.f_estimate)
            .then_with(|| other.0.insertion_seq.cmp(&self.0.insertion_seq))
    }
}

/// Priority queue ordered by `(f, insertion_seq)`, FIFO among equal `f`.
#[derive(Default)]
struct Queue {
    heap: BinaryHeap<Queued>,
    next_seq: u64,
}

impl Queue {
    fn push(&mut self, entry: Arc<PathCacheEntry>) -> SearchNode {
        let node = SearchNode {
            path: entry.path.clone(),
            f_estimate: entry.solution.total_estimate,
            insertion_seq: self.next_seq,
            entry,
        };
        self.next_seq += 1;
        self.heap.push(Queued(node.clone()));
        node
    }

    fn pop(&mut self) -> Option<SearchNode> {
        self.heap.pop().map(|q| q.0)
    }

    fn nodes(&self) -> Vec<&SearchNode> {
        self.heap.iter().map(|q| &q.0).collect()
    }
}

/// Instrumentation hooks. Both default to doing nothing.
pub trait SearchObserver {
    /// Called at the top of every iteration with the current queue.
    fn on_iteration(&mut self, _queue: &[&SearchNode]) {}
    /// Called when a path is added to the frontier and the queue together.
    fn on_insert(&mut self, _node: &SearchNode, _frontier_len: usize) {}
}

struct NoObserver;

impl SearchObserver for NoObserver {}

struct Run<'a> {
    g: &'a dyn ImplicitGcs,
    heuristic: &'a Heuristic,
    solver: &'a LpSolver,
    options: &'a SearchOptions,
    max_len: usize,
    start: Instant,
    calls_at_start: usize,
    stats: SearchStats,
}

impl<'a> Run<'a> {
    fn new(g: &'a dyn ImplicitGcs, heuristic: &'a Heuristic, options: &'a SearchOptions, solver: &'a LpSolver) -> Result<Self, SearchError> {
        let max_len = options.max_path_len.or_else(|| g.default_max_path_len()).ok_or(SearchError::MissingMaxPathLen)?;
        Ok(Self {
            g,
            heuristic,
            solver,
            options,
            max_len,
            start: Instant::now(),
            calls_at_start: solver.calls(),
            stats: SearchStats::default(),
        })
    }

    fn limit_reached(&self) -> Option<SearchStatus> {
        if self.options.timeout.is_some_and(|t| self.start.elapsed() >= t) {
            return Some(SearchStatus::TimedOut);
        }
        if self.options.max_expansions.is_some_and(|m| self.stats.expansions >= m) {
            return Some(SearchStatus::ExpansionLimit);
        }
        None
    }

    fn solve(&self, path: &Path) -> Result<Option<RestrictionSolution>, SearchError> {
        Ok(match solve_restriction(self.g, path, self.heuristic, self.solver)? {
            RestrictionOutcome::Optimal(s) => Some(s),
            RestrictionOutcome::Infeasible => None,
        })
    }

    /// Feasible successor extensions within the length cap, in successor order.
    fn extensions<T: Send>(
        &self,
        path: &Path,
        f: impl Fn(RestrictionSolution) -> T + Sync,
    ) -> Result<Vec<T>, SearchError> {
        if path.len() >= self.max_len {
            return Ok(Vec::new());
        }
        let succ: Vec<VertexId> = self
            .g
            .successors(path.last())
            .map_err(RestrictionError::from)?
            .into_iter()
            .map(|(_, v)| v.id().clone())
            .collect();
        let work = |v: &VertexId| -> Result<Option<T>, SearchError> { Ok(self.solve(&path.extended(v.clone()))?.map(&f)) };
        let results: Vec<Result<Option<T>, SearchError>> =
            if self.options.parallel { succ.par_iter().map(work).collect() } else { succ.iter().map(work).collect() };
        let mut out = Vec::new();
        for r in results {
            if let Some(t) = r? {
                out.push(t);
            }
        }
        Ok(out)
    }

    fn finish(mut self, status: SearchStatus, solution: Option<Solution>) -> SearchResult {
        self.stats.wall_time = self.start.elapsed();
        self.stats.solver_calls = self.solver.calls() - self.calls_at_start;
        SearchResult { status, solution, stats: self.stats }
    }
}

fn solution_of(s: &RestrictionSolution) -> Solution {
    Solution { path: s.path.clone(), trajectory: s.trajectory.clone(), cost: s.cost_to_come }
}

/// GCS*: best-first search over paths keeping, per vertex, every path that
/// the checker does not prune.
pub fn gcs_star(
    g: &dyn ImplicitGcs,
    heuristic: &Heuristic,
    checker: &CheckerConfig,
    options: &SearchOptions,
    solver: &LpSolver,
) -> Result<SearchResult, SearchError> {
    gcs_star_observed(g, heuristic, checker, options, solver, &mut NoObserver)
}

pub fn gcs_star_observed(
    g: &dyn ImplicitGcs,
    heuristic: &Heuristic,
    checker: &CheckerConfig,
    options: &SearchOptions,
    solver: &LpSolver,
    observer: &mut dyn SearchObserver,
) -> Result<SearchResult, SearchError> {
    let mut run = Run::new(g, heuristic, options, solver)?;
    let mut frontier = Frontier::default();
    let mut queue = Queue::default();

    let Some(root) = run.solve(&Path::single(g.source().clone()))? else {
        return Ok(run.finish(SearchStatus::Fail, None));
    };
    let root = Arc::new(PathCacheEntry::new(root));
    frontier.push(root.clone());
    let node = queue.push(root);
    run.stats.queue_pushes += 1;
    observer.on_insert(&node, frontier.len());

    loop {
        observer.on_iteration(&queue.nodes());
        let Some(node) = queue.pop() else {
            return Ok(run.finish(SearchStatus::Fail, None));
        };
        if node.path.last() == g.target() {
            let sol = solution_of(&node.entry.solution);
            return Ok(run.finish(SearchStatus::Solved, Some(sol)));
        }
        if let Some(status) = run.limit_reached() {
            return Ok(run.finish(status, None));
        }
        run.stats.expansions += 1;

        // Successors end at distinct vertices, so each candidate only sees
        // frontier entries that no other candidate of this expansion adds.
        let frontier_ref = &frontier;
        let checked = run.extensions(&node.path, |sol| {
            let entry = Arc::new(PathCacheEntry::new(sol));
            let verdict = not_dominated(checker, g, &entry, frontier_ref.entries(entry.end()), solver);
            (entry, verdict.not_dominated)
        })?;
        for (entry, keep) in checked {
            run.stats.domination_calls += 1;
            if keep {
                frontier.push(entry.clone());
                let node = queue.push(entry);
                run.stats.queue_pushes += 1;
                observer.on_insert(&node, frontier.len());
            }
        }
    }
}

/// A* adapted to paths: one best path per vertex, replaced only by a path
/// with strictly lower cost-to-come.
pub fn astar_vertex_baseline(
    g: &dyn ImplicitGcs,
    heuristic: &Heuristic,
    options: &SearchOptions,
    solver: &LpSolver,
) -> Result<SearchResult, SearchError> {
    let mut run = Run::new(g, heuristic, options, solver)?;
    let mut best: BTreeMap<VertexId, f64> = BTreeMap::new();
    let mut queue = Queue::default();

    let Some(root) = run.solve(&Path::single(g.source().clone()))? else {
        return Ok(run.finish(SearchStatus::Fail, None));
    };
    best.insert(g.source().clone(), root.cost_to_come);
    queue.push(Arc::new(PathCacheEntry::new(root)));
    run.stats.queue_pushes += 1;

    while let Some(node) = queue.pop() {
        if node.path.last() == g.target() {
            let sol = solution_of(&node.entry.solution);
            return Ok(run.finish(SearchStatus::Solved, Some(sol)));
        }
        if let Some(status) = run.limit_reached() {
            return Ok(run.finish(status, None));
        }
        run.stats.expansions += 1;
        for sol in run.extensions(&node.path, |sol| sol)? {
            run.stats.domination_calls += 1;
            let v = sol.path.last().clone();
            if best.get(&v).is_none_or(|&b| sol.cost_to_come < b) {
                best.insert(v, sol.cost_to_come);
                queue.push(Arc::new(PathCacheEntry::new(sol)));
                run.stats.queue_pushes += 1;
            }
        }
    }
    Ok(run.finish(SearchStatus::Fail, None))
}
