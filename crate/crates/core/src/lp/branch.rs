//! Best-first branch-and-bound over the binary variables of a
//! [`LinearModel`]. Each node re-solves the LP relaxation with its binary
//! fixings applied as bounds; branching picks the most fractional binary.

use super::simplex::{solve_lp_relaxation, LpStatus};
use super::{LinearModel, Outcome, Solution, SolveOptions, SolveStatus, VarId};
use crate::{Error, Result};
use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// Work counters for one solve.
#[derive(Debug, Clone, Copy, Default)]
pub struct MilpStats {
    pub nodes: usize,
    pub pivots: usize,
}

const INT_TOL: f64 = 1e-7;

struct Node {
    bound: f64,
    id: u64,
    fixes: Vec<(VarId, f64)>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.bound == other.bound && self.id == other.id
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // BinaryHeap is a max-heap; invert so the lowest bound pops first,
    // oldest node first among ties (deterministic).
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.id.cmp(&self.id))
    }
}

/// Solves `model`; dispatches to a single LP solve when it has no binaries.
pub fn solve_milp(model: &LinearModel, opts: &SolveOptions) -> Result<Outcome> {
    let binaries = model.binary_vars();
    let mut stats = MilpStats::default();

    if binaries.is_empty() {
        let r = solve_lp_relaxation(model, opts, opts.pivot_limit);
        stats.pivots = r.pivots;
        stats.nodes = 1;
        return Ok(match r.status {
            LpStatus::Optimal => Outcome {
                status: SolveStatus::Optimal,
                solution: Some(Solution {
                    objective: r.objective,
                    values: r.values,
                }),
                stats,
            },
            LpStatus::Infeasible => Outcome {
                status: SolveStatus::Infeasible,
                solution: None,
                stats,
            },
            LpStatus::Unbounded => return Err(Error::Unbounded),
            LpStatus::IterationLimit => Outcome {
                status: SolveStatus::IterationLimit,
                solution: None,
                stats,
            },
        });
    }

    let mut heap = BinaryHeap::new();
    let mut next_id = 0u64;
    heap.push(Node {
        bound: f64::NEG_INFINITY,
        id: next_id,
        fixes: Vec::new(),
    });
    next_id += 1;

    let mut incumbent: Option<Solution> = None;
    let mut saw_budget_cut = false;

    while let Some(node) = heap.pop() {
        if stats.nodes >= opts.node_limit || stats.pivots >= opts.pivot_limit {
            saw_budget_cut = true;
            break;
        }
        if let Some(inc) = &incumbent {
            if node.bound >= inc.objective - prune_slack(inc.objective) {
                continue;
            }
        }
        stats.nodes += 1;

        let mut sub = model.clone();
        for &(v, val) in &node.fixes {
            sub.restrict_bounds(v, val, val);
        }
        let budget = opts.pivot_limit.saturating_sub(stats.pivots);
        let r = solve_lp_relaxation(&sub, opts, budget);
        stats.pivots += r.pivots;
        match r.status {
            LpStatus::Infeasible => continue,
            LpStatus::Unbounded => return Err(Error::Unbounded),
            LpStatus::IterationLimit => {
                saw_budget_cut = true;
                break;
            }
            LpStatus::Optimal => {}
        }
        if let Some(inc) = &incumbent {
            if r.objective >= inc.objective - prune_slack(inc.objective) {
                continue;
            }
        }

        // Most fractional binary, lowest index among ties.
        let mut branch: Option<(VarId, f64)> = None;
        for &b in &binaries {
            let v = r.values[b];
            let frac = (v - v.round()).abs();
            if frac > INT_TOL && branch.map_or(true, |(_, f)| frac > f + 1e-15) {
                branch = Some((b, frac));
            }
        }

        match branch {
            None => {
                // Integral: polish by re-solving with every binary pinned at
                // its rounded value so reported values sit exactly on {0,1}.
                let mut fixed = model.clone();
                for &b in &binaries {
                    let val = r.values[b].round();
                    fixed.restrict_bounds(b, val, val);
                }
                let budget = opts.pivot_limit.saturating_sub(stats.pivots);
                let pr = solve_lp_relaxation(&fixed, opts, budget);
                stats.pivots += pr.pivots;
                if pr.status == LpStatus::Optimal {
                    let better = incumbent
                        .as_ref()
                        .map_or(true, |inc| pr.objective < inc.objective - 1e-12);
                    if better {
                        incumbent = Some(Solution {
                            objective: pr.objective,
                            values: pr.values,
                        });
                    }
                }
            }
            Some((var, _)) => {
                for val in [0.0, 1.0] {
                    let mut fixes = node.fixes.clone();
                    fixes.push((var, val));
                    heap.push(Node {
                        bound: r.objective,
                        id: next_id,
                        fixes,
                    });
                    next_id += 1;
                }
            }
        }
    }

    let status = if saw_budget_cut {
        SolveStatus::IterationLimit
    } else if incumbent.is_some() {
        SolveStatus::Optimal
    } else {
        SolveStatus::Infeasible
    };
    Ok(Outcome {
        status,
        solution: incumbent,
        stats,
    })
}

fn prune_slack(incumbent_obj: f64) -> f64 {
    1e-9_f64.max(1e-9 * incumbent_obj.abs())
}
