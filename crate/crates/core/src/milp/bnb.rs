use std::cmp::Ordering;
use std::collections::BinaryHeap;

use log::debug;

use super::ipm::{solve_relaxation, RelaxStatus};
use super::MilpModel;
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MilpStatus {
    Optimal,
    Infeasible,
    /// Node budget exhausted; `z` is the best incumbent, if any.
    NodeLimit,
}

#[derive(Debug, Clone)]
pub struct BnbOptions {
    /// Absolute pruning gap, scaled by `max(1, |incumbent|)`.
    pub gap_tol: f64,
    pub node_limit: usize,
    pub int_tol: f64,
    pub feas_tol: f64,
}

impl Default for BnbOptions {
    fn default() -> Self {
        Self {
            gap_tol: 1e-6,
            node_limit: 100_000,
            int_tol: 1e-6,
            feas_tol: 1e-6,
        }
    }
}

/// One search-progress sample.
#[derive(Debug, Clone, PartialEq)]
pub struct BnbEvent {
    pub nodes: usize,
    pub incumbent: f64,
    pub bound: f64,
}

#[derive(Debug, Clone)]
pub struct MilpSolution {
    /// Empty when no integer-feasible point was found.
    pub z: Vec<f64>,
    pub value: f64,
    pub status: MilpStatus,
    /// Relaxations solved.
    pub nodes: usize,
    /// Best proven lower bound.
    pub bound: f64,
    pub trace: Vec<BnbEvent>,
}

/// An open node: tightened box plus the relaxation that produced its bound.
#[derive(Debug, Clone)]
pub struct BnbNode {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub bound: f64,
    pub z: Vec<f64>,
    pub depth: usize,
    seq: u64,
}

impl PartialEq for BnbNode {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for BnbNode {}

impl PartialOrd for BnbNode {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for BnbNode {
    // Max-heap: the smallest bound, then the oldest node, pops first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

pub fn solve_milp(model: &MilpModel, gap_tol: f64, node_limit: usize) -> Result<MilpSolution> {
    solve_milp_with(
        model,
        &BnbOptions {
            gap_tol,
            node_limit,
            ..BnbOptions::default()
        },
    )
}

struct Search<'a> {
    model: &'a MilpModel,
    opts: &'a BnbOptions,
    pure_integer: bool,
    nodes: usize,
    incumbent: Option<(Vec<f64>, f64)>,
    trace: Vec<BnbEvent>,
}

impl Search<'_> {
    fn inc_value(&self) -> f64 {
        self.incumbent.as_ref().map_or(f64::INFINITY, |(_, v)| *v)
    }

    fn prunes(&self, bound: f64) -> bool {
        let inc = self.inc_value();
        inc.is_finite() && bound >= inc - self.opts.gap_tol * inc.abs().max(1.0)
    }

    fn relax(&mut self, lower: &[f64], upper: &[f64]) -> Result<Option<(Vec<f64>, f64)>> {
        let mut m = self.model.clone();
        m.lower = lower.to_vec();
        m.upper = upper.to_vec();
        self.nodes += 1;
        let r = solve_relaxation(&m)?;
        Ok(match r.status {
            RelaxStatus::Optimal => Some((r.z, r.value)),
            RelaxStatus::Infeasible => None,
        })
    }

    /// Most fractional integer variable; lowest index on ties.
    fn branch_var(&self, z: &[f64]) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (j, &v) in z.iter().enumerate() {
            if !self.model.integer[j] {
                continue;
            }
            let frac = (v - v.floor()).min(v.ceil() - v);
            if frac > self.opts.int_tol && best.map_or(true, |(_, f)| frac > f) {
                best = Some((j, frac));
            }
        }
        best.map(|(j, _)| j)
    }

    /// Turns an integral relaxation point into a verified incumbent candidate.
    fn try_incumbent(&mut self, z: &[f64], lower: &[f64], upper: &[f64]) -> Result<()> {
        let rounded: Vec<f64> = z
            .iter()
            .enumerate()
            .map(|(j, &v)| if self.model.integer[j] { v.round() } else { v })
            .collect();
        let candidate = if self.pure_integer {
            (self.model.violation(&rounded) <= self.opts.feas_tol)
                .then(|| (rounded.clone(), self.model.objective(&rounded)))
        } else {
            let (mut lo, mut hi) = (lower.to_vec(), upper.to_vec());
            for j in 0..z.len() {
                if self.model.integer[j] {
                    lo[j] = rounded[j];
                    hi[j] = rounded[j];
                }
            }
            self.relax(&lo, &hi)?
        };
        match candidate {
            Some((zc, v)) if v < self.inc_value() => {
                self.incumbent = Some((zc, v));
                self.trace.push(BnbEvent {
                    nodes: self.nodes,
                    incumbent: v,
                    bound: f64::NAN,
                });
            }
            Some(_) => {}
            None => debug!("rounded relaxation point rejected"),
        }
        Ok(())
    }
}

pub fn solve_milp_with(model: &MilpModel, opts: &BnbOptions) -> Result<MilpSolution> {
    model.check()?;
    let n = model.n();
    let mut lower = model.lower.clone();
    let mut upper = model.upper.clone();
    for j in 0..n {
        if model.integer[j] {
            lower[j] = (lower[j] - opts.int_tol).ceil();
            upper[j] = (upper[j] + opts.int_tol).floor();
            if lower[j] > upper[j] {
                return Ok(infeasible(0));
            }
        }
    }
    let mut s = Search {
        model,
        opts,
        pure_integer: model.integer.iter().all(|&b| b),
        nodes: 0,
        incumbent: None,
        trace: Vec::new(),
    };

    let Some((z0, v0)) = s.relax(&lower, &upper)? else {
        return Ok(infeasible(s.nodes));
    };
    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;
    match s.branch_var(&z0) {
        None => s.try_incumbent(&z0, &lower, &upper)?,
        Some(_) => heap.push(BnbNode {
            lower,
            upper,
            bound: v0,
            z: z0,
            depth: 0,
            seq,
        }),
    }

    let mut status = MilpStatus::Optimal;
    let mut global_bound = v0;
    // Depth-first plunge until the first incumbent, best-bound afterwards.
    let mut dive: Vec<BnbNode> = Vec::new();
    loop {
        if s.incumbent.is_some() && !dive.is_empty() {
            heap.extend(dive.drain(..));
        }
        let node = match dive.pop() {
            Some(n) => n,
            None => match heap.pop() {
                Some(n) => {
                    global_bound = n.bound;
                    n
                }
                None => break,
            },
        };
        if s.prunes(node.bound) {
            heap.clear();
            break;
        }
        if s.nodes >= opts.node_limit {
            heap.push(node);
            status = MilpStatus::NodeLimit;
            break;
        }
        let Some(j) = s.branch_var(&node.z) else {
            // Integral within tolerance but rounding failed verification.
            continue;
        };
        let v = node.z[j];
        let mut children = Vec::with_capacity(2);
        for down in [true, false] {
            let (mut lo, mut hi) = (node.lower.clone(), node.upper.clone());
            if down {
                hi[j] = v.floor();
            } else {
                lo[j] = v.ceil();
            }
            if lo[j] > hi[j] {
                continue;
            }
            let Some((zc, vc)) = s.relax(&lo, &hi)? else {
                continue;
            };
            let bound = vc.max(node.bound);
            if s.prunes(bound) {
                continue;
            }
            if s.branch_var(&zc).is_none() {
                s.try_incumbent(&zc, &lo, &hi)?;
            } else {
                seq += 1;
                children.push(BnbNode {
                    lower: lo,
                    upper: hi,
                    bound,
                    z: zc,
                    depth: node.depth + 1,
                    seq,
                });
            }
        }
        if s.incumbent.is_none() {
            // The better child is explored next.
            children.sort_by(|a, b| b.bound.total_cmp(&a.bound));
            dive.extend(children);
        } else {
            heap.extend(children);
        }
        if s.nodes % 256 == 0 {
            s.trace.push(BnbEvent {
                nodes: s.nodes,
                incumbent: s.inc_value(),
                bound: global_bound,
            });
        }
    }

    let bound = match status {
        MilpStatus::NodeLimit => heap
            .iter()
            .chain(&dive)
            .map(|n| n.bound)
            .fold(f64::INFINITY, f64::min)
            .min(s.inc_value()),
        _ => s.inc_value(),
    };
    let nodes = s.nodes;
    let mut trace = s.trace;
    trace.push(BnbEvent {
        nodes,
        incumbent: s.incumbent.as_ref().map_or(f64::INFINITY, |x| x.1),
        bound,
    });
    match s.incumbent {
        Some((z, value)) => Ok(MilpSolution {
            z,
            value,
            status,
            nodes,
            bound,
            trace,
        }),
        None if status == MilpStatus::NodeLimit => Ok(MilpSolution {
            z: Vec::new(),
            value: f64::INFINITY,
            status,
            nodes,
            bound,
            trace,
        }),
        None => Ok(infeasible(nodes)),
    }
}

fn infeasible(nodes: usize) -> MilpSolution {
    MilpSolution {
        z: Vec::new(),
        value: f64::INFINITY,
        status: MilpStatus::Infeasible,
        nodes,
        bound: f64::INFINITY,
        trace: Vec::new(),
    }
}
