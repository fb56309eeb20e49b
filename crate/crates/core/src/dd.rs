//! Augmented-Lagrangian dual decomposition on the split `u = x`.
//!
//! Each outer iteration solves the integer block exactly by branch-and-bound,
//! the continuous block with an [`NnSubsolver`], then takes a dual step.

use std::io::Write;
use std::time::Instant;

use log::{debug, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::milp::{build_mip_subproblem, solve_milp_with, BnbOptions, MilpStatus};
use crate::model::{dot, NnModel, ProblemInstance, SolveReport};
use crate::nn::{eval, forward, vjp};
use crate::subsolver::{project_feasible, u_only_rows, NnSubsolver, SubsolverRequest};

#[derive(Debug, Clone)]
pub struct DdConfig {
    pub rho0: f64,
    /// Step size handed to gradient-based subsolvers.
    pub eta: f64,
    /// Tolerance on `‖u − x‖_∞`; `0` disables early stopping.
    pub epsilon: f64,
    pub max_outer: usize,
    pub inner_steps: usize,
    pub beta: f64,
    pub stall_factor: f64,
    pub lambda_bound: f64,
    pub time_budget_s: f64,
    /// Keep ρ at `rho0` throughout.
    pub fixed_rho: bool,
    /// Also require `‖x⁽ᵏ⁾ − x⁽ᵏ⁻¹⁾‖_∞ < epsilon`, with `x⁽⁰⁾ = round(u⁽⁰⁾)`.
    pub require_stable_x: bool,
    pub bnb: BnbOptions,
}

impl Default for DdConfig {
    fn default() -> Self {
        Self {
            rho0: 10.0,
            eta: 0.01,
            epsilon: 1e-4,
            max_outer: 50,
            inner_steps: 25,
            beta: 2.0,
            stall_factor: 0.9,
            lambda_bound: 1e6,
            time_budget_s: 300.0,
            fixed_rho: false,
            require_stable_x: true,
            bnb: BnbOptions::default(),
        }
    }
}

impl DdConfig {
    pub fn check(&self) -> Result<()> {
        let positive = [self.rho0, self.eta, self.lambda_bound, self.time_budget_s, self.stall_factor];
        if positive.iter().any(|v| !(*v > 0.0)) || !(self.epsilon >= 0.0) {
            return Err(Error::Config("dd parameters must be positive".into()));
        }
        if !(self.beta > 1.0) {
            return Err(Error::Config("beta must exceed 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HistoryEntry {
    pub k: usize,
    pub residual_2: f64,
    pub merit: f64,
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DdState {
    /// Integer-valued.
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub lambda: Vec<f64>,
    pub rho: f64,
    pub k: usize,
    pub history: Vec<HistoryEntry>,
    pub clamp_events: usize,
}

impl DdState {
    pub fn new(u0: Vec<f64>, rho: f64) -> Self {
        let p = u0.len();
        Self {
            x: u0.iter().map(|v| v.round()).collect(),
            u: u0,
            lambda: vec![0.0; p],
            rho,
            k: 0,
            history: Vec::new(),
            clamp_events: 0,
        }
    }

    pub fn residual_inf(&self) -> f64 {
        self.u
            .iter()
            .zip(&self.x)
            .map(|(u, x)| (u - x).abs())
            .fold(0.0, f64::max)
    }

    pub fn residual_2(&self) -> f64 {
        self.u
            .iter()
            .zip(&self.x)
            .map(|(u, x)| (u - x) * (u - x))
            .sum::<f64>()
            .sqrt()
    }
}

/// `λ ← clamp(λ + ρ(u − x), ±bound)`; returns the number of clamped entries.
pub fn dual_update(state: &mut DdState, bound: f64) -> usize {
    let mut clamped = 0;
    for i in 0..state.lambda.len() {
        let raw = state.lambda[i] + state.rho * (state.u[i] - state.x[i]);
        let v = raw.clamp(-bound, bound);
        if v != raw {
            clamped += 1;
        }
        state.lambda[i] = v;
    }
    if clamped > 0 {
        state.clamp_events += clamped;
        warn!("multiplier clamp at ±{bound:e} on {clamped} entries (iteration {})", state.k);
    }
    clamped
}

/// Penalty after the latest history entry.
pub fn adapt_rho(history: &[HistoryEntry], rho: f64, cfg: &DdConfig) -> f64 {
    let n = history.len();
    if n < 2 {
        return rho;
    }
    let r = |i: usize| history[i].residual_2;
    if r(n - 1) > cfg.stall_factor * r(n - 2) {
        return rho * cfg.beta;
    }
    if n >= 5 && r(n - 5) > 0.0 && r(n - 5) >= 10.0 * r(n - 1) {
        return (rho / cfg.beta).max(cfg.rho0 / 10.0);
    }
    rho
}

/// `g(u) + cᵀx + (ρ/2)‖u − x + λ/ρ‖² − ‖λ‖²/(2ρ)` with `g(u) = dᵀf(u)`.
pub fn merit(state: &DdState, inst: &ProblemInstance) -> f64 {
    let g = dot(&inst.d, &eval(&inst.network, &state.u));
    let rho = state.rho;
    let mut shifted = 0.0;
    let mut lam2 = 0.0;
    for i in 0..state.u.len() {
        let v = state.u[i] - state.x[i] + state.lambda[i] / rho;
        shifted += v * v;
        lam2 += state.lambda[i] * state.lambda[i];
    }
    g + dot(&inst.c, &state.x) + 0.5 * rho * shifted - lam2 / (2.0 * rho)
}

/// Largest observed gradient-difference quotient over seeded random pairs.
pub fn estimate_lipschitz(
    grad: impl Fn(&[f64]) -> Vec<f64>,
    lower: &[f64],
    upper: &[f64],
    samples: usize,
    seed: u64,
) -> Result<f64> {
    if samples < 2 {
        return Err(Error::Config("need at least two samples".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        lower
            .iter()
            .zip(upper)
            .map(|(l, h)| if h > l { rng.random_range(*l..*h) } else { *l })
            .collect()
    };
    let mut best: f64 = 0.0;
    let mut a = draw(&mut rng);
    let mut ga = grad(&a);
    for _ in 1..samples {
        let mut b = draw(&mut rng);
        let mut tries = 0;
        while dist(&a, &b) < 1e-12 {
            tries += 1;
            if tries > 100 {
                return Err(Error::Config("box too small to sample distinct points".into()));
            }
            b = draw(&mut rng);
        }
        let gb = grad(&b);
        best = best.max(dist(&ga, &gb) / dist(&a, &b));
        a = b;
        ga = gb;
    }
    Ok(best)
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Empirical Lipschitz constant of `∇(dᵀf)` over the box.
pub fn estimate_smoothness(
    model: &NnModel,
    d: &[f64],
    lower: &[f64],
    upper: &[f64],
    samples: usize,
    seed: u64,
) -> Result<f64> {
    estimate_lipschitz(
        |u| {
            let (_, tape) = forward(model, u).expect("dimension checked by caller");
            vjp(model, &tape, d).expect("tape from this model")
        },
        lower,
        upper,
        samples,
        seed,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub k: usize,
    pub residual_inf: f64,
    pub residual_2: f64,
    pub merit: f64,
    pub rho: f64,
    pub mip_time_s: f64,
    pub nn_time_s: f64,
    pub nn_violation: f64,
    pub inner_converged: bool,
}

pub const TRACE_HEADER: [&str; 9] = [
    "k",
    "residual_inf",
    "residual_2",
    "merit",
    "rho",
    "mip_time_s",
    "nn_time_s",
    "nn_violation",
    "inner_converged",
];

pub fn write_trace<W: Write>(rows: &[TraceRow], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(TRACE_HEADER)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct DdRun {
    pub report: SolveReport,
    pub trace: Vec<TraceRow>,
    pub state: DdState,
}

pub fn dd_solve(inst: &ProblemInstance, cfg: &DdConfig, sub: &dyn NnSubsolver) -> Result<DdRun> {
    cfg.check()?;
    let start = Instant::now();
    let (rows, rhs) = u_only_rows(inst);
    let u0 = project_feasible(&inst.center(), &inst.lower, &inst.upper, &rows, &rhs)?;
    let mut st = DdState::new(u0, cfg.rho0);
    let mut trace = Vec::new();
    let (mut mip_total, mut nn_total) = (0.0, 0.0);
    let mut converged = false;
    let mut timed_out = false;
    let mut incumbent: Option<(Vec<f64>, f64)> = None;
    let mut prev_x = st.x.clone();

    for k in 1..=cfg.max_outer {
        st.k = k;
        let t = Instant::now();
        let sub_mip = build_mip_subproblem(inst, &st.u, &st.lambda, st.rho);
        let sol = solve_milp_with(&sub_mip, &cfg.bnb)?;
        if sol.z.is_empty() {
            return Err(Error::SubproblemInfeasible {
                iteration: k,
                what: format!("integer block ({:?})", sol.status).to_lowercase(),
            });
        }
        if sol.status == MilpStatus::NodeLimit {
            debug!("iteration {k}: integer block hit the node limit");
        }
        st.x = sol.z.iter().map(|v| v.round()).collect();
        let mip_t = t.elapsed().as_secs_f64();

        let t = Instant::now();
        let req = SubsolverRequest {
            instance: inst,
            x: &st.x,
            lambda: &st.lambda,
            rho: st.rho,
            u_start: &st.u,
            budget: cfg.inner_steps,
        };
        let res = sub.solve(&req).map_err(|e| match e {
            Error::SubproblemInfeasible { what, .. } => Error::SubproblemInfeasible { iteration: k, what },
            other => other,
        })?;
        st.u = res.u;
        let nn_t = t.elapsed().as_secs_f64();
        mip_total += mip_t;
        nn_total += nn_t;

        dual_update(&mut st, cfg.lambda_bound);
        let r_inf = st.residual_inf();
        let entry = HistoryEntry {
            k,
            residual_2: st.residual_2(),
            merit: merit(&st, inst),
            rho: st.rho,
        };
        st.history.push(entry);
        trace.push(TraceRow {
            k,
            residual_inf: r_inf,
            residual_2: entry.residual_2,
            merit: entry.merit,
            rho: st.rho,
            mip_time_s: mip_t,
            nn_time_s: nn_t,
            nn_violation: res.violation,
            inner_converged: res.inner_converged,
        });

        // Incumbent: best integer iterate feasible for both row blocks.
        let y = eval(&inst.network, &st.x);
        if inst.nn_violation(&st.x, &y) <= 1e-7 && inst.mip_violation(&st.x) <= 1e-7 {
            let obj = dot(&inst.c, &st.x) + dot(&inst.d, &y);
            if incumbent.as_ref().map_or(true, |b| obj < b.1) {
                incumbent = Some((st.x.clone(), obj));
            }
        }

        let x_step = st.x.iter().zip(&prev_x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let stable = !cfg.require_stable_x || x_step < cfg.epsilon;
        if r_inf < cfg.epsilon && stable {
            converged = true;
            break;
        }
        prev_x.clone_from(&st.x);
        if !cfg.fixed_rho {
            st.rho = adapt_rho(&st.history, st.rho, cfg);
        }
        if start.elapsed().as_secs_f64() > cfg.time_budget_s {
            timed_out = true;
            break;
        }
    }

    let x_final: Vec<f64> = if converged {
        st.x.clone()
    } else {
        incumbent.map(|b| b.0).unwrap_or_else(|| st.x.clone())
    };
    let mut report = SolveReport {
        method: "dd".into(),
        u_final: st.u.clone(),
        iterations: st.k,
        converged,
        ..Default::default()
    };
    report.notes.push(format!("subsolver={}", sub.name()));
    if timed_out {
        report.notes.push("timeout".into());
    }
    if st.clamp_events > 0 {
        report.notes.push(format!("lambda_clamps={}", st.clamp_events));
    }
    let xi: Vec<i64> = x_final.iter().map(|v| *v as i64).collect();
    report.evaluate_at(inst, &xi);
    report.phase_times.insert("mip".into(), mip_total);
    report.phase_times.insert("nn".into(), nn_total);
    report.phase_times.insert("total".into(), start.elapsed().as_secs_f64());
    Ok(DdRun { report, trace, state: st })
}
