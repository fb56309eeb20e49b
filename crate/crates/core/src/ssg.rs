//! Penalised projected-gradient heuristic on the relaxed `x`, with rounding
//! and no multipliers.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{dot, ProblemInstance, SolveReport};
use crate::nn::{forward, vjp};

#[derive(Debug, Clone)]
pub struct SsgConfig {
    pub t_max: usize,
    /// `η_t = eta0 · (1 + decay·t)^(−1/2)`.
    pub eta0: f64,
    pub decay: f64,
    pub mu_lin: f64,
    pub mu_nn: f64,
    pub seed: u64,
    /// Tolerance for the check at the rounded point.
    pub verify_tol: f64,
}

impl Default for SsgConfig {
    fn default() -> Self {
        Self {
            t_max: 100,
            eta0: 1e-2,
            decay: 0.01,
            mu_lin: 50.0,
            mu_nn: 50.0,
            seed: 0,
            verify_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SsgRun {
    pub report: SolveReport,
    /// Candidates whose rounded point failed verification.
    pub discarded: usize,
    pub accepted: usize,
}

fn hinge(a: &[Vec<f64>], b: &[f64], z: &[f64]) -> Vec<f64> {
    a.iter()
        .zip(b)
        .map(|(r, bi)| (dot(r, z) - bi).max(0.0))
        .collect()
}

pub fn ssg_solve(inst: &ProblemInstance, cfg: &SsgConfig) -> Result<SsgRun> {
    if cfg.t_max == 0 || !(cfg.mu_lin >= 0.0) || !(cfg.mu_nn >= 0.0) {
        return Err(Error::Config("ssg needs t_max ≥ 1 and non-negative penalties".into()));
    }
    let start = Instant::now();
    let p = inst.p();
    let net = &inst.network;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut x: Vec<f64> = (0..p)
        .map(|i| {
            let w = inst.upper[i] - inst.lower[i];
            let amp = 0.1 * w;
            let v = 0.5 * (inst.lower[i] + inst.upper[i]) + if amp > 0.0 { rng.random_range(-amp..=amp) } else { 0.0 };
            v.clamp(inst.lower[i], inst.upper[i])
        })
        .collect();

    let mut best_lin = f64::INFINITY;
    let mut incumbent: Option<Vec<f64>> = None;
    let (mut discarded, mut accepted) = (0, 0);
    for t in 1..=cfg.t_max {
        // Gradient of the penalised loss at x^{t−1}.
        let (y, tape) = forward(net, &x)?;
        let p_lin = hinge(&inst.a_mip, &inst.b_mip, &x);
        let stacked: Vec<f64> = x.iter().chain(&y).copied().collect();
        let p_nn = hinge(&inst.a_nn, &inst.b_nn, &stacked);
        let mut w_y = inst.d.clone();
        let mut grad = inst.c.clone();
        for (row, v) in inst.a_mip.iter().zip(&p_lin) {
            if *v > 0.0 {
                for j in 0..p {
                    grad[j] += 2.0 * cfg.mu_lin * v * row[j];
                }
            }
        }
        for (row, v) in inst.a_nn.iter().zip(&p_nn) {
            if *v > 0.0 {
                for j in 0..p {
                    grad[j] += 2.0 * cfg.mu_nn * v * row[j];
                }
                for (k, wk) in w_y.iter_mut().enumerate() {
                    *wk += 2.0 * cfg.mu_nn * v * row[p + k];
                }
            }
        }
        for (g, j) in grad.iter_mut().zip(vjp(net, &tape, &w_y)?) {
            *g += j;
        }
        let eta = cfg.eta0 / (1.0 + cfg.decay * t as f64).sqrt();
        for i in 0..p {
            x[i] = (x[i] - eta * grad[i]).clamp(inst.lower[i], inst.upper[i]);
        }

        // Candidate test at x^t, verified again after rounding.
        let feasible_relaxed = inst.mip_violation(&x) == 0.0 && inst.nn_violation_at(&x) == 0.0;
        let lin = dot(&inst.c, &x);
        if feasible_relaxed && lin < best_lin {
            let r: Vec<f64> = x.iter().map(|v| v.round()).collect();
            let ok = inst.mip_violation(&r) <= cfg.verify_tol
                && inst.nn_violation_at(&r) <= cfg.verify_tol
                && inst.box_violation(&r) == 0.0;
            if ok {
                best_lin = lin;
                incumbent = Some(r);
                accepted += 1;
            } else {
                discarded += 1;
            }
        }
    }

    let mut report = SolveReport {
        method: "ssg".into(),
        iterations: cfg.t_max,
        converged: incumbent.is_some(),
        objective: f64::INFINITY,
        ..Default::default()
    };
    if discarded > 0 {
        report.notes.push(format!("rounding_infeasible_candidates={discarded}"));
    }
    match &incumbent {
        Some(r) => {
            let xi: Vec<i64> = r.iter().map(|v| *v as i64).collect();
            report.u_final = x.clone();
            report.evaluate_at(inst, &xi);
        }
        None => report.notes.push("no verified incumbent".into()),
    }
    report.phase_times.insert("total".into(), start.elapsed().as_secs_f64());
    Ok(SsgRun {
        report,
        discarded,
        accepted,
    })
}
