//! Solvers for the continuous block
//!
//! ```txt
//!   φ(u) = dᵀf(u) + λᵀ(u − x) + (ρ/2)‖u − x‖²
//! ```
//!
//! subject to the box and the `A_NN` rows at `[u; f(u)]`.

use log::debug;

use crate::error::{Error, Result};
use crate::milp::{solve_relaxation, MilpModel, RelaxStatus};
use crate::model::{dot, ProblemInstance};
use crate::nn::{forward, vjp};

#[derive(Debug, Clone, Copy)]
pub struct SubsolverRequest<'a> {
    pub instance: &'a ProblemInstance,
    /// Current integer iterate (integer-valued).
    pub x: &'a [f64],
    pub lambda: &'a [f64],
    pub rho: f64,
    pub u_start: &'a [f64],
    /// Adam steps for PGD, Newton steps per barrier stage.
    pub budget: usize,
}

#[derive(Debug, Clone)]
pub struct SubsolverResult {
    pub u: Vec<f64>,
    /// `φ(u)`.
    pub objective: f64,
    /// Max `A_NN` row violation at `[u; f(u)]`.
    pub violation: f64,
    pub inner_converged: bool,
    pub inner_iterations: usize,
}

pub trait NnSubsolver: Send + Sync {
    fn name(&self) -> &'static str;
    fn solve(&self, req: &SubsolverRequest) -> Result<SubsolverResult>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SubsolverKind {
    Pgd,
    Barrier,
    /// Barrier when some `A_NN` row touches `f(u)`, PGD otherwise.
    #[default]
    Auto,
}

impl std::str::FromStr for SubsolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pgd" => Ok(Self::Pgd),
            "barrier" => Ok(Self::Barrier),
            "auto" => Ok(Self::Auto),
            _ => Err(Error::Config(format!("unknown subsolver '{s}'"))),
        }
    }
}

pub fn select(kind: SubsolverKind, inst: &ProblemInstance, eta: f64) -> Box<dyn NnSubsolver> {
    match kind {
        SubsolverKind::Pgd => Box::new(Pgd { eta }),
        SubsolverKind::Barrier => Box::new(Barrier::default()),
        SubsolverKind::Auto if inst.has_coupled_rows() => Box::new(Barrier::default()),
        SubsolverKind::Auto => Box::new(Pgd { eta }),
    }
}

/// `φ(u)` and its gradient `Jᵀd + λ + ρ(u − x)`.
pub fn phi_and_grad(req: &SubsolverRequest, u: &[f64]) -> Result<(f64, Vec<f64>)> {
    let net = &req.instance.network;
    let (y, tape) = forward(net, u)?;
    let jd = vjp(net, &tape, &req.instance.d)?;
    let mut value = dot(&req.instance.d, &y);
    let mut grad = jd;
    for i in 0..u.len() {
        let r = u[i] - req.x[i];
        value += req.lambda[i] * r + 0.5 * req.rho * r * r;
        grad[i] += req.lambda[i] + req.rho * r;
    }
    Ok((value, grad))
}

pub fn phi(req: &SubsolverRequest, u: &[f64]) -> Result<f64> {
    let (y, _) = forward(&req.instance.network, u)?;
    let mut value = dot(&req.instance.d, &y);
    for i in 0..u.len() {
        let r = u[i] - req.x[i];
        value += req.lambda[i] * r + 0.5 * req.rho * r * r;
    }
    Ok(value)
}

/// Rows of `A_NN` without `f(u)` coefficients, restricted to their `u` part.
pub fn u_only_rows(inst: &ProblemInstance) -> (Vec<Vec<f64>>, Vec<f64>) {
    let p = inst.p();
    (0..inst.a_nn.len())
        .filter(|&i| inst.nn_row_is_u_only(i))
        .map(|i| (inst.a_nn[i][..p].to_vec(), inst.b_nn[i]))
        .unzip()
}

/// Euclidean projection onto `{lower ≤ u ≤ upper, rows·u ≤ rhs}`.
pub fn project_feasible(
    u: &[f64],
    lower: &[f64],
    upper: &[f64],
    rows: &[Vec<f64>],
    rhs: &[f64],
) -> Result<Vec<f64>> {
    let in_box = (0..u.len()).all(|i| lower[i] <= u[i] && u[i] <= upper[i]);
    let in_rows = rows.iter().zip(rhs).all(|(r, b)| dot(r, u) <= *b);
    if in_box && in_rows {
        return Ok(u.to_vec());
    }
    let clamped: Vec<f64> = (0..u.len()).map(|i| u[i].clamp(lower[i], upper[i])).collect();
    if rows.is_empty() {
        return Ok(clamped);
    }
    let mut m = MilpModel::linear(u.iter().map(|v| -v).collect(), lower.to_vec(), upper.to_vec());
    m.q_diag = vec![1.0; u.len()];
    for (r, b) in rows.iter().zip(rhs) {
        m.add_row(r.clone(), *b);
    }
    let sol = solve_relaxation(&m)?;
    match sol.status {
        RelaxStatus::Optimal => Ok(sol.z),
        RelaxStatus::Infeasible => Err(Error::EmptyFeasibleSet(
            "box and u-only A_NN rows have no common point".into(),
        )),
    }
}

fn result(req: &SubsolverRequest, u: Vec<f64>, converged: bool, iters: usize) -> Result<SubsolverResult> {
    Ok(SubsolverResult {
        objective: phi(req, &u)?,
        violation: req.instance.nn_violation_at(&u),
        u,
        inner_converged: converged,
        inner_iterations: iters,
    })
}

/// Projected gradient with Adam moments; fresh moment state per call.
#[derive(Debug, Clone)]
pub struct Pgd {
    pub eta: f64,
}

impl Default for Pgd {
    fn default() -> Self {
        Self { eta: 0.01 }
    }
}

const ADAM_B1: f64 = 0.9;
const ADAM_B2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

impl NnSubsolver for Pgd {
    fn name(&self) -> &'static str {
        "pgd"
    }

    fn solve(&self, req: &SubsolverRequest) -> Result<SubsolverResult> {
        let inst = req.instance;
        let (rows, rhs) = u_only_rows(inst);
        let project = |v: &[f64]| project_feasible(v, &inst.lower, &inst.upper, &rows, &rhs);

        // Start from whichever of u_start and x is better.
        let mut u = project(req.u_start)?;
        let mut best_val = phi(req, &u)?;
        let xp = project(req.x)?;
        let xv = phi(req, &xp)?;
        if xv < best_val {
            u = xp;
            best_val = xv;
        }
        let mut best = u.clone();

        let p = u.len();
        let (mut m, mut v) = (vec![0.0; p], vec![0.0; p]);
        let mut converged = false;
        let mut iters = 0;
        for t in 1..=req.budget {
            iters = t;
            let (_, g) = phi_and_grad(req, &u)?;
            let (c1, c2) = (1.0 - ADAM_B1.powi(t as i32), 1.0 - ADAM_B2.powi(t as i32));
            let mut step = vec![0.0; p];
            for i in 0..p {
                m[i] = ADAM_B1 * m[i] + (1.0 - ADAM_B1) * g[i];
                v[i] = ADAM_B2 * v[i] + (1.0 - ADAM_B2) * g[i] * g[i];
                step[i] = u[i] - self.eta * (m[i] / c1) / ((v[i] / c2).sqrt() + ADAM_EPS);
            }
            let next = project(&step)?;
            let moved = next
                .iter()
                .zip(&u)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            u = next;
            let val = phi(req, &u)?;
            if val < best_val {
                best_val = val;
                best.clone_from(&u);
            }
            if moved < 1e-12 {
                converged = true;
                break;
            }
        }
        result(req, best, converged, iters)
    }
}

/// Log-barrier interior method with damped Newton–CG steps. The box is
/// included as barrier terms; coordinates with `lower == upper` are fixed.
#[derive(Debug, Clone)]
pub struct Barrier {
    pub mu0: f64,
    pub mu_shrink: f64,
    pub mu_min: f64,
    pub cg_iters: usize,
    pub decrement_tol: f64,
    pub phase_one_steps: usize,
}

impl Default for Barrier {
    fn default() -> Self {
        Self {
            mu0: 1.0,
            mu_shrink: 0.1,
            mu_min: 1e-6,
            cg_iters: 5,
            decrement_tol: 1e-6,
            phase_one_steps: 2000,
        }
    }
}

struct BarrierData<'a> {
    req: &'a SubsolverRequest<'a>,
    /// `(a_u, a_y, b)` for every `A_NN` row.
    rows: Vec<(Vec<f64>, Vec<f64>, f64)>,
    free: Vec<bool>,
}

impl BarrierData<'_> {
    fn slacks(&self, u: &[f64], y: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|(au, ay, b)| b - dot(au, u) - dot(ay, y))
            .collect()
    }

    fn strictly_feasible(&self, u: &[f64]) -> Result<bool> {
        let inst = self.req.instance;
        let (y, _) = forward(&inst.network, u)?;
        let box_ok = (0..u.len())
            .all(|i| !self.free[i] || (inst.lower[i] < u[i] && u[i] < inst.upper[i]));
        Ok(box_ok && self.slacks(u, &y).iter().all(|&s| s > 0.0))
    }

    /// Barrier objective, or `None` outside the strict interior.
    fn value(&self, u: &[f64], mu: f64) -> Result<Option<f64>> {
        let inst = self.req.instance;
        let (y, _) = forward(&inst.network, u)?;
        let mut val = phi(self.req, u)?;
        for s in self.slacks(u, &y) {
            if s <= 0.0 {
                return Ok(None);
            }
            val -= mu * s.ln();
        }
        for i in (0..u.len()).filter(|&i| self.free[i]) {
            let (a, b) = (u[i] - inst.lower[i], inst.upper[i] - u[i]);
            if a <= 0.0 || b <= 0.0 {
                return Ok(None);
            }
            val -= mu * (a.ln() + b.ln());
        }
        Ok(Some(val))
    }

    /// Gradient, per-row curvature vectors `w_j / s_j`, and the diagonal
    /// box curvature.
    fn local_model(&self, u: &[f64], mu: f64) -> Result<(Vec<f64>, Vec<Vec<f64>>, Vec<f64>)> {
        let inst = self.req.instance;
        let net = &inst.network;
        let (y, tape) = forward(net, u)?;
        let (_, mut g) = phi_and_grad(self.req, u)?;
        let slacks = self.slacks(u, &y);
        let mut scaled = Vec::with_capacity(self.rows.len());
        for ((au, ay, _), s) in self.rows.iter().zip(&slacks) {
            let mut w = au.clone();
            if ay.iter().any(|&a| a != 0.0) {
                for (wi, ji) in w.iter_mut().zip(vjp(net, &tape, ay)?) {
                    *wi += ji;
                }
            }
            for (gi, wi) in g.iter_mut().zip(&w) {
                *gi += mu * wi / s;
            }
            scaled.push(w.iter().map(|wi| wi / s).collect());
        }
        let mut diag = vec![0.0; u.len()];
        for i in 0..u.len() {
            if !self.free[i] {
                g[i] = 0.0;
                continue;
            }
            let (a, b) = (u[i] - inst.lower[i], inst.upper[i] - u[i]);
            g[i] += mu * (-1.0 / a + 1.0 / b);
            diag[i] = mu * (1.0 / (a * a) + 1.0 / (b * b));
        }
        Ok((g, scaled, diag))
    }

    fn hess_vec(&self, scaled: &[Vec<f64>], diag: &[f64], mu: f64, v: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = (0..v.len())
            .map(|i| if self.free[i] { (self.req.rho + diag[i]) * v[i] } else { 0.0 })
            .collect();
        for w in scaled {
            let c = mu * dot(w, v);
            for i in (0..v.len()).filter(|&i| self.free[i]) {
                out[i] += c * w[i];
            }
        }
        out
    }
}

/// Truncated conjugate gradient for `H x = rhs`.
fn cg(hv: impl Fn(&[f64]) -> Vec<f64>, rhs: &[f64], iters: usize) -> Vec<f64> {
    let n = rhs.len();
    let mut x = vec![0.0; n];
    let mut r = rhs.to_vec();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    for _ in 0..iters {
        if rr < 1e-30 {
            break;
        }
        let hp = hv(&p);
        let php = dot(&p, &hp);
        if php <= 0.0 {
            break;
        }
        let a = rr / php;
        for i in 0..n {
            x[i] += a * p[i];
            r[i] -= a * hp[i];
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
    x
}

impl Barrier {
    /// Elastic phase one: minimise `Σ max(0, a·[u; f(u)] − b + margin)²`
    /// with projected Adam over a slightly shrunk box.
    fn phase_one(&self, data: &BarrierData, start: &[f64]) -> Result<Vec<f64>> {
        let inst = data.req.instance;
        let p = start.len();
        let inner: Vec<(f64, f64)> = (0..p)
            .map(|i| {
                let (l, h) = (inst.lower[i], inst.upper[i]);
                if !data.free[i] {
                    (l, l)
                } else {
                    let delta = (1e-3f64).min(0.25 * (h - l));
                    (l + delta, h - delta)
                }
            })
            .collect();
        let clamp = |v: &mut [f64]| {
            for i in 0..p {
                v[i] = v[i].clamp(inner[i].0, inner[i].1);
            }
        };
        let margin = 1e-4;
        let net = &inst.network;
        let mut u = start.to_vec();
        clamp(&mut u);
        let (mut m, mut v) = (vec![0.0; p], vec![0.0; p]);
        for t in 1..=self.phase_one_steps {
            if data.strictly_feasible(&u)? {
                return Ok(u);
            }
            let (y, tape) = forward(net, &u)?;
            let mut g = vec![0.0; p];
            for ((au, ay, _), s) in data.rows.iter().zip(data.slacks(&u, &y)) {
                let excess = margin - s;
                if excess <= 0.0 {
                    continue;
                }
                let mut w = au.clone();
                if ay.iter().any(|&a| a != 0.0) {
                    for (wi, ji) in w.iter_mut().zip(vjp(net, &tape, ay)?) {
                        *wi += ji;
                    }
                }
                for i in 0..p {
                    g[i] += 2.0 * excess * w[i];
                }
            }
            let (c1, c2) = (1.0 - ADAM_B1.powi(t as i32), 1.0 - ADAM_B2.powi(t as i32));
            for i in 0..p {
                m[i] = ADAM_B1 * m[i] + (1.0 - ADAM_B1) * g[i];
                v[i] = ADAM_B2 * v[i] + (1.0 - ADAM_B2) * g[i] * g[i];
                u[i] -= 0.01 * (m[i] / c1) / ((v[i] / c2).sqrt() + ADAM_EPS);
            }
            clamp(&mut u);
        }
        if data.strictly_feasible(&u)? {
            return Ok(u);
        }
        Err(Error::SubproblemInfeasible {
            iteration: 0,
            what: format!(
                "barrier phase one ended with violation {:.3e}",
                inst.nn_violation_at(&u).max(inst.box_violation(&u))
            ),
        })
    }
}

impl NnSubsolver for Barrier {
    fn name(&self) -> &'static str {
        "barrier"
    }

    fn solve(&self, req: &SubsolverRequest) -> Result<SubsolverResult> {
        let inst = req.instance;
        let p = inst.p();
        let data = BarrierData {
            req,
            rows: inst
                .a_nn
                .iter()
                .zip(&inst.b_nn)
                .map(|(r, b)| (r[..p].to_vec(), r[p..].to_vec(), *b))
                .collect(),
            free: (0..p).map(|i| inst.upper[i] - inst.lower[i] > 1e-12).collect(),
        };
        let fix = |v: &[f64]| -> Vec<f64> {
            (0..p)
                .map(|i| if data.free[i] { v[i] } else { inst.lower[i] })
                .collect()
        };

        let mut start = None;
        for cand in [req.u_start, req.x] {
            let c = fix(cand);
            if data.strictly_feasible(&c)? {
                start = Some(c);
                break;
            }
        }
        let mut u = match start {
            Some(u) => u,
            None => match self.phase_one(&data, &fix(req.u_start)) {
                Ok(u) => u,
                Err(e) => {
                    // No strict interior: return the phase-one point when it
                    // is feasible to within tolerance.
                    let c = fix(req.x);
                    if inst.nn_violation_at(&c) <= 1e-6 {
                        debug!("barrier: no strict interior, returning x");
                        return result(req, c, false, 0);
                    }
                    return Err(e);
                }
            },
        };

        let mut mu = self.mu0;
        let mut iters = 0;
        let mut all_converged = true;
        while mu >= self.mu_min {
            let mut stage_ok = false;
            for _ in 0..req.budget.max(1) {
                iters += 1;
                let (g, scaled, diag) = data.local_model(&u, mu)?;
                let neg: Vec<f64> = g.iter().map(|v| -v).collect();
                let dir = cg(|v| data.hess_vec(&scaled, &diag, mu, v), &neg, self.cg_iters);
                let slope = dot(&g, &dir);
                if slope >= 0.0 || (-slope).sqrt() <= self.decrement_tol {
                    stage_ok = true;
                    break;
                }
                let f0 = data.value(&u, mu)?.expect("iterate is strictly feasible");
                let mut alpha = 1.0;
                let mut accepted = false;
                while alpha > 1e-12 {
                    let trial: Vec<f64> = u.iter().zip(&dir).map(|(a, d)| a + alpha * d).collect();
                    if let Some(f) = data.value(&trial, mu)? {
                        if f <= f0 + 0.25 * alpha * slope {
                            u = trial;
                            accepted = true;
                            break;
                        }
                    }
                    alpha *= 0.5;
                }
                if !accepted {
                    stage_ok = true;
                    break;
                }
            }
            all_converged &= stage_ok;
            mu *= self.mu_shrink;
        }
        result(req, u, all_converged, iters)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Activation, InstanceMeta, Layer, NnModel};

    fn inst_1d(lower: f64, upper: f64) -> ProblemInstance {
        ProblemInstance {
            meta: InstanceMeta::default(),
            c: vec![0.0],
            d: vec![0.0],
            a_mip: vec![],
            b_mip: vec![],
            a_nn: vec![],
            b_nn: vec![],
            lower: vec![lower],
            upper: vec![upper],
            integrality: vec![true],
            network: NnModel::identity(1),
        }
    }

    fn req<'a>(
        inst: &'a ProblemInstance,
        x: &'a [f64],
        lambda: &'a [f64],
        rho: f64,
        u0: &'a [f64],
        budget: usize,
    ) -> SubsolverRequest<'a> {
        SubsolverRequest {
            instance: inst,
            x,
            lambda,
            rho,
            u_start: u0,
            budget,
        }
    }

    #[test]
    fn projection_examples() {
        let lo = [0.0, 0.0];
        let hi = [1.0, 1.0];
        assert_eq!(project_feasible(&[0.3, 0.6], &lo, &hi, &[], &[]).unwrap(), vec![0.3, 0.6]);
        assert_eq!(project_feasible(&[2.0, 0.5], &lo, &hi, &[], &[]).unwrap(), vec![1.0, 0.5]);
        let p = project_feasible(&[1.0, 1.0], &lo, &hi, &[vec![1.0, 1.0]], &[1.0]).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-8 && (p[1] - 0.5).abs() < 1e-8);
        let e = project_feasible(&[1.0, 1.0], &lo, &hi, &[vec![1.0, 1.0]], &[-1.0]);
        assert!(matches!(e, Err(Error::EmptyFeasibleSet(_))));
    }

    #[test]
    fn stationary_start_is_kept() {
        let net = NnModel::new(vec![
            Layer::new(vec![vec![1.0, 2.0], vec![-1.0, 0.5]], vec![0.1, 0.3], Activation::Relu),
            Layer::new(vec![vec![1.0, -1.0]], vec![0.0], Activation::Identity),
        ]);
        let mut inst = inst_1d(0.0, 3.0);
        inst.lower = vec![0.0; 2];
        inst.upper = vec![3.0; 2];
        inst.c = vec![0.0; 2];
        inst.integrality = vec![true; 2];
        inst.network = net;
        inst.d = vec![0.7];
        let x = [1.0, 2.0];
        let u0 = [1.3, 1.6];
        let rho = 10.0;
        let probe = req(&inst, &x, &[0.0, 0.0], rho, &u0, 0);
        let (_, g0) = phi_and_grad(&probe, &u0).unwrap();
        // λ = −ρ(u − x) − Jᵀd makes u0 stationary.
        let lambda: Vec<f64> = (0..2).map(|i| -(g0[i] - 0.0)).collect();
        let r = req(&inst, &x, &lambda, rho, &u0, 50);
        let (_, g) = phi_and_grad(&r, &u0).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-12));
        let out = Pgd::default().solve(&r).unwrap();
        assert_eq!(out.u, u0.to_vec());
    }

    #[test]
    fn proximal_pull_returns_x() {
        let inst = inst_1d(0.0, 3.0);
        let out = Pgd::default()
            .solve(&req(&inst, &[2.0], &[0.0], 10.0, &[0.5], 25))
            .unwrap();
        assert_eq!(out.u, vec![2.0]);
        assert_eq!(out.objective, 0.0);
    }

    #[test]
    fn active_box_projection() {
        // φ = ½(u − 3.1)² with u ∈ [0, 2]: x = 3.1 is outside the box on
        // purpose to place the unconstrained minimiser there.
        let inst = inst_1d(0.0, 2.0);
        let out = Pgd::default()
            .solve(&req(&inst, &[3.1], &[0.0], 1.0, &[0.0], 400))
            .unwrap();
        assert_eq!(out.u, vec![2.0]);
    }

    #[test]
    fn barrier_stops_at_row() {
        let mut inst = inst_1d(0.0, 3.0);
        inst.a_nn = vec![vec![1.0, 0.0]];
        inst.b_nn = vec![1.5];
        let out = Barrier::default()
            .solve(&req(&inst, &[2.0], &[0.0], 1.0, &[0.5], 50))
            .unwrap();
        assert!(out.u[0] < 1.5 && (out.u[0] - 1.5).abs() < 1e-3, "{:?}", out.u);
        assert!(out.violation <= 1e-7);
        assert!(out.inner_converged);
    }

    #[test]
    fn barrier_matches_pgd_without_rows() {
        let net = NnModel::new(vec![Layer::new(
            vec![vec![0.5, -1.0]],
            vec![0.2],
            Activation::Identity,
        )]);
        let mut inst = inst_1d(0.0, 3.0);
        inst.lower = vec![0.0; 2];
        inst.upper = vec![3.0; 2];
        inst.c = vec![0.0; 2];
        inst.integrality = vec![true; 2];
        inst.network = net;
        inst.d = vec![2.0];
        let x = [1.0, 2.0];
        let lambda = [0.5, -1.0];
        let r = req(&inst, &x, &lambda, 4.0, &[1.5, 1.5], 2000);
        let a = Pgd::default().solve(&r).unwrap();
        let b = Barrier::default().solve(&r).unwrap();
        // Minimiser: u = x − (Wᵀd + λ)/ρ = (0.625, 2.75).
        for (ua, ub) in a.u.iter().zip(&b.u) {
            assert!((ua - ub).abs() < 1e-4, "{:?} vs {:?}", a.u, b.u);
        }
        assert!((b.u[0] - 0.625).abs() < 1e-5 && (b.u[1] - 2.75).abs() < 1e-5);
    }

    #[test]
    fn boundary_start_triggers_phase_one() {
        let net = NnModel::new(vec![
            Layer::new(vec![vec![1.0]], vec![0.0], Activation::Relu),
            Layer::new(vec![vec![2.0]], vec![0.0], Activation::Identity),
        ]);
        let mut inst = inst_1d(0.0, 3.0);
        inst.network = net;
        // 2·relu(u) ≤ 2 couples f(u); start u = 1 sits on the boundary.
        inst.a_nn = vec![vec![0.0, 1.0]];
        inst.b_nn = vec![2.0];
        let out = Barrier::default()
            .solve(&req(&inst, &[1.0], &[-3.0], 1.0, &[1.0], 50))
            .unwrap();
        assert!(out.u[0] < 1.0 && out.violation <= 1e-7);
        assert!((out.u[0] - 1.0).abs() < 1e-3);
    }

    #[test]
    fn phase_one_failure_is_reported() {
        let mut inst = inst_1d(0.0, 3.0);
        inst.a_nn = vec![vec![0.0, 1.0]];
        inst.b_nn = vec![-1.0];
        let e = Barrier::default().solve(&req(&inst, &[1.0], &[0.0], 1.0, &[1.0], 10));
        assert!(matches!(e, Err(Error::SubproblemInfeasible { .. })));
    }
}
