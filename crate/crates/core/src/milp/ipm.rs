//! Mehrotra predictor–corrector interior method for
//! `min ½zᵀQz + cᵀz  s.t.  G z ≤ h` with diagonal `Q ⪰ 0`, where `G`
//! stacks the general rows and the finite box bounds.

use log::debug;
use nalgebra::{DMatrix, DVector};

use super::MilpModel;
use crate::error::{Error, Result};

/// Relative tolerance on primal residual, dual residual and gap.
pub const KKT_TOL: f64 = 1e-9;
const LOOSE_TOL: f64 = 1e-7;
const MAX_ITER: usize = 150;
const FIXED_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelaxStatus {
    Optimal,
    Infeasible,
}

#[derive(Debug, Clone)]
pub struct Relaxation {
    pub z: Vec<f64>,
    /// Objective at `z`, without any regularisation.
    pub value: f64,
    pub status: RelaxStatus,
    pub iterations: usize,
}

impl Relaxation {
    fn infeasible(n: usize) -> Self {
        Self {
            z: vec![f64::NAN; n],
            value: f64::INFINITY,
            status: RelaxStatus::Infeasible,
            iterations: 0,
        }
    }
}

/// Continuous relaxation of `model` (integrality flags ignored).
pub fn solve_relaxation(model: &MilpModel) -> Result<Relaxation> {
    model.check()?;
    let n = model.n();
    let feas_slack = |rhs: f64| 1e-9 * (1.0 + rhs.abs());

    // Single-variable rows become bounds.
    let mut lower = model.lower.clone();
    let mut upper = model.upper.clone();
    let mut general = Vec::with_capacity(model.m());
    for (i, (row, &b)) in model.a.iter().zip(&model.b).enumerate() {
        let mut nz = row.iter().enumerate().filter(|(_, a)| **a != 0.0);
        match (nz.next(), nz.next()) {
            (None, _) => {
                if b < -feas_slack(b) {
                    return Ok(Relaxation::infeasible(n));
                }
            }
            (Some((j, &a)), None) => {
                if a > 0.0 {
                    upper[j] = upper[j].min(b / a);
                } else {
                    lower[j] = lower[j].max(b / a);
                }
            }
            _ => general.push(i),
        }
    }
    for j in 0..n {
        if lower[j] > upper[j] + feas_slack(upper[j]) {
            return Ok(Relaxation::infeasible(n));
        }
        upper[j] = upper[j].max(lower[j]);
    }

    // Eliminate fixed variables; rows without free coefficients are
    // checked directly.
    let is_fixed = |j: usize| upper[j] - lower[j] <= FIXED_TOL;
    let free: Vec<usize> = (0..n).filter(|&j| !is_fixed(j)).collect();
    let mut z = lower.clone();
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(general.len());
    let mut h = Vec::with_capacity(general.len());
    for &i in &general {
        let (row, b) = (&model.a[i], model.b[i]);
        let fixed_part: f64 = (0..n).filter(|&j| is_fixed(j)).map(|j| row[j] * lower[j]).sum();
        let rhs = b - fixed_part;
        let reduced: Vec<f64> = free.iter().map(|&j| row[j]).collect();
        let scale = reduced.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if scale == 0.0 {
            if rhs < -feas_slack(b) {
                return Ok(Relaxation::infeasible(n));
            }
            continue;
        }
        // Single-row bound over the box.
        let min_lhs: f64 = free
            .iter()
            .zip(&reduced)
            .map(|(&j, &a)| if a > 0.0 { a * lower[j] } else { a * upper[j] })
            .sum();
        if min_lhs > rhs + feas_slack(rhs) * scale.max(1.0) {
            return Ok(Relaxation::infeasible(n));
        }
        rows.push(reduced.iter().map(|a| a / scale).collect::<Vec<_>>());
        h.push(rhs / scale);
    }
    if free.is_empty() {
        return Ok(Relaxation {
            value: model.objective(&z),
            z,
            status: RelaxStatus::Optimal,
            iterations: 0,
        });
    }
    let Some((rows, h, eq, e)) = split_equalities(rows, h) else {
        return Ok(Relaxation::infeasible(n));
    };
    // Objective scaling; large proximal weights otherwise swamp the residuals.
    let obj_scale = free
        .iter()
        .map(|&j| model.q_diag[j].abs().max(model.lin[j].abs()))
        .fold(1.0f64, f64::max);
    let qp = Qp {
        q: free.iter().map(|&j| model.q_diag[j] / obj_scale).collect(),
        c: free.iter().map(|&j| model.lin[j] / obj_scale).collect(),
        rows,
        h,
        eq,
        e,
        lb: free.iter().map(|&j| lower[j]).collect(),
        ub: free.iter().map(|&j| upper[j]).collect(),
    };

    let out = ipm(&qp);
    if out.converged {
        for (k, &j) in free.iter().enumerate() {
            z[j] = out.z[k].clamp(lower[j], upper[j]);
        }
        return Ok(Relaxation {
            value: model.objective(&z),
            z,
            status: RelaxStatus::Optimal,
            iterations: out.iterations,
        });
    }

    match phase_one(&qp)? {
        PhaseOne::Infeasible => Ok(Relaxation::infeasible(n)),
        PhaseOne::Feasible => Err(Error::Numerical(format!(
            "interior method stalled on a feasible relaxation ({} vars, {} rows, {} equalities)",
            qp.n(),
            qp.rows.len(),
            qp.eq.len()
        ))),
    }
}

type Rows = Vec<Vec<f64>>;

/// Drops duplicate rows (keeping the tighter side) and turns opposite
/// pairs `a·z ≤ h`, `−a·z ≤ −h` into equalities. `None` means a pair is
/// contradictory.
fn split_equalities(rows: Rows, h: Vec<f64>) -> Option<(Rows, Vec<f64>, Rows, Vec<f64>)> {
    const SAME: f64 = 1e-12;
    let m = rows.len();
    let close = |a: &[f64], b: &[f64], sign: f64| a.iter().zip(b).all(|(x, y)| (x - sign * y).abs() <= SAME);
    let mut h = h;
    let mut alive = vec![true; m];
    let mut eq_rows = Vec::new();
    let mut e = Vec::new();
    for i in 0..m {
        if !alive[i] {
            continue;
        }
        for k in i + 1..m {
            if !alive[k] {
                continue;
            }
            if close(&rows[i], &rows[k], 1.0) {
                h[i] = h[i].min(h[k]);
                alive[k] = false;
            }
        }
        for k in i + 1..m {
            if !alive[k] || !close(&rows[i], &rows[k], -1.0) {
                continue;
            }
            let width = h[i] + h[k];
            let tol = 1e-9 * (1.0 + h[i].abs());
            if width < -tol {
                return None;
            }
            if width <= tol {
                eq_rows.push(rows[i].clone());
                e.push(0.5 * (h[i] - h[k]));
                alive[i] = false;
                alive[k] = false;
                break;
            }
        }
    }
    let (mut ineq, mut hi) = (Vec::new(), Vec::new());
    for (i, row) in rows.into_iter().enumerate() {
        if alive[i] {
            ineq.push(row);
            hi.push(h[i]);
        }
    }
    Some((ineq, hi, eq_rows, e))
}

/// `min ½zᵀdiag(q)z + cᵀz  s.t.  rows·z ≤ h,  eq·z = e,  lb ≤ z ≤ ub`.
struct Qp {
    q: Vec<f64>,
    c: Vec<f64>,
    rows: Vec<Vec<f64>>,
    h: Vec<f64>,
    eq: Vec<Vec<f64>>,
    e: Vec<f64>,
    lb: Vec<f64>,
    ub: Vec<f64>,
}

impl Qp {
    fn n(&self) -> usize {
        self.c.len()
    }

    fn eq_mul(&self, z: &[f64]) -> Vec<f64> {
        self.eq.iter().map(|r| r.iter().zip(z).map(|(a, b)| a * b).sum()).collect()
    }

    fn eq_mul_t(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n()];
        for (r, &vi) in self.eq.iter().zip(v) {
            for (o, a) in out.iter_mut().zip(r) {
                *o += a * vi;
            }
        }
        out
    }
}

/// `G` = general rows, then `z_j ≤ ub_j`, then `−z_j ≤ −lb_j` (finite only).
struct Stack<'a> {
    qp: &'a Qp,
    ub_idx: Vec<usize>,
    lb_idx: Vec<usize>,
}

impl<'a> Stack<'a> {
    fn new(qp: &'a Qp) -> Self {
        Self {
            qp,
            ub_idx: (0..qp.n()).filter(|&j| qp.ub[j].is_finite()).collect(),
            lb_idx: (0..qp.n()).filter(|&j| qp.lb[j].is_finite()).collect(),
        }
    }

    fn m(&self) -> usize {
        self.qp.rows.len() + self.ub_idx.len() + self.lb_idx.len()
    }

    fn rhs(&self) -> Vec<f64> {
        let mut h = self.qp.h.clone();
        h.extend(self.ub_idx.iter().map(|&j| self.qp.ub[j]));
        h.extend(self.lb_idx.iter().map(|&j| -self.qp.lb[j]));
        h
    }

    fn mul(&self, z: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = self
            .qp
            .rows
            .iter()
            .map(|r| r.iter().zip(z).map(|(a, b)| a * b).sum())
            .collect();
        out.extend(self.ub_idx.iter().map(|&j| z[j]));
        out.extend(self.lb_idx.iter().map(|&j| -z[j]));
        out
    }

    fn mul_t(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.qp.n()];
        let m = self.qp.rows.len();
        for (r, &vi) in self.qp.rows.iter().zip(&v[..m]) {
            if vi != 0.0 {
                for (o, a) in out.iter_mut().zip(r) {
                    *o += a * vi;
                }
            }
        }
        let nu = self.ub_idx.len();
        for (&j, &vi) in self.ub_idx.iter().zip(&v[m..m + nu]) {
            out[j] += vi;
        }
        for (&j, &vi) in self.lb_idx.iter().zip(&v[m + nu..]) {
            out[j] -= vi;
        }
        out
    }

    /// `diag(q) + Gᵀ diag(d) G + reg·I`.
    fn normal_matrix(&self, d: &[f64], reg: f64) -> DMatrix<f64> {
        let n = self.qp.n();
        let m = self.qp.rows.len();
        let mut mat = DMatrix::<f64>::zeros(n, n);
        for (r, &di) in self.qp.rows.iter().zip(&d[..m]) {
            for (i, &ai) in r.iter().enumerate() {
                if ai == 0.0 {
                    continue;
                }
                let s = di * ai;
                for (k, &ak) in r.iter().enumerate().skip(i) {
                    mat[(i, k)] += s * ak;
                }
            }
        }
        for i in 0..n {
            for k in 0..i {
                mat[(i, k)] = mat[(k, i)];
            }
            mat[(i, i)] += self.qp.q[i] + reg;
        }
        let nu = self.ub_idx.len();
        for (&j, &di) in self.ub_idx.iter().zip(&d[m..m + nu]) {
            mat[(j, j)] += di;
        }
        for (&j, &di) in self.lb_idx.iter().zip(&d[m + nu..]) {
            mat[(j, j)] += di;
        }
        mat
    }
}

struct IpmOut {
    z: Vec<f64>,
    /// Multipliers for every row of the stack, same order as `Stack`.
    y: Vec<f64>,
    /// Equality multipliers.
    v: Vec<f64>,
    converged: bool,
    iterations: usize,
}

/// Max-norm that propagates NaN.
fn inf_norm(v: &[f64]) -> f64 {
    v.iter()
        .fold(0.0f64, |a, x| if x.is_nan() || a.is_nan() { f64::NAN } else { a.max(x.abs()) })
}

fn max_step(x: &[f64], dx: &[f64]) -> f64 {
    x.iter()
        .zip(dx)
        .filter(|(_, d)| **d < 0.0)
        .map(|(v, d)| -v / d)
        .fold(f64::INFINITY, f64::min)
}

/// Factorisation of the reduced Newton matrix `[N Eᵀ; E −δI]`.
enum Factor {
    Chol(nalgebra::Cholesky<f64, nalgebra::Dyn>),
    Lu(nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
}

impl Factor {
    fn build(g: &Stack, d: &[f64], reg: f64) -> Option<Self> {
        let nmat = g.normal_matrix(d, reg);
        let qp = g.qp;
        if qp.eq.is_empty() {
            return nmat.cholesky().map(Factor::Chol);
        }
        let (n, me) = (qp.n(), qp.eq.len());
        let mut k = DMatrix::<f64>::zeros(n + me, n + me);
        k.view_mut((0, 0), (n, n)).copy_from(&nmat);
        for (r, row) in qp.eq.iter().enumerate() {
            for (j, &a) in row.iter().enumerate() {
                k[(n + r, j)] = a;
                k[(j, n + r)] = a;
            }
            k[(n + r, n + r)] = -reg;
        }
        let lu = k.lu();
        lu.is_invertible().then_some(Factor::Lu(lu))
    }

    fn solve(&self, rhs: &DVector<f64>) -> Option<DVector<f64>> {
        match self {
            Factor::Chol(c) => Some(c.solve(rhs)),
            Factor::Lu(l) => l.solve(rhs),
        }
    }
}

fn ipm(qp: &Qp) -> IpmOut {
    let g = Stack::new(qp);
    let n = qp.n();
    let m = g.m();
    let me = qp.eq.len();
    let h = g.rhs();

    let mut z: Vec<f64> = (0..n)
        .map(|j| match (qp.lb[j].is_finite(), qp.ub[j].is_finite()) {
            (true, true) => 0.5 * (qp.lb[j] + qp.ub[j]),
            (true, false) => qp.lb[j] + 1.0,
            (false, true) => qp.ub[j] - 1.0,
            (false, false) => 0.0,
        })
        .collect();
    if m == 0 && me == 0 {
        // Unconstrained separable problem.
        let mut converged = true;
        for j in 0..n {
            if qp.q[j] > 0.0 {
                z[j] = -qp.c[j] / qp.q[j];
            } else if qp.c[j] != 0.0 {
                converged = false;
            }
        }
        return IpmOut {
            z,
            y: vec![],
            v: vec![],
            converged,
            iterations: 0,
        };
    }
    let gz = g.mul(&z);
    let mut s: Vec<f64> = h.iter().zip(&gz).map(|(hi, gi)| (hi - gi).max(1.0)).collect();
    let mut y = vec![1.0; m];
    let mut v = vec![0.0; me];

    let h_norm = 1.0 + inf_norm(&h).max(inf_norm(&qp.e));
    let c_norm = 1.0 + inf_norm(&qp.c);
    let mut reg = 1e-10;
    let mut best_rp = f64::INFINITY;
    let mut since_best = 0;
    let mut best = (f64::INFINITY, 0, z.clone(), s.clone(), y.clone(), v.clone());
    let residuals = |z: &[f64], s: &[f64], y: &[f64], v: &[f64]| {
        let gz = g.mul(z);
        let rp: Vec<f64> = (0..m).map(|i| gz[i] + s[i] - h[i]).collect();
        let ez = qp.eq_mul(z);
        let re: Vec<f64> = (0..me).map(|i| ez[i] - qp.e[i]).collect();
        let gty = g.mul_t(y);
        let etv = qp.eq_mul_t(v);
        let rd: Vec<f64> = (0..n).map(|j| qp.q[j] * z[j] + qp.c[j] + gty[j] + etv[j]).collect();
        (rp, re, rd)
    };

    for it in 0..MAX_ITER {
        let (rp, re, rd) = residuals(&z, &s, &y, &v);
        let gap: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        let mu = if m > 0 { gap / m as f64 } else { 0.0 };
        let pobj: f64 = (0..n)
            .map(|j| 0.5 * qp.q[j] * z[j] * z[j] + qp.c[j] * z[j])
            .sum();

        let rp_n = inf_norm(&rp).max(inf_norm(&re)) / h_norm;
        let rd_n = inf_norm(&rd) / c_norm;
        let gap_n = gap / (1.0 + pobj.abs());
        if rp_n <= KKT_TOL && rd_n <= KKT_TOL && gap_n <= KKT_TOL {
            return IpmOut {
                z,
                y,
                v,
                converged: true,
                iterations: it,
            };
        }
        let score = rp_n.max(rd_n).max(gap_n);
        if !score.is_finite() || z.iter().any(|v| !v.is_finite()) {
            debug!("ipm stop at {it}: non-finite iterate");
            break;
        }
        if score < best.0 {
            best = (score, it, z.clone(), s.clone(), y.clone(), v.clone());
        } else if best.0 <= LOOSE_TOL && it > best.1 + 10 {
            break;
        }
        if rp_n < 0.5 * best_rp {
            best_rp = rp_n;
            since_best = 0;
        } else {
            since_best += 1;
        }
        let diverging = inf_norm(&y) > 1e14 || inf_norm(&z) > 1e14 || inf_norm(&v) > 1e14;
        let stalled = since_best > 25 && rp_n > 1e-6;
        if diverging || stalled {
            debug!("ipm stop at {it}: rp {rp_n:.2e} rd {rd_n:.2e} gap {gap_n:.2e}");
            break;
        }

        let d: Vec<f64> = (0..m).map(|i| y[i] / s[i]).collect();
        let factor = loop {
            match Factor::build(&g, &d, reg) {
                Some(f) => break Some(f),
                None if reg < 1e-2 => reg *= 100.0,
                None => break None,
            }
        };
        let Some(factor) = factor else {
            break;
        };
        // Applies the unregularised Newton matrix.
        let apply = |dz: &[f64], dv: &[f64]| -> DVector<f64> {
            let gd = g.mul(dz);
            let dgd: Vec<f64> = (0..m).map(|i| d[i] * gd[i]).collect();
            let back = g.mul_t(&dgd);
            let etv = qp.eq_mul_t(dv);
            let ez = qp.eq_mul(dz);
            DVector::from_iterator(
                n + me,
                (0..n).map(|j| qp.q[j] * dz[j] + back[j] + etv[j]).chain(ez),
            )
        };
        let solve = |rc: &[f64]| -> Option<(Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>)> {
            let w: Vec<f64> = (0..m).map(|i| (rc[i] + y[i] * rp[i]) / s[i]).collect();
            let gtw = g.mul_t(&w);
            let rhs = DVector::from_iterator(
                n + me,
                (0..n).map(|j| -rd[j] - gtw[j]).chain(re.iter().map(|r| -r)),
            );
            let mut sol = factor.solve(&rhs)?;
            for _ in 0..3 {
                let res = &rhs - apply(&sol.as_slice()[..n], &sol.as_slice()[n..]);
                if res.amax() <= 1e-14 * (1.0 + rhs.amax()) {
                    break;
                }
                sol += factor.solve(&res)?;
            }
            let dz = sol.as_slice()[..n].to_vec();
            let dv = sol.as_slice()[n..].to_vec();
            let gdz = g.mul(&dz);
            let ds: Vec<f64> = (0..m).map(|i| -rp[i] - gdz[i]).collect();
            let dy: Vec<f64> = (0..m).map(|i| (rc[i] - y[i] * ds[i]) / s[i]).collect();
            Some((dz, ds, dy, dv))
        };

        let rc_aff: Vec<f64> = (0..m).map(|i| -s[i] * y[i]).collect();
        let Some((_, ds_a, dy_a, _)) = solve(&rc_aff) else {
            break;
        };
        let a_aff = max_step(&s, &ds_a).min(max_step(&y, &dy_a)).min(1.0);
        let sigma = if m > 0 {
            let mu_aff: f64 = (0..m)
                .map(|i| (s[i] + a_aff * ds_a[i]) * (y[i] + a_aff * dy_a[i]))
                .sum::<f64>()
                / m as f64;
            (mu_aff / mu).powi(3).min(1.0)
        } else {
            0.0
        };
        let rc: Vec<f64> = (0..m)
            .map(|i| -s[i] * y[i] - ds_a[i] * dy_a[i] + sigma * mu)
            .collect();
        let Some((dz, ds, dy, dv)) = solve(&rc) else {
            break;
        };
        let alpha = (0.995 * max_step(&s, &ds).min(max_step(&y, &dy))).min(1.0);
        for j in 0..n {
            z[j] += alpha * dz[j];
        }
        for i in 0..m {
            s[i] = (s[i] + alpha * ds[i]).max(1e-300);
            y[i] = (y[i] + alpha * dy[i]).max(1e-300);
        }
        for i in 0..me {
            v[i] += alpha * dv[i];
        }
    }

    // Accept the best nearly converged point before declaring failure.
    let (_, _, z, s, y, v) = best;
    let (rp, re, rd) = residuals(&z, &s, &y, &v);
    let rp_n = inf_norm(&rp).max(inf_norm(&re)) / h_norm;
    let rd_n = inf_norm(&rd) / c_norm;
    let gap: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
    let converged = rp_n <= LOOSE_TOL && rd_n <= LOOSE_TOL && gap <= LOOSE_TOL * (1.0 + inf_norm(&z));
    IpmOut {
        z,
        y,
        v,
        converged,
        iterations: MAX_ITER,
    }
}

enum PhaseOne {
    Feasible,
    Infeasible,
}

/// `min t  s.t.  G z − t ≤ h,  t ≥ −1`. A positive optimum together with a
/// Farkas certificate (`y ≥ 0`, `Gᵀy ≈ 0`, `hᵀy < 0`) confirms
/// infeasibility.
fn phase_one(qp: &Qp) -> Result<PhaseOne> {
    let stack = Stack::new(qp);
    let n = qp.n();
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(stack.m());
    for r in &qp.rows {
        let mut row = r.clone();
        row.push(-1.0);
        rows.push(row);
    }
    for &j in &stack.ub_idx {
        let mut row = vec![0.0; n + 1];
        row[j] = 1.0;
        row[n] = -1.0;
        rows.push(row);
    }
    for &j in &stack.lb_idx {
        let mut row = vec![0.0; n + 1];
        row[j] = -1.0;
        row[n] = -1.0;
        rows.push(row);
    }
    let h = stack.rhs();
    let mut c = vec![0.0; n + 1];
    c[n] = 1.0;
    let mut lb = vec![f64::NEG_INFINITY; n + 1];
    lb[n] = -1.0;
    let elastic = Qp {
        q: vec![0.0; n + 1],
        c,
        rows,
        h: h.clone(),
        eq: qp
            .eq
            .iter()
            .map(|r| r.iter().copied().chain([0.0]).collect())
            .collect(),
        e: qp.e.clone(),
        lb,
        ub: vec![f64::INFINITY; n + 1],
    };
    let out = ipm(&elastic);
    if !out.converged {
        return Err(Error::Numerical("phase-one interior method did not converge".into()));
    }
    let t = out.z[n];
    if t <= 1e-8 {
        return Ok(PhaseOne::Feasible);
    }
    let y = &out.y[..elastic.rows.len()];
    let total: f64 = y.iter().sum();
    let yn: Vec<f64> = y.iter().map(|v| v / total).collect();
    let vn: Vec<f64> = out.v.iter().map(|v| v / total).collect();
    let mut gty = stack.mul_t(&yn);
    for (g, e) in gty.iter_mut().zip(qp.eq_mul_t(&vn)) {
        *g += e;
    }
    let hty: f64 = h.iter().zip(&yn).map(|(a, b)| a * b).sum::<f64>()
        + qp.e.iter().zip(&vn).map(|(a, b)| a * b).sum::<f64>();
    if inf_norm(&gty) <= 1e-6 && hty < 0.0 {
        Ok(PhaseOne::Infeasible)
    } else {
        Err(Error::Numerical(format!(
            "phase-one optimum {t:.3e} without a valid certificate (‖Gᵀy‖ = {:.3e})",
            inf_norm(&gty)
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separable_quadratic() {
        let mut m = MilpModel::linear(vec![0.0], vec![-1.0], vec![3.0]);
        m.q_diag = vec![2.0];
        let r = solve_relaxation(&m).unwrap();
        assert_eq!(r.status, RelaxStatus::Optimal);
        assert!(r.z[0].abs() < 1e-7 && r.value.abs() < 1e-7);
    }

    #[test]
    fn lp_on_facet() {
        let mut m = MilpModel::linear(vec![-1.0, -1.0], vec![0.0; 2], vec![1.0; 2]);
        m.add_row(vec![1.0, 1.0], 1.0);
        let r = solve_relaxation(&m).unwrap();
        assert!((r.value + 1.0).abs() < 1e-7);
        assert!(m.violation(&r.z) <= 1e-7);
    }

    #[test]
    fn detects_infeasible_pair() {
        // z1 + z2 ≥ 1.5 and z1 + z2 ≤ 1 cannot both hold; the single-row
        // box check passes for each row on its own.
        let mut m = MilpModel::linear(vec![1.0, 0.0], vec![0.0; 2], vec![1.0; 2]);
        m.add_row(vec![-1.0, -1.0], -1.5);
        m.add_row(vec![1.0, 1.0], 1.0);
        let r = solve_relaxation(&m).unwrap();
        assert_eq!(r.status, RelaxStatus::Infeasible);
    }

    #[test]
    fn fixed_variables_are_eliminated() {
        let mut m = MilpModel::linear(vec![1.0, 1.0], vec![2.0, 0.0], vec![2.0, 5.0]);
        m.add_row(vec![1.0, -1.0], 0.5);
        let r = solve_relaxation(&m).unwrap();
        assert_eq!(r.z[0], 2.0);
        assert!((r.z[1] - 1.5).abs() < 1e-7);
        assert!((r.value - 3.5).abs() < 1e-7);
    }

    #[test]
    fn degenerate_equality_pair() {
        // z1 = z2 written as two inequalities: no strict interior.
        let mut m = MilpModel::linear(vec![1.0, -2.0], vec![0.0; 2], vec![4.0; 2]);
        m.add_row(vec![1.0, -1.0], 0.0);
        m.add_row(vec![-1.0, 1.0], 0.0);
        let r = solve_relaxation(&m).unwrap();
        assert!((r.z[0] - 4.0).abs() < 1e-6 && (r.z[1] - 4.0).abs() < 1e-6);
        assert!((r.value + 4.0).abs() < 1e-6);
    }

    #[test]
    fn simplex_pair_with_redundant_bound_row() {
        let m = MilpModel {
            q_diag: vec![10.0; 4],
            lin: vec![-10.0, 0.0, 0.0, -10.0],
            a: vec![
                vec![1.0, 1.0, 1.0, 0.0],
                vec![-1.0, -1.0, -1.0, 0.0],
                vec![0.0, 0.0, 0.0, 1.0],
            ],
            b: vec![1.0, -1.0, 1.0],
            lower: vec![0.0; 4],
            upper: vec![1.0; 4],
            integer: vec![false; 4],
        };
        let r = solve_relaxation(&m).unwrap();
        assert_eq!(r.status, RelaxStatus::Optimal);
        assert!((r.value + 10.0).abs() < 1e-6);
        assert!((r.z[0] - 1.0).abs() < 1e-4 && (r.z[3] - 1.0).abs() < 1e-4);
    }
}
