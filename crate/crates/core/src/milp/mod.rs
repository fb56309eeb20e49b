//! Bounded mixed-integer convex QPs with a diagonal quadratic term:
//!
//! ```txt
//!   min  Σ ½·q_i·z_i² + linᵀz
//!   s.t. A z ≤ b,  lower ≤ z ≤ upper,  z_i ∈ ℤ for flagged i
//! ```
//!
//! The continuous relaxation is solved by a primal-dual interior method
//! ([`solve_relaxation`]); integrality by best-first branch-and-bound
//! ([`solve_milp`]).

mod bnb;
mod ipm;

pub use bnb::{solve_milp, solve_milp_with, BnbEvent, BnbNode, BnbOptions, MilpSolution, MilpStatus};
pub use ipm::{solve_relaxation, RelaxStatus, Relaxation, KKT_TOL};

use crate::error::{Error, Result};
use crate::model::{dot, ProblemInstance};

#[derive(Debug, Clone, PartialEq)]
pub struct MilpModel {
    /// Diagonal of the (PSD) quadratic term, `½·q_diag_i·z_i²` convention.
    pub q_diag: Vec<f64>,
    pub lin: Vec<f64>,
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub integer: Vec<bool>,
}

impl MilpModel {
    /// An all-continuous model with no quadratic term.
    pub fn linear(lin: Vec<f64>, lower: Vec<f64>, upper: Vec<f64>) -> Self {
        let n = lin.len();
        Self {
            q_diag: vec![0.0; n],
            lin,
            a: Vec::new(),
            b: Vec::new(),
            lower,
            upper,
            integer: vec![false; n],
        }
    }

    pub fn n(&self) -> usize {
        self.lin.len()
    }

    pub fn m(&self) -> usize {
        self.a.len()
    }

    pub fn objective(&self, z: &[f64]) -> f64 {
        self.q_diag
            .iter()
            .zip(z)
            .map(|(q, v)| 0.5 * q * v * v)
            .sum::<f64>()
            + dot(&self.lin, z)
    }

    pub fn add_row(&mut self, row: Vec<f64>, rhs: f64) {
        self.a.push(row);
        self.b.push(rhs);
    }

    /// Appends a variable and returns its index; existing rows get a zero
    /// coefficient.
    pub fn add_var(&mut self, lower: f64, upper: f64, integer: bool) -> usize {
        self.q_diag.push(0.0);
        self.lin.push(0.0);
        self.lower.push(lower);
        self.upper.push(upper);
        self.integer.push(integer);
        for row in &mut self.a {
            row.push(0.0);
        }
        self.n() - 1
    }

    /// Max violation of rows and bounds at `z`.
    pub fn violation(&self, z: &[f64]) -> f64 {
        let rows = self
            .a
            .iter()
            .zip(&self.b)
            .map(|(r, b)| dot(r, z) - b)
            .fold(0.0, f64::max);
        let bounds = z
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(v, (l, u))| (l - v).max(v - u))
            .fold(0.0, f64::max);
        rows.max(bounds)
    }

    pub fn check(&self) -> Result<()> {
        let n = self.n();
        if self.q_diag.len() != n
            || self.lower.len() != n
            || self.upper.len() != n
            || self.integer.len() != n
            || self.a.len() != self.b.len()
            || self.a.iter().any(|r| r.len() != n)
        {
            return Err(Error::Dimension("inconsistent MilpModel".into()));
        }
        if let Some(i) = self.q_diag.iter().position(|&q| !(q >= 0.0)) {
            return Err(Error::Config(format!("q_diag[{i}] must be non-negative")));
        }
        if let Some(i) = (0..n).find(|&i| !(self.lower[i] <= self.upper[i])) {
            return Err(Error::Config(format!("empty box for variable {i}")));
        }
        Ok(())
    }
}

/// The integer-block subproblem of one outer iteration:
/// `argmin (c − λ)ᵀx + (ρ/2)‖u_prev − x‖²` over the box and `A_MIP x ≤ b_MIP`.
/// Terms independent of `x` are dropped.
pub fn build_mip_subproblem(
    inst: &ProblemInstance,
    u_prev: &[f64],
    lambda: &[f64],
    rho: f64,
) -> MilpModel {
    assert!(rho > 0.0, "rho must be positive");
    let p = inst.p();
    MilpModel {
        q_diag: vec![rho; p],
        lin: (0..p).map(|i| inst.c[i] - lambda[i] - rho * u_prev[i]).collect(),
        a: inst.a_mip.clone(),
        b: inst.b_mip.clone(),
        lower: inst.lower.clone(),
        upper: inst.upper.clone(),
        integer: vec![true; p],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{InstanceMeta, NnModel};

    fn instance(c: Vec<f64>, lower: Vec<f64>, upper: Vec<f64>) -> ProblemInstance {
        let p = c.len();
        ProblemInstance {
            meta: InstanceMeta::default(),
            c,
            d: vec![0.0; p],
            a_mip: vec![],
            b_mip: vec![],
            a_nn: vec![],
            b_nn: vec![],
            lower,
            upper,
            integrality: vec![true; p],
            network: NnModel::identity(p),
        }
    }

    #[test]
    fn two_point_comparison() {
        let inst = instance(vec![0.0], vec![0.0], vec![1.0]);
        let m = build_mip_subproblem(&inst, &[0.4], &[0.0], 10.0);
        // full objective: (ρ/2)(0.4 − x)²: 0.8 at x=0, 1.8 at x=1
        let sol = solve_milp(&m, 1e-6, 100_000).unwrap();
        assert_eq!(sol.z, vec![0.0]);
        let konst = 0.5 * 10.0 * 0.16;
        assert!((sol.value + konst - 0.8).abs() < 1e-9);
    }

    #[test]
    fn cancelled_cost_matches_integer_u() {
        let inst = instance(vec![2.0, -1.5, 0.7], vec![0.0; 3], vec![3.0; 3]);
        let u = [2.0, 0.0, 3.0];
        let m = build_mip_subproblem(&inst, &u, &inst.c, 10.0);
        let sol = solve_milp(&m, 1e-6, 100_000).unwrap();
        assert_eq!(sol.z, u.to_vec());
    }
}
