//! Exact MILP compilation of a ReLU network and of a whole instance.
//!
//! Pre-activations and identity outputs are kept as affine expressions over
//! earlier variables instead of separate equality-constrained variables.
//! Each unstable hidden unit gets one continuous post-activation `s` and one
//! binary `y` (1 = active) with
//!
//! ```txt
//!   h − s ≤ 0,   s − h − L·y ≤ −L,   s − U·y ≤ 0,   0 ≤ s ≤ U
//! ```
//!
//! where `[L, U]` is the interval bound on `h`. Units with `U ≤ 0` are
//! dropped (`s = 0`) and units with `L ≥ 0` pass `h` through.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::milp::{solve_milp_with, BnbOptions, MilpModel, MilpStatus};
use crate::model::{Activation, NnModel, ProblemInstance, SolveReport};
use crate::nn::interval_propagate;

/// `constant + Σ coef·z[idx]`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Affine {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl Affine {
    pub fn var(idx: usize) -> Self {
        Self {
            terms: vec![(idx, 1.0)],
            constant: 0.0,
        }
    }

    pub fn eval(&self, z: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(i, a)| a * z[i]).sum::<f64>()
    }

    /// `Σ w_k · exprs[k] + bias`, merging repeated indices.
    fn combine(weights: &[f64], exprs: &[Affine], bias: f64) -> Self {
        let mut terms: Vec<(usize, f64)> = Vec::new();
        let mut constant = bias;
        for (w, e) in weights.iter().zip(exprs) {
            if *w == 0.0 {
                continue;
            }
            constant += w * e.constant;
            for &(i, a) in &e.terms {
                terms.push((i, w * a));
            }
        }
        terms.sort_by_key(|t| t.0);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(terms.len());
        for (i, a) in terms {
            match merged.last_mut() {
                Some(last) if last.0 == i => last.1 += a,
                _ => merged.push((i, a)),
            }
        }
        merged.retain(|t| t.1 != 0.0);
        Self {
            terms: merged,
            constant,
        }
    }

    /// Dense coefficient row of width `n`.
    pub fn dense(&self, n: usize) -> Vec<f64> {
        let mut row = vec![0.0; n];
        for &(i, a) in &self.terms {
            row[i] += a;
        }
        row
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EncodingStats {
    pub num_vars: usize,
    pub num_binaries: usize,
    pub num_rows: usize,
    /// Four per unstable unit, counting `s ≥ 0`.
    pub b1_rows: usize,
}

#[derive(Debug, Clone)]
pub struct EncodedNetwork {
    /// Variables `0..input_dim` are the (continuous) network inputs.
    pub milp: MilpModel,
    pub outputs: Vec<Affine>,
    pub binaries: Vec<usize>,
    pub b1_rows: usize,
}

fn check_box(lower: &[f64], upper: &[f64]) -> Result<()> {
    match (0..lower.len()).find(|&i| !lower[i].is_finite() || !upper[i].is_finite()) {
        Some(i) => Err(Error::UnboundedBox(i)),
        None => Ok(()),
    }
}

/// Appends the network to `milp`, reading inputs from `inputs`.
fn append_network(
    milp: &mut MilpModel,
    model: &NnModel,
    inputs: Vec<Affine>,
    lower: &[f64],
    upper: &[f64],
) -> (Vec<Affine>, Vec<usize>, usize) {
    let bounds = interval_propagate(model, lower, upper);
    let mut cur = inputs;
    let mut binaries = Vec::new();
    let mut b1_rows = 0;
    for (layer, (lo, hi)) in model.layers.iter().zip(&bounds.layers) {
        let pre: Vec<Affine> = layer
            .weights
            .iter()
            .zip(&layer.bias)
            .map(|(w, b)| Affine::combine(w, &cur, *b))
            .collect();
        if layer.activation == Activation::Identity {
            cur = pre;
            continue;
        }
        let mut next = Vec::with_capacity(pre.len());
        for (k, h) in pre.into_iter().enumerate() {
            let (l, u) = (lo[k], hi[k]);
            if u <= 0.0 {
                next.push(Affine::default());
            } else if l >= 0.0 {
                next.push(h);
            } else {
                let s = milp.add_var(0.0, u, false);
                let y = milp.add_var(0.0, 1.0, true);
                let n = milp.n();
                // h − s ≤ 0
                let mut row = h.dense(n);
                row[s] -= 1.0;
                milp.add_row(row, -h.constant);
                // s − h − L·y ≤ −L
                let mut row: Vec<f64> = h.dense(n).iter().map(|v| -v).collect();
                row[s] += 1.0;
                row[y] -= l;
                milp.add_row(row, -l + h.constant);
                // s − U·y ≤ 0
                let mut row = vec![0.0; n];
                row[s] = 1.0;
                row[y] = -u;
                milp.add_row(row, 0.0);
                binaries.push(y);
                b1_rows += 4;
                next.push(Affine::var(s));
            }
        }
        cur = next;
    }
    (cur, binaries, b1_rows)
}

/// Standalone network encoding over `[lower, upper]`.
pub fn encode_network(model: &NnModel, lower: &[f64], upper: &[f64]) -> Result<EncodedNetwork> {
    let p = model.input_dim();
    if lower.len() != p || upper.len() != p {
        return Err(Error::Dimension(format!(
            "input box has {} / {} entries, network expects {p}",
            lower.len(),
            upper.len()
        )));
    }
    check_box(lower, upper)?;
    let mut milp = MilpModel::linear(vec![0.0; p], lower.to_vec(), upper.to_vec());
    let inputs = (0..p).map(Affine::var).collect();
    let (outputs, binaries, b1_rows) = append_network(&mut milp, model, inputs, lower, upper);
    Ok(EncodedNetwork {
        milp,
        outputs,
        binaries,
        b1_rows,
    })
}

#[derive(Debug, Clone)]
pub struct EncodedInstance {
    /// Variables `0..p` are `x`.
    pub milp: MilpModel,
    pub outputs: Vec<Affine>,
    /// Add to the MILP value to get `cᵀx + dᵀf(x)`.
    pub objective_constant: f64,
    pub stats: EncodingStats,
}

pub fn encode_instance(inst: &ProblemInstance) -> Result<EncodedInstance> {
    let p = inst.p();
    check_box(&inst.lower, &inst.upper)?;
    let mut milp = MilpModel::linear(vec![0.0; p], inst.lower.clone(), inst.upper.clone());
    milp.integer = inst.integrality.clone();
    for (row, b) in inst.a_mip.iter().zip(&inst.b_mip) {
        milp.add_row(row.clone(), *b);
    }
    let inputs = (0..p).map(Affine::var).collect();
    let (outputs, binaries, b1_rows) =
        append_network(&mut milp, &inst.network, inputs, &inst.lower, &inst.upper);
    let n = milp.n();

    let xs: Vec<Affine> = (0..p).map(Affine::var).collect();
    for (row, b) in inst.a_nn.iter().zip(&inst.b_nn) {
        let mut exprs = xs.clone();
        exprs.extend(outputs.iter().cloned());
        let e = Affine::combine(row, &exprs, 0.0);
        milp.add_row(e.dense(n), b - e.constant);
    }
    let mut exprs = xs;
    exprs.extend(outputs.iter().cloned());
    let mut weights = inst.c.clone();
    weights.extend(inst.d.iter().copied());
    let obj = Affine::combine(&weights, &exprs, 0.0);
    milp.lin = obj.dense(n);

    let stats = EncodingStats {
        num_vars: n,
        num_binaries: binaries.len(),
        num_rows: milp.m(),
        b1_rows,
    };
    Ok(EncodedInstance {
        milp,
        outputs,
        objective_constant: obj.constant,
        stats,
    })
}

pub fn encoding_stats(inst: &ProblemInstance) -> Result<EncodingStats> {
    Ok(encode_instance(inst)?.stats)
}

#[derive(Debug, Clone)]
pub struct BigmOutcome {
    pub status: MilpStatus,
    /// Objective and feasibility are recomputed by a forward pass at the
    /// returned integer point.
    pub report: SolveReport,
    /// Objective value reported by the MILP itself.
    pub milp_value: f64,
}

pub fn solve_bigm(inst: &ProblemInstance, opts: &BnbOptions) -> Result<BigmOutcome> {
    let t0 = Instant::now();
    let enc = encode_instance(inst)?;
    let t_enc = t0.elapsed().as_secs_f64();
    let t1 = Instant::now();
    let sol = solve_milp_with(&enc.milp, opts)?;
    let t_milp = t1.elapsed().as_secs_f64();

    let mut report = SolveReport {
        method: "bigm".into(),
        objective: f64::INFINITY,
        nodes: sol.nodes,
        binaries: enc.stats.num_binaries,
        rows: enc.stats.num_rows,
        iterations: sol.nodes,
        converged: sol.status == MilpStatus::Optimal,
        ..Default::default()
    };
    report.phase_times.insert("encode".into(), t_enc);
    report.phase_times.insert("milp".into(), t_milp);
    if sol.z.is_empty() {
        report.notes.push(format!("{:?}", sol.status).to_lowercase());
    } else {
        let x: Vec<i64> = sol.z[..inst.p()].iter().map(|v| v.round() as i64).collect();
        report.u_final = x.iter().map(|&v| v as f64).collect();
        report.evaluate_at(inst, &x);
    }
    Ok(BigmOutcome {
        status: sol.status,
        milp_value: sol.value + enc.objective_constant,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::solve_milp;
    use crate::model::{InstanceMeta, Layer};
    use crate::nn::{eval, init_model};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn one_unit(bias: f64) -> NnModel {
        NnModel::new(vec![
            Layer::new(vec![vec![1.0]], vec![bias], Activation::Relu),
            Layer::new(vec![vec![1.0]], vec![0.0], Activation::Identity),
        ])
    }

    #[test]
    fn inactive_binary_forces_zero() {
        // h = u − 1 on u ∈ [0, 2] has interval [−1, 1].
        let enc = encode_network(&one_unit(-1.0), &[0.0], &[2.0]).unwrap();
        assert_eq!(enc.binaries.len(), 1);
        let y = enc.binaries[0];
        let s = y - 1;
        // Fix y = 0, maximise s, then maximise h = u − 1.
        let mut m = enc.milp.clone();
        m.lower[y] = 0.0;
        m.upper[y] = 0.0;
        m.lin[s] = -1.0;
        let sol = solve_milp(&m, 1e-9, 100).unwrap();
        assert!(sol.z[s].abs() < 1e-8);
        m.lin[s] = 0.0;
        m.lin[0] = -1.0;
        let sol = solve_milp(&m, 1e-9, 100).unwrap();
        assert!(sol.z[0] - 1.0 <= 1e-8, "h must be ≤ 0");
    }

    #[test]
    fn always_active_unit_has_no_binary() {
        // h = u + 0.2 on [0, 0.8] lies in [0.2, 1].
        let enc = encode_network(&one_unit(0.2), &[0.0], &[0.8]).unwrap();
        assert!(enc.binaries.is_empty());
        assert_eq!(enc.outputs[0].eval(&[0.5]), 0.7);
    }

    fn output_range(enc: &EncodedNetwork, x: &[f64], k: usize) -> (f64, f64) {
        let mut m = enc.milp.clone();
        for (j, &v) in x.iter().enumerate() {
            m.lower[j] = v;
            m.upper[j] = v;
        }
        let n = m.n();
        let mut ext = [0.0; 2];
        for (slot, sign) in [(0, 1.0), (1, -1.0)] {
            m.lin = enc.outputs[k].dense(n).iter().map(|v| sign * v).collect();
            let sol = solve_milp(&m, 1e-12, 10_000).unwrap();
            assert_eq!(sol.status, MilpStatus::Optimal);
            ext[slot] = enc.outputs[k].eval(&sol.z);
        }
        (ext[0], ext[1])
    }

    #[test]
    fn fixed_inputs_force_forward_output() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let model = init_model(&[2, 3, 1], &mut rng);
        let enc = encode_network(&model, &[0.0; 2], &[3.0; 2]).unwrap();
        for a in 0..4 {
            for b in 0..4 {
                let x = [a as f64, b as f64];
                let want = eval(&model, &x)[0];
                let (lo, hi) = output_range(&enc, &x, 0);
                assert!((lo - want).abs() < 1e-7 && (hi - want).abs() < 1e-7, "{x:?}");
            }
        }
    }

    #[test]
    fn stats_count_unstable_units() {
        let model = NnModel::new(vec![
            Layer::new(
                vec![vec![1.0], vec![-1.0], vec![2.0]],
                vec![-1.0, 1.0, -3.0],
                Activation::Relu,
            ),
            Layer::new(vec![vec![1.0, 1.0, 1.0]], vec![0.0], Activation::Identity),
        ]);
        let inst = ProblemInstance {
            meta: InstanceMeta::default(),
            c: vec![0.0],
            d: vec![1.0],
            a_mip: vec![],
            b_mip: vec![],
            a_nn: vec![],
            b_nn: vec![],
            lower: vec![0.0],
            upper: vec![2.0],
            integrality: vec![true],
            network: model.clone(),
        };
        let st = encoding_stats(&inst).unwrap();
        assert_eq!(st.num_binaries, 3);
        assert_eq!(st.b1_rows, 12);
        assert_eq!(st.num_rows, 9);
        assert_eq!(st.num_vars, 1 + 6);

        let mut stable = inst.clone();
        stable.lower = vec![1.5];
        stable.upper = vec![2.0];
        stable.network.layers[0].bias = vec![0.0, -3.0, 0.0];
        assert_eq!(encoding_stats(&stable).unwrap().num_binaries, 0);
    }

    #[test]
    fn identity_network_passes_through() {
        let inst = ProblemInstance {
            meta: InstanceMeta::default(),
            c: vec![1.0, -2.0],
            d: vec![0.0, 0.0],
            a_mip: vec![vec![1.0, 1.0]],
            b_mip: vec![3.0],
            a_nn: vec![],
            b_nn: vec![],
            lower: vec![0.0; 2],
            upper: vec![3.0; 2],
            integrality: vec![true; 2],
            network: NnModel::identity(2),
        };
        let enc = encode_instance(&inst).unwrap();
        assert_eq!(enc.milp.n(), 2);
        assert_eq!(enc.milp.a, inst.a_mip);
        assert_eq!(enc.outputs[1], Affine::var(1));
    }

    #[test]
    fn infeasible_mip_block() {
        let mut inst = ProblemInstance {
            meta: InstanceMeta::default(),
            c: vec![1.0],
            d: vec![1.0],
            a_mip: vec![vec![1.0]],
            b_mip: vec![-1.0],
            a_nn: vec![],
            b_nn: vec![],
            lower: vec![0.0],
            upper: vec![3.0],
            integrality: vec![true],
            network: one_unit(-1.0),
        };
        let out = solve_bigm(&inst, &BnbOptions::default()).unwrap();
        assert_eq!(out.status, MilpStatus::Infeasible);
        inst.upper[0] = f64::INFINITY;
        assert!(matches!(encode_instance(&inst), Err(Error::UnboundedBox(0))));
    }
}
