//! Problem data: the network, the NN-embedded MIP instance, its `.nnmip`
//! text form, and the solve report shared by every method.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
}

/// One dense layer. `weights` has one row per output unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn new(weights: Vec<Vec<f64>>, bias: Vec<f64>, activation: Activation) -> Self {
        Self {
            weights,
            bias,
            activation,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    pub fn out_dim(&self) -> usize {
        self.weights.len()
    }
}

/// Feedforward network `f_θ`. The last layer must be `Identity`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NnModel {
    pub layers: Vec<Layer>,
}

impl NnModel {
    pub fn new(layers: Vec<Layer>) -> Self {
        Self { layers }
    }

    /// Single identity layer `f(u) = u` of width `dim`.
    pub fn identity(dim: usize) -> Self {
        let weights = (0..dim)
            .map(|i| (0..dim).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        Self::new(vec![Layer::new(weights, vec![0.0; dim], Activation::Identity)])
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, Layer::in_dim)
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, Layer::out_dim)
    }

    /// Number of parameters `P = Σ (out·in + out)`.
    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.out_dim() * l.in_dim() + l.out_dim())
            .sum()
    }

    /// Widths of the hidden (non-final) layers.
    pub fn hidden_widths(&self) -> Vec<usize> {
        let n = self.layers.len();
        self.layers
            .iter()
            .take(n.saturating_sub(1))
            .map(Layer::out_dim)
            .collect()
    }

    pub fn is_affine(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.activation == Activation::Identity)
    }

    fn collect_violations(&self, prefix: &str, out: &mut Vec<Violation>) {
        if self.layers.is_empty() {
            out.push(Violation::new(prefix, "network has no layers"));
            return;
        }
        for (k, layer) in self.layers.iter().enumerate() {
            let path = format!("{prefix}.layers[{k}]");
            if layer.weights.is_empty() {
                out.push(Violation::new(&path, "layer has no output units"));
                continue;
            }
            let width = layer.in_dim();
            if width == 0 {
                out.push(Violation::new(&path, "layer has no inputs"));
            }
            for (r, row) in layer.weights.iter().enumerate() {
                if row.len() != width {
                    out.push(Violation::new(
                        &format!("{path}.weights[{r}]"),
                        "ragged weight row",
                    ));
                }
            }
            if layer.bias.len() != layer.out_dim() {
                out.push(Violation::new(&format!("{path}.bias"), "bias length mismatch"));
            }
            if k > 0 {
                let prev = self.layers[k - 1].out_dim();
                if prev != width {
                    out.push(Violation::new(
                        &path,
                        &format!("layer chain mismatch: previous out {prev}, this in {width}"),
                    ));
                }
            }
        }
        if self.layers.last().map(|l| l.activation) != Some(Activation::Identity) {
            out.push(Violation::new(prefix, "final layer must be identity"));
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    #[default]
    Minimize,
    Maximize,
}

impl Sense {
    pub fn sign(self) -> f64 {
        match self {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct InstanceMeta {
    pub name: String,
    pub sense: Sense,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Free-form declarations (indicator rows, discretisation steps, ...).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    /// A known optimal point when the generator can compute one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub known_optimum: Option<Vec<f64>>,
}

/// `min cᵀx + dᵀf(x)` s.t. `A_MIP x ≤ b_MIP`, `A_NN [x; f(x)] ≤ b_NN`,
/// `lower ≤ x ≤ upper`, `x` integer.
///
/// `c` and `d` are always stored in minimisation form; maximisation
/// instances are negated on load and restored on save.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    pub meta: InstanceMeta,
    pub c: Vec<f64>,
    pub d: Vec<f64>,
    pub a_mip: Vec<Vec<f64>>,
    pub b_mip: Vec<f64>,
    pub a_nn: Vec<Vec<f64>>,
    pub b_nn: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub integrality: Vec<bool>,
    pub network: NnModel,
}

impl ProblemInstance {
    pub fn p(&self) -> usize {
        self.c.len()
    }

    pub fn q(&self) -> usize {
        self.d.len()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| 0.5 * (l + u))
            .collect()
    }

    /// Objective in the original sense of the instance.
    pub fn sense_objective(&self, internal: f64) -> f64 {
        self.meta.sense.sign() * internal + 0.0
    }

    /// `cᵀx + dᵀf(x)`, minimisation form.
    pub fn objective_at(&self, x: &[f64]) -> f64 {
        let y = nn::eval(&self.network, x);
        dot(&self.c, x) + dot(&self.d, &y)
    }

    /// Max violation of `A_MIP x ≤ b_MIP` (0 when satisfied or empty).
    pub fn mip_violation(&self, x: &[f64]) -> f64 {
        max_row_violation(&self.a_mip, &self.b_mip, x)
    }

    /// Max violation of `A_NN [u; y] ≤ b_NN`.
    pub fn nn_violation(&self, u: &[f64], y: &[f64]) -> f64 {
        let stacked: Vec<f64> = u.iter().chain(y).copied().collect();
        max_row_violation(&self.a_nn, &self.b_nn, &stacked)
    }

    /// `nn_violation` at `u` with `y = f(u)`.
    pub fn nn_violation_at(&self, u: &[f64]) -> f64 {
        let y = nn::eval(&self.network, u);
        self.nn_violation(u, &y)
    }

    pub fn box_violation(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(v, (l, u))| (l - v).max(v - u).max(0.0))
            .fold(0.0, f64::max)
    }

    /// True when the `i`-th `A_NN` row has no coefficient on `f(u)`.
    pub fn nn_row_is_u_only(&self, i: usize) -> bool {
        self.a_nn[i][self.p()..].iter().all(|&a| a == 0.0)
    }

    pub fn has_coupled_rows(&self) -> bool {
        (0..self.a_nn.len()).any(|i| !self.nn_row_is_u_only(i))
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn max_row_violation(a: &[Vec<f64>], b: &[f64], z: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(row, rhs)| dot(row, z) - rhs)
        .fold(0.0, f64::max)
}

/// One failed invariant, located by a dotted index path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl Violation {
    fn new(path: &str, message: &str) -> Self {
        Self {
            path: path.to_string(),
            message: message.to_string(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

/// Checks every dimension, box and activation invariant. An empty list
/// means the instance is valid.
pub fn validate(inst: &ProblemInstance) -> Vec<Violation> {
    let mut out = Vec::new();
    let p = inst.p();
    let q = inst.q();
    if p == 0 {
        out.push(Violation::new("mip.c", "no decision variables"));
    }
    for (name, len) in [
        ("mip.lower", inst.lower.len()),
        ("mip.upper", inst.upper.len()),
        ("mip.integer", inst.integrality.len()),
    ] {
        if len != p {
            out.push(Violation::new(name, &format!("length {len}, expected {p}")));
        }
    }
    check_block(&mut out, "mip", "a_mip", &inst.a_mip, &inst.b_mip, p);
    check_block(&mut out, "nn_block", "a_nn", &inst.a_nn, &inst.b_nn, p + q);

    for (i, (l, u)) in inst.lower.iter().zip(&inst.upper).enumerate() {
        if !l.is_finite() || !u.is_finite() {
            out.push(Violation::new(&format!("mip.bounds[{i}]"), "unbounded variable"));
        } else if l > u {
            out.push(Violation::new(&format!("mip.bounds[{i}]"), "empty box (lower > upper)"));
        }
    }
    for (i, flag) in inst.integrality.iter().enumerate() {
        if !flag {
            out.push(Violation::new(
                &format!("mip.integer[{i}]"),
                "continuous x-variables are not supported",
            ));
        }
    }

    inst.network.collect_violations("network", &mut out);
    if !inst.network.layers.is_empty() {
        if inst.network.input_dim() != p {
            out.push(Violation::new(
                "network",
                &format!("input dim {} != p = {p}", inst.network.input_dim()),
            ));
        }
        if inst.network.output_dim() != q {
            out.push(Violation::new(
                "network",
                &format!("output dim {} != q = {q}", inst.network.output_dim()),
            ));
        }
    }
    if let Err(Error::NonFinite(path)) = check_finite(inst) {
        out.push(Violation::new(&path, "non-finite value"));
    }
    out
}

fn check_block(
    out: &mut Vec<Violation>,
    section: &str,
    name: &str,
    a: &[Vec<f64>],
    b: &[f64],
    width: usize,
) {
    if a.len() != b.len() {
        out.push(Violation::new(
            &format!("{section}.b_{}", &name[2..]),
            &format!("{} rows but {} right-hand sides", a.len(), b.len()),
        ));
    }
    for (i, row) in a.iter().enumerate() {
        if row.len() != width {
            out.push(Violation::new(
                &format!("{section}.{name}[{i}]"),
                &format!("{name} width mismatch: {} != {width}", row.len()),
            ));
        }
    }
}

fn check_finite(inst: &ProblemInstance) -> Result<()> {
    fn vec(path: &str, v: &[f64]) -> Result<()> {
        match v.iter().position(|x| !x.is_finite()) {
            Some(i) => Err(Error::NonFinite(format!("{path}[{i}]"))),
            None => Ok(()),
        }
    }
    fn mat(path: &str, m: &[Vec<f64>]) -> Result<()> {
        for (i, row) in m.iter().enumerate() {
            vec(&format!("{path}[{i}]"), row)?;
        }
        Ok(())
    }
    vec("mip.c", &inst.c)?;
    mat("mip.a_mip", &inst.a_mip)?;
    vec("mip.b_mip", &inst.b_mip)?;
    vec("nn_block.d", &inst.d)?;
    mat("nn_block.a_nn", &inst.a_nn)?;
    vec("nn_block.b_nn", &inst.b_nn)?;
    for (k, layer) in inst.network.layers.iter().enumerate() {
        mat(&format!("network.layers[{k}].weights"), &layer.weights)?;
        vec(&format!("network.layers[{k}].bias"), &layer.bias)?;
    }
    // Infinite bounds are reported as "unbounded variable" by validate.
    for (name, v) in [("mip.lower", &inst.lower), ("mip.upper", &inst.upper)] {
        if let Some(i) = v.iter().position(|x| x.is_nan()) {
            return Err(Error::NonFinite(format!("{name}[{i}]")));
        }
    }
    if let Some(opt) = &inst.meta.known_optimum {
        vec("meta.known_optimum", opt)?;
    }
    Ok(())
}

// On-disk layout of a `.nnmip` document.

#[derive(Serialize, Deserialize)]
struct InstanceFile {
    meta: InstanceMeta,
    mip: MipSection,
    nn_block: NnSection,
    network: NnModel,
}

#[derive(Serialize, Deserialize)]
struct MipSection {
    c: Vec<f64>,
    a_mip: Vec<Vec<f64>>,
    b_mip: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    integer: Vec<bool>,
}

#[derive(Serialize, Deserialize)]
struct NnSection {
    d: Vec<f64>,
    a_nn: Vec<Vec<f64>>,
    b_nn: Vec<f64>,
}

fn signed(v: &[f64], sense: Sense) -> Vec<f64> {
    let s = sense.sign();
    v.iter().map(|x| s * x).collect()
}

/// Parses and validates a `.nnmip` document.
pub fn load_instance(text: &str) -> Result<ProblemInstance> {
    let file: InstanceFile = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let sense = file.meta.sense;
    let inst = ProblemInstance {
        c: signed(&file.mip.c, sense),
        d: signed(&file.nn_block.d, sense),
        a_mip: file.mip.a_mip,
        b_mip: file.mip.b_mip,
        a_nn: file.nn_block.a_nn,
        b_nn: file.nn_block.b_nn,
        lower: file.mip.lower,
        upper: file.mip.upper,
        integrality: file.mip.integer,
        network: file.network,
        meta: file.meta,
    };
    check_finite(&inst)?;
    let violations = validate(&inst);
    if !violations.is_empty() {
        return Err(Error::Invalid(violations));
    }
    Ok(inst)
}

/// Serialises an instance. Floats are written in shortest round-trip
/// form, so `load_instance(save_instance(i))` reproduces every bit.
pub fn save_instance(inst: &ProblemInstance) -> Result<String> {
    check_finite(inst)?;
    let sense = inst.meta.sense;
    let file = InstanceFile {
        meta: inst.meta.clone(),
        mip: MipSection {
            c: signed(&inst.c, sense),
            a_mip: inst.a_mip.clone(),
            b_mip: inst.b_mip.clone(),
            lower: inst.lower.clone(),
            upper: inst.upper.clone(),
            integer: inst.integrality.clone(),
        },
        nn_block: NnSection {
            d: signed(&inst.d, sense),
            a_nn: inst.a_nn.clone(),
            b_nn: inst.b_nn.clone(),
        },
        network: inst.network.clone(),
    };
    toml::to_string(&file).map_err(|e| Error::Parse(e.to_string()))
}

/// Standalone network dump (the `network` section on its own).
pub fn save_network(model: &NnModel) -> Result<String> {
    toml::to_string(model).map_err(|e| Error::Parse(e.to_string()))
}

pub fn load_network(text: &str) -> Result<NnModel> {
    let model: NnModel = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let mut v = Vec::new();
    model.collect_violations("network", &mut v);
    if !v.is_empty() {
        return Err(Error::Invalid(v));
    }
    Ok(model)
}

/// Outcome of one solve, in minimisation form. Feasibility figures are
/// always measured at the integer point `x_final`.
#[derive(Debug, Clone, Default)]
pub struct SolveReport {
    pub method: String,
    pub objective: f64,
    pub x_final: Vec<i64>,
    pub u_final: Vec<f64>,
    /// `‖u_final − x_final‖_∞`.
    pub primal_residual: f64,
    pub mip_feasibility: f64,
    pub nn_feasibility: f64,
    pub iterations: usize,
    pub converged: bool,
    pub phase_times: BTreeMap<String, f64>,
    pub nodes: usize,
    pub binaries: usize,
    pub rows: usize,
    pub notes: Vec<String>,
}

impl SolveReport {
    /// Fills objective and feasibility fields from raw instance data.
    pub fn evaluate_at(&mut self, inst: &ProblemInstance, x: &[i64]) {
        let xf: Vec<f64> = x.iter().map(|&v| v as f64).collect();
        let y = nn::eval(&inst.network, &xf);
        self.x_final = x.to_vec();
        self.objective = dot(&inst.c, &xf) + dot(&inst.d, &y);
        self.mip_feasibility = inst.mip_violation(&xf).max(inst.box_violation(&xf));
        self.nn_feasibility = inst.nn_violation(&xf, &y);
        if self.u_final.len() == xf.len() {
            self.primal_residual = self
                .u_final
                .iter()
                .zip(&xf)
                .map(|(u, x)| (u - x).abs())
                .fold(0.0, f64::max);
        }
    }

    pub fn time(&self, phase: &str) -> f64 {
        self.phase_times.get(phase).copied().unwrap_or(0.0)
    }

    pub fn is_feasible(&self, tol: f64) -> bool {
        self.mip_feasibility <= tol && self.nn_feasibility <= tol
    }
}
