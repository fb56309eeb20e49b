//! Method dispatch, CSV reporting and the desk-scale experiment sweeps.

use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use log::warn;
use rayon::prelude::*;
use serde::Serialize;

use crate::benchgen::{
    gen_relu_surrogate, gen_smooth_surrogate, gen_tree_planting, gen_water_potability, TreeParams,
    WaterParams,
};
use crate::bigm::solve_bigm;
use crate::dd::{dd_solve, DdConfig, TraceRow};
use crate::error::{Error, Result};
use crate::milp::BnbOptions;
use crate::model::{Activation, InstanceMeta, Layer, NnModel, ProblemInstance, Sense, SolveReport};
use crate::ssg::{ssg_solve, SsgConfig};
use crate::subsolver::{select, SubsolverKind};

pub const DEFAULT_SEEDS: [u64; 5] = [42, 123, 456, 789, 1024];

/// Columns excluded from determinism comparisons.
pub const TIME_COLUMNS: [&str; 3] = ["total_s", "mip_s", "nn_s"];

/// Desk-scale limits applied to experiment parameters.
#[derive(Debug, Clone, Copy)]
pub struct Caps {
    pub max_p: usize,
    pub max_hidden: usize,
    pub max_n: usize,
}

impl Default for Caps {
    fn default() -> Self {
        Self {
            max_p: 8,
            max_hidden: 32,
            max_n: 16,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Dd,
    Bigm,
    Ssg,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Dd => "dd",
            Method::Bigm => "bigm",
            Method::Ssg => "ssg",
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dd" => Ok(Method::Dd),
            "bigm" => Ok(Method::Bigm),
            "ssg" => Ok(Method::Ssg),
            other => Err(Error::Config(format!("unknown method `{other}` (expected dd, bigm or ssg)"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub method: Method,
    pub subsolver: SubsolverKind,
    pub dd: DdConfig,
    pub ssg: SsgConfig,
    pub bnb: BnbOptions,
}

impl RunConfig {
    pub fn new(method: Method) -> Self {
        Self {
            method,
            subsolver: SubsolverKind::Auto,
            dd: DdConfig::default(),
            ssg: SsgConfig::default(),
            bnb: BnbOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MethodRun {
    pub report: SolveReport,
    /// Subsolver name for DD runs, empty otherwise.
    pub subsolver: String,
    pub trace: Option<Vec<TraceRow>>,
}

pub fn run_method(inst: &ProblemInstance, cfg: &RunConfig) -> Result<MethodRun> {
    match cfg.method {
        Method::Dd => {
            let sub = select(cfg.subsolver, inst, cfg.dd.eta);
            let run = dd_solve(inst, &cfg.dd, sub.as_ref())?;
            Ok(MethodRun {
                report: run.report,
                subsolver: sub.name().to_string(),
                trace: Some(run.trace),
            })
        }
        Method::Bigm => Ok(MethodRun {
            report: solve_bigm(inst, &cfg.bnb)?.report,
            subsolver: String::new(),
            trace: None,
        }),
        Method::Ssg => Ok(MethodRun {
            report: ssg_solve(inst, &cfg.ssg)?.report,
            subsolver: String::new(),
            trace: None,
        }),
    }
}

/// One line of the report CSV. Objectives are in the instance's own sense.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub instance: String,
    pub method: String,
    pub subsolver: String,
    pub seed: u64,
    pub objective: f64,
    pub converged: bool,
    pub iterations: usize,
    pub residual_inf: f64,
    pub mip_feas: f64,
    pub nn_feas: f64,
    pub total_s: f64,
    pub mip_s: f64,
    pub nn_s: f64,
    pub nodes: usize,
    pub binaries: usize,
    pub rows: usize,
}

impl ReportRow {
    pub fn new(inst: &ProblemInstance, seed: u64, subsolver: &str, r: &SolveReport) -> Self {
        let total = r.phase_times.get("total").copied().unwrap_or_else(|| r.phase_times.values().sum());
        Self {
            instance: inst.meta.name.clone(),
            method: r.method.clone(),
            subsolver: subsolver.to_string(),
            seed,
            objective: inst.sense_objective(r.objective),
            converged: r.converged,
            iterations: r.iterations,
            residual_inf: r.primal_residual,
            mip_feas: r.mip_feasibility,
            nn_feas: r.nn_feasibility,
            total_s: total,
            mip_s: r.time("mip"),
            nn_s: r.time("nn"),
            nodes: r.nodes,
            binaries: r.binaries,
            rows: r.rows,
        }
    }
}

pub fn write_csv<T: Serialize, W: Write>(rows: &[T], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Drops the named columns from CSV text, for determinism checks.
pub fn strip_columns(text: &str, drop: &[&str]) -> Result<String> {
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    let headers = rd.headers()?.clone();
    let keep: Vec<usize> = (0..headers.len()).filter(|&i| !drop.contains(&&headers[i])).collect();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(keep.iter().map(|&i| &headers[i]))?;
    for rec in rd.records() {
        let rec = rec?;
        w.write_record(keep.iter().map(|&i| &rec[i]))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv writer emits utf-8"))
}

/// Maps `f` over `cells` on at most `jobs` threads; output order follows input.
pub fn par_map<T: Sync, R: Send>(cells: &[T], jobs: usize, f: impl Fn(&T) -> R + Sync) -> Result<Vec<R>> {
    if jobs <= 1 {
        return Ok(cells.iter().map(f).collect());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(|| cells.par_iter().map(|c| f(c)).collect()))
}

fn check_seeds(seeds: &[u64]) -> Result<()> {
    if seeds.is_empty() {
        return Err(Error::Config("seed list is empty".into()));
    }
    Ok(())
}

/// Exhaustive search over the integer box; `None` if infeasible.
pub fn brute_force(inst: &ProblemInstance, max_points: usize) -> Result<Option<(Vec<f64>, f64)>> {
    let p = inst.p();
    let mut count = 1usize;
    for i in 0..p {
        let w = (inst.upper[i] - inst.lower[i]).floor() as usize + 1;
        count = count.saturating_mul(w);
    }
    if count > max_points {
        return Err(Error::Config(format!("box has {count} points, limit {max_points}")));
    }
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut x: Vec<f64> = inst.lower.iter().map(|v| v.ceil()).collect();
    loop {
        let y = crate::nn::eval(&inst.network, &x);
        if inst.mip_violation(&x) <= 1e-9 && inst.nn_violation(&x, &y) <= 1e-9 {
            let v = inst.objective_at(&x);
            if best.as_ref().map_or(true, |b| v < b.1) {
                best = Some((x.clone(), v));
            }
        }
        let mut i = 0;
        while i < p {
            x[i] += 1.0;
            if x[i] <= inst.upper[i] {
                break;
            }
            x[i] = inst.lower[i].ceil();
            i += 1;
        }
        if i == p {
            return Ok(best);
        }
    }
}

// ---------------------------------------------------------------------------
// Exactness oracle suite

/// Small instances for the three-way exactness check: affine surrogates and
/// sign-dominated ReLU surrogates with `p ≤ 4`, box width ≤ 4 and at most
/// two hidden layers of width ≤ 8.
pub fn oracle_suite(count: usize, base_seed: u64) -> Result<Vec<(u64, ProblemInstance)>> {
    const ARCHS: [&[usize]; 4] = [&[4], &[8], &[4, 4], &[4, 8]];
    (0..count as u64)
        .map(|i| {
            let seed = base_seed + i;
            let p = 2 + (i % 3) as usize;
            let inst = if i % 2 == 0 {
                gen_smooth_surrogate(p, seed)?
            } else {
                gen_relu_surrogate(p, ARCHS[(i / 2 % 4) as usize], seed)?
            };
            Ok((seed, inst))
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleRow {
    pub instance: String,
    pub seed: u64,
    pub enumeration: f64,
    pub bigm: f64,
    pub dd: f64,
    pub dd_converged: bool,
    pub dd_iterations: usize,
    pub agree: bool,
    pub total_s: f64,
}

pub fn run_oracle_suite(suite: &[(u64, ProblemInstance)], jobs: usize, tol: f64) -> Result<Vec<OracleRow>> {
    let rows = par_map(suite, jobs, |(seed, inst)| -> Result<OracleRow> {
        let t = Instant::now();
        let best = brute_force(inst, 1 << 20)?
            .ok_or_else(|| Error::Config(format!("{} has no feasible point", inst.meta.name)))?;
        let bigm = solve_bigm(inst, &BnbOptions::default())?.report;
        let sub = select(SubsolverKind::Auto, inst, DdConfig::default().eta);
        let dd = dd_solve(inst, &DdConfig::default(), sub.as_ref())?.report;
        let agree = (bigm.objective - best.1).abs() <= tol && (dd.objective - best.1).abs() <= tol;
        Ok(OracleRow {
            instance: inst.meta.name.clone(),
            seed: *seed,
            enumeration: inst.sense_objective(best.1),
            bigm: inst.sense_objective(bigm.objective),
            dd: inst.sense_objective(dd.objective),
            dd_converged: dd.converged,
            dd_iterations: dd.iterations,
            agree,
            total_s: t.elapsed().as_secs_f64(),
        })
    })?;
    rows.into_iter().collect()
}

// ---------------------------------------------------------------------------
// E1: DD against Big-M on water-potability instances

#[derive(Debug, Clone)]
pub struct E1Config {
    pub archs: Vec<Vec<usize>>,
    pub ns: Vec<usize>,
    pub feature_dim: usize,
    /// Adjustment units per water variable.
    pub levels: usize,
    pub seeds: Vec<u64>,
    pub jobs: usize,
    pub caps: Caps,
    pub bnb: BnbOptions,
    pub dd: DdConfig,
}

impl Default for E1Config {
    fn default() -> Self {
        Self {
            archs: vec![vec![4, 4]],
            ns: vec![2, 4],
            feature_dim: 2,
            levels: 2,
            seeds: DEFAULT_SEEDS.to_vec(),
            jobs: 1,
            caps: Caps::default(),
            bnb: BnbOptions {
                node_limit: 5_000,
                ..Default::default()
            },
            dd: DdConfig {
                time_budget_s: 60.0,
                ..Default::default()
            },
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct E1Row {
    pub arch: String,
    pub n: usize,
    pub seed: u64,
    pub dd_objective: f64,
    pub bigm_objective: f64,
    pub objective_ratio: f64,
    pub dd_converged: bool,
    pub bigm_optimal: bool,
    pub dd_s: f64,
    pub bigm_s: f64,
    pub time_ratio: f64,
    pub status: String,
}

fn arch_label(arch: &[usize]) -> String {
    arch.iter().map(|w| w.to_string()).collect::<Vec<_>>().join("x")
}

fn check_arch(arch: &[usize], caps: &Caps) -> Result<()> {
    if arch.is_empty() || arch.iter().any(|&w| w == 0 || w > caps.max_hidden) {
        return Err(Error::Config(format!(
            "hidden widths {arch:?} must be in 1..={}",
            caps.max_hidden
        )));
    }
    Ok(())
}

fn ratio(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        if a == 0.0 {
            1.0
        } else {
            f64::NAN
        }
    } else {
        a / b
    }
}

pub fn experiment_e1(cfg: &E1Config) -> Result<Vec<E1Row>> {
    check_seeds(&cfg.seeds)?;
    for arch in &cfg.archs {
        check_arch(arch, &cfg.caps)?;
    }
    if let Some(n) = cfg.ns.iter().find(|&&n| n == 0 || n > cfg.caps.max_n) {
        return Err(Error::Config(format!("n = {n} outside 1..={}", cfg.caps.max_n)));
    }
    let mut cells = Vec::new();
    for arch in &cfg.archs {
        for &n in &cfg.ns {
            for &seed in &cfg.seeds {
                cells.push((arch.clone(), n, seed));
            }
        }
    }
    par_map(&cells, cfg.jobs, |(arch, n, seed)| {
        let params = WaterParams {
            n: *n,
            feature_dim: cfg.feature_dim,
            budgets_up: vec![2.0; cfg.feature_dim],
            budgets_down: vec![2.0; cfg.feature_dim],
            arch: arch.clone(),
            levels: cfg.levels,
            seed: *seed,
            ..Default::default()
        };
        let mut row = E1Row {
            arch: arch_label(arch),
            n: *n,
            seed: *seed,
            dd_objective: f64::NAN,
            bigm_objective: f64::NAN,
            objective_ratio: f64::NAN,
            dd_converged: false,
            bigm_optimal: false,
            dd_s: f64::NAN,
            bigm_s: f64::NAN,
            time_ratio: f64::NAN,
            status: "ok".into(),
        };
        let inst = match gen_water_potability(&params) {
            Ok(i) => i,
            Err(e) => {
                row.status = format!("generation: {e}");
                return row;
            }
        };
        let t = Instant::now();
        let bigm = solve_bigm(&inst, &cfg.bnb);
        row.bigm_s = t.elapsed().as_secs_f64();
        let t = Instant::now();
        let sub = select(SubsolverKind::Pgd, &inst, cfg.dd.eta);
        let dd = dd_solve(&inst, &cfg.dd, sub.as_ref());
        row.dd_s = t.elapsed().as_secs_f64();
        row.time_ratio = row.dd_s / row.bigm_s;
        match (&bigm, &dd) {
            (Ok(b), Ok(d)) => {
                row.bigm_optimal = b.status == crate::milp::MilpStatus::Optimal;
                row.dd_converged = d.report.converged;
                row.bigm_objective = inst.sense_objective(b.report.objective);
                row.dd_objective = inst.sense_objective(d.report.objective);
                if row.bigm_optimal {
                    row.objective_ratio = ratio(row.dd_objective, row.bigm_objective);
                }
                if !row.bigm_optimal {
                    row.status = "bigm_node_limit".into();
                } else if d.report.objective < b.report.objective - 1e-6 && d.report.is_feasible(1e-6) {
                    warn!("{}: dd beat the exact optimum", inst.meta.name);
                    row.status = "exactness_gate_violation".into();
                }
            }
            (Err(e), _) => row.status = format!("bigm error: {e}"),
            (_, Err(e)) => row.status = format!("dd error: {e}"),
        }
        row
    })
}

// ---------------------------------------------------------------------------
// E2: per-iteration cost against network size

#[derive(Debug, Clone)]
pub struct E2Config {
    /// Target parameter counts.
    pub sizes: Vec<usize>,
    /// Network input dimension, which is also the MIP size.
    pub p: usize,
    pub width: usize,
    /// Timed repetitions per (size, seed); the median is reported.
    pub iterations: usize,
    pub seeds: Vec<u64>,
    pub caps: Caps,
}

impl Default for E2Config {
    fn default() -> Self {
        Self {
            sizes: vec![1_000, 10_000, 100_000],
            p: 4,
            width: 32,
            iterations: 7,
            seeds: DEFAULT_SEEDS.to_vec(),
            caps: Caps::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct E2Row {
    pub target_params: usize,
    pub params: usize,
    pub depth: usize,
    pub seed: u64,
    pub nn_iter_s: f64,
    pub mip_iter_s: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct E2Summary {
    /// Least-squares slope of log(nn time) on log(params), per-size medians.
    pub slope: f64,
    /// `(max − min) / mean` of the per-size median MIP times.
    pub mip_variation: f64,
}

/// Deep width-`width` ReLU stack over `p` inputs with roughly `target`
/// parameters and a tiny output weight, so the MIP block is the same
/// problem at every size.
pub fn scaling_instance(p: usize, width: usize, target: usize, seed: u64) -> Result<ProblemInstance> {
    use rand::{Rng, SeedableRng};
    let first = p * width + width;
    let per_layer = width * width + width;
    let out = width + 1;
    let extra = target.saturating_sub(first + out) as f64 / per_layer as f64;
    let depth = 1 + extra.round() as usize;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut layers = Vec::with_capacity(depth + 1);
    let mut fan_in = p;
    for _ in 0..depth {
        let scale = (2.0 / fan_in as f64).sqrt();
        let w: Vec<Vec<f64>> = (0..width)
            .map(|_| (0..fan_in).map(|_| rng.random_range(-scale..scale)).collect())
            .collect();
        layers.push(Layer::new(w, vec![0.05; width], Activation::Relu));
        fan_in = width;
    }
    let w_out = vec![(0..width).map(|_| rng.random_range(-1.0..1.0)).collect()];
    layers.push(Layer::new(w_out, vec![0.0], Activation::Identity));
    let c: Vec<f64> = (0..p).map(|j| if j % 2 == 0 { 1.0 } else { -1.0 }).collect();
    Ok(ProblemInstance {
        meta: InstanceMeta {
            name: format!("scaling-p{p}-P{target}-s{seed}"),
            sense: Sense::Minimize,
            generator: Some("scaling".into()),
            seed: Some(seed),
            ..Default::default()
        },
        c,
        d: vec![1e-6],
        a_mip: vec![],
        b_mip: vec![],
        a_nn: vec![],
        b_nn: vec![],
        lower: vec![0.0; p],
        upper: vec![3.0; p],
        integrality: vec![true; p],
        network: NnModel::new(layers),
    })
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Least-squares slope of `y` on `x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Times one MIP solve and one PGD call per repetition from a fixed outer
/// state (`u = x = lower + 1`, `λ = −ρ`). The proximal minimiser then sits
/// one unit away, so PGD spends its whole budget, and every size solves the
/// same integer block. Runs serially.
pub fn experiment_e2(cfg: &E2Config) -> Result<(Vec<E2Row>, E2Summary)> {
    check_seeds(&cfg.seeds)?;
    if cfg.p == 0 || cfg.p > cfg.caps.max_p {
        return Err(Error::Config(format!("p = {} outside 1..={}", cfg.p, cfg.caps.max_p)));
    }
    check_arch(&[cfg.width], &cfg.caps)?;
    if cfg.sizes.len() < 2 || cfg.iterations == 0 {
        return Err(Error::Config("e2 needs at least two sizes and one iteration".into()));
    }
    let dd = DdConfig::default();
    let pgd = crate::subsolver::Pgd { eta: dd.eta };
    let mut rows = Vec::new();
    let (mut xs, mut ys, mut mips) = (Vec::new(), Vec::new(), Vec::new());
    for &target in &cfg.sizes {
        let (mut nn_t, mut mip_t) = (Vec::new(), Vec::new());
        let mut params = 0;
        for &seed in &cfg.seeds {
            let inst = scaling_instance(cfg.p, cfg.width, target, seed)?;
            params = inst.network.param_count();
            let x: Vec<f64> = inst.lower.iter().map(|l| l + 1.0).collect();
            let u = x.clone();
            let lambda = vec![-dd.rho0; cfg.p];
            let (mut nn, mut mip) = (Vec::new(), Vec::new());
            for _ in 0..cfg.iterations {
                let t = Instant::now();
                let model = crate::milp::build_mip_subproblem(&inst, &u, &lambda, dd.rho0);
                crate::milp::solve_milp_with(&model, &dd.bnb)?;
                mip.push(t.elapsed().as_secs_f64());
                let t = Instant::now();
                let req = crate::subsolver::SubsolverRequest {
                    instance: &inst,
                    x: &x,
                    lambda: &lambda,
                    rho: dd.rho0,
                    u_start: &u,
                    budget: dd.inner_steps,
                };
                crate::subsolver::NnSubsolver::solve(&pgd, &req)?;
                nn.push(t.elapsed().as_secs_f64());
            }
            let (nn_m, mip_m) = (median(&mut nn), median(&mut mip));
            rows.push(E2Row {
                target_params: target,
                params,
                depth: inst.network.layers.len() - 1,
                seed,
                nn_iter_s: nn_m,
                mip_iter_s: mip_m,
            });
            nn_t.push(nn_m);
            mip_t.push(mip_m);
        }
        xs.push((params as f64).ln());
        ys.push(median(&mut nn_t).ln());
        mips.push(median(&mut mip_t));
    }
    let mean = mips.iter().sum::<f64>() / mips.len() as f64;
    let spread = mips.iter().cloned().fold(f64::MIN, f64::max) - mips.iter().cloned().fold(f64::MAX, f64::min);
    Ok((
        rows,
        E2Summary {
            slope: fit_slope(&xs, &ys),
            mip_variation: spread / mean,
        },
    ))
}

// ---------------------------------------------------------------------------
// E3: dual updates against the single-step heuristic

#[derive(Debug, Clone)]
pub struct E3Config {
    pub instances: usize,
    pub seeds: Vec<u64>,
    pub jobs: usize,
}

impl Default for E3Config {
    fn default() -> Self {
        Self {
            instances: 20,
            seeds: DEFAULT_SEEDS.to_vec(),
            jobs: 1,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct E3Row {
    pub instance: String,
    pub seed: u64,
    pub dd_objective: f64,
    pub dd_converged: bool,
    pub dd_iterations: usize,
    pub ssg_objective: f64,
    pub ssg_found: bool,
    pub ssg_iterations: usize,
}

/// Mixed small instances (`p ≤ 4`): surrogates, one-sample water and
/// one-cell tree planting, cycling with the index.
pub fn ablation_suite(count: usize, base_seed: u64) -> Result<Vec<ProblemInstance>> {
    (0..count as u64)
        .map(|i| {
            let seed = base_seed + i;
            match i % 4 {
                0 => gen_smooth_surrogate(2 + (i / 4 % 3) as usize, seed),
                1 => gen_relu_surrogate(2 + (i / 4 % 3) as usize, &[4, 4], seed),
                2 => gen_water_potability(&WaterParams {
                    n: 1,
                    feature_dim: 1,
                    budgets_up: vec![1.5],
                    budgets_down: vec![1.5],
                    arch: vec![4],
                    delta: 0.5,
                    levels: 4,
                    train_samples: 200,
                    epochs: 40,
                    seed,
                }),
                _ => gen_tree_planting(&TreeParams {
                    grid_n: 1,
                    species: 3,
                    targets: vec![0.0; 3],
                    arch: vec![4],
                    seed,
                    ..Default::default()
                }),
            }
        })
        .collect()
}

pub fn experiment_e3(cfg: &E3Config) -> Result<Vec<E3Row>> {
    check_seeds(&cfg.seeds)?;
    let base = cfg.seeds[0];
    let suite = ablation_suite(cfg.instances, base)?;
    let mut cells = Vec::new();
    for inst in &suite {
        for &seed in &cfg.seeds {
            cells.push((inst, seed));
        }
    }
    let rows = par_map(&cells, cfg.jobs, |(inst, seed)| -> Result<E3Row> {
        let sub = select(SubsolverKind::Auto, inst, DdConfig::default().eta);
        let dd = dd_solve(inst, &DdConfig::default(), sub.as_ref())?.report;
        let ssg = ssg_solve(
            inst,
            &SsgConfig {
                seed: *seed,
                ..Default::default()
            },
        )?
        .report;
        Ok(E3Row {
            instance: inst.meta.name.clone(),
            seed: *seed,
            dd_objective: inst.sense_objective(dd.objective),
            dd_converged: dd.converged,
            dd_iterations: dd.iterations,
            ssg_objective: if ssg.converged { inst.sense_objective(ssg.objective) } else { f64::NAN },
            ssg_found: ssg.converged,
            ssg_iterations: ssg.iterations,
        })
    })?;
    rows.into_iter().collect()
}

// ---------------------------------------------------------------------------
// E5: projected gradient against the barrier subsolver

#[derive(Debug, Clone)]
pub struct E5Config {
    pub instances: usize,
    pub grid_n: usize,
    pub seeds: Vec<u64>,
    pub jobs: usize,
}

impl Default for E5Config {
    fn default() -> Self {
        Self {
            instances: 10,
            grid_n: 2,
            seeds: DEFAULT_SEEDS.to_vec(),
            jobs: 1,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct E5Row {
    pub instance: String,
    pub pgd_objective: f64,
    pub barrier_objective: f64,
    pub abs_diff: f64,
    pub pgd_converged: bool,
    pub barrier_converged: bool,
    pub pgd_s: f64,
    pub barrier_s: f64,
}

/// Tree-planting instances whose budget rows are mirrored into `A_NN` as
/// rows on `u` only, with zero survival targets.
pub fn subsolver_suite(count: usize, grid_n: usize, base_seed: u64) -> Result<Vec<ProblemInstance>> {
    (0..count as u64)
        .map(|i| {
            gen_tree_planting(&TreeParams {
                grid_n,
                species: 3,
                targets: vec![0.0; 3],
                arch: vec![4],
                sterilize_budget: 1,
                cost_budget: Some(2.0 * (grid_n * grid_n) as f64),
                mirror_budget_rows: true,
                seed: base_seed + i,
                ..Default::default()
            })
        })
        .collect()
}

pub fn experiment_e5(cfg: &E5Config) -> Result<Vec<E5Row>> {
    check_seeds(&cfg.seeds)?;
    let suite = subsolver_suite(cfg.instances, cfg.grid_n, cfg.seeds[0])?;
    let dd = DdConfig::default();
    let rows = par_map(&suite, cfg.jobs, |inst| -> Result<E5Row> {
        let run = |kind| -> Result<(f64, bool, f64)> {
            let t = Instant::now();
            let sub = select(kind, inst, dd.eta);
            let r = dd_solve(inst, &dd, sub.as_ref())?.report;
            Ok((inst.sense_objective(r.objective), r.converged, t.elapsed().as_secs_f64()))
        };
        let (po, pc, pt) = run(SubsolverKind::Pgd)?;
        let (bo, bc, bt) = run(SubsolverKind::Barrier)?;
        Ok(E5Row {
            instance: inst.meta.name.clone(),
            pgd_objective: po,
            barrier_objective: bo,
            abs_diff: (po - bo).abs(),
            pgd_converged: pc,
            barrier_converged: bc,
            pgd_s: pt,
            barrier_s: bt,
        })
    })?;
    rows.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_method_is_rejected() {
        assert!("dd".parse::<Method>().is_ok());
        assert!(matches!("simplex".parse::<Method>(), Err(Error::Config(_))));
    }

    #[test]
    fn empty_seed_list_is_an_error() {
        let cfg = E1Config {
            seeds: vec![],
            ..Default::default()
        };
        assert!(matches!(experiment_e1(&cfg), Err(Error::Config(_))));
        let cfg = E3Config {
            seeds: vec![],
            ..Default::default()
        };
        assert!(experiment_e3(&cfg).is_err());
    }

    #[test]
    fn caps_are_enforced() {
        let cfg = E1Config {
            archs: vec![vec![64]],
            ..Default::default()
        };
        assert!(experiment_e1(&cfg).is_err());
        let cfg = E1Config {
            ns: vec![17],
            ..Default::default()
        };
        assert!(experiment_e1(&cfg).is_err());
    }

    #[test]
    fn slope_of_a_power_law() {
        let x: Vec<f64> = [1e3f64, 1e4, 1e5].iter().map(|v| v.ln()).collect();
        let y: Vec<f64> = [1e3f64, 1e4, 1e5].iter().map(|v| (3.0 * v.powf(1.1)).ln()).collect();
        assert!((fit_slope(&x, &y) - 1.1).abs() < 1e-12);
    }

    #[test]
    fn scaling_instance_hits_target_size() {
        for target in [1_000, 10_000, 100_000] {
            let inst = scaling_instance(4, 32, target, 1).unwrap();
            let got = inst.network.param_count() as f64;
            assert!((got / target as f64 - 1.0).abs() < 0.3, "{target} -> {got}");
        }
    }

    #[test]
    fn strip_columns_removes_times() {
        let text = "a,total_s,b\n1,0.5,x\n2,0.7,y\n";
        assert_eq!(strip_columns(text, &TIME_COLUMNS).unwrap(), "a,b\n1,x\n2,y\n");
    }

    #[test]
    fn par_map_preserves_order() {
        let cells: Vec<u64> = (0..50).collect();
        let out = par_map(&cells, 4, |v| v * v).unwrap();
        assert_eq!(out, cells.iter().map(|v| v * v).collect::<Vec<_>>());
    }

    #[test]
    fn oracle_suite_respects_limits() {
        for (_, inst) in oracle_suite(12, 0).unwrap() {
            assert!(inst.p() <= 4);
            assert!(inst.lower.iter().zip(&inst.upper).all(|(l, u)| u - l <= 4.0));
            assert!(inst.network.hidden_widths().iter().all(|&w| w <= 8));
            assert!(inst.network.hidden_widths().len() <= 2);
        }
    }

    #[test]
    fn report_row_uses_instance_sense() {
        let mut inst = gen_smooth_surrogate(2, 3).unwrap();
        inst.meta.sense = Sense::Maximize;
        let r = SolveReport {
            method: "dd".into(),
            objective: -4.0,
            ..Default::default()
        };
        let row = ReportRow::new(&inst, 3, "pgd", &r);
        assert_eq!(row.objective, inst.sense_objective(-4.0));
    }
}
