//! Seeded synthetic instance families.
//!
//! * [`gen_water_potability`]: adjust sample features within per-feature
//!   budgets so that a trained classifier flips them to the positive class.
//! * [`gen_tree_planting`]: assign one species per grid site and optionally
//!   sterilise sites to maximise predicted survival.
//! * [`gen_smooth_surrogate`]: affine network, no rows, known optimum.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::bigm::encode_instance;
use crate::error::{Error, Result};
use crate::milp::{solve_relaxation, RelaxStatus};
use crate::model::{validate, Activation, InstanceMeta, Layer, NnModel, ProblemInstance, Sense};
use crate::nn::{eval, interval_propagate, train_classifier, TrainConfig};

/// A sub-network fed by `input_map · u + offset`.
#[derive(Debug, Clone)]
pub struct Block {
    pub input_map: Vec<Vec<f64>>,
    pub offset: Vec<f64>,
    pub net: NnModel,
}

/// Stacks blocks of equal depth into one network over `u ∈ ℝᵖ`; outputs are
/// concatenated in block order.
pub fn block_parallel(blocks: &[Block], p: usize) -> Result<NnModel> {
    let depth = blocks.first().map_or(0, |b| b.net.layers.len());
    if depth == 0 {
        return Err(Error::Generation("no blocks".into()));
    }
    for (bi, b) in blocks.iter().enumerate() {
        if b.net.layers.len() != depth {
            return Err(Error::Generation(format!("block {bi} has a different depth")));
        }
        if b.input_map.len() != b.net.input_dim()
            || b.offset.len() != b.input_map.len()
            || b.input_map.iter().any(|r| r.len() != p)
        {
            return Err(Error::Generation(format!("block {bi} input map has the wrong shape")));
        }
    }
    let mut layers = Vec::with_capacity(depth);
    for l in 0..depth {
        let act = blocks[0].net.layers[l].activation;
        if blocks.iter().any(|b| b.net.layers[l].activation != act) {
            return Err(Error::Generation(format!("layer {l} activations differ across blocks")));
        }
        let width_in: usize = blocks.iter().map(|b| b.net.layers[l].in_dim()).sum();
        let mut weights = Vec::new();
        let mut bias = Vec::new();
        let mut col = 0;
        for b in blocks {
            let layer = &b.net.layers[l];
            for (row, bb) in layer.weights.iter().zip(&layer.bias) {
                if l == 0 {
                    let mut w = vec![0.0; p];
                    let mut off = *bb;
                    for (k, a) in row.iter().enumerate() {
                        for (wj, mj) in w.iter_mut().zip(&b.input_map[k]) {
                            *wj += a * mj;
                        }
                        off += a * b.offset[k];
                    }
                    weights.push(w);
                    bias.push(off);
                } else {
                    let mut w = vec![0.0; width_in];
                    w[col..col + row.len()].copy_from_slice(row);
                    weights.push(w);
                    bias.push(*bb);
                }
            }
            col += layer.in_dim();
        }
        layers.push(Layer::new(weights, bias, act));
    }
    Ok(NnModel::new(layers))
}

fn check(inst: ProblemInstance) -> Result<ProblemInstance> {
    let v = validate(&inst);
    if v.is_empty() {
        Ok(inst)
    } else {
        Err(Error::Generation(format!("generated instance is invalid: {}", v[0])))
    }
}

#[derive(Debug, Clone)]
pub struct WaterParams {
    /// Samples to adjust.
    pub n: usize,
    pub feature_dim: usize,
    /// Total upward / downward adjustment allowed per feature.
    pub budgets_up: Vec<f64>,
    pub budgets_down: Vec<f64>,
    pub arch: Vec<usize>,
    /// Grid step of a single adjustment unit.
    pub delta: f64,
    /// Adjustment units per variable; each variable lies in `[0, levels]`.
    pub levels: usize,
    pub train_samples: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for WaterParams {
    fn default() -> Self {
        Self {
            n: 8,
            feature_dim: 9,
            budgets_up: vec![2.0; 9],
            budgets_down: vec![2.0; 9],
            arch: vec![8, 8],
            delta: 0.25,
            levels: 8,
            train_samples: 400,
            epochs: 60,
            seed: 42,
        }
    }
}

const WATER_RETRIES: u64 = 5;

/// Variables: `ka[i][j]`, `kb[i][j]` (upward / downward units for sample `i`,
/// feature `j`, laid out sample-major), then one indicator `y[i]` per
/// sample. Network output `i` is the classifier logit of adjusted sample `i`.
pub fn gen_water_potability(params: &WaterParams) -> Result<ProblemInstance> {
    let f = params.feature_dim;
    if params.n == 0 || f == 0 {
        return Err(Error::Generation("need n ≥ 1 and feature_dim ≥ 1".into()));
    }
    if params.budgets_up.len() != f || params.budgets_down.len() != f {
        return Err(Error::Generation("one budget per feature required".into()));
    }
    for attempt in 0..WATER_RETRIES {
        if let Some(inst) = water_attempt(params, params.seed.wrapping_add(attempt))? {
            return check(inst);
        }
    }
    Err(Error::Generation(format!(
        "classifier labelled fewer than {} samples non-potable after {WATER_RETRIES} seeds",
        params.n
    )))
}

fn water_attempt(params: &WaterParams, seed: u64) -> Result<Option<ProblemInstance>> {
    let (n, f) = (params.n, params.feature_dim);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.5).expect("valid normal");
    let draw = |rng: &mut ChaCha8Rng, positive: bool| -> Vec<f64> {
        let m = if positive { 0.75 } else { -0.75 };
        (0..f).map(|_| m + noise.sample(rng)).collect()
    };
    let mut xs = Vec::with_capacity(params.train_samples);
    let mut ys = Vec::with_capacity(params.train_samples);
    for i in 0..params.train_samples {
        let positive = i % 2 == 0;
        xs.push(draw(&mut rng, positive));
        ys.push(positive);
    }
    let classifier = train_classifier(
        &xs,
        &ys,
        &TrainConfig {
            hidden: params.arch.clone(),
            epochs: params.epochs,
            step: 0.1,
            batch_size: 32,
            seed,
        },
    );

    let mut chosen = Vec::with_capacity(n);
    for _ in 0..50 * n {
        let s = draw(&mut rng, false);
        if eval(&classifier, &s)[0] < 0.0 {
            chosen.push(s);
            if chosen.len() == n {
                break;
            }
        }
    }
    if chosen.len() < n {
        return Ok(None);
    }

    let p = 2 * n * f + n;
    let ka = |i: usize, j: usize| 2 * f * i + j;
    let kb = |i: usize, j: usize| 2 * f * i + f + j;
    let yv = |i: usize| 2 * n * f + i;
    let levels = params.levels as f64;
    let mut lower = vec![0.0; p];
    let mut upper = vec![levels; p];
    for i in 0..n {
        lower[yv(i)] = 0.0;
        upper[yv(i)] = 1.0;
    }

    let blocks: Vec<Block> = chosen
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let input_map = (0..f)
                .map(|j| {
                    let mut r = vec![0.0; p];
                    r[ka(i, j)] = params.delta;
                    r[kb(i, j)] = -params.delta;
                    r
                })
                .collect();
            Block {
                input_map,
                offset: s.clone(),
                net: classifier.clone(),
            }
        })
        .collect();
    let network = block_parallel(&blocks, p)?;

    let mut a_mip = Vec::new();
    let mut b_mip = Vec::new();
    for j in 0..f {
        for (budget, var) in [(params.budgets_up[j], &ka as &dyn Fn(usize, usize) -> usize), (params.budgets_down[j], &kb)] {
            let mut row = vec![0.0; p];
            for i in 0..n {
                row[var(i, j)] = 1.0;
            }
            a_mip.push(row);
            b_mip.push((budget / params.delta + 1e-9).floor());
        }
    }

    // y_i = 1 only if logit_i ≥ 0:  −logit_i + M_i·y_i ≤ M_i.
    let bounds = interval_propagate(&network, &lower, &upper);
    let (lo, _) = bounds.output();
    let mut a_nn = Vec::with_capacity(n);
    let mut b_nn = Vec::with_capacity(n);
    for i in 0..n {
        let m = (-lo[i]).max(1e-6);
        let mut row = vec![0.0; p + n];
        row[yv(i)] = m;
        row[p + i] = -1.0;
        a_nn.push(row);
        b_nn.push(m);
    }

    let mut c = vec![0.0; p];
    for i in 0..n {
        c[yv(i)] = -1.0;
    }
    Ok(Some(ProblemInstance {
        meta: InstanceMeta {
            name: format!("water-n{n}-f{f}-s{seed}"),
            sense: Sense::Maximize,
            generator: Some("water".into()),
            seed: Some(seed),
            notes: vec![
                format!("adjustments discretised: value = {} x units", params.delta),
                format!("A_NN rows 0..{n} are indicator rows: y_i = 1 requires logit_i >= 0"),
            ],
            known_optimum: None,
        },
        c,
        d: vec![0.0; n],
        a_mip,
        b_mip,
        a_nn,
        b_nn,
        lower,
        upper,
        integrality: vec![true; p],
        network,
    }))
}

#[derive(Debug, Clone)]
pub struct TreeParams {
    pub grid_n: usize,
    pub species: usize,
    /// Planting cost budget; `None` omits the cost row.
    pub cost_budget: Option<f64>,
    pub sterilize_budget: usize,
    /// Minimum expected survivors per species; zeros emit no rows.
    pub targets: Vec<f64>,
    pub arch: Vec<usize>,
    pub train_samples: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Copy the budget rows into `A_NN` as rows on `u` only.
    pub mirror_budget_rows: bool,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            grid_n: 2,
            species: 4,
            cost_budget: None,
            sterilize_budget: 1,
            targets: vec![0.0; 4],
            arch: vec![4],
            train_samples: 300,
            epochs: 60,
            seed: 42,
            mirror_budget_rows: false,
        }
    }
}

const SITE_FEATURES: usize = 7;
/// Sterilisation shifts soil quality (feature 0) by this amount.
const STERILIZE_SHIFT: f64 = 0.5;
const CALIB_SCALE: f64 = 0.25;
const CALIB_SHIFT: f64 = 0.5;

/// Per-(site, species) block on inputs `(z_i, p_ik)` that outputs
/// `min(clamp(α·logit + β, 0, 1), p)`, which equals the calibrated survival
/// probability when `p = 1` and zero when `p = 0`.
fn tree_block(species_net: &NnModel, site: &[f64]) -> NnModel {
    let hidden = &species_net.layers[..species_net.layers.len() - 1];
    let last = species_net.layers.last().expect("non-empty network");
    let mut layers = Vec::new();
    for (l, layer) in hidden.iter().enumerate() {
        let mut weights = Vec::new();
        let mut bias = Vec::new();
        for (row, b) in layer.weights.iter().zip(&layer.bias) {
            if l == 0 {
                // Site features are constants; z shifts feature 0.
                let base: f64 = row.iter().zip(site).map(|(w, s)| w * s).sum();
                weights.push(vec![row[0] * STERILIZE_SHIFT, 0.0]);
                bias.push(base + b);
            } else {
                let mut w = row.clone();
                w.push(0.0);
                weights.push(w);
                bias.push(*b);
            }
        }
        let mut pass = vec![0.0; if l == 0 { 2 } else { layer.in_dim() + 1 }];
        *pass.last_mut().expect("non-empty") = 1.0;
        weights.push(pass);
        bias.push(0.0);
        layers.push(Layer::new(weights, bias, Activation::Relu));
    }
    let h = last.in_dim();
    let scaled: Vec<f64> = last.weights[0].iter().map(|w| CALIB_SCALE * w).collect();
    let b0 = CALIB_SCALE * last.bias[0] + CALIB_SHIFT;
    let mut row_a = scaled.clone();
    row_a.push(0.0);
    let mut row_b = scaled;
    row_b.push(0.0);
    let mut row_p = vec![0.0; h + 1];
    row_p[h] = 1.0;
    layers.push(Layer::new(vec![row_a, row_b, row_p], vec![b0, b0 - 1.0, 0.0], Activation::Relu));
    layers.push(Layer::new(
        vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![1.0, -1.0, -1.0]],
        vec![0.0; 3],
        Activation::Relu,
    ));
    layers.push(Layer::new(vec![vec![1.0, -1.0, -1.0]], vec![0.0], Activation::Identity));
    NnModel::new(layers)
}

/// Variables: `p[i][k]` (site-major), then `z[i]`. Output `i·K + k` is the
/// expected survival of species `k` planted at site `i`.
pub fn gen_tree_planting(params: &TreeParams) -> Result<ProblemInstance> {
    let kk = params.species;
    let sites = params.grid_n * params.grid_n;
    if sites == 0 || kk == 0 {
        return Err(Error::Generation("need grid_n ≥ 1 and at least one species".into()));
    }
    if params.targets.len() != kk {
        return Err(Error::Generation("one target per species required".into()));
    }
    if params.arch.is_empty() {
        return Err(Error::Generation("tree surrogates need at least one hidden layer".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let noise = Normal::new(0.0, 0.3).expect("valid normal");
    let site_feats: Vec<Vec<f64>> = (0..sites)
        .map(|_| (0..SITE_FEATURES).map(|_| rng.random_range(0.0..1.0)).collect())
        .collect();

    let mut species_nets = Vec::with_capacity(kk);
    for k in 0..kk {
        let w: Vec<f64> = (0..SITE_FEATURES).map(|_| rng.random_range(-1.0..1.0)).collect();
        let w0 = 1.0 + rng.random_range(0.0..1.0);
        let b = -0.5 * w.iter().sum::<f64>() - 0.5 * w0;
        let mut xs = Vec::with_capacity(params.train_samples);
        let mut ys = Vec::with_capacity(params.train_samples);
        for _ in 0..params.train_samples {
            let mut s: Vec<f64> = (0..SITE_FEATURES).map(|_| rng.random_range(0.0..1.0)).collect();
            s[0] = rng.random_range(0.0..1.0 + STERILIZE_SHIFT);
            let score = w0 * s[0] + w.iter().zip(&s).skip(1).map(|(a, v)| a * v).sum::<f64>() + b;
            ys.push(score + noise.sample(&mut rng) > 0.0);
            xs.push(s);
        }
        species_nets.push(train_classifier(
            &xs,
            &ys,
            &TrainConfig {
                hidden: params.arch.clone(),
                epochs: params.epochs,
                step: 0.1,
                batch_size: 32,
                seed: params.seed.wrapping_mul(31).wrapping_add(k as u64),
            },
        ));
    }
    let costs: Vec<f64> = (0..kk).map(|_| rng.random_range(1..=3) as f64).collect();

    let p = sites * (kk + 1);
    let pv = |i: usize, k: usize| i * kk + k;
    let zv = |i: usize| sites * kk + i;
    let mut blocks = Vec::with_capacity(sites * kk);
    for (i, site) in site_feats.iter().enumerate() {
        for net in &species_nets {
            let k = blocks.len() % kk;
            let mut mz = vec![0.0; p];
            mz[zv(i)] = 1.0;
            let mut mp = vec![0.0; p];
            mp[pv(i, k)] = 1.0;
            blocks.push(Block {
                input_map: vec![mz, mp],
                offset: vec![0.0; 2],
                net: tree_block(net, site),
            });
        }
    }
    let network = block_parallel(&blocks, p)?;
    let q = sites * kk;

    let mut a_mip = Vec::new();
    let mut b_mip = Vec::new();
    for i in 0..sites {
        let mut row = vec![0.0; p];
        for k in 0..kk {
            row[pv(i, k)] = 1.0;
        }
        a_mip.push(row.clone());
        b_mip.push(1.0);
        a_mip.push(row.iter().map(|v| -v).collect());
        b_mip.push(-1.0);
    }
    let mut budget_rows = Vec::new();
    if let Some(budget) = params.cost_budget {
        let mut row = vec![0.0; p];
        for i in 0..sites {
            for k in 0..kk {
                row[pv(i, k)] = costs[k];
            }
        }
        budget_rows.push((row, budget));
    }
    let mut row = vec![0.0; p];
    for i in 0..sites {
        row[zv(i)] = 1.0;
    }
    budget_rows.push((row, params.sterilize_budget as f64));
    for (r, b) in &budget_rows {
        a_mip.push(r.clone());
        b_mip.push(*b);
    }

    let mut a_nn = Vec::new();
    let mut b_nn = Vec::new();
    for (k, &gamma) in params.targets.iter().enumerate() {
        if gamma > 0.0 {
            let mut row = vec![0.0; p + q];
            for i in 0..sites {
                row[p + i * kk + k] = -1.0;
            }
            a_nn.push(row);
            b_nn.push(-gamma);
        }
    }
    if params.mirror_budget_rows {
        for (r, b) in &budget_rows {
            let mut row = r.clone();
            row.resize(p + q, 0.0);
            a_nn.push(row);
            b_nn.push(*b);
        }
    }

    let mut upper = vec![1.0; p];
    if params.sterilize_budget == 0 {
        for i in 0..sites {
            upper[zv(i)] = 0.0;
        }
    }
    let mut notes = vec![
        format!(
            "outputs are min(clamp({CALIB_SCALE}*logit+{CALIB_SHIFT}, 0, 1), p_ik); clamping is inside the network"
        ),
        format!("species costs {costs:?}"),
    ];
    if params.mirror_budget_rows {
        notes.push("budget rows mirrored into A_NN on u only".into());
    }
    let inst = check(ProblemInstance {
        meta: InstanceMeta {
            name: format!("tree-g{}-k{kk}-s{}", params.grid_n, params.seed),
            sense: Sense::Maximize,
            generator: Some("tree".into()),
            seed: Some(params.seed),
            notes,
            known_optimum: None,
        },
        c: vec![0.0; p],
        d: vec![-1.0; q],
        a_mip,
        b_mip,
        a_nn,
        b_nn,
        lower: vec![0.0; p],
        upper,
        integrality: vec![true; p],
        network,
    })?;

    if params.targets.iter().any(|&g| g > 0.0) {
        let mut relax = encode_instance(&inst)?.milp;
        relax.integer.iter_mut().for_each(|b| *b = false);
        if solve_relaxation(&relax)?.status == RelaxStatus::Infeasible {
            return Err(Error::Generation(format!(
                "survival targets {:?} are infeasible even for the relaxation",
                params.targets
            )));
        }
    }
    Ok(inst)
}

/// Affine network `f(u) = Wu + b`, box only. The total linear cost
/// `t = c + Wᵀd` has entries of magnitude in `[6, 15]`, so the optimum is
/// the box vertex selected by `sign(t)`, stored in `known_optimum`.
pub fn gen_smooth_surrogate(p: usize, seed: u64) -> Result<ProblemInstance> {
    if p == 0 {
        return Err(Error::Generation("p must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q = p;
    let w: Vec<Vec<f64>> = (0..q)
        .map(|_| (0..p).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let b: Vec<f64> = (0..q).map(|_| rng.random_range(-1.0..1.0)).collect();
    let d: Vec<f64> = (0..q).map(|_| rng.random_range(-2.0..2.0)).collect();
    let grad: Vec<f64> = (0..p).map(|j| (0..q).map(|i| w[i][j] * d[i]).sum()).collect();
    let mut c = Vec::with_capacity(p);
    let mut lower = Vec::with_capacity(p);
    let mut upper = Vec::with_capacity(p);
    let mut opt = Vec::with_capacity(p);
    for g in &grad {
        let mag = rng.random_range(6.0..15.0);
        let t = if rng.random_bool(0.5) { mag } else { -mag };
        c.push(t - g);
        let l = rng.random_range(-2i32..=2) as f64;
        let width = rng.random_range(2i32..=4) as f64;
        lower.push(l);
        upper.push(l + width);
        opt.push(if t > 0.0 { l } else { l + width });
    }
    check(ProblemInstance {
        meta: InstanceMeta {
            name: format!("smooth-p{p}-s{seed}"),
            sense: Sense::Minimize,
            generator: Some("smooth".into()),
            seed: Some(seed),
            notes: vec!["affine network: smoothness constant L = 0".into()],
            known_optimum: Some(opt),
        },
        c,
        d,
        a_mip: vec![],
        b_mip: vec![],
        a_nn: vec![],
        b_nn: vec![],
        lower,
        upper,
        integrality: vec![true; p],
        network: NnModel::new(vec![Layer::new(w, b, Activation::Identity)]),
    })
}

/// Random ReLU network over a box with a linear term that dominates every
/// partial derivative of `dᵀf`, so the optimum is the vertex picked by the
/// sign of `c`. Gives exactly solvable instances that still carry binaries
/// in the Big-M encoding.
pub fn gen_relu_surrogate(p: usize, hidden: &[usize], seed: u64) -> Result<ProblemInstance> {
    if p == 0 || hidden.is_empty() || hidden.contains(&0) {
        return Err(Error::Generation("need p ≥ 1 and non-empty positive hidden widths".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layers = Vec::with_capacity(hidden.len() + 1);
    let mut fan_in = p;
    for &h in hidden {
        let w: Vec<Vec<f64>> = (0..h)
            .map(|_| (0..fan_in).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let b: Vec<f64> = (0..h).map(|_| rng.random_range(-0.5..0.5)).collect();
        layers.push(Layer::new(w, b, Activation::Relu));
        fan_in = h;
    }
    let w_out: Vec<Vec<f64>> = vec![(0..fan_in).map(|_| rng.random_range(-1.0..1.0)).collect()];
    layers.push(Layer::new(w_out, vec![0.0], Activation::Identity));
    let net = NnModel::new(layers);
    let d: Vec<f64> = vec![rng.random_range(-2.0..2.0)];

    // |∂(dᵀf)/∂u_j| ≤ (|d|ᵀ|W_L|⋯|W_1|)_j for ReLU networks.
    let mut sens = vec![d[0].abs()];
    for layer in net.layers.iter().rev() {
        let mut next = vec![0.0; layer.weights[0].len()];
        for (row, s) in layer.weights.iter().zip(&sens) {
            for (o, w) in next.iter_mut().zip(row) {
                *o += s * w.abs();
            }
        }
        sens = next;
    }

    let mut c = Vec::with_capacity(p);
    let mut lower = Vec::with_capacity(p);
    let mut upper = Vec::with_capacity(p);
    let mut opt = Vec::with_capacity(p);
    for bound in &sens {
        let mag = bound + rng.random_range(6.0..15.0);
        let positive = rng.random_bool(0.5);
        c.push(if positive { mag } else { -mag });
        let l = rng.random_range(-2i32..=2) as f64;
        let width = rng.random_range(2i32..=4) as f64;
        lower.push(l);
        upper.push(l + width);
        opt.push(if positive { l } else { l + width });
    }
    check(ProblemInstance {
        meta: InstanceMeta {
            name: format!("relu-p{p}-s{seed}"),
            sense: Sense::Minimize,
            generator: Some("relu".into()),
            seed: Some(seed),
            notes: vec![format!("hidden widths {hidden:?}")],
            known_optimum: Some(opt),
        },
        c,
        d,
        a_mip: vec![],
        b_mip: vec![],
        a_nn: vec![],
        b_nn: vec![],
        lower,
        upper,
        integrality: vec![true; p],
        network: net,
    })
}

#[cfg(test)]
mod tests {

    #[test]
    fn relu_surrogate_optimum_is_the_signed_vertex() {
        for seed in 0..5 {
            let inst = gen_relu_surrogate(3, &[4, 8], seed).unwrap();
            let opt = inst.meta.known_optimum.clone().unwrap();
            assert!((best_by_enumeration(&inst) - inst.objective_at(&opt)).abs() < 1e-9);
        }
    }
    use super::*;
    use crate::model::save_instance;

    fn tiny_water(budget: f64, seed: u64) -> WaterParams {
        WaterParams {
            n: 1,
            feature_dim: 1,
            budgets_up: vec![budget],
            budgets_down: vec![budget],
            arch: vec![4],
            delta: 0.5,
            levels: 4,
            train_samples: 200,
            epochs: 40,
            seed,
        }
    }

    fn best_by_enumeration(inst: &ProblemInstance) -> f64 {
        let p = inst.p();
        let mut best = f64::INFINITY;
        let mut x = inst.lower.clone();
        loop {
            let y = eval(&inst.network, &x);
            if inst.mip_violation(&x) <= 1e-9 && inst.nn_violation(&x, &y) <= 1e-9 {
                best = best.min(inst.objective_at(&x));
            }
            let mut i = 0;
            while i < p {
                x[i] += 1.0;
                if x[i] <= inst.upper[i] {
                    break;
                }
                x[i] = inst.lower[i];
                i += 1;
            }
            if i == p {
                return best;
            }
        }
    }

    #[test]
    fn block_parallel_composes_maps() {
        let net = NnModel::new(vec![
            Layer::new(vec![vec![1.0, -1.0]], vec![0.5], Activation::Relu),
            Layer::new(vec![vec![2.0]], vec![0.0], Activation::Identity),
        ]);
        let blocks = vec![
            Block {
                input_map: vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]],
                offset: vec![0.0, 1.0],
                net: net.clone(),
            },
            Block {
                input_map: vec![vec![0.0, 0.0, 2.0], vec![1.0, 0.0, 0.0]],
                offset: vec![0.0; 2],
                net: net.clone(),
            },
        ];
        let big = block_parallel(&blocks, 3).unwrap();
        let u = [0.7, -0.4, 1.1];
        let out = eval(&big, &u);
        let want0 = eval(&net, &[0.7, 0.6])[0];
        let want1 = eval(&net, &[2.2, 0.7])[0];
        assert!((out[0] - want0).abs() < 1e-12 && (out[1] - want1).abs() < 1e-12);
    }

    #[test]
    fn zero_budgets_give_zero_optimum() {
        let inst = gen_water_potability(&tiny_water(0.0, 3)).unwrap();
        assert_eq!(best_by_enumeration(&inst), 0.0);
    }

    #[test]
    fn generous_budget_flips_single_sample() {
        let inst = gen_water_potability(&tiny_water(2.0, 5)).unwrap();
        assert_eq!(inst.sense_objective(best_by_enumeration(&inst)), 1.0);
    }

    #[test]
    fn same_seed_same_bytes() {
        let a = save_instance(&gen_water_potability(&tiny_water(1.0, 9)).unwrap()).unwrap();
        let b = save_instance(&gen_water_potability(&tiny_water(1.0, 9)).unwrap()).unwrap();
        assert_eq!(a, b);
        let t = TreeParams {
            grid_n: 1,
            ..Default::default()
        };
        assert_eq!(
            save_instance(&gen_tree_planting(&t).unwrap()).unwrap(),
            save_instance(&gen_tree_planting(&t).unwrap()).unwrap()
        );
    }

    #[test]
    fn tree_outputs_gate_on_species_choice() {
        let inst = gen_tree_planting(&TreeParams {
            grid_n: 1,
            species: 3,
            targets: vec![0.0; 3],
            ..Default::default()
        })
        .unwrap();
        // Plant species 1 at the single site, no sterilisation.
        let y = eval(&inst.network, &[0.0, 1.0, 0.0, 0.0]);
        assert_eq!(y[0], 0.0);
        assert_eq!(y[2], 0.0);
        assert!((0.0..=1.0).contains(&y[1]));
    }

    #[test]
    fn tree_objective_bounded_by_site_count() {
        let inst = gen_tree_planting(&TreeParams {
            grid_n: 1,
            species: 3,
            sterilize_budget: 0,
            targets: vec![0.0; 3],
            ..Default::default()
        })
        .unwrap();
        let best = inst.sense_objective(best_by_enumeration(&inst));
        assert!(best.is_finite() && best <= 1.0 + 1e-12);
    }

    #[test]
    fn impossible_targets_are_rejected() {
        let e = gen_tree_planting(&TreeParams {
            grid_n: 1,
            species: 2,
            targets: vec![1.5, 0.0],
            ..Default::default()
        });
        assert!(matches!(e, Err(Error::Generation(_))));
    }

    #[test]
    fn smooth_known_optimum_matches_enumeration() {
        for seed in 0..5 {
            let inst = gen_smooth_surrogate(2, seed).unwrap();
            let opt = inst.meta.known_optimum.clone().unwrap();
            assert_eq!(inst.objective_at(&opt), best_by_enumeration(&inst));
        }
        let one = gen_smooth_surrogate(1, 7).unwrap();
        let opt = one.meta.known_optimum.clone().unwrap();
        assert!((one.objective_at(&opt) - best_by_enumeration(&one)).abs() < 1e-12);
    }
}
