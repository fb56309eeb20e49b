//! Dense network evaluation, reverse-mode vector–Jacobian products,
//! interval bound propagation and a small logistic-loss trainer.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{Activation, Layer, NnModel};

/// Intermediates of one forward pass.
#[derive(Debug, Clone)]
pub struct Tape {
    input: Vec<f64>,
    /// Pre-activation per layer.
    pre: Vec<Vec<f64>>,
    /// Post-activation per layer; the last entry is the network output.
    post: Vec<Vec<f64>>,
}

impl Tape {
    pub fn input(&self) -> &[f64] {
        &self.input
    }

    pub fn pre_activations(&self) -> &[Vec<f64>] {
        &self.pre
    }

    pub fn output(&self) -> &[f64] {
        self.post.last().map_or(&[], Vec::as_slice)
    }
}

fn affine(layer: &Layer, input: &[f64]) -> Vec<f64> {
    layer
        .weights
        .iter()
        .zip(&layer.bias)
        .map(|(row, b)| row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>() + b)
        .collect()
}

fn activate(act: Activation, pre: &[f64]) -> Vec<f64> {
    match act {
        Activation::Relu => pre.iter().map(|&h| h.max(0.0)).collect(),
        Activation::Identity => pre.to_vec(),
    }
}

/// Evaluates `f(u)` and records every intermediate.
pub fn forward(model: &NnModel, u: &[f64]) -> Result<(Vec<f64>, Tape)> {
    if u.len() != model.input_dim() {
        return Err(Error::Dimension(format!(
            "input has length {}, network expects {}",
            u.len(),
            model.input_dim()
        )));
    }
    let mut pre = Vec::with_capacity(model.layers.len());
    let mut post: Vec<Vec<f64>> = Vec::with_capacity(model.layers.len());
    for layer in &model.layers {
        let x = post.last().map_or(u, Vec::as_slice);
        let h = affine(layer, x);
        post.push(activate(layer.activation, &h));
        pre.push(h);
    }
    let y = post.last().cloned().unwrap_or_default();
    Ok((
        y,
        Tape {
            input: u.to_vec(),
            pre,
            post,
        },
    ))
}

/// Evaluates `f(u)` without keeping a tape. Panics on a dimension mismatch.
pub fn eval(model: &NnModel, u: &[f64]) -> Vec<f64> {
    assert_eq!(u.len(), model.input_dim(), "network input dimension");
    let mut x = u.to_vec();
    for layer in &model.layers {
        let h = affine(layer, &x);
        x = activate(layer.activation, &h);
    }
    x
}

fn check_tape(model: &NnModel, tape: &Tape) -> Result<()> {
    if tape.pre.len() != model.layers.len() || tape.input.len() != model.input_dim() {
        return Err(Error::StaleTape("layer count or input width differs".into()));
    }
    for (k, (layer, h)) in model.layers.iter().zip(&tape.pre).enumerate() {
        if h.len() != layer.out_dim() {
            return Err(Error::StaleTape(format!("layer {k} width differs")));
        }
    }
    Ok(())
}

/// Back-propagates `w` through the tape: returns `J_f(u)ᵀ w`.
///
/// ReLU derivative at exactly zero is taken as zero.
pub fn vjp(model: &NnModel, tape: &Tape, w: &[f64]) -> Result<Vec<f64>> {
    check_tape(model, tape)?;
    if w.len() != model.output_dim() {
        return Err(Error::Dimension(format!(
            "cotangent has length {}, network output is {}",
            w.len(),
            model.output_dim()
        )));
    }
    let mut g = w.to_vec();
    for (layer, h) in model.layers.iter().zip(&tape.pre).rev() {
        if layer.activation == Activation::Relu {
            for (gi, &hi) in g.iter_mut().zip(h) {
                if hi <= 0.0 {
                    *gi = 0.0;
                }
            }
        }
        let mut prev = vec![0.0; layer.in_dim()];
        for (row, &gi) in layer.weights.iter().zip(&g) {
            if gi != 0.0 {
                for (p, &wij) in prev.iter_mut().zip(row) {
                    *p += wij * gi;
                }
            }
        }
        g = prev;
    }
    Ok(g)
}

/// Per-neuron pre-activation bounds, one `(lower, upper)` pair of vectors
/// per layer (the last layer's bounds enclose the network output).
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalBounds {
    pub layers: Vec<(Vec<f64>, Vec<f64>)>,
}

impl IntervalBounds {
    pub fn output(&self) -> (&[f64], &[f64]) {
        let (lo, hi) = self.layers.last().expect("network has layers");
        (lo, hi)
    }
}

/// Sound interval arithmetic over the input box `[lower, upper]`.
pub fn interval_propagate(model: &NnModel, lower: &[f64], upper: &[f64]) -> IntervalBounds {
    let mut lo = lower.to_vec();
    let mut hi = upper.to_vec();
    let mut layers = Vec::with_capacity(model.layers.len());
    for layer in &model.layers {
        let mut pl = Vec::with_capacity(layer.out_dim());
        let mut ph = Vec::with_capacity(layer.out_dim());
        for (row, b) in layer.weights.iter().zip(&layer.bias) {
            let (mut a, mut z) = (*b, *b);
            for ((w, l), h) in row.iter().zip(&lo).zip(&hi) {
                if *w >= 0.0 {
                    a += w * l;
                    z += w * h;
                } else {
                    a += w * h;
                    z += w * l;
                }
            }
            pl.push(a);
            ph.push(z);
        }
        match layer.activation {
            Activation::Relu => {
                lo = pl.iter().map(|v| v.max(0.0)).collect();
                hi = ph.iter().map(|v| v.max(0.0)).collect();
            }
            Activation::Identity => {
                lo = pl.clone();
                hi = ph.clone();
            }
        }
        layers.push((pl, ph));
    }
    IntervalBounds { layers }
}

/// Glorot-uniform weights, zero biases; ReLU hidden layers and a final
/// identity layer. `sizes` lists every layer width including input and
/// output.
pub fn init_model(sizes: &[usize], rng: &mut impl Rng) -> NnModel {
    assert!(sizes.len() >= 2, "need at least input and output sizes");
    let last = sizes.len() - 2;
    let layers = sizes
        .windows(2)
        .enumerate()
        .map(|(k, pair)| {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let s = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let weights = (0..fan_out)
                .map(|_| (0..fan_in).map(|_| rng.random_range(-s..=s)).collect())
                .collect();
            let act = if k == last {
                Activation::Identity
            } else {
                Activation::Relu
            };
            Layer::new(weights, vec![0.0; fan_out], act)
        })
        .collect();
    NnModel::new(layers)
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub step: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden: vec![8],
            epochs: 200,
            step: 0.1,
            batch_size: 32,
            seed: 0,
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Trains a binary classifier whose single output is a logit, using plain
/// mini-batch gradient descent on the logistic loss. Deterministic in
/// `config.seed`; zero epochs returns the seeded initialisation.
pub fn train_classifier(features: &[Vec<f64>], labels: &[bool], config: &TrainConfig) -> NnModel {
    assert!(!features.is_empty(), "need at least one sample");
    assert_eq!(features.len(), labels.len());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut sizes = vec![features[0].len()];
    sizes.extend(&config.hidden);
    sizes.push(1);
    let mut model = init_model(&sizes, &mut rng);

    let n = features.len();
    let batch = config.batch_size.clamp(1, n);
    let mut order: Vec<usize> = (0..n).collect();
    for _ in 0..config.epochs {
        // Fisher–Yates with the seeded stream.
        for i in (1..n).rev() {
            let j = rng.random_range(0..=i);
            order.swap(i, j);
        }
        for chunk in order.chunks(batch) {
            let mut grads: Vec<(Vec<Vec<f64>>, Vec<f64>)> = model
                .layers
                .iter()
                .map(|l| (vec![vec![0.0; l.in_dim()]; l.out_dim()], vec![0.0; l.out_dim()]))
                .collect();
            for &i in chunk {
                let (y, tape) = forward(&model, &features[i]).expect("feature width");
                let target = if labels[i] { 1.0 } else { 0.0 };
                let dz = sigmoid(y[0]) - target;
                accumulate_param_grads(&model, &tape, &[dz], &mut grads);
            }
            let scale = config.step / chunk.len() as f64;
            for (layer, (gw, gb)) in model.layers.iter_mut().zip(&grads) {
                for (row, grow) in layer.weights.iter_mut().zip(gw) {
                    for (w, g) in row.iter_mut().zip(grow) {
                        *w -= scale * g;
                    }
                }
                for (b, g) in layer.bias.iter_mut().zip(gb) {
                    *b -= scale * g;
                }
            }
        }
    }
    model
}

fn accumulate_param_grads(
    model: &NnModel,
    tape: &Tape,
    w: &[f64],
    grads: &mut [(Vec<Vec<f64>>, Vec<f64>)],
) {
    let mut g = w.to_vec();
    for k in (0..model.layers.len()).rev() {
        let layer = &model.layers[k];
        if layer.activation == Activation::Relu {
            for (gi, &hi) in g.iter_mut().zip(&tape.pre[k]) {
                if hi <= 0.0 {
                    *gi = 0.0;
                }
            }
        }
        let input = if k == 0 { &tape.input } else { &tape.post[k - 1] };
        let (gw, gb) = &mut grads[k];
        for (j, &gj) in g.iter().enumerate() {
            gb[j] += gj;
            for (acc, x) in gw[j].iter_mut().zip(input) {
                *acc += gj * x;
            }
        }
        let mut prev = vec![0.0; layer.in_dim()];
        for (row, &gi) in layer.weights.iter().zip(&g) {
            for (p, &wij) in prev.iter_mut().zip(row) {
                *p += wij * gi;
            }
        }
        g = prev;
    }
}

/// Fraction of samples whose logit sign matches the label.
pub fn accuracy(model: &NnModel, features: &[Vec<f64>], labels: &[bool]) -> f64 {
    let hits = features
        .iter()
        .zip(labels)
        .filter(|(x, &l)| (eval(model, x)[0] > 0.0) == l)
        .count();
    hits as f64 / features.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    fn random_net(sizes: &[usize], seed: u64) -> NnModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = init_model(sizes, &mut rng);
        for l in &mut m.layers {
            for b in &mut l.bias {
                *b = rng.random_range(-0.5..0.5);
            }
        }
        m
    }

    // Straight-line re-evaluation kept independent of `affine`/`activate`.
    fn reference_eval(m: &NnModel, u: &[f64]) -> Vec<f64> {
        let mut x = u.to_vec();
        for layer in &m.layers {
            let mut next = vec![0.0; layer.bias.len()];
            for j in 0..next.len() {
                let mut acc = layer.bias[j];
                for i in 0..x.len() {
                    acc += layer.weights[j][i] * x[i];
                }
                next[j] = if layer.activation == Activation::Relu && acc < 0.0 {
                    0.0
                } else {
                    acc
                };
            }
            x = next;
        }
        x
    }

    #[test]
    fn relu_identity_weights() {
        let m = NnModel::new(vec![
            Layer::new(
                vec![vec![1.0, 0.0], vec![0.0, 1.0]],
                vec![0.0, 0.0],
                Activation::Relu,
            ),
            Layer::new(
                vec![vec![1.0, 0.0], vec![0.0, 1.0]],
                vec![0.0, 0.0],
                Activation::Identity,
            ),
        ]);
        assert_eq!(forward(&m, &[1.0, -2.0]).unwrap().0, vec![1.0, 0.0]);
    }

    #[test]
    fn single_affine_layer() {
        let m = NnModel::new(vec![Layer::new(
            vec![vec![2.0, 0.0], vec![0.0, 3.0]],
            vec![1.0, -1.0],
            Activation::Identity,
        )]);
        assert_eq!(forward(&m, &[1.0, 1.0]).unwrap().0, vec![3.0, 2.0]);
    }

    #[test]
    fn forward_matches_reference() {
        let m = random_net(&[4, 7, 5, 3], 11);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let u: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
            let (y, tape) = forward(&m, &u).unwrap();
            let r = reference_eval(&m, &u);
            for (a, b) in y.iter().zip(&r) {
                assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
            }
            assert_eq!(tape.output(), y.as_slice());
        }
    }

    #[test]
    fn dimension_mismatch() {
        let m = NnModel::identity(2);
        assert!(matches!(forward(&m, &[1.0]), Err(Error::Dimension(_))));
    }

    #[test]
    fn vjp_identity_and_zero() {
        let m = NnModel::identity(3);
        let (_, tape) = forward(&m, &[0.3, -1.0, 2.0]).unwrap();
        assert_eq!(vjp(&m, &tape, &[1.0, 2.0, 3.0]).unwrap(), vec![1.0, 2.0, 3.0]);
        let n = random_net(&[3, 5, 2], 1);
        let (_, tape) = forward(&n, &[0.3, -1.0, 2.0]).unwrap();
        assert_eq!(vjp(&n, &tape, &[0.0, 0.0]).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn stale_tape_is_rejected() {
        let a = random_net(&[3, 5, 2], 1);
        let b = random_net(&[3, 4, 2], 1);
        let (_, tape) = forward(&a, &[0.1, 0.2, 0.3]).unwrap();
        assert!(matches!(vjp(&b, &tape, &[1.0, 1.0]), Err(Error::StaleTape(_))));
    }

    fn min_abs_preactivation(m: &NnModel, u: &[f64]) -> f64 {
        let (_, tape) = forward(m, u).unwrap();
        let n = m.layers.len();
        tape.pre[..n - 1]
            .iter()
            .flatten()
            .fold(f64::INFINITY, |a, h| a.min(h.abs()))
    }

    #[test]
    fn vjp_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for depth in [1usize, 2, 4] {
            let mut sizes = vec![3];
            sizes.extend(std::iter::repeat(6).take(depth - 1));
            sizes.push(2);
            let mut checked = 0;
            for trial in 0..40 {
                let m = random_net(&sizes, 100 + trial);
                let u: Vec<f64> = (0..3).map(|_| rng.random_range(-1.5..1.5)).collect();
                if min_abs_preactivation(&m, &u) < 1e-3 {
                    continue;
                }
                let w = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
                let (_, tape) = forward(&m, &u).unwrap();
                let g = vjp(&m, &tape, &w).unwrap();
                let h = 1e-5;
                for i in 0..3 {
                    let mut up = u.clone();
                    let mut dn = u.clone();
                    up[i] += h;
                    dn[i] -= h;
                    let fu: f64 = eval(&m, &up).iter().zip(&w).map(|(a, b)| a * b).sum();
                    let fd: f64 = eval(&m, &dn).iter().zip(&w).map(|(a, b)| a * b).sum();
                    let fdiff = (fu - fd) / (2.0 * h);
                    let rel = (g[i] - fdiff).abs() / g[i].abs().max(fdiff.abs()).max(1e-3);
                    assert!(rel < 1e-5, "depth {depth} rel err {rel}");
                }
                checked += 1;
            }
            assert!(checked > 10);
        }
    }

    #[test]
    fn interval_single_neuron() {
        let pos = NnModel::new(vec![
            Layer::new(vec![vec![1.0]], vec![0.0], Activation::Relu),
            Layer::new(vec![vec![1.0]], vec![0.0], Activation::Identity),
        ]);
        let b = interval_propagate(&pos, &[-1.0], &[2.0]);
        assert_eq!(b.layers[0], (vec![-1.0], vec![2.0]));
        // next layer sees the clamped interval [0, 2]
        assert_eq!(b.layers[1], (vec![0.0], vec![2.0]));

        let neg = NnModel::new(vec![Layer::new(vec![vec![-1.0]], vec![0.0], Activation::Identity)]);
        let b = interval_propagate(&neg, &[-1.0], &[2.0]);
        assert_eq!(b.layers[0], (vec![-2.0], vec![1.0]));
    }

    #[test]
    fn interval_is_sound_under_sampling() {
        let m = random_net(&[2, 4, 4, 1], 3);
        let bounds = interval_propagate(&m, &[0.0, 0.0], &[3.0, 3.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..1000 {
            let u = [rng.random_range(0.0..=3.0), rng.random_range(0.0..=3.0)];
            let (_, tape) = forward(&m, &u).unwrap();
            for (h, (lo, hi)) in tape.pre.iter().zip(&bounds.layers) {
                for j in 0..h.len() {
                    assert!(lo[j] - 1e-12 <= h[j] && h[j] <= hi[j] + 1e-12);
                }
            }
        }
    }

    fn blobs(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<bool>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 0.5).unwrap();
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..n {
            let label = i % 2 == 0;
            let c = if label { 2.0 } else { -2.0 };
            x.push(vec![c + noise.sample(&mut rng), c + noise.sample(&mut rng)]);
            y.push(label);
        }
        (x, y)
    }

    #[test]
    fn trainer_separates_blobs() {
        let (x, y) = blobs(200, 7);
        let cfg = TrainConfig {
            hidden: vec![4],
            epochs: 30,
            step: 0.1,
            batch_size: 16,
            seed: 1,
        };
        let m = train_classifier(&x, &y, &cfg);
        assert!(accuracy(&m, &x, &y) >= 0.95);
    }

    #[test]
    fn trainer_zero_epochs_and_determinism() {
        let (x, y) = blobs(20, 7);
        let cfg = TrainConfig {
            hidden: vec![3],
            epochs: 0,
            seed: 9,
            ..Default::default()
        };
        let m = train_classifier(&x, &y, &cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        assert_eq!(m, init_model(&[2, 3, 1], &mut rng));

        let cfg = TrainConfig {
            epochs: 5,
            ..cfg
        };
        assert_eq!(train_classifier(&x, &y, &cfg), train_classifier(&x, &y, &cfg));
    }

    #[test]
    fn init_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let m = init_model(&[10, 20, 1], &mut rng);
        let s = (6.0f64 / 30.0).sqrt();
        assert!(m.layers[0].weights.iter().flatten().all(|w| w.abs() <= s));
        assert_eq!(m.layers[0].activation, Activation::Relu);
        assert_eq!(m.layers[1].activation, Activation::Identity);
        assert_eq!(m.param_count(), 10 * 20 + 20 + 20 + 1);
    }
}
