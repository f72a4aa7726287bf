//! Residual CNN regressor: conv stem, residual blocks, global average
//! pooling, `FC -> ReLU -> FC(1)` head.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::ops::{self, ConvGeom};
use super::tensor::{Real, Tensor};
use super::NnError;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub input_channels: usize,
    pub stem_channels: usize,
    /// Block `i` has `stem_channels * 2^i` channels; every block after the
    /// first halves the resolution.
    pub num_residual_blocks: usize,
    pub head_hidden: usize,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig { input_channels: 2, stem_channels: 8, num_residual_blocks: 2, head_hidden: 64, seed: 0 }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), NnError> {
        if !(1..=2).contains(&self.input_channels) {
            return Err(NnError::Config(format!("input_channels must be 1 or 2, got {}", self.input_channels)));
        }
        if self.stem_channels == 0 || self.num_residual_blocks == 0 || self.head_hidden == 0 {
            return Err(NnError::Config("stem_channels, num_residual_blocks and head_hidden must be >= 1".into()));
        }
        Ok(())
    }

    pub fn block_channels(&self, block: usize) -> usize {
        self.stem_channels << block
    }

    pub fn final_channels(&self) -> usize {
        self.block_channels(self.num_residual_blocks - 1)
    }

    /// `(name, shape)` of every parameter, in storage order.
    pub fn parameter_shapes(&self) -> Vec<(String, Vec<usize>)> {
        let mut out = Vec::new();
        let mut conv = |name: &str, o: usize, i: usize, k: usize| {
            out.push((format!("{name}.weight"), vec![o, i, k, k]));
            out.push((format!("{name}.bias"), vec![o]));
        };
        conv("stem", self.stem_channels, self.input_channels, 3);
        for b in 0..self.num_residual_blocks {
            let cin = if b == 0 { self.stem_channels } else { self.block_channels(b - 1) };
            let cout = self.block_channels(b);
            conv(&format!("block{b}.conv1"), cout, cin, 3);
            conv(&format!("block{b}.conv2"), cout, cout, 3);
            if b > 0 {
                conv(&format!("block{b}.proj"), cout, cin, 1);
            }
        }
        out.push(("head.fc1.weight".into(), vec![self.head_hidden, self.final_channels()]));
        out.push(("head.fc1.bias".into(), vec![self.head_hidden]));
        out.push(("head.fc2.weight".into(), vec![1, self.head_hidden]));
        out.push(("head.fc2.bias".into(), vec![1]));
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.parameter_shapes().iter().map(|(_, s)| s.iter().product::<usize>()).sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Param<T = f32> {
    pub name: String,
    pub value: Tensor<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Model<T = f32> {
    pub config: ModelConfig,
    pub params: Vec<Param<T>>,
}

/// Fan-in scaled normal init (std `sqrt(2 / fan_in)`), zero biases, and an
/// all-zero output layer so a fresh model predicts exactly 0.
pub fn init_model<T: Real>(config: &ModelConfig) -> Result<Model<T>, NnError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let params = config
        .parameter_shapes()
        .into_iter()
        .map(|(name, shape)| {
            let mut value = Tensor::<T>::zeros(&shape);
            if name.ends_with(".weight") && !name.starts_with("head.fc2") {
                let fan_in: usize = shape[1..].iter().product();
                let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).unwrap();
                for v in value.data_mut() {
                    // Round through f32 so every model stays exactly serializable.
                    *v = T::from_f64_lossy(normal.sample(&mut rng) as f32 as f64);
                }
            }
            Param { name, value }
        })
        .collect();
    Ok(Model { config: config.clone(), params })
}

/// Replaces a 3-channel first-layer filter bank `(out, 3, k, k)` by its
/// channel mean duplicated into 2 channels `(out, 2, k, k)`.
pub fn transfer_init_first_layer<T: Real>(rgb: &Tensor<T>) -> Result<Tensor<T>, NnError> {
    let shape = rgb.shape();
    if shape.len() != 4 || shape[1] != 3 {
        return Err(NnError::Shape(format!("expected (out, 3, k, k) filters, got {shape:?}")));
    }
    let (out, kk) = (shape[0], shape[2] * shape[3]);
    let three = T::from_f64_lossy(3.0);
    let mut data = Vec::with_capacity(out * 2 * kk);
    for o in 0..out {
        let f = &rgb.data()[o * 3 * kk..(o + 1) * 3 * kk];
        let mean: Vec<T> = (0..kk).map(|i| (f[i] + f[kk + i] + f[2 * kk + i]) / three).collect();
        data.extend_from_slice(&mean);
        data.extend_from_slice(&mean);
    }
    Tensor::from_vec(&[out, 2, shape[2], shape[3]], data)
}

struct ConvRef {
    weight: usize,
    bias: usize,
    geom: ConvGeom,
}

struct BlockRef {
    conv1: ConvRef,
    conv2: ConvRef,
    proj: Option<ConvRef>,
}

struct Layout {
    stem: ConvRef,
    blocks: Vec<BlockRef>,
    fc1: (usize, usize),
    fc2: (usize, usize),
    hidden: usize,
    final_c: usize,
    final_hw: usize,
}

impl<T: Real> Model<T> {
    pub fn param(&self, name: &str) -> Option<&Tensor<T>> {
        self.params.iter().find(|p| p.name == name).map(|p| &p.value)
    }

    pub fn param_mut(&mut self, name: &str) -> Option<&mut Tensor<T>> {
        self.params.iter_mut().find(|p| p.name == name).map(|p| &mut p.value)
    }

    pub fn parameter_count(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn cast<U: Real>(&self) -> Model<U> {
        Model {
            config: self.config.clone(),
            params: self.params.iter().map(|p| Param { name: p.name.clone(), value: p.value.cast() }).collect(),
        }
    }

    pub fn zero_grads(&self) -> Vec<Tensor<T>> {
        self.params.iter().map(|p| Tensor::zeros(p.value.shape())).collect()
    }

    fn layout(&self, h: usize, w: usize) -> Layout {
        let cfg = &self.config;
        let mut idx = 0;
        let mut conv = |in_c, out_c, in_h, in_w, kernel, stride| {
            let pad = kernel / 2;
            let r =
                ConvRef { weight: idx, bias: idx + 1, geom: ConvGeom { in_c, out_c, in_h, in_w, kernel, stride, pad } };
            idx += 2;
            r
        };
        let stem = conv(cfg.input_channels, cfg.stem_channels, h, w, 3, 1);
        let (mut ch, mut cw, mut cc) = (h, w, cfg.stem_channels);
        let mut blocks = Vec::new();
        for b in 0..cfg.num_residual_blocks {
            let stride = if b == 0 { 1 } else { 2 };
            let cout = cfg.block_channels(b);
            let conv1 = conv(cc, cout, ch, cw, 3, stride);
            let (oh, ow) = (conv1.geom.out_h(), conv1.geom.out_w());
            let conv2 = conv(cout, cout, oh, ow, 3, 1);
            let proj = (b > 0).then(|| conv(cc, cout, ch, cw, 1, stride));
            blocks.push(BlockRef { conv1, conv2, proj });
            (ch, cw, cc) = (oh, ow, cout);
        }
        Layout {
            stem,
            blocks,
            fc1: (idx, idx + 1),
            fc2: (idx + 2, idx + 3),
            hidden: cfg.head_hidden,
            final_c: cc,
            final_hw: ch * cw,
        }
    }

    fn p(&self, i: usize) -> &[T] {
        self.params[i].value.data()
    }

    fn check_batch(&self, batch: &Tensor<T>) -> Result<(usize, usize, usize), NnError> {
        let s = batch.shape();
        if s.len() != 4 || s[1] != self.config.input_channels {
            return Err(NnError::Shape(format!("expected batch [N, {}, H, W], got {s:?}", self.config.input_channels)));
        }
        if s[2] == 0 || s[3] == 0 {
            return Err(NnError::Shape("empty spatial extent".into()));
        }
        Ok((s[0], s[2], s[3]))
    }

    /// One prediction (normalized angle) per sample of a `[N, C, H, W]` batch.
    pub fn forward(&self, batch: &Tensor<T>) -> Result<Vec<T>, NnError> {
        Ok(self.run(batch)?.output)
    }

    fn run(&self, batch: &Tensor<T>) -> Result<Trace<T>, NnError> {
        let (n, h, w) = self.check_batch(batch)?;
        let lay = self.layout(h, w);
        let mut stem_out =
            ops::conv2d_forward(&lay.stem.geom, n, batch.data(), self.p(lay.stem.weight), self.p(lay.stem.bias));
        ops::relu_inplace(&mut stem_out);
        let mut x = stem_out;
        let mut blocks = Vec::with_capacity(lay.blocks.len());
        for b in &lay.blocks {
            let mut mid = ops::conv2d_forward(&b.conv1.geom, n, &x, self.p(b.conv1.weight), self.p(b.conv1.bias));
            ops::relu_inplace(&mut mid);
            let mut out = ops::conv2d_forward(&b.conv2.geom, n, &mid, self.p(b.conv2.weight), self.p(b.conv2.bias));
            match &b.proj {
                Some(pr) => {
                    let sc = ops::conv2d_forward(&pr.geom, n, &x, self.p(pr.weight), self.p(pr.bias));
                    out.iter_mut().zip(&sc).for_each(|(o, s)| *o += *s);
                }
                None => out.iter_mut().zip(&x).for_each(|(o, s)| *o += *s),
            }
            blocks.push(BlockTrace { input: x, mid });
            x = out;
        }
        let pooled = ops::global_avg_pool(&x, n, lay.final_c, lay.final_hw);
        let mut hidden = ops::linear_forward(&pooled, n, lay.final_c, lay.hidden, self.p(lay.fc1.0), self.p(lay.fc1.1));
        ops::relu_inplace(&mut hidden);
        let output = ops::linear_forward(&hidden, n, lay.hidden, 1, self.p(lay.fc2.0), self.p(lay.fc2.1));
        Ok(Trace { n, lay, input: batch.data().to_vec(), blocks, pooled, hidden, output })
    }

    /// Mean squared error against `targets` and its gradient for every
    /// parameter (same order as `params`), by reverse-mode accumulation
    /// through the recorded forward pass.
    pub fn loss_and_grad(&self, batch: &Tensor<T>, targets: &[T]) -> Result<(T, Vec<Tensor<T>>), NnError> {
        let tr = self.run(batch)?;
        let n = tr.n;
        if targets.len() != n {
            return Err(NnError::Shape(format!("{} targets for a batch of {n}", targets.len())));
        }
        let nt = T::from_usize(n).unwrap();
        let two = T::from_f64_lossy(2.0);
        let loss = tr.output.iter().zip(targets).map(|(&p, &t)| (p - t) * (p - t)).sum::<T>() / nt;
        if !loss.is_finite() {
            return Err(NnError::NonFinite(format!("loss is {:?}", loss)));
        }
        let dout: Vec<T> = tr.output.iter().zip(targets).map(|(&p, &t)| two * (p - t) / nt).collect();
        let mut grads = self.zero_grads();
        let lay = &tr.lay;

        let mut dhidden = {
            let (dw, db) = two_mut(&mut grads, lay.fc2.0, lay.fc2.1);
            ops::linear_backward(&tr.hidden, n, lay.hidden, 1, self.p(lay.fc2.0), &dout, dw, db)
        };
        ops::relu_backward_inplace(&tr.hidden, &mut dhidden);
        let dpooled = {
            let (dw, db) = two_mut(&mut grads, lay.fc1.0, lay.fc1.1);
            ops::linear_backward(&tr.pooled, n, lay.final_c, lay.hidden, self.p(lay.fc1.0), &dhidden, dw, db)
        };
        let mut dx = ops::global_avg_pool_backward(&dpooled, lay.final_hw);
        for (b, bt) in lay.blocks.iter().zip(&tr.blocks).rev() {
            let mut dmid = {
                let (dw, db) = two_mut(&mut grads, b.conv2.weight, b.conv2.bias);
                ops::conv2d_backward(&b.conv2.geom, n, &bt.mid, self.p(b.conv2.weight), &dx, dw, db, true).unwrap()
            };
            ops::relu_backward_inplace(&bt.mid, &mut dmid);
            let mut dinput = {
                let (dw, db) = two_mut(&mut grads, b.conv1.weight, b.conv1.bias);
                ops::conv2d_backward(&b.conv1.geom, n, &bt.input, self.p(b.conv1.weight), &dmid, dw, db, true).unwrap()
            };
            match &b.proj {
                Some(pr) => {
                    let (dw, db) = two_mut(&mut grads, pr.weight, pr.bias);
                    let dsc =
                        ops::conv2d_backward(&pr.geom, n, &bt.input, self.p(pr.weight), &dx, dw, db, true).unwrap();
                    dinput.iter_mut().zip(&dsc).for_each(|(a, b)| *a += *b);
                }
                None => dinput.iter_mut().zip(&dx).for_each(|(a, b)| *a += *b),
            }
            dx = dinput;
        }
        // blocks[0].input is the post-ReLU stem output.
        ops::relu_backward_inplace(&tr.blocks[0].input, &mut dx);
        let (dw, db) = two_mut(&mut grads, lay.stem.weight, lay.stem.bias);
        ops::conv2d_backward(&lay.stem.geom, n, &tr.input, self.p(lay.stem.weight), &dx, dw, db, false);
        if let Some(bad) = grads.iter().zip(&self.params).find(|(g, _)| !g.all_finite()) {
            return Err(NnError::NonFinite(format!("gradient of {} is not finite", bad.1.name)));
        }
        Ok((loss, grads))
    }
}

fn two_mut<T: Real>(grads: &mut [Tensor<T>], a: usize, b: usize) -> (&mut [T], &mut [T]) {
    assert!(a < b);
    let (lo, hi) = grads.split_at_mut(b);
    (lo[a].data_mut(), hi[0].data_mut())
}

struct BlockTrace<T> {
    input: Vec<T>,
    mid: Vec<T>,
}

struct Trace<T> {
    n: usize,
    lay: Layout,
    input: Vec<T>,
    blocks: Vec<BlockTrace<T>>,
    pooled: Vec<T>,
    hidden: Vec<T>,
    output: Vec<T>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn batch(n: usize, c: usize, h: usize, w: usize, k: f64) -> Tensor<f64> {
        let data = (0..n * c * h * w).map(|i| ((i as f64 + 0.5) * k).sin().abs()).collect();
        Tensor::from_vec(&[n, c, h, w], data).unwrap()
    }

    #[test]
    fn parameter_count_closed_form() {
        // stem 2*8*9+8 = 152; block0 2*(8*8*9+8) = 1168;
        // block1 (16*8*9+16)+(16*16*9+16)+(16*8+16) = 3632; head 64*16+64+64+1 = 1153.
        let cfg = ModelConfig::default();
        assert_eq!(cfg.parameter_count(), 6105);
        let m = init_model::<f32>(&cfg).unwrap();
        assert_eq!(m.parameter_count(), 6105);
        // 1 channel, stem 4, 3 blocks, head 8:
        // stem 4*9+4=40; b0 2*(16*9+4)=296; b1 (8*4*9+8)+(8*8*9+8)+(8*4+8)=920;
        // b2 (16*8*9+16)+(16*16*9+16)+(16*8+16)=3632; head 8*16+8+8+1=145.
        let cfg = ModelConfig { input_channels: 1, stem_channels: 4, num_residual_blocks: 3, head_hidden: 8, seed: 0 };
        assert_eq!(init_model::<f32>(&cfg).unwrap().parameter_count(), 40 + 296 + 920 + 3632 + 145);
    }

    #[test]
    fn init_is_seeded_and_output_layer_is_zero() {
        let cfg = ModelConfig { seed: 11, ..Default::default() };
        let a = init_model::<f32>(&cfg).unwrap();
        assert_eq!(a, init_model::<f32>(&cfg).unwrap());
        let b = init_model::<f32>(&ModelConfig { seed: 12, ..Default::default() }).unwrap();
        assert_ne!(a, b);
        assert!(a.param("head.fc2.weight").unwrap().data().iter().all(|&v| v == 0.0));
        assert!(a.param("head.fc2.bias").unwrap().data().iter().all(|&v| v == 0.0));
        let preds = a.cast::<f64>().forward(&batch(3, 2, 12, 10, 0.3)).unwrap();
        assert_eq!(preds, vec![0.0; 3]);
    }

    #[test]
    fn samples_are_independent() {
        let mut m = init_model::<f64>(&ModelConfig { seed: 3, ..Default::default() }).unwrap();
        m.param_mut("head.fc2.weight").unwrap().fill(0.1);
        let one = batch(1, 2, 9, 9, 0.7);
        let mut doubled = one.data().to_vec();
        doubled.extend_from_slice(one.data());
        let two = Tensor::from_vec(&[2, 2, 9, 9], doubled).unwrap();
        let p1 = m.forward(&one).unwrap();
        let p2 = m.forward(&two).unwrap();
        assert_eq!(p2, vec![p1[0], p1[0]]);
        assert!(p1[0] != 0.0);
    }

    #[test]
    fn wrong_channels_are_rejected() {
        let m = init_model::<f64>(&ModelConfig::default()).unwrap();
        assert!(matches!(m.forward(&batch(1, 1, 8, 8, 0.1)), Err(NnError::Shape(_))));
        assert!(m.loss_and_grad(&batch(2, 2, 8, 8, 0.1), &[0.0]).is_err());
    }

    #[test]
    fn zero_residual_block_is_identity() {
        // With zero conv weights/biases the first block passes the stem
        // activations through unchanged, so the pooled features equal the
        // pooled stem output.
        let cfg = ModelConfig { num_residual_blocks: 1, ..Default::default() };
        let mut m = init_model::<f64>(&cfg).unwrap();
        for name in ["block0.conv1.weight", "block0.conv2.weight"] {
            m.param_mut(name).unwrap().fill(0.0);
        }
        let x = batch(2, 2, 6, 7, 0.9);
        let tr = m.run(&x).unwrap();
        let stem_pooled = ops::global_avg_pool(&tr.blocks[0].input, 2, 8, 42);
        assert_eq!(tr.pooled, stem_pooled);
    }

    #[test]
    fn perfect_prediction_has_zero_gradient() {
        let mut m = init_model::<f64>(&ModelConfig { seed: 5, ..Default::default() }).unwrap();
        m.param_mut("head.fc2.weight").unwrap().fill(0.05);
        let x = batch(3, 2, 8, 8, 0.2);
        let preds = m.forward(&x).unwrap();
        let (loss, grads) = m.loss_and_grad(&x, &preds).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grads.iter().all(|g| g.data().iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn transfer_init_examples() {
        let t = Tensor::<f64>::from_vec(&[1, 3, 1, 1], vec![1.0, 2.0, 3.0]).unwrap();
        let out = transfer_init_first_layer(&t).unwrap();
        assert_eq!(out.shape(), &[1, 2, 1, 1]);
        assert_eq!(out.data(), &[2.0, 2.0]);
        let z = Tensor::<f64>::zeros(&[4, 3, 3, 3]);
        assert!(transfer_init_first_layer(&z).unwrap().data().iter().all(|&v| v == 0.0));
        assert!(transfer_init_first_layer(&Tensor::<f64>::zeros(&[4, 2, 3, 3])).is_err());
    }
}
