use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tensor::{Scalar, Tensor};
use super::NnError;

pub const LEAKY_SLOPE: f64 = 0.1;

/// Backbone depth and width; block `i` has `base_width · 2^i` channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub blocks: usize,
    pub base_width: usize,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self { blocks: 5, base_width: 8 }
    }
}

impl NetworkConfig {
    pub fn channels(&self, block: usize) -> usize {
        self.base_width << block
    }

    pub fn feature_dim(&self) -> usize {
        self.channels(self.blocks - 1)
    }

    /// Smallest spatial size surviving all pooling stages.
    pub fn min_input_size(&self) -> usize {
        1 << self.blocks
    }

    /// Parameter names and shapes in declaration order.
    pub fn layout(&self) -> Vec<(String, Vec<usize>)> {
        let mut out = Vec::new();
        let mut c_in = 3;
        for i in 0..self.blocks {
            let c = self.channels(i);
            out.push((format!("block{i}.weight"), vec![c, c_in, 3, 3]));
            out.push((format!("block{i}.bias"), vec![c]));
            c_in = c;
        }
        let f = self.feature_dim();
        out.push(("head_t.weight".into(), vec![3, f]));
        out.push(("head_t.bias".into(), vec![3]));
        out.push(("head_r.weight".into(), vec![6, f]));
        out.push(("head_r.bias".into(), vec![6]));
        out.push(("sigma_r".into(), vec![1]));
        out.push(("sigma_t".into(), vec![1]));
        out
    }

    fn validate(&self) -> Result<(), NnError> {
        if self.blocks == 0 || self.base_width == 0 || self.blocks > 12 {
            return Err(NnError::Config(format!("invalid backbone {self:?}")));
        }
        Ok(())
    }
}

/// Learnables in [`NetworkConfig::layout`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct Network<T> {
    pub config: NetworkConfig,
    pub params: Vec<Tensor<T>>,
}

/// Per-sample activations retained for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    blocks: Vec<BlockCache<T>>,
    map_dims: (usize, usize, usize),
    mask: Vec<T>,
    pub features: Vec<T>,
}

#[derive(Debug, Clone)]
struct BlockCache<T> {
    c_in: usize,
    h: usize,
    w: usize,
    cols: Vec<T>,
    z: Vec<T>,
    argmax: Vec<u32>,
}

/// Head outputs for one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction<T> {
    pub t: [T; 3],
    pub r: [T; 6],
}

fn im2col<T: Scalar>(input: &[T], c: usize, h: usize, w: usize, cols: &mut [T]) {
    let hw = h * w;
    for ch in 0..c {
        let plane = &input[ch * hw..(ch + 1) * hw];
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &mut cols[((ch * 9) + ky * 3 + kx) * hw..][..hw];
                for y in 0..h {
                    let dst = &mut row[y * w..(y + 1) * w];
                    let yy = y as isize + ky as isize - 1;
                    if yy < 0 || yy >= h as isize {
                        dst.fill(T::zero());
                        continue;
                    }
                    let src = &plane[yy as usize * w..][..w];
                    match kx {
                        0 => {
                            dst[0] = T::zero();
                            dst[1..].copy_from_slice(&src[..w - 1]);
                        }
                        1 => dst.copy_from_slice(src),
                        _ => {
                            dst[..w - 1].copy_from_slice(&src[1..]);
                            dst[w - 1] = T::zero();
                        }
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]; accumulates into `out`.
fn col2im<T: Scalar>(cols: &[T], c: usize, h: usize, w: usize, out: &mut [T]) {
    let hw = h * w;
    for ch in 0..c {
        let plane = &mut out[ch * hw..(ch + 1) * hw];
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &cols[((ch * 9) + ky * 3 + kx) * hw..][..hw];
                for y in 0..h {
                    let yy = y as isize + ky as isize - 1;
                    if yy < 0 || yy >= h as isize {
                        continue;
                    }
                    let src = &row[y * w..(y + 1) * w];
                    let dst = &mut plane[yy as usize * w..][..w];
                    match kx {
                        0 => dst[..w - 1].iter_mut().zip(&src[1..]).for_each(|(d, s)| *d += *s),
                        1 => dst.iter_mut().zip(src).for_each(|(d, s)| *d += *s),
                        _ => dst[1..].iter_mut().zip(&src[..w - 1]).for_each(|(d, s)| *d += *s),
                    }
                }
            }
        }
    }
}

pub fn sample_dropout_mask<T: Scalar, R: Rng>(channels: usize, p: f64, rng: &mut R) -> Vec<T> {
    let keep = T::of(1.0 / (1.0 - p));
    (0..channels).map(|_| if p > 0.0 && rng.random::<f64>() < p { T::zero() } else { keep }).collect()
}

impl<T: Scalar> Network<T> {
    /// He-uniform convolution kernels, zero biases and log-std learnables.
    pub fn new(config: NetworkConfig, seed: u64) -> Result<Self, NnError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = config
            .layout()
            .into_iter()
            .map(|(name, shape)| {
                let mut t = Tensor::zeros(&shape);
                if name.ends_with(".weight") {
                    let fan_in: usize = shape[1..].iter().product();
                    let bound = (6.0 / fan_in as f64).sqrt();
                    t.data.iter_mut().for_each(|v| *v = T::of(rng.random_range(-bound..bound)));
                }
                t
            })
            .collect();
        Ok(Self { config, params })
    }

    pub fn from_params(config: NetworkConfig, params: Vec<Tensor<T>>) -> Result<Self, NnError> {
        config.validate()?;
        let layout = config.layout();
        if layout.len() != params.len() || layout.iter().zip(&params).any(|((_, s), p)| *s != p.shape) {
            return Err(NnError::ShapeMismatch("parameter shapes do not match the configuration".into()));
        }
        Ok(Self { config, params })
    }

    pub fn zeros_like(&self) -> Vec<Tensor<T>> {
        self.params.iter().map(|p| Tensor::zeros(&p.shape)).collect()
    }

    pub fn cast<U: Scalar>(&self) -> Network<U> {
        Network { config: self.config, params: self.params.iter().map(Tensor::cast).collect() }
    }

    pub fn parameter_count(&self) -> usize {
        self.params.iter().map(Tensor::len).sum()
    }

    fn head_index(&self) -> usize {
        2 * self.config.blocks
    }

    pub fn sigma_r(&self) -> T {
        self.params[self.head_index() + 4].data[0]
    }

    pub fn sigma_t(&self) -> T {
        self.params[self.head_index() + 5].data[0]
    }

    pub fn sigma_indices(&self) -> (usize, usize) {
        (self.head_index() + 4, self.head_index() + 5)
    }

    pub fn check_input(&self, c: usize, h: usize, w: usize, len: usize) -> Result<(), NnError> {
        let min = self.config.min_input_size();
        if c != 3 || h < min || w < min || len != c * h * w {
            return Err(NnError::ShapeMismatch(format!("input 3×{h}×{w} (len {len}) needs three channels and H, W ≥ {min}")));
        }
        Ok(())
    }

    /// Forward pass of one `3×h×w` image. `mask` scales the final feature
    /// channels (dropout); `None` is evaluation mode.
    pub fn forward_cached(&self, input: &[T], h: usize, w: usize, mask: Option<&[T]>) -> Result<(Prediction<T>, ForwardCache<T>), NnError> {
        self.check_input(3, h, w, input.len())?;
        let slope = T::of(LEAKY_SLOPE);
        let mut act = input.to_vec();
        let (mut c, mut h, mut w) = (3, h, w);
        let mut blocks = Vec::with_capacity(self.config.blocks);
        for i in 0..self.config.blocks {
            let c_out = self.config.channels(i);
            let hw = h * w;
            let mut cols = vec![T::zero(); c * 9 * hw];
            im2col(&act, c, h, w, &mut cols);
            let (weight, bias) = (&self.params[2 * i], &self.params[2 * i + 1]);
            let mut z = vec![T::zero(); c_out * hw];
            for (o, b) in bias.data.iter().enumerate() {
                z[o * hw..(o + 1) * hw].fill(*b);
            }
            super::tensor::matmul(c_out, c * 9, hw, &weight.data, &cols, &mut z, true);
            let (h2, w2) = (h / 2, w / 2);
            let mut pooled = vec![T::zero(); c_out * h2 * w2];
            let mut argmax = vec![0u32; c_out * h2 * w2];
            for o in 0..c_out {
                let plane = &z[o * hw..(o + 1) * hw];
                for y in 0..h2 {
                    for x in 0..w2 {
                        let mut best = 2 * y * w + 2 * x;
                        for idx in [2 * y * w + 2 * x + 1, (2 * y + 1) * w + 2 * x, (2 * y + 1) * w + 2 * x + 1] {
                            if plane[idx] > plane[best] {
                                best = idx;
                            }
                        }
                        // Leaky ReLU is monotone, so it commutes with max.
                        let v = plane[best];
                        let k = o * h2 * w2 + y * w2 + x;
                        pooled[k] = if v > T::zero() { v } else { v * slope };
                        argmax[k] = (o * hw + best) as u32;
                    }
                }
            }
            blocks.push(BlockCache { c_in: c, h, w, cols, z, argmax });
            act = pooled;
            c = c_out;
            h /= 2;
            w /= 2;
        }
        let hw = h * w;
        let mask = match mask {
            Some(m) if m.len() != c => return Err(NnError::ShapeMismatch("dropout mask length".into())),
            Some(m) => m.to_vec(),
            None => vec![T::one(); c],
        };
        let inv = T::of(1.0 / hw as f64);
        let features: Vec<T> = (0..c).map(|ch| act[ch * hw..(ch + 1) * hw].iter().copied().sum::<T>() * inv * mask[ch]).collect();
        let hi = self.head_index();
        let head = |wi: usize, rows: usize, out: &mut [T]| {
            let (wt, b) = (&self.params[wi].data, &self.params[wi + 1].data);
            for r in 0..rows {
                out[r] = b[r] + wt[r * c..(r + 1) * c].iter().zip(&features).map(|(a, f)| *a * *f).sum::<T>();
            }
        };
        let mut pred = Prediction { t: [T::zero(); 3], r: [T::zero(); 6] };
        head(hi, 3, &mut pred.t);
        head(hi + 2, 6, &mut pred.r);
        debug_assert!(pred.t.iter().chain(&pred.r).all(|v| v.is_finite()), "non-finite network output");
        Ok((pred, ForwardCache { blocks, map_dims: (c, h, w), mask, features }))
    }

    pub fn forward(&self, input: &[T], h: usize, w: usize) -> Result<Prediction<T>, NnError> {
        self.forward_cached(input, h, w, None).map(|(p, _)| p)
    }

    /// Batched evaluation-mode forward of a `B×3×H×W` tensor.
    pub fn forward_batch(&self, batch: &Tensor<T>) -> Result<(Tensor<T>, Tensor<T>), NnError> {
        let [b, c, h, w] = batch.shape[..] else {
            return Err(NnError::ShapeMismatch(format!("expected B×3×H×W, got {:?}", batch.shape)));
        };
        let per = c * h * w;
        self.check_input(c, h, w, per)?;
        let mut t = Tensor::zeros(&[b, 3]);
        let mut r = Tensor::zeros(&[b, 6]);
        for i in 0..b {
            let p = self.forward(&batch.data[i * per..(i + 1) * per], h, w)?;
            t.data[i * 3..(i + 1) * 3].copy_from_slice(&p.t);
            r.data[i * 6..(i + 1) * 6].copy_from_slice(&p.r);
        }
        Ok((t, r))
    }

    /// Accumulates into `grads` the gradients of a scalar whose partials
    /// with respect to the head outputs are `dt` and `dr`.
    pub fn backward(&self, cache: &ForwardCache<T>, dt: &[T; 3], dr: &[T; 6], grads: &mut [Tensor<T>]) {
        let slope = T::of(LEAKY_SLOPE);
        let (c, h, w) = cache.map_dims;
        let hi = self.head_index();
        let mut dfeat = vec![T::zero(); c];
        for (wi, d) in [(hi, &dt[..]), (hi + 2, &dr[..])] {
            let wt = &self.params[wi].data;
            for (r, &g) in d.iter().enumerate() {
                grads[wi + 1].data[r] += g;
                let gw = &mut grads[wi].data[r * c..(r + 1) * c];
                for ch in 0..c {
                    gw[ch] += g * cache.features[ch];
                    dfeat[ch] += g * wt[r * c + ch];
                }
            }
        }
        let hw = h * w;
        let inv = T::of(1.0 / hw as f64);
        let mut dact: Vec<T> = Vec::with_capacity(c * hw);
        for ch in 0..c {
            let g = dfeat[ch] * cache.mask[ch] * inv;
            dact.extend(std::iter::repeat_n(g, hw));
        }
        for (i, bc) in cache.blocks.iter().enumerate().rev() {
            let c_out = self.config.channels(i);
            let hw = bc.h * bc.w;
            let mut dz = vec![T::zero(); c_out * hw];
            for (k, &idx) in bc.argmax.iter().enumerate() {
                let idx = idx as usize;
                let d = if bc.z[idx] > T::zero() { dact[k] } else { dact[k] * slope };
                dz[idx] += d;
            }
            let gb = &mut grads[2 * i + 1].data;
            for o in 0..c_out {
                gb[o] += dz[o * hw..(o + 1) * hw].iter().copied().sum::<T>();
            }
            let k = bc.c_in * 9;
            // dW += dZ · colsᵀ
            T::gemm(c_out, hw, k, T::one(), &dz, hw as isize, 1, &bc.cols, 1, hw as isize, T::one(), &mut grads[2 * i].data, k as isize, 1);
            if i == 0 {
                break;
            }
            // dcols = Wᵀ · dZ
            let mut dcols = vec![T::zero(); k * hw];
            let wt = &self.params[2 * i].data;
            T::gemm(k, c_out, hw, T::one(), wt, 1, k as isize, &dz, hw as isize, 1, T::zero(), &mut dcols, hw as isize, 1);
            let mut dinput = vec![T::zero(); bc.c_in * hw];
            col2im(&dcols, bc.c_in, bc.h, bc.w, &mut dinput);
            dact = dinput;
        }
    }
}
