use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::eval::prediction_to_pose;
use super::loss::{combine, residual_gradient, sigma_gradient, LossValue};
use super::network::{sample_dropout_mask, Network, NetworkConfig, Prediction};
use super::tensor::{Scalar, Tensor};
use super::optim::{adam_step, cyclical_lr, AdamState};
use super::NnError;
use crate::dataset::{SequenceRecord, SplitPlan};
use crate::imaging::{
    apply_photometric, sample_photometric, sample_warp, warp_with, CameraIntrinsics, Image, PhotometricStrength, WarpLimits, SENSOR_HEIGHT,
    SENSOR_WIDTH,
};
use crate::pose::{attitude_error, dcm_to_rot6d, position_error, Pose};

/// How per-frame residual norms are reduced over a mini-batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BatchReduction {
    #[default]
    Sum,
    Mean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr_max: f64,
    pub cycles: usize,
    pub dropout_p: f64,
    pub seed: u64,
    /// Input is the sensor resolution divided by this factor.
    pub downscale: u32,
    pub network: NetworkConfig,
    pub augment: bool,
    pub photometric: PhotometricStrength,
    pub warp: WarpLimits,
    pub reduction: BatchReduction,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 16,
            lr_max: 1e-3,
            cycles: 5,
            dropout_p: 0.2,
            seed: 0,
            downscale: 4,
            network: NetworkConfig::default(),
            augment: true,
            photometric: PhotometricStrength::default(),
            warp: WarpLimits::default(),
            reduction: BatchReduction::Sum,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), NnError> {
        let fail = |m: &str| Err(NnError::Config(m.to_string()));
        if !(self.cycles >= 1 && self.epochs >= self.cycles) {
            return fail("epochs ≥ cycles ≥ 1 required");
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return fail("dropout_p must lie in [0, 1)");
        }
        if self.batch_size == 0 {
            return fail("batch_size must be positive");
        }
        if !(self.lr_max > 0.0 && self.lr_max.is_finite()) {
            return fail("lr_max must be positive");
        }
        if self.downscale == 0 || SENSOR_WIDTH % self.downscale != 0 || SENSOR_HEIGHT % self.downscale != 0 {
            return fail("downscale must divide the sensor resolution");
        }
        let (w, h) = self.input_size();
        let min = 1usize << self.network.blocks.min(20);
        if w < min || h < min {
            return Err(NnError::Config(format!("input {w}×{h} is smaller than {min} px")));
        }
        Ok(())
    }

    /// Network input `(width, height)`.
    pub fn input_size(&self) -> (usize, usize) {
        ((SENSOR_WIDTH / self.downscale) as usize, (SENSOR_HEIGHT / self.downscale) as usize)
    }
}

/// Pixel values mapped to `[−0.5, 0.5]`, channel-major.
pub fn image_to_input(img: &Image) -> Vec<f32> {
    img.to_chw_f32().into_iter().map(|v| v - 0.5).collect()
}

/// Box-downsamples by an integer factor to the network input size.
pub fn resize_for_input(img: &Image, (w, h): (usize, usize)) -> Result<Image, NnError> {
    let (iw, ih) = (img.width as usize, img.height as usize);
    if (iw, ih) == (w, h) {
        return Ok(img.clone());
    }
    let f = iw / w.max(1);
    if f == 0 || iw != f * w || ih != f * h {
        return Err(NnError::ShapeMismatch(format!("{iw}×{ih} image cannot be reduced to {w}×{h}")));
    }
    let mut out = Image::new(w as u32, h as u32);
    let n = (f * f) as u32;
    for y in 0..h {
        for x in 0..w {
            let mut acc = [0u32; 3];
            for dy in 0..f {
                for dx in 0..f {
                    let p = img.get((x * f + dx) as u32, (y * f + dy) as u32);
                    (0..3).for_each(|c| acc[c] += p[c] as u32);
                }
            }
            out.put(x as u32, y as u32, acc.map(|a| ((a + n / 2) / n) as u8));
        }
    }
    Ok(out)
}

fn scale_intrinsics(k: &CameraIntrinsics, (w, h): (usize, usize)) -> CameraIntrinsics {
    let s = w as f64 / k.width as f64;
    CameraIntrinsics { width: w as u32, height: h as u32, fx: k.fx * s, fy: k.fy * s, cx: k.cx * s, cy: k.cy * s }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub image: Image,
    pub pose: Pose,
    pub camera: CameraIntrinsics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingData {
    pub train: Vec<Sample>,
    pub val: Vec<Sample>,
    pub input: (usize, usize),
}

/// Loads every frame referenced by the split at the configured input size.
pub fn load_training_data(records: &[SequenceRecord], plan: &SplitPlan, config: &TrainConfig) -> Result<TrainingData, NnError> {
    config.validate()?;
    let input = config.input_size();
    let load = |chunks: &[crate::dataset::Chunk]| -> Result<Vec<Sample>, NnError> {
        let mut out = Vec::new();
        for c in chunks {
            let rec = records
                .iter()
                .find(|r| r.id == c.sequence)
                .ok_or_else(|| NnError::Config(format!("split references unknown sequence {}", c.sequence)))?;
            if c.end > rec.frames.len() || c.start > c.end {
                return Err(NnError::Config(format!("chunk {}..{} outside sequence {}", c.start, c.end, c.sequence)));
            }
            let camera = scale_intrinsics(&rec.camera, input);
            for i in c.range() {
                let image = resize_for_input(&Image::load(&rec.image_path(i))?, input)?;
                out.push(Sample { image, pose: rec.frames[i].pose, camera });
            }
        }
        Ok(out)
    };
    Ok(TrainingData { train: load(&plan.train)?, val: load(&plan.val)?, input })
}

/// Loss and metric means over one split for one epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitMetrics {
    pub loss: f64,
    pub mean_dt_m: f64,
    pub mean_dq_deg: f64,
    pub mean_dtr_frac: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub lr: f64,
    pub train: SplitMetrics,
    pub val: Option<SplitMetrics>,
}

pub fn metrics_csv(log: &[EpochLog]) -> String {
    let mut s = String::from("epoch,split,loss,mean_dt_m,mean_dq_deg,mean_dtr_frac\n");
    for e in log {
        for (name, m) in [("train", Some(e.train)), ("val", e.val)] {
            if let Some(m) = m {
                s.push_str(&format!("{},{name},{},{},{},{}\n", e.epoch, m.loss, m.mean_dt_m, m.mean_dq_deg, m.mean_dtr_frac));
            }
        }
    }
    s
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters of the epoch with the lowest validation loss (training
    /// loss when there is no validation split).
    pub network: Network<f32>,
    pub best_epoch: usize,
    pub log: Vec<EpochLog>,
}

#[derive(Default)]
struct Accum {
    l_r: f64,
    l_t: f64,
    dt: f64,
    dq: f64,
    dtr: f64,
    n: usize,
}

impl Accum {
    fn add(&mut self, pred: &Prediction<f32>, t: &[f32; 3], r: &[f32; 6], pose: &Pose) {
        let norm = |a: &[f32], b: &[f32]| a.iter().zip(b).map(|(x, y)| ((x - y) as f64).powi(2)).sum::<f64>().sqrt();
        self.l_t += norm(&pred.t, t);
        self.l_r += norm(&pred.r, r);
        match prediction_to_pose(pred) {
            Ok(p) => {
                let dt = position_error(&p.translation, &pose.translation);
                self.dt += dt;
                self.dq += attitude_error(&p.rotation, &pose.rotation);
                self.dtr += dt / pose.translation.norm();
            }
            Err(_) => {
                self.dt += norm(&pred.t, t);
                self.dq += 180.0;
                self.dtr += norm(&pred.t, t) / pose.translation.norm();
            }
        }
        self.n += 1;
    }

    fn metrics(&self, loss: f64) -> SplitMetrics {
        let n = self.n.max(1) as f64;
        SplitMetrics { loss, mean_dt_m: self.dt / n, mean_dq_deg: self.dq / n, mean_dtr_frac: self.dtr / n }
    }
}

fn labels(pose: &Pose) -> ([f32; 3], [f32; 6]) {
    let t = pose.translation;
    let r = dcm_to_rot6d(&pose.rotation.to_dcm()).0;
    ([t.x as f32, t.y as f32, t.z as f32], r.map(|v| v as f32))
}

/// Training objective per frame for a nominal batch of per-frame mean
/// residual norms `mean_r`, `mean_t`.
pub fn frame_loss(mean_r: f64, mean_t: f64, sigma_r: f64, sigma_t: f64, config: &TrainConfig) -> f64 {
    let k = match config.reduction {
        BatchReduction::Sum => config.batch_size as f64,
        BatchReduction::Mean => 1.0,
    };
    combine(k * mean_r, k * mean_t, sigma_r, sigma_t) / k
}

fn validation(net: &Network<f32>, samples: &[Sample], input: (usize, usize), config: &TrainConfig) -> Result<SplitMetrics, NnError> {
    let mut acc = Accum::default();
    for s in samples {
        let pred = net.forward(&image_to_input(&s.image), input.1, input.0)?;
        let (t, r) = labels(&s.pose);
        acc.add(&pred, &t, &r, &s.pose);
    }
    let n = acc.n.max(1) as f64;
    let loss = frame_loss(acc.l_r / n, acc.l_t / n, net.sigma_r() as f64, net.sigma_t() as f64, config);
    Ok(acc.metrics(loss))
}

fn augmented(s: &Sample, config: &TrainConfig, rng: &mut ChaCha8Rng) -> Result<(Image, Pose), NnError> {
    if !config.augment {
        return Ok((s.image.clone(), s.pose));
    }
    let (photo_seed, warp_seed) = (rng.random::<u64>(), rng.random::<u64>());
    let img = apply_photometric(&s.image, &sample_photometric(photo_seed, &config.photometric));
    match sample_warp(warp_seed, &config.warp, &s.pose, &s.camera) {
        Ok(delta) => Ok(warp_with(&img, &s.pose, &s.camera, &delta)?),
        Err(_) => Ok((img, s.pose)),
    }
}

/// One labelled network input; `mask` scales the pooled features (dropout).
#[derive(Debug, Clone, PartialEq)]
pub struct BatchItem<T> {
    pub input: Vec<T>,
    pub t: [T; 3],
    pub r: [T; 6],
    pub mask: Option<Vec<T>>,
}

/// Loss of a mini-batch and its gradient with respect to every learnable,
/// accumulated into `grads` (zeroed by the caller).
pub fn batch_gradients<T: Scalar>(
    net: &Network<T>,
    batch: &[BatchItem<T>],
    h: usize,
    w: usize,
    reduction: BatchReduction,
    grads: &mut [Tensor<T>],
) -> Result<(LossValue<T>, Vec<Prediction<T>>), NnError> {
    let scale = match reduction {
        BatchReduction::Sum => T::one(),
        BatchReduction::Mean => T::one() / T::of(batch.len().max(1) as f64),
    };
    let (sr, st) = (net.sigma_r(), net.sigma_t());
    let norm = |v: &[T]| v.iter().map(|x| *x * *x).sum::<T>().sqrt();
    let (mut l_r, mut l_t) = (T::zero(), T::zero());
    let mut preds = Vec::with_capacity(batch.len());
    for item in batch {
        let (pred, cache) = net.forward_cached(&item.input, h, w, item.mask.as_deref())?;
        let dt = residual_gradient(&pred.t, &item.t, st).map(|v| v * scale);
        let dr = residual_gradient(&pred.r, &item.r, sr).map(|v| v * scale);
        net.backward(&cache, &dt, &dr, grads);
        l_t += norm(&std::array::from_fn::<T, 3, _>(|i| pred.t[i] - item.t[i]));
        l_r += norm(&std::array::from_fn::<T, 6, _>(|i| pred.r[i] - item.r[i]));
        preds.push(pred);
    }
    let (l_r, l_t) = (l_r * scale, l_t * scale);
    let (si_r, si_t) = net.sigma_indices();
    grads[si_r].data[0] += sigma_gradient(l_r, sr);
    grads[si_t].data[0] += sigma_gradient(l_t, st);
    Ok((LossValue { l_r, l_t, total: combine(l_r, l_t, sr, st) }, preds))
}

pub fn train(data: &TrainingData, config: &TrainConfig) -> Result<TrainOutcome, NnError> {
    config.validate()?;
    if data.train.is_empty() {
        return Err(NnError::EmptySplit);
    }
    let (w, h) = data.input;
    let mut net = Network::<f32>::new(config.network, config.seed)?;
    let mut adam = AdamState::new(&net.params);
    let mut grads = net.zeros_like();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5EED_0F_7A11);
    let channels = config.network.feature_dim();
    let mut order: Vec<usize> = (0..data.train.len()).collect();
    let mut log = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, usize, Network<f32>)> = None;

    for epoch in 0..config.epochs {
        let lr = cyclical_lr(epoch, config.epochs, config.cycles, config.lr_max);
        order.shuffle(&mut rng);
        let mut acc = Accum::default();
        let mut loss_sum = 0.0;
        for batch in order.chunks(config.batch_size) {
            grads.iter_mut().for_each(|g| g.fill(0.0));
            let (sr, st) = (net.sigma_r(), net.sigma_t());
            let before = (acc.l_r, acc.l_t);
            let mut items = Vec::with_capacity(batch.len());
            let mut poses = Vec::with_capacity(batch.len());
            for &i in batch {
                let (img, pose) = augmented(&data.train[i], config, &mut rng)?;
                let (t, r) = labels(&pose);
                let mask = sample_dropout_mask::<f32, _>(channels, config.dropout_p, &mut rng);
                items.push(BatchItem { input: image_to_input(&img), t, r, mask: Some(mask) });
                poses.push(pose);
            }
            let (_, preds) = batch_gradients(&net, &items, h, w, config.reduction, &mut grads)?;
            for ((pred, item), pose) in preds.iter().zip(&items).zip(&poses) {
                acc.add(pred, &item.t, &item.r, pose);
            }
            debug_assert!(grads.iter().all(|g| g.all_finite()), "non-finite gradient");
            adam_step(&mut net.params, &grads, &mut adam, lr);
            let n = batch.len() as f64;
            loss_sum += n * frame_loss((acc.l_r - before.0) / n, (acc.l_t - before.1) / n, sr as f64, st as f64, config);
        }
        let train_metrics = acc.metrics(loss_sum / data.train.len() as f64);
        let val_metrics = if data.val.is_empty() { None } else { Some(validation(&net, &data.val, data.input, config)?) };
        let score = val_metrics.map_or(train_metrics.loss, |m| m.loss);
        log::info!(
            "epoch {epoch}: lr {lr:.2e} train loss {:.4} val loss {}",
            train_metrics.loss,
            val_metrics.map_or("-".to_string(), |m| format!("{:.4}", m.loss))
        );
        log.push(EpochLog { epoch, lr, train: train_metrics, val: val_metrics });
        if best.as_ref().is_none_or(|(s, _, _)| score < *s) {
            best = Some((score, epoch, net.clone()));
        }
    }
    let (_, best_epoch, network) = best.expect("at least one epoch");
    Ok(TrainOutcome { network, best_epoch, log })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pose::{UnitQuaternion, Vec3};

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        assert_eq!(TrainConfig::default().input_size(), (186, 120));
        for bad in [
            TrainConfig { cycles: 0, ..Default::default() },
            TrainConfig { epochs: 4, cycles: 5, ..Default::default() },
            TrainConfig { dropout_p: 1.0, ..Default::default() },
            TrainConfig { dropout_p: -0.1, ..Default::default() },
            TrainConfig { downscale: 5, ..Default::default() },
            TrainConfig { downscale: 24, ..Default::default() },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
    }

    #[test]
    fn box_downsample() {
        let data: Vec<u8> = (0..4 * 2 * 3).map(|i| i as u8 * 10).collect();
        let img = Image::from_raw(4, 2, data).unwrap();
        let small = resize_for_input(&img, (2, 1)).unwrap();
        // Top-left 2×2 block red values 0, 30, 120, 150.
        assert_eq!(small.get(0, 0)[0], 75);
        assert!(resize_for_input(&img, (3, 1)).is_err());
    }

    fn toy_data(n: usize) -> TrainingData {
        let k = crate::imaging::sensor_intrinsics(32, 32);
        let samples = (0..n)
            .map(|i| {
                let data = (0..32 * 32 * 3).map(|j| ((j * (i + 3)) % 251) as u8).collect();
                let pose = Pose::new(UnitQuaternion::from_axis_angle(&Vec3::z(), 0.1 * i as f64), Vec3::new(0.0, 0.1, 2.0 + i as f64 * 0.3));
                Sample { image: Image::from_raw(32, 32, data).unwrap(), pose, camera: k }
            })
            .collect();
        TrainingData { train: samples, val: Vec::new(), input: (32, 32) }
    }

    fn toy_config() -> TrainConfig {
        TrainConfig { epochs: 2, cycles: 1, batch_size: 4, network: NetworkConfig { blocks: 2, base_width: 4 }, ..Default::default() }
    }

    #[test]
    fn empty_split_rejected() {
        let data = TrainingData { train: Vec::new(), val: Vec::new(), input: (32, 32) };
        assert!(matches!(train(&data, &toy_config()), Err(NnError::EmptySplit)));
    }

    #[test]
    fn toy_run_logs_each_epoch_and_repeats() {
        let data = toy_data(10);
        let a = train(&data, &toy_config()).unwrap();
        assert_eq!(a.log.len(), 2);
        let b = train(&data, &toy_config()).unwrap();
        assert_eq!(a.log, b.log);
        assert_eq!(a.network, b.network);
        let csv = metrics_csv(&a.log);
        assert_eq!(csv.lines().count(), 3);
        assert!(csv.starts_with("epoch,split,loss,mean_dt_m,mean_dq_deg,mean_dtr_frac\n"));
    }

    fn random_items(n: usize, h: usize, w: usize, channels: usize, seed: u64) -> Vec<BatchItem<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| BatchItem {
                input: (0..3 * h * w).map(|_| rng.random_range(-1.0..1.0)).collect(),
                t: std::array::from_fn(|_| rng.random_range(-2.0..2.0)),
                r: std::array::from_fn(|_| rng.random_range(-1.0..1.0)),
                mask: Some(sample_dropout_mask(channels, 0.25, &mut rng)),
            })
            .collect()
    }

    #[test]
    fn gradients_match_central_differences() {
        let cfg = NetworkConfig { blocks: 2, base_width: 3 };
        let mut net = Network::<f64>::new(cfg, 11).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for p in net.params.iter_mut() {
            p.data.iter_mut().for_each(|v| *v += rng.random_range(-0.2..0.2));
        }
        let items = random_items(3, 8, 8, cfg.feature_dim(), 13);
        for reduction in [BatchReduction::Sum, BatchReduction::Mean] {
            let mut grads = net.zeros_like();
            batch_gradients(&net, &items, 8, 8, reduction, &mut grads).unwrap();
            let eps = 1e-5;
            let mut worst = 0.0f64;
            for pi in 0..net.params.len() {
                for k in 0..net.params[pi].len() {
                    let mut probe = net.clone();
                    let mut scratch = net.zeros_like();
                    probe.params[pi].data[k] += eps;
                    let up = batch_gradients(&probe, &items, 8, 8, reduction, &mut scratch).unwrap().0.total;
                    probe.params[pi].data[k] -= 2.0 * eps;
                    let down = batch_gradients(&probe, &items, 8, 8, reduction, &mut scratch).unwrap().0.total;
                    let fd = (up - down) / (2.0 * eps);
                    let an = grads[pi].data[k];
                    worst = worst.max((fd - an).abs() / fd.abs().max(an.abs()).max(1e-6));
                }
            }
            assert!(worst < 1e-4, "{reduction:?}: worst relative error {worst:e}");
        }
    }

    #[test]
    fn head_bias_gradient_on_zero_images() {
        let cfg = NetworkConfig { blocks: 2, base_width: 4 };
        let mut net = Network::<f64>::new(cfg, 1).unwrap();
        let hi = 2 * cfg.blocks;
        net.params[hi + 1].data = vec![0.3, -0.4, 1.2];
        net.params[hi + 3].data = vec![1.0, 0.0, 0.0, 0.0, 2.0, 2.0];
        let (sr, st) = net.sigma_indices();
        net.params[sr].data[0] = 0.1;
        net.params[st].data[0] = -0.2;
        let item = BatchItem { input: vec![0.0; 3 * 8 * 8], t: [0.0; 3], r: [0.0; 6], mask: None };
        let batch = vec![item; 4];
        let mut grads = net.zeros_like();
        let (loss, _) = batch_gradients(&net, &batch, 8, 8, BatchReduction::Sum, &mut grads).unwrap();
        // Pooled features are zero, so each prediction equals the head bias.
        let nt = 1.3f64;
        let nr = 3.0f64;
        for (g, b) in grads[hi + 1].data.iter().zip([0.3, -0.4, 1.2]) {
            assert!((g - 4.0 * (0.4f64).exp() * b / nt).abs() < 1e-12);
        }
        for (g, b) in grads[hi + 3].data.iter().zip([1.0, 0.0, 0.0, 0.0, 2.0, 2.0]) {
            assert!((g - 4.0 * (-0.2f64).exp() * b / nr).abs() < 1e-12);
        }
        assert!(grads[hi].data.iter().chain(&grads[hi + 2].data).all(|&g| g == 0.0));
        assert!((loss.l_t - 4.0 * nt).abs() < 1e-12 && (loss.l_r - 4.0 * nr).abs() < 1e-12);
        assert!((grads[sr].data[0] - (-2.0 * 4.0 * nr * (-0.2f64).exp() + 2.0)).abs() < 1e-12);
    }
}
