use super::tensor::{Scalar, Tensor};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub m: Vec<Tensor<T>>,
    pub v: Vec<Tensor<T>>,
    pub step: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(params: &[Tensor<T>]) -> Self {
        let z = || params.iter().map(|p| Tensor::zeros(&p.shape)).collect();
        Self { m: z(), v: z(), step: 0 }
    }
}

/// One bias-corrected Adam update.
pub fn adam_step<T: Scalar>(params: &mut [Tensor<T>], grads: &[Tensor<T>], state: &mut AdamState<T>, lr: f64) {
    assert_eq!(params.len(), grads.len());
    assert_eq!(params.len(), state.m.len());
    state.step += 1;
    let (b1, b2) = (T::of(ADAM_BETA1), T::of(ADAM_BETA2));
    let c1 = T::of(1.0 - ADAM_BETA1.powi(state.step as i32));
    let c2 = T::of(1.0 - ADAM_BETA2.powi(state.step as i32));
    let (lr, eps, one) = (T::of(lr), T::of(ADAM_EPS), T::one());
    for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut state.m).zip(&mut state.v) {
        assert_eq!(p.shape, g.shape);
        for i in 0..p.data.len() {
            let gi = g.data[i];
            m.data[i] = b1 * m.data[i] + (one - b1) * gi;
            v.data[i] = b2 * v.data[i] + (one - b2) * gi * gi;
            let mhat = m.data[i] / c1;
            let vhat = v.data[i] / c2;
            p.data[i] -= lr * mhat / (vhat.sqrt() + eps);
        }
    }
}

/// Triangular schedule: `cycles` periods over `epochs`, each rising from
/// `lr_max/10` to `lr_max` at mid-cycle and back.
pub fn cyclical_lr(epoch: usize, epochs: usize, cycles: usize, lr_max: f64) -> f64 {
    let lo = lr_max / 10.0;
    let period = epochs as f64 / cycles as f64;
    let pos = (epoch as f64 % period) / period;
    lo + (lr_max - lo) * (1.0 - (2.0 * pos - 1.0).abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(v: f64) -> Vec<Tensor<f64>> {
        vec![Tensor::from_vec(&[1], vec![v]).unwrap()]
    }

    #[test]
    fn first_step_is_normalised() {
        for g in [1e-3, 0.5, 40.0] {
            let mut p = single(1.0);
            let mut st = AdamState::new(&p);
            adam_step(&mut p, &single(g), &mut st, 0.01);
            let expected = 1.0 - 0.01 * g / (g + ADAM_EPS);
            assert!((p[0].data[0] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_gradient_converges_to_lr_steps() {
        let mut p = single(0.0);
        let mut st = AdamState::new(&p);
        let mut prev = 0.0;
        let mut last = 0.0;
        for _ in 0..5000 {
            adam_step(&mut p, &single(3.0), &mut st, 1e-3);
            last = prev - p[0].data[0];
            prev = p[0].data[0];
        }
        assert!((last - 1e-3).abs() < 1e-8);
    }

    #[test]
    fn zero_gradient_keeps_params_and_decays_moments() {
        let mut fresh = single(5.0);
        let mut st = AdamState::new(&fresh);
        for _ in 0..10 {
            adam_step(&mut fresh, &single(0.0), &mut st, 0.1);
        }
        assert_eq!(fresh[0].data[0], 5.0);

        let mut p = single(2.0);
        let mut st = AdamState::new(&p);
        adam_step(&mut p, &single(1.0), &mut st, 0.1);
        let (m, v) = (st.m[0].data[0], st.v[0].data[0]);
        adam_step(&mut p, &single(0.0), &mut st, 0.1);
        assert!((st.m[0].data[0] - 0.9 * m).abs() < 1e-15);
        assert!((st.v[0].data[0] - 0.999 * v).abs() < 1e-15);
    }

    #[test]
    fn schedule_shape() {
        let lr = |e| cyclical_lr(e, 30, 5, 1e-3);
        assert!((lr(0) - 1e-4).abs() < 1e-15);
        assert!((lr(3) - 1e-3).abs() < 1e-15);
        let values: Vec<f64> = (0..30).map(lr).collect();
        let peaks = (1..29).filter(|&i| values[i] > values[i - 1] && values[i] > values[i + 1]).count();
        assert_eq!(peaks, 5);
        assert!(values.iter().all(|&v| (1e-4 - 1e-15..=1e-3 + 1e-15).contains(&v)));
    }
}
