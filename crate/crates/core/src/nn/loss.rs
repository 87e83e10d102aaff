use super::tensor::Scalar;

/// Batch loss with learnable log-std weights:
/// `L = L_r·e^{−2σ_r} + L_t·e^{−2σ_t} + 2(σ_r + σ_t)`, where `L_r` and
/// `L_t` sum the unsquared residual norms over the batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossValue<T> {
    pub l_r: T,
    pub l_t: T,
    pub total: T,
}

pub fn combine<T: Scalar>(l_r: T, l_t: T, sigma_r: T, sigma_t: T) -> T {
    let two = T::of(2.0);
    l_r * (-two * sigma_r).exp() + l_t * (-two * sigma_t).exp() + two * (sigma_r + sigma_t)
}

fn norm<T: Scalar>(v: &[T]) -> T {
    v.iter().map(|x| *x * *x).sum::<T>().sqrt()
}

fn residual<T: Scalar, const N: usize>(a: &[T; N], b: &[T; N]) -> [T; N] {
    std::array::from_fn(|i| a[i] - b[i])
}

pub fn loss<T: Scalar>(t_hat: &[[T; 3]], r_hat: &[[T; 6]], t: &[[T; 3]], r: &[[T; 6]], sigma_r: T, sigma_t: T) -> LossValue<T> {
    assert!(t_hat.len() == t.len() && r_hat.len() == r.len() && t.len() == r.len(), "batch-consistent shapes");
    let l_t = t_hat.iter().zip(t).map(|(a, b)| norm(&residual(a, b))).sum::<T>();
    let l_r = r_hat.iter().zip(r).map(|(a, b)| norm(&residual(a, b))).sum::<T>();
    LossValue { l_r, l_t, total: combine(l_r, l_t, sigma_r, sigma_t) }
}

/// `e^{−2σ}·(x̂ − x)/‖x̂ − x‖`, zero at zero residual.
pub fn residual_gradient<T: Scalar, const N: usize>(pred: &[T; N], label: &[T; N], sigma: T) -> [T; N] {
    let d = residual(pred, label);
    let n = norm(&d);
    if n == T::zero() {
        return [T::zero(); N];
    }
    let s = (T::of(-2.0) * sigma).exp() / n;
    d.map(|x| x * s)
}

/// `∂L/∂σ = −2·L_part·e^{−2σ} + 2`.
pub fn sigma_gradient<T: Scalar>(l_part: T, sigma: T) -> T {
    let two = T::of(2.0);
    -two * l_part * (-two * sigma).exp() + two
}

/// Stationary point of the loss in `σ`.
pub fn optimal_sigma(l_part: f64) -> f64 {
    0.5 * l_part.ln()
}
