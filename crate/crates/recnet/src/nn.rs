//! Small shared pieces for the hand-rolled trainers: Adam, weight init,
//! activations, and deterministic per-key RNG streams.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Deterministic stream derivation: mixes a seed with stream keys so that
/// per-node / per-epoch RNGs are independent of iteration order.
pub fn stream_rng(seed: u64, keys: &[u64]) -> ChaCha8Rng {
    let mut state = seed ^ 0x9e37_79b9_7f4a_7c15;
    for &k in keys {
        state ^= k.wrapping_add(0x9e37_79b9_7f4a_7c15);
        state = splitmix64(state);
    }
    ChaCha8Rng::seed_from_u64(state)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// log(1 + e^x) without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Xavier-uniform init for a (rows x cols) matrix.
pub fn xavier_init(rows: usize, cols: usize, rng: &mut impl Rng) -> Array2<f64> {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-bound..bound))
}

/// Adam state for one tensor, flattened.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(len: usize, lr: f64, beta1: f64, beta2: f64) -> Self {
        Adam {
            lr,
            beta1,
            beta2,
            eps: 1e-8,
            step: 0,
            m: vec![0.0; len],
            v: vec![0.0; len],
        }
    }

    pub fn update(&mut self, params: &mut [f64], grads: &[f64]) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grads.len(), self.m.len());
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grads[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grads[i] * grads[i];
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }

    pub fn update_matrix(&mut self, params: &mut Array2<f64>, grads: &Array2<f64>) {
        self.update(
            params.as_slice_mut().expect("contiguous"),
            grads.as_slice().expect("contiguous"),
        );
    }

    pub fn update_vector(&mut self, params: &mut Array1<f64>, grads: &Array1<f64>) {
        self.update(
            params.as_slice_mut().expect("contiguous"),
            grads.as_slice().expect("contiguous"),
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_symmetry() {
        assert!((sigmoid(0.0) - 0.5).abs() < 1e-12);
        assert!((sigmoid(3.0) + sigmoid(-3.0) - 1.0).abs() < 1e-12);
        assert!(sigmoid(-800.0) >= 0.0);
        assert!(sigmoid(800.0) <= 1.0);
    }

    #[test]
    fn softplus_matches_naive_in_safe_range() {
        for &x in &[-5.0, -0.5, 0.0, 0.5, 5.0] {
            let naive = (1.0f64 + f64::exp(x)).ln();
            assert!((softplus(x) - naive).abs() < 1e-12);
        }
    }

    #[test]
    fn stream_rng_is_order_independent() {
        let mut a = stream_rng(42, &[1, 7]);
        let mut b = stream_rng(42, &[1, 7]);
        assert_eq!(a.gen::<u64>(), b.gen::<u64>());
        let mut c = stream_rng(42, &[7, 1]);
        // different key order is a different stream
        let mut a2 = stream_rng(42, &[1, 7]);
        assert_ne!(a2.gen::<u64>(), c.gen::<u64>());
    }

    #[test]
    fn adam_minimizes_quadratic() {
        // f(x) = (x - 3)^2
        let mut x = vec![0.0f64];
        let mut opt = Adam::new(1, 0.1, 0.9, 0.999);
        for _ in 0..500 {
            let grad = vec![2.0 * (x[0] - 3.0)];
            opt.update(&mut x, &grad);
        }
        assert!((x[0] - 3.0).abs() < 1e-3);
    }
}
