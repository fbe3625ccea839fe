use serde::{Deserialize, Serialize};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// Bias-corrected Adam moments for a list of parameter blocks.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn for_shapes(lengths: impl IntoIterator<Item = usize>) -> Self {
        let lens: Vec<usize> = lengths.into_iter().collect();
        Self {
            step: 0,
            m: lens.iter().map(|&l| vec![0.0; l]).collect(),
            v: lens.iter().map(|&l| vec![0.0; l]).collect(),
        }
    }

    /// One update of every block; `params` and `grads` must match the state layout.
    pub fn step(&mut self, lr: f64, params: &mut [&mut [f64]], grads: &[&[f64]]) {
        assert_eq!(params.len(), self.m.len(), "parameter block count mismatch");
        assert_eq!(grads.len(), self.m.len(), "gradient block count mismatch");
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - BETA1.powi(t);
        let c2 = 1.0 - BETA2.powi(t);
        for (k, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for i in 0..p.len() {
                m[i] = BETA1 * m[i] + (1.0 - BETA1) * g[i];
                v[i] = BETA2 * v[i] + (1.0 - BETA2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p[i] -= lr * m_hat / (v_hat.sqrt() + EPSILON);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_by_hand() {
        // m = 0.1 g, v = 0.001 g², so m̂ = g and v̂ = g²: step = lr·g/(|g|+ε)
        let mut s = AdamState::for_shapes([1]);
        let mut theta = [2.0];
        let g = [0.5];
        s.step(0.01, &mut [&mut theta], &[&g]);
        let expected = 2.0 - 0.01 * 0.5 / (0.5 + 1e-8);
        assert!((theta[0] - expected).abs() < 1e-15);
        assert!((s.m[0][0] - 0.05).abs() < 1e-15);
        assert!((s.v[0][0] - 0.00025).abs() < 1e-15);
    }

    #[test]
    fn second_step_by_hand() {
        let mut s = AdamState::for_shapes([1]);
        let mut theta = [0.0];
        s.step(0.1, &mut [&mut theta], &[&[1.0]]);
        s.step(0.1, &mut [&mut theta], &[&[-1.0]]);
        let m: f64 = 0.9 * 0.1 - 0.1;
        let v: f64 = 0.999 * 0.001 + 0.001;
        let m_hat = m / (1.0 - 0.81);
        let v_hat = v / (1.0 - 0.999f64.powi(2));
        let expected = -0.1 * 1.0 / (1.0 + 1e-8) - 0.1 * m_hat / (v_hat.sqrt() + 1e-8);
        assert!((theta[0] - expected).abs() < 1e-14);
    }

    #[test]
    fn zero_rate_is_identity() {
        let mut s = AdamState::for_shapes([3]);
        let mut theta = [1.0, -2.0, 3.0];
        s.step(0.0, &mut [&mut theta], &[&[0.3, 0.1, -9.0]]);
        assert_eq!(theta, [1.0, -2.0, 3.0]);
    }
}
