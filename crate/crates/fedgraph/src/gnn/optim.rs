//! Adam with decoupled weight decay operating on flat parameter vectors.

#[derive(Clone, Debug)]
pub struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Decoupled decay: θ ← θ − lr·(update + weight_decay·θ), so lr = 0
    /// freezes parameters entirely.
    pub weight_decay: f64,
}

impl Adam {
    pub fn new(n: usize, lr: f64, weight_decay: f64) -> Self {
        Adam {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grad.len(), self.m.len());
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for q in 0..params.len() {
            self.m[q] = self.beta1 * self.m[q] + (1.0 - self.beta1) * grad[q];
            self.v[q] = self.beta2 * self.v[q] + (1.0 - self.beta2) * grad[q] * grad[q];
            let mh = self.m[q] / bc1;
            let vh = self.v[q] / bc2;
            params[q] -= self.lr * (mh / (vh.sqrt() + self.eps) + self.weight_decay * params[q]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_learning_rate_freezes_parameters() {
        let mut adam = Adam::new(3, 0.0, 5e-4);
        let mut p = vec![1.0, -2.0, 0.5];
        let before = p.clone();
        for _ in 0..10 {
            adam.step(&mut p, &[0.3, -0.7, 1.1]);
        }
        assert_eq!(p, before);
    }

    #[test]
    fn first_step_is_signed_learning_rate() {
        // After bias correction the first update is lr·g/(|g|+ε) ≈ lr·sign(g).
        let mut adam = Adam::new(2, 0.01, 0.0);
        let mut p = vec![0.0, 0.0];
        adam.step(&mut p, &[2.5, -0.004]);
        assert!((p[0] + 0.01).abs() < 1e-6);
        assert!((p[1] - 0.01).abs() < 1e-6);
    }

    #[test]
    fn converges_on_a_quadratic() {
        let mut adam = Adam::new(2, 0.05, 0.0);
        let mut p = vec![3.0, -4.0];
        for _ in 0..2000 {
            let grad = vec![2.0 * (p[0] - 1.0), 2.0 * (p[1] + 2.0)];
            adam.step(&mut p, &grad);
        }
        assert!((p[0] - 1.0).abs() < 1e-3 && (p[1] + 2.0).abs() < 1e-3, "{p:?}");
    }
}
