use crate::model::{GradPool, ParamPool};

/// Adam with bias correction; moment state starts at zero, no weight decay
/// and no learning-rate schedule.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(lr: f64, pool: &ParamPool) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: pool.entries().iter().map(|e| vec![0.0; e.data.len()]).collect(),
            v: pool.entries().iter().map(|e| vec![0.0; e.data.len()]).collect(),
        }
    }

    pub fn step(&mut self, pool: &mut ParamPool, grads: &GradPool) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for (id, entry) in pool.entries_mut().iter_mut().enumerate() {
            let g = grads.get(id);
            let m = &mut self.m[id];
            let v = &mut self.v[id];
            for i in 0..entry.data.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                let mhat = m[i] / bc1;
                let vhat = v[i] / bc2;
                entry.data[i] -= self.lr * mhat / (vhat.sqrt() + self.eps);
            }
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.t
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_bowl_converges() {
        // minimize f(x) = Σ (x_i - target_i)^2 with Adam
        let mut pool = ParamPool::new();
        let id = pool.add("x", vec![3], vec![5.0, -4.0, 2.0]);
        let target = [1.0, 2.0, -0.5];
        let mut adam = Adam::new(0.05, &pool);
        let mut grads = GradPool::zeros_like(&pool);
        for _ in 0..2000 {
            grads.zero();
            {
                let x = pool.get(id);
                let g = grads.get_mut(id);
                for i in 0..3 {
                    g[i] = 2.0 * (x[i] - target[i]);
                }
            }
            adam.step(&mut pool, &grads);
        }
        for (x, t) in pool.get(id).iter().zip(target) {
            assert!((x - t).abs() < 1e-4, "{x} vs {t}");
        }
    }

    #[test]
    fn first_step_size_is_learning_rate() {
        // with bias correction the very first update is lr-sized regardless
        // of gradient magnitude
        let mut pool = ParamPool::new();
        let id = pool.add("x", vec![1], vec![0.0]);
        let mut adam = Adam::new(0.01, &pool);
        let mut grads = GradPool::zeros_like(&pool);
        grads.get_mut(id)[0] = 123.0;
        adam.step(&mut pool, &grads);
        let step = pool.get(id)[0].abs();
        assert!((step - 0.01).abs() < 1e-6, "step {step}");
    }
}
