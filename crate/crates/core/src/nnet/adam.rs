use crate::error::{Error, Result};

/// Adam with bias correction.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
}

impl Adam {
    pub const DEFAULT_LR: f64 = 1e-3;

    pub fn new(num_params: usize, lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
            step: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self) -> &[f64] {
        &self.m
    }

    pub fn second_moment(&self) -> &[f64] {
        &self.v
    }

    /// One update. Shapes and finiteness are checked before anything moves.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::Dimension(format!(
                "adam state has {} entries, params {}, grads {}",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFiniteGradient(i));
        }
        self.step += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = 1.0 - b1.powi(self.step as i32);
        let c2 = 1.0 - b2.powi(self.step as i32);
        for ((p, &g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            if *m != 0.0 {
                *p -= self.lr * (*m / c1) / ((*v / c2).sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut p = vec![1.0, -2.0];
        let mut adam = Adam::new(2, 1e-3);
        adam.step(&mut p, &[0.0, 0.0]).unwrap();
        assert_eq!(p, vec![1.0, -2.0]);
        assert_eq!(adam.steps(), 1);

        adam.step(&mut p, &[1.0, 1.0]).unwrap();
        let m0 = adam.first_moment()[0];
        let v0 = adam.second_moment()[0];
        adam.step(&mut p, &[0.0, 0.0]).unwrap();
        assert_eq!(adam.first_moment()[0], 0.9 * m0);
        assert_eq!(adam.second_moment()[0], 0.999 * v0);
    }

    #[test]
    fn first_step_is_lr_times_sign() {
        for g in [3.0, -0.25, 1e-3] {
            let mut p = vec![0.0];
            Adam::new(1, 1e-3).step(&mut p, &[g]).unwrap();
            assert!((p[0] + 1e-3 * f64::signum(g)).abs() < 1e-8, "g={g} p={}", p[0]);
        }
    }

    #[test]
    fn quadratic_descends_monotonically() {
        // f(x) = (x - 3)^2 from x = 0
        let mut p = vec![0.0];
        let mut adam = Adam::new(1, 0.1);
        let mut losses = Vec::new();
        for _ in 0..10 {
            let g = 2.0 * (p[0] - 3.0);
            adam.step(&mut p, &[g]).unwrap();
            losses.push((p[0] - 3.0) * (p[0] - 3.0));
        }
        for w in losses[1..].windows(2) {
            assert!(w[1] < w[0]);
        }
    }

    #[test]
    fn rejects_bad_gradients() {
        let mut p = vec![0.0, 0.0];
        let mut adam = Adam::new(2, 1e-3);
        assert!(matches!(adam.step(&mut p, &[0.0, f64::NAN]), Err(Error::NonFiniteGradient(1))));
        assert!(adam.step(&mut p, &[0.0]).is_err());
        assert_eq!(adam.steps(), 0);
        assert_eq!(p, vec![0.0, 0.0]);
    }
}
