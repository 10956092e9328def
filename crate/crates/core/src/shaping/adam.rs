/// Adam with bias correction.
#[derive(Debug, Clone)]
pub(crate) struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
    beta1: f64,
    beta2: f64,
    eps: f64,
}

impl Adam {
    pub fn new(dim: usize) -> Self {
        Self {
            m: vec![0.0; dim],
            v: vec![0.0; dim],
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    /// One update; `scale` multiplies `lr` per coordinate.
    pub fn step(&mut self, theta: &mut [f64], grad: &[f64], lr: f64, scale: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for ((((th, g), m), v), k) in theta
            .iter_mut()
            .zip(grad)
            .zip(&mut self.m)
            .zip(&mut self.v)
            .zip(scale)
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            *th -= lr * k * (*m / c1) / ((*v / c2).sqrt() + self.eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_quadratic() {
        let mut th = vec![3.0, -2.0];
        let mut opt = Adam::new(2);
        for _ in 0..2000 {
            let g: Vec<f64> = th.iter().map(|x| 2.0 * x).collect();
            opt.step(&mut th, &g, 0.05, &[1.0, 1.0]);
        }
        assert!(th.iter().all(|x| x.abs() < 1e-3));
    }

    #[test]
    fn first_step_is_lr_sized() {
        let mut th = vec![0.0];
        Adam::new(1).step(&mut th, &[123.0], 0.1, &[1.0]);
        assert!((th[0] + 0.1).abs() < 1e-9);
    }
}
