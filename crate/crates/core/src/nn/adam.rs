use super::{Grads, ParamSet};

/// Adam with bias correction and the usual default moment coefficients.
#[derive(Debug, Clone)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<Vec<f32>>,
    v: Vec<Vec<f32>>,
}

impl Adam {
    pub fn new(params: &ParamSet) -> Self {
        let zeros: Vec<Vec<f32>> = params.arrays().iter().map(|a| vec![0.0; a.data.len()]).collect();
        Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, params: &mut ParamSet, grads: &Grads, lr: f64) {
        self.step += 1;
        let t = self.step as i32;
        let (b1, b2) = (self.beta1 as f32, self.beta2 as f32);
        let c1 = (1.0 - self.beta1.powi(t)) as f32;
        let c2 = (1.0 - self.beta2.powi(t)) as f32;
        let (lr, eps) = (lr as f32, self.eps as f32);
        for (k, array) in params.arrays_mut().iter_mut().enumerate() {
            let g = &grads.data[k];
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for i in 0..array.data.len() {
                m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                let mhat = m[i] / c1;
                let vhat = v[i] / c2;
                array.data[i] -= lr * mhat / (vhat.sqrt() + eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::ParamId;

    #[test]
    fn minimizes_a_quadratic() {
        let mut p = ParamSet::new();
        let id = p.push("x", vec![2], vec![3.0, -2.0]);
        let mut opt = Adam::new(&p);
        for _ in 0..2000 {
            let mut g = p.zero_grads();
            for (gi, xi) in g.get_mut(id).iter_mut().zip(p.get(id)) {
                *gi = 2.0 * (xi - 1.0);
            }
            opt.step(&mut p, &g, 0.01);
        }
        for x in p.get(ParamId(0)) {
            assert!((x - 1.0).abs() < 1e-3, "{x}");
        }
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut p = ParamSet::new();
        let id = p.push("x", vec![1], vec![0.0]);
        let mut opt = Adam::new(&p);
        let mut g = p.zero_grads();
        g.get_mut(id)[0] = 5.0;
        opt.step(&mut p, &g, 0.1);
        assert!((p.get(id)[0] + 0.1).abs() < 1e-6);
    }
}
