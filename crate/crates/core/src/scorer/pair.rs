use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::image::Plane;
use crate::nn::{
    global_avg_pool, global_avg_pool_backward, max_pool2, max_pool2_backward, relu_backward_inplace,
    relu_inplace, Conv3x3, Grads, Linear, ParamSet, PoolIndices, Tensor,
};

/// Scores a stack of two planes: three conv+ReLU blocks (2× max-pool between
/// blocks), global average pooling and a bias-free linear head.
///
/// The same weights score `(I₁, I₂)` and `(I₁, I₃)`.
#[derive(Debug, Clone)]
pub struct PairScorerModel {
    widths: Vec<usize>,
    convs: Vec<Conv3x3>,
    head: Linear,
    params: ParamSet,
    seed: u64,
}

struct Block {
    input: Tensor,
    out: Tensor,
    pool: Option<PoolIndices>,
}

pub struct PairTape {
    blocks: Vec<Block>,
    pooled: Vec<f32>,
}

impl PairScorerModel {
    pub const DEFAULT_WIDTHS: [usize; 3] = [16, 32, 64];

    pub fn new(widths: &[usize], seed: u64) -> Result<Self> {
        if widths.is_empty() || widths.contains(&0) {
            return Err(Error::Config("pair scorer widths must be non-empty and positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamSet::new();
        let mut cin = 2;
        let mut convs = Vec::new();
        for (k, &w) in widths.iter().enumerate() {
            convs.push(Conv3x3::new(&mut params, &mut rng, &format!("pair.conv{k}"), cin, w, true));
            cin = w;
        }
        let head = Linear::new(&mut params, &mut rng, "pair.head", cin, 1, false);
        Ok(PairScorerModel {
            widths: widths.to_vec(),
            convs,
            head,
            params,
            seed,
        })
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    /// Smallest side accepted (every block after the first halves the size).
    pub fn min_side(&self) -> usize {
        1 << (self.convs.len() - 1)
    }

    pub(crate) fn forward(&self, planes: &[&Plane]) -> Result<(f64, PairTape)> {
        if planes.len() != 2 {
            return Err(Error::Input(format!(
                "the pair scorer takes exactly 2 planes, got {}",
                planes.len()
            )));
        }
        let (h, w) = (planes[0].height, planes[0].width);
        if (planes[1].height, planes[1].width) != (h, w) {
            return Err(Error::Input("pair planes differ in size".into()));
        }
        if h.min(w) < self.min_side() {
            return Err(Error::Input(format!(
                "pair scorer needs planes of at least {0}x{0}",
                self.min_side()
            )));
        }
        let mut data = Vec::with_capacity(2 * h * w);
        data.extend_from_slice(&planes[0].data);
        data.extend_from_slice(&planes[1].data);
        let mut cur = Tensor::from_data(2, h, w, data);
        let mut blocks = Vec::with_capacity(self.convs.len());
        for (k, conv) in self.convs.iter().enumerate() {
            let (input, pool) = if k > 0 {
                let (p, idx) = max_pool2(&cur);
                (p, Some(idx))
            } else {
                (cur, None)
            };
            let mut out = conv.forward(&self.params, &input);
            relu_inplace(&mut out);
            cur = out.clone();
            blocks.push(Block { input, out, pool });
        }
        let pooled = global_avg_pool(&cur);
        let score = self.head.forward(&self.params, &pooled)[0] as f64;
        Ok((score, PairTape { blocks, pooled }))
    }

    /// Scalar score for the stacked pair.
    pub fn score_pair(&self, planes: &[&Plane]) -> Result<f64> {
        Ok(self.forward(planes)?.0)
    }

    pub(crate) fn backward(&self, tape: &PairTape, d_score: f64, grads: &mut Grads) {
        let dpool = self
            .head
            .backward(&self.params, &tape.pooled, &[d_score as f32], grads);
        let last = tape.blocks.last().unwrap();
        let mut d = global_avg_pool_backward(&dpool, last.out.height, last.out.width);
        for (k, conv) in self.convs.iter().enumerate().rev() {
            let b = &tape.blocks[k];
            relu_backward_inplace(&mut d, &b.out);
            match conv.backward(&self.params, &b.input, &d, grads, k > 0) {
                Some(dx) => d = max_pool2_backward(&dx, b.pool.as_ref().unwrap()),
                None => break,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::ParamId;

    fn plane(seed: usize, n: usize) -> Plane {
        Plane::new(n, n, (0..n * n).map(|i| ((i * 31 + seed * 7) % 23) as f32 / 22.0).collect()).unwrap()
    }

    #[test]
    fn zero_weights_zero_input_scores_zero() {
        let mut m = PairScorerModel::new(&PairScorerModel::DEFAULT_WIDTHS, 0).unwrap();
        m.params_mut().arrays_mut().iter_mut().for_each(|a| a.data.fill(0.0));
        let z = Plane::filled(16, 16, 0.0);
        assert_eq!(m.score_pair(&[&z, &z]).unwrap(), 0.0);
    }

    #[test]
    fn deterministic_and_plane_count_checked() {
        let m = PairScorerModel::new(&PairScorerModel::DEFAULT_WIDTHS, 3).unwrap();
        let (a, b) = (plane(1, 16), plane(2, 16));
        assert_eq!(m.score_pair(&[&a, &b]).unwrap(), m.score_pair(&[&a, &b]).unwrap());
        assert!(matches!(m.score_pair(&[&a]), Err(Error::Input(_))));
        assert!(m.score_pair(&[&a, &b, &a]).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut m = PairScorerModel::new(&[3, 4, 5], 8).unwrap();
        let (a, b) = (plane(1, 8), plane(4, 8));
        let (_, tape) = m.forward(&[&a, &b]).unwrap();
        let mut grads = m.params().zero_grads();
        m.backward(&tape, 1.0, &mut grads);
        let h = 1e-3f32;
        for k in 0..m.params().len() {
            let id = ParamId(k);
            let idx = m.params().get(id).len() / 2;
            let orig = m.params().get(id)[idx];
            m.params_mut().get_mut(id)[idx] = orig + h;
            let up = m.score_pair(&[&a, &b]).unwrap();
            m.params_mut().get_mut(id)[idx] = orig - h;
            let dn = m.score_pair(&[&a, &b]).unwrap();
            m.params_mut().get_mut(id)[idx] = orig;
            let fd = (up - dn) / (2.0 * h as f64);
            let an = grads.get(id)[idx] as f64;
            assert!((fd - an).abs() < 1e-2 * (1.0 + an.abs()), "array {k}: {fd} vs {an}");
        }
    }
}
