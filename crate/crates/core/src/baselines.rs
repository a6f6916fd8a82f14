//! Comparison models: a pairwise classifier over per-channel color
//! histograms, and a convolutional softmax classifier over the six layouts
//! (or RGB vs BGR only) whose output entropy doubles as a monochromatism cue.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::detectors::{predict_order, OrderPrediction};
use crate::error::{Error, Result};
use crate::image::{ChannelPermutation, Plane, TriChannelImage};
use crate::nn::{
    global_avg_pool, global_avg_pool_backward, max_pool2, max_pool2_backward, relu_backward_inplace,
    relu_inplace, Conv3x3, Grads, Linear, ParamSet, PoolIndices, Tensor,
};
use crate::ranking::{sigmoid, ScoreTriple, PAIRS};

pub const DEFAULT_BINS: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct ColorHistogram {
    pub bins: Vec<f64>,
}

/// Equal-width histogram over [0, 1] (the last bin includes 1.0), normalized
/// by the pixel count.
pub fn channel_histogram(channel: &Plane, bins: usize) -> Result<ColorHistogram> {
    if bins < 2 {
        return Err(Error::Input(format!("need at least 2 bins, got {bins}")));
    }
    if channel.is_empty() {
        return Err(Error::Input("cannot histogram an empty plane".into()));
    }
    let mut counts = vec![0usize; bins];
    for &v in &channel.data {
        let b = ((v.clamp(0.0, 1.0) as f64 * bins as f64) as usize).min(bins - 1);
        counts[b] += 1;
    }
    let n = channel.len() as f64;
    Ok(ColorHistogram {
        bins: counts.into_iter().map(|c| c as f64 / n).collect(),
    })
}

/// Histograms of the three planes, in stored order.
pub fn image_histograms(image: &TriChannelImage, bins: usize) -> Result<[ColorHistogram; 3]> {
    let [a, b, c] = [0, 1, 2].map(|i| channel_histogram(image.plane(i), bins));
    Ok([a?, b?, c?])
}

/// Two-layer perceptron over `[h_i, h_j]` returning the probability that
/// channel `i` ranks ahead of channel `j`.
#[derive(Debug, Clone)]
pub struct ShallowModel {
    bins: usize,
    hidden: usize,
    l1: Linear,
    l2: Linear,
    params: ParamSet,
}

pub(crate) struct ShallowTape {
    input: Vec<f32>,
    hidden: Vec<f32>,
}

impl ShallowModel {
    pub const DEFAULT_HIDDEN: usize = 64;

    pub fn new(bins: usize, hidden: usize, seed: u64) -> Result<Self> {
        if bins < 2 || hidden == 0 {
            return Err(Error::Config("shallow model needs ≥ 2 bins and a hidden layer".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamSet::new();
        let l1 = Linear::new(&mut params, &mut rng, "shallow.hidden", 2 * bins, hidden, true);
        let l2 = Linear::new(&mut params, &mut rng, "shallow.out", hidden, 1, true);
        Ok(ShallowModel {
            bins,
            hidden,
            l1,
            l2,
            params,
        })
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    pub(crate) fn forward(&self, hi: &ColorHistogram, hj: &ColorHistogram) -> Result<(f64, ShallowTape)> {
        if hi.bins.len() != self.bins || hj.bins.len() != self.bins {
            return Err(Error::Input(format!(
                "model expects {} bins, got {} and {}",
                self.bins,
                hi.bins.len(),
                hj.bins.len()
            )));
        }
        let input: Vec<f32> = hi.bins.iter().chain(&hj.bins).map(|&v| v as f32).collect();
        let mut hidden = self.l1.forward(&self.params, &input);
        hidden.iter_mut().for_each(|v| *v = v.max(0.0));
        let logit = self.l2.forward(&self.params, &hidden)[0] as f64;
        Ok((logit, ShallowTape { input, hidden }))
    }

    pub(crate) fn backward(&self, tape: &ShallowTape, d_logit: f64, grads: &mut Grads) {
        let mut dh = self.l2.backward(&self.params, &tape.hidden, &[d_logit as f32], grads);
        for (d, &h) in dh.iter_mut().zip(&tape.hidden) {
            if h <= 0.0 {
                *d = 0.0;
            }
        }
        self.l1.backward(&self.params, &tape.input, &dh, grads);
    }
}

/// Probability that channel `i` (histogram `hi`) ranks ahead of channel `j`.
pub fn shallow_pair_classify(hi: &ColorHistogram, hj: &ColorHistogram, model: &ShallowModel) -> Result<f64> {
    Ok(sigmoid(model.forward(hi, hj)?.0))
}

/// Combines the three pairwise probabilities into a layout: every channel
/// collects its probability of ranking ahead of each other channel, and the
/// totals are sorted like ranking scores.
pub fn shallow_predict(hists: &[ColorHistogram; 3], model: &ShallowModel) -> Result<OrderPrediction> {
    let mut wins = [0.0f64; 3];
    for &(i, j) in &PAIRS {
        let p = shallow_pair_classify(&hists[i], &hists[j], model)?;
        wins[i] += p;
        wins[j] += 1.0 - p;
    }
    predict_order(&ScoreTriple(wins))
}

/// Which layouts a softmax classifier distinguishes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SoftmaxClasses {
    Six,
    Two,
}

impl SoftmaxClasses {
    pub fn layouts(self) -> &'static [ChannelPermutation] {
        const TWO: [ChannelPermutation; 2] = [ChannelPermutation::Rgb, ChannelPermutation::Bgr];
        match self {
            SoftmaxClasses::Six => &ChannelPermutation::ALL,
            SoftmaxClasses::Two => &TWO,
        }
    }

    pub fn count(self) -> usize {
        self.layouts().len()
    }

    pub fn class_of(self, perm: ChannelPermutation) -> Option<usize> {
        self.layouts().iter().position(|&p| p == perm)
    }
}

/// Categorical distribution over layouts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftmaxOutput {
    pub classes: Vec<ChannelPermutation>,
    pub p: Vec<f64>,
}

impl SoftmaxOutput {
    pub fn from_logits(classes: &[ChannelPermutation], logits: &[f64]) -> Self {
        let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = logits.iter().map(|&z| (z - m).exp()).collect();
        let z: f64 = e.iter().sum();
        SoftmaxOutput {
            classes: classes.to_vec(),
            p: e.into_iter().map(|v| v / z).collect(),
        }
    }

    pub fn argmax(&self) -> ChannelPermutation {
        let mut best = 0;
        for (k, &v) in self.p.iter().enumerate() {
            if v > self.p[best] {
                best = k;
            }
        }
        self.classes[best]
    }
}

/// `H = −Σ pᵢ ln pᵢ` with `0·ln 0 = 0`.
pub fn softmax_entropy(out: &SoftmaxOutput) -> f64 {
    -out.p
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.ln())
        .sum::<f64>()
}

/// Convolutional classifier over the stacked planes: encoder stages of two
/// 3×3 conv+ReLU layers (2× max-pool before every stage but the first),
/// global average pooling and a linear head.
#[derive(Debug, Clone)]
pub struct SoftmaxModel {
    encoder: Vec<usize>,
    classes: SoftmaxClasses,
    stages: Vec<(Conv3x3, Conv3x3)>,
    head: Linear,
    params: ParamSet,
    seed: u64,
}

struct SoftmaxStage {
    pool: Option<PoolIndices>,
    input: Tensor,
    a: Tensor,
    b: Tensor,
}

pub(crate) struct SoftmaxTape {
    stages: Vec<SoftmaxStage>,
    pooled: Vec<f32>,
}

impl SoftmaxModel {
    pub fn new(encoder: &[usize], classes: SoftmaxClasses, seed: u64) -> Result<Self> {
        if encoder.is_empty() || encoder.contains(&0) {
            return Err(Error::Config("softmax encoder widths must be non-empty and positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamSet::new();
        let mut cin = 3;
        let mut stages = Vec::new();
        for (k, &w) in encoder.iter().enumerate() {
            let a = Conv3x3::new(&mut params, &mut rng, &format!("softmax.enc{k}.conv_a"), cin, w, true);
            let b = Conv3x3::new(&mut params, &mut rng, &format!("softmax.enc{k}.conv_b"), w, w, true);
            stages.push((a, b));
            cin = w;
        }
        let head = Linear::new(&mut params, &mut rng, "softmax.head", cin, classes.count(), true);
        Ok(SoftmaxModel {
            encoder: encoder.to_vec(),
            classes,
            stages,
            head,
            params,
            seed,
        })
    }

    pub fn encoder(&self) -> &[usize] {
        &self.encoder
    }

    pub fn classes(&self) -> SoftmaxClasses {
        self.classes
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

    pub(crate) fn forward(&self, image: &TriChannelImage) -> Result<(Vec<f64>, SoftmaxTape)> {
        let min_side = 1 << (self.stages.len() - 1);
        if image.height().min(image.width()) < min_side {
            return Err(Error::Input(format!(
                "softmax model needs images of at least {min_side}x{min_side}"
            )));
        }
        let mut data = Vec::with_capacity(3 * image.height() * image.width());
        for p in image.planes() {
            data.extend_from_slice(&p.data);
        }
        let mut cur = Tensor::from_data(3, image.height(), image.width(), data);
        let mut tapes = Vec::with_capacity(self.stages.len());
        for (k, (ca, cb)) in self.stages.iter().enumerate() {
            let (input, pool) = if k > 0 {
                let (p, idx) = max_pool2(&cur);
                (p, Some(idx))
            } else {
                (cur, None)
            };
            let mut a = ca.forward(&self.params, &input);
            relu_inplace(&mut a);
            let mut b = cb.forward(&self.params, &a);
            relu_inplace(&mut b);
            cur = b.clone();
            tapes.push(SoftmaxStage { pool, input, a, b });
        }
        let pooled = global_avg_pool(&cur);
        let logits = self
            .head
            .forward(&self.params, &pooled)
            .into_iter()
            .map(|v| v as f64)
            .collect();
        Ok((
            logits,
            SoftmaxTape {
                stages: tapes,
                pooled,
            },
        ))
    }

    pub(crate) fn backward(&self, tape: &SoftmaxTape, d_logits: &[f64], grads: &mut Grads) {
        let dl: Vec<f32> = d_logits.iter().map(|&v| v as f32).collect();
        let dpool = self.head.backward(&self.params, &tape.pooled, &dl, grads);
        let last = &tape.stages.last().unwrap().b;
        let mut d = global_avg_pool_backward(&dpool, last.height, last.width);
        for (k, (ca, cb)) in self.stages.iter().enumerate().rev() {
            let s = &tape.stages[k];
            relu_backward_inplace(&mut d, &s.b);
            let mut da = cb.backward(&self.params, &s.a, &d, grads, true).unwrap();
            relu_backward_inplace(&mut da, &s.a);
            match ca.backward(&self.params, &s.input, &da, grads, k > 0) {
                Some(dx) => d = max_pool2_backward(&dx, s.pool.as_ref().unwrap()),
                None => break,
            }
        }
    }
}

pub fn softmax_classify(image: &TriChannelImage, model: &SoftmaxModel) -> Result<SoftmaxOutput> {
    let (logits, _) = model.forward(image)?;
    Ok(SoftmaxOutput::from_logits(model.classes.layouts(), &logits))
}
