//! The per-channel scoring function.
//!
//! Each stored plane goes through a shared U-Net that emits one feature map.
//! The feature map is mean-pooled inside every semantic mask, giving one
//! pooled value per class, and the channel score is the inner product of
//! those values with a learned per-class prior weight vector α.
//!
//! Because the same function is applied to every plane, permuting the input
//! planes permutes the three scores identically.

mod masks;
mod pair;
mod unet;

pub use masks::MaskStack;
pub use pair::{PairScorerModel, PairTape};
pub use unet::{UNet, UNetConfig, UNetTape};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::image::{Plane, TriChannelImage};
use crate::nn::{Grads, ParamId, ParamSet, Tensor};
use crate::ranking::ScoreTriple;

/// Added to mask areas so that empty masks pool to zero.
pub const POOL_EPS: f64 = 1e-6;

/// Pooled feature value per class, in vocabulary order.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectColorVector(pub Vec<f64>);

/// Anything that can assign ranking scores to the three planes of an image.
pub trait ChannelScorer: Sync {
    fn score_image(&self, image: &TriChannelImage, masks: &MaskStack) -> Result<ScoreTriple>;
}

/// `cⁿ = Σ(F ⊙ Mⁿ) / (Σ Mⁿ + ε)` for every mask.
pub fn masked_mean_pool(feature: &Plane, masks: &MaskStack) -> Result<ObjectColorVector> {
    if (feature.height, feature.width) != (masks.height(), masks.width()) {
        return Err(Error::Input(format!(
            "feature map is {}x{} but masks are {}x{}",
            feature.height,
            feature.width,
            masks.height(),
            masks.width()
        )));
    }
    Ok(ObjectColorVector(
        masks
            .masks()
            .iter()
            .map(|m| {
                let (sum, area) = feature
                    .data
                    .iter()
                    .zip(m)
                    .filter(|(_, &b)| b == 1)
                    .fold((0.0f64, 0usize), |(s, a), (&f, _)| (s + f as f64, a + 1));
                sum / (area as f64 + POOL_EPS)
            })
            .collect(),
    ))
}

/// Mirror index into `[0, n)`, folding as many times as needed.
fn reflect(i: usize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n - 1);
    let r = i % period;
    if r < n {
        r
    } else {
        period - r
    }
}

/// Reflect-pads a plane on the bottom and right to multiples of `multiple`.
pub(crate) fn reflect_pad(plane: &Plane, multiple: usize) -> Tensor {
    let ph = plane.height.div_ceil(multiple) * multiple;
    let pw = plane.width.div_ceil(multiple) * multiple;
    let mut out = Vec::with_capacity(ph * pw);
    for y in 0..ph {
        let sy = reflect(y, plane.height);
        let row = &plane.data[sy * plane.width..(sy + 1) * plane.width];
        if pw == plane.width {
            out.extend_from_slice(row);
        } else {
            out.extend((0..pw).map(|x| row[reflect(x, plane.width)]));
        }
    }
    Tensor::from_data(1, ph, pw, out)
}

fn crop(t: &Tensor, height: usize, width: usize) -> Plane {
    let mut data = Vec::with_capacity(height * width);
    for y in 0..height {
        data.extend_from_slice(&t.data[y * t.width..y * t.width + width]);
    }
    Plane {
        height,
        width,
        data,
    }
}

/// Forward state for one plane, kept for backpropagation.
pub struct ChannelTape {
    unet: UNetTape,
    padded: (usize, usize),
    pooled: ObjectColorVector,
}

/// U-Net weights θ plus prior weights α for a fixed class vocabulary.
#[derive(Debug, Clone)]
pub struct ScorerModel {
    unet: UNet,
    alpha: ParamId,
    params: ParamSet,
    vocab: Vec<String>,
    seed: u64,
}

impl ScorerModel {
    /// θ gets fan-in-scaled uniform weights drawn from `seed`; α starts at ones.
    pub fn new(config: UNetConfig, vocab: Vec<String>, seed: u64) -> Result<Self> {
        if vocab.is_empty() {
            return Err(Error::Config("the class vocabulary is empty".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamSet::new();
        let unet = UNet::new(config, 1, &mut params, &mut rng)?;
        let alpha = params.push("alpha", vec![vocab.len()], vec![1.0; vocab.len()]);
        Ok(ScorerModel {
            unet,
            alpha,
            params,
            vocab,
            seed,
        })
    }

    pub fn config(&self) -> &UNetConfig {
        self.unet.config()
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
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

    pub fn alpha(&self) -> &[f32] {
        self.params.get(self.alpha)
    }

    pub fn set_alpha(&mut self, alpha: &[f32]) -> Result<()> {
        if alpha.len() != self.vocab.len() || alpha.iter().any(|a| !a.is_finite()) {
            return Err(Error::Config(format!(
                "α needs {} finite entries, got {}",
                self.vocab.len(),
                alpha.len()
            )));
        }
        self.params.get_mut(self.alpha).copy_from_slice(alpha);
        Ok(())
    }

    /// Sets every weight of θ (not α) to zero.
    pub fn zero_unet(&mut self) {
        let alpha = self.alpha.0;
        for (k, a) in self.params.arrays_mut().iter_mut().enumerate() {
            if k != alpha {
                a.data.fill(0.0);
            }
        }
    }

    fn check_masks(&self, masks: &MaskStack) -> Result<()> {
        if masks.len() != self.vocab.len() {
            return Err(Error::Config(format!(
                "model has {} classes but the mask stack has {}",
                self.vocab.len(),
                masks.len()
            )));
        }
        Ok(())
    }

    fn run_unet(&self, channel: &Plane) -> Result<(Plane, UNetTape, (usize, usize))> {
        if channel.is_empty() {
            return Err(Error::Input("cannot score an empty plane".into()));
        }
        let padded = reflect_pad(channel, self.config().size_multiple());
        let dims = (padded.height, padded.width);
        let (out, tape) = self.unet.forward(&self.params, padded);
        Ok((crop(&out, channel.height, channel.width), tape, dims))
    }

    /// Single-channel feature plane `F` for one input plane, same size as the input.
    pub fn feature_map(&self, channel: &Plane) -> Result<Plane> {
        Ok(self.run_unet(channel)?.0)
    }

    fn inner(&self, pooled: &ObjectColorVector) -> f64 {
        self.alpha()
            .iter()
            .zip(&pooled.0)
            .map(|(&a, &c)| a as f64 * c)
            .sum()
    }

    /// `s = αᵀ c` where `c` pools this plane's feature map over the masks.
    pub fn score_channel(&self, channel: &Plane, masks: &MaskStack) -> Result<f64> {
        self.check_masks(masks)?;
        let f = self.feature_map(channel)?;
        Ok(self.inner(&masked_mean_pool(&f, masks)?))
    }

    pub(crate) fn forward_channel(&self, channel: &Plane, masks: &MaskStack) -> Result<(f64, ChannelTape)> {
        self.check_masks(masks)?;
        let (f, unet, padded) = self.run_unet(channel)?;
        let pooled = masked_mean_pool(&f, masks)?;
        Ok((
            self.inner(&pooled),
            ChannelTape {
                unet,
                padded,
                pooled,
            },
        ))
    }

    /// Per-pixel `∂s/∂F = Σₙ αₙ Mⁿ / (|Mⁿ| + ε)`; shared by all planes of an image.
    pub(crate) fn pool_weights(&self, masks: &MaskStack) -> Vec<f32> {
        let mut w = vec![0.0f64; masks.height() * masks.width()];
        for (n, &a) in self.alpha().iter().enumerate() {
            let k = a as f64 / (masks.area(n) as f64 + POOL_EPS);
            for (acc, &m) in w.iter_mut().zip(masks.mask(n)) {
                if m == 1 {
                    *acc += k;
                }
            }
        }
        w.into_iter().map(|v| v as f32).collect()
    }

    /// Accumulates `d_score · ∂s/∂(θ, α)` for one plane.
    pub(crate) fn backward_channel(
        &self,
        tape: &ChannelTape,
        pool_weights: &[f32],
        width: usize,
        d_score: f64,
        grads: &mut Grads,
    ) {
        for (g, &c) in grads.get_mut(self.alpha).iter_mut().zip(&tape.pooled.0) {
            *g += (d_score * c) as f32;
        }
        let (ph, pw) = tape.padded;
        let mut d_out = Tensor::zeros(1, ph, pw);
        let ds = d_score as f32;
        for (y, row) in pool_weights.chunks_exact(width).enumerate() {
            for (x, &w) in row.iter().enumerate() {
                d_out.data[y * pw + x] = ds * w;
            }
        }
        self.unet.backward(&self.params, &tape.unet, d_out, grads);
    }
}

impl ChannelScorer for ScorerModel {
    fn score_image(&self, image: &TriChannelImage, masks: &MaskStack) -> Result<ScoreTriple> {
        if (image.height(), image.width()) != (masks.height(), masks.width()) {
            return Err(Error::Input("image and masks differ in size".into()));
        }
        let s = [0, 1, 2].map(|i| self.score_channel(image.plane(i), masks));
        let [a, b, c] = s;
        ScoreTriple::new(a?, b?, c?)
    }
}
