use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{
    concat_channels, max_pool2, max_pool2_backward, relu_backward_inplace, relu_inplace,
    split_channels, upsample2, upsample2_backward, Conv3x3, Grads, ParamSet, PoolIndices, Tensor,
};

/// Channel widths of the encoder-decoder.
///
/// Each encoder stage is two 3×3 conv+ReLU layers followed by a 2× max-pool.
/// Each decoder stage upsamples 2× (nearest), concatenates the matching
/// encoder output and applies two 3×3 convs. The last decoder stage emits a
/// single linear feature channel; its hidden conv uses the first encoder width.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UNetConfig {
    pub encoder: Vec<usize>,
    pub decoder: Vec<usize>,
}

impl UNetConfig {
    /// Full-size widths: encoder 32/64/128/256, decoder 128/64/32/1.
    pub fn full() -> Self {
        UNetConfig {
            encoder: vec![32, 64, 128, 256],
            decoder: vec![128, 64, 32, 1],
        }
    }

    /// Reduced widths used for CPU-scale runs.
    pub fn desk() -> Self {
        UNetConfig {
            encoder: vec![8, 16, 32, 64],
            decoder: vec![32, 16, 8, 1],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.encoder.is_empty() || self.encoder.len() != self.decoder.len() {
            return Err(Error::Config(
                "encoder and decoder need the same, non-zero number of stages".into(),
            ));
        }
        if self.decoder.last() != Some(&1) {
            return Err(Error::Config("the last decoder stage must have width 1".into()));
        }
        if self.encoder.iter().chain(&self.decoder).any(|&w| w == 0) {
            return Err(Error::Config("stage widths must be positive".into()));
        }
        Ok(())
    }

    /// Spatial sizes must be a multiple of this.
    pub fn size_multiple(&self) -> usize {
        1 << self.encoder.len()
    }
}

#[derive(Debug, Clone)]
struct Stage {
    a: Conv3x3,
    b: Conv3x3,
}

#[derive(Debug, Clone)]
pub struct UNet {
    config: UNetConfig,
    enc: Vec<Stage>,
    dec: Vec<Stage>,
}

struct EncCache {
    input: Tensor,
    a: Tensor,
    b: Tensor,
    pool: PoolIndices,
}

struct DecCache {
    cat: Tensor,
    a: Tensor,
    b: Tensor,
    up_channels: usize,
}

/// Activations kept from a forward pass for the backward pass.
pub struct UNetTape {
    enc: Vec<EncCache>,
    dec: Vec<DecCache>,
}

impl UNet {
    pub fn new<R: Rng>(config: UNetConfig, in_channels: usize, params: &mut ParamSet, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let depth = config.encoder.len();
        let mut enc = Vec::with_capacity(depth);
        let mut cin = in_channels;
        for (k, &w) in config.encoder.iter().enumerate() {
            enc.push(Stage {
                a: Conv3x3::new(params, rng, &format!("unet.enc{k}.conv_a"), cin, w, true),
                b: Conv3x3::new(params, rng, &format!("unet.enc{k}.conv_b"), w, w, true),
            });
            cin = w;
        }
        let mut dec = Vec::with_capacity(depth);
        let mut prev = config.encoder[depth - 1];
        for (j, &w) in config.decoder.iter().enumerate() {
            let skip = config.encoder[depth - 1 - j];
            let last = j == depth - 1;
            let hidden = if last { config.encoder[0] } else { w };
            dec.push(Stage {
                a: Conv3x3::new(params, rng, &format!("unet.dec{j}.conv_a"), prev + skip, hidden, true),
                b: Conv3x3::new(params, rng, &format!("unet.dec{j}.conv_b"), hidden, w, true),
            });
            prev = w;
        }
        Ok(UNet { config, enc, dec })
    }

    pub fn config(&self) -> &UNetConfig {
        &self.config
    }

    /// Runs the network on an input whose sides are multiples of
    /// [`UNetConfig::size_multiple`]; returns the single-channel output.
    pub fn forward(&self, params: &ParamSet, x: Tensor) -> (Tensor, UNetTape) {
        let depth = self.enc.len();
        let mut enc_cache = Vec::with_capacity(depth);
        let mut cur = x;
        for stage in &self.enc {
            let mut a = stage.a.forward(params, &cur);
            relu_inplace(&mut a);
            let mut b = stage.b.forward(params, &a);
            relu_inplace(&mut b);
            let (pooled, pool) = max_pool2(&b);
            enc_cache.push(EncCache {
                input: cur,
                a,
                b,
                pool,
            });
            cur = pooled;
        }
        let mut dec_cache = Vec::with_capacity(depth);
        for (j, stage) in self.dec.iter().enumerate() {
            let up = upsample2(&cur);
            let cat = concat_channels(&up, &enc_cache[depth - 1 - j].b);
            let mut a = stage.a.forward(params, &cat);
            relu_inplace(&mut a);
            let mut b = stage.b.forward(params, &a);
            if j + 1 < depth {
                relu_inplace(&mut b);
            }
            cur = b.clone();
            dec_cache.push(DecCache {
                cat,
                a,
                b,
                up_channels: up.channels,
            });
        }
        (
            cur,
            UNetTape {
                enc: enc_cache,
                dec: dec_cache,
            },
        )
    }

    /// Backpropagates `d_out` (gradient of the single output channel) into
    /// `grads`. The gradient with respect to the network input is not formed.
    pub fn backward(&self, params: &ParamSet, tape: &UNetTape, d_out: Tensor, grads: &mut Grads) {
        let depth = self.enc.len();
        let mut skip_grads: Vec<Option<Tensor>> = (0..depth).map(|_| None).collect();
        let mut d = d_out;
        for (j, stage) in self.dec.iter().enumerate().rev() {
            let c = &tape.dec[j];
            if j + 1 < depth {
                relu_backward_inplace(&mut d, &c.b);
            }
            let mut da = stage.b.backward(params, &c.a, &d, grads, true).unwrap();
            relu_backward_inplace(&mut da, &c.a);
            let dcat = stage.a.backward(params, &c.cat, &da, grads, true).unwrap();
            let (dup, dskip) = split_channels(&dcat, c.up_channels);
            skip_grads[depth - 1 - j] = Some(dskip);
            d = upsample2_backward(&dup);
        }
        for (k, stage) in self.enc.iter().enumerate().rev() {
            let c = &tape.enc[k];
            let mut db = max_pool2_backward(&d, &c.pool);
            if let Some(s) = skip_grads[k].take() {
                for (x, y) in db.data.iter_mut().zip(&s.data) {
                    *x += y;
                }
            }
            relu_backward_inplace(&mut db, &c.b);
            let mut da = stage.b.backward(params, &c.a, &db, grads, true).unwrap();
            relu_backward_inplace(&mut da, &c.a);
            match stage.a.backward(params, &c.input, &da, grads, k > 0) {
                Some(dx) => d = dx,
                None => break,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn output_has_input_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut params = ParamSet::new();
        let net = UNet::new(UNetConfig::desk(), 1, &mut params, &mut rng).unwrap();
        let x = Tensor::from_data(1, 32, 48, (0..32 * 48).map(|i| (i % 7) as f32 / 7.0).collect());
        let (y, _) = net.forward(&params, x);
        assert_eq!((y.channels, y.height, y.width), (1, 32, 48));
    }

    #[test]
    fn full_widths_parameter_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut params = ParamSet::new();
        UNet::new(UNetConfig::full(), 1, &mut params, &mut rng).unwrap();
        // Frozen: Σ over convs of (cin·cout·9 + cout).
        let conv = |cin: usize, cout: usize| cin * cout * 9 + cout;
        let expect = conv(1, 32) + conv(32, 32)
            + conv(32, 64) + conv(64, 64)
            + conv(64, 128) + conv(128, 128)
            + conv(128, 256) + conv(256, 256)
            + conv(512, 128) + conv(128, 128)
            + conv(256, 64) + conv(64, 64)
            + conv(128, 32) + conv(32, 32)
            + conv(64, 32) + conv(32, 1);
        assert_eq!(params.num_scalars(), expect);
    }

    #[test]
    fn rejects_bad_configs() {
        let bad = UNetConfig {
            encoder: vec![4, 8],
            decoder: vec![4],
        };
        assert!(bad.validate().is_err());
        let bad = UNetConfig {
            encoder: vec![4, 8],
            decoder: vec![4, 2],
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn backward_matches_finite_differences() {
        let cfg = UNetConfig {
            encoder: vec![2, 3],
            decoder: vec![2, 1],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut params = ParamSet::new();
        let net = UNet::new(cfg, 1, &mut params, &mut rng).unwrap();
        let x = Tensor::from_data(1, 8, 8, (0..64).map(|_| rng.gen_range(0.0..1.0)).collect());
        let r: Vec<f32> = (0..64).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let loss = |p: &ParamSet| -> f64 {
            let (y, _) = net.forward(p, x.clone());
            y.data.iter().zip(&r).map(|(a, b)| *a as f64 * *b as f64).sum()
        };
        let (_, tape) = net.forward(&params, x.clone());
        let mut grads = params.zero_grads();
        net.backward(&params, &tape, Tensor::from_data(1, 8, 8, r.clone()), &mut grads);
        let mut checked = 0;
        // Small steps: larger ones cross ReLU/max-pool switching points.
        let h = 1e-4f32;
        for a in 0..params.len() {
            let id = crate::nn::ParamId(a);
            for idx in [0, params.get(id).len() / 2] {
                let orig = params.get(id)[idx];
                params.get_mut(id)[idx] = orig + h;
                let up = loss(&params);
                params.get_mut(id)[idx] = orig - h;
                let dn = loss(&params);
                params.get_mut(id)[idx] = orig;
                let fd = (up - dn) / (2.0 * h as f64);
                let an = grads.get(id)[idx] as f64;
                assert!(
                    (fd - an).abs() < 2e-2 * (1.0 + an.abs()),
                    "{}[{idx}]: fd {fd} vs analytic {an}",
                    params.arrays()[a].name
                );
                checked += 1;
            }
        }
        assert!(checked >= 16);
    }
}
