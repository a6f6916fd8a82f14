//! Training loops for the scorer, the pair scorer and the two baselines.
//!
//! All trainers share one loop: per epoch the training items are shuffled
//! from a seeded stream, each mini-batch is cut into fixed chunks whose
//! gradients are computed independently (in parallel when enabled) and then
//! summed in chunk order, and Adam takes a step on the batch-mean loss. The
//! chunking does not depend on the thread count, so runs are reproducible.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{image_histograms, ColorHistogram, ShallowModel, SoftmaxClasses, SoftmaxModel};
use crate::data::{grayscale_augment, Corpus, PermutationMode};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::image::{permute_channels, ChannelPermutation, Color};
use crate::nn::{Adam, Grads, ParamSet};
use crate::ranking::{
    loss_grad_delta, pair_loss, pair_targets, ranking_loss_and_grad, sigmoid, softplus, RankingConfig,
    ScoreTriple,
};
use crate::scorer::{PairScorerModel, ScorerModel, UNetConfig};

/// Items per gradient chunk. Fixed so that the summation order never
/// depends on scheduling.
const GRAD_CHUNK: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub initial_lr: f64,
    /// Multiplies the learning rate once per epoch.
    pub lr_decay: f64,
    pub seed: u64,
    pub ranking: RankingConfig,
    /// How training images are permuted each epoch.
    pub permutation_mode: PermutationMode,
    /// Share of training images replaced by a grayscale version (targets ½).
    pub gray_fraction: f64,
    /// Chance that a grayscale replacement keeps one small colored patch.
    pub gray_patch_probability: f64,
    pub unet: UNetConfig,
    pub pair_widths: Vec<usize>,
    pub softmax_encoder: Vec<usize>,
    pub shallow_bins: usize,
    pub shallow_hidden: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::full()
    }
}

impl TrainConfig {
    /// Batch 48, 100 epochs, lr 0.001 decaying by 0.98 per epoch, full widths.
    pub fn full() -> Self {
        TrainConfig {
            batch_size: 48,
            epochs: 100,
            initial_lr: 1e-3,
            lr_decay: 0.98,
            seed: 0,
            ranking: RankingConfig::default(),
            permutation_mode: PermutationMode::SingleRandom,
            gray_fraction: 0.1,
            gray_patch_probability: 0.5,
            unet: UNetConfig::full(),
            pair_widths: PairScorerModel::DEFAULT_WIDTHS.to_vec(),
            softmax_encoder: UNetConfig::full().encoder,
            shallow_bins: crate::baselines::DEFAULT_BINS,
            shallow_hidden: ShallowModel::DEFAULT_HIDDEN,
        }
    }

    /// CPU-scale overrides: reduced widths, batch 16, 20 epochs, lr 0.003.
    pub fn desk() -> Self {
        TrainConfig {
            batch_size: 16,
            epochs: 20,
            initial_lr: 3e-3,
            unet: UNetConfig::desk(),
            softmax_encoder: UNetConfig::desk().encoder,
            ..Self::full()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if !(self.initial_lr.is_finite() && self.initial_lr > 0.0) {
            return bad("initial_lr must be positive");
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return bad("lr_decay must lie in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.gray_fraction) || !(0.0..=1.0).contains(&self.gray_patch_probability) {
            return bad("gray_fraction and gray_patch_probability must lie in [0, 1]");
        }
        self.ranking.validate()?;
        self.unet.validate()
    }

    /// Learning rate used during epoch `epoch` (0-based).
    pub fn lr_at(&self, epoch: usize) -> f64 {
        self.initial_lr * self.lr_decay.powi(epoch as i32)
    }

    /// Parses a TOML config. The optional `preset` key (`"full"` or `"desk"`)
    /// picks the base values; every other key overrides one field. Returns the
    /// config and the names of fields left at their preset value.
    pub fn from_toml(text: &str) -> Result<(Self, Vec<String>)> {
        let mut user: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        let base = match user.remove("preset") {
            None => Self::full(),
            Some(toml::Value::String(p)) if p == "full" => Self::full(),
            Some(toml::Value::String(p)) if p == "desk" => Self::desk(),
            Some(other) => return Err(Error::Config(format!("unknown preset {other}"))),
        };
        let base_table = toml::Table::try_from(&base).map_err(|e| Error::Config(e.to_string()))?;
        let defaulted: Vec<String> = base_table.keys().filter(|k| !user.contains_key(*k)).cloned().collect();
        let mut merged = base_table;
        for (k, v) in user {
            if !merged.contains_key(&k) {
                return Err(Error::Config(format!("unknown config key `{k}`")));
            }
            // Nested tables (`ranking`, `unet`) merge key by key.
            match (merged.get_mut(&k), v) {
                (Some(toml::Value::Table(dst)), toml::Value::Table(src)) => dst.extend(src),
                (_, v) => {
                    merged.insert(k, v);
                }
            }
        }
        let cfg: TrainConfig = merged.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok((cfg, defaulted))
    }
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub lr: f64,
    /// Mean per-item loss over the epoch, each item measured before the
    /// update of its batch.
    pub mean_loss: f64,
    pub items: usize,
}

/// Gives the generic loop access to a model's parameters.
pub trait Trainable: Sync {
    fn params(&self) -> &ParamSet;
    fn params_mut(&mut self) -> &mut ParamSet;
}

macro_rules! trainable {
    ($($t:ty),*) => {$(
        impl Trainable for $t {
            fn params(&self) -> &ParamSet {
                <$t>::params(self)
            }
            fn params_mut(&mut self) -> &mut ParamSet {
                <$t>::params_mut(self)
            }
        }
    )*};
}
trainable!(ScorerModel, PairScorerModel, SoftmaxModel, ShallowModel);

/// Runs the shared optimization loop.
///
/// `items(epoch, rng)` lists the epoch's training items (before shuffling);
/// `item_grad(model, item, grads)` adds the item's loss gradient to `grads`
/// and returns its loss. `on_epoch` sees each log line as soon as it exists.
pub fn optimize<M, I, F, G>(
    model: &mut M,
    cfg: &TrainConfig,
    exec: Exec,
    mut items: F,
    item_grad: G,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<Vec<EpochLog>>
where
    M: Trainable,
    I: Sync,
    F: FnMut(usize, &mut ChaCha8Rng) -> Result<Vec<I>>,
    G: Fn(&M, &I, &mut Grads) -> Result<f64> + Sync,
{
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let mut adam = Adam::new(model.params());
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let mut list = items(epoch, &mut rng)?;
        if list.is_empty() {
            return Err(Error::Config("nothing to train on".into()));
        }
        list.shuffle(&mut rng);
        let lr = cfg.lr_at(epoch);
        let mut total = 0.0;
        for (b, batch) in list.chunks(cfg.batch_size).enumerate() {
            let chunks: Vec<&[I]> = batch.chunks(GRAD_CHUNK).collect();
            let m: &M = model;
            let results = exec.map(&chunks, |chunk| -> Result<(f64, Grads)> {
                let mut g = m.params().zero_grads();
                let mut loss = 0.0;
                for item in chunk.iter() {
                    loss += item_grad(m, item, &mut g)?;
                }
                Ok((loss, g))
            });
            let mut loss = 0.0;
            let mut grads = model.params().zero_grads();
            for r in results {
                let (l, g) = r.map_err(|e| Error::Divergence {
                    epoch,
                    batch: b,
                    detail: e.to_string(),
                })?;
                loss += l;
                grads.add_assign(&g);
            }
            grads.scale(1.0 / batch.len() as f32);
            if !loss.is_finite() || !grads.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    batch: b,
                    detail: format!("batch loss {loss}"),
                });
            }
            total += loss;
            adam.step(model.params_mut(), &grads, lr);
        }
        let log = EpochLog {
            epoch,
            lr,
            mean_loss: total / list.len() as f64,
            items: list.len(),
        };
        log::info!("epoch {epoch}: lr {lr:.6} mean loss {:.6}", log.mean_loss);
        on_epoch(&log);
        history.push(log);
    }
    Ok(history)
}

/// How one training image is presented.
#[derive(Debug, Clone, Copy)]
enum View {
    Permuted(ChannelPermutation),
    /// Grayscale replacement; the seed drives the optional patch.
    Gray { patch: bool, seed: u64 },
}

fn views(corpus: &Corpus, mode: PermutationMode, cfg: &TrainConfig, rng: &mut ChaCha8Rng) -> Vec<(usize, View)> {
    let mut out = Vec::new();
    for k in 0..corpus.samples.len() {
        if cfg.gray_fraction > 0.0 && rng.gen_bool(cfg.gray_fraction) {
            let patch = rng.gen_bool(cfg.gray_patch_probability);
            out.push((k, View::Gray { patch, seed: rng.gen() }));
            continue;
        }
        match mode {
            PermutationMode::All6 => out.extend(ChannelPermutation::ALL.map(|p| (k, View::Permuted(p)))),
            PermutationMode::RgbBgr => {
                out.extend([ChannelPermutation::Rgb, ChannelPermutation::Bgr].map(|p| (k, View::Permuted(p))))
            }
            PermutationMode::SingleRandom => {
                out.push((k, View::Permuted(*ChannelPermutation::ALL.choose(rng).unwrap())))
            }
        }
    }
    out
}

fn check_corpus(corpus: &Corpus) -> Result<()> {
    if corpus.is_empty() {
        return Err(Error::Config("the training corpus is empty".into()));
    }
    Ok(())
}

/// Trains the per-channel scorer with the pairwise ranking loss.
pub fn train_orderer(
    corpus: &Corpus,
    cfg: &TrainConfig,
    exec: Exec,
    on_epoch: impl FnMut(&EpochLog),
) -> Result<(ScorerModel, Vec<EpochLog>)> {
    check_corpus(corpus)?;
    cfg.validate()?;
    let mut model = ScorerModel::new(cfg.unet.clone(), corpus.vocab.clone(), cfg.seed)?;
    let ranking = cfg.ranking;
    let history = optimize(
        &mut model,
        cfg,
        exec,
        |_, rng| Ok(views(corpus, cfg.permutation_mode, cfg, rng)),
        |m: &ScorerModel, &(k, view): &(usize, View), grads| {
            let sample = &corpus.samples[k];
            let (image, targets) = match view {
                View::Permuted(p) => (permute_channels(&sample.image, p), pair_targets(p)),
                View::Gray { patch, seed } => {
                    let g = grayscale_augment(sample, patch, &mut ChaCha8Rng::seed_from_u64(seed));
                    (g.image, g.targets)
                }
            };
            let mut scores = [0.0; 3];
            let mut tapes = Vec::with_capacity(3);
            for (i, s) in scores.iter_mut().enumerate() {
                let (v, t) = m.forward_channel(image.plane(i), &sample.masks)?;
                *s = v;
                tapes.push(t);
            }
            let (loss, ds) = ranking_loss_and_grad(&ScoreTriple(scores), &targets, &ranking)?;
            let pool = m.pool_weights(&sample.masks);
            for (tape, d) in tapes.iter().zip(ds) {
                if d != 0.0 {
                    m.backward_channel(tape, &pool, image.width(), d, grads);
                }
            }
            Ok(loss)
        },
        on_epoch,
    )?;
    Ok((model, history))
}

/// Trains the two-plane pair scorer on RGB and BGR versions of every image:
/// the target is `s₁₂ > s₁₃` for RGB and the reverse for BGR.
pub fn train_bgr(
    corpus: &Corpus,
    cfg: &TrainConfig,
    exec: Exec,
    on_epoch: impl FnMut(&EpochLog),
) -> Result<(PairScorerModel, Vec<EpochLog>)> {
    check_corpus(corpus)?;
    let mut model = PairScorerModel::new(&cfg.pair_widths, cfg.seed)?;
    let ranking = cfg.ranking;
    let items: Vec<(usize, ChannelPermutation)> = (0..corpus.len())
        .flat_map(|k| [(k, ChannelPermutation::Rgb), (k, ChannelPermutation::Bgr)])
        .collect();
    let history = optimize(
        &mut model,
        cfg,
        exec,
        |_, _| Ok(items.clone()),
        |m: &PairScorerModel, &(k, perm): &(usize, ChannelPermutation), grads| {
            let image = permute_channels(&corpus.samples[k].image, perm);
            let [p1, p2, p3] = image.planes();
            let (s12, t12) = m.forward(&[p1, p2])?;
            let (s13, t13) = m.forward(&[p1, p3])?;
            let y = if perm == ChannelPermutation::Rgb { 1.0 } else { 0.0 };
            let delta = s12 - s13;
            if !delta.is_finite() {
                return Err(Error::Domain(format!("pair scores {s12}, {s13}")));
            }
            let d = loss_grad_delta(delta, y, &ranking);
            m.backward(&t12, d, grads);
            m.backward(&t13, -d, grads);
            Ok(pair_loss(delta, y, &ranking))
        },
        on_epoch,
    )?;
    Ok((model, history))
}

/// Trains the softmax classifier with cross-entropy over its layouts.
/// `All6` presents every layout of the class set each epoch; the other modes
/// draw one layout per image.
pub fn train_softmax(
    corpus: &Corpus,
    cfg: &TrainConfig,
    classes: SoftmaxClasses,
    exec: Exec,
    on_epoch: impl FnMut(&EpochLog),
) -> Result<(SoftmaxModel, Vec<EpochLog>)> {
    check_corpus(corpus)?;
    let mut model = SoftmaxModel::new(&cfg.softmax_encoder, classes, cfg.seed)?;
    let layouts = classes.layouts();
    let history = optimize(
        &mut model,
        cfg,
        exec,
        |_, rng| {
            Ok((0..corpus.len())
                .flat_map(|k| match cfg.permutation_mode {
                    PermutationMode::All6 => layouts.iter().map(|&p| (k, p)).collect::<Vec<_>>(),
                    _ => vec![(k, *layouts.choose(rng).unwrap())],
                })
                .collect())
        },
        |m: &SoftmaxModel, &(k, perm): &(usize, ChannelPermutation), grads| {
            let image = permute_channels(&corpus.samples[k].image, perm);
            let (logits, tape) = m.forward(&image)?;
            let target = classes.class_of(perm).expect("layout belongs to the class set");
            let (loss, d) = cross_entropy(&logits, target)?;
            m.backward(&tape, &d, grads);
            Ok(loss)
        },
        on_epoch,
    )?;
    Ok((model, history))
}

/// Cross-entropy of `softmax(logits)` against class `target`, with its
/// gradient `p − onehot`.
pub fn cross_entropy(logits: &[f64], target: usize) -> Result<(f64, Vec<f64>)> {
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("non-finite logits".into()));
    }
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    let mut d: Vec<f64> = logits.iter().map(|v| (v - lse).exp()).collect();
    d[target] -= 1.0;
    Ok((lse - logits[target], d))
}

/// Trains the histogram pair classifier. Only histograms are used: each
/// image contributes its six ordered color pairs (target 1 when the first
/// color precedes the second), and grayscale replacements contribute three
/// identical-histogram pairs with target ½.
pub fn train_shallow(
    corpus: &Corpus,
    cfg: &TrainConfig,
    exec: Exec,
    on_epoch: impl FnMut(&EpochLog),
) -> Result<(ShallowModel, Vec<EpochLog>)> {
    check_corpus(corpus)?;
    let bins = cfg.shallow_bins;
    let hists: Vec<[ColorHistogram; 3]> = exec.try_map(&corpus.samples, |s| image_histograms(&s.image, bins))?;
    let mut gray_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    gray_rng.set_stream(2);
    let gray_hists: Vec<ColorHistogram> = corpus
        .samples
        .iter()
        .map(|s| {
            let g = grayscale_augment(s, false, &mut gray_rng);
            crate::baselines::channel_histogram(g.image.plane(0), bins)
        })
        .collect::<Result<_>>()?;
    train_shallow_on_histograms(&hists, &gray_hists, cfg, exec, on_epoch)
}

/// [`train_shallow`] on precomputed histograms (RGB order per image).
pub fn train_shallow_on_histograms(
    hists: &[[ColorHistogram; 3]],
    gray_hists: &[ColorHistogram],
    cfg: &TrainConfig,
    exec: Exec,
    on_epoch: impl FnMut(&EpochLog),
) -> Result<(ShallowModel, Vec<EpochLog>)> {
    if hists.is_empty() {
        return Err(Error::Config("the training corpus is empty".into()));
    }
    let mut model = ShallowModel::new(cfg.shallow_bins, cfg.shallow_hidden, cfg.seed)?;
    // (image, first, second, target); first == second marks a gray pair.
    type PairItem = (usize, usize, usize, f64);
    let history = optimize(
        &mut model,
        cfg,
        exec,
        |_, rng| {
            let mut out: Vec<PairItem> = Vec::new();
            for k in 0..hists.len() {
                if cfg.gray_fraction > 0.0 && !gray_hists.is_empty() && rng.gen_bool(cfg.gray_fraction) {
                    out.extend([(k, 3, 3, 0.5); 3]);
                    continue;
                }
                for a in Color::ALL {
                    for b in Color::ALL {
                        if a != b {
                            let y = if a.rank() < b.rank() { 1.0 } else { 0.0 };
                            out.push((k, a.rank(), b.rank(), y));
                        }
                    }
                }
            }
            Ok(out)
        },
        |m: &ShallowModel, &(k, a, b, y): &PairItem, grads| {
            let pick = |c: usize| if c == 3 { &gray_hists[k] } else { &hists[k][c] };
            let (logit, tape) = m.forward(pick(a), pick(b))?;
            if !logit.is_finite() {
                return Err(Error::Domain("non-finite logit".into()));
            }
            m.backward(&tape, sigmoid(logit) - y, grads);
            Ok((1.0 - y) * logit + softplus(-logit))
        },
        on_epoch,
    )?;
    Ok((model, history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, SynthSpec};
    use crate::ranking::ranking_loss;
    use crate::scorer::ChannelScorer;

    fn tiny_cfg() -> TrainConfig {
        TrainConfig {
            batch_size: 4,
            epochs: 1,
            initial_lr: 3e-3,
            gray_fraction: 0.0,
            unet: UNetConfig {
                encoder: vec![4, 8],
                decoder: vec![4, 1],
            },
            pair_widths: vec![4, 8],
            softmax_encoder: vec![4, 8],
            shallow_bins: 16,
            shallow_hidden: 8,
            ..TrainConfig::desk()
        }
    }

    fn corpus(n: usize) -> Corpus {
        let spec = SynthSpec {
            height: 16,
            width: 16,
            seed: 4,
            ..SynthSpec::default()
        };
        generate_synthetic(&spec, n, Exec::Sequential).unwrap()
    }

    #[test]
    fn lr_schedule_is_exact() {
        let cfg = TrainConfig::full();
        assert_eq!(cfg.lr_at(0), 1e-3);
        assert_eq!(cfg.lr_at(3), 1e-3 * 0.98f64.powi(3));
    }

    #[test]
    fn toml_overrides_and_reports_defaults() {
        let (cfg, defaulted) = TrainConfig::from_toml("preset = \"desk\"\nepochs = 3\n[ranking]\nlink = \"identity\"\n").unwrap();
        assert_eq!(cfg.epochs, 3);
        assert_eq!(cfg.batch_size, 16);
        assert_eq!(cfg.ranking.link, crate::ranking::Link::Identity);
        assert_eq!(cfg.ranking.temperature, 0.1);
        assert!(defaulted.contains(&"batch_size".to_string()));
        assert!(!defaulted.contains(&"epochs".to_string()));
        assert!(TrainConfig::from_toml("epoch = 3").is_err());
        assert!(TrainConfig::from_toml("batch_size = 0").is_err());
    }

    #[test]
    fn cross_entropy_gradient_is_p_minus_onehot() {
        let (l, d) = cross_entropy(&[0.0, 0.0], 1).unwrap();
        assert!((l - 2f64.ln()).abs() < 1e-12);
        assert_eq!(d, vec![0.5, -0.5]);
    }

    #[test]
    fn one_epoch_lowers_the_orderer_loss() {
        let c = corpus(8);
        let cfg = TrainConfig { epochs: 3, ..tiny_cfg() };
        let mean_loss = |m: &ScorerModel| -> f64 {
            c.samples
                .iter()
                .map(|s| {
                    let scores = m.score_image(&s.image, &s.masks).unwrap();
                    ranking_loss(&scores, &pair_targets(ChannelPermutation::Rgb), &cfg.ranking).unwrap()
                })
                .sum::<f64>()
                / c.len() as f64
        };
        let init = ScorerModel::new(cfg.unet.clone(), c.vocab.clone(), cfg.seed).unwrap();
        let (trained, history) = train_orderer(&c, &cfg, Exec::Parallel, |_| {}).unwrap();
        assert_eq!(history.len(), 3);
        assert!(mean_loss(&trained) < mean_loss(&init));
    }

    #[test]
    fn runs_are_reproducible_across_exec_modes() {
        let c = corpus(6);
        let cfg = tiny_cfg();
        let (a, ha) = train_orderer(&c, &cfg, Exec::Parallel, |_| {}).unwrap();
        let (b, hb) = train_orderer(&c, &cfg, Exec::Sequential, |_| {}).unwrap();
        assert_eq!(a.params(), b.params());
        assert_eq!(ha, hb);
    }

    #[test]
    fn gray_only_epoch_logs_three_ln2() {
        let c = corpus(5);
        let cfg = TrainConfig {
            gray_fraction: 1.0,
            gray_patch_probability: 0.0,
            ..tiny_cfg()
        };
        let (_, h) = train_orderer(&c, &cfg, Exec::Sequential, |_| {}).unwrap();
        assert!((h[0].mean_loss - 3.0 * 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn baseline_trainers_run_and_lower_their_loss() {
        let c = corpus(8);
        let cfg = TrainConfig { epochs: 4, ..tiny_cfg() };
        let (_, h) = train_bgr(&c, &cfg, Exec::Parallel, |_| {}).unwrap();
        assert!(h[3].mean_loss < h[0].mean_loss, "bgr {h:?}");
        let (m, h) = train_softmax(&c, &cfg, SoftmaxClasses::Six, Exec::Parallel, |_| {}).unwrap();
        assert!(h[3].mean_loss < h[0].mean_loss, "softmax {h:?}");
        let p = crate::baselines::softmax_classify(&c.samples[0].image, &m).unwrap();
        assert!((p.p.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        let (_, h) = train_shallow(&c, &cfg, Exec::Parallel, |_| {}).unwrap();
        assert!(h[3].mean_loss < h[0].mean_loss, "shallow {h:?}");
    }

    #[test]
    fn divergence_names_epoch_and_batch() {
        let cfg = tiny_cfg();
        let mut m = ShallowModel::new(16, 8, 0).unwrap();
        let err = optimize(
            &mut m,
            &cfg,
            Exec::Sequential,
            |_, _| Ok(vec![0usize; 6]),
            |_, _, _| Ok(f64::NAN),
            |_| {},
        )
        .unwrap_err();
        assert!(matches!(err, Error::Divergence { epoch: 0, batch: 0, .. }), "{err}");
    }
}
