//! Corpora of RGB images with semantic masks, channel-permutation and
//! grayscale augmentation, and a synthetic scene generator.
//!
//! On disk a corpus is
//!
//! ```text
//! root/classes.txt      one class name per line; line k is class index k (1-based)
//! root/images/<id>.png  8-bit RGB, stored in true RGB order
//! root/masks/<id>.png   8-bit single-channel label map; 0 = unlabeled background
//! ```

use std::fs;
use std::hash::Hasher;
use std::path::{Path, PathBuf};

use fnv::FnvHasher;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::image::{permute_channels, ChannelLayout, ChannelPermutation, Plane, TriChannelImage};
use crate::ranking::{pair_targets, PairTargets};
use crate::scorer::MaskStack;

/// An RGB-ordered image with its masks.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: String,
    pub image: TriChannelImage,
    pub masks: MaskStack,
}

/// A sample as presented to a model: stored in `layout`, with the matching targets.
#[derive(Debug, Clone, PartialEq)]
pub struct PermutedSample {
    pub id: String,
    pub image: TriChannelImage,
    pub layout: ChannelLayout,
    pub targets: PairTargets,
    pub masks: MaskStack,
}

impl PermutedSample {
    pub fn new(sample: &Sample, perm: ChannelPermutation) -> Self {
        PermutedSample {
            id: sample.id.clone(),
            image: permute_channels(&sample.image, perm),
            layout: perm.into(),
            targets: pair_targets(perm),
            masks: sample.masks.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PermutationMode {
    All6,
    RgbBgr,
    #[default]
    SingleRandom,
}

impl std::str::FromStr for PermutationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all6" => Ok(PermutationMode::All6),
            "rgb_bgr" => Ok(PermutationMode::RgbBgr),
            "single_random" => Ok(PermutationMode::SingleRandom),
            _ => Err(Error::Config(format!(
                "unknown permutation mode `{s}` (expected all6, rgb_bgr or single_random)"
            ))),
        }
    }
}

/// The permuted versions of `sample` used for training or evaluation.
/// `rng` is only drawn from in `SingleRandom` mode.
pub fn expand_permutations<R: Rng>(sample: &Sample, mode: PermutationMode, rng: &mut R) -> Vec<PermutedSample> {
    let perms: Vec<ChannelPermutation> = match mode {
        PermutationMode::All6 => ChannelPermutation::ALL.to_vec(),
        PermutationMode::RgbBgr => vec![ChannelPermutation::Rgb, ChannelPermutation::Bgr],
        PermutationMode::SingleRandom => vec![*ChannelPermutation::ALL.choose(rng).unwrap()],
    };
    perms.into_iter().map(|p| PermutedSample::new(sample, p)).collect()
}

/// Luminance weights used to flatten an image to gray.
pub const LUMA: [f32; 3] = [0.299, 0.587, 0.114];

/// Largest share of the image a colored patch may cover in [`grayscale_augment`].
pub const MAX_PATCH_FRACTION: f64 = 0.02;

/// Replaces the three planes with the (8-bit quantized) luminance plane. With
/// `patch`, one rectangle covering at most [`MAX_PATCH_FRACTION`] of the pixels
/// keeps its original colors. Targets are all ½.
pub fn grayscale_augment<R: Rng>(sample: &Sample, patch: bool, rng: &mut R) -> PermutedSample {
    let (h, w) = (sample.image.height(), sample.image.width());
    let [r, g, b] = sample.image.planes();
    let luma: Vec<f32> = (0..h * w)
        .map(|i| quantize(LUMA[0] * r.data[i] + LUMA[1] * g.data[i] + LUMA[2] * b.data[i]))
        .collect();
    let mut planes = [0, 1, 2].map(|_| luma.clone());
    if patch && h * w >= 4 {
        let area = (rng.gen_range(0.25..=1.0) * MAX_PATCH_FRACTION * (h * w) as f64).max(1.0);
        let ph = rng.gen_range(1..=(area.sqrt().ceil() as usize).min(h));
        let pw = ((area / ph as f64).floor() as usize).clamp(1, w);
        let (y0, x0) = (rng.gen_range(0..=h - ph), rng.gen_range(0..=w - pw));
        for y in y0..y0 + ph {
            for x in x0..x0 + pw {
                for (k, p) in planes.iter_mut().enumerate() {
                    p[y * w + x] = sample.image.plane(k).data[y * w + x];
                }
            }
        }
    }
    let planes = planes.map(|d| Plane {
        height: h,
        width: w,
        data: d,
    });
    PermutedSample {
        id: sample.id.clone(),
        image: TriChannelImage::from_planes(planes).expect("luminance stays in [0,1]"),
        layout: ChannelLayout::Gray,
        targets: pair_targets(ChannelLayout::Gray),
        masks: sample.masks.clone(),
    }
}

fn quantize(v: f32) -> f32 {
    (v.clamp(0.0, 1.0) * 255.0).round() / 255.0
}

/// A set of samples sharing one class vocabulary, ordered by id.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub vocab: Vec<String>,
    pub samples: Vec<Sample>,
}

impl Corpus {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// The samples whose id hashes into `split`.
    pub fn split(&self, split: Split) -> Corpus {
        Corpus {
            vocab: self.vocab.clone(),
            samples: self
                .samples
                .iter()
                .filter(|s| Split::of(&s.id) == split)
                .cloned()
                .collect(),
        }
    }
}

/// Fixed 80/10/10 partition by a hash of the sample id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn of(id: &str) -> Split {
        let mut h = FnvHasher::default();
        h.write(id.as_bytes());
        match h.finish() % 100 {
            0..=79 => Split::Train,
            80..=89 => Split::Val,
            _ => Split::Test,
        }
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            _ => Err(Error::Config(format!("unknown split `{s}` (expected train, val or test)"))),
        }
    }
}

const IMAGE_EXTENSIONS: [&str; 3] = ["png", "jpg", "jpeg"];

fn read_vocab(root: &Path) -> Result<Vec<String>> {
    let path = root.join("classes.txt");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let vocab: Vec<String> = text.lines().map(|l| l.trim().to_string()).collect();
    if vocab.is_empty() || vocab.iter().any(|v| v.is_empty()) {
        return Err(Error::Config(format!(
            "{} must list one non-empty class name per line",
            path.display()
        )));
    }
    Ok(vocab)
}

fn list_images(dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut out = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase);
        let Some(ext) = ext.filter(|e| IMAGE_EXTENSIONS.contains(&e.as_str())) else {
            continue;
        };
        if ext != "png" {
            log::warn!(
                "{}: lossy input, restored outputs will not be bit-exact",
                path.display()
            );
        }
        let id = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
        out.push((id, path));
    }
    out.sort();
    if let Some(w) = out.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(Error::Load {
            id: w[0].0.clone(),
            reason: "more than one image file with this id".into(),
        });
    }
    Ok(out)
}

/// Reads an 8-bit single-channel label map.
pub fn read_label_map(path: &Path) -> Result<(usize, usize, Vec<u8>)> {
    let img = image::open(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })?;
    let image::DynamicImage::ImageLuma8(l) = img else {
        return Err(Error::Input(format!(
            "{}: label maps must be 8-bit single-channel PNGs",
            path.display()
        )));
    };
    Ok((l.height() as usize, l.width() as usize, l.into_raw()))
}

/// Loads a corpus. An existing but empty `images/` directory (or a missing
/// one) yields an empty corpus.
pub fn load_corpus(root: &Path, exec: Exec) -> Result<Corpus> {
    let images_dir = root.join("images");
    if !images_dir.exists() {
        let vocab = if root.join("classes.txt").exists() {
            read_vocab(root)?
        } else {
            Vec::new()
        };
        return Ok(Corpus {
            vocab,
            samples: Vec::new(),
        });
    }
    let files = list_images(&images_dir)?;
    if files.is_empty() {
        return Ok(Corpus {
            vocab: read_vocab(root).unwrap_or_default(),
            samples: Vec::new(),
        });
    }
    let vocab = read_vocab(root)?;
    let samples = exec.try_map(&files, |(id, path)| load_sample(root, id, path, &vocab))?;
    Ok(Corpus { vocab, samples })
}

fn load_sample(root: &Path, id: &str, path: &Path, vocab: &[String]) -> Result<Sample> {
    let fail = |reason: String| Error::Load {
        id: id.to_string(),
        reason,
    };
    let image = TriChannelImage::load(path).map_err(|e| fail(e.to_string()))?;
    let mask_path = root.join("masks").join(format!("{id}.png"));
    if !mask_path.exists() {
        return Err(fail(format!("missing mask {}", mask_path.display())));
    }
    let (h, w, labels) = read_label_map(&mask_path).map_err(|e| fail(e.to_string()))?;
    if (h, w) != (image.height(), image.width()) {
        return Err(fail(format!(
            "mask is {h}x{w} but the image is {}x{}",
            image.height(),
            image.width()
        )));
    }
    let masks = MaskStack::from_label_map(h, w, &labels, vocab.to_vec()).map_err(|e| fail(e.to_string()))?;
    Ok(Sample {
        id: id.to_string(),
        image,
        masks,
    })
}

/// Writes `corpus` in the on-disk layout, creating directories as needed.
pub fn save_corpus(corpus: &Corpus, root: &Path) -> Result<()> {
    for dir in [root.join("images"), root.join("masks")] {
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    let classes = root.join("classes.txt");
    let mut text = corpus.vocab.join("\n");
    text.push('\n');
    fs::write(&classes, text).map_err(|e| Error::io(&classes, e))?;
    for s in &corpus.samples {
        s.image.save(&root.join("images").join(format!("{}.png", s.id)))?;
        let path = root.join("masks").join(format!("{}.png", s.id));
        image::save_buffer(
            &path,
            &s.masks.to_label_map()?,
            s.masks.width() as u32,
            s.masks.height() as u32,
            image::ExtendedColorType::L8,
        )
        .map_err(|source| Error::Image { path, source })?;
    }
    Ok(())
}

/// Where a class appears in a synthetic scene.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    TopBand,
    BottomBand,
    Blob,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSpec {
    pub name: String,
    /// Mean RGB color in [0,1]³.
    pub mean: [f32; 3],
    /// Standard deviation of the per-instance color offset.
    pub jitter: f32,
    pub placements: Vec<Placement>,
}

/// Parameters of the synthetic scene generator. The seed fixes the corpus
/// bit-exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub height: usize,
    pub width: usize,
    pub seed: u64,
    pub classes: Vec<ClassSpec>,
    /// Background is gray with this per-channel jitter; it is left unlabeled.
    pub background_jitter: f32,
    /// Standard deviation of per-pixel noise.
    pub pixel_noise: f32,
    /// Blob count range (inclusive).
    pub min_blobs: usize,
    pub max_blobs: usize,
    /// Probability that a top band (resp. bottom band) is drawn.
    pub band_probability: f64,
    /// Every scene has at least one class region covering this share of pixels.
    pub min_region_fraction: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        use Placement::*;
        let class = |name: &str, mean: [f32; 3], placements: &[Placement]| ClassSpec {
            name: name.into(),
            mean,
            jitter: 0.04,
            placements: placements.to_vec(),
        };
        SynthSpec {
            height: 64,
            width: 64,
            seed: 0,
            classes: vec![
                class("sky", [0.45, 0.65, 0.95], &[TopBand]),
                class("vegetation", [0.30, 0.60, 0.20], &[BottomBand, Blob]),
                class("skin", [0.85, 0.65, 0.50], &[Blob]),
                class("ground", [0.55, 0.42, 0.30], &[BottomBand, Blob]),
            ],
            background_jitter: 0.03,
            pixel_noise: 0.02,
            min_blobs: 1,
            max_blobs: 3,
            band_probability: 0.6,
            min_region_fraction: 0.05,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.height < 4 || self.width < 4 {
            return bad("synthetic images must be at least 4x4".into());
        }
        if self.classes.is_empty() || self.classes.len() > 255 {
            return bad("the palette needs between 1 and 255 classes".into());
        }
        for c in &self.classes {
            if c.mean.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return bad(format!("class `{}` has a mean color outside [0,1]", c.name));
            }
            if c.placements.is_empty() || !(c.jitter >= 0.0) {
                return bad(format!("class `{}` needs a placement and a non-negative jitter", c.name));
            }
        }
        if !self.classes.iter().any(|c| c.placements.contains(&Placement::Blob)) {
            return bad("at least one class must allow blob placement".into());
        }
        if self.min_blobs < 1 || self.min_blobs > self.max_blobs {
            return bad("need 1 <= min_blobs <= max_blobs".into());
        }
        if !(0.0..=1.0).contains(&self.band_probability) || !(0.0..0.5).contains(&self.min_region_fraction) {
            return bad("band_probability must lie in [0,1] and min_region_fraction in [0,0.5)".into());
        }
        if !(self.pixel_noise >= 0.0 && self.background_jitter >= 0.0) {
            return bad("noise levels must be non-negative".into());
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: SynthSpec = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("spec serializes")
    }

    pub fn vocab(&self) -> Vec<String> {
        self.classes.iter().map(|c| c.name.clone()).collect()
    }
}

/// Generates `count` scenes with ids `synth-00000`, `synth-00001`, …
/// Sample `i` draws from its own ChaCha stream, so the output does not depend
/// on how the work is scheduled.
pub fn generate_synthetic(spec: &SynthSpec, count: usize, exec: Exec) -> Result<Corpus> {
    if count == 0 {
        return Err(Error::Config("count must be at least 1".into()));
    }
    spec.validate()?;
    let samples = exec.map_range(count, |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(i as u64);
        synth_scene(spec, &format!("synth-{i:05}"), &mut rng)
    });
    Ok(Corpus {
        vocab: spec.vocab(),
        samples,
    })
}

fn synth_scene(spec: &SynthSpec, id: &str, rng: &mut ChaCha8Rng) -> Sample {
    let (h, w) = (spec.height, spec.width);
    let n = h * w;
    let with = |p: Placement| -> Vec<usize> {
        (0..spec.classes.len())
            .filter(|&k| spec.classes[k].placements.contains(&p))
            .collect()
    };
    let (top, bottom, blobs) = (with(Placement::TopBand), with(Placement::BottomBand), with(Placement::Blob));
    // Each painted region: (class, membership per pixel).
    let mut labels;
    let mut regions: Vec<(usize, Vec<bool>)>;
    loop {
        labels = vec![0u8; n];
        regions = Vec::new();
        if !top.is_empty() && rng.gen_bool(spec.band_probability) {
            let k = top[rng.gen_range(0..top.len())];
            let depth = rng.gen_range(0.2..0.45) * h as f64;
            let wave = rng.gen_range(0.0..0.05) * h as f64;
            let phase = rng.gen_range(0.0..std::f64::consts::TAU);
            regions.push((k, band(h, w, |x| depth + wave * (x as f64 / w as f64 * 6.0 + phase).sin(), true)));
        }
        if !bottom.is_empty() && rng.gen_bool(spec.band_probability) {
            let k = bottom[rng.gen_range(0..bottom.len())];
            let depth = rng.gen_range(0.2..0.4) * h as f64;
            regions.push((k, band(h, w, |_| h as f64 - depth, false)));
        }
        for _ in 0..rng.gen_range(spec.min_blobs..=spec.max_blobs) {
            let k = blobs[rng.gen_range(0..blobs.len())];
            let (cy, cx) = (rng.gen_range(0.15..0.85) * h as f64, rng.gen_range(0.15..0.85) * w as f64);
            let (ry, rx) = (rng.gen_range(0.12..0.3) * h as f64, rng.gen_range(0.12..0.3) * w as f64);
            let mut m = vec![false; n];
            for y in 0..h {
                for x in 0..w {
                    let (dy, dx) = ((y as f64 + 0.5 - cy) / ry, (x as f64 + 0.5 - cx) / rx);
                    m[y * w + x] = dy * dy + dx * dx <= 1.0;
                }
            }
            regions.push((k, m));
        }
        for (k, m) in &regions {
            for (l, &inside) in labels.iter_mut().zip(m) {
                if inside {
                    *l = (*k + 1) as u8;
                }
            }
        }
        let mut area = vec![0usize; spec.classes.len() + 1];
        for &l in &labels {
            area[l as usize] += 1;
        }
        if area[1..].iter().any(|&a| a as f64 >= spec.min_region_fraction * n as f64) {
            break;
        }
    }

    let bg_level = rng.gen_range(0.3..0.7f32);
    let bg_noise = Normal::new(0.0, spec.background_jitter).unwrap();
    let background: [f32; 3] = [0, 1, 2].map(|_| bg_level + bg_noise.sample(rng));
    // Region colors are drawn in paint order; the later region wins a pixel.
    let mut colors = Vec::with_capacity(regions.len());
    for (k, _) in &regions {
        let c = &spec.classes[*k];
        let jit = Normal::new(0.0, c.jitter).unwrap();
        colors.push(c.mean.map(|m| m + jit.sample(rng)));
    }
    let mut owner: Vec<Option<usize>> = vec![None; n];
    for (r, (_, m)) in regions.iter().enumerate() {
        for (o, &inside) in owner.iter_mut().zip(m) {
            if inside {
                *o = Some(r);
            }
        }
    }
    let noise = Normal::new(0.0, spec.pixel_noise).unwrap();
    let mut planes = [vec![0.0f32; n], vec![0.0f32; n], vec![0.0f32; n]];
    for (i, o) in owner.iter().enumerate() {
        let base = o.map_or(background, |r| colors[r]);
        for (c, p) in planes.iter_mut().enumerate() {
            p[i] = quantize(base[c] + noise.sample(rng));
        }
    }
    let image = TriChannelImage::from_planes(planes.map(|data| Plane {
        height: h,
        width: w,
        data,
    }))
    .expect("quantized values lie in [0,1]");
    let masks = MaskStack::from_label_map(h, w, &labels, spec.vocab()).expect("labels come from the vocabulary");
    Sample {
        id: id.to_string(),
        image,
        masks,
    }
}

/// Pixels above (`top`) or below the per-column boundary row.
fn band(h: usize, w: usize, boundary: impl Fn(usize) -> f64, top: bool) -> Vec<bool> {
    let mut m = vec![false; h * w];
    for x in 0..w {
        let b = boundary(x);
        for y in 0..h {
            let c = y as f64 + 0.5;
            m[y * w + x] = if top { c < b } else { c >= b };
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ranking::PairTarget;

    fn small_spec() -> SynthSpec {
        SynthSpec {
            height: 24,
            width: 32,
            seed: 7,
            ..SynthSpec::default()
        }
    }

    #[test]
    fn all6_covers_the_group() {
        let corpus = generate_synthetic(&small_spec(), 1, Exec::Sequential).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = expand_permutations(&corpus.samples[0], PermutationMode::All6, &mut rng);
        let layouts: Vec<ChannelLayout> = out.iter().map(|p| p.layout).collect();
        assert_eq!(layouts, ChannelPermutation::ALL.map(ChannelLayout::from).to_vec());
        assert_eq!(out[0].targets.all(), [PairTarget::Ahead; 3]);
        let rb = expand_permutations(&corpus.samples[0], PermutationMode::RgbBgr, &mut rng);
        assert_eq!(rb.len(), 2);
        assert_eq!(rb[1].layout, ChannelPermutation::Bgr.into());
        assert_eq!(expand_permutations(&corpus.samples[0], PermutationMode::SingleRandom, &mut rng).len(), 1);
    }

    #[test]
    fn synthetic_corpus_is_reproducible_and_valid() {
        let spec = small_spec();
        let a = generate_synthetic(&spec, 12, Exec::Parallel).unwrap();
        let b = generate_synthetic(&spec, 12, Exec::Sequential).unwrap();
        assert_eq!(a, b);
        for s in &a.samples {
            // Masks are disjoint; together with the unlabeled rest they partition the grid.
            for i in 0..24 * 32 {
                let covered: u8 = s.masks.masks().iter().map(|m| m[i]).sum();
                assert!(covered <= 1);
            }
            let biggest = (0..s.masks.len()).map(|k| s.masks.area(k)).max().unwrap();
            assert!(biggest as f64 >= 0.05 * (24 * 32) as f64);
        }
        assert!(generate_synthetic(&spec, 0, Exec::Sequential).is_err());
    }

    #[test]
    fn gray_augment_targets_and_planes() {
        let corpus = generate_synthetic(&small_spec(), 3, Exec::Sequential).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for s in &corpus.samples {
            let g = grayscale_augment(s, false, &mut rng);
            assert!(g.image.is_exact_gray());
            assert_eq!(g.targets.values(), [0.5; 3]);
            let p = grayscale_augment(s, true, &mut rng);
            assert_eq!(p.layout, ChannelLayout::Gray);
        }
    }

    #[test]
    fn split_is_roughly_80_10_10() {
        let mut counts = [0usize; 3];
        for i in 0..5000 {
            counts[Split::of(&format!("synth-{i:05}")) as usize] += 1;
        }
        assert!((3800..4200).contains(&counts[0]), "{counts:?}");
        assert!((400..600).contains(&counts[1]) && (400..600).contains(&counts[2]), "{counts:?}");
    }

    #[test]
    fn spec_round_trips_through_toml() {
        let spec = small_spec();
        assert_eq!(SynthSpec::from_toml(&spec.to_toml()).unwrap(), spec);
        let partial = SynthSpec::from_toml("height = 32\nwidth = 48\nseed = 3\n").unwrap();
        assert_eq!((partial.height, partial.width, partial.classes.len()), (32, 48, 4));
        assert!(SynthSpec::from_toml("heigth = 32\n").is_err());
    }
}
