//! Evaluation: per-layout ordering accuracy, RGB-vs-BGR accuracy, and
//! near-grayscale precision/recall/F1 with a threshold sweep and a plot of
//! the two statistic populations.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{image_histograms, shallow_predict, softmax_classify, softmax_entropy, ShallowModel, SoftmaxClasses, SoftmaxModel};
use crate::checkpoint::Model;
use crate::data::{grayscale_augment, Corpus};
use crate::detectors::{detect_bgr, predict_order, BgrLabel};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::image::{permute_channels, ChannelPermutation, TriChannelImage};
use crate::scorer::{ChannelScorer, MaskStack, PairScorerModel, ScorerModel};

/// Predicts the stored layout of an image.
pub trait LayoutPredictor: Sync {
    fn predict_layout(&self, image: &TriChannelImage, masks: &MaskStack) -> Result<ChannelPermutation>;
}

impl LayoutPredictor for ScorerModel {
    fn predict_layout(&self, image: &TriChannelImage, masks: &MaskStack) -> Result<ChannelPermutation> {
        Ok(predict_order(&self.score_image(image, masks)?)?.permutation)
    }
}

impl LayoutPredictor for SoftmaxModel {
    fn predict_layout(&self, image: &TriChannelImage, _: &MaskStack) -> Result<ChannelPermutation> {
        Ok(softmax_classify(image, self)?.argmax())
    }
}

impl LayoutPredictor for ShallowModel {
    fn predict_layout(&self, image: &TriChannelImage, _: &MaskStack) -> Result<ChannelPermutation> {
        Ok(shallow_predict(&image_histograms(image, self.bins())?, self)?.permutation)
    }
}

/// Decides between RGB and BGR storage.
pub trait BgrPredictor: Sync {
    fn predict_bgr(&self, image: &TriChannelImage, masks: &MaskStack) -> Result<BgrLabel>;
}

impl BgrPredictor for PairScorerModel {
    fn predict_bgr(&self, image: &TriChannelImage, _: &MaskStack) -> Result<BgrLabel> {
        Ok(detect_bgr(image, self)?.label)
    }
}

impl BgrPredictor for SoftmaxModel {
    /// The more probable of the two layouts; ties read as BGR.
    fn predict_bgr(&self, image: &TriChannelImage, _: &MaskStack) -> Result<BgrLabel> {
        let out = softmax_classify(image, self)?;
        let p = |perm| self.classes().class_of(perm).map_or(0.0, |k| out.p[k]);
        Ok(if p(ChannelPermutation::Rgb) > p(ChannelPermutation::Bgr) {
            BgrLabel::Rgb
        } else {
            BgrLabel::Bgr
        })
    }
}

impl BgrPredictor for ScorerModel {
    /// RGB iff the first plane outscores the third.
    fn predict_bgr(&self, image: &TriChannelImage, masks: &MaskStack) -> Result<BgrLabel> {
        let s = self.score_image(image, masks)?;
        Ok(if s.0[0] > s.0[2] { BgrLabel::Rgb } else { BgrLabel::Bgr })
    }
}

/// Which side of the threshold counts as near-gray.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Near-gray iff statistic < τ (score spread).
    Below,
    /// Near-gray iff statistic > τ (softmax entropy).
    Above,
}

impl Direction {
    pub fn is_gray(self, statistic: f64, tau: f64) -> bool {
        match self {
            Direction::Below => statistic < tau,
            Direction::Above => statistic > tau,
        }
    }
}

/// A scalar monochromatism statistic.
pub trait GrayStatistic: Sync {
    fn statistic(&self, image: &TriChannelImage, masks: &MaskStack) -> Result<f64>;
    fn direction(&self) -> Direction;
}

impl GrayStatistic for ScorerModel {
    fn statistic(&self, image: &TriChannelImage, masks: &MaskStack) -> Result<f64> {
        Ok(self.score_image(image, masks)?.max_abs_delta())
    }

    fn direction(&self) -> Direction {
        Direction::Below
    }
}

impl GrayStatistic for SoftmaxModel {
    fn statistic(&self, image: &TriChannelImage, _: &MaskStack) -> Result<f64> {
        Ok(softmax_entropy(&softmax_classify(image, self)?))
    }

    fn direction(&self) -> Direction {
        Direction::Above
    }
}

impl Model {
    pub fn as_layout_predictor(&self) -> Option<&dyn LayoutPredictor> {
        match self {
            Model::Orderer(m) => Some(m),
            Model::Softmax(m) if m.classes() == SoftmaxClasses::Six => Some(m),
            Model::Shallow(m) => Some(m),
            _ => None,
        }
    }

    pub fn as_bgr_predictor(&self) -> Option<&dyn BgrPredictor> {
        match self {
            Model::Orderer(m) => Some(m),
            Model::Bgr(m) => Some(m),
            Model::Softmax(m) => Some(m),
            Model::Shallow(_) => None,
        }
    }

    pub fn as_gray_statistic(&self) -> Option<&dyn GrayStatistic> {
        match self {
            Model::Orderer(m) => Some(m),
            Model::Softmax(m) if m.classes() == SoftmaxClasses::Six => Some(m),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutAccuracy {
    pub layout: String,
    pub correct: usize,
    pub total: usize,
    pub accuracy: f64,
}

/// Per-layout and overall accuracy of full-layout predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: String,
    /// In table order: RGB, RBG, BGR, BRG, GBR, GRB.
    pub columns: Vec<LayoutAccuracy>,
    pub correct: usize,
    pub total: usize,
    pub overall: f64,
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

impl EvalReport {
    /// Builds a report from `(true, predicted)` pairs.
    pub fn from_predictions(model: &str, pairs: &[(ChannelPermutation, ChannelPermutation)]) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::Eval("nothing to evaluate".into()));
        }
        let columns = ChannelPermutation::TABLE_ORDER
            .iter()
            .map(|&p| {
                let total = pairs.iter().filter(|(t, _)| *t == p).count();
                let correct = pairs.iter().filter(|(t, q)| *t == p && q == t).count();
                LayoutAccuracy {
                    layout: p.to_string(),
                    correct,
                    total,
                    accuracy: ratio(correct, total),
                }
            })
            .collect();
        let correct = pairs.iter().filter(|(t, q)| t == q).count();
        Ok(EvalReport {
            model: model.to_string(),
            columns,
            correct,
            total: pairs.len(),
            overall: ratio(correct, pairs.len()),
        })
    }

    /// Aligned table with accuracies in percent.
    pub fn to_table(&self) -> String {
        let mut head = format!("{:<10}", "Model");
        let mut row = format!("{:<10}", self.model);
        for c in &self.columns {
            head.push_str(&format!("{:>8}", c.layout));
            row.push_str(&format!("{:>8.2}", 100.0 * c.accuracy));
        }
        head.push_str(&format!("{:>9}", "Overall"));
        row.push_str(&format!("{:>9.2}", 100.0 * self.overall));
        format!("{head}\n{row}\n")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Scores every sample in all six layouts. A prediction counts only when the
/// whole layout is right.
pub fn evaluate_ordering(model: &dyn LayoutPredictor, name: &str, corpus: &Corpus, exec: Exec) -> Result<EvalReport> {
    if corpus.is_empty() {
        return Err(Error::Eval("the evaluation corpus is empty".into()));
    }
    let per_sample = exec.try_map(&corpus.samples, |s| {
        ChannelPermutation::ALL
            .iter()
            .map(|&p| Ok((p, model.predict_layout(&permute_channels(&s.image, p), &s.masks)?)))
            .collect::<Result<Vec<_>>>()
    })?;
    EvalReport::from_predictions(name, &per_sample.concat())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BgrReport {
    pub model: String,
    pub correct: usize,
    pub total: usize,
    pub accuracy: f64,
}

impl BgrReport {
    pub fn to_line(&self) -> String {
        format!(
            "{}: RGB-vs-BGR accuracy {:.2}% ({}/{})",
            self.model,
            100.0 * self.accuracy,
            self.correct,
            self.total
        )
    }
}

/// Accuracy over the RGB and BGR version of every sample.
pub fn evaluate_bgr(model: &dyn BgrPredictor, name: &str, corpus: &Corpus, exec: Exec) -> Result<BgrReport> {
    if corpus.is_empty() {
        return Err(Error::Eval("the evaluation corpus is empty".into()));
    }
    let hits = exec.try_map(&corpus.samples, |s| -> Result<usize> {
        let mut n = 0;
        for label in [BgrLabel::Rgb, BgrLabel::Bgr] {
            let image = permute_channels(&s.image, label.permutation());
            n += (model.predict_bgr(&image, &s.masks)? == label) as usize;
        }
        Ok(n)
    })?;
    let correct = hits.iter().sum();
    let total = 2 * corpus.len();
    Ok(BgrReport {
        model: name.to_string(),
        correct,
        total,
        accuracy: ratio(correct, total),
    })
}

/// One image of a near-gray evaluation set.
#[derive(Debug, Clone)]
pub struct GrayItem {
    pub sample: usize,
    pub image: TriChannelImage,
    pub near_gray: bool,
}

/// A balanced set: each sample appears once grayscale (with a colored patch
/// with probability `patch_probability`) and once in a random color layout.
pub fn neargray_set(corpus: &Corpus, seed: u64, patch_probability: f64) -> Vec<GrayItem> {
    let mut out = Vec::with_capacity(2 * corpus.len());
    for (k, s) in corpus.samples.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(k as u64);
        let patch = rng.gen_bool(patch_probability);
        out.push(GrayItem {
            sample: k,
            image: grayscale_augment(s, patch, &mut rng).image,
            near_gray: true,
        });
        let perm = *ChannelPermutation::ALL.choose(&mut rng).unwrap();
        out.push(GrayItem {
            sample: k,
            image: permute_channels(&s.image, perm),
            near_gray: false,
        });
    }
    out
}

/// `(statistic, is_near_gray)` for every item, in item order.
pub fn gray_statistics(model: &dyn GrayStatistic, corpus: &Corpus, items: &[GrayItem], exec: Exec) -> Result<Vec<(f64, bool)>> {
    exec.try_map(items, |it| {
        Ok((model.statistic(&it.image, &corpus.samples[it.sample].masks)?, it.near_gray))
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub min: f64,
    pub median: f64,
    pub max: f64,
    pub mean: f64,
}

impl Summary {
    fn of(values: &[f64]) -> Option<Summary> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let median = if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) };
        Some(Summary {
            n,
            min: v[0],
            median,
            max: v[n - 1],
            mean: v.iter().sum::<f64>() / n as f64,
        })
    }
}

/// Near-gray detection quality, near-gray being the positive class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrayReport {
    pub model: String,
    pub tau: f64,
    pub direction: Direction,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub gray_statistic: Option<Summary>,
    pub color_statistic: Option<Summary>,
}

/// Precision, recall and F1 at `tau`. A set without both populations has no
/// meaningful F1 and is rejected.
pub fn gray_metrics(name: &str, stats: &[(f64, bool)], tau: f64, direction: Direction) -> Result<GrayReport> {
    let positives = stats.iter().filter(|s| s.1).count();
    if positives == 0 || positives == stats.len() {
        return Err(Error::Eval(
            "F1 is undefined: the set needs both near-gray and polychromatic images".into(),
        ));
    }
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for &(s, gray) in stats {
        match (direction.is_gray(s, tau), gray) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    let (precision, recall) = (ratio(tp, tp + fp), ratio(tp, tp + fn_));
    let split = |g: bool| stats.iter().filter(|s| s.1 == g).map(|s| s.0).collect::<Vec<_>>();
    Ok(GrayReport {
        model: name.to_string(),
        tau,
        direction,
        tp,
        fp,
        tn,
        fn_,
        precision,
        recall,
        f1: f1(precision, recall),
        gray_statistic: Summary::of(&split(true)),
        color_statistic: Summary::of(&split(false)),
    })
}

pub fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

impl GrayReport {
    pub fn to_line(&self) -> String {
        format!(
            "{}: tau {:.4}  precision {:.4}  recall {:.4}  F1 {:.4}  (tp {} fp {} tn {} fn {})",
            self.model, self.tau, self.precision, self.recall, self.f1, self.tp, self.fp, self.tn, self.fn_
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauSweep {
    pub tau: f64,
    pub f1: f64,
    pub candidates: usize,
    pub warning: Option<String>,
}

/// Picks τ maximizing F1. Candidates are the midpoints between consecutive
/// distinct statistics plus one value just past the far end (everything
/// near-gray); ties go to the smaller τ. If all statistics are equal the
/// smallest candidate is returned with a warning.
pub fn sweep_tau(stats: &[(f64, bool)], direction: Direction) -> Result<TauSweep> {
    let mut values: Vec<f64> = stats.iter().map(|s| s.0).collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Eval("non-finite statistic".into()));
    }
    values.sort_by(f64::total_cmp);
    values.dedup();
    let Some((&lo, &hi)) = values.first().zip(values.last()) else {
        return Err(Error::Eval("no statistics to sweep".into()));
    };
    let mut grid: Vec<f64> = values.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    let step = 1e-6f64.max(1e-6 * hi.abs().max(lo.abs()));
    match direction {
        Direction::Below => grid.push(hi + step),
        Direction::Above => grid.insert(0, lo - step),
    }
    let warning = (values.len() == 1).then(|| {
        let w = format!("all {} statistics equal {lo}; τ is arbitrary", stats.len());
        log::warn!("{w}");
        w
    });
    let mut best: Option<(f64, f64)> = None;
    for &tau in &grid {
        let f = gray_metrics("", stats, tau, direction)?.f1;
        if best.is_none_or(|(_, bf)| f > bf) {
            best = Some((tau, f));
        }
    }
    let (tau, f1) = best.expect("grid is non-empty");
    Ok(TauSweep {
        tau,
        f1,
        candidates: grid.len(),
        warning,
    })
}

/// Draws overlaid histograms of the two populations (near-gray in blue,
/// polychromatic in orange) with the threshold as a red line, as a PNG.
pub fn plot_statistics(stats: &[(f64, bool)], tau: f64, path: &Path) -> Result<()> {
    const W: u32 = 640;
    const H: u32 = 360;
    const MARGIN: u32 = 30;
    const BINS: usize = 40;
    let mut img = image::RgbImage::from_pixel(W, H, image::Rgb([255, 255, 255]));
    let lo = stats.iter().map(|s| s.0).fold(tau, f64::min);
    let hi = stats.iter().map(|s| s.0).fold(tau, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let plot_w = (W - 2 * MARGIN) as f64;
    let x_of = |v: f64| MARGIN + (((v - lo) / span) * (plot_w - 1.0)).round() as u32;
    let mut counts = [[0usize; BINS]; 2];
    for &(v, gray) in stats {
        let b = (((v - lo) / span) * BINS as f64).floor().clamp(0.0, (BINS - 1) as f64) as usize;
        counts[gray as usize][b] += 1;
    }
    let peak = counts.iter().flatten().copied().max().unwrap_or(1).max(1);
    let plot_h = (H - 2 * MARGIN) as f64;
    let bin_w = (W - 2 * MARGIN) / BINS as u32;
    let colors = [image::Rgb([240, 140, 40]), image::Rgb([40, 90, 220])];
    for (pop, color) in counts.iter().zip(colors) {
        for (b, &c) in pop.iter().enumerate() {
            let bar = ((c as f64 / peak as f64) * plot_h).round() as u32;
            let x0 = MARGIN + b as u32 * bin_w;
            for x in x0..x0 + bin_w.saturating_sub(1).max(1) {
                for y in (H - MARGIN - bar)..(H - MARGIN) {
                    let p = img.get_pixel_mut(x, y);
                    // Blend so overlapping bars stay visible.
                    for k in 0..3 {
                        p.0[k] = ((p.0[k] as u16 + color.0[k] as u16) / 2) as u8;
                    }
                }
            }
        }
    }
    for x in MARGIN..W - MARGIN {
        img.put_pixel(x, H - MARGIN, image::Rgb([0, 0, 0]));
    }
    let tx = x_of(tau).min(W - MARGIN - 1);
    for y in MARGIN / 2..H - MARGIN {
        for dx in 0..2 {
            img.put_pixel((tx + dx).min(W - 1), y, image::Rgb([220, 20, 20]));
        }
    }
    img.save(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ChannelPermutation::*;

    #[test]
    fn column_arithmetic() {
        let mut pairs = vec![(Rgb, Rgb), (Rgb, Rgb), (Rgb, Rgb), (Rgb, Bgr)];
        pairs.extend(ChannelPermutation::ALL[1..].iter().map(|&p| (p, p)));
        let r = EvalReport::from_predictions("m", &pairs).unwrap();
        assert_eq!(r.columns[0].layout, "RGB");
        assert_eq!(r.columns[0].accuracy, 0.75);
        assert!(r.to_table().lines().nth(1).unwrap().contains("75.00"));
        assert!(EvalReport::from_predictions("m", &[]).is_err());
    }

    #[test]
    fn f1_arithmetic() {
        assert!((f1(1.0, 0.5) - 2.0 / 3.0).abs() < 1e-15);
        let stats = [(0.0, true), (0.5, true), (0.2, false), (0.9, false)];
        let r = gray_metrics("m", &stats, 0.1, Direction::Below).unwrap();
        assert_eq!((r.tp, r.fp, r.tn, r.fn_), (1, 0, 2, 1));
        assert!((r.f1 - 2.0 / 3.0).abs() < 1e-15);
        assert!(gray_metrics("m", &[(0.0, true)], 0.1, Direction::Below).is_err());
    }

    #[test]
    fn sweep_finds_the_gap_midpoint() {
        let stats = [(0.0, true), (0.1, true), (0.5, false), (0.7, false)];
        let s = sweep_tau(&stats, Direction::Below).unwrap();
        assert_eq!(s.f1, 1.0);
        assert!((s.tau - 0.3).abs() < 1e-12);
        assert!(s.warning.is_none());
        let ent = [(1.79, true), (1.7, true), (0.2, false), (0.1, false)];
        let s = sweep_tau(&ent, Direction::Above).unwrap();
        assert_eq!(s.f1, 1.0);
        assert!((s.tau - 0.95).abs() < 1e-12);
    }

    #[test]
    fn sweep_on_equal_statistics_warns() {
        let stats = [(0.2, true), (0.2, false)];
        let s = sweep_tau(&stats, Direction::Below).unwrap();
        assert!(s.warning.is_some());
        assert_eq!(s.candidates, 1);
    }

    #[test]
    fn plot_is_written() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.png");
        plot_statistics(&[(0.0, true), (0.3, false), (0.8, false)], 0.4, &path).unwrap();
        let img = image::open(&path).unwrap().to_rgb8();
        assert_eq!((img.width(), img.height()), (640, 360));
    }
}
