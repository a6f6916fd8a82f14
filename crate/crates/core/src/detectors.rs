//! Decision rules on top of channel scores.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{permute_channels, ChannelPermutation, Color, TriChannelImage};
use crate::ranking::ScoreTriple;
use crate::scorer::PairScorerModel;

/// Threshold on the maximum absolute score difference below which an image
/// is called near-grayscale.
pub const DEFAULT_TAU: f64 = 0.4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderPrediction {
    pub permutation: ChannelPermutation,
    pub scores: ScoreTriple,
    pub max_abs_delta: f64,
    /// At least two scores were exactly equal; the layout came from the
    /// index tie-break and is not meaningful.
    pub tie: bool,
}

/// Labels the highest-scoring plane R, the lowest B and the remaining one G.
///
/// Equal scores are ordered by plane position, so the lower position takes
/// the earlier color.
pub fn predict_order(scores: &ScoreTriple) -> Result<OrderPrediction> {
    scores.check_finite()?;
    let s = scores.0;
    let mut positions = [0usize, 1, 2];
    // Stable sort keeps lower positions first among equal scores.
    positions.sort_by(|&a, &b| s[b].partial_cmp(&s[a]).unwrap());
    let mut labels = [Color::R; 3];
    for (color, &pos) in Color::ALL.iter().zip(&positions) {
        labels[pos] = *color;
    }
    let tie = s[0] == s[1] || s[0] == s[2] || s[1] == s[2];
    Ok(OrderPrediction {
        permutation: ChannelPermutation::from_labels(labels).expect("labels form a permutation"),
        scores: *scores,
        max_abs_delta: scores.max_abs_delta(),
        tie,
    })
}

/// Undoes the predicted layout so the output reads R, G, B.
pub fn restore_rgb(image: &TriChannelImage, pred: &OrderPrediction) -> TriChannelImage {
    permute_channels(image, pred.permutation.inverse())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BgrLabel {
    Rgb,
    Bgr,
}

impl BgrLabel {
    pub fn permutation(self) -> ChannelPermutation {
        match self {
            BgrLabel::Rgb => ChannelPermutation::Rgb,
            BgrLabel::Bgr => ChannelPermutation::Bgr,
        }
    }
}

impl std::fmt::Display for BgrLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.permutation().fmt(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BgrDecision {
    pub label: BgrLabel,
    pub s12: f64,
    pub s13: f64,
}

impl BgrDecision {
    /// RGB iff `s12 > s13`; an exact tie reads as BGR.
    pub fn from_scores(s12: f64, s13: f64) -> Self {
        let label = if s12 > s13 { BgrLabel::Rgb } else { BgrLabel::Bgr };
        BgrDecision { label, s12, s13 }
    }
}

/// Scores `(I₁, I₂)` and `(I₁, I₃)` with the pair scorer and compares them.
pub fn detect_bgr(image: &TriChannelImage, model: &PairScorerModel) -> Result<BgrDecision> {
    let p = image.planes();
    let s12 = model.score_pair(&[&p[0], &p[1]])?;
    let s13 = model.score_pair(&[&p[0], &p[2]])?;
    Ok(BgrDecision::from_scores(s12, s13))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrayDecision {
    pub is_near_gray: bool,
    pub statistic: f64,
    pub tau: f64,
}

/// Near-grayscale iff `max |s_i − s_j| < τ`.
pub fn detect_near_gray(scores: &ScoreTriple, tau: f64) -> Result<GrayDecision> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::Config(format!("τ must be positive, got {tau}")));
    }
    scores.check_finite()?;
    let statistic = scores.max_abs_delta();
    Ok(GrayDecision {
        is_near_gray: statistic < tau,
        statistic,
        tau,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::Plane;
    use ChannelPermutation::*;

    fn s(a: f64, b: f64, c: f64) -> ScoreTriple {
        ScoreTriple([a, b, c])
    }

    #[test]
    fn sorts_scores_into_layouts() {
        let p = predict_order(&s(0.9, 0.5, 0.1)).unwrap();
        assert_eq!((p.permutation, p.tie), (Rgb, false));
        assert_eq!(predict_order(&s(0.1, 0.5, 0.9)).unwrap().permutation, Bgr);
        assert_eq!(predict_order(&s(0.5, 0.9, 0.1)).unwrap().permutation, Grb);
        assert!((p.max_abs_delta - 0.8).abs() < 1e-12);
    }

    #[test]
    fn ties_break_by_position() {
        let p = predict_order(&s(0.2, 0.2, 0.2)).unwrap();
        assert_eq!((p.permutation, p.tie), (Rgb, true));
        let p = predict_order(&s(0.1, 0.7, 0.7)).unwrap();
        assert_eq!((p.permutation, p.tie), (Brg, true));
    }

    #[test]
    fn non_finite_scores_are_rejected() {
        assert!(predict_order(&s(f64::NAN, 0.0, 0.0)).is_err());
    }

    fn image() -> TriChannelImage {
        let planes = [0.1f32, 0.5, 0.9].map(|v| Plane::filled(2, 2, v));
        TriChannelImage::from_planes(planes).unwrap()
    }

    #[test]
    fn restore_undoes_each_layout() {
        let rgb = image();
        for perm in ChannelPermutation::ALL {
            let stored = permute_channels(&rgb, perm);
            // Scores that a perfect scorer would emit for this layout.
            let ranks = perm.labels().map(|c| 3.0 - c.rank() as f64);
            let pred = predict_order(&ScoreTriple(ranks)).unwrap();
            assert_eq!(pred.permutation, perm);
            assert_eq!(restore_rgb(&stored, &pred), rgb, "{perm}");
        }
    }

    #[test]
    fn restore_identity_and_swap() {
        let i = image();
        let rgb = predict_order(&s(3.0, 2.0, 1.0)).unwrap();
        assert_eq!(restore_rgb(&i, &rgb), i);
        let bgr = predict_order(&s(1.0, 2.0, 3.0)).unwrap();
        let r = restore_rgb(&i, &bgr);
        assert_eq!((r.plane(0), r.plane(2)), (i.plane(2), i.plane(0)));
        // Already RGB-labeled output restores to itself.
        assert_eq!(restore_rgb(&restore_rgb(&i, &rgb), &rgb), i);
    }

    #[test]
    fn bgr_rule() {
        assert_eq!(BgrDecision::from_scores(0.7, 0.2).label, BgrLabel::Rgb);
        assert_eq!(BgrDecision::from_scores(0.2, 0.2).label, BgrLabel::Bgr);
        assert_eq!(BgrDecision::from_scores(0.1, 0.2).label, BgrLabel::Bgr);
    }

    #[test]
    fn near_gray_rule() {
        let g = detect_near_gray(&s(0.3, 0.3, 0.3), 0.4).unwrap();
        assert!(g.is_near_gray);
        assert_eq!(g.statistic, 0.0);
        let c = detect_near_gray(&s(0.9, 0.5, 0.1), DEFAULT_TAU).unwrap();
        assert!(!c.is_near_gray);
        assert!((c.statistic - 0.8).abs() < 1e-12);
        assert!(matches!(detect_near_gray(&s(0.0, 0.0, 0.0), 0.0), Err(Error::Config(_))));
        assert!(detect_near_gray(&s(0.0, 0.0, 0.0), -1.0).is_err());
    }
}
