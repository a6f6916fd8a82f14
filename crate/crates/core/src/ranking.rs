//! Pairwise ranking probabilities and the cross-entropy ranking loss over the
//! three channel pairs (1,2), (1,3), (2,3).
//!
//! For a score difference `Δ = s_i − s_j` the model probability that channel
//! `i` ranks ahead of channel `j` is `σ(g(Δ)/T)`, with `g` a monotone link
//! through the origin and `T` a temperature. The per-pair loss is
//!
//! ```text
//! ℓ(Δ, y) = (1 − y)·x + log(1 + exp(−x)),   x = g(Δ)/T
//! ```
//!
//! evaluated with a softplus that does not overflow for large `|x|`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{ChannelLayout, Color};

/// The three position pairs, in the order scores and targets are stored.
pub const PAIRS: [(usize, usize); 3] = [(0, 1), (0, 2), (1, 2)];

/// Monotone link applied to score differences before the temperature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Link {
    #[default]
    Tanh,
    Identity,
}

impl Link {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Link::Tanh => x.tanh(),
            Link::Identity => x,
        }
    }

    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Link::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
            Link::Identity => 1.0,
        }
    }
}

impl std::str::FromStr for Link {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tanh" => Ok(Link::Tanh),
            "identity" => Ok(Link::Identity),
            other => Err(Error::Config(format!("unknown link function `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RankingConfig {
    pub temperature: f64,
    pub link: Link,
}

impl Default for RankingConfig {
    fn default() -> Self {
        RankingConfig {
            temperature: 0.1,
            link: Link::Tanh,
        }
    }
}

impl RankingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            return Err(Error::Config(format!(
                "temperature must be positive, got {}",
                self.temperature
            )));
        }
        Ok(())
    }

    #[inline]
    fn logit(&self, delta: f64) -> f64 {
        self.link.apply(delta) / self.temperature
    }
}

/// Desired probability that one channel ranks ahead of another.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PairTarget {
    /// y = 0: the first channel ranks behind.
    Behind,
    /// y = 1/2: identical channels, no preference.
    Tie,
    /// y = 1: the first channel ranks ahead.
    Ahead,
}

impl PairTarget {
    pub fn value(self) -> f64 {
        match self {
            PairTarget::Behind => 0.0,
            PairTarget::Tie => 0.5,
            PairTarget::Ahead => 1.0,
        }
    }

    pub fn from_value(y: f64) -> Result<Self> {
        if y == 0.0 {
            Ok(PairTarget::Behind)
        } else if y == 0.5 {
            Ok(PairTarget::Tie)
        } else if y == 1.0 {
            Ok(PairTarget::Ahead)
        } else {
            Err(Error::Domain(format!("pair target must be 0, 1/2 or 1, got {y}")))
        }
    }

    fn flip(self) -> Self {
        match self {
            PairTarget::Behind => PairTarget::Ahead,
            PairTarget::Tie => PairTarget::Tie,
            PairTarget::Ahead => PairTarget::Behind,
        }
    }
}

/// Targets for the pairs (1,2), (1,3), (2,3).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PairTargets([PairTarget; 3]);

impl PairTargets {
    /// Rejects triples that no total preorder over three channels produces.
    pub fn new(y12: PairTarget, y13: PairTarget, y23: PairTarget) -> Result<Self> {
        // Orient everything as "a ahead of b" relations and check transitivity
        // over 1→2→3 and its mirror.
        let consistent = |a: PairTarget, b: PairTarget, ac: PairTarget| match (a, b) {
            (PairTarget::Ahead, PairTarget::Ahead) => ac == PairTarget::Ahead,
            (PairTarget::Behind, PairTarget::Behind) => ac == PairTarget::Behind,
            (PairTarget::Tie, PairTarget::Tie) => ac == PairTarget::Tie,
            (PairTarget::Tie, x) | (x, PairTarget::Tie) => ac == x,
            _ => true,
        };
        // 1 vs 3 through 2, then 1 vs 2 through 3, then 2 vs 3 through 1.
        let ok = consistent(y12, y23, y13)
            && consistent(y13, y23.flip(), y12)
            && consistent(y12.flip(), y13, y23);
        if !ok {
            return Err(Error::Domain(format!(
                "pair targets {:?} are not a consistent ordering",
                [y12, y13, y23]
            )));
        }
        Ok(PairTargets([y12, y13, y23]))
    }

    pub fn all(self) -> [PairTarget; 3] {
        self.0
    }

    pub fn values(self) -> [f64; 3] {
        self.0.map(PairTarget::value)
    }
}

/// Ranking scores for the three stored planes, by position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreTriple(pub [f64; 3]);

impl ScoreTriple {
    pub fn new(s1: f64, s2: f64, s3: f64) -> Result<Self> {
        let s = ScoreTriple([s1, s2, s3]);
        s.check_finite()?;
        Ok(s)
    }

    pub fn check_finite(&self) -> Result<()> {
        if self.0.iter().all(|s| s.is_finite()) {
            Ok(())
        } else {
            Err(Error::Domain(format!("non-finite scores {:?}", self.0)))
        }
    }

    /// Differences `s_i − s_j` over [`PAIRS`].
    pub fn deltas(&self) -> [f64; 3] {
        PAIRS.map(|(i, j)| self.0[i] - self.0[j])
    }

    pub fn max_abs_delta(&self) -> f64 {
        self.deltas().iter().fold(0.0f64, |m, d| m.max(d.abs()))
    }
}

/// `log(1 + exp(z))` without overflow.
#[inline]
pub fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Logistic function, evaluated on the side that cannot overflow.
#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Probability that the channel with the larger-by-`delta` score ranks first.
pub fn pair_probability(delta: f64, cfg: &RankingConfig) -> Result<f64> {
    if !delta.is_finite() {
        return Err(Error::Domain(format!("score difference {delta} is not finite")));
    }
    cfg.validate()?;
    Ok(sigmoid(cfg.logit(delta)))
}

/// Targets implied by a ground-truth layout: `y_ij = 1` iff the color at
/// position `i` precedes the color at position `j` in R ≻ G ≻ B.
pub fn pair_targets(layout: impl Into<ChannelLayout>) -> PairTargets {
    match layout.into() {
        ChannelLayout::Gray => PairTargets([PairTarget::Tie; 3]),
        ChannelLayout::Permuted(p) => {
            let labels: [Color; 3] = p.labels();
            PairTargets(PAIRS.map(|(i, j)| {
                if labels[i].rank() < labels[j].rank() {
                    PairTarget::Ahead
                } else {
                    PairTarget::Behind
                }
            }))
        }
    }
}

/// Loss of a single pair.
#[inline]
pub fn pair_loss(delta: f64, y: f64, cfg: &RankingConfig) -> f64 {
    let x = cfg.logit(delta);
    // Same value as (1 − y)·x + softplus(−x), since x + softplus(−x) = softplus(x),
    // but without cancellation when x is very negative.
    y * softplus(-x) + (1.0 - y) * softplus(x)
}

/// ∂ℓ/∂Δ for a single pair: `(g'(Δ)/T)·((1−y) − σ(−x))`.
pub fn loss_grad_delta(delta: f64, y: f64, cfg: &RankingConfig) -> f64 {
    let x = cfg.logit(delta);
    cfg.link.derivative(delta) / cfg.temperature * ((1.0 - y) - sigmoid(-x))
}

/// Summed loss over the three pairs.
pub fn ranking_loss(scores: &ScoreTriple, targets: &PairTargets, cfg: &RankingConfig) -> Result<f64> {
    scores.check_finite()?;
    cfg.validate()?;
    let ys = targets.values();
    Ok(scores
        .deltas()
        .iter()
        .zip(ys)
        .map(|(&d, y)| pair_loss(d, y, cfg))
        .sum())
}

/// Loss together with its gradient with respect to the three scores.
pub fn ranking_loss_and_grad(
    scores: &ScoreTriple,
    targets: &PairTargets,
    cfg: &RankingConfig,
) -> Result<(f64, [f64; 3])> {
    let loss = ranking_loss(scores, targets, cfg)?;
    let ys = targets.values();
    let mut grad = [0.0; 3];
    for ((&(i, j), d), y) in PAIRS.iter().zip(scores.deltas()).zip(ys) {
        let g = loss_grad_delta(d, y, cfg);
        grad[i] += g;
        grad[j] -= g;
    }
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::ChannelPermutation::{self, *};

    const CFG: RankingConfig = RankingConfig {
        temperature: 0.1,
        link: Link::Tanh,
    };

    #[test]
    fn probability_at_zero_is_half() {
        assert_eq!(pair_probability(0.0, &CFG).unwrap(), 0.5);
    }

    #[test]
    fn probability_values() {
        // sigmoid(10·tanh(3)) and sigmoid(10·tanh(0.1)), evaluated with mpmath at 50 digits.
        let p3 = pair_probability(3.0, &CFG).unwrap();
        assert!((p3 - 0.999_952_300_766_874_8).abs() < 1e-12, "{p3}");
        let p01 = pair_probability(0.1, &CFG).unwrap();
        assert!((p01 - 0.730_405_315_908_320_9).abs() < 1e-12, "{p01}");
    }

    #[test]
    fn non_finite_delta_is_a_domain_error() {
        assert!(matches!(pair_probability(f64::NAN, &CFG), Err(Error::Domain(_))));
        assert!(pair_probability(f64::INFINITY, &CFG).is_err());
    }

    #[test]
    fn invalid_temperature_is_rejected() {
        let cfg = RankingConfig {
            temperature: 0.0,
            ..CFG
        };
        assert!(matches!(pair_probability(1.0, &cfg), Err(Error::Config(_))));
    }

    #[test]
    fn targets_for_named_layouts() {
        use PairTarget::*;
        assert_eq!(pair_targets(Rgb).all(), [Ahead, Ahead, Ahead]);
        assert_eq!(pair_targets(Bgr).all(), [Behind, Behind, Behind]);
        assert_eq!(pair_targets(Gbr).all(), [Ahead, Behind, Behind]);
        assert_eq!(pair_targets(ChannelLayout::Gray).all(), [Tie, Tie, Tie]);
    }

    #[test]
    fn every_layout_yields_consistent_targets() {
        for p in ChannelPermutation::ALL {
            let t = pair_targets(p).all();
            assert!(PairTargets::new(t[0], t[1], t[2]).is_ok(), "{p}");
        }
    }

    #[test]
    fn inconsistent_targets_are_rejected() {
        use PairTarget::*;
        assert!(PairTargets::new(Ahead, Behind, Ahead).is_err());
        assert!(PairTargets::new(Behind, Ahead, Behind).is_err());
        assert!(PairTargets::new(Tie, Tie, Ahead).is_err());
        assert!(PairTargets::new(Tie, Ahead, Ahead).is_ok());
    }

    #[test]
    fn from_value_accepts_only_three_levels() {
        assert!(PairTarget::from_value(0.25).is_err());
        assert_eq!(PairTarget::from_value(0.5).unwrap(), PairTarget::Tie);
    }

    #[test]
    fn equal_scores_with_tie_targets_cost_three_ln_two() {
        let t = pair_targets(ChannelLayout::Gray);
        for c in [-3.0, 0.0, 0.7, 1e6] {
            let l = ranking_loss(&ScoreTriple([c, c, c]), &t, &CFG).unwrap();
            assert!((l - 3.0 * std::f64::consts::LN_2).abs() < 1e-12);
        }
    }

    #[test]
    fn loss_values_for_ordered_scores() {
        // Frozen from a 50-digit mpmath evaluation of the summed pair loss.
        let s = ScoreTriple([1.0, 0.0, -1.0]);
        let good = ranking_loss(&s, &pair_targets(Rgb), &CFG).unwrap();
        assert!((good - 1.049_883_903_712_197e-3).abs() < 1e-12, "{good}");
        let bad = ranking_loss(&s, &pair_targets(Bgr), &CFG).unwrap();
        assert!((bad - 24.873_208_803_777_18).abs() < 1e-9, "{bad}");
    }

    #[test]
    fn stable_for_huge_logits() {
        let cfg = RankingConfig {
            temperature: 0.1,
            link: Link::Identity,
        };
        let l = ranking_loss(&ScoreTriple([1e200, 0.0, -1e200]), &pair_targets(Bgr), &cfg).unwrap();
        assert!(l.is_finite());
        let l = ranking_loss(&ScoreTriple([1e200, 0.0, -1e200]), &pair_targets(Rgb), &cfg).unwrap();
        assert_eq!(l, 0.0);
    }

    #[test]
    fn gradient_signs() {
        assert_eq!(loss_grad_delta(0.0, 0.5, &CFG), 0.0);
        assert!(loss_grad_delta(0.5, 1.0, &CFG) < 0.0);
        assert!(loss_grad_delta(0.5, 0.0, &CFG) > 0.0);
    }

    #[test]
    fn score_gradient_matches_pair_gradients() {
        let s = ScoreTriple([0.3, -0.2, 0.1]);
        let t = pair_targets(Grb);
        let (_, g) = ranking_loss_and_grad(&s, &t, &CFG).unwrap();
        let h = 1e-6;
        for k in 0..3 {
            let mut up = s;
            up.0[k] += h;
            let mut dn = s;
            dn.0[k] -= h;
            let fd = (ranking_loss(&up, &t, &CFG).unwrap() - ranking_loss(&dn, &t, &CFG).unwrap())
                / (2.0 * h);
            assert!((fd - g[k]).abs() < 1e-6 * (1.0 + fd.abs()), "{k}: {fd} vs {}", g[k]);
        }
    }

    #[test]
    fn pair_loss_keeps_precision_on_the_correct_side() {
        let cfg = RankingConfig::default();
        // Target 0 with Δ ≪ 0 is a confident correct prediction: ℓ = softplus(x).
        let x = cfg.logit(-5.0);
        let expect = (x.exp()).ln_1p();
        assert!((pair_loss(-5.0, 0.0, &cfg) - expect).abs() < 1e-15 * expect.max(1e-300) + 1e-19);
    }
}
