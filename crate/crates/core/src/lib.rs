//! Channel-order prediction for three-channel images.
//!
//! A shared per-plane scoring network ranks the stored planes of an image by
//! how "red" (first) to "blue" (last) they look, given semantic masks. The
//! scores drive three decisions: the full six-way channel layout (and its
//! correction back to RGB), RGB-vs-BGR detection through a two-plane pair
//! scorer, and near-grayscale detection from the spread of the scores.
//!
//! Module map:
//! - [`ranking`]: pairwise probabilities, the ranking loss and its gradient
//! - [`scorer`]: the U-Net scorer, mask pooling and the pair scorer
//! - [`detectors`]: decision rules built on scores
//! - [`baselines`]: histogram pair classifier and softmax classifier
//! - [`data`]: corpora, permutation/grayscale augmentation, synthetic scenes
//! - [`train`], [`eval`]: training loops and evaluation reports
//! - [`checkpoint`]: the versioned model container

pub mod baselines;
pub mod checkpoint;
pub mod data;
pub mod detectors;
pub mod error;
pub mod eval;
pub mod exec;
pub mod image;
pub mod nn;
pub mod ranking;
pub mod scorer;
pub mod train;

pub use error::{Error, Result};
pub use exec::Exec;
pub use image::{permute_channels, ChannelLayout, ChannelPermutation, Color, Plane, TriChannelImage};
pub use ranking::{PairTarget, PairTargets, RankingConfig, ScoreTriple};
pub use scorer::{ChannelScorer, MaskStack, PairScorerModel, ScorerModel, UNetConfig};
