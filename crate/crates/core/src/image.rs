//! Channel-planar images and channel layouts.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A single H×W intensity plane, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    pub height: usize,
    pub width: usize,
    pub data: Vec<f32>,
}

impl Plane {
    pub fn new(height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::Input(format!(
                "plane data has {} values, expected {}x{}",
                data.len(),
                height,
                width
            )));
        }
        Ok(Plane {
            height,
            width,
            data,
        })
    }

    pub fn filled(height: usize, width: usize, value: f32) -> Self {
        Plane {
            height,
            width,
            data: vec![value; height * width],
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> f32 {
        self.data[y * self.width + x]
    }
}

/// Canonical color labels, in ranking order R ≻ G ≻ B.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Color {
    R = 0,
    G = 1,
    B = 2,
}

impl Color {
    pub const ALL: [Color; 3] = [Color::R, Color::G, Color::B];

    /// Position of this color in the canonical RGB order (0 ranks first).
    pub fn rank(self) -> usize {
        self as usize
    }

    pub fn as_char(self) -> char {
        match self {
            Color::R => 'R',
            Color::G => 'G',
            Color::B => 'B',
        }
    }
}

/// One of the six ways of laying out R, G and B across three stored planes.
///
/// The name spells the color found at plane positions 1, 2 and 3, so an image
/// stored as `Bgr` holds blue in its first plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ChannelPermutation {
    Rgb,
    Rbg,
    Grb,
    Gbr,
    Brg,
    Bgr,
}

impl ChannelPermutation {
    /// All six layouts, in the index order used by the softmax baseline.
    pub const ALL: [ChannelPermutation; 6] = [
        ChannelPermutation::Rgb,
        ChannelPermutation::Rbg,
        ChannelPermutation::Grb,
        ChannelPermutation::Gbr,
        ChannelPermutation::Brg,
        ChannelPermutation::Bgr,
    ];

    /// Column order of the published comparison tables.
    pub const TABLE_ORDER: [ChannelPermutation; 6] = [
        ChannelPermutation::Rgb,
        ChannelPermutation::Rbg,
        ChannelPermutation::Bgr,
        ChannelPermutation::Brg,
        ChannelPermutation::Gbr,
        ChannelPermutation::Grb,
    ];

    pub fn labels(self) -> [Color; 3] {
        use Color::*;
        match self {
            ChannelPermutation::Rgb => [R, G, B],
            ChannelPermutation::Rbg => [R, B, G],
            ChannelPermutation::Grb => [G, R, B],
            ChannelPermutation::Gbr => [G, B, R],
            ChannelPermutation::Brg => [B, R, G],
            ChannelPermutation::Bgr => [B, G, R],
        }
    }

    pub fn from_labels(labels: [Color; 3]) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.labels() == labels)
    }

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|&p| p == self).unwrap()
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    /// Source plane (in RGB order) that lands at each output position.
    fn source_indices(self) -> [usize; 3] {
        self.labels().map(Color::rank)
    }

    /// `self.then(other)` permutes by `self` first and `other` second:
    /// `permute(permute(img, self), other) == permute(img, self.then(other))`.
    pub fn then(self, other: ChannelPermutation) -> ChannelPermutation {
        let a = self.labels();
        let b = other.source_indices();
        Self::from_labels([a[b[0]], a[b[1]], a[b[2]]]).unwrap()
    }

    pub fn inverse(self) -> ChannelPermutation {
        let src = self.source_indices();
        let mut inv = [Color::R; 3];
        for (pos, &s) in src.iter().enumerate() {
            inv[s] = Color::ALL[pos];
        }
        Self::from_labels(inv).unwrap()
    }

    /// Reorders a per-position triple the same way [`permute_channels`] reorders planes.
    pub fn apply<T: Copy>(self, values: [T; 3]) -> [T; 3] {
        self.source_indices().map(|i| values[i])
    }
}

impl fmt::Display for ChannelPermutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: String = self.labels().iter().map(|c| c.as_char()).collect();
        f.write_str(&s)
    }
}

impl FromStr for ChannelPermutation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown channel permutation `{s}`")))
    }
}

/// Ground-truth layout of a training or evaluation image: a proper permutation,
/// or the degenerate marker for images whose three planes are (near-)identical.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ChannelLayout {
    Permuted(ChannelPermutation),
    Gray,
}

impl From<ChannelPermutation> for ChannelLayout {
    fn from(p: ChannelPermutation) -> Self {
        ChannelLayout::Permuted(p)
    }
}

impl fmt::Display for ChannelLayout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChannelLayout::Permuted(p) => p.fmt(f),
            ChannelLayout::Gray => f.write_str("GRAY"),
        }
    }
}

/// H×W×3 image with intensities in [0, 1], stored plane by plane.
#[derive(Debug, Clone, PartialEq)]
pub struct TriChannelImage {
    planes: [Plane; 3],
}

impl TriChannelImage {
    pub fn from_planes(planes: [Plane; 3]) -> Result<Self> {
        let (h, w) = (planes[0].height, planes[0].width);
        if planes.iter().any(|p| p.height != h || p.width != w) {
            return Err(Error::Input("planes have different shapes".into()));
        }
        if planes
            .iter()
            .flat_map(|p| p.data.iter())
            .any(|v| !(0.0..=1.0).contains(v))
        {
            return Err(Error::Input("intensities must lie in [0, 1]".into()));
        }
        Ok(TriChannelImage { planes })
    }

    /// Builds an image from interleaved 8-bit RGB bytes. `to_rgb8` inverts this exactly.
    pub fn from_rgb8(height: usize, width: usize, bytes: &[u8]) -> Result<Self> {
        if bytes.len() != height * width * 3 {
            return Err(Error::Input(format!(
                "expected {} bytes for a {height}x{width} RGB image, got {}",
                height * width * 3,
                bytes.len()
            )));
        }
        let planes = [0, 1, 2].map(|c| Plane {
            height,
            width,
            data: bytes[c..]
                .iter()
                .step_by(3)
                .map(|&b| b as f32 / 255.0)
                .collect(),
        });
        Ok(TriChannelImage { planes })
    }

    pub fn to_rgb8(&self) -> Vec<u8> {
        let n = self.height() * self.width();
        let mut out = Vec::with_capacity(n * 3);
        for i in 0..n {
            for p in &self.planes {
                out.push((p.data[i].clamp(0.0, 1.0) * 255.0).round() as u8);
            }
        }
        out
    }

    pub fn height(&self) -> usize {
        self.planes[0].height
    }

    pub fn width(&self) -> usize {
        self.planes[0].width
    }

    pub fn plane(&self, i: usize) -> &Plane {
        &self.planes[i]
    }

    pub fn planes(&self) -> &[Plane; 3] {
        &self.planes
    }

    pub fn into_planes(self) -> [Plane; 3] {
        self.planes
    }

    /// Whether the three planes are bit-identical.
    pub fn is_exact_gray(&self) -> bool {
        self.planes[0] == self.planes[1] && self.planes[1] == self.planes[2]
    }

    pub fn load(path: &Path) -> Result<Self> {
        let img = image::open(path).map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })?;
        let rgb = img.to_rgb8();
        Self::from_rgb8(rgb.height() as usize, rgb.width() as usize, rgb.as_raw())
    }

    /// Writes an 8-bit PNG (lossless; format is chosen from the extension).
    pub fn save(&self, path: &Path) -> Result<()> {
        image::save_buffer(
            path,
            &self.to_rgb8(),
            self.width() as u32,
            self.height() as u32,
            image::ExtendedColorType::Rgb8,
        )
        .map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// Rearranges planes so that output plane `k` holds the input plane of the
/// color `perm.labels()[k]`; applied to an RGB image this produces the image
/// as it would be stored in layout `perm`.
pub fn permute_channels(image: &TriChannelImage, perm: ChannelPermutation) -> TriChannelImage {
    let src = perm.source_indices();
    TriChannelImage {
        planes: src.map(|i| image.planes[i].clone()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ChannelPermutation::*;

    fn img() -> TriChannelImage {
        let bytes: Vec<u8> = (0..4 * 5 * 3).map(|i| (i * 7 % 256) as u8).collect();
        TriChannelImage::from_rgb8(4, 5, &bytes).unwrap()
    }

    #[test]
    fn identity_is_bit_identical() {
        let i = img();
        assert_eq!(permute_channels(&i, Rgb), i);
    }

    #[test]
    fn bgr_swaps_first_and_last() {
        let i = img();
        let p = permute_channels(&i, Bgr);
        assert_eq!(p.plane(0), i.plane(2));
        assert_eq!(p.plane(1), i.plane(1));
        assert_eq!(p.plane(2), i.plane(0));
    }

    #[test]
    fn inverse_restores() {
        let i = img();
        for p in ChannelPermutation::ALL {
            let back = permute_channels(&permute_channels(&i, p), p.inverse());
            assert_eq!(back, i, "{p}");
        }
    }

    #[test]
    fn composition_is_a_group_action() {
        let i = img();
        for a in ChannelPermutation::ALL {
            for b in ChannelPermutation::ALL {
                let two_step = permute_channels(&permute_channels(&i, a), b);
                assert_eq!(two_step, permute_channels(&i, a.then(b)), "{a} then {b}");
            }
        }
    }

    #[test]
    fn rgb8_round_trip() {
        let bytes: Vec<u8> = (0..=255u8).cycle().take(16 * 16 * 3).collect();
        let i = TriChannelImage::from_rgb8(16, 16, &bytes).unwrap();
        assert_eq!(i.to_rgb8(), bytes);
    }

    #[test]
    fn permutation_names_parse() {
        for p in ChannelPermutation::ALL {
            assert_eq!(p.to_string().parse::<ChannelPermutation>().unwrap(), p);
        }
        assert!("RRB".parse::<ChannelPermutation>().is_err());
    }

    #[test]
    fn rejects_out_of_range() {
        let p = Plane::filled(2, 2, 1.5);
        assert!(TriChannelImage::from_planes([p.clone(), p.clone(), p]).is_err());
    }
}
