use crate::error::{Error, Result};

/// Binary semantic masks, one per vocabulary class, on the image grid.
///
/// Masks may overlap and need not cover every pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskStack {
    height: usize,
    width: usize,
    vocab: Vec<String>,
    masks: Vec<Vec<u8>>,
}

impl MaskStack {
    pub fn new(height: usize, width: usize, vocab: Vec<String>, masks: Vec<Vec<u8>>) -> Result<Self> {
        if vocab.is_empty() {
            return Err(Error::Input("a mask stack needs at least one class".into()));
        }
        if vocab.len() != masks.len() {
            return Err(Error::Input(format!(
                "{} class names for {} masks",
                vocab.len(),
                masks.len()
            )));
        }
        for (name, m) in vocab.iter().zip(&masks) {
            if m.len() != height * width {
                return Err(Error::Input(format!(
                    "mask `{name}` has {} entries, expected {height}x{width}",
                    m.len()
                )));
            }
            if m.iter().any(|&v| v > 1) {
                return Err(Error::Input(format!("mask `{name}` is not binary")));
            }
        }
        Ok(MaskStack {
            height,
            width,
            vocab,
            masks,
        })
    }

    /// Decodes an indexed label map: pixel value `k ≥ 1` marks class `k`
    /// (1-based into `vocab`), 0 marks unlabeled pixels.
    pub fn from_label_map(height: usize, width: usize, labels: &[u8], vocab: Vec<String>) -> Result<Self> {
        if labels.len() != height * width {
            return Err(Error::Input("label map does not match the image size".into()));
        }
        let n = vocab.len();
        if let Some(&bad) = labels.iter().find(|&&v| v as usize > n) {
            return Err(Error::Input(format!(
                "label map uses class index {bad}, but only {n} classes are defined"
            )));
        }
        let masks = (1..=n)
            .map(|k| labels.iter().map(|&v| (v as usize == k) as u8).collect())
            .collect();
        Self::new(height, width, vocab, masks)
    }

    /// Encodes the stack as a label map; the first mask covering a pixel wins.
    pub fn to_label_map(&self) -> Result<Vec<u8>> {
        if self.masks.len() > 255 {
            return Err(Error::Input("label maps hold at most 255 classes".into()));
        }
        let mut out = vec![0u8; self.height * self.width];
        for (k, m) in self.masks.iter().enumerate().rev() {
            for (o, &v) in out.iter_mut().zip(m) {
                if v == 1 {
                    *o = (k + 1) as u8;
                }
            }
        }
        Ok(out)
    }

    /// A single all-ones mask, for inputs without semantic annotation.
    pub fn whole_image(height: usize, width: usize) -> Self {
        MaskStack {
            height,
            width,
            vocab: vec!["image".into()],
            masks: vec![vec![1; height * width]],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.masks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn mask(&self, n: usize) -> &[u8] {
        &self.masks[n]
    }

    pub fn masks(&self) -> &[Vec<u8>] {
        &self.masks
    }

    pub fn area(&self, n: usize) -> usize {
        self.masks[n].iter().map(|&v| v as usize).sum()
    }
}
