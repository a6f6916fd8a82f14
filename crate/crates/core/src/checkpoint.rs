//! Versioned model container shared by every model kind.
//!
//! Layout: the 8-byte magic `CHORDCKP`, a little-endian `u32` format
//! version, a little-endian `u64` header length, the JSON header, then every
//! parameter array in declared order as little-endian `f32`.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baselines::{ShallowModel, SoftmaxClasses, SoftmaxModel};
use crate::error::{Error, Result};
use crate::nn::{NamedArray, ParamSet};
use crate::ranking::RankingConfig;
use crate::scorer::{PairScorerModel, ScorerModel, UNetConfig};
use crate::train::TrainConfig;

pub const MAGIC: &[u8; 8] = b"CHORDCKP";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Orderer,
    Bgr,
    Softmax6,
    Softmax2,
    Shallow,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Orderer => "orderer",
            ModelKind::Bgr => "bgr",
            ModelKind::Softmax6 => "softmax6",
            ModelKind::Softmax2 => "softmax2",
            ModelKind::Shallow => "shallow",
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            ModelKind::Orderer,
            ModelKind::Bgr,
            ModelKind::Softmax6,
            ModelKind::Softmax2,
            ModelKind::Shallow,
        ]
        .into_iter()
        .find(|k| k.name() == s)
        .ok_or_else(|| Error::Config(format!("unknown model kind `{s}`")))
    }
}

/// Everything needed to rebuild an empty model of the right shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Arch {
    Orderer { unet: UNetConfig, vocab: Vec<String> },
    Bgr { widths: Vec<usize> },
    Softmax6 { encoder: Vec<usize> },
    Softmax2 { encoder: Vec<usize> },
    Shallow { bins: usize, hidden: usize },
}

#[derive(Debug, Clone)]
pub enum Model {
    Orderer(ScorerModel),
    Bgr(PairScorerModel),
    Softmax(SoftmaxModel),
    Shallow(ShallowModel),
}

impl Model {
    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Orderer(_) => ModelKind::Orderer,
            Model::Bgr(_) => ModelKind::Bgr,
            Model::Softmax(m) => match m.classes() {
                SoftmaxClasses::Six => ModelKind::Softmax6,
                SoftmaxClasses::Two => ModelKind::Softmax2,
            },
            Model::Shallow(_) => ModelKind::Shallow,
        }
    }

    pub fn params(&self) -> &ParamSet {
        match self {
            Model::Orderer(m) => m.params(),
            Model::Bgr(m) => m.params(),
            Model::Softmax(m) => m.params(),
            Model::Shallow(m) => m.params(),
        }
    }

    fn params_mut(&mut self) -> &mut ParamSet {
        match self {
            Model::Orderer(m) => m.params_mut(),
            Model::Bgr(m) => m.params_mut(),
            Model::Softmax(m) => m.params_mut(),
            Model::Shallow(m) => m.params_mut(),
        }
    }

    pub fn arch(&self) -> Arch {
        match self {
            Model::Orderer(m) => Arch::Orderer {
                unet: m.config().clone(),
                vocab: m.vocab().to_vec(),
            },
            Model::Bgr(m) => Arch::Bgr {
                widths: m.widths().to_vec(),
            },
            Model::Softmax(m) => match m.classes() {
                SoftmaxClasses::Six => Arch::Softmax6 {
                    encoder: m.encoder().to_vec(),
                },
                SoftmaxClasses::Two => Arch::Softmax2 {
                    encoder: m.encoder().to_vec(),
                },
            },
            Model::Shallow(m) => Arch::Shallow {
                bins: m.bins(),
                hidden: m.hidden(),
            },
        }
    }

    fn build(arch: &Arch, seed: u64) -> Result<Model> {
        Ok(match arch {
            Arch::Orderer { unet, vocab } => Model::Orderer(ScorerModel::new(unet.clone(), vocab.clone(), seed)?),
            Arch::Bgr { widths } => Model::Bgr(PairScorerModel::new(widths, seed)?),
            Arch::Softmax6 { encoder } => Model::Softmax(SoftmaxModel::new(encoder, SoftmaxClasses::Six, seed)?),
            Arch::Softmax2 { encoder } => Model::Softmax(SoftmaxModel::new(encoder, SoftmaxClasses::Two, seed)?),
            Arch::Shallow { bins, hidden } => Model::Shallow(ShallowModel::new(*bins, *hidden, seed)?),
        })
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    kind: ModelKind,
    arch: Arch,
    seed: u64,
    ranking: RankingConfig,
    train: Option<TrainConfig>,
    arrays: Vec<NamedArray>,
}

/// A trained model plus the settings it was produced with.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub model: Model,
    pub seed: u64,
    pub ranking: RankingConfig,
    /// Training config echo; absent for models that were never trained.
    pub train: Option<TrainConfig>,
}

impl Checkpoint {
    pub fn new(model: Model, seed: u64, ranking: RankingConfig, train: Option<TrainConfig>) -> Self {
        Checkpoint {
            model,
            seed,
            ranking,
            train,
        }
    }

    pub fn kind(&self) -> ModelKind {
        self.model.kind()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = Header {
            kind: self.kind(),
            arch: self.model.arch(),
            seed: self.seed,
            ranking: self.ranking,
            train: self.train.clone(),
            arrays: self.model.params().arrays().to_vec(),
        };
        let json = serde_json::to_vec(&header).expect("header serializes");
        let mut out = Vec::with_capacity(20 + json.len() + 4 * self.model.params().num_scalars());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for a in self.model.params().arrays() {
            for v in &a.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Checkpoint(m.to_string());
        if bytes.len() < 20 || &bytes[..8] != MAGIC {
            return Err(bad("not a checkpoint file"));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "format version {version} is not supported (expected {FORMAT_VERSION})"
            )));
        }
        let len = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
        let json = bytes.get(20..20 + len).ok_or_else(|| bad("truncated header"))?;
        let header: Header = serde_json::from_slice(json).map_err(|e| Error::Checkpoint(e.to_string()))?;
        let mut stored = ParamSet::new();
        let mut pos = 20 + len;
        for a in &header.arrays {
            let n: usize = a.shape.iter().product();
            let raw = bytes.get(pos..pos + 4 * n).ok_or_else(|| bad("truncated parameter data"))?;
            let data = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            stored.push(a.name.clone(), a.shape.clone(), data);
            pos += 4 * n;
        }
        if pos != bytes.len() {
            return Err(bad("trailing bytes after parameter data"));
        }
        let mut model = Model::build(&header.arch, header.seed)?;
        if model.kind() != header.kind {
            return Err(bad("model kind does not match its architecture"));
        }
        model.params_mut().load_from(&stored)?;
        Ok(Checkpoint {
            model,
            seed: header.seed,
            ranking: header.ranking,
            train: header.train,
        })
    }

    /// Writes through a temporary file in the same directory and renames it
    /// into place, so readers never see a partial checkpoint.
    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

/// Replaces `path` with `bytes` via a sibling temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().map(|n| n.to_string_lossy()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).and_then(|_| f.sync_all()).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}
