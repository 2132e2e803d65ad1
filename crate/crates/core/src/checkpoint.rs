//! The binary tensor container used for checkpoints and probability caches.
//!
//! ```text
//! "IESTM1"                magic, 6 bytes
//! u16                     format version
//! u32 + bytes             config blob, UTF-8 `key = value` lines
//! repeated until EOF:
//!   u32 + bytes           tensor name, UTF-8
//!   u8                    rank
//!   u32 × rank            dims
//!   f32 × ∏dims           data
//! ```
//!
//! All integers and floats are little-endian.

use std::path::Path;

use sha2::{Digest, Sha256};

use crate::config::{parse_lines, RunConfig};
use crate::error::{Error, Result};
use crate::label::NUM_CLASSES;
use crate::model::{Model, Vocab};
use crate::proba::ProbabilityMatrix;
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 6] = b"IESTM1";
pub const VERSION: u16 = 1;
pub const PROBA_TENSOR: &str = "proba";
const VOCAB_KEY: &str = "vocab";
const ID_KEY: &str = "id";

#[derive(Debug, Clone, PartialEq)]
pub struct Container {
    pub config: String,
    pub tensors: Vec<(String, Tensor<f32>)>,
}

fn put_bytes(out: &mut Vec<u8>, bytes: &[u8]) {
    out.extend_from_slice(&(bytes.len() as u32).to_le_bytes());
    out.extend_from_slice(bytes);
}

impl Container {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        put_bytes(&mut out, self.config.as_bytes());
        for (name, t) in &self.tensors {
            put_bytes(&mut out, name.as_bytes());
            out.push(t.shape().len() as u8);
            for &d in t.shape() {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            for &x in t.data() {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, at: 0 };
        if r.take(MAGIC.len())? != MAGIC {
            return Err(format_err("bad magic"));
        }
        let version = u16::from_le_bytes(r.array()?);
        if version != VERSION {
            return Err(format_err(format!("unsupported version {version}")));
        }
        let config = r.string()?;
        let mut tensors = Vec::new();
        while r.at < bytes.len() {
            let name = r.string()?;
            let rank = r.take(1)?[0] as usize;
            if rank == 0 {
                return Err(format_err(format!("tensor `{name}` has rank 0")));
            }
            let shape: Vec<usize> = (0..rank)
                .map(|_| r.array().map(|b| u32::from_le_bytes(b) as usize))
                .collect::<Result<_>>()?;
            let n = shape
                .iter()
                .try_fold(1usize, |a, &d| a.checked_mul(d))
                .filter(|n| n.checked_mul(4).is_some_and(|b| b <= bytes.len()))
                .ok_or_else(|| format_err(format!("tensor `{name}` is too large")))?;
            let raw = r.take(n * 4)?;
            let data = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                .collect();
            let tensor = Tensor::new(shape, data).map_err(|e| format_err(format!("tensor `{name}`: {e}")))?;
            tensors.push((name, tensor));
        }
        Ok(Container { config, tensors })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.encode())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::decode(&std::fs::read(path)?)
    }
}

fn format_err(msg: impl Into<String>) -> Error {
    Error::Format {
        what: "container",
        msg: msg.into(),
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| format_err(format!("truncated at byte {}", self.at)))?;
        let s = &self.bytes[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn string(&mut self) -> Result<String> {
        let len = u32::from_le_bytes(self.array()?) as usize;
        String::from_utf8(self.take(len)?.to_vec()).map_err(|_| format_err("string is not UTF-8"))
    }
}

/// Checkpoint: the run configuration (plus the vocabulary, when present) in
/// the blob and every parameter as a named tensor.
pub fn model_container(model: &Model<f32>, run: &RunConfig) -> Container {
    let run = RunConfig {
        model: model.config().clone(),
        train: run.train.clone(),
    };
    let mut config = run.render();
    if let Some(v) = model.vocab() {
        config.push_str(VOCAB_KEY);
        config.push_str(" = ");
        config.push_str(&v.words().join(" "));
        config.push('\n');
    }
    Container {
        config,
        tensors: model.params().iter().map(|(n, t)| (n.to_string(), t.clone())).collect(),
    }
}

pub fn model_from_container(c: Container) -> Result<(Model<f32>, RunConfig)> {
    let mut run = RunConfig::default();
    let mut vocab = None;
    for (_, k, v) in parse_lines(&c.config)? {
        if k == VOCAB_KEY {
            vocab = Some(Vocab::from_words(v.split_whitespace().map(str::to_string)));
        } else {
            run.set(&k, &v)?;
        }
    }
    run.validate()?;
    let model = Model::from_params(run.model.clone(), vocab, c.tensors)?;
    Ok((model, run))
}

pub fn save_model(path: &Path, model: &Model<f32>, run: &RunConfig) -> Result<()> {
    model_container(model, run).save(path)
}

pub fn load_model(path: &Path) -> Result<(Model<f32>, RunConfig)> {
    model_from_container(Container::load(path)?)
}

/// Cached class probabilities with the digests of the examples they cover,
/// in order.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbaCache {
    pub matrix: ProbabilityMatrix,
    pub order: Vec<String>,
}

/// Short content digest identifying one example.
pub fn example_digest(text: &str) -> String {
    sha256_hex(text.as_bytes())[..16].to_string()
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_digest(path: &Path) -> Result<String> {
    Ok(sha256_hex(&std::fs::read(path)?))
}

/// Path of the example-order sidecar for a cache file.
pub fn order_path(cache: &Path) -> std::path::PathBuf {
    let mut s = cache.as_os_str().to_owned();
    s.push(".order");
    s.into()
}

impl ProbaCache {
    pub fn container(&self) -> Container {
        let rows = self.matrix.rows();
        let data = self.matrix.data().iter().map(|&p| p as f32).collect();
        Container {
            config: format!("{ID_KEY} = {}\nrows = {rows}\n", self.matrix.id),
            tensors: vec![(
                PROBA_TENSOR.to_string(),
                Tensor::matrix(rows, NUM_CLASSES, data).expect("rows > 0"),
            )],
        }
    }

    pub fn order_text(&self) -> String {
        let mut s = String::new();
        for (i, d) in self.order.iter().enumerate() {
            s.push_str(&format!("{i}\t{d}\n"));
        }
        s
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.container().save(path)?;
        std::fs::write(order_path(path), self.order_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let c = Container::load(path)?;
        let id = parse_lines(&c.config)?
            .into_iter()
            .find(|(_, k, _)| k == ID_KEY)
            .map(|(_, _, v)| v)
            .unwrap_or_default();
        let mut tensors = c.tensors;
        if tensors.len() != 1 {
            return Err(format_err("expected one tensor"));
        }
        let (name, t) = tensors.pop().expect("one tensor");
        if name != PROBA_TENSOR || t.shape().len() != 2 || t.cols() != NUM_CLASSES {
            return Err(format_err(format!("expected `{PROBA_TENSOR}` [N × {NUM_CLASSES}]")));
        }
        let matrix = ProbabilityMatrix::new(id, t.data().iter().map(|&p| p as f64).collect())?;
        let order_src = std::fs::read_to_string(order_path(path))?;
        let order: Vec<String> = order_src
            .lines()
            .map(|l| l.split_once('\t').map_or(l, |(_, d)| d).to_string())
            .collect();
        if order.len() != matrix.rows() {
            return Err(format_err(format!(
                "order manifest lists {} examples, matrix has {}",
                order.len(),
                matrix.rows()
            )));
        }
        Ok(ProbaCache { matrix, order })
    }
}
