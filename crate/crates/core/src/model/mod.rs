//! The classifier: word encoder → single-layer BiLSTM → pooling → dense head.
//!
//! ```text
//! tokens ─► char-CNN (or lookup) ─► dropout_word ─► BiLSTM ─► pool ─►
//!        dropout_sentence ─► W1 + ReLU ─► dropout_fc ─► W2 ─► 6 logits
//! ```
//!
//! A batch of `B` sequences padded to `T` steps is laid out batch-major as a
//! `[B·T × d]` matrix; row `b·T + t` is word `t` of sequence `b`.

mod config;
mod lstm;
mod params;
mod vocab;

use std::collections::HashMap;

pub use config::{EncoderKind, ModelConfig, Pooling};
pub use lstm::{bilstm, lstm_cell, LstmWeights};
pub use params::{uniform_init, Bound, ParamId, ParamStore};
pub use vocab::{load_word_vectors, Vocab, UNKNOWN};

use crate::error::{invalid, Error, Result};
use crate::label::NUM_CLASSES;
use crate::proba::{Classifier, ProbabilityMatrix};
use crate::rng::{stream, Purpose, Rng};
use crate::tensor::{Graph, Mode, Real, Tensor, Var};
use crate::tokenizer::{Token, TokenKind};

/// Character ids: UTF-8 bytes shifted past three markers.
const PAD_BOUNDARY: usize = 3;
const BOW: usize = 1;
const EOW: usize = 2;
pub const CHAR_VOCAB: usize = 256 + PAD_BOUNDARY;

/// Inference batch size.
pub const PREDICT_BATCH: usize = 64;

#[derive(Debug, Clone, PartialEq)]
enum EncoderLayout {
    CharCnn {
        table: ParamId,
        convs: Vec<(usize, ParamId, ParamId)>,
        proj_w: ParamId,
        proj_b: ParamId,
    },
    Lookup {
        table: ParamId,
    },
}

#[derive(Debug, Clone, PartialEq)]
struct DirectionIds {
    w: [ParamId; 4],
    u: [ParamId; 4],
    b: [ParamId; 4],
}

#[derive(Debug, Clone, PartialEq)]
struct Layout {
    encoder: EncoderLayout,
    lstm: [DirectionIds; 2],
    head: [ParamId; 4],
}

/// Word vectors for a padded batch.
#[derive(Debug, Clone)]
pub struct EncodedBatch {
    /// `[batch·steps × word_dim]`, zero rows at padded positions.
    pub words: Var,
    pub lens: Vec<usize>,
    pub steps: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct Forward {
    pub logits: Var,
    pub pooled: Var,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model<T> {
    config: ModelConfig,
    params: ParamStore<T>,
    layout: Layout,
    vocab: Option<Vocab>,
}

const GATES: [&str; 4] = ["i", "f", "o", "g"];
const FORGET: usize = 1;

/// How a fresh tensor is filled.
enum Fill {
    Uniform { fan_in: usize },
    Const(f64),
}

impl ModelConfig {
    /// Applies the configured text options and returns word strings. An
    /// empty result becomes a single empty word.
    pub fn words(&self, tokens: &[Token]) -> Vec<String> {
        let mut words: Vec<String> = tokens
            .iter()
            .filter(|t| !(self.strip_emoji && t.kind == TokenKind::Emoji))
            .map(|t| {
                if self.lowercase && matches!(t.kind, TokenKind::Word | TokenKind::Hashtag) {
                    t.text.to_lowercase()
                } else {
                    t.text.clone()
                }
            })
            .collect();
        if words.is_empty() {
            words.push(String::new());
        }
        words
    }
}

impl<T: Real> Model<T> {
    /// Fresh model with uniform(±1/√fan_in) weights, zero biases and a
    /// forget-gate bias of 1. `vocab` is required by the lookup encoder.
    pub fn new(config: ModelConfig, vocab: Option<Vocab>, rng: &mut Rng) -> Result<Self> {
        Self::build(config, vocab, &mut |shape, fill| match fill {
            Fill::Uniform { fan_in } => uniform_init(shape, fan_in, rng),
            Fill::Const(v) => Tensor::full(shape, T::of(v)),
        })
    }

    /// Reassembles a model from named tensors, checking names and shapes.
    pub fn from_params(
        config: ModelConfig,
        vocab: Option<Vocab>,
        named: Vec<(String, Tensor<T>)>,
    ) -> Result<Self> {
        let mut model = Self::build(config, vocab, &mut |shape, _| Tensor::zeros(shape))?;
        if named.len() != model.params.len() {
            return Err(Error::Format {
                what: "checkpoint",
                msg: format!("expected {} tensors, found {}", model.params.len(), named.len()),
            });
        }
        for (name, tensor) in named {
            let id = model.params.id(&name).ok_or_else(|| Error::Format {
                what: "checkpoint",
                msg: format!("unexpected tensor `{name}`"),
            })?;
            let slot = model.params.get_mut(id);
            if slot.shape() != tensor.shape() {
                return Err(Error::Shape {
                    op: "load",
                    lhs: slot.shape().to_vec(),
                    rhs: tensor.shape().to_vec(),
                });
            }
            *slot = tensor;
        }
        Ok(model)
    }

    fn build(
        config: ModelConfig,
        vocab: Option<Vocab>,
        make: &mut dyn FnMut(&[usize], Fill) -> Tensor<T>,
    ) -> Result<Self> {
        config.validate()?;
        let mut ps = ParamStore::default();
        let encoder = match config.encoder {
            EncoderKind::CharCnn => {
                let e = config.char_emb_dim;
                let table = ps.add(
                    "encoder.char_embedding",
                    make(&[CHAR_VOCAB, e], Fill::Uniform { fan_in: e }),
                )?;
                let mut convs = Vec::new();
                for &(w, n) in &config.cnn_filters {
                    let wid = ps.add(
                        format!("encoder.conv{w}.weight"),
                        make(&[w * e, n], Fill::Uniform { fan_in: w * e }),
                    )?;
                    let bid = ps.add(format!("encoder.conv{w}.bias"), make(&[n], Fill::Const(0.0)))?;
                    convs.push((w, wid, bid));
                }
                let f = config.total_filters();
                let proj_w = ps.add(
                    "encoder.projection.weight",
                    make(&[f, config.word_dim], Fill::Uniform { fan_in: f }),
                )?;
                let proj_b = ps.add("encoder.projection.bias", make(&[config.word_dim], Fill::Const(0.0)))?;
                EncoderLayout::CharCnn {
                    table,
                    convs,
                    proj_w,
                    proj_b,
                }
            }
            EncoderKind::EmbeddingLookup => {
                let v = vocab
                    .as_ref()
                    .ok_or_else(|| invalid("embedding_lookup encoder needs a vocabulary"))?;
                let table = ps.add(
                    "encoder.word_embedding",
                    make(&[v.len(), config.word_dim], Fill::Uniform { fan_in: config.word_dim }),
                )?;
                EncoderLayout::Lookup { table }
            }
        };
        let (d, h) = (config.word_dim, config.lstm_hidden);
        let mut direction = |ps: &mut ParamStore<T>, dir: &str| -> Result<DirectionIds> {
            let mut ids = Vec::new();
            for gate in GATES {
                ids.push(ps.add(format!("lstm.{dir}.W_{gate}"), make(&[d, h], Fill::Uniform { fan_in: d }))?);
            }
            for gate in GATES {
                ids.push(ps.add(format!("lstm.{dir}.U_{gate}"), make(&[h, h], Fill::Uniform { fan_in: h }))?);
            }
            for (k, gate) in GATES.iter().enumerate() {
                let bias = if k == FORGET { 1.0 } else { 0.0 };
                ids.push(ps.add(format!("lstm.{dir}.b_{gate}"), make(&[h], Fill::Const(bias)))?);
            }
            Ok(DirectionIds {
                w: [ids[0], ids[1], ids[2], ids[3]],
                u: [ids[4], ids[5], ids[6], ids[7]],
                b: [ids[8], ids[9], ids[10], ids[11]],
            })
        };
        let lstm = [direction(&mut ps, "fwd")?, direction(&mut ps, "bwd")?];
        let (pooled, fc) = (config.pooled_dim(), config.fc_hidden);
        let head = [
            ps.add("head.W1", make(&[pooled, fc], Fill::Uniform { fan_in: pooled }))?,
            ps.add("head.b1", make(&[fc], Fill::Const(0.0)))?,
            ps.add("head.W2", make(&[fc, NUM_CLASSES], Fill::Uniform { fan_in: fc }))?,
            ps.add("head.b2", make(&[NUM_CLASSES], Fill::Const(0.0)))?,
        ];
        Ok(Model {
            config,
            params: ps,
            layout: Layout { encoder, lstm, head },
            vocab,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore<T> {
        &mut self.params
    }

    pub fn vocab(&self) -> Option<&Vocab> {
        self.vocab.as_ref()
    }

    pub fn cast<U: Real>(&self) -> Model<U> {
        Model {
            config: self.config.clone(),
            params: self.params.cast(),
            layout: self.layout.clone(),
            vocab: self.vocab.clone(),
        }
    }

    /// Initializes lookup rows from a `word v1 ... vd` text stream.
    pub fn load_word_vectors<R: std::io::BufRead>(&mut self, reader: R) -> Result<usize> {
        let (EncoderLayout::Lookup { table }, Some(vocab)) = (&self.layout.encoder, &self.vocab) else {
            return Err(invalid("word vectors need the embedding_lookup encoder"));
        };
        load_word_vectors(reader, vocab, self.params.get_mut(*table))
    }

    pub fn prepare(&self, tokens: &[Token]) -> Vec<String> {
        self.config.words(tokens)
    }

    /// Word encoding followed by `dropout_word`.
    pub fn encode_words(
        &self,
        g: &mut Graph<T>,
        bound: &Bound,
        docs: &[Vec<String>],
        mode: Mode,
        rng: &mut Rng,
    ) -> Result<EncodedBatch> {
        if docs.is_empty() || docs.iter().any(Vec::is_empty) {
            return Err(invalid("encode_words needs non-empty sequences"));
        }
        let lens: Vec<usize> = docs.iter().map(Vec::len).collect();
        let steps = *lens.iter().max().expect("non-empty");
        let words = match &self.layout.encoder {
            EncoderLayout::CharCnn {
                table,
                convs,
                proj_w,
                proj_b,
            } => {
                let mut unique: Vec<&str> = Vec::new();
                let mut slot: HashMap<&str, usize> = HashMap::new();
                let mut index = vec![None; docs.len() * steps];
                for (b, doc) in docs.iter().enumerate() {
                    for (t, w) in doc.iter().enumerate() {
                        let next = unique.len();
                        let k = *slot.entry(w.as_str()).or_insert_with(|| {
                            unique.push(w.as_str());
                            next
                        });
                        index[b * steps + t] = Some(k);
                    }
                }
                let encoded = self.char_cnn(g, bound, &unique, *table, convs, *proj_w, *proj_b)?;
                g.gather_rows(encoded, index)?
            }
            EncoderLayout::Lookup { table } => {
                let vocab = self.vocab.as_ref().expect("lookup layout has a vocabulary");
                let mut index = vec![None; docs.len() * steps];
                for (b, doc) in docs.iter().enumerate() {
                    for (t, w) in doc.iter().enumerate() {
                        index[b * steps + t] = Some(vocab.lookup(w));
                    }
                }
                g.gather_rows(bound.var(*table), index)?
            }
        };
        let words = g.dropout(words, self.config.dropout_word, mode, rng)?;
        Ok(EncodedBatch { words, lens, steps })
    }

    fn char_ids(&self, word: &str) -> Vec<usize> {
        let mut ids = vec![BOW];
        let mut buf = [0u8; 4];
        for c in word.chars().take(self.config.max_word_chars) {
            ids.extend(c.encode_utf8(&mut buf).bytes().map(|b| b as usize + PAD_BOUNDARY));
        }
        ids.push(EOW);
        ids
    }

    /// `[unique words × word_dim]`: byte embeddings, one convolution per
    /// filter width with ReLU and max over valid windows, then a linear
    /// projection of the concatenated filter maxima.
    #[allow(clippy::too_many_arguments)]
    fn char_cnn(
        &self,
        g: &mut Graph<T>,
        bound: &Bound,
        words: &[&str],
        table: ParamId,
        convs: &[(usize, ParamId, ParamId)],
        proj_w: ParamId,
        proj_b: ParamId,
    ) -> Result<Var> {
        let ids: Vec<Vec<usize>> = words.iter().map(|w| self.char_ids(w)).collect();
        let max_width = convs.iter().map(|c| c.0).max().unwrap_or(1);
        let span = ids.iter().map(Vec::len).max().unwrap_or(0).max(max_width);
        let mut index = vec![None; words.len() * span];
        for (n, seq) in ids.iter().enumerate() {
            for (p, &c) in seq.iter().enumerate() {
                index[n * span + p] = Some(c);
            }
        }
        let chars = g.gather_rows(bound.var(table), index)?;
        let mut maps = Vec::with_capacity(convs.len());
        for &(width, wid, bid) in convs {
            let positions = span - width + 1;
            let windows = if width == 1 {
                chars
            } else {
                let shifted = (0..width)
                    .map(|j| {
                        let rows = (0..words.len())
                            .flat_map(|n| (0..positions).map(move |p| Some(n * span + p + j)))
                            .collect();
                        g.gather_rows(chars, rows)
                    })
                    .collect::<Result<Vec<_>>>()?;
                g.concat_cols(&shifted)?
            };
            let conv = g.matmul(windows, bound.var(wid))?;
            let conv = g.add_bias(conv, bound.var(bid))?;
            let conv = g.relu(conv);
            let valid: Vec<usize> = ids.iter().map(|s| (s.len() + 1).saturating_sub(width).max(1)).collect();
            maps.push(g.segment_max(conv, positions, &valid)?);
        }
        let features = if maps.len() == 1 { maps[0] } else { g.concat_cols(&maps)? };
        let projected = g.matmul(features, bound.var(proj_w))?;
        g.add_bias(projected, bound.var(proj_b))
    }

    fn direction(&self, g: &mut Graph<T>, bound: &Bound, ids: &DirectionIds) -> Result<LstmWeights> {
        let v = |a: &[ParamId; 4]| a.map(|id| bound.var(id));
        LstmWeights::fuse(g, v(&ids.w), v(&ids.u), v(&ids.b))
    }

    /// `[batch·steps × 2h]`, batch-major; forward half first.
    pub fn bilstm_forward(&self, g: &mut Graph<T>, bound: &Bound, batch: &EncodedBatch) -> Result<Var> {
        let fwd = self.direction(g, bound, &self.layout.lstm[0])?;
        let bwd = self.direction(g, bound, &self.layout.lstm[1])?;
        bilstm(g, batch.words, &batch.lens, batch.steps, &fwd, &bwd)
    }

    /// Sentence vectors `[batch × pooled_dim]` followed by `dropout_sentence`.
    pub fn pool(
        &self,
        g: &mut Graph<T>,
        states: Var,
        lens: &[usize],
        steps: usize,
        mode: Mode,
        rng: &mut Rng,
    ) -> Result<Var> {
        let pooled = match self.config.pooling {
            Pooling::Max => g.segment_max(states, steps, lens)?,
            Pooling::ConcatMaxMeanLast => {
                let max = g.segment_max(states, steps, lens)?;
                let mean = g.segment_mean(states, steps, lens)?;
                let last_rows = lens.iter().enumerate().map(|(b, &l)| Some(b * steps + l - 1)).collect();
                let last = g.gather_rows(states, last_rows)?;
                g.concat_cols(&[max, mean, last])?
            }
        };
        g.dropout(pooled, self.config.dropout_sentence, mode, rng)
    }

    /// `W2 · dropout_fc(relu(W1 · pooled + b1)) + b2`
    pub fn classify(&self, g: &mut Graph<T>, bound: &Bound, pooled: Var, mode: Mode, rng: &mut Rng) -> Result<Var> {
        let [w1, b1, w2, b2] = self.layout.head.map(|id| bound.var(id));
        let hidden = g.matmul(pooled, w1)?;
        let hidden = g.add_bias(hidden, b1)?;
        let hidden = g.relu(hidden);
        let hidden = g.dropout(hidden, self.config.dropout_fc, mode, rng)?;
        let logits = g.matmul(hidden, w2)?;
        g.add_bias(logits, b2)
    }

    pub fn forward(
        &self,
        g: &mut Graph<T>,
        bound: &Bound,
        docs: &[Vec<String>],
        mode: Mode,
        rng: &mut Rng,
    ) -> Result<Forward> {
        let batch = self.encode_words(g, bound, docs, mode, rng)?;
        let states = self.bilstm_forward(g, bound, &batch)?;
        let pooled = self.pool(g, states, &batch.lens, batch.steps, mode, rng)?;
        let logits = self.classify(g, bound, pooled, mode, rng)?;
        Ok(Forward { logits, pooled })
    }

    /// Eval-mode pass over `docs` in fixed-size chunks, returning the given
    /// node type's values stacked: logits when `pooled` is false.
    fn eval_rows(&self, docs: &[Vec<Token>], pooled: bool) -> Result<Vec<Tensor<T>>> {
        // Eval mode never draws from the stream.
        let mut rng = stream(0, Purpose::Dropout);
        let mut out = Vec::new();
        for chunk in docs.chunks(PREDICT_BATCH) {
            let words: Vec<Vec<String>> = chunk.iter().map(|d| self.prepare(d)).collect();
            let mut g = Graph::new();
            let bound = self.params.bind(&mut g, false);
            let f = self.forward(&mut g, &bound, &words, Mode::Eval, &mut rng)?;
            out.push(g.value(if pooled { f.pooled } else { f.logits }).clone());
        }
        Ok(out)
    }

    pub fn logits(&self, docs: &[Vec<Token>]) -> Result<Tensor<f64>> {
        stack(self.eval_rows(docs, false)?, NUM_CLASSES)
    }

    /// Pooled sentence representations `[N × pooled_dim]` in eval mode.
    pub fn sentence_vectors(&self, docs: &[Vec<Token>]) -> Result<Tensor<f64>> {
        stack(self.eval_rows(docs, true)?, self.config.pooled_dim())
    }
}

fn stack<T: Real>(parts: Vec<Tensor<T>>, cols: usize) -> Result<Tensor<f64>> {
    let data: Vec<f64> = parts.iter().flat_map(|t| t.data().iter().map(|x| x.f64())).collect();
    if data.is_empty() {
        return Err(Error::Empty("example list"));
    }
    Tensor::matrix(data.len() / cols, cols, data)
}

/// Row-wise softmax in `f64`.
pub fn softmax(logits: &Tensor<f64>) -> Vec<f64> {
    crate::tensor::softmax_rows(logits).into_data()
}

impl<T: Real> Classifier for Model<T> {
    fn predict_proba(&self, docs: &[Vec<Token>]) -> Result<ProbabilityMatrix> {
        let logits = self.logits(docs)?;
        let bad = logits.data().chunks(NUM_CLASSES).filter(|r| r.iter().any(|x| !x.is_finite())).count();
        if bad > 0 {
            return Err(Error::NonFiniteOutput(bad));
        }
        ProbabilityMatrix::new("", softmax(&logits))
    }
}
