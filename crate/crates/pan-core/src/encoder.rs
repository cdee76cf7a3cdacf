//! Sentence encoding: vocabulary, token embeddings, and the bi-LSTM that
//! turns a sentence with a marked mention span into a fixed vector.
//!
//! A sentence representation is `tanh(P · [h_fwd; h_bwd; m])` where the `h`s
//! are the final hidden states of the two LSTM directions and `m` is the mean
//! embedding of the mention tokens. The mean-pool variant drops the LSTM and
//! projects the mean embedding of the whole sentence instead; it exists as a
//! cheap ablation encoder.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use thiserror::Error;

use crate::numerics::{Graph, NodeId, NumericsError, Tensor};

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EncoderError {
    #[error("sentence has no tokens")]
    EmptySentence,
    #[error("mention span {start}..{end} does not fit {len} tokens")]
    BadSpan {
        start: usize,
        end: usize,
        len: usize,
    },
    #[error("token id {id} outside vocabulary of {len}")]
    TokenOutOfRange { id: usize, len: usize },
    #[error("vocabulary is malformed: {reason}")]
    BadVocab { reason: String },
}

/// Token-string interner. Id 0 is padding, id 1 the unknown token; both are
/// reserved at construction. Training interns new tokens; evaluation looks
/// tokens up and falls back to [`UNK`].
#[derive(Debug, Clone, Default)]
pub struct Vocab {
    tokens: Vec<String>,
    index: BTreeMap<String, usize>,
}

impl Vocab {
    pub fn new() -> Self {
        let mut v = Vocab {
            tokens: Vec::new(),
            index: BTreeMap::new(),
        };
        v.intern(PAD_TOKEN);
        v.intern(UNK_TOKEN);
        v
    }

    /// Rebuild a vocabulary saved as an id-ordered token list.
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self, EncoderError> {
        if tokens.len() < 2 || tokens[PAD] != PAD_TOKEN || tokens[UNK] != UNK_TOKEN {
            return Err(EncoderError::BadVocab {
                reason: "first two entries must be the padding and unknown tokens".to_string(),
            });
        }
        let mut index = BTreeMap::new();
        for (id, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), id).is_some() {
                return Err(EncoderError::BadVocab {
                    reason: alloc::format!("token {t:?} appears twice"),
                });
            }
        }
        Ok(Vocab { tokens, index })
    }

    /// Id for `token`, adding it if unseen.
    pub fn intern(&mut self, token: &str) -> usize {
        if let Some(&id) = self.index.get(token) {
            return id;
        }
        let id = self.tokens.len();
        self.tokens.push(token.to_string());
        self.index.insert(token.to_string(), id);
        id
    }

    /// Id for `token`, or [`UNK`] when it was never interned.
    pub fn lookup(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn token(&self, id: usize) -> &str {
        &self.tokens[id]
    }

    /// Tokens in id order; inverse of [`Vocab::from_tokens`].
    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

/// A tokenized sentence with its entity mention marked as a half-open token
/// range.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedSentence {
    pub token_ids: Vec<usize>,
    /// Half-open `start..end` over token positions.
    pub span: (usize, usize),
}

impl EncodedSentence {
    pub fn new(token_ids: Vec<usize>, span: (usize, usize)) -> Result<Self, EncoderError> {
        if token_ids.is_empty() {
            return Err(EncoderError::EmptySentence);
        }
        let (start, end) = span;
        if start >= end || end > token_ids.len() {
            return Err(EncoderError::BadSpan {
                start,
                end,
                len: token_ids.len(),
            });
        }
        Ok(EncodedSentence { token_ids, span })
    }

    pub fn len(&self) -> usize {
        self.token_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.token_ids.is_empty()
    }
}

/// Which encoder turns sentences into vectors.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EncoderKind {
    /// Bi-directional LSTM over tokens plus the mention mean embedding.
    Lstm,
    /// Mean embedding of the whole sentence; ablation encoder.
    MeanPool,
}

impl EncoderKind {
    /// Canonical command-line / config spelling.
    pub fn as_str(&self) -> &'static str {
        match self {
            EncoderKind::Lstm => "lstm",
            EncoderKind::MeanPool => "mean-pool",
        }
    }

    pub fn parse(s: &str) -> Option<EncoderKind> {
        match s {
            "lstm" => Some(EncoderKind::Lstm),
            "mean-pool" => Some(EncoderKind::MeanPool),
            _ => None,
        }
    }
}

/// One LSTM direction. Each gate weight is `[d_h, d_w + d_h]` over the
/// concatenated `[x; h]`, each bias `[d_h]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmCellParams {
    pub w_i: Tensor,
    pub w_f: Tensor,
    pub w_o: Tensor,
    pub w_g: Tensor,
    pub b_i: Tensor,
    pub b_f: Tensor,
    pub b_o: Tensor,
    pub b_g: Tensor,
}

/// Everything the encoder owns: token embeddings `[V, d_w]`, the two LSTM
/// directions (absent for mean-pool), and the projection onto `[d]` — shape
/// `[d, 2·d_h + d_w]` with the LSTM, `[d, d_w]` without.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    pub embeddings: Tensor,
    pub lstm: Option<(LstmCellParams, LstmCellParams)>,
    pub projection: Tensor,
}

impl EncoderParams {
    pub fn kind(&self) -> EncoderKind {
        if self.lstm.is_some() {
            EncoderKind::Lstm
        } else {
            EncoderKind::MeanPool
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.embeddings.rows()
    }

    pub fn word_dim(&self) -> usize {
        self.embeddings.cols()
    }

    pub fn hidden_dim(&self) -> Option<usize> {
        self.lstm.as_ref().map(|(f, _)| f.b_i.len())
    }

    pub fn out_dim(&self) -> usize {
        self.projection.rows()
    }
}

/// Tape positions of one LSTM direction's parameters.
#[derive(Debug, Clone, Copy)]
pub struct LstmCellNodes {
    pub w_i: NodeId,
    pub w_f: NodeId,
    pub w_o: NodeId,
    pub w_g: NodeId,
    pub b_i: NodeId,
    pub b_f: NodeId,
    pub b_o: NodeId,
    pub b_g: NodeId,
}

/// Tape positions of the encoder parameters inside one bag graph.
#[derive(Debug, Clone)]
pub struct EncoderNodes {
    pub embeddings: NodeId,
    pub lstm: Option<(LstmCellNodes, LstmCellNodes)>,
    pub projection: NodeId,
}

fn gate(
    g: &mut Graph,
    w: NodeId,
    b: NodeId,
    xh: NodeId,
) -> Result<NodeId, NumericsError> {
    let wx = g.matvec(w, xh)?;
    g.add(wx, b)
}

/// One LSTM step over the concatenated input and previous hidden state:
/// `i,f,o = σ(W[x;h]+b)`, `g̃ = tanh(W[x;h]+b)`, `c' = f⊙c + i⊙g̃`,
/// `h' = o⊙tanh(c')`.
pub fn lstm_step(
    g: &mut Graph,
    cell: &LstmCellNodes,
    x: NodeId,
    h: NodeId,
    c: NodeId,
) -> Result<(NodeId, NodeId), NumericsError> {
    let xh = g.concat(&[x, h])?;
    let i_pre = gate(g, cell.w_i, cell.b_i, xh)?;
    let i = g.sigmoid(i_pre)?;
    let f_pre = gate(g, cell.w_f, cell.b_f, xh)?;
    let f = g.sigmoid(f_pre)?;
    let o_pre = gate(g, cell.w_o, cell.b_o, xh)?;
    let o = g.sigmoid(o_pre)?;
    let g_pre = gate(g, cell.w_g, cell.b_g, xh)?;
    let g_tilde = g.tanh(g_pre)?;
    let fc = g.mul(f, c)?;
    let ig = g.mul(i, g_tilde)?;
    let c_next = g.add(fc, ig)?;
    let tc = g.tanh(c_next)?;
    let h_next = g.mul(o, tc)?;
    Ok((h_next, c_next))
}

/// Mean embedding of `ids` as a graph node.
fn mean_embedding(
    g: &mut Graph,
    embeddings: NodeId,
    ids: &[usize],
) -> Result<NodeId, NumericsError> {
    let rows = g.gather(embeddings, ids)?;
    let w = 1.0 / ids.len() as f64;
    let uniform = g.constant(Tensor::vector(alloc::vec![w; ids.len()]));
    g.vecmat(uniform, rows)
}

/// Encode one sentence to a `[d]` node.
pub fn encode_sentence(
    g: &mut Graph,
    enc: &EncoderNodes,
    sentence: &EncodedSentence,
) -> Result<NodeId, NumericsError> {
    let (start, end) = sentence.span;
    let features = match &enc.lstm {
        Some((fwd, bwd)) => {
            let d_h = g.value(fwd.b_i).len();
            let xs: Vec<NodeId> = sentence
                .token_ids
                .iter()
                .map(|&id| g.row(enc.embeddings, id))
                .collect::<Result<_, _>>()?;
            let zero = g.constant(Tensor::zeros(&[d_h]));
            let (mut h, mut c) = (zero, zero);
            for &x in &xs {
                (h, c) = lstm_step(g, fwd, x, h, c)?;
            }
            let h_fwd = h;
            let (mut h, mut c) = (zero, zero);
            for &x in xs.iter().rev() {
                (h, c) = lstm_step(g, bwd, x, h, c)?;
            }
            let h_bwd = h;
            let mention = mean_embedding(g, enc.embeddings, &sentence.token_ids[start..end])?;
            g.concat(&[h_fwd, h_bwd, mention])?
        }
        None => mean_embedding(g, enc.embeddings, &sentence.token_ids)?,
    };
    let projected = g.matvec(enc.projection, features)?;
    g.tanh(projected)
}

/// Encode all sentences of a bag into an `[n, d]` matrix node, one row per
/// sentence in bag order.
pub fn encode_bag(
    g: &mut Graph,
    enc: &EncoderNodes,
    sentences: &[EncodedSentence],
) -> Result<NodeId, NumericsError> {
    let rows: Vec<NodeId> = sentences
        .iter()
        .map(|s| encode_sentence(g, enc, s))
        .collect::<Result<_, _>>()?;
    g.stack_rows(&rows)
}
