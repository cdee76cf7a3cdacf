//! Per-type selective attention over the sentences of a bag.
//!
//! For type `t` with ancestor path `t_1 → … → t_l`, the query is the path
//! composition of the type embeddings (sum or product along the path); the
//! score of sentence `i` is `(s_i ⊙ a) · p_t` with `a` the learned diagonal
//! of the bilinear form; the weights are the softmax over the bag; the bag
//! representation for `t` is the weighted sum of sentence vectors.

use alloc::vec;
use alloc::vec::Vec;

use crate::hierarchy::{TypeHierarchy, TypeId};
use crate::numerics::{Graph, NodeId, NumericsError, Tensor};

/// Attention variant. The path modes share parameters along the hierarchy;
/// the flat mode queries with the type's own embedding only; uniform
/// attention removes selectivity altogether.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Path query composed by elementwise addition.
    PanA,
    /// Path query composed by elementwise multiplication.
    PanM,
    /// The type's own embedding as the query; no path sharing.
    An,
    /// No attention: every sentence weighs 1/n.
    Uniform,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::PanA, Mode::PanM, Mode::An, Mode::Uniform];

    /// Canonical command-line / config spelling.
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::PanA => "PAN-A",
            Mode::PanM => "PAN-M",
            Mode::An => "AN",
            Mode::Uniform => "uniform",
        }
    }

    pub fn parse(s: &str) -> Option<Mode> {
        match s {
            "PAN-A" => Some(Mode::PanA),
            "PAN-M" => Some(Mode::PanM),
            "AN" => Some(Mode::An),
            "uniform" => Some(Mode::Uniform),
            _ => None,
        }
    }
}

/// Attention-side parameters: the diagonal `a` of the bilinear form (`[d]`)
/// and one embedding per type (`[N, d]`).
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams {
    pub diag: Tensor,
    pub type_embeddings: Tensor,
}

/// Tape positions of the attention parameters inside one bag graph.
#[derive(Debug, Clone, Copy)]
pub struct AttentionNodes {
    pub diag: NodeId,
    pub type_embeddings: NodeId,
}

/// Build the query node for type `t` under `mode`. Path modes fold the
/// root-first ancestor path with add or multiply; the flat and uniform modes
/// use the type's own embedding (uniform never reads the result).
pub fn type_query(
    g: &mut Graph,
    attn: &AttentionNodes,
    hierarchy: &TypeHierarchy,
    t: TypeId,
    mode: Mode,
) -> Result<NodeId, NumericsError> {
    let path = hierarchy.path_of(t);
    let mut query = g.row(attn.type_embeddings, path[0])?;
    if matches!(mode, Mode::PanA | Mode::PanM) {
        for &ancestor in &path[1..] {
            let row = g.row(attn.type_embeddings, ancestor)?;
            query = match mode {
                Mode::PanA => g.add(query, row)?,
                Mode::PanM => g.mul(query, row)?,
                _ => unreachable!(),
            };
        }
    } else {
        // Flat query: the type's own embedding, which is the path's last row.
        query = g.row(attn.type_embeddings, t)?;
    }
    Ok(query)
}

/// Softmax attention weights of a bag against one query: scores are
/// `(s_i ⊙ a) · p_t` for each row of the `[n, d]` sentence matrix.
pub fn attention_weights(
    g: &mut Graph,
    sentence_matrix: NodeId,
    query: NodeId,
    diag: NodeId,
) -> Result<NodeId, NumericsError> {
    let scaled_query = g.mul(diag, query)?;
    let scores = g.matvec(sentence_matrix, scaled_query)?;
    g.softmax(scores)
}

/// Weighted sum of sentence rows under `weights`; the bag representation.
pub fn bag_representation(
    g: &mut Graph,
    sentence_matrix: NodeId,
    weights: NodeId,
) -> Result<NodeId, NumericsError> {
    g.vecmat(weights, sentence_matrix)
}

/// A uniform 1/n weight node for a bag of `n` sentences.
pub fn uniform_weights(g: &mut Graph, n: usize) -> NodeId {
    g.constant(Tensor::vector(vec![1.0 / n as f64; n]))
}

/// The full attention table of a bag: one weight column and one `[d]`
/// representation per type, for all `N` types. Uniform mode shares a single
/// 1/n column. Label-aware training assembles its own per-type choice; this
/// is the whole-table view used for inspection and tests.
pub fn attend_all_types(
    g: &mut Graph,
    sentence_matrix: NodeId,
    attn: &AttentionNodes,
    hierarchy: &TypeHierarchy,
    mode: Mode,
) -> Result<(Vec<NodeId>, Vec<NodeId>), NumericsError> {
    let n = g.value(sentence_matrix).rows();
    let mut weight_cols = Vec::with_capacity(hierarchy.len());
    let mut reps = Vec::with_capacity(hierarchy.len());
    match mode {
        Mode::Uniform => {
            let w = uniform_weights(g, n);
            let rep = bag_representation(g, sentence_matrix, w)?;
            for _ in 0..hierarchy.len() {
                weight_cols.push(w);
                reps.push(rep);
            }
        }
        _ => {
            for t in 0..hierarchy.len() {
                let q = type_query(g, attn, hierarchy, t, mode)?;
                let w = attention_weights(g, sentence_matrix, q, attn.diag)?;
                let rep = bag_representation(g, sentence_matrix, w)?;
                weight_cols.push(w);
                reps.push(rep);
            }
        }
    }
    Ok((weight_cols, reps))
}

/// Attention weights of one bag for all types, read out of a graph: `n`
/// sentences by `N` types, each column a distribution over sentences.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionMatrix {
    n_sentences: usize,
    columns: Vec<Vec<f64>>,
}

impl AttentionMatrix {
    /// Copy the weight columns produced by [`attend_all_types`] out of the
    /// graph.
    pub fn from_graph(g: &Graph, weight_cols: &[NodeId]) -> Self {
        let columns: Vec<Vec<f64>> = weight_cols
            .iter()
            .map(|&c| g.value(c).data().to_vec())
            .collect();
        let n_sentences = columns.first().map_or(0, Vec::len);
        AttentionMatrix {
            n_sentences,
            columns,
        }
    }

    pub fn n_sentences(&self) -> usize {
        self.n_sentences
    }

    pub fn n_types(&self) -> usize {
        self.columns.len()
    }

    /// The weight distribution over sentences for type `t`.
    pub fn column(&self, t: TypeId) -> &[f64] {
        &self.columns[t]
    }

    pub fn weight(&self, sentence: usize, t: TypeId) -> f64 {
        self.columns[t][sentence]
    }
}
