//! Every learned tensor of the model, deterministic initialization, and the
//! per-bag forward graph shared by training, evaluation, and gradient
//! checking.
//!
//! Positive (labeled) types attend over the bag with their composed path
//! query and are scored on their own attended representation. Unlabeled
//! types are scored against *every* labeled representation and must be
//! rejected on each (their loss terms are averaged across those views), so
//! no representation exists whose only role is absorbing rejections — the
//! classifier has to separate types by content. A type embedding therefore
//! influences the loss exactly through the labeled paths it sits on, while
//! the loss itself still covers all `N` types.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::attention::{
    attention_weights, bag_representation, type_query, uniform_weights, AttentionNodes,
    AttentionParams, Mode,
};
use crate::classifier::{
    multi_type_loss_node, type_logit, type_probability_node, ClassifierNodes, ClassifierParams,
    PROB_FLOOR,
};
use crate::data::SentenceBag;
use crate::encoder::{
    encode_bag, EncoderKind, EncoderNodes, EncoderParams, LstmCellNodes, LstmCellParams,
};
use crate::hierarchy::TypeHierarchy;
use crate::numerics::{Graph, NodeId, NumericsError, Tensor};

/// Uniform init half-width for every drawn weight.
pub const INIT_SCALE: f64 = 0.1;

/// Additive-path and plain attention queries are sums of up to path-depth
/// type embeddings, so their initial norms grow with path length; damping
/// the initial draw keeps early attention close to uniform, which
/// stabilizes training across seeds. The multiplicative mode is centered
/// at one instead and is left untouched.
pub const TYPE_EMBED_DAMP: f64 = 0.3;

/// Embedding/hidden/representation widths.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Dims {
    /// Word embedding width.
    pub d_w: usize,
    /// LSTM hidden width per direction.
    pub d_h: usize,
    /// Sentence/type representation width.
    pub d: usize,
}

impl Default for Dims {
    fn default() -> Self {
        Dims {
            d_w: 16,
            d_h: 16,
            d: 16,
        }
    }
}

/// Names for the disjoint groups of learned tensors; the unit reported by
/// the gradient checker and the optimizer's bookkeeping.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamGroup {
    Embeddings,
    LstmGates,
    Projection,
    AttentionDiag,
    TypeEmbeddings,
    ClassifierWeights,
    ClassifierBias,
}

impl ParamGroup {
    pub fn name(&self) -> &'static str {
        match self {
            ParamGroup::Embeddings => "embeddings",
            ParamGroup::LstmGates => "lstm-gates",
            ParamGroup::Projection => "projection",
            ParamGroup::AttentionDiag => "attention-diag",
            ParamGroup::TypeEmbeddings => "type-embeddings",
            ParamGroup::ClassifierWeights => "classifier-weights",
            ParamGroup::ClassifierBias => "classifier-bias",
        }
    }
}

/// The complete set of learned parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub encoder: EncoderParams,
    pub attention: AttentionParams,
    pub classifier: ClassifierParams,
}

fn draw(rng: &mut ChaCha12Rng, shape: &[usize]) -> Tensor {
    let n: usize = shape.iter().product();
    Tensor::new(
        shape.to_vec(),
        (0..n)
            .map(|_| rng.random_range(-INIT_SCALE..INIT_SCALE))
            .collect(),
    )
}

fn draw_cell(rng: &mut ChaCha12Rng, d_w: usize, d_h: usize) -> LstmCellParams {
    LstmCellParams {
        w_i: draw(rng, &[d_h, d_w + d_h]),
        w_f: draw(rng, &[d_h, d_w + d_h]),
        w_o: draw(rng, &[d_h, d_w + d_h]),
        w_g: draw(rng, &[d_h, d_w + d_h]),
        b_i: Tensor::zeros(&[d_h]),
        b_f: Tensor::zeros(&[d_h]),
        b_o: Tensor::zeros(&[d_h]),
        b_g: Tensor::zeros(&[d_h]),
    }
}

impl ModelParams {
    /// Deterministic initialization. The draw order is fixed, so two modes
    /// with the same seed share every tensor they have in common; the
    /// multiplicative path mode re-centers its type embeddings at one so
    /// fresh products start near the identity instead of collapsing to zero.
    pub fn init(
        seed: u64,
        vocab_size: usize,
        n_types: usize,
        dims: Dims,
        kind: EncoderKind,
        mode: Mode,
    ) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let embeddings = draw(&mut rng, &[vocab_size, dims.d_w]);
        let (lstm, feature_dim) = match kind {
            EncoderKind::Lstm => {
                let fwd = draw_cell(&mut rng, dims.d_w, dims.d_h);
                let bwd = draw_cell(&mut rng, dims.d_w, dims.d_h);
                (Some((fwd, bwd)), 2 * dims.d_h + dims.d_w)
            }
            EncoderKind::MeanPool => (None, dims.d_w),
        };
        let projection = draw(&mut rng, &[dims.d, feature_dim]);
        let mut diag = draw(&mut rng, &[dims.d]);
        for v in diag.data_mut() {
            *v += 1.0;
        }
        let mut type_embeddings = draw(&mut rng, &[n_types, dims.d]);
        if mode == Mode::PanM {
            for v in type_embeddings.data_mut() {
                *v += 1.0;
            }
        } else {
            for v in type_embeddings.data_mut() {
                *v *= TYPE_EMBED_DAMP;
            }
        }
        let cls_weights = draw(&mut rng, &[n_types, dims.d]);
        let cls_bias = Tensor::zeros(&[n_types]);
        ModelParams {
            encoder: EncoderParams {
                embeddings,
                lstm,
                projection,
            },
            attention: AttentionParams {
                diag,
                type_embeddings,
            },
            classifier: ClassifierParams {
                weights: cls_weights,
                bias: cls_bias,
            },
        }
    }

    pub fn encoder_kind(&self) -> EncoderKind {
        self.encoder.kind()
    }

    pub fn vocab_size(&self) -> usize {
        self.encoder.vocab_size()
    }

    pub fn n_types(&self) -> usize {
        self.classifier.n_types()
    }

    pub fn dims(&self) -> Dims {
        Dims {
            d_w: self.encoder.word_dim(),
            d_h: self.encoder.hidden_dim().unwrap_or(0),
            d: self.encoder.out_dim(),
        }
    }

    /// Every learned tensor in one fixed canonical order. This order is the
    /// contract between optimizer state, gradient reports, and the model
    /// file; it must never depend on mode or contents.
    pub fn tensors(&self) -> Vec<(ParamGroup, &Tensor)> {
        let mut out = Vec::new();
        out.push((ParamGroup::Embeddings, &self.encoder.embeddings));
        if let Some((fwd, bwd)) = &self.encoder.lstm {
            for cell in [fwd, bwd] {
                out.push((ParamGroup::LstmGates, &cell.w_i));
                out.push((ParamGroup::LstmGates, &cell.w_f));
                out.push((ParamGroup::LstmGates, &cell.w_o));
                out.push((ParamGroup::LstmGates, &cell.w_g));
                out.push((ParamGroup::LstmGates, &cell.b_i));
                out.push((ParamGroup::LstmGates, &cell.b_f));
                out.push((ParamGroup::LstmGates, &cell.b_o));
                out.push((ParamGroup::LstmGates, &cell.b_g));
            }
        }
        out.push((ParamGroup::Projection, &self.encoder.projection));
        out.push((ParamGroup::AttentionDiag, &self.attention.diag));
        out.push((ParamGroup::TypeEmbeddings, &self.attention.type_embeddings));
        out.push((ParamGroup::ClassifierWeights, &self.classifier.weights));
        out.push((ParamGroup::ClassifierBias, &self.classifier.bias));
        out
    }

    /// Mutable view in the same canonical order as [`ModelParams::tensors`].
    pub fn tensors_mut(&mut self) -> Vec<(ParamGroup, &mut Tensor)> {
        let mut out: Vec<(ParamGroup, &mut Tensor)> = Vec::new();
        out.push((ParamGroup::Embeddings, &mut self.encoder.embeddings));
        if let Some((fwd, bwd)) = &mut self.encoder.lstm {
            for cell in [fwd, bwd] {
                out.push((ParamGroup::LstmGates, &mut cell.w_i));
                out.push((ParamGroup::LstmGates, &mut cell.w_f));
                out.push((ParamGroup::LstmGates, &mut cell.w_o));
                out.push((ParamGroup::LstmGates, &mut cell.w_g));
                out.push((ParamGroup::LstmGates, &mut cell.b_i));
                out.push((ParamGroup::LstmGates, &mut cell.b_f));
                out.push((ParamGroup::LstmGates, &mut cell.b_o));
                out.push((ParamGroup::LstmGates, &mut cell.b_g));
            }
        }
        out.push((ParamGroup::Projection, &mut self.encoder.projection));
        out.push((ParamGroup::AttentionDiag, &mut self.attention.diag));
        out.push((
            ParamGroup::TypeEmbeddings,
            &mut self.attention.type_embeddings,
        ));
        out.push((ParamGroup::ClassifierWeights, &mut self.classifier.weights));
        out.push((ParamGroup::ClassifierBias, &mut self.classifier.bias));
        out
    }

    /// Total scalar parameter count.
    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|(_, t)| t.all_finite())
    }
}

/// Tape positions of all parameters inside one bag graph, in the same
/// canonical order as [`ModelParams::tensors`].
#[derive(Debug, Clone)]
pub struct BoundModel {
    pub encoder: EncoderNodes,
    pub attention: AttentionNodes,
    pub classifier: ClassifierNodes,
    bound: Vec<(ParamGroup, NodeId)>,
}

impl BoundModel {
    /// `(group, node)` for every parameter tensor, in canonical order.
    pub fn bound(&self) -> &[(ParamGroup, NodeId)] {
        &self.bound
    }
}

fn bind_cell(g: &mut Graph, cell: &LstmCellParams, bound: &mut Vec<(ParamGroup, NodeId)>) -> LstmCellNodes {
    let nodes = LstmCellNodes {
        w_i: g.leaf(cell.w_i.clone()),
        w_f: g.leaf(cell.w_f.clone()),
        w_o: g.leaf(cell.w_o.clone()),
        w_g: g.leaf(cell.w_g.clone()),
        b_i: g.leaf(cell.b_i.clone()),
        b_f: g.leaf(cell.b_f.clone()),
        b_o: g.leaf(cell.b_o.clone()),
        b_g: g.leaf(cell.b_g.clone()),
    };
    for id in [
        nodes.w_i, nodes.w_f, nodes.w_o, nodes.w_g, nodes.b_i, nodes.b_f, nodes.b_o, nodes.b_g,
    ] {
        bound.push((ParamGroup::LstmGates, id));
    }
    nodes
}

/// Insert every parameter tensor as a leaf of `g`.
pub fn bind(g: &mut Graph, params: &ModelParams) -> BoundModel {
    let mut bound = Vec::new();
    let embeddings = g.leaf(params.encoder.embeddings.clone());
    bound.push((ParamGroup::Embeddings, embeddings));
    let lstm = params
        .encoder
        .lstm
        .as_ref()
        .map(|(f, b)| (bind_cell(g, f, &mut bound), bind_cell(g, b, &mut bound)));
    let projection = g.leaf(params.encoder.projection.clone());
    bound.push((ParamGroup::Projection, projection));
    let diag = g.leaf(params.attention.diag.clone());
    bound.push((ParamGroup::AttentionDiag, diag));
    let type_embeddings = g.leaf(params.attention.type_embeddings.clone());
    bound.push((ParamGroup::TypeEmbeddings, type_embeddings));
    let weights = g.leaf(params.classifier.weights.clone());
    bound.push((ParamGroup::ClassifierWeights, weights));
    let bias = g.leaf(params.classifier.bias.clone());
    bound.push((ParamGroup::ClassifierBias, bias));
    BoundModel {
        encoder: EncoderNodes {
            embeddings,
            lstm,
            projection,
        },
        attention: AttentionNodes {
            diag,
            type_embeddings,
        },
        classifier: ClassifierNodes { weights, bias },
    bound,
    }
}

/// Handles into one bag's forward graph.
#[derive(Debug, Clone)]
pub struct BagForward {
    /// Scalar loss node.
    pub loss: NodeId,
    /// One probability node per type. For an unlabeled type under an
    /// attention mode this is the mean of its per-view probabilities.
    pub probs: Vec<NodeId>,
    /// The representation each labeled type was scored on, plus the shared
    /// view used when the label set is empty, `(type, node)`.
    pub reps: Vec<(usize, NodeId)>,
    /// Attention weight columns for the labeled types, `(type, node)`.
    pub label_weights: Vec<(usize, NodeId)>,
}

/// Build the complete forward graph of one bag: encode sentences, attend per
/// labeled type, score all types, and sum the multi-label cross-entropy.
///
/// Labeled types are scored on their own attended representation. Every
/// unlabeled type is scored against each of those same representations and
/// must be rejected on all of them (its loss terms are averaged over the
/// views), which keeps its own embedding out of the graph entirely and
/// leaves the optimizer no representation that only ever absorbs rejections.
/// The uniform ablation averages the sentences outright and scores all types
/// on that single mean; an empty label set falls back to the same mean view.
pub fn forward_bag(
    g: &mut Graph,
    bound: &BoundModel,
    hierarchy: &TypeHierarchy,
    mode: Mode,
    bag: &SentenceBag,
) -> Result<BagForward, NumericsError> {
    let n_types = hierarchy.len();
    let sentence_matrix = encode_bag(g, &bound.encoder, &bag.sentences)?;
    let n = bag.sentences.len();

    if mode == Mode::Uniform || bag.labels.is_empty() {
        let w = uniform_weights(g, n);
        let mean_rep = bag_representation(g, sentence_matrix, w)?;
        let mut probs = Vec::with_capacity(n_types);
        for t in 0..n_types {
            let z = type_logit(g, &bound.classifier, t, mean_rep)?;
            probs.push(type_probability_node(g, z)?);
        }
        let loss = multi_type_loss_node(g, &probs, &bag.labels)?;
        return Ok(BagForward {
            loss,
            probs,
            reps: vec![(usize::MAX, mean_rep)],
            label_weights: Vec::new(),
        });
    }

    let mut label_weights = Vec::with_capacity(bag.labels.len());
    let mut views: Vec<(usize, NodeId)> = Vec::with_capacity(bag.labels.len());
    for &t in &bag.labels {
        let q = type_query(g, &bound.attention, hierarchy, t, mode)?;
        let w = attention_weights(g, sentence_matrix, q, bound.attention.diag)?;
        label_weights.push((t, w));
        views.push((t, bag_representation(g, sentence_matrix, w)?));
    }
    let labeled_rep: BTreeMap<usize, NodeId> = views.iter().copied().collect();
    let inv_views = g.constant(Tensor::scalar(1.0 / views.len() as f64));

    let mut probs = Vec::with_capacity(n_types);
    let mut neg_log_terms: Vec<NodeId> = Vec::with_capacity(n_types);
    for t in 0..n_types {
        if let Some(&rep) = labeled_rep.get(&t) {
            let z = type_logit(g, &bound.classifier, t, rep)?;
            let p = type_probability_node(g, z)?;
            neg_log_terms.push(g.log_clamped(p, PROB_FLOOR)?);
            probs.push(p);
        } else {
            let one = g.constant(Tensor::scalar(1.0));
            let mut log_sum: Option<NodeId> = None;
            let mut prob_sum: Option<NodeId> = None;
            for &(_, rep) in &views {
                let z = type_logit(g, &bound.classifier, t, rep)?;
                let p = type_probability_node(g, z)?;
                let q = g.sub(one, p)?;
                let lq = g.log_clamped(q, PROB_FLOOR)?;
                log_sum = Some(match log_sum {
                    None => lq,
                    Some(a) => g.add(a, lq)?,
                });
                prob_sum = Some(match prob_sum {
                    None => p,
                    Some(a) => g.add(a, p)?,
                });
            }
            let mean_log = g.mul(log_sum.expect("views non-empty"), inv_views)?;
            neg_log_terms.push(mean_log);
            probs.push(g.mul(prob_sum.expect("views non-empty"), inv_views)?);
        }
    }
    let mut total = neg_log_terms[0];
    for &term in &neg_log_terms[1..] {
        total = g.add(total, term)?;
    }
    let minus_one = g.constant(Tensor::scalar(-1.0));
    let loss = g.mul(minus_one, total)?;
    Ok(BagForward {
        loss,
        probs,
        reps: views,
        label_weights,
    })
}
