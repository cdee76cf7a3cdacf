//! Independent per-type logistic classifiers over bag representations, the
//! multi-label cross-entropy they induce, and the thresholded decision rule.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use crate::hierarchy::TypeId;
use crate::mathx;
use crate::numerics::{Graph, NodeId, NumericsError, Tensor};

/// Probabilities are clamped into `[PROB_FLOOR, 1 - PROB_FLOOR]` inside the
/// loss so a saturated sigmoid can never produce an infinite log term.
pub const PROB_FLOOR: f64 = 1e-12;

/// Per-type weight vectors `[N, d]` and scalar biases `[N]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierParams {
    pub weights: Tensor,
    pub bias: Tensor,
}

impl ClassifierParams {
    pub fn n_types(&self) -> usize {
        self.weights.rows()
    }
}

/// Tape positions of the classifier parameters inside one bag graph.
#[derive(Debug, Clone, Copy)]
pub struct ClassifierNodes {
    pub weights: NodeId,
    pub bias: NodeId,
}

/// `P(t | rep) = σ(w_t · rep + b_t)`, clamped away from 0 and 1. Plain-value
/// twin of the graph route; the two are tested against each other.
pub fn type_probability(w_t: &[f64], b_t: f64, rep: &[f64]) -> f64 {
    let logit: f64 = w_t.iter().zip(rep).map(|(a, b)| a * b).sum::<f64>() + b_t;
    clamp_probability(mathx::sigmoid(logit))
}

pub fn clamp_probability(p: f64) -> f64 {
    // Comparisons ordered so NaN falls through unchanged rather than being
    // silently clamped into range.
    let hi = 1.0 - PROB_FLOOR;
    if p < PROB_FLOOR {
        PROB_FLOOR
    } else if p > hi {
        hi
    } else {
        p
    }
}

/// Logit node `w_t · rep + b_t` for one type.
pub fn type_logit(
    g: &mut Graph,
    cls: &ClassifierNodes,
    t: TypeId,
    rep: NodeId,
) -> Result<NodeId, NumericsError> {
    let w_t = g.row(cls.weights, t)?;
    let wx = g.dot(w_t, rep)?;
    let b_t = g.element(cls.bias, t)?;
    g.add(wx, b_t)
}

/// Probability node for one type's logit.
pub fn type_probability_node(g: &mut Graph, logit: NodeId) -> Result<NodeId, NumericsError> {
    g.sigmoid(logit)
}

/// Multi-label cross-entropy over all `N` types of one entity:
/// `J = −Σ_t [ I_t ln p_t + (1−I_t) ln(1−p_t) ]` with clamped logs.
/// `probs[t]` must be a scalar probability node for type `t`.
pub fn multi_type_loss_node(
    g: &mut Graph,
    probs: &[NodeId],
    labels: &BTreeSet<TypeId>,
) -> Result<NodeId, NumericsError> {
    let one = g.constant(Tensor::scalar(1.0));
    let mut acc: Option<NodeId> = None;
    for (t, &p) in probs.iter().enumerate() {
        let term = if labels.contains(&t) {
            g.log_clamped(p, PROB_FLOOR)?
        } else {
            let q = g.sub(one, p)?;
            g.log_clamped(q, PROB_FLOOR)?
        };
        acc = Some(match acc {
            None => term,
            Some(a) => g.add(a, term)?,
        });
    }
    let total = acc.expect("at least one type");
    let minus_one = g.constant(Tensor::scalar(-1.0));
    g.mul(minus_one, total)
}

/// Plain-value twin of [`multi_type_loss_node`].
pub fn multi_type_loss(probs: &[f64], labels: &BTreeSet<TypeId>) -> f64 {
    let mut total = 0.0;
    for (t, &p) in probs.iter().enumerate() {
        let x = if labels.contains(&t) { p } else { 1.0 - p };
        total += if x < PROB_FLOOR {
            mathx::ln(PROB_FLOOR)
        } else {
            mathx::ln(x)
        };
    }
    -total
}

/// Thresholded decision rule: every type with probability above 1/2; if none
/// clears the threshold, the single most probable type, ties broken toward
/// the smaller id. Never empty.
pub fn predict_types(probs: &[f64]) -> BTreeSet<TypeId> {
    let mut picked: BTreeSet<TypeId> = (0..probs.len()).filter(|&t| probs[t] > 0.5).collect();
    if picked.is_empty() {
        let mut best = 0;
        for (t, &p) in probs.iter().enumerate() {
            if p > probs[best] {
                best = t;
            }
        }
        picked.insert(best);
    }
    picked
}

/// Probabilities for every type given one representation, outside any graph.
pub fn all_type_probabilities(cls: &ClassifierParams, rep: &[f64]) -> Vec<f64> {
    (0..cls.n_types())
        .map(|t| type_probability(cls.weights.row(t), cls.bias.data()[t], rep))
        .collect()
}
