//! Finite-difference verification of the reverse pass over the full model.
//!
//! One backward pass supplies the analytic gradients; every probed
//! coordinate is then nudged by ±eps and the loss rebuilt from scratch, so
//! the check exercises the same graph construction as training. Relative
//! error uses `|a − n| / max(1, |a| + |n|)`, which stays meaningful when a
//! gradient is legitimately zero.

use alloc::vec::Vec;

use thiserror::Error;

use crate::attention::Mode;
use crate::data::{DataError, SentenceBag};
use crate::hierarchy::TypeHierarchy;
use crate::model::{bind, forward_bag, ModelParams, ParamGroup};
use crate::numerics::graph::{Graph, NumericsError};
use crate::numerics::tensor::Tensor;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GradCheckError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("loss not finite while probing {group} coordinate {index}")]
    NonFiniteProbe { group: &'static str, index: usize },
    #[error("loss not finite at the unperturbed parameters")]
    NonFiniteBase,
}

/// Worst coordinate found in one parameter group.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupReport {
    pub group: ParamGroup,
    /// Coordinates probed across all tensors of the group.
    pub checked: usize,
    pub worst_rel_err: f64,
    /// Analytic and centered-difference values at the worst coordinate.
    pub worst_analytic: f64,
    pub worst_numeric: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub groups: Vec<GroupReport>,
    pub eps: f64,
    pub tol: f64,
    pub pass: bool,
}

impl GradCheckReport {
    /// Largest relative error over every probed coordinate.
    pub fn worst(&self) -> f64 {
        let mut w = 0.0;
        for g in &self.groups {
            if g.worst_rel_err > w {
                w = g.worst_rel_err;
            }
        }
        w
    }
}

fn loss_of(
    params: &ModelParams,
    hierarchy: &TypeHierarchy,
    mode: Mode,
    bag: &SentenceBag,
) -> Result<f64, NumericsError> {
    let mut g = Graph::new();
    let bound = bind(&mut g, params);
    let fwd = forward_bag(&mut g, &bound, hierarchy, mode, bag)?;
    Ok(g.value(fwd.loss).item())
}

/// Probe every coordinate when the model is small; stride through large
/// tensors so the check stays tractable.
const FULL_PROBE_LIMIT: usize = 10_000;
const SAMPLES_PER_TENSOR: usize = 25;

fn probe_indices(tensor_len: usize, full: bool) -> impl Iterator<Item = usize> {
    let stride = if full {
        1
    } else {
        let s = tensor_len / SAMPLES_PER_TENSOR;
        if s == 0 {
            1
        } else {
            s
        }
    };
    (0..tensor_len).step_by(stride)
}

fn rel_err(a: f64, n: f64) -> f64 {
    let denom = crate::mathx::max(1.0, crate::mathx::abs(a) + crate::mathx::abs(n));
    crate::mathx::abs(a - n) / denom
}

/// Compare the reverse-pass gradient of the bag loss against centered
/// finite differences, coordinate by coordinate, grouped by parameter.
pub fn grad_check(
    params: &ModelParams,
    hierarchy: &TypeHierarchy,
    mode: Mode,
    bag: &SentenceBag,
    eps: f64,
    tol: f64,
) -> Result<GradCheckReport, GradCheckError> {
    bag.validate(hierarchy)?;
    if !loss_of(params, hierarchy, mode, bag)?.is_finite() {
        return Err(GradCheckError::NonFiniteBase);
    }

    // Analytic gradients, one tensor per bound parameter in canonical order.
    let mut g = Graph::new();
    let bound = bind(&mut g, params);
    let fwd = forward_bag(&mut g, &bound, hierarchy, mode, bag)?;
    g.backward(fwd.loss)?;
    let analytic: Vec<(ParamGroup, Tensor)> = bound
        .bound()
        .iter()
        .map(|&(group, node)| {
            let grad = g
                .grad(node)
                .cloned()
                .unwrap_or_else(|| Tensor::zeros_like(g.value(node)));
            (group, grad)
        })
        .collect();

    let full = params.param_count() <= FULL_PROBE_LIMIT;
    let mut work = params.clone();
    let mut groups: Vec<GroupReport> = Vec::new();
    for (k, (group, grad)) in analytic.iter().enumerate() {
        let len = grad.len();
        let mut checked = 0;
        let mut worst = (0.0, 0.0, 0.0); // (rel, analytic, numeric)
        for j in probe_indices(len, full) {
            let orig = {
                let tensors = work.tensors();
                tensors[k].1.data()[j]
            };
            let mut probe = |x: f64| -> Result<f64, GradCheckError> {
                work.tensors_mut()[k].1.data_mut()[j] = x;
                let v = loss_of(&work, hierarchy, mode, bag)?;
                if !v.is_finite() {
                    return Err(GradCheckError::NonFiniteProbe {
                        group: group.name(),
                        index: j,
                    });
                }
                Ok(v)
            };
            let plus = probe(orig + eps)?;
            let minus = probe(orig - eps)?;
            work.tensors_mut()[k].1.data_mut()[j] = orig;
            let numeric = (plus - minus) / (2.0 * eps);
            let a = grad.data()[j];
            let r = rel_err(a, numeric);
            checked += 1;
            if r > worst.0 {
                worst = (r, a, numeric);
            }
        }
        match groups.iter_mut().find(|gr| gr.group == *group) {
            Some(gr) => {
                gr.checked += checked;
                if worst.0 > gr.worst_rel_err {
                    gr.worst_rel_err = worst.0;
                    gr.worst_analytic = worst.1;
                    gr.worst_numeric = worst.2;
                }
            }
            None => groups.push(GroupReport {
                group: *group,
                checked,
                worst_rel_err: worst.0,
                worst_analytic: worst.1,
                worst_numeric: worst.2,
                pass: true,
            }),
        }
    }
    for gr in &mut groups {
        gr.pass = gr.worst_rel_err <= tol;
    }
    let pass = groups.iter().all(|gr| gr.pass);
    Ok(GradCheckReport {
        groups,
        eps,
        tol,
        pass,
    })
}
