//! The type hierarchy: a forest of slash-delimited type names.
//!
//! `/person/artist/singer` names a type, its parent `/person/artist`, and its
//! root `/person`. Mentioning a type anywhere creates its ancestors, so any
//! input order yields the same forest. Full path strings are the identity;
//! ids are assigned in order of first appearance.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use thiserror::Error;

/// Index of a type inside a [`TypeHierarchy`].
pub type TypeId = usize;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HierarchyError {
    #[error("malformed type path {path:?}: {reason}")]
    Malformed { path: String, reason: String },
    #[error("duplicate type path {path:?}")]
    Duplicate { path: String },
    #[error("unknown type {name:?}")]
    UnknownType { name: String },
    #[error("type hierarchy is empty")]
    Empty,
    #[error("cannot compose an empty path")]
    EmptyPath,
}

/// How a path of ancestor embeddings is folded into one query vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Composition {
    /// Elementwise sum of the embeddings along the path.
    Addition,
    /// Elementwise product of the embeddings along the path.
    Multiplication,
}

#[derive(Debug, Clone)]
pub struct TypeHierarchy {
    names: Vec<String>,
    parent: Vec<Option<TypeId>>,
    depth: Vec<usize>,
    index: BTreeMap<String, TypeId>,
}

impl TypeHierarchy {
    /// Parse one type path per line. Blank lines and `#` comments are
    /// skipped. Ancestors are created on first mention; repeating a path that
    /// was already given as its own line is an error.
    pub fn parse(lines: impl IntoIterator<Item = impl AsRef<str>>) -> Result<Self, HierarchyError> {
        let mut h = TypeHierarchy {
            names: Vec::new(),
            parent: Vec::new(),
            depth: Vec::new(),
            index: BTreeMap::new(),
        };
        let mut declared: BTreeSet<String> = BTreeSet::new();
        for line in lines {
            let line = line.as_ref().trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if !declared.insert(line.to_string()) {
                return Err(HierarchyError::Duplicate {
                    path: line.to_string(),
                });
            }
            h.insert_path(line)?;
        }
        if h.names.is_empty() {
            return Err(HierarchyError::Empty);
        }
        Ok(h)
    }

    fn insert_path(&mut self, path: &str) -> Result<TypeId, HierarchyError> {
        let malformed = |reason: &str| HierarchyError::Malformed {
            path: path.to_string(),
            reason: reason.to_string(),
        };
        let rest = path
            .strip_prefix('/')
            .ok_or_else(|| malformed("must start with '/'"))?;
        if rest.is_empty() {
            return Err(malformed("has no segments"));
        }
        let mut prefix = String::new();
        let mut parent: Option<TypeId> = None;
        let mut id = 0;
        for segment in rest.split('/') {
            if segment.is_empty() {
                return Err(malformed("has an empty segment"));
            }
            prefix.push('/');
            prefix.push_str(segment);
            id = match self.index.get(&prefix) {
                Some(&existing) => existing,
                None => {
                    let new_id = self.names.len();
                    self.names.push(prefix.clone());
                    self.parent.push(parent);
                    self.depth.push(parent.map_or(1, |p| self.depth[p] + 1));
                    self.index.insert(prefix.clone(), new_id);
                    new_id
                }
            };
            parent = Some(id);
        }
        Ok(id)
    }

    /// Number of types, ancestors included.
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Full path name of a type.
    pub fn name(&self, t: TypeId) -> &str {
        &self.names[t]
    }

    /// Id for a full path name.
    pub fn id(&self, name: &str) -> Option<TypeId> {
        self.index.get(name).copied()
    }

    /// Id for a full path name, or an [`HierarchyError::UnknownType`].
    pub fn require(&self, name: &str) -> Result<TypeId, HierarchyError> {
        self.id(name).ok_or_else(|| HierarchyError::UnknownType {
            name: name.to_string(),
        })
    }

    pub fn parent(&self, t: TypeId) -> Option<TypeId> {
        self.parent[t]
    }

    /// Depth in the forest; roots have depth 1.
    pub fn depth(&self, t: TypeId) -> usize {
        self.depth[t]
    }

    pub fn max_depth(&self) -> usize {
        self.depth.iter().copied().max().unwrap_or(0)
    }

    pub fn is_root(&self, t: TypeId) -> bool {
        self.parent[t].is_none()
    }

    pub fn is_leaf(&self, t: TypeId) -> bool {
        !self.parent.iter().any(|&p| p == Some(t))
    }

    pub fn roots(&self) -> impl Iterator<Item = TypeId> + '_ {
        (0..self.len()).filter(|&t| self.is_root(t))
    }

    pub fn leaves(&self) -> impl Iterator<Item = TypeId> + '_ {
        let mut has_child = alloc::vec![false; self.len()];
        for &p in self.parent.iter().flatten() {
            has_child[p] = true;
        }
        (0..self.len()).filter(move |&t| !has_child[t])
    }

    /// Root-first path of ancestors ending at `t`; length equals `depth(t)`.
    pub fn path_of(&self, t: TypeId) -> Vec<TypeId> {
        let mut path = Vec::with_capacity(self.depth[t]);
        let mut cur = Some(t);
        while let Some(id) = cur {
            path.push(id);
            cur = self.parent[id];
        }
        path.reverse();
        path
    }

    /// Close a label set upward: every ancestor of a member is a member.
    /// Idempotent and monotone.
    pub fn close_upward(&self, labels: &BTreeSet<TypeId>) -> BTreeSet<TypeId> {
        let mut closed = BTreeSet::new();
        for &t in labels {
            let mut cur = Some(t);
            while let Some(id) = cur {
                if !closed.insert(id) {
                    break;
                }
                cur = self.parent[id];
            }
        }
        closed
    }

    /// Canonical one-path-per-line rendering, in id order. Two hierarchies
    /// with the same canonical text are interchangeable for a trained model.
    pub fn canonical_text(&self) -> String {
        let mut out = String::new();
        for name in &self.names {
            out.push_str(name);
            out.push('\n');
        }
        out
    }
}

/// Fold the embeddings of a root-first type path into one query vector.
/// `type_vectors` holds one row per type. Works on plain values; the graph
/// route in the attention module mirrors it and is tested against it.
pub fn compose_path(
    path: &[TypeId],
    type_vectors: &crate::numerics::Tensor,
    op: Composition,
) -> Result<Vec<f64>, HierarchyError> {
    if path.is_empty() {
        return Err(HierarchyError::EmptyPath);
    }
    let d = type_vectors.cols();
    let mut acc = type_vectors.row(path[0]).to_vec();
    for &t in &path[1..] {
        let row = type_vectors.row(t);
        for j in 0..d {
            match op {
                Composition::Addition => acc[j] += row[j],
                Composition::Multiplication => acc[j] *= row[j],
            }
        }
    }
    Ok(acc)
}
