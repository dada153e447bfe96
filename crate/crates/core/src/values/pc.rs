use std::fmt;
use std::sync::Arc;

use super::SymExpr;

/// The conjunction of branch constraints along one path.
///
/// A persistent list: cloning is O(1), and a child path's condition shares
/// its parent's conjuncts.
#[derive(Clone, Default)]
pub struct PathCondition(Option<Arc<PcNode>>);

struct PcNode {
    conjunct: SymExpr,
    parent: PathCondition,
    len: usize,
}

impl Drop for PcNode {
    fn drop(&mut self) {
        let mut next = self.parent.0.take();
        while let Some(node) = next {
            match Arc::try_unwrap(node) {
                Ok(mut owned) => next = owned.parent.0.take(),
                Err(_) => break,
            }
        }
    }
}

impl PathCondition {
    pub fn new() -> PathCondition {
        PathCondition(None)
    }

    pub fn len(&self) -> usize {
        self.0.as_ref().map_or(0, |n| n.len)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_none()
    }

    pub fn push(&mut self, conjunct: SymExpr) {
        let len = self.len() + 1;
        let parent = std::mem::take(self);
        *self = PathCondition(Some(Arc::new(PcNode { conjunct, parent, len })));
    }

    pub fn with(&self, conjunct: SymExpr) -> PathCondition {
        let mut pc = self.clone();
        pc.push(conjunct);
        pc
    }

    /// Conjuncts, oldest first.
    pub fn to_vec(&self) -> Vec<SymExpr> {
        let mut out = Vec::with_capacity(self.len());
        let mut cur = &self.0;
        while let Some(node) = cur {
            out.push(node.conjunct.clone());
            cur = &node.parent.0;
        }
        out.reverse();
        out
    }

    pub fn last(&self) -> Option<&SymExpr> {
        self.0.as_ref().map(|n| &n.conjunct)
    }

    /// True when `self`'s conjunct sequence is a prefix of `other`'s.
    pub fn is_prefix_of(&self, other: &PathCondition) -> bool {
        let mut cur = other.clone();
        while cur.len() > self.len() {
            cur = cur.0.as_ref().unwrap().parent.clone();
        }
        match (&self.0, &cur.0) {
            (None, None) => true,
            (Some(a), Some(b)) => Arc::ptr_eq(a, b) || self.to_vec() == cur.to_vec(),
            _ => false,
        }
    }
}

impl fmt::Debug for PathCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.to_vec()).finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::values::ValueType;

    #[test]
    fn children_extend_parent() {
        let mut parent = PathCondition::new();
        parent.push(SymExpr::symbol(0, ValueType::I32));
        let child = parent.with(SymExpr::symbol(1, ValueType::I32));
        assert_eq!(child.len(), 2);
        assert!(parent.is_prefix_of(&child));
        assert!(!child.is_prefix_of(&parent));
        assert_eq!(child.to_vec()[0], SymExpr::symbol(0, ValueType::I32));
    }

    #[test]
    fn long_conditions_drop_iteratively() {
        let mut pc = PathCondition::new();
        for i in 0..300_000 {
            pc.push(SymExpr::i32(i));
        }
        assert_eq!(pc.len(), 300_000);
    }
}
