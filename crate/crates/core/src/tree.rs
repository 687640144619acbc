use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::feature::{Side, SplitTest};
use crate::leaf::LeafModel;
use crate::scalar::Scalar;

pub type NodeId = usize;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node<T> {
    Split {
        test: SplitTest<T>,
        left: NodeId,
        right: NodeId,
    },
    Leaf(LeafModel<T>),
}

/// Arena-backed binary tree. Node 0 is the root and sits at level 0; a tree
/// with `max_levels = L` has leaves no deeper than level `L - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree<T> {
    pub(crate) nodes: Vec<Node<T>>,
    pub max_levels: usize,
    pub leaf_capacity: usize,
}

impl<T: Scalar> Tree<T> {
    pub fn single_leaf(model: LeafModel<T>, max_levels: usize, leaf_capacity: usize) -> Self {
        Tree {
            nodes: vec![Node::Leaf(model)],
            max_levels,
            leaf_capacity,
        }
    }

    /// Build from a raw arena; node 0 must be the root.
    pub fn from_nodes(nodes: Vec<Node<T>>, max_levels: usize, leaf_capacity: usize) -> Self {
        Tree {
            nodes,
            max_levels,
            leaf_capacity,
        }
    }

    pub fn root(&self) -> NodeId {
        0
    }

    pub fn node(&self, id: NodeId) -> &Node<T> {
        &self.nodes[id]
    }

    pub fn nodes(&self) -> &[Node<T>] {
        &self.nodes
    }

    pub fn is_leaf(&self, id: NodeId) -> bool {
        matches!(self.nodes[id], Node::Leaf(_))
    }

    pub fn leaf(&self, id: NodeId) -> &LeafModel<T> {
        match &self.nodes[id] {
            Node::Leaf(m) => m,
            Node::Split { .. } => panic!("node {id} is not a leaf"),
        }
    }

    /// Leaf reached by example `index` starting at node `from`.
    #[inline]
    pub fn route_from<D: Dataset<T> + ?Sized>(&self, from: NodeId, data: &D, index: usize) -> NodeId {
        let mut n = from;
        loop {
            match &self.nodes[n] {
                Node::Split { test, left, right } => {
                    n = match test.side_of(data.feature_value(index, &test.feature)) {
                        Side::Left => *left,
                        Side::Right => *right,
                    }
                }
                Node::Leaf(_) => return n,
            }
        }
    }

    #[inline]
    pub fn route<D: Dataset<T> + ?Sized>(&self, data: &D, index: usize) -> NodeId {
        self.route_from(0, data, index)
    }

    /// Node ids reachable from the root, in preorder (node, left, right).
    pub fn preorder(&self) -> Vec<NodeId> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![0];
        while let Some(n) = stack.pop() {
            out.push(n);
            if let Node::Split { left, right, .. } = &self.nodes[n] {
                stack.push(*right);
                stack.push(*left);
            }
        }
        out
    }

    /// Number of nodes on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        let mut best = 0;
        let mut stack = vec![(0usize, 1usize)];
        while let Some((n, d)) = stack.pop() {
            match &self.nodes[n] {
                Node::Split { left, right, .. } => {
                    stack.push((*left, d + 1));
                    stack.push((*right, d + 1));
                }
                Node::Leaf(_) => best = best.max(d),
            }
        }
        best
    }

    pub fn num_leaves(&self) -> usize {
        self.preorder().into_iter().filter(|&n| self.is_leaf(n)).count()
    }

    pub fn num_nodes(&self) -> usize {
        self.preorder().len()
    }

    pub(crate) fn set_test(&mut self, id: NodeId, new_test: SplitTest<T>) {
        match &mut self.nodes[id] {
            Node::Split { test, .. } => *test = new_test,
            Node::Leaf(_) => panic!("node {id} is not a split"),
        }
    }

    /// Replace whatever hangs at `id` by a leaf. Orphaned nodes stay in the
    /// arena until [`Tree::compact`].
    pub fn replace_with_leaf(&mut self, id: NodeId, model: LeafModel<T>) {
        self.nodes[id] = Node::Leaf(model);
    }

    /// Replace the node at `id` by the whole of `subtree`.
    pub fn graft(&mut self, id: NodeId, subtree: Tree<T>) {
        let base = self.nodes.len();
        let mut incoming = subtree.nodes.into_iter();
        let root = incoming.next().expect("subtree has a root");
        let shift = |n: NodeId| base + n - 1;
        let remap = |node: Node<T>| match node {
            Node::Split { test, left, right } => Node::Split {
                test,
                left: shift(left),
                right: shift(right),
            },
            leaf => leaf,
        };
        self.nodes.extend(incoming.map(remap));
        self.nodes[id] = remap(root);
    }

    /// Drop unreachable nodes and renumber the arena in preorder.
    pub fn compact(&mut self) {
        let order = self.preorder();
        let mut new_id = vec![usize::MAX; self.nodes.len()];
        for (k, &n) in order.iter().enumerate() {
            new_id[n] = k;
        }
        let nodes = order
            .iter()
            .map(|&n| match &self.nodes[n] {
                Node::Split { test, left, right } => Node::Split {
                    test: *test,
                    left: new_id[*left],
                    right: new_id[*right],
                },
                Node::Leaf(m) => Node::Leaf(m.clone()),
            })
            .collect();
        self.nodes = nodes;
    }
}
