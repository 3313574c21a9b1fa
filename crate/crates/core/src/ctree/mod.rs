//! Computation trees: every point an SGD-like method computes, linked by the
//! gradient step that produced it. Only metadata is stored, never iterates.

mod io;
mod validate;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use validate::{
    birch_iteration_bound, minimal_admissible_r, validate_conditions, ConditionReport, Violation,
};

pub type NodeId = u64;

/// One node together with the edge that created it (absent for the root).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub node_id: NodeId,
    pub parent_id: Option<NodeId>,
    /// Node at which the stochastic gradient of the incoming edge was taken.
    pub grad_node_id: Option<NodeId>,
    pub rng_draw_id: Option<u64>,
    pub step_size: f64,
    pub on_main_branch: bool,
    pub main_branch_index: Option<u64>,
}

/// Element of a representation multiset: (gradient point, draw).
pub type GradRef = (NodeId, u64);

#[derive(Clone, Debug, PartialEq)]
pub struct ComputationTree {
    nodes: Vec<TreeNode>,
    depth: Vec<u64>,
    main: Vec<NodeId>,
}

impl Default for ComputationTree {
    fn default() -> Self {
        Self::new()
    }
}

impl ComputationTree {
    /// A tree holding only the root w⁰, which is also x⁰.
    pub fn new() -> Self {
        Self {
            nodes: vec![TreeNode {
                node_id: 0,
                parent_id: None,
                grad_node_id: None,
                rng_draw_id: None,
                step_size: 0.0,
                on_main_branch: true,
                main_branch_index: Some(0),
            }],
            depth: vec![0],
            main: vec![0],
        }
    }

    pub const ROOT: NodeId = 0;

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> Result<&TreeNode> {
        self.nodes.get(id as usize).ok_or(Error::DanglingNode(id))
    }

    /// Main-branch nodes x⁰, x¹, … in order.
    pub fn main_branch(&self) -> &[NodeId] {
        &self.main
    }

    pub fn main_tip(&self) -> NodeId {
        *self.main.last().expect("root is always on the main branch")
    }

    pub fn depth(&self, id: NodeId) -> Result<u64> {
        self.depth.get(id as usize).copied().ok_or(Error::DanglingNode(id))
    }

    fn check(&self, id: NodeId) -> Result<()> {
        self.node(id).map(|_| ())
    }

    /// Appends `base − step·∇f(grad_at; draw)` as a new off-branch node.
    pub fn record_step(&mut self, base: NodeId, grad_at: NodeId, step_size: f64, rng_draw_id: u64) -> Result<NodeId> {
        self.check(base)?;
        self.check(grad_at)?;
        let id = self.nodes.len() as NodeId;
        self.nodes.push(TreeNode {
            node_id: id,
            parent_id: Some(base),
            grad_node_id: Some(grad_at),
            rng_draw_id: Some(rng_draw_id),
            step_size,
            on_main_branch: false,
            main_branch_index: None,
        });
        self.depth.push(self.depth[base as usize] + 1);
        Ok(id)
    }

    /// Appends the next main-branch node; `base` must be the current main tip.
    pub fn record_main_step(
        &mut self,
        base: NodeId,
        grad_at: NodeId,
        step_size: f64,
        rng_draw_id: u64,
    ) -> Result<NodeId> {
        if base != self.main_tip() {
            return Err(Error::MalformedMainBranch(format!(
                "main step must extend the tip {}, got base {base}",
                self.main_tip()
            )));
        }
        let id = self.record_step(base, grad_at, step_size, rng_draw_id)?;
        let node = &mut self.nodes[id as usize];
        node.on_main_branch = true;
        node.main_branch_index = Some(self.main.len() as u64);
        self.main.push(id);
        Ok(id)
    }

    /// Rebuilds a tree from nodes listed so that every parent precedes its
    /// children and node ids equal their positions.
    pub fn from_nodes(nodes: Vec<TreeNode>) -> Result<Self> {
        let mut depth = Vec::with_capacity(nodes.len());
        let mut main = Vec::new();
        for (pos, node) in nodes.iter().enumerate() {
            if node.node_id != pos as NodeId {
                return Err(Error::Parse {
                    line: pos + 1,
                    reason: format!("expected node id {pos}, found {}", node.node_id),
                });
            }
            match node.parent_id {
                None if pos == 0 => depth.push(0),
                None => return Err(Error::MalformedMainBranch(format!("second root {}", node.node_id))),
                Some(p) if (p as usize) < pos => depth.push(depth[p as usize] + 1),
                Some(p) => return Err(Error::DanglingNode(p)),
            }
            if pos > 0 {
                match (node.grad_node_id, node.rng_draw_id) {
                    (Some(g), Some(_)) if (g as usize) < nodes.len() => {}
                    (Some(g), Some(_)) => return Err(Error::DanglingNode(g)),
                    _ => {
                        return Err(Error::Parse {
                            line: pos + 1,
                            reason: "non-root node without gradient metadata".into(),
                        })
                    }
                }
            }
            if node.on_main_branch {
                main.push(node.node_id);
            }
        }
        if nodes.is_empty() {
            return Err(Error::Parse {
                line: 0,
                reason: "empty tree".into(),
            });
        }
        if !nodes[0].on_main_branch {
            return Err(Error::UntaggedMainBranch);
        }
        // Main nodes must form a root-anchored path.
        for pair in main.windows(2) {
            if nodes[pair[1] as usize].parent_id != Some(pair[0]) {
                return Err(Error::MalformedMainBranch(format!(
                    "main node {} does not extend main node {}",
                    pair[1], pair[0]
                )));
            }
        }
        let mut nodes = nodes;
        for (k, &id) in main.iter().enumerate() {
            nodes[id as usize].main_branch_index = Some(k as u64);
        }
        for node in nodes.iter_mut().filter(|n| !n.on_main_branch) {
            node.main_branch_index = None;
        }
        Ok(Self { nodes, depth, main })
    }

    /// Replaces the metadata of the edge into `id`, keeping the topology.
    pub fn rewrite_edge(&mut self, id: NodeId, grad_at: NodeId, step_size: f64, rng_draw_id: u64) -> Result<()> {
        self.check(grad_at)?;
        if id == Self::ROOT {
            return Err(Error::invalid("node_id", "the root has no incoming edge"));
        }
        let node = self.nodes.get_mut(id as usize).ok_or(Error::DanglingNode(id))?;
        node.grad_node_id = Some(grad_at);
        node.step_size = step_size;
        node.rng_draw_id = Some(rng_draw_id);
        Ok(())
    }

    fn parent(&self, id: NodeId) -> Option<NodeId> {
        self.nodes[id as usize].parent_id
    }

    /// Lowest common ancestor of two existing nodes.
    pub fn lca(&self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.check(a)?;
        self.check(b)?;
        let (mut a, mut b) = (a, b);
        while self.depth[a as usize] > self.depth[b as usize] {
            a = self.parent(a).expect("non-root has a parent");
        }
        while self.depth[b as usize] > self.depth[a as usize] {
            b = self.parent(b).expect("non-root has a parent");
        }
        while a != b {
            a = self.parent(a).expect("non-root has a parent");
            b = self.parent(b).expect("non-root has a parent");
        }
        Ok(a)
    }

    /// Edge metadata on the path from `ancestor` (exclusive) down to `node`.
    pub(crate) fn path_refs(&self, ancestor: NodeId, node: NodeId) -> Vec<GradRef> {
        let mut out = Vec::new();
        let mut cur = node;
        while cur != ancestor {
            let n = &self.nodes[cur as usize];
            out.push((n.grad_node_id.expect("non-root"), n.rng_draw_id.expect("non-root")));
            cur = n.parent_id.expect("ancestor lies on the root path");
        }
        out
    }
}

/// Maximal number of edges from `a` and `b` down to their closest common ancestor.
pub fn tree_dist(tree: &ComputationTree, a: NodeId, b: NodeId) -> Result<u64> {
    let l = tree.lca(a, b)?;
    let dl = tree.depth[l as usize];
    Ok((tree.depth[a as usize] - dl).max(tree.depth[b as usize] - dl))
}

/// min_k dist(y, x^k). The minimum is attained at the nearest main-branch
/// ancestor of `y` (or `y` itself).
pub fn dist_to_main(tree: &ComputationTree, y: NodeId) -> Result<u64> {
    tree.check(y)?;
    let mut cur = y;
    while !tree.nodes[cur as usize].on_main_branch {
        cur = match tree.parent(cur) {
            Some(p) => p,
            None => return Err(Error::UntaggedMainBranch),
        };
    }
    Ok(tree.depth[y as usize] - tree.depth[cur as usize])
}

/// Multiset of (gradient node, draw) pairs applied to the root to reach `y`,
/// as element → multiplicity.
pub fn repr_of(tree: &ComputationTree, y: NodeId) -> Result<HashMap<GradRef, usize>> {
    tree.check(y)?;
    let mut out = HashMap::new();
    for r in tree.path_refs(ComputationTree::ROOT, y) {
        *out.entry(r).or_insert(0) += 1;
    }
    Ok(out)
}

/// Whether multiset `a` is contained in multiset `b`.
pub fn multiset_contains(b: &HashMap<GradRef, usize>, a: &HashMap<GradRef, usize>) -> bool {
    a.iter().all(|(k, &c)| b.get(k).copied().unwrap_or(0) >= c)
}
