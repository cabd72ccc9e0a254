//! Graph transformations for interventions and calculus-rule antecedents.

use crate::error::Error;
use crate::graph::{Admg, NodeSet};
use crate::Result;

/// Edge classes to delete, the uniform carrier for the subscripted graphs of
/// the calculus rules.
#[derive(Debug, Clone, Copy, Default)]
pub struct EdgeFilterSpec {
    pub delete_directed_into: NodeSet,
    pub delete_directed_out_of: NodeSet,
    pub delete_undirected_into: NodeSet,
}

/// Intervention surgery `G_x̂`:
/// 1. delete every directed and bidirected edge into `x`;
/// 2. for each undirected path `a -- v1 -- ... -- vn -- b` with `a,b` outside
///    `x` and every `vi` in `x`, add `a -- b`;
/// 3. delete every undirected edge incident to `x`.
///
/// Intervened nodes stay in the graph, keeping their outgoing directed edges,
/// so downstream separation queries can still condition on them.
pub fn intervene(g: &Admg, x: NodeSet) -> Admg {
    let keep = g.all_nodes().minus(x);
    let mut out = Admg::new(g.labels().iter().cloned()).expect("labels already validated");
    for (a, b) in g.directed_edges() {
        if !x.contains(b) {
            out.add_directed(a, b).expect("subset of an acyclic relation");
        }
    }
    for (a, b) in g.bidirected_edges() {
        if !x.contains(a) && !x.contains(b) {
            out.add_bidirected(a, b).unwrap();
        }
    }
    // Marginalizing the undirected structure over the surviving nodes covers
    // both the path-closure additions and the deletions at x.
    for (a, b) in g.marginal_lines(keep) {
        out.add_undirected(a, b).unwrap();
    }
    out
}

/// Removes exactly the specified edge classes; bidirected edges untouched.
pub fn delete_edges(g: &Admg, spec: EdgeFilterSpec) -> Admg {
    let mut out = g.clone();
    for (a, b) in g.directed_edges() {
        if spec.delete_directed_into.contains(b) || spec.delete_directed_out_of.contains(a) {
            out.remove_directed(a, b);
        }
    }
    for (a, b) in g.undirected_edges() {
        if spec.delete_undirected_into.contains(a) || spec.delete_undirected_into.contains(b) {
            out.remove_undirected(a, b);
        }
    }
    out
}

/// `Z(W)`: the nodes of `z` that are not ancestors of `w` in `g` (which may
/// already be an intervened or edge-filtered graph).
pub fn non_ancestors_of(g: &Admg, z: NodeSet, w: NodeSet) -> Result<NodeSet> {
    if !z.is_disjoint(w) {
        return Err(Error::input("z and w must be disjoint"));
    }
    Ok(z.minus(g.ancestors(w)))
}
