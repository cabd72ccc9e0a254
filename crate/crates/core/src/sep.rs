//! Separation in ADMGs via the path and route criteria, plus magnification.
//!
//! A collider on a path or route is a node C in the patterns `A o-> C <-o B`
//! or `A o-> C -- B` (where `o->` is an edge with an arrowhead at C). The
//! path criterion asks every collider to be an ancestor of the conditioning
//! set and every non-collider to be outside it, with an escape clause for
//! `A -- C -- B` subpaths. The route criterion allows node repetition, asks
//! colliders to be *in* the conditioning set, and keeps only the spouse part
//! of the escape clause; the two criteria decide the same separations.

use crate::error::Error;
use crate::graph::{Admg, NodeIdx, NodeSet};
use crate::surgery;
use crate::Result;

/// Which §3 criterion to use in [`separated`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Criterion {
    Path,
    Route,
}

/// Edge mark at the node an edge touches: tail (`A ->` at A), head (`-> A`
/// or `<-> A` at A), or line (`-- A`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mark {
    Tail,
    Head,
    Line,
}

/// One edge of a witness path, relative to the traversal direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WitnessEdge {
    /// `v -> u` traversed v to u.
    Forward,
    /// `u -> v` traversed v to u.
    Backward,
    Line,
    Bi,
}

impl WitnessEdge {
    fn marks(self) -> (Mark, Mark) {
        // (mark at the source node, mark at the target node)
        match self {
            WitnessEdge::Forward => (Mark::Tail, Mark::Head),
            WitnessEdge::Backward => (Mark::Head, Mark::Tail),
            WitnessEdge::Line => (Mark::Line, Mark::Line),
            WitnessEdge::Bi => (Mark::Head, Mark::Head),
        }
    }

    fn glyph(self) -> &'static str {
        match self {
            WitnessEdge::Forward => "->",
            WitnessEdge::Backward => "<-",
            WitnessEdge::Line => "--",
            WitnessEdge::Bi => "<->",
        }
    }
}

/// Evidence that two nodes are connected: a concrete path satisfying the
/// path criterion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConnectingWitness {
    pub nodes: Vec<NodeIdx>,
    pub edges: Vec<WitnessEdge>,
}

impl ConnectingWitness {
    pub fn render(&self, g: &Admg) -> String {
        let mut out = String::new();
        for (i, &v) in self.nodes.iter().enumerate() {
            if i > 0 {
                out.push_str(&format!(" -[{}]- ", self.edges[i - 1].glyph()));
            }
            out.push_str(g.label(v));
        }
        out
    }

    /// Re-checks the path-criterion clauses directly; used by tests.
    pub fn validate(&self, g: &Admg, z: NodeSet) -> bool {
        if self.nodes.len() != self.edges.len() + 1 || self.nodes.is_empty() {
            return false;
        }
        let mut distinct = self.nodes.clone();
        distinct.sort_unstable();
        distinct.dedup();
        if distinct.len() != self.nodes.len() {
            return false;
        }
        for (i, &e) in self.edges.iter().enumerate() {
            let (a, b) = (self.nodes[i], self.nodes[i + 1]);
            let present = match e {
                WitnessEdge::Forward => g.has_directed(a, b),
                WitnessEdge::Backward => g.has_directed(b, a),
                WitnessEdge::Line => g.has_undirected(a, b),
                WitnessEdge::Bi => g.has_bidirected(a, b),
            };
            if !present {
                return false;
            }
        }
        let an_z = g.ancestors(z);
        for i in 1..self.nodes.len() - 1 {
            let incoming = self.edges[i - 1].marks().1;
            let outgoing = self.edges[i].marks().0;
            if !interior_node_ok(g, z, an_z, self.nodes[i], incoming, outgoing) {
                return false;
            }
        }
        let first = self.nodes[0];
        let last = *self.nodes.last().unwrap();
        !z.contains(first) && !z.contains(last)
    }
}

/// Path-criterion condition at an interior node with the given marks.
fn interior_node_ok(
    g: &Admg,
    z: NodeSet,
    an_z: NodeSet,
    v: NodeIdx,
    incoming: Mark,
    outgoing: Mark,
) -> bool {
    let headish =
        |m: Mark| m == Mark::Head || m == Mark::Line;
    let collider =
        headish(incoming) && headish(outgoing) && (incoming == Mark::Head || outgoing == Mark::Head);
    if collider {
        an_z.contains(v)
    } else if z.contains(v) {
        incoming == Mark::Line
            && outgoing == Mark::Line
            && (!g.parents(NodeSet::singleton(v)).minus(z).is_empty()
                || !g.spouses(NodeSet::singleton(v)).is_empty())
    } else {
        true
    }
}

fn check_endpoints(g: &Admg, a: NodeIdx, b: NodeIdx, z: NodeSet) -> Result<()> {
    if a >= g.n() || b >= g.n() || !z.is_subset(g.all_nodes()) {
        return Err(Error::input("node out of range"));
    }
    if a == b || z.contains(a) || z.contains(b) {
        return Err(Error::input("endpoints must be distinct and outside z"));
    }
    Ok(())
}

/// Edges incident to `v`, as (other endpoint, witness edge from v's side).
fn incident(g: &Admg, v: NodeIdx) -> Vec<(NodeIdx, WitnessEdge)> {
    let mut out = Vec::new();
    for u in 0..g.n() {
        if u == v {
            continue;
        }
        if g.has_directed(v, u) {
            out.push((u, WitnessEdge::Forward));
        }
        if g.has_directed(u, v) {
            out.push((u, WitnessEdge::Backward));
        }
        if g.has_undirected(v, u) {
            out.push((u, WitnessEdge::Line));
        }
        if g.has_bidirected(v, u) {
            out.push((u, WitnessEdge::Bi));
        }
    }
    out
}

/// Searches for a path from `a` to `b` connecting given `z` under the path
/// criterion; returns a witness when one exists.
pub fn connects_by_path(
    g: &Admg,
    a: NodeIdx,
    b: NodeIdx,
    z: NodeSet,
) -> Result<Option<ConnectingWitness>> {
    check_endpoints(g, a, b, z)?;
    let an_z = g.ancestors(z);
    let mut nodes = vec![a];
    let mut edges = Vec::new();
    let found = extend_path(g, z, an_z, b, &mut nodes, &mut edges, &|_| true);
    Ok(found.then_some(ConnectingWitness { nodes, edges }))
}

/// Like [`connects_by_path`] but only considers paths that are not directed
/// paths `a -> .. -> b`; used by the back-door criterion.
pub fn connects_by_nondirected_path(
    g: &Admg,
    a: NodeIdx,
    b: NodeIdx,
    z: NodeSet,
) -> Result<Option<ConnectingWitness>> {
    check_endpoints(g, a, b, z)?;
    let an_z = g.ancestors(z);
    let mut nodes = vec![a];
    let mut edges = Vec::new();
    let nondirected = |es: &[WitnessEdge]| es.iter().any(|e| *e != WitnessEdge::Forward);
    let found = extend_path(g, z, an_z, b, &mut nodes, &mut edges, &nondirected);
    Ok(found.then_some(ConnectingWitness { nodes, edges }))
}

fn extend_path(
    g: &Admg,
    z: NodeSet,
    an_z: NodeSet,
    target: NodeIdx,
    nodes: &mut Vec<NodeIdx>,
    edges: &mut Vec<WitnessEdge>,
    accept: &dyn Fn(&[WitnessEdge]) -> bool,
) -> bool {
    let v = *nodes.last().unwrap();
    if v == target {
        return accept(edges);
    }
    for (u, e) in incident(g, v) {
        if nodes.contains(&u) {
            continue;
        }
        // Interior condition at v, only once v has an incoming edge.
        if let Some(&prev) = edges.last() {
            if !interior_node_ok(g, z, an_z, v, prev.marks().1, e.marks().0) {
                continue;
            }
        }
        nodes.push(u);
        edges.push(e);
        if extend_path(g, z, an_z, target, nodes, edges, accept) {
            return true;
        }
        nodes.pop();
        edges.pop();
    }
    false
}

/// Route-criterion decision via reachability over (node, arrival mark)
/// states; routes may repeat nodes, so no route is materialized.
pub fn connects_by_route(g: &Admg, a: NodeIdx, b: NodeIdx, z: NodeSet) -> Result<bool> {
    check_endpoints(g, a, b, z)?;
    let spouse_of = |v: NodeIdx| !g.spouses(NodeSet::singleton(v)).is_empty();
    let idx = |v: NodeIdx, m: Mark| {
        v * 3
            + match m {
                Mark::Tail => 0,
                Mark::Head => 1,
                Mark::Line => 2,
            }
    };
    let mut seen = vec![false; g.n() * 3];
    let mut stack: Vec<(NodeIdx, Mark)> = Vec::new();
    let push = |state: (NodeIdx, Mark), seen: &mut Vec<bool>, stack: &mut Vec<(NodeIdx, Mark)>| {
        if !seen[idx(state.0, state.1)] {
            seen[idx(state.0, state.1)] = true;
            stack.push(state);
        }
    };
    for (u, e) in incident(g, a) {
        // a is outside z, so every first step is admissible.
        push((u, e.marks().1), &mut seen, &mut stack);
    }
    while let Some((v, mark)) = stack.pop() {
        if v == b {
            return Ok(true);
        }
        let in_z = z.contains(v);
        for (u, e) in incident(g, v) {
            let ok = match e {
                WitnessEdge::Line => match mark {
                    Mark::Line => !in_z || spouse_of(v),
                    Mark::Tail => !in_z,
                    Mark::Head => in_z,
                },
                WitnessEdge::Forward => !in_z,
                WitnessEdge::Bi => match mark {
                    Mark::Tail => !in_z,
                    Mark::Line | Mark::Head => in_z,
                },
                WitnessEdge::Backward => match mark {
                    Mark::Tail => !in_z,
                    Mark::Line | Mark::Head => in_z,
                },
            };
            if ok {
                push((u, e.marks().1), &mut seen, &mut stack);
            }
        }
    }
    Ok(false)
}

/// Separation query X ⊥ Y | Z.
#[derive(Debug, Clone, Copy)]
pub struct SeparationQuery {
    pub x: NodeSet,
    pub y: NodeSet,
    pub z: NodeSet,
}

impl SeparationQuery {
    pub fn new(x: NodeSet, y: NodeSet, z: NodeSet) -> Result<SeparationQuery> {
        if x.is_empty() || y.is_empty() {
            return Err(Error::input("x and y must be nonempty"));
        }
        if !x.is_disjoint(y) || !x.is_disjoint(z) || !y.is_disjoint(z) {
            return Err(Error::input("x, y, z must be pairwise disjoint"));
        }
        Ok(SeparationQuery { x, y, z })
    }
}

/// True iff no pair in X × Y is connecting given Z under the chosen
/// criterion.
pub fn separated(g: &Admg, q: SeparationQuery, criterion: Criterion) -> Result<bool> {
    for a in q.x.iter() {
        for b in q.y.iter() {
            let connected = match criterion {
                Criterion::Path => connects_by_path(g, a, b, q.z)?.is_some(),
                Criterion::Route => connects_by_route(g, a, b, q.z)?,
            };
            if connected {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Like [`separated`] with the path criterion, returning the first
/// connecting witness when separation fails.
pub fn separation_witness(g: &Admg, q: SeparationQuery) -> Result<Option<ConnectingWitness>> {
    for a in q.x.iter() {
        for b in q.y.iter() {
            if let Some(w) = connects_by_path(g, a, b, q.z)? {
                return Ok(Some(w));
            }
        }
    }
    Ok(None)
}

/// X ⊥_{G_ŵ} Y | Z ∪ W: separation in the intervened graph, conditioning on
/// the intervened values as well.
pub fn separated_after_intervention(
    g: &Admg,
    x: NodeSet,
    y: NodeSet,
    z: NodeSet,
    w: NodeSet,
    criterion: Criterion,
) -> Result<bool> {
    if !z.is_disjoint(w) || !x.is_disjoint(w) || !y.is_disjoint(w) {
        return Err(Error::input("x, y, z, w must be pairwise disjoint"));
    }
    let gw = intervened_for_separation(g, w);
    separated(&gw, SeparationQuery::new(x, y, z.union(w))?, criterion)
}

/// Intervened graph for semantic separation queries: the edge surgery of
/// [`surgery::intervene`] plus the precision fill-in caused by surviving
/// latents. The latent of `A <-> B` keeps loading on `A` after intervening
/// on `B`, so `A`'s error absorbs private noise, it no longer determines
/// its error when conditioned on, and the precision of the remaining
/// errors gains entries between `A`'s line-neighbors. The neighborhood
/// cliques are iterated to a fixpoint because adjacent absorbing nodes
/// compound the fill-in.
fn intervened_for_separation(g: &Admg, w: NodeSet) -> Admg {
    let mut out = surgery::intervene(g, w);
    let absorbing: Vec<NodeIdx> = g
        .all_nodes()
        .minus(w)
        .iter()
        .filter(|&v| !g.spouses(NodeSet::singleton(v)).inter(w).is_empty())
        .collect();
    let mut changed = !absorbing.is_empty();
    while changed {
        changed = false;
        for &v in &absorbing {
            let ne: Vec<NodeIdx> = out.neighbors(NodeSet::singleton(v)).iter().collect();
            for i in 0..ne.len() {
                for j in i + 1..ne.len() {
                    if !out.has_undirected(ne[i], ne[j]) {
                        out.add_undirected(ne[i], ne[j]).expect("fill-in endpoints are distinct");
                        changed = true;
                    }
                }
            }
        }
    }
    out
}

/// Result of magnifying an ADMG: the expanded graph and the indices of the
/// original nodes inside it (they keep their indices).
#[derive(Debug, Clone)]
pub struct Magnification {
    pub graph: Admg,
    pub v_nodes: NodeSet,
}

/// Magnification: each `A <-> B` becomes `A <- lam_A_B -> B`, each node `A`
/// gains `eps_A -> A`, each `A -- B` becomes `eps_A -- eps_B`. The result
/// has no bidirected edges and no undirected edges between original nodes.
pub fn magnify(g: &Admg) -> Result<Magnification> {
    let n = g.n();
    let mut labels: Vec<String> = g.labels().to_vec();
    let bidirected: Vec<(NodeIdx, NodeIdx)> = g.bidirected_edges().collect();
    for &(a, b) in &bidirected {
        labels.push(format!("lam_{}_{}", g.label(a), g.label(b)));
    }
    for v in 0..n {
        labels.push(format!("eps_{}", g.label(v)));
    }
    let mut out = Admg::new(labels)?;
    for (a, b) in g.directed_edges() {
        out.add_directed(a, b)?;
    }
    for (i, &(a, b)) in bidirected.iter().enumerate() {
        let lam = n + i;
        out.add_directed(lam, a)?;
        out.add_directed(lam, b)?;
    }
    let eps = |v: NodeIdx| n + bidirected.len() + v;
    for v in 0..n {
        out.add_directed(eps(v), v)?;
    }
    for (a, b) in g.undirected_edges() {
        out.add_undirected(eps(a), eps(b))?;
    }
    Ok(Magnification {
        graph: out,
        v_nodes: NodeSet::full(n),
    })
}
