//! ADMG value types and the graph algebra consumed by every other module.

use std::collections::BTreeSet;
use std::fmt;

use crate::error::Error;
use crate::Result;

/// Maximum number of nodes so that every [`NodeSet`] fits one machine word.
pub const MAX_NODES: usize = 62;

/// Node index inside a graph (dense `0..n`).
pub type NodeIdx = usize;

/// Bit set over node indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct NodeSet(u64);

impl NodeSet {
    pub const EMPTY: NodeSet = NodeSet(0);

    pub fn singleton(i: NodeIdx) -> NodeSet {
        NodeSet(1 << i)
    }

    /// All indices `0..n`.
    pub fn full(n: usize) -> NodeSet {
        debug_assert!(n <= MAX_NODES);
        NodeSet((1u64 << n) - 1)
    }

    pub fn from_iter(iter: impl IntoIterator<Item = NodeIdx>) -> NodeSet {
        let mut s = NodeSet::EMPTY;
        for i in iter {
            s.insert(i);
        }
        s
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn from_bits(bits: u64) -> NodeSet {
        NodeSet(bits)
    }

    pub fn insert(&mut self, i: NodeIdx) {
        self.0 |= 1 << i;
    }

    pub fn remove(&mut self, i: NodeIdx) {
        self.0 &= !(1 << i);
    }

    pub fn contains(self, i: NodeIdx) -> bool {
        self.0 >> i & 1 == 1
    }

    pub fn union(self, other: NodeSet) -> NodeSet {
        NodeSet(self.0 | other.0)
    }

    pub fn inter(self, other: NodeSet) -> NodeSet {
        NodeSet(self.0 & other.0)
    }

    pub fn minus(self, other: NodeSet) -> NodeSet {
        NodeSet(self.0 & !other.0)
    }

    pub fn with(self, i: NodeIdx) -> NodeSet {
        NodeSet(self.0 | 1 << i)
    }

    pub fn without(self, i: NodeIdx) -> NodeSet {
        NodeSet(self.0 & !(1 << i))
    }

    pub fn is_subset(self, other: NodeSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn is_disjoint(self, other: NodeSet) -> bool {
        self.0 & other.0 == 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn iter(self) -> impl Iterator<Item = NodeIdx> {
        (0..64).filter(move |i| self.contains(*i))
    }
}

/// All subsets of `set`, enumerated with the `(s - full) & full` stepping
/// trick, smallest bit pattern first.
pub fn subsets_of(set: NodeSet) -> Vec<NodeSet> {
    let full = set.bits();
    let mut out = Vec::with_capacity(1 << set.len());
    let mut s: u64 = 0;
    loop {
        out.push(NodeSet::from_bits(s));
        if s == full {
            break;
        }
        s = (s.wrapping_sub(full)) & full;
    }
    out
}

/// The three edge relations of an ADMG.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EdgeKind {
    Directed,
    Undirected,
    Bidirected,
}

/// Which relatives to compute in [`Admg::relatives`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relatives {
    Parents,
    Children,
    Neighbors,
    Spouses,
    Ancestors,
    Descendants,
}

/// Acyclic directed mixed graph: one node set, three edge relations.
///
/// Unordered relations (undirected, bidirected) store pairs low-index-first;
/// the directed relation stores `(from, to)`. The directed part is kept
/// acyclic by construction.
#[derive(Debug, Clone, Eq)]
pub struct Admg {
    labels: Vec<String>,
    directed: BTreeSet<(NodeIdx, NodeIdx)>,
    undirected: BTreeSet<(NodeIdx, NodeIdx)>,
    bidirected: BTreeSet<(NodeIdx, NodeIdx)>,
}

impl Admg {
    pub fn new<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Result<Admg> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.len() > MAX_NODES {
            return Err(Error::input(format!("at most {MAX_NODES} nodes supported")));
        }
        for (i, l) in labels.iter().enumerate() {
            if l.is_empty() || l.chars().any(|c| c.is_whitespace() || ",#|".contains(c)) {
                return Err(Error::input(format!("invalid node label {l:?}")));
            }
            if labels[..i].contains(l) {
                return Err(Error::input(format!("duplicate node label {l:?}")));
            }
        }
        Ok(Admg {
            labels,
            directed: BTreeSet::new(),
            undirected: BTreeSet::new(),
            bidirected: BTreeSet::new(),
        })
    }

    /// Convenience constructor from edge lists given as label pairs.
    pub fn build<S: Into<String>>(
        labels: impl IntoIterator<Item = S>,
        directed: &[(&str, &str)],
        undirected: &[(&str, &str)],
        bidirected: &[(&str, &str)],
    ) -> Result<Admg> {
        let mut g = Admg::new(labels)?;
        for (a, b) in directed {
            let (a, b) = (g.index_of_ok(a)?, g.index_of_ok(b)?);
            g.add_directed(a, b)?;
        }
        for (a, b) in undirected {
            let (a, b) = (g.index_of_ok(a)?, g.index_of_ok(b)?);
            g.add_undirected(a, b)?;
        }
        for (a, b) in bidirected {
            let (a, b) = (g.index_of_ok(a)?, g.index_of_ok(b)?);
            g.add_bidirected(a, b)?;
        }
        Ok(g)
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, i: NodeIdx) -> &str {
        &self.labels[i]
    }

    pub fn index_of(&self, label: &str) -> Option<NodeIdx> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn index_of_ok(&self, label: &str) -> Result<NodeIdx> {
        self.index_of(label)
            .ok_or_else(|| Error::input(format!("unknown node {label:?}")))
    }

    pub fn all_nodes(&self) -> NodeSet {
        NodeSet::full(self.n())
    }

    /// Resolve a set of labels to a [`NodeSet`].
    pub fn node_set(&self, labels: &[&str]) -> Result<NodeSet> {
        let mut s = NodeSet::EMPTY;
        for l in labels {
            s.insert(self.index_of_ok(l)?);
        }
        Ok(s)
    }

    fn check_pair(&self, a: NodeIdx, b: NodeIdx) -> Result<()> {
        if a >= self.n() || b >= self.n() {
            return Err(Error::input(format!("node index out of range: {a} or {b}")));
        }
        if a == b {
            return Err(Error::input(format!(
                "self-loop on {} not allowed",
                self.labels[a]
            )));
        }
        Ok(())
    }

    pub fn add_directed(&mut self, from: NodeIdx, to: NodeIdx) -> Result<()> {
        self.check_pair(from, to)?;
        if self.directed.contains(&(from, to)) {
            return Err(Error::input(format!(
                "duplicate edge {} -> {}",
                self.labels[from], self.labels[to]
            )));
        }
        if self.reaches_directed(to, from) {
            return Err(Error::input(format!(
                "edge {} -> {} would create a directed cycle",
                self.labels[from], self.labels[to]
            )));
        }
        self.directed.insert((from, to));
        Ok(())
    }

    pub fn add_undirected(&mut self, a: NodeIdx, b: NodeIdx) -> Result<()> {
        self.check_pair(a, b)?;
        let e = (a.min(b), a.max(b));
        if !self.undirected.insert(e) {
            return Err(Error::input(format!(
                "duplicate edge {} -- {}",
                self.labels[e.0], self.labels[e.1]
            )));
        }
        Ok(())
    }

    pub fn add_bidirected(&mut self, a: NodeIdx, b: NodeIdx) -> Result<()> {
        self.check_pair(a, b)?;
        let e = (a.min(b), a.max(b));
        if !self.bidirected.insert(e) {
            return Err(Error::input(format!(
                "duplicate edge {} <-> {}",
                self.labels[e.0], self.labels[e.1]
            )));
        }
        Ok(())
    }

    pub fn remove_directed(&mut self, from: NodeIdx, to: NodeIdx) {
        self.directed.remove(&(from, to));
    }

    pub fn remove_undirected(&mut self, a: NodeIdx, b: NodeIdx) {
        self.undirected.remove(&(a.min(b), a.max(b)));
    }

    pub fn remove_bidirected(&mut self, a: NodeIdx, b: NodeIdx) {
        self.bidirected.remove(&(a.min(b), a.max(b)));
    }

    pub fn has_directed(&self, from: NodeIdx, to: NodeIdx) -> bool {
        self.directed.contains(&(from, to))
    }

    pub fn has_undirected(&self, a: NodeIdx, b: NodeIdx) -> bool {
        self.undirected.contains(&(a.min(b), a.max(b)))
    }

    pub fn has_bidirected(&self, a: NodeIdx, b: NodeIdx) -> bool {
        self.bidirected.contains(&(a.min(b), a.max(b)))
    }

    pub fn adjacent(&self, a: NodeIdx, b: NodeIdx) -> bool {
        self.has_directed(a, b)
            || self.has_directed(b, a)
            || self.has_undirected(a, b)
            || self.has_bidirected(a, b)
    }

    pub fn directed_edges(&self) -> impl Iterator<Item = (NodeIdx, NodeIdx)> + '_ {
        self.directed.iter().copied()
    }

    pub fn undirected_edges(&self) -> impl Iterator<Item = (NodeIdx, NodeIdx)> + '_ {
        self.undirected.iter().copied()
    }

    pub fn bidirected_edges(&self) -> impl Iterator<Item = (NodeIdx, NodeIdx)> + '_ {
        self.bidirected.iter().copied()
    }

    pub fn edge_count(&self) -> usize {
        self.directed.len() + self.undirected.len() + self.bidirected.len()
    }

    fn reaches_directed(&self, from: NodeIdx, to: NodeIdx) -> bool {
        let mut seen = NodeSet::singleton(from);
        let mut stack = vec![from];
        while let Some(v) = stack.pop() {
            if v == to {
                return true;
            }
            for &(a, b) in &self.directed {
                if a == v && !seen.contains(b) {
                    seen.insert(b);
                    stack.push(b);
                }
            }
        }
        false
    }

    // ── Relatives (§2 definitions; An/De are reflexive) ──────────────────

    pub fn parents(&self, x: NodeSet) -> NodeSet {
        NodeSet::from_iter(
            self.directed
                .iter()
                .filter(|(_, b)| x.contains(*b))
                .map(|(a, _)| *a),
        )
    }

    pub fn children(&self, x: NodeSet) -> NodeSet {
        NodeSet::from_iter(
            self.directed
                .iter()
                .filter(|(a, _)| x.contains(*a))
                .map(|(_, b)| *b),
        )
    }

    pub fn neighbors(&self, x: NodeSet) -> NodeSet {
        let mut out = NodeSet::EMPTY;
        for &(a, b) in &self.undirected {
            if x.contains(a) {
                out.insert(b);
            }
            if x.contains(b) {
                out.insert(a);
            }
        }
        out
    }

    pub fn spouses(&self, x: NodeSet) -> NodeSet {
        let mut out = NodeSet::EMPTY;
        for &(a, b) in &self.bidirected {
            if x.contains(a) {
                out.insert(b);
            }
            if x.contains(b) {
                out.insert(a);
            }
        }
        out
    }

    /// Reflexive-transitive closure under parents.
    pub fn ancestors(&self, x: NodeSet) -> NodeSet {
        let mut cur = x;
        loop {
            let next = cur.union(self.parents(cur));
            if next == cur {
                return cur;
            }
            cur = next;
        }
    }

    /// Reflexive-transitive closure under children.
    pub fn descendants(&self, x: NodeSet) -> NodeSet {
        let mut cur = x;
        loop {
            let next = cur.union(self.children(cur));
            if next == cur {
                return cur;
            }
            cur = next;
        }
    }

    pub fn relatives(&self, x: NodeSet, kind: Relatives) -> Result<NodeSet> {
        if !x.is_subset(self.all_nodes()) {
            return Err(Error::input("node set exceeds graph nodes".to_string()));
        }
        Ok(match kind {
            Relatives::Parents => self.parents(x),
            Relatives::Children => self.children(x),
            Relatives::Neighbors => self.neighbors(x),
            Relatives::Spouses => self.spouses(x),
            Relatives::Ancestors => self.ancestors(x),
            Relatives::Descendants => self.descendants(x),
        })
    }

    pub fn is_ancestral(&self, x: NodeSet) -> bool {
        self.ancestors(x) == x
    }

    // ── Subgraphs ────────────────────────────────────────────────────────

    /// Same node universe, only edges with both ends in `x`. Internal helper
    /// so downstream queries keep stable node indices.
    pub(crate) fn restricted(&self, x: NodeSet) -> Admg {
        let mut g = self.clone();
        g.directed.retain(|&(a, b)| x.contains(a) && x.contains(b));
        g.undirected.retain(|&(a, b)| x.contains(a) && x.contains(b));
        g.bidirected.retain(|&(a, b)| x.contains(a) && x.contains(b));
        g
    }

    /// Induced subgraph `G_X`, over exactly the nodes of `x`.
    pub fn induced_subgraph(&self, x: NodeSet) -> Result<Admg> {
        if !x.is_subset(self.all_nodes()) {
            return Err(Error::input("node set exceeds graph nodes".to_string()));
        }
        let keep: Vec<NodeIdx> = x.iter().collect();
        let remap = |i: NodeIdx| keep.iter().position(|&k| k == i).unwrap();
        let mut g = Admg::new(keep.iter().map(|&i| self.labels[i].clone()))?;
        for &(a, b) in &self.directed {
            if x.contains(a) && x.contains(b) {
                g.add_directed(remap(a), remap(b))?;
            }
        }
        for &(a, b) in &self.undirected {
            if x.contains(a) && x.contains(b) {
                g.add_undirected(remap(a), remap(b))?;
            }
        }
        for &(a, b) in &self.bidirected {
            if x.contains(a) && x.contains(b) {
                g.add_bidirected(remap(a), remap(b))?;
            }
        }
        Ok(g)
    }

    /// Undirected edges of the marginal graph, on the original universe:
    /// `a -- b` for `a,b` in `x` iff `a -- b` in `self` or some undirected
    /// path `a -- v1 -- ... -- vn -- b` has every `vi` outside `x`.
    pub(crate) fn marginal_lines(&self, x: NodeSet) -> BTreeSet<(NodeIdx, NodeIdx)> {
        let mut lines = BTreeSet::new();
        for a in x.iter() {
            // BFS over undirected edges through nodes outside x.
            let mut seen = NodeSet::singleton(a);
            let mut stack = vec![a];
            while let Some(v) = stack.pop() {
                for u in self.neighbors(NodeSet::singleton(v)).iter() {
                    if seen.contains(u) {
                        continue;
                    }
                    seen.insert(u);
                    if x.contains(u) {
                        if u != a {
                            lines.insert((a.min(u), a.max(u)));
                        }
                    } else {
                        stack.push(u);
                    }
                }
            }
        }
        lines
    }

    /// Marginal graph on the same universe: directed/bidirected edges inside
    /// `x`, undirected edges per [`Admg::marginal_lines`]; nodes outside `x`
    /// become isolated.
    pub(crate) fn marginal_on_universe(&self, x: NodeSet) -> Admg {
        let mut g = self.restricted(x);
        g.undirected = self.marginal_lines(x);
        g
    }

    /// Marginal graph `G^X`, over exactly the nodes of `x`.
    pub fn marginal_graph(&self, x: NodeSet) -> Result<Admg> {
        self.marginal_on_universe(x).induced_subgraph(x)
    }

    /// Connectivity classes of `x` under undirected paths inside `G_x`.
    pub fn undirected_components(&self, x: NodeSet) -> Vec<NodeSet> {
        let mut remaining = x;
        let mut out = Vec::new();
        while let Some(start) = remaining.iter().next() {
            let mut comp = NodeSet::singleton(start);
            let mut stack = vec![start];
            while let Some(v) = stack.pop() {
                for u in self.neighbors(NodeSet::singleton(v)).iter() {
                    if x.contains(u) && !comp.contains(u) {
                        comp.insert(u);
                        stack.push(u);
                    }
                }
            }
            remaining = remaining.minus(comp);
            out.push(comp);
        }
        out
    }

    // ── Topological orders ───────────────────────────────────────────────

    /// Lexicographically smallest (by node index) order of `w` consistent
    /// with the ancestral relation of the full graph.
    pub fn canonical_topological_order(&self, w: NodeSet) -> Vec<NodeIdx> {
        let mut placed = NodeSet::EMPTY;
        let mut order = Vec::with_capacity(w.len());
        while placed != w {
            let next = w
                .minus(placed)
                .iter()
                .find(|&v| {
                    let strict_an = self.ancestors(NodeSet::singleton(v)).without(v);
                    strict_an.inter(w).is_subset(placed)
                })
                .expect("acyclicity guarantees progress");
            placed.insert(next);
            order.push(next);
        }
        order
    }

    /// Checks that `order` lists a node set consistently with ancestral
    /// precedence: no node appears before one of its strict ancestors.
    pub fn is_valid_order(&self, order: &[NodeIdx]) -> bool {
        for (i, &v) in order.iter().enumerate() {
            let strict_an = self.ancestors(NodeSet::singleton(v)).without(v);
            for &u in &order[i + 1..] {
                if strict_an.contains(u) {
                    return false;
                }
            }
        }
        true
    }

    // ── Canonical form & equality ────────────────────────────────────────

    /// Graph with nodes reordered by label; edges follow the permutation.
    pub fn canonical(&self) -> Admg {
        let mut idx: Vec<NodeIdx> = (0..self.n()).collect();
        idx.sort_by(|&a, &b| self.labels[a].cmp(&self.labels[b]));
        let remap = |i: NodeIdx| idx.iter().position(|&k| k == i).unwrap();
        let mut g = Admg::new(idx.iter().map(|&i| self.labels[i].clone())).unwrap();
        for &(a, b) in &self.directed {
            g.directed.insert((remap(a), remap(b)));
        }
        for &(a, b) in &self.undirected {
            let (a, b) = (remap(a), remap(b));
            g.undirected.insert((a.min(b), a.max(b)));
        }
        for &(a, b) in &self.bidirected {
            let (a, b) = (remap(a), remap(b));
            g.bidirected.insert((a.min(b), a.max(b)));
        }
        g
    }
}

/// Structural equality up to node order (labels and label-level edges).
impl PartialEq for Admg {
    fn eq(&self, other: &Admg) -> bool {
        let (a, b) = (self.canonical(), other.canonical());
        a.labels == b.labels
            && a.directed == b.directed
            && a.undirected == b.undirected
            && a.bidirected == b.bidirected
    }
}

// ── Graph DSL ────────────────────────────────────────────────────────────
//
// Header `nodes A B C`, then one edge per line: `A -> B`, `A -- C`,
// `B <-> C`. `#` starts a comment; blank lines ignored.

/// Parses the graph DSL.
pub fn parse_graph(text: &str) -> Result<Admg> {
    let mut g: Option<Admg> = None;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let lineno = lineno + 1;
        let toks: Vec<&str> = line.split_whitespace().collect();
        match g {
            None => {
                if toks[0] != "nodes" || toks.len() < 2 {
                    return Err(Error::parse(lineno, "expected `nodes <label>+` header"));
                }
                g = Some(Admg::new(toks[1..].iter().map(|s| s.to_string()))
                    .map_err(|e| Error::parse(lineno, e.to_string()))?);
            }
            Some(ref mut g) => {
                if toks.len() != 3 {
                    return Err(Error::parse(lineno, format!("malformed edge line {line:?}")));
                }
                let a = g
                    .index_of_ok(toks[0])
                    .map_err(|e| Error::parse(lineno, e.to_string()))?;
                let b = g
                    .index_of_ok(toks[2])
                    .map_err(|e| Error::parse(lineno, e.to_string()))?;
                let res = match toks[1] {
                    "->" => g.add_directed(a, b),
                    "<-" => g.add_directed(b, a),
                    "--" => g.add_undirected(a, b),
                    "<->" => g.add_bidirected(a, b),
                    op => Err(Error::input(format!("unknown edge operator {op:?}"))),
                };
                res.map_err(|e| Error::parse(lineno, e.to_string()))?;
            }
        }
    }
    g.ok_or_else(|| Error::parse(0, "empty graph document"))
}

/// Canonical serialization: nodes sorted by label, edge lines sorted.
pub fn serialize_graph(g: &Admg) -> String {
    let g = g.canonical();
    let mut out = String::from("nodes");
    for l in g.labels() {
        out.push(' ');
        out.push_str(l);
    }
    out.push('\n');
    let mut lines: Vec<String> = Vec::new();
    for (a, b) in g.directed_edges() {
        lines.push(format!("{} -> {}", g.label(a), g.label(b)));
    }
    for (a, b) in g.undirected_edges() {
        lines.push(format!("{} -- {}", g.label(a), g.label(b)));
    }
    for (a, b) in g.bidirected_edges() {
        lines.push(format!("{} <-> {}", g.label(a), g.label(b)));
    }
    lines.sort();
    for l in lines {
        out.push_str(&l);
        out.push('\n');
    }
    out
}

/// Serialization preserving the node order, for callers that pair the graph
/// with index-ordered data (e.g. covariance matrices).
pub fn serialize_graph_ordered(g: &Admg) -> String {
    let mut out = String::from("nodes");
    for l in g.labels() {
        out.push(' ');
        out.push_str(l);
    }
    out.push('\n');
    for (a, b) in g.directed_edges() {
        out.push_str(&format!("{} -> {}\n", g.label(a), g.label(b)));
    }
    for (a, b) in g.undirected_edges() {
        out.push_str(&format!("{} -- {}\n", g.label(a), g.label(b)));
    }
    for (a, b) in g.bidirected_edges() {
        out.push_str(&format!("{} <-> {}\n", g.label(a), g.label(b)));
    }
    out
}

impl fmt::Display for Admg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&serialize_graph(self))
    }
}
