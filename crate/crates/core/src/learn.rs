//! Exact structure learning from weighted (in)dependence facts across
//! observational and single-node interventional regimes, plus an ASP-program
//! emitter for external reproduction.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::Error;
use crate::graph::{Admg, NodeIdx, NodeSet};
use crate::sep;
use crate::surgery;
use crate::Result;

// ── Facts ────────────────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FactKind {
    Dep,
    Indep,
}

/// One (in)dependence statement: `x` vs `y` given `cond`, in the
/// observational regime or under an intervention on a single node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fact {
    pub kind: FactKind,
    pub x: NodeIdx,
    pub y: NodeIdx,
    pub cond: NodeSet,
    pub regime: Option<NodeIdx>,
    pub weight: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FactSet {
    pub n: usize,
    pub facts: Vec<Fact>,
}

impl Fact {
    fn validate(&self, n: usize) -> Result<()> {
        if self.x == self.y {
            return Err(Error::input("fact endpoints must differ"));
        }
        let mentioned = self
            .cond
            .with(self.x)
            .with(self.y)
            .union(self.regime.map_or(NodeSet::EMPTY, NodeSet::singleton));
        if !mentioned.is_subset(NodeSet::full(n)) {
            return Err(Error::input("fact references a node outside 1..n"));
        }
        if self.cond.contains(self.x) || self.cond.contains(self.y) {
            return Err(Error::input("fact endpoints cannot appear in the conditioning set"));
        }
        if self.weight == 0 {
            return Err(Error::input("fact weight must be positive"));
        }
        Ok(())
    }
}

impl FactSet {
    pub fn new(n: usize, facts: Vec<Fact>) -> Result<FactSet> {
        for f in &facts {
            f.validate(n)?;
        }
        Ok(FactSet { n, facts })
    }
}

/// Parses a facts file. Two syntaxes are accepted and may be mixed:
///
/// * native: header `nodes <n>`, then lines
///   `dep|indep <x> <y> {<ids...>} obs|do=<node> <weight>`;
/// * ASP facts: `dep(1,2,4,0,1).` with the conditioning set as a bitmask
///   (node i is bit 2^(i-1)) and regime 0 meaning observational.
///
/// Without a header, n is inferred from the largest node mentioned.
pub fn parse_facts(text: &str) -> Result<FactSet> {
    let mut n: Option<usize> = None;
    let mut facts = Vec::new();
    let mut max_node = 0usize;
    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = raw.split(['#', '%']).next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("nodes ") {
            let k: usize = rest
                .trim()
                .parse()
                .map_err(|_| Error::parse(lineno, "invalid node count"))?;
            if k == 0 || k > 62 {
                return Err(Error::parse(lineno, "node count out of range"));
            }
            n = Some(k);
            continue;
        }
        let fact = if line.contains('(') {
            parse_asp_fact(line, lineno)?
        } else {
            parse_native_fact(line, lineno)?
        };
        max_node = max_node
            .max(fact.x + 1)
            .max(fact.y + 1)
            .max(fact.regime.map_or(0, |r| r + 1))
            .max(fact.cond.iter().map(|i| i + 1).max().unwrap_or(0));
        facts.push(fact);
    }
    let n = n.unwrap_or(max_node);
    if n == 0 {
        return Err(Error::input("facts file defines no nodes"));
    }
    FactSet::new(n, facts)
}

fn parse_native_fact(line: &str, lineno: usize) -> Result<Fact> {
    let toks: Vec<&str> = line.split_whitespace().collect();
    let err = |msg: &str| Error::parse(lineno, msg);
    if toks.len() < 5 {
        return Err(err("expected: dep|indep <x> <y> {..} obs|do=<i> <weight>"));
    }
    let kind = match toks[0] {
        "dep" => FactKind::Dep,
        "indep" => FactKind::Indep,
        _ => return Err(err("fact must start with dep or indep")),
    };
    let node = |s: &str| -> Result<NodeIdx> {
        let v: usize = s.parse().map_err(|_| err("invalid node id"))?;
        if v == 0 {
            return Err(err("node ids are 1-based"));
        }
        Ok(v - 1)
    };
    let x = node(toks[1])?;
    let y = node(toks[2])?;
    // The conditioning set may span several tokens: {}, {3}, {1 3} or {1,3}.
    let rest = toks[3..].join(" ");
    let open = rest.find('{').ok_or_else(|| err("missing conditioning set {..}"))?;
    let close = rest.find('}').ok_or_else(|| err("missing closing }"))?;
    let mut cond = NodeSet::EMPTY;
    for part in rest[open + 1..close].split([' ', ',']) {
        if !part.trim().is_empty() {
            cond.insert(node(part.trim())?);
        }
    }
    let tail: Vec<&str> = rest[close + 1..].split_whitespace().collect();
    if tail.len() != 2 {
        return Err(err("expected regime and weight after the conditioning set"));
    }
    let regime = if tail[0] == "obs" {
        None
    } else if let Some(i) = tail[0].strip_prefix("do=") {
        Some(node(i)?)
    } else {
        return Err(err("regime must be obs or do=<node>"));
    };
    let weight: u64 = tail[1].parse().map_err(|_| err("invalid weight"))?;
    Ok(Fact {
        kind,
        x,
        y,
        cond,
        regime,
        weight,
    })
}

fn parse_asp_fact(line: &str, lineno: usize) -> Result<Fact> {
    let err = |msg: &str| Error::parse(lineno, msg);
    let line = line.trim().trim_end_matches('.');
    let (name, args) = line
        .split_once('(')
        .ok_or_else(|| err("malformed ASP fact"))?;
    let kind = match name.trim() {
        "dep" => FactKind::Dep,
        "indep" => FactKind::Indep,
        _ => return Err(err("ASP fact must be dep(..) or indep(..)")),
    };
    let args = args
        .strip_suffix(')')
        .ok_or_else(|| err("missing closing parenthesis"))?;
    let vals: Vec<u64> = args
        .split(',')
        .map(|s| s.trim().parse().map_err(|_| err("invalid ASP argument")))
        .collect::<Result<_>>()?;
    if vals.len() != 5 {
        return Err(err("expected dep(X,Y,C,I,W)"));
    }
    let (x, y, mask, i, w) = (vals[0], vals[1], vals[2], vals[3], vals[4]);
    if x == 0 || y == 0 {
        return Err(err("node ids are 1-based"));
    }
    Ok(Fact {
        kind,
        x: x as usize - 1,
        y: y as usize - 1,
        cond: NodeSet::from_bits(mask),
        regime: if i == 0 { None } else { Some(i as usize - 1) },
        weight: w,
    })
}

/// Native serialization, one fact per line, with a `nodes` header.
pub fn serialize_facts(fs: &FactSet) -> String {
    let mut out = format!("nodes {}\n", fs.n);
    for f in &fs.facts {
        let kind = match f.kind {
            FactKind::Dep => "dep",
            FactKind::Indep => "indep",
        };
        let cond = f
            .cond
            .iter()
            .map(|i| (i + 1).to_string())
            .collect::<Vec<_>>()
            .join(" ");
        let regime = match f.regime {
            None => "obs".to_string(),
            Some(i) => format!("do={}", i + 1),
        };
        let _ = writeln!(
            out,
            "{kind} {} {} {{{cond}}} {regime} {}",
            f.x + 1,
            f.y + 1,
            f.weight
        );
    }
    out
}

/// One fact in the ASP syntax `dep(X,Y,C,I,W).` with C a bitmask.
pub fn fact_to_asp(f: &Fact) -> String {
    let kind = match f.kind {
        FactKind::Dep => "dep",
        FactKind::Indep => "indep",
    };
    format!(
        "{kind}({},{},{},{},{}).",
        f.x + 1,
        f.y + 1,
        f.cond.bits(),
        f.regime.map_or(0, |i| i + 1),
        f.weight
    )
}

// ── Graph families ───────────────────────────────────────────────────────

/// Subfamilies of ADMGs selectable for the search.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Admg,
    OAdmg,
    AAdmg,
    AmpCg,
    MvrCg,
    Dag,
    Ug,
    Bg,
}

pub const FAMILIES: [Family; 8] = [
    Family::Admg,
    Family::OAdmg,
    Family::AAdmg,
    Family::AmpCg,
    Family::MvrCg,
    Family::Dag,
    Family::Ug,
    Family::Bg,
];

impl Family {
    pub fn parse(s: &str) -> Result<Family> {
        Ok(match s {
            "admg" => Family::Admg,
            "oadmg" => Family::OAdmg,
            "aadmg" => Family::AAdmg,
            "amp-cg" => Family::AmpCg,
            "mvr-cg" => Family::MvrCg,
            "dag" => Family::Dag,
            "ug" => Family::Ug,
            "bg" => Family::Bg,
            _ => {
                return Err(Error::input(
                    "family must be one of admg, oadmg, aadmg, amp-cg, mvr-cg, dag, ug, bg",
                ))
            }
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::Admg => "admg",
            Family::OAdmg => "oadmg",
            Family::AAdmg => "aadmg",
            Family::AmpCg => "amp-cg",
            Family::MvrCg => "mvr-cg",
            Family::Dag => "dag",
            Family::Ug => "ug",
            Family::Bg => "bg",
        }
    }
}

/// Ancestral-closure acyclicity check for chain graphs: symmetric edges of
/// the given kind act as ancestors in both directions, and no directed edge
/// may oppose the resulting ancestral relation.
fn chain_acyclic(g: &Admg, symmetric_bidirected: bool) -> bool {
    let n = g.n();
    let mut anc = vec![false; n * n];
    for (a, b) in g.directed_edges() {
        anc[a * n + b] = true;
    }
    let sym: Vec<(NodeIdx, NodeIdx)> = if symmetric_bidirected {
        g.bidirected_edges().collect()
    } else {
        g.undirected_edges().collect()
    };
    for &(a, b) in &sym {
        anc[a * n + b] = true;
        anc[b * n + a] = true;
    }
    // Transitive closure.
    for k in 0..n {
        for i in 0..n {
            if anc[i * n + k] {
                for j in 0..n {
                    if anc[k * n + j] {
                        anc[i * n + j] = true;
                    }
                }
            }
        }
    }
    g.directed_edges().all(|(a, b)| !anc[b * n + a])
}

/// Membership test for the subfamily constraints; a graph may belong to
/// several families at once.
pub fn in_family(g: &Admg, fam: Family) -> bool {
    let has_line = g.undirected_edges().next().is_some();
    let has_bi = g.bidirected_edges().next().is_some();
    let has_arrow = g.directed_edges().next().is_some();
    match fam {
        Family::Admg => true,
        Family::OAdmg => !has_line,
        Family::AAdmg => !has_bi,
        Family::Dag => !has_line && !has_bi,
        Family::Ug => !has_arrow && !has_bi,
        Family::Bg => !has_arrow && !has_line,
        Family::AmpCg => {
            !has_bi
                && g.undirected_edges()
                    .all(|(a, b)| !g.has_directed(a, b) && !g.has_directed(b, a))
                && chain_acyclic(g, false)
        }
        Family::MvrCg => {
            !has_line
                && g.bidirected_edges()
                    .all(|(a, b)| !g.has_directed(a, b) && !g.has_directed(b, a))
                && chain_acyclic(g, true)
        }
    }
}

// ── Enumeration ──────────────────────────────────────────────────────────

/// Streams every graph of the subfamily over `n` nodes labelled `1..n`:
/// per unordered pair, a line bit, a biarrow bit and a directed choice
/// (none / forward / backward), filtered by acyclicity and the family's
/// constraints.
pub fn enumerate_graphs(n: usize, fam: Family) -> Result<impl Iterator<Item = Admg>> {
    if n == 0 || n > 6 {
        return Err(Error::input("graph enumeration supports 1..=6 nodes"));
    }
    // Digit alphabet per pair: d & 1 = line, d & 2 = biarrow, d >> 2 = arrow
    // direction (0 none, 1 forward, 2 backward).
    let allowed: Vec<u8> = (0u8..12)
        .filter(|d| {
            let (line, bi, arrow) = (d & 1 != 0, d & 2 != 0, d >> 2 != 0);
            match fam {
                Family::Admg => true,
                Family::OAdmg => !line,
                Family::AAdmg => !bi,
                Family::Dag => !line && !bi,
                Family::Ug => !bi && !arrow,
                Family::Bg => !line && !arrow,
                Family::AmpCg => !bi && !(line && arrow),
                Family::MvrCg => !line && !(bi && arrow),
            }
        })
        .collect();
    let pairs: Vec<(NodeIdx, NodeIdx)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    let labels: Vec<String> = (1..=n).map(|i| i.to_string()).collect();
    let mut odometer = vec![0usize; pairs.len()];
    let mut done = false;
    Ok(std::iter::from_fn(move || {
        loop {
            if done {
                return None;
            }
            let digits: Vec<u8> = odometer.iter().map(|&i| allowed[i]).collect();
            // Advance the odometer for the next call.
            let mut pos = 0;
            loop {
                if pos == odometer.len() {
                    done = true;
                    break;
                }
                odometer[pos] += 1;
                if odometer[pos] < allowed.len() {
                    break;
                }
                odometer[pos] = 0;
                pos += 1;
            }
            if let Some(g) = build_graph(&labels, &pairs, &digits, fam) {
                return Some(g);
            }
        }
    }))
}

fn build_graph(
    labels: &[String],
    pairs: &[(NodeIdx, NodeIdx)],
    digits: &[u8],
    fam: Family,
) -> Option<Admg> {
    let mut g = Admg::new(labels.iter().cloned()).expect("valid labels");
    for (&(i, j), &d) in pairs.iter().zip(digits) {
        if d & 1 != 0 {
            g.add_undirected(i, j).ok()?;
        }
        if d & 2 != 0 {
            g.add_bidirected(i, j).ok()?;
        }
        match d >> 2 {
            1 => g.add_directed(i, j).ok()?,
            2 => g.add_directed(j, i).ok()?,
            _ => {}
        }
    }
    match fam {
        Family::AmpCg => chain_acyclic(&g, false).then_some(g),
        Family::MvrCg => chain_acyclic(&g, true).then_some(g),
        _ => Some(g),
    }
}

// ── Scoring ──────────────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LearnConfig {
    pub subfamily: Family,
    pub line_penalty: u64,
    pub arrow_penalty: u64,
    pub biarrow_penalty: u64,
}

impl Default for LearnConfig {
    fn default() -> LearnConfig {
        LearnConfig {
            subfamily: Family::Admg,
            line_penalty: 1,
            arrow_penalty: 1,
            biarrow_penalty: 1,
        }
    }
}

/// The graph governing a regime: the observational graph itself, or the
/// intervention surgery on the intervened node.
pub fn regime_graph(g: &Admg, i: Option<NodeIdx>) -> Admg {
    match i {
        None => g.clone(),
        Some(i) => surgery::intervene(g, NodeSet::singleton(i)),
    }
}

/// Penalty of a candidate graph: `None` when some dependence fact has no
/// connecting route (hard rejection); otherwise the weights of the violated
/// independence facts plus the per-edge penalties.
pub fn score(g: &Admg, facts: &FactSet, cfg: &LearnConfig) -> Result<Option<u64>> {
    if facts.n != g.n() {
        return Err(Error::input("facts and graph disagree on the node count"));
    }
    let mut regimes: BTreeMap<Option<NodeIdx>, Admg> = BTreeMap::new();
    let mut penalty = 0u64;
    for f in &facts.facts {
        let gi = regimes
            .entry(f.regime)
            .or_insert_with(|| regime_graph(g, f.regime));
        let connected = sep::connects_by_route(gi, f.x, f.y, f.cond)?;
        match f.kind {
            FactKind::Dep if !connected => return Ok(None),
            FactKind::Indep if connected => penalty += f.weight,
            _ => {}
        }
    }
    penalty += g.undirected_edges().count() as u64 * cfg.line_penalty;
    penalty += g.directed_edges().count() as u64 * cfg.arrow_penalty;
    penalty += g.bidirected_edges().count() as u64 * cfg.biarrow_penalty;
    Ok(Some(penalty))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnResult {
    pub penalty: u64,
    pub graphs: Vec<Admg>,
}

type EdgeLists = (
    Vec<(NodeIdx, NodeIdx)>,
    Vec<(NodeIdx, NodeIdx)>,
    Vec<(NodeIdx, NodeIdx)>,
);

fn graph_key(g: &Admg) -> EdgeLists {
    let mut d: Vec<_> = g.directed_edges().collect();
    let mut u: Vec<_> = g.undirected_edges().collect();
    let mut b: Vec<_> = g.bidirected_edges().collect();
    d.sort_unstable();
    u.sort_unstable();
    b.sort_unstable();
    (d, u, b)
}

/// Exhaustive exact search: returns every graph of the subfamily attaining
/// the minimal penalty, in canonical edge-list order.
pub fn learn(facts: &FactSet, cfg: &LearnConfig) -> Result<LearnResult> {
    let mut best: Option<u64> = None;
    let mut graphs: Vec<Admg> = Vec::new();
    for g in enumerate_graphs(facts.n, cfg.subfamily)? {
        let Some(p) = score(&g, facts, cfg)? else {
            continue;
        };
        match best {
            Some(b) if p > b => {}
            Some(b) if p == b => graphs.push(g),
            _ => {
                best = Some(p);
                graphs = vec![g];
            }
        }
    }
    let Some(penalty) = best else {
        return Err(Error::Infeasible(
            "no graph in the family satisfies every dependence fact".into(),
        ));
    };
    graphs.sort_by_key(graph_key);
    Ok(LearnResult { penalty, graphs })
}

// ── ASP emission ─────────────────────────────────────────────────────────

/// Core rules of the search, in ASP syntax for an external solver: edge
/// guesses, interventional edges, symmetry and acyclicity, the route
/// criterion as a reachability program, the hard dependence constraint and
/// the soft independence constraint.
const ASP_PROGRAM: &str = "\
node(X) :- nodes(N), X=1..N.

{ line(X,Y,0) } :- node(X), node(Y), X != Y.
{ arrow(X,Y,0) } :- node(X), node(Y), X != Y.
{ biarrow(X,Y,0) } :- node(X), node(Y), X != Y.
line(X,Y,I) :- line(X,Y,0), node(I), X != I, Y != I, I > 0.
line(X,Y,I) :- line(X,I,0), line(I,Y,0), node(I), X != Y, I > 0.
arrow(X,Y,I) :- arrow(X,Y,0), node(I), Y != I, I > 0.
biarrow(X,Y,I) :- biarrow(X,Y,0), node(I), X != I, Y != I, I > 0.
line(X,Y,I) :- line(Y,X,I).
:- arrow(X,Y,I), arrow(Y,X,I).
biarrow(X,Y,I) :- biarrow(Y,X,I).

ancestor(X,Y) :- arrow(X,Y,0).
ancestor(X,Y) :- ancestor(X,Z), ancestor(Z,Y).
:- ancestor(X,Y), arrow(Y,X,0).

inside_set(X,C) :- node(X), set(C), 2**(X-1) & C != 0.
outside_set(X,C) :- node(X), set(C), 2**(X-1) & C = 0.

end_line(X,Y,C,I) :- line(X,Y,I), outside_set(X,C).
end_head(X,Y,C,I) :- arrow(X,Y,I), outside_set(X,C).
end_head(X,Y,C,I) :- biarrow(X,Y,I), outside_set(X,C).
end_tail(X,Y,C,I) :- arrow(Y,X,I), outside_set(X,C).

end_line(X,Y,C,I) :- end_line(X,Z,C,I), line(Z,Y,I), outside_set(Z,C).
end_line(X,Y,C,I) :- end_line(X,Z,C,I), line(Z,Y,I), biarrow(Z,W,I).
end_line(X,Y,C,I) :- end_tail(X,Z,C,I), line(Z,Y,I), outside_set(Z,C).
end_head(X,Y,C,I) :- end_line(X,Z,C,I), arrow(Z,Y,I), outside_set(Z,C).
end_head(X,Y,C,I) :- end_head(X,Z,C,I), arrow(Z,Y,I), outside_set(Z,C).
end_head(X,Y,C,I) :- end_tail(X,Z,C,I), arrow(Z,Y,I), outside_set(Z,C).
end_head(X,Y,C,I) :- end_tail(X,Z,C,I), biarrow(Z,Y,I), outside_set(Z,C).
end_tail(X,Y,C,I) :- end_tail(X,Z,C,I), arrow(Y,Z,I), outside_set(Z,C).

end_line(X,Y,C,I) :- end_head(X,Z,C,I), line(Z,Y,I), inside_set(Z,C).
end_head(X,Y,C,I) :- end_line(X,Z,C,I), biarrow(Z,Y,I), inside_set(Z,C).
end_head(X,Y,C,I) :- end_head(X,Z,C,I), biarrow(Z,Y,I), inside_set(Z,C).
end_tail(X,Y,C,I) :- end_line(X,Z,C,I), arrow(Y,Z,I), inside_set(Z,C).
end_tail(X,Y,C,I) :- end_head(X,Z,C,I), arrow(Y,Z,I), inside_set(Z,C).

con(X,Y,C,I) :- end_line(X,Y,C,I), X != Y, outside_set(Y,C).
con(X,Y,C,I) :- end_head(X,Y,C,I), X != Y, outside_set(Y,C).
con(X,Y,C,I) :- end_tail(X,Y,C,I), X != Y, outside_set(Y,C).
con(X,Y,C,I) :- con(Y,X,C,I).

:- dep(X,Y,C,I,W), not con(X,Y,C,I).

:~ indep(X,Y,C,I,W), con(X,Y,C,I). [W,X,Y,C,I]
";

fn family_constraints(fam: Family) -> &'static str {
    match fam {
        Family::Admg => "",
        Family::OAdmg => ":- line(X,Y,0).\n",
        Family::AAdmg => ":- biarrow(X,Y,0).\n",
        Family::AmpCg => {
            ":- biarrow(X,Y,0).\n:- line(X,Y,0), arrow(X,Y,0).\nancestor(X,Y) :- line(X,Y,0).\n"
        }
        Family::MvrCg => {
            ":- line(X,Y,0).\n:- biarrow(X,Y,0), arrow(X,Y,0).\nancestor(X,Y) :- biarrow(X,Y,0).\n"
        }
        Family::Dag => ":- line(X,Y,0).\n:- biarrow(X,Y,0).\n",
        Family::Ug => ":- arrow(X,Y,0).\n:- biarrow(X,Y,0).\n",
        Family::Bg => ":- arrow(X,Y,0).\n:- line(X,Y,0).\n",
    }
}

/// Emits a complete ASP program for an external solver: the search rules,
/// the subfamily constraints, the per-edge penalty rules with the configured
/// weights, the domain declaration and the facts.
pub fn emit_asp(facts: &FactSet, cfg: &LearnConfig) -> String {
    let mut out = String::from(ASP_PROGRAM);
    out.push('\n');
    out.push_str(family_constraints(cfg.subfamily));
    let _ = writeln!(out, ":~ line(X,Y,0), X < Y. [{},X,Y,1]", cfg.line_penalty);
    let _ = writeln!(out, ":~ arrow(X,Y,0). [{},X,Y,2]", cfg.arrow_penalty);
    let _ = writeln!(out, ":~ biarrow(X,Y,0), X < Y. [{},X,Y,3]", cfg.biarrow_penalty);
    out.push_str("\n#show.\n#show line(X,Y) : line(X,Y,0), X < Y.\n#show arrow(X,Y) : arrow(X,Y,0).\n#show biarrow(X,Y) : biarrow(X,Y,0), X < Y.\n\n");
    let _ = writeln!(out, "nodes({}).", facts.n);
    let _ = writeln!(out, "set(0..{}).", (1u64 << facts.n) - 1);
    out.push('\n');
    for f in &facts.facts {
        out.push_str(&fact_to_asp(f));
        out.push('\n');
    }
    out
}
