//! Causal-effect identification on ADMGs: calculus rules, back-door and
//! front-door criteria, context marginalization, Q-decomposition criteria
//! (full, marginal and conditional), a sequential procedure for multi-node
//! interventions, and a dispatcher combining them.
//!
//! Every positive answer carries a symbolic [`Estimand`] over the
//! observational distribution (possibly via named intermediate
//! distributions); negative answers from the decomposition criteria carry an
//! undirected witness path. Criteria that are merely sufficient never report
//! non-identifiability; the dispatcher answers `Undecided` when no criterion
//! applies.

use std::collections::{BTreeSet, HashMap, VecDeque};

use crate::error::Error;
use crate::estimand::{self, Estimand, GaussianDist, Occ, OBS_DIST};
use crate::graph::{subsets_of, Admg, NodeIdx, NodeSet};
use crate::sep::{self, Criterion, SeparationQuery};
use crate::surgery::{self, EdgeFilterSpec};
use crate::Result;

// ── Queries and results ──────────────────────────────────────────────────

/// An interventional query `p(y | do(x), given)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EffectQuery {
    pub x: NodeSet,
    pub y: NodeSet,
    pub given: NodeSet,
}

impl EffectQuery {
    pub fn new(x: NodeSet, y: NodeSet, given: NodeSet) -> Result<EffectQuery> {
        if x.is_empty() || y.is_empty() {
            return Err(Error::input("x and y must be nonempty"));
        }
        if !x.is_disjoint(y) || !x.is_disjoint(given) || !y.is_disjoint(given) {
            return Err(Error::input("x, y and the conditioning set must be pairwise disjoint"));
        }
        Ok(EffectQuery { x, y, given })
    }

    pub fn from_labels(g: &Admg, x: &[&str], y: &[&str], given: &[&str]) -> Result<EffectQuery> {
        EffectQuery::new(g.node_set(x)?, g.node_set(y)?, g.node_set(given)?)
    }
}

/// An undirected path certifying non-identifiability: it runs from the
/// intervened node to one of its children through undirected edges only.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UndirectedWitness {
    pub nodes: Vec<NodeIdx>,
}

impl UndirectedWitness {
    pub fn render(&self, g: &Admg) -> String {
        self.nodes
            .iter()
            .map(|&v| g.label(v))
            .collect::<Vec<_>>()
            .join(" -- ")
    }
}

/// A named intermediate distribution produced by the sequential procedure:
/// `estimand` expresses it in terms of earlier distributions; `fixed` lists
/// the variables whose (intervention or conditioning) values are plugged in
/// when evaluating it, leaving a distribution over `vars`.
#[derive(Debug, Clone, PartialEq)]
pub struct Intermediate {
    pub name: String,
    pub vars: Vec<String>,
    pub fixed: Vec<String>,
    pub estimand: Estimand,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    Identified {
        estimand: Estimand,
        intermediates: Vec<Intermediate>,
    },
    NotIdentified {
        witness: UndirectedWitness,
    },
    Undecided,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentificationResult {
    pub verdict: Verdict,
    /// Name of the criterion that settled the query.
    pub criterion: String,
    /// Human-readable derivation steps.
    pub derivation: Vec<String>,
}

impl IdentificationResult {
    fn identified(estimand: Estimand, criterion: &str, derivation: Vec<String>) -> Self {
        IdentificationResult {
            verdict: Verdict::Identified {
                estimand,
                intermediates: Vec::new(),
            },
            criterion: criterion.into(),
            derivation,
        }
    }

    /// The estimand of an identified result, if any.
    pub fn estimand(&self) -> Option<&Estimand> {
        match &self.verdict {
            Verdict::Identified { estimand, .. } => Some(estimand),
            _ => None,
        }
    }
}

/// Evaluates an identified result against a Gaussian observational
/// distribution, plugging `fixed` values for the intervened and conditioning
/// variables; returns the Gaussian over the remaining free variables.
pub fn evaluate(
    res: &IdentificationResult,
    obs: &GaussianDist,
    fixed: &HashMap<String, f64>,
) -> Result<GaussianDist> {
    let Verdict::Identified { estimand, intermediates } = &res.verdict else {
        return Err(Error::input("only identified results can be evaluated"));
    };
    let mut base = HashMap::new();
    base.insert(OBS_DIST.to_string(), obs.clone());
    for im in intermediates {
        // Each intermediate only absorbs the values listed as fixed at its
        // own step; later variables stay free until their own step.
        let mut sub = HashMap::new();
        for v in &im.fixed {
            let value = fixed
                .get(v)
                .ok_or_else(|| Error::input(format!("missing value for {v:?}")))?;
            sub.insert(v.clone(), *value);
        }
        let d = estimand::eval_gaussian(&im.estimand, &base, &sub)?;
        base.insert(im.name.clone(), d);
    }
    estimand::eval_gaussian(estimand, &base, fixed)
}

// ── Bound-symbol management ──────────────────────────────────────────────

/// Generates display symbols for bound variables: lowercase of the label,
/// primed when the variable also occurs free in the final estimand or when
/// the symbol is already taken.
#[derive(Debug, Clone)]
struct SymGen {
    taken: BTreeSet<String>,
    free: BTreeSet<String>,
}

impl SymGen {
    fn new(free: impl IntoIterator<Item = String>) -> SymGen {
        SymGen {
            taken: BTreeSet::new(),
            free: free.into_iter().collect(),
        }
    }

    fn for_sets(g: &Admg, free: NodeSet) -> SymGen {
        SymGen::new(free.iter().map(|v| g.label(v).to_string()))
    }

    fn fresh(&mut self, label: &str) -> String {
        let mut s = label.to_lowercase();
        if self.free.contains(label) {
            s.push('\'');
        }
        while self.taken.contains(&s) {
            s.push('\'');
        }
        self.taken.insert(s.clone());
        s
    }
}

/// Replaces every free occurrence of `var` with the bound symbol `sym`.
fn subst(e: &Estimand, var: &str, sym: &str) -> Estimand {
    let occ = |o: &Occ| match o {
        Occ::Free(v) if v == var => Occ::bound(sym, var),
        other => other.clone(),
    };
    match e {
        Estimand::Term(t) => Estimand::term(
            t.dist.clone(),
            t.targets.iter().map(occ).collect(),
            t.given.iter().map(occ).collect(),
        ),
        Estimand::Sum { sym: s, var: v, body } => {
            Estimand::sum(s.clone(), v.clone(), subst(body, var, sym))
        }
        Estimand::Product(fs) => {
            Estimand::Product(fs.iter().map(|f| subst(f, var, sym)).collect())
        }
        Estimand::Quotient(n, d) => Estimand::Quotient(
            Box::new(subst(n, var, sym)),
            Box::new(subst(d, var, sym)),
        ),
        Estimand::One => Estimand::One,
    }
}

fn free_occs(g: &Admg, s: NodeSet) -> Vec<Occ> {
    s.iter().map(|v| Occ::free(g.label(v))).collect()
}

fn fmt_set(g: &Admg, s: NodeSet) -> String {
    s.iter().map(|v| g.label(v)).collect::<Vec<_>>().join(",")
}

// ── Calculus rules ───────────────────────────────────────────────────────

/// Which graph the rule antecedent is evaluated in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuleForm {
    /// The intervened graph `G_x̂`, conditioning on `x ∪ w`.
    IntervenedGraph,
    /// The graph with directed edges into and out of `x` deleted,
    /// conditioning on `w` only.
    Simplified,
}

/// Antecedent of calculus rule 1, 2 or 3 for the rewrite of
/// `p(y | do(x), [do]z, w)`; an empty `z` holds trivially.
pub fn rule_applies(
    g: &Admg,
    rule: u8,
    x: NodeSet,
    y: NodeSet,
    z: NodeSet,
    w: NodeSet,
    form: RuleForm,
) -> Result<bool> {
    if !(1..=3).contains(&rule) {
        return Err(Error::input("rule must be 1, 2 or 3"));
    }
    let sets = [x, y, z, w];
    for i in 0..4 {
        for j in i + 1..4 {
            if !sets[i].is_disjoint(sets[j]) {
                return Err(Error::input("x, y, z, w must be pairwise disjoint"));
            }
        }
    }
    if z.is_empty() {
        return Ok(true);
    }
    let (base, cond) = match form {
        RuleForm::IntervenedGraph => (surgery::intervene(g, x), x.union(w)),
        RuleForm::Simplified => (
            surgery::delete_edges(
                g,
                EdgeFilterSpec {
                    delete_directed_into: x,
                    delete_directed_out_of: x,
                    ..Default::default()
                },
            ),
            w,
        ),
    };
    let test = match rule {
        1 => base.clone(),
        2 => surgery::delete_edges(
            &base,
            EdgeFilterSpec {
                delete_directed_out_of: z,
                ..Default::default()
            },
        ),
        _ => {
            let zw = z.minus(base.ancestors(w));
            surgery::delete_edges(
                &base,
                EdgeFilterSpec {
                    delete_directed_into: zw,
                    delete_undirected_into: zw,
                    ..Default::default()
                },
            )
        }
    };
    sep::separated(&test, SeparationQuery::new(y, z, cond)?, Criterion::Route)
}

/// Budget for the bounded calculus derivation search: rule applications and
/// marginalization steps each consume one unit.
const CALC_DEPTH: u32 = 4;

fn subsets_desc(s: NodeSet) -> Vec<NodeSet> {
    let mut out: Vec<NodeSet> = subsets_of(s).into_iter().filter(|z| !z.is_empty()).collect();
    out.sort_by_key(|z| (usize::MAX - z.len(), z.bits()));
    out
}

/// Bounded derivation search for `p(y | do(hat), obs)`.
fn calc_solve(
    g: &Admg,
    y: NodeSet,
    hat: NodeSet,
    obs: NodeSet,
    depth: u32,
    syms: &mut SymGen,
    deriv: &mut Vec<String>,
) -> Result<Option<Estimand>> {
    if hat.is_empty() {
        return Ok(Some(Estimand::term(
            OBS_DIST,
            free_occs(g, y),
            free_occs(g, obs),
        )));
    }
    if depth == 0 {
        return Ok(None);
    }
    for z in subsets_desc(hat) {
        let xr = hat.minus(z);
        if rule_applies(g, 3, xr, y, z, obs, RuleForm::IntervenedGraph)? {
            let (saved, mark) = (syms.clone(), deriv.len());
            deriv.push(format!("rule 3: drop do({})", fmt_set(g, z)));
            if let Some(e) = calc_solve(g, y, xr, obs, depth - 1, syms, deriv)? {
                return Ok(Some(e));
            }
            *syms = saved;
            deriv.truncate(mark);
        }
        if rule_applies(g, 2, xr, y, z, obs, RuleForm::IntervenedGraph)? {
            let (saved, mark) = (syms.clone(), deriv.len());
            deriv.push(format!("rule 2: do({0}) -> {0}", fmt_set(g, z)));
            if let Some(e) = calc_solve(g, y, xr, obs.union(z), depth - 1, syms, deriv)? {
                return Ok(Some(e));
            }
            *syms = saved;
            deriv.truncate(mark);
        }
    }
    for z in subsets_desc(obs) {
        if rule_applies(g, 1, hat, y, z, obs.minus(z), RuleForm::IntervenedGraph)? {
            let (saved, mark) = (syms.clone(), deriv.len());
            deriv.push(format!("rule 1: drop observation {}", fmt_set(g, z)));
            if let Some(e) = calc_solve(g, y, hat, obs.minus(z), depth - 1, syms, deriv)? {
                return Ok(Some(e));
            }
            *syms = saved;
            deriv.truncate(mark);
        }
    }
    for c in g.all_nodes().minus(y.union(hat).union(obs)).iter() {
        let (saved, mark) = (syms.clone(), deriv.len());
        deriv.push(format!("marginalize over {}", g.label(c)));
        let e1 = calc_solve(g, y, hat, obs.with(c), depth - 1, syms, deriv)?;
        let e2 = match &e1 {
            Some(_) => calc_solve(g, NodeSet::singleton(c), hat, obs, depth - 1, syms, deriv)?,
            None => None,
        };
        if let (Some(e1), Some(e2)) = (e1, e2) {
            let label = g.label(c).to_string();
            let sym = syms.fresh(&label);
            let body = Estimand::product(vec![subst(&e1, &label, &sym), subst(&e2, &label, &sym)]);
            return Ok(Some(Estimand::sum(sym, label, body)));
        }
        *syms = saved;
        deriv.truncate(mark);
    }
    Ok(None)
}

// ── Back-door and front-door ─────────────────────────────────────────────

/// The set `s` satisfies the back-door criterion relative to `(x, y)`:
/// it contains no descendant of `x` and blocks every connecting path from
/// `x` to `y` other than directed paths `x -> .. -> y`.
pub fn backdoor_satisfied(g: &Admg, x: NodeSet, y: NodeSet, s: NodeSet) -> Result<bool> {
    if !s.is_disjoint(g.descendants(x)) {
        return Ok(false);
    }
    for a in x.iter() {
        for b in y.iter() {
            if sep::connects_by_nondirected_path(g, a, b, s)?.is_some() {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Back-door search for `p(y | do(x), w)` with a single intervened node:
/// finds the smallest `z` disjoint from the query such that `w ∪ z`
/// satisfies the back-door criterion, and returns it with the adjustment
/// estimand `Σ_z p(y | x, w, z) p(z | w)`.
pub fn backdoor(g: &Admg, q: &EffectQuery) -> Result<Option<(NodeSet, Estimand)>> {
    let x = single(q.x)?;
    let mut candidates: Vec<NodeSet> =
        subsets_of(g.all_nodes().minus(q.x.union(q.y).union(q.given)));
    candidates.sort_by_key(|z| (z.len(), z.bits()));
    for z in candidates {
        if !backdoor_satisfied(g, q.x, q.y, q.given.union(z))? {
            continue;
        }
        let mut syms = SymGen::for_sets(g, q.x.union(q.y).union(q.given));
        let z_occs: Vec<(String, String)> = z
            .iter()
            .map(|v| {
                let label = g.label(v).to_string();
                (syms.fresh(&label), label)
            })
            .collect();
        let mut inner_given = free_occs(g, NodeSet::singleton(x));
        inner_given.extend(free_occs(g, q.given));
        inner_given.extend(
            z_occs
                .iter()
                .map(|(s, v)| Occ::bound(s.clone(), v.clone())),
        );
        let est_inner = Estimand::term(OBS_DIST, free_occs(g, q.y), inner_given);
        let mut est = if z.is_empty() {
            est_inner
        } else {
            let adj = Estimand::term(
                OBS_DIST,
                z_occs
                    .iter()
                    .map(|(s, v)| Occ::bound(s.clone(), v.clone()))
                    .collect(),
                free_occs(g, q.given),
            );
            let mut body = Estimand::product(vec![est_inner, adj]);
            for (s, v) in z_occs.into_iter().rev() {
                body = Estimand::sum(s, v, body);
            }
            body
        };
        est = estimand::simplify(&est);
        return Ok(Some((z, est)));
    }
    Ok(None)
}

fn single(x: NodeSet) -> Result<NodeIdx> {
    if x.len() != 1 {
        return Err(Error::input("this criterion handles a single intervened node"));
    }
    Ok(x.iter().next().unwrap())
}

/// Nodes reachable from `from` by directed paths avoiding `avoid`.
fn directed_reach_avoiding(g: &Admg, from: NodeIdx, avoid: NodeSet) -> NodeSet {
    let mut seen = NodeSet::singleton(from);
    let mut stack = vec![from];
    while let Some(v) = stack.pop() {
        for u in g.children(NodeSet::singleton(v)).iter() {
            if !avoid.contains(u) && !seen.contains(u) {
                seen.insert(u);
                stack.push(u);
            }
        }
    }
    seen.without(from)
}

/// Front-door search for `p(y | do(x), w)` with a single intervened node:
/// finds the smallest mediator set `z` such that `w` contains no descendant
/// of `x`, `z` intercepts every directed path from `x` to `y`, `w` satisfies
/// the back-door criterion for `(x, z)` and `w ∪ {x}` for `(z, y)`; the
/// estimand is `Σ_z p(z | x, w) Σ_{x'} p(y | z, w, x') p(x' | w)`.
pub fn frontdoor(g: &Admg, q: &EffectQuery) -> Result<Option<(NodeSet, Estimand)>> {
    let x = single(q.x)?;
    if !q.given.is_disjoint(g.descendants(q.x)) {
        return Ok(None);
    }
    let mut candidates: Vec<NodeSet> =
        subsets_of(g.all_nodes().minus(q.x.union(q.y).union(q.given)))
            .into_iter()
            .filter(|z| !z.is_empty())
            .collect();
    candidates.sort_by_key(|z| (z.len(), z.bits()));
    for z in candidates {
        let reach = directed_reach_avoiding(g, x, z);
        if !reach.is_disjoint(q.y) {
            continue;
        }
        if !backdoor_satisfied(g, q.x, z, q.given)? {
            continue;
        }
        if !backdoor_satisfied(g, z, q.y, q.given.union(q.x))? {
            continue;
        }
        let mut syms = SymGen::for_sets(g, q.x.union(q.y).union(q.given));
        let x_label = g.label(x).to_string();
        let z_syms: Vec<(String, String)> = z
            .iter()
            .map(|v| {
                let label = g.label(v).to_string();
                (syms.fresh(&label), label)
            })
            .collect();
        let x_sym = syms.fresh(&x_label);
        let z_bound: Vec<Occ> = z_syms
            .iter()
            .map(|(s, v)| Occ::bound(s.clone(), v.clone()))
            .collect();
        let mut med_given = free_occs(g, q.x);
        med_given.extend(free_occs(g, q.given));
        let mediator = Estimand::term(OBS_DIST, z_bound.clone(), med_given);
        let mut out_given = z_bound;
        out_given.extend(free_occs(g, q.given));
        out_given.push(Occ::bound(x_sym.clone(), x_label.clone()));
        let outcome = Estimand::term(OBS_DIST, free_occs(g, q.y), out_given);
        let base = Estimand::term(
            OBS_DIST,
            vec![Occ::bound(x_sym.clone(), x_label.clone())],
            free_occs(g, q.given),
        );
        let inner = Estimand::sum(
            x_sym,
            x_label,
            Estimand::product(vec![outcome, base]),
        );
        let mut body = Estimand::product(vec![mediator, inner]);
        for (s, v) in z_syms.into_iter().rev() {
            body = Estimand::sum(s, v, body);
        }
        return Ok(Some((z, estimand::simplify(&body))));
    }
    Ok(None)
}

// ── Context marginalization ──────────────────────────────────────────────

/// If `inner` identifies `p(y | do(x), w)` and `w` contains no descendant of
/// `x`, then `p(y | do(x)) = Σ_w inner p(w)`.
pub fn marginalize_context(
    g: &Admg,
    x: NodeSet,
    w: NodeSet,
    inner: &Estimand,
) -> Result<Estimand> {
    if w.is_empty() {
        return Ok(inner.clone());
    }
    if !w.is_disjoint(g.descendants(x)) {
        return Err(Error::input("the marginalized context may not contain descendants of x"));
    }
    let free: Vec<String> = inner
        .free_variables()
        .into_iter()
        .filter(|v| w.iter().all(|i| g.label(i) != v))
        .collect();
    let mut syms = SymGen::new(free);
    let mut body = inner.clone();
    let mut w_occs = Vec::new();
    for v in w.iter() {
        let label = g.label(v).to_string();
        let sym = syms.fresh(&label);
        body = subst(&body, &label, &sym);
        w_occs.push((sym, label));
    }
    let weight = Estimand::term(
        OBS_DIST,
        w_occs
            .iter()
            .map(|(s, v)| Occ::bound(s.clone(), v.clone()))
            .collect(),
        Vec::new(),
    );
    let mut e = Estimand::product(vec![body, weight]);
    for (s, v) in w_occs.into_iter().rev() {
        e = Estimand::sum(s, v, e);
    }
    Ok(e)
}

// ── Q-decomposition ──────────────────────────────────────────────────────

fn require_no_bidirected(g: &Admg) -> Result<()> {
    if g.bidirected_edges().next().is_some() {
        return Err(Error::Unsupported(
            "decomposition criteria require a graph without bidirected edges".into(),
        ));
    }
    Ok(())
}

fn require_ancestral(g: &Admg, wprime: NodeSet) -> Result<()> {
    if !g.is_ancestral(wprime) {
        return Err(Error::input("the conditioning context must be an ancestral set"));
    }
    Ok(())
}

/// Shortest undirected path inside `within` from `from` to any of `targets`.
fn line_path(g: &Admg, within: NodeSet, from: NodeIdx, targets: NodeSet) -> Option<Vec<NodeIdx>> {
    if targets.is_empty() {
        return None;
    }
    let mut prev: Vec<Option<NodeIdx>> = vec![None; g.n()];
    let mut seen = NodeSet::singleton(from);
    let mut queue = VecDeque::from([from]);
    while let Some(v) = queue.pop_front() {
        if targets.contains(v) && v != from {
            let mut path = vec![v];
            let mut cur = v;
            while let Some(p) = prev[cur] {
                path.push(p);
                cur = p;
            }
            path.reverse();
            return Some(path);
        }
        for u in g.neighbors(NodeSet::singleton(v)).iter() {
            if within.contains(u) && !seen.contains(u) {
                seen.insert(u);
                prev[u] = Some(v);
                queue.push_back(u);
            }
        }
    }
    None
}

/// Strengthened necessity check: for `x` inside a set `wsub`, an undirected
/// path in the induced subgraph on `wsub` from `x` to one of its children
/// certifies that `p(wsub \ x | do(x), ...)` is not identifiable.
pub fn not_identifiable_by_subset(
    g: &Admg,
    wsub: NodeSet,
    x: NodeIdx,
) -> Result<Option<UndirectedWitness>> {
    require_no_bidirected(g)?;
    if !wsub.contains(x) {
        return Err(Error::input("x must belong to the examined subset"));
    }
    let children = g.children(NodeSet::singleton(x)).inter(wsub);
    Ok(line_path(g, wsub, x, children).map(|nodes| UndirectedWitness { nodes }))
}

/// Q-factor product over the listed components: each component contributes
/// `Π_i p(v_i | v_1..v_{i-1}, wprime)` along `order`, conditioning on all
/// earlier nodes of the order; the factor of the component containing `x` is
/// wrapped in a sum binding `x`.
fn q_product(
    g: &Admg,
    order: &[NodeIdx],
    comps: &[NodeSet],
    wprime: NodeSet,
    x: NodeIdx,
    dist: &str,
    syms: &mut SymGen,
) -> Estimand {
    let factor = |comp: NodeSet| -> Estimand {
        let mut terms = Vec::new();
        let mut prefix: Vec<NodeIdx> = Vec::new();
        for &v in order {
            if comp.contains(v) {
                let mut given: Vec<Occ> =
                    prefix.iter().map(|&u| Occ::free(g.label(u))).collect();
                given.extend(free_occs(g, wprime));
                terms.push(Estimand::term(dist, vec![Occ::free(g.label(v))], given));
            }
            prefix.push(v);
        }
        Estimand::product(terms)
    };
    let sx = comps.iter().position(|c| c.contains(x)).expect("x lies in some component");
    let label = g.label(x).to_string();
    let sym = syms.fresh(&label);
    let own = Estimand::sum(sym.clone(), label.clone(), subst(&factor(comps[sx]), &label, &sym));
    let mut factors = vec![own];
    for (j, &comp) in comps.iter().enumerate() {
        if j != sx {
            factors.push(factor(comp));
        }
    }
    Estimand::product(factors)
}

/// The Q-factor `Q(s | wprime)` of one undirected component of
/// `W = V \ wprime`, as a product of observational conditionals along the
/// canonical topological order of `W`.
pub fn q_factor(g: &Admg, wprime: NodeSet, s: NodeSet) -> Result<Estimand> {
    require_no_bidirected(g)?;
    require_ancestral(g, wprime)?;
    let w = g.all_nodes().minus(wprime);
    if !s.is_subset(w) || s.is_empty() {
        return Err(Error::input("s must be a nonempty subset of V \\ wprime"));
    }
    let order = g.canonical_topological_order(w);
    let mut terms = Vec::new();
    let mut prefix: Vec<NodeIdx> = Vec::new();
    for &v in &order {
        if s.contains(v) {
            let mut given: Vec<Occ> = prefix.iter().map(|&u| Occ::free(g.label(u))).collect();
            given.extend(free_occs(g, wprime));
            terms.push(Estimand::term(OBS_DIST, vec![Occ::free(g.label(v))], given));
        }
        prefix.push(v);
    }
    Ok(Estimand::product(terms))
}

/// Full decomposition criterion for `p(W \ x | do(x), wprime)` over an
/// ancestral context `wprime` and `W = V \ wprime`: identifiable iff no
/// undirected path inside `W` joins `x` to one of its children; the
/// estimand multiplies the Q-factors of the undirected components of `W`,
/// summing the component of `x` over `x`.
pub fn identify_single_full(g: &Admg, wprime: NodeSet, x: NodeIdx) -> Result<IdentificationResult> {
    require_no_bidirected(g)?;
    require_ancestral(g, wprime)?;
    if wprime.contains(x) || x >= g.n() {
        return Err(Error::input("x must lie outside the conditioning context"));
    }
    let w = g.all_nodes().minus(wprime);
    let children = g.children(NodeSet::singleton(x)).inter(w);
    if let Some(nodes) = line_path(g, w, x, children) {
        let witness = UndirectedWitness { nodes };
        let line = format!("undirected path to a child of {}: {}", g.label(x), witness.render(g));
        return Ok(IdentificationResult {
            verdict: Verdict::NotIdentified { witness },
            criterion: "q-decomposition".into(),
            derivation: vec![line],
        });
    }
    let comps = g.undirected_components(w);
    let order = g.canonical_topological_order(w);
    let mut syms = SymGen::for_sets(g, g.all_nodes());
    let est = q_product(g, &order, &comps, wprime, x, OBS_DIST, &mut syms);
    Ok(IdentificationResult::identified(
        estimand::simplify(&est),
        "q-decomposition",
        vec![format!(
            "no undirected path from {} to a child inside {}",
            g.label(x),
            fmt_set(g, w)
        )],
    ))
}

/// Output shape of the marginal decomposition criterion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MarginalVariant {
    /// `p(W'' \ x | do(x), wprime)`.
    Conditional,
    /// `p(W'' \ x, wprime | do(x))`: the conditional times `p(wprime)`.
    Joint,
    /// `p(W'' \ x | do(x))`: the conditional averaged over `p(wprime)`.
    Marginal,
}

/// Marginal decomposition criterion: with `W = V \ wprime` and
/// `W'' = An(y) \ wprime`, works in the marginal graph of the induced
/// subgraph on `W` over `W''`; identifiable when no undirected path of that
/// graph joins `x` to one of its children there, with the Q-factor product
/// over its undirected components. `NotIdentified` is only a failure of this
/// criterion, not a proof, unless the full-set check applies.
pub fn identify_single_marginal(
    g: &Admg,
    wprime: NodeSet,
    y: NodeSet,
    x: NodeIdx,
    variant: MarginalVariant,
) -> Result<IdentificationResult> {
    require_no_bidirected(g)?;
    require_ancestral(g, wprime)?;
    if y.is_empty() || y.contains(x) || !y.is_disjoint(wprime) || wprime.contains(x) {
        return Err(Error::input("x, y and wprime must be disjoint with y nonempty"));
    }
    let w = g.all_nodes().minus(wprime);
    let w2 = g.ancestors(y).minus(wprime);
    if !w2.contains(x) {
        return Err(Error::input("x must be an ancestor of y outside wprime"));
    }
    let gm = g.restricted(w).marginal_on_universe(w2);
    let children = gm.children(NodeSet::singleton(x)).inter(w2);
    if let Some(nodes) = line_path(&gm, w2, x, children) {
        let witness = UndirectedWitness { nodes };
        let line = format!(
            "undirected path to a child of {} in the marginal graph: {}",
            g.label(x),
            witness.render(g)
        );
        return Ok(IdentificationResult {
            verdict: Verdict::NotIdentified { witness },
            criterion: "q-marginal".into(),
            derivation: vec![line],
        });
    }
    let comps = gm.undirected_components(w2);
    let order = gm.canonical_topological_order(w2);
    let free = match variant {
        MarginalVariant::Conditional | MarginalVariant::Joint => w2.union(wprime),
        MarginalVariant::Marginal => w2,
    };
    let mut syms = SymGen::for_sets(g, free);
    let core = q_product(&gm, &order, &comps, wprime, x, OBS_DIST, &mut syms);
    let (est, criterion) = match variant {
        MarginalVariant::Conditional => (core, "q-marginal"),
        MarginalVariant::Joint => {
            let context = Estimand::term(OBS_DIST, free_occs(g, wprime), Vec::new());
            (Estimand::product(vec![context, core]), "q-marginal-joint")
        }
        MarginalVariant::Marginal => {
            let mut body = core;
            let mut occs = Vec::new();
            for v in wprime.iter() {
                let label = g.label(v).to_string();
                let sym = syms.fresh(&label);
                body = subst(&body, &label, &sym);
                occs.push((sym, label));
            }
            let weight = Estimand::term(
                OBS_DIST,
                occs.iter()
                    .map(|(s, v)| Occ::bound(s.clone(), v.clone()))
                    .collect(),
                Vec::new(),
            );
            let mut e = Estimand::product(vec![weight, body]);
            for (s, v) in occs.into_iter().rev() {
                e = Estimand::sum(s, v, e);
            }
            (e, "q-marginal-sum")
        }
    };
    Ok(IdentificationResult::identified(
        estimand::simplify(&est),
        criterion,
        vec![format!(
            "no undirected path from {} to a child in the marginal graph over {}",
            g.label(x),
            fmt_set(g, w2)
        )],
    ))
}

/// Conditional decomposition criterion for `p(y | do(x), wprime)`:
/// identifiable when every undirected path from `x` to the children of `x`
/// that are ancestors of `y` meets `wprime` or `T`, the nodes descending
/// from neither `x` nor `y`. The estimand conditions the marginal criterion
/// on `wprime ∪ T` and averages `T` back out; with `x` not an ancestor of
/// `y` the query reduces to `p(y | wprime)` outright.
pub fn identify_conditional(
    g: &Admg,
    wprime: NodeSet,
    y: NodeSet,
    x: NodeIdx,
) -> Result<IdentificationResult> {
    require_no_bidirected(g)?;
    require_ancestral(g, wprime)?;
    if y.is_empty() || y.contains(x) || !y.is_disjoint(wprime) || wprime.contains(x) {
        return Err(Error::input("x, y and wprime must be disjoint with y nonempty"));
    }
    let xs = NodeSet::singleton(x);
    let ch_an = g.children(xs).inter(g.ancestors(y));
    if ch_an.is_empty() {
        return Ok(IdentificationResult::identified(
            Estimand::term(OBS_DIST, free_occs(g, y), free_occs(g, wprime)),
            "conditional-vacuous",
            vec![format!("{} has no child that is an ancestor of the target", g.label(x))],
        ));
    }
    let t = g
        .all_nodes()
        .minus(g.descendants(xs))
        .minus(g.descendants(y))
        .minus(wprime);
    let blockers = wprime.union(t);
    let open = g.all_nodes().minus(blockers);
    if line_path(g, open, x, ch_an.inter(open)).is_some() {
        return Ok(IdentificationResult {
            verdict: Verdict::Undecided,
            criterion: "conditional".into(),
            derivation: vec![format!(
                "an undirected path from {} to a relevant child avoids the blocking set",
                g.label(x)
            )],
        });
    }
    let inner = identify_single_marginal(g, blockers, y, x, MarginalVariant::Conditional)?;
    let Verdict::Identified { estimand: core, .. } = inner.verdict else {
        return Ok(IdentificationResult {
            verdict: Verdict::Undecided,
            criterion: "conditional".into(),
            derivation: inner.derivation,
        });
    };
    // Sum out the extra targets beyond y, then average the T context.
    let w2 = g.ancestors(y).minus(blockers);
    let mut syms = SymGen::for_sets(g, xs.union(y).union(wprime));
    let mut body = core;
    for v in w2.without(x).minus(y).iter() {
        let label = g.label(v).to_string();
        let sym = syms.fresh(&label);
        body = Estimand::sum(sym.clone(), label.clone(), subst(&body, &label, &sym));
    }
    let mut est = if t.is_empty() {
        body
    } else {
        let mut occs = Vec::new();
        for v in t.iter() {
            let label = g.label(v).to_string();
            let sym = syms.fresh(&label);
            body = subst(&body, &label, &sym);
            occs.push((sym, label));
        }
        let weight = Estimand::term(
            OBS_DIST,
            occs.iter()
                .map(|(s, v)| Occ::bound(s.clone(), v.clone()))
                .collect(),
            free_occs(g, wprime),
        );
        let mut e = Estimand::product(vec![weight, body]);
        for (s, v) in occs.into_iter().rev() {
            e = Estimand::sum(s, v, e);
        }
        e
    };
    est = estimand::simplify(&est);
    Ok(IdentificationResult::identified(
        est,
        "conditional",
        vec![format!(
            "undirected paths from {} to relevant children are blocked by {}",
            g.label(x),
            fmt_set(g, blockers)
        )],
    ))
}

// ── Sequential multi-node identification ─────────────────────────────────

fn permutations(items: &[NodeIdx]) -> Vec<Vec<NodeIdx>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for (i, &v) in items.iter().enumerate() {
        let mut rest = items.to_vec();
        rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, v);
            out.push(tail);
        }
    }
    out
}

/// Sequential procedure for `p(y | do(x), wprime)` with several intervened
/// nodes: starting from `p1 = p(V1 | wprime)` over `V1 = An(y ∪ x) \ wprime`
/// and the marginal graph over `V1`, it tries every ordering of `x`,
/// applying the single-node marginal criterion and the intervention surgery
/// one node at a time; each step defines a new intermediate distribution.
/// When no ordering goes through the query stays undecided.
pub fn identify_multi(
    g: &Admg,
    wprime: NodeSet,
    y: NodeSet,
    x: NodeSet,
) -> Result<IdentificationResult> {
    require_no_bidirected(g)?;
    require_ancestral(g, wprime)?;
    if x.is_empty() || y.is_empty() || !x.is_disjoint(y) || !x.union(y).is_disjoint(wprime) {
        return Err(Error::input("x, y and wprime must be disjoint with x, y nonempty"));
    }
    let w = g.all_nodes().minus(wprime);
    let v1 = g.ancestors(y.union(x)).minus(wprime);
    let g1 = g.restricted(w).marginal_on_universe(v1);
    let labels_of = |s: NodeSet| -> Vec<String> { s.iter().map(|v| g.label(v).to_string()).collect() };
    let p1 = Intermediate {
        name: "p1".into(),
        vars: labels_of(v1),
        fixed: labels_of(wprime),
        estimand: Estimand::term(OBS_DIST, free_occs(g, v1), free_occs(g, wprime)),
    };
    let xs: Vec<NodeIdx> = x.iter().collect();
    'orders: for order in permutations(&xs) {
        let mut intermediates = vec![p1.clone()];
        let mut vi = v1;
        let mut gi = g1.clone();
        let mut dist = "p1".to_string();
        let mut deriv = vec![format!(
            "start from p1 = p({} | {})",
            fmt_set(g, v1),
            fmt_set(g, wprime)
        )];
        for (step, &xi) in order.iter().enumerate() {
            let children = gi.children(NodeSet::singleton(xi)).inter(vi);
            let comps = gi.undirected_components(vi);
            let sx = comps.iter().find(|c| c.contains(xi)).copied().unwrap_or_default();
            if !children.is_disjoint(sx) {
                continue 'orders;
            }
            let top = gi.canonical_topological_order(vi);
            let mut syms = SymGen::for_sets(g, vi);
            let est = q_product(&gi, &top, &comps, NodeSet::EMPTY, xi, &dist, &mut syms);
            let next = vi.without(xi);
            let name = format!("p{}", step + 2);
            deriv.push(format!(
                "intervene on {}: {} = {}",
                g.label(xi),
                name,
                estimand::render(&estimand::simplify(&est))
            ));
            intermediates.push(Intermediate {
                name: name.clone(),
                vars: labels_of(next),
                fixed: vec![g.label(xi).to_string()],
                estimand: estimand::simplify(&est),
            });
            vi = next;
            gi = surgery::intervene(&gi, NodeSet::singleton(xi)).restricted(vi);
            dist = name;
        }
        let mut syms = SymGen::for_sets(g, x.union(y).union(wprime));
        let mut final_est = Estimand::term(&dist, free_occs(g, vi), Vec::new());
        for v in vi.minus(y).iter() {
            let label = g.label(v).to_string();
            let sym = syms.fresh(&label);
            final_est = Estimand::sum(sym.clone(), label.clone(), subst(&final_est, &label, &sym));
        }
        deriv.push(format!(
            "ordering {}",
            order.iter().map(|&v| g.label(v)).collect::<Vec<_>>().join(", ")
        ));
        return Ok(IdentificationResult {
            verdict: Verdict::Identified {
                estimand: estimand::simplify(&final_est),
                intermediates,
            },
            criterion: "sequential".into(),
            derivation: deriv,
        });
    }
    Ok(IdentificationResult {
        verdict: Verdict::Undecided,
        criterion: "sequential".into(),
        derivation: vec!["every intervention ordering hits an undirected path to a child".into()],
    })
}

// ── Dispatcher ───────────────────────────────────────────────────────────

fn ancestral_subsets(g: &Admg, s: NodeSet) -> Vec<NodeSet> {
    subsets_of(s)
        .into_iter()
        .filter(|&c| g.is_ancestral(c))
        .collect()
}

/// Runs the direct criteria (calculus, back-door, front-door) for a query;
/// used both by the dispatcher and under context marginalization.
fn direct_criteria(
    g: &Admg,
    q: &EffectQuery,
    has_bi: bool,
) -> Result<Option<(Estimand, String, Vec<String>)>> {
    let mut deriv = Vec::new();
    let mut syms = SymGen::for_sets(g, q.x.union(q.y).union(q.given));
    if let Some(e) = calc_solve(g, q.y, q.x, q.given, CALC_DEPTH, &mut syms, &mut deriv)? {
        return Ok(Some((estimand::simplify(&e), "calculus".into(), deriv)));
    }
    if !has_bi && q.x.len() == 1 {
        if let Some((z, e)) = backdoor(g, q)? {
            let deriv = vec![format!("back-door adjustment set {{{}}}", fmt_set(g, z))];
            return Ok(Some((e, "back-door".into(), deriv)));
        }
        if let Some((z, e)) = frontdoor(g, q)? {
            let deriv = vec![format!("front-door mediator set {{{}}}", fmt_set(g, z))];
            return Ok(Some((e, "front-door".into(), deriv)));
        }
    }
    Ok(None)
}

/// Decides `p(y | do(x), given)` by trying, in order: the strengthened
/// non-identifiability check, the bounded calculus search, back-door,
/// front-door, context marginalization over these, the decomposition
/// criteria, the conditional criterion and, for several intervened nodes,
/// the sequential procedure.
pub fn identify(g: &Admg, q: &EffectQuery) -> Result<IdentificationResult> {
    if !q.x.union(q.y).union(q.given).is_subset(g.all_nodes()) {
        return Err(Error::input("query mentions a node outside the graph"));
    }
    let has_bi = g.bidirected_edges().next().is_some();
    // Strengthened necessity check on x together with the intervened-side
    // targets; a witness settles the query negatively.
    if !has_bi && q.x.len() == 1 {
        let x = q.x.iter().next().unwrap();
        let wsub = q.x.union(q.y.inter(g.descendants(q.x)));
        if let Some(witness) = not_identifiable_by_subset(g, wsub, x)? {
            let line = format!("witness {}", witness.render(g));
            return Ok(IdentificationResult {
                verdict: Verdict::NotIdentified { witness },
                criterion: "strengthened-children".into(),
                derivation: vec![line],
            });
        }
    }
    if let Some((e, criterion, deriv)) = direct_criteria(g, q, has_bi)? {
        return Ok(IdentificationResult::identified(e, &criterion, deriv));
    }
    // Context marginalization: extend the conditioning context, identify,
    // then sum the context back out.
    let mut ws: Vec<NodeSet> = subsets_of(g.all_nodes().minus(q.x.union(q.y).union(q.given)))
        .into_iter()
        .filter(|w| !w.is_empty())
        .collect();
    ws.sort_by_key(|w| (w.len(), w.bits()));
    for w in ws {
        if !w.union(q.given).is_disjoint(g.descendants(q.x)) {
            continue;
        }
        let wider = EffectQuery::new(q.x, q.y, q.given.union(w))?;
        if let Some((inner, criterion, mut deriv)) = direct_criteria(g, &wider, has_bi)? {
            let est = wrap_context_sum(g, w, q.given, &inner, q);
            deriv.push(format!("marginalize the context {{{}}}", fmt_set(g, w)));
            return Ok(IdentificationResult::identified(
                estimand::simplify(&est),
                &format!("marginalization+{criterion}"),
                deriv,
            ));
        }
    }
    if !has_bi && q.x.len() == 1 {
        let x = q.x.iter().next().unwrap();
        if let Some(res) = try_decomposition(g, q, x)? {
            return Ok(res);
        }
        if g.is_ancestral(q.given) {
            let res = identify_conditional(g, q.given, q.y, x)?;
            if matches!(res.verdict, Verdict::Identified { .. }) {
                return Ok(res);
            }
        }
    }
    if !has_bi && q.x.len() > 1 && g.is_ancestral(q.given) {
        return identify_multi(g, q.given, q.y, q.x);
    }
    Ok(IdentificationResult {
        verdict: Verdict::Undecided,
        criterion: "none".into(),
        derivation: vec!["no criterion applied".into()],
    })
}

/// Restricted dispatcher: only the calculus search and, for a single
/// intervened node, the back-door adjustment. Used for graph classes where
/// the remaining criteria are not available.
pub fn identify_basic(g: &Admg, q: &EffectQuery) -> Result<IdentificationResult> {
    if !q.x.union(q.y).union(q.given).is_subset(g.all_nodes()) {
        return Err(Error::input("query mentions a node outside the graph"));
    }
    let mut deriv = Vec::new();
    let mut syms = SymGen::for_sets(g, q.x.union(q.y).union(q.given));
    if let Some(e) = calc_solve(g, q.y, q.x, q.given, CALC_DEPTH, &mut syms, &mut deriv)? {
        return Ok(IdentificationResult::identified(
            estimand::simplify(&e),
            "calculus",
            deriv,
        ));
    }
    if q.x.len() == 1 {
        if let Some((z, e)) = backdoor(g, q)? {
            let deriv = vec![format!("back-door adjustment set {{{}}}", fmt_set(g, z))];
            return Ok(IdentificationResult::identified(e, "back-door", deriv));
        }
    }
    Ok(IdentificationResult {
        verdict: Verdict::Undecided,
        criterion: "none".into(),
        derivation: vec!["no criterion applied".into()],
    })
}

/// `Σ_w inner p(w | given)` with `w` bound throughout.
fn wrap_context_sum(
    g: &Admg,
    w: NodeSet,
    given: NodeSet,
    inner: &Estimand,
    q: &EffectQuery,
) -> Estimand {
    let mut syms = SymGen::for_sets(g, q.x.union(q.y).union(q.given));
    let mut body = inner.clone();
    let mut occs = Vec::new();
    for v in w.iter() {
        let label = g.label(v).to_string();
        let sym = syms.fresh(&label);
        body = subst(&body, &label, &sym);
        occs.push((sym, label));
    }
    let weight = Estimand::term(
        OBS_DIST,
        occs.iter()
            .map(|(s, v)| Occ::bound(s.clone(), v.clone()))
            .collect(),
        free_occs(g, given),
    );
    let mut e = Estimand::product(vec![body, weight]);
    for (s, v) in occs.into_iter().rev() {
        e = Estimand::sum(s, v, e);
    }
    e
}

/// Decomposition attempts for a single intervened node: the conditional
/// shape when the conditioning context is ancestral, the joint shape moving
/// an ancestral part of the target into the context, and the averaged shape
/// over an ancestral context outside the query.
fn try_decomposition(
    g: &Admg,
    q: &EffectQuery,
    x: NodeIdx,
) -> Result<Option<IdentificationResult>> {
    let sum_extras = |core: &Estimand, extras: NodeSet| -> Estimand {
        let mut syms = SymGen::for_sets(g, q.x.union(q.y).union(q.given));
        let mut body = core.clone();
        for v in extras.iter() {
            let label = g.label(v).to_string();
            let sym = syms.fresh(&label);
            body = Estimand::sum(sym.clone(), label.clone(), subst(&body, &label, &sym));
        }
        estimand::simplify(&body)
    };
    if g.is_ancestral(q.given) && g.ancestors(q.y).minus(q.given).contains(x) {
        let res = identify_single_marginal(g, q.given, q.y, x, MarginalVariant::Conditional)?;
        if let Verdict::Identified { estimand: core, .. } = res.verdict {
            let w2 = g.ancestors(q.y).minus(q.given);
            let extras = w2.without(x).minus(q.y);
            return Ok(Some(IdentificationResult::identified(
                sum_extras(&core, extras),
                "q-marginal",
                res.derivation,
            )));
        }
    }
    if q.given.is_empty() {
        // Move an ancestral part of the target into the context.
        let mut parts = ancestral_subsets(g, q.y.without(x));
        parts.sort_by_key(|p| (usize::MAX - p.len(), p.bits()));
        for wp in parts {
            if wp.is_empty() {
                continue;
            }
            let rest = q.y.minus(wp);
            if rest.is_empty() || !g.ancestors(rest).minus(wp).contains(x) {
                continue;
            }
            let res = identify_single_marginal(g, wp, rest, x, MarginalVariant::Joint)?;
            if let Verdict::Identified { estimand: core, .. } = res.verdict {
                let w2 = g.ancestors(rest).minus(wp);
                let extras = w2.without(x).minus(rest);
                return Ok(Some(IdentificationResult::identified(
                    sum_extras(&core, extras),
                    "q-marginal-joint",
                    res.derivation,
                )));
            }
        }
        // Average over an ancestral context outside the query.
        let mut outside = ancestral_subsets(g, g.all_nodes().minus(q.x.union(q.y)));
        outside.sort_by_key(|p| (p.len(), p.bits()));
        for wp in outside {
            if wp.is_empty() || !g.ancestors(q.y).minus(wp).contains(x) {
                continue;
            }
            let res = identify_single_marginal(g, wp, q.y, x, MarginalVariant::Marginal)?;
            if let Verdict::Identified { estimand: core, .. } = res.verdict {
                let w2 = g.ancestors(q.y).minus(wp);
                let extras = w2.without(x).minus(q.y);
                return Ok(Some(IdentificationResult::identified(
                    sum_extras(&core, extras),
                    "q-marginal-sum",
                    res.derivation,
                )));
            }
        }
    }
    Ok(None)
}

// ── Tests ────────────────────────────────────────────────────────────────

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimand::render;
    use crate::graph::parse_graph;
    use crate::sem::{game2, random_sem};

    fn fig1() -> Admg {
        parse_graph("nodes A B C\nA -> B\nA -- C\nB -- C\n").unwrap()
    }

    fn fig1_oadmg() -> Admg {
        parse_graph("nodes A B C\nA -> B\nA <-> C\nB <-> C\n").unwrap()
    }

    fn fig2_aadmg() -> Admg {
        parse_graph("nodes A B C\nA -> B\nA -- B\nA -- C\nB -- C\n").unwrap()
    }

    fn fig6() -> Admg {
        parse_graph("nodes A B C D\nA -> B\nB -> D\nA -- C\nB -- C\nA -- D\n").unwrap()
    }

    fn fig9() -> Admg {
        parse_graph("nodes A B C D\nA -> B\nA -- C\nB -- C\nA -> D\nA -- D\n").unwrap()
    }

    fn q(g: &Admg, x: &[&str], y: &[&str], given: &[&str]) -> EffectQuery {
        EffectQuery::from_labels(g, x, y, given).unwrap()
    }

    #[test]
    fn rule2_forms_agree_on_fig1() {
        let g = fig1();
        let (a, b, c) = (
            NodeSet::singleton(0),
            NodeSet::singleton(1),
            NodeSet::singleton(2),
        );
        for form in [RuleForm::IntervenedGraph, RuleForm::Simplified] {
            assert!(rule_applies(&g, 2, NodeSet::EMPTY, b, a, c, form).unwrap());
            assert!(!rule_applies(&g, 2, NodeSet::EMPTY, b, a, NodeSet::EMPTY, form).unwrap());
            assert!(rule_applies(&g, 3, NodeSet::EMPTY, c, a, NodeSet::EMPTY, form).unwrap());
        }
    }

    #[test]
    fn dispatcher_fig1_adjustment() {
        let g = fig1();
        let res = identify(&g, &q(&g, &["A"], &["B"], &[])).unwrap();
        assert_eq!(res.criterion, "calculus");
        assert_eq!(render(res.estimand().unwrap()), "sum_c p(B|A,c) p(c)");
    }

    #[test]
    fn dispatcher_fig2_aadmg_not_identified() {
        let g = fig2_aadmg();
        let res = identify(&g, &q(&g, &["A"], &["B"], &[])).unwrap();
        let Verdict::NotIdentified { witness } = &res.verdict else {
            panic!("expected a negative verdict");
        };
        assert_eq!(witness.render(&g), "A -- B");
        assert_eq!(res.criterion, "strengthened-children");
    }

    #[test]
    fn dispatcher_fig1_oadmg_rule2() {
        let g = fig1_oadmg();
        let res = identify(&g, &q(&g, &["A"], &["B"], &[])).unwrap();
        assert_eq!(res.criterion, "calculus");
        assert_eq!(render(res.estimand().unwrap()), "p(B|A)");
    }

    #[test]
    fn frontdoor_fig6_golden() {
        let g = fig6();
        let res = identify(&g, &q(&g, &["A"], &["D"], &["C"])).unwrap();
        assert_eq!(res.criterion, "front-door");
        assert_eq!(
            render(res.estimand().unwrap()),
            "sum_b p(b|A,C) sum_a' p(D|b,C,a') p(a'|C)"
        );
    }

    #[test]
    fn fig6_unconditional_marginalizes_the_context() {
        let g = fig6();
        let res = identify(&g, &q(&g, &["A"], &["D"], &[])).unwrap();
        assert_eq!(res.criterion, "marginalization+front-door");
        let s = render(res.estimand().unwrap());
        assert!(s.starts_with("sum_c (sum_b p(b|A,c)"), "got {s}");
        assert!(s.ends_with("p(c)"), "got {s}");
    }

    #[test]
    fn backdoor_fig1_finds_c() {
        let g = fig1();
        let (z, e) = backdoor(&g, &q(&g, &["A"], &["B"], &[])).unwrap().unwrap();
        assert_eq!(z, NodeSet::singleton(2));
        assert_eq!(render(&e), "sum_c p(B|A,c) p(c)");
    }

    #[test]
    fn fig9_suite_matches_expectations() {
        let g = fig9();
        // p(B,D | do(A), C): not identified, witness A -- D.
        let res = identify(&g, &q(&g, &["A"], &["B", "D"], &["C"])).unwrap();
        let Verdict::NotIdentified { witness } = &res.verdict else {
            panic!("expected a negative verdict");
        };
        assert_eq!(witness.render(&g), "A -- D");
        // p(B | do(A), C) = p(B | A, C).
        let res = identify(&g, &q(&g, &["A"], &["B"], &["C"])).unwrap();
        assert_eq!(render(res.estimand().unwrap()), "p(B|A,C)");
        // Joint and averaged variants of the marginal criterion.
        let joint = identify_single_marginal(
            &g,
            g.node_set(&["C"]).unwrap(),
            g.node_set(&["B"]).unwrap(),
            0,
            MarginalVariant::Joint,
        )
        .unwrap();
        assert_eq!(render(joint.estimand().unwrap()), "p(C) p(B|A,C)");
        let marg = identify_single_marginal(
            &g,
            g.node_set(&["C"]).unwrap(),
            g.node_set(&["B"]).unwrap(),
            0,
            MarginalVariant::Marginal,
        )
        .unwrap();
        assert_eq!(render(marg.estimand().unwrap()), "sum_c p(c) p(B|A,c)");
        // Dispatcher verdicts for the same queries.
        let res = identify(&g, &q(&g, &["A"], &["B", "C"], &[])).unwrap();
        assert_eq!(render(res.estimand().unwrap()), "p(C) p(B|A,C)");
        let res = identify(&g, &q(&g, &["A"], &["B"], &[])).unwrap();
        assert!(res.estimand().is_some());
    }

    #[test]
    fn single_full_fig1_reduces_to_conditional() {
        let g = fig1();
        let res = identify_single_full(&g, NodeSet::singleton(2), 0).unwrap();
        assert_eq!(render(res.estimand().unwrap()), "p(B|A,C)");
    }

    #[test]
    fn not_identifiable_by_subset_fig2() {
        let g = fig2_aadmg();
        let w = not_identifiable_by_subset(&g, NodeSet::from_iter([0, 1]), 0)
            .unwrap()
            .unwrap();
        assert_eq!(w.render(&g), "A -- B");
        assert!(not_identifiable_by_subset(&fig1(), NodeSet::from_iter([0, 1]), 0)
            .unwrap()
            .is_none());
    }

    #[test]
    fn q_factor_orders_conditioners() {
        let g = fig9();
        let e = q_factor(&g, g.node_set(&["C"]).unwrap(), g.node_set(&["B"]).unwrap()).unwrap();
        assert_eq!(render(&e), "p(B|A,C)");
        let e = q_factor(&g, g.node_set(&["C"]).unwrap(), g.node_set(&["A", "D"]).unwrap())
            .unwrap();
        assert_eq!(render(&e), "p(A|C) p(D|A,B,C)");
    }

    #[test]
    fn marginalize_context_wraps_and_checks() {
        let g = fig6();
        let inner = Estimand::obs(&["D"], &["A", "C"]);
        let e = marginalize_context(
            &g,
            g.node_set(&["A"]).unwrap(),
            g.node_set(&["C"]).unwrap(),
            &inner,
        )
        .unwrap();
        assert_eq!(render(&e), "sum_c p(D|A,c) p(c)");
        assert!(marginalize_context(
            &g,
            g.node_set(&["A"]).unwrap(),
            g.node_set(&["B"]).unwrap(),
            &inner
        )
        .is_err());
    }

    #[test]
    fn conditional_criterion_fig9_and_vacuous() {
        let g = fig9();
        let res = identify_conditional(&g, g.node_set(&["C"]).unwrap(), g.node_set(&["B"]).unwrap(), 0)
            .unwrap();
        assert_eq!(render(res.estimand().unwrap()), "p(B|A,C)");
        // A node with no child ancestor of the target: D into B.
        let res = identify_conditional(&g, NodeSet::EMPTY, g.node_set(&["B"]).unwrap(), 3).unwrap();
        assert_eq!(res.criterion, "conditional-vacuous");
        assert_eq!(render(res.estimand().unwrap()), "p(B)");
    }

    #[test]
    fn sequential_chain_dag() {
        let g = parse_graph("nodes X M Y\nX -> M\nM -> Y\n").unwrap();
        // The dispatcher settles this by calculus alone.
        let direct = identify(&g, &q(&g, &["X", "M"], &["Y"], &[])).unwrap();
        assert_eq!(render(direct.estimand().unwrap()), "p(Y|X,M)");
        // The sequential procedure agrees through its intermediate chain.
        let res = identify_multi(
            &g,
            NodeSet::EMPTY,
            g.node_set(&["Y"]).unwrap(),
            g.node_set(&["X", "M"]).unwrap(),
        )
        .unwrap();
        let Verdict::Identified { intermediates, .. } = &res.verdict else {
            panic!("expected identification");
        };
        assert_eq!(res.criterion, "sequential");
        assert_eq!(intermediates.len(), 3);
        let sem = random_sem(&g, 7);
        let obs = sem.implied_covariance();
        let fixed: HashMap<String, f64> =
            [("X".to_string(), 0.7), ("M".to_string(), -0.4)].into();
        let got = evaluate(&res, &obs, &fixed).unwrap();
        let want = sem
            .interventional_distribution(&[("X", 0.7), ("M", -0.4)])
            .unwrap()
            .marginal(&["Y"])
            .unwrap();
        assert!(got.max_diff(&want).unwrap() < 1e-9);
    }

    #[test]
    fn sequential_line_after_intervention_stays_undecided() {
        // Intervening on C induces the marginal line A -- B (the undirected
        // path A -- C -- B collapses), which then blocks the second step;
        // the sequential procedure reports undecided for this query even
        // though the calculus identifies it (rule 3 through the graph
        // intervened on A removes the line into C).
        let g = fig1();
        let res = identify(&g, &q(&g, &["A", "C"], &["B"], &[])).unwrap();
        assert_eq!(res.criterion, "calculus");
        assert_eq!(render(res.estimand().unwrap()), "sum_c' p(B|A,c') p(c')");
        let direct = identify_multi(
            &g,
            NodeSet::EMPTY,
            g.node_set(&["B"]).unwrap(),
            g.node_set(&["A", "C"]).unwrap(),
        )
        .unwrap();
        assert_eq!(direct.verdict, Verdict::Undecided);
    }

    #[test]
    fn evaluate_fig1_matches_interventional_law() {
        let g = fig1();
        for seed in 0..5 {
            let sem = random_sem(&g, seed);
            let obs = sem.implied_covariance();
            let res = identify(&g, &q(&g, &["A"], &["B"], &[])).unwrap();
            let fixed: HashMap<String, f64> = [("A".to_string(), 1.3)].into();
            let got = evaluate(&res, &obs, &fixed).unwrap();
            let want = sem
                .interventional_distribution(&[("A", 1.3)])
                .unwrap()
                .marginal(&["B"])
                .unwrap();
            assert!(got.max_diff(&want).unwrap() < 1e-8, "seed {seed}");
        }
    }

    #[test]
    fn evaluate_fig1_oadmg_rule2_matches_game2() {
        let g = fig1_oadmg();
        let sem = game2(1.0);
        let obs = sem.implied_covariance();
        let res = identify(&g, &q(&g, &["A"], &["B"], &[])).unwrap();
        let fixed: HashMap<String, f64> = [("A".to_string(), 0.9)].into();
        let got = evaluate(&res, &obs, &fixed).unwrap();
        let want = sem
            .interventional_distribution(&[("A", 0.9)])
            .unwrap()
            .marginal(&["B"])
            .unwrap();
        assert!(got.max_diff(&want).unwrap() < 1e-9);
    }

    #[test]
    fn evaluate_fig9_decomposition_queries() {
        let g = fig9();
        let sem = random_sem(&g, 11);
        let obs = sem.implied_covariance();
        let inter = sem.interventional_distribution(&[("A", -0.6)]).unwrap();
        let fixed: HashMap<String, f64> = [("A".to_string(), -0.6)].into();
        // p(B,C | do A).
        let res = identify(&g, &q(&g, &["A"], &["B", "C"], &[])).unwrap();
        let got = evaluate(&res, &obs, &fixed).unwrap();
        let want = inter.marginal(&["B", "C"]).unwrap();
        assert!(got.max_diff(&want).unwrap() < 1e-8);
        // p(B | do A).
        let res = identify(&g, &q(&g, &["A"], &["B"], &[])).unwrap();
        let got = evaluate(&res, &obs, &fixed).unwrap();
        let want = inter.marginal(&["B"]).unwrap();
        assert!(got.max_diff(&want).unwrap() < 1e-8);
        // p(B | do A, C): condition the interventional law on C.
        let res = identify(&g, &q(&g, &["A"], &["B"], &["C"])).unwrap();
        let mut fx = fixed.clone();
        fx.insert("C".to_string(), 0.4);
        let got = evaluate(&res, &obs, &fx).unwrap();
        let want = inter.condition(&[("C", 0.4)]).unwrap().marginal(&["B"]).unwrap();
        assert!(got.max_diff(&want).unwrap() < 1e-8);
    }

    #[test]
    fn evaluate_fig6_frontdoor_numeric() {
        let g = fig6();
        for seed in [3, 19] {
            let sem = random_sem(&g, seed);
            let obs = sem.implied_covariance();
            let inter = sem.interventional_distribution(&[("A", 0.8)]).unwrap();
            let res = identify(&g, &q(&g, &["A"], &["D"], &["C"])).unwrap();
            let fixed: HashMap<String, f64> =
                [("A".to_string(), 0.8), ("C".to_string(), -0.2)].into();
            let got = evaluate(&res, &obs, &fixed).unwrap();
            let want = inter
                .condition(&[("C", -0.2)])
                .unwrap()
                .marginal(&["D"])
                .unwrap();
            assert!(got.max_diff(&want).unwrap() < 1e-7, "seed {seed}");
            let res = identify(&g, &q(&g, &["A"], &["D"], &[])).unwrap();
            let fixed: HashMap<String, f64> = [("A".to_string(), 0.8)].into();
            let got = evaluate(&res, &obs, &fixed).unwrap();
            let want = inter.marginal(&["D"]).unwrap();
            assert!(got.max_diff(&want).unwrap() < 1e-7, "seed {seed}");
        }
    }
}
