//! Gated models: several context graphs joined by directed gates carrying
//! value predicates or likelihood-ratio thresholds. Exactly one context is
//! active at a time; events move the state along firing gates, and
//! identification queries dispatch to the active context's graph.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::Deserialize;

use crate::error::Error;
use crate::graph::{parse_graph, Admg};
use crate::identify::{self, EffectQuery, IdentificationResult};
use crate::learn::{in_family, Family};
use crate::sem::{sem_from_json, GaussianSem};
use crate::Result;

// ── Domain types ─────────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Comparator {
    Gt,
    Le,
    Lt,
    Ge,
    Eq,
}

impl Comparator {
    pub fn parse(s: &str) -> Result<Comparator> {
        Ok(match s {
            ">" => Comparator::Gt,
            "<=" => Comparator::Le,
            "<" => Comparator::Lt,
            ">=" => Comparator::Ge,
            "=" | "==" => Comparator::Eq,
            _ => return Err(Error::input(format!("unknown comparator {s:?}"))),
        })
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Comparator::Gt => ">",
            Comparator::Le => "<=",
            Comparator::Lt => "<",
            Comparator::Ge => ">=",
            Comparator::Eq => "=",
        }
    }

    fn holds(self, v: f64, t: f64) -> bool {
        match self {
            Comparator::Gt => v > t,
            Comparator::Le => v <= t,
            Comparator::Lt => v < t,
            Comparator::Ge => v >= t,
            Comparator::Eq => v == t,
        }
    }

    /// Satisfied set as an interval (lo, hi, lo_closed, hi_closed).
    fn interval(self, t: f64) -> (f64, f64, bool, bool) {
        match self {
            Comparator::Gt => (t, f64::INFINITY, false, true),
            Comparator::Ge => (t, f64::INFINITY, true, true),
            Comparator::Lt => (f64::NEG_INFINITY, t, true, false),
            Comparator::Le => (f64::NEG_INFINITY, t, true, true),
            Comparator::Eq => (t, t, true, true),
        }
    }
}

/// Whether the predicate is matched against plain observations or against
/// interventions (with an optional mechanism tag on the latter).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Observed,
    Intervened,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValuePredicate {
    pub var: String,
    pub op: Comparator,
    pub threshold: f64,
    pub mode: Mode,
    pub mechanism: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum GateCondition {
    Value(ValuePredicate),
    Likelihood {
        /// Context whose likelihood sits in the numerator (the gate's
        /// destination).
        num: String,
        den: String,
        theta: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gate {
    pub from: String,
    pub to: String,
    pub when: GateCondition,
}

#[derive(Debug, Clone)]
pub struct Context {
    pub graph: Admg,
    pub family: Family,
    pub sem: Option<GaussianSem>,
}

#[derive(Debug, Clone)]
pub struct GatedModel {
    pub contexts: BTreeMap<String, Context>,
    pub gates: Vec<Gate>,
    pub initial: String,
}

/// Current context plus a human-readable transition log.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub context: String,
    pub log: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Event {
    Observe(BTreeMap<String, f64>),
    Intervene {
        var: String,
        value: f64,
        mechanism: Option<String>,
    },
    DataBatch {
        labels: Vec<String>,
        data: DMatrix<f64>,
    },
}

// ── Document parsing ─────────────────────────────────────────────────────

#[derive(Deserialize)]
struct ContextDoc {
    graph: String,
    family: String,
    sem: Option<serde_json::Value>,
}

#[derive(Deserialize)]
struct WhenDoc {
    var: Option<String>,
    op: Option<String>,
    value: Option<f64>,
    mode: Option<String>,
    mechanism: Option<String>,
    ratio: Option<[String; 2]>,
    theta: Option<f64>,
}

#[derive(Deserialize)]
struct GateDoc {
    from: String,
    to: String,
    when: WhenDoc,
}

#[derive(Deserialize)]
struct ModelDoc {
    contexts: BTreeMap<String, ContextDoc>,
    gates: Vec<GateDoc>,
    initial: String,
}

fn parse_when(doc: &WhenDoc) -> Result<GateCondition> {
    if let Some(ratio) = &doc.ratio {
        let theta = doc
            .theta
            .ok_or_else(|| Error::input("likelihood gate needs a theta"))?;
        if !(theta.is_finite() && theta > 0.0) {
            return Err(Error::input("theta must be finite and positive"));
        }
        return Ok(GateCondition::Likelihood {
            num: ratio[0].clone(),
            den: ratio[1].clone(),
            theta,
        });
    }
    let var = doc
        .var
        .clone()
        .ok_or_else(|| Error::input("value gate needs a variable"))?;
    let op = Comparator::parse(
        doc.op
            .as_deref()
            .ok_or_else(|| Error::input("value gate needs a comparator"))?,
    )?;
    let threshold = doc
        .value
        .ok_or_else(|| Error::input("value gate needs a threshold"))?;
    if !threshold.is_finite() {
        return Err(Error::input("gate threshold must be finite"));
    }
    let mode = match doc.mode.as_deref() {
        Some("observed") | None => Mode::Observed,
        Some("intervened") => Mode::Intervened,
        Some(other) => return Err(Error::input(format!("unknown gate mode {other:?}"))),
    };
    if doc.mechanism.is_some() && mode != Mode::Intervened {
        return Err(Error::input("mechanism tags apply to intervened-mode gates only"));
    }
    Ok(GateCondition::Value(ValuePredicate {
        var,
        op,
        threshold,
        mode,
        mechanism: doc.mechanism.clone(),
    }))
}

fn intervals_overlap(a: (f64, f64, bool, bool), b: (f64, f64, bool, bool)) -> bool {
    let lo = a.0.max(b.0);
    let hi = a.1.min(b.1);
    if lo < hi {
        return true;
    }
    if lo > hi {
        return false;
    }
    // Touching endpoints overlap only when closed on both sides.
    let lo_closed = if a.0 == lo { a.2 } else { true } && if b.0 == lo { b.2 } else { true };
    let hi_closed = if a.1 == hi { a.3 } else { true } && if b.1 == hi { b.3 } else { true };
    lo_closed && hi_closed
}

/// Two value gates can fire on the same event only if their modes agree,
/// their mechanisms are compatible, and (for interventions) the variable
/// matches; observations may set several variables at once.
fn predicates_can_collide(a: &ValuePredicate, b: &ValuePredicate) -> bool {
    if a.mode != b.mode {
        return false;
    }
    match a.mode {
        Mode::Observed => {
            a.var != b.var || intervals_overlap(a.op.interval(a.threshold), b.op.interval(b.threshold))
        }
        Mode::Intervened => {
            let mech_compatible = match (&a.mechanism, &b.mechanism) {
                (Some(m1), Some(m2)) => m1 == m2,
                _ => true,
            };
            a.var == b.var
                && mech_compatible
                && intervals_overlap(a.op.interval(a.threshold), b.op.interval(b.threshold))
        }
    }
}

/// Parses and validates a gated-model document: context graphs against
/// their family tags, gate endpoints, gate variables, SEM shapes, and
/// mutual exclusivity of the value gates leaving each context.
pub fn load_gated(text: &str) -> Result<GatedModel> {
    let doc: ModelDoc = serde_json::from_str(text)?;
    let mut contexts = BTreeMap::new();
    for (name, cdoc) in &doc.contexts {
        let graph = parse_graph(&cdoc.graph)?;
        let family = Family::parse(&cdoc.family)?;
        if !in_family(&graph, family) {
            return Err(Error::input(format!(
                "context {name:?} declares family {} but its graph violates it",
                family.name()
            )));
        }
        let sem = match &cdoc.sem {
            None => None,
            Some(v) => {
                let sem = sem_from_json(&v.to_string())?;
                if sem.graph() != &graph {
                    return Err(Error::input(format!(
                        "context {name:?}: sem graph differs from the context graph"
                    )));
                }
                Some(sem)
            }
        };
        contexts.insert(name.clone(), Context { graph, family, sem });
    }
    if !contexts.contains_key(&doc.initial) {
        return Err(Error::input(format!("initial context {:?} not defined", doc.initial)));
    }
    let mut gates = Vec::new();
    for gdoc in &doc.gates {
        for end in [&gdoc.from, &gdoc.to] {
            if !contexts.contains_key(end) {
                return Err(Error::input(format!("gate references unknown context {end:?}")));
            }
        }
        let when = parse_when(&gdoc.when)?;
        match &when {
            GateCondition::Value(p) => {
                for end in [&gdoc.from, &gdoc.to] {
                    if contexts[end].graph.index_of(&p.var).is_none() {
                        return Err(Error::input(format!(
                            "gate variable {:?} missing from context {end:?}",
                            p.var
                        )));
                    }
                }
            }
            GateCondition::Likelihood { num, den, .. } => {
                for ctx in [num, den] {
                    let c = contexts.get(ctx).ok_or_else(|| {
                        Error::input(format!("likelihood gate references unknown context {ctx:?}"))
                    })?;
                    if c.sem.is_none() {
                        return Err(Error::input(format!(
                            "likelihood gate needs sem parameters for context {ctx:?}"
                        )));
                    }
                }
            }
        }
        gates.push(Gate {
            from: gdoc.from.clone(),
            to: gdoc.to.clone(),
            when,
        });
    }
    // Exclusivity: no event may fire two value gates out of one context.
    for (i, a) in gates.iter().enumerate() {
        for b in &gates[i + 1..] {
            if a.from != b.from {
                continue;
            }
            if let (GateCondition::Value(pa), GateCondition::Value(pb)) = (&a.when, &b.when) {
                if predicates_can_collide(pa, pb) {
                    return Err(Error::input(format!(
                        "overlapping value gates out of context {:?}",
                        a.from
                    )));
                }
            }
        }
    }
    Ok(GatedModel {
        contexts,
        gates,
        initial: doc.initial,
    })
}

// ── Event stream ─────────────────────────────────────────────────────────

#[derive(Deserialize)]
struct EventDoc {
    kind: String,
    values: Option<BTreeMap<String, f64>>,
    var: Option<String>,
    value: Option<f64>,
    mechanism: Option<String>,
    labels: Option<Vec<String>>,
    rows: Option<Vec<Vec<f64>>>,
}

pub fn parse_event(line: &str) -> Result<Event> {
    let doc: EventDoc = serde_json::from_str(line)?;
    match doc.kind.as_str() {
        "observe" => {
            let values = doc
                .values
                .ok_or_else(|| Error::input("observe event needs values"))?;
            if values.values().any(|v| !v.is_finite()) {
                return Err(Error::input("event values must be finite"));
            }
            Ok(Event::Observe(values))
        }
        "intervene" => {
            let var = doc
                .var
                .ok_or_else(|| Error::input("intervene event needs a variable"))?;
            let value = doc
                .value
                .ok_or_else(|| Error::input("intervene event needs a value"))?;
            if !value.is_finite() {
                return Err(Error::input("event values must be finite"));
            }
            Ok(Event::Intervene {
                var,
                value,
                mechanism: doc.mechanism,
            })
        }
        "data" => {
            let labels = doc
                .labels
                .ok_or_else(|| Error::input("data event needs labels"))?;
            let rows = doc.rows.ok_or_else(|| Error::input("data event needs rows"))?;
            let ncols = labels.len();
            if rows.iter().any(|r| r.len() != ncols) {
                return Err(Error::input("data rows must match the label count"));
            }
            let data = DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]);
            if data.iter().any(|v| !v.is_finite()) {
                return Err(Error::input("event values must be finite"));
            }
            Ok(Event::DataBatch { labels, data })
        }
        other => Err(Error::input(format!("unknown event kind {other:?}"))),
    }
}

pub fn initial_state(model: &GatedModel) -> State {
    State {
        context: model.initial.clone(),
        log: Vec::new(),
    }
}

fn predicate_fires(p: &ValuePredicate, event: &Event) -> bool {
    match (p.mode, event) {
        (Mode::Observed, Event::Observe(values)) => values
            .get(&p.var)
            .is_some_and(|&v| p.op.holds(v, p.threshold)),
        (Mode::Intervened, Event::Intervene { var, value, mechanism }) => {
            *var == p.var
                && p.mechanism.as_ref().is_none_or(|m| Some(m) == mechanism.as_ref())
                && p.op.holds(*value, p.threshold)
        }
        _ => false,
    }
}

/// Batch log-likelihood of a context's SEM over the event's columns,
/// reordered to the graph's label order.
fn batch_loglik(ctx: &Context, labels: &[String], data: &DMatrix<f64>) -> Result<f64> {
    let sem = ctx
        .sem
        .as_ref()
        .ok_or_else(|| Error::input("likelihood gate needs sem parameters"))?;
    let g = sem.graph();
    let cols: Vec<usize> = (0..g.n())
        .map(|v| {
            labels
                .iter()
                .position(|l| l == g.label(v))
                .ok_or_else(|| Error::input(format!("data batch misses variable {}", g.label(v))))
        })
        .collect::<Result<_>>()?;
    let ordered = DMatrix::from_fn(data.nrows(), g.n(), |i, j| data[(i, cols[j])]);
    sem.loglik(&ordered, false)
}

/// Applies one event: value gates out of the current context match only
/// their own event kind; likelihood gates fire on data batches when
/// `loglik(num) - loglik(den) > ln theta` with the configured parameters
/// (exact ties stay put). With no firing gate the context is unchanged.
pub fn step(model: &GatedModel, state: &State, event: &Event) -> Result<State> {
    let current = state.context.clone();
    if !model.contexts.contains_key(&current) {
        return Err(Error::input(format!("unknown context {current:?}")));
    }
    let mut next = state.clone();
    for gate in model.gates.iter().filter(|g| g.from == current) {
        let (fires, desc) = match (&gate.when, event) {
            (GateCondition::Value(p), _) => (
                predicate_fires(p, event),
                format!(
                    "{}{} {} {}{}",
                    if p.mode == Mode::Intervened { "do " } else { "" },
                    p.var,
                    p.op.symbol(),
                    p.threshold,
                    p.mechanism
                        .as_deref()
                        .map(|m| format!(" | {m}"))
                        .unwrap_or_default()
                ),
            ),
            (
                GateCondition::Likelihood { num, den, theta },
                Event::DataBatch { labels, data },
            ) => {
                let diff = batch_loglik(&model.contexts[num], labels, data)?
                    - batch_loglik(&model.contexts[den], labels, data)?;
                (diff > theta.ln(), format!("L({num})/L({den}) > {theta}"))
            }
            (GateCondition::Likelihood { .. }, _) => continue,
        };
        if fires {
            next.context = gate.to.clone();
            next.log.push(format!("{} -> {} [{desc}]", gate.from, gate.to));
            return Ok(next);
        }
    }
    Ok(next)
}

/// Runs a whole event stream from the model's initial context.
pub fn run(model: &GatedModel, events: &[Event]) -> Result<State> {
    let mut state = initial_state(model);
    for e in events {
        state = step(model, &state, e)?;
    }
    Ok(state)
}

// ── Per-context identification ───────────────────────────────────────────

/// Identification in a named context. Contexts without bidirected edges
/// get the full criteria set; contexts without undirected edges get the
/// calculus and back-door criteria; graphs mixing both edge kinds are
/// unsupported for identification.
pub fn identify_in_context(
    model: &GatedModel,
    ctx: &str,
    q: &EffectQuery,
) -> Result<IdentificationResult> {
    let c = model
        .contexts
        .get(ctx)
        .ok_or_else(|| Error::input(format!("unknown context {ctx:?}")))?;
    let has_line = c.graph.undirected_edges().next().is_some();
    let has_bi = c.graph.bidirected_edges().next().is_some();
    let mut res = if has_line && has_bi {
        return Err(Error::Unsupported(
            "identification in graphs mixing undirected and bidirected edges".into(),
        ));
    } else if !has_bi {
        identify::identify(&c.graph, q)?
    } else {
        identify::identify_basic(&c.graph, q)?
    };
    res.derivation.insert(0, format!("context {ctx}"));
    Ok(res)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::identify::Verdict;
    use crate::sem::{game, game2, random_sem, sem_to_json};

    fn two_context_doc() -> String {
        let low_sem = sem_to_json(&game2(1.0));
        let _ = low_sem;
        r#"{
            "contexts": {
                "high": {"graph": "nodes A B C\nA -> B\nA -- C\nB -- C", "family": "aadmg"},
                "low": {"graph": "nodes A B C\nA -> B\nA <-> C\nB <-> C", "family": "oadmg"}
            },
            "gates": [
                {"from": "low", "to": "high", "when": {"var": "A", "op": ">", "value": 0, "mode": "intervened"}},
                {"from": "high", "to": "low", "when": {"var": "A", "op": "<=", "value": 0, "mode": "intervened"}}
            ],
            "initial": "low"
        }"#
        .to_string()
    }

    fn intervene(var: &str, value: f64) -> Event {
        Event::Intervene {
            var: var.into(),
            value,
            mechanism: None,
        }
    }

    #[test]
    fn loads_and_switches_on_sign() {
        let model = load_gated(&two_context_doc()).unwrap();
        let mut state = initial_state(&model);
        assert_eq!(state.context, "low");
        state = step(&model, &state, &intervene("A", 1.0)).unwrap();
        assert_eq!(state.context, "high");
        state = step(&model, &state, &intervene("A", 0.0)).unwrap();
        assert_eq!(state.context, "low");
        // Alternation exactly at sign crossings.
        for (v, expect) in [(-2.0, "low"), (3.0, "high"), (5.0, "high"), (-0.5, "low")] {
            state = step(&model, &state, &intervene("A", v)).unwrap();
            assert_eq!(state.context, expect);
        }
        assert_eq!(state.log.len(), 4);
        // Observations never trigger intervened-mode gates.
        let obs = Event::Observe(BTreeMap::from([("A".to_string(), 9.0)]));
        let after = step(&model, &state, &obs).unwrap();
        assert_eq!(after.context, state.context);
    }

    #[test]
    fn per_context_criteria() {
        let model = load_gated(&two_context_doc()).unwrap();
        let q = EffectQuery::from_labels(
            &model.contexts["high"].graph,
            &["A"],
            &["B"],
            &[],
        )
        .unwrap();
        let hi = identify_in_context(&model, "high", &q).unwrap();
        assert_eq!(crate::estimand::render(hi.estimand().unwrap()), "sum_c p(B|A,c) p(c)");
        let lo = identify_in_context(&model, "low", &q).unwrap();
        assert_eq!(crate::estimand::render(lo.estimand().unwrap()), "p(B|A)");
        assert_eq!(lo.criterion, "calculus");
        assert!(lo.derivation[0].contains("context low"));
    }

    #[test]
    fn single_context_matches_direct_identify() {
        let doc = r#"{
            "contexts": {"only": {"graph": "nodes A B C\nA -> B\nA -- C\nB -- C", "family": "aadmg"}},
            "gates": [],
            "initial": "only"
        }"#;
        let model = load_gated(doc).unwrap();
        let g = &model.contexts["only"].graph;
        let q = EffectQuery::from_labels(g, &["A"], &["B"], &[]).unwrap();
        let direct = identify::identify(g, &q).unwrap();
        let via = identify_in_context(&model, "only", &q).unwrap();
        assert_eq!(
            crate::estimand::render(via.estimand().unwrap()),
            crate::estimand::render(direct.estimand().unwrap())
        );
    }

    #[test]
    fn load_errors() {
        // Missing context reference.
        let doc = r#"{
            "contexts": {"a": {"graph": "nodes X", "family": "dag"}},
            "gates": [{"from": "a", "to": "b", "when": {"var": "X", "op": ">", "value": 0}}],
            "initial": "a"
        }"#;
        assert!(load_gated(doc).is_err());
        // Family mismatch: bidirected edge under an aadmg tag.
        let doc = r#"{
            "contexts": {"a": {"graph": "nodes X Y\nX <-> Y", "family": "aadmg"}},
            "gates": [],
            "initial": "a"
        }"#;
        assert!(load_gated(doc).is_err());
        // Overlapping value gates out of one context.
        let doc = r#"{
            "contexts": {
                "a": {"graph": "nodes X", "family": "dag"},
                "b": {"graph": "nodes X", "family": "dag"}
            },
            "gates": [
                {"from": "a", "to": "b", "when": {"var": "X", "op": ">", "value": 0}},
                {"from": "a", "to": "b", "when": {"var": "X", "op": ">=", "value": 0}}
            ],
            "initial": "a"
        }"#;
        assert!(load_gated(doc).is_err());
    }

    #[test]
    fn mechanism_tags_match_exactly() {
        let doc = r#"{
            "contexts": {
                "a": {"graph": "nodes W", "family": "dag"},
                "b": {"graph": "nodes W", "family": "dag"}
            },
            "gates": [
                {"from": "a", "to": "b", "when": {"var": "W", "op": ">", "value": 30, "mode": "intervened", "mechanism": "bootcamp"}}
            ],
            "initial": "a"
        }"#;
        let model = load_gated(doc).unwrap();
        let state = initial_state(&model);
        let plain = step(&model, &state, &intervene("W", 40.0)).unwrap();
        assert_eq!(plain.context, "a");
        let tagged = Event::Intervene {
            var: "W".into(),
            value: 40.0,
            mechanism: Some("bootcamp".into()),
        };
        assert_eq!(step(&model, &state, &tagged).unwrap().context, "b");
        let wrong = Event::Intervene {
            var: "W".into(),
            value: 40.0,
            mechanism: Some("coaching".into()),
        };
        assert_eq!(step(&model, &state, &wrong).unwrap().context, "a");
    }

    fn likelihood_doc() -> String {
        let mut g2 = Admg::new(["B", "Y", "Z"]).unwrap();
        g2.add_directed(0, 2).unwrap();
        g2.add_directed(1, 2).unwrap();
        let mut g3 = Admg::new(["B", "Y", "Z"]).unwrap();
        g3.add_directed(0, 2).unwrap();
        let sem2 = sem_to_json(&random_sem(&g2, 7));
        let sem3 = sem_to_json(&random_sem(&g3, 8));
        format!(
            r#"{{
            "contexts": {{
                "r2": {{"graph": "nodes B Y Z\nB -> Z\nY -> Z", "family": "dag", "sem": {sem2}}},
                "r3": {{"graph": "nodes B Y Z\nB -> Z", "family": "dag", "sem": {sem3}}}
            }},
            "gates": [
                {{"from": "r2", "to": "r3", "when": {{"ratio": ["r3", "r2"], "theta": 2.718281828459045}}}},
                {{"from": "r3", "to": "r2", "when": {{"ratio": ["r2", "r3"], "theta": 2.718281828459045}}}}
            ],
            "initial": "r2"
        }}"#
        )
    }

    #[test]
    fn likelihood_gates_follow_the_generating_context() {
        let model = load_gated(&likelihood_doc()).unwrap();
        let sem3 = model.contexts["r3"].sem.clone().unwrap();
        let labels: Vec<String> = model.contexts["r3"].graph.labels().to_vec();
        let batch = Event::DataBatch {
            labels: labels.clone(),
            data: sem3.sample(2000, 42).unwrap(),
        };
        let state = run(&model, std::slice::from_ref(&batch)).unwrap();
        assert_eq!(state.context, "r3");
        // A batch from r2's own model keeps the state in r2.
        let sem2 = model.contexts["r2"].sem.clone().unwrap();
        let own = Event::DataBatch {
            labels,
            data: sem2.sample(2000, 43).unwrap(),
        };
        assert_eq!(run(&model, &[own]).unwrap().context, "r2");
    }

    #[test]
    fn refit_loglik_difference_is_scale_invariant() {
        // Shared affine maps of the data are absorbed by refitting, leaving
        // the log-likelihood difference unchanged.
        let sem_a = game(1.0);
        let sem_b = game2(1.0);
        let data = sem_a.sample(500, 11).unwrap();
        let diff = sem_a.loglik(&data, true).unwrap() - sem_b.loglik(&data, true).unwrap();
        let scaled = data.map(|v| 3.0 * v);
        let diff_scaled =
            sem_a.loglik(&scaled, true).unwrap() - sem_b.loglik(&scaled, true).unwrap();
        assert!((diff - diff_scaled).abs() < 1e-6, "{diff} vs {diff_scaled}");
    }

    #[test]
    fn identical_streams_identical_trajectories() {
        let model = load_gated(&two_context_doc()).unwrap();
        let events: Vec<Event> = [1.0, -1.0, 2.0, 0.0, 4.0]
            .iter()
            .map(|&v| intervene("A", v))
            .collect();
        assert_eq!(run(&model, &events).unwrap(), run(&model, &events).unwrap());
    }

    #[test]
    fn strengthened_witness_blocks_identification_in_context() {
        let doc = r#"{
            "contexts": {"r1": {"graph": "nodes T C A W\nT -> C\nT -- C\nC -> A\nW -> C\nT -> A", "family": "aadmg"}},
            "gates": [],
            "initial": "r1"
        }"#;
        let model = load_gated(doc).unwrap();
        let g = &model.contexts["r1"].graph;
        let q = EffectQuery::from_labels(g, &["T"], &["A", "C"], &[]).unwrap();
        let res = identify_in_context(&model, "r1", &q).unwrap();
        assert!(matches!(res.verdict, Verdict::NotIdentified { .. }));
        assert_eq!(res.criterion, "strengthened-children");
    }

    #[test]
    fn mixed_edge_contexts_are_unsupported() {
        let doc = r#"{
            "contexts": {"m": {"graph": "nodes X Y Z\nX -> Y\nX -- Z\nY <-> Z", "family": "admg"}},
            "gates": [],
            "initial": "m"
        }"#;
        let model = load_gated(doc).unwrap();
        let g = &model.contexts["m"].graph;
        let q = EffectQuery::from_labels(g, &["X"], &["Y"], &[]).unwrap();
        assert!(matches!(
            identify_in_context(&model, "m", &q),
            Err(Error::Unsupported(_))
        ));
    }
}
