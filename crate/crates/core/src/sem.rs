//! Linear-Gaussian structural equation models conforming to an ADMG:
//! ground-truth observational and interventional distributions, sampling,
//! likelihoods, and the graphical independence oracle.
//!
//! Each node satisfies `V = Σ α_PV P + Σ β_VE λ_E + ε_V`, with one latent
//! `λ` per bidirected edge (variance `Λ_E`) and errors `ε` whose precision
//! matrix carries the undirected skeleton's sparsity.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::estimand::{sym_pinv, GaussianDist};
use crate::graph::{parse_graph, serialize_graph_ordered, Admg, NodeIdx, NodeSet};
use crate::learn::{Fact, FactKind, FactSet};
use crate::sep::{connects_by_route, magnify};
use crate::surgery::intervene;
use crate::Result;

const LN_2PI: f64 = 1.8378770664093453;

// ── Model ────────────────────────────────────────────────────────────────

#[derive(Debug, Clone)]
pub struct GaussianSem {
    graph: Admg,
    /// Coefficient of each directed edge (from, to).
    alpha: BTreeMap<(NodeIdx, NodeIdx), f64>,
    /// Loadings of the shared latent of each bidirected edge, per end.
    beta: BTreeMap<(NodeIdx, NodeIdx), (f64, f64)>,
    /// Variance of the shared latent of each bidirected edge.
    lambda_var: BTreeMap<(NodeIdx, NodeIdx), f64>,
    /// Precision matrix of the errors, sparse on the undirected skeleton.
    error_precision: DMatrix<f64>,
    /// Cached inverse of the precision.
    error_cov: DMatrix<f64>,
}

impl GaussianSem {
    pub fn new(
        graph: Admg,
        alpha: BTreeMap<(NodeIdx, NodeIdx), f64>,
        beta: BTreeMap<(NodeIdx, NodeIdx), (f64, f64)>,
        lambda_var: BTreeMap<(NodeIdx, NodeIdx), f64>,
        error_precision: DMatrix<f64>,
    ) -> Result<GaussianSem> {
        let n = graph.n();
        let directed: Vec<(NodeIdx, NodeIdx)> = graph.directed_edges().collect();
        if alpha.len() != directed.len() || directed.iter().any(|e| !alpha.contains_key(e)) {
            return Err(Error::input("alpha must assign exactly the directed edges"));
        }
        let bidirected: Vec<(NodeIdx, NodeIdx)> = graph.bidirected_edges().collect();
        for map_len in [beta.len(), lambda_var.len()] {
            if map_len != bidirected.len() {
                return Err(Error::input("beta and lambdaVar must cover the bidirected edges"));
            }
        }
        for e in &bidirected {
            if !beta.contains_key(e) || !lambda_var.contains_key(e) {
                return Err(Error::input("beta and lambdaVar must cover the bidirected edges"));
            }
        }
        if lambda_var.values().any(|&v| v <= 0.0) {
            return Err(Error::input("lambdaVar entries must be positive"));
        }
        if error_precision.nrows() != n || error_precision.ncols() != n {
            return Err(Error::input("errorPrecision dimension mismatch"));
        }
        for i in 0..n {
            for j in 0..n {
                if (error_precision[(i, j)] - error_precision[(j, i)]).abs() > 1e-9 {
                    return Err(Error::input("errorPrecision must be symmetric"));
                }
                if i != j && !graph.has_undirected(i, j) && error_precision[(i, j)].abs() > 1e-12 {
                    return Err(Error::input(
                        "errorPrecision support must follow the undirected skeleton",
                    ));
                }
            }
        }
        if n > 0 {
            let min_eig = error_precision
                .clone()
                .symmetric_eigen()
                .eigenvalues
                .min();
            if min_eig <= 1e-9 {
                return Err(Error::input("errorPrecision must be positive definite"));
            }
        }
        let (error_cov, _) = sym_pinv(&error_precision)?;
        Ok(GaussianSem {
            graph,
            alpha,
            beta,
            lambda_var,
            error_precision,
            error_cov,
        })
    }

    pub fn graph(&self) -> &Admg {
        &self.graph
    }

    pub fn alpha(&self) -> &BTreeMap<(NodeIdx, NodeIdx), f64> {
        &self.alpha
    }

    /// Coefficient matrix A with A[to, from] = α_{from→to}.
    fn coeff_matrix(&self) -> DMatrix<f64> {
        let n = self.graph.n();
        let mut a = DMatrix::zeros(n, n);
        for (&(from, to), &c) in &self.alpha {
            a[(to, from)] = c;
        }
        a
    }

    /// Latent loading matrix B (n × #bidirected) and latent variances Λ.
    fn latent_system(&self) -> (DMatrix<f64>, DVector<f64>) {
        let n = self.graph.n();
        let m = self.beta.len();
        let mut b = DMatrix::zeros(n, m);
        let mut lam = DVector::zeros(m);
        for (col, (&(u, v), &(bu, bv))) in self.beta.iter().enumerate() {
            b[(u, col)] = bu;
            b[(v, col)] = bv;
            lam[col] = self.lambda_var[&(u, v)];
        }
        (b, lam)
    }

    /// Covariance of the structural noise `Bλ + ε` restricted to `rows`.
    fn noise_cov(&self, rows: &[NodeIdx]) -> DMatrix<f64> {
        let (b, lam) = self.latent_system();
        let k = rows.len();
        DMatrix::from_fn(k, k, |r, c| {
            let (i, j) = (rows[r], rows[c]);
            let latent: f64 = (0..b.ncols()).map(|e| b[(i, e)] * lam[e] * b[(j, e)]).sum();
            latent + self.error_cov[(i, j)]
        })
    }

    /// Exact observational law: solves V = A·V + B·λ + ε.
    pub fn implied_covariance(&self) -> GaussianDist {
        let n = self.graph.n();
        let a = self.coeff_matrix();
        let inv = (DMatrix::identity(n, n) - a)
            .try_inverse()
            .expect("I - A invertible by acyclicity");
        let rows: Vec<NodeIdx> = (0..n).collect();
        let cov = &inv * self.noise_cov(&rows) * inv.transpose();
        GaussianDist::new(
            self.graph.labels().to_vec(),
            DVector::zeros(n),
            (&cov + cov.transpose()) / 2.0,
        )
        .expect("implied covariance is PSD")
    }

    /// Truncated-system interventional law: deletes the equations of the
    /// intervened nodes, substitutes fixed values, and keeps the full joint
    /// law of the latents and errors. Returns the exact Gaussian of V∖X.
    pub fn interventional_distribution(&self, values: &[(&str, f64)]) -> Result<GaussianDist> {
        let mut x = NodeSet::EMPTY;
        let mut fix = BTreeMap::new();
        for (label, v) in values {
            let i = self.graph.index_of_ok(label)?;
            if fix.insert(i, *v).is_some() {
                return Err(Error::input(format!("duplicate intervention on {label}")));
            }
            x.insert(i);
        }
        let keep: Vec<NodeIdx> = (0..self.graph.n()).filter(|i| !x.contains(*i)).collect();
        let k = keep.len();
        let a = self.coeff_matrix();
        let akk = DMatrix::from_fn(k, k, |r, c| a[(keep[r], keep[c])]);
        let inv = (DMatrix::identity(k, k) - akk)
            .try_inverse()
            .expect("I - A_KK invertible by acyclicity");
        // Constant drive from the intervened parents.
        let drive = DVector::from_fn(k, |r, _| {
            x.iter().map(|j| a[(keep[r], j)] * fix[&j]).sum()
        });
        let mean = &inv * drive;
        let cov = &inv * self.noise_cov(&keep) * inv.transpose();
        GaussianDist::new(
            keep.iter().map(|&i| self.graph.label(i).to_string()).collect(),
            mean,
            (&cov + cov.transpose()) / 2.0,
        )
    }

    /// I.i.d. draws from the observational law, one row per draw.
    pub fn sample(&self, n: usize, seed: u64) -> Result<DMatrix<f64>> {
        if n == 0 {
            return Err(Error::input("sample size must be at least 1"));
        }
        let dist = self.implied_covariance();
        let d = dist.vars.len();
        let eig = dist.cov.clone().symmetric_eigen();
        let sqrt = &eig.eigenvectors
            * DMatrix::from_diagonal(&eig.eigenvalues.map(|l| l.max(0.0).sqrt()));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut data = DMatrix::zeros(n, d);
        for r in 0..n {
            let z = DVector::from_fn(d, |_, _| standard_normal(&mut rng));
            let row = &sqrt * z;
            for c in 0..d {
                data[(r, c)] = row[c];
            }
        }
        Ok(data)
    }

    /// Exact Gaussian log-likelihood of the data under the model. With
    /// `refit`, each equation's directed coefficients and residual variance
    /// are re-estimated by least squares first, so likelihood-ratio
    /// comparisons depend on structure rather than on stale coefficients.
    pub fn loglik(&self, data: &DMatrix<f64>, refit: bool) -> Result<f64> {
        let n = data.nrows();
        let d = self.graph.n();
        if data.ncols() != d {
            return Err(Error::input("data column count does not match the model"));
        }
        if !refit {
            let dist = self.implied_covariance();
            let (prec, logdet) = sym_pinv(&dist.cov)?;
            let mut quad = 0.0;
            for r in 0..n {
                let x = data.row(r).transpose();
                quad += (x.transpose() * &prec * &x)[(0, 0)];
            }
            return Ok(-0.5 * (n as f64 * (d as f64 * LN_2PI + logdet) + quad));
        }
        let mut total = 0.0;
        for v in 0..d {
            let parents: Vec<NodeIdx> = self
                .graph
                .parents(NodeSet::singleton(v))
                .iter()
                .collect();
            let p = parents.len() + 1; // intercept
            if n < p + 2 {
                return Err(Error::input(format!(
                    "refit needs at least {} rows for {}",
                    p + 2,
                    self.graph.label(v)
                )));
            }
            let xmat = DMatrix::from_fn(n, p, |r, c| {
                if c == 0 {
                    1.0
                } else {
                    data[(r, parents[c - 1])]
                }
            });
            let yv = data.column(v).clone_owned();
            let xtx = xmat.transpose() * &xmat;
            let (xtx_inv, _) = sym_pinv(&xtx)?;
            let coef = &xtx_inv * xmat.transpose() * &yv;
            let resid = &yv - &xmat * coef;
            let s2 = (resid.norm_squared() / n as f64).max(1e-12);
            total += -0.5 * n as f64 * (LN_2PI + s2.ln() + 1.0);
        }
        Ok(total)
    }
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; both uniforms strictly in (0, 1].
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

// ── Random models ────────────────────────────────────────────────────────

/// Random conforming SEM: coefficients uniform in ±[0.3, 1.2], latent
/// variances in [0.5, 1.5], error precision S·Sᵀ masked to the undirected
/// skeleton and diagonally loaded to a minimum eigenvalue of 0.1.
pub fn random_sem(g: &Admg, seed: u64) -> GaussianSem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coeff = |rng: &mut ChaCha8Rng| -> f64 {
        let mag = rng.gen_range(0.3..=1.2);
        if rng.gen::<bool>() {
            mag
        } else {
            -mag
        }
    };
    let alpha = g
        .directed_edges()
        .map(|e| (e, coeff(&mut rng)))
        .collect();
    let beta = g
        .bidirected_edges()
        .map(|e| (e, (coeff(&mut rng), coeff(&mut rng))))
        .collect();
    let lambda_var = g
        .bidirected_edges()
        .map(|e| (e, rng.gen_range(0.5..=1.5)))
        .collect();
    let n = g.n();
    let s = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..=1.0));
    let mut prec = &s * s.transpose();
    for i in 0..n {
        for j in 0..n {
            if i != j && !g.has_undirected(i, j) {
                prec[(i, j)] = 0.0;
            }
        }
    }
    if n > 0 {
        let min_eig = prec.clone().symmetric_eigen().eigenvalues.min();
        if min_eig < 0.1 {
            prec += DMatrix::identity(n, n) * (0.1 - min_eig);
        }
    }
    GaussianSem::new(g.clone(), alpha, beta, lambda_var, prec)
        .expect("construction satisfies the invariants")
}

// ── Named fixtures ───────────────────────────────────────────────────────

/// The gambling game on `A -> B, A -- C, B -- C`: U_A ~ N(0,σ),
/// U_C ~ N(U_A,σ), U_B ~ N(U_C,σ); A = U_A, C = U_C, B = A + U_B.
pub fn game(sigma: f64) -> GaussianSem {
    let g = Admg::build(["A", "B", "C"], &[("A", "B")], &[("A", "C"), ("B", "C")], &[]).unwrap();
    // Error covariance of (ε_A, ε_B, ε_C) = (U_A, U_B, U_C).
    let cov = DMatrix::from_row_slice(
        3,
        3,
        &[
            sigma, sigma, sigma, //
            sigma, 3.0 * sigma, 2.0 * sigma, //
            sigma, 2.0 * sigma, 2.0 * sigma,
        ],
    );
    let (mut prec, _) = sym_pinv(&cov).unwrap();
    // U_A and U_B are independent given U_C; clear rounding noise so the
    // sparsity invariant holds exactly.
    prec[(0, 1)] = 0.0;
    prec[(1, 0)] = 0.0;
    GaussianSem::new(
        g,
        BTreeMap::from([((0, 1), 1.0)]),
        BTreeMap::new(),
        BTreeMap::new(),
        prec,
    )
    .unwrap()
}

/// The second gambling game on `A -> B, A <-> C, B <-> C`: U_A, U_B
/// independent N(0,σ), U_C ~ N(U_A + U_B, σ); A = U_A, C = U_C, B = A + U_B.
/// Latent shares carry 0.9σ of each U; the remainder goes to the errors.
pub fn game2(sigma: f64) -> GaussianSem {
    let g = Admg::build(["A", "B", "C"], &[("A", "B")], &[], &[("A", "C"), ("B", "C")]).unwrap();
    let shared = 0.9 * sigma;
    let load = sigma / shared; // scales the latent back to full covariance σ
    let beta = BTreeMap::from([((0, 2), (1.0, load)), ((1, 2), (1.0, load))]);
    let lambda_var = BTreeMap::from([((0, 2), shared), ((1, 2), shared)]);
    // var(ε_A) = var(ε_B) = 0.1σ; var(ε_C) tops C's variance up to 3σ.
    let eps_c = 3.0 * sigma - 2.0 * load * load * shared;
    let prec = DMatrix::from_diagonal(&DVector::from_vec(vec![
        1.0 / (0.1 * sigma),
        1.0 / (0.1 * sigma),
        1.0 / eps_c,
    ]));
    GaussianSem::new(g, BTreeMap::from([((0, 1), 1.0)]), beta, lambda_var, prec).unwrap()
}

// ── Independence oracles ─────────────────────────────────────────────────

/// Conditional independence on an exact Gaussian: |partial correlation|
/// below 1e-7.
pub fn ci_oracle(dist: &GaussianDist, x: &str, y: &str, z: &[&str]) -> Result<bool> {
    Ok(partial_correlation(dist, x, y, z)?.abs() < 1e-7)
}

/// Partial correlation ρ_{xy·z} from the exact covariance.
pub fn partial_correlation(dist: &GaussianDist, x: &str, y: &str, z: &[&str]) -> Result<f64> {
    if z.contains(&x) || z.contains(&y) {
        return Err(Error::input("conditioning set must exclude the endpoints"));
    }
    let mut vars = vec![x, y];
    vars.extend_from_slice(z);
    let sub = dist.marginal(&vars)?;
    let (prec, _) = sym_pinv(&sub.cov)?;
    let denom = (prec[(0, 0)] * prec[(1, 1)]).sqrt();
    if denom <= 0.0 {
        return Err(Error::Numerical("degenerate marginal in partial correlation".into()));
    }
    Ok(-prec[(0, 1)] / denom)
}

/// Graphical fact generator for the learner: for every unordered pair, every
/// conditioning subset of the remaining nodes, and every regime (the
/// observational one plus a single-node intervention on each node), records
/// dep when the pair is route-connected in the regime graph and indep
/// otherwise. All weights are 1.
pub fn sep_oracle(g: &Admg) -> Result<FactSet> {
    let n = g.n();
    let mut facts = Vec::new();
    let mut regimes = vec![None];
    regimes.extend((0..n).map(Some));
    for regime in regimes {
        let rg = match regime {
            None => g.clone(),
            Some(i) => intervene(g, NodeSet::singleton(i)),
        };
        for x in 0..n {
            for y in x + 1..n {
                let others = g.all_nodes().without(x).without(y);
                for cond in crate::graph::subsets_of(others) {
                    let connected = connects_by_route(&rg, x, y, cond)?;
                    facts.push(Fact {
                        kind: if connected { FactKind::Dep } else { FactKind::Indep },
                        x,
                        y,
                        cond,
                        regime,
                        weight: 1,
                    });
                }
            }
        }
    }
    FactSet::new(n, facts)
}

// ── Serialization ────────────────────────────────────────────────────────

#[derive(Serialize, Deserialize)]
struct SemDoc {
    graph: String,
    alpha: BTreeMap<String, f64>,
    beta: BTreeMap<String, f64>,
    #[serde(rename = "lambdaVar")]
    lambda_var: BTreeMap<String, f64>,
    #[serde(rename = "errorPrecision")]
    error_precision: Vec<Vec<f64>>,
}

/// JSON document with keys graph / alpha / beta / lambdaVar / errorPrecision.
/// Directed edges are keyed `A->B`, bidirected edges `A<->B` (ends in label
/// order as serialized), betas `A<->B:end`, and the precision matrix follows
/// the graph's node order.
pub fn sem_to_json(sem: &GaussianSem) -> String {
    let g = sem.graph();
    let doc = SemDoc {
        graph: serialize_graph_ordered(g),
        alpha: sem
            .alpha
            .iter()
            .map(|(&(a, b), &c)| (format!("{}->{}", g.label(a), g.label(b)), c))
            .collect(),
        beta: sem
            .beta
            .iter()
            .flat_map(|(&(a, b), &(ba, bb))| {
                let key = format!("{}<->{}", g.label(a), g.label(b));
                [
                    (format!("{key}:{}", g.label(a)), ba),
                    (format!("{key}:{}", g.label(b)), bb),
                ]
            })
            .collect(),
        lambda_var: sem
            .lambda_var
            .iter()
            .map(|(&(a, b), &v)| (format!("{}<->{}", g.label(a), g.label(b)), v))
            .collect(),
        error_precision: (0..g.n())
            .map(|i| (0..g.n()).map(|j| sem.error_precision[(i, j)]).collect())
            .collect(),
    };
    serde_json::to_string_pretty(&doc).expect("serializable")
}

pub fn sem_from_json(text: &str) -> Result<GaussianSem> {
    let doc: SemDoc = serde_json::from_str(text)?;
    let g = parse_graph(&doc.graph)?;
    let mut alpha = BTreeMap::new();
    for (key, c) in &doc.alpha {
        let (a, b) = key
            .split_once("->")
            .ok_or_else(|| Error::input(format!("bad alpha key {key:?}")))?;
        alpha.insert((g.index_of_ok(a.trim())?, g.index_of_ok(b.trim())?), *c);
    }
    let parse_bi = |key: &str| -> Result<(NodeIdx, NodeIdx)> {
        let (a, b) = key
            .split_once("<->")
            .ok_or_else(|| Error::input(format!("bad bidirected key {key:?}")))?;
        let (i, j) = (g.index_of_ok(a.trim())?, g.index_of_ok(b.trim())?);
        Ok(if i < j { (i, j) } else { (j, i) })
    };
    let mut beta: BTreeMap<(NodeIdx, NodeIdx), (f64, f64)> = BTreeMap::new();
    for (key, c) in &doc.beta {
        let (edge_key, end) = key
            .rsplit_once(':')
            .ok_or_else(|| Error::input(format!("beta key {key:?} missing :end")))?;
        let (i, j) = parse_bi(edge_key)?;
        let end_idx = g.index_of_ok(end.trim())?;
        let slot = beta.entry((i, j)).or_insert((0.0, 0.0));
        if end_idx == i {
            slot.0 = *c;
        } else if end_idx == j {
            slot.1 = *c;
        } else {
            return Err(Error::input(format!("beta end {end:?} not on edge {edge_key:?}")));
        }
    }
    let mut lambda_var = BTreeMap::new();
    for (key, v) in &doc.lambda_var {
        lambda_var.insert(parse_bi(key)?, *v);
    }
    let n = g.n();
    if doc.error_precision.len() != n || doc.error_precision.iter().any(|r| r.len() != n) {
        return Err(Error::input("errorPrecision matrix has wrong shape"));
    }
    let prec = DMatrix::from_fn(n, n, |i, j| doc.error_precision[i][j]);
    GaussianSem::new(g, alpha, beta, lambda_var, prec)
}

/// CSV with a header row of node labels, one sample per line.
pub fn data_to_csv(labels: &[String], data: &DMatrix<f64>) -> String {
    let mut out = labels.join(",");
    out.push('\n');
    for r in 0..data.nrows() {
        let row: Vec<String> = (0..data.ncols()).map(|c| format!("{}", data[(r, c)])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn data_from_csv(text: &str) -> Result<(Vec<String>, DMatrix<f64>)> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::input("empty CSV"))?;
    let labels: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in lines.enumerate() {
        let vals: Vec<f64> = line
            .split(',')
            .map(|s| {
                s.trim()
                    .parse()
                    .map_err(|_| Error::parse(i + 2, "invalid number"))
            })
            .collect::<Result<_>>()?;
        if vals.len() != labels.len() {
            return Err(Error::parse(i + 2, "row width does not match header"));
        }
        rows.push(vals);
    }
    let data = DMatrix::from_fn(rows.len(), labels.len(), |r, c| rows[r][c]);
    Ok((labels, data))
}

// ── Magnified-system cross-check ─────────────────────────────────────────

/// Recomputes the observational covariance through the magnified graph's
/// explicit λ/ε system; must match `implied_covariance` to precision.
pub fn implied_covariance_via_magnification(sem: &GaussianSem) -> Result<GaussianDist> {
    let g = sem.graph();
    let n = g.n();
    let mag = magnify(g)?;
    let big = &mag.graph;
    let bn = big.n();
    // Coefficients of the magnified linear system: original α on V→V edges,
    // β on λ→V edges, 1 on ε→V edges.
    let mut a = DMatrix::zeros(bn, bn);
    for (&(from, to), &c) in &sem.alpha {
        a[(to, from)] = c;
    }
    for (&(u, v), &(bu, bv)) in &sem.beta {
        let lam = big.index_of_ok(&format!("lam_{}_{}", g.label(u), g.label(v)))?;
        a[(u, lam)] = bu;
        a[(v, lam)] = bv;
    }
    let mut exo_cov = DMatrix::zeros(bn, bn);
    for (&(u, v), &var) in &sem.lambda_var {
        let lam = big.index_of_ok(&format!("lam_{}_{}", g.label(u), g.label(v)))?;
        exo_cov[(lam, lam)] = var;
    }
    let eps: Vec<NodeIdx> = (0..n)
        .map(|v| big.index_of_ok(&format!("eps_{}", g.label(v))))
        .collect::<Result<_>>()?;
    for i in 0..n {
        a[(i, eps[i])] = 1.0;
        for j in 0..n {
            exo_cov[(eps[i], eps[j])] = sem.error_cov[(i, j)];
        }
    }
    let inv = (DMatrix::identity(bn, bn) - a)
        .try_inverse()
        .expect("magnified system is acyclic");
    let full = &inv * exo_cov * inv.transpose();
    let cov = DMatrix::from_fn(n, n, |i, j| full[(i, j)]);
    GaussianDist::new(
        g.labels().to_vec(),
        DVector::zeros(n),
        (&cov + cov.transpose()) / 2.0,
    )
}
