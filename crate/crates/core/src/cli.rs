//! Command-line front door: thin adapters from subcommands to the library
//! modules. Results go to stdout, diagnostics to stderr. Exit codes: 0 on
//! success, 1 when `--assert` requests a positive verdict and the result is
//! negative, 2 on usage or input errors.

use std::fs;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::error::Error;
use crate::estimand::{self, GaussianDist};
use crate::gated;
use crate::graph::{parse_graph, serialize_graph, Admg, NodeSet};
use crate::identify::{self, EffectQuery, Verdict};
use crate::learn::{self, Family, LearnConfig};
use crate::sem::{self, sem_from_json};
use crate::sep;
use crate::surgery;
use crate::Result;

#[derive(Parser)]
#[command(name = "admg", about = "Causal modelling with acyclic directed mixed graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum CriterionArg {
    Path,
    Route,
}

#[derive(Args)]
struct FormatArg {
    /// Output format.
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

#[derive(Subcommand)]
enum Command {
    /// Separation query on a graph file.
    Sep {
        graph: String,
        #[arg(long, required = true, num_args = 1..)]
        x: Vec<String>,
        #[arg(long, required = true, num_args = 1..)]
        y: Vec<String>,
        #[arg(long, num_args = 0..)]
        z: Vec<String>,
        /// Separation criterion to apply.
        #[arg(long, value_enum, default_value = "path")]
        criterion: CriterionArg,
        /// Intervene on these nodes first, conditioning on them as well.
        #[arg(long = "do", num_args = 0..)]
        do_: Vec<String>,
        /// Exit 1 when the sets are connected.
        #[arg(long)]
        assert: bool,
        #[command(flatten)]
        fmt: FormatArg,
    },
    /// Print the magnified graph (latents and error nodes made explicit).
    Magnify {
        graph: String,
        #[command(flatten)]
        fmt: FormatArg,
    },
    /// Print the graph after intervening on the given nodes.
    Intervene {
        graph: String,
        #[arg(long = "do", required = true, num_args = 1..)]
        do_: Vec<String>,
        #[command(flatten)]
        fmt: FormatArg,
    },
    /// Identify a causal effect p(on | do, given).
    Identify {
        graph: String,
        #[arg(long = "do", required = true, num_args = 1..)]
        do_: Vec<String>,
        #[arg(long, required = true, num_args = 1..)]
        on: Vec<String>,
        #[arg(long, num_args = 0..)]
        given: Vec<String>,
        /// Exit 1 unless the effect is identified.
        #[arg(long)]
        assert: bool,
        #[command(flatten)]
        fmt: FormatArg,
    },
    /// Exact structure learning from a facts file.
    Learn {
        facts: String,
        #[arg(long, default_value = "admg")]
        family: String,
        /// Print every optimal graph instead of the first.
        #[arg(long)]
        all_optima: bool,
        #[arg(long, default_value_t = 1)]
        line_penalty: u64,
        #[arg(long, default_value_t = 1)]
        arrow_penalty: u64,
        #[arg(long, default_value_t = 1)]
        biarrow_penalty: u64,
        #[command(flatten)]
        fmt: FormatArg,
    },
    /// Emit the equivalent answer-set program for a facts file.
    EmitAsp {
        facts: String,
        #[arg(long, default_value = "admg")]
        family: String,
        #[arg(long, default_value_t = 1)]
        line_penalty: u64,
        #[arg(long, default_value_t = 1)]
        arrow_penalty: u64,
        #[arg(long, default_value_t = 1)]
        biarrow_penalty: u64,
    },
    /// Full (in)dependence oracle of a ground-truth graph, as a facts file.
    Oracle { graph: String },
    /// Work with a linear-Gaussian structural equation model.
    Sem {
        /// Graph file (with --random) or SEM JSON file.
        input: String,
        /// Draw random conforming parameters for a graph file.
        #[arg(long)]
        random: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Print the implied observational distribution.
        #[arg(long)]
        cov: bool,
        /// Print the interventional distribution under --do assignments.
        #[arg(long)]
        truth: bool,
        /// Assignments like X=1.5 for --truth.
        #[arg(long = "do", num_args = 0..)]
        do_: Vec<String>,
        /// Sample this many rows as CSV.
        #[arg(long)]
        sample: Option<usize>,
        #[command(flatten)]
        fmt: FormatArg,
    },
    /// Run an event stream through a gated model.
    Gate {
        model: String,
        /// Event stream file, one JSON object per line.
        events: Option<String>,
        /// With --on: identify p(on | do, given) in every context.
        #[arg(long = "do", num_args = 0..)]
        do_: Vec<String>,
        #[arg(long, num_args = 0..)]
        on: Vec<String>,
        #[arg(long, num_args = 0..)]
        given: Vec<String>,
        #[command(flatten)]
        fmt: FormatArg,
    },
}

/// Parses argv and executes; returns the process exit code.
pub fn run<I>(argv: I) -> i32
where
    I: IntoIterator<Item = String>,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // Let clap print help/version on stdout and usage errors on
            // stderr; normalize every parse failure to exit code 2.
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn load_graph(path: &str) -> Result<Admg> {
    parse_graph(&fs::read_to_string(path)?)
}

fn node_set(g: &Admg, labels: &[String]) -> Result<NodeSet> {
    let refs: Vec<&str> = labels.iter().map(String::as_str).collect();
    g.node_set(&refs)
}

fn print_dist(d: &GaussianDist, fmt: Format) {
    match fmt {
        Format::Json => {
            let n = d.vars.len();
            let doc = json!({
                "vars": d.vars,
                "mean": (0..n).map(|i| d.mean[i]).collect::<Vec<f64>>(),
                "cov": (0..n)
                    .map(|i| (0..n).map(|j| d.cov[(i, j)]).collect::<Vec<f64>>())
                    .collect::<Vec<Vec<f64>>>(),
            });
            println!("{doc}");
        }
        Format::Text => {
            println!("vars: {}", d.vars.join(" "));
            let means: Vec<String> = (0..d.vars.len()).map(|i| format!("{:.6}", d.mean[i])).collect();
            println!("mean: {}", means.join(" "));
            println!("cov:");
            for i in 0..d.vars.len() {
                let row: Vec<String> =
                    (0..d.vars.len()).map(|j| format!("{:.6}", d.cov[(i, j)])).collect();
                println!("  {}", row.join(" "));
            }
        }
    }
}

fn print_graph(g: &Admg, fmt: Format) {
    match fmt {
        Format::Json => println!("{}", json!({ "graph": serialize_graph(g) })),
        Format::Text => print!("{}", serialize_graph(g)),
    }
}

fn effect_query(g: &Admg, do_: &[String], on: &[String], given: &[String]) -> Result<EffectQuery> {
    EffectQuery::new(node_set(g, do_)?, node_set(g, on)?, node_set(g, given)?)
}

fn identify_report(g: &Admg, res: &identify::IdentificationResult, fmt: Format) -> i32 {
    match fmt {
        Format::Json => {
            let (verdict, detail) = match &res.verdict {
                Verdict::Identified { estimand, intermediates } => (
                    "identified",
                    json!({
                        "estimand": estimand::render(estimand),
                        "intermediates": intermediates
                            .iter()
                            .map(|m| json!({
                                "name": m.name,
                                "vars": m.vars,
                                "fixed": m.fixed,
                                "estimand": estimand::render(&m.estimand),
                            }))
                            .collect::<Vec<_>>(),
                    }),
                ),
                Verdict::NotIdentified { witness } => {
                    ("not-identified", json!({ "witness": witness.render(g) }))
                }
                Verdict::Undecided => ("undecided", json!({})),
            };
            println!(
                "{}",
                json!({
                    "verdict": verdict,
                    "criterion": res.criterion,
                    "detail": detail,
                    "derivation": res.derivation,
                })
            );
        }
        Format::Text => match &res.verdict {
            Verdict::Identified { estimand, intermediates } => {
                for m in intermediates {
                    println!(
                        "let {}({}) = {}",
                        m.name,
                        m.vars.join(","),
                        estimand::render(&m.estimand)
                    );
                }
                println!("identified ({}): {}", res.criterion, estimand::render(estimand));
            }
            Verdict::NotIdentified { witness } => {
                println!("not identified ({}): witness {}", res.criterion, witness.render(g));
            }
            Verdict::Undecided => println!("undecided"),
        },
    }
    i32::from(!matches!(res.verdict, Verdict::Identified { .. }))
}

fn learn_config(family: &str, line: u64, arrow: u64, biarrow: u64) -> Result<LearnConfig> {
    Ok(LearnConfig {
        subfamily: Family::parse(family)?,
        line_penalty: line,
        arrow_penalty: arrow,
        biarrow_penalty: biarrow,
    })
}

fn parse_assignments(pairs: &[String]) -> Result<Vec<(String, f64)>> {
    pairs
        .iter()
        .map(|p| {
            let (var, val) = p
                .split_once('=')
                .ok_or_else(|| Error::input(format!("expected VAR=value, got {p:?}")))?;
            let v: f64 = val
                .parse()
                .map_err(|_| Error::input(format!("bad numeric value in {p:?}")))?;
            Ok((var.to_string(), v))
        })
        .collect()
}

fn execute(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Sep { graph, x, y, z, criterion, do_, assert, fmt } => {
            let g = load_graph(&graph)?;
            let (xs, ys, zs, ws) = (
                node_set(&g, &x)?,
                node_set(&g, &y)?,
                node_set(&g, &z)?,
                node_set(&g, &do_)?,
            );
            let crit = match criterion {
                CriterionArg::Path => sep::Criterion::Path,
                CriterionArg::Route => sep::Criterion::Route,
            };
            let separated = if ws.is_empty() {
                sep::separated(&g, sep::SeparationQuery::new(xs, ys, zs)?, crit)?
            } else {
                sep::separated_after_intervention(&g, xs, ys, zs, ws, crit)?
            };
            let witness = if !separated && ws.is_empty() {
                sep::separation_witness(&g, sep::SeparationQuery::new(xs, ys, zs)?)?
                    .map(|w| w.render(&g))
            } else {
                None
            };
            match fmt.format {
                Format::Json => println!(
                    "{}",
                    json!({ "separated": separated, "witness": witness })
                ),
                Format::Text => match (&separated, &witness) {
                    (true, _) => println!("separated"),
                    (false, Some(w)) => println!("connected: {w}"),
                    (false, None) => println!("connected"),
                },
            }
            Ok(i32::from(assert && !separated))
        }
        Command::Magnify { graph, fmt } => {
            let g = load_graph(&graph)?;
            print_graph(&sep::magnify(&g)?.graph, fmt.format);
            Ok(0)
        }
        Command::Intervene { graph, do_, fmt } => {
            let g = load_graph(&graph)?;
            let x = node_set(&g, &do_)?;
            print_graph(&surgery::intervene(&g, x), fmt.format);
            Ok(0)
        }
        Command::Identify { graph, do_, on, given, assert, fmt } => {
            let g = load_graph(&graph)?;
            let q = effect_query(&g, &do_, &on, &given)?;
            let res = identify::identify(&g, &q)?;
            let negative = identify_report(&g, &res, fmt.format);
            Ok(if assert { negative } else { 0 })
        }
        Command::Learn {
            facts,
            family,
            all_optima,
            line_penalty,
            arrow_penalty,
            biarrow_penalty,
            fmt,
        } => {
            let fs = learn::parse_facts(&fs::read_to_string(&facts)?)?;
            let cfg = learn_config(&family, line_penalty, arrow_penalty, biarrow_penalty)?;
            let res = learn::learn(&fs, &cfg)?;
            let shown: &[Admg] = if all_optima { &res.graphs } else { &res.graphs[..1] };
            match fmt.format {
                Format::Json => println!(
                    "{}",
                    json!({
                        "penalty": res.penalty,
                        "optima": res.graphs.len(),
                        "graphs": shown.iter().map(|g| serialize_graph(g)).collect::<Vec<_>>(),
                    })
                ),
                Format::Text => {
                    println!("penalty {} ({} optimal graphs)", res.penalty, res.graphs.len());
                    for g in shown {
                        println!();
                        print!("{}", serialize_graph(g));
                    }
                }
            }
            Ok(0)
        }
        Command::EmitAsp {
            facts,
            family,
            line_penalty,
            arrow_penalty,
            biarrow_penalty,
        } => {
            let fs = learn::parse_facts(&fs::read_to_string(&facts)?)?;
            let cfg = learn_config(&family, line_penalty, arrow_penalty, biarrow_penalty)?;
            print!("{}", learn::emit_asp(&fs, &cfg));
            Ok(0)
        }
        Command::Oracle { graph } => {
            let g = load_graph(&graph)?;
            print!("{}", learn::serialize_facts(&sem::sep_oracle(&g)?));
            Ok(0)
        }
        Command::Sem { input, random, seed, cov, truth, do_, sample, fmt } => {
            let text = fs::read_to_string(&input)?;
            let model = if random {
                sem::random_sem(&parse_graph(&text)?, seed)
            } else {
                sem_from_json(&text)?
            };
            if cov {
                print_dist(&model.implied_covariance(), fmt.format);
            } else if truth {
                let assigns = parse_assignments(&do_)?;
                let refs: Vec<(&str, f64)> =
                    assigns.iter().map(|(v, x)| (v.as_str(), *x)).collect();
                print_dist(&model.interventional_distribution(&refs)?, fmt.format);
            } else if let Some(n) = sample {
                let data = model.sample(n, seed)?;
                print!("{}", sem::data_to_csv(model.graph().labels(), &data));
            } else {
                println!("{}", sem::sem_to_json(&model));
            }
            Ok(0)
        }
        Command::Gate { model, events, do_, on, given, fmt } => {
            let m = gated::load_gated(&fs::read_to_string(&model)?)?;
            let mut state = gated::initial_state(&m);
            if let Some(path) = events {
                for line in fs::read_to_string(&path)?.lines() {
                    if line.trim().is_empty() {
                        continue;
                    }
                    state = gated::step(&m, &state, &gated::parse_event(line)?)?;
                }
            }
            let mut reports = Vec::new();
            if !on.is_empty() {
                for (name, ctx) in &m.contexts {
                    let q = effect_query(&ctx.graph, &do_, &on, &given)?;
                    let res = gated::identify_in_context(&m, name, &q);
                    reports.push((name.clone(), res));
                }
            }
            match fmt.format {
                Format::Json => {
                    let contexts: Vec<_> = reports
                        .iter()
                        .map(|(name, res)| match res {
                            Ok(r) => json!({
                                "context": name,
                                "verdict": match r.verdict {
                                    Verdict::Identified { .. } => "identified",
                                    Verdict::NotIdentified { .. } => "not-identified",
                                    Verdict::Undecided => "undecided",
                                },
                                "criterion": r.criterion,
                                "estimand": r.estimand().map(estimand::render),
                            }),
                            Err(e) => json!({ "context": name, "error": e.to_string() }),
                        })
                        .collect();
                    println!(
                        "{}",
                        json!({
                            "context": state.context,
                            "transitions": state.log,
                            "identification": contexts,
                        })
                    );
                }
                Format::Text => {
                    for t in &state.log {
                        println!("{t}");
                    }
                    println!("context: {}", state.context);
                    for (name, res) in &reports {
                        match res {
                            Ok(r) => {
                                let g = &m.contexts[name].graph;
                                print!("[{name}] ");
                                identify_report(g, r, Format::Text);
                            }
                            Err(e) => println!("[{name}] error: {e}"),
                        }
                    }
                }
            }
            Ok(0)
        }
    }
}
