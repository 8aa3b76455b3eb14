//! Command-line front end: file-driven, reproducible experiments.
//!
//! Every report embeds the config hash, the seed, and the conventions in
//! force, so a run can be reproduced from its own output. Exit codes:
//! 0 success, 2 config error, 3 capability error, 4 divergence or parity
//! flags when `--strict` is set.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::clifford::SpinorModule;
use crate::dirac::{build_basic_dirac, p_trace_inverse, spectrum, Truncation};
use crate::error::{Error, Result};
use crate::graph::{parse_graph, serialize_graph, FWord, RefinementSystem};
use crate::holonomy::HolonomyElement;
use crate::jlo::{jlo_component, GradingMode, Method};
use crate::lie::{rational_to_f64, Factor, Rational, RootDatum};
use crate::summability::{
    heat_trace_full, perturbation_sup, y_bound, EdgeCounts, WeightSequence,
};
use crate::triple::{assemble_triple, verify_morphism, GraphTriple, ModuleKind};

#[derive(Parser)]
#[command(name = "graphtriple", version, about = "Finite-truncation graph spectral triples")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// Random seed recorded in every report.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Promote divergence and parity flags to failures (exit 4).
    #[arg(long, global = true)]
    strict: bool,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TripleArgs {
    /// Graph file (vertex/edge/gen lines); a one-loop graph when omitted.
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Group spec, e.g. `su2:killing`, `circle:1`, `[su2:killing, circle:1]`.
    #[arg(long)]
    group: String,
    /// Per-edge Peter-Weyl truncation.
    #[arg(long)]
    cutoff: i64,
    /// Weight spec: lattice(d=..), geometric(base=..), explicit(..),
    /// family("expr", name=value, ..).
    #[arg(long, default_value = "explicit(1)")]
    weights: String,
    /// Refinement level to assemble (levels above 1 subdivide in `--parts`).
    #[arg(long, default_value_t = 1)]
    level: usize,
    /// Subdivision arity per refinement step.
    #[arg(long, default_value_t = 2)]
    parts: usize,
    /// Edge module: graded (default) or ungraded (single-edge only).
    #[arg(long, default_value = "graded")]
    module: String,
}

#[derive(Subcommand)]
enum Cmd {
    /// Eigenvalues and tau-multiplicities of the basic or graph Dirac, as CSV.
    Spectrum {
        #[command(flatten)]
        triple: TripleArgs,
        /// Emit the basic one-edge Dirac instead of a graph assembly.
        #[arg(long)]
        basic: bool,
        /// List eigenvalues of D^2 instead of D.
        #[arg(long)]
        squared: bool,
        /// Also write a stem plot of the spectrum.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Truncated heat trace of the assembled Dirac, with tail bound.
    HeatTrace {
        /// Group spec.
        #[arg(long)]
        group: String,
        #[arg(long)]
        cutoff: i64,
        #[arg(long)]
        weights: String,
        /// Heat parameter u in tau(e^{-u D^2}).
        #[arg(long, default_value_t = 1.0)]
        u: f64,
        /// Comma-separated refinement level of each edge, e.g. 1,2,2.
        #[arg(long, default_value = "1")]
        edge_levels: String,
    },
    /// Theta-summability certificate: the Y bound and its verdict.
    CheckTheta {
        #[arg(long)]
        group: String,
        #[arg(long)]
        weights: String,
        #[arg(long)]
        p: f64,
        #[arg(long, default_value_t = 1.0)]
        u: f64,
        /// Truncation for the p-trace of |D|^{-p} off the kernel.
        #[arg(long, default_value_t = 200)]
        cutoff: i64,
        /// One edge per refinement level.
        #[arg(long)]
        chain: bool,
        /// Periodic d-lattice edge counts d*2^{dk} instead of the chain.
        #[arg(long)]
        lattice_d: Option<u32>,
    },
    /// One JLO cochain component on a tuple of holonomy elements.
    JloEval {
        #[command(flatten)]
        triple: TripleArgs,
        /// Cochain degree n, needing an (n+1)-tuple.
        #[arg(long)]
        degree: usize,
        /// Semicolon-separated elements; each is `id` or signed 1-based
        /// generator indices like `1,-2`.
        #[arg(long, allow_hyphen_values = true)]
        tuple: String,
        #[arg(long, default_value = "exact")]
        method: String,
        /// Grading handling: auto or require.
        #[arg(long, default_value = "auto")]
        grading: String,
    },
    /// Refine a graph file and emit the refined graph with generating sets.
    Refine {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, default_value_t = 2)]
        parts: usize,
        #[arg(long, default_value_t = 1)]
        levels: usize,
    },
    /// Weight-family perturbation hypothesis report: sup |da/dt|/|a|^{1+eps}.
    PerturbCheck {
        #[arg(long)]
        weights: String,
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = 0.0)]
        t: f64,
    },
    /// Residuals of the embedding of a coarse triple into a finer one.
    MorphismCheck {
        #[command(flatten)]
        triple: TripleArgs,
        /// Coarse level embedded into `--level`.
        #[arg(long)]
        level_small: usize,
        /// Sampled unit vectors.
        #[arg(long, default_value_t = 20)]
        vectors: usize,
    },
    /// Assemble a graph triple and summarize it as JSON.
    Assemble {
        #[command(flatten)]
        triple: TripleArgs,
    },
}

pub fn run() -> i32 {
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let hash = config_hash(&argv);
    match dispatch(&cli, &hash) {
        Ok(()) => 0,
        Err(e) => {
            let code = match &e {
                Error::Capability(_) => 3,
                Error::Divergence(_) | Error::Parity(_) => 4,
                _ => 2,
            };
            if code == 4 && !cli.strict {
                // flag, not failure: report it and succeed
                let report = json!({ "flag": e.to_string(), "config_hash": hash, "seed": cli.seed });
                if emit(&cli, &serde_json::to_string_pretty(&report).unwrap()).is_err() {
                    return 2;
                }
                return 0;
            }
            eprintln!("error: {e}");
            code
        }
    }
}

fn config_hash(argv: &[String]) -> String {
    let mut h = Sha256::new();
    for a in argv.iter().skip(1) {
        h.update(a.as_bytes());
        h.update([0x1f]);
    }
    hex::encode(&h.finalize()[..16])
}

fn emit(cli: &Cli, text: &str) -> Result<()> {
    match &cli.out {
        Some(p) => std::fs::write(p, text)?,
        None => println!("{text}"),
    }
    Ok(())
}

fn meta(cli: &Cli, hash: &str) -> Value {
    json!({ "config_hash": hash, "seed": cli.seed, "strict": cli.strict })
}

fn parse_rational(s: &str) -> Result<Rational> {
    s.parse::<Rational>()
        .map_err(|_| Error::Config(format!("bad rational `{s}`")))
}

fn parse_group(spec: &str) -> Result<RootDatum> {
    let inner = spec.trim().trim_start_matches('[').trim_end_matches(']');
    let mut factors = Vec::new();
    for part in inner.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let (name, norm) = match part.split_once(':') {
            Some((n, s)) => (n.trim(), Some(s.trim())),
            None => (part, None),
        };
        let f = match name {
            "circle" | "u1" => Factor::Circle {
                scale: norm.map(parse_rational).transpose()?.unwrap_or_else(Rational::one_fn),
            },
            "su2" => match norm {
                None | Some("killing") => Factor::su2_killing(),
                Some(s) => Factor::Su2 { scale: parse_rational(s)? },
            },
            other => {
                return Err(Error::Capability(format!("unsupported group factor `{other}`")))
            }
        };
        factors.push(f);
    }
    RootDatum::new(factors)
}

trait RationalOne {
    fn one_fn() -> Rational;
}
impl RationalOne for Rational {
    fn one_fn() -> Rational {
        use num_traits::One;
        Rational::one()
    }
}

/// `name(args)` with args either `k=v` pairs, bare numbers, or one quoted
/// expression followed by `k=v` pairs.
fn split_spec(spec: &str) -> Result<(String, Vec<String>)> {
    let spec = spec.trim();
    let open = spec.find('(');
    let Some(open) = open else {
        return Ok((spec.to_string(), vec![]));
    };
    if !spec.ends_with(')') {
        return Err(Error::Config(format!("unbalanced parentheses in `{spec}`")));
    }
    let name = spec[..open].trim().to_string();
    let body = &spec[open + 1..spec.len() - 1];
    let mut args = Vec::new();
    let mut depth = 0usize;
    let mut quoted = false;
    let mut cur = String::new();
    for c in body.chars() {
        match c {
            '"' => {
                quoted = !quoted;
                cur.push(c);
            }
            '(' | '[' if !quoted => {
                depth += 1;
                cur.push(c);
            }
            ')' | ']' if !quoted => {
                depth = depth
                    .checked_sub(1)
                    .ok_or_else(|| Error::Config(format!("unbalanced brackets in `{spec}`")))?;
                cur.push(c);
            }
            ',' if depth == 0 && !quoted => {
                args.push(cur.trim().to_string());
                cur.clear();
            }
            _ => cur.push(c),
        }
    }
    if !cur.trim().is_empty() {
        args.push(cur.trim().to_string());
    }
    Ok((name, args))
}

pub fn parse_weights(spec: &str) -> Result<WeightSequence> {
    let (name, args) = split_spec(spec)?;
    let kv = |a: &str| -> Result<(String, f64)> {
        let (k, v) = a
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("expected name=value, got `{a}`")))?;
        let v: f64 =
            v.trim().parse().map_err(|_| Error::Config(format!("bad number `{v}`")))?;
        Ok((k.trim().to_string(), v))
    };
    match name.as_str() {
        "lattice" => {
            let (k, v) = kv(args.first().map(String::as_str).unwrap_or(""))?;
            if k != "d" {
                return Err(Error::Config(format!("lattice() takes d=.., got `{k}`")));
            }
            Ok(WeightSequence::Lattice { d: v as u32 })
        }
        "geometric" => {
            let (k, v) = kv(args.first().map(String::as_str).unwrap_or(""))?;
            if k != "base" {
                return Err(Error::Config(format!("geometric() takes base=.., got `{k}`")));
            }
            Ok(WeightSequence::Geometric { base: v })
        }
        "explicit" => {
            let mut list = Vec::new();
            for a in &args {
                for piece in a.trim_start_matches('[').trim_end_matches(']').split(',') {
                    let piece = piece.trim();
                    if piece.is_empty() {
                        continue;
                    }
                    list.push(
                        piece
                            .parse()
                            .map_err(|_| Error::Config(format!("bad weight `{piece}`")))?,
                    );
                }
            }
            Ok(WeightSequence::Explicit(list))
        }
        "family" => {
            let expr = args
                .first()
                .ok_or_else(|| Error::Config("family() needs an expression".into()))?
                .trim_matches('"')
                .to_string();
            let mut params = BTreeMap::new();
            for a in &args[1..] {
                let (k, v) = kv(a)?;
                params.insert(k, v);
            }
            WeightSequence::family(&expr, params)
        }
        other => Err(Error::Config(format!("unknown weight spec `{other}`"))),
    }
}

fn parse_module(s: &str) -> Result<ModuleKind> {
    match s {
        "graded" => Ok(ModuleKind::Graded),
        "ungraded" => Ok(ModuleKind::Ungraded),
        other => Err(Error::Config(format!("module must be graded|ungraded, got `{other}`"))),
    }
}

fn parse_fword(s: &str) -> Result<FWord> {
    let s = s.trim();
    if s.is_empty() || s == "id" {
        return Ok(vec![]);
    }
    let mut w = Vec::new();
    for piece in s.split(',') {
        let n: i64 = piece
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("bad generator index `{piece}`")))?;
        if n == 0 {
            return Err(Error::Config("generator indices are 1-based and signed".into()));
        }
        w.push((n.unsigned_abs() as usize - 1, n < 0));
    }
    Ok(w)
}

fn load_system(args: &TripleArgs) -> Result<RefinementSystem> {
    let base = match &args.graph {
        Some(p) => parse_graph(&std::fs::read_to_string(p)?)?.0,
        None => crate::graph::DirectedGraph::new(
            vec!["v".into()],
            vec![crate::graph::Edge { id: "e".into(), src: "v".into(), dst: "v".into() }],
        )?,
    };
    let mut sys = RefinementSystem::new(base)?;
    for _ in 1..args.level {
        sys.subdivide(args.parts)?;
    }
    Ok(sys)
}

fn build_triple(args: &TripleArgs) -> Result<(RefinementSystem, GraphTriple)> {
    let sys = load_system(args)?;
    let datum = parse_group(&args.group)?;
    let seq = parse_weights(&args.weights)?;
    let weights: Vec<f64> =
        (1..=args.level).map(|k| seq.value(k)).collect::<Result<_>>()?;
    let kind = parse_module(&args.module)?;
    let t = assemble_triple(&sys, args.level, &datum, args.cutoff, &weights, kind)?;
    Ok((sys, t))
}

fn spectrum_csv(rows: &[(f64, String)]) -> String {
    let mut out = String::from("eigenvalue,multiplicity\n");
    for (ev, m) in rows {
        let _ = writeln!(out, "{ev},{m}");
    }
    out
}

fn spectrum_svg(evs: &[(f64, f64)]) -> String {
    let (w, h) = (640.0, 200.0);
    let lo = evs.iter().map(|e| e.0).fold(0.0f64, f64::min) - 0.5;
    let hi = evs.iter().map(|e| e.0).fold(0.0f64, f64::max) + 0.5;
    let mmax = evs.iter().map(|e| e.1).fold(1e-12f64, f64::max);
    let x = |v: f64| 20.0 + (v - lo) / (hi - lo) * (w - 40.0);
    let y = |m: f64| h - 20.0 - m / mmax * (h - 50.0);
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" \
         viewBox=\"0 0 {w} {h}\">\n<line x1=\"20\" y1=\"{0}\" x2=\"{1}\" y2=\"{0}\" \
         stroke=\"black\"/>\n",
        h - 20.0,
        w - 20.0
    );
    for &(ev, m) in evs {
        let _ = writeln!(
            s,
            "<line x1=\"{0:.2}\" y1=\"{1:.2}\" x2=\"{0:.2}\" y2=\"{2:.2}\" stroke=\"steelblue\" \
             stroke-width=\"2\"/>",
            x(ev),
            h - 20.0,
            y(m)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn edge_counts(chain: bool, lattice_d: Option<u32>) -> Result<EdgeCounts> {
    match (chain, lattice_d) {
        (true, None) => Ok(EdgeCounts::Chain),
        (false, Some(d)) => Ok(EdgeCounts::Lattice { d }),
        (false, None) => Ok(EdgeCounts::Chain),
        (true, Some(_)) => {
            Err(Error::Config("--chain and --lattice-d are mutually exclusive".into()))
        }
    }
}

fn dispatch(cli: &Cli, hash: &str) -> Result<()> {
    match &cli.cmd {
        Cmd::Spectrum { triple, basic, squared, svg } => {
            let sq = |ev: f64| if *squared { ev * ev } else { ev };
            let (rows, plot): (Vec<(f64, String)>, Vec<(f64, f64)>) = if *basic {
                let datum = parse_group(&triple.group)?;
                let q = datum.algebra_dim()?;
                let trunc = Truncation::new(&datum, triple.cutoff)?;
                let op = build_basic_dirac(&datum, &SpinorModule::irreducible(q), &trunc)?;
                let sp = spectrum(&op);
                let plot =
                    sp.iter().map(|(ev, m)| (sq(*ev), rational_to_f64(*m))).collect();
                (sp.into_iter().map(|(ev, m)| (sq(ev), m.to_string())).collect(), plot)
            } else {
                let (_, t) = build_triple(triple)?;
                let tau = t.tau_normalization();
                let evs = crate::dirac::hermitian_eigenvalues(&t.dirac);
                let mut grouped: Vec<(f64, f64)> = Vec::new();
                for ev in evs {
                    match grouped.last_mut() {
                        Some((v, m)) if (ev - *v).abs() < 1e-9 => *m += tau,
                        _ => grouped.push((ev, tau)),
                    }
                }
                (grouped.iter().map(|(ev, m)| (sq(*ev), format!("{m}"))).collect(), grouped)
            };
            if let Some(p) = svg {
                std::fs::write(p, spectrum_svg(&plot))?;
            }
            let mut body = spectrum_csv(&rows);
            let _ = write!(body, "# config_hash={hash} seed={}\n", cli.seed);
            emit(cli, &body)
        }
        Cmd::HeatTrace { group, cutoff, weights, u, edge_levels } => {
            let datum = parse_group(group)?;
            let seq = parse_weights(weights)?;
            let levels: Vec<usize> = edge_levels
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse()
                        .map_err(|_| Error::Config(format!("bad edge level `{s}`")))
                })
                .collect::<Result<_>>()?;
            let rep = heat_trace_full(&datum, *cutoff, &levels, &seq, *u, None)?;
            let out = json!({
                "command": "heat-trace",
                "meta": meta(cli, hash),
                "group": group, "cutoff": cutoff, "u": u,
                "edge_levels": levels,
                "value": rep.value, "tail": rep.tail,
            });
            emit(cli, &serde_json::to_string_pretty(&out).unwrap())
        }
        Cmd::CheckTheta { group, weights, p, u, cutoff, chain, lattice_d } => {
            let datum = parse_group(group)?;
            let q = datum.algebra_dim()?;
            let seq = parse_weights(weights)?;
            let counts = edge_counts(*chain, *lattice_d)?;
            let trunc = Truncation::new(&datum, *cutoff)?;
            let op = build_basic_dirac(&datum, &SpinorModule::irreducible(q), &trunc)?;
            let pt = p_trace_inverse(&datum, &op, &trunc, *p)?;
            let rep = y_bound(*p, *u, &seq, &counts, &pt)?;
            let out = json!({
                "command": "check-theta",
                "meta": meta(cli, hash),
                "group": group, "p": p, "u": u, "cutoff": cutoff,
                "edge_convention": match counts {
                    EdgeCounts::Chain => "chain".to_string(),
                    EdgeCounts::Lattice { d } => format!("lattice(d={d})"),
                    EdgeCounts::Explicit(_) => "explicit".to_string(),
                },
                "y": rep.y,
                "series": rep.series, "series_tail": rep.series_tail,
                "prefactor": rep.prefactor, "p_trace": rep.p_trace,
                "heat_bound": rep.heat_bound,
                "verdict": if rep.summable { "summable" } else { "not summable" },
            });
            emit(cli, &serde_json::to_string_pretty(&out).unwrap())
        }
        Cmd::JloEval { triple, degree, tuple, method, grading } => {
            let (_, t) = build_triple(triple)?;
            let method = match method.as_str() {
                "exact" => Method::Exact,
                "quadrature" => Method::Quadrature,
                other => {
                    return Err(Error::Config(format!(
                        "method must be exact|quadrature, got `{other}`"
                    )))
                }
            };
            let mode = match grading.as_str() {
                "auto" => GradingMode::Auto,
                "require" => GradingMode::Require,
                other => {
                    return Err(Error::Config(format!(
                        "grading must be auto|require, got `{other}`"
                    )))
                }
            };
            let elems: Vec<HolonomyElement> = tuple
                .split(';')
                .map(|s| Ok(HolonomyElement::single(&t.base, parse_fword(s)?)))
                .collect::<Result<_>>()?;
            if elems.len() != degree + 1 {
                return Err(Error::Config(format!(
                    "degree {degree} needs {} elements, got {}",
                    degree + 1,
                    elems.len()
                )));
            }
            let v: Complex64 = jlo_component(&t, *degree, &elems, method, mode)?;
            let out = json!({
                "command": "jlo-eval",
                "meta": meta(cli, hash),
                "degree": degree, "tuple": tuple,
                "value_re": v.re, "value_im": v.im,
            });
            emit(cli, &serde_json::to_string_pretty(&out).unwrap())
        }
        Cmd::Refine { graph, parts, levels } => {
            let base = parse_graph(&std::fs::read_to_string(graph)?)?.0;
            let mut sys = RefinementSystem::new(base)?;
            for _ in 0..*levels {
                sys.subdivide(*parts)?;
            }
            let gens: Vec<(usize, crate::graph::GroupoidWord)> = sys
                .gen_levels
                .last()
                .unwrap()
                .iter()
                .zip(sys.generating_sets.last().unwrap())
                .map(|(&l, w)| (l, w.clone()))
                .collect();
            emit(cli, &serialize_graph(sys.graphs.last().unwrap(), &gens))
        }
        Cmd::PerturbCheck { weights, eps, t } => {
            let seq = parse_weights(weights)?;
            let rep = perturbation_sup(&seq, *eps, *t)?;
            let out = json!({
                "command": "perturb-check",
                "meta": meta(cli, hash),
                "eps": eps, "t": t,
                "sup": rep.sup, "argmax_k": rep.argmax,
                "tail_checked": rep.tail_checked,
            });
            emit(cli, &serde_json::to_string_pretty(&out).unwrap())
        }
        Cmd::MorphismCheck { triple, level_small, vectors } => {
            let (sys, big) = build_triple(triple)?;
            if *level_small >= triple.level {
                return Err(Error::Config(
                    "--level-small must be below the assembled --level".into(),
                ));
            }
            let datum = parse_group(&triple.group)?;
            let seq = parse_weights(&triple.weights)?;
            let w_small: Vec<f64> =
                (1..=*level_small).map(|k| seq.value(k)).collect::<Result<_>>()?;
            let kind = parse_module(&triple.module)?;
            let small = assemble_triple(
                &sys,
                *level_small,
                &datum,
                triple.cutoff,
                &w_small,
                kind,
            )?;
            let gens: Vec<HolonomyElement> = (0..small.space.edges.len())
                .map(|i| HolonomyElement::single(&small.base, vec![(i, false)]))
                .collect();
            let rep = verify_morphism(&small, &big, &gens, cli.seed, *vectors)?;
            let out = json!({
                "command": "morphism-check",
                "meta": meta(cli, hash),
                "level_small": level_small, "level": triple.level,
                "vectors": rep.vectors,
                "dirac_residual": rep.dirac_residual,
                "holonomy_residual": rep.holonomy_residual,
                "grading_residual": rep.grading_residual,
            });
            emit(cli, &serde_json::to_string_pretty(&out).unwrap())
        }
        Cmd::Assemble { triple } => {
            let (_, t) = build_triple(triple)?;
            let evs = crate::dirac::hermitian_eigenvalues(&t.dirac);
            let head: Vec<f64> = evs.iter().take(16).copied().collect();
            let grading = match t.grading() {
                Ok(_) => "present".to_string(),
                Err(e) => format!("absent ({e})"),
            };
            let out = json!({
                "command": "assemble",
                "meta": meta(cli, hash),
                "group": triple.group, "cutoff": triple.cutoff,
                "level": triple.level, "weights": t.weights,
                "dim": t.space.dim(),
                "tau_normalization": t.tau_normalization(),
                "kernel_trace": t.kernel_trace(),
                "spectrum_head": head,
                "grading": grading,
            });
            emit(cli, &serde_json::to_string_pretty(&out).unwrap())
        }
    }
}
