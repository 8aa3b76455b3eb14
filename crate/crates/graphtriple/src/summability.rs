//! Weight sequences, the theta-summability Y-bound, exact truncated heat
//! traces of the full triple, and the weight-perturbation criteria.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::dirac::{
    build_basic_dirac, heat_trace_basic, hermitian_eigenvalues, PTrace, Truncation,
};
use crate::clifford::SpinorModule;
use crate::error::{Error, Result};
use crate::graph::RefinementSystem;
use crate::lie::{CMatrix, RootDatum};
use crate::triple::{assemble_triple, operator_norm, weighted_dirac_sum, ModuleKind};

/// Dual number (value, d/dt) for differentiating weight families.
#[derive(Debug, Clone, Copy)]
struct Dual {
    v: f64,
    d: f64,
}

impl Dual {
    fn con(v: f64) -> Self {
        Dual { v, d: 0.0 }
    }
    fn add(self, o: Dual) -> Dual {
        Dual { v: self.v + o.v, d: self.d + o.d }
    }
    fn sub(self, o: Dual) -> Dual {
        Dual { v: self.v - o.v, d: self.d - o.d }
    }
    fn mul(self, o: Dual) -> Dual {
        Dual { v: self.v * o.v, d: self.d * o.v + self.v * o.d }
    }
    fn div(self, o: Dual) -> Dual {
        Dual { v: self.v / o.v, d: (self.d * o.v - self.v * o.d) / (o.v * o.v) }
    }
    fn exp(self) -> Dual {
        let e = self.v.exp();
        Dual { v: e, d: e * self.d }
    }
    fn ln(self) -> Dual {
        Dual { v: self.v.ln(), d: self.d / self.v }
    }
    fn pow(self, o: Dual) -> Dual {
        if o.d == 0.0 {
            // constant exponent: powf stays finite at base zero
            let c = o.v;
            let d = if self.d == 0.0 || c == 0.0 {
                0.0
            } else {
                c * self.v.powf(c - 1.0) * self.d
            };
            return Dual { v: self.v.powf(c), d };
        }
        // a^b = exp(b ln a), requiring a > 0
        o.mul(self.ln()).exp()
    }
}

/// A closed-form expression in t and k: sums, products (juxtaposition
/// allowed), quotients, powers, exp, log, and named parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(String),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Exp(Box<Expr>),
    Log(Box<Expr>),
    Neg(Box<Expr>),
}

impl Expr {
    fn eval(&self, t: Dual, k: f64, params: &BTreeMap<String, f64>) -> Result<Dual> {
        Ok(match self {
            Expr::Num(v) => Dual::con(*v),
            Expr::Var(name) => match name.as_str() {
                "t" => t,
                "k" => Dual::con(k),
                _ => Dual::con(*params.get(name).ok_or_else(|| {
                    Error::Config(format!("unbound parameter `{name}` in weight family"))
                })?),
            },
            Expr::Add(a, b) => a.eval(t, k, params)?.add(b.eval(t, k, params)?),
            Expr::Sub(a, b) => a.eval(t, k, params)?.sub(b.eval(t, k, params)?),
            Expr::Mul(a, b) => a.eval(t, k, params)?.mul(b.eval(t, k, params)?),
            Expr::Div(a, b) => a.eval(t, k, params)?.div(b.eval(t, k, params)?),
            Expr::Pow(a, b) => a.eval(t, k, params)?.pow(b.eval(t, k, params)?),
            Expr::Exp(a) => a.eval(t, k, params)?.exp(),
            Expr::Log(a) => a.eval(t, k, params)?.ln(),
            Expr::Neg(a) => Dual::con(0.0).sub(a.eval(t, k, params)?),
        })
    }
}

struct Parser<'a> {
    chars: Vec<char>,
    pos: usize,
    src: &'a str,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Self {
        Parser { chars: src.chars().collect(), pos: 0, src }
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(|c| c.is_whitespace()) {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek();
        if c.is_some() {
            self.pos += 1;
        }
        c
    }

    fn err(&self, msg: &str) -> Error {
        Error::Config(format!("weight expression `{}` at {}: {}", self.src, self.pos, msg))
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            self.skip_ws();
            match self.peek() {
                Some('+') => {
                    self.bump();
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Some('-') => {
                    self.bump();
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.factor()?;
        loop {
            self.skip_ws();
            match self.peek() {
                Some('*') => {
                    self.bump();
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.factor()?));
                }
                Some('/') => {
                    self.bump();
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.factor()?));
                }
                // juxtaposition: (d+t)k, 2k, k exp(t)
                Some(c) if c == '(' || c.is_ascii_alphabetic() || c.is_ascii_digit() => {
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.factor()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        self.skip_ws();
        if self.peek() == Some('^') {
            self.bump();
            let exp = self.factor()?; // right associative
            return Ok(Expr::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        self.skip_ws();
        match self.peek() {
            Some('(') => {
                self.bump();
                let e = self.expr()?;
                self.skip_ws();
                if self.bump() != Some(')') {
                    return Err(self.err("expected `)`"));
                }
                Ok(e)
            }
            Some('-') => {
                self.bump();
                Ok(Expr::Neg(Box::new(self.atom()?)))
            }
            Some(c) if c.is_ascii_digit() || c == '.' => {
                let start = self.pos;
                while self.peek().is_some_and(|c| c.is_ascii_digit() || c == '.') {
                    self.pos += 1;
                }
                let s: String = self.chars[start..self.pos].iter().collect();
                s.parse::<f64>()
                    .map(Expr::Num)
                    .map_err(|_| self.err("bad number"))
            }
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self.peek().is_some_and(|c| c.is_ascii_alphanumeric() || c == '_') {
                    self.pos += 1;
                }
                let name: String = self.chars[start..self.pos].iter().collect();
                self.skip_ws();
                if (name == "exp" || name == "log") && self.peek() == Some('(') {
                    self.bump();
                    let arg = self.expr()?;
                    self.skip_ws();
                    if self.bump() != Some(')') {
                        return Err(self.err("expected `)`"));
                    }
                    return Ok(if name == "exp" {
                        Expr::Exp(Box::new(arg))
                    } else {
                        Expr::Log(Box::new(arg))
                    });
                }
                Ok(Expr::Var(name))
            }
            _ => Err(self.err("expected a number, name, or `(`")),
        }
    }
}

pub fn parse_expr(src: &str) -> Result<Expr> {
    let mut p = Parser::new(src);
    let e = p.expr()?;
    p.skip_ws();
    if p.pos != p.chars.len() {
        return Err(p.err("trailing input"));
    }
    Ok(e)
}

/// A diverging weight sequence a_k, k >= 1, possibly a differentiable
/// t-family.
#[derive(Debug, Clone)]
pub enum WeightSequence {
    /// a_k = 2^{d k}.
    Lattice { d: u32 },
    /// a_k = base^k.
    Geometric { base: f64 },
    /// Listed values a_1, a_2, ...
    Explicit(Vec<f64>),
    /// a_k(t) given by a closed-form expression in t, k, and parameters.
    Family { expr: Expr, params: BTreeMap<String, f64> },
}

impl WeightSequence {
    pub fn family(src: &str, params: BTreeMap<String, f64>) -> Result<Self> {
        Ok(WeightSequence::Family { expr: parse_expr(src)?, params })
    }

    /// a_k(t); k is 1-based.
    pub fn value_at(&self, k: usize, t: f64) -> Result<f64> {
        let kf = k as f64;
        match self {
            WeightSequence::Lattice { d } => Ok(2f64.powf(*d as f64 * kf)),
            WeightSequence::Geometric { base } => Ok(base.powf(kf)),
            WeightSequence::Explicit(list) => list
                .get(k - 1)
                .copied()
                .ok_or_else(|| Error::Config(format!("explicit weights stop before k = {k}"))),
            WeightSequence::Family { expr, params } => {
                Ok(expr.eval(Dual { v: t, d: 1.0 }, kf, params)?.v)
            }
        }
    }

    pub fn value(&self, k: usize) -> Result<f64> {
        self.value_at(k, 0.0)
    }

    /// da_k/dt; zero for the non-family kinds.
    pub fn derivative_at(&self, k: usize, t: f64) -> Result<f64> {
        match self {
            WeightSequence::Family { expr, params } => {
                Ok(expr.eval(Dual { v: t, d: 1.0 }, k as f64, params)?.d)
            }
            _ => Ok(0.0),
        }
    }

    /// Rescale a -> c*a (explicit lists only rescale their entries; other
    /// kinds are wrapped as an explicit prefix).
    pub fn scaled(&self, c: f64, kmax: usize) -> Result<WeightSequence> {
        let mut list = Vec::with_capacity(kmax);
        for k in 1..=kmax {
            list.push(c * self.value(k)?);
        }
        Ok(WeightSequence::Explicit(list))
    }

    /// Checks a_k != 0 up to kmax and that a_k^2 is nondecreasing.
    pub fn validate(&self, kmax: usize, t: f64) -> Result<()> {
        let mut prev = 0.0f64;
        for k in 1..=kmax {
            let a = self.value_at(k, t)?;
            if a == 0.0 {
                return Err(Error::Rejected(format!("weight a_{k} vanishes")));
            }
            if a * a + 1e-12 < prev {
                return Err(Error::Rejected(format!("a_k^2 decreases at k = {k}")));
            }
            prev = a * a;
        }
        Ok(())
    }
}

/// How many edges each refinement level contributes to the series.
#[derive(Debug, Clone)]
pub enum EdgeCounts {
    /// One edge per level (the "adding one edge at a time" chain).
    Chain,
    /// A periodic d-lattice: d * 2^{dk} edges at level k.
    Lattice { d: u32 },
    /// Listed counts per level; an empty list means no edges.
    Explicit(Vec<f64>),
}

impl EdgeCounts {
    fn count(&self, k: usize) -> f64 {
        match self {
            EdgeCounts::Chain => 1.0,
            EdgeCounts::Lattice { d } => *d as f64 * 2f64.powf(*d as f64 * k as f64),
            EdgeCounts::Explicit(list) => list.get(k - 1).copied().unwrap_or(0.0),
        }
    }

    fn horizon(&self) -> Option<usize> {
        match self {
            EdgeCounts::Explicit(list) => Some(list.len()),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct YReport {
    pub y: f64,
    /// sum over edges of a_{level}^{-p}, with a geometric tail estimate.
    pub series: f64,
    pub series_tail: f64,
    /// (p / 2eu)^{p/2}.
    pub prefactor: f64,
    pub p_trace: f64,
    pub summable: bool,
    /// 1/(1-Y) when Y < 1.
    pub heat_bound: Option<f64>,
}

const SERIES_TERMS: usize = 400;

/// Sum_{k>=1} counts(k) * |a_k|^{-p} with a ratio-test tail; divergence
/// error when the terms stop decaying.
fn weight_series(seq: &WeightSequence, counts: &EdgeCounts, p: f64) -> Result<(f64, f64)> {
    let kmax = counts.horizon().unwrap_or(match seq {
        WeightSequence::Explicit(list) => list.len(),
        _ => SERIES_TERMS,
    });
    let mut sum = 0.0;
    let mut prev_term = f64::NAN;
    let mut last_ratio = 0.0f64;
    for k in 1..=kmax {
        let c = counts.count(k);
        if c == 0.0 {
            continue;
        }
        let a = seq.value(k)?;
        if a == 0.0 {
            return Err(Error::Rejected(format!("weight a_{k} vanishes")));
        }
        let term = c * a.abs().powf(-p);
        if prev_term.is_finite() && prev_term > 0.0 {
            last_ratio = term / prev_term;
        }
        sum += term;
        prev_term = term;
        if term < 1e-300 {
            return Ok((sum, 0.0));
        }
    }
    if counts.horizon().is_some() || matches!(seq, WeightSequence::Explicit(_)) {
        return Ok((sum, 0.0));
    }
    if !(last_ratio < 1.0 - 1e-9) {
        return Err(Error::Divergence(format!(
            "sum of a_k^-p does not converge (tail ratio {last_ratio:.6})"
        )));
    }
    let tail = prev_term * last_ratio / (1.0 - last_ratio);
    Ok((sum, tail))
}

/// Y = (sum_edges a^-p) (p/2eu)^{p/2} tau_1(|D off kernel|^-p); Y < 1
/// certifies tau(e^{-u D^2}) <= 1/(1-Y). Rescaling a -> c*a multiplies Y
/// by c^-p.
pub fn y_bound(
    p: f64,
    u: f64,
    seq: &WeightSequence,
    counts: &EdgeCounts,
    p_trace: &PTrace,
) -> Result<YReport> {
    if p <= 0.0 || u <= 0.0 {
        return Err(Error::Rejected("y_bound needs p > 0 and u > 0".into()));
    }
    let (series, series_tail) = weight_series(seq, counts, p)?;
    let prefactor = (p / (2.0 * std::f64::consts::E * u)).powf(p / 2.0);
    let y = (series + series_tail) * prefactor * (p_trace.value + p_trace.tail_estimate);
    let summable = y < 1.0;
    Ok(YReport {
        y,
        series,
        series_tail,
        prefactor,
        p_trace: p_trace.value,
        summable,
        heat_bound: summable.then(|| 1.0 / (1.0 - y)),
    })
}

#[derive(Debug, Clone)]
pub struct HeatReport {
    pub value: f64,
    pub tail: f64,
    /// 1/(1-Y) when a summable Y-report was supplied.
    pub bound: Option<f64>,
}

/// Exact truncated heat trace of the full Dirac: by tensor independence of
/// the edge coordinates it is the product over edges of the basic heat
/// trace at u * a_{level}^2.
pub fn heat_trace_full(
    datum: &RootDatum,
    cutoff: i64,
    gen_levels: &[usize],
    seq: &WeightSequence,
    u: f64,
    y: Option<&YReport>,
) -> Result<HeatReport> {
    if u <= 0.0 {
        return Err(Error::Rejected("heat trace needs u > 0".into()));
    }
    let trunc = Truncation::new(datum, cutoff)?;
    let module = SpinorModule::irreducible(datum.algebra_dim()?);
    let op = build_basic_dirac(datum, &module, &trunc)?;
    let mut value = 1.0;
    let mut upper = 1.0;
    for &lvl in gen_levels {
        let a = seq.value(lvl)?;
        let (v, tail) = heat_trace_basic(datum, &op, &trunc, u, a)?;
        value *= v;
        upper *= v + tail;
    }
    Ok(HeatReport { value, tail: upper - value, bound: y.and_then(|r| r.heat_bound) })
}

#[derive(Debug, Clone)]
pub struct PerturbReport {
    pub sup: f64,
    /// 1-based index attaining the sup.
    pub argmax: usize,
    /// Whether the computed ratios were eventually decreasing, so the sup
    /// over all k is certified; otherwise the sup is only a lower bound.
    pub tail_checked: bool,
}

/// sup_k |da_k/dt| / |a_k|^{1+eps}; divergence error when the ratios do
/// not decay.
pub fn perturbation_sup(family: &WeightSequence, eps: f64, t: f64) -> Result<PerturbReport> {
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::Rejected(format!("eps must lie in [0,1), got {eps}")));
    }
    let kmax = match family {
        WeightSequence::Explicit(list) => list.len().max(1),
        _ => SERIES_TERMS,
    };
    let mut sup = 0.0f64;
    let mut argmax = 1usize;
    let mut ratios = Vec::with_capacity(kmax);
    for k in 1..=kmax {
        let a = family.value_at(k, t)?;
        if a == 0.0 {
            return Err(Error::Rejected(format!("weight a_{k} vanishes")));
        }
        let r = family.derivative_at(k, t)?.abs() / a.abs().powf(1.0 + eps);
        if r > sup {
            sup = r;
            argmax = k;
        }
        ratios.push(r);
    }
    let n = ratios.len();
    let tail_checked = n < 2
        || (ratios[n - 1] <= ratios[n - 2] && ratios[n - 1] <= 1e-9 * sup.max(1e-300))
        || ratios[n - 1] == 0.0;
    if n >= 2 && ratios[n - 1] > ratios[n - 2] * (1.0 - 1e-12) && ratios[n - 1] > 1e-300 {
        return Err(Error::Divergence(format!(
            "perturbation ratios still growing at k = {n} (last {:.6})",
            ratios[n - 1]
        )));
    }
    Ok(PerturbReport { sup, argmax, tail_checked })
}

#[derive(Debug, Clone)]
pub struct OperatorPerturbReport {
    /// ||dD/dt (1 + |D|^{1+eps})^{-1}|| on the truncation.
    pub norm: f64,
    /// c^eps * m.
    pub bound: f64,
    /// 1/c = smallest nonzero eigenvalue of the basic D^2.
    pub c: f64,
    pub m: f64,
    pub within: bool,
}

/// Assembles D(t) and dD/dt = sum adot_k D_k at the same truncation and
/// checks ||dD/dt (1 + |D|^{1+eps})^{-1}|| <= c^eps * m.
#[allow(clippy::too_many_arguments)]
pub fn operator_perturbation_bound(
    sys: &RefinementSystem,
    j: usize,
    datum: &RootDatum,
    cutoff: i64,
    family: &WeightSequence,
    t: f64,
    eps: f64,
    kind: ModuleKind,
) -> Result<OperatorPerturbReport> {
    let mut weights = Vec::with_capacity(j);
    let mut dots = Vec::with_capacity(j);
    for k in 1..=j {
        weights.push(family.value_at(k, t)?);
        dots.push(family.derivative_at(k, t)?);
    }
    let triple = assemble_triple(sys, j, datum, cutoff, &weights, kind)?;
    let ddot = weighted_dirac_sum(&triple.space, &triple.gen_levels, &dots, &triple.gammas)?;
    let es = triple.dirac.clone().symmetric_eigen();
    let resolvent: CMatrix = {
        let diag = DMatrix::from_diagonal(
            &es.eigenvalues
                .map(|l| Complex64::new(1.0 / (1.0 + l.abs().powf(1.0 + eps)), 0.0))
                .column(0)
                .into_owned(),
        );
        &es.eigenvectors * diag * es.eigenvectors.adjoint()
    };
    let norm = operator_norm(&(ddot * resolvent));

    let trunc = Truncation::new(datum, cutoff)?;
    let module = SpinorModule::irreducible(datum.algebra_dim()?);
    let basic = build_basic_dirac(datum, &module, &trunc)?;
    let gap = basic
        .blocks
        .iter()
        .flat_map(|b| hermitian_eigenvalues(&b.matrix))
        .map(|e| e * e)
        .filter(|x| *x > 1e-9)
        .fold(f64::INFINITY, f64::min);
    let c = 1.0 / gap;
    let m = match perturbation_sup(family, eps, t) {
        Ok(r) => r.sup,
        Err(Error::Divergence(_)) => f64::INFINITY,
        Err(e) => return Err(e),
    };
    let bound = c.powf(eps) * m;
    Ok(OperatorPerturbReport { norm, bound, c, m, within: norm <= bound + 1e-12 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dirac::p_trace_inverse;
    use crate::graph::{DirectedGraph, Edge};

    fn chain_system(extra_levels: usize) -> RefinementSystem {
        let g = DirectedGraph::new(
            vec!["v".into()],
            vec![Edge { id: "e".into(), src: "v".into(), dst: "v".into() }],
        )
        .unwrap();
        let mut sys = RefinementSystem::new(g).unwrap();
        for _ in 0..extra_levels {
            sys.subdivide(2).unwrap();
        }
        sys
    }

    fn circle_p_trace(p: f64, cutoff: i64) -> PTrace {
        let datum = RootDatum::circle();
        let trunc = Truncation::new(&datum, cutoff).unwrap();
        let op = build_basic_dirac(&datum, &SpinorModule::irreducible(1), &trunc).unwrap();
        p_trace_inverse(&datum, &op, &trunc, p).unwrap()
    }

    #[test]
    fn family_expression_matches_closed_form() {
        let mut params = BTreeMap::new();
        params.insert("d".into(), 3.0);
        let seq = WeightSequence::family("2^((d+t)k)", params).unwrap();
        for k in 1..=6 {
            let v = seq.value_at(k, 0.25).unwrap();
            let want = 2f64.powf(3.25 * k as f64);
            assert!((v - want).abs() < 1e-9 * want);
            let dv = seq.derivative_at(k, 0.25).unwrap();
            let want_d = k as f64 * 2f64.ln() * want;
            assert!((dv - want_d).abs() < 1e-9 * want_d);
        }
    }

    #[test]
    fn expression_grammar_cases() {
        let e = parse_expr("k exp(t) / (1 + t^2) - log(k)").unwrap();
        let mut p = Parser::new("2^");
        assert!(p.expr().is_err() || p.pos != p.chars.len());
        let params = BTreeMap::new();
        let d = e.eval(Dual { v: 0.0, d: 1.0 }, 2.0, &params).unwrap();
        // k e^t/(1+t^2) - ln k at t=0, k=2: value 2 - ln 2, d/dt = 2.
        assert!((d.v - (2.0 - 2f64.ln())).abs() < 1e-12);
        assert!((d.d - 2.0).abs() < 1e-12);
    }

    #[test]
    fn empty_edge_list_gives_y_zero() {
        let seq = WeightSequence::Geometric { base: 2.0 };
        let r = y_bound(2.0, 1.0, &seq, &EdgeCounts::Explicit(vec![]), &circle_p_trace(2.0, 60))
            .unwrap();
        assert_eq!(r.y, 0.0);
        assert!(r.summable);
    }

    #[test]
    fn circle_chain_y_closed_form() {
        // a_j = 2^j, p = 2, u = 1: (1/3) (1/e) (pi^2/3).
        let seq = WeightSequence::Geometric { base: 2.0 };
        let r = y_bound(2.0, 1.0, &seq, &EdgeCounts::Chain, &circle_p_trace(2.0, 400)).unwrap();
        let want = (1.0 / 3.0) * (1.0 / std::f64::consts::E)
            * (std::f64::consts::PI.powi(2) / 3.0);
        assert!((r.y - want).abs() < 1e-6, "y {} want {}", r.y, want);
        assert!(r.summable && r.heat_bound.is_some());
    }

    #[test]
    fn y_homogeneity_exact() {
        let pt = circle_p_trace(2.0, 60);
        let seq = WeightSequence::Geometric { base: 2.0 };
        let scaled = seq.scaled(2.0, SERIES_TERMS).unwrap();
        let y1 = y_bound(2.0, 1.0, &seq, &EdgeCounts::Chain, &pt).unwrap().y;
        let y2 = y_bound(2.0, 1.0, &scaled, &EdgeCounts::Chain, &pt).unwrap().y;
        // c = 2, p = 2: exactly Y/4 (identical floats after the halving).
        assert!((y2 - y1 / 4.0).abs() <= 1e-15 * y1);
    }

    #[test]
    fn divergent_series_flagged() {
        let seq = WeightSequence::Geometric { base: 1.0 };
        let err = y_bound(2.0, 1.0, &seq, &EdgeCounts::Chain, &circle_p_trace(2.0, 60));
        assert!(matches!(err, Err(Error::Divergence(_))));
    }

    #[test]
    fn lattice_counts_converge_above_one() {
        // d * 2^{dk} edges against 2^{-dpk}: geometric with ratio
        // 2^{d(1-p)}, finite iff p > 1.
        let seq = WeightSequence::Lattice { d: 2 };
        let pt = circle_p_trace(2.5, 60);
        let ok = weight_series(&seq, &EdgeCounts::Lattice { d: 2 }, 1.25).unwrap();
        let want = {
            let r = 2f64.powf(2.0 * (1.0 - 1.25));
            2.0 * r / (1.0 - r)
        };
        assert!((ok.0 + ok.1 - want).abs() < 1e-9);
        assert!(weight_series(&seq, &EdgeCounts::Lattice { d: 2 }, 1.0).is_err());
        let _ = pt;
    }

    #[test]
    fn single_edge_heat_matches_basic() {
        let datum = RootDatum::circle();
        let trunc = Truncation::new(&datum, 10).unwrap();
        let op = build_basic_dirac(&datum, &SpinorModule::irreducible(1), &trunc).unwrap();
        let (basic, _) = heat_trace_basic(&datum, &op, &trunc, 1.0, 1.0).unwrap();
        let seq = WeightSequence::Explicit(vec![1.0]);
        let full = heat_trace_full(&datum, 10, &[1], &seq, 1.0, None).unwrap();
        assert!((full.value - basic).abs() < 1e-15);
    }

    #[test]
    fn two_circle_edges_product_value() {
        // weights (1, 2), u = 1: (sum e^{-n^2})(sum e^{-4m^2}).
        let seq = WeightSequence::Explicit(vec![1.0, 2.0]);
        let full = heat_trace_full(&RootDatum::circle(), 10, &[1, 2], &seq, 1.0, None).unwrap();
        let theta = |t: f64| (-10..=10i64).map(|n| (-t * (n * n) as f64).exp()).sum::<f64>();
        let want = theta(1.0) * theta(4.0);
        assert!((full.value - want).abs() < 1e-9, "got {} want {}", full.value, want);
        assert!((full.value - 1.8375716).abs() < 1e-5);
    }

    #[test]
    fn heat_trace_below_y_bound_and_monotone() {
        let seq = WeightSequence::Geometric { base: 2.0 };
        let y = y_bound(2.0, 1.0, &seq, &EdgeCounts::Chain, &circle_p_trace(2.0, 400)).unwrap();
        let levels: Vec<usize> = (1..=6).collect();
        let r = heat_trace_full(&RootDatum::circle(), 30, &levels, &seq, 1.0, Some(&y)).unwrap();
        assert!(r.value + r.tail <= r.bound.unwrap(), "{} vs {:?}", r.value, r.bound);
        let r2 = heat_trace_full(&RootDatum::circle(), 30, &levels, &seq, 1.5, None).unwrap();
        assert!(r2.value < r.value);
    }

    #[test]
    fn constant_family_sup_zero() {
        let seq = WeightSequence::Explicit(vec![3.0, 3.0, 3.0]);
        let r = perturbation_sup(&seq, 0.5, 0.0).unwrap();
        assert_eq!(r.sup, 0.0);
    }

    #[test]
    fn lattice_family_eps_zero_diverges() {
        let mut params = BTreeMap::new();
        params.insert("d".into(), 1.0);
        let seq = WeightSequence::family("2^((d+t)k)", params).unwrap();
        assert!(matches!(
            perturbation_sup(&seq, 0.0, 0.0),
            Err(Error::Divergence(_))
        ));
    }

    #[test]
    fn lattice_family_sup_attained_at_three() {
        let mut params = BTreeMap::new();
        params.insert("d".into(), 1.0);
        let seq = WeightSequence::family("2^((d+t)k)", params).unwrap();
        let r = perturbation_sup(&seq, 0.5, 0.0).unwrap();
        let want = 3.0 * 2f64.ln() / 2f64.powf(1.5);
        assert!((r.sup - want).abs() < 1e-9, "sup {} want {}", r.sup, want);
        assert_eq!(r.argmax, 3);
        assert!(r.tail_checked);
    }

    #[test]
    fn lattice_family_negative_exponent_diverges() {
        let mut params = BTreeMap::new();
        params.insert("d".into(), 0.0);
        let seq = WeightSequence::family("2^((d+t)k)", params).unwrap();
        assert!(perturbation_sup(&seq, 0.5, 0.0).is_err());
    }

    #[test]
    fn operator_bound_constant_weights() {
        let sys = chain_system(1);
        let seq = WeightSequence::Explicit(vec![1.0, 1.0]);
        let r = operator_perturbation_bound(
            &sys,
            2,
            &RootDatum::circle(),
            2,
            &seq,
            0.0,
            0.5,
            ModuleKind::Graded,
        )
        .unwrap();
        assert_eq!(r.norm, 0.0);
        assert!(r.within);
    }

    #[test]
    fn operator_bound_circle_family() {
        let sys = chain_system(1);
        let mut params = BTreeMap::new();
        params.insert("d".into(), 1.0);
        let seq = WeightSequence::family("2^((d+t)k)", params).unwrap();
        let r = operator_perturbation_bound(
            &sys,
            2,
            &RootDatum::circle(),
            3,
            &seq,
            0.0,
            0.5,
            ModuleKind::Graded,
        )
        .unwrap();
        // circle basic gap 1 so c = 1 and the bound is m itself.
        assert!((r.c - 1.0).abs() < 1e-9);
        assert!(r.within, "norm {} bound {}", r.norm, r.bound);
        assert!(r.norm > 0.0);
    }

    #[test]
    fn operator_bound_su2_uses_c_eight() {
        let sys = chain_system(0);
        let mut params = BTreeMap::new();
        params.insert("d".into(), 1.0);
        let seq = WeightSequence::family("2^((d+t)k)", params).unwrap();
        let r = operator_perturbation_bound(
            &sys,
            1,
            &RootDatum::su2_killing(),
            2,
            &seq,
            0.0,
            0.5,
            ModuleKind::Graded,
        )
        .unwrap();
        assert!((r.c - 8.0).abs() < 1e-9, "c {}", r.c);
        assert!(r.within, "norm {} bound {}", r.norm, r.bound);
    }
}
