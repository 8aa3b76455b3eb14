//! JLO cocycle components, the Hochschild b and cyclic B operators,
//! cocycle-identity residuals, entire-growth reports, and the immersion
//! decomposition check.

use std::collections::HashMap;
use std::rc::Rc;

use num_complex::Complex64;

use crate::dirac::hermitian_eigenvalues;
use crate::error::{Error, Result};
use crate::graph::RefinementSystem;
use crate::holonomy::HolonomyElement;
use crate::lie::{CMatrix, RootDatum};
use crate::triple::{
    assemble_triple, edge_dirac, operator_norm, GraphTriple, ModuleKind,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Closed-form simplex integrals by divided differences of exp.
    Exact,
    /// Nested Gauss-Legendre over the simplex.
    Quadrature,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradingMode {
    /// Use the grading when the triple has one; fall back to chi = 1 on
    /// ungraded triples (so even components of odd triples are defined).
    Auto,
    /// Insist on a grading; parity error when the triple has none.
    Require,
}

/// chi to insert in a degree-n component, or None for chi = 1.
fn chi_for(triple: &GraphTriple, n: usize, mode: GradingMode) -> Result<Option<CMatrix>> {
    match mode {
        GradingMode::Require => {
            let chi = triple.grading()?;
            Ok(if n % 2 == 0 { Some(chi) } else { None })
        }
        GradingMode::Auto => {
            if n % 2 == 1 {
                return Ok(None);
            }
            match triple.grading() {
                Ok(chi) => Ok(Some(chi)),
                Err(Error::Parity(_)) => Ok(None),
                Err(e) => Err(e),
            }
        }
    }
}

const FACT_MAX: usize = 170;

fn factorials() -> Vec<f64> {
    let mut f = vec![1.0f64; FACT_MAX + 1];
    for i in 1..=FACT_MAX {
        f[i] = f[i - 1] * i as f64;
    }
    f
}

/// Divided differences of x -> e^{-x}, memoized over sorted node lists.
struct DdExp {
    cache: HashMap<Vec<u64>, f64>,
    fact: Vec<f64>,
}

impl DdExp {
    fn new() -> Self {
        DdExp { cache: HashMap::new(), fact: factorials() }
    }

    fn eval(&mut self, nodes: &[f64]) -> f64 {
        let mut s = nodes.to_vec();
        s.sort_by(|a, b| a.partial_cmp(b).unwrap());
        self.eval_sorted(&s)
    }

    /// Simplex integral of prod_k e^{-s_k mu_k} over s_0+...+s_n = 1: the
    /// n-th divided difference of the n-th antiderivative of e^{-x}, hence
    /// the (-1)^n twist relative to `eval`.
    fn simplex(&mut self, nodes: &[f64]) -> f64 {
        let v = self.eval(nodes);
        if nodes.len() % 2 == 0 { -v } else { v }
    }

    fn eval_sorted(&mut self, nodes: &[f64]) -> f64 {
        let key: Vec<u64> = nodes.iter().map(|x| x.to_bits()).collect();
        if let Some(&v) = self.cache.get(&key) {
            return v;
        }
        let n = nodes.len() - 1;
        let spread = nodes[n] - nodes[0];
        let v = if spread <= 1.0 {
            self.series(nodes)
        } else {
            // sorted recursion: the denominator is the spread, >= 1
            let hi = self.eval_sorted(&nodes[1..]);
            let lo = self.eval_sorted(&nodes[..n]);
            (hi - lo) / spread
        };
        self.cache.insert(key, v);
        v
    }

    /// Around the mean m: dd = e^{-m} sum_q (-1)^{n+q} h_q(delta)/(n+q)!
    /// where h_q is the complete homogeneous symmetric polynomial.
    fn series(&self, nodes: &[f64]) -> f64 {
        let n = nodes.len() - 1;
        let m = nodes.iter().sum::<f64>() / nodes.len() as f64;
        let q_max = (FACT_MAX - n).min(80);
        let mut h = vec![0.0f64; q_max + 1];
        h[0] = 1.0;
        for x in nodes {
            let d = x - m;
            for q in 1..=q_max {
                h[q] += d * h[q - 1];
            }
        }
        let mut sum = 0.0;
        let mut prev_tiny = false;
        for (q, hq) in h.iter().enumerate() {
            let term = hq / self.fact[n + q];
            let term = if (n + q) % 2 == 0 { term } else { -term };
            sum += term;
            // h_q can vanish identically for symmetric nodes, so only stop
            // after two consecutive negligible terms
            let tiny = term.abs() < 1e-20 * sum.abs().max(1e-300);
            if q > 4 && tiny && prev_tiny {
                break;
            }
            prev_tiny = tiny;
        }
        (-m).exp() * sum
    }
}

fn scale_cols(m: &mut CMatrix, w: &[f64]) {
    for (j, wj) in w.iter().enumerate() {
        for v in m.column_mut(j).iter_mut() {
            *v *= *wj;
        }
    }
}

/// The D-eigenbasis data shared by both evaluation methods: mats[0] is
/// chi * pi(a_0) and mats[i] = [D, pi(a_i)], all conjugated into the
/// eigenbasis; mu are the D^2 eigenvalues in basis order.
struct Prepared {
    mats: Vec<CMatrix>,
    mu: Vec<f64>,
    /// (eigenvalue, index list) groups of mu, quantized at 1e-9.
    groups: Vec<(f64, Vec<usize>)>,
    tau: f64,
}

fn prepare(
    triple: &GraphTriple,
    chi: Option<&CMatrix>,
    tuple: &[HolonomyElement],
) -> Result<Prepared> {
    let es = triple.dirac.clone().symmetric_eigen();
    let u = &es.eigenvectors;
    let uh = u.adjoint();
    let mu: Vec<f64> = es.eigenvalues.iter().map(|l| l * l).collect();
    let mut order: Vec<usize> = (0..mu.len()).collect();
    order.sort_by(|&a, &b| mu[a].partial_cmp(&mu[b]).unwrap());
    let mut groups: Vec<(f64, Vec<usize>)> = Vec::new();
    for idx in order {
        match groups.last_mut() {
            Some((v, list)) if (mu[idx] - *v).abs() <= 1e-9 => list.push(idx),
            _ => groups.push((mu[idx], vec![idx])),
        }
    }
    let mut mats = Vec::with_capacity(tuple.len());
    for (i, a) in tuple.iter().enumerate() {
        let op = triple.multiplication(a)?;
        let m = if i == 0 {
            match chi {
                Some(chi) => chi * &op.matrix,
                None => op.matrix,
            }
        } else {
            &triple.dirac * &op.matrix - &op.matrix * &triple.dirac
        };
        mats.push(&uh * m * u);
    }
    Ok(Prepared { mats, mu, groups, tau: triple.tau_normalization() })
}

fn block(m: &CMatrix, rows: &[usize], cols: &[usize]) -> CMatrix {
    CMatrix::from_fn(rows.len(), cols.len(), |r, c| m[(rows[r], cols[c])])
}

/// Depth-first sum over eigenvalue-group chains; `partial` is the block
/// product up to the current group.
#[allow(clippy::too_many_arguments)]
fn walk(
    blocks: &[Vec<Vec<CMatrix>>],
    groups: &[(f64, Vec<usize>)],
    level: usize,
    n: usize,
    g0: usize,
    g_cur: usize,
    partial: &CMatrix,
    nodes: &mut Vec<f64>,
    dd: &mut DdExp,
    acc: &mut Complex64,
) {
    if level > n {
        // nodes now hold (mu_{g1}, ..., mu_{gn}, mu_{g0})
        *acc += partial.diagonal().sum() * dd.simplex(nodes);
        return;
    }
    for g_next in 0..groups.len() {
        if level == n && g_next != g0 {
            continue;
        }
        let b = &blocks[level][g_cur][g_next];
        if b.norm() < 1e-16 {
            continue;
        }
        let next = partial * b;
        if next.norm() < 1e-16 {
            continue;
        }
        nodes.push(groups[g_next].0);
        walk(blocks, groups, level + 1, n, g0, g_next, &next, nodes, dd, acc);
        nodes.pop();
    }
}

fn exact_component(prep: &Prepared, n: usize) -> Complex64 {
    let ng = prep.groups.len();
    // blocks[k][g][g'] of mats[k]
    let blocks: Vec<Vec<Vec<CMatrix>>> = prep
        .mats
        .iter()
        .map(|m| {
            (0..ng)
                .map(|g| {
                    (0..ng)
                        .map(|gp| block(m, &prep.groups[g].1, &prep.groups[gp].1))
                        .collect()
                })
                .collect()
        })
        .collect();
    let mut dd = DdExp::new();
    let mut acc = Complex64::new(0.0, 0.0);
    for g0 in 0..ng {
        if n == 0 {
            let b = &blocks[0][g0][g0];
            acc += b.diagonal().sum() * dd.simplex(&[prep.groups[g0].0]);
            continue;
        }
        for g1 in 0..ng {
            let b = &blocks[0][g0][g1];
            if b.norm() < 1e-16 {
                continue;
            }
            let mut nodes = vec![prep.groups[g1].0];
            walk(&blocks, &prep.groups, 1, n, g0, g1, b, &mut nodes, &mut dd, &mut acc);
        }
    }
    acc * prep.tau
}

const GL_NODES: [f64; 16] = [
    -0.989400934991650, -0.944575023073233, -0.865631202387832, -0.755404408355003,
    -0.617876244402644, -0.458016777657227, -0.281603550779259, -0.095012509837637,
    0.095012509837637, 0.281603550779259, 0.458016777657227, 0.617876244402644,
    0.755404408355003, 0.865631202387832, 0.944575023073233, 0.989400934991650,
];
const GL_WEIGHTS: [f64; 16] = [
    0.027152459411754, 0.062253523938648, 0.095158511682493, 0.124628971255534,
    0.149595988816577, 0.169156519395003, 0.182603415044924, 0.189450610455069,
    0.189450610455069, 0.182603415044924, 0.169156519395003, 0.149595988816577,
    0.124628971255534, 0.095158511682493, 0.062253523938648, 0.027152459411754,
];

fn integrand(prep: &Prepared, t_unsorted: &[f64]) -> Complex64 {
    let mut t = t_unsorted.to_vec();
    t.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = t.len();
    let dim = prep.mu.len();
    let mut m = prep.mats[0].clone();
    for k in 0..=n {
        let s = if k == 0 {
            t.first().copied().unwrap_or(1.0)
        } else if k == n {
            1.0 - t[n - 1]
        } else {
            t[k] - t[k - 1]
        };
        let w: Vec<f64> = (0..dim).map(|i| (-s * prep.mu[i]).exp()).collect();
        scale_cols(&mut m, &w);
        if k < n {
            m *= &prep.mats[k + 1];
        }
    }
    m.diagonal().sum()
}

/// Iterated integral over 0 <= t_1 <= ... <= t_n <= 1.
fn simplex_quad(prep: &Prepared, n: usize, t: &mut Vec<f64>, upper: f64) -> Complex64 {
    if t.len() == n {
        return integrand(prep, t);
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for (x, w) in GL_NODES.iter().zip(GL_WEIGHTS) {
        let tn = 0.5 * upper * (x + 1.0);
        t.push(tn);
        acc += simplex_quad(prep, n, t, tn) * (0.5 * upper * w);
        t.pop();
    }
    acc
}

/// The degree-n JLO component evaluated on (a_0, ..., a_n):
/// integral over the n-simplex of
/// tau(chi a_0 e^{-t_1 D^2} [D,a_1] ... [D,a_n] e^{-(1-t_n) D^2}).
pub fn jlo_component(
    triple: &GraphTriple,
    n: usize,
    tuple: &[HolonomyElement],
    method: Method,
    mode: GradingMode,
) -> Result<Complex64> {
    if tuple.len() != n + 1 {
        return Err(Error::Rejected(format!(
            "degree-{n} component takes {} arguments, got {}",
            n + 1,
            tuple.len()
        )));
    }
    let chi = chi_for(triple, n, mode)?;
    let prep = prepare(triple, chi.as_ref(), tuple)?;
    Ok(match method {
        Method::Exact => exact_component(&prep, n),
        Method::Quadrature => {
            if n == 0 {
                exact_component(&prep, 0)
            } else {
                // outermost variable t_n is integrated last; build from t_n
                // inward, so recurse with decreasing upper limits.
                simplex_quad(&prep, n, &mut Vec::new(), 1.0) * prep.tau
            }
        }
    })
}

/// An (n+1)-linear functional on the holonomy algebra.
#[derive(Clone)]
pub struct Cochain<'a> {
    pub degree: usize,
    f: Rc<dyn Fn(&[HolonomyElement]) -> Result<Complex64> + 'a>,
}

impl<'a> Cochain<'a> {
    pub fn new(
        degree: usize,
        f: impl Fn(&[HolonomyElement]) -> Result<Complex64> + 'a,
    ) -> Self {
        Cochain { degree, f: Rc::new(f) }
    }

    pub fn eval(&self, args: &[HolonomyElement]) -> Result<Complex64> {
        if args.len() != self.degree + 1 {
            return Err(Error::Rejected(format!(
                "degree-{} cochain takes {} arguments, got {}",
                self.degree,
                self.degree + 1,
                args.len()
            )));
        }
        (self.f)(args)
    }
}

pub fn jlo_cochain<'a>(
    triple: &'a GraphTriple,
    n: usize,
    method: Method,
    mode: GradingMode,
) -> Cochain<'a> {
    Cochain::new(n, move |args| jlo_component(triple, n, args, method, mode))
}

/// Hochschild boundary, degree n -> n+1:
/// (b phi)(a_0,...,a_{n+1}) = sum_j (-1)^j phi(..., a_j a_{j+1}, ...)
///                           + (-1)^{n+1} phi(a_{n+1} a_0, a_1, ..., a_n).
pub fn b_op<'a>(phi: &Cochain<'a>) -> Cochain<'a> {
    let f = phi.f.clone();
    let n = phi.degree;
    Cochain::new(n + 1, move |args| {
        let mut total = Complex64::new(0.0, 0.0);
        for j in 0..=n {
            let mut t = args.to_vec();
            t[j] = t[j].product(&args[j + 1])?;
            t.remove(j + 1);
            let v = f(&t)?;
            total += if j % 2 == 0 { v } else { -v };
        }
        let mut t = args[..args.len() - 1].to_vec();
        t[0] = args[args.len() - 1].product(&args[0])?;
        let v = f(&t)?;
        total += if (n + 1) % 2 == 0 { v } else { -v };
        Ok(total)
    })
}

/// Cyclic boundary, degree n+1 -> n:
/// (B phi)(a_0,...,a_n) = sum_j (-1)^{nj} phi(1, a_j, ..., a_{j-1}).
pub fn big_b_op<'a>(phi: &Cochain<'a>) -> Result<Cochain<'a>> {
    if phi.degree == 0 {
        return Err(Error::Rejected("B is undefined on degree-0 cochains".into()));
    }
    let f = phi.f.clone();
    let n = phi.degree - 1;
    Ok(Cochain::new(n, move |args| {
        let m = args.len(); // n + 1
        let mut total = Complex64::new(0.0, 0.0);
        for j in 0..m {
            let mut t = Vec::with_capacity(m + 1);
            t.push(HolonomyElement::identity(&args[0].base));
            for r in 0..m {
                t.push(args[(j + r) % m].clone());
            }
            let v = f(&t)?;
            total += if (n * j) % 2 == 0 { v } else { -v };
        }
        Ok(total)
    }))
}

/// |b Ch^{n-1} + B Ch^{n+1}| on an (n+1)-tuple; the componentwise cocycle
/// identity says this vanishes.
pub fn cocycle_residual(
    triple: &GraphTriple,
    n: usize,
    tuple: &[HolonomyElement],
    method: Method,
    mode: GradingMode,
) -> Result<f64> {
    let mut total = Complex64::new(0.0, 0.0);
    if n >= 1 {
        let lower = jlo_cochain(triple, n - 1, method, mode);
        total += b_op(&lower).eval(tuple)?;
    }
    let upper = jlo_cochain(triple, n + 1, method, mode);
    total += big_b_op(&upper)?.eval(tuple)?;
    Ok(total.norm())
}

/// Gamma(n/2) for n >= 1 (half-integer arguments in closed form); the
/// degree-zero growth weight is taken as 1.
fn gamma_weight(n: usize) -> f64 {
    if n == 0 {
        return 1.0;
    }
    if n % 2 == 0 {
        let k = n / 2;
        let mut f = 1.0;
        for i in 1..k {
            f *= i as f64;
        }
        f
    } else {
        // Gamma(k + 1/2) = (2k)! sqrt(pi) / (4^k k!)
        let k = n / 2;
        let mut num = std::f64::consts::PI.sqrt();
        for i in 1..=k {
            num *= (2 * i - 1) as f64 / 2.0;
        }
        num
    }
}

#[derive(Debug, Clone)]
pub struct GrowthReport {
    /// sup of |Ch^n| over the sampled unit tuples, per degree.
    pub norms: Vec<f64>,
    /// Gamma(n/2) ||Ch^n|| z^n.
    pub terms: Vec<f64>,
    pub partial_sums: Vec<f64>,
    /// Whether the terms are nonincreasing from degree 3 on.
    pub decaying: bool,
}

/// Partial sums of sum_n Gamma(n/2) ||Ch^n|| z^n with norms estimated on
/// the given sample, each element normalized to unit operator norm.
pub fn entire_growth(
    triple: &GraphTriple,
    sample: &[HolonomyElement],
    n_max: usize,
    z: f64,
    mode: GradingMode,
) -> Result<GrowthReport> {
    let mut unit: Vec<HolonomyElement> = Vec::with_capacity(sample.len());
    for a in sample {
        let norm = operator_norm(&triple.multiplication(a)?.matrix);
        if norm <= 1e-14 {
            continue;
        }
        unit.push(a.scaled(Complex64::new(1.0 / norm, 0.0)));
    }
    if unit.is_empty() {
        return Err(Error::Rejected("entire_growth needs a nonzero sample".into()));
    }
    let mut norms = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        let mut sup = 0.0f64;
        for start in 0..unit.len() {
            let tuple: Vec<HolonomyElement> =
                (0..=n).map(|r| unit[(start + r) % unit.len()].clone()).collect();
            let v = jlo_component(triple, n, &tuple, Method::Exact, mode)?;
            sup = sup.max(v.norm());
        }
        norms.push(sup);
    }
    let terms: Vec<f64> = norms
        .iter()
        .enumerate()
        .map(|(n, nm)| gamma_weight(n) * nm * z.powi(n as i32))
        .collect();
    let mut partial_sums = Vec::with_capacity(terms.len());
    let mut acc = 0.0;
    for t in &terms {
        acc += t;
        partial_sums.push(acc);
    }
    let decaying = terms.windows(2).skip(2).all(|w| w[1] <= w[0] + 1e-15);
    Ok(GrowthReport { norms, terms, partial_sums, decaying })
}

#[derive(Debug, Clone)]
pub struct SplitReport {
    pub big_value: Complex64,
    pub small_value: Complex64,
    /// Heat mass of the complementary edge coordinates.
    pub factor: f64,
    pub residual: f64,
}

/// For a level-i system embedded in level j of the same refinement system,
/// a degree-n component on a tuple of level-i loops factorizes as
/// Ch^n_{D_j} = Ch^n_{D_i} * (heat factor of the complementary edges).
#[allow(clippy::too_many_arguments)]
pub fn immersion_split_check(
    sys: &RefinementSystem,
    i: usize,
    j: usize,
    datum: &RootDatum,
    cutoff: i64,
    weights: &[f64],
    n: usize,
    tuple: &[HolonomyElement],
    method: Method,
    mode: GradingMode,
    kind: ModuleKind,
) -> Result<SplitReport> {
    if i > j {
        return Err(Error::Rejected(format!("level {i} does not embed in level {j}")));
    }
    let small = assemble_triple(sys, i, datum, cutoff, weights, kind)?;
    let big = assemble_triple(sys, j, datum, cutoff, weights, kind)?;
    let n_small = small.space.edges.len();
    for a in tuple {
        for (_, w) in &a.terms {
            if w.iter().any(|&(g, _)| g >= n_small) {
                return Err(Error::Rejected(
                    "tuple is not supported on the embedded sub-algebra".into(),
                ));
            }
        }
    }
    let small_value = jlo_component(&small, n, tuple, method, mode)?;
    let big_value = jlo_component(&big, n, tuple, method, mode)?;
    let graded_chi = chi_for(&big, n, mode)?.is_some();
    let mut factor = 1.0;
    for k in n_small..big.space.edges.len() {
        let e = &big.space.edges[k];
        let a = weights[big.gen_levels[k] - 1];
        let de = edge_dirac(e)?;
        let dim_s = e.module.dimension as f64;
        if graded_chi {
            let g = big.gammas[k]
                .as_ref()
                .ok_or_else(|| Error::Parity("graded factor needs a parity operator".into()))?;
            let l2 = e.l2_dim();
            let gamma_full = CMatrix::identity(l2, l2).kronecker(g);
            let es = de.clone().symmetric_eigen();
            let gt = es.eigenvectors.adjoint() * gamma_full * &es.eigenvectors;
            let mut s = 0.0;
            for (idx, l) in es.eigenvalues.iter().enumerate() {
                s += gt[(idx, idx)].re * (-a * a * l * l).exp();
            }
            factor *= s / dim_s;
        } else {
            let evs = hermitian_eigenvalues(&de);
            let s: f64 = evs.iter().map(|l| (-a * a * l * l).exp()).sum();
            factor *= s / dim_s;
        }
    }
    let residual = (big_value - small_value * factor).norm();
    Ok(SplitReport { big_value, small_value, factor, residual })
}
