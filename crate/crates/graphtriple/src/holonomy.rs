//! Connections on generating sets, holonomy evaluation, the gauge action,
//! and holonomy multiplication operators on truncated tensor spaces.
//!
//! The faithful representation is the defining character for the circle,
//! spin 1/2 for su2, and the block-diagonal direct sum for products. The
//! full Hilbert space is E (x) prod_gens (L2(G) (x) S), with the L2 factor
//! spanned by Peter-Weyl matrix coefficients; the Dirac derivative acts on
//! the left coefficient index, multiplication mixes labels and both
//! indices through Clebsch-Gordan coefficients.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::Ratio;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::clifford::SpinorModule;
use crate::error::{Error, Result};
use crate::graph::{reduce_fword, FWord, GroupoidWord, RefinementSystem};
use crate::lie::{CMatrix, Factor, RootDatum};

type BigRational = Ratio<BigInt>;

fn factorial(n: i64) -> BigInt {
    assert!(n >= 0);
    let mut acc = BigInt::one();
    for k in 2..=n {
        acc *= k;
    }
    acc
}

/// Clebsch-Gordan coefficient C(j1 m1 j2 m2 | J M) in the Condon-Shortley
/// convention; all spins passed doubled.
pub fn clebsch(tj1: i64, tm1: i64, tj2: i64, tm2: i64, tbig_j: i64, tbig_m: i64) -> f64 {
    if tm1 + tm2 != tbig_m
        || tbig_j > tj1 + tj2
        || tbig_j < (tj1 - tj2).abs()
        || (tj1 + tj2 + tbig_j) % 2 != 0
        || tm1.abs() > tj1
        || tm2.abs() > tj2
        || tbig_m.abs() > tbig_j
        || (tj1 + tm1) % 2 != 0
        || (tj2 + tm2) % 2 != 0
    {
        return 0.0;
    }
    // C = sqrt(A) * B with A, B exact rationals (Racah's formula).
    let h = |x: i64| -> i64 {
        debug_assert!(x % 2 == 0);
        x / 2
    };
    let a_num = BigInt::from(tbig_j + 1)
        * factorial(h(tj1 + tj2 - tbig_j))
        * factorial(h(tj1 - tj2 + tbig_j))
        * factorial(h(-tj1 + tj2 + tbig_j))
        * factorial(h(tbig_j + tbig_m))
        * factorial(h(tbig_j - tbig_m))
        * factorial(h(tj1 - tm1))
        * factorial(h(tj1 + tm1))
        * factorial(h(tj2 - tm2))
        * factorial(h(tj2 + tm2));
    let a_den = factorial(h(tj1 + tj2 + tbig_j) + 1);
    let a = BigRational::new(a_num, a_den);
    let mut b = BigRational::zero();
    let k_min = 0.max(h(tj2 - tbig_j - tm1)).max(h(tj1 + tm2 - tbig_j));
    let k_max = h(tj1 + tj2 - tbig_j).min(h(tj1 - tm1)).min(h(tj2 + tm2));
    for k in k_min..=k_max {
        let den = factorial(k)
            * factorial(h(tj1 + tj2 - tbig_j) - k)
            * factorial(h(tj1 - tm1) - k)
            * factorial(h(tj2 + tm2) - k)
            * factorial(h(tbig_j - tj2 + tm1) + k)
            * factorial(h(tbig_j - tj1 - tm2) + k);
        let term = BigRational::new(BigInt::one(), den);
        if k % 2 == 0 {
            b += term;
        } else {
            b -= term;
        }
    }
    let sign = if b.is_negative() { -1.0 } else { 1.0 };
    let b2 = (&b * &b).to_f64().unwrap();
    sign * (a.to_f64().unwrap() * b2).sqrt()
}

/// Basis states of one group factor of one edge: (label, 2m, 2n) for su2
/// matrix coefficients |j, m, n>, or (n, 0, 0) circle Fourier modes.
#[derive(Debug, Clone)]
pub struct FactorBasis {
    pub factor: Factor,
    pub cutoff: i64,
    pub states: Vec<(i64, i64, i64)>,
    index: BTreeMap<(i64, i64, i64), usize>,
}

impl FactorBasis {
    pub fn new(factor: Factor, cutoff: i64) -> Self {
        let mut states = Vec::new();
        match factor {
            Factor::Circle { .. } => {
                for n in -cutoff..=cutoff {
                    states.push((n, 0, 0));
                }
            }
            Factor::Su2 { .. } | Factor::Generic { .. } => {
                for w in 0..=cutoff {
                    let mut m = w;
                    while m >= -w {
                        let mut n = w;
                        while n >= -w {
                            states.push((w, m, n));
                            n -= 2;
                        }
                        m -= 2;
                    }
                }
            }
        }
        let index = states.iter().enumerate().map(|(i, s)| (*s, i)).collect();
        FactorBasis { factor, cutoff, states, index }
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    /// The dimension of this factor's block in the faithful representation.
    pub fn rep_dim(&self) -> usize {
        match self.factor {
            Factor::Circle { .. } => 1,
            _ => 2,
        }
    }

    /// The squared weight norm of a label of this factor, used to damp
    /// clipped mass by the heat factor of its source block.
    fn label_norm_sq(&self, label: i64) -> f64 {
        let scale = match self.factor {
            Factor::Circle { scale } | Factor::Su2 { scale } => scale,
            Factor::Generic { .. } => return 0.0,
        };
        let s = crate::lie::rational_to_f64(scale);
        match self.factor {
            Factor::Circle { .. } => (label * label) as f64 / s,
            _ => (label * (label + 2)) as f64 / (8.0 * s),
        }
    }

    /// Multiplication by the (a, b) entry of the factor's defining
    /// representation of the coordinate, or its inverse. Returns the matrix
    /// and the l2 mass clipped at the cutoff.
    pub fn mult_entry(&self, a: usize, b: usize, inverse: bool) -> Result<(CMatrix, ClipMass)> {
        let (m, clip) = if inverse {
            let (m, clip) = self.mult_entry_plain(b, a)?;
            (m.adjoint(), clip)
        } else {
            self.mult_entry_plain(a, b)?
        };
        Ok((m, clip))
    }

    fn mult_entry_plain(&self, a: usize, b: usize) -> Result<(CMatrix, ClipMass)> {
        let d = self.dim();
        let mut m = CMatrix::zeros(d, d);
        let mut raw = 0.0_f64;
        let mut damped = 0.0_f64;
        match self.factor {
            Factor::Circle { .. } => {
                if a != 0 || b != 0 {
                    return Err(Error::Rejected("circle representation is 1-dimensional".into()));
                }
                // z * e^{i n theta} = e^{i (n+1) theta}
                for (col, &(n, _, _)) in self.states.iter().enumerate() {
                    match self.index.get(&(n + 1, 0, 0)) {
                        Some(&row) => m[(row, col)] = Complex64::new(1.0, 0.0),
                        None => {
                            raw += 1.0;
                            damped += (-self.label_norm_sq(n)).exp();
                        }
                    }
                }
            }
            Factor::Su2 { .. } => {
                if a > 1 || b > 1 {
                    return Err(Error::Rejected("su2 defining representation is 2-dimensional".into()));
                }
                let mu_a = 1 - 2 * (a as i64);
                let mu_b = 1 - 2 * (b as i64);
                for (col, &(w, tm, tn)) in self.states.iter().enumerate() {
                    for w2 in [w - 1, w + 1] {
                        if w2 < 0 {
                            continue;
                        }
                        let (tm2, tn2) = (tm + mu_a, tn + mu_b);
                        if tm2.abs() > w2 || tn2.abs() > w2 {
                            continue;
                        }
                        let coef = ((w as f64 + 1.0) / (w2 as f64 + 1.0)).sqrt()
                            * clebsch(1, mu_a, w, tm, w2, tm2)
                            * clebsch(1, mu_b, w, tn, w2, tn2);
                        if coef == 0.0 {
                            continue;
                        }
                        match self.index.get(&(w2, tm2, tn2)) {
                            Some(&row) => m[(row, col)] = Complex64::new(coef, 0.0),
                            None => {
                                raw += coef * coef;
                                damped += coef * coef * (-self.label_norm_sq(w)).exp();
                            }
                        }
                    }
                }
            }
            Factor::Generic { .. } => {
                return Err(Error::Capability("no multiplication operators for generic factors".into()));
            }
        }
        Ok((m, ClipMass { raw: raw.sqrt(), damped: damped.sqrt() }))
    }
}

/// The truncated Hilbert space factor of one edge (generator):
/// L2(G)_trunc (x) S, with L2 a tensor product over group factors.
#[derive(Debug, Clone)]
pub struct EdgeSpace {
    pub datum: RootDatum,
    pub cutoff: i64,
    pub factors: Vec<FactorBasis>,
    pub module: SpinorModule,
    pub rep_offsets: Vec<usize>,
    pub rep_dim: usize,
}

impl EdgeSpace {
    pub fn new(datum: RootDatum, cutoff: i64, module: SpinorModule) -> Result<Self> {
        let q = datum.algebra_dim()?;
        if module.q != q {
            return Err(Error::Rejected("spinor module does not match algebra dimension".into()));
        }
        let factors: Vec<FactorBasis> =
            datum.factors.iter().map(|f| FactorBasis::new(f.clone(), cutoff)).collect();
        let mut rep_offsets = Vec::with_capacity(factors.len());
        let mut rep_dim = 0;
        for f in &factors {
            rep_offsets.push(rep_dim);
            rep_dim += f.rep_dim();
        }
        Ok(EdgeSpace { datum, cutoff, factors, module, rep_offsets, rep_dim })
    }

    pub fn l2_dim(&self) -> usize {
        self.factors.iter().map(|f| f.dim()).product()
    }

    pub fn dim(&self) -> usize {
        self.l2_dim() * self.module.dimension
    }

    /// Which factor block a faithful-representation index lies in, and the
    /// local index inside that block.
    fn rep_block(&self, i: usize) -> Option<(usize, usize)> {
        for (f, &off) in self.rep_offsets.iter().enumerate() {
            if i >= off && i < off + self.factors[f].rep_dim() {
                return Some((f, i - off));
            }
        }
        None
    }

    /// Lifts a matrix on one factor's l2 space to the edge's l2 space.
    fn lift_factor_to_l2(&self, f: usize, m: &CMatrix) -> CMatrix {
        let mut acc = CMatrix::identity(1, 1);
        for (i, fb) in self.factors.iter().enumerate() {
            let part = if i == f { m.clone() } else { CMatrix::identity(fb.dim(), fb.dim()) };
            acc = acc.kronecker(&part);
        }
        acc
    }

    /// Multiplication by the (a, b) rep entry of one traversal of this
    /// edge's coordinate, as a matrix on the edge l2 space (identity on S
    /// is applied by the caller). Zero matrix for cross-block entries.
    pub fn coordinate_mult(&self, a: usize, b: usize, inverse: bool) -> Result<(CMatrix, ClipMass)> {
        let d = self.l2_dim();
        let (fa, la) = self
            .rep_block(a)
            .ok_or_else(|| Error::Rejected(format!("rep index {a} out of range")))?;
        let (fb, lb) = self
            .rep_block(b)
            .ok_or_else(|| Error::Rejected(format!("rep index {b} out of range")))?;
        if fa != fb {
            return Ok((CMatrix::zeros(d, d), ClipMass::default()));
        }
        let (m, clip) = self.factors[fa].mult_entry(la, lb, inverse)?;
        Ok((self.lift_factor_to_l2(fa, &m), clip))
    }
}

/// E (x) prod_gens (L2 (x) S), ordered with E slowest, then the edges in
/// generator order, S fastest within each edge.
#[derive(Debug, Clone)]
pub struct FullSpace {
    pub e_dim: usize,
    pub edges: Vec<EdgeSpace>,
}

impl FullSpace {
    pub fn new(e_dim: usize, edges: Vec<EdgeSpace>) -> Self {
        FullSpace { e_dim, edges }
    }

    pub fn dim(&self) -> usize {
        self.e_dim * self.edges.iter().map(|e| e.dim()).product::<usize>()
    }

    /// kron(m_e on E, per-edge ops), identity where `None`.
    pub fn assemble(&self, m_e: Option<&CMatrix>, edge_ops: &[Option<CMatrix>]) -> CMatrix {
        let mut acc = match m_e {
            Some(m) => m.clone(),
            None => CMatrix::identity(self.e_dim, self.e_dim),
        };
        for (k, e) in self.edges.iter().enumerate() {
            let part = match edge_ops.get(k).and_then(|o| o.as_ref()) {
                Some(m) => m.clone(),
                None => CMatrix::identity(e.dim(), e.dim()),
            };
            acc = acc.kronecker(&part);
        }
        acc
    }

    /// Lifts an operator on one edge's l2 space to the full space
    /// (identity on E, the other edges and this edge's S factor).
    pub fn lift_l2_op(&self, k: usize, m: &CMatrix) -> CMatrix {
        let s = self.edges[k].module.dimension;
        let edge_op = m.kronecker(&CMatrix::identity(s, s));
        let mut ops: Vec<Option<CMatrix>> = vec![None; self.edges.len()];
        ops[k] = Some(edge_op);
        self.assemble(None, &ops)
    }
}

/// An assignment of a group element (in the faithful representation) to
/// every generator of a generating set.
#[derive(Debug, Clone)]
pub struct ConnectionAssignment {
    pub matrices: Vec<CMatrix>,
    pub rep_dim: usize,
}

impl ConnectionAssignment {
    pub fn new(matrices: Vec<CMatrix>) -> Result<Self> {
        let rep_dim = matrices.first().map(|m| m.nrows()).unwrap_or(0);
        for m in &matrices {
            if m.nrows() != rep_dim || m.ncols() != rep_dim {
                return Err(Error::Rejected("assignment matrices differ in size".into()));
            }
            let r = (m * m.adjoint() - CMatrix::identity(rep_dim, rep_dim)).norm();
            if r > 1e-12 {
                return Err(Error::Rejected(format!("assignment value not unitary ({r:.2e})")));
            }
        }
        Ok(ConnectionAssignment { matrices, rep_dim })
    }
}

/// A gauge transformation: a group element per vertex.
#[derive(Debug, Clone)]
pub struct GaugeTransform {
    pub values: BTreeMap<String, CMatrix>,
}

/// A formal finite combination sum_i a_i h_{gamma_i} of loops at a common
/// base vertex, each loop written as a word in generator indices.
#[derive(Debug, Clone)]
pub struct HolonomyElement {
    pub base: String,
    pub terms: Vec<(Complex64, FWord)>,
}

impl HolonomyElement {
    pub fn single(base: &str, word: FWord) -> Self {
        HolonomyElement { base: base.into(), terms: vec![(Complex64::new(1.0, 0.0), word)] }
    }

    pub fn identity(base: &str) -> Self {
        HolonomyElement::single(base, vec![])
    }

    /// Algebra product: pi(ab) = pi(a) pi(b). With anti-ordered holonomy
    /// evaluation the loop word of a product is w_b ++ w_a.
    pub fn product(&self, other: &Self) -> Result<Self> {
        if self.base != other.base {
            return Err(Error::Rejected(format!(
                "cannot multiply loops based at {} and {}",
                self.base, other.base
            )));
        }
        let mut map: BTreeMap<FWord, Complex64> = BTreeMap::new();
        for (ca, wa) in &self.terms {
            for (cb, wb) in &other.terms {
                let mut w = wb.clone();
                w.extend(wa.iter().copied());
                *map.entry(reduce_fword(w)).or_insert(Complex64::new(0.0, 0.0)) += ca * cb;
            }
        }
        let terms = map.into_iter().filter(|(_, c)| c.norm() > 0.0).map(|(w, c)| (c, w)).collect();
        Ok(HolonomyElement { base: self.base.clone(), terms })
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        let terms = self.terms.iter().map(|(a, w)| (a * c, w.clone())).collect();
        HolonomyElement { base: self.base.clone(), terms }
    }

    pub fn plus(&self, other: &Self) -> Result<Self> {
        if self.base != other.base {
            return Err(Error::Rejected(format!(
                "cannot add loops based at {} and {}",
                self.base, other.base
            )));
        }
        let mut map: BTreeMap<FWord, Complex64> = BTreeMap::new();
        for (c, w) in self.terms.iter().chain(&other.terms) {
            *map.entry(w.clone()).or_insert(Complex64::new(0.0, 0.0)) += c;
        }
        let terms = map.into_iter().filter(|(_, c)| c.norm() > 0.0).map(|(w, c)| (c, w)).collect();
        Ok(HolonomyElement { base: self.base.clone(), terms })
    }

    /// a* = sum conj(a_i) h_{gamma_i^{-1}}.
    pub fn star(&self) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|(c, w)| (c.conj(), w.iter().rev().map(|&(i, inv)| (i, !inv)).collect()))
            .collect();
        HolonomyElement { base: self.base.clone(), terms }
    }
}

/// Evaluates a generator word in an assignment, in anti-order:
/// h_{gamma' o gamma} = grad(gamma') * grad(gamma).
pub fn evaluate_fword(word: &FWord, conn: &ConnectionAssignment) -> Result<CMatrix> {
    let n = conn.rep_dim;
    let mut acc = CMatrix::identity(n, n);
    for &(i, inv) in word {
        let m = conn
            .matrices
            .get(i)
            .ok_or_else(|| Error::Rejected(format!("generator {i} not assigned")))?;
        let m = if inv { m.adjoint() } else { m.clone() };
        acc = m * acc;
    }
    Ok(acc)
}

/// Evaluates a groupoid word of graph `k` of the system by rewriting it in
/// the level-(k+1) generating set first.
pub fn evaluate_holonomy(
    sys: &RefinementSystem,
    k: usize,
    word: &GroupoidWord,
    conn: &ConnectionAssignment,
) -> Result<CMatrix> {
    let fw = sys.rewrite_in_generators(k, word)?;
    evaluate_fword(&fw, conn)
}

/// grad'(gamma) = g(r(gamma)) grad(gamma) g(s(gamma))^{-1} on generators;
/// with anti-ordered products this telescopes at interior vertices, and
/// loop holonomies at nu transform by conjugation with g(nu).
pub fn gauge_act(
    g: &GaugeTransform,
    conn: &ConnectionAssignment,
    gens: &[GroupoidWord],
) -> Result<ConnectionAssignment> {
    if gens.len() != conn.matrices.len() {
        return Err(Error::Rejected("generator list does not match assignment".into()));
    }
    let mut matrices = Vec::with_capacity(gens.len());
    for (w, m) in gens.iter().zip(&conn.matrices) {
        let gs = g
            .values
            .get(&w.src)
            .ok_or_else(|| Error::Rejected(format!("vertex {} not in gauge transform", w.src)))?;
        let gr = g
            .values
            .get(&w.dst)
            .ok_or_else(|| Error::Rejected(format!("vertex {} not in gauge transform", w.dst)))?;
        matrices.push(gr * m * gs.adjoint());
    }
    ConnectionAssignment::new(matrices)
}

/// Restriction to the first |F_i| generators.
pub fn project_connection(
    conn: &ConnectionAssignment,
    sys: &RefinementSystem,
    level: usize,
) -> Result<ConnectionAssignment> {
    if level == 0 || level > sys.top_level() {
        return Err(Error::Rejected(format!("level {level} out of range")));
    }
    let n = sys.generating_sets[level - 1].len();
    if conn.matrices.len() < n {
        return Err(Error::Rejected("assignment smaller than requested level".into()));
    }
    ConnectionAssignment::new(conn.matrices[..n].to_vec())
}

/// Clipped l2 mass at the truncation boundary: raw, and damped by the
/// heat factor e^{-|lam|^2} of the source block (a proxy for the leakage
/// seen by smooth states).
#[derive(Debug, Clone, Copy, Default)]
pub struct ClipMass {
    pub raw: f64,
    pub damped: f64,
}

/// A holonomy multiplication operator on the full space.
#[derive(Debug, Clone)]
pub struct MulOp {
    pub matrix: CMatrix,
    pub clipped_mass: f64,
    pub damped_clipped: f64,
}

/// Pointwise multiplication by `elem` on `space`: identity on every S
/// factor; the E factor carries the matrix units of the faithful
/// representation.
pub fn multiplication_operator(space: &FullSpace, elem: &HolonomyElement) -> Result<MulOp> {
    let n = space.edges.first().map(|e| e.rep_dim).unwrap_or(space.e_dim);
    if space.e_dim != n {
        return Err(Error::Rejected(format!(
            "E dimension {} must match the faithful representation dimension {n}",
            space.e_dim
        )));
    }
    for e in &space.edges {
        if e.rep_dim != n {
            return Err(Error::Rejected("edges carry different groups".into()));
        }
    }
    let dim = space.dim();
    let mut total = CMatrix::zeros(dim, dim);
    let mut clipped = 0.0_f64;
    let mut damped = 0.0_f64;
    for (coef, word) in &elem.terms {
        if word.is_empty() {
            total += CMatrix::identity(dim, dim) * *coef;
            continue;
        }
        // Entry (c0, cL) of the anti-ordered product over the word; sum
        // over all index chains.
        let len = word.len();
        let mut chain = vec![0usize; len + 1];
        loop {
            // per-edge l2 operators for this chain
            let mut ok = true;
            let mut edge_l2: Vec<Option<CMatrix>> = vec![None; space.edges.len()];
            for (step, &(gen, inv)) in word.iter().enumerate() {
                // anti-order: letter `step` is applied at position len-1-step
                // in the matrix product, with chain indices (c_{pos}, c_{pos+1}).
                let pos = len - 1 - step;
                let (a, b) = (chain[pos], chain[pos + 1]);
                let e = &space.edges[gen];
                let (m, clip) = e.coordinate_mult(a, b, inv)?;
                if m.norm() == 0.0 && clip.raw == 0.0 {
                    ok = false;
                    break;
                }
                clipped += coef.norm() * clip.raw;
                damped += coef.norm() * clip.damped;
                edge_l2[gen] = Some(match edge_l2[gen].take() {
                    Some(prev) => m * prev,
                    None => m,
                });
            }
            if ok {
                let mut m_e = CMatrix::zeros(n, n);
                m_e[(chain[0], chain[len])] = *coef;
                let edge_ops: Vec<Option<CMatrix>> = space
                    .edges
                    .iter()
                    .enumerate()
                    .map(|(k, e)| {
                        edge_l2[k].as_ref().map(|m| {
                            let s = e.module.dimension;
                            m.kronecker(&CMatrix::identity(s, s))
                        })
                    })
                    .collect();
                total += space.assemble(Some(&m_e), &edge_ops);
            }
            // next chain
            let mut i = 0;
            loop {
                if i > len {
                    break;
                }
                chain[i] += 1;
                if chain[i] < n {
                    break;
                }
                chain[i] = 0;
                i += 1;
            }
            if i > len {
                break;
            }
        }
    }
    Ok(MulOp { matrix: total, clipped_mass: clipped, damped_clipped: damped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_su2(rng: &mut ChaCha8Rng) -> CMatrix {
        // Haar via normalized quaternion.
        let v: Vec<f64> = (0..4).map(|_| rng.gen::<f64>() - 0.5).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let (a, b, c, d) = (v[0] / n, v[1] / n, v[2] / n, v[3] / n);
        CMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(a, b),
                Complex64::new(c, d),
                Complex64::new(-c, d),
                Complex64::new(a, -b),
            ],
        )
    }

    #[test]
    fn clebsch_known_values() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((clebsch(1, 1, 1, -1, 2, 0) - s).abs() < 1e-14);
        assert!((clebsch(1, 1, 1, -1, 0, 0) - s).abs() < 1e-14);
        assert!((clebsch(1, -1, 1, 1, 0, 0) + s).abs() < 1e-14);
        assert!((clebsch(1, 1, 1, 1, 2, 2) - 1.0).abs() < 1e-14);
        assert!((clebsch(2, 0, 2, 0, 4, 0) - (2.0f64 / 3.0).sqrt()).abs() < 1e-14);
        assert!((clebsch(2, 0, 2, 0, 2, 0) - 0.0).abs() < 1e-14);
        assert_eq!(clebsch(1, 1, 1, 1, 0, 2), 0.0);
    }

    #[test]
    fn clebsch_orthogonality() {
        // sum_{m1,m2} C(j1 m1 j2 m2|J M) C(j1 m1 j2 m2|J' M') = delta
        let (tj1, tj2) = (2, 3);
        for tbig_j in [1, 3, 5] {
            for tbig_j2 in [1, 3, 5] {
                let mut acc = 0.0;
                let (tm, tm2) = (1, 1);
                for tm1 in (-tj1..=tj1).step_by(2) {
                    acc += clebsch(tj1, tm1, tj2, tm - tm1, tbig_j, tm)
                        * clebsch(tj1, tm1, tj2, tm2 - tm1, tbig_j2, tm2);
                }
                let want = if tbig_j == tbig_j2 { 1.0 } else { 0.0 };
                assert!((acc - want).abs() < 1e-13, "J={tbig_j} J'={tbig_j2}");
            }
        }
    }

    // Wigner d and D matrices for the quadrature oracle.
    fn fact_f(n: i64) -> f64 {
        (2..=n).map(|k| k as f64).product()
    }

    fn wigner_d(tj: i64, tmp: i64, tm: i64, beta: f64) -> f64 {
        let h = |x: i64| x as f64 / 2.0;
        let pre = (fact_f((tj + tmp) / 2)
            * fact_f((tj - tmp) / 2)
            * fact_f((tj + tm) / 2)
            * fact_f((tj - tm) / 2))
        .sqrt();
        let (c, s) = ((beta / 2.0).cos(), (beta / 2.0).sin());
        let mut acc = 0.0;
        for k in 0.max((tm - tmp) / 2)..=((tj + tm) / 2).min((tj - tmp) / 2) {
            let a = (tj + tm) / 2 - k;
            let b = (tmp - tm) / 2 + k;
            if a < 0 || b < 0 || (tj - tmp) / 2 - k < 0 {
                continue;
            }
            let sign = if b % 2 == 0 { 1.0 } else { -1.0 };
            let den = fact_f(a) * fact_f(k) * fact_f(b) * fact_f((tj - tmp) / 2 - k);
            acc += sign / den
                * c.powf(h(tj + tm) + h(tj - tmp) - 2.0 * k as f64)
                * s.powf(h(tmp - tm) + 2.0 * k as f64);
        }
        pre * acc
    }

    fn wigner_bigd(tj: i64, tmp: i64, tm: i64, a: f64, b: f64, g: f64) -> Complex64 {
        let phase = Complex64::new(0.0, -(tmp as f64 / 2.0) * a - (tm as f64 / 2.0) * g).exp();
        phase * wigner_d(tj, tmp, tm, b)
    }

    /// Haar integral of conj(D^{j'}_{m'n'}) D^{1/2}_{ab} D^{j}_{mn} by
    /// trapezoid in alpha, gamma and Gauss-Legendre in cos(beta).
    fn haar_triple(tjp: i64, tmp: i64, tnp: i64, a: usize, b: usize, tj: i64, tm: i64, tn: i64) -> Complex64 {
        let (mua, mub) = (1 - 2 * a as i64, 1 - 2 * b as i64);
        let na = 24usize;
        // 12-point Gauss-Legendre nodes/weights on [-1, 1]
        let nodes = [
            -0.981560634246719, -0.904117256370475, -0.769902674194305,
            -0.587317954286617, -0.367831498998180, -0.125233408511469,
            0.125233408511469, 0.367831498998180, 0.587317954286617,
            0.769902674194305, 0.904117256370475, 0.981560634246719,
        ];
        let weights = [
            0.047175336386512, 0.106939325995318, 0.160078328543346,
            0.203167426723066, 0.233492536538355, 0.249147045813403,
            0.249147045813403, 0.233492536538355, 0.203167426723066,
            0.160078328543346, 0.106939325995318, 0.047175336386512,
        ];
        let mut acc = Complex64::new(0.0, 0.0);
        for ia in 0..na {
            let alpha = 2.0 * std::f64::consts::PI * ia as f64 / na as f64;
            for ig in 0..(2 * na) {
                let gamma = 4.0 * std::f64::consts::PI * ig as f64 / (2 * na) as f64;
                for (&x, w) in nodes.iter().zip(weights) {
                    let beta = f64::acos(x);
                    let v = wigner_bigd(tjp, tmp, tnp, alpha, beta, gamma).conj()
                        * wigner_bigd(1, mua, mub, alpha, beta, gamma)
                        * wigner_bigd(tj, tm, tn, alpha, beta, gamma);
                    acc += v * w;
                }
            }
        }
        // (1/2 from the beta measure) x averages over alpha, gamma
        acc / (2.0 * na as f64 * 2.0 * na as f64)
    }

    #[test]
    fn su2_mult_matches_haar_quadrature() {
        let fb = FactorBasis::new(Factor::su2_killing(), 2);
        for (a, b) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            let (m, _) = fb.mult_entry(a, b, false).unwrap();
            for (col, &(tj, tm, tn)) in fb.states.iter().enumerate() {
                for (row, &(tjp, tmp, tnp)) in fb.states.iter().enumerate() {
                    let got = m[(row, col)];
                    let norm = (((tj + 1) * (tjp + 1)) as f64).sqrt();
                    let want = haar_triple(tjp, tmp, tnp, a, b, tj, tm, tn) * norm;
                    assert!(
                        (got - want).norm() < 1e-10,
                        "entry ({tjp},{tmp},{tnp})<-({tj},{tm},{tn}) ab=({a},{b}): {got} vs {want}"
                    );
                }
            }
        }
    }

    #[test]
    fn circle_shift_with_clipping() {
        let fb = FactorBasis::new(Factor::circle_unit(), 3);
        let (m, clip) = fb.mult_entry(0, 0, false).unwrap();
        assert_eq!(clip.raw, 1.0);
        assert!((clip.damped - (-9.0f64 / 2.0).exp()).abs() < 1e-15);
        for (col, &(n, _, _)) in fb.states.iter().enumerate() {
            for (row, &(n2, _, _)) in fb.states.iter().enumerate() {
                let want = if n2 == n + 1 { 1.0 } else { 0.0 };
                assert_eq!(m[(row, col)].re, want);
            }
        }
        // inverse shifts down
        let (mi, _) = fb.mult_entry(0, 0, true).unwrap();
        assert!((mi - m.adjoint()).norm() < 1e-15);
    }

    #[test]
    fn identity_loop_is_identity() {
        let space = FullSpace::new(
            1,
            vec![EdgeSpace::new(RootDatum::circle(), 2, SpinorModule::irreducible(1)).unwrap()],
        );
        let op = multiplication_operator(&space, &HolonomyElement::identity("ν")).unwrap();
        assert_eq!(op.clipped_mass, 0.0);
        assert!((op.matrix - CMatrix::identity(space.dim(), space.dim())).norm() < 1e-15);
    }

    #[test]
    fn circle_word_operator_is_shift_product() {
        let space = FullSpace::new(
            1,
            vec![EdgeSpace::new(RootDatum::circle(), 4, SpinorModule::irreducible(1)).unwrap()],
        );
        // h_e^2 via the word (e, e)
        let op2 = multiplication_operator(
            &space,
            &HolonomyElement::single("ν", vec![(0, false), (0, false)]),
        )
        .unwrap();
        let op1 = multiplication_operator(&space, &HolonomyElement::single("ν", vec![(0, false)]))
            .unwrap();
        let prod = &op1.matrix * &op1.matrix;
        assert!((op2.matrix - prod).norm() < 1e-14);
        assert!(op2.clipped_mass > 0.0);
    }

    #[test]
    fn su2_operator_norm_bounded_and_homomorphism() {
        let edge = EdgeSpace::new(RootDatum::su2_killing(), 3, SpinorModule::irreducible(3)).unwrap();
        let space = FullSpace::new(2, vec![edge]);
        let op = multiplication_operator(&space, &HolonomyElement::single("ν", vec![(0, false)]))
            .unwrap();
        let svd = op.matrix.clone().svd(false, false);
        let norm = svd.singular_values.iter().cloned().fold(0.0, f64::max);
        assert!(norm <= 1.0 + 1e-10, "norm {norm}");
        // h_{gamma gamma^{-1}} = identity exactly (word reduces), and the
        // operator of (e)(e^{-1}) equals M(e) M(e^{-1}) up to clipping.
        let m_f = multiplication_operator(&space, &HolonomyElement::single("ν", vec![(0, false)]))
            .unwrap()
            .matrix;
        let m_b = multiplication_operator(&space, &HolonomyElement::single("ν", vec![(0, true)]))
            .unwrap()
            .matrix;
        let prod = &m_f * &m_b;
        // interior: states with j <= cutoff - 1 are reproduced exactly
        let fb = &space.edges[0].factors[0];
        for (col, &(w, _, _)) in fb.states.iter().enumerate() {
            if w >= 3 {
                continue;
            }
            for e_i in 0..2 {
                let mut v = DVector::<Complex64>::zeros(space.dim());
                let idx = (e_i * space.edges[0].dim()) + col * space.edges[0].module.dimension;
                v[idx] = Complex64::new(1.0, 0.0);
                let diff = (&prod * &v) - &v;
                assert!(diff.norm() < 1e-12, "state j={w}");
            }
        }
    }

    #[test]
    fn involution_is_adjoint_on_interior() {
        let edge = EdgeSpace::new(RootDatum::su2_killing(), 3, SpinorModule::irreducible(3)).unwrap();
        let space = FullSpace::new(2, vec![edge]);
        let elem = HolonomyElement {
            base: "ν".into(),
            terms: vec![
                (Complex64::new(0.7, -0.2), vec![(0, false)]),
                (Complex64::new(0.0, 1.3), vec![]),
            ],
        };
        let m = multiplication_operator(&space, &elem).unwrap().matrix;
        let ms = multiplication_operator(&space, &elem.star()).unwrap().matrix;
        // compare on the j <= 2 interior against the adjoint
        let fb = &space.edges[0].factors[0];
        let sdim = space.edges[0].module.dimension;
        let diff = &ms - m.adjoint();
        for (col, &(w, _, _)) in fb.states.iter().enumerate() {
            if w >= 3 {
                continue;
            }
            for e_i in 0..2 {
                for s in 0..sdim {
                    let idx = e_i * space.edges[0].dim() + col * sdim + s;
                    let colv = diff.column(idx);
                    assert!(colv.norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn evaluate_and_reduction() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let conn = ConnectionAssignment::new(vec![random_su2(&mut rng), random_su2(&mut rng)]).unwrap();
        let id = evaluate_fword(&vec![], &conn).unwrap();
        assert!((id - CMatrix::identity(2, 2)).norm() < 1e-14);
        let single = evaluate_fword(&vec![(1, false)], &conn).unwrap();
        assert!((single - &conn.matrices[1]).norm() < 1e-14);
        let canc = evaluate_fword(&vec![(0, false), (0, true)], &conn).unwrap();
        assert!((canc - CMatrix::identity(2, 2)).norm() < 1e-12);
        // anti-order: word (g0, g1) evaluates to m1 * m0
        let w = evaluate_fword(&vec![(0, false), (1, false)], &conn).unwrap();
        let want = &conn.matrices[1] * &conn.matrices[0];
        assert!((w - want).norm() < 1e-13);
    }

    #[test]
    fn gauge_invariance_of_wilson_loops() {
        use crate::graph::lattice_system;
        let sys = lattice_system(2, 1, 1).unwrap();
        let k = 1usize;
        let gens = &sys.generating_sets[k];
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let conn =
            ConnectionAssignment::new(gens.iter().map(|_| random_su2(&mut rng)).collect()).unwrap();
        let g = GaugeTransform {
            values: sys.graphs[k]
                .vertices
                .iter()
                .map(|v| (v.clone(), random_su2(&mut rng)))
                .collect(),
        };
        let conn2 = gauge_act(&g, &conn, gens).unwrap();
        let base = sys.graphs[k].vertices[0].clone();
        for l in crate::graph::loop_basis(&sys.graphs[k], &base).unwrap() {
            let h1 = evaluate_holonomy(&sys, k, &l, &conn).unwrap();
            let h2 = evaluate_holonomy(&sys, k, &l, &conn2).unwrap();
            // conjugation by g(base): traces agree
            let t1: Complex64 = h1.trace();
            let t2: Complex64 = h2.trace();
            assert!((t1 - t2).norm() < 1e-12);
            let gb = &g.values[&base];
            assert!((gb * h1 * gb.adjoint() - h2).norm() < 1e-12);
        }
        // abelian case: holonomies themselves invariant
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mut u1 = || {
            let t = rng.gen::<f64>() * std::f64::consts::TAU;
            CMatrix::from_row_slice(1, 1, &[Complex64::new(t.cos(), t.sin())])
        };
        let conn_a = ConnectionAssignment::new(gens.iter().map(|_| u1()).collect()).unwrap();
        let ga = GaugeTransform {
            values: sys.graphs[k].vertices.iter().map(|v| (v.clone(), u1())).collect(),
        };
        let conn_b = gauge_act(&ga, &conn_a, gens).unwrap();
        for l in crate::graph::loop_basis(&sys.graphs[k], &base).unwrap() {
            let h1 = evaluate_holonomy(&sys, k, &l, &conn_a).unwrap();
            let h2 = evaluate_holonomy(&sys, k, &l, &conn_b).unwrap();
            assert!((h1 - h2).norm() < 1e-12);
        }
    }

    #[test]
    fn projection_compatibility() {
        let mut sys = RefinementSystem::new(
            crate::graph::DirectedGraph::new(
                vec!["ν".into()],
                vec![crate::graph::Edge { id: "e".into(), src: "ν".into(), dst: "ν".into() }],
            )
            .unwrap(),
        )
        .unwrap();
        sys.subdivide(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let conn2 =
            ConnectionAssignment::new(vec![random_su2(&mut rng), random_su2(&mut rng)]).unwrap();
        let conn1 = project_connection(&conn2, &sys, 1).unwrap();
        assert_eq!(conn1.matrices.len(), 1);
        assert!((&conn1.matrices[0] - &conn2.matrices[0]).norm() < 1e-15);
        // embedded loop evaluates identically
        let e_loop = GroupoidWord::single(&sys.graphs[0], "e").unwrap();
        let embedded = sys.refinements[0].map_word(&e_loop).unwrap();
        let h_lo = evaluate_holonomy(&sys, 0, &e_loop, &conn1).unwrap();
        let h_hi = evaluate_holonomy(&sys, 1, &embedded, &conn2).unwrap();
        assert!((h_lo - h_hi).norm() < 1e-13);
        assert!(project_connection(&conn2, &sys, 5).is_err());
        // top level is the identity restriction
        let top = project_connection(&conn2, &sys, 2).unwrap();
        assert_eq!(top.matrices.len(), 2);
    }

    #[test]
    fn torus_edge_cross_block_entries_vanish() {
        let edge = EdgeSpace::new(RootDatum::torus2(), 2, SpinorModule::irreducible(2)).unwrap();
        assert_eq!(edge.rep_dim, 2);
        let (m, clip) = edge.coordinate_mult(0, 1, false).unwrap();
        assert_eq!(m.norm(), 0.0);
        assert_eq!(clip.raw, 0.0);
        let (m00, _) = edge.coordinate_mult(0, 0, false).unwrap();
        let (m11, _) = edge.coordinate_mult(1, 1, false).unwrap();
        // the two circle shifts commute
        assert!((&m00 * &m11 - &m11 * &m00).norm() < 1e-14);
    }
}

// A DMatrix re-export keeps signatures uniform for callers.
pub type _Dense = DMatrix<Complex64>;
