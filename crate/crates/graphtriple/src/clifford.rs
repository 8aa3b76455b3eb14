//! The Clifford algebra of an orthonormal basis, its cyclic modules, the
//! normalized Clifford trace, the quadratic lift of the Lie bracket, and
//! the chirality element.
//!
//! Elements are stored as complex (or exact) combinations of basis
//! monomials `e_{i_1} ... e_{i_k}` with strictly increasing indices; the
//! defining relation is `e_i e_j + e_j e_i = 2 delta_ij`.

use std::collections::BTreeMap;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::lie::{
    casimir_scalar, rational_to_f64, weyl_dim, CMatrix, Factor, IrrepLabel, Rational, RootDatum,
    StructureConstants,
};

/// Scalar requirements for Clifford coefficients.
pub trait CliffScalar:
    Clone
    + PartialEq
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + Zero
    + One
{
}

impl CliffScalar for Complex64 {}

/// Exact scalar `a + b*s` with `s^2` a fixed rational, enough to verify the
/// su2 bracket lift exactly (the structure constant scale is a square root).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QExt {
    pub a: Rational,
    pub b: Rational,
    /// The rational value of s^2. Ignored when `b == 0`.
    pub s2: Rational,
}

impl QExt {
    pub fn rational(a: Rational) -> Self {
        QExt { a, b: Rational::zero(), s2: Rational::zero() }
    }

    pub fn radical(b: Rational, s2: Rational) -> Self {
        QExt { a: Rational::zero(), b, s2 }
    }

    fn join_s2(x: &Self, y: &Self) -> Rational {
        if x.b.is_zero() {
            y.s2
        } else if y.b.is_zero() {
            x.s2
        } else {
            assert_eq!(x.s2, y.s2, "mixed radicals");
            x.s2
        }
    }
}

impl Add for QExt {
    type Output = QExt;
    fn add(self, rhs: QExt) -> QExt {
        let s2 = QExt::join_s2(&self, &rhs);
        QExt { a: self.a + rhs.a, b: self.b + rhs.b, s2 }
    }
}

impl Sub for QExt {
    type Output = QExt;
    fn sub(self, rhs: QExt) -> QExt {
        self + (-rhs)
    }
}

impl Neg for QExt {
    type Output = QExt;
    fn neg(self) -> QExt {
        QExt { a: -self.a, b: -self.b, s2: self.s2 }
    }
}

impl Mul for QExt {
    type Output = QExt;
    fn mul(self, rhs: QExt) -> QExt {
        let s2 = QExt::join_s2(&self, &rhs);
        QExt {
            a: self.a * rhs.a + self.b * rhs.b * s2,
            b: self.a * rhs.b + self.b * rhs.a,
            s2,
        }
    }
}

impl Zero for QExt {
    fn zero() -> Self {
        QExt::rational(Rational::zero())
    }
    fn is_zero(&self) -> bool {
        self.a.is_zero() && self.b.is_zero()
    }
}

impl One for QExt {
    fn one() -> Self {
        QExt::rational(Rational::one())
    }
}

impl CliffScalar for QExt {}

/// A Clifford algebra element over `q` generators.
#[derive(Debug, Clone, PartialEq)]
pub struct CliffordElement<T: CliffScalar = Complex64> {
    pub q: usize,
    /// Monomial (strictly increasing 1-based indices) to coefficient.
    pub terms: BTreeMap<Vec<u8>, T>,
}

impl<T: CliffScalar> CliffordElement<T> {
    pub fn zero(q: usize) -> Self {
        CliffordElement { q, terms: BTreeMap::new() }
    }

    pub fn scalar(q: usize, c: T) -> Self {
        let mut e = Self::zero(q);
        e.add_term(vec![], c);
        e
    }

    pub fn one_elem(q: usize) -> Self {
        Self::scalar(q, T::one())
    }

    /// Single generator `e_i` (1-based).
    pub fn generator(q: usize, i: u8) -> Self {
        assert!(i >= 1 && (i as usize) <= q);
        let mut e = Self::zero(q);
        e.add_term(vec![i], T::one());
        e
    }

    pub fn monomial(q: usize, idx: Vec<u8>, c: T) -> Self {
        assert!(idx.windows(2).all(|w| w[0] < w[1]), "monomial not strictly increasing");
        let mut e = Self::zero(q);
        e.add_term(idx, c);
        e
    }

    pub fn add_term(&mut self, idx: Vec<u8>, c: T) {
        let entry = self.terms.entry(idx.clone()).or_insert_with(T::zero);
        *entry = entry.clone() + c;
        if entry.is_zero() {
            self.terms.remove(&idx);
        }
    }

    pub fn scale(&self, c: T) -> Self {
        let mut out = Self::zero(self.q);
        for (idx, v) in &self.terms {
            out.add_term(idx.clone(), v.clone() * c.clone());
        }
        out
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.q != other.q {
            return Err(Error::Rejected("mismatched generator counts".into()));
        }
        let mut out = self.clone();
        for (idx, v) in &other.terms {
            out.add_term(idx.clone(), v.clone());
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(-T::one()))
    }

    /// Coefficient of the empty monomial; the normalized Clifford trace.
    pub fn trace(&self) -> T {
        self.terms.get(&vec![]).cloned().unwrap_or_else(T::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }
}

/// Multiply two basis monomials, returning (sign, reduced monomial).
fn monomial_product(a: &[u8], b: &[u8]) -> (i8, Vec<u8>) {
    let mut word: Vec<u8> = a.iter().chain(b.iter()).copied().collect();
    let mut sign = 1i8;
    // Insertion sort with anticommutation signs; equal neighbors square to 1.
    loop {
        let mut changed = false;
        let mut k = 0;
        while k + 1 < word.len() {
            if word[k] > word[k + 1] {
                word.swap(k, k + 1);
                sign = -sign;
                changed = true;
            } else if word[k] == word[k + 1] {
                word.remove(k);
                word.remove(k);
                changed = true;
                if k > 0 {
                    k -= 1;
                }
                continue;
            }
            k += 1;
        }
        if !changed {
            break;
        }
    }
    (sign, word)
}

/// Bilinear associative product with `e_i e_j + e_j e_i = 2 delta_ij`.
pub fn clifford_product<T: CliffScalar>(
    x: &CliffordElement<T>,
    y: &CliffordElement<T>,
) -> Result<CliffordElement<T>> {
    if x.q != y.q {
        return Err(Error::Rejected("mismatched generator counts".into()));
    }
    let mut out = CliffordElement::zero(x.q);
    for (ia, ca) in &x.terms {
        for (ib, cb) in &y.terms {
            let (sign, idx) = monomial_product(ia, ib);
            let mut c = ca.clone() * cb.clone();
            if sign < 0 {
                c = -c;
            }
            out.add_term(idx, c);
        }
    }
    Ok(out)
}

/// Normalized Clifford trace: 1 on the unit, 0 on every nonempty monomial.
pub fn clifford_trace<T: CliffScalar>(x: &CliffordElement<T>) -> T {
    x.trace()
}

/// The quadratic lift `pi(e_a) = -(1/4) sum_{ij} c_{ij}^a e_i e_j` as a
/// complex Clifford element, from numeric structure constants.
pub fn pi_map(sc: &StructureConstants, a: usize) -> CliffordElement<Complex64> {
    let q = sc.basis_dim;
    let mut out = CliffordElement::zero(q);
    for i in 0..q {
        for j in 0..q {
            let c = sc.c[i][j][a];
            if c == 0.0 {
                continue;
            }
            let coeff = Complex64::new(-c / 4.0, 0.0);
            // i != j whenever c != 0 (antisymmetry); reduce e_i e_j.
            let (sign, idx) = monomial_product(&[i as u8 + 1], &[j as u8 + 1]);
            let mut v = coeff;
            if sign < 0 {
                v = -v;
            }
            out.add_term(idx, v);
        }
    }
    out
}

/// Exact lift for a single su2 factor with structure scale `s`, `s^2 = s2`:
/// `pi(e_a) = -(s/2) e_i e_j` for (i, j, a) cyclic, coefficients in Q(s).
pub fn pi_map_su2_exact(s2: Rational, a: usize) -> CliffordElement<QExt> {
    assert!(a < 3);
    let (i, j) = match a {
        0 => (1u8, 2u8), // pi(e_1) = -(s/2) e_2 e_3
        1 => (2u8, 0u8),
        _ => (0u8, 1u8),
    };
    let coeff = QExt::radical(-Rational::new(1, 2), s2);
    let (sign, idx) = monomial_product(&[i + 1], &[j + 1]);
    let c = if sign < 0 { -coeff } else { coeff };
    CliffordElement::monomial(3, idx, c)
}

/// Exact bracket `[e_a, e_b] = s * eps_{abc} e_c` as a linear element.
pub fn su2_bracket_exact(s2: Rational, a: usize, b: usize) -> CliffordElement<QExt> {
    let mut out = CliffordElement::zero(3);
    let eps = |a: usize, b: usize, c: usize| -> i64 {
        match (a, b, c) {
            (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1,
            (1, 0, 2) | (2, 1, 0) | (0, 2, 1) => -1,
            _ => 0,
        }
    };
    for c in 0..3 {
        let e = eps(a, b, c);
        if e != 0 {
            out.add_term(vec![c as u8 + 1], QExt::radical(Rational::from_integer(e), s2));
        }
    }
    out
}

/// Exact residual of the homomorphism property
/// `[pi(e_a), pi(e_b)] - pi([e_a, e_b])` for the su2 factor; zero in Q(s).
pub fn su2_pi_homomorphism_residual(s2: Rational) -> CliffordElement<QExt> {
    for a in 0..3 {
        for b in 0..3 {
            let pa = pi_map_su2_exact(s2, a);
            let pb = pi_map_su2_exact(s2, b);
            let comm = clifford_product(&pa, &pb)
                .unwrap()
                .sub(&clifford_product(&pb, &pa).unwrap())
                .unwrap();
            // pi of the bracket: bracket = sum_c s eps e_c, pi linear
            let bracket = su2_bracket_exact(s2, a, b);
            let mut pi_bracket = CliffordElement::zero(3);
            for (idx, coeff) in &bracket.terms {
                assert_eq!(idx.len(), 1);
                let c = idx[0] as usize - 1;
                let term = pi_map_su2_exact(s2, c).scale(*coeff);
                pi_bracket = pi_bracket.add(&term).unwrap();
            }
            let resid = comm.sub(&pi_bracket).unwrap();
            if !resid.is_zero() {
                return resid;
            }
        }
    }
    CliffordElement::zero(3)
}

/// Cyclic module of the Clifford algebra.
#[derive(Debug, Clone)]
pub struct SpinorModule {
    pub q: usize,
    pub dimension: usize,
    /// Self-adjoint generator matrices squaring to the identity.
    pub generator_matrices: Vec<CMatrix>,
    /// Normalized cyclic vector.
    pub cyclic_vector: DVector<Complex64>,
    pub kind: SpinorKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpinorKind {
    /// S = Cl(g) under left multiplication, dimension 2^q.
    Regular,
    /// Irreducible gamma-matrix module, dimension 2^(q/2 rounded down).
    Irreducible,
}

fn pauli() -> [CMatrix; 3] {
    let z = Complex64::new(0.0, 0.0);
    let o = Complex64::new(1.0, 0.0);
    let i = Complex64::new(0.0, 1.0);
    [
        CMatrix::from_row_slice(2, 2, &[z, o, o, z]),
        CMatrix::from_row_slice(2, 2, &[z, -i, i, z]),
        CMatrix::from_row_slice(2, 2, &[o, z, z, -o]),
    ]
}

fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

impl SpinorModule {
    /// S = Cl(g) acting on itself by left multiplication; cyclic vector is 1.
    pub fn regular(q: usize) -> Self {
        let dim = 1usize << q;
        // Basis: subsets of {1..q} ordered by bitmask value; bit (i-1) set
        // means e_i present; monomial indices increasing.
        let mask_to_mono = |mask: usize| -> Vec<u8> {
            (0..q).filter(|b| mask >> b & 1 == 1).map(|b| b as u8 + 1).collect()
        };
        let mut gens = Vec::with_capacity(q);
        for i in 1..=q {
            let mut m = CMatrix::zeros(dim, dim);
            for mask in 0..dim {
                let (sign, prod) = monomial_product(&[i as u8], &mask_to_mono(mask));
                let target: usize = prod.iter().map(|&b| 1usize << (b - 1)).sum();
                m[(target, mask)] = Complex64::new(sign as f64, 0.0);
            }
            gens.push(m);
        }
        let mut cyc = DVector::zeros(dim);
        cyc[0] = Complex64::new(1.0, 0.0);
        SpinorModule {
            q,
            dimension: dim,
            generator_matrices: gens,
            cyclic_vector: cyc,
            kind: SpinorKind::Regular,
        }
    }

    /// Irreducible gamma-matrix module of dimension 2^floor(q/2).
    pub fn irreducible(q: usize) -> Self {
        let k = q / 2;
        let dim = 1usize << k;
        let [s1, s2, s3] = pauli();
        let mut gens: Vec<CMatrix> = Vec::with_capacity(q);
        for a in 0..k {
            for sig in [&s1, &s2] {
                let mut m = CMatrix::identity(1, 1);
                for b in 0..k {
                    let factor = if b < a {
                        s3.clone()
                    } else if b == a {
                        (*sig).clone()
                    } else {
                        CMatrix::identity(2, 2)
                    };
                    m = kron(&m, &factor);
                }
                gens.push(m);
            }
        }
        if q % 2 == 1 {
            let mut m = CMatrix::identity(1, 1);
            for _ in 0..k {
                m = kron(&m, &s3);
            }
            gens.push(m);
        }
        // Interleave so generator order matches index order (pairs were pushed
        // as (2a+1, 2a+2) already in order; odd tail last). Order is correct.
        let mut cyc = DVector::zeros(dim);
        cyc[0] = Complex64::new(1.0, 0.0);
        SpinorModule {
            q,
            dimension: dim,
            generator_matrices: gens,
            cyclic_vector: cyc,
            kind: SpinorKind::Irreducible,
        }
    }

    /// Matrix of a Clifford element in this module.
    pub fn rep(&self, x: &CliffordElement<Complex64>) -> CMatrix {
        let dim = self.dimension;
        let mut out = CMatrix::zeros(dim, dim);
        for (idx, c) in &x.terms {
            let mut m = CMatrix::identity(dim, dim);
            for &i in idx {
                m = &m * &self.generator_matrices[i as usize - 1];
            }
            out += m * *c;
        }
        out
    }

    /// Max residual of the anticommutation relations among generator matrices.
    pub fn relation_residual(&self) -> f64 {
        let dim = self.dimension;
        let id = CMatrix::identity(dim, dim);
        let mut worst = 0.0_f64;
        for i in 0..self.q {
            for j in 0..self.q {
                let gi = &self.generator_matrices[i];
                let gj = &self.generator_matrices[j];
                let anti = gi * gj + gj * gi;
                let expect = if i == j { &id * Complex64::new(2.0, 0.0) } else { CMatrix::zeros(dim, dim) };
                worst = worst.max((anti - expect).norm());
            }
        }
        worst
    }

    /// Whether the orbit of the cyclic vector under all monomials spans S.
    pub fn is_cyclic(&self) -> bool {
        let dim = self.dimension;
        let mut vecs: Vec<DVector<Complex64>> = Vec::new();
        for mask in 0..(1usize << self.q) {
            let mono: Vec<u8> =
                (0..self.q).filter(|b| mask >> b & 1 == 1).map(|b| b as u8 + 1).collect();
            let elem = CliffordElement::monomial(self.q, mono, Complex64::new(1.0, 0.0));
            vecs.push(&self.rep(&elem) * &self.cyclic_vector);
        }
        let mut m = DMatrix::zeros(dim, vecs.len());
        for (c, v) in vecs.iter().enumerate() {
            m.set_column(c, v);
        }
        m.rank(1e-9) == dim
    }
}

/// The chirality element `i^(q/2) e_1 ... e_q` as a matrix (q even).
pub fn chirality(module: &SpinorModule) -> Result<CMatrix> {
    if module.q % 2 != 0 {
        return Err(Error::Parity(format!("chirality needs even generator count, got {}", module.q)));
    }
    let k = module.q / 2;
    let mut m = CMatrix::identity(module.dimension, module.dimension);
    for g in &module.generator_matrices {
        m = &m * g;
    }
    let phase = Complex64::new(0.0, 1.0).powu(k as u32);
    Ok(m * phase)
}

/// Report from checking that the module decomposes into rho-representations
/// under the lifted Lie algebra action.
#[derive(Debug, Clone)]
pub struct RhoDecompositionReport {
    pub block_count: usize,
    pub casimir_value: f64,
    pub expected_casimir: f64,
    pub residual: f64,
}

/// Checks that `x -> rep(pi(x))` has Casimir equal to the Casimir of the
/// rho-representation on all of S (Kostant's decomposition at desk scale).
pub fn rho_decomposition_check(
    datum: &RootDatum,
    module: &SpinorModule,
) -> Result<RhoDecompositionReport> {
    let q = datum.algebra_dim()?;
    if q != module.q {
        return Err(Error::Rejected(format!(
            "module has {} generators, algebra has dimension {q}",
            module.q
        )));
    }
    let sc = datum.structure_constants();
    let dim = module.dimension;
    let mut cas = CMatrix::zeros(dim, dim);
    for a in 0..q {
        let la = module.rep(&pi_map(&sc, a));
        cas -= &la * &la;
    }
    let rho_label = IrrepLabel::new(
        datum
            .factors
            .iter()
            .map(|f| match f {
                Factor::Su2 { .. } => 1i64,
                _ => 0i64,
            })
            .collect(),
    );
    let expected = rational_to_f64(casimir_scalar(datum, &rho_label)?);
    let residual = (&cas - CMatrix::identity(dim, dim) * Complex64::new(expected, 0.0)).norm();
    let rho_dim = weyl_dim(datum, &rho_label)? as usize;
    Ok(RhoDecompositionReport {
        block_count: dim / rho_dim,
        casimir_value: if dim > 0 { cas[(0, 0)].re } else { 0.0 },
        expected_casimir: expected,
        residual,
    })
}
