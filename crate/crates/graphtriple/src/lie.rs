//! Root-datum arithmetic and irreducible representation matrices for
//! U(1), SU(2) and finite products, with exact rational Casimir values.
//!
//! Weight coordinates are integers: `n` for a circle factor, `2j` for an
//! su2 factor. The invariant metric on each factor is a positive rational
//! multiple of the reference metric (`x*y` on the circle Lie algebra,
//! minus the Killing form on su2). With the Killing normalization the
//! half-sum of positive roots has squared norm 1/8 on su2.

use nalgebra::DMatrix;
use num_complex::Complex64;
use num_rational::Ratio;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};

pub type Rational = Ratio<i64>;
pub type CMatrix = DMatrix<Complex64>;

/// One simple factor of the group.
#[derive(Debug, Clone, PartialEq)]
pub enum Factor {
    /// U(1) with metric `scale * x * y` on its Lie algebra.
    Circle { scale: Rational },
    /// SU(2) with metric `scale * (-Killing)`.
    Su2 { scale: Rational },
    /// A generic root datum given by positive roots and a Gram matrix on
    /// weight space. Supports Casimir arithmetic and Weyl dimensions only.
    Generic {
        rank: usize,
        positive_roots: Vec<Vec<Rational>>,
        gram: Vec<Vec<Rational>>,
    },
}

impl Factor {
    pub fn circle_unit() -> Self {
        Factor::Circle { scale: Rational::one() }
    }

    pub fn su2_killing() -> Self {
        Factor::Su2 { scale: Rational::one() }
    }

    /// Number of weight coordinates this factor consumes.
    pub fn weight_rank(&self) -> usize {
        match self {
            Factor::Circle { .. } | Factor::Su2 { .. } => 1,
            Factor::Generic { rank, .. } => *rank,
        }
    }

    /// Dimension of the Lie algebra of the factor.
    pub fn algebra_dim(&self) -> Option<usize> {
        match self {
            Factor::Circle { .. } => Some(1),
            Factor::Su2 { .. } => Some(3),
            Factor::Generic { .. } => None,
        }
    }
}

/// Invariant metric, positive roots and rho for a finite product of factors.
#[derive(Debug, Clone, PartialEq)]
pub struct RootDatum {
    pub factors: Vec<Factor>,
}

/// Dominant weight, coordinates laid out factor by factor.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct IrrepLabel {
    pub weight: Vec<i64>,
}

impl IrrepLabel {
    pub fn new(weight: Vec<i64>) -> Self {
        IrrepLabel { weight }
    }

    pub fn zero(datum: &RootDatum) -> Self {
        IrrepLabel { weight: vec![0; datum.weight_rank()] }
    }

    pub fn is_zero(&self) -> bool {
        self.weight.iter().all(|&c| c == 0)
    }
}

/// Structure constants in an orthonormal basis: `[e_i, e_j] = sum_k c[i][j][k] e_k`.
#[derive(Debug, Clone)]
pub struct StructureConstants {
    pub basis_dim: usize,
    pub c: Vec<Vec<Vec<f64>>>,
    /// Exact form per su2 factor: `c_{ijk} = s * eps_{ijk}` with `s^2` rational.
    /// Entries are `(basis offset, s_squared)` for each su2 factor.
    pub su2_scales: Vec<(usize, Rational)>,
}

impl StructureConstants {
    /// Max residual of the Jacobi identity over all index triples.
    pub fn jacobi_residual(&self) -> f64 {
        let q = self.basis_dim;
        let mut worst = 0.0_f64;
        for i in 0..q {
            for j in 0..q {
                for k in 0..q {
                    for m in 0..q {
                        let mut acc = 0.0;
                        for l in 0..q {
                            acc += self.c[i][j][l] * self.c[l][k][m]
                                + self.c[j][k][l] * self.c[l][i][m]
                                + self.c[k][i][l] * self.c[l][j][m];
                        }
                        worst = worst.max(acc.abs());
                    }
                }
            }
        }
        worst
    }

    /// Max deviation from total antisymmetry in all three indices.
    pub fn antisymmetry_residual(&self) -> f64 {
        let q = self.basis_dim;
        let mut worst = 0.0_f64;
        for i in 0..q {
            for j in 0..q {
                for k in 0..q {
                    worst = worst.max((self.c[i][j][k] + self.c[j][i][k]).abs());
                    worst = worst.max((self.c[i][j][k] + self.c[i][k][j]).abs());
                }
            }
        }
        worst
    }
}

fn check_positive_scale(scale: Rational) -> Result<()> {
    if scale <= Rational::zero() {
        return Err(Error::Rejected(format!("metric scale must be positive, got {scale}")));
    }
    Ok(())
}

impl RootDatum {
    pub fn new(factors: Vec<Factor>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::Rejected("empty factor list".into()));
        }
        for f in &factors {
            match f {
                Factor::Circle { scale } | Factor::Su2 { scale } => check_positive_scale(*scale)?,
                Factor::Generic { rank, positive_roots, gram } => {
                    if gram.len() != *rank || gram.iter().any(|r| r.len() != *rank) {
                        return Err(Error::Rejected("gram matrix shape mismatch".into()));
                    }
                    if positive_roots.iter().any(|r| r.len() != *rank) {
                        return Err(Error::Rejected("positive root length mismatch".into()));
                    }
                }
            }
        }
        Ok(RootDatum { factors })
    }

    pub fn circle() -> Self {
        RootDatum { factors: vec![Factor::circle_unit()] }
    }

    pub fn su2_killing() -> Self {
        RootDatum { factors: vec![Factor::su2_killing()] }
    }

    pub fn torus2() -> Self {
        RootDatum { factors: vec![Factor::circle_unit(), Factor::circle_unit()] }
    }

    pub fn weight_rank(&self) -> usize {
        self.factors.iter().map(Factor::weight_rank).sum()
    }

    /// Dimension of the Lie algebra, when all factors are circle/su2.
    pub fn algebra_dim(&self) -> Result<usize> {
        self.factors
            .iter()
            .map(|f| {
                f.algebra_dim()
                    .ok_or_else(|| Error::Capability("generic factor has no matrix model".into()))
            })
            .sum()
    }

    /// Offsets of each factor's coordinates inside a weight vector.
    fn weight_offsets(&self) -> Vec<usize> {
        let mut offs = Vec::with_capacity(self.factors.len());
        let mut acc = 0;
        for f in &self.factors {
            offs.push(acc);
            acc += f.weight_rank();
        }
        offs
    }

    pub fn check_label(&self, lam: &IrrepLabel) -> Result<()> {
        if lam.weight.len() != self.weight_rank() {
            return Err(Error::Rejected(format!(
                "weight has {} coordinates, datum expects {}",
                lam.weight.len(),
                self.weight_rank()
            )));
        }
        for (f, off) in self.factors.iter().zip(self.weight_offsets()) {
            match f {
                Factor::Circle { .. } => {}
                Factor::Su2 { .. } => {
                    if lam.weight[off] < 0 {
                        return Err(Error::Rejected(format!(
                            "su2 coordinate {} not dominant",
                            lam.weight[off]
                        )));
                    }
                }
                Factor::Generic { rank, positive_roots, gram } => {
                    let coords: Vec<Rational> = lam.weight[off..off + rank]
                        .iter()
                        .map(|&c| Rational::from_integer(c))
                        .collect();
                    for alpha in positive_roots {
                        if gram_pair(gram, &coords, alpha) < Rational::zero() {
                            return Err(Error::Rejected("weight not dominant".into()));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Exact inner product of two weights in the metric dual to the chosen
    /// invariant metric.
    pub fn weight_inner(&self, a: &[Rational], b: &[Rational]) -> Rational {
        let mut acc = Rational::zero();
        for (f, off) in self.factors.iter().zip(self.weight_offsets()) {
            match f {
                Factor::Circle { scale } => {
                    acc += a[off] * b[off] / scale;
                }
                Factor::Su2 { scale } => {
                    // |2j|^2 = (2j)^2 / (8 scale): rho = coordinate 1 has norm^2 1/8
                    // under the Killing normalization.
                    acc += a[off] * b[off] / (Rational::from_integer(8) * scale);
                }
                Factor::Generic { rank, gram, .. } => {
                    acc += gram_pair(gram, &a[off..off + rank], &b[off..off + rank]);
                }
            }
        }
        acc
    }

    /// Half sum of positive roots, as exact weight coordinates.
    pub fn rho(&self) -> Vec<Rational> {
        let mut out = vec![Rational::zero(); self.weight_rank()];
        for (f, off) in self.factors.iter().zip(self.weight_offsets()) {
            match f {
                Factor::Circle { .. } => {}
                Factor::Su2 { .. } => out[off] = Rational::one(),
                Factor::Generic { rank, positive_roots, .. } => {
                    for alpha in positive_roots {
                        for (s, a) in out[off..off + rank].iter_mut().zip(alpha) {
                            *s += *a / Rational::from_integer(2);
                        }
                    }
                }
            }
        }
        out
    }

    /// Positive roots, each as an exact weight vector.
    pub fn positive_roots(&self) -> Vec<Vec<Rational>> {
        let rank = self.weight_rank();
        let mut out = Vec::new();
        for (f, off) in self.factors.iter().zip(self.weight_offsets()) {
            match f {
                Factor::Circle { .. } => {}
                Factor::Su2 { .. } => {
                    let mut alpha = vec![Rational::zero(); rank];
                    alpha[off] = Rational::from_integer(2);
                    out.push(alpha);
                }
                Factor::Generic { rank: r, positive_roots, .. } => {
                    for root in positive_roots {
                        let mut alpha = vec![Rational::zero(); rank];
                        alpha[off..off + r].clone_from_slice(root);
                        out.push(alpha);
                    }
                }
            }
        }
        out
    }
}

fn gram_pair(gram: &[Vec<Rational>], a: &[Rational], b: &[Rational]) -> Rational {
    let mut acc = Rational::zero();
    for (i, ai) in a.iter().enumerate() {
        for (j, bj) in b.iter().enumerate() {
            acc += *ai * gram[i][j] * *bj;
        }
    }
    acc
}

/// Casimir eigenvalue `|lam+rho|^2 - |rho|^2` on the irrep with highest
/// weight `lam`, exact when the metric scales are rational.
pub fn casimir_scalar(datum: &RootDatum, lam: &IrrepLabel) -> Result<Rational> {
    datum.check_label(lam)?;
    let rho = datum.rho();
    let lam_r: Vec<Rational> = lam.weight.iter().map(|&c| Rational::from_integer(c)).collect();
    let mut shifted = lam_r;
    for (s, r) in shifted.iter_mut().zip(&rho) {
        *s += *r;
    }
    Ok(datum.weight_inner(&shifted, &shifted) - datum.weight_inner(&rho, &rho))
}

/// `|rho|^2`; equals dim(g)/24 summed over Killing-normalized semi-simple factors.
pub fn rho_norm_sq(datum: &RootDatum) -> Rational {
    let rho = datum.rho();
    datum.weight_inner(&rho, &rho)
}

/// Dimension of the irrep with highest weight `lam` (Weyl dimension formula).
pub fn weyl_dim(datum: &RootDatum, lam: &IrrepLabel) -> Result<u64> {
    datum.check_label(lam)?;
    let rho = datum.rho();
    let lam_r: Vec<Rational> = lam.weight.iter().map(|&c| Rational::from_integer(c)).collect();
    let mut shifted = lam_r;
    for (s, r) in shifted.iter_mut().zip(&rho) {
        *s += *r;
    }
    let mut num = Rational::one();
    let mut den = Rational::one();
    for alpha in datum.positive_roots() {
        num *= datum.weight_inner(&shifted, &alpha);
        den *= datum.weight_inner(&rho, &alpha);
    }
    let q = num / den;
    debug_assert!(q.is_integer() && q.is_positive());
    Ok(q.to_integer() as u64)
}

/// Spin matrices `J_z, J_+, J_-`-derived cartesian generators for spin `j = w/2`.
/// Returns `[J_x, J_y, J_z]` as hermitian matrices of size `w+1`.
fn spin_matrices(w: i64) -> [CMatrix; 3] {
    let dim = (w + 1) as usize;
    let j = w as f64 / 2.0;
    let mut jp = CMatrix::zeros(dim, dim); // J_+
    let mut jz = CMatrix::zeros(dim, dim);
    // Basis ordered m = j, j-1, ..., -j.
    for (row, _) in (0..dim).enumerate() {
        let m = j - row as f64;
        jz[(row, row)] = Complex64::new(m, 0.0);
        if row + 1 < dim {
            let mlow = m - 1.0;
            let amp = (j * (j + 1.0) - mlow * (mlow + 1.0)).sqrt();
            jp[(row, row + 1)] = Complex64::new(amp, 0.0);
        }
    }
    let jm = jp.adjoint();
    let jx = (&jp + &jm) * Complex64::new(0.5, 0.0);
    let jy = (&jp - &jm) * Complex64::new(0.0, -0.5);
    [jx, jy, jz]
}

/// The matrices of the orthonormal basis elements acting on `V_lam`,
/// skew-hermitian, in the same basis order as `structure_constants`.
pub fn irrep_matrices(datum: &RootDatum, lam: &IrrepLabel) -> Result<Vec<CMatrix>> {
    datum.check_label(lam)?;
    let dim = weyl_dim(datum, lam)? as usize;
    let mut out = Vec::new();
    let mut off = 0usize;
    let mut left_dim = 1usize;
    // Precompute factor dims for tensor placement.
    let fdims: Vec<usize> = datum
        .factors
        .iter()
        .zip(datum.weight_offsets())
        .map(|(f, o)| match f {
            Factor::Circle { .. } => 1usize,
            Factor::Su2 { .. } => (lam.weight[o] + 1) as usize,
            Factor::Generic { .. } => 0,
        })
        .collect();
    for (fi, f) in datum.factors.iter().enumerate() {
        let right_dim: usize = fdims[fi + 1..].iter().product();
        match f {
            Factor::Circle { scale } => {
                let n = lam.weight[off] as f64;
                let s = rational_to_f64(*scale);
                // Orthonormal basis element is (1/sqrt(scale)) d/dtheta.
                let val = Complex64::new(0.0, n / s.sqrt());
                let m = CMatrix::from_diagonal_element(1, 1, val);
                out.push(kron3_scalar(left_dim, &m, right_dim, dim));
                off += 1;
            }
            Factor::Su2 { scale } => {
                let w = lam.weight[off];
                let k = rational_to_f64(*scale);
                let norm = 1.0 / (2.0 * k).sqrt();
                for jm in spin_matrices(w) {
                    let m = jm * Complex64::new(0.0, -norm);
                    out.push(kron3_scalar(left_dim, &m, right_dim, dim));
                }
                off += 1;
            }
            Factor::Generic { .. } => {
                return Err(Error::Capability(
                    "irrep matrices are only implemented for circle and su2 factors".into(),
                ));
            }
        }
        left_dim *= fdims[fi];
    }
    Ok(out)
}

impl RootDatum {
    /// Structure constants of the orthonormal basis; zeros on abelian factors,
    /// `s * eps_{ijk}` with `s = 1/sqrt(2*scale)` on su2 factors.
    pub fn structure_constants(&self) -> StructureConstants {
        let dims: Vec<usize> = self.factors.iter().map(|f| f.algebra_dim().unwrap_or(0)).collect();
        let q: usize = dims.iter().sum();
        let mut c = vec![vec![vec![0.0; q]; q]; q];
        let mut su2_scales = Vec::new();
        let mut base = 0usize;
        for (f, d) in self.factors.iter().zip(&dims) {
            if let Factor::Su2 { scale } = f {
                let s2 = Rational::one() / (Rational::from_integer(2) * scale);
                su2_scales.push((base, s2));
                let s = rational_to_f64(s2).sqrt();
                for (i, j, k, sign) in [
                    (0, 1, 2, 1.0),
                    (1, 2, 0, 1.0),
                    (2, 0, 1, 1.0),
                    (1, 0, 2, -1.0),
                    (2, 1, 0, -1.0),
                    (0, 2, 1, -1.0),
                ] {
                    c[base + i][base + j][base + k] = sign * s;
                }
            }
            base += d;
        }
        StructureConstants { basis_dim: q, c, su2_scales }
    }
}

pub fn structure_constants(datum: &RootDatum) -> StructureConstants {
    datum.structure_constants()
}

pub fn rational_to_f64(r: Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// `I_left (x) m (x) I_right`, asserting the resulting size.
fn kron3_scalar(left: usize, m: &CMatrix, right: usize, total: usize) -> CMatrix {
    let md = m.nrows();
    assert_eq!(left * md * right, total);
    let mut out = CMatrix::zeros(total, total);
    for a in 0..left {
        for i in 0..md {
            for ip in 0..md {
                let v = m[(i, ip)];
                if v == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for b in 0..right {
                    out[((a * md + i) * right + b, (a * md + ip) * right + b)] = v;
                }
            }
        }
    }
    out
}

/// All dominant weights with per-factor coordinates bounded by `cutoff`.
pub fn labels_up_to(datum: &RootDatum, cutoff: i64) -> Vec<IrrepLabel> {
    let mut out: Vec<Vec<i64>> = vec![vec![]];
    for f in &datum.factors {
        let coords: Vec<i64> = match f {
            Factor::Circle { .. } => (-cutoff..=cutoff).collect(),
            Factor::Su2 { .. } => (0..=cutoff).collect(),
            Factor::Generic { .. } => vec![0],
        };
        let mut next = Vec::new();
        for prefix in &out {
            for &c in &coords {
                let mut p = prefix.clone();
                p.push(c);
                next.push(p);
            }
        }
        out = next;
    }
    out.into_iter().map(IrrepLabel::new).collect()
}
