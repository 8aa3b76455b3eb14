//! The basic Dirac operator on a truncated Peter-Weyl decomposition of
//! L2(G) (x) S, kept in block form per dominant weight. The second
//! Peter-Weyl tensor factor is not materialized; its dimension is folded
//! into a rational multiplicity weight together with the 1/dim(S)
//! normalization of the Clifford trace.

use nalgebra::linalg::SymmetricEigen;
use num_complex::Complex64;
use num_rational::Ratio;
use num_traits::Zero;

use crate::clifford::{pi_map, SpinorModule};
use crate::error::{Error, Result};
use crate::lie::{
    casimir_scalar, irrep_matrices, labels_up_to, rational_to_f64, weyl_dim, CMatrix, Factor,
    IrrepLabel, Rational, RootDatum,
};

/// Finite truncation of the Peter-Weyl decomposition: all dominant weights
/// with per-factor coordinates bounded by `cutoff`.
#[derive(Debug, Clone)]
pub struct Truncation {
    pub cutoff: i64,
    pub included_labels: Vec<IrrepLabel>,
}

impl Truncation {
    pub fn new(datum: &RootDatum, cutoff: i64) -> Result<Self> {
        if cutoff < 0 {
            return Err(Error::Rejected("cutoff must be non-negative".into()));
        }
        Ok(Truncation { cutoff, included_labels: labels_up_to(datum, cutoff) })
    }
}

/// One weight block of a truncated operator on V_lam (x) S.
#[derive(Debug, Clone)]
pub struct Block {
    pub label: IrrepLabel,
    pub matrix: CMatrix,
    /// tau_1-multiplicity of each eigenvector: dim(V_lam) / dim(S).
    pub multiplicity_weight: Rational,
}

/// Block-diagonal operator with tau_1 bookkeeping.
#[derive(Debug, Clone)]
pub struct BlockOperator {
    pub blocks: Vec<Block>,
    pub s_dim: usize,
}

impl BlockOperator {
    pub fn hermiticity_residual(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| (&b.matrix - b.matrix.adjoint()).norm())
            .fold(0.0, f64::max)
    }
}

/// Builds `D = (1/i) sum_i e_i (x) e_i` blockwise:
/// `D_lam = (1/i) sum_i dpi_lam(e_i) (x) cl(e_i)`.
pub fn build_basic_dirac(
    datum: &RootDatum,
    module: &SpinorModule,
    trunc: &Truncation,
) -> Result<BlockOperator> {
    let q = datum.algebra_dim()?;
    if module.q != q {
        return Err(Error::Rejected(format!(
            "spinor module has {} generators, algebra dimension is {q}",
            module.q
        )));
    }
    let minus_i = Complex64::new(0.0, -1.0);
    let mut blocks = Vec::with_capacity(trunc.included_labels.len());
    for label in &trunc.included_labels {
        let mats = irrep_matrices(datum, label)?;
        let vdim = mats[0].nrows();
        let dim = vdim * module.dimension;
        let mut m = CMatrix::zeros(dim, dim);
        for (dpi, cl) in mats.iter().zip(&module.generator_matrices) {
            m += dpi.kronecker(cl) * minus_i;
        }
        blocks.push(Block {
            label: label.clone(),
            matrix: m,
            multiplicity_weight: Ratio::new(vdim as i64, module.dimension as i64),
        });
    }
    Ok(BlockOperator { blocks, s_dim: module.dimension })
}

/// Eigenvalues of a hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    if m.nrows() == 0 {
        return vec![];
    }
    let mut ev: Vec<f64> = SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ev
}

/// The spectrum as (eigenvalue, tau_1-multiplicity) pairs, eigenvalues
/// ascending, equal values within `tol` merged.
pub fn spectrum(op: &BlockOperator) -> Vec<(f64, Rational)> {
    let tol = 1e-9;
    let mut raw: Vec<(f64, Rational)> = Vec::new();
    for b in &op.blocks {
        for ev in hermitian_eigenvalues(&b.matrix) {
            raw.push((ev, b.multiplicity_weight));
        }
    }
    raw.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut out: Vec<(f64, Rational)> = Vec::new();
    for (ev, w) in raw {
        match out.last_mut() {
            Some((last, lw)) if (ev - *last).abs() <= tol => *lw += w,
            _ => out.push((ev, w)),
        }
    }
    out
}

/// Kernel report for the block Dirac.
#[derive(Debug, Clone)]
pub struct KernelReport {
    /// Smallest |eigenvalue| over all nonzero-weight blocks.
    pub min_abs_nonzero_block: f64,
    /// Dimension of the numerical kernel of the zero-weight block.
    pub zero_block_kernel_dim: usize,
    pub s_dim: usize,
    /// tau_1-mass of the numerical kernel over all blocks.
    pub kernel_tau_mass: Rational,
    pub tolerance: f64,
}

impl KernelReport {
    /// Kernel equals constants (x) S with tau_1-mass 1.
    pub fn is_constants_tensor_s(&self) -> bool {
        self.zero_block_kernel_dim == self.s_dim
            && self.min_abs_nonzero_block > self.tolerance
            && self.kernel_tau_mass == Rational::from_integer(1)
    }
}

/// Checks that the numerical kernel is exactly the zero-weight block.
pub fn kernel_check(op: &BlockOperator, module: &SpinorModule) -> KernelReport {
    let tol = 1e-9;
    let mut min_nonzero = f64::INFINITY;
    let mut zero_kernel = 0usize;
    let mut mass = Rational::zero();
    for b in &op.blocks {
        let evs = hermitian_eigenvalues(&b.matrix);
        if b.label.is_zero() {
            zero_kernel = evs.iter().filter(|e| e.abs() <= tol).count();
            mass += b.multiplicity_weight * Rational::from_integer(zero_kernel as i64);
        } else {
            for e in evs {
                if e.abs() <= tol {
                    mass += b.multiplicity_weight;
                }
                min_nonzero = min_nonzero.min(e.abs());
            }
        }
    }
    KernelReport {
        min_abs_nonzero_block: min_nonzero,
        zero_block_kernel_dim: zero_kernel,
        s_dim: module.dimension,
        kernel_tau_mass: mass,
        tolerance: tol,
    }
}

/// Per-block lower bound check: min eigenvalue of D_lam^2 >= |lam|^2.
pub fn block_lower_bound_margin(datum: &RootDatum, op: &BlockOperator) -> f64 {
    let mut worst = f64::INFINITY;
    for b in &op.blocks {
        let lam: Vec<Rational> =
            b.label.weight.iter().map(|&c| Rational::from_integer(c)).collect();
        let bound = rational_to_f64(datum.weight_inner(&lam, &lam));
        let min_sq = hermitian_eigenvalues(&b.matrix)
            .iter()
            .map(|e| e * e)
            .fold(f64::INFINITY, f64::min);
        worst = worst.min(min_sq - bound);
    }
    worst
}

/// Frobenius residual of `D^2 = Cas (x) 1 + 2 sum_k e_k (x) pi(e_k)` per
/// block, maximized over blocks.
pub fn check_dsq_identity(
    datum: &RootDatum,
    module: &SpinorModule,
    trunc: &Truncation,
) -> Result<f64> {
    let op = build_basic_dirac(datum, module, trunc)?;
    let sc = datum.structure_constants();
    let q = datum.algebra_dim()?;
    let pi_mats: Vec<CMatrix> = (0..q).map(|a| module.rep(&pi_map(&sc, a))).collect();
    let mut worst = 0.0_f64;
    for b in &op.blocks {
        let mats = irrep_matrices(datum, &b.label)?;
        let vdim = mats[0].nrows();
        let dim = vdim * module.dimension;
        let cas = rational_to_f64(casimir_scalar(datum, &b.label)?);
        let mut rhs = CMatrix::identity(dim, dim) * Complex64::new(cas, 0.0);
        for (dpi, pim) in mats.iter().zip(&pi_mats) {
            rhs += dpi.kronecker(pim) * Complex64::new(2.0, 0.0);
        }
        let dsq = &b.matrix * &b.matrix;
        worst = worst.max((dsq - rhs).norm());
    }
    Ok(worst)
}

/// Truncated heat trace `sum_blocks weight * tr exp(-u a^2 D_lam^2)` and a
/// tail estimate from weights outside the truncation. The value depends on
/// (u, a) only through u*a^2, so the scaling law holds by construction.
pub fn heat_trace_basic(
    datum: &RootDatum,
    op: &BlockOperator,
    trunc: &Truncation,
    u: f64,
    a: f64,
) -> Result<(f64, f64)> {
    if u <= 0.0 {
        return Err(Error::Rejected("heat trace needs u > 0".into()));
    }
    if a == 0.0 {
        return Err(Error::Rejected("heat trace needs a != 0".into()));
    }
    let t = u * a * a;
    let mut value = 0.0;
    for b in &op.blocks {
        let w = rational_to_f64(b.multiplicity_weight);
        for ev in hermitian_eigenvalues(&b.matrix) {
            value += w * (-t * ev * ev).exp();
        }
    }
    // Tail: each excluded weight lam contributes at most
    // dim(V_lam)^2 * exp(-t |lam|^2) by the per-block lower bound.
    let tail = tail_sum(datum, trunc.cutoff, |norm_sq, mass| mass * (-t * norm_sq).exp());
    Ok((value, tail))
}

/// Result of a truncated p-trace of |D restricted off the kernel|^{-p}.
#[derive(Debug, Clone)]
pub struct PTrace {
    pub value: f64,
    pub tail_estimate: f64,
}

/// Truncated `tau_1(|D_{ker D perp}|^{-p})` with a tail estimate.
/// Fails with a divergence flag when p is at or below dim(g).
pub fn p_trace_inverse(
    datum: &RootDatum,
    op: &BlockOperator,
    trunc: &Truncation,
    p: f64,
) -> Result<PTrace> {
    let q = datum.algebra_dim()? as f64;
    if p <= q {
        return Err(Error::Divergence(format!(
            "p-trace diverges for p <= dim(g) = {q}, requested p = {p}"
        )));
    }
    let tol = 1e-9;
    let mut value = 0.0;
    for b in &op.blocks {
        let w = rational_to_f64(b.multiplicity_weight);
        for ev in hermitian_eigenvalues(&b.matrix) {
            if ev.abs() > tol {
                value += w * ev.abs().powf(-p);
            }
        }
    }
    // Pure circle: Euler-Maclaurin tail, near exact. Otherwise a windowed
    // upper estimate from the per-block eigenvalue lower bound.
    let tail = if let [Factor::Circle { scale }] = datum.factors.as_slice() {
        let sigma = rational_to_f64(*scale);
        2.0 * sigma.powf(p / 2.0) * euler_maclaurin_p_tail(trunc.cutoff as f64 + 1.0, p)
    } else {
        tail_sum(datum, trunc.cutoff, |norm_sq, mass| {
            if norm_sq > 0.0 {
                mass * norm_sq.powf(-p / 2.0)
            } else {
                0.0
            }
        })
    };
    Ok(PTrace { value, tail_estimate: tail })
}

/// `sum_{n >= n0} n^{-p}` by Euler-Maclaurin.
pub fn euler_maclaurin_p_tail(n0: f64, p: f64) -> f64 {
    let integral = n0.powf(1.0 - p) / (p - 1.0);
    let half = 0.5 * n0.powf(-p);
    let d1 = p * n0.powf(-p - 1.0) / 12.0;
    let d3 = p * (p + 1.0) * (p + 2.0) * n0.powf(-p - 3.0) / 720.0;
    integral + half + d1 - d3
}

/// Sums `f(|lam|^2, dim V_lam^2)` over a window of labels just outside the
/// cutoff, as an estimate of the neglected tail.
fn tail_sum(datum: &RootDatum, cutoff: i64, f: impl Fn(f64, f64) -> f64) -> f64 {
    let window = match datum.weight_rank() {
        1 => 4000,
        2 => 200,
        _ => 40,
    };
    let all = labels_up_to(datum, cutoff + window);
    let mut acc = 0.0;
    for label in &all {
        let outside = label.weight.iter().any(|&c| c.abs() > cutoff);
        if !outside {
            continue;
        }
        let lam: Vec<Rational> = label.weight.iter().map(|&c| Rational::from_integer(c)).collect();
        let norm_sq = rational_to_f64(datum.weight_inner(&lam, &lam));
        let mass = match weyl_dim(datum, label) {
            Ok(d) => (d * d) as f64,
            Err(_) => continue,
        };
        acc += f(norm_sq, mass);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clifford::SpinorModule;

    fn circle_setup(cutoff: i64) -> (RootDatum, SpinorModule, Truncation, BlockOperator) {
        let datum = RootDatum::circle();
        let module = SpinorModule::irreducible(1);
        let trunc = Truncation::new(&datum, cutoff).unwrap();
        let op = build_basic_dirac(&datum, &module, &trunc).unwrap();
        (datum, module, trunc, op)
    }

    fn su2_setup(cutoff: i64, regular: bool) -> (RootDatum, SpinorModule, Truncation, BlockOperator) {
        let datum = RootDatum::su2_killing();
        let module = if regular { SpinorModule::regular(3) } else { SpinorModule::irreducible(3) };
        let trunc = Truncation::new(&datum, cutoff).unwrap();
        let op = build_basic_dirac(&datum, &module, &trunc).unwrap();
        (datum, module, trunc, op)
    }

    #[test]
    fn circle_blocks_are_fourier_modes() {
        // Oracle: -i d/dtheta on e^{i n theta} has eigenvalue n.
        let (_, _, _, op) = circle_setup(2);
        let mut eigen: Vec<i64> = Vec::new();
        for b in &op.blocks {
            assert_eq!(b.matrix.nrows(), 1);
            eigen.push(b.matrix[(0, 0)].re.round() as i64);
            assert!(b.matrix[(0, 0)].im.abs() < 1e-14);
        }
        eigen.sort();
        assert_eq!(eigen, vec![-2, -1, 0, 1, 2]);
    }

    #[test]
    fn zero_label_block_is_zero() {
        let (_, _, _, op) = su2_setup(2, true);
        let zero = op.blocks.iter().find(|b| b.label.is_zero()).unwrap();
        assert_eq!(zero.matrix.norm(), 0.0);
    }

    #[test]
    fn blocks_are_hermitian() {
        let (_, _, _, op) = su2_setup(3, true);
        assert!(op.hermiticity_residual() < 1e-12);
    }

    #[test]
    fn circle_spectrum_multiplicity_one() {
        let (_, _, _, op) = circle_setup(2);
        let spec = spectrum(&op);
        let expect = [-2.0, -1.0, 0.0, 1.0, 2.0];
        assert_eq!(spec.len(), 5);
        for ((ev, mult), want) in spec.iter().zip(expect) {
            assert!((ev - want).abs() < 1e-12);
            assert_eq!(*mult, Rational::from_integer(1));
        }
    }

    #[test]
    fn circle_regular_module_also_mass_one() {
        let datum = RootDatum::circle();
        let module = SpinorModule::regular(1);
        let trunc = Truncation::new(&datum, 3).unwrap();
        let op = build_basic_dirac(&datum, &module, &trunc).unwrap();
        let spec = spectrum(&op);
        for (ev, mult) in spec {
            let want = Rational::from_integer(1);
            assert_eq!(mult, want, "eigenvalue {ev} has mass {mult}");
        }
    }

    #[test]
    fn su2_gap_is_one_eighth() {
        let (_, module, _, op) = su2_setup(4, true);
        let rep = kernel_check(&op, &module);
        assert!(rep.is_constants_tensor_s());
        // min nonzero eigenvalue of D^2 = 1/8, nothing in (0, 1/8)
        let gap = rep.min_abs_nonzero_block.powi(2);
        assert!((gap - 0.125).abs() < 1e-9, "gap = {gap}");
    }

    #[test]
    fn kernel_mass_is_one_for_products() {
        for datum in [
            RootDatum::circle(),
            RootDatum::su2_killing(),
            RootDatum::torus2(),
            RootDatum::new(vec![Factor::circle_unit(), Factor::su2_killing()]).unwrap(),
        ] {
            let q = datum.algebra_dim().unwrap();
            let module = SpinorModule::regular(q);
            let trunc = Truncation::new(&datum, 2).unwrap();
            let op = build_basic_dirac(&datum, &module, &trunc).unwrap();
            let rep = kernel_check(&op, &module);
            assert!(rep.is_constants_tensor_s(), "kernel failed for {:?}", datum);
            assert_eq!(rep.zero_block_kernel_dim, module.dimension);
        }
    }

    #[test]
    fn per_block_lower_bound() {
        let (datum, _, _, op) = su2_setup(4, true);
        assert!(block_lower_bound_margin(&datum, &op) > -1e-9);
        let (datum, _, _, op) = circle_setup(5);
        assert!(block_lower_bound_margin(&datum, &op) > -1e-9);
    }

    #[test]
    fn dsq_identity_residuals() {
        // Abelian: pi = 0 and D^2 = Cas exactly.
        let datum = RootDatum::circle();
        let trunc = Truncation::new(&datum, 3).unwrap();
        let r = check_dsq_identity(&datum, &SpinorModule::irreducible(1), &trunc).unwrap();
        assert!(r < 1e-12);
        let torus = RootDatum::torus2();
        let trunc = Truncation::new(&torus, 2).unwrap();
        let r = check_dsq_identity(&torus, &SpinorModule::regular(2), &trunc).unwrap();
        assert!(r < 1e-12);
        // su2 up to 2j <= 3
        let su2 = RootDatum::su2_killing();
        let trunc = Truncation::new(&su2, 3).unwrap();
        let r = check_dsq_identity(&su2, &SpinorModule::regular(3), &trunc).unwrap();
        assert!(r < 1e-10, "residual {r}");
        let r = check_dsq_identity(&su2, &SpinorModule::irreducible(3), &trunc).unwrap();
        assert!(r < 1e-10, "residual {r}");
    }

    #[test]
    fn heat_trace_circle_theta_series() {
        // Oracle: sum_{|n| <= 10} exp(-n^2) = 1.772637..., close to sqrt(pi)
        // by Poisson summation.
        let (datum, _, trunc, op) = circle_setup(10);
        let (value, tail) = heat_trace_basic(&datum, &op, &trunc, 1.0, 1.0).unwrap();
        let oracle: f64 = (-10..=10).map(|n: i64| (-(n * n) as f64).exp()).sum();
        assert!((value - oracle).abs() < 1e-12);
        assert!((value - 1.772637).abs() < 1e-5);
        assert!((value - std::f64::consts::PI.sqrt()).abs() < 2e-4);
        assert!(tail < 1e-30);
    }

    #[test]
    fn heat_trace_large_u_tends_to_kernel_mass() {
        let (datum, _, trunc, op) = su2_setup(3, true);
        let (value, _) = heat_trace_basic(&datum, &op, &trunc, 200.0, 1.0).unwrap();
        assert!((value - 1.0).abs() < 1e-9);
    }

    #[test]
    fn heat_trace_scaling_law() {
        let (datum, _, trunc, op) = circle_setup(8);
        let (a, _) = heat_trace_basic(&datum, &op, &trunc, 1.0, 2.0).unwrap();
        let (b, _) = heat_trace_basic(&datum, &op, &trunc, 4.0, 1.0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn heat_tail_decreases_with_cutoff() {
        let datum = RootDatum::circle();
        let module = SpinorModule::irreducible(1);
        let mut last = f64::INFINITY;
        for cutoff in [1, 2, 3] {
            let trunc = Truncation::new(&datum, cutoff).unwrap();
            let op = build_basic_dirac(&datum, &module, &trunc).unwrap();
            let (_, tail) = heat_trace_basic(&datum, &op, &trunc, 0.5, 1.0).unwrap();
            assert!(tail < last);
            last = tail;
        }
    }

    #[test]
    fn p_trace_circle_basel() {
        // Oracle: 2 zeta(2) = pi^2 / 3.
        let (datum, _, trunc, op) = circle_setup(100);
        let pt = p_trace_inverse(&datum, &op, &trunc, 2.0).unwrap();
        let target = std::f64::consts::PI * std::f64::consts::PI / 3.0;
        assert!(
            (pt.value + pt.tail_estimate - target).abs() < 1e-8,
            "value {} tail {} vs {target}",
            pt.value,
            pt.tail_estimate
        );
    }

    #[test]
    fn p_trace_divergence_flags() {
        let (datum, _, trunc, op) = circle_setup(5);
        assert!(matches!(
            p_trace_inverse(&datum, &op, &trunc, 1.0),
            Err(Error::Divergence(_))
        ));
        let (datum, _, trunc, op) = su2_setup(2, true);
        assert!(matches!(
            p_trace_inverse(&datum, &op, &trunc, 3.0),
            Err(Error::Divergence(_))
        ));
    }

    #[test]
    fn p_trace_empty_nonzero_spectrum() {
        let (datum, _, trunc, op) = circle_setup(0);
        let pt = p_trace_inverse(&datum, &op, &trunc, 2.0).unwrap();
        assert_eq!(pt.value, 0.0);
    }

    #[test]
    fn p_trace_monotone_in_cutoff() {
        let datum = RootDatum::su2_killing();
        let module = SpinorModule::irreducible(3);
        let mut last = 0.0;
        for cutoff in [1, 2, 3, 4] {
            let trunc = Truncation::new(&datum, cutoff).unwrap();
            let op = build_basic_dirac(&datum, &module, &trunc).unwrap();
            let pt = p_trace_inverse(&datum, &op, &trunc, 4.0).unwrap();
            assert!(pt.value > last);
            last = pt.value;
        }
    }
}
