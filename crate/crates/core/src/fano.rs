//! Fano operators on the doubled phase-space grid.
//!
//! Points carry doubled coordinates `dq = 2q`, `dp = 2p` in `[0, 2N)`, so
//! integer and half-integer labels are both plain integers. The Fourier
//! transformed operator is
//!
//! ```text
//! Δ_F(q_f, p_f) = (1/2N) Σ_{q,p} ω_{2N}^{(2q)(2p_f) − (2p)(2q_f)} Δ(q, p)
//! ```
//!
//! and for both admissible families it is a single scaled monomial,
//! `(1/2N) c(q_f, p_f) P^{−2q_f} Q^{2p_f}`, with
//! `c = ω_N^{−2(N−1)p_f q_f}` (new) or `c = ω_N^{2p_f q_f}` (Leonhardt).

use std::borrow::Cow;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::algebra::{
    check_dim, conjugate, max_abs, max_abs_diff, Monomial, MonomialCoefficients, OperatorMatrix,
    PhaseExponent,
};
use crate::error::{QpsError, Result};
use crate::representation::{Family, PhaseChoice, PhaseClass, UnitaryCache};
use crate::sp2z::{complete_to_sl2, reduce_point, shifted_completion, Sp2Z};

/// Above this dimension grids are evaluated cell by cell on demand.
pub const LAZY_THRESHOLD: usize = 16;

/// A grid point in doubled coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct HalfPoint {
    pub dq: usize,
    pub dp: usize,
}

impl HalfPoint {
    pub fn new(dq: usize, dp: usize, dim: usize) -> Result<Self> {
        check_dim(dim)?;
        if dq >= 2 * dim || dp >= 2 * dim {
            return Err(QpsError::PointOutOfRange {
                dq: dq as i64,
                dp: dp as i64,
                bound: 2 * dim as i64,
            });
        }
        Ok(Self { dq, dp })
    }

    pub fn q(&self) -> f64 {
        self.dq as f64 / 2.0
    }

    pub fn p(&self) -> f64 {
        self.dp as f64 / 2.0
    }

    pub fn q_is_integer(&self) -> bool {
        self.dq.is_multiple_of(2)
    }

    pub fn p_is_integer(&self) -> bool {
        self.dp.is_multiple_of(2)
    }

    /// All `4N²` points, `dq`-major.
    pub fn grid(dim: usize) -> impl Iterator<Item = HalfPoint> {
        let m = 2 * dim;
        (0..m * m).map(move |i| HalfPoint { dq: i / m, dp: i % m })
    }
}

/// `c(q_f, p_f) P^{−2q_f} Q^{2p_f}`, i.e. `2N Δ_F` as an exact monomial.
pub fn fourier_closed_monomial(point: HalfPoint, family: Family, dim: usize) -> Monomial {
    let (u, v) = (point.dq as i128, point.dp as i128);
    let n = dim as i128;
    let phase = match family {
        Family::New => PhaseExponent::reduced(-(n - 1) * u * v, dim),
        Family::Leonhardt => PhaseExponent::reduced(u * v, dim),
    };
    Monomial::unchecked(phase, -(point.dq as i64), point.dp as i64)
}

#[derive(Clone, Debug)]
pub struct FourierFano {
    pub point: HalfPoint,
    pub op: OperatorMatrix,
}

fn require_family_dim(family: Family, dim: usize) -> Result<()> {
    check_dim(dim)?;
    if family == Family::Leonhardt && !dim.is_multiple_of(2) {
        return Err(QpsError::LeonhardtOddDimension(dim));
    }
    Ok(())
}

pub fn fano_fourier_closed(point: HalfPoint, family: Family, dim: usize) -> Result<FourierFano> {
    require_family_dim(family, dim)?;
    let op = fourier_closed_monomial(point, family, dim).to_matrix() / Complex64::from(2.0 * dim as f64);
    Ok(FourierFano { point, op })
}

/// `Δ_F` at a point obtained by transporting the marginal value
/// `Δ_F(0, ξ/2) = Q^ξ / 2N` along the group orbit.
///
/// The point `(2q_f, 2p_f) = ξ(λ, κ)` is reached with
/// `h = [[κ, −μ], [−λ, ν]]` where `[[κ, μ], [λ, ν]]` is the minimal Bézout
/// completion.
pub fn fano_fourier_via_group(point: HalfPoint, pc: &PhaseChoice, cache: &UnitaryCache) -> Result<FourierFano> {
    fano_fourier_via_group_with(point, pc, 0, cache)
}

/// As [`fano_fourier_via_group`], but the completion is shifted to
/// `[[κ, μ + tκ], [λ, ν + tλ]]`.
pub fn fano_fourier_via_group_with(
    point: HalfPoint,
    pc: &PhaseChoice,
    shift: i64,
    cache: &UnitaryCache,
) -> Result<FourierFano> {
    if pc.classify() == PhaseClass::Inadmissible {
        return Err(QpsError::Inadmissible {
            n_plus: pc.n_plus,
            n_minus: pc.n_minus,
            dim: pc.dim,
        });
    }
    let op = orbit_fourier(point, pc, shift, cache)?;
    Ok(FourierFano { point, op })
}

/// The group element used to reach `point`, `None` at the origin.
pub fn orbit_element(point: HalfPoint, dim: usize, shift: i64) -> Result<Option<(Sp2Z, i64)>> {
    let red = reduce_point(point.dq as i64, point.dp as i64, dim)?;
    if red.degenerate {
        return Ok(None);
    }
    let base = shifted_completion(&complete_to_sl2(red.kappa, red.lambda)?, shift);
    let h = Sp2Z::new(base.kappa, -base.mu, -base.lambda, base.nu)?;
    Ok(Some((h, red.xi)))
}

fn orbit_fourier(point: HalfPoint, pc: &PhaseChoice, shift: i64, cache: &UnitaryCache) -> Result<OperatorMatrix> {
    let dim = pc.dim;
    let norm = Complex64::from(2.0 * dim as f64);
    match orbit_element(point, dim, shift)? {
        None => Ok(OperatorMatrix::identity(dim, dim) / norm),
        Some((h, xi)) => {
            let u = cache.get(&h, pc)?;
            let seed = Monomial::unchecked(PhaseExponent::one(dim), 0, xi).to_matrix() / norm;
            Ok(u.conjugate(&seed))
        }
    }
}

#[derive(Clone, Debug)]
enum Cells {
    Eager(Vec<OperatorMatrix>),
    Lazy(Family),
}

/// The `2N × 2N` array of Fano operators `Δ(q, p)`.
#[derive(Clone, Debug)]
pub struct FanoGrid {
    dim: usize,
    class: PhaseClass,
    cells: Cells,
}

impl FanoGrid {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn class(&self) -> PhaseClass {
        self.class
    }

    pub fn family(&self) -> Option<Family> {
        self.class.family()
    }

    pub fn side(&self) -> usize {
        2 * self.dim
    }

    pub fn is_lazy(&self) -> bool {
        matches!(self.cells, Cells::Lazy(_))
    }

    pub fn cell(&self, point: HalfPoint) -> Cow<'_, OperatorMatrix> {
        match &self.cells {
            Cells::Eager(v) => Cow::Borrowed(&v[point.dq * self.side() + point.dp]),
            Cells::Lazy(family) => Cow::Owned(fano_cell(*family, self.dim, point)),
        }
    }

    pub fn at(&self, dq: usize, dp: usize) -> Cow<'_, OperatorMatrix> {
        self.cell(HalfPoint { dq, dp })
    }

    /// Mutable access; materializes a lazy grid first.
    pub fn cell_mut(&mut self, point: HalfPoint) -> &mut OperatorMatrix {
        if let Cells::Lazy(family) = self.cells {
            self.cells = Cells::Eager(materialize(family, self.dim));
        }
        let side = self.side();
        match &mut self.cells {
            Cells::Eager(v) => &mut v[point.dq * side + point.dp],
            Cells::Lazy(_) => unreachable!(),
        }
    }

    pub fn points(&self) -> impl Iterator<Item = HalfPoint> {
        HalfPoint::grid(self.dim)
    }
}

/// Inverse transform of a monomial-valued `Δ_F`:
/// `Δ(x, y) = (1/2N)² Σ_{u,v} ω_{2N}^{−xv + yu} c(u,v) P^{−u} Q^v`.
fn cell_from_monomials<F>(dim: usize, point: HalfPoint, fourier: &F) -> OperatorMatrix
where
    F: Fn(HalfPoint) -> Monomial,
{
    let side = 2 * dim;
    let norm = 1.0 / (side * side) as f64;
    let (x, y) = (point.dq as i128, point.dp as i128);
    let mut coeffs = MonomialCoefficients::zeros(dim);
    for f in HalfPoint::grid(dim) {
        let (u, v) = (f.dq as i128, f.dp as i128);
        let weight = PhaseExponent::reduced(-x * v + y * u, dim);
        coeffs.accumulate(&fourier(f).with_phase(weight), Complex64::from(norm));
    }
    coeffs.reconstruct()
}

/// One cell of a closed-form family grid, evaluated on its own.
pub fn fano_cell(family: Family, dim: usize, point: HalfPoint) -> OperatorMatrix {
    cell_from_monomials(dim, point, &|f| fourier_closed_monomial(f, family, dim))
}

fn materialize(family: Family, dim: usize) -> Vec<OperatorMatrix> {
    let points: Vec<HalfPoint> = HalfPoint::grid(dim).collect();
    points.par_iter().map(|&pt| fano_cell(family, dim, pt)).collect()
}

pub fn build_fano_grid(family: Family, dim: usize) -> Result<FanoGrid> {
    require_family_dim(family, dim)?;
    let cells = if dim > LAZY_THRESHOLD {
        Cells::Lazy(family)
    } else {
        Cells::Eager(materialize(family, dim))
    };
    Ok(FanoGrid {
        dim,
        class: family.into(),
        cells,
    })
}

/// Grid from an arbitrary exact monomial-valued `2N Δ_F`.
pub fn build_fano_grid_from_monomials<F>(class: PhaseClass, dim: usize, fourier: F) -> Result<FanoGrid>
where
    F: Fn(HalfPoint) -> Monomial + Sync,
{
    check_dim(dim)?;
    let points: Vec<HalfPoint> = HalfPoint::grid(dim).collect();
    let cells = points
        .par_iter()
        .map(|&pt| cell_from_monomials(dim, pt, &fourier))
        .collect();
    Ok(FanoGrid {
        dim,
        class,
        cells: Cells::Eager(cells),
    })
}

/// Grid from a dense `Δ_F` table (indexed like the grid itself).
pub fn grid_from_fourier_table(class: PhaseClass, dim: usize, table: &[OperatorMatrix]) -> Result<FanoGrid> {
    check_dim(dim)?;
    let side = 2 * dim;
    if table.len() != side * side {
        return Err(QpsError::DimensionMismatch {
            expected: side * side,
            actual: table.len(),
        });
    }
    let points: Vec<HalfPoint> = HalfPoint::grid(dim).collect();
    let cells = points
        .par_iter()
        .map(|&pt| {
            let (x, y) = (pt.dq as i128, pt.dp as i128);
            let mut acc = OperatorMatrix::zeros(dim, dim);
            for f in HalfPoint::grid(dim) {
                let w = PhaseExponent::reduced(-x * f.dp as i128 + y * f.dq as i128, dim).to_complex();
                acc += &table[f.dq * side + f.dp] * w;
            }
            acc / Complex64::from(side as f64)
        })
        .collect();
    Ok(FanoGrid {
        dim,
        class,
        cells: Cells::Eager(cells),
    })
}

/// Grid assembled from orbit-transported `Δ_F` values for any phase choice,
/// admissible or not.
pub fn build_fano_grid_via_orbit(pc: &PhaseChoice, cache: &UnitaryCache) -> Result<FanoGrid> {
    let dim = pc.dim;
    let table = HalfPoint::grid(dim)
        .map(|pt| orbit_fourier(pt, pc, 0, cache))
        .collect::<Result<Vec<_>>>()?;
    grid_from_fourier_table(pc.classify(), dim, &table)
}

/// Forward transform of a grid at one Fourier point.
pub fn forward_fourier(grid: &FanoGrid, point: HalfPoint) -> OperatorMatrix {
    let dim = grid.dim();
    let (u, v) = (point.dq as i128, point.dp as i128);
    let mut acc = OperatorMatrix::zeros(dim, dim);
    for pt in grid.points() {
        let w = PhaseExponent::reduced(pt.dq as i128 * v - pt.dp as i128 * u, dim).to_complex();
        acc += grid.cell(pt).as_ref() * w;
    }
    acc / Complex64::from(2.0 * dim as f64)
}

/// `|q⟩⟨q|`
pub fn position_projector(q: usize, dim: usize) -> OperatorMatrix {
    let mut out = OperatorMatrix::zeros(dim, dim);
    out[(q, q)] = Complex64::new(1.0, 0.0);
    out
}

/// `|p⟩⟨p|` with `|p⟩ = N^{−1/2} Σ_q ω_N^{pq} |q⟩`.
pub fn momentum_projector(p: usize, dim: usize) -> OperatorMatrix {
    OperatorMatrix::from_fn(dim, dim, |i, j| {
        let k = 2 * (p as i128) * (i as i128 - j as i128);
        PhaseExponent::reduced(k, dim).to_complex() / dim as f64
    })
}

#[derive(Clone, Debug)]
pub struct MarginalityReport {
    /// Deviation of `Σ_p Δ(q, p)` from its target, per `dq`.
    pub position: Vec<f64>,
    /// Deviation of `Σ_q Δ(q, p)` from its target, per `dp`.
    pub momentum: Vec<f64>,
}

impl MarginalityReport {
    pub fn max_deviation(&self) -> f64 {
        self.position.iter().chain(&self.momentum).copied().fold(0.0, f64::max)
    }

    pub fn passed(&self, tol: f64) -> bool {
        self.max_deviation() < tol
    }
}

/// `Σ_p Δ(q,p)` must be `|q⟩⟨q|` on integer `q` and vanish on half-integers;
/// likewise for the momentum sums.
pub fn check_marginality(grid: &FanoGrid) -> MarginalityReport {
    let dim = grid.dim();
    let side = grid.side();
    let zero = OperatorMatrix::zeros(dim, dim);
    let position = (0..side)
        .map(|dq| {
            let sum = (0..side).fold(zero.clone(), |acc, dp| acc + grid.at(dq, dp).as_ref());
            let target = if dq % 2 == 0 { position_projector(dq / 2, dim) } else { zero.clone() };
            max_abs_diff(&sum, &target)
        })
        .collect();
    let momentum = (0..side)
        .map(|dp| {
            let sum = (0..side).fold(zero.clone(), |acc, dq| acc + grid.at(dq, dp).as_ref());
            let target = if dp % 2 == 0 { momentum_projector(dp / 2, dim) } else { zero.clone() };
            max_abs_diff(&sum, &target)
        })
        .collect();
    MarginalityReport { position, momentum }
}

#[derive(Clone, Debug)]
pub struct CovarianceReport {
    pub h: Sp2Z,
    pub max_deviation: f64,
}

impl CovarianceReport {
    pub fn passed(&self, tol: f64) -> bool {
        self.max_deviation < tol
    }
}

/// Compares `U_h Δ(q,p) U_h†` with `Δ(νq − λp, −μq + κp)` on every cell.
pub fn check_covariance(grid: &FanoGrid, h: &Sp2Z, pc: &PhaseChoice, cache: &UnitaryCache) -> Result<CovarianceReport> {
    if pc.dim != grid.dim() {
        return Err(QpsError::DimensionMismatch {
            expected: grid.dim(),
            actual: pc.dim,
        });
    }
    if pc.classify() != grid.class() {
        return Err(QpsError::FamilyMismatch {
            n_plus: pc.n_plus,
            n_minus: pc.n_minus,
            family: grid.family().map(|f| f.name()).unwrap_or("inadmissible"),
        });
    }
    let u = cache.get(h, pc)?;
    let dim = grid.dim();
    let max_deviation = grid
        .points()
        .map(|pt| {
            let lhs = conjugate(&u.matrix, grid.cell(pt).as_ref());
            let (nq, np) = h.relabel(pt.dq, pt.dp, dim);
            max_abs_diff(&lhs, grid.at(nq, np).as_ref())
        })
        .fold(0.0, f64::max);
    Ok(CovarianceReport { h: *h, max_deviation })
}

/// `max_{q,p} ‖Δ − Δ†‖`
pub fn hermiticity_deviation(grid: &FanoGrid) -> f64 {
    grid.points()
        .map(|pt| {
            let c = grid.cell(pt);
            max_abs_diff(c.as_ref(), &c.adjoint())
        })
        .fold(0.0, f64::max)
}

/// `‖Σ_{q,p} Δ(q,p) − 1‖`
pub fn completeness_deviation(grid: &FanoGrid) -> f64 {
    let dim = grid.dim();
    let sum = grid
        .points()
        .fold(OperatorMatrix::zeros(dim, dim), |acc, pt| acc + grid.cell(pt).as_ref());
    max_abs_diff(&sum, &OperatorMatrix::identity(dim, dim))
}

/// Largest deviation of `Tr Δ(q,p)` from `1/N` (integer-integer points) or `0`.
pub fn trace_deviation(grid: &FanoGrid) -> f64 {
    let dim = grid.dim();
    grid.points()
        .map(|pt| {
            let target = if pt.q_is_integer() && pt.p_is_integer() {
                1.0 / dim as f64
            } else {
                0.0
            };
            (grid.cell(pt).trace() - Complex64::from(target)).norm()
        })
        .fold(0.0, f64::max)
}

/// Largest cell norm at points where `q` or `p` is a half-integer.
pub fn half_integer_norm(grid: &FanoGrid) -> f64 {
    grid.points()
        .filter(|pt| !(pt.q_is_integer() && pt.p_is_integer()))
        .map(|pt| max_abs(grid.cell(pt).as_ref()))
        .fold(0.0, f64::max)
}

/// Leonhardt's operator as the literal double sum
/// `(2N)^{−2} Σ_{p_f,q_f} ω_N^{2(p_f q_f − p_f q + q_f p)} P^{−2q_f} Q^{2p_f}`.
pub fn leonhardt_reference(dq: usize, dp: usize, dim: usize) -> Result<OperatorMatrix> {
    check_dim(dim)?;
    if !dim.is_multiple_of(2) {
        return Err(QpsError::LeonhardtOddDimension(dim));
    }
    HalfPoint::new(dq, dp, dim)?;
    let side = 2 * dim;
    let mut acc = OperatorMatrix::zeros(dim, dim);
    for qf2 in 0..side as i64 {
        for pf2 in 0..side as i64 {
            // ω_N^{2 p_f q_f} = ω_{2N}^{(2p_f)(2q_f)}, and so on
            let k = pf2 * qf2 - pf2 * dq as i64 + qf2 * dp as i64;
            let c = PhaseExponent::new(k, dim)?.to_complex();
            acc += Monomial::new(-qf2, pf2, dim)?.to_matrix() * c;
        }
    }
    Ok(acc / Complex64::from((side * side) as f64))
}

/// The new-family cell folded onto `m, n ∈ [0, N)`:
///
/// ```text
/// Δ(q,p) = (2N)^{−2} Σ_{m,n} (1 + ω_N^{−qN} ω_N^{N(N−1)m/2})
///                            (1 + ω_N^{pN} ω_N^{N(N−1)n/2})
///                            ω_N^{−(N−1)nm/2} ω_N^{−qn} ω_N^{pm} P^{−m} Q^n
/// ```
pub fn new_family_reference(dq: usize, dp: usize, dim: usize) -> Result<OperatorMatrix> {
    HalfPoint::new(dq, dp, dim)?;
    let n = dim as i64;
    let (x, y) = (dq as i64, dp as i64);
    let w = |k: i64| PhaseExponent::new(k, dim).map(|p| p.to_complex());
    let one = Complex64::new(1.0, 0.0);
    let mut acc = OperatorMatrix::zeros(dim, dim);
    for m in 0..n {
        for nn in 0..n {
            // exponents of ω_{2N}
            let fq = one + w(-x * n)? * w(n * (n - 1) * m)?;
            let fp = one + w(y * n)? * w(n * (n - 1) * nn)?;
            let c = w(-(n - 1) * nn * m - x * nn + y * m)?;
            acc += Monomial::new(-m, nn, dim)?.to_matrix() * (fq * fp * c);
        }
    }
    Ok(acc / Complex64::from((4 * dim * dim) as f64))
}

/// The odd-`N` integer-grid operator
/// `N^{−2} Σ_{m,n} ω_N^{−(N−1)nm/2} ω_N^{−qn} ω_N^{pm} P^{−m} Q^n`.
pub fn odd_reduction_reference(q: i64, p: i64, dim: usize) -> Result<OperatorMatrix> {
    check_dim(dim)?;
    if dim.is_multiple_of(2) {
        return Err(QpsError::ReductionEvenDimension(dim));
    }
    let n = dim as i64;
    let half = (n - 1) / 2;
    let mut acc = OperatorMatrix::zeros(dim, dim);
    for m in 0..n {
        for nn in 0..n {
            // exponent of ω_N, doubled for ω_{2N}
            let k = -half * nn * m - q * nn + p * m;
            let c = PhaseExponent::new(2 * k, dim)?.to_complex();
            acc += Monomial::new(-m, nn, dim)?.to_matrix() * c;
        }
    }
    Ok(acc / Complex64::from((dim * dim) as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{decompose, identity};
    use crate::sp2z::random_sl2;

    fn pt(dq: usize, dp: usize) -> HalfPoint {
        HalfPoint { dq, dp }
    }

    #[test]
    fn half_point_partition() {
        let p = HalfPoint::new(3, 4, 3).unwrap();
        assert_eq!((p.q(), p.p()), (1.5, 2.0));
        assert!(!p.q_is_integer() && p.p_is_integer());
        assert!(HalfPoint::new(4, 0, 2).is_err());
        let ints = HalfPoint::grid(3).filter(|p| p.q_is_integer()).count();
        assert_eq!(ints, 3 * 6);
    }

    #[test]
    fn closed_form_marginal_lines() {
        for dim in [2usize, 3, 4] {
            let norm = Complex64::from(2.0 * dim as f64);
            for fam in [Family::New, Family::Leonhardt] {
                if fam == Family::Leonhardt && dim % 2 == 1 {
                    continue;
                }
                for k in 0..2 * dim {
                    let on_p = fano_fourier_closed(pt(0, k), fam, dim).unwrap();
                    let expect = Monomial::new(0, k as i64, dim).unwrap().to_matrix() / norm;
                    assert!(max_abs_diff(&on_p.op, &expect) < 1e-15);
                    let on_q = fano_fourier_closed(pt(k, 0), fam, dim).unwrap();
                    let expect = Monomial::new(-(k as i64), 0, dim).unwrap().to_matrix() / norm;
                    assert!(max_abs_diff(&on_q.op, &expect) < 1e-15);
                }
            }
        }
    }

    #[test]
    fn closed_form_half_half_at_two() {
        let base = Monomial::new(-1, 1, 2).unwrap().to_matrix() / Complex64::from(4.0);
        let new = fano_fourier_closed(pt(1, 1), Family::New, 2).unwrap();
        assert!(max_abs_diff(&new.op, &(&base * Complex64::new(0.0, -1.0))) < 1e-15);
        let leo = fano_fourier_closed(pt(1, 1), Family::Leonhardt, 2).unwrap();
        assert!(max_abs_diff(&leo.op, &(&base * Complex64::new(0.0, 1.0))) < 1e-15);
        assert!(fano_fourier_closed(pt(1, 1), Family::Leonhardt, 3).is_err());
    }

    #[test]
    fn fourier_fano_is_single_monomial() {
        for fam in [Family::New, Family::Leonhardt] {
            for p in HalfPoint::grid(4) {
                let f = fano_fourier_closed(p, fam, 4).unwrap();
                let c = decompose(&f.op, 4).unwrap();
                let nz: Vec<_> = c.iter_nonzero(1e-12).collect();
                assert_eq!(nz.len(), 1);
                assert!((nz[0].1.norm() - 1.0 / 8.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn orbit_path_examples() {
        let cache = UnitaryCache::new();
        let pc = PhaseChoice::new(0, 0, 2).unwrap();
        let origin = fano_fourier_via_group(pt(0, 0), &pc, &cache).unwrap();
        assert!(max_abs_diff(&origin.op, &(identity(2) / Complex64::from(4.0))) < 1e-15);

        let p = pt(1, 3);
        let orbit = fano_fourier_via_group(p, &pc, &cache).unwrap();
        let closed = fano_fourier_closed(p, Family::New, 2).unwrap();
        assert!(max_abs_diff(&orbit.op, &closed.op) < 1e-10);

        let pc4 = PhaseChoice::new(0, 0, 4).unwrap();
        let a = fano_fourier_via_group_with(pt(1, 1), &pc4, 0, &cache).unwrap();
        let b = fano_fourier_via_group_with(pt(1, 1), &pc4, 3, &cache).unwrap();
        assert!(max_abs_diff(&a.op, &b.op) < 1e-10);

        let bad = PhaseChoice::new(1, 0, 4).unwrap();
        assert!(matches!(
            fano_fourier_via_group(pt(1, 1), &bad, &cache),
            Err(QpsError::Inadmissible { .. })
        ));
    }

    #[test]
    fn grid_traces_at_two() {
        let g = build_fano_grid(Family::New, 2).unwrap();
        for p in g.points() {
            let tr = g.cell(p).trace();
            let expect = if p.q_is_integer() && p.p_is_integer() { 0.5 } else { 0.0 };
            assert!((tr - Complex64::from(expect)).norm() < 1e-14, "{p:?} {tr}");
        }
        assert!(completeness_deviation(&g) < 1e-14);
    }

    #[test]
    fn odd_dimension_half_cells_vanish() {
        let g = build_fano_grid(Family::New, 3).unwrap();
        assert!(half_integer_norm(&g) < 1e-14);
        for q in 0..3 {
            for p in 0..3 {
                let r = odd_reduction_reference(q, p, 3).unwrap();
                assert!(max_abs_diff(&r, g.at(2 * q as usize, 2 * p as usize).as_ref()) < 1e-13);
            }
        }
    }

    #[test]
    fn odd_reduction_reference_properties() {
        let sum = (0..3)
            .flat_map(|q| (0..3).map(move |p| (q, p)))
            .map(|(q, p)| odd_reduction_reference(q, p, 3).unwrap())
            .fold(OperatorMatrix::zeros(3, 3), |a, b| a + b);
        assert!(max_abs_diff(&sum, &identity(3)) < 1e-14);

        // (0,0): (1/9) Σ ω_3^{−nm} P^{−m} Q^n, written out with explicit matrices
        let (q, p) = crate::algebra::build_clock_shift(3).unwrap();
        let pinv = p.adjoint();
        let w = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI / 3.0);
        let mut direct = OperatorMatrix::zeros(3, 3);
        for m in 0..3u32 {
            for n in 0..3u32 {
                direct += pinv.pow(m) * q.pow(n) * w.powi(-((n * m) as i32));
            }
        }
        direct /= Complex64::from(9.0);
        assert!(max_abs_diff(&direct, &odd_reduction_reference(0, 0, 3).unwrap()) < 1e-14);
        assert!(matches!(odd_reduction_reference(0, 0, 4), Err(QpsError::ReductionEvenDimension(4))));
    }

    #[test]
    fn new_family_folded_formula_matches() {
        for dim in 1..=5usize {
            let g = build_fano_grid(Family::New, dim).unwrap();
            for p in g.points() {
                let r = new_family_reference(p.dq, p.dp, dim).unwrap();
                assert!(max_abs_diff(&r, g.cell(p).as_ref()) < 1e-13);
            }
        }
    }

    #[test]
    fn leonhardt_reference_properties() {
        let g = build_fano_grid(Family::Leonhardt, 2).unwrap();
        for p in g.points() {
            let r = leonhardt_reference(p.dq, p.dp, 2).unwrap();
            assert!(max_abs_diff(&r, g.cell(p).as_ref()) < 1e-14);
            assert!(max_abs_diff(&r, &r.adjoint()) < 1e-14);
        }
        // summing the reference over p gives the projector/zero dichotomy
        for dq in 0..4 {
            let sum = (0..4).fold(OperatorMatrix::zeros(2, 2), |a, dp| a + leonhardt_reference(dq, dp, 2).unwrap());
            let target = if dq % 2 == 0 { position_projector(dq / 2, 2) } else { OperatorMatrix::zeros(2, 2) };
            assert!(max_abs_diff(&sum, &target) < 1e-14);
        }
        assert!(leonhardt_reference(0, 0, 3).is_err());
    }

    #[test]
    fn marginality_and_sensitivity() {
        let g = build_fano_grid(Family::Leonhardt, 2).unwrap();
        assert!(check_marginality(&g).max_deviation() < 1e-12);
        for dim in [2usize, 4, 6] {
            let g = build_fano_grid(Family::New, dim).unwrap();
            assert!(check_marginality(&g).passed(1e-12));
        }
        let mut g = build_fano_grid(Family::New, 2).unwrap();
        g.cell_mut(pt(1, 2))[(0, 0)] += Complex64::new(1e-3, 0.0);
        let r = check_marginality(&g);
        assert!(!r.passed(1e-12));
        assert!((r.max_deviation() - 1e-3).abs() < 1e-9);
    }

    #[test]
    fn covariance_small_cases() {
        let cache = UnitaryCache::new();
        for fam in [Family::New, Family::Leonhardt] {
            let g = build_fano_grid(fam, 2).unwrap();
            let pc = PhaseChoice::for_family(fam, 2).unwrap();
            assert!(check_covariance(&g, &Sp2Z::IDENTITY, &pc, &cache).unwrap().max_deviation < 1e-12);
            assert!(check_covariance(&g, &Sp2Z::LOWER, &pc, &cache).unwrap().passed(1e-9));
        }
        let g = build_fano_grid(Family::New, 4).unwrap();
        let pc = PhaseChoice::for_family(Family::New, 4).unwrap();
        for seed in 0..25 {
            let h = random_sl2(7, seed);
            assert!(check_covariance(&g, &h, &pc, &cache).unwrap().passed(1e-9), "{h}");
        }
        let wrong = PhaseChoice::for_family(Family::Leonhardt, 4).unwrap();
        assert!(matches!(
            check_covariance(&g, &Sp2Z::LOWER, &wrong, &cache),
            Err(QpsError::FamilyMismatch { .. })
        ));
    }

    #[test]
    fn forward_transform_recovers_closed_form() {
        for fam in [Family::New, Family::Leonhardt] {
            let g = build_fano_grid(fam, 4).unwrap();
            for p in HalfPoint::grid(4) {
                let f = forward_fourier(&g, p);
                assert!(max_abs_diff(&f, &fano_fourier_closed(p, fam, 4).unwrap().op) < 1e-10);
            }
        }
    }

    #[test]
    fn lazy_grid_matches_eager_cells() {
        let g = build_fano_grid(Family::New, LAZY_THRESHOLD + 1).unwrap();
        assert!(g.is_lazy());
        let cell = g.at(3, 5);
        assert!(max_abs_diff(cell.as_ref(), &new_family_reference(3, 5, LAZY_THRESHOLD + 1).unwrap()) < 1e-12);
    }

    #[test]
    fn inadmissible_orbit_grid_breaks_marginality() {
        let cache = UnitaryCache::new();
        let pc = PhaseChoice::new(1, 0, 4).unwrap();
        let g = build_fano_grid_via_orbit(&pc, &cache).unwrap();
        assert_eq!(g.class(), PhaseClass::Inadmissible);
        assert!(check_marginality(&g).max_deviation() > 1e-2);
    }
}
