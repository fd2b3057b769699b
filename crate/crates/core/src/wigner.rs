//! Wigner grids `W(q, p) = Tr[Δ(q, p) ρ]` and the operations built on them.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::algebra::{check_dim, max_abs_diff, Monomial, OperatorMatrix, PhaseExponent};
use crate::error::{QpsError, Result};
use crate::fano::{FanoGrid, HalfPoint};
use crate::representation::{Family, PhaseClass};
use crate::sp2z::Sp2Z;

pub const STATE_TOLERANCE: f64 = 1e-9;
pub const REALNESS_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    matrix: OperatorMatrix,
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity to [`STATE_TOLERANCE`].
    pub fn from_matrix(matrix: OperatorMatrix) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(QpsError::InvalidState(format!(
                "matrix is {}×{}, not square",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        check_dim(matrix.nrows())?;
        let asym = max_abs_diff(&matrix, &matrix.adjoint());
        if asym > STATE_TOLERANCE {
            return Err(QpsError::InvalidState(format!("not Hermitian: max |ρ − ρ†| = {asym:.3e}")));
        }
        let tr = matrix.trace();
        if (tr - Complex64::new(1.0, 0.0)).norm() > STATE_TOLERANCE {
            return Err(QpsError::InvalidState(format!("trace {tr} differs from 1")));
        }
        let min_eig = matrix
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        if min_eig < -STATE_TOLERANCE {
            return Err(QpsError::InvalidState(format!("negative eigenvalue {min_eig:.3e}")));
        }
        Ok(Self { matrix })
    }

    /// `|ψ⟩⟨ψ|` after normalizing `ψ`.
    pub fn from_pure(amplitudes: &[Complex64]) -> Result<Self> {
        check_dim(amplitudes.len())?;
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(QpsError::InvalidState("state vector has zero norm".into()));
        }
        let dim = amplitudes.len();
        let psi: Vec<Complex64> = amplitudes.iter().map(|a| a / norm).collect();
        let m = OperatorMatrix::from_fn(dim, dim, |i, j| psi[i] * psi[j].conj());
        Self::from_matrix(m)
    }

    pub fn maximally_mixed(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self {
            matrix: OperatorMatrix::identity(dim, dim) / Complex64::from(dim as f64),
        })
    }

    /// Seeded random mixed state `G G† / Tr[G G†]` with Gaussian `G`.
    pub fn random(dim: usize, seed: u64) -> Result<Self> {
        check_dim(dim)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = OperatorMatrix::from_fn(dim, dim, |_, _| {
            Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
        });
        let m = &g * g.adjoint();
        let tr = m.trace();
        let mut m = m / tr;
        // exact Hermitian symmetrization
        m = (&m + m.adjoint()) / Complex64::from(2.0);
        Self::from_matrix(m)
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &OperatorMatrix {
        &self.matrix
    }

    /// `α ρ₁ + (1 − α) ρ₂`
    pub fn mix(&self, other: &DensityMatrix, alpha: f64) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(QpsError::DimensionMismatch {
                expected: self.dim(),
                actual: other.dim(),
            });
        }
        Self::from_matrix(&self.matrix * Complex64::from(alpha) + &other.matrix * Complex64::from(1.0 - alpha))
    }

    /// `U† ρ U`
    pub fn conjugated_by_adjoint(&self, u: &OperatorMatrix) -> Result<Self> {
        let m = u.adjoint() * &self.matrix * u;
        Self::from_matrix((&m + m.adjoint()) / Complex64::from(2.0))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StateKind {
    Pure,
    Density,
}

/// On-disk state: `{"dim": N, "kind": "pure" | "density", "data": [[re, im], ...]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateDocument {
    pub dim: usize,
    pub kind: StateKind,
    pub data: Vec<[f64; 2]>,
}

impl StateDocument {
    pub fn into_density(self) -> Result<DensityMatrix> {
        let expected = match self.kind {
            StateKind::Pure => self.dim,
            StateKind::Density => self.dim * self.dim,
        };
        if self.dim == 0 || self.data.len() != expected {
            return Err(QpsError::MalformedDocument(format!(
                "{:?} state of dim {} needs {} entries, found {}",
                self.kind,
                self.dim,
                expected,
                self.data.len()
            )));
        }
        let values: Vec<Complex64> = self.data.iter().map(|[re, im]| Complex64::new(*re, *im)).collect();
        match self.kind {
            StateKind::Pure => DensityMatrix::from_pure(&values),
            StateKind::Density => DensityMatrix::from_matrix(OperatorMatrix::from_row_slice(self.dim, self.dim, &values)),
        }
    }
}

pub fn load_state(document: &str) -> Result<DensityMatrix> {
    let doc: StateDocument =
        serde_json::from_str(document).map_err(|e| QpsError::MalformedDocument(e.to_string()))?;
    doc.into_density()
}

pub fn load_state_file(path: &Path) -> Result<DensityMatrix> {
    let text = std::fs::read_to_string(path)?;
    load_state(&text)
}

#[derive(Clone, Debug, PartialEq)]
pub struct WignerGrid {
    dim: usize,
    class: PhaseClass,
    values: Vec<f64>,
    /// Largest `|Im Tr[Δρ]|` discarded when the values were made real.
    pub imag_residue: f64,
}

impl WignerGrid {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn side(&self) -> usize {
        2 * self.dim
    }

    pub fn class(&self) -> PhaseClass {
        self.class
    }

    pub fn family(&self) -> Option<Family> {
        self.class.family()
    }

    pub fn get(&self, dq: usize, dp: usize) -> f64 {
        self.values[dq * self.side() + dp]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    /// `W′(q, p) = W(νq − λp, −μq + κp)`
    pub fn relabeled(&self, h: &Sp2Z) -> WignerGrid {
        let side = self.side();
        let values = (0..side * side)
            .map(|i| {
                let (dq, dp) = h.relabel(i / side, i % side, self.dim);
                self.get(dq, dp)
            })
            .collect();
        WignerGrid { values, ..self.clone() }
    }

    pub fn max_abs_diff(&self, other: &WignerGrid) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// CSV with header `dq,dp,q,p,w`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("dq,dp,q,p,w\n");
        for pt in HalfPoint::grid(self.dim) {
            let _ = writeln!(
                out,
                "{},{},{:.1},{:.1},{:.16e}",
                pt.dq,
                pt.dp,
                pt.q(),
                pt.p(),
                self.get(pt.dq, pt.dp)
            );
        }
        out
    }

    pub fn to_document(&self) -> WignerDocument {
        let side = self.side();
        WignerDocument {
            dim: self.dim,
            family: self.family().map(|f| f.name().to_string()).unwrap_or_else(|| "inadmissible".into()),
            values: self.values.chunks(side).map(|r| r.to_vec()).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WignerDocument {
    pub dim: usize,
    pub family: String,
    /// `values[dq][dp]`
    pub values: Vec<Vec<f64>>,
}

fn trace_product(a: &OperatorMatrix, b: &OperatorMatrix) -> Complex64 {
    let n = a.nrows();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

pub fn wigner_transform(rho: &DensityMatrix, grid: &FanoGrid) -> Result<WignerGrid> {
    if rho.dim() != grid.dim() {
        return Err(QpsError::DimensionMismatch {
            expected: grid.dim(),
            actual: rho.dim(),
        });
    }
    let mut imag_residue: f64 = 0.0;
    let values = grid
        .points()
        .map(|pt| {
            let w = trace_product(grid.cell(pt).as_ref(), rho.matrix());
            imag_residue = imag_residue.max(w.im.abs());
            w.re
        })
        .collect();
    if imag_residue > REALNESS_TOLERANCE {
        return Err(QpsError::Inconsistent(format!(
            "Wigner values are not real: imaginary residue {imag_residue:.3e}"
        )));
    }
    Ok(WignerGrid {
        dim: grid.dim(),
        class: grid.class(),
        values,
        imag_residue,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Marginals {
    /// `Σ_p W(q, p)`, indexed by `dq`.
    pub position: Vec<f64>,
    /// `Σ_q W(q, p)`, indexed by `dp`.
    pub momentum: Vec<f64>,
}

impl Marginals {
    /// Position probabilities on the integer points.
    pub fn position_distribution(&self) -> Vec<f64> {
        self.position.iter().step_by(2).copied().collect()
    }

    pub fn momentum_distribution(&self) -> Vec<f64> {
        self.momentum.iter().step_by(2).copied().collect()
    }

    /// Largest magnitude at half-integer points, which should vanish.
    pub fn half_integer_residue(&self) -> f64 {
        self.position
            .iter()
            .skip(1)
            .step_by(2)
            .chain(self.momentum.iter().skip(1).step_by(2))
            .map(|x| x.abs())
            .fold(0.0, f64::max)
    }
}

pub fn marginals(w: &WignerGrid) -> Marginals {
    let side = w.side();
    let position = (0..side).map(|dq| (0..side).map(|dp| w.get(dq, dp)).sum()).collect();
    let momentum = (0..side).map(|dp| (0..side).map(|dq| w.get(dq, dp)).sum()).collect();
    Marginals { position, momentum }
}

#[derive(Clone, Debug)]
pub struct MomentIdentity {
    pub lhs: OperatorMatrix,
    pub rhs: OperatorMatrix,
    pub deviation: f64,
}

/// Phase `c(a, b)` in `Σ ω_N^{bp + aq} Δ(q,p) = c(a, b) P^b Q^a`:
/// `ω_N^{(N−1)ab/2}` for the new family, `ω_N^{−ab/2}` for Leonhardt's.
pub fn moment_phase(family: Family, a: i64, b: i64, dim: usize) -> PhaseExponent {
    let (a, b, n) = (a as i128, b as i128, dim as i128);
    match family {
        Family::New => PhaseExponent::reduced((n - 1) * a * b, dim),
        Family::Leonhardt => PhaseExponent::reduced(-a * b, dim),
    }
}

fn check_moment_index(a: i64, b: i64, dim: usize) -> Result<()> {
    let n = dim as i64;
    if !(0..n).contains(&a) || !(0..n).contains(&b) {
        return Err(QpsError::MomentIndex { a, b, dim });
    }
    Ok(())
}

fn grid_family(grid: &FanoGrid) -> Result<Family> {
    grid.family()
        .ok_or_else(|| QpsError::Inconsistent("grid was not built for an admissible family".into()))
}

pub fn moment_identity(grid: &FanoGrid, a: i64, b: i64) -> Result<MomentIdentity> {
    let dim = grid.dim();
    check_moment_index(a, b, dim)?;
    let family = grid_family(grid)?;
    let mut lhs = OperatorMatrix::zeros(dim, dim);
    for pt in grid.points() {
        let w = PhaseExponent::reduced(b as i128 * pt.dp as i128 + a as i128 * pt.dq as i128, dim);
        lhs += grid.cell(pt).as_ref() * w.to_complex();
    }
    let rhs = Monomial::unchecked(moment_phase(family, a, b, dim), b, a).to_matrix();
    let deviation = max_abs_diff(&lhs, &rhs);
    Ok(MomentIdentity { lhs, rhs, deviation })
}

/// `Tr[P^b Q^a ρ]` from the phase-weighted sum of `W`.
pub fn monomial_moment(w: &WignerGrid, a: i64, b: i64) -> Result<Complex64> {
    let dim = w.dim();
    check_moment_index(a, b, dim)?;
    let family = w
        .family()
        .ok_or_else(|| QpsError::Inconsistent("Wigner grid has no admissible family".into()))?;
    let mut acc = Complex64::new(0.0, 0.0);
    for pt in HalfPoint::grid(dim) {
        let ph = PhaseExponent::reduced(b as i128 * pt.dp as i128 + a as i128 * pt.dq as i128, dim);
        acc += ph.to_complex() * w.get(pt.dq, pt.dp);
    }
    Ok(acc * moment_phase(family, a, b, dim).conj().to_complex())
}

/// Inverts the Wigner map through the monomial expansion
/// `ρ = (1/N) Σ_{m,n} Tr[ρ (P^m Q^n)†] P^m Q^n`.
pub fn reconstruct_density(w: &WignerGrid, grid: &FanoGrid) -> Result<DensityMatrix> {
    if w.dim() != grid.dim() || w.class() != grid.class() {
        return Err(QpsError::Inconsistent(format!(
            "Wigner grid ({}, {:?}) does not come from Fano grid ({}, {:?})",
            w.dim(),
            w.class(),
            grid.dim(),
            grid.class()
        )));
    }
    grid_family(grid)?;
    let dim = w.dim();
    let n = dim as i64;
    let mut coeffs = crate::algebra::MonomialCoefficients::zeros(dim);
    for m in 0..n {
        for nn in 0..n {
            // (P^m Q^n)† = ω_N^{−nm} P^{−m} Q^{−n}
            let moment = monomial_moment(w, (n - nn) % n, (n - m) % n)?;
            let c = moment * PhaseExponent::reduced(-2 * (nn * m) as i128, dim).to_complex();
            coeffs.set(m as usize, nn as usize, c / dim as f64);
        }
    }
    let m = coeffs.reconstruct();
    DensityMatrix::from_matrix((&m + m.adjoint()) / Complex64::from(2.0))
}
