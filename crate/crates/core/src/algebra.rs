//! Root-of-unity arithmetic and the clock/shift operator algebra.
//!
//! Every phase that shows up in the construction is a power of
//! `ω_N = exp(2πi/N)`, possibly with a half-integer exponent. Storing the
//! exponent of `ω_{2N}` keeps all of them integral, so products and powers are
//! exact and floating error only enters when a matrix is assembled.
//!
//! Conventions: `Q|q⟩ = ω_N^q |q⟩` and `P|q⟩ = |q − 1⟩`, which gives
//! `PQ = ω_N QP` and `Q^a P^b = ω_N^{−ab} P^b Q^a`.

use std::f64::consts::PI;
use std::fmt;
use std::ops::Mul;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{QpsError, Result};

/// Dense `N × N` complex operator.
pub type OperatorMatrix = DMatrix<Complex64>;

pub const DEFAULT_TOLERANCE: f64 = 1e-10;

pub(crate) fn check_dim(dim: usize) -> Result<()> {
    if dim == 0 {
        Err(QpsError::InvalidDimension(dim))
    } else {
        Ok(())
    }
}

/// An exact power `ω_{2N}^k` with `0 ≤ k < 2N`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PhaseExponent {
    k: usize,
    dim: usize,
}

impl PhaseExponent {
    /// `ω_{2N}^k` for any integer `k`; equivalently `ω_N^{k/2}`.
    pub fn new(k: i64, dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self::reduced(k as i128, dim))
    }

    pub fn one(dim: usize) -> Self {
        Self { k: 0, dim }
    }

    pub(crate) fn reduced(k: i128, dim: usize) -> Self {
        let modulus = 2 * dim as i128;
        Self {
            k: k.rem_euclid(modulus) as usize,
            dim,
        }
    }

    pub fn exponent(&self) -> usize {
        self.k
    }

    /// The modulus `2N`.
    pub fn modulus(&self) -> usize {
        2 * self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_one(&self) -> bool {
        self.k == 0
    }

    pub fn conj(&self) -> Self {
        Self::reduced(-(self.k as i128), self.dim)
    }

    pub fn pow(&self, e: i64) -> Self {
        Self::reduced(self.k as i128 * e as i128, self.dim)
    }

    pub fn to_complex(&self) -> Complex64 {
        let m = self.modulus();
        // quarter turns come out exact
        if (4 * self.k).is_multiple_of(m) {
            return match 4 * self.k / m {
                0 => Complex64::new(1.0, 0.0),
                1 => Complex64::new(0.0, 1.0),
                2 => Complex64::new(-1.0, 0.0),
                _ => Complex64::new(0.0, -1.0),
            };
        }
        Complex64::from_polar(1.0, PI * self.k as f64 / self.dim as f64)
    }
}

impl Mul for PhaseExponent {
    type Output = PhaseExponent;

    fn mul(self, rhs: PhaseExponent) -> PhaseExponent {
        assert_eq!(self.dim, rhs.dim, "phase exponents of different dimension");
        Self::reduced(self.k as i128 + rhs.k as i128, self.dim)
    }
}

impl fmt::Display for PhaseExponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ω_{}^{}", self.modulus(), self.k)
    }
}

/// `omega_pow(k, N)`: the exponent `k` of `ω_{2N}` reduced into `[0, 2N)`.
pub fn omega_pow(k: i64, dim: usize) -> Result<PhaseExponent> {
    PhaseExponent::new(k, dim)
}

/// An exact scaled monomial `phase · P^m Q^n` with `0 ≤ m, n < N`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Monomial {
    pub phase: PhaseExponent,
    pub p_pow: usize,
    pub q_pow: usize,
}

impl Monomial {
    pub fn new(m: i64, n: i64, dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self::unchecked(PhaseExponent::one(dim), m, n))
    }

    pub(crate) fn unchecked(phase: PhaseExponent, m: i64, n: i64) -> Self {
        let dim = phase.dim() as i64;
        Self {
            phase,
            p_pow: m.rem_euclid(dim) as usize,
            q_pow: n.rem_euclid(dim) as usize,
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::unchecked(PhaseExponent::one(dim), 0, 0)
    }

    pub fn clock(dim: usize) -> Self {
        Self::unchecked(PhaseExponent::one(dim), 0, 1)
    }

    pub fn shift(dim: usize) -> Self {
        Self::unchecked(PhaseExponent::one(dim), 1, 0)
    }

    pub fn dim(&self) -> usize {
        self.phase.dim()
    }

    pub fn with_phase(self, phase: PhaseExponent) -> Self {
        Self {
            phase: self.phase * phase,
            ..self
        }
    }

    pub fn is_identity(&self) -> bool {
        self.phase.is_one() && self.p_pow == 0 && self.q_pow == 0
    }

    /// Hermitian adjoint, `(c P^a Q^b)† = c̄ ω_N^{−ab} P^{−a} Q^{−b}`.
    pub fn adjoint(&self) -> Self {
        let (a, b) = (self.p_pow as i128, self.q_pow as i128);
        let phase = self.phase.conj() * PhaseExponent::reduced(-2 * a * b, self.dim());
        Self::unchecked(phase, -(self.p_pow as i64), -(self.q_pow as i64))
    }

    /// Integer power; negative exponents go through the adjoint.
    pub fn pow(&self, e: i64) -> Self {
        if e < 0 {
            return self.adjoint().pow(-e);
        }
        // (P^a Q^b)^e = ω_N^{−ab·e(e−1)/2} P^{ea} Q^{eb}
        let (a, b, e) = (self.p_pow as i128, self.q_pow as i128, e as i128);
        let reorder = PhaseExponent::reduced(-a * b * e * (e - 1), self.dim());
        let phase = self.phase.pow(e as i64) * reorder;
        Self::unchecked(
            phase,
            (a * e % self.dim() as i128) as i64,
            (b * e % self.dim() as i128) as i64,
        )
    }

    pub fn to_matrix(&self) -> OperatorMatrix {
        let dim = self.dim();
        let c = self.phase.to_complex();
        let mut out = OperatorMatrix::zeros(dim, dim);
        // P^m Q^n |j⟩ = ω_N^{nj} |j − m⟩
        for j in 0..dim {
            let row = (j + dim - self.p_pow) % dim;
            let w = PhaseExponent::reduced(2 * (self.q_pow * j) as i128, dim);
            out[(row, j)] = c * w.to_complex();
        }
        out
    }
}

impl Mul for Monomial {
    type Output = Monomial;

    fn mul(self, rhs: Monomial) -> Monomial {
        assert_eq!(self.dim(), rhs.dim(), "monomials of different dimension");
        // Q^b P^c = ω_N^{−bc} P^c Q^b
        let swap = PhaseExponent::reduced(-2 * self.q_pow as i128 * rhs.p_pow as i128, self.dim());
        Monomial::unchecked(
            self.phase * rhs.phase * swap,
            (self.p_pow + rhs.p_pow) as i64,
            (self.q_pow + rhs.q_pow) as i64,
        )
    }
}

/// `P^m Q^n` as a dense matrix; `m` and `n` are reduced mod `N`.
pub fn monomial(m: i64, n: i64, dim: usize) -> Result<OperatorMatrix> {
    Ok(Monomial::new(m, n, dim)?.to_matrix())
}

/// The clock `Q` and shift `P` operators.
pub fn build_clock_shift(dim: usize) -> Result<(OperatorMatrix, OperatorMatrix)> {
    check_dim(dim)?;
    Ok((Monomial::clock(dim).to_matrix(), Monomial::shift(dim).to_matrix()))
}

/// Coefficients `c_{mn}` of `X = Σ c_{mn} P^m Q^n`.
#[derive(Clone, Debug, PartialEq)]
pub struct MonomialCoefficients {
    dim: usize,
    coeffs: Vec<Complex64>,
}

impl MonomialCoefficients {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            coeffs: vec![Complex64::new(0.0, 0.0); dim * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, m: usize, n: usize) -> Complex64 {
        self.coeffs[m * self.dim + n]
    }

    pub fn set(&mut self, m: usize, n: usize, value: Complex64) {
        self.coeffs[m * self.dim + n] = value;
    }

    /// Adds `scale · monomial` to the expansion.
    pub fn accumulate(&mut self, term: &Monomial, scale: Complex64) {
        self.coeffs[term.p_pow * self.dim + term.q_pow] += scale * term.phase.to_complex();
    }

    /// Nonzero entries as `((m, n), c_{mn})`.
    pub fn iter_nonzero(&self, tol: f64) -> impl Iterator<Item = ((usize, usize), Complex64)> + '_ {
        self.coeffs
            .iter()
            .enumerate()
            .filter(move |(_, c)| c.norm() > tol)
            .map(move |(i, c)| ((i / self.dim, i % self.dim), *c))
    }

    pub fn reconstruct(&self) -> OperatorMatrix {
        let dim = self.dim;
        let mut out = OperatorMatrix::zeros(dim, dim);
        for m in 0..dim {
            for n in 0..dim {
                let c = self.get(m, n);
                if c == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..dim {
                    let w = PhaseExponent::reduced(2 * (n * j) as i128, dim);
                    out[((j + dim - m) % dim, j)] += c * w.to_complex();
                }
            }
        }
        out
    }
}

/// Expands `x` in the trace-orthogonal basis, `c_{mn} = Tr[X (P^m Q^n)†] / N`.
pub fn decompose(x: &OperatorMatrix, dim: usize) -> Result<MonomialCoefficients> {
    check_dim(dim)?;
    if x.nrows() != dim || x.ncols() != dim {
        return Err(QpsError::DimensionMismatch {
            expected: dim,
            actual: x.nrows().max(x.ncols()),
        });
    }
    let mut out = MonomialCoefficients::zeros(dim);
    for m in 0..dim {
        for n in 0..dim {
            // (P^m Q^n)_{(j−m), j} = ω^{nj}, so Tr[X B†] = Σ_j X_{j−m, j} ω^{−nj}
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..dim {
                let w = PhaseExponent::reduced(-2 * (n * j) as i128, dim);
                acc += x[((j + dim - m) % dim, j)] * w.to_complex();
            }
            out.set(m, n, acc / dim as f64);
        }
    }
    Ok(out)
}

/// Largest entrywise modulus of `a − b`.
pub fn max_abs_diff(a: &OperatorMatrix, b: &OperatorMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

pub fn max_abs(a: &OperatorMatrix) -> f64 {
    a.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

pub fn identity(dim: usize) -> OperatorMatrix {
    OperatorMatrix::identity(dim, dim)
}

/// `u x u†`
pub fn conjugate(u: &OperatorMatrix, x: &OperatorMatrix) -> OperatorMatrix {
    u * x * u.adjoint()
}
