//! Projective unitary representation of Sp(2,ℤ) on the clock/shift algebra.
//!
//! `U_h` is defined only through its conjugation action
//!
//! ```text
//! U Q U† = a_Q(h) P^λ Q^κ,    U P U† = a_P(h) P^ν Q^μ,
//! ```
//!
//! so it is computed as the (one-dimensional) null space of the linear system
//! `Q′U − UQ = 0`, `P′U − UP = 0`. The coefficients `a_Q`, `a_P` depend on two
//! integers `n₊`, `n₋`; only their residues mod `N` matter.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, RwLock};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::algebra::{check_dim, conjugate, max_abs_diff, Monomial, OperatorMatrix, PhaseExponent};
use crate::error::{QpsError, Result};
use crate::sp2z::Sp2Z;

/// Required ratio between the two smallest singular values of the
/// intertwining system.
pub const SINGULAR_GAP: f64 = 1e6;
pub const UNITARITY_LIMIT: f64 = 1e-8;
pub const PROJECTIVE_TOLERANCE: f64 = 1e-9;

/// The two Fano families that satisfy marginality and covariance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Family {
    /// `n₊ ≡ n₋ ≡ 0 (mod N)`; exists for every `N`.
    New,
    /// `n₊ ≡ n₋ ≡ N/2 (mod N)`; even `N` only.
    Leonhardt,
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::New => "new",
            Family::Leonhardt => "leonhardt",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Family {
    type Err = QpsError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "new" => Ok(Family::New),
            "leonhardt" => Ok(Family::Leonhardt),
            other => Err(QpsError::Inconsistent(format!("unknown family `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PhaseClass {
    New,
    Leonhardt,
    Inadmissible,
}

impl PhaseClass {
    pub fn family(&self) -> Option<Family> {
        match self {
            PhaseClass::New => Some(Family::New),
            PhaseClass::Leonhardt => Some(Family::Leonhardt),
            PhaseClass::Inadmissible => None,
        }
    }
}

impl From<Family> for PhaseClass {
    fn from(f: Family) -> Self {
        match f {
            Family::New => PhaseClass::New,
            Family::Leonhardt => PhaseClass::Leonhardt,
        }
    }
}

/// The integers `(n₊, n₋)` that fix the phases of the representation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PhaseChoice {
    pub n_plus: i64,
    pub n_minus: i64,
    pub dim: usize,
}

impl PhaseChoice {
    pub fn new(n_plus: i64, n_minus: i64, dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self { n_plus, n_minus, dim })
    }

    /// Canonical representative of a family: `0` or `N/2`.
    pub fn for_family(family: Family, dim: usize) -> Result<Self> {
        check_dim(dim)?;
        match family {
            Family::New => Ok(Self { n_plus: 0, n_minus: 0, dim }),
            Family::Leonhardt if dim.is_multiple_of(2) => {
                let half = (dim / 2) as i64;
                Ok(Self { n_plus: half, n_minus: half, dim })
            }
            Family::Leonhardt => Err(QpsError::LeonhardtOddDimension(dim)),
        }
    }

    pub fn classify(&self) -> PhaseClass {
        classify_phase_choice(self)
    }

    /// `(n₊ mod N, n₋ mod N)`, which is all the coefficients depend on.
    pub fn residues(&self) -> (i64, i64) {
        let n = self.dim as i64;
        (self.n_plus.rem_euclid(n), self.n_minus.rem_euclid(n))
    }

    /// Whether `U_h` composes projectively for this choice: `n₊ + n₋ ≡ 0 (mod N)`.
    ///
    /// Otherwise `U_identity` is itself a nontrivial monomial and
    /// `U_{1}U_{1} ≁ U_{1}`.
    pub fn is_projective(&self) -> bool {
        (self.n_plus + self.n_minus).rem_euclid(self.dim as i64) == 0
    }
}

pub fn classify_phase_choice(pc: &PhaseChoice) -> PhaseClass {
    let (np, nm) = pc.residues();
    let n = pc.dim as i64;
    if np == 0 && nm == 0 {
        PhaseClass::New
    } else if n % 2 == 0 && np == n / 2 && nm == n / 2 {
        PhaseClass::Leonhardt
    } else {
        PhaseClass::Inadmissible
    }
}

/// `(a_Q(h), a_P(h))` as exact `ω_{2N}` exponents:
///
/// ```text
/// a_Q = ω_N^{κλ(N−1)/2} ω_N^{−κn₊ + (λ−1)n₋}
/// a_P = ω_N^{νμ(N−1)/2} ω_N^{−(μ−1)n₊ + νn₋}
/// ```
pub fn coefficients(h: &Sp2Z, pc: &PhaseChoice) -> (PhaseExponent, PhaseExponent) {
    let n = pc.dim as i128;
    let (k, mu, l, nu) = (h.kappa as i128, h.mu as i128, h.lambda as i128, h.nu as i128);
    let (np, nm) = (pc.n_plus as i128, pc.n_minus as i128);
    let a_q = k * l * (n - 1) + 2 * (-k * np + (l - 1) * nm);
    let a_p = nu * mu * (n - 1) + 2 * (-(mu - 1) * np + nu * nm);
    (
        PhaseExponent::reduced(a_q, pc.dim),
        PhaseExponent::reduced(a_p, pc.dim),
    )
}

/// Images `(U Q U†, U P U†)` as exact monomials.
pub fn conjugation_images(h: &Sp2Z, pc: &PhaseChoice) -> (Monomial, Monomial) {
    let (a_q, a_p) = coefficients(h, pc);
    (
        Monomial::unchecked(a_q, h.lambda, h.kappa),
        Monomial::unchecked(a_p, h.nu, h.mu),
    )
}

#[derive(Clone, Debug)]
pub struct RepUnitary {
    pub h: Sp2Z,
    pub matrix: OperatorMatrix,
    pub phase_choice: PhaseChoice,
    /// Ratio of the second-smallest to the smallest singular value.
    pub singular_gap: f64,
    /// `max(‖UU† − 1‖, ‖UQU† − Q′‖, ‖UPU† − P′‖)`.
    pub residual: f64,
}

impl RepUnitary {
    pub fn dim(&self) -> usize {
        self.phase_choice.dim
    }

    pub fn conjugate(&self, x: &OperatorMatrix) -> OperatorMatrix {
        conjugate(&self.matrix, x)
    }

    /// `(‖UU† − 1‖, ‖UQU† − a_Q P^λQ^κ‖, ‖UPU† − a_P P^νQ^μ‖)`, entrywise max.
    pub fn residuals(&self) -> (f64, f64, f64) {
        let dim = self.dim();
        let u = &self.matrix;
        let unitarity = max_abs_diff(&(u * u.adjoint()), &OperatorMatrix::identity(dim, dim));
        let (q_img, p_img) = conjugation_images(&self.h, &self.phase_choice);
        let q = Monomial::clock(dim).to_matrix();
        let p = Monomial::shift(dim).to_matrix();
        (
            unitarity,
            max_abs_diff(&conjugate(u, &q), &q_img.to_matrix()),
            max_abs_diff(&conjugate(u, &p), &p_img.to_matrix()),
        )
    }
}

/// Stacked intertwining system `[Q′⊗1 − 1⊗Qᵀ; P′⊗1 − 1⊗Pᵀ]` acting on the
/// row-major vectorization of `U`.
fn intertwining_system(q: &OperatorMatrix, q_img: &OperatorMatrix, p: &OperatorMatrix, p_img: &OperatorMatrix) -> DMatrix<Complex64> {
    let dim = q.nrows();
    let n2 = dim * dim;
    let mut a = DMatrix::<Complex64>::zeros(2 * n2, n2);
    for (block, (src, img)) in [(q, q_img), (p, p_img)].into_iter().enumerate() {
        let offset = block * n2;
        for i in 0..dim {
            for j in 0..dim {
                let row = offset + i * dim + j;
                for k in 0..dim {
                    // (X′U)_{ij} = Σ_k X′_{ik} U_{kj}
                    a[(row, k * dim + j)] += img[(i, k)];
                    // (UX)_{ij} = Σ_k U_{ik} X_{kj}
                    a[(row, i * dim + k)] -= src[(k, j)];
                }
            }
        }
    }
    a
}

/// Solves for `U_h`.
pub fn build_unitary(h: &Sp2Z, pc: &PhaseChoice) -> Result<RepUnitary> {
    let dim = pc.dim;
    check_dim(dim)?;
    let (q_img, p_img) = conjugation_images(h, pc);
    let q = Monomial::clock(dim).to_matrix();
    let p = Monomial::shift(dim).to_matrix();
    let a = intertwining_system(&q, &q_img.to_matrix(), &p, &p_img.to_matrix());

    let svd = a.svd(false, true);
    let v_t = svd.v_t.as_ref().expect("right singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));

    let smallest = svd.singular_values[order[0]];
    let gap = if order.len() > 1 {
        let second = svd.singular_values[order[1]];
        if smallest > 0.0 {
            second / smallest
        } else {
            f64::INFINITY
        }
    } else {
        f64::INFINITY
    };
    if gap < SINGULAR_GAP {
        return Err(QpsError::RepresentationFailure {
            h: h.to_string(),
            gap,
            required: SINGULAR_GAP,
        });
    }

    // rows of V† are conjugated right singular vectors
    let row = v_t.row(order[0]);
    let scale = (dim as f64).sqrt();
    let mut u = OperatorMatrix::from_fn(dim, dim, |i, j| row[i * dim + j].conj() * scale);

    let threshold = 1.0 / (2.0 * scale);
    let pivot = (0..dim * dim)
        .map(|idx| u[(idx / dim, idx % dim)])
        .find(|z| z.norm() > threshold)
        .unwrap_or(Complex64::new(1.0, 0.0));
    u *= pivot.conj() / pivot.norm();

    let mut rep = RepUnitary {
        h: *h,
        matrix: u,
        phase_choice: *pc,
        singular_gap: gap,
        residual: 0.0,
    };
    let (r1, r2, r3) = rep.residuals();
    rep.residual = r1.max(r2).max(r3);
    if rep.residual > UNITARITY_LIMIT {
        return Err(QpsError::NumericalFailure {
            h: h.to_string(),
            residual: rep.residual,
        });
    }
    Ok(rep)
}

/// Checks `U_{h′} U_h = e^{iφ} U_{h′h}` and returns `φ`.
///
/// `first` is `U_{h′}`, `second` is `U_h`. The value of `φ` depends on the
/// global-phase convention of [`build_unitary`].
pub fn compose_phase(first: &RepUnitary, second: &RepUnitary) -> Result<f64> {
    if first.phase_choice != second.phase_choice {
        return Err(QpsError::Inconsistent(
            "compose_phase needs unitaries built from the same phase choice".into(),
        ));
    }
    let product = build_unitary(&(first.h * second.h), &first.phase_choice)?;
    let (phi, residual) = projective_residual(first, second, &product);
    if residual > PROJECTIVE_TOLERANCE {
        return Err(QpsError::ProjectivityViolation { residual });
    }
    Ok(phi)
}

/// `(φ, ‖M − e^{iφ}1‖_max)` with `M = U_{h′}U_h U_{h′h}†`.
pub fn projective_residual(first: &RepUnitary, second: &RepUnitary, product: &RepUnitary) -> (f64, f64) {
    let dim = first.dim();
    let m = &first.matrix * &second.matrix * product.matrix.adjoint();
    let mean = m.diagonal().iter().sum::<Complex64>() / dim as f64;
    let phi = mean.arg();
    let target = OperatorMatrix::identity(dim, dim) * Complex64::from_polar(1.0, phi);
    (phi, max_abs_diff(&m, &target))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
struct CacheKey {
    h: Sp2Z,
    n_plus: i64,
    n_minus: i64,
    dim: usize,
}

/// Thread-safe memo of built unitaries keyed by `(h, n₊ mod N, n₋ mod N, N)`.
#[derive(Default)]
pub struct UnitaryCache {
    map: RwLock<HashMap<CacheKey, Arc<RepUnitary>>>,
}

impl UnitaryCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, h: &Sp2Z, pc: &PhaseChoice) -> Result<Arc<RepUnitary>> {
        let (n_plus, n_minus) = pc.residues();
        let key = CacheKey { h: *h, n_plus, n_minus, dim: pc.dim };
        if let Some(hit) = self.map.read().expect("cache poisoned").get(&key) {
            return Ok(Arc::clone(hit));
        }
        let built = Arc::new(build_unitary(h, pc)?);
        let mut map = self.map.write().expect("cache poisoned");
        Ok(Arc::clone(map.entry(key).or_insert(built)))
    }

    pub fn len(&self) -> usize {
        self.map.read().expect("cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
