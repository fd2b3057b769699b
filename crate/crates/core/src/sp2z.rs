//! Integer unimodular 2×2 matrices.
//!
//! An element is written `h = [[κ, μ], [λ, ν]]` with `κν − λμ = 1`. It acts on
//! the clock/shift pair as `Q ↦ P^λ Q^κ`, `P ↦ P^ν Q^μ` (up to phases), and on
//! phase-space labels as `(q, p) ↦ (νq − λp, −μq + κp)`.

use std::fmt;
use std::ops::Mul;

use num_integer::Integer;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{QpsError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Sp2Z {
    pub kappa: i64,
    pub mu: i64,
    pub lambda: i64,
    pub nu: i64,
}

impl Sp2Z {
    pub const IDENTITY: Sp2Z = Sp2Z { kappa: 1, mu: 0, lambda: 0, nu: 1 };
    /// `[[1, 0], [1, 1]]`
    pub const LOWER: Sp2Z = Sp2Z { kappa: 1, mu: 0, lambda: 1, nu: 1 };
    /// `[[1, 1], [0, 1]]`
    pub const UPPER: Sp2Z = Sp2Z { kappa: 1, mu: 1, lambda: 0, nu: 1 };
    /// `[[0, −1], [1, 0]]`
    pub const ROTATION: Sp2Z = Sp2Z { kappa: 0, mu: -1, lambda: 1, nu: 0 };
    pub const NEGATION: Sp2Z = Sp2Z { kappa: -1, mu: 0, lambda: 0, nu: -1 };

    /// Validates `[[κ, μ], [λ, ν]]`.
    pub fn new(kappa: i64, mu: i64, lambda: i64, nu: i64) -> Result<Self> {
        let det = kappa as i128 * nu as i128 - lambda as i128 * mu as i128;
        if det != 1 {
            return Err(QpsError::NotUnimodular(kappa, mu, lambda, nu, det as i64));
        }
        Ok(Self { kappa, mu, lambda, nu })
    }

    pub fn from_rows(rows: [[i64; 2]; 2]) -> Result<Self> {
        Self::new(rows[0][0], rows[0][1], rows[1][0], rows[1][1])
    }

    pub fn rows(&self) -> [[i64; 2]; 2] {
        [[self.kappa, self.mu], [self.lambda, self.nu]]
    }

    pub fn inverse(&self) -> Self {
        Self {
            kappa: self.nu,
            mu: -self.mu,
            lambda: -self.lambda,
            nu: self.kappa,
        }
    }

    pub fn max_entry(&self) -> i64 {
        [self.kappa, self.mu, self.lambda, self.nu]
            .iter()
            .map(|x| x.abs())
            .max()
            .unwrap_or(0)
    }

    /// Image of the doubled label `(dq, dp)` under `(q, p) ↦ (νq − λp, −μq + κp)`,
    /// reduced mod `2N`.
    pub fn relabel(&self, dq: usize, dp: usize, dim: usize) -> (usize, usize) {
        let m = 2 * dim as i128;
        let (x, y) = (dq as i128, dp as i128);
        let nx = self.nu as i128 * x - self.lambda as i128 * y;
        let ny = -(self.mu as i128) * x + self.kappa as i128 * y;
        (nx.rem_euclid(m) as usize, ny.rem_euclid(m) as usize)
    }
}

impl Mul for Sp2Z {
    type Output = Sp2Z;

    fn mul(self, r: Sp2Z) -> Sp2Z {
        Sp2Z {
            kappa: self.kappa * r.kappa + self.mu * r.lambda,
            mu: self.kappa * r.mu + self.mu * r.nu,
            lambda: self.lambda * r.kappa + self.nu * r.lambda,
            nu: self.lambda * r.mu + self.nu * r.nu,
        }
    }
}

impl fmt::Display for Sp2Z {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[[{}, {}], [{}, {}]]", self.kappa, self.mu, self.lambda, self.nu)
    }
}

pub fn validate_sl2(rows: [[i64; 2]; 2]) -> Result<Sp2Z> {
    Sp2Z::from_rows(rows)
}

/// Completes a coprime first column `(κ, λ)` to `[[κ, μ], [λ, ν]]`.
///
/// Among all solutions `(μ + tκ, ν + tλ)` the one with the smallest `|μ|` is
/// returned, ties going to `μ ≥ 0`.
pub fn complete_to_sl2(kappa: i64, lambda: i64) -> Result<Sp2Z> {
    let eg = kappa.extended_gcd(&lambda);
    if eg.gcd != 1 {
        return Err(QpsError::NotCoprime(kappa, lambda));
    }
    // x κ + y λ = 1  ⇒  ν = x, μ = −y
    let (mut mu, mut nu) = (-eg.y, eg.x);
    if kappa != 0 {
        let k = kappa.abs();
        let sign = kappa.signum();
        // shift μ by multiples of κ into (−|κ|/2, |κ|/2]
        let mut r = mu.rem_euclid(k);
        if 2 * r > k {
            r -= k;
        }
        let t = (r - mu) / k * sign;
        mu += t * kappa;
        nu += t * lambda;
    }
    Sp2Z::new(kappa, mu, lambda, nu)
}

/// Alternative completion `[[κ, μ + tκ], [λ, ν + tλ]]`.
pub fn shifted_completion(base: &Sp2Z, t: i64) -> Sp2Z {
    Sp2Z {
        kappa: base.kappa,
        mu: base.mu + t * base.kappa,
        lambda: base.lambda,
        nu: base.nu + t * base.lambda,
    }
}

/// A phase-space point written as `ξ·(λ, κ)` with `(κ, λ)` coprime.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OrbitReduction {
    pub xi: i64,
    pub kappa: i64,
    pub lambda: i64,
    /// Set for the origin, which has no orbit representative.
    pub degenerate: bool,
}

/// Reduces the doubled point `(dq, dp) = (2q_f, 2p_f)` to `ξ = gcd(dp, dq)`,
/// `κ = dp/ξ`, `λ = dq/ξ`.
pub fn reduce_point(dq: i64, dp: i64, dim: usize) -> Result<OrbitReduction> {
    crate::algebra::check_dim(dim)?;
    let bound = 2 * dim as i64;
    if !(0..bound).contains(&dq) || !(0..bound).contains(&dp) {
        return Err(QpsError::PointOutOfRange { dq, dp, bound });
    }
    if dq == 0 && dp == 0 {
        return Ok(OrbitReduction {
            xi: 0,
            kappa: 0,
            lambda: 0,
            degenerate: true,
        });
    }
    let xi = dp.gcd(&dq);
    Ok(OrbitReduction {
        xi,
        kappa: dp / xi,
        lambda: dq / xi,
        degenerate: false,
    })
}

/// Seeded random element with all entries bounded by `bound` in magnitude,
/// grown as a random word in `LOWER^{±1}`, `UPPER^{±1}` and `NEGATION`.
pub fn random_sl2(bound: i64, seed: u64) -> Sp2Z {
    let bound = bound.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gens = [
        Sp2Z::LOWER,
        Sp2Z::LOWER.inverse(),
        Sp2Z::UPPER,
        Sp2Z::UPPER.inverse(),
        Sp2Z::NEGATION,
    ];
    let len = rng.gen_range(1..=12);
    let mut h = Sp2Z::IDENTITY;
    for _ in 0..len {
        let candidate = h * gens[rng.gen_range(0..gens.len())];
        if candidate.max_entry() <= bound {
            h = candidate;
        }
    }
    h
}
