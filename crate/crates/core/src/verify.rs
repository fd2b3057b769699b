//! Invariant suites behind `qps verify`.
//!
//! Every check reports a measured deviation against a threshold. A suite that
//! does not apply to the configured dimension or family is reported as
//! skipped rather than passed.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::algebra::{decompose, max_abs_diff, Monomial, OperatorMatrix, PhaseExponent};
use crate::error::{QpsError, Result};
use crate::fano::{
    build_fano_grid, build_fano_grid_from_monomials, check_covariance, check_marginality, completeness_deviation,
    fano_fourier_via_group, fano_fourier_via_group_with, forward_fourier, fourier_closed_monomial, half_integer_norm,
    hermiticity_deviation, leonhardt_reference, odd_reduction_reference, trace_deviation, FanoGrid, HalfPoint,
};
use crate::representation::{build_unitary, projective_residual, Family, PhaseChoice, UnitaryCache};
use crate::sp2z::{random_sl2, Sp2Z};
use crate::wigner::{marginals, moment_identity, reconstruct_density, wigner_transform, DensityMatrix};

/// Floor for checks that go through the numerically constructed `U_h`.
pub const UNITARY_FLOOR: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Algebra,
    Fano,
    Marginality,
    Covariance,
    Projectivity,
    Equivalence,
    Reduction,
    Moments,
    Orbit,
    Wigner,
}

impl Suite {
    pub const ALL: [Suite; 10] = [
        Suite::Algebra,
        Suite::Fano,
        Suite::Marginality,
        Suite::Covariance,
        Suite::Projectivity,
        Suite::Equivalence,
        Suite::Reduction,
        Suite::Moments,
        Suite::Orbit,
        Suite::Wigner,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Suite::Algebra => "algebra",
            Suite::Fano => "fano",
            Suite::Marginality => "marginality",
            Suite::Covariance => "covariance",
            Suite::Projectivity => "projectivity",
            Suite::Equivalence => "equivalence",
            Suite::Reduction => "reduction",
            Suite::Moments => "moments",
            Suite::Orbit => "orbit",
            Suite::Wigner => "wigner",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Parses a suite name; `all` expands to every suite.
pub fn parse_suites(s: &str) -> std::result::Result<Vec<Suite>, String> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim) {
        if part.eq_ignore_ascii_case("all") {
            return Ok(Suite::ALL.to_vec());
        }
        out.push(part.parse()?);
    }
    Ok(out)
}

impl FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Suite::ALL
            .iter()
            .copied()
            .find(|x| x.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                let names: Vec<_> = Suite::ALL.iter().map(|x| x.name()).collect();
                format!("unknown suite '{s}' (expected all or one of {})", names.join(", "))
            })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Status {
    Pass,
    Fail,
    Skip(String),
}

#[derive(Clone, Debug)]
pub struct Check {
    pub suite: Suite,
    pub name: String,
    /// The identity under test, used in diagnostics.
    pub identity: &'static str,
    pub deviation: f64,
    pub tolerance: f64,
    pub status: Status,
}

impl Check {
    fn measured(suite: Suite, name: impl Into<String>, identity: &'static str, deviation: f64, tolerance: f64) -> Self {
        // NaN never passes
        let status = if deviation < tolerance { Status::Pass } else { Status::Fail };
        Self {
            suite,
            name: name.into(),
            identity,
            deviation,
            tolerance,
            status,
        }
    }

    fn skipped(suite: Suite, reason: impl Into<String>) -> Self {
        Self {
            suite,
            name: "-".into(),
            identity: "",
            deviation: 0.0,
            tolerance: 0.0,
            status: Status::Skip(reason.into()),
        }
    }

    fn failed(suite: Suite, name: impl Into<String>, identity: &'static str, err: &QpsError) -> Self {
        Self {
            suite,
            name: format!("{} ({err})", name.into()),
            identity,
            deviation: f64::INFINITY,
            tolerance: 0.0,
            status: Status::Fail,
        }
    }
}

#[derive(Clone, Debug)]
pub struct VerifyConfig {
    pub dim: usize,
    pub family: Family,
    pub tolerance: f64,
    pub seed: u64,
    /// Perturbs one closed-form Fourier phase before any suite runs.
    pub mutate: Option<u64>,
}

#[derive(Clone, Debug)]
pub struct Report {
    pub checks: Vec<Check>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != Status::Fail)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| c.status == Status::Fail)
    }

    pub fn table(&self) -> String {
        let mut out = format!("{:<13} {:<40} {:>12} {:>10}  status\n", "suite", "check", "deviation", "tolerance");
        for c in &self.checks {
            let status = match &c.status {
                Status::Pass => "PASS".to_string(),
                Status::Fail => "FAIL".to_string(),
                Status::Skip(why) => format!("SKIP ({why})"),
            };
            if matches!(c.status, Status::Skip(_)) {
                out += &format!("{:<13} {:<40} {:>12} {:>10}  {status}\n", c.suite.name(), c.name, "-", "-");
            } else {
                out += &format!(
                    "{:<13} {:<40} {:>12.3e} {:>10.1e}  {status}\n",
                    c.suite.name(),
                    c.name,
                    c.deviation,
                    c.tolerance
                );
            }
        }
        out
    }
}

/// The point and phase offset a mutation seed selects.
pub fn mutation_target(seed: u64, dim: usize) -> (HalfPoint, i64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let side = 2 * dim;
    let point = HalfPoint {
        dq: rng.gen_range(0..side),
        dp: rng.gen_range(0..side),
    };
    (point, rng.gen_range(1..2 * dim as i64))
}

/// Closed-form grid, optionally with one Fourier phase perturbed.
pub fn grid_under_test(family: Family, dim: usize, mutate: Option<u64>) -> Result<FanoGrid> {
    match mutate {
        None => build_fano_grid(family, dim),
        Some(seed) => {
            build_fano_grid(family, dim)?;
            let (target, offset) = mutation_target(seed, dim);
            build_fano_grid_from_monomials(family.into(), dim, move |pt| {
                let m = fourier_closed_monomial(pt, family, dim);
                if pt == target {
                    m.with_phase(PhaseExponent::new(offset, dim).expect("dim checked"))
                } else {
                    m
                }
            })
        }
    }
}

pub fn run(cfg: &VerifyConfig, suites: &[Suite]) -> Result<Report> {
    let pc = PhaseChoice::for_family(cfg.family, cfg.dim)?;
    let grid = grid_under_test(cfg.family, cfg.dim, cfg.mutate)?;
    let cache = UnitaryCache::new();
    let ctx = Ctx {
        cfg,
        pc,
        grid: &grid,
        cache: &cache,
    };
    let mut checks = Vec::new();
    for suite in suites {
        checks.extend(ctx.run_suite(*suite));
    }
    Ok(Report { checks })
}

struct Ctx<'a> {
    cfg: &'a VerifyConfig,
    pc: PhaseChoice,
    grid: &'a FanoGrid,
    cache: &'a UnitaryCache,
}

impl Ctx<'_> {
    fn dim(&self) -> usize {
        self.cfg.dim
    }

    fn tol(&self) -> f64 {
        self.cfg.tolerance
    }

    fn unitary_tol(&self) -> f64 {
        self.cfg.tolerance.max(UNITARY_FLOOR)
    }

    fn run_suite(&self, suite: Suite) -> Vec<Check> {
        match suite {
            Suite::Algebra => self.algebra(),
            Suite::Fano => self.fano(),
            Suite::Marginality => self.marginality(),
            Suite::Covariance => self.covariance(),
            Suite::Projectivity => self.projectivity(),
            Suite::Equivalence => self.equivalence(),
            Suite::Reduction => self.reduction(),
            Suite::Moments => self.moments(),
            Suite::Orbit => self.orbit(),
            Suite::Wigner => self.wigner(),
        }
    }

    fn algebra(&self) -> Vec<Check> {
        let dim = self.dim();
        let s = Suite::Algebra;
        let p = Monomial::shift(dim);
        let q = Monomial::clock(dim);
        let n = dim as i64;
        let exact = |ok: bool| if ok { 0.0 } else { 1.0 };
        let omega = PhaseExponent::new(2, dim).expect("dim checked");
        let mut out = vec![
            Check::measured(s, "Q^N = 1 (exact)", "Q^N = 1", exact(q.pow(n).is_identity()), 0.5),
            Check::measured(s, "P^N = 1 (exact)", "P^N = 1", exact(p.pow(n).is_identity()), 0.5),
            Check::measured(s, "PQ = ω_N QP (exact)", "PQ = ω_N QP", exact(p * q == (q * p).with_phase(omega)), 0.5),
        ];
        // Tr[B_kl B_mn†] = N δ_km δ_ln
        let basis: Vec<OperatorMatrix> = (0..n)
            .flat_map(|k| (0..n).map(move |l| (k, l)))
            .map(|(k, l)| Monomial::new(k, l, dim).expect("dim checked").to_matrix())
            .collect();
        let mut orth: f64 = 0.0;
        for (i, a) in basis.iter().enumerate() {
            for (j, b) in basis.iter().enumerate() {
                let t = (a * b.adjoint()).trace();
                let target = if i == j { dim as f64 } else { 0.0 };
                orth = orth.max((t - Complex64::from(target)).norm());
            }
        }
        out.push(Check::measured(s, "trace orthogonality", "Tr[B_kl B_mn†] = N δ δ", orth, self.tol()));
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        let x = OperatorMatrix::from_fn(dim, dim, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let dev = match decompose(&x, dim) {
            Ok(c) => max_abs_diff(&c.reconstruct(), &x),
            Err(_) => f64::INFINITY,
        };
        out.push(Check::measured(s, "monomial decomposition round trip", "X = Σ c_mn P^m Q^n", dev, self.tol()));
        out
    }

    fn fano(&self) -> Vec<Check> {
        let s = Suite::Fano;
        vec![
            Check::measured(s, "hermiticity", "Δ(q,p) = Δ(q,p)†", hermiticity_deviation(self.grid), self.tol()),
            Check::measured(s, "completeness", "Σ Δ(q,p) = 1", completeness_deviation(self.grid), self.tol()),
            Check::measured(s, "traces", "Tr Δ(q,p) = 1/N or 0", trace_deviation(self.grid), self.tol()),
        ]
    }

    fn marginality(&self) -> Vec<Check> {
        let s = Suite::Marginality;
        let r = check_marginality(self.grid);
        let max = |v: &[f64]| v.iter().copied().fold(0.0, f64::max);
        vec![
            Check::measured(s, "position sums", "Σ_p Δ(q,p) = |q⟩⟨q| or 0", max(&r.position), self.tol()),
            Check::measured(s, "momentum sums", "Σ_q Δ(q,p) = |p⟩⟨p| or 0", max(&r.momentum), self.tol()),
        ]
    }

    fn covariance(&self) -> Vec<Check> {
        let s = Suite::Covariance;
        let identity = "U_h Δ(q,p) U_h† = Δ(νq − λp, −μq + κp)";
        let mut hs = vec![Sp2Z::LOWER, Sp2Z::UPPER, Sp2Z::ROTATION, Sp2Z::NEGATION];
        hs.extend((0..5).map(|i| random_sl2(7, self.cfg.seed.wrapping_add(i))));
        hs.into_iter()
            .map(|h| match check_covariance(self.grid, &h, &self.pc, self.cache) {
                Ok(r) => Check::measured(s, format!("h = {h}"), identity, r.max_deviation, self.unitary_tol()),
                Err(e) => Check::failed(s, format!("h = {h}"), identity, &e),
            })
            .collect()
    }

    fn projectivity(&self) -> Vec<Check> {
        let s = Suite::Projectivity;
        let identity = "U(h′)U(h) = e^{iφ} U(h′h)";
        let mut worst: f64 = 0.0;
        for i in 0..10u64 {
            let a = random_sl2(7, self.cfg.seed.wrapping_add(2 * i));
            let b = random_sl2(7, self.cfg.seed.wrapping_add(2 * i + 1));
            let built = self
                .cache
                .get(&a, &self.pc)
                .and_then(|ua| Ok((ua, self.cache.get(&b, &self.pc)?)))
                .and_then(|(ua, ub)| Ok((ua, ub, build_unitary(&(a * b), &self.pc)?)));
            match built {
                Ok((ua, ub, uab)) => worst = worst.max(projective_residual(&ua, &ub, &uab).1),
                Err(e) => return vec![Check::failed(s, format!("pair {a} · {b}"), identity, &e)],
            }
        }
        vec![Check::measured(s, "10 random pairs", identity, worst, self.unitary_tol())]
    }

    fn equivalence(&self) -> Vec<Check> {
        let s = Suite::Equivalence;
        let dim = self.dim();
        if !dim.is_multiple_of(2) {
            return vec![Check::skipped(s, "Leonhardt family needs even N")];
        }
        let grid = if self.cfg.family == Family::Leonhardt {
            Ok(self.grid.clone())
        } else {
            build_fano_grid(Family::Leonhardt, dim)
        };
        let dev = grid.and_then(|g| {
            g.points().try_fold(0.0f64, |acc, pt| {
                Ok(acc.max(max_abs_diff(&leonhardt_reference(pt.dq, pt.dp, dim)?, g.cell(pt).as_ref())))
            })
        });
        let identity = "closed-form Leonhardt grid = Leonhardt double sum";
        match dev {
            Ok(d) => vec![Check::measured(s, "Leonhardt closed form vs double sum", identity, d, self.tol())],
            Err(e) => vec![Check::failed(s, "Leonhardt closed form vs double sum", identity, &e)],
        }
    }

    fn reduction(&self) -> Vec<Check> {
        let s = Suite::Reduction;
        let dim = self.dim();
        if dim.is_multiple_of(2) || self.cfg.family != Family::New {
            return vec![Check::skipped(s, "needs odd N and the new family")];
        }
        let n = dim as i64;
        let mut dev: f64 = 0.0;
        for q in 0..n {
            for p in 0..n {
                let r = odd_reduction_reference(q, p, dim).expect("odd dim");
                dev = dev.max(max_abs_diff(&r, self.grid.at(2 * q as usize, 2 * p as usize).as_ref()));
            }
        }
        vec![
            Check::measured(s, "half-integer cells vanish", "Δ = 0 off the integer grid", half_integer_norm(self.grid), self.tol()),
            Check::measured(s, "integer cells match reduction", "Δ(q,p) = odd-N reduction formula", dev, self.tol()),
        ]
    }

    fn moments(&self) -> Vec<Check> {
        let s = Suite::Moments;
        let n = self.dim() as i64;
        let identity = "Σ ω_N^{bp+aq} Δ(q,p) = c(a,b) P^b Q^a";
        let mut worst: f64 = 0.0;
        for a in 0..n {
            for b in 0..n {
                match moment_identity(self.grid, a, b) {
                    Ok(m) => worst = worst.max(m.deviation),
                    Err(e) => return vec![Check::failed(s, format!("(a, b) = ({a}, {b})"), identity, &e)],
                }
            }
        }
        vec![Check::measured(s, "all (a, b)", identity, worst, self.tol())]
    }

    fn orbit(&self) -> Vec<Check> {
        let s = Suite::Orbit;
        let identity = "Δ_F from the group orbit = closed-form Δ_F";
        let mut worst: f64 = 0.0;
        let mut shifted: f64 = 0.0;
        for pt in self.grid.points() {
            let closed = forward_fourier(self.grid, pt);
            let via = match fano_fourier_via_group(pt, &self.pc, self.cache) {
                Ok(v) => v,
                Err(e) => return vec![Check::failed(s, format!("point ({}, {})", pt.dq, pt.dp), identity, &e)],
            };
            worst = worst.max(max_abs_diff(&closed, &via.op));
            if (pt.dq + pt.dp) % 3 == 1 {
                match fano_fourier_via_group_with(pt, &self.pc, 1, self.cache) {
                    Ok(alt) => shifted = shifted.max(max_abs_diff(&alt.op, &via.op)),
                    Err(e) => return vec![Check::failed(s, "shifted completion", identity, &e)],
                }
            }
        }
        vec![
            Check::measured(s, "every grid point", identity, worst, self.unitary_tol()),
            Check::measured(s, "completion independence", "Δ_F independent of the Bézout completion", shifted, self.unitary_tol()),
        ]
    }

    fn wigner(&self) -> Vec<Check> {
        let s = Suite::Wigner;
        let dim = self.dim();
        let (mut real, mut norm, mut trip, mut half, mut prob) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
        for i in 0..5u64 {
            let rho = match DensityMatrix::random(dim, self.cfg.seed.wrapping_add(i)) {
                Ok(r) => r,
                Err(e) => return vec![Check::failed(s, "random state", "", &e)],
            };
            let w = match wigner_transform(&rho, self.grid) {
                Ok(w) => w,
                Err(e) => return vec![Check::failed(s, "realness", "Im Tr[Δρ] = 0", &e)],
            };
            real = real.max(w.imag_residue);
            norm = norm.max((w.total() - 1.0).abs());
            let m = marginals(&w);
            half = half.max(m.half_integer_residue());
            for (q, x) in m.position_distribution().iter().enumerate() {
                prob = prob.max((x - rho.matrix()[(q, q)].re).abs());
            }
            trip = trip.max(match reconstruct_density(&w, self.grid) {
                Ok(back) => max_abs_diff(back.matrix(), rho.matrix()),
                Err(_) => f64::INFINITY,
            });
        }
        vec![
            Check::measured(s, "realness", "Im Tr[Δρ] = 0", real, self.tol()),
            Check::measured(s, "normalization", "Σ W = 1", norm, self.tol().max(1e-9)),
            Check::measured(s, "position marginal", "Σ_p W(q,p) = ⟨q|ρ|q⟩", prob, self.tol()),
            Check::measured(s, "half-integer marginals", "Σ_p W(q,p) = 0 at half-integer q", half, self.tol()),
            Check::measured(s, "reconstruction round trip", "ρ → W → ρ", trip, self.tol()),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(dim: usize, family: Family, mutate: Option<u64>) -> VerifyConfig {
        VerifyConfig {
            dim,
            family,
            tolerance: 1e-10,
            seed: 0,
            mutate,
        }
    }

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        assert_eq!(parse_suites("all").unwrap().len(), 10);
        assert_eq!(parse_suites("marginality,moments").unwrap(), vec![Suite::Marginality, Suite::Moments]);
        assert!(parse_suites("bogus").is_err());
    }

    #[test]
    fn clean_builds_pass() {
        for (dim, fam) in [(1, Family::New), (2, Family::New), (2, Family::Leonhardt), (3, Family::New)] {
            let r = run(&cfg(dim, fam, None), &Suite::ALL).unwrap();
            assert!(r.passed(), "N = {dim} {fam}:\n{}", r.table());
        }
    }

    #[test]
    fn mutations_are_caught() {
        for seed in 0..8 {
            for (dim, fam) in [(2, Family::New), (3, Family::New), (4, Family::Leonhardt)] {
                let r = run(&cfg(dim, fam, Some(seed)), &Suite::ALL).unwrap();
                assert!(!r.passed(), "mutation {seed} at N = {dim} slipped through");
            }
        }
    }

    #[test]
    fn skips_are_reported() {
        let r = run(&cfg(2, Family::New, None), &[Suite::Reduction]).unwrap();
        assert!(matches!(r.checks[0].status, Status::Skip(_)));
        assert!(r.passed());
        assert!(r.table().contains("SKIP"));
    }
}
