//! Single-oscillator Weyl algebra `[a, ā] = 1` with matrix-valued coefficients.
//!
//! A [`WeylPoly`] is a finite sum `Σ ā^p a^q ⊗ C_{p,q}` kept in normal order
//! (all `ā` to the left of all `a`). Coefficients act on a finite space that
//! commutes with the oscillator, so a product of two polynomials reorders the
//! oscillator words and multiplies the coefficient matrices in the given order.

use std::collections::BTreeMap;
use std::ops::{Add, Mul, Sub};

use crate::linop::embed_factors;
use crate::{max_norm, CMat, Error, Result, C64};

/// Monomials whose coefficient norm falls below this fraction of the largest
/// coefficient norm are dropped after multiplication.
const CLEANUP_RELATIVE: f64 = 1e-14;

#[derive(Clone, Debug, PartialEq)]
pub struct WeylPoly {
    dim: usize,
    bound: usize,
    terms: BTreeMap<(usize, usize), CMat>,
}

impl WeylPoly {
    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            bound: 0,
            terms: BTreeMap::new(),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_matrix(CMat::identity(dim, dim))
    }

    pub fn scalar(dim: usize, z: C64) -> Self {
        Self::from_matrix(CMat::identity(dim, dim) * z)
    }

    /// Oscillator-free element `1 ⊗ mat`.
    pub fn from_matrix(mat: CMat) -> Self {
        Self::monomial(0, 0, mat)
    }

    /// `ā^p a^q ⊗ mat`.
    pub fn monomial(p: usize, q: usize, mat: CMat) -> Self {
        assert_eq!(mat.nrows(), mat.ncols(), "coefficients must be square");
        let dim = mat.nrows();
        let mut terms = BTreeMap::new();
        terms.insert((p, q), mat);
        Self {
            dim,
            bound: p.max(q),
            terms,
        }
    }

    /// `ā^k` with identity coefficient.
    pub fn create_pow(dim: usize, k: usize) -> Self {
        Self::monomial(k, 0, CMat::identity(dim, dim))
    }

    /// `a^k` with identity coefficient.
    pub fn annihilate_pow(dim: usize, k: usize) -> Self {
        Self::monomial(0, k, CMat::identity(dim, dim))
    }

    /// `ā`.
    pub fn create(dim: usize) -> Self {
        Self::create_pow(dim, 1)
    }

    /// `a`.
    pub fn annihilate(dim: usize) -> Self {
        Self::annihilate_pow(dim, 1)
    }

    /// `ā a`.
    pub fn number(dim: usize) -> Self {
        Self::monomial(1, 1, CMat::identity(dim, dim))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Declared bound on `p` and `q`.
    pub fn bound(&self) -> usize {
        self.bound
    }

    /// Largest `p` or `q` actually present.
    pub fn degree(&self) -> usize {
        self.terms.keys().map(|&(p, q)| p.max(q)).max().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&(usize, usize), &CMat)> {
        self.terms.iter()
    }

    pub fn coeff(&self, p: usize, q: usize) -> Option<&CMat> {
        self.terms.get(&(p, q))
    }

    /// Tightens or widens the declared bound, failing if a present monomial exceeds it.
    pub fn with_bound(mut self, bound: usize) -> Result<Self> {
        let degree = self.degree();
        if degree > bound {
            return Err(Error::DegreeBound { degree, bound });
        }
        self.bound = bound;
        Ok(self)
    }

    fn check_dim(&self, other: &WeylPoly) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                left: self.dim,
                right: other.dim,
            });
        }
        Ok(())
    }

    fn accumulate(terms: &mut BTreeMap<(usize, usize), CMat>, key: (usize, usize), mat: CMat) {
        match terms.get_mut(&key) {
            Some(existing) => *existing += mat,
            None => {
                terms.insert(key, mat);
            }
        }
    }

    pub fn try_add(&self, other: &WeylPoly) -> Result<WeylPoly> {
        self.check_dim(other)?;
        let mut terms = self.terms.clone();
        for (&key, mat) in &other.terms {
            Self::accumulate(&mut terms, key, mat.clone());
        }
        Ok(Self {
            dim: self.dim,
            bound: self.bound.max(other.bound),
            terms,
        })
    }

    pub fn try_sub(&self, other: &WeylPoly) -> Result<WeylPoly> {
        self.try_add(&other.scale(C64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, z: C64) -> WeylPoly {
        Self {
            dim: self.dim,
            bound: self.bound,
            terms: self.terms.iter().map(|(&k, m)| (k, m * z)).collect(),
        }
    }

    /// Normal-ordered product, reordering with
    /// `a^q ā^r = Σ_k C(q,k) C(r,k) k! ā^{r-k} a^{q-k}`.
    pub fn try_mul(&self, other: &WeylPoly) -> Result<WeylPoly> {
        self.check_dim(other)?;
        let mut terms = BTreeMap::new();
        for (&(p1, q1), x) in &self.terms {
            for (&(p2, q2), y) in &other.terms {
                let xy = x * y;
                for k in 0..=q1.min(p2) {
                    let weight = binomial(q1, k) * binomial(p2, k) * factorial(k);
                    Self::accumulate(
                        &mut terms,
                        (p1 + p2 - k, q1 + q2 - k),
                        &xy * C64::new(weight, 0.0),
                    );
                }
            }
        }
        let mut out = Self {
            dim: self.dim,
            bound: self.bound + other.bound,
            terms,
        };
        out.cleanup();
        Ok(out)
    }

    /// Drops monomials that are negligible relative to the largest coefficient.
    pub fn cleanup(&mut self) {
        let largest = self.max_norm();
        if largest == 0.0 {
            self.terms.clear();
            return;
        }
        let cutoff = largest * CLEANUP_RELATIVE;
        self.terms.retain(|_, m| max_norm(m) >= cutoff);
    }

    /// Applies `f` to every coefficient.
    pub fn map_coeffs(&self, f: impl Fn(&CMat) -> CMat) -> WeylPoly {
        let terms: BTreeMap<_, _> = self.terms.iter().map(|(&k, m)| (k, f(m))).collect();
        let dim = terms.values().next().map_or(self.dim, |m: &CMat| m.nrows());
        Self {
            dim,
            bound: self.bound,
            terms,
        }
    }

    /// Lifts coefficients onto the tensor factors `positions` of a space with factor dims `dims`.
    pub fn embed(&self, dims: &[usize], positions: &[usize]) -> Result<WeylPoly> {
        let total: usize = dims.iter().product();
        let mut terms = BTreeMap::new();
        for (&key, m) in &self.terms {
            terms.insert(key, embed_factors(m, dims, positions)?);
        }
        Ok(Self {
            dim: total,
            bound: self.bound,
            terms,
        })
    }

    /// Largest coefficient entry over all monomials.
    pub fn max_norm(&self) -> f64 {
        self.terms.values().map(max_norm).fold(0.0, f64::max)
    }

    /// Max-norm of the coefficient-wise difference.
    pub fn distance(&self, other: &WeylPoly) -> Result<f64> {
        Ok(self.try_sub(other)?.max_norm())
    }

    /// `Σ_k ā^k X^k / k!`, exact because `X` is nilpotent.
    pub fn exp_raising(x: &CMat) -> Result<WeylPoly> {
        Self::nilpotent_exp(x, |k| (k, 0), 1.0)
    }

    /// `Σ_k (-1)^k a^k Y^k / k!`, exact because `Y` is nilpotent.
    pub fn exp_lowering(y: &CMat) -> Result<WeylPoly> {
        Self::nilpotent_exp(y, |k| (0, k), -1.0)
    }

    fn nilpotent_exp(
        x: &CMat,
        key: impl Fn(usize) -> (usize, usize),
        sign: f64,
    ) -> Result<WeylPoly> {
        let dim = x.nrows();
        let scale = max_norm(x).max(1.0);
        let mut terms = BTreeMap::new();
        let mut power = CMat::identity(dim, dim);
        let mut k = 0;
        loop {
            if max_norm(&power) <= 1e-13 * scale.powi(k as i32) {
                break;
            }
            if k >= dim {
                // A nilpotent d×d matrix satisfies X^d = 0.
                return Err(Error::NotNilpotent {
                    max_degree: dim.saturating_sub(1),
                });
            }
            let weight = sign.powi(k as i32) / factorial(k);
            terms.insert(key(k), &power * C64::new(weight, 0.0));
            power = &power * x;
            k += 1;
        }
        Ok(Self {
            dim,
            bound: k.saturating_sub(1),
            terms,
        })
    }

    /// `tr[x^{āa} W]` over Fock space, from the closed form
    /// `tr[x^{āa} ā^p a^q] = δ_{pq} p! x^p / (1 - x)^{p+1}`.
    ///
    /// The closed form is the analytic continuation of the geometric series and
    /// is valid on the whole unit circle except `x = 1`.
    pub fn regulated_trace(&self, x: C64) -> Result<CMat> {
        let one_minus = C64::new(1.0, 0.0) - x;
        if one_minus.norm() < 1e-12 {
            return Err(Error::SingularTwist);
        }
        let mut out = CMat::zeros(self.dim, self.dim);
        for (&(p, q), m) in &self.terms {
            if p == q {
                let weight = x.powu(p as u32) * factorial(p) / one_minus.powu(p as u32 + 1);
                out += m * weight;
            }
        }
        Ok(out)
    }

    /// Brute-force `Σ_{n ≤ n_max} x^n ⟨n|W|n⟩` with explicit truncated Fock matrices.
    pub fn fock_truncated_oracle(&self, x: C64, n_max: usize) -> Result<CMat> {
        if x.norm() >= 1.0 {
            return Err(Error::DivergentTrace(x.norm()));
        }
        // Apply a^q then ā^p to each basis state |n⟩ and read off ⟨n|·|n⟩.
        let mut out = CMat::zeros(self.dim, self.dim);
        for (&(p, q), m) in &self.terms {
            let mut diag_sum = C64::new(0.0, 0.0);
            let mut xn = C64::new(1.0, 0.0);
            for n in 0..=n_max {
                if p == q && n >= q {
                    let mut amp = 1.0f64;
                    let mut level = n;
                    for _ in 0..q {
                        amp *= (level as f64).sqrt();
                        level -= 1;
                    }
                    for _ in 0..p {
                        level += 1;
                        amp *= (level as f64).sqrt();
                    }
                    diag_sum += xn * amp;
                }
                xn *= x;
            }
            out += m * diag_sum;
        }
        Ok(out)
    }
}

/// Fock level beyond which `n^degree |x|^n` stays below `1e-17` of its peak size.
pub fn oracle_cutoff(degree: usize, x: C64) -> Result<usize> {
    let r = x.norm();
    if r >= 1.0 {
        return Err(Error::DivergentTrace(r));
    }
    let d = degree as f64;
    let mut n = 1usize;
    while (d * (n as f64).ln() + n as f64 * r.ln()) > -40.0 || (n as f64) < d / -r.ln() {
        n += 1;
    }
    Ok(n)
}

/// Closed-form trace against the truncated Fock sum, relative to the trace size.
pub fn check_trace_oracle(w: &WeylPoly, x: C64, tol: f64) -> Result<crate::VerificationReport> {
    let n_max = oracle_cutoff(w.degree(), x)?;
    let closed = w.regulated_trace(x)?;
    let brute = w.fock_truncated_oracle(x, n_max)?;
    let residual = max_norm(&(&closed - &brute)) / max_norm(&closed).max(1.0);
    Ok(crate::VerificationReport::new("trace_oracle", residual, tol)
        .with_complex("x", x)
        .with("degree", w.degree())
        .with("terms", w.len())
        .with("fock_cutoff", n_max))
}

/// Normal-ordered product of two Weyl polynomials.
pub fn weyl_mul(w1: &WeylPoly, w2: &WeylPoly) -> Result<WeylPoly> {
    w1.try_mul(w2)
}

/// `Σ_k ā^k X^k / k!`.
pub fn weyl_exp_raising(x: &CMat) -> Result<WeylPoly> {
    WeylPoly::exp_raising(x)
}

/// `Σ_k (-1)^k a^k Y^k / k!`.
pub fn weyl_exp_lowering(y: &CMat) -> Result<WeylPoly> {
    WeylPoly::exp_lowering(y)
}

/// Closed-form regulated trace, see [`WeylPoly::regulated_trace`].
pub fn regulated_trace(w: &WeylPoly, x: C64) -> Result<CMat> {
    w.regulated_trace(x)
}

/// Truncated Fock-space oracle, see [`WeylPoly::fock_truncated_oracle`].
pub fn fock_truncated_oracle(w: &WeylPoly, x: C64, n_max: usize) -> Result<CMat> {
    w.fock_truncated_oracle(x, n_max)
}

impl<'a> Mul<&'a WeylPoly> for &'a WeylPoly {
    type Output = WeylPoly;

    /// Panics on dimension mismatch; use [`WeylPoly::try_mul`] for a fallible product.
    fn mul(self, rhs: &WeylPoly) -> WeylPoly {
        self.try_mul(rhs).expect("Weyl product dimension mismatch")
    }
}

impl<'a> Add<&'a WeylPoly> for &'a WeylPoly {
    type Output = WeylPoly;

    fn add(self, rhs: &WeylPoly) -> WeylPoly {
        self.try_add(rhs).expect("Weyl sum dimension mismatch")
    }
}

impl<'a> Sub<&'a WeylPoly> for &'a WeylPoly {
    type Output = WeylPoly;

    fn sub(self, rhs: &WeylPoly) -> WeylPoly {
        self.try_sub(rhs).expect("Weyl difference dimension mismatch")
    }
}

pub(crate) fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}
