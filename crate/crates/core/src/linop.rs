//! Spin-s representations, chain embeddings and dense operator algebra.
//!
//! Site basis is ordered by descending S3 eigenvalue `s, s-1, ..., -s`, so the
//! highest-weight state is basis vector 0. On the chain, site 1 is the most
//! significant tensor factor and the reference state with all spins up is
//! basis vector 0.

use std::fmt;
use std::ops::{Add, Mul, Sub};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{c, max_norm, CMat, CVec, Error, Result, C64};

/// Spin label stored as the integer `2s`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct Spin {
    twice_s: u32,
}

impl Spin {
    pub const HALF: Spin = Spin { twice_s: 1 };
    pub const ONE: Spin = Spin { twice_s: 2 };
    pub const THREE_HALVES: Spin = Spin { twice_s: 3 };

    pub fn new(twice_s: u32) -> Result<Self> {
        if twice_s == 0 {
            return Err(Error::InvalidSpin("2s must be at least 1".into()));
        }
        Ok(Self { twice_s })
    }

    pub fn twice(self) -> u32 {
        self.twice_s
    }

    pub fn value(self) -> f64 {
        self.twice_s as f64 / 2.0
    }

    pub fn dim(self) -> usize {
        self.twice_s as usize + 1
    }

    /// S3 eigenvalue of site basis vector `k`.
    pub fn weight(self, k: usize) -> f64 {
        self.value() - k as f64
    }

    /// Quadratic Casimir eigenvalue `2s(s+1)` of `S+S- + S-S+ + 2 S3^2`.
    pub fn casimir(self) -> f64 {
        let s = self.value();
        2.0 * s * (s + 1.0)
    }
}

impl TryFrom<u32> for Spin {
    type Error = Error;

    fn try_from(value: u32) -> Result<Self> {
        Spin::new(value)
    }
}

impl From<Spin> for u32 {
    fn from(s: Spin) -> u32 {
        s.twice_s
    }
}

impl fmt::Display for Spin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.twice_s % 2 == 0 {
            write!(f, "{}", self.twice_s / 2)
        } else {
            write!(f, "{}/2", self.twice_s)
        }
    }
}

impl FromStr for Spin {
    type Err = Error;

    /// Accepts `"1/2"`, `"1"`, `"3/2"`, ...
    fn from_str(text: &str) -> Result<Self> {
        let text = text.trim();
        let bad = || Error::InvalidSpin(format!("cannot parse {text:?}"));
        match text.split_once('/') {
            Some((num, "2")) => {
                let num: u32 = num.trim().parse().map_err(|_| bad())?;
                if num % 2 == 0 {
                    return Err(bad());
                }
                Spin::new(num)
            }
            Some(_) => Err(bad()),
            None => {
                let whole: u32 = text.parse().map_err(|_| bad())?;
                Spin::new(2 * whole)
            }
        }
    }
}

/// Operator on a single site, dimension `2s+1`.
#[derive(Clone, Debug, PartialEq)]
pub struct SiteOp {
    mat: CMat,
}

impl SiteOp {
    pub fn new(mat: CMat) -> Result<Self> {
        check_square(&mat)?;
        Ok(Self { mat })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            mat: CMat::identity(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.mat
    }

    pub fn into_matrix(self) -> CMat {
        self.mat
    }

    pub fn inverse(&self) -> Result<SiteOp> {
        let inv = self
            .mat
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::LinearAlgebra("singular site operator".into()))?;
        Ok(SiteOp { mat: inv })
    }
}

/// Operator on the chain Hilbert space `(C^d)^{⊗N}`.
#[derive(Clone, Debug, PartialEq)]
pub struct QSpaceOp {
    n_sites: usize,
    site_dim: usize,
    mat: CMat,
}

impl QSpaceOp {
    pub fn new(n_sites: usize, site_dim: usize, mat: CMat) -> Result<Self> {
        check_square(&mat)?;
        let expected = site_dim.pow(n_sites as u32);
        if mat.nrows() != expected {
            return Err(Error::DimensionMismatch {
                left: mat.nrows(),
                right: expected,
            });
        }
        Ok(Self {
            n_sites,
            site_dim,
            mat,
        })
    }

    pub(crate) fn from_parts(n_sites: usize, site_dim: usize, mat: CMat) -> Self {
        debug_assert_eq!(mat.nrows(), site_dim.pow(n_sites as u32));
        Self {
            n_sites,
            site_dim,
            mat,
        }
    }

    pub fn identity(n_sites: usize, site_dim: usize) -> Self {
        let dim = site_dim.pow(n_sites as u32);
        Self::from_parts(n_sites, site_dim, CMat::identity(dim, dim))
    }

    pub fn zeros(n_sites: usize, site_dim: usize) -> Self {
        let dim = site_dim.pow(n_sites as u32);
        Self::from_parts(n_sites, site_dim, CMat::zeros(dim, dim))
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn site_dim(&self) -> usize {
        self.site_dim
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.mat
    }

    pub fn into_matrix(self) -> CMat {
        self.mat
    }

    pub fn scale(&self, z: C64) -> QSpaceOp {
        Self::from_parts(self.n_sites, self.site_dim, &self.mat * z)
    }

    pub fn apply(&self, v: &CVec) -> CVec {
        &self.mat * v
    }

    pub fn adjoint(&self) -> QSpaceOp {
        Self::from_parts(self.n_sites, self.site_dim, self.mat.adjoint())
    }

    pub fn max_norm(&self) -> f64 {
        max_norm(&self.mat)
    }

    fn same_space(&self, other: &QSpaceOp) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                left: self.dim(),
                right: other.dim(),
            });
        }
        Ok(())
    }
}

impl<'a> Add<&'a QSpaceOp> for &'a QSpaceOp {
    type Output = QSpaceOp;

    fn add(self, rhs: &QSpaceOp) -> QSpaceOp {
        QSpaceOp::from_parts(self.n_sites, self.site_dim, &self.mat + &rhs.mat)
    }
}

impl<'a> Sub<&'a QSpaceOp> for &'a QSpaceOp {
    type Output = QSpaceOp;

    fn sub(self, rhs: &QSpaceOp) -> QSpaceOp {
        QSpaceOp::from_parts(self.n_sites, self.site_dim, &self.mat - &rhs.mat)
    }
}

impl<'a> Mul<&'a QSpaceOp> for &'a QSpaceOp {
    type Output = QSpaceOp;

    fn mul(self, rhs: &QSpaceOp) -> QSpaceOp {
        QSpaceOp::from_parts(self.n_sites, self.site_dim, &self.mat * &rhs.mat)
    }
}

fn check_square(mat: &CMat) -> Result<()> {
    if mat.nrows() != mat.ncols() {
        return Err(Error::DimensionMismatch {
            left: mat.nrows(),
            right: mat.ncols(),
        });
    }
    if mat.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::InvalidParameter("non-finite matrix entry".into()));
    }
    Ok(())
}

/// The sl(2) generators `(S3, S+, S-)` in the descending-weight basis.
pub fn spin_generators(spin: Spin) -> (SiteOp, SiteOp, SiteOp) {
    let d = spin.dim();
    let s = spin.value();
    let mut s3 = CMat::zeros(d, d);
    let mut sp = CMat::zeros(d, d);
    let mut sm = CMat::zeros(d, d);
    for k in 0..d {
        let m = spin.weight(k);
        s3[(k, k)] = c(m, 0.0);
        if k > 0 {
            // S+ |m> = sqrt((s-m)(s+m+1)) |m+1>, and |m+1> sits at index k-1.
            let amp = ((s - m) * (s + m + 1.0)).sqrt();
            sp[(k - 1, k)] = c(amp, 0.0);
            sm[(k, k - 1)] = c(amp, 0.0);
        }
    }
    (SiteOp { mat: s3 }, SiteOp { mat: sp }, SiteOp { mat: sm })
}

/// Casimir `S+S- + S-S+ + 2 S3^2` built from the generators.
pub fn casimir_op(spin: Spin) -> SiteOp {
    let (s3, sp, sm) = spin_generators(spin);
    let (s3, sp, sm) = (s3.mat, sp.mat, sm.mat);
    SiteOp {
        mat: &sp * &sm + &sm * &sp + (&s3 * &s3) * c(2.0, 0.0),
    }
}

/// Site spin flip `K`: basis reversal, so `K S± K⁻¹ = S∓` and `K S3 K⁻¹ = -S3`.
pub fn spin_flip_k(spin: Spin) -> SiteOp {
    let d = spin.dim();
    let mut k = CMat::zeros(d, d);
    for i in 0..d {
        k[(i, d - 1 - i)] = C64::new(1.0, 0.0);
    }
    SiteOp { mat: k }
}

/// Kronecker product of square matrices, first factor most significant.
pub fn kron_all(factors: &[&CMat]) -> CMat {
    let mut acc = CMat::identity(1, 1);
    for f in factors {
        acc = acc.kronecker(f);
    }
    acc
}

/// Places `op` on the tensor factors listed in `positions` (in that order)
/// of a space with factor dimensions `dims`, acting as identity elsewhere.
pub fn embed_factors(op: &CMat, dims: &[usize], positions: &[usize]) -> Result<CMat> {
    let sub_dim: usize = positions.iter().map(|&p| dims[p]).product();
    if op.nrows() != sub_dim || op.ncols() != sub_dim {
        return Err(Error::DimensionMismatch {
            left: op.nrows(),
            right: sub_dim,
        });
    }
    let total: usize = dims.iter().product();
    let nf = dims.len();
    let digits = |mut idx: usize| {
        let mut out = vec![0usize; nf];
        for f in (0..nf).rev() {
            out[f] = idx % dims[f];
            idx /= dims[f];
        }
        out
    };
    let sub_index = |d: &[usize]| positions.iter().fold(0, |acc, &p| acc * dims[p] + d[p]);
    let all: Vec<Vec<usize>> = (0..total).map(digits).collect();
    let mut out = CMat::zeros(total, total);
    for (r, dr) in all.iter().enumerate() {
        for (col, dc) in all.iter().enumerate() {
            let spectators_match = (0..nf)
                .filter(|f| !positions.contains(f))
                .all(|f| dr[f] == dc[f]);
            if spectators_match {
                out[(r, col)] = op[(sub_index(dr), sub_index(dc))];
            }
        }
    }
    Ok(out)
}

/// Chain geometry: spin label and number of sites.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Chain {
    pub spin: Spin,
    pub n_sites: usize,
}

impl Chain {
    pub fn new(spin: Spin, n_sites: usize) -> Result<Self> {
        if n_sites == 0 {
            return Err(Error::InvalidParameter("chain needs at least one site".into()));
        }
        Ok(Self { spin, n_sites })
    }

    pub fn site_dim(&self) -> usize {
        self.spin.dim()
    }

    pub fn dim(&self) -> usize {
        self.site_dim().pow(self.n_sites as u32)
    }

    /// `2sN`, the largest magnon number and the oscillator degree bound.
    pub fn max_magnons(&self) -> usize {
        self.spin.twice() as usize * self.n_sites
    }

    pub fn identity(&self) -> QSpaceOp {
        QSpaceOp::identity(self.n_sites, self.site_dim())
    }

    pub fn zeros(&self) -> QSpaceOp {
        QSpaceOp::zeros(self.n_sites, self.site_dim())
    }

    /// `op` acting on site `site` (1-based).
    pub fn embed(&self, op: &SiteOp, site: usize) -> Result<QSpaceOp> {
        embed_site(op, site, self.n_sites)
    }

    /// Sum over sites of an embedded site operator.
    pub fn total(&self, op: &SiteOp) -> QSpaceOp {
        let mut acc = self.zeros();
        for i in 1..=self.n_sites {
            acc = &acc + &embed_site(op, i, self.n_sites).expect("site index in range");
        }
        acc
    }

    pub fn s3_total(&self) -> QSpaceOp {
        self.total(&spin_generators(self.spin).0)
    }

    pub fn sp_total(&self) -> QSpaceOp {
        self.total(&spin_generators(self.spin).1)
    }

    pub fn sm_total(&self) -> QSpaceOp {
        self.total(&spin_generators(self.spin).2)
    }

    /// `K ⊗ ... ⊗ K`.
    pub fn spin_flip(&self) -> QSpaceOp {
        chain_spin_flip(self.spin, self.n_sites)
    }

    /// Tensor product of highest-weight states: basis vector 0.
    pub fn omega_plus(&self) -> CVec {
        let mut v = CVec::zeros(self.dim());
        v[0] = C64::new(1.0, 0.0);
        v
    }

    /// Tensor product of lowest-weight states: the last basis vector.
    pub fn omega_minus(&self) -> CVec {
        let mut v = CVec::zeros(self.dim());
        v[self.dim() - 1] = C64::new(1.0, 0.0);
        v
    }

    /// Number of spin lowerings (relative to the all-up state) in basis vector `index`.
    pub fn magnons_of(&self, mut index: usize) -> usize {
        let d = self.site_dim();
        let mut total = 0;
        for _ in 0..self.n_sites {
            total += index % d;
            index /= d;
        }
        total
    }

    /// Basis indices of the sector with `m` magnons, in increasing order.
    pub fn sector_indices(&self, m: usize) -> Vec<usize> {
        (0..self.dim()).filter(|&i| self.magnons_of(i) == m).collect()
    }

    pub fn sector_dim(&self, m: usize) -> usize {
        self.sector_indices(m).len()
    }
}

/// `op` on site `site_index` (1-based, site 1 leftmost) of an `n_sites` chain.
pub fn embed_site(op: &SiteOp, site_index: usize, n_sites: usize) -> Result<QSpaceOp> {
    if site_index == 0 || site_index > n_sites {
        return Err(Error::SiteIndex {
            index: site_index,
            n_sites,
        });
    }
    let d = op.dim();
    let left = CMat::identity(d.pow(site_index as u32 - 1), d.pow(site_index as u32 - 1));
    let right_dim = d.pow((n_sites - site_index) as u32);
    let right = CMat::identity(right_dim, right_dim);
    let mat = left.kronecker(&op.mat).kronecker(&right);
    Ok(QSpaceOp::from_parts(n_sites, d, mat))
}

/// `AB - BA`.
pub fn commutator(a: &QSpaceOp, b: &QSpaceOp) -> Result<QSpaceOp> {
    a.same_space(b)?;
    Ok(&(a * b) - &(b * a))
}

/// Spin flip `K ⊗ ... ⊗ K` on an `n_sites` chain.
pub fn chain_spin_flip(spin: Spin, n_sites: usize) -> QSpaceOp {
    let k = spin_flip_k(spin);
    let factors: Vec<&CMat> = std::iter::repeat_n(k.matrix(), n_sites).collect();
    QSpaceOp::from_parts(n_sites, spin.dim(), kron_all(&factors))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spins() -> Vec<Spin> {
        (1..=4).map(|t| Spin::new(t).unwrap()).collect()
    }

    fn site_comm(a: &CMat, b: &CMat) -> CMat {
        a * b - b * a
    }

    #[test]
    fn spin_half_is_pauli_realization() {
        let (s3, sp, sm) = spin_generators(Spin::HALF);
        let h = c(0.5, 0.0);
        let one = c(1.0, 0.0);
        let z = c(0.0, 0.0);
        assert_eq!(*s3.matrix(), CMat::from_row_slice(2, 2, &[h, z, z, -h]));
        assert_eq!(*sp.matrix(), CMat::from_row_slice(2, 2, &[z, one, z, z]));
        assert_eq!(*sm.matrix(), CMat::from_row_slice(2, 2, &[z, z, one, z]));
    }

    #[test]
    fn spin_one_ladder_entries() {
        let (s3, sp, sm) = spin_generators(Spin::ONE);
        assert!((sp.matrix()[(0, 1)].re - 2f64.sqrt()).abs() < 1e-15);
        assert!((sp.matrix()[(1, 2)].re - 2f64.sqrt()).abs() < 1e-15);
        let res = site_comm(sp.matrix(), sm.matrix()) - s3.matrix() * c(2.0, 0.0);
        assert!(max_norm(&res) < 1e-14);
    }

    #[test]
    fn commutation_relations_and_casimir() {
        for spin in spins() {
            let (s3, sp, sm) = spin_generators(spin);
            let (s3, sp, sm) = (s3.matrix(), sp.matrix(), sm.matrix());
            assert!(max_norm(&(site_comm(sp, sm) - s3 * c(2.0, 0.0))) < 1e-13);
            assert!(max_norm(&(site_comm(s3, sp) - sp)) < 1e-13);
            assert!(max_norm(&(site_comm(s3, sm) + sm)) < 1e-13);
            let cas = casimir_op(spin);
            let expected = CMat::identity(spin.dim(), spin.dim()) * c(spin.casimir(), 0.0);
            assert!(max_norm(&(cas.matrix() - expected)) < 1e-13);
        }
    }

    #[test]
    fn highest_and_lowest_weight() {
        for spin in spins() {
            let (s3, sp, sm) = spin_generators(spin);
            let d = spin.dim();
            let up = CVec::from_fn(d, |i, _| c(if i == 0 { 1.0 } else { 0.0 }, 0.0));
            let down = CVec::from_fn(d, |i, _| c(if i == d - 1 { 1.0 } else { 0.0 }, 0.0));
            assert!((sp.matrix() * &up).norm() < 1e-15);
            assert!((sm.matrix() * &down).norm() < 1e-15);
            assert!((s3.matrix() * &up - &up * c(spin.value(), 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn total_magnetization_spectrum_two_sites() {
        let chain = Chain::new(Spin::HALF, 2).unwrap();
        let s3 = chain.s3_total();
        let diag: Vec<f64> = (0..4).map(|i| s3.matrix()[(i, i)].re).collect();
        assert_eq!(diag, vec![1.0, 0.0, 0.0, -1.0]);
        assert!(max_norm(&(s3.matrix() - CMat::from_diagonal(&s3.matrix().diagonal()))) == 0.0);
    }

    #[test]
    fn embed_identity_and_disjoint_commute() {
        let id = SiteOp::identity(2);
        for i in 1..=3 {
            assert_eq!(embed_site(&id, i, 3).unwrap(), QSpaceOp::identity(3, 2));
        }
        let (_, _, sm) = spin_generators(Spin::HALF);
        let a = embed_site(&sm, 1, 2).unwrap();
        let b = embed_site(&sm, 2, 2).unwrap();
        assert_eq!(&a * &b, &b * &a);
        assert!(matches!(
            embed_site(&sm, 3, 2),
            Err(Error::SiteIndex { index: 3, n_sites: 2 })
        ));
        assert!(embed_site(&sm, 0, 2).is_err());
    }

    #[test]
    fn embed_preserves_spectrum_multiplicity() {
        let chain = Chain::new(Spin::ONE, 2).unwrap();
        let (s3, _, _) = spin_generators(Spin::ONE);
        let e = chain.embed(&s3, 2).unwrap();
        let mut diag: Vec<f64> = (0..9).map(|i| e.matrix()[(i, i)].re).collect();
        diag.sort_by(f64::total_cmp);
        assert_eq!(diag, vec![-1.0, -1.0, -1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn commutator_examples() {
        let chain = Chain::new(Spin::HALF, 2).unwrap();
        let x = chain.sm_total();
        assert_eq!(commutator(&x, &x).unwrap().max_norm(), 0.0);
        assert_eq!(commutator(&chain.identity(), &x).unwrap().max_norm(), 0.0);
        let lhs = commutator(&chain.sp_total(), &chain.sm_total()).unwrap();
        let rhs = chain.s3_total().scale(c(2.0, 0.0));
        assert!((&lhs - &rhs).max_norm() < 1e-15);
        let other = QSpaceOp::identity(3, 2);
        assert!(matches!(
            commutator(&x, &other),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn spin_flip_conjugation() {
        for spin in spins() {
            let k = spin_flip_k(spin);
            let kinv = k.inverse().unwrap();
            let (s3, sp, sm) = spin_generators(spin);
            let conj = |op: &SiteOp| k.matrix() * op.matrix() * kinv.matrix();
            assert!(max_norm(&(conj(&sp) - sm.matrix())) < 1e-14);
            assert!(max_norm(&(conj(&sm) - sp.matrix())) < 1e-14);
            assert!(max_norm(&(conj(&s3) + s3.matrix())) < 1e-14);
            let d = spin.dim();
            assert_eq!(k.matrix() * k.matrix(), CMat::identity(d, d));
        }
        let k = spin_flip_k(Spin::HALF);
        let one = c(1.0, 0.0);
        let z = c(0.0, 0.0);
        assert_eq!(*k.matrix(), CMat::from_row_slice(2, 2, &[z, one, one, z]));
    }

    #[test]
    fn chain_flip_maps_reference_states() {
        let chain = Chain::new(Spin::ONE, 3).unwrap();
        let k = chain.spin_flip();
        assert_eq!(k.apply(&chain.omega_plus()), chain.omega_minus());
    }

    #[test]
    fn sectors_partition_the_space() {
        let chain = Chain::new(Spin::HALF, 4).unwrap();
        let dims: Vec<usize> = (0..=4).map(|m| chain.sector_dim(m)).collect();
        assert_eq!(dims, vec![1, 4, 6, 4, 1]);
        let chain = Chain::new(Spin::ONE, 2).unwrap();
        let dims: Vec<usize> = (0..=4).map(|m| chain.sector_dim(m)).collect();
        assert_eq!(dims, vec![1, 2, 3, 2, 1]);
    }

    #[test]
    fn embed_factors_matches_kron() {
        let (s3, sp, _) = spin_generators(Spin::ONE);
        let pair = s3.matrix().kronecker(sp.matrix());
        let direct = embed_factors(&pair, &[3, 2, 3], &[0, 2]).unwrap();
        // Same operator built by permuting a kron with identity in the middle.
        let dims = [3usize, 2, 3];
        let mut expected = CMat::zeros(18, 18);
        for a in 0..3 {
            for b in 0..2 {
                for cc in 0..3 {
                    for a2 in 0..3 {
                        for c2 in 0..3 {
                            let r = (a * dims[1] + b) * dims[2] + cc;
                            let col = (a2 * dims[1] + b) * dims[2] + c2;
                            expected[(r, col)] = s3.matrix()[(a, a2)] * sp.matrix()[(cc, c2)];
                        }
                    }
                }
            }
        }
        assert_eq!(direct, expected);
    }

    #[test]
    fn spin_parsing() {
        assert_eq!("1/2".parse::<Spin>().unwrap(), Spin::HALF);
        assert_eq!("1".parse::<Spin>().unwrap(), Spin::ONE);
        assert_eq!("3/2".parse::<Spin>().unwrap(), Spin::THREE_HALVES);
        assert!("2/2".parse::<Spin>().is_err());
        assert!("0".parse::<Spin>().is_err());
        assert!("x".parse::<Spin>().is_err());
        assert_eq!(Spin::THREE_HALVES.to_string(), "3/2");
        assert_eq!(Spin::ONE.to_string(), "1");
    }
}
