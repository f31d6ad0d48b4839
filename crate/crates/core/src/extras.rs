//! The twisted spin-1/2 Hamiltonian and the series relation linking the roots of
//! `Q_+` and `Q_-` on a common eigenvector.

use serde::{Deserialize, Serialize};

use crate::bethe::{joint_eigenvectors, scaled_bethe_residual, BetheRoots};
use crate::lax::r_spm;
use crate::linop::{spin_generators, Chain, QSpaceOp, SiteOp, Spin};
use crate::monodromy::{commutator_residual, q_operator, transfer_matrix};
use crate::weyl::factorial;
use crate::{c, CMat, Error, Result, Sign, VerificationReport, C64};

/// `P_{i,j} = (1 + 4 S^{(i)}·S^{(j)})/2` for spin 1/2, sites 1-based.
fn permutation(chain: &Chain, i: usize, j: usize) -> Result<QSpaceOp> {
    let (s3, sp, sm) = spin_generators(Spin::HALF);
    let e = |op: &SiteOp, k: usize| chain.embed(op, k);
    let zz = &e(&s3, i)? * &e(&s3, j)?;
    let pm = &e(&sp, i)? * &e(&sm, j)?;
    let mp = &e(&sm, i)? * &e(&sp, j)?;
    let half = chain.identity().scale(c(0.5, 0.0));
    Ok(&(&(&half + &zz.scale(c(2.0, 0.0))) + &pm) + &mp)
}

/// `H = 2 Σ_i (1 - P_{i,i+1})` with the boundary term conjugated by the twist at site N.
pub fn hamiltonian(n_sites: usize, phi: C64) -> Result<QSpaceOp> {
    if n_sites < 2 {
        return Err(Error::InvalidParameter("the Hamiltonian needs N >= 2".into()));
    }
    let chain = Chain::new(Spin::HALF, n_sites)?;
    let id = chain.identity();
    let mut h = chain.zeros();
    for i in 1..n_sites {
        h = &h + &(&id - &permutation(&chain, i, i + 1)?);
    }
    let (s3, _, _) = spin_generators(Spin::HALF);
    let twist = |sign: f64| {
        let diag: Vec<C64> = (0..2)
            .map(|k| (c(0.0, -2.0 * sign) * phi * s3.matrix()[(k, k)]).exp())
            .collect();
        SiteOp::new(CMat::from_diagonal(&crate::CVec::from_vec(diag)))
    };
    let left = chain.embed(&twist(1.0)?, n_sites)?;
    let right = chain.embed(&twist(-1.0)?, n_sites)?;
    let boundary = &(&left * &permutation(&chain, n_sites, 1)?) * &right;
    h = &h + &(&id - &boundary);
    Ok(h.scale(c(2.0, 0.0)))
}

/// Only spin 1/2 has a Hamiltonian here.
pub fn hamiltonian_for(spin: Spin, n_sites: usize, phi: C64) -> Result<QSpaceOp> {
    if spin != Spin::HALF {
        return Err(Error::InvalidSpin(format!("{spin} (the Hamiltonian is spin 1/2 only)")));
    }
    hamiltonian(n_sites, phi)
}

/// `[H, T(y)]`, `[H, Q_±(y)]` and, at real twist, `H - H†`.
pub fn check_hamiltonian(n_sites: usize, phi: C64, ys: &[C64], tol: f64) -> Result<VerificationReport> {
    let h = hamiltonian(n_sites, phi)?;
    let scale = h.max_norm().max(1.0);
    let (mut t_res, mut qp_res, mut qm_res) = (0.0f64, 0.0f64, 0.0f64);
    for &y in ys {
        let t = transfer_matrix(y, phi, Spin::HALF, n_sites)?;
        t_res = t_res.max(commutator_residual(h.matrix(), t.matrix()) / (scale * t.max_norm().max(1.0)));
        for (sign, slot) in [(Sign::Plus, &mut qp_res), (Sign::Minus, &mut qm_res)] {
            let q = q_operator(sign, y, phi, Spin::HALF, n_sites)?;
            *slot = slot.max(commutator_residual(h.matrix(), q.matrix()) / (scale * q.max_norm().max(1.0)));
        }
    }
    let mut components = serde_json::Map::new();
    components.insert("HT".into(), t_res.into());
    components.insert("HQp".into(), qp_res.into());
    components.insert("HQm".into(), qm_res.into());
    let mut residual = t_res.max(qp_res).max(qm_res);
    if phi.im == 0.0 {
        let herm = (&h - &h.adjoint()).max_norm();
        components.insert("hermiticity".into(), herm.into());
        residual = residual.max(herm);
    }
    Ok(VerificationReport::new("hamiltonian_commutes", residual, tol)
        .with("sites", n_sites)
        .with_complex("phi", phi)
        .with_complex_list("y", ys)
        .with("components", serde_json::Value::Object(components)))
}

/// Roots of `Q_+` and `Q_-` belonging to one common eigenvector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquatorPair {
    pub roots_plus: Vec<C64>,
    pub roots_minus: Vec<C64>,
    pub phi: C64,
    pub spin: Spin,
    pub n_sites: usize,
}

impl EquatorPair {
    fn validate(&self) -> Result<()> {
        let chain = Chain::new(self.spin, self.n_sites)?;
        if self.roots_plus.len() + self.roots_minus.len() != chain.max_magnons() {
            return Err(Error::InvalidParameter(format!(
                "{} + {} roots, expected 2sN = {}",
                self.roots_plus.len(),
                self.roots_minus.len(),
                chain.max_magnons()
            )));
        }
        if !(self.phi.im < 0.0) {
            return Err(Error::DivergentSeries(self.phi.im));
        }
        for (sign, roots) in [(Sign::Plus, &self.roots_plus), (Sign::Minus, &self.roots_minus)] {
            let b = BetheRoots::new(sign, self.phi, roots.clone());
            let r = scaled_bethe_residual(&b, self.spin, self.n_sites);
            if !(r < 1e-8) {
                return Err(Error::OffShell(r));
            }
        }
        Ok(())
    }
}

/// All pairs at this twist, read off from the joint eigenvectors.
pub fn equator_pairs(phi: C64, spin: Spin, n_sites: usize) -> Result<Vec<EquatorPair>> {
    Ok(joint_eigenvectors(phi, spin, n_sites)?
        .into_iter()
        .map(|e| EquatorPair {
            roots_plus: e.plus_roots,
            roots_minus: e.minus_roots,
            phi,
            spin,
            n_sites,
        })
        .collect())
}

fn pochhammer(a: C64, j: usize) -> C64 {
    (0..j).fold(c(1.0, 0.0), |acc, k| acc * (a + k as f64))
}

/// Single-site factor `Γ(y+s)/Γ(y-s) · ₂F₁(-2s, -q; 1-s-y; 1)`.
///
/// The terminating sum is multiplied through by the Gamma ratio term by term,
/// `(y-s)_{2s} / (1-s-y)_j = (-1)^j Π_{i=j+1}^{2s} (y+s-i)`, which leaves a
/// polynomial in `y` without removable poles.
pub fn site_factor(y: C64, spin: Spin, q: usize) -> C64 {
    site_terms(y, spin, q).into_iter().sum()
}

fn site_terms(y: C64, spin: Spin, q: usize) -> Vec<C64> {
    let two_s = spin.twice() as usize;
    let s = spin.value();
    (0..=two_s.min(q))
        .map(|j| {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            let tail = ((j + 1)..=two_s).fold(c(1.0, 0.0), |acc, i| acc * (y + s - i as f64));
            pochhammer(c(-(two_s as f64), 0.0), j) * pochhammer(c(-(q as f64), 0.0), j) * tail * sign
                / factorial(j)
        })
        .collect()
}

/// Diagonal weight of the Q_+ monodromy on the all-down state at oscillator level `q`.
pub fn monodromy_weight(y: C64, spin: Spin, n_sites: usize, q: usize) -> C64 {
    site_factor(y, spin, q).powu(n_sites as u32)
}

fn term(y: C64, pair: &EquatorPair, x: C64, q: usize) -> Result<C64> {
    let mut t = x.powu(q as u32) * monodromy_weight(y, pair.spin, pair.n_sites, q);
    for &z in &pair.roots_minus {
        let d0 = y - z - q as f64;
        let d1 = d0 - 1.0;
        if d1.norm() < 1e-12 || (q > 0 && d0.norm() < 1e-12) {
            return Err(Error::NonGeneric(format!("y - z = {} is a non-negative integer", y - z)));
        }
        // the q = 0 factor cancels to 1/(y-z-1), also when y sits on a root of Q_-
        t *= if q == 0 { d1.inv() } else { (y - z) / (d0 * d1) };
    }
    Ok(t)
}

/// Number of leading terms after which the certified tail bound drops below `tol`.
pub fn equator_cutoff(y: C64, pair: &EquatorPair, tol: f64) -> Result<usize> {
    if !(pair.phi.im < 0.0) {
        return Err(Error::DivergentSeries(pair.phi.im));
    }
    let x = (c(0.0, -2.0) * pair.phi).exp();
    let r = x.norm();
    let two_s = pair.spin.twice() as usize;
    let d = (two_s * pair.n_sites) as i32;
    // |(-q)_j| <= (1+q)^j, so |site factor| <= g · (1+q)^{2s}.
    let g: f64 = site_terms(y, pair.spin, two_s)
        .iter()
        .enumerate()
        .map(|(j, t)| t.norm() / pochhammer(c(-(two_s as f64), 0.0), j).norm().max(1.0))
        .sum();
    let k_env = g.powi(pair.n_sites as i32);
    let reach = pair.roots_minus.iter().fold(0.0f64, |acc, &z| acc.max((y - z).norm()));
    let mut q0 = (reach + 2.0).ceil() as usize;
    const LIMIT: usize = 1_000_000;
    loop {
        let qf = q0 as f64;
        let rho = r * (1.0 + 1.0 / (qf + 1.0)).powi(d);
        if rho < 1.0 {
            let ratio_bound = pair
                .roots_minus
                .iter()
                .fold(1.0, |acc, &z| {
                    let a = (y - z).norm();
                    acc * a / ((qf - a) * (qf - a - 1.0))
                });
            let bound = k_env * ratio_bound * r.powf(qf) * (1.0 + qf).powi(d) / (1.0 - rho);
            if bound < tol {
                return Ok(q0);
            }
        }
        if q0 > LIMIT {
            return Err(Error::NonConvergence {
                iterations: q0,
                residual: f64::NAN,
            });
        }
        q0 = (q0 * 5 / 4).max(q0 + 8);
    }
}

/// First `terms` terms of the twisted series.
pub fn equator_partial_sum(y: C64, pair: &EquatorPair, terms: usize) -> Result<C64> {
    let x = (c(0.0, -2.0) * pair.phi).exp();
    let mut sum = c(0.0, 0.0);
    for q in 0..terms {
        sum += term(y, pair, x, q)?;
    }
    Ok(sum)
}

/// The twisted series `Σ_q e^{-2iφq} M(y,s,q) Π_i (y-z_i^-)/((y-z_i^--q)(y-z_i^--1-q))`,
/// truncated where the tail bound drops below `tol / 10`.
pub fn equator_lhs(y: C64, pair: &EquatorPair, tol: f64) -> Result<C64> {
    let terms = equator_cutoff(y, pair, tol / 10.0)?;
    equator_partial_sum(y, pair, terms)
}

/// Compares `(1 - e^{-2iφ})·series` with `Π(y - z^+)` at the sample points and
/// checks the series vanishes at every `z^+`.
pub fn check_equator_relation(pair: &EquatorPair, sample_ys: &[C64], tol: f64) -> Result<VerificationReport> {
    pair.validate()?;
    let norm = c(1.0, 0.0) - (c(0.0, -2.0) * pair.phi).exp();
    let series_tol = 1e-3 * tol;
    let mut sample_res = 0.0f64;
    for &y in sample_ys {
        let lhs = norm * equator_lhs(y, pair, series_tol)?;
        let rhs = pair.roots_plus.iter().fold(c(1.0, 0.0), |acc, &z| acc * (y - z));
        sample_res = sample_res.max((lhs - rhs).norm() / rhs.norm().max(1.0));
    }
    let mut root_res = 0.0f64;
    for &z in &pair.roots_plus {
        root_res = root_res.max((norm * equator_lhs(z, pair, series_tol)?).norm());
    }
    let mut components = serde_json::Map::new();
    components.insert("samples".into(), sample_res.into());
    components.insert("at_roots".into(), root_res.into());
    Ok(VerificationReport::new("equator", sample_res.max(root_res), tol)
        .with("spin", pair.spin.to_string())
        .with("sites", pair.n_sites)
        .with_complex("phi", pair.phi)
        .with_complex_list("roots_plus", &pair.roots_plus)
        .with_complex_list("roots_minus", &pair.roots_minus)
        .with_complex_list("y", sample_ys)
        .with("components", serde_json::Value::Object(components)))
}

/// `⟨q| R_{s,+}(y) |q⟩` on the lowest weight state, from the normal-ordered Lax operator.
pub fn site_factor_from_lax(y: C64, spin: Spin, q: usize) -> Result<C64> {
    let r = r_spm(Sign::Plus, y, spin);
    let last = spin.dim() - 1;
    let mut out = c(0.0, 0.0);
    for (&(p, k), mat) in r.terms() {
        if p == k && p <= q {
            out += mat[(last, last)] * (factorial(q) / factorial(q - p));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::eigenvalues;
    use crate::linalg::sample_nodes;

    #[test]
    fn two_site_spectrum_untwisted() {
        let h = hamiltonian(2, c(0.0, 0.0)).unwrap();
        let mut ev: Vec<f64> = eigenvalues(h.matrix()).unwrap().iter().map(|z| z.re).collect();
        ev.sort_by(f64::total_cmp);
        for (a, b) in ev.iter().zip([0.0, 0.0, 0.0, 8.0]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn permutation_squares_to_one() {
        let chain = Chain::new(Spin::HALF, 3).unwrap();
        for (i, j) in [(1, 2), (2, 3), (3, 1)] {
            let p = permutation(&chain, i, j).unwrap();
            assert!((&(&p * &p) - &chain.identity()).max_norm() < 1e-14);
        }
    }

    #[test]
    fn hamiltonian_commutes_with_family() {
        let rep = check_hamiltonian(3, c(0.3, 0.0), &sample_nodes(3, 1.5), 1e-10).unwrap();
        assert!(rep.pass, "{rep:?}");
        let rep = check_hamiltonian(4, c(0.2, -0.1), &[c(0.4, 0.2)], 1e-10).unwrap();
        assert!(rep.pass, "{rep:?}");
        assert!(matches!(hamiltonian_for(Spin::ONE, 3, c(0.3, 0.0)), Err(Error::InvalidSpin(_))));
    }

    #[test]
    fn site_factor_matches_lax_operator() {
        for spin in [Spin::HALF, Spin::ONE, Spin::THREE_HALVES] {
            for q in 0..6 {
                let y = c(0.37, 0.21);
                let a = site_factor(y, spin, q);
                let b = site_factor_from_lax(y, spin, q).unwrap();
                assert!((a - b).norm() < 1e-10 * a.norm().max(1.0), "{spin} {q}: {a} vs {b}");
            }
        }
        let y = c(0.37, 0.21);
        let spin_half = site_factor(y, Spin::HALF, 3);
        assert!((spin_half - (y - 3.5)).norm() < 1e-14);
        let at_zero = site_factor(y, Spin::ONE, 0);
        assert!((at_zero - y * (y - 1.0)).norm() < 1e-14);
    }

    #[test]
    fn equator_relation_spin_half() {
        let phi = c(0.4, -0.3);
        let ys = [c(0.3, 0.2), c(-0.8, 0.5), c(1.1, -0.4)];
        for n in 1..=3 {
            for pair in equator_pairs(phi, Spin::HALF, n).unwrap() {
                let rep = check_equator_relation(&pair, &ys, 1e-7).unwrap();
                assert!(rep.pass, "{rep:?}");
            }
        }
    }

    #[test]
    fn equator_relation_spin_one() {
        let phi = c(0.4, -0.3);
        let ys = [c(0.3, 0.2), c(-0.8, 0.5)];
        for pair in equator_pairs(phi, Spin::ONE, 2).unwrap() {
            let rep = check_equator_relation(&pair, &ys, 1e-7).unwrap();
            assert!(rep.pass, "{rep:?}");
        }
    }

    #[test]
    fn equator_requires_convergent_twist() {
        let pair = EquatorPair {
            roots_plus: vec![],
            roots_minus: vec![],
            phi: c(0.4, 0.0),
            spin: Spin::HALF,
            n_sites: 0,
        };
        assert!(matches!(equator_lhs(c(0.1, 0.0), &pair, 1e-8), Err(Error::DivergentSeries(_))));
    }
}
