//! Baxter Q-functions, Bethe equations, a Newton solver seeded from the
//! Q-operator spectrum, and the on-shell eigenvector checks.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::fcr::{alpha, delta, ensure_generic};
use crate::linalg::{eig, poly_roots, root_set_distance, sort_roots};
use crate::linop::{Chain, Spin};
use crate::monodromy::{abcd_monodromy, q_operator, transfer_matrix, QOperatorPoly};
use crate::{c, CVec, Error, Result, Sign, VerificationReport, C64};

/// `Q_±(y) = e^{±iyφ} Π_j (y - z_j)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QFunction {
    pub sign: Sign,
    pub phi: C64,
    pub roots: Vec<C64>,
}

impl QFunction {
    pub fn eval(&self, y: C64) -> C64 {
        q_function_eval(self, y)
    }

    /// Value without the exponential prefactor.
    pub fn stripped(&self, y: C64) -> C64 {
        self.roots.iter().fold(c(1.0, 0.0), |acc, &z| acc * (y - z))
    }
}

pub fn q_function_eval(q: &QFunction, y: C64) -> C64 {
    (c(0.0, q.sign.factor()) * y * q.phi).exp() * q.stripped(y)
}

/// A candidate solution of the Bethe equations for `Q_+` (B-states) or `Q_-` (C-states).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetheRoots {
    pub sign: Sign,
    pub phi: C64,
    pub roots: Vec<C64>,
}

impl BetheRoots {
    pub fn new(sign: Sign, phi: C64, roots: Vec<C64>) -> Self {
        Self { sign, phi, roots }
    }

    pub fn m(&self) -> usize {
        self.roots.len()
    }

    pub fn q_function(&self) -> QFunction {
        QFunction {
            sign: self.sign,
            phi: self.phi,
            roots: self.roots.clone(),
        }
    }

    /// Sector of `S3^tot` (magnons counted from the all-up state) the Bethe vector lives in.
    pub fn sector(&self, chain: &Chain) -> usize {
        match self.sign {
            Sign::Plus => self.m(),
            Sign::Minus => chain.max_magnons() - self.m(),
        }
    }
}

/// Polynomial-form residuals `Q(z_k-1) α(z_k) + Q(z_k+1) δ(z_k)` with the common
/// factor `e^{±i z_k φ}` removed, together with their natural scales.
fn residuals_and_scales(b: &BetheRoots, spin: Spin, n_sites: usize) -> Vec<(C64, f64)> {
    let sigma = b.sign.factor();
    let i = c(0.0, 1.0);
    let down = (-i * sigma * b.phi).exp();
    let up = (i * sigma * b.phi).exp();
    b.roots
        .iter()
        .map(|&z| {
            let pm = b.roots.iter().fold(c(1.0, 0.0), |acc, &w| acc * (z - 1.0 - w));
            let pp = b.roots.iter().fold(c(1.0, 0.0), |acc, &w| acc * (z + 1.0 - w));
            let (al, de) = (alpha(z, spin, n_sites), delta(z, spin, n_sites));
            let value = down * al * pm + up * de * pp;
            let scale = al.norm().max(de.norm()) * (down * pm).norm().max((up * pp).norm()).max(1.0);
            (value, scale)
        })
        .collect()
}

/// Bethe-equation residuals in polynomial form, one per root.
pub fn bethe_residual(b: &BetheRoots, spin: Spin, n_sites: usize) -> Result<Vec<C64>> {
    ensure_generic(&b.roots)?;
    let sigma = b.sign.factor();
    let i = c(0.0, 1.0);
    Ok(residuals_and_scales(b, spin, n_sites)
        .into_iter()
        .zip(&b.roots)
        .map(|((v, _), &z)| v * (i * sigma * z * b.phi).exp())
        .collect())
}

/// `((z+s)/(z-s))^N - e^{±2iφ} Π_{j≠k} (z_k - z_j + 1)/(z_k - z_j - 1)`.
pub fn bethe_ratio_residual(b: &BetheRoots, spin: Spin, n_sites: usize) -> Result<Vec<C64>> {
    ensure_generic(&b.roots)?;
    let s = spin.value();
    let twist = (c(0.0, 2.0 * b.sign.factor()) * b.phi).exp();
    Ok(b.roots
        .iter()
        .enumerate()
        .map(|(k, &z)| {
            let lhs = ((z + s) / (z - s)).powu(n_sites as u32);
            let rhs = b
                .roots
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != k)
                .fold(twist, |acc, (_, &w)| acc * (z - w + 1.0) / (z - w - 1.0));
            lhs - rhs
        })
        .collect())
}

/// Largest residual divided by `max(|α|,|δ|)·max(1,|Q(z±1)|)`.
pub fn scaled_bethe_residual(b: &BetheRoots, spin: Spin, n_sites: usize) -> f64 {
    residuals_and_scales(b, spin, n_sites)
        .into_iter()
        .map(|(v, s)| v.norm() / s.max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max)
}

/// Analytic Jacobian of the de-phased polynomial residuals.
fn jacobian(b: &BetheRoots, spin: Spin, n_sites: usize) -> DMatrix<C64> {
    let m = b.m();
    let sigma = b.sign.factor();
    let i = c(0.0, 1.0);
    let down = (-i * sigma * b.phi).exp();
    let up = (i * sigma * b.phi).exp();
    let s = spin.value();
    let n = n_sites as u32;
    let zs = &b.roots;
    let prod_except = |z: C64, shift: f64, skip: Option<usize>| {
        zs.iter()
            .enumerate()
            .filter(|&(l, _)| Some(l) != skip)
            .fold(c(1.0, 0.0), |acc, (_, &w)| acc * (z + shift - w))
    };
    DMatrix::from_fn(m, m, |k, j| {
        let z = zs[k];
        let (al, de) = (alpha(z, spin, n_sites), delta(z, spin, n_sites));
        if j != k {
            -(down * al * prod_except(z, -1.0, Some(j)) + up * de * prod_except(z, 1.0, Some(j)))
        } else {
            let d_al = if n == 0 { c(0.0, 0.0) } else { (z + s).powu(n - 1) * n as f64 };
            let d_de = if n == 0 { c(0.0, 0.0) } else { (z - s).powu(n - 1) * n as f64 };
            let mut sum_m = c(0.0, 0.0);
            let mut sum_p = c(0.0, 0.0);
            for l in (0..m).filter(|&l| l != k) {
                sum_m += prod_except(z, -1.0, Some(l));
                sum_p += prod_except(z, 1.0, Some(l));
            }
            down * (d_al * prod_except(z, -1.0, None) + al * sum_m)
                + up * (d_de * prod_except(z, 1.0, None) + de * sum_p)
        }
    })
}

pub const MAX_ITER: usize = 200;

/// Damped Newton iteration from the given starting roots.
pub fn newton_bethe(
    sign: Sign,
    phi: C64,
    spin: Spin,
    n_sites: usize,
    initial: &[C64],
) -> Result<BetheRoots> {
    let mut current = BetheRoots::new(sign, phi, initial.to_vec());
    if current.roots.is_empty() {
        return Ok(current);
    }
    let norm_of = |b: &BetheRoots| -> f64 {
        residuals_and_scales(b, spin, n_sites)
            .into_iter()
            .map(|(v, s)| (v.norm() / s.max(f64::MIN_POSITIVE)).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    let mut res = norm_of(&current);
    for _ in 0..MAX_ITER {
        if res < 1e-14 {
            break;
        }
        let values: Vec<C64> = residuals_and_scales(&current, spin, n_sites)
            .into_iter()
            .map(|(v, _)| v)
            .collect();
        let jac = jacobian(&current, spin, n_sites);
        let rhs = CVec::from_vec(values);
        let Some(step) = jac.lu().solve(&rhs) else {
            break;
        };
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let trial = BetheRoots::new(
                sign,
                phi,
                current
                    .roots
                    .iter()
                    .zip(step.iter())
                    .map(|(&z, &dz)| z - dz * lambda)
                    .collect(),
            );
            let trial_res = norm_of(&trial);
            if trial_res.is_finite() && trial_res < res {
                current = trial;
                res = trial_res;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let scaled = scaled_bethe_residual(&current, spin, n_sites);
    if !(scaled < 1e-10) {
        return Err(Error::NonConvergence {
            iterations: MAX_ITER,
            residual: scaled,
        });
    }
    ensure_generic(&current.roots)?;
    sort_roots(&mut current.roots);
    Ok(current)
}

/// Where Newton starting points come from.
#[derive(Clone, Debug, PartialEq)]
pub enum SeedStrategy {
    /// Roots of the Q-operator eigenvalue polynomials of the matching sector (all solutions).
    Spectrum,
    /// Explicit starting root sets, one solution per seed.
    Roots(Vec<Vec<C64>>),
}

/// Solves the Bethe equations for `m` roots of the given sign.
pub fn solve_bethe(
    sign: Sign,
    m: usize,
    phi: C64,
    spin: Spin,
    n_sites: usize,
    strategy: &SeedStrategy,
) -> Result<Vec<BetheRoots>> {
    let chain = Chain::new(spin, n_sites)?;
    if m > chain.max_magnons() {
        return Err(Error::InvalidParameter(format!(
            "m = {m} exceeds 2sN = {}",
            chain.max_magnons()
        )));
    }
    let seeds: Vec<Vec<C64>> = match strategy {
        SeedStrategy::Roots(seeds) => {
            if let Some(bad) = seeds.iter().find(|s| s.len() != m) {
                return Err(Error::InvalidParameter(format!(
                    "seed has {} roots, expected {m}",
                    bad.len()
                )));
            }
            seeds.clone()
        }
        SeedStrategy::Spectrum => {
            let sector = match sign {
                Sign::Plus => m,
                Sign::Minus => chain.max_magnons() - m,
            };
            joint_eigenvectors(phi, spin, n_sites)?
                .into_iter()
                .filter(|e| e.magnons == sector)
                .map(|e| match sign {
                    Sign::Plus => e.plus_roots,
                    Sign::Minus => e.minus_roots,
                })
                .collect()
        }
    };
    let mut out: Vec<BetheRoots> = Vec::new();
    for seed in seeds {
        let sol = newton_bethe(sign, phi, spin, n_sites, &seed)?;
        if !out.iter().any(|o| root_set_distance(&o.roots, &sol.roots) < 1e-7) {
            out.push(sol);
        }
    }
    Ok(out)
}

/// `B(z_1)⋯B(z_m)|Ω⁺⟩` or `C(z_1)⋯C(z_m)|Ω⁻⟩`.
pub fn bethe_vector(b: &BetheRoots, spin: Spin, n_sites: usize) -> Result<CVec> {
    let chain = Chain::new(spin, n_sites)?;
    if b.m() > chain.max_magnons() {
        return Err(Error::InvalidParameter("more roots than 2sN".into()));
    }
    let mut v = match b.sign {
        Sign::Plus => chain.omega_plus(),
        Sign::Minus => chain.omega_minus(),
    };
    let mut scale = 1.0f64;
    for &z in b.roots.iter().rev() {
        let mono = abcd_monodromy(z, spin, n_sites)?;
        let op = match b.sign {
            Sign::Plus => mono.b,
            Sign::Minus => mono.c,
        };
        scale *= op.max_norm().max(1.0);
        v = op.apply(&v);
    }
    if v.norm() < 1e-10 * scale {
        return Err(Error::ZeroVector);
    }
    Ok(v)
}

/// `Q_±(y)|ψ⟩ = Q_±(y)|ψ⟩` at every sample point, plus the transfer matrix and
/// its eigenvalue reconstructed from the Q-function.
pub fn check_onshell_action(
    b: &BetheRoots,
    spin: Spin,
    n_sites: usize,
    sample_ys: &[C64],
    tol: f64,
) -> Result<VerificationReport> {
    let scaled = scaled_bethe_residual(b, spin, n_sites);
    if !(scaled < 1e-8) {
        return Err(Error::OffShell(scaled));
    }
    let psi = bethe_vector(b, spin, n_sites)?;
    let psi_norm = psi.norm();
    let qf = b.q_function();
    let mut q_res = 0.0f64;
    let mut t_res = 0.0f64;
    let mut tq_res = 0.0f64;
    for &y in sample_ys {
        let q = q_operator(b.sign, y, b.phi, spin, n_sites)?;
        let expected = qf.eval(y);
        let diff = (q.apply(&psi) - &psi * expected).norm();
        q_res = q_res.max(diff / (psi_norm * expected.norm().max(1.0)));

        let t = transfer_matrix(y, b.phi, spin, n_sites)?;
        let t_psi = t.apply(&psi);
        let lambda = psi.dotc(&t_psi) / psi.dotc(&psi);
        t_res = t_res.max((t_psi - &psi * lambda).norm() / (psi_norm * lambda.norm().max(1.0)));

        let (al, de) = (alpha(y, spin, n_sites), delta(y, spin, n_sites));
        let tq_rhs = al * qf.eval(y - 1.0) + de * qf.eval(y + 1.0);
        let tq_lhs = lambda * expected;
        tq_res = tq_res.max((tq_lhs - tq_rhs).norm() / tq_lhs.norm().max(tq_rhs.norm()).max(1.0));
    }
    let mut components = serde_json::Map::new();
    components.insert("Q".into(), q_res.into());
    components.insert("T".into(), t_res.into());
    components.insert("TQ".into(), tq_res.into());
    let residual = q_res.max(t_res).max(tq_res);
    Ok(VerificationReport::new(format!("onshell_Q{}", b.sign), residual, tol)
        .with("spin", spin.to_string())
        .with("sites", n_sites)
        .with_complex("phi", b.phi)
        .with_complex_list("roots", &b.roots)
        .with("bethe_residual", scaled)
        .with_complex_list("y", sample_ys)
        .with("components", serde_json::Value::Object(components)))
}

/// One simultaneous eigenvector of the commuting family, with both Q-eigenvalue polynomials.
#[derive(Clone, Debug, PartialEq)]
pub struct JointEigen {
    /// Magnon number of the `S3^tot` sector.
    pub magnons: usize,
    pub vector: CVec,
    /// Stripped `Q_+` eigenvalue, coefficients low to high (monic, degree `magnons`).
    pub plus_poly: Vec<C64>,
    /// Stripped `Q_-` eigenvalue (monic, degree `2sN - magnons`).
    pub minus_poly: Vec<C64>,
    pub plus_roots: Vec<C64>,
    pub minus_roots: Vec<C64>,
    /// Largest deviation from a monic polynomial of the expected degree.
    pub poly_residual: f64,
}

/// Generic point and mixing weight used to split the spectrum of the commuting family.
pub const BASE_POINT: f64 = 0.61803;
pub const MIX: (f64, f64) = (0.7317, 0.2193);

fn monic_defect(poly: &[C64], degree: usize) -> f64 {
    let lead = poly.get(degree).copied().unwrap_or(c(0.0, 0.0));
    let above = poly.iter().skip(degree + 1).fold(0.0f64, |acc, z| acc.max(z.norm()));
    let scale = poly.iter().take(degree + 1).fold(1.0f64, |acc, z| acc.max(z.norm()));
    (lead - 1.0).norm().max(above / scale)
}

/// Simultaneous eigenvectors of `Q_+` and `Q_-`, sector by sector.
pub fn joint_eigenvectors(phi: C64, spin: Spin, n_sites: usize) -> Result<Vec<JointEigen>> {
    let chain = Chain::new(spin, n_sites)?;
    let plus = QOperatorPoly::build(Sign::Plus, phi, spin, n_sites)?;
    let minus = QOperatorPoly::build(Sign::Minus, phi, spin, n_sites)?;
    let fit = plus.fit_residual.max(minus.fit_residual);
    if fit > 1e-8 {
        return Err(Error::NotPolynomial(fit));
    }
    let y0 = c(BASE_POINT, 0.0);
    let mixed = plus.eval_stripped(y0) + minus.eval_stripped(y0) * c(MIX.0, MIX.1);
    let top = chain.max_magnons();
    let mut out = Vec::new();
    for m in 0..=top {
        let idx = chain.sector_indices(m);
        let block = DMatrix::from_fn(idx.len(), idx.len(), |r, col| mixed[(idx[r], idx[col])]);
        let (values, vectors) = eig(&block)?;
        let spread = values.iter().fold(1.0f64, |acc, v| acc.max(v.norm()));
        for a in 0..values.len() {
            for b in (a + 1)..values.len() {
                if (values[a] - values[b]).norm() < 1e-9 * spread {
                    return Err(Error::DegenerateSpectrum { sector: m });
                }
            }
        }
        for small in vectors {
            let mut v = CVec::zeros(chain.dim());
            for (r, &i) in idx.iter().enumerate() {
                v[i] = small[r];
            }
            let norm2 = v.dotc(&v);
            let plus_poly: Vec<C64> = plus.matrix_element(&v, &v).iter().map(|z| z / norm2).collect();
            let minus_poly: Vec<C64> = minus.matrix_element(&v, &v).iter().map(|z| z / norm2).collect();
            let poly_residual = monic_defect(&plus_poly, m).max(monic_defect(&minus_poly, top - m));
            if poly_residual > 1e-8 {
                return Err(Error::NotPolynomial(poly_residual));
            }
            let mut plus_roots = poly_roots(&plus_poly[..=m])?;
            let mut minus_roots = poly_roots(&minus_poly[..=top - m])?;
            sort_roots(&mut plus_roots);
            sort_roots(&mut minus_roots);
            out.push(JointEigen {
                magnons: m,
                vector: v,
                plus_poly,
                minus_poly,
                plus_roots,
                minus_roots,
                poly_residual,
            });
        }
    }
    Ok(out)
}

/// Q-functions read off from the spectrum in magnon sector `sector_m`.
///
/// For `+` the polynomial has degree `sector_m`, for `-` degree `2sN - sector_m`.
pub fn extract_q_polynomial(
    sign: Sign,
    phi: C64,
    spin: Spin,
    n_sites: usize,
    sector_m: usize,
) -> Result<Vec<QFunction>> {
    let chain = Chain::new(spin, n_sites)?;
    if sector_m > chain.max_magnons() {
        return Err(Error::InvalidParameter("sector above 2sN".into()));
    }
    let mut out = Vec::new();
    for e in joint_eigenvectors(phi, spin, n_sites)?
        .into_iter()
        .filter(|e| e.magnons == sector_m)
    {
        let roots = match sign {
            Sign::Plus => e.plus_roots,
            Sign::Minus => e.minus_roots,
        };
        let b = BetheRoots::new(sign, phi, roots);
        let scaled = scaled_bethe_residual(&b, spin, n_sites);
        if !(scaled < 1e-8) {
            return Err(Error::OffShell(scaled));
        }
        out.push(b.q_function());
    }
    Ok(out)
}

/// Pairs of `Q_+` and `Q_-` root sets belonging to the same eigenvector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RootPair {
    pub magnons: usize,
    pub plus: Vec<C64>,
    pub minus: Vec<C64>,
}

pub fn root_pairs(phi: C64, spin: Spin, n_sites: usize) -> Result<Vec<RootPair>> {
    Ok(joint_eigenvectors(phi, spin, n_sites)?
        .into_iter()
        .map(|e| RootPair {
            magnons: e.magnons,
            plus: e.plus_roots,
            minus: e.minus_roots,
        })
        .collect())
}

/// Every eigenvector of every sector: its Q-roots are on-shell for both signs and
/// the Bethe vectors built from them reproduce the eigenvector.
pub fn check_completeness(phi: C64, spin: Spin, n_sites: usize, tol: f64) -> Result<VerificationReport> {
    let chain = Chain::new(spin, n_sites)?;
    let eigen = joint_eigenvectors(phi, spin, n_sites)?;
    let mut worst_bethe = 0.0f64;
    let mut worst_overlap = 0.0f64;
    let mut counts = vec![0usize; chain.max_magnons() + 1];
    for e in &eigen {
        counts[e.magnons] += 1;
        for (sign, roots) in [(Sign::Plus, &e.plus_roots), (Sign::Minus, &e.minus_roots)] {
            let b = BetheRoots::new(sign, phi, roots.clone());
            worst_bethe = worst_bethe.max(scaled_bethe_residual(&b, spin, n_sites));
            let psi = bethe_vector(&b, spin, n_sites)?;
            let overlap = e.vector.dotc(&psi).norm() / (e.vector.norm() * psi.norm());
            worst_overlap = worst_overlap.max(1.0 - overlap);
        }
    }
    let count_ok = (0..=chain.max_magnons()).all(|m| counts[m] == chain.sector_dim(m));
    let residual = if count_ok {
        worst_bethe.max(worst_overlap)
    } else {
        f64::INFINITY
    };
    Ok(VerificationReport::new("completeness", residual, tol)
        .with("spin", spin.to_string())
        .with("sites", n_sites)
        .with_complex("phi", phi)
        .with("states", eigen.len())
        .with("sector_counts", counts)
        .with("bethe_residual", worst_bethe)
        .with("overlap_defect", worst_overlap))
}
