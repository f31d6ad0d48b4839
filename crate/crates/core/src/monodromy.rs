//! Chain monodromies, the twisted transfer matrix and the Q-operators.

use serde_json::{Map, Value};

use crate::lax::{r_fund, r_spm};
use crate::linalg::{interpolate_matrices, poly_eval, sample_nodes};
use crate::linop::{embed_factors, spin_generators, Chain, QSpaceOp, Spin};
use crate::weyl::WeylPoly;
use crate::{c, max_norm, CMat, Error, Result, Sign, VerificationReport, C64};

/// The 2×2 auxiliary monodromy built from `L_{s,□}(y)` over all sites.
#[derive(Clone, Debug, PartialEq)]
pub struct AbcdMonodromy {
    pub y: C64,
    pub a: QSpaceOp,
    pub b: QSpaceOp,
    pub c: QSpaceOp,
    pub d: QSpaceOp,
}

impl AbcdMonodromy {
    /// Entry `(row, col)` of the auxiliary matrix.
    pub fn block(&self, row: usize, col: usize) -> &QSpaceOp {
        match (row, col) {
            (0, 0) => &self.a,
            (0, 1) => &self.b,
            (1, 0) => &self.c,
            _ => &self.d,
        }
    }

    /// The monodromy as one matrix on `C^2 ⊗ (chain)`, auxiliary factor first.
    pub fn aux_matrix(&self) -> CMat {
        let n = self.a.dim();
        let mut out = CMat::zeros(2 * n, 2 * n);
        for row in 0..2 {
            for col in 0..2 {
                out.view_mut((row * n, col * n), (n, n))
                    .copy_from(self.block(row, col).matrix());
            }
        }
        out
    }
}

/// Ordered product of `L_{s,□}(y)` with site 1 leftmost.
pub fn abcd_monodromy(y: C64, spin: Spin, n_sites: usize) -> Result<AbcdMonodromy> {
    let chain = Chain::new(spin, n_sites)?;
    let (s3, sp, sm) = spin_generators(spin);
    let dim = chain.dim();
    let id = CMat::identity(dim, dim);
    let (mut a, mut b, mut cc, mut d) = (id.clone(), CMat::zeros(dim, dim), CMat::zeros(dim, dim), id.clone());
    for site in 1..=n_sites {
        let s3_i = chain.embed(&s3, site)?.into_matrix();
        let sp_i = chain.embed(&sp, site)?.into_matrix();
        let sm_i = chain.embed(&sm, site)?.into_matrix();
        let up = &id * y + &s3_i;
        let down = &id * y - &s3_i;
        let new_a = &a * &up + &b * &sp_i;
        let new_b = &a * &sm_i + &b * &down;
        let new_c = &cc * &up + &d * &sp_i;
        let new_d = &cc * &sm_i + &d * &down;
        a = new_a;
        b = new_b;
        cc = new_c;
        d = new_d;
    }
    let wrap = |m| QSpaceOp::from_parts(n_sites, spin.dim(), m);
    Ok(AbcdMonodromy {
        y,
        a: wrap(a),
        b: wrap(b),
        c: wrap(cc),
        d: wrap(d),
    })
}

/// `T(y) = e^{-iφ} A(y) + e^{iφ} D(y)`.
pub fn transfer_matrix(y: C64, phi: C64, spin: Spin, n_sites: usize) -> Result<QSpaceOp> {
    let m = abcd_monodromy(y, spin, n_sites)?;
    let i = c(0.0, 1.0);
    Ok(&m.a.scale((-i * phi).exp()) + &m.d.scale((i * phi).exp()))
}

/// Oscillator-valued monodromy `R_{s,±}(y) ⊗ ... ⊗ R_{s,±}(y)`.
#[derive(Clone, Debug, PartialEq)]
pub struct QMonodromy {
    pub sign: Sign,
    pub y: C64,
    pub chain: Chain,
    pub poly: WeylPoly,
}

/// Builds `M_±(y)`, multiplying site-embedded local operators left to right.
pub fn q_monodromy(sign: Sign, y: C64, spin: Spin, n_sites: usize) -> Result<QMonodromy> {
    let chain = Chain::new(spin, n_sites)?;
    let local = r_spm(sign, y, spin);
    let dims = vec![spin.dim(); n_sites];
    let mut poly = WeylPoly::identity(chain.dim());
    for site in 0..n_sites {
        let lifted = local.embed(&dims, &[site])?;
        poly = poly.try_mul(&lifted)?;
    }
    let poly = poly.with_bound(chain.max_magnons())?;
    Ok(QMonodromy {
        sign,
        y,
        chain,
        poly,
    })
}

/// Regulator `x = e^{∓2iφ}` of the oscillator trace.
pub fn twist_regulator(sign: Sign, phi: C64) -> C64 {
    (c(0.0, -2.0 * sign.factor()) * phi).exp()
}

/// `e^{±iyφ}`.
pub fn twist_prefactor(sign: Sign, y: C64, phi: C64) -> C64 {
    (c(0.0, sign.factor()) * y * phi).exp()
}

fn ensure_regular(sign: Sign, phi: C64) -> Result<C64> {
    let x = twist_regulator(sign, phi);
    if (c(1.0, 0.0) - x).norm() < 1e-12 {
        return Err(Error::SingularTwist);
    }
    Ok(x)
}

/// `Z^{-1} tr[x^{N̂} M_±(y)]` without the `e^{±iyφ}` prefactor.
pub fn q_operator_stripped(sign: Sign, y: C64, phi: C64, spin: Spin, n_sites: usize) -> Result<QSpaceOp> {
    let x = ensure_regular(sign, phi)?;
    let mono = q_monodromy(sign, y, spin, n_sites)?;
    let traced = mono.poly.regulated_trace(x)? * (c(1.0, 0.0) - x);
    Ok(QSpaceOp::from_parts(n_sites, spin.dim(), traced))
}

/// `Q_±(y) = e^{±iyφ} Z_±^{-1} tr[e^{∓2iφ āa} M_±(y)]`.
pub fn q_operator(sign: Sign, y: C64, phi: C64, spin: Spin, n_sites: usize) -> Result<QSpaceOp> {
    Ok(q_operator_stripped(sign, y, phi, spin, n_sites)?.scale(twist_prefactor(sign, y, phi)))
}

/// The stripped Q-operator as a matrix polynomial in `y`, recovered by interpolation.
#[derive(Clone, Debug, PartialEq)]
pub struct QOperatorPoly {
    pub sign: Sign,
    pub phi: C64,
    pub chain: Chain,
    /// Matrix coefficients of `y^0, y^1, ...`.
    pub coeffs: Vec<CMat>,
    /// Mismatch between the fit and a direct evaluation at an extra point.
    pub fit_residual: f64,
}

impl QOperatorPoly {
    pub fn build(sign: Sign, phi: C64, spin: Spin, n_sites: usize) -> Result<Self> {
        let chain = Chain::new(spin, n_sites)?;
        let count = chain.max_magnons() + 2;
        let radius = 1.0 + n_sites as f64 * spin.value();
        let nodes = sample_nodes(count, radius);
        let samples = nodes
            .iter()
            .map(|&y| q_operator_stripped(sign, y, phi, spin, n_sites).map(QSpaceOp::into_matrix))
            .collect::<Result<Vec<_>>>()?;
        let coeffs = interpolate_matrices(&nodes, &samples)?;
        let mut out = Self {
            sign,
            phi,
            chain,
            coeffs,
            fit_residual: 0.0,
        };
        let probe = c(0.3 * radius, -0.41 * radius);
        let direct = q_operator_stripped(sign, probe, phi, spin, n_sites)?.into_matrix();
        let fitted = out.eval_stripped(probe);
        out.fit_residual = max_norm(&(&fitted - &direct)) / max_norm(&direct).max(1.0);
        Ok(out)
    }

    pub fn eval_stripped(&self, y: C64) -> CMat {
        let dim = self.chain.dim();
        self.coeffs
            .iter()
            .rev()
            .fold(CMat::zeros(dim, dim), |acc, coeff| acc * y + coeff)
    }

    pub fn eval(&self, y: C64) -> QSpaceOp {
        let m = self.eval_stripped(y) * twist_prefactor(self.sign, y, self.phi);
        QSpaceOp::from_parts(self.chain.n_sites, self.chain.site_dim(), m)
    }

    /// Largest coefficient norm above `degree`, relative to the overall scale.
    pub fn excess_above(&self, degree: usize) -> f64 {
        let scale = self.coeffs.iter().map(max_norm).fold(1.0, f64::max);
        self.coeffs
            .iter()
            .skip(degree + 1)
            .map(max_norm)
            .fold(0.0, f64::max)
            / scale
    }

    /// Scalar polynomial `v† Q(y) w` in `y` (stripped), coefficients low to high.
    pub fn matrix_element(&self, left: &crate::CVec, right: &crate::CVec) -> Vec<C64> {
        self.coeffs
            .iter()
            .map(|m| left.dotc(&(m * right)))
            .collect()
    }

    /// Evaluates a scalar coefficient list such as [`QOperatorPoly::matrix_element`].
    pub fn eval_scalar(coeffs: &[C64], y: C64) -> C64 {
        poly_eval(coeffs, y)
    }
}

/// `‖XY - YX‖ / max(1, ‖X‖‖Y‖)`.
pub(crate) fn commutator_residual(x: &CMat, y: &CMat) -> f64 {
    let comm = x * y - y * x;
    max_norm(&comm) / (max_norm(x) * max_norm(y)).max(1.0)
}

/// Both sides of the auxiliary-space RTT relation for the ABCD monodromy.
pub fn rtt_residual(x: C64, y: C64, spin: Spin, n_sites: usize) -> Result<f64> {
    let mx = abcd_monodromy(x, spin, n_sites)?.aux_matrix();
    let my = abcd_monodromy(y, spin, n_sites)?.aux_matrix();
    let dim = mx.nrows() / 2;
    let dims = [2, 2, dim];
    let r = embed_factors(&r_fund(x - y), &dims, &[0, 1])?;
    let ix_mx = embed_factors(&mx, &dims, &[1, 2])?;
    let my_ix = embed_factors(&my, &dims, &[0, 2])?;
    let lhs = &r * &ix_mx * &my_ix;
    let rhs = &my_ix * &ix_mx * &r;
    Ok(max_norm(&(&lhs - &rhs)) / max_norm(&lhs).max(max_norm(&rhs)).max(1.0))
}

/// Residuals of every commutation statement of the commuting family.
pub fn commuting_family_components(
    spin: Spin,
    n_sites: usize,
    phi: C64,
    points: &[C64],
    tol: f64,
) -> Result<Vec<VerificationReport>> {
    if points.len() < 2 {
        return Err(Error::InvalidParameter("need at least two sample points".into()));
    }
    let chain = Chain::new(spin, n_sites)?;
    let s3 = chain.s3_total().into_matrix();
    let mut qp = Vec::new();
    let mut qm = Vec::new();
    let mut tt = Vec::new();
    for &y in points {
        qp.push(q_operator(Sign::Plus, y, phi, spin, n_sites)?.into_matrix());
        qm.push(q_operator(Sign::Minus, y, phi, spin, n_sites)?.into_matrix());
        tt.push(transfer_matrix(y, phi, spin, n_sites)?.into_matrix());
    }
    let worst = |name: &str, pairs: Vec<f64>| {
        let r = pairs.into_iter().fold(0.0, f64::max);
        VerificationReport::new(name, r, tol)
    };
    let n = points.len();
    let pairs = || (0..n).flat_map(move |i| (0..n).map(move |j| (i, j)));
    let mut out = vec![
        worst("QpQp", pairs().map(|(i, j)| commutator_residual(&qp[i], &qp[j])).collect()),
        worst("QmQm", pairs().map(|(i, j)| commutator_residual(&qm[i], &qm[j])).collect()),
        worst("QpQm", pairs().map(|(i, j)| commutator_residual(&qp[i], &qm[j])).collect()),
        worst("TT", pairs().map(|(i, j)| commutator_residual(&tt[i], &tt[j])).collect()),
        worst("TQp", pairs().map(|(i, j)| commutator_residual(&tt[i], &qp[j])).collect()),
        worst("TQm", pairs().map(|(i, j)| commutator_residual(&tt[i], &qm[j])).collect()),
        worst(
            "QS3",
            (0..n)
                .flat_map(|i| [commutator_residual(&qp[i], &s3), commutator_residual(&qm[i], &s3)])
                .collect(),
        ),
    ];
    let mut rtt = Vec::new();
    for i in 0..n {
        let j = (i + 1) % n;
        rtt.push(rtt_residual(points[i], points[j], spin, n_sites)?);
    }
    out.push(worst("RTT", rtt));
    Ok(out)
}

fn family_params(spin: Spin, n_sites: usize, phi: C64) -> Vec<(&'static str, Value)> {
    vec![
        ("spin", Value::from(spin.to_string())),
        ("sites", Value::from(n_sites)),
        ("phi", crate::report::complex_json(phi)),
    ]
}

/// Commuting family of `T`, `Q_+` and `Q_-`, plus magnetization and RTT, as one report.
pub fn check_commuting_family(
    spin: Spin,
    n_sites: usize,
    phi: C64,
    points: &[C64],
    tol: f64,
) -> Result<VerificationReport> {
    let parts = commuting_family_components(spin, n_sites, phi, points, tol)?;
    let mut components = Map::new();
    for p in &parts {
        components.insert(p.identity.clone(), Value::from(p.residual));
    }
    let residual = crate::report::worst(&parts);
    let mut report = VerificationReport::new("commuting_family", residual, tol);
    for (k, v) in family_params(spin, n_sites, phi) {
        report = report.with(k, v);
    }
    Ok(report
        .with_complex_list("points", points)
        .with("components", Value::Object(components)))
}

/// `K Q_+(y) K⁻¹ = Q_-(y)` at the opposite twist.
pub fn check_spin_flip(spin: Spin, n_sites: usize, phi: C64, y: C64, tol: f64) -> Result<VerificationReport> {
    ensure_regular(Sign::Plus, phi)?;
    let chain = Chain::new(spin, n_sites)?;
    let k = chain.spin_flip().into_matrix();
    let kinv = k
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::LinearAlgebra("spin flip not invertible".into()))?;
    let mut residual = 0.0f64;
    for sign in [Sign::Plus, Sign::Minus] {
        let q = q_operator(sign, y, phi, spin, n_sites)?.into_matrix();
        let other = q_operator(sign.flip(), y, -phi, spin, n_sites)?.into_matrix();
        let conj = &k * q * &kinv;
        residual = residual.max(max_norm(&(&conj - &other)) / max_norm(&other).max(1.0));
    }
    let mut report = VerificationReport::new("Q_spin_flip", residual, tol);
    for (key, v) in family_params(spin, n_sites, phi) {
        report = report.with(key, v);
    }
    Ok(report.with_complex("y", y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::eig;
    use crate::linop::spin_generators;
    use crate::vec_max_norm;

    #[test]
    fn single_site_is_the_lax_operator() {
        let y = c(0.7, -0.2);
        let m = abcd_monodromy(y, Spin::HALF, 1).unwrap();
        let (s3, sp, sm) = spin_generators(Spin::HALF);
        let id = CMat::identity(2, 2);
        assert_eq!(m.a.matrix(), &(&id * y + s3.matrix()));
        assert_eq!(m.b.matrix(), sm.matrix());
        assert_eq!(m.c.matrix(), sp.matrix());
        assert_eq!(m.d.matrix(), &(&id * y - s3.matrix()));
    }

    #[test]
    fn reference_state_action() {
        for (spin, n) in [(Spin::HALF, 3), (Spin::ONE, 2), (Spin::THREE_HALVES, 2)] {
            let y = c(0.45, 0.3);
            let m = abcd_monodromy(y, spin, n).unwrap();
            let chain = Chain::new(spin, n).unwrap();
            let omega = chain.omega_plus();
            let alpha = (y + spin.value()).powu(n as u32);
            let delta = (y - spin.value()).powu(n as u32);
            assert!(vec_max_norm(&(m.a.apply(&omega) - &omega * alpha)) < 1e-12);
            assert!(vec_max_norm(&(m.d.apply(&omega) - &omega * delta)) < 1e-12);
            assert!(vec_max_norm(&m.c.apply(&omega)) < 1e-12);
        }
    }

    #[test]
    fn b_operators_commute() {
        let bx = abcd_monodromy(c(0.31, 0.7), Spin::HALF, 3).unwrap().b;
        let by = abcd_monodromy(c(-1.2, 0.05), Spin::HALF, 3).unwrap().b;
        assert!(commutator_residual(bx.matrix(), by.matrix()) < 1e-13);
    }

    #[test]
    fn transfer_matrix_examples() {
        let y = c(1.7, 0.0);
        let t = transfer_matrix(y, c(0.0, 0.0), Spin::HALF, 1).unwrap();
        assert!(max_norm(&(t.matrix() - CMat::identity(2, 2) * (y * 2.0))) < 1e-15);

        let phi = c(0.3, 0.0);
        let chain = Chain::new(Spin::ONE, 2).unwrap();
        let t = transfer_matrix(y, phi, Spin::ONE, 2).unwrap();
        let omega = chain.omega_plus();
        let expected = (c(0.0, -1.0) * phi).exp() * (y + 1.0).powu(2) + (c(0.0, 1.0) * phi).exp() * (y - 1.0).powu(2);
        assert!((omega.dotc(&t.apply(&omega)) - expected).norm() < 1e-12);

        let tx = transfer_matrix(c(0.2, 0.1), phi, Spin::HALF, 3).unwrap();
        let ty = transfer_matrix(c(-0.9, 0.4), phi, Spin::HALF, 3).unwrap();
        assert!(commutator_residual(tx.matrix(), ty.matrix()) < 1e-11);
    }

    #[test]
    fn q_monodromy_on_reference_state_is_y_independent() {
        let spin = Spin::HALF;
        let n = 3;
        let m1 = q_monodromy(Sign::Plus, c(0.3, 0.0), spin, n).unwrap();
        let m2 = q_monodromy(Sign::Plus, c(7.1, 0.0), spin, n).unwrap();
        let chain = Chain::new(spin, n).unwrap();
        let omega = chain.omega_plus();
        let sm = chain.sm_total().into_matrix();
        let mut expected_k = omega.clone();
        for k in 0..=chain.max_magnons() {
            // Coefficient of ā^k a^0 acting on Ω⁺ is (S₋)^k Ω⁺ / k!.
            let expected = &expected_k / c(crate::weyl::factorial(k), 0.0);
            for m in [&m1, &m2] {
                let got = m.poly.coeff(k, 0).map(|mat| mat * &omega).unwrap_or_else(|| omega.clone() * c(0.0, 0.0));
                assert!(vec_max_norm(&(&got - &expected)) < 1e-12, "k={k}");
                for q in 1..=chain.max_magnons() {
                    if let Some(mat) = m.poly.coeff(k, q) {
                        assert!(vec_max_norm(&(mat * &omega)) < 1e-12);
                    }
                }
            }
            expected_k = &sm * expected_k;
        }
    }

    #[test]
    fn spin_half_single_site_q_monodromy_is_oscillator_lax() {
        let z = c(0.25, 0.5);
        let m = q_monodromy(Sign::Plus, z + 0.5, Spin::HALF, 1).unwrap();
        let l = crate::lax::l_osc(Sign::Plus, z);
        for row in 0..2 {
            for col in 0..2 {
                let mut entry = m.poly.map_coeffs(|mat| CMat::from_element(1, 1, mat[(row, col)]));
                entry.cleanup();
                assert!(entry.distance(l.entry(row, col)).unwrap() < 1e-15);
            }
        }
    }

    #[test]
    fn trace_formula_on_reference_state() {
        let spin = Spin::HALF;
        let n = 3;
        let phi = c(0.37, 0.0);
        let chain = Chain::new(spin, n).unwrap();
        let omega = chain.omega_plus();
        let sm = chain.sm_total().into_matrix();
        let x = twist_regulator(Sign::Plus, phi);
        let z_plus = c(1.0, 0.0) / (c(1.0, 0.0) - x);
        let m = q_monodromy(Sign::Plus, c(0.8, 0.2), spin, n).unwrap();
        let mut sm_k = omega.clone();
        for k in 0..=3 {
            let with_a = m.poly.try_mul(&WeylPoly::annihilate_pow(chain.dim(), k)).unwrap();
            let got = with_a.regulated_trace(x).unwrap() * &omega;
            let denom = ((c(0.0, 2.0) * phi).exp() - 1.0).powu(k as u32);
            let expected = &sm_k * (z_plus / denom);
            assert!(vec_max_norm(&(&got - &expected)) < 1e-11 * vec_max_norm(&expected).max(1.0), "k={k}");
            sm_k = &sm * sm_k;
        }
    }

    #[test]
    fn q_plus_on_reference_state() {
        let phi = c(0.5, 0.0);
        let y = c(1.3, -0.4);
        let chain = Chain::new(Spin::ONE, 2).unwrap();
        let q = q_operator(Sign::Plus, y, phi, Spin::ONE, 2).unwrap();
        let omega = chain.omega_plus();
        let expected = &omega * twist_prefactor(Sign::Plus, y, phi);
        assert!(vec_max_norm(&(q.apply(&omega) - expected)) < 1e-12);
    }

    #[test]
    fn q_operators_commute_and_are_polynomial() {
        let phi = c(0.3, 0.0);
        let q1 = q_operator(Sign::Plus, c(1.1, 0.0), phi, Spin::HALF, 2).unwrap();
        let q2 = q_operator(Sign::Plus, c(-0.7, 0.0), phi, Spin::HALF, 2).unwrap();
        assert!(commutator_residual(q1.matrix(), q2.matrix()) < 1e-11);
        for sign in [Sign::Plus, Sign::Minus] {
            let poly = QOperatorPoly::build(sign, phi, Spin::HALF, 2).unwrap();
            assert!(poly.fit_residual < 1e-9, "{}", poly.fit_residual);
            assert!(poly.excess_above(2) < 1e-9);
        }
    }

    #[test]
    fn sector_degrees_of_eigenvalues() {
        let phi = c(0.4, 0.0);
        let spin = Spin::HALF;
        let n = 3;
        let chain = Chain::new(spin, n).unwrap();
        let poly_p = QOperatorPoly::build(Sign::Plus, phi, spin, n).unwrap();
        let poly_m = QOperatorPoly::build(Sign::Minus, phi, spin, n).unwrap();
        let y0 = c(0.61803, 0.0);
        let base = poly_p.eval_stripped(y0) + poly_m.eval_stripped(y0) * c(0.7317, 0.2193);
        let (_, vecs) = eig(&base).unwrap();
        for v in vecs {
            let m = (0..chain.dim())
                .max_by(|&i, &j| v[i].norm().total_cmp(&v[j].norm()))
                .map(|i| chain.magnons_of(i))
                .unwrap();
            let norm2 = v.dotc(&v);
            let plus: Vec<C64> = poly_p.matrix_element(&v, &v).iter().map(|z| z / norm2).collect();
            let minus: Vec<C64> = poly_m.matrix_element(&v, &v).iter().map(|z| z / norm2).collect();
            assert!((plus[m] - 1.0).norm() < 1e-9, "m={m} plus={plus:?}");
            assert!(plus.iter().skip(m + 1).all(|z| z.norm() < 1e-9));
            let dm = chain.max_magnons() - m;
            assert!(minus[dm].norm() > 1e-6);
            assert!(minus.iter().skip(dm + 1).all(|z| z.norm() < 1e-9));
        }
    }

    #[test]
    fn commuting_family_checks() {
        let points = [c(0.37, 0.11), c(-1.3, 0.5), c(2.2, -0.7)];
        for (spin, n) in [(Spin::HALF, 3), (Spin::ONE, 2)] {
            let rep = check_commuting_family(spin, n, c(0.4, 0.0), &points, 1e-10).unwrap();
            assert!(rep.pass, "{rep:?}");
        }
    }

    #[test]
    fn spin_flip_relation() {
        let rep = check_spin_flip(Spin::HALF, 2, c(0.3, 0.0), c(0.9, 0.2), 1e-12).unwrap();
        assert!(rep.pass, "{rep:?}");
        let rep = check_spin_flip(Spin::ONE, 1, c(0.3, 0.0), c(-0.4, 1.2), 1e-12).unwrap();
        assert!(rep.pass, "{rep:?}");
        assert_eq!(
            check_spin_flip(Spin::HALF, 2, c(0.0, 0.0), c(0.9, 0.0), 1e-12),
            Err(Error::SingularTwist)
        );
    }

    #[test]
    fn degree_bound_holds() {
        let m = q_monodromy(Sign::Minus, c(0.2, 0.0), Spin::ONE, 2).unwrap();
        assert!(m.poly.degree() <= 4);
    }
}
