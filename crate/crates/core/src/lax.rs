//! Local R- and L-operators and their Yang–Baxter / unitarity relations.
//!
//! Two-by-two auxiliary structures are [`Block2x2`]s whose entries are
//! [`WeylPoly`]s; an entry without oscillator content is a single `(0,0)`
//! monomial. Relations are checked by lifting every factor onto a common
//! tensor space (auxiliary, site and so on) and comparing normal-ordered
//! coefficients, so oscillator legs are handled exactly.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::linop::{casimir_op, spin_generators, spin_flip_k, SiteOp, Spin};
use crate::weyl::WeylPoly;
use crate::{c, CMat, Error, Result, Sign, VerificationReport, C64};

/// Fundamental R-matrix `x·1 + P` on `C^2 ⊗ C^2`.
pub fn r_fund(x: C64) -> CMat {
    let one = c(1.0, 0.0);
    let z = c(0.0, 0.0);
    CMat::from_row_slice(
        4,
        4,
        &[
            x + one, z, z, z, //
            z, x, one, z, //
            z, one, x, z, //
            z, z, z, x + one,
        ],
    )
}

/// A 2×2 auxiliary matrix with oscillator/operator-valued entries.
#[derive(Clone, Debug, PartialEq)]
pub struct Block2x2 {
    /// Row-major `[e11, e12, e21, e22]`.
    pub entries: [WeylPoly; 4],
}

impl Block2x2 {
    pub fn new(e11: WeylPoly, e12: WeylPoly, e21: WeylPoly, e22: WeylPoly) -> Result<Self> {
        let dim = e11.dim();
        for e in [&e12, &e21, &e22] {
            if e.dim() != dim {
                return Err(Error::DimensionMismatch {
                    left: dim,
                    right: e.dim(),
                });
            }
        }
        Ok(Self {
            entries: [e11, e12, e21, e22],
        })
    }

    pub fn entry(&self, row: usize, col: usize) -> &WeylPoly {
        &self.entries[2 * row + col]
    }

    /// Coefficient dimension shared by the entries.
    pub fn coeff_dim(&self) -> usize {
        self.entries[0].dim()
    }

    /// The block as one Weyl polynomial on `C^2 ⊗ (coefficient space)`, auxiliary first.
    pub fn to_weyl(&self) -> WeylPoly {
        let d = self.coeff_dim();
        let mut acc = WeylPoly::zero(2 * d);
        for row in 0..2 {
            for col in 0..2 {
                let mut unit = CMat::zeros(2, 2);
                unit[(row, col)] = c(1.0, 0.0);
                let lifted = self.entry(row, col).map_coeffs(|m| unit.kronecker(m));
                acc = &acc + &lifted;
            }
        }
        acc
    }
}

fn site_poly(m: &CMat) -> WeylPoly {
    WeylPoly::from_matrix(m.clone())
}

fn spin_lax(shift: C64, spin: Spin) -> Block2x2 {
    let (s3, sp, sm) = spin_generators(spin);
    let d = spin.dim();
    let id = CMat::identity(d, d);
    Block2x2 {
        entries: [
            site_poly(&(&id * shift + s3.matrix())),
            site_poly(sm.matrix()),
            site_poly(sp.matrix()),
            site_poly(&(&id * shift - s3.matrix())),
        ],
    }
}

/// `L_{□,s}(y) = [[y+1+S3, S-], [S+, y+1-S3]]`.
pub fn l_fund(y: C64, spin: Spin) -> Block2x2 {
    spin_lax(y + 1.0, spin)
}

/// `L_{s,□}(y) = [[y+S3, S-], [S+, y-S3]]`.
pub fn l_bar(y: C64, spin: Spin) -> Block2x2 {
    spin_lax(y, spin)
}

fn osc(p: usize, q: usize, z: C64) -> WeylPoly {
    WeylPoly::monomial(p, q, CMat::identity(1, 1) * z)
}

fn scalar1(z: C64) -> WeylPoly {
    WeylPoly::scalar(1, z)
}

/// `L_{□,+}(z) = [[1, -a], [ā, z - āa]]`, `L_{□,-}(z) = [[z - āa, ā], [-a, 1]]`.
pub fn l_osc(sign: Sign, z: C64) -> Block2x2 {
    let one = c(1.0, 0.0);
    let z_minus_n = &scalar1(z) - &osc(1, 1, one);
    let entries = match sign {
        Sign::Plus => [scalar1(one), osc(0, 1, -one), osc(1, 0, one), z_minus_n],
        Sign::Minus => [z_minus_n, osc(1, 0, one), osc(0, 1, -one), scalar1(one)],
    };
    Block2x2 { entries }
}

/// `L_{+,□}(z) = [[z+1+āa, -a], [ā, -1]]`, `L_{-,□}(z) = [[-1, ā], [-a, z+1+āa]]`.
pub fn l_osc_bar(sign: Sign, z: C64) -> Block2x2 {
    let one = c(1.0, 0.0);
    let shifted = &scalar1(z + 1.0) + &osc(1, 1, one);
    let entries = match sign {
        Sign::Plus => [shifted, osc(0, 1, -one), osc(1, 0, one), scalar1(-one)],
        Sign::Minus => [scalar1(-one), osc(1, 0, one), osc(0, 1, -one), shifted],
    };
    Block2x2 { entries }
}

/// Diagonal part of `R_{s,±}(y)`: `Γ(y ∓ S3)/Γ(y - s)` as a finite product.
///
/// On the S3 eigenvalue `m` the entry is `Π_{k=±m+1}^{s} (y - k)`, which is
/// one on the highest (for `+`) or lowest (for `-`) weight.
pub fn diag_part(sign: Sign, y: C64, spin: Spin) -> SiteOp {
    let d = spin.dim();
    let twice_s = spin.twice() as i64;
    let mut mat = CMat::zeros(d, d);
    for idx in 0..d {
        // Work with doubled weights so half-integer spins stay exact.
        let twice_m = twice_s - 2 * idx as i64;
        let start = sign.factor() as i64 * twice_m + 2;
        let mut prod = c(1.0, 0.0);
        let mut twice_k = start;
        while twice_k <= twice_s {
            prod *= y - twice_k as f64 / 2.0;
            twice_k += 2;
        }
        mat[(idx, idx)] = prod;
    }
    SiteOp::new(mat).expect("diagonal is square and finite")
}

/// `R_{s,±}(y) = e^{ā S∓} R⁰_±(y) e^{-a S±}` with site-operator coefficients.
pub fn r_spm(sign: Sign, y: C64, spin: Spin) -> WeylPoly {
    let (_, sp, sm) = spin_generators(spin);
    let (raise_with, lower_with) = match sign {
        Sign::Plus => (sm, sp),
        Sign::Minus => (sp, sm),
    };
    let left = WeylPoly::exp_raising(raise_with.matrix()).expect("ladder operators are nilpotent");
    let right = WeylPoly::exp_lowering(lower_with.matrix()).expect("ladder operators are nilpotent");
    let middle = WeylPoly::from_matrix(diag_part(sign, y, spin).into_matrix());
    let out = &(&left * &middle) * &right;
    out.with_bound(spin.twice() as usize)
        .expect("local degree is at most 2s")
}

/// Identifiers of the local relations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Relation {
    /// `R(x-y) L_{□,s}(x) L_{□,s}(y) = L_{□,s}(y) L_{□,s}(x) R(x-y)`.
    RttFund,
    /// Same RLL relation for the oscillator solutions `L_{□,±}`.
    YbeLOsc,
    /// `L_{□,s}(x-y) L_{□,±}(x) R_{s,±}(y) = R_{s,±}(y) L_{□,±}(x) L_{□,s}(x-y)`.
    YbeMixed,
    /// `R_{s,±}(y) L_{s,□}(x) L_{±,□}(x-y) = L_{±,□}(x-y) L_{s,□}(x) R_{s,±}(y)`.
    YbeFcr,
    /// `L_{s,□}(x-y) L_{□,s}(y-x) = (y-x)(x-y-1) + c/2`.
    UnitLax,
    /// `L_{±,□}(x-y) L_{□,±}(y-x) = x - y`.
    UnitOsc,
}

impl Relation {
    pub const ALL: [Relation; 6] = [
        Relation::RttFund,
        Relation::YbeLOsc,
        Relation::YbeMixed,
        Relation::YbeFcr,
        Relation::UnitLax,
        Relation::UnitOsc,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Relation::RttFund => "RTT_fund",
            Relation::YbeLOsc => "YBE_L_osc",
            Relation::YbeMixed => "YBE_mixed",
            Relation::YbeFcr => "YBE_fcr",
            Relation::UnitLax => "UNIT_lax",
            Relation::UnitOsc => "UNIT_osc",
        }
    }

    /// Whether the relation depends on the oscillator sign.
    pub fn is_signed(self) -> bool {
        !matches!(self, Relation::RttFund | Relation::UnitLax)
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Relation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Relation::ALL
            .into_iter()
            .find(|r| r.id() == s)
            .ok_or_else(|| Error::UnknownRelation(s.to_string()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RelationParams {
    pub x: C64,
    pub y: C64,
    pub spin: Spin,
    pub sign: Sign,
    pub tol: f64,
}

/// Relative residual between two sides (absolute when both are below one).
pub(crate) fn weyl_residual(lhs: &WeylPoly, rhs: &WeylPoly) -> Result<f64> {
    let scale = lhs.max_norm().max(rhs.max_norm()).max(1.0);
    Ok(lhs.distance(rhs)? / scale)
}

/// Both sides of a local relation, lifted to a common space.
pub fn relation_sides(relation: Relation, p: &RelationParams) -> Result<(WeylPoly, WeylPoly)> {
    let RelationParams {
        x, y, spin, sign, ..
    } = *p;
    let d = spin.dim();
    let r12 = |u: C64| WeylPoly::from_matrix(r_fund(u));
    Ok(match relation {
        Relation::RttFund => {
            let dims = [2, 2, d];
            let r = r12(x - y).embed(&dims, &[0, 1])?;
            let lx = l_fund(x, spin).to_weyl().embed(&dims, &[0, 2])?;
            let ly = l_fund(y, spin).to_weyl().embed(&dims, &[1, 2])?;
            (&(&r * &lx) * &ly, &(&ly * &lx) * &r)
        }
        Relation::YbeLOsc => {
            let dims = [2, 2];
            let r = r12(x - y);
            let lx = l_osc(sign, x).to_weyl().embed(&dims, &[0])?;
            let ly = l_osc(sign, y).to_weyl().embed(&dims, &[1])?;
            (&(&r * &lx) * &ly, &(&ly * &lx) * &r)
        }
        Relation::YbeMixed => {
            let dims = [2, d];
            let big_l = l_fund(x - y, spin).to_weyl();
            let small_l = l_osc(sign, x).to_weyl().embed(&dims, &[0])?;
            let r = r_spm(sign, y, spin).embed(&dims, &[1])?;
            (
                &(&big_l * &small_l) * &r,
                &(&r * &small_l) * &big_l,
            )
        }
        Relation::YbeFcr => {
            let dims = [2, d];
            let r = r_spm(sign, y, spin).embed(&dims, &[1])?;
            let big_l = l_bar(x, spin).to_weyl();
            let small_l = l_osc_bar(sign, x - y).to_weyl().embed(&dims, &[0])?;
            (
                &(&r * &big_l) * &small_l,
                &(&small_l * &big_l) * &r,
            )
        }
        Relation::UnitLax => {
            let lhs = &l_bar(x - y, spin).to_weyl() * &l_fund(y - x, spin).to_weyl();
            let scalar = (y - x) * (x - y - 1.0);
            let casimir_half = casimir_op(spin).into_matrix() * c(0.5, 0.0);
            let rhs = CMat::identity(2, 2).kronecker(&(CMat::identity(d, d) * scalar + casimir_half));
            (lhs, WeylPoly::from_matrix(rhs))
        }
        Relation::UnitOsc => {
            let lhs = &l_osc_bar(sign, x - y).to_weyl() * &l_osc(sign, y - x).to_weyl();
            (lhs, WeylPoly::scalar(2, x - y))
        }
    })
}

/// Checks one local relation at one parameter point.
pub fn check_relation(relation: Relation, p: &RelationParams) -> Result<VerificationReport> {
    let (lhs, rhs) = relation_sides(relation, p)?;
    let residual = weyl_residual(&lhs, &rhs)?;
    let mut report = VerificationReport::new(relation.id(), residual, p.tol)
        .with_complex("x", p.x)
        .with_complex("y", p.y)
        .with("spin", p.spin.to_string());
    if relation.is_signed() {
        report = report.with("sign", p.sign.to_string());
    }
    Ok(report)
}

/// Looks the relation up by its string id first.
pub fn check_relation_by_id(relation_id: &str, p: &RelationParams) -> Result<VerificationReport> {
    check_relation(relation_id.parse()?, p)
}

/// Every local relation (both signs where applicable) at one parameter point.
pub fn check_all_relations(x: C64, y: C64, spin: Spin, tol: f64) -> Result<Vec<VerificationReport>> {
    let mut out = Vec::new();
    for relation in Relation::ALL {
        let signs: &[Sign] = if relation.is_signed() {
            &[Sign::Plus, Sign::Minus]
        } else {
            &[Sign::Plus]
        };
        for &sign in signs {
            out.push(check_relation(
                relation,
                &RelationParams {
                    x,
                    y,
                    spin,
                    sign,
                    tol,
                },
            )?);
        }
    }
    Ok(out)
}

/// `K R_{s,±}(y) K⁻¹ = R_{s,∓}(y)`, compared monomial by monomial.
pub fn check_lax_spin_flip(sign: Sign, y: C64, spin: Spin, tol: f64) -> Result<VerificationReport> {
    let k = spin_flip_k(spin);
    let kinv = k.inverse()?;
    let conj = r_spm(sign, y, spin).map_coeffs(|m| k.matrix() * m * kinv.matrix());
    let other = r_spm(sign.flip(), y, spin);
    let residual = weyl_residual(&conj, &other)?;
    Ok(VerificationReport::new("LAX_spin_flip", residual, tol)
        .with("sign", sign.to_string())
        .with_complex("y", y)
        .with("spin", spin.to_string()))
}
