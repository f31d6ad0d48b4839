//! Numerical engine for the Q-operators of the twisted Heisenberg XXX_s spin chain.
//!
//! The crate builds every object of the construction as a finite matrix:
//! spin-s generators and their chain embeddings ([`linop`]), the
//! single-oscillator Weyl algebra with operator-valued coefficients ([`weyl`]),
//! the local R- and L-operators ([`lax`]), chain monodromies, transfer matrix
//! and Q-operators ([`monodromy`]), the commutation-relation and unwanted-term
//! machinery of the algebraic Bethe ansatz ([`fcr`]), Bethe roots and
//! eigenvector checks ([`bethe`]), and the twisted Hamiltonian together with
//! the relation pairing roots on both sides of the equator ([`extras`]).
//!
//! Every identity checker returns a [`VerificationReport`].

pub mod bethe;
pub mod error;
pub mod extras;
pub mod fcr;
pub mod lax;
pub mod linalg;
pub mod linop;
pub mod monodromy;
pub mod report;
pub mod weyl;

pub use error::{Error, Result};
pub use linop::{Chain, QSpaceOp, SiteOp, Spin};
pub use report::VerificationReport;
pub use weyl::WeylPoly;

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;
/// Dense complex matrix.
pub type CMat = nalgebra::DMatrix<C64>;
/// Dense complex column vector.
pub type CVec = nalgebra::DVector<C64>;

/// Which of the two Q-operators (or Bethe-root families) an object belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Sign {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl Sign {
    /// `+1.0` or `-1.0`.
    pub fn factor(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn flip(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }
}

impl std::fmt::Display for Sign {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Sign::Plus => "+",
            Sign::Minus => "-",
        })
    }
}

impl std::str::FromStr for Sign {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "+" | "plus" | "p" => Ok(Sign::Plus),
            "-" | "minus" | "m" => Ok(Sign::Minus),
            other => Err(Error::InvalidParameter(format!("unknown sign {other:?}"))),
        }
    }
}

pub(crate) fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Largest absolute entry of a matrix.
pub fn max_norm(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Largest absolute entry of a vector.
pub fn vec_max_norm(v: &CVec) -> f64 {
    v.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Residual measured against `scale`: absolute below one, relative above.
pub fn scaled_residual(diff: f64, scale: f64) -> f64 {
    diff / scale.max(1.0)
}
