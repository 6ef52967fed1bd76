//! Norm exponents and their Hölder conjugates.

use std::fmt;
use std::str::FromStr;

use crate::error::{MdpError, Result};
use crate::scalar::Scalar;

/// Exponent `r > 1, r != 2` paired with its conjugate `r / (r - 1)`.
///
/// The conjugate is stored rather than recomputed so that conjugation is an
/// exact involution in floating point.
#[derive(Clone, Copy, Debug)]
pub struct FiniteExponent {
    r: f64,
    conj: f64,
}

impl FiniteExponent {
    #[inline]
    pub fn value(&self) -> f64 {
        self.r
    }

    #[inline]
    pub fn conjugate_value(&self) -> f64 {
        self.conj
    }
}

impl PartialEq for FiniteExponent {
    fn eq(&self, other: &Self) -> bool {
        self.r == other.r
    }
}

/// Index `p` of an Lp ball. `1`, `2` and `inf` have closed-form operators;
/// every other exponent goes through bisection.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NormIndex {
    One,
    Two,
    Infinity,
    Finite(FiniteExponent),
}

impl NormIndex {
    /// Classify an exponent. `1.0`, `2.0` and `+inf` map to the dedicated
    /// variants; anything else `> 1` becomes `Finite`.
    pub fn from_exponent(r: f64) -> Result<Self> {
        if r.is_nan() || r < 1.0 {
            return Err(MdpError::InvalidNorm(r));
        }
        Ok(if r == 1.0 {
            NormIndex::One
        } else if r == 2.0 {
            NormIndex::Two
        } else if r.is_infinite() {
            NormIndex::Infinity
        } else {
            NormIndex::Finite(FiniteExponent {
                r,
                conj: r / (r - 1.0),
            })
        })
    }

    /// The exponent as a real number (`+inf` for `Infinity`).
    pub fn exponent(&self) -> f64 {
        match self {
            NormIndex::One => 1.0,
            NormIndex::Two => 2.0,
            NormIndex::Infinity => f64::INFINITY,
            NormIndex::Finite(e) => e.r,
        }
    }

    /// Hölder conjugate `q` with `1/p + 1/q = 1`.
    pub fn conjugate(&self) -> Self {
        match self {
            NormIndex::One => NormIndex::Infinity,
            NormIndex::Two => NormIndex::Two,
            NormIndex::Infinity => NormIndex::One,
            NormIndex::Finite(e) => NormIndex::Finite(FiniteExponent {
                r: e.conj,
                conj: e.r,
            }),
        }
    }

    /// `||x||_p`.
    pub fn norm<T: Scalar>(&self, x: &[T]) -> T {
        match self {
            NormIndex::One => x.iter().map(|v| v.abs()).sum(),
            NormIndex::Two => x.iter().map(|&v| v * v).sum::<T>().sqrt(),
            NormIndex::Infinity => x.iter().fold(T::zero(), |m, v| m.max(v.abs())),
            NormIndex::Finite(e) => {
                let r = T::lit(e.r);
                x.iter()
                    .map(|v| v.abs().powf(r))
                    .sum::<T>()
                    .powf(r.recip())
            }
        }
    }
}

/// Hölder conjugate of `p`.
pub fn holder_conjugate(p: NormIndex) -> NormIndex {
    p.conjugate()
}

impl fmt::Display for NormIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NormIndex::One => write!(f, "1"),
            NormIndex::Two => write!(f, "2"),
            NormIndex::Infinity => write!(f, "inf"),
            NormIndex::Finite(e) => write!(f, "{}", e.r),
        }
    }
}

impl FromStr for NormIndex {
    type Err = MdpError;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        if matches!(t.as_str(), "inf" | "infinity" | "max") {
            return Ok(NormIndex::Infinity);
        }
        let r: f64 = t.parse().map_err(|_| MdpError::InvalidNorm(f64::NAN))?;
        NormIndex::from_exponent(r)
    }
}
