use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fmt;

/// A point of the Riemann sphere.
///
/// The enum gives the point at infinity a single representation.
/// Serialized as `[re, im]`, or the string `"inf"`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "Repr", into = "Repr")]
pub enum SpherePoint {
    Finite(Complex64),
    Infinity,
}

#[derive(Clone, Copy, Serialize, Deserialize)]
#[serde(untagged)]
enum Repr {
    Finite([f64; 2]),
    Infinity(InfTag),
}

#[derive(Clone, Copy, Serialize, Deserialize)]
enum InfTag {
    #[serde(rename = "inf")]
    Inf,
}

impl From<Repr> for SpherePoint {
    fn from(r: Repr) -> Self {
        match r {
            Repr::Finite([re, im]) => SpherePoint::new(re, im),
            Repr::Infinity(_) => SpherePoint::Infinity,
        }
    }
}

impl From<SpherePoint> for Repr {
    fn from(p: SpherePoint) -> Self {
        match p {
            SpherePoint::Finite(z) => Repr::Finite([z.re, z.im]),
            SpherePoint::Infinity => Repr::Infinity(InfTag::Inf),
        }
    }
}

impl SpherePoint {
    pub fn new(re: f64, im: f64) -> Self {
        SpherePoint::Finite(Complex64::new(re, im))
    }

    pub fn real(re: f64) -> Self {
        SpherePoint::Finite(Complex64::new(re, 0.0))
    }

    pub fn is_infinity(&self) -> bool {
        matches!(self, SpherePoint::Infinity)
    }

    pub fn finite(&self) -> Option<Complex64> {
        match *self {
            SpherePoint::Finite(z) => Some(z),
            SpherePoint::Infinity => None,
        }
    }

    /// Chordal distance on the sphere of diameter 2.
    pub fn chordal(&self, other: &SpherePoint) -> f64 {
        match (*self, *other) {
            (SpherePoint::Infinity, SpherePoint::Infinity) => 0.0,
            (SpherePoint::Finite(z), SpherePoint::Infinity) | (SpherePoint::Infinity, SpherePoint::Finite(z)) => {
                2.0 / (1.0 + z.norm_sqr()).sqrt()
            }
            (SpherePoint::Finite(z), SpherePoint::Finite(w)) => {
                2.0 * (z - w).norm() / ((1.0 + z.norm_sqr()) * (1.0 + w.norm_sqr())).sqrt()
            }
        }
    }

    /// Lexicographic total order used to normalize leaf lists; infinity sorts last.
    pub fn total_cmp(&self, other: &SpherePoint) -> std::cmp::Ordering {
        use std::cmp::Ordering;
        match (self, other) {
            (SpherePoint::Infinity, SpherePoint::Infinity) => Ordering::Equal,
            (SpherePoint::Infinity, _) => Ordering::Greater,
            (_, SpherePoint::Infinity) => Ordering::Less,
            (SpherePoint::Finite(a), SpherePoint::Finite(b)) => a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)),
        }
    }
}

impl From<Complex64> for SpherePoint {
    fn from(z: Complex64) -> Self {
        SpherePoint::Finite(z)
    }
}

impl fmt::Display for SpherePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpherePoint::Infinity => write!(f, "∞"),
            SpherePoint::Finite(z) => write!(f, "{}{:+}i", z.re, z.im),
        }
    }
}
