use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::error::{Error, Result};

/// Dense polynomial with complex coefficients in ascending degree order.
///
/// The leading coefficient is always nonzero. Degree-0 polynomials are
/// allowed here so they can serve as rational numerators and denominators;
/// `MapExpr::Poly` additionally requires degree ≥ 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Complex64>", into = "Vec<Complex64>")]
pub struct Polynomial {
    coeffs: Vec<Complex64>,
}

impl TryFrom<Vec<Complex64>> for Polynomial {
    type Error = Error;

    fn try_from(coeffs: Vec<Complex64>) -> Result<Self> {
        Polynomial::new(coeffs)
    }
}

impl From<Polynomial> for Vec<Complex64> {
    fn from(p: Polynomial) -> Self {
        p.coeffs
    }
}

impl Polynomial {
    pub fn new(coeffs: Vec<Complex64>) -> Result<Self> {
        match coeffs.last() {
            None => Err(Error::InvalidMap("empty coefficient list".into())),
            Some(c) if *c == Complex64::new(0.0, 0.0) => Err(Error::InvalidMap(
                "trailing zero coefficient (leading term must be nonzero)".into(),
            )),
            _ if coeffs.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) => {
                Err(Error::InvalidMap("non-finite coefficient".into()))
            }
            _ => Ok(Polynomial { coeffs }),
        }
    }

    pub fn from_real(coeffs: &[f64]) -> Result<Self> {
        Self::new(coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect())
    }

    /// The monomial `a·z^d`.
    pub fn monomial(a: Complex64, d: usize) -> Result<Self> {
        let mut coeffs = vec![Complex64::new(0.0, 0.0); d + 1];
        coeffs[d] = a;
        Self::new(coeffs)
    }

    /// `a·(z - b)^d + c`, expanded by the binomial theorem.
    pub fn shifted_power(a: Complex64, b: Complex64, d: usize, c: Complex64) -> Result<Self> {
        let mut coeffs = vec![Complex64::new(0.0, 0.0); d + 1];
        let mut binom = 1.0;
        for (k, slot) in coeffs.iter_mut().enumerate() {
            // coefficient of z^k in (z - b)^d is C(d,k)(-b)^(d-k)
            *slot = a * binom * (-b).powu((d - k) as u32);
            binom = binom * (d - k) as f64 / (k + 1) as f64;
        }
        coeffs[0] += c;
        Self::new(coeffs)
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn leading(&self) -> Complex64 {
        self.coeffs[self.degree()]
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    /// Value and first derivative by a single Horner pass.
    pub fn eval_with_deriv(&self, z: Complex64) -> (Complex64, Complex64) {
        let zero = Complex64::new(0.0, 0.0);
        let mut p = zero;
        let mut dp = zero;
        for &c in self.coeffs.iter().rev() {
            dp = dp * z + p;
            p = p * z + c;
        }
        (p, dp)
    }

    /// Derivative; `None` for constants.
    pub fn derivative(&self) -> Option<Polynomial> {
        if self.degree() == 0 {
            return None;
        }
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, &c)| c * k as f64)
            .collect();
        Some(Polynomial { coeffs })
    }

    /// Coefficients of `w^m · p(1/w)` (requires `m ≥ degree`).
    pub fn reversed_coeffs(&self, m: usize) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); m + 1];
        for (k, &c) in self.coeffs.iter().enumerate() {
            out[m - k] = c;
        }
        out
    }

    /// Cauchy bound `1 + max |a_k / a_d|`; every root lies inside it.
    pub fn cauchy_radius(&self) -> f64 {
        let lead = self.leading().norm();
        1.0 + self.coeffs[..self.degree()]
            .iter()
            .map(|c| c.norm() / lead)
            .fold(0.0, f64::max)
    }
}

/// Arithmetic helpers on raw coefficient vectors, used where an
/// intermediate polynomial may legitimately have zero leading terms.
pub(crate) fn trim(mut coeffs: Vec<Complex64>, rel_tol: f64) -> Vec<Complex64> {
    let scale = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
    while coeffs.len() > 1 && coeffs.last().is_some_and(|c| c.norm() <= rel_tol * scale) {
        coeffs.pop();
    }
    coeffs
}

pub(crate) fn mul(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

pub(crate) fn sub(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let n = a.len().max(b.len());
    (0..n)
        .map(|k| a.get(k).copied().unwrap_or_default() - b.get(k).copied().unwrap_or_default())
        .collect()
}

fn horner(coeffs: &[Complex64], z: Complex64) -> (Complex64, Complex64) {
    let zero = Complex64::new(0.0, 0.0);
    let mut p = zero;
    let mut dp = zero;
    for &c in coeffs.iter().rev() {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

const ABERTH_MAX_ITER: usize = 500;
const NEWTON_POLISH_STEPS: usize = 3;

/// All roots of the polynomial with the given coefficients (ascending,
/// leading coefficient nonzero), clustered within `delta` so that each
/// entry carries its multiplicity. Multiplicities sum to the degree.
pub fn roots_with_multiplicity(coeffs: &[Complex64], delta: f64) -> Vec<(Complex64, u32)> {
    let d = coeffs.len() - 1;
    if d == 0 {
        return Vec::new();
    }
    let raw = if d == 1 {
        vec![-coeffs[0] / coeffs[1]]
    } else if let Some(r) = shifted_power_roots(coeffs) {
        r
    } else {
        aberth(coeffs)
    };
    let polished: Vec<Complex64> = raw.into_iter().map(|z| newton_polish(coeffs, z)).collect();
    cluster(&polished, delta)
}

/// Closed form for polynomials of the shape `a(z-b)^d + c`.
///
/// Every quadratic has this shape, as do the monomial-type generators
/// common in fixtures. Returns `None` when the Taylor coefficients at the
/// centre do not vanish.
fn shifted_power_roots(coeffs: &[Complex64]) -> Option<Vec<Complex64>> {
    let d = coeffs.len() - 1;
    let a = coeffs[d];
    let b = -coeffs[d - 1] / (a * d as f64);
    let taylor = taylor_shift(coeffs, b);
    let scale = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max) * (1.0 + b.norm()).powi(d as i32);
    if taylor[1..d]
        .iter()
        .any(|c| c.norm() > 1e-13 * scale.max(f64::MIN_POSITIVE))
    {
        return None;
    }
    let rhs = -taylor[0] / a;
    let r = rhs.norm().powf(1.0 / d as f64);
    let theta = rhs.arg() / d as f64;
    Some(
        (0..d)
            .map(|k| b + Complex64::from_polar(r, theta + TAU * k as f64 / d as f64))
            .collect(),
    )
}

/// Coefficients of `p(z + b)` by repeated synthetic division.
fn taylor_shift(coeffs: &[Complex64], b: Complex64) -> Vec<Complex64> {
    let mut c = coeffs.to_vec();
    let n = c.len();
    for i in 0..n {
        for j in (i..n - 1).rev() {
            let next = c[j + 1];
            c[j] += b * next;
        }
    }
    c
}

/// Aberth–Ehrlich simultaneous iteration seeded on the Cauchy circle.
fn aberth(coeffs: &[Complex64]) -> Vec<Complex64> {
    let d = coeffs.len() - 1;
    let lead = coeffs[d];
    let radius = 1.0 + coeffs[..d].iter().map(|c| c.norm() / lead.norm()).fold(0.0, f64::max);
    let mut z: Vec<Complex64> = (0..d)
        .map(|k| Complex64::from_polar(radius, TAU * k as f64 / d as f64 + 0.4))
        .collect();
    for _ in 0..ABERTH_MAX_ITER {
        let mut max_step: f64 = 0.0;
        for k in 0..d {
            let (p, dp) = horner(coeffs, z[k]);
            if p.norm() == 0.0 {
                continue;
            }
            let ratio = p / dp;
            let repulsion: Complex64 = (0..d).filter(|&j| j != k).map(|j| 1.0 / (z[k] - z[j])).sum();
            let step = ratio / (1.0 - ratio * repulsion);
            if !step.re.is_finite() || !step.im.is_finite() {
                continue;
            }
            z[k] -= step;
            max_step = max_step.max(step.norm() / (1.0 + z[k].norm()));
        }
        if max_step < 1e-15 {
            break;
        }
    }
    z
}

fn newton_polish(coeffs: &[Complex64], mut z: Complex64) -> Complex64 {
    let (mut p, _) = horner(coeffs, z);
    for _ in 0..NEWTON_POLISH_STEPS {
        let (_, dp) = horner(coeffs, z);
        if dp.norm() == 0.0 {
            break;
        }
        let cand = z - p / dp;
        let (pc, _) = horner(coeffs, cand);
        // only accept steps that reduce the residual; near multiple roots
        // Newton can wander
        if !(pc.norm() < p.norm()) {
            break;
        }
        z = cand;
        p = pc;
    }
    z
}

/// Single-linkage clustering; a cluster's representative is its mean.
fn cluster(points: &[Complex64], delta: f64) -> Vec<(Complex64, u32)> {
    let n = points.len();
    let mut label: Vec<usize> = (0..n).collect();
    fn find(label: &mut [usize], mut i: usize) -> usize {
        while label[i] != i {
            label[i] = label[label[i]];
            i = label[i];
        }
        i
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if (points[i] - points[j]).norm() <= delta {
                let (a, b) = (find(&mut label, i), find(&mut label, j));
                if a != b {
                    label[b.max(a)] = a.min(b);
                }
            }
        }
    }
    let mut out: Vec<(Complex64, u32, usize)> = Vec::new();
    for i in 0..n {
        let root = find(&mut label, i);
        match out.iter_mut().find(|(_, _, r)| *r == root) {
            Some(entry) => {
                entry.0 += points[i];
                entry.1 += 1;
            }
            None => out.push((points[i], 1, root)),
        }
    }
    out.into_iter().map(|(sum, m, _)| (sum / m as f64, m)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn sorted(mut r: Vec<(Complex64, u32)>) -> Vec<(Complex64, u32)> {
        r.sort_by(|a, b| a.0.re.total_cmp(&b.0.re).then(a.0.im.total_cmp(&b.0.im)));
        r
    }

    #[test]
    fn rejects_trailing_zero() {
        assert!(Polynomial::new(vec![c(1.0, 0.0), c(0.0, 0.0)]).is_err());
        assert!(Polynomial::new(vec![]).is_err());
    }

    #[test]
    fn shifted_power_expansion() {
        let p = Polynomial::shifted_power(c(0.1, 0.0), c(1.0, 0.0), 3, c(1.0, 0.0)).unwrap();
        let z = c(0.7, -0.4);
        let expect = 0.1 * (z - 1.0).powu(3) + 1.0;
        assert!((p.eval(z) - expect).norm() < 1e-14);
    }

    #[test]
    fn double_root_is_clustered() {
        let r = roots_with_multiplicity(&[c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)], 1e-8);
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].1, 2);
        assert!(r[0].0.norm() < 1e-12);
    }

    #[test]
    fn aberth_finds_generic_quintic() {
        // (z-1)(z+2)(z-i)(z+0.5i)(z-3)
        let roots = [c(1.0, 0.0), c(-2.0, 0.0), c(0.0, 1.0), c(0.0, -0.5), c(3.0, 0.0)];
        let mut coeffs = vec![c(1.0, 0.0)];
        for r in roots {
            coeffs = mul(&coeffs, &[-r, c(1.0, 0.0)]);
        }
        let found = sorted(roots_with_multiplicity(&coeffs, 1e-8));
        assert_eq!(found.len(), 5);
        for r in roots {
            assert!(found.iter().any(|(z, m)| *m == 1 && (z - r).norm() < 1e-12));
        }
    }

    #[test]
    fn aberth_cluster_triple_root() {
        // (z - 0.5)^3 (z + 1) is not of shifted-power shape
        let mut coeffs = vec![c(1.0, 0.0)];
        for r in [c(0.5, 0.0), c(0.5, 0.0), c(0.5, 0.0), c(-1.0, 0.0)] {
            coeffs = mul(&coeffs, &[-r, c(1.0, 0.0)]);
        }
        let found = sorted(roots_with_multiplicity(&coeffs, 1e-4));
        assert_eq!(found.len(), 2);
        assert_eq!(found[1].1, 3);
        assert!((found[1].0 - c(0.5, 0.0)).norm() < 1e-6);
    }

    #[test]
    fn monomial_roots_of_unity() {
        let r = roots_with_multiplicity(&[c(-1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)], 1e-8);
        assert_eq!(r.len(), 3);
        for (z, m) in r {
            assert_eq!(m, 1);
            assert!((z.powu(3) - 1.0).norm() < 1e-14);
        }
    }
}
