//! Rational maps on the Riemann sphere as structured expressions.
//!
//! Composite maps are never expanded into coefficients. Evaluation,
//! spherical derivatives, and preimages all walk the expression part by
//! part.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::{self, Polynomial};
use crate::sphere::SpherePoint;

/// Magnitude beyond which an orbit is declared to have left the working region.
pub const MAGNITUDE_CAP: f64 = 1e150;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RootOptions {
    /// Roots closer than this are merged and counted with multiplicity.
    pub delta_root: f64,
    /// Maximum chordal residual `d(f(y), x)` accepted for a preimage `y`.
    pub residual_tol: f64,
}

impl Default for RootOptions {
    fn default() -> Self {
        RootOptions {
            delta_root: 1e-8,
            residual_tol: 1e-7,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RationalMap {
    numerator: Polynomial,
    denominator: Polynomial,
}

impl RationalMap {
    pub fn new(numerator: Polynomial, denominator: Polynomial) -> Result<Self> {
        if numerator.degree().max(denominator.degree()) < 1 {
            return Err(Error::InvalidMap("rational map must be non-constant".into()));
        }
        Ok(RationalMap { numerator, denominator })
    }

    pub fn numerator(&self) -> &Polynomial {
        &self.numerator
    }

    pub fn denominator(&self) -> &Polynomial {
        &self.denominator
    }

    pub fn degree(&self) -> usize {
        self.numerator.degree().max(self.denominator.degree())
    }

    /// Smallest distance between a root of the numerator and a root of the
    /// denominator. Values below `delta` indicate a (near) common factor.
    pub fn common_root_gap(&self) -> f64 {
        let nr = poly::roots_with_multiplicity(self.numerator.coeffs(), 1e-8);
        let dr = poly::roots_with_multiplicity(self.denominator.coeffs(), 1e-8);
        nr.iter()
            .flat_map(|(a, _)| dr.iter().map(move |(b, _)| (a - b).norm()))
            .fold(f64::INFINITY, f64::min)
    }
}

/// A rational map given as a polynomial, a quotient, an iterate, or a
/// composition word.
///
/// `Compose(parts)` applies `parts[0]` first, i.e. it denotes
/// `parts[k] ∘ … ∘ parts[0]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum MapExpr {
    Poly(Polynomial),
    Rational(RationalMap),
    Iterate { base: Box<MapExpr>, power: u32 },
    Compose(Vec<MapExpr>),
}

/// One preimage produced by [`MapExpr::for_each_preimage`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Preimage {
    pub point: SpherePoint,
    pub multiplicity: u64,
    /// `log ‖f'(point)‖`, `-inf` on a critical branch.
    pub log_norm: f64,
    pub critical: bool,
}

impl MapExpr {
    pub fn poly(coeffs: Vec<Complex64>) -> Result<Self> {
        let p = Polynomial::new(coeffs)?;
        if p.degree() < 1 {
            return Err(Error::InvalidMap("polynomial map must have degree ≥ 1".into()));
        }
        Ok(MapExpr::Poly(p))
    }

    pub fn poly_real(coeffs: &[f64]) -> Result<Self> {
        Self::poly(coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect())
    }

    pub fn rational(num: Polynomial, den: Polynomial) -> Result<Self> {
        Ok(MapExpr::Rational(RationalMap::new(num, den)?))
    }

    pub fn iterate(base: MapExpr, power: u32) -> Result<Self> {
        if power == 0 {
            return Err(Error::InvalidMap("iterate power must be positive".into()));
        }
        base.validate()?;
        Ok(MapExpr::Iterate {
            base: Box::new(base),
            power,
        })
    }

    /// `parts[0]` is applied first.
    pub fn compose(parts: Vec<MapExpr>) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::InvalidMap("composition needs at least one part".into()));
        }
        for p in &parts {
            p.validate()?;
        }
        Ok(MapExpr::Compose(parts))
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            MapExpr::Poly(p) if p.degree() < 1 => Err(Error::InvalidMap("polynomial map must have degree ≥ 1".into())),
            MapExpr::Poly(_) => Ok(()),
            MapExpr::Rational(r) if r.degree() < 1 => {
                Err(Error::InvalidMap("rational map must be non-constant".into()))
            }
            MapExpr::Rational(_) => Ok(()),
            MapExpr::Iterate { power: 0, .. } => Err(Error::InvalidMap("iterate power must be positive".into())),
            MapExpr::Iterate { base, .. } => base.validate(),
            MapExpr::Compose(parts) if parts.is_empty() => {
                Err(Error::InvalidMap("composition needs at least one part".into()))
            }
            MapExpr::Compose(parts) => parts.iter().try_for_each(MapExpr::validate),
        }
    }

    pub fn degree(&self) -> u64 {
        match self {
            MapExpr::Poly(p) => p.degree() as u64,
            MapExpr::Rational(r) => r.degree() as u64,
            MapExpr::Iterate { base, power } => base.degree().pow(*power),
            MapExpr::Compose(parts) => parts.iter().map(MapExpr::degree).product(),
        }
    }

    pub fn is_polynomial(&self) -> bool {
        match self {
            MapExpr::Poly(_) => true,
            MapExpr::Rational(_) => false,
            MapExpr::Iterate { base, .. } => base.is_polynomial(),
            MapExpr::Compose(parts) => parts.iter().all(MapExpr::is_polynomial),
        }
    }

    /// Every polynomial leaf of the expression, in application order.
    pub fn polynomial_parts(&self) -> Vec<&Polynomial> {
        match self {
            MapExpr::Poly(p) => vec![p],
            MapExpr::Rational(_) => Vec::new(),
            MapExpr::Iterate { base, .. } => base.polynomial_parts(),
            MapExpr::Compose(parts) => parts.iter().flat_map(|p| p.polynomial_parts()).collect(),
        }
    }

    pub fn eval(&self, z: SpherePoint) -> Result<SpherePoint> {
        self.eval_log_norm(z).map(|(w, _)| w)
    }

    /// Spherical derivative norm `‖f'(z)‖`.
    pub fn sph_deriv_norm(&self, z: SpherePoint) -> Result<f64> {
        self.eval_log_norm(z).map(|(_, l)| l.exp())
    }

    /// `(f(z), log ‖f'(z)‖)`; composite maps use the chain rule.
    pub fn eval_log_norm(&self, z: SpherePoint) -> Result<(SpherePoint, f64)> {
        match self {
            MapExpr::Poly(p) => poly_eval_log_norm(p, z),
            MapExpr::Rational(r) => rational_eval_log_norm(r, z),
            MapExpr::Iterate { base, power } => {
                let mut cur = z;
                let mut acc = 0.0;
                for _ in 0..*power {
                    let (w, l) = base.eval_log_norm(cur)?;
                    cur = w;
                    acc += l;
                }
                Ok((cur, acc))
            }
            MapExpr::Compose(parts) => {
                let mut cur = z;
                let mut acc = 0.0;
                for part in parts {
                    let (w, l) = part.eval_log_norm(cur)?;
                    cur = w;
                    acc += l;
                }
                Ok((cur, acc))
            }
        }
    }

    /// Spherical derivative norm computed in the chart `w = 1/z`, for
    /// cross-checking [`MapExpr::sph_deriv_norm`].
    pub fn sph_deriv_norm_inverted_chart(&self, z: SpherePoint) -> Result<f64> {
        self.log_norm_inverted(z).map(|(_, l)| l.exp())
    }

    fn log_norm_inverted(&self, z: SpherePoint) -> Result<(SpherePoint, f64)> {
        let base = |num: &Polynomial, den: &Polynomial, z: SpherePoint| {
            let w = match z {
                SpherePoint::Infinity => Complex64::new(0.0, 0.0),
                SpherePoint::Finite(z) if z.norm() == 0.0 => {
                    return rational_parts_log_norm(num.coeffs(), den.coeffs(), Complex64::new(0.0, 0.0));
                }
                SpherePoint::Finite(z) => 1.0 / z,
            };
            let m = num.degree().max(den.degree());
            rational_parts_log_norm(&num.reversed_coeffs(m), &den.reversed_coeffs(m), w)
        };
        match self {
            MapExpr::Poly(p) => {
                let one = Polynomial::new(vec![Complex64::new(1.0, 0.0)])?;
                base(p, &one, z)
            }
            MapExpr::Rational(r) => base(&r.numerator, &r.denominator, z),
            MapExpr::Iterate { base: b, power } => {
                let mut cur = z;
                let mut acc = 0.0;
                for _ in 0..*power {
                    let (w, l) = b.log_norm_inverted(cur)?;
                    cur = w;
                    acc += l;
                }
                Ok((cur, acc))
            }
            MapExpr::Compose(parts) => {
                let mut cur = z;
                let mut acc = 0.0;
                for part in parts {
                    let (w, l) = part.log_norm_inverted(cur)?;
                    cur = w;
                    acc += l;
                }
                Ok((cur, acc))
            }
        }
    }

    /// All `y` with `f(y) = x`, with multiplicities summing to `degree()`.
    pub fn inverse_images(&self, x: SpherePoint, opts: &RootOptions) -> Result<Vec<(SpherePoint, u64)>> {
        let mut out = Vec::new();
        self.for_each_preimage(x, opts, &mut |p| out.push((p.point, p.multiplicity)))?;
        Ok(out)
    }

    /// Calls `sink` once per preimage of `x`, accumulating the log spherical
    /// derivative along the chain. Composite maps are inverted part by part,
    /// last-applied part first.
    pub fn for_each_preimage(&self, x: SpherePoint, opts: &RootOptions, sink: &mut dyn FnMut(Preimage)) -> Result<()> {
        let start = Preimage {
            point: x,
            multiplicity: 1,
            log_norm: 0.0,
            critical: false,
        };
        self.pull_back(start, opts, sink)
    }

    fn pull_back(&self, acc: Preimage, opts: &RootOptions, sink: &mut dyn FnMut(Preimage)) -> Result<()> {
        match self {
            MapExpr::Poly(_) | MapExpr::Rational(_) => {
                for (y, m) in self.simple_preimages(acc.point, opts)? {
                    let (_, l) = self.eval_log_norm(y)?;
                    let critical = acc.critical || m > 1 || l == f64::NEG_INFINITY;
                    sink(Preimage {
                        point: y,
                        multiplicity: acc.multiplicity * m,
                        log_norm: if critical { f64::NEG_INFINITY } else { acc.log_norm + l },
                        critical,
                    });
                }
                Ok(())
            }
            MapExpr::Iterate { base, power } => pull_back_chain(
                &mut std::iter::repeat_n(base.as_ref(), *power as usize),
                acc,
                opts,
                sink,
            ),
            MapExpr::Compose(parts) => pull_back_chain(&mut parts.iter().rev(), acc, opts, sink),
        }
    }

    /// Preimages for a single polynomial or rational part.
    fn simple_preimages(&self, x: SpherePoint, opts: &RootOptions) -> Result<Vec<(SpherePoint, u64)>> {
        let (num, den): (&[Complex64], &[Complex64]) = match self {
            MapExpr::Poly(p) => {
                if x.is_infinity() {
                    return Ok(vec![(SpherePoint::Infinity, p.degree() as u64)]);
                }
                (p.coeffs(), &[Complex64::new(1.0, 0.0)][..])
            }
            MapExpr::Rational(r) => (r.numerator.coeffs(), r.denominator.coeffs()),
            _ => unreachable!("simple_preimages on composite"),
        };
        let deg = self.degree();
        let equation = match x {
            SpherePoint::Finite(xv) => poly::sub(num, &poly::mul(&[xv], den)),
            SpherePoint::Infinity => den.to_vec(),
        };
        let equation = poly::trim(equation, 1e-14);
        let mut out: Vec<(SpherePoint, u64)> = if equation.len() == 1 && equation[0].norm() == 0.0 {
            return Err(Error::InvalidMap("degenerate preimage equation".into()));
        } else {
            poly::roots_with_multiplicity(&equation, opts.delta_root)
                .into_iter()
                .map(|(z, m)| (SpherePoint::Finite(z), m as u64))
                .collect()
        };
        let finite: u64 = out.iter().map(|(_, m)| m).sum();
        if finite < deg {
            out.push((SpherePoint::Infinity, deg - finite));
        }
        for (y, _) in &out {
            let fy = self.eval(*y).unwrap_or(SpherePoint::Infinity);
            let residual = fy.chordal(&x);
            if !(residual <= opts.residual_tol) {
                return Err(Error::RootFindingFailure {
                    residual,
                    tolerance: opts.residual_tol,
                    word: None,
                });
            }
        }
        Ok(out)
    }

    /// Critical points with ∞ included where the map is critical there.
    pub fn critical_points(&self, opts: &RootOptions) -> Result<Vec<SpherePoint>> {
        let mut pts = match self {
            MapExpr::Poly(p) => {
                let mut v: Vec<SpherePoint> = match p.derivative() {
                    Some(dp) if dp.degree() >= 1 => poly::roots_with_multiplicity(dp.coeffs(), opts.delta_root)
                        .into_iter()
                        .map(|(z, _)| SpherePoint::Finite(z))
                        .collect(),
                    _ => Vec::new(),
                };
                if p.degree() >= 2 {
                    v.push(SpherePoint::Infinity);
                }
                v
            }
            MapExpr::Rational(r) => rational_critical_points(r, opts),
            MapExpr::Iterate { base, power } => {
                let parts: Vec<MapExpr> = (0..*power).map(|_| base.as_ref().clone()).collect();
                MapExpr::Compose(parts).critical_points(opts)?
            }
            MapExpr::Compose(parts) => {
                // crit(rest ∘ first) = crit(first) ∪ first⁻¹(crit(rest))
                let first = &parts[0];
                let mut v = first.critical_points(opts)?;
                if parts.len() > 1 {
                    let rest = MapExpr::Compose(parts[1..].to_vec());
                    for c in rest.critical_points(opts)? {
                        for (y, _) in first.inverse_images(c, opts)? {
                            v.push(y);
                        }
                    }
                }
                v
            }
        };
        dedup_points(&mut pts, opts.delta_root);
        Ok(pts)
    }

    pub fn critical_values(&self, opts: &RootOptions) -> Result<Vec<SpherePoint>> {
        let mut vals = Vec::new();
        for c in self.critical_points(opts)? {
            vals.push(self.eval(c).unwrap_or(SpherePoint::Infinity));
        }
        dedup_points(&mut vals, opts.delta_root);
        Ok(vals)
    }

    /// Radius outside of which every polynomial part satisfies
    /// `|p(z)| > 2|z|`, so escape is permanent. `None` if some part is not a
    /// polynomial or is an affine map with `|a| ≤ 2`.
    pub fn escape_radius(&self) -> Option<f64> {
        if !self.is_polynomial() {
            return None;
        }
        self.polynomial_parts()
            .into_iter()
            .map(polynomial_escape_radius)
            .try_fold(1.0_f64, |acc, r| r.map(|r| acc.max(r)))
    }
}

fn pull_back_chain(
    parts_last_first: &mut dyn Iterator<Item = &MapExpr>,
    acc: Preimage,
    opts: &RootOptions,
    sink: &mut dyn FnMut(Preimage),
) -> Result<()> {
    let remaining: Vec<&MapExpr> = parts_last_first.collect();
    pull_back_slice(&remaining, acc, opts, sink)
}

fn pull_back_slice(
    parts_last_first: &[&MapExpr],
    acc: Preimage,
    opts: &RootOptions,
    sink: &mut dyn FnMut(Preimage),
) -> Result<()> {
    match parts_last_first.split_first() {
        None => {
            sink(acc);
            Ok(())
        }
        Some((head, rest)) => {
            let mut err = None;
            head.pull_back(acc, opts, &mut |p| {
                if err.is_none() {
                    if let Err(e) = pull_back_slice(rest, p, opts, sink) {
                        err = Some(e);
                    }
                }
            })?;
            err.map_or(Ok(()), Err)
        }
    }
}

fn polynomial_escape_radius(p: &Polynomial) -> Option<f64> {
    let d = p.degree();
    let lead = p.leading().norm();
    let tail: f64 = p.coeffs()[..d].iter().map(|c| c.norm()).sum();
    if d >= 2 {
        // |p(z)| ≥ |z|^(d-1) (|a_d||z| - Σ|a_k|) ≥ 2|z| once |a_d||z| ≥ 2 + Σ|a_k|
        Some(((2.0 + tail) / lead).max(1.0))
    } else if lead > 2.0 {
        Some((tail / (lead - 2.0)).max(1.0))
    } else {
        None
    }
}

fn dedup_points(pts: &mut Vec<SpherePoint>, delta: f64) {
    let mut out: Vec<SpherePoint> = Vec::with_capacity(pts.len());
    for p in pts.drain(..) {
        if !out.iter().any(|q| q.chordal(&p) <= delta) {
            out.push(p);
        }
    }
    *pts = out;
}

fn rational_critical_points(r: &RationalMap, opts: &RootOptions) -> Vec<SpherePoint> {
    let n = r.numerator.coeffs();
    let d = r.denominator.coeffs();
    let dn = r
        .numerator
        .derivative()
        .map(|p| p.coeffs().to_vec())
        .unwrap_or(vec![Complex64::new(0.0, 0.0)]);
    let dd = r
        .denominator
        .derivative()
        .map(|p| p.coeffs().to_vec())
        .unwrap_or(vec![Complex64::new(0.0, 0.0)]);
    let wronskian = poly::trim(poly::sub(&poly::mul(&dn, d), &poly::mul(n, &dd)), 1e-14);
    let mut pts: Vec<SpherePoint> = Vec::new();
    let mut count = 0u64;
    if wronskian.len() > 1 {
        for (z, m) in poly::roots_with_multiplicity(&wronskian, opts.delta_root) {
            pts.push(SpherePoint::Finite(z));
            count += m as u64;
        }
    }
    // a degree-d rational map has 2d - 2 critical points with multiplicity
    if count < 2 * r.degree() as u64 - 2 {
        pts.push(SpherePoint::Infinity);
    }
    pts
}

fn log1p_sq(z: Complex64) -> f64 {
    z.norm_sqr().ln_1p()
}

fn poly_eval_log_norm(p: &Polynomial, z: SpherePoint) -> Result<(SpherePoint, f64)> {
    match z {
        SpherePoint::Infinity => {
            let l = if p.degree() >= 2 {
                f64::NEG_INFINITY
            } else {
                -p.leading().norm().ln()
            };
            Ok((SpherePoint::Infinity, l))
        }
        SpherePoint::Finite(z) => {
            let (v, dv) = p.eval_with_deriv(z);
            let mag = v.norm();
            if !mag.is_finite() || mag > MAGNITUDE_CAP {
                return Err(Error::OverflowEscape { cap: MAGNITUDE_CAP });
            }
            let l = dv.norm().ln() + log1p_sq(z) - log1p_sq(v);
            Ok((SpherePoint::Finite(v), l))
        }
    }
}

fn rational_eval_log_norm(r: &RationalMap, z: SpherePoint) -> Result<(SpherePoint, f64)> {
    match z {
        SpherePoint::Finite(z) => rational_parts_log_norm(r.numerator.coeffs(), r.denominator.coeffs(), z),
        SpherePoint::Infinity => {
            let m = r.degree();
            rational_parts_log_norm(
                &r.numerator.reversed_coeffs(m),
                &r.denominator.reversed_coeffs(m),
                Complex64::new(0.0, 0.0),
            )
        }
    }
}

/// Value and log spherical norm of `N/D` at a finite chart point, switching
/// to `D/N` when `|N| > |D|` so that values near ∞ stay accurate.
fn rational_parts_log_norm(num: &[Complex64], den: &[Complex64], z: Complex64) -> Result<(SpherePoint, f64)> {
    let horner = |c: &[Complex64]| {
        let zero = Complex64::new(0.0, 0.0);
        c.iter().rev().fold((zero, zero), |(p, dp), &a| (p * z + a, dp * z + p))
    };
    let (n, dn) = horner(num);
    let (d, dd) = horner(den);
    if n.norm() == 0.0 && d.norm() == 0.0 {
        return Err(Error::PoleAtPoint);
    }
    let (value, l) = if n.norm() <= d.norm() {
        let f = n / d;
        let w = dn * d - n * dd;
        (
            SpherePoint::Finite(f),
            w.norm().ln() - 2.0 * d.norm().ln() + log1p_sq(z) - log1p_sq(f),
        )
    } else {
        let g = d / n;
        let w = dd * n - d * dn;
        let value = if g.norm() == 0.0 {
            SpherePoint::Infinity
        } else {
            let f = 1.0 / g;
            if f.norm() > MAGNITUDE_CAP {
                return Err(Error::OverflowEscape { cap: MAGNITUDE_CAP });
            }
            SpherePoint::Finite(f)
        };
        (value, w.norm().ln() - 2.0 * n.norm().ln() + log1p_sq(z) - log1p_sq(g))
    };
    if l.is_nan() {
        return Err(Error::PoleAtPoint);
    }
    Ok((value, l))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn zsq() -> MapExpr {
        MapExpr::poly_real(&[0.0, 0.0, 1.0]).unwrap()
    }

    fn sorted(mut v: Vec<(SpherePoint, u64)>) -> Vec<(SpherePoint, u64)> {
        v.sort_by(|a, b| a.0.total_cmp(&b.0));
        v
    }

    #[test]
    fn eval_examples() {
        assert_eq!(zsq().eval(SpherePoint::real(3.0)).unwrap(), SpherePoint::real(9.0));
        assert_eq!(zsq().eval(SpherePoint::Infinity).unwrap(), SpherePoint::Infinity);
        let f = MapExpr::compose(vec![zsq(), MapExpr::poly_real(&[1.0, 1.0]).unwrap()]).unwrap();
        assert_eq!(f.eval(SpherePoint::real(2.0)).unwrap(), SpherePoint::real(5.0));
    }

    #[test]
    fn eval_overflow_is_reported() {
        let f = MapExpr::iterate(zsq(), 12).unwrap();
        assert!(matches!(
            f.eval(SpherePoint::real(1e20)),
            Err(Error::OverflowEscape { .. })
        ));
    }

    #[test]
    fn sph_norm_examples() {
        let f = zsq();
        assert!((f.sph_deriv_norm(SpherePoint::real(1.0)).unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(f.sph_deriv_norm(SpherePoint::real(0.0)).unwrap(), 0.0);
        assert_eq!(f.sph_deriv_norm(SpherePoint::Infinity).unwrap(), 0.0);
        let affine = MapExpr::poly_real(&[-2.0, 3.0]).unwrap();
        assert!((affine.sph_deriv_norm(SpherePoint::Infinity).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn sph_norm_matches_chordal_difference_quotient() {
        // ‖f'(z)‖ = lim d(f(z+h), f(z)) / d(z+h, z)
        let f = zsq();
        let z = SpherePoint::real(2.0);
        let oracle = |h: f64| {
            let zh = SpherePoint::new(2.0 + h, 0.0);
            f.eval(zh).unwrap().chordal(&f.eval(z).unwrap()) / zh.chordal(&z)
        };
        let fd = 2.0 * oracle(1e-6) - oracle(2e-6); // Richardson step
        assert!((fd - 20.0 / 17.0).abs() < 1e-9);
        assert!((f.sph_deriv_norm(z).unwrap() - 20.0 / 17.0).abs() < 1e-15);
    }

    #[test]
    fn rational_norm_at_pole_and_infinity() {
        // f = 1/z is a spherical isometry
        let one = Polynomial::from_real(&[1.0]).unwrap();
        let z = Polynomial::from_real(&[0.0, 1.0]).unwrap();
        let f = MapExpr::rational(one, z).unwrap();
        for p in [
            SpherePoint::real(0.0),
            SpherePoint::Infinity,
            SpherePoint::new(0.3, 2.0),
        ] {
            assert!((f.sph_deriv_norm(p).unwrap() - 1.0).abs() < 1e-14, "{p}");
        }
        assert_eq!(f.eval(SpherePoint::real(0.0)).unwrap(), SpherePoint::Infinity);
        assert_eq!(f.eval(SpherePoint::Infinity).unwrap(), SpherePoint::real(0.0));
    }

    #[test]
    fn inverse_image_examples() {
        let opts = RootOptions::default();
        let r = sorted(zsq().inverse_images(SpherePoint::real(4.0), &opts).unwrap());
        assert_eq!(r.len(), 2);
        assert!(r[0].0.chordal(&SpherePoint::real(-2.0)) < 1e-14 && r[0].1 == 1);
        assert!(r[1].0.chordal(&SpherePoint::real(2.0)) < 1e-14 && r[1].1 == 1);

        let r = zsq().inverse_images(SpherePoint::real(0.0), &opts).unwrap();
        assert_eq!(r, vec![(SpherePoint::real(0.0), 2)]);

        let f = MapExpr::poly_real(&[0.25, 0.0, 1.0]).unwrap();
        let r = f.inverse_images(SpherePoint::real(0.25), &opts).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].1, 2);
        assert!(r[0].0.chordal(&SpherePoint::real(0.0)) < 1e-12);
    }

    #[test]
    fn inverse_images_of_infinity() {
        let opts = RootOptions::default();
        assert_eq!(
            zsq().inverse_images(SpherePoint::Infinity, &opts).unwrap(),
            vec![(SpherePoint::Infinity, 2)]
        );
        // f = (z^2 + 1)/z : poles at 0 and ∞
        let num = Polynomial::from_real(&[1.0, 0.0, 1.0]).unwrap();
        let den = Polynomial::from_real(&[0.0, 1.0]).unwrap();
        let f = MapExpr::rational(num, den).unwrap();
        let r = sorted(f.inverse_images(SpherePoint::Infinity, &opts).unwrap());
        assert_eq!(r, vec![(SpherePoint::real(0.0), 1), (SpherePoint::Infinity, 1)]);
        let total: u64 = f
            .inverse_images(SpherePoint::new(0.2, 0.1), &opts)
            .unwrap()
            .iter()
            .map(|p| p.1)
            .sum();
        assert_eq!(total, 2);
    }

    #[test]
    fn compose_preimages_chainwise() {
        let opts = RootOptions::default();
        let f = MapExpr::iterate(zsq(), 2).unwrap();
        let r = f.inverse_images(SpherePoint::real(16.0), &opts).unwrap();
        assert_eq!(r.len(), 4);
        for (y, m) in r {
            assert_eq!(m, 1);
            assert!((y.finite().unwrap().norm() - 2.0).abs() < 1e-14);
        }
    }

    #[test]
    fn critical_point_examples() {
        let opts = RootOptions::default();
        let cp = zsq().critical_points(&opts).unwrap();
        assert_eq!(cp, vec![SpherePoint::real(0.0), SpherePoint::Infinity]);
        let cube = MapExpr::poly(vec![c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.01, 0.0)]).unwrap();
        assert_eq!(
            cube.critical_points(&opts).unwrap(),
            vec![SpherePoint::real(0.0), SpherePoint::Infinity]
        );
        assert_eq!(
            cube.critical_values(&opts).unwrap(),
            vec![SpherePoint::real(0.0), SpherePoint::Infinity]
        );
        let f = MapExpr::poly_real(&[0.25, 0.0, 1.0]).unwrap();
        assert_eq!(
            f.critical_values(&opts).unwrap(),
            vec![SpherePoint::real(0.25), SpherePoint::Infinity]
        );
    }

    #[test]
    fn composite_critical_points() {
        let opts = RootOptions::default();
        // (z^2 - 1)^2: critical at 0 (from inner), ±1 (preimages of 0), ∞
        let f = MapExpr::compose(vec![MapExpr::poly_real(&[-1.0, 0.0, 1.0]).unwrap(), zsq()]).unwrap();
        let mut cp = f.critical_points(&opts).unwrap();
        cp.sort_by(|a, b| a.total_cmp(b));
        assert_eq!(cp.len(), 4);
        assert!(cp[0].chordal(&SpherePoint::real(-1.0)) < 1e-12);
        assert!(cp[1].chordal(&SpherePoint::real(0.0)) < 1e-12);
        assert!(cp[2].chordal(&SpherePoint::real(1.0)) < 1e-12);
        assert!(cp[3].is_infinity());
    }

    #[test]
    fn rational_critical_points_count() {
        let opts = RootOptions::default();
        // z + 1/z = (z^2+1)/z : critical at ±1 only
        let num = Polynomial::from_real(&[1.0, 0.0, 1.0]).unwrap();
        let den = Polynomial::from_real(&[0.0, 1.0]).unwrap();
        let f = MapExpr::rational(num, den).unwrap();
        let mut cp = f.critical_points(&opts).unwrap();
        cp.sort_by(|a, b| a.total_cmp(b));
        assert_eq!(cp.len(), 2);
        assert!(cp[0].chordal(&SpherePoint::real(-1.0)) < 1e-12);
    }

    #[test]
    fn escape_radius_bound() {
        let f = MapExpr::poly_real(&[0.0, 0.0, 0.0, 0.01]).unwrap();
        let r = f.escape_radius().unwrap();
        assert!((r - 200.0).abs() < 1e-9);
        assert!(MapExpr::poly_real(&[0.0, 2.0]).unwrap().escape_radius().is_none());
    }

    #[test]
    fn common_root_gap_detects_shared_factor() {
        let num = Polynomial::from_real(&[-1.0, 0.0, 1.0]).unwrap();
        let den = Polynomial::from_real(&[-1.0, 1.0]).unwrap();
        let r = RationalMap::new(num, den).unwrap();
        assert!(r.common_root_gap() < 1e-10);
    }
}
