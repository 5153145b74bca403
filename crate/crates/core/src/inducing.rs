//! Inducing: induced generator systems, PB-OSC evidence, and combined
//! dimension reports for two-generator polynomial semigroups.

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bowen::{
    box_count_dimension, combined_dimension, dimension_estimate, level_root, CombinedInputs, ComponentDimension,
    DimensionConfig, DimensionReport,
};
use crate::error::{Error, Result};
use crate::family::{check_partition, induced_count, induced_words, Family};
use crate::maps::{MapExpr, RootOptions};
use crate::poly::Polynomial;
use crate::pressure::{theta_estimate, EstimatorMode, RegularityReport};
use crate::render::{backward_cloud, rng};
use crate::semigroup::{forward_orbit_bounded, BackwardTree, GeneratorSystem, Pruning, TreeOptions};
use crate::sphere::SpherePoint;

pub const DEFAULT_INDUCED_WARN: usize = 100_000;

#[derive(Clone, Debug)]
pub struct InducedSystem {
    pub base: GeneratorSystem,
    pub i1: Vec<usize>,
    pub i2: Vec<usize>,
    pub r_max: usize,
    pub generators: GeneratorSystem,
    pub warnings: Vec<String>,
}

impl InducedSystem {
    pub fn family(&self) -> Family {
        Family::Induced {
            base: self.base.clone(),
            i1: self.i1.clone(),
            i2: self.i2.clone(),
        }
    }
}

/// All words `f_i f_{j_1} … f_{j_r}` (`i ∈ I₂`, `j ∈ I₁`, `r ≤ r_max`).
/// Counts above `warn_at` are allowed with a warning; counts above
/// `hard_cap` are refused.
pub fn build_induced(
    base: &GeneratorSystem,
    i1: &[usize],
    i2: &[usize],
    r_max: usize,
    warn_at: usize,
    hard_cap: usize,
) -> Result<InducedSystem> {
    check_partition(base.len(), i1, i2)?;
    let count = induced_count(i1.len(), i2.len(), r_max);
    let mut warnings = Vec::new();
    if count > warn_at {
        warnings.push(format!(
            "induced system has {count} generators (warning threshold {warn_at})"
        ));
    }
    let generators = induced_words(base, i1, i2, r_max, hard_cap)?;
    Ok(InducedSystem {
        base: base.clone(),
        i1: i1.to_vec(),
        i2: i2.to_vec(),
        r_max,
        generators,
        warnings,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PbOscConfig {
    pub j_samples: usize,
    pub burn_in: usize,
    /// Word length for the postcritical test and iteration count under `f₂`.
    pub depth: usize,
    pub random_words: usize,
    /// Iteration count for membership in `K(f₁)`.
    pub max_iter: usize,
    /// Grid resolution per axis for sampling `U`.
    pub grid: usize,
    /// Offset of the perturbed copies used for interior tests.
    pub margin: f64,
    /// Chordal separation required between preimage clouds.
    pub gap: f64,
    pub seed: u64,
}

impl Default for PbOscConfig {
    fn default() -> Self {
        PbOscConfig {
            j_samples: 2000,
            burn_in: 30,
            depth: 40,
            random_words: 200,
            max_iter: 10_000,
            grid: 80,
            margin: 1e-3,
            gap: 1e-3,
            seed: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckEvidence {
    pub samples: usize,
    pub margin: f64,
    /// Check-specific extreme value: largest orbit modulus reached, or the
    /// smallest separation found.
    pub worst_value: f64,
    pub witness: Option<SpherePoint>,
    pub note: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckResult {
    pub pass: bool,
    pub evidence: CheckEvidence,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PbOscCertificate {
    pub bounded_postcritical: CheckResult,
    #[serde(rename = "K1_inside_intK2")]
    pub k1_inside_int_k2: CheckResult,
    pub osc_with_annular_u: CheckResult,
    #[serde(rename = "J1_pullback_disjoint")]
    pub j1_pullback_disjoint: CheckResult,
    #[serde(rename = "CV2_inside_intK1")]
    pub cv2_inside_int_k1: CheckResult,
    pub overall: bool,
    pub disclaimer: String,
}

const DISCLAIMER: &str = "numerical evidence from finite samples, not a proof";

/// Sampling-based evidence for the five PB-OSC conditions of `⟨f₁, f₂⟩`.
pub fn pb_osc_certificate(f1: &MapExpr, f2: &MapExpr, cfg: &PbOscConfig) -> Result<PbOscCertificate> {
    for f in [f1, f2] {
        if !f.is_polynomial() || f.degree() < 2 {
            return Err(Error::InvalidSystem("PB-OSC needs polynomials of degree ≥ 2".into()));
        }
    }
    let opts = RootOptions::default();
    let r1 = f1.escape_radius().expect("degree ≥ 2");
    let r2 = f2.escape_radius().expect("degree ≥ 2");
    let j1 = julia_samples(f1, cfg, 0x11)?;
    let j2 = julia_samples(f2, cfg, 0x22)?;

    let (c1, (c2, (c3, (c4, c5)))) = rayon::join(
        || bounded_postcritical(f1, f2, r1.max(r2), cfg, &opts),
        || {
            rayon::join(
                || k1_inside_int_k2(&j1, f2, r2, cfg),
                || {
                    rayon::join(
                        || osc_with_annular_u(f1, f2, (r1, r2), &j1, &j2, cfg, &opts),
                        || {
                            rayon::join(
                                || j1_pullback_disjoint(&j1, f2, cfg, &opts),
                                || cv2_inside_int_k1(f1, f2, r1, cfg, &opts),
                            )
                        },
                    )
                },
            )
        },
    );
    let (c1, c2, c3, c4, c5) = (c1?, c2?, c3?, c4?, c5?);
    let overall = c1.pass && c2.pass && c3.pass && c4.pass && c5.pass;
    Ok(PbOscCertificate {
        bounded_postcritical: c1,
        k1_inside_int_k2: c2,
        osc_with_annular_u: c3,
        j1_pullback_disjoint: c4,
        cv2_inside_int_k1: c5,
        overall,
        disclaimer: DISCLAIMER.into(),
    })
}

fn julia_samples(f: &MapExpr, cfg: &PbOscConfig, stream: u64) -> Result<Vec<Complex64>> {
    let sys = GeneratorSystem::new(vec![f.clone()])?;
    let opts = RootOptions::default();
    let x0 = sys.default_base_point(&opts)?;
    Ok(backward_cloud(&sys, x0, cfg.j_samples, cfg.burn_in, cfg.seed ^ stream, &opts)?.points)
}

fn finite_critical_values(f: &MapExpr, opts: &RootOptions) -> Result<Vec<Complex64>> {
    Ok(f.critical_values(opts)?
        .iter()
        .filter_map(SpherePoint::finite)
        .collect())
}

fn perturbed(z: Complex64, margin: f64) -> impl Iterator<Item = Complex64> {
    std::iter::once(z)
        .chain((0..8).map(move |k| z + Complex64::from_polar(margin, k as f64 * std::f64::consts::FRAC_PI_4)))
}

/// Critical values followed along the constant words and random words.
fn bounded_postcritical(
    f1: &MapExpr,
    f2: &MapExpr,
    r_big: f64,
    cfg: &PbOscConfig,
    opts: &RootOptions,
) -> Result<CheckResult> {
    let gens = [f1, f2];
    let mut cvs = finite_critical_values(f1, opts)?;
    cvs.extend(finite_critical_values(f2, opts)?);
    let mut rng = rng(cfg.seed, 1);
    let mut words: Vec<Vec<usize>> = vec![vec![0; cfg.depth], vec![1; cfg.depth]];
    for _ in 0..cfg.random_words {
        words.push((0..cfg.depth).map(|_| rng.gen_range(0..2)).collect());
    }
    let mut worst: f64 = 0.0;
    let mut witness = None;
    let mut pass = true;
    'outer: for &c in &cvs {
        for w in &words {
            let mut z = SpherePoint::Finite(c);
            for &g in w {
                z = gens[g].eval(z).unwrap_or(SpherePoint::Infinity);
                let m = z.finite().map_or(f64::INFINITY, |v| v.norm());
                if m > worst {
                    worst = m;
                }
                if m > r_big {
                    pass = false;
                    witness = Some(SpherePoint::Finite(c));
                    break 'outer;
                }
            }
        }
    }
    Ok(CheckResult {
        pass,
        evidence: CheckEvidence {
            samples: cvs.len() * words.len(),
            margin: r_big,
            worst_value: worst,
            witness,
            note: format!(
                "{} finite critical values along {} words of length {}; margin is the escape radius",
                cvs.len(),
                words.len(),
                cfg.depth
            ),
        },
    })
}

/// `J(f₁)` samples and their perturbations stay bounded under `f₂`.
fn k1_inside_int_k2(j1: &[Complex64], f2: &MapExpr, r2: f64, cfg: &PbOscConfig) -> Result<CheckResult> {
    let failure = j1
        .par_iter()
        .flat_map_iter(|&z| perturbed(z, cfg.margin))
        .find_first(|&z| !forward_orbit_bounded(f2, SpherePoint::Finite(z), cfg.depth, r2).0);
    let worst = j1.iter().map(|z| z.norm()).fold(0.0, f64::max);
    Ok(CheckResult {
        pass: failure.is_none(),
        evidence: CheckEvidence {
            samples: j1.len() * 9,
            margin: cfg.margin,
            worst_value: worst,
            witness: failure.map(SpherePoint::Finite),
            note: format!(
                "J(f1) samples plus 8 offsets each, iterated {} times under f2; worst_value is max |z| over J(f1) samples",
                cfg.depth
            ),
        },
    })
}

struct Membership<'a> {
    f1: &'a MapExpr,
    f2: &'a MapExpr,
    r1: f64,
    r2: f64,
    cfg: &'a PbOscConfig,
}

impl Membership<'_> {
    fn in_u(&self, z: Complex64) -> bool {
        let p = SpherePoint::Finite(z);
        forward_orbit_bounded(self.f2, p, self.cfg.depth, self.r2).0
            && !forward_orbit_bounded(self.f1, p, self.cfg.max_iter, self.r1).0
    }
}

/// Grid samples of `U = int K(f₂) \ K(f₁)` mapped back by both generators;
/// preimages must land in `U` and the two preimage clouds (extended by the
/// pullbacks of both Julia samples) must stay `gap` apart.
fn osc_with_annular_u(
    f1: &MapExpr,
    f2: &MapExpr,
    (r1, r2): (f64, f64),
    j1: &[Complex64],
    j2: &[Complex64],
    cfg: &PbOscConfig,
    opts: &RootOptions,
) -> Result<CheckResult> {
    let mem = Membership { f1, f2, r1, r2, cfg };
    let rho = 1.05 * j2.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let n = cfg.grid.max(2);
    let h = 2.0 * rho / n as f64;
    let samples: Vec<Complex64> = (0..n * n)
        .into_par_iter()
        .filter_map(|k| {
            let z = Complex64::new(-rho + ((k % n) as f64 + 0.5) * h, -rho + ((k / n) as f64 + 0.5) * h);
            perturbed(z, 0.0)
                .chain((0..4).map(|q| z + Complex64::from_polar(0.5 * h, q as f64 * std::f64::consts::FRAC_PI_2)))
                .all(|w| mem.in_u(w))
                .then_some(z)
        })
        .collect();
    if samples.is_empty() {
        return Ok(CheckResult {
            pass: false,
            evidence: CheckEvidence {
                samples: 0,
                margin: 0.5 * h,
                worst_value: 0.0,
                witness: None,
                note: "no interior grid point of U found; U appears empty".into(),
            },
        });
    }
    let pre = |f: &MapExpr, pts: &[Complex64]| -> Result<Vec<Complex64>> {
        let per = pts
            .par_iter()
            .map(|&z| {
                Ok(f.inverse_images(SpherePoint::Finite(z), opts)?
                    .into_iter()
                    .filter_map(|(p, _)| p.finite())
                    .collect::<Vec<_>>())
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(per.concat())
    };
    let a_u = pre(f1, &samples)?;
    let b_u = pre(f2, &samples)?;
    let escaped = a_u
        .par_iter()
        .chain(b_u.par_iter())
        .find_first(|&&y| !mem.in_u(y))
        .copied();

    let mut a = a_u;
    let mut b = b_u;
    for cloud in [j1, j2] {
        a.extend(pre(f1, cloud)?);
        b.extend(pre(f2, cloud)?);
    }
    let (dist, pair) = min_chordal_between(&a, &b);
    let pass = escaped.is_none() && dist > cfg.gap;
    let witness = escaped.or_else(|| (dist <= cfg.gap).then(|| pair.map(|p| p.0)).flatten());
    Ok(CheckResult {
        pass,
        evidence: CheckEvidence {
            samples: samples.len(),
            margin: cfg.gap,
            worst_value: dist,
            witness: witness.map(SpherePoint::Finite),
            note: format!(
                "{} interior grid points of U (spacing {h:.3e}); f1/f2 preimages {}; worst_value is the chordal gap between preimage clouds; K(f1) membership iterated {} times (parabolic points converge slowly)",
                samples.len(),
                if escaped.is_some() { "leave U" } else { "stay in U" },
                cfg.max_iter
            ),
        },
    })
}

/// Sampled `f₂⁻¹(J(f₁))` against `J(f₁)`.
fn j1_pullback_disjoint(j1: &[Complex64], f2: &MapExpr, cfg: &PbOscConfig, opts: &RootOptions) -> Result<CheckResult> {
    let mut pulled = Vec::with_capacity(j1.len() * f2.degree() as usize);
    for &z in j1 {
        pulled.extend(
            f2.inverse_images(SpherePoint::Finite(z), opts)?
                .iter()
                .filter_map(|(p, _)| p.finite()),
        );
    }
    let (dist, pair) = min_chordal_between(&pulled, j1);
    Ok(CheckResult {
        pass: dist > cfg.gap,
        evidence: CheckEvidence {
            samples: pulled.len(),
            margin: cfg.gap,
            worst_value: dist,
            witness: pair.map(|p| SpherePoint::Finite(p.0)),
            note: "worst_value is the minimum chordal distance between f2-pullbacks and J(f1) samples".into(),
        },
    })
}

/// Finite critical values of `f₂` and their perturbations stay bounded under `f₁`.
fn cv2_inside_int_k1(
    f1: &MapExpr,
    f2: &MapExpr,
    r1: f64,
    cfg: &PbOscConfig,
    opts: &RootOptions,
) -> Result<CheckResult> {
    let cvs = finite_critical_values(f2, opts)?;
    let mut witness = None;
    let mut worst_escape = usize::MAX;
    for &c in &cvs {
        for z in perturbed(c, cfg.margin) {
            let (bounded, k) = forward_orbit_bounded(f1, SpherePoint::Finite(z), cfg.max_iter, r1);
            if !bounded && witness.is_none() {
                witness = Some(SpherePoint::Finite(z));
                worst_escape = k;
            }
        }
    }
    Ok(CheckResult {
        pass: witness.is_none(),
        evidence: CheckEvidence {
            samples: cvs.len() * 9,
            margin: cfg.margin,
            worst_value: if witness.is_some() { worst_escape as f64 } else { cfg.max_iter as f64 },
            witness,
            note: format!(
                "critical values of f2 plus 8 offsets iterated {} times under f1; worst_value is the escape step (or the iteration budget); parabolic basins converge slowly, so bounded orbits are bounded only up to the budget",
                cfg.max_iter
            ),
        },
    })
}

fn to_sphere(z: Complex64) -> [f64; 3] {
    let n = 1.0 + z.norm_sqr();
    [2.0 * z.re / n, 2.0 * z.im / n, (z.norm_sqr() - 1.0) / n]
}

/// Minimum chordal distance between two finite clouds, via the embedding
/// of the sphere in R³ (chordal distance is Euclidean distance there) and
/// a sweep along the first coordinate.
pub fn min_chordal_between(a: &[Complex64], b: &[Complex64]) -> (f64, Option<(Complex64, Complex64)>) {
    let mut bs: Vec<([f64; 3], Complex64)> = b.iter().map(|&z| (to_sphere(z), z)).collect();
    bs.sort_by(|p, q| p.0[0].total_cmp(&q.0[0]));
    let mut best = f64::INFINITY;
    let mut pair = None;
    for &z in a {
        let p = to_sphere(z);
        let start = bs.partition_point(|q| q.0[0] < p[0] - best);
        for (q, w) in &bs[start..] {
            if q[0] > p[0] + best {
                break;
            }
            let d = ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt();
            if d < best {
                best = d;
                pair = Some((z, *w));
            }
        }
    }
    (best, pair)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PbdPair {
    pub f1: MapExpr,
    pub f2: MapExpr,
    pub warnings: Vec<String>,
}

/// `f₂ = a (z - b)^d + b`; smallness of `a` is not checked.
pub fn gen_pbd_pair(f1: &MapExpr, b: Complex64, d: u32, a: Complex64) -> Result<PbdPair> {
    if d < 2 {
        return Err(Error::InvalidArgument("d must be ≥ 2".into()));
    }
    if a.norm() == 0.0 {
        return Err(Error::InvalidArgument("a must be nonzero".into()));
    }
    let mut warnings = Vec::new();
    if f1.degree() == 2 && d == 2 {
        warnings.push("(deg f1, d) = (2, 2) is excluded by the construction".to_string());
    }
    f1.validate()?;
    let f2 = MapExpr::Poly(Polynomial::shifted_power(a, b, d as usize, b)?);
    Ok(PbdPair {
        f1: f1.clone(),
        f2,
        warnings,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InducingConfig {
    /// Truncation level of the induced system used for the estimate.
    pub r_max: usize,
    /// Truncation levels for the direct-mode study.
    pub r_schedule: Vec<usize>,
    /// Level-root depths for the induced system.
    pub depths: Vec<usize>,
    pub mode: EstimatorMode,
    pub bracket: (f64, f64),
    pub pruning: Pruning,
    /// Depth and pruning of the direct-mode truncation study.
    pub study_depth: usize,
    pub study_pruning: Pruning,
    pub base_point: Option<SpherePoint>,
    pub theta_window: usize,
    pub dim_j_f1: Option<f64>,
    pub box_count_points: usize,
    pub seed: u64,
    pub osc_asserted: bool,
    pub hard_cap: usize,
}

impl Default for InducingConfig {
    fn default() -> Self {
        InducingConfig {
            r_max: 10,
            r_schedule: vec![5, 10, 20],
            depths: vec![3, 4, 5],
            mode: EstimatorMode::Difference,
            bracket: (0.0, 2.0),
            pruning: Pruning::sampled(1000, 2.0, 1),
            study_depth: 1,
            study_pruning: Pruning::none(),
            base_point: None,
            theta_window: 8,
            dim_j_f1: None,
            box_count_points: 20_000,
            seed: 1,
            osc_asserted: false,
            hard_cap: 10_000_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TruncationRow {
    pub r_max: usize,
    pub generators: usize,
    pub root_direct: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InducingReport {
    pub partition: (Vec<usize>, Vec<usize>),
    pub r_max: usize,
    pub study_depth: usize,
    pub truncation_study: Vec<TruncationRow>,
    pub dimension: DimensionReport,
    pub regularity: Option<RegularityReport>,
    pub regularity_note: Option<String>,
    pub certificate: Option<PbOscCertificate>,
    pub warnings: Vec<String>,
}

/// Bowen root of the induced system for `I₁ = {f₁}`, `I₂ = {f₂}`, its
/// truncation study, tail regularity, and `max{ŝ, dim J(f₁)}`. The default
/// base point is a repelling fixed point of `f₁`.
pub fn inducing_dimension_report(
    f1: &MapExpr,
    f2: &MapExpr,
    cfg: &InducingConfig,
    certificate: Option<PbOscCertificate>,
) -> Result<InducingReport> {
    if cfg.r_schedule.is_empty() || cfg.r_schedule.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(
            "r_schedule must be nonempty and strictly increasing".into(),
        ));
    }
    let base = GeneratorSystem::new(vec![f1.clone(), f2.clone()])?;
    let roots = RootOptions::default();
    let x = match cfg.base_point {
        Some(x) => x,
        None => GeneratorSystem::new(vec![f1.clone()])?.default_base_point(&roots)?,
    };

    let mut warnings = Vec::new();
    let study_opts = TreeOptions {
        roots,
        pruning: cfg.study_pruning,
    };
    let mut study = Vec::with_capacity(cfg.r_schedule.len());
    for &r in &cfg.r_schedule {
        let ind = build_induced(&base, &[0], &[1], r, DEFAULT_INDUCED_WARN, cfg.hard_cap)?;
        warnings.extend(ind.warnings.iter().cloned());
        let tree = BackwardTree::build(&ind.generators, x, cfg.study_depth, study_opts)?;
        study.push(TruncationRow {
            r_max: r,
            generators: ind.generators.len(),
            root_direct: level_root(&tree, cfg.study_depth, EstimatorMode::Direct, cfg.bracket)?,
        });
    }
    let induced = build_induced(&base, &[0], &[1], cfg.r_max, DEFAULT_INDUCED_WARN, cfg.hard_cap)?;
    warnings.extend(induced.warnings.iter().cloned());

    let dim_cfg = DimensionConfig {
        depths: cfg.depths.clone(),
        mode: cfg.mode,
        bracket: cfg.bracket,
        base_points: vec![x],
        tree: TreeOptions {
            roots,
            pruning: cfg.pruning,
        },
        osc_asserted: cfg.osc_asserted,
        sensitivity_depth: 1,
    };
    let mut dimension = dimension_estimate(&induced.generators, &dim_cfg)?;
    let s_hat = dimension.final_root().unwrap_or(dimension.extrapolated);

    let (regularity, regularity_note) =
        match theta_estimate(&induced.generators, &[x], cfg.theta_window, s_hat, &study_opts) {
            Ok(r) => (Some(r), None),
            Err(e @ Error::IndeterminateTail(_)) => (None, Some(e.to_string())),
            Err(e) => return Err(e),
        };

    let component = match cfg.dim_j_f1 {
        Some(v) => ComponentDimension {
            label: "dim_H(J(f1))".into(),
            value: v,
            provenance: "user supplied".into(),
        },
        None => ComponentDimension {
            label: "dim_H(J(f1))".into(),
            value: julia_box_count(f1, cfg.box_count_points, cfg.seed)?.clamp(0.0, 2.0),
            provenance: format!("box count of a {}-point backward cloud of <f1>", cfg.box_count_points),
        },
    };
    let components = vec![component];
    let combined = combined_dimension(s_hat, &components)?;
    dimension.combined_inputs = Some(CombinedInputs {
        s_hat,
        components,
        combined,
    });

    Ok(InducingReport {
        partition: (vec![0], vec![1]),
        r_max: cfg.r_max,
        study_depth: cfg.study_depth,
        truncation_study: study,
        dimension,
        regularity,
        regularity_note,
        certificate,
        warnings,
    })
}

/// Box-counting estimate of `dim J(f)` from a backward cloud, on scales
/// `D/8 … D/256` relative to the cloud diameter `D`.
pub fn julia_box_count(f: &MapExpr, points: usize, seed: u64) -> Result<f64> {
    let sys = GeneratorSystem::new(vec![f.clone()])?;
    let opts = RootOptions::default();
    let x0 = sys.default_base_point(&opts)?;
    let cloud = backward_cloud(&sys, x0, points, 50, seed, &opts)?.points;
    let (mut lo, mut hi) = (
        Complex64::new(f64::INFINITY, f64::INFINITY),
        Complex64::new(f64::NEG_INFINITY, f64::NEG_INFINITY),
    );
    for z in &cloud {
        lo = Complex64::new(lo.re.min(z.re), lo.im.min(z.im));
        hi = Complex64::new(hi.re.max(z.re), hi.im.max(z.im));
    }
    let diam = (hi.re - lo.re).max(hi.im - lo.im);
    if !(diam > 0.0) {
        return Err(Error::DegenerateCloud);
    }
    let scales: Vec<f64> = (3..=8).map(|k| diam / 2f64.powi(k)).collect();
    Ok(box_count_dimension(&cloud, &scales)?.slope)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(c: &[f64]) -> MapExpr {
        MapExpr::poly_real(c).unwrap()
    }

    fn quick() -> PbOscConfig {
        PbOscConfig {
            j_samples: 600,
            grid: 40,
            max_iter: 2000,
            ..PbOscConfig::default()
        }
    }

    #[test]
    fn induced_counts_and_errors() {
        let base = GeneratorSystem::new(vec![p(&[0.0, 0.0, 1.0]), p(&[0.0, 0.0, 0.0, 0.01])]).unwrap();
        let ind = build_induced(&base, &[0], &[1], 3, 100, 1000).unwrap();
        assert_eq!(ind.generators.len(), 4);
        assert!(ind.warnings.is_empty());
        let degs: Vec<u64> = ind.generators.generators().iter().map(MapExpr::degree).collect();
        assert_eq!(degs, vec![3, 6, 12, 24]);
        assert!(build_induced(&base, &[0], &[1], 3, 2, 1000).unwrap().warnings.len() == 1);
        assert!(matches!(
            build_induced(&base, &[0], &[1], 3, 2, 3),
            Err(Error::CapExceeded { .. })
        ));
        assert!(matches!(
            build_induced(&base, &[0, 1], &[], 3, 2, 3),
            Err(Error::PartitionError(_))
        ));

        let three = GeneratorSystem::new(vec![
            p(&[0.0, 0.0, 1.0]),
            p(&[0.0, 0.0, 2.0]),
            p(&[0.0, 0.0, 0.0, 0.01]),
        ])
        .unwrap();
        let ind = build_induced(&three, &[0, 1], &[2], 2, 100, 1000).unwrap();
        assert_eq!(ind.generators.len(), 7);
    }

    #[test]
    fn pbd_pairs() {
        let f1 = p(&[0.25, 0.0, 1.0]);
        let pair = gen_pbd_pair(&f1, Complex64::new(0.0, 0.0), 3, Complex64::new(0.01, 0.0)).unwrap();
        assert_eq!(pair.f2, p(&[0.0, 0.0, 0.0, 0.01]));
        assert!(pair.warnings.is_empty());
        let pair = gen_pbd_pair(&f1, Complex64::new(1.0, 0.0), 3, Complex64::new(0.1, 0.0)).unwrap();
        // 0.1(z-1)^3 + 1 = 0.9 + 0.3z - 0.3z^2 + 0.1z^3
        let z = SpherePoint::real(2.5);
        let v = pair.f2.eval(z).unwrap().finite().unwrap();
        assert!((v.re - (0.1 * 1.5f64.powi(3) + 1.0)).abs() < 1e-12);
        assert_eq!(
            gen_pbd_pair(&f1, Complex64::new(0.0, 0.0), 2, Complex64::new(0.1, 0.0))
                .unwrap()
                .warnings
                .len(),
            1
        );
    }

    #[test]
    fn chordal_gap_matches_brute_force() {
        let a: Vec<Complex64> = (0..50)
            .map(|k| Complex64::from_polar(1.0 + 0.01 * k as f64, k as f64))
            .collect();
        let b: Vec<Complex64> = (0..70)
            .map(|k| Complex64::from_polar(3.0 - 0.02 * k as f64, 0.3 * k as f64))
            .collect();
        let brute = a
            .iter()
            .flat_map(|&x| {
                b.iter()
                    .map(move |&y| SpherePoint::Finite(x).chordal(&SpherePoint::Finite(y)))
            })
            .fold(f64::INFINITY, f64::min);
        assert!((min_chordal_between(&a, &b).0 - brute).abs() < 1e-12);
    }

    #[test]
    fn certificate_hyperbolic_pair_passes() {
        let cert = pb_osc_certificate(&p(&[0.0, 0.0, 1.0]), &p(&[0.0, 0.0, 0.0, 0.01]), &quick()).unwrap();
        assert!(cert.bounded_postcritical.pass);
        assert!(cert.k1_inside_int_k2.pass);
        assert!(cert.osc_with_annular_u.pass, "{:?}", cert.osc_with_annular_u);
        assert!(cert.j1_pullback_disjoint.pass);
        assert!(cert.cv2_inside_int_k1.pass);
        assert!(cert.overall);
    }

    #[test]
    fn certificate_counterexamples() {
        let cfg = quick();
        let z2 = p(&[0.0, 0.0, 1.0]);
        let cubic = p(&[0.0, 0.0, 0.0, 0.01]);
        let c = pb_osc_certificate(&p(&[-3.0, 0.0, 1.0]), &cubic, &cfg).unwrap();
        assert!(!c.bounded_postcritical.pass && !c.overall);
        let c = pb_osc_certificate(&cubic, &z2, &cfg).unwrap();
        assert!(!c.k1_inside_int_k2.pass);
        let c = pb_osc_certificate(&z2, &p(&[0.0, 0.0, 0.25]), &cfg).unwrap();
        assert!(!c.osc_with_annular_u.pass, "{:?}", c.osc_with_annular_u);
        assert!(c.j1_pullback_disjoint.pass);
        let c = pb_osc_certificate(&z2, &z2, &cfg).unwrap();
        assert!(!c.j1_pullback_disjoint.pass);
        let c = pb_osc_certificate(&z2, &p(&[2.0, 0.0, 0.0, 0.01]), &cfg).unwrap();
        assert!(!c.cv2_inside_int_k1.pass);
    }

    #[test]
    fn degenerate_truncation_is_f2_alone() {
        let f1 = p(&[0.0, 0.0, 1.0]);
        let f2 = p(&[0.0, 0.0, 0.0, 0.01]);
        let cfg = InducingConfig {
            r_max: 0,
            r_schedule: vec![0],
            depths: vec![2],
            dim_j_f1: Some(1.0),
            ..InducingConfig::default()
        };
        let rep = inducing_dimension_report(&f1, &f2, &cfg, None).unwrap();
        let alone = GeneratorSystem::new(vec![f2.clone()]).unwrap();
        let tree = BackwardTree::build(&alone, SpherePoint::real(1.0), 3, TreeOptions::default()).unwrap();
        let expected = level_root(&tree, 2, EstimatorMode::Difference, (0.0, 2.0)).unwrap();
        let s = rep.dimension.final_root().unwrap();
        assert!((s - expected).abs() < 1e-12, "{s} vs {expected}");
        assert!(rep.regularity.is_none());
        assert_eq!(rep.dimension.combined_inputs.unwrap().combined.value, 1.0);
    }

    #[test]
    fn box_count_of_circle() {
        let d = julia_box_count(&p(&[0.0, 0.0, 1.0]), 20_000, 5).unwrap();
        assert!((d - 1.0).abs() < 0.1, "{d}");
    }
}
