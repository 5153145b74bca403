//! Bowen-root solving: the zero of the finite-depth pressure in `t`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::family::Family;
use crate::pressure::{check_increasing, distortion_ratio, EstimatorMode, PartitionLevel};
use crate::semigroup::{BackwardTree, GeneratorSystem, TreeOptions};
use crate::sphere::SpherePoint;

pub const DEFAULT_BRACKET: (f64, f64) = (0.0, 2.0);
const ROOT_TOL: f64 = 1e-12;

/// Root of `log Z_n(t) = 0` (direct) or `log Z_{n+1}(t) - log Z_n(t) = 0`
/// (difference) by bisection on `bracket`.
pub fn level_root(tree: &BackwardTree, n: usize, mode: EstimatorMode, bracket: (f64, f64)) -> Result<f64> {
    let here = PartitionLevel::from_tree(tree, n)?;
    match mode {
        EstimatorMode::Direct => root_of(&here, None, bracket),
        EstimatorMode::Difference => {
            let next = PartitionLevel::from_tree(tree, n + 1)?;
            root_of(&next, Some(&PartitionLevel::kept(tree, n)?), bracket)
        }
    }
}

/// Solves `log Z_upper(t) - log Z_lower(t) = 0` (lower omitted: `= 0`).
fn root_of(upper: &PartitionLevel, lower: Option<&PartitionLevel>, bracket: (f64, f64)) -> Result<f64> {
    if upper.has_critical() || lower.is_some_and(PartitionLevel::has_critical) {
        return Err(Error::CriticalBranchPresent);
    }
    let g = |t: f64| upper.log_z(t) - lower.map_or(0.0, |l| l.log_z(t));
    let (mut lo, mut hi) = bracket;
    let (g_lo, g_hi) = (g(lo), g(hi));
    // the objective decreases in t for expanding systems; require a
    // sign change in that direction (an exact zero at an end is a root)
    if g_lo == 0.0 && g_hi < 0.0 {
        return Ok(lo);
    }
    if g_lo > 0.0 && g_hi == 0.0 {
        return Ok(hi);
    }
    if !(g_lo > 0.0 && g_hi < 0.0) {
        return Err(Error::BracketFailure {
            lo,
            hi,
            f_lo: g_lo,
            f_hi: g_hi,
        });
    }
    while hi - lo > ROOT_TOL {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimensionConfig {
    pub depths: Vec<usize>,
    /// Mode used for extrapolation and the headline estimate.
    pub mode: EstimatorMode,
    pub bracket: (f64, f64),
    /// Empty: use the default base point plus nearby tree points.
    pub base_points: Vec<SpherePoint>,
    #[serde(skip)]
    pub tree: TreeOptions,
    pub osc_asserted: bool,
    /// Depth used for the cross-base-point distortion check.
    pub sensitivity_depth: usize,
}

impl Default for DimensionConfig {
    fn default() -> Self {
        DimensionConfig {
            depths: vec![4, 6, 8],
            mode: EstimatorMode::Difference,
            bracket: DEFAULT_BRACKET,
            base_points: Vec::new(),
            tree: TreeOptions::default(),
            osc_asserted: false,
            sensitivity_depth: 6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevelRoot {
    pub n: usize,
    pub direct: Option<f64>,
    pub difference: Option<f64>,
    /// `max Z_n(t,x)/Z_n(t,y)` over the report's base points at `t = t_n`.
    pub distortion_ratio: Option<f64>,
    /// Upper bound on partition mass removed by pruning at levels `≤ n`
    /// (counted at the level where it was dropped), at `t = t_n`.
    pub pruned_mass_bound: f64,
}

impl LevelRoot {
    pub fn get(&self, mode: EstimatorMode) -> Option<f64> {
        match mode {
            EstimatorMode::Direct => self.direct,
            EstimatorMode::Difference => self.difference,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComponentDimension {
    pub label: String,
    pub value: f64,
    pub provenance: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CombinedDimension {
    pub value: f64,
    pub source: String,
    pub provenance: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DimensionReport {
    pub system: Vec<String>,
    pub base_points: Vec<SpherePoint>,
    pub mode: EstimatorMode,
    pub bracket: (f64, f64),
    pub level_roots: Vec<LevelRoot>,
    pub extrapolated: f64,
    pub extrapolation: String,
    /// Spread of level roots across base points at the sensitivity depth.
    pub base_point_spread: f64,
    pub label: String,
    pub combined_inputs: Option<CombinedInputs>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CombinedInputs {
    pub s_hat: f64,
    pub components: Vec<ComponentDimension>,
    pub combined: CombinedDimension,
}

pub const LABEL_EQUALITY: &str = "equality (OSC asserted)";
pub const LABEL_UPPER_BOUND: &str = "upper bound for dim_H(Jpre)";

impl DimensionReport {
    pub fn final_root(&self) -> Option<f64> {
        self.level_roots.last().and_then(|r| r.get(self.mode))
    }
}

/// Level roots over the depth schedule, extrapolation, and diagnostics.
pub fn dimension_estimate(system: &GeneratorSystem, config: &DimensionConfig) -> Result<DimensionReport> {
    check_increasing(&config.depths)?;
    if config.depths[0] == 0 {
        return Err(Error::InvalidArgument("depths must be ≥ 1".into()));
    }
    let n_max = *config.depths.last().unwrap();
    let x0 = match config.base_points.first() {
        Some(&x) => x,
        None => system.default_base_point(&config.tree.roots)?,
    };
    let tree = BackwardTree::build(system, x0, n_max + 1, config.tree)?;
    let levels = Levels::of(&tree, n_max + 1)?;

    let base_points = if config.base_points.len() >= 2 {
        config.base_points.clone()
    } else {
        sensitivity_points(&tree, x0, 3)
    };

    let sens_depth = config.sensitivity_depth.min(n_max).max(1);
    // trees for the other base points, shallow enough to stay cheap
    let side_trees = base_points[1..]
        .iter()
        .map(|&x| BackwardTree::build(system, x, sens_depth + 1, config.tree))
        .collect::<Result<Vec<_>>>()?;

    let mut level_roots = Vec::with_capacity(config.depths.len());
    for &n in &config.depths {
        // the headline mode must bracket a root; the other one is reported if it does
        let t_n = levels.root(n, config.mode, config.bracket)?;
        let other = |m| levels.root(n, m, config.bracket).ok();
        let (direct, difference) = match config.mode {
            EstimatorMode::Direct => (Some(t_n), other(EstimatorMode::Difference)),
            EstimatorMode::Difference => (other(EstimatorMode::Direct), Some(t_n)),
        };
        let distortion = (n <= sens_depth).then(|| {
            let mut lz = vec![levels.all[n].log_z(t_n)];
            for t in &side_trees {
                lz.push(
                    PartitionLevel::from_tree(t, n)
                        .map(|l| l.log_z(t_n))
                        .unwrap_or(f64::NAN),
                );
            }
            distortion_ratio(&lz)
        });
        let pruned: f64 = tree.prune_log()[..=n].iter().map(|r| r.mass_bound(t_n)).sum();
        level_roots.push(LevelRoot {
            n,
            direct,
            difference,
            distortion_ratio: distortion,
            pruned_mass_bound: pruned,
        });
    }

    let mut spread: f64 = 0.0;
    let main_root = levels.root(sens_depth, config.mode, config.bracket)?;
    for t in &side_trees {
        let r = Levels::of(t, sens_depth + 1)?.root(sens_depth, config.mode, config.bracket)?;
        spread = spread.max((r - main_root).abs());
    }

    let roots: Vec<f64> = level_roots.iter().filter_map(|r| r.get(config.mode)).collect();
    let (extrapolated, extrapolation) = aitken(&roots, config.bracket);

    Ok(DimensionReport {
        system: system.labels().to_vec(),
        base_points,
        mode: config.mode,
        bracket: config.bracket,
        level_roots,
        extrapolated,
        extrapolation,
        base_point_spread: spread,
        label: if config.osc_asserted {
            LABEL_EQUALITY
        } else {
            LABEL_UPPER_BOUND
        }
        .to_string(),
        combined_inputs: None,
    })
}

/// Partition levels of one tree, with and without pruned mass.
struct Levels {
    all: Vec<PartitionLevel>,
    kept: Vec<PartitionLevel>,
}

impl Levels {
    fn of(tree: &BackwardTree, n_max: usize) -> Result<Self> {
        let all = (0..=n_max)
            .map(|n| PartitionLevel::from_tree(tree, n))
            .collect::<Result<Vec<_>>>()?;
        let kept = (0..=n_max)
            .map(|n| PartitionLevel::kept(tree, n))
            .collect::<Result<Vec<_>>>()?;
        Ok(Levels { all, kept })
    }

    fn root(&self, n: usize, mode: EstimatorMode, bracket: (f64, f64)) -> Result<f64> {
        match mode {
            EstimatorMode::Direct => root_of(&self.all[n], None, bracket),
            EstimatorMode::Difference => root_of(&self.all[n + 1], Some(&self.kept[n]), bracket),
        }
    }
}

/// The root point plus up to `want - 1` further distinct, finite points from
/// the shallowest tree levels.
fn sensitivity_points(tree: &BackwardTree, x0: SpherePoint, want: usize) -> Vec<SpherePoint> {
    let mut pts = vec![x0];
    for n in 1..=tree.depth() {
        for leaf in tree.level(n).unwrap_or(&[]) {
            if pts.len() >= want {
                return pts;
            }
            if !leaf.critical && !leaf.point.is_infinity() && pts.iter().all(|p| p.chordal(&leaf.point) > 1e-6) {
                pts.push(leaf.point);
            }
        }
    }
    pts
}

/// Aitken Δ² over the last three roots when they move monotonically and
/// contract geometrically; otherwise the last root.
fn aitken(roots: &[f64], bracket: (f64, f64)) -> (f64, String) {
    let Some(&last) = roots.last() else {
        return (f64::NAN, "none".into());
    };
    if roots.len() < 3 {
        return (last, "last level root".into());
    }
    let [a, b, c] = [roots[roots.len() - 3], roots[roots.len() - 2], last];
    let (d1, d2) = (b - a, c - b);
    if d1 * d2 > 0.0 && d2.abs() < d1.abs() {
        let x = c - d2 * d2 / (d2 - d1);
        if x.is_finite() && x >= bracket.0 && x <= bracket.1 {
            return (x, "aitken".into());
        }
    }
    (last, "last level root".into())
}

/// `max |t_n(x) - t_n(y)|` over pairs of base points.
pub fn base_point_sensitivity(
    system: &GeneratorSystem,
    base_points: &[SpherePoint],
    n: usize,
    mode: EstimatorMode,
    bracket: (f64, f64),
    opts: &TreeOptions,
) -> Result<f64> {
    let depth = match mode {
        EstimatorMode::Direct => n,
        EstimatorMode::Difference => n + 1,
    };
    let roots = base_points
        .iter()
        .map(|&x| {
            let tree = BackwardTree::build(system, x, depth, *opts)?;
            level_root(&tree, n, mode, bracket)
        })
        .collect::<Result<Vec<f64>>>()?;
    let hi = roots.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = roots.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(if roots.is_empty() { 0.0 } else { hi - lo })
}

/// `max{s_hat, component dims}` with the provenance of the maximizer.
/// Ties go to `s_hat`, then to the earliest component.
pub fn combined_dimension(s_hat: f64, components: &[ComponentDimension]) -> Result<CombinedDimension> {
    for v in std::iter::once(s_hat).chain(components.iter().map(|c| c.value)) {
        if !(0.0..=2.0).contains(&v) {
            return Err(Error::RangeError(v));
        }
    }
    let mut best = CombinedDimension {
        value: s_hat,
        source: "s_hat".into(),
        provenance: "Bowen root of the (induced) system".into(),
    };
    for c in components {
        if c.value > best.value {
            best = CombinedDimension {
                value: c.value,
                source: c.label.clone(),
                provenance: c.provenance.clone(),
            };
        }
    }
    Ok(best)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoxCount {
    pub slope: f64,
    pub r2: f64,
    /// `(ε, N(ε))`
    pub counts: Vec<(f64, usize)>,
}

/// Least-squares slope of `log N(ε)` against `log(1/ε)`, with boxes of side
/// `ε` anchored at the origin.
pub fn box_count_dimension(cloud: &[Complex64], scales: &[f64]) -> Result<BoxCount> {
    if cloud.len() < 1000 {
        return Err(Error::InsufficientData(format!("{} points, need ≥ 1000", cloud.len())));
    }
    if scales.len() < 4 || scales.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::InsufficientData("need ≥ 4 positive scales".into()));
    }
    let (smin, smax) = scales
        .iter()
        .fold((f64::INFINITY, 0.0_f64), |(a, b), &e| (a.min(e), b.max(e)));
    if smax / smin < 4.0 {
        return Err(Error::InsufficientData("scales must span at least two octaves".into()));
    }
    if cloud.iter().all(|z| *z == cloud[0]) {
        return Err(Error::DegenerateCloud);
    }
    let counts: Vec<(f64, usize)> = scales
        .iter()
        .map(|&eps| {
            let boxes: HashSet<(i64, i64)> = cloud
                .iter()
                .map(|z| ((z.re / eps).floor() as i64, (z.im / eps).floor() as i64))
                .collect();
            (eps, boxes.len())
        })
        .collect();
    let xs: Vec<f64> = counts.iter().map(|(e, _)| -e.ln()).collect();
    let ys: Vec<f64> = counts.iter().map(|(_, n)| (*n as f64).ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    Ok(BoxCount { slope, r2, counts })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExhaustionRoot {
    pub size: usize,
    pub root: f64,
}

/// Bowen roots of successive truncations of an infinite family.
pub fn exhaustion_roots(
    family: &Family,
    sizes: &[usize],
    depth: usize,
    mode: EstimatorMode,
    x: Option<SpherePoint>,
    bracket: (f64, f64),
    opts: &TreeOptions,
) -> Result<Vec<ExhaustionRoot>> {
    check_increasing(sizes)?;
    let tree_depth = match mode {
        EstimatorMode::Direct => depth,
        EstimatorMode::Difference => depth + 1,
    };
    let mut base = x;
    sizes
        .iter()
        .map(|&k| {
            let system = family.truncate(k)?;
            let x = match base {
                Some(x) => x,
                None => *base.insert(system.default_base_point(&opts.roots)?),
            };
            let tree = BackwardTree::build(&system, x, tree_depth, *opts)?;
            Ok(ExhaustionRoot {
                size: k,
                root: level_root(&tree, depth, mode, bracket)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::MapExpr;

    fn system(coeffs: &[&[f64]]) -> GeneratorSystem {
        GeneratorSystem::new(coeffs.iter().map(|c| MapExpr::poly_real(c).unwrap()).collect()).unwrap()
    }

    fn comp(label: &str, v: f64) -> ComponentDimension {
        ComponentDimension {
            label: label.into(),
            value: v,
            provenance: "user".into(),
        }
    }

    #[test]
    fn combined_examples() {
        let c = combined_dimension(1.3, &[comp("J(f1)", 1.0)]).unwrap();
        assert_eq!((c.value, c.source.as_str()), (1.3, "s_hat"));
        let c = combined_dimension(0.9, &[comp("J(f1)", 1.0)]).unwrap();
        assert_eq!((c.value, c.source.as_str()), (1.0, "J(f1)"));
        assert_eq!(combined_dimension(1.0, &[]).unwrap().value, 1.0);
        assert!(matches!(combined_dimension(2.5, &[]), Err(Error::RangeError(_))));
        assert!(matches!(
            combined_dimension(1.0, &[comp("x", -0.1)]),
            Err(Error::RangeError(_))
        ));
    }

    #[test]
    fn bracket_failure_is_reported() {
        let sys = system(&[&[0.0, 3.0], &[-2.0, 3.0]]);
        let tree = BackwardTree::build(&sys, SpherePoint::real(0.0), 5, TreeOptions::default()).unwrap();
        let r = level_root(&tree, 4, EstimatorMode::Difference, (0.7, 2.0));
        assert!(matches!(r, Err(Error::BracketFailure { .. })));
    }

    #[test]
    fn critical_branch_blocks_root() {
        let sys = system(&[&[0.0, 0.0, 1.0]]);
        let tree = BackwardTree::build(&sys, SpherePoint::real(0.0), 2, TreeOptions::default()).unwrap();
        assert!(matches!(
            level_root(&tree, 1, EstimatorMode::Direct, DEFAULT_BRACKET),
            Err(Error::CriticalBranchPresent)
        ));
    }

    #[test]
    fn aitken_rules() {
        let (x, how) = aitken(&[1.0, 1.5, 1.75], (0.0, 2.0));
        assert_eq!(how, "aitken");
        assert!((x - 2.0).abs() < 1e-12);
        let (x, how) = aitken(&[1.0, 1.5, 1.2], (0.0, 2.0));
        assert_eq!((x, how.as_str()), (1.2, "last level root"));
        let (x, _) = aitken(&[0.5, 0.5, 0.5], (0.0, 2.0));
        assert_eq!(x, 0.5);
    }

    #[test]
    fn box_count_preconditions() {
        let same = vec![Complex64::new(0.3, 0.3); 2000];
        assert!(matches!(
            box_count_dimension(&same, &[0.1, 0.05, 0.025, 0.0125]),
            Err(Error::DegenerateCloud)
        ));
        let few = vec![Complex64::new(0.3, 0.3); 10];
        assert!(matches!(
            box_count_dimension(&few, &[0.1, 0.05, 0.025, 0.0125]),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn box_count_unit_circle() {
        // brute-force oracle: uniform circle samples have box dimension 1
        let pts: Vec<Complex64> = (0..10_000)
            .map(|k| Complex64::from_polar(1.0, std::f64::consts::TAU * k as f64 / 10_000.0))
            .collect();
        let scales: Vec<f64> = (2..=7).map(|k| 0.5f64.powi(k)).collect();
        let bc = box_count_dimension(&pts, &scales).unwrap();
        assert!((bc.slope - 1.0).abs() < 0.1, "{bc:?}");
        assert!(bc.r2 > 0.99);
    }

    #[test]
    fn sensitivity_single_point_is_zero() {
        let sys = system(&[&[0.0, 3.0], &[-2.0, 3.0]]);
        let s = base_point_sensitivity(
            &sys,
            &[SpherePoint::real(0.0)],
            6,
            EstimatorMode::Difference,
            DEFAULT_BRACKET,
            &TreeOptions::default(),
        )
        .unwrap();
        assert_eq!(s, 0.0);
    }

    #[test]
    fn report_labels_follow_osc_flag() {
        let sys = system(&[&[0.0, 0.0, 1.0]]);
        let mut cfg = DimensionConfig {
            depths: vec![2, 3, 4],
            ..Default::default()
        };
        let r = dimension_estimate(&sys, &cfg).unwrap();
        assert_eq!(r.label, LABEL_UPPER_BOUND);
        cfg.osc_asserted = true;
        let r = dimension_estimate(&sys, &cfg).unwrap();
        assert_eq!(r.label, LABEL_EQUALITY);
        for lr in &r.level_roots {
            assert!((lr.difference.unwrap() - 1.0).abs() < 1e-9);
            assert!((lr.direct.unwrap() - 1.0).abs() < 1e-9);
        }
        assert!(r.base_point_spread < 1e-9);
        assert_eq!(r.base_points.len(), 3);
    }
}
