//! Partition functions `Z_n(t, x)` and pressure estimates.
//!
//! Leaves carry `S = log ‖f_ω'(y)‖`, so `log Z_n(t) = LSE(-t·S + log mult)`
//! over level `n` of a backward tree. All sums are done in log space.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::Family;
use crate::semigroup::{BackwardTree, GeneratorSystem, TreeLeaf, TreeOptions};
use crate::sphere::SpherePoint;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorMode {
    /// `(1/n) log Z_n`
    Direct,
    /// `log Z_{n+1} - log Z_n`
    #[default]
    Difference,
}

/// `log Σ exp(a_i)` with max shifting; `-inf` for an empty input.
pub fn log_sum_exp(values: impl IntoIterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.into_iter().collect();
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m.is_infinite() {
        return m;
    }
    m + v.iter().map(|a| (a - m).exp()).sum::<f64>().ln()
}

/// One tree level flattened for repeated evaluation at many `t`.
#[derive(Clone, Debug)]
pub struct PartitionLevel {
    s: Vec<f64>,
    log_mult: Vec<f64>,
    critical_mult: u64,
}

impl PartitionLevel {
    pub fn new(leaves: &[TreeLeaf]) -> Self {
        Self::weighted(leaves, false)
    }

    fn weighted(leaves: &[TreeLeaf], before_selection: bool) -> Self {
        let mut s = Vec::with_capacity(leaves.len());
        let mut log_mult = Vec::with_capacity(leaves.len());
        let mut critical_mult = 0;
        for l in leaves {
            if l.critical {
                critical_mult += l.multiplicity;
            } else {
                let gain = if before_selection { l.log_gain } else { 0.0 };
                s.push(l.log_deriv_sum);
                log_mult.push((l.multiplicity as f64).ln() + l.log_weight - gain);
            }
        }
        PartitionLevel {
            s,
            log_mult,
            critical_mult,
        }
    }

    /// All computed preimages at level `n`: kept leaves at their weights
    /// before selection plus the binned mass pruned at that level.
    pub fn from_tree(tree: &BackwardTree, n: usize) -> Result<Self> {
        let mut level = Self::weighted(tree.level(n)?, true);
        for &(s, m) in tree.dropped_mass(n)? {
            level.s.push(s);
            level.log_mult.push(m.ln());
        }
        Ok(level)
    }

    /// Only the leaves kept for further expansion, with their sampling weights.
    pub fn kept(tree: &BackwardTree, n: usize) -> Result<Self> {
        Ok(Self::new(tree.level(n)?))
    }

    pub fn has_critical(&self) -> bool {
        self.critical_mult > 0
    }

    /// `log Z(t)`. Critical leaves have weight `0^{-t}`: `+inf` for
    /// `t > 0`, `0` for `t < 0`, and `1` per multiplicity at `t = 0`.
    pub fn log_z(&self, t: f64) -> f64 {
        if self.critical_mult > 0 && t > 0.0 {
            return f64::INFINITY;
        }
        let mut m = f64::NEG_INFINITY;
        for (s, lm) in self.s.iter().zip(&self.log_mult) {
            m = m.max(-t * s + lm);
        }
        if self.critical_mult > 0 && t == 0.0 {
            m = m.max((self.critical_mult as f64).ln());
        }
        if m == f64::NEG_INFINITY {
            return m;
        }
        let mut acc: f64 = self
            .s
            .iter()
            .zip(&self.log_mult)
            .map(|(s, lm)| (-t * s + lm - m).exp())
            .sum();
        if self.critical_mult > 0 && t == 0.0 {
            acc += self.critical_mult as f64 * (-m).exp();
        }
        m + acc.ln()
    }

    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty() && self.critical_mult == 0
    }
}

/// `log Z_n(t, x)` on level `n` of the tree rooted at `x`.
pub fn log_partition(tree: &BackwardTree, n: usize, t: f64) -> Result<f64> {
    Ok(PartitionLevel::from_tree(tree, n)?.log_z(t))
}

/// `log Z_n` on a grid of depths and exponents.
#[derive(Clone, Debug, Serialize)]
pub struct PressureTable {
    pub base_point: SpherePoint,
    /// Depths `0..=n_max`.
    pub depths: Vec<usize>,
    pub t_values: Vec<f64>,
    /// `log_z[n][j] = log Z_n(t_j)` over all computed level-`n` preimages.
    pub log_z: Vec<Vec<f64>>,
    /// Same over the leaves kept after pruning (equal to `log_z` without pruning).
    pub log_z_kept: Vec<Vec<f64>>,
}

impl PressureTable {
    pub fn compute(tree: &BackwardTree, n_max: usize, t_values: &[f64]) -> Result<Self> {
        let mut log_z = Vec::with_capacity(n_max + 1);
        let mut log_z_kept = Vec::with_capacity(n_max + 1);
        for n in 0..=n_max {
            let level = PartitionLevel::from_tree(tree, n)?;
            log_z.push(t_values.iter().map(|&t| level.log_z(t)).collect());
            let kept = PartitionLevel::kept(tree, n)?;
            log_z_kept.push(t_values.iter().map(|&t| kept.log_z(t)).collect());
        }
        Ok(PressureTable {
            base_point: tree.root(),
            depths: (0..=n_max).collect(),
            t_values: t_values.to_vec(),
            log_z,
            log_z_kept,
        })
    }

    pub fn n_max(&self) -> usize {
        self.depths.len() - 1
    }

    /// `(1/n) log Z_n(t_j)`; undefined at `n = 0`.
    pub fn estimator_direct(&self, n: usize, j: usize) -> Option<f64> {
        (n >= 1 && n <= self.n_max()).then(|| self.log_z[n][j] / n as f64)
    }

    /// `log Z_{n+1}(t_j) - log Z_n(t_j)`, the level-`n` sum taken over kept
    /// leaves so that it matches the parents of level `n + 1`.
    pub fn estimator_diff(&self, n: usize, j: usize) -> Option<f64> {
        (n < self.n_max()).then(|| self.log_z[n + 1][j] - self.log_z_kept[n][j])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PressureEstimate {
    pub estimate: f64,
    /// `(n, estimate at depth n)` for every available `n`.
    pub trend: Vec<(usize, f64)>,
}

/// Pressure at `t_values[j]`: direct mode uses `(1/n_max) log Z_{n_max}`,
/// difference mode `log Z_{n_max} - log Z_{n_max-1}`.
pub fn pressure_estimate(table: &PressureTable, j: usize, mode: EstimatorMode) -> Result<PressureEstimate> {
    if j >= table.t_values.len() {
        return Err(Error::InvalidArgument(format!("t index {j} out of range")));
    }
    if table.n_max() < 1 {
        return Err(Error::DepthUnavailable {
            requested: 1,
            available: 0,
        });
    }
    if table
        .log_z
        .iter()
        .chain(&table.log_z_kept)
        .any(|row| row[j] == f64::INFINITY)
    {
        return Err(Error::InfinitePressure);
    }
    let trend: Vec<(usize, f64)> = match mode {
        EstimatorMode::Direct => (1..=table.n_max())
            .map(|n| (n, table.estimator_direct(n, j).unwrap()))
            .collect(),
        // labelled by the deeper level so both modes end at n_max
        EstimatorMode::Difference => (1..=table.n_max())
            .map(|n| (n, table.estimator_diff(n - 1, j).unwrap()))
            .collect(),
    };
    Ok(PressureEstimate {
        estimate: trend.last().map(|p| p.1).unwrap(),
        trend,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DistortionReport {
    pub depth: usize,
    pub t: f64,
    pub base_points: Vec<SpherePoint>,
    pub log_z: Vec<f64>,
    /// `max_{x,y} Z_n(t,x) / Z_n(t,y)`, at least 1.
    pub ratio_max: f64,
}

/// Compares `Z_n(t, ·)` across base points.
pub fn distortion_diagnostic(
    system: &GeneratorSystem,
    t: f64,
    n: usize,
    base_points: &[SpherePoint],
    opts: &TreeOptions,
) -> Result<DistortionReport> {
    if base_points.is_empty() {
        return Err(Error::InvalidArgument("at least one base point required".into()));
    }
    let log_z = base_points
        .iter()
        .map(|&x| {
            let tree = BackwardTree::build(system, x, n, *opts)?;
            log_partition(&tree, n, t)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(DistortionReport {
        depth: n,
        t,
        base_points: base_points.to_vec(),
        ratio_max: distortion_ratio(&log_z),
        log_z,
    })
}

pub(crate) fn distortion_ratio(log_z: &[f64]) -> f64 {
    let hi = log_z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = log_z.iter().copied().fold(f64::INFINITY, f64::min);
    if hi == lo {
        1.0
    } else {
        (hi - lo).exp()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExhaustionPoint {
    pub size: usize,
    pub estimate: f64,
}

/// Pressure estimates of successive truncations of an infinite family at
/// a fixed base point, depth, and exponent.
pub fn exhaustion_curve(
    family: &Family,
    sizes: &[usize],
    t: f64,
    x: Option<SpherePoint>,
    n: usize,
    mode: EstimatorMode,
    opts: &TreeOptions,
) -> Result<Vec<ExhaustionPoint>> {
    check_increasing(sizes)?;
    let mut base = x;
    sizes
        .iter()
        .map(|&k| {
            let system = family.truncate(k)?;
            let x = match base {
                Some(x) => x,
                None => *base.insert(system.default_base_point(&opts.roots)?),
            };
            let tree = BackwardTree::build(&system, x, n, *opts)?;
            let table = PressureTable::compute(&tree, n, &[t])?;
            Ok(ExhaustionPoint {
                size: k,
                estimate: pressure_estimate(&table, 0, mode)?.estimate,
            })
        })
        .collect()
}

pub(crate) fn check_increasing(sizes: &[usize]) -> Result<()> {
    if sizes.is_empty() || sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(
            "sizes must be nonempty and strictly increasing".into(),
        ));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regularity {
    StronglyRegular,
    CriticallyRegularOrIrregular,
    Indeterminate,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegularityReport {
    pub theta_hat: f64,
    pub theta_std_err: f64,
    pub t_hat: f64,
    pub margin: f64,
    pub fit_residual: f64,
    pub window: Vec<usize>,
    pub classification: Regularity,
}

/// Margin above which a borderline case is left undecided.
const THETA_DECISIVE_MARGIN: f64 = 0.1;
const THETA_RESIDUAL_LIMIT: f64 = 0.5;
const THETA_BETA_MAX: f64 = 4.0;

/// Per-index one-step contributions of a truncated family: for every tail
/// index `k`, the `(S, log mult)` pairs of all preimages of `x` under the
/// generators with that index.
fn tail_contributions(
    system: &GeneratorSystem,
    x: SpherePoint,
    opts: &TreeOptions,
) -> Result<Vec<(usize, Vec<(f64, f64)>)>> {
    let info = system
        .truncation_of()
        .ok_or_else(|| Error::IndeterminateTail("system is not a truncation of an infinite family".into()))?;
    let mut groups: Vec<(usize, Vec<(f64, f64)>)> = Vec::new();
    for (g, &k) in system.generators().iter().zip(&info.tail_index) {
        let pos = match groups.iter().position(|(i, _)| *i == k) {
            Some(p) => p,
            None => {
                groups.push((k, Vec::new()));
                groups.len() - 1
            }
        };
        let entry = &mut groups[pos].1;
        g.for_each_preimage(x, &opts.roots, &mut |p| {
            let s = if p.critical { f64::NEG_INFINITY } else { p.log_norm };
            entry.push((s, (p.multiplicity as f64).ln()));
        })?;
    }
    groups.sort_by_key(|(k, _)| *k);
    Ok(groups)
}

struct LineFit {
    slope: f64,
    slope_std_err: f64,
    rms_residual: f64,
}

fn fit_line(xs: &[f64], ys: &[f64]) -> LineFit {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let sse: f64 = xs.iter().zip(ys).map(|(x, y)| (y - icpt - slope * x).powi(2)).sum();
    let dof = (n - 2.0).max(1.0);
    LineFit {
        slope,
        slope_std_err: (sse / dof / sxx).sqrt(),
        rms_residual: (sse / n).sqrt(),
    }
}

/// Estimates `Θ`, the convergence exponent of the one-step partition sum
/// over an infinite family, from the decay of per-index contributions over
/// the last `window` indices of a truncation, and classifies regularity
/// against the Bowen-root estimate `t_hat`.
pub fn theta_estimate(
    system: &GeneratorSystem,
    base_points: &[SpherePoint],
    window: usize,
    t_hat: f64,
    opts: &TreeOptions,
) -> Result<RegularityReport> {
    if system.truncation_of().is_none() {
        return Err(Error::IndeterminateTail(
            "system is not a truncation of an infinite family".into(),
        ));
    }
    if window < 3 {
        return Err(Error::IndeterminateTail(
            "tail window must hold at least 3 indices".into(),
        ));
    }
    if base_points.is_empty() {
        return Err(Error::InvalidArgument("at least one base point required".into()));
    }
    let mut theta_hat = f64::NEG_INFINITY;
    let mut std_err: f64 = 0.0;
    let mut residual: f64 = 0.0;
    let mut window_idx = Vec::new();
    for &x in base_points {
        let groups = tail_contributions(system, x, opts)?;
        if groups.len() < window {
            return Err(Error::IndeterminateTail(format!(
                "{} tail indices available, window needs {window}",
                groups.len()
            )));
        }
        let tail = &groups[groups.len() - window..];
        window_idx = tail.iter().map(|(k, _)| *k).collect();
        let xs: Vec<f64> = tail.iter().map(|(k, _)| *k as f64).collect();
        let fit_at = |beta: f64| {
            let ys: Vec<f64> = tail
                .iter()
                .map(|(_, c)| log_sum_exp(c.iter().map(|(s, lm)| -beta * s + lm)))
                .collect();
            fit_line(&xs, &ys)
        };
        if fit_at(THETA_BETA_MAX).slope >= 0.0 {
            return Err(Error::IndeterminateTail(format!(
                "tail contributions do not decay for β ≤ {THETA_BETA_MAX}"
            )));
        }
        let (mut lo, mut hi) = (0.0, THETA_BETA_MAX);
        if fit_at(0.0).slope < 0.0 {
            hi = 0.0;
        }
        while hi - lo > 1e-10 {
            let mid = 0.5 * (lo + hi);
            if fit_at(mid).slope < 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let theta = hi;
        let fit = fit_at(theta);
        let h = 1e-4;
        let dslope = (fit_at(theta + h).slope - fit.slope) / h;
        let se = if dslope.abs() > 0.0 {
            fit.slope_std_err / dslope.abs()
        } else {
            f64::INFINITY
        };
        if fit.rms_residual > THETA_RESIDUAL_LIMIT || !fit.rms_residual.is_finite() {
            return Err(Error::IndeterminateTail(format!(
                "fit residual {:.3} exceeds {THETA_RESIDUAL_LIMIT}",
                fit.rms_residual
            )));
        }
        theta_hat = theta_hat.max(theta);
        std_err = std_err.max(se);
        residual = residual.max(fit.rms_residual);
    }
    let margin = 3.0 * std_err;
    let classification = if theta_hat + margin < t_hat {
        Regularity::StronglyRegular
    } else if margin <= THETA_DECISIVE_MARGIN {
        Regularity::CriticallyRegularOrIrregular
    } else {
        Regularity::Indeterminate
    };
    Ok(RegularityReport {
        theta_hat,
        theta_std_err: std_err,
        t_hat,
        margin,
        fit_residual: residual,
        window: window_idx,
        classification,
    })
}
