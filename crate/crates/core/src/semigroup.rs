//! Generator systems, words, and backward orbit trees.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use crate::error::{Error, Result};
use crate::maps::{MapExpr, RootOptions};
use crate::sphere::SpherePoint;

/// Marks a finite system as the truncation of an infinite family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationInfo {
    pub family: String,
    pub parameter: usize,
    /// Position of each generator in the family's enumeration (the index
    /// `k` of `f_k`, or `r` for induced words). Used by the tail fit.
    pub tail_index: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorSystem {
    generators: Vec<MapExpr>,
    labels: Vec<String>,
    truncation_of: Option<TruncationInfo>,
}

impl GeneratorSystem {
    pub fn new(generators: Vec<MapExpr>) -> Result<Self> {
        let labels = (1..=generators.len()).map(|i| format!("f{i}")).collect();
        Self::with_labels(generators, labels)
    }

    pub fn with_labels(generators: Vec<MapExpr>, labels: Vec<String>) -> Result<Self> {
        if generators.is_empty() {
            return Err(Error::InvalidSystem("generator system is empty".into()));
        }
        if labels.len() != generators.len() {
            return Err(Error::InvalidSystem(format!(
                "{} labels for {} generators",
                labels.len(),
                generators.len()
            )));
        }
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(Error::InvalidSystem(format!("duplicate label {l:?}")));
            }
        }
        for g in &generators {
            g.validate()?;
        }
        Ok(GeneratorSystem {
            generators,
            labels,
            truncation_of: None,
        })
    }

    pub fn truncated(mut self, info: TruncationInfo) -> Result<Self> {
        if info.tail_index.len() != self.generators.len() {
            return Err(Error::InvalidSystem("tail index length mismatch".into()));
        }
        self.truncation_of = Some(info);
        Ok(self)
    }

    pub fn generators(&self) -> &[MapExpr] {
        &self.generators
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn truncation_of(&self) -> Option<&TruncationInfo> {
        self.truncation_of.as_ref()
    }

    pub fn len(&self) -> usize {
        self.generators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generators.is_empty()
    }

    pub fn degree_sum(&self) -> u64 {
        self.generators.iter().map(MapExpr::degree).sum()
    }

    pub fn is_polynomial(&self) -> bool {
        self.generators.iter().all(MapExpr::is_polynomial)
    }

    /// Maximum escape radius over the generators, if every generator has one.
    pub fn escape_radius(&self) -> Option<f64> {
        self.generators
            .iter()
            .map(MapExpr::escape_radius)
            .try_fold(1.0_f64, |acc, r| r.map(|r| acc.max(r)))
    }

    /// The map `f_{ω_n} ∘ … ∘ f_{ω_1}` of a word.
    pub fn word_map(&self, word: &Word) -> Result<MapExpr> {
        let parts = word
            .0
            .iter()
            .map(|&i| {
                self.generators
                    .get(i)
                    .cloned()
                    .ok_or_else(|| Error::InvalidArgument(format!("generator index {i} out of range")))
            })
            .collect::<Result<Vec<_>>>()?;
        MapExpr::compose(parts)
    }

    /// Default base point: a repelling fixed point of the first generator,
    /// falling back to a point of its Julia set reached by inverse iteration.
    pub fn default_base_point(&self, opts: &RootOptions) -> Result<SpherePoint> {
        let f = &self.generators[0];
        if let Some(p) = repelling_fixed_point(f, opts) {
            return Ok(p);
        }
        let mut z = SpherePoint::new(0.123, 0.456);
        for _ in 0..200 {
            let pre = f.inverse_images(z, opts)?;
            z = pre
                .into_iter()
                .map(|(p, _)| p)
                .find(|p| !p.is_infinity())
                .ok_or_else(|| Error::InvalidArgument("no finite preimage for base point".into()))?;
        }
        Ok(z)
    }
}

fn repelling_fixed_point(f: &MapExpr, opts: &RootOptions) -> Option<SpherePoint> {
    use crate::poly;
    use num_complex::Complex64;
    let (num, den) = match f {
        MapExpr::Poly(p) => (p.coeffs().to_vec(), vec![Complex64::new(1.0, 0.0)]),
        MapExpr::Rational(r) => (r.numerator().coeffs().to_vec(), r.denominator().coeffs().to_vec()),
        _ => return None,
    };
    // f(z) = z  ⇔  N(z) - z·D(z) = 0
    let eq = poly::trim(
        poly::sub(
            &num,
            &poly::mul(&[Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)], &den),
        ),
        1e-14,
    );
    if eq.len() < 2 {
        return None;
    }
    let mut best: Option<(f64, SpherePoint)> = None;
    for (z, _) in poly::roots_with_multiplicity(&eq, opts.delta_root) {
        let zp = SpherePoint::Finite(z);
        let Ok(l) = f.sph_deriv_norm(zp) else { continue };
        // at a fixed point the spherical and Euclidean multipliers agree
        if l > 1.0 + 1e-9 && best.is_none_or(|(b, _)| l > b) {
            best = Some((l, zp));
        }
    }
    best.map(|(_, p)| p)
}

/// Generator indices `(ω_1, …, ω_n)`; the word's map applies `ω_1` first.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Word(pub Vec<usize>);

impl Word {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// One endpoint of a backward branch.
#[derive(Clone, Debug, PartialEq)]
pub struct BranchLeaf {
    pub point: SpherePoint,
    /// `log ‖f_ω'(point)‖`; `-inf` on critical branches.
    pub log_deriv_sum: f64,
    pub word: Word,
    pub multiplicity: u64,
    pub critical: bool,
}

/// All leaves `y ∈ f_ω⁻¹(x)` with accumulated log derivatives.
pub fn word_inverse_images(
    system: &GeneratorSystem,
    word: &Word,
    x: SpherePoint,
    opts: &RootOptions,
) -> Result<Vec<BranchLeaf>> {
    if word.is_empty() {
        return Err(Error::InvalidArgument("word must be nonempty".into()));
    }
    let map = system.word_map(word)?;
    let mut out = Vec::new();
    map.for_each_preimage(x, opts, &mut |p| {
        out.push(BranchLeaf {
            point: p.point,
            log_deriv_sum: p.log_norm,
            word: word.clone(),
            multiplicity: p.multiplicity,
            critical: p.critical,
        })
    })
    .map_err(|e| e.with_word(&word.0))?;
    Ok(out)
}

/// Bounded-orbit test: `(true, max_iter)` if `|f^k(z)| ≤ escape_radius`
/// for every `k ≤ max_iter`, otherwise `(false, k)` for the first escape.
pub fn forward_orbit_bounded(f: &MapExpr, z: SpherePoint, max_iter: usize, escape_radius: f64) -> (bool, usize) {
    let mut cur = z;
    for k in 0..=max_iter {
        match cur {
            SpherePoint::Infinity => return (false, k),
            SpherePoint::Finite(w) if w.norm() > escape_radius => return (false, k),
            _ => {}
        }
        if k == max_iter {
            break;
        }
        cur = match f.eval(cur) {
            Ok(w) => w,
            Err(_) => return (false, k + 1),
        };
    }
    (true, max_iter)
}

/// t-independent pruning applied after each expansion. `top_k` and
/// `sample_k` are mutually exclusive.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Pruning {
    /// Drop leaves with `S > s_max`.
    pub s_max: Option<f64>,
    /// Keep only the `top_k` leaves of smallest `S`.
    pub top_k: Option<usize>,
    /// Keep `sample_k` leaves by priority sampling with sizes
    /// `mult · e^{-sample_t · S}`; kept leaves carry inverse inclusion
    /// weights, so every `Z_n(t)` remains an unbiased estimate.
    pub sample_k: Option<usize>,
    pub sample_t: f64,
    pub seed: u64,
}

impl Default for Pruning {
    fn default() -> Self {
        Pruning {
            s_max: None,
            top_k: None,
            sample_k: None,
            sample_t: 2.0,
            seed: 0,
        }
    }
}

impl Pruning {
    pub fn none() -> Self {
        Pruning::default()
    }

    pub fn threshold(s_max: f64) -> Self {
        Pruning {
            s_max: Some(s_max),
            ..Pruning::default()
        }
    }

    pub fn top_k(k: usize) -> Self {
        Pruning {
            top_k: Some(k),
            ..Pruning::default()
        }
    }

    pub fn sampled(k: usize, sample_t: f64, seed: u64) -> Self {
        Pruning {
            sample_k: Some(k),
            sample_t,
            seed,
            ..Pruning::default()
        }
    }

    pub fn is_active(&self) -> bool {
        self.s_max.is_some() || self.top_k.is_some() || self.sample_k.is_some()
    }

    pub fn validate(&self) -> Result<()> {
        if self.top_k.is_some() && self.sample_k.is_some() {
            return Err(Error::InvalidArgument(
                "top_k and sample_k are mutually exclusive".into(),
            ));
        }
        if !self.sample_t.is_finite() || self.s_max.is_some_and(f64::is_nan) {
            return Err(Error::InvalidArgument("pruning parameters must be finite".into()));
        }
        Ok(())
    }

    fn capacity(&self) -> Option<usize> {
        self.top_k.or(self.sample_k.map(|k| k + 1))
    }
}

/// What pruning discarded at one level.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PruneRecord {
    pub dropped_leaves: u64,
    /// Multiplicity of dropped leaves, including sampling weights.
    pub dropped_multiplicity: f64,
    /// Smallest `S` among dropped leaves (`+inf` if nothing was dropped).
    pub min_dropped_s: f64,
}

impl Default for PruneRecord {
    fn default() -> Self {
        Self::empty()
    }
}

impl PruneRecord {
    fn empty() -> Self {
        PruneRecord {
            dropped_leaves: 0,
            dropped_multiplicity: 0.0,
            min_dropped_s: f64::INFINITY,
        }
    }

    /// Upper bound on the partition-function mass removed at this level,
    /// `Σ mult · e^{-tS} ≤ dropped_multiplicity · e^{-t·min_dropped_s}` for `t ≥ 0`.
    pub fn mass_bound(&self, t: f64) -> f64 {
        if self.dropped_multiplicity == 0.0 {
            0.0
        } else {
            self.dropped_multiplicity * (-t * self.min_dropped_s).exp()
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TreeOptions {
    pub roots: RootOptions,
    pub pruning: Pruning,
}

/// Compact leaf storage; the word is recovered through parent links.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TreeLeaf {
    pub point: SpherePoint,
    pub log_deriv_sum: f64,
    pub multiplicity: u64,
    /// Log of the inverse inclusion weight from sampled pruning (0 otherwise).
    pub log_weight: f64,
    /// Part of `log_weight` added when this leaf was selected at its own level.
    pub log_gain: f64,
    pub critical: bool,
    parent: u32,
    generator: u32,
}

impl TreeLeaf {
    pub fn parent(&self) -> usize {
        self.parent as usize
    }

    pub fn generator(&self) -> usize {
        self.generator as usize
    }
}

/// Backward orbit tree: level `n` holds every `y ∈ f_ω⁻¹(x)`, `ω ∈ Iⁿ`.
#[derive(Clone, Debug)]
pub struct BackwardTree {
    root: SpherePoint,
    levels: Vec<Vec<TreeLeaf>>,
    prune_log: Vec<PruneRecord>,
    dropped: Vec<Vec<(f64, f64)>>,
    options: TreeOptions,
}

/// Sort key making top-K selection independent of evaluation order.
#[derive(Clone, Copy, Debug)]
struct Candidate {
    leaf: TreeLeaf,
    local: u32,
    /// Selection key, smaller is better: `S` for top-K, minus the log
    /// priority for sampling.
    key: f64,
}

impl Candidate {
    fn log_size(&self, t: f64) -> f64 {
        (self.leaf.multiplicity as f64).ln() + self.leaf.log_weight - t * self.leaf.log_deriv_sum
    }

    fn key_cmp(&self, other: &Self) -> Ordering {
        self.key
            .total_cmp(&other.key)
            .then(self.leaf.parent.cmp(&other.leaf.parent))
            .then(self.leaf.generator.cmp(&other.leaf.generator))
            .then(self.local.cmp(&other.local))
    }

    fn order_cmp(&self, other: &Self) -> Ordering {
        self.leaf
            .parent
            .cmp(&other.leaf.parent)
            .then(self.leaf.generator.cmp(&other.leaf.generator))
            .then(self.local.cmp(&other.local))
    }
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.key_cmp(other) == Ordering::Equal
    }
}
impl Eq for Candidate {}
impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key_cmp(other)
    }
}

const PARENT_CHUNK: usize = 64;

impl BackwardTree {
    pub fn new(root: SpherePoint, options: TreeOptions) -> Self {
        let leaf = TreeLeaf {
            point: root,
            log_deriv_sum: 0.0,
            multiplicity: 1,
            log_weight: 0.0,
            log_gain: 0.0,
            critical: false,
            parent: 0,
            generator: 0,
        };
        BackwardTree {
            root,
            levels: vec![vec![leaf]],
            prune_log: vec![PruneRecord::empty()],
            dropped: vec![Vec::new()],
            options,
        }
    }

    /// Builds a tree with `depth` expanded levels.
    pub fn build(system: &GeneratorSystem, root: SpherePoint, depth: usize, options: TreeOptions) -> Result<Self> {
        let mut tree = Self::new(root, options);
        for _ in 0..depth {
            tree.expand_level(system)?;
        }
        Ok(tree)
    }

    pub fn root(&self) -> SpherePoint {
        self.root
    }

    pub fn options(&self) -> &TreeOptions {
        &self.options
    }

    /// Number of expanded levels (level 0, the root, not counted).
    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn level(&self, n: usize) -> Result<&[TreeLeaf]> {
        self.levels.get(n).map(Vec::as_slice).ok_or(Error::DepthUnavailable {
            requested: n,
            available: self.depth(),
        })
    }

    pub fn prune_record(&self, n: usize) -> Option<&PruneRecord> {
        self.prune_log.get(n)
    }

    pub fn prune_log(&self) -> &[PruneRecord] {
        &self.prune_log
    }

    /// Leaves pruned at level `n`, binned by `S` (bin width
    /// `DROPPED_BIN_WIDTH`) as `(mean S, total multiplicity)` pairs.
    pub fn dropped_mass(&self, n: usize) -> Result<&[(f64, f64)]> {
        self.dropped.get(n).map(Vec::as_slice).ok_or(Error::DepthUnavailable {
            requested: n,
            available: self.depth(),
        })
    }

    pub fn has_critical(&self, n: usize) -> Result<bool> {
        Ok(self.level(n)?.iter().any(|l| l.critical))
    }

    /// Word of the leaf at `(n, index)`, in application order.
    pub fn word_of(&self, n: usize, index: usize) -> Result<Word> {
        let mut w = Vec::with_capacity(n);
        let mut idx = index;
        for lvl in (1..=n).rev() {
            let leaf = self.level(lvl)?[idx];
            w.push(leaf.generator());
            idx = leaf.parent();
        }
        // walking up from the deepest level yields ω_1 first
        Ok(Word(w))
    }

    pub fn branch_leaf(&self, n: usize, index: usize) -> Result<BranchLeaf> {
        let leaf = self.level(n)?[index];
        Ok(BranchLeaf {
            point: leaf.point,
            log_deriv_sum: leaf.log_deriv_sum,
            word: self.word_of(n, index)?,
            multiplicity: leaf.multiplicity,
            critical: leaf.critical,
        })
    }

    /// Appends one level: every generator's preimages of every current leaf.
    pub fn expand_level(&mut self, system: &GeneratorSystem) -> Result<()> {
        let parents = self.levels.last().expect("root level exists");
        let opts = self.options.roots;
        let pruning = self.options.pruning;
        pruning.validate()?;
        let level_salt = splitmix64(pruning.seed ^ (self.levels.len() as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));

        let chunks: Vec<(Vec<Candidate>, Drops)> = parents
            .par_chunks(PARENT_CHUNK)
            .enumerate()
            .map(|(ci, chunk)| {
                let mut record = Drops::default();
                let mut kept: Vec<Candidate> = Vec::new();
                let mut heap: BinaryHeap<Candidate> = BinaryHeap::new();
                for (off, parent) in chunk.iter().enumerate() {
                    let pidx = (ci * PARENT_CHUNK + off) as u32;
                    for (g, gen) in system.generators().iter().enumerate() {
                        let mut local = 0u32;
                        let mut sink = |p: crate::maps::Preimage| {
                            let critical = parent.critical || p.critical;
                            let s = if critical {
                                f64::NEG_INFINITY
                            } else {
                                parent.log_deriv_sum + p.log_norm
                            };
                            let mut cand = Candidate {
                                leaf: TreeLeaf {
                                    point: p.point,
                                    log_deriv_sum: s,
                                    multiplicity: parent.multiplicity * p.multiplicity,
                                    log_weight: parent.log_weight,
                                    log_gain: 0.0,
                                    critical,
                                    parent: pidx,
                                    generator: g as u32,
                                },
                                local,
                                key: s,
                            };
                            if pruning.sample_k.is_some() {
                                let h = splitmix64(
                                    level_salt ^ splitmix64(((pidx as u64) << 32) ^ ((g as u64) << 16) ^ local as u64),
                                );
                                // uniform on (0, 1]
                                let u = ((h >> 11) + 1) as f64 / (1u64 << 53) as f64;
                                cand.key = u.ln() - cand.log_size(pruning.sample_t);
                            }
                            local += 1;
                            admit(cand, &pruning, &mut kept, &mut heap, &mut record);
                        };
                        gen.for_each_preimage(parent.point, &opts, &mut sink)
                            .map_err(|e| e.with_word(&[g]))?;
                    }
                }
                kept.extend(heap.into_vec());
                Ok((kept, record))
            })
            .collect::<Result<Vec<_>>>()?;

        let mut record = Drops::default();
        let mut all: Vec<Candidate> = Vec::new();
        for (cands, rec) in chunks {
            record.merge(rec);
            all.extend(cands);
        }
        if let Some(k) = pruning.top_k.or(pruning.sample_k) {
            let (crit, mut rest): (Vec<Candidate>, Vec<Candidate>) = all.into_iter().partition(|c| c.leaf.critical);
            if rest.len() > k {
                rest.select_nth_unstable(k);
                for c in &rest[k..] {
                    record.add(c);
                }
                if pruning.sample_k.is_some() {
                    // priority threshold: the largest priority not kept
                    let tau = -rest[k].key;
                    for c in &mut rest[..k] {
                        let gap = tau - c.log_size(pruning.sample_t);
                        if gap > 0.0 {
                            c.leaf.log_weight += gap;
                            c.leaf.log_gain = gap;
                        }
                    }
                }
                rest.truncate(k);
            }
            all = crit;
            all.extend(rest);
        }
        all.sort_by(Candidate::order_cmp);
        if all.len() > u32::MAX as usize {
            return Err(Error::CapExceeded {
                what: "leaves per level",
                cap: u32::MAX as usize,
            });
        }
        self.levels.push(all.into_iter().map(|c| c.leaf).collect());
        self.prune_log.push(record.record);
        self.dropped
            .push(record.bins.into_values().map(|(m, ms)| (ms / m, m)).collect());
        Ok(())
    }
}

pub const DROPPED_BIN_WIDTH: f64 = 1e-3;

#[derive(Default)]
struct Drops {
    record: PruneRecord,
    /// bin index -> (multiplicity, Σ multiplicity·S)
    bins: BTreeMap<i64, (f64, f64)>,
}

impl Drops {
    fn add(&mut self, c: &Candidate) {
        let r = &mut self.record;
        r.dropped_leaves += 1;
        let m = c.leaf.multiplicity as f64 * c.leaf.log_weight.exp();
        r.dropped_multiplicity += m;
        r.min_dropped_s = r.min_dropped_s.min(c.leaf.log_deriv_sum);
        let s = c.leaf.log_deriv_sum;
        let e = self
            .bins
            .entry((s / DROPPED_BIN_WIDTH).floor() as i64)
            .or_insert((0.0, 0.0));
        e.0 += m;
        e.1 += m * s;
    }

    fn merge(&mut self, other: Drops) {
        let r = &mut self.record;
        r.dropped_leaves += other.record.dropped_leaves;
        r.dropped_multiplicity += other.record.dropped_multiplicity;
        r.min_dropped_s = r.min_dropped_s.min(other.record.min_dropped_s);
        for (k, (m, ms)) in other.bins {
            let e = self.bins.entry(k).or_insert((0.0, 0.0));
            e.0 += m;
            e.1 += ms;
        }
    }
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn admit(
    cand: Candidate,
    pruning: &Pruning,
    kept: &mut Vec<Candidate>,
    heap: &mut BinaryHeap<Candidate>,
    record: &mut Drops,
) {
    // critical leaves are never dropped
    if cand.leaf.critical {
        kept.push(cand);
        return;
    }
    if let Some(s_max) = pruning.s_max {
        if cand.leaf.log_deriv_sum > s_max {
            record.add(&cand);
            return;
        }
    }
    match pruning.capacity() {
        None => kept.push(cand),
        Some(k) => {
            heap.push(cand);
            if heap.len() > k {
                let worst = heap.pop().expect("nonempty heap");
                record.add(&worst);
            }
        }
    }
}
