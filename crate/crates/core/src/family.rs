//! Infinite generator families and their finite truncations.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::maps::MapExpr;
use crate::semigroup::{GeneratorSystem, TruncationInfo};

/// An infinitely generated system, enumerated so that every truncation is
/// a prefix of the next one.
#[derive(Clone, Debug)]
pub enum Family {
    /// `f_k(z) = 3^k (z - o_k)` with `o_k = Σ_{1≤j<k} 3^{-j}`, `k ≥ 1`.
    /// The inverse branches map `[0, 1]` onto disjoint intervals of
    /// length `3^{-k}`.
    AffineTriadic,
    /// Induced words `f_i f_{j_1} … f_{j_r}` with `i ∈ I₂`, `j ∈ I₁`,
    /// truncated at word length `r ≤ size`.
    Induced {
        base: GeneratorSystem,
        i1: Vec<usize>,
        i2: Vec<usize>,
    },
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::AffineTriadic => "affine-triadic",
            Family::Induced { .. } => "induced",
        }
    }

    /// Finite subsystem of the given size (`K` generators, or `r ≤ r_max`).
    pub fn truncate(&self, size: usize) -> Result<GeneratorSystem> {
        match self {
            Family::AffineTriadic => affine_triadic(size),
            Family::Induced { base, i1, i2 } => induced_words(base, i1, i2, size, usize::MAX),
        }
    }
}

fn affine_triadic(k_max: usize) -> Result<GeneratorSystem> {
    if k_max == 0 {
        return Err(Error::InvalidArgument("truncation size must be ≥ 1".into()));
    }
    let mut gens = Vec::with_capacity(k_max);
    let mut labels = Vec::with_capacity(k_max);
    let mut offset = 0.0;
    for k in 1..=k_max {
        let scale = 3f64.powi(k as i32);
        // 3^k (z - o_k) = -3^k o_k + 3^k z
        gens.push(MapExpr::poly(vec![
            Complex64::new(-scale * offset, 0.0),
            Complex64::new(scale, 0.0),
        ])?);
        labels.push(format!("f{k}"));
        offset += 3f64.powi(-(k as i32));
    }
    GeneratorSystem::with_labels(gens, labels)?.truncated(TruncationInfo {
        family: "affine-triadic".into(),
        parameter: k_max,
        tail_index: (1..=k_max).collect(),
    })
}

/// Enumerates `{f_i : i∈I₂} ∪ {f_i f_{j_1}…f_{j_r} : 1 ≤ r ≤ r_max}` ordered by
/// `r`, then `i`, then the `j` word lexicographically.
pub(crate) fn induced_words(
    base: &GeneratorSystem,
    i1: &[usize],
    i2: &[usize],
    r_max: usize,
    cap: usize,
) -> Result<GeneratorSystem> {
    check_partition(base.len(), i1, i2)?;
    let count = induced_count(i1.len(), i2.len(), r_max);
    if count > cap {
        return Err(Error::CapExceeded {
            what: "induced generator count",
            cap,
        });
    }
    let g = base.generators();
    let names = base.labels();
    let mut gens = Vec::new();
    let mut labels = Vec::new();
    let mut tail = Vec::new();
    for r in 0..=r_max {
        for &i in i2 {
            for js in words_over(i1, r) {
                labels.push(induced_label(names, i, &js));
                tail.push(r);
                if js.is_empty() {
                    gens.push(g[i].clone());
                    continue;
                }
                // f_i ∘ f_{j_1} ∘ … ∘ f_{j_r}: f_{j_r} is applied first
                let mut parts: Vec<MapExpr> = Vec::new();
                if i1.len() == 1 {
                    parts.push(if r == 1 {
                        g[js[0]].clone()
                    } else {
                        MapExpr::iterate(g[js[0]].clone(), r as u32)?
                    });
                } else {
                    parts.extend(js.iter().rev().map(|&j| g[j].clone()));
                }
                parts.push(g[i].clone());
                gens.push(MapExpr::compose(parts)?);
            }
        }
    }
    GeneratorSystem::with_labels(gens, labels)?.truncated(TruncationInfo {
        family: "induced".into(),
        parameter: r_max,
        tail_index: tail,
    })
}

pub(crate) fn check_partition(n: usize, i1: &[usize], i2: &[usize]) -> Result<()> {
    if i2.is_empty() {
        return Err(Error::PartitionError("I₂ must be nonempty".into()));
    }
    let mut seen = vec![false; n];
    for &i in i1.iter().chain(i2) {
        if i >= n {
            return Err(Error::PartitionError(format!("index {i} out of range")));
        }
        if seen[i] {
            return Err(Error::PartitionError(format!("index {i} listed twice")));
        }
        seen[i] = true;
    }
    if seen.iter().any(|s| !s) {
        return Err(Error::PartitionError("I₁ ∪ I₂ must cover every generator".into()));
    }
    Ok(())
}

pub(crate) fn induced_count(n1: usize, n2: usize, r_max: usize) -> usize {
    let mut total: usize = 0;
    let mut pow: usize = 1;
    for _ in 0..=r_max {
        total = total.saturating_add(pow);
        pow = pow.saturating_mul(n1);
    }
    total.saturating_mul(n2)
}

fn words_over(alphabet: &[usize], r: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..r {
        out = out
            .into_iter()
            .flat_map(|w| {
                alphabet.iter().map(move |&a| {
                    let mut v = w.clone();
                    v.push(a);
                    v
                })
            })
            .collect();
    }
    out
}

fn induced_label(names: &[String], i: usize, js: &[usize]) -> String {
    let mut s = names[i].clone();
    let mut k = 0;
    while k < js.len() {
        let mut run = 1;
        while k + run < js.len() && js[k + run] == js[k] {
            run += 1;
        }
        if run == 1 {
            s.push_str(&format!("·{}", names[js[k]]));
        } else {
            s.push_str(&format!("·{}^{}", names[js[k]], run));
        }
        k += run;
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::SpherePoint;

    #[test]
    fn affine_triadic_intervals_are_disjoint() {
        let sys = Family::AffineTriadic.truncate(5).unwrap();
        let opts = crate::RootOptions::default();
        let mut prev_hi = -1.0;
        for g in sys.generators() {
            let lo = g.inverse_images(SpherePoint::real(0.0), &opts).unwrap()[0]
                .0
                .finite()
                .unwrap()
                .re;
            let hi = g.inverse_images(SpherePoint::real(1.0), &opts).unwrap()[0]
                .0
                .finite()
                .unwrap()
                .re;
            assert!(lo >= prev_hi - 1e-15 && hi > lo && hi <= 1.0);
            prev_hi = hi;
        }
        assert_eq!(sys.truncation_of().unwrap().tail_index, vec![1, 2, 3, 4, 5]);
    }

    #[test]
    fn induced_count_matches_enumeration() {
        assert_eq!(induced_count(1, 1, 3), 4);
        assert_eq!(induced_count(2, 1, 2), 7);
        let gens = vec![
            MapExpr::poly_real(&[0.0, 0.0, 1.0]).unwrap(),
            MapExpr::poly_real(&[0.0, 0.0, 0.0, 0.01]).unwrap(),
        ];
        let base = GeneratorSystem::new(gens).unwrap();
        let sys = induced_words(&base, &[0], &[1], 3, usize::MAX).unwrap();
        assert_eq!(sys.labels(), &["f2", "f2·f1", "f2·f1^2", "f2·f1^3"]);
    }

    #[test]
    fn partition_checks() {
        assert!(matches!(
            check_partition(2, &[0, 1], &[]),
            Err(Error::PartitionError(_))
        ));
        assert!(matches!(check_partition(2, &[0], &[0]), Err(Error::PartitionError(_))));
        assert!(matches!(check_partition(3, &[0], &[1]), Err(Error::PartitionError(_))));
        assert!(check_partition(3, &[0, 2], &[1]).is_ok());
    }
}
