//! Julia-set pictures: backward orbit clouds and forward escape rasters.

use num_complex::Complex64;
use rand::Rng;
use rand_pcg::Pcg32;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::maps::{MapExpr, RootOptions};
use crate::semigroup::GeneratorSystem;
use crate::sphere::SpherePoint;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PointCloud {
    pub points: Vec<Complex64>,
    pub seed: u64,
    pub burn_in: usize,
    pub system: Vec<String>,
}

/// Portable seeded generator (64-bit state); `stream` separates chains.
pub fn rng(seed: u64, stream: u64) -> Pcg32 {
    Pcg32::new(seed, stream)
}

/// Chaos game on inverse branches: pick a generator uniformly, then one of
/// its preimages with probability proportional to multiplicity.
///
/// `z0` must not be an exceptional point (e.g. ∞ for polynomials); points
/// that land on ∞ restart the chain at `z0` and are not recorded.
pub fn backward_cloud(
    system: &GeneratorSystem,
    z0: SpherePoint,
    count: usize,
    burn_in: usize,
    seed: u64,
    opts: &RootOptions,
) -> Result<PointCloud> {
    let points = chain(system, z0, count, burn_in, &mut rng(seed, 0), opts)?;
    Ok(PointCloud {
        points,
        seed,
        burn_in,
        system: system.labels().to_vec(),
    })
}

/// Several independent chains run concurrently and concatenated in chain
/// order; chain `c` uses stream `c` of the seeded generator.
pub fn backward_cloud_chains(
    system: &GeneratorSystem,
    z0: SpherePoint,
    count: usize,
    burn_in: usize,
    seed: u64,
    chains: usize,
    opts: &RootOptions,
) -> Result<PointCloud> {
    let chains = chains.max(1);
    let parts = (0..chains)
        .into_par_iter()
        .map(|c| {
            let n = count / chains + usize::from(c < count % chains);
            chain(system, z0, n, burn_in, &mut rng(seed, c as u64), opts)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PointCloud {
        points: parts.concat(),
        seed,
        burn_in,
        system: system.labels().to_vec(),
    })
}

fn chain(
    system: &GeneratorSystem,
    z0: SpherePoint,
    count: usize,
    burn_in: usize,
    rng: &mut Pcg32,
    opts: &RootOptions,
) -> Result<Vec<Complex64>> {
    let mut out = Vec::with_capacity(count);
    if count == 0 {
        return Ok(out);
    }
    let max_steps = 100 * (count + burn_in) + 1000;
    let mut z = z0;
    let mut steps_since_restart = 0usize;
    for _ in 0..max_steps {
        let g = &system.generators()[rng.gen_range(0..system.len())];
        let pre = g.inverse_images(z, opts)?;
        let total: u64 = pre.iter().map(|p| p.1).sum();
        let mut pick = rng.gen_range(0..total);
        let mut next = pre[0].0;
        for (y, m) in &pre {
            if pick < *m {
                next = *y;
                break;
            }
            pick -= m;
        }
        match next {
            SpherePoint::Infinity => {
                z = z0;
                steps_since_restart = 0;
            }
            SpherePoint::Finite(w) => {
                z = next;
                steps_since_restart += 1;
                if steps_since_restart > burn_in {
                    out.push(w);
                    if out.len() == count {
                        return Ok(out);
                    }
                }
            }
        }
    }
    Err(Error::CapExceeded {
        what: "backward cloud steps",
        cap: max_steps,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl BBox {
    pub fn new(re_min: f64, re_max: f64, im_min: f64, im_max: f64) -> Result<Self> {
        let b = BBox {
            re_min,
            re_max,
            im_min,
            im_max,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = [self.re_min, self.re_max, self.im_min, self.im_max]
            .iter()
            .all(|v| v.is_finite())
            && self.re_max > self.re_min
            && self.im_max > self.im_min;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("degenerate bounding box {self:?}")))
        }
    }

    /// Square box around the origin containing the disc of radius `r`.
    pub fn centered(r: f64) -> Self {
        BBox {
            re_min: -r,
            re_max: r,
            im_min: -r,
            im_max: r,
        }
    }

    /// Centre of pixel `(col, row)`; row 0 is the top edge.
    pub fn pixel_center(&self, col: usize, row: usize, width: usize, height: usize) -> Complex64 {
        Complex64::new(
            self.re_min + (col as f64 + 0.5) / width as f64 * (self.re_max - self.re_min),
            self.im_max - (row as f64 + 0.5) / height as f64 * (self.im_max - self.im_min),
        )
    }

    pub fn pixel_of(&self, z: Complex64, width: usize, height: usize) -> Option<(usize, usize)> {
        let u = (z.re - self.re_min) / (self.re_max - self.re_min);
        let v = (self.im_max - z.im) / (self.im_max - self.im_min);
        if !(0.0..1.0).contains(&u) || !(0.0..1.0).contains(&v) {
            return None;
        }
        Some(((u * width as f64) as usize, (v * height as f64) as usize))
    }
}

/// 8-bit grayscale raster, row-major from the top-left corner.
#[derive(Clone, Debug, PartialEq)]
pub struct RasterGrid {
    pub bbox: BBox,
    pub width: usize,
    pub height: usize,
    pub values: Vec<u8>,
}

impl RasterGrid {
    pub fn filled(bbox: BBox, width: usize, height: usize, value: u8) -> Result<Self> {
        bbox.validate()?;
        Ok(RasterGrid {
            bbox,
            width,
            height,
            values: vec![value; width * height],
        })
    }
}

/// Hit histogram rendered dark on white; `log_intensity` compresses the
/// dynamic range with `log(1 + hits)`.
pub fn rasterize_cloud(
    cloud: &PointCloud,
    bbox: BBox,
    width: usize,
    height: usize,
    log_intensity: bool,
) -> Result<RasterGrid> {
    bbox.validate()?;
    let mut hits = vec![0u32; width * height];
    for &z in &cloud.points {
        if let Some((c, r)) = bbox.pixel_of(z, width, height) {
            hits[r * width + c] += 1;
        }
    }
    let max = hits.iter().copied().max().unwrap_or(0);
    let scale = |h: u32| -> f64 {
        if max == 0 {
            0.0
        } else if log_intensity {
            (h as f64).ln_1p() / (max as f64).ln_1p()
        } else {
            h as f64 / max as f64
        }
    };
    let values = hits.iter().map(|&h| (255.0 * (1.0 - scale(h))).round() as u8).collect();
    Ok(RasterGrid {
        bbox,
        width,
        height,
        values,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum PixelClass {
    /// Every branch of the forward word tree leaves the escape disc.
    AllEscape,
    /// Some branch stays inside the escape disc up to the depth limit.
    BoundedBranch,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EscapeGrid {
    pub bbox: BBox,
    pub width: usize,
    pub height: usize,
    pub classes: Vec<PixelClass>,
}

pub const GRAY_ESCAPE: u8 = 255;
pub const GRAY_BOUNDED: u8 = 200;
pub const GRAY_FRONTIER: u8 = 0;

impl EscapeGrid {
    pub fn class_at(&self, col: usize, row: usize) -> PixelClass {
        self.classes[row * self.width + col]
    }

    /// Bounded pixels next to an escaping pixel form the dark frontier.
    pub fn to_raster(&self) -> RasterGrid {
        let (w, h) = (self.width, self.height);
        let mut values = vec![GRAY_ESCAPE; w * h];
        for r in 0..h {
            for c in 0..w {
                if self.class_at(c, r) == PixelClass::AllEscape {
                    continue;
                }
                let frontier = [(0i64, 1i64), (0, -1), (1, 0), (-1, 0)].iter().any(|(dc, dr)| {
                    let (cc, rr) = (c as i64 + dc, r as i64 + dr);
                    cc >= 0
                        && rr >= 0
                        && (cc as usize) < w
                        && (rr as usize) < h
                        && self.class_at(cc as usize, rr as usize) == PixelClass::AllEscape
                });
                values[r * w + c] = if frontier { GRAY_FRONTIER } else { GRAY_BOUNDED };
            }
        }
        RasterGrid {
            bbox: self.bbox,
            width: w,
            height: h,
            values,
        }
    }
}

/// Classifies one point by depth-first search over forward words, closing
/// a branch as soon as it leaves the escape disc.
pub fn classify_point(
    generators: &[MapExpr],
    z: Complex64,
    max_depth: usize,
    escape_radius: f64,
    node_cap: usize,
) -> Result<PixelClass> {
    if z.norm() > escape_radius {
        return Ok(PixelClass::AllEscape);
    }
    let mut stack = vec![(z, 0usize)];
    let mut nodes = 0usize;
    while let Some((w, depth)) = stack.pop() {
        if depth == max_depth {
            return Ok(PixelClass::BoundedBranch);
        }
        for g in generators.iter().rev() {
            if let Ok(SpherePoint::Finite(v)) = g.eval(SpherePoint::Finite(w)) {
                if v.norm() <= escape_radius {
                    nodes += 1;
                    if nodes > node_cap {
                        return Err(Error::CapExceeded {
                            what: "surviving branches per pixel",
                            cap: node_cap,
                        });
                    }
                    stack.push((v, depth + 1));
                }
            }
        }
    }
    Ok(PixelClass::AllEscape)
}

pub fn escape_grid(
    system: &GeneratorSystem,
    bbox: BBox,
    width: usize,
    height: usize,
    max_depth: usize,
    escape_radius: f64,
    node_cap: usize,
) -> Result<EscapeGrid> {
    bbox.validate()?;
    if !system.is_polynomial() {
        return Err(Error::InvalidArgument("escape grid needs polynomial generators".into()));
    }
    let classes = (0..width * height)
        .into_par_iter()
        .map(|i| {
            let z = bbox.pixel_center(i % width, i / width, width, height);
            classify_point(system.generators(), z, max_depth, escape_radius, node_cap)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EscapeGrid {
        bbox,
        width,
        height,
        classes,
    })
}

/// Binary PGM: `P5\n<w> <h>\n255\n` followed by the raw bytes.
pub fn encode_pgm(grid: &RasterGrid) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", grid.width, grid.height).into_bytes();
    out.extend_from_slice(&grid.values);
    out
}

pub fn write_pgm(grid: &RasterGrid, path: &Path) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    f.write_all(&encode_pgm(grid))?;
    f.flush()?;
    Ok(())
}

/// 8-bit grayscale PNG, no interlacing.
pub fn write_png(grid: &RasterGrid, path: &Path) -> Result<()> {
    let f = BufWriter::new(File::create(path)?);
    let mut enc = png::Encoder::new(f, grid.width as u32, grid.height as u32);
    enc.set_color(png::ColorType::Grayscale);
    enc.set_depth(png::BitDepth::Eight);
    let mut writer = enc.write_header().map_err(png_err)?;
    writer.write_image_data(&grid.values).map_err(png_err)?;
    writer.finish().map_err(png_err)?;
    Ok(())
}

fn png_err(e: png::EncodingError) -> Error {
    match e {
        png::EncodingError::IoError(io) => Error::Io(io),
        other => Error::Io(std::io::Error::other(other.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn system(coeffs: &[&[f64]]) -> GeneratorSystem {
        GeneratorSystem::new(coeffs.iter().map(|c| MapExpr::poly_real(c).unwrap()).collect()).unwrap()
    }

    #[test]
    fn z_squared_cloud_on_circle() {
        let sys = system(&[&[0.0, 0.0, 1.0]]);
        let cloud = backward_cloud(&sys, SpherePoint::real(2.0), 2000, 20, 7, &RootOptions::default()).unwrap();
        assert_eq!(cloud.points.len(), 2000);
        for z in &cloud.points {
            assert!((z.norm() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn cantor_cloud_in_unit_interval() {
        let sys = system(&[&[0.0, 3.0], &[-2.0, 3.0]]);
        let cloud = backward_cloud(&sys, SpherePoint::real(0.5), 5000, 10, 3, &RootOptions::default()).unwrap();
        for z in &cloud.points {
            assert!(z.re >= -0.01 && z.re <= 1.01 && z.im.abs() < 1e-12);
        }
    }

    #[test]
    fn empty_cloud_and_seeded_determinism() {
        let sys = system(&[&[0.0, 0.0, 1.0], &[0.0, 0.0, 0.0, 0.01]]);
        let opts = RootOptions::default();
        assert!(backward_cloud(&sys, SpherePoint::real(2.0), 0, 5, 1, &opts)
            .unwrap()
            .points
            .is_empty());
        let a = backward_cloud(&sys, SpherePoint::real(2.0), 500, 5, 42, &opts).unwrap();
        let b = backward_cloud(&sys, SpherePoint::real(2.0), 500, 5, 42, &opts).unwrap();
        assert_eq!(a, b);
        let c = backward_cloud(&sys, SpherePoint::real(2.0), 500, 5, 43, &opts).unwrap();
        assert_ne!(a.points, c.points);
        let m1 = backward_cloud_chains(&sys, SpherePoint::real(2.0), 501, 5, 9, 4, &opts).unwrap();
        let m2 = backward_cloud_chains(&sys, SpherePoint::real(2.0), 501, 5, 9, 4, &opts).unwrap();
        assert_eq!(m1.points.len(), 501);
        assert_eq!(m1, m2);
    }

    #[test]
    fn escape_classes() {
        let sys = system(&[&[0.0, 0.0, 1.0], &[0.0, 0.0, 0.0, 0.01]]);
        let r = sys.escape_radius().unwrap();
        let c = classify_point(sys.generators(), Complex64::new(0.0, 0.0), 30, r, 1_000_000).unwrap();
        assert_eq!(c, PixelClass::BoundedBranch);
        let c = classify_point(sys.generators(), Complex64::new(20.0, 0.0), 30, r, 1_000_000).unwrap();
        assert_eq!(c, PixelClass::AllEscape);
        let sq = system(&[&[0.0, 0.0, 1.0]]);
        let z = Complex64::from_polar(1.0, 0.9);
        for depth in [1, 10, 40] {
            assert_eq!(
                classify_point(sq.generators(), z, depth, 2.0, 100).unwrap(),
                PixelClass::BoundedBranch
            );
        }
    }

    #[test]
    fn escape_cap_is_enforced() {
        let sys = system(&[&[0.0, 0.0, 1.0], &[0.0, 0.0, 0.0, 0.01]]);
        // points in the escape disc of both maps but near J survive many branches
        let r = classify_point(sys.generators(), Complex64::new(1.5, 0.0), 40, 200.0, 3);
        assert!(matches!(r, Err(Error::CapExceeded { .. })));
    }

    #[test]
    fn pgm_one_pixel_bytes() {
        let grid = RasterGrid::filled(BBox::centered(1.0), 1, 1, 0).unwrap();
        assert_eq!(encode_pgm(&grid), b"P5\n1 1\n255\n\x00".to_vec());
    }

    #[test]
    fn empty_cloud_renders_white() {
        let cloud = PointCloud {
            points: vec![],
            seed: 0,
            burn_in: 0,
            system: vec![],
        };
        let g = rasterize_cloud(&cloud, BBox::centered(2.0), 8, 4, true).unwrap();
        assert!(g.values.iter().all(|&v| v == 255));
        assert!(BBox::new(0.0, 0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn frontier_is_dark() {
        let sq = system(&[&[0.0, 0.0, 1.0]]);
        let grid = escape_grid(&sq, BBox::centered(1.5), 31, 31, 25, 2.0, 1000).unwrap();
        let img = grid.to_raster();
        assert_eq!(grid.class_at(15, 15), PixelClass::BoundedBranch);
        assert_eq!(img.values[15 * 31 + 15], GRAY_BOUNDED);
        assert_eq!(img.values[0], GRAY_ESCAPE);
        assert!(img.values.contains(&GRAY_FRONTIER));
    }
}
