//! JSON run configuration (`"schema": "semidim/1"`).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use semidim_core::inducing::{InducingConfig, PbOscConfig};
use semidim_core::pressure::EstimatorMode;
use semidim_core::semigroup::{GeneratorSystem, Pruning};
use semidim_core::{MapExpr, Polynomial, SpherePoint};

use crate::CliError;

pub const SCHEMA: &str = "semidim/1";

/// A map in the config. Complex numbers are `[re, im]`, coefficients
/// ascending; `compose` applies `maps[0]` first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum MapSpec {
    Poly { coeffs: Vec<Complex64> },
    Rational { num: Vec<Complex64>, den: Vec<Complex64> },
    Iterate { base: Box<MapSpec>, power: u32 },
    Compose { maps: Vec<MapSpec> },
}

impl MapSpec {
    pub fn to_map(&self) -> semidim_core::Result<MapExpr> {
        match self {
            MapSpec::Poly { coeffs } => MapExpr::poly(coeffs.clone()),
            MapSpec::Rational { num, den } => {
                MapExpr::rational(Polynomial::new(num.clone())?, Polynomial::new(den.clone())?)
            }
            MapSpec::Iterate { base, power } => MapExpr::iterate(base.to_map()?, *power),
            MapSpec::Compose { maps } => MapExpr::compose(maps.iter().map(MapSpec::to_map).collect::<Result<_, _>>()?),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FamilySpec {
    /// `f_k(z) = 3^k (z - o_k)`.
    AffineTriadic,
    /// Induced words over `generators` with the given partition.
    Induced { i1: Vec<usize>, i2: Vec<usize> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExhaustSpec {
    pub sizes: Vec<usize>,
    pub depth: usize,
    /// Exponent at which the pressure column is evaluated.
    pub t: f64,
    pub mode: EstimatorMode,
    pub pruning: Pruning,
}

impl Default for ExhaustSpec {
    fn default() -> Self {
        ExhaustSpec {
            sizes: (1..=12).collect(),
            depth: 10,
            t: 1.0,
            mode: EstimatorMode::Direct,
            pruning: Pruning::none(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum RenderMode {
    Escape,
    Cloud,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderSpec {
    pub mode: RenderMode,
    pub width: usize,
    pub height: usize,
    /// `[re_min, re_max, im_min, im_max]`; fitted to a backward cloud if absent.
    pub bbox: Option<[f64; 4]>,
    pub max_depth: usize,
    pub escape_radius: Option<f64>,
    pub node_cap: usize,
    pub points: usize,
    pub burn_in: usize,
    pub log_intensity: bool,
}

impl Default for RenderSpec {
    fn default() -> Self {
        RenderSpec {
            mode: RenderMode::Escape,
            width: 400,
            height: 400,
            bbox: None,
            max_depth: 30,
            escape_radius: None,
            node_cap: 1_000_000,
            points: 200_000,
            burn_in: 50,
            log_intensity: true,
        }
    }
}

fn default_depths() -> Vec<usize> {
    vec![4, 6, 8]
}

fn default_bracket() -> [f64; 2] {
    [0.0, 2.0]
}

fn default_t_grid() -> Vec<f64> {
    (0..=8).map(|k| k as f64 * 0.25).collect()
}

fn default_sensitivity() -> usize {
    6
}

fn default_seed() -> u64 {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub generators: Vec<MapSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<FamilySpec>,
    #[serde(default)]
    pub base_points: Vec<SpherePoint>,
    #[serde(default = "default_depths")]
    pub depths: Vec<usize>,
    #[serde(default)]
    pub mode: EstimatorMode,
    #[serde(default = "default_bracket")]
    pub bracket: [f64; 2],
    #[serde(default = "default_t_grid")]
    pub t_grid: Vec<f64>,
    #[serde(default)]
    pub pruning: Pruning,
    #[serde(default)]
    pub osc_asserted: bool,
    #[serde(default = "default_sensitivity")]
    pub sensitivity_depth: usize,
    #[serde(default)]
    pub exhaust: ExhaustSpec,
    #[serde(default)]
    pub inducing: InducingConfig,
    #[serde(default)]
    pub pbosc: PbOscConfig,
    #[serde(default)]
    pub render: RenderSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub deterministic: bool,
}

fn schema_err(pointer: &str, message: impl Into<String>) -> CliError {
    CliError::Schema {
        pointer: pointer.to_string(),
        message: message.into(),
    }
}

/// Strict parse of a config document; the error carries a JSON pointer.
pub fn parse_config_str(text: &str) -> Result<RunConfig, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let pointer = json_pointer(e.path());
        schema_err(&pointer, e.into_inner().to_string())
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    parse_config_str(&text)
}

fn json_pointer(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        match seg {
            Segment::Seq { index } => out.push_str(&format!("/{index}")),
            Segment::Map { key } => out.push_str(&format!("/{}", key.replace('~', "~0").replace('/', "~1"))),
            Segment::Enum { variant } => out.push_str(&format!("/{variant}")),
            Segment::Unknown => out.push_str("/?"),
        }
    }
    if out.is_empty() {
        out.push('/');
    }
    out
}

fn strictly_increasing(v: &[usize]) -> bool {
    !v.is_empty() && v.windows(2).all(|w| w[0] < w[1])
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.schema != SCHEMA {
            return Err(schema_err(
                "/schema",
                format!("expected \"{SCHEMA}\", found \"{}\"", self.schema),
            ));
        }
        if !strictly_increasing(&self.depths) || self.depths[0] == 0 {
            return Err(schema_err("/depths", "depths must be positive and strictly increasing"));
        }
        if !(self.bracket[0] < self.bracket[1]) {
            return Err(schema_err("/bracket", "bracket must satisfy lo < hi"));
        }
        if !strictly_increasing(&self.exhaust.sizes) {
            return Err(schema_err("/exhaust/sizes", "sizes must be strictly increasing"));
        }
        for (ptr, p) in [
            ("/pruning", &self.pruning),
            ("/exhaust/pruning", &self.exhaust.pruning),
            ("/inducing/pruning", &self.inducing.pruning),
            ("/inducing/study_pruning", &self.inducing.study_pruning),
        ] {
            p.validate().map_err(|e| schema_err(ptr, e.to_string()))?;
        }
        for (i, g) in self.generators.iter().enumerate() {
            g.to_map()
                .map_err(|e| schema_err(&format!("/generators/{i}"), e.to_string()))?;
        }
        if self.generators.is_empty() && !matches!(self.family, Some(FamilySpec::AffineTriadic)) {
            return Err(schema_err("/generators", "at least one generator is required"));
        }
        if let Some(labels) = &self.labels {
            if labels.len() != self.generators.len() {
                return Err(schema_err("/labels", "one label per generator"));
            }
        }
        Ok(())
    }

    pub fn maps(&self) -> Result<Vec<MapExpr>, CliError> {
        self.generators
            .iter()
            .enumerate()
            .map(|(i, g)| {
                g.to_map()
                    .map_err(|e| schema_err(&format!("/generators/{i}"), e.to_string()))
            })
            .collect()
    }

    pub fn system(&self) -> Result<GeneratorSystem, CliError> {
        let maps = self.maps()?;
        let sys = match &self.labels {
            Some(l) => GeneratorSystem::with_labels(maps, l.clone()),
            None => GeneratorSystem::new(maps),
        };
        sys.map_err(|e| schema_err("/generators", e.to_string()))
    }

    /// The two maps of a pair-based command.
    pub fn pair(&self) -> Result<(MapExpr, MapExpr), CliError> {
        let maps = self.maps()?;
        match <[MapExpr; 2]>::try_from(maps) {
            Ok([f1, f2]) => Ok((f1, f2)),
            Err(m) => Err(schema_err(
                "/generators",
                format!("expected 2 generators, found {}", m.len()),
            )),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_and_map_forms() {
        let cfg = parse_config_str(
            r#"{"schema":"semidim/1","generators":[
                {"type":"poly","coeffs":[[0,0],[0,0],[1,0]]},
                {"type":"compose","maps":[{"type":"poly","coeffs":[[1,0],[1,0]]},{"type":"iterate","base":{"type":"poly","coeffs":[[0,0],[0,0],[1,0]]},"power":3}]}
            ]}"#,
        )
        .unwrap();
        let maps = cfg.maps().unwrap();
        assert_eq!(maps[0], MapExpr::poly_real(&[0.0, 0.0, 1.0]).unwrap());
        // (z + 1)^8 at z = 1
        let v = maps[1].eval(SpherePoint::real(1.0)).unwrap().finite().unwrap();
        assert!((v.re - 256.0).abs() < 1e-9);
        assert_eq!(cfg.depths, vec![4, 6, 8]);
    }

    #[test]
    fn base_points_accept_infinity() {
        let cfg = parse_config_str(
            r#"{"schema":"semidim/1","generators":[{"type":"rational","num":[[1,0]],"den":[[0,0],[0,0],[1,0]]}],"base_points":["inf",[2,-1]]}"#,
        )
        .unwrap();
        assert_eq!(
            cfg.base_points,
            vec![SpherePoint::Infinity, SpherePoint::new(2.0, -1.0)]
        );
        assert!(cfg.to_json().contains("\"inf\""));
    }

    #[test]
    fn schema_errors_carry_pointers() {
        let bad = |text: &str| match parse_config_str(text) {
            Err(CliError::Schema { pointer, .. }) => pointer,
            other => panic!("expected schema error, got {other:?}"),
        };
        assert_eq!(
            bad(r#"{"schema":"semidim/2","generators":[{"type":"poly","coeffs":[[0,0],[1,0]]}]}"#),
            "/schema"
        );
        assert_eq!(
            bad(r#"{"schema":"semidim/1","generators":[{"type":"poly","coeffs":[[0,0],[1,0]],"extra":1}]}"#),
            "/generators/0"
        );
        assert_eq!(
            bad(r#"{"schema":"semidim/1","generators":[{"type":"poly","coeffs":[[0,0],[1,0],[0,0]]}]}"#),
            "/generators/0"
        );
        assert_eq!(
            bad(r#"{"schema":"semidim/1","generators":[{"type":"poly","coeffs":[[0,0],[1,0]]}],"depths":[4,4]}"#),
            "/depths"
        );
        assert_eq!(bad(r#"{"schema":"semidim/1","bogus":true}"#), "/bogus");
        assert_eq!(
            bad(
                r#"{"schema":"semidim/1","generators":[{"type":"poly","coeffs":[[0,0],[1,0]]}],"render":{"width":"wide"}}"#
            ),
            "/render/width"
        );
    }
}
