//! TOML run configuration for the command-line tool.
//!
//! ```toml
//! [region]                    # exactly one of builtin / geojson / constraints
//! builtin = "torus"           # crescent | disk | ball | annulus | torus
//! major = 2.0                 # torus; also radius, dim, inner, outer
//! # geojson = "canada.geojson"            (relative to this file)
//! # constraints = ["x1^2 + x2^2 <= 1"]    (needs lower and upper)
//! # lower = [-1.0, -1.0]
//! # upper = [1.0, 1.0]
//!
//! [scmc]                      # any ScmcConfig field
//! n_particles = 10000
//! seed = 1
//!
//! [design]                    # optional
//! criterion = "cmm"           # cmm | ard | maxpro | fff | geodesic
//! size = 20
//! # seed, first, weights, ard_order
//! [design.fff]
//! summary = "centroid"        # centroid | medoid_maxpro
//! max_candidates = 30000
//! [design.geodesic]
//! k = 10
//! export_graph = false
//!
//! [output]
//! directory = "out"
//! formats = ["csv", "json"]
//! plot = true
//! ```

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Deserialize;

use crate::design::FffSummary;
use crate::dsl::parse_constraint;
use crate::error::{Error, Result};
use crate::geodesic::DEFAULT_K;
use crate::polygon::PolygonSet;
use crate::region::{builtin_region, polygon_region, BoundingBox, Builtin, Region};
use crate::scmc::ScmcConfig;

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionSpec {
    pub builtin: Option<String>,
    pub radius: Option<f64>,
    pub dim: Option<usize>,
    pub inner: Option<f64>,
    pub outer: Option<f64>,
    pub major: Option<f64>,
    pub minor: Option<f64>,
    pub geojson: Option<PathBuf>,
    pub constraints: Option<Vec<String>>,
    pub lower: Option<Vec<f64>>,
    pub upper: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CriterionName {
    Cmm,
    Ard,
    Maxpro,
    Fff,
    Geodesic,
}

impl CriterionName {
    pub fn as_str(self) -> &'static str {
        match self {
            CriterionName::Cmm => "cmm",
            CriterionName::Ard => "ard",
            CriterionName::Maxpro => "maxpro",
            CriterionName::Fff => "fff",
            CriterionName::Geodesic => "geodesic",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FffSpec {
    pub summary: FffSummary,
    /// Candidates are subsampled to this many rows before clustering.
    pub max_candidates: usize,
}

impl Default for FffSpec {
    fn default() -> Self {
        FffSpec {
            summary: FffSummary::Centroid,
            max_candidates: 30_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeodesicSpec {
    pub k: usize,
    pub export_graph: bool,
}

impl Default for GeodesicSpec {
    fn default() -> Self {
        GeodesicSpec {
            k: DEFAULT_K,
            export_graph: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignSpec {
    pub criterion: CriterionName,
    pub size: usize,
    /// Defaults to the sampler seed.
    pub seed: Option<u64>,
    /// Sample row of the first point; drawn from the seed when absent.
    pub first: Option<usize>,
    /// Distance weights ω for `cmm`.
    pub weights: Option<Vec<f64>>,
    #[serde(default = "default_ard_order")]
    pub ard_order: u32,
    #[serde(default)]
    pub fff: FffSpec,
    #[serde(default)]
    pub geodesic: GeodesicSpec,
}

fn default_ard_order() -> u32 {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub directory: PathBuf,
    pub formats: Vec<Format>,
    pub plot: bool,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec {
            directory: PathBuf::from("out"),
            formats: vec![Format::Csv, Format::Json],
            plot: true,
        }
    }
}

impl OutputSpec {
    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub region: RegionSpec,
    #[serde(default)]
    pub scmc: ScmcConfig,
    pub design: Option<DesignSpec>,
    #[serde(default)]
    pub output: OutputSpec,
    /// Directory relative paths in the file are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// 1-based line and column of a byte offset.
fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, col)
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}:{msg}", path.display())),
            other => other,
        })?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    /// Parses and validates configuration text. Errors carry `line:column`.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| {
            let pos = e.span().map(|s| line_col(text, s.start)).unwrap_or((1, 1));
            Error::Config(format!("{}:{}: {}", pos.0, pos.1, e.message()))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let r = &self.region;
        let sources = [
            r.builtin.is_some(),
            r.geojson.is_some(),
            r.constraints.is_some(),
        ];
        if sources.iter().filter(|s| **s).count() != 1 {
            return Err(Error::Config(
                "region: specify exactly one of `builtin`, `geojson`, `constraints`".into(),
            ));
        }
        let shape_params = [r.radius, r.inner, r.outer, r.major, r.minor];
        if r.builtin.is_none() && (shape_params.iter().any(Option::is_some) || r.dim.is_some()) {
            return Err(Error::Config(
                "region: radius/dim/inner/outer/major/minor apply only to `builtin`".into(),
            ));
        }
        if r.builtin.is_some() && (r.lower.is_some() || r.upper.is_some()) {
            return Err(Error::Config(
                "region: builtin regions have a fixed bounding box; remove lower/upper".into(),
            ));
        }
        if r.constraints.is_some() && (r.lower.is_none() || r.upper.is_none()) {
            return Err(Error::Config(
                "region: `constraints` needs `lower` and `upper`".into(),
            ));
        }
        if r.lower.is_some() != r.upper.is_some() {
            return Err(Error::Config(
                "region: give both `lower` and `upper`".into(),
            ));
        }
        self.scmc
            .validate()
            .map_err(|e| Error::Config(format!("scmc: {e}")))?;
        if let Some(d) = &self.design {
            if d.size == 0 {
                return Err(Error::Config("design: size must be >= 1".into()));
            }
            if d.weights.is_some() && d.criterion != CriterionName::Cmm {
                return Err(Error::Config(format!(
                    "design: weights apply only to criterion \"cmm\", not \"{}\"",
                    d.criterion.as_str()
                )));
            }
            if d.ard_order == 0 {
                return Err(Error::Config("design: ard_order must be >= 1".into()));
            }
            if d.fff.max_candidates < d.size {
                return Err(Error::Config(
                    "design.fff: max_candidates must be >= size".into(),
                ));
            }
            if d.geodesic.k == 0 {
                return Err(Error::Config("design.geodesic: k must be >= 1".into()));
            }
        }
        Ok(())
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Polygon rings for plotting, when the region is polygon based.
    pub fn polygon_set(&self) -> Result<Option<Arc<PolygonSet>>> {
        match &self.region.geojson {
            Some(p) => Ok(Some(Arc::new(PolygonSet::from_geojson_path(
                self.resolve(p),
            )?))),
            None => Ok(None),
        }
    }

    pub fn build_region(&self) -> Result<Region> {
        let r = &self.region;
        let bbox = match (&r.lower, &r.upper) {
            (Some(lo), Some(hi)) => Some(
                BoundingBox::new(lo.clone(), hi.clone())
                    .map_err(|e| Error::Config(format!("region: {e}")))?,
            ),
            _ => None,
        };
        if let Some(name) = &r.builtin {
            return builtin_region(&self.builtin(name)?);
        }
        if let Some(path) = &r.geojson {
            let set = PolygonSet::from_geojson_path(self.resolve(path))?;
            return polygon_region(Arc::new(set), bbox);
        }
        let bbox = bbox.expect("validated");
        let dim = bbox.dim();
        let mut exprs = Vec::new();
        for (i, text) in r
            .constraints
            .as_deref()
            .unwrap_or_default()
            .iter()
            .enumerate()
        {
            let c = parse_constraint(text, dim)
                .map_err(|e| Error::Config(format!("region.constraints[{i}]: {e}")))?;
            exprs.push(c);
        }
        Region::from_exprs(bbox, exprs)
    }

    fn builtin(&self, name: &str) -> Result<Builtin> {
        let r = &self.region;
        let allow = |ok: &[&str]| -> Result<()> {
            let given = [
                ("radius", r.radius.is_some()),
                ("dim", r.dim.is_some()),
                ("inner", r.inner.is_some()),
                ("outer", r.outer.is_some()),
                ("major", r.major.is_some()),
                ("minor", r.minor.is_some()),
            ];
            for (key, set) in given {
                if set && !ok.contains(&key) {
                    return Err(Error::Config(format!(
                        "region: `{key}` does not apply to builtin \"{name}\""
                    )));
                }
            }
            Ok(())
        };
        let b = match name {
            "crescent" => {
                allow(&[])?;
                Builtin::Crescent
            }
            "disk" => {
                allow(&["radius"])?;
                Builtin::Ball {
                    radius: r.radius.unwrap_or(1.0),
                    dim: 2,
                }
            }
            "ball" => {
                allow(&["radius", "dim"])?;
                Builtin::Ball {
                    radius: r.radius.unwrap_or(1.0),
                    dim: r.dim.unwrap_or(3),
                }
            }
            "annulus" => {
                allow(&["inner", "outer"])?;
                Builtin::Annulus {
                    inner: r.inner.unwrap_or(0.5),
                    outer: r.outer.unwrap_or(1.0),
                }
            }
            "torus" => {
                allow(&["major", "minor"])?;
                Builtin::Torus {
                    major: r.major.unwrap_or(2.0),
                    minor: r.minor.unwrap_or(1.0),
                }
            }
            other => {
                return Err(Error::Config(format!(
                    "region: unknown builtin \"{other}\" (expected crescent, disk, ball, annulus or torus)"
                )))
            }
        };
        Ok(b)
    }
}
