//! JSON run configuration of the command-line tool.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::diagnostics::DiagnosticsConfig;
use crate::entropic::{PointCloud, TargetGrid, TargetMode};
use crate::error::{Error, Result};
use crate::measures::{builtin_density, Density};
use crate::quantile::{Backend, EntropicParams, SemidiscreteParams, DEFAULT_VERTICES};

/// Target law: a builtin family with parameters, or a weighted sample in CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensitySpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<String>,
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub params: Value,
    /// `y1,y2[,y3][,weight]` rows; relative paths are resolved against the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    /// Dimension of the CSV points.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContourConfig {
    pub radii: Vec<f64>,
    pub vertices: usize,
    /// Radii of the shrinking contours used to estimate `K`, decreasing.
    pub k_radii: Vec<f64>,
    /// Nested vertices may stray outside by `slack_factor * sqrt(eps)`.
    pub slack_factor: f64,
}

impl Default for ContourConfig {
    fn default() -> Self {
        Self {
            radii: vec![0.2, 0.4, 0.6, 0.8],
            vertices: DEFAULT_VERTICES,
            k_radii: vec![0.4, 0.2, 0.1, 0.05],
            slack_factor: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    pub radii: Vec<f64>,
    /// Directions probed per radius.
    pub directions: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            radii: (0..17).map(|i| 0.1 + 0.05 * i as f64).collect(),
            directions: 256,
        }
    }
}

/// Complete run configuration; every optional section has defaults, which are
/// materialized into the copy written next to the artifacts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub density: DensitySpec,
    #[serde(default = "default_backend")]
    pub backend: Backend,
    #[serde(default)]
    pub semidiscrete: SemidiscreteParams,
    #[serde(default)]
    pub entropic: EntropicParams,
    #[serde(default)]
    pub contours: ContourConfig,
    #[serde(default)]
    pub oracle: OracleConfig,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
}

fn default_backend() -> Backend {
    Backend::Entropic
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

/// Resolved target law.
#[derive(Debug, Clone)]
pub enum Target {
    Density(Density),
    Sample {
        dim: usize,
        points: Vec<Vec<f64>>,
        weights: Vec<f64>,
    },
}

impl Target {
    pub fn dim(&self) -> usize {
        match self {
            Target::Density(d) => d.dim(),
            Target::Sample { dim, .. } => *dim,
        }
    }
}

/// First line of `raw` mentioning `"key"`, for anchoring validation errors.
fn key_line(raw: &str, key: &str) -> Option<usize> {
    let quoted = format!("\"{key}\"");
    raw.lines().position(|l| l.contains(&quoted)).map(|i| i + 1)
}

impl RunConfig {
    /// Parses and validates; errors carry `path:line` anchors.
    pub fn load(path: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::parse(&raw, &path.display().to_string())?;
        if let Some(csv) = &cfg.density.csv {
            if csv.is_relative() {
                let base = path.parent().unwrap_or(Path::new("."));
                cfg.density.csv = Some(base.join(csv));
            }
        }
        Ok(cfg)
    }

    pub fn parse(raw: &str, origin: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(raw)
            .map_err(|e| Error::Config(format!("{origin}:{}:{}: {e}", e.line(), e.column())))?;
        cfg.validate().map_err(|(field, msg)| {
            let leaf = field.rsplit('.').next().unwrap_or(&field);
            let line = key_line(raw, leaf).unwrap_or(1);
            Error::Config(format!("{origin}:{line}: `{field}`: {msg}"))
        })?;
        Ok(cfg)
    }

    /// Checks every field; returns the offending field path and a message.
    pub fn validate(&self) -> std::result::Result<(), (String, String)> {
        let fail = |f: &str, m: String| Err((f.to_string(), m));
        let in_unit = |r: f64| r > 0.0 && r < 1.0;
        let d = &self.density;
        match (&d.family, &d.csv) {
            (Some(name), None) => {
                if d.dim.is_some() {
                    return fail("density.dim", "`dim` applies to CSV samples only".into());
                }
                let params = if d.params.is_null() {
                    Value::Object(Default::default())
                } else {
                    d.params.clone()
                };
                if let Err(e) = builtin_density(name, &params) {
                    return fail("density.params", e.to_string());
                }
            }
            (None, Some(_)) => {
                if !d.params.is_null() {
                    return fail("density.params", "parameters apply to families only".into());
                }
                if !matches!(d.dim, None | Some(2) | Some(3)) {
                    return fail("density.dim", "CSV samples must be 2-d or 3-d".into());
                }
            }
            _ => return fail("density", "give exactly one of `family` and `csv`".into()),
        }
        let dim = self
            .dim()
            .map_err(|e| ("density".to_string(), e.to_string()))?;
        match self.backend {
            Backend::Semidiscrete => {
                let s = &self.semidiscrete;
                if dim != 2 {
                    return fail("backend", "the semidiscrete backend is planar".into());
                }
                if s.atoms == 0 {
                    return fail("semidiscrete.atoms", "must be positive".into());
                }
                if !(s.mass_tol > 0.0) {
                    return fail("semidiscrete.mass_tol", "must be positive".into());
                }
                if s.max_iter == 0 {
                    return fail("semidiscrete.max_iter", "must be positive".into());
                }
            }
            Backend::Entropic => {
                let e = &self.entropic;
                if !(2..=3).contains(&dim) {
                    return fail("density", "the entropic backend needs d = 2 or 3".into());
                }
                if e.n_r < 2 {
                    return fail("entropic.n_r", "must be at least 2".into());
                }
                if e.n_ang < 2 {
                    return fail("entropic.n_ang", "must be at least 2".into());
                }
                if e.epsilons.is_empty() {
                    return fail("entropic.epsilons", "schedule is empty".into());
                }
                if let Some(x) = e.epsilons.iter().find(|&&x| !(x > 0.0 && x.is_finite())) {
                    return fail(
                        "entropic.epsilons",
                        format!("epsilon must be positive, got {x}"),
                    );
                }
                if !(e.tol > 0.0) {
                    return fail("entropic.tol", "must be positive".into());
                }
                if e.max_iter == 0 {
                    return fail("entropic.max_iter", "must be positive".into());
                }
                match e.target {
                    TargetMode::Grid { divisor, tail } => {
                        if !(divisor > 0.0) {
                            return fail("entropic.target.divisor", "must be positive".into());
                        }
                        if !(0.0..0.5).contains(&tail) {
                            return fail("entropic.target.tail", "must lie in [0, 0.5)".into());
                        }
                    }
                    TargetMode::Sample { n } => {
                        if n == 0 {
                            return fail("entropic.target.n", "must be positive".into());
                        }
                    }
                }
            }
        }
        let c = &self.contours;
        if let Some(r) = c.radii.iter().find(|&&r| !in_unit(r)) {
            return fail("contours.radii", format!("radius {r} is outside (0, 1)"));
        }
        if let Some(r) = c.k_radii.iter().find(|&&r| !in_unit(r)) {
            return fail("contours.k_radii", format!("radius {r} is outside (0, 1)"));
        }
        if !(c.slack_factor >= 0.0 && c.slack_factor.is_finite()) {
            return fail(
                "contours.slack_factor",
                "must be a nonnegative number".into(),
            );
        }
        if c.vertices < 8 {
            return fail("contours.vertices", "need at least 8 vertices".into());
        }
        if let Some(r) = self.oracle.radii.iter().find(|&&r| !in_unit(r)) {
            return fail("oracle.radii", format!("radius {r} is outside (0, 1)"));
        }
        if self.oracle.directions == 0 {
            return fail("oracle.directions", "must be positive".into());
        }
        let g = &self.diagnostics;
        for (name, (lo, hi)) in [("annulus", g.annulus), ("ma_annulus", g.ma_annulus)] {
            if !(lo > 0.0 && lo < hi && hi < 1.0) {
                return fail(
                    &format!("diagnostics.{name}"),
                    format!("[{lo}, {hi}] must lie inside (0, 1)"),
                );
            }
        }
        for (name, n) in [
            ("pushforward_samples", g.pushforward_samples),
            ("monotonicity_pairs", g.monotonicity_pairs),
            ("roundtrip_probes", g.roundtrip_probes),
        ] {
            if n == 0 {
                return fail(&format!("diagnostics.{name}"), "must be positive".into());
            }
        }
        if g.injectivity_points < 2 {
            return fail(
                "diagnostics.injectivity_points",
                "need at least 2 points".into(),
            );
        }
        if !(g.injectivity_min_sep > 0.0) {
            return fail("diagnostics.injectivity_min_sep", "must be positive".into());
        }
        let t = &g.thresholds;
        if t.sectors < 2 || (dim == 3 && !t.sectors.is_multiple_of(2)) {
            return fail(
                "diagnostics.thresholds.sectors",
                "need at least 2 sectors (an even number in 3-d)".into(),
            );
        }
        for (name, v) in [
            ("ks", t.ks),
            ("chi2", t.chi2),
            ("norm_slack", t.norm_slack),
            ("monotonicity_factor", t.monotonicity_factor),
            ("ma_median", t.ma_median),
            ("ma_p90", t.ma_p90),
            ("roundtrip_median", t.roundtrip_median),
            ("min_image_separation", t.min_image_separation),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return fail(
                    &format!("diagnostics.thresholds.{name}"),
                    "must be a nonnegative number".into(),
                );
            }
        }
        Ok(())
    }

    /// Dimension of the target.
    pub fn dim(&self) -> Result<usize> {
        match (&self.density.family, &self.density.csv) {
            (Some(_), _) => Ok(self.builtin()?.dim()),
            _ => Ok(self.density.dim.unwrap_or(2)),
        }
    }

    fn builtin(&self) -> Result<Density> {
        let name = self.density.family.as_deref().unwrap_or_default();
        let params = if self.density.params.is_null() {
            Value::Object(Default::default())
        } else {
            self.density.params.clone()
        };
        builtin_density(name, &params)
    }

    /// Builds the density or reads the CSV sample.
    pub fn target(&self) -> Result<Target> {
        if self.density.family.is_some() {
            return Ok(Target::Density(self.builtin()?));
        }
        let path = self
            .density
            .csv
            .as_ref()
            .ok_or_else(|| Error::Config("density needs `family` or `csv`".into()))?;
        let dim = self.density.dim.unwrap_or(2);
        let rows = crate::io::read_sample_csv(path)?;
        let mut points = Vec::with_capacity(rows.len());
        let mut weights = Vec::with_capacity(rows.len());
        let mut weighted = None;
        for (line, row) in rows {
            let has_weight = if row.len() == dim {
                false
            } else if row.len() == dim + 1 {
                true
            } else {
                return Err(Error::Config(format!(
                    "{}:{line}: expected {dim} coordinates and an optional weight, found {} fields",
                    path.display(),
                    row.len()
                )));
            };
            if *weighted.get_or_insert(has_weight) != has_weight {
                return Err(Error::Config(format!(
                    "{}:{line}: weight column present on some rows only",
                    path.display()
                )));
            }
            weights.push(if has_weight { row[dim] } else { 1.0 });
            points.push(row[..dim].to_vec());
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || weights.iter().any(|&w| w < 0.0) {
            return Err(Error::Config(format!(
                "{}: weights must be nonnegative with a positive sum",
                path.display()
            )));
        }
        weights.iter_mut().for_each(|w| *w /= total);
        Ok(Target::Sample {
            dim,
            points,
            weights,
        })
    }

    /// SHA-256 of the materialized config, excluding the output directory.
    pub fn hash(&self) -> Result<String> {
        let mut c = self.clone();
        c.out = PathBuf::new();
        Ok(crate::io::sha256_hex(&crate::io::to_json_bytes(&c)?))
    }
}

/// Entropic target discretization for a resolved target law.
pub fn sample_target_grid(points: &[Vec<f64>], weights: &[f64], dim: usize) -> Result<TargetGrid> {
    TargetGrid::new(PointCloud::from_points(dim, points)?, weights.to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_materialized() {
        let cfg = RunConfig::parse(r#"{"density": {"family": "gaussian"}}"#, "t").unwrap();
        assert_eq!(cfg.backend, Backend::Entropic);
        assert_eq!(cfg.entropic.n_r, 64);
        assert_eq!(cfg.contours.radii, vec![0.2, 0.4, 0.6, 0.8]);
        let text = String::from_utf8(crate::io::to_json_bytes(&cfg).unwrap()).unwrap();
        assert!(text.contains("\"epsilons\""));
        let again = RunConfig::parse(&text, "t").unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn negative_epsilon_names_the_field_and_line() {
        let raw = "{\n  \"density\": {\"family\": \"gaussian\"},\n  \"entropic\": {\n    \"epsilons\": [0.1, -0.01]\n  }\n}";
        let err = RunConfig::parse(raw, "cfg.json").unwrap_err().to_string();
        assert!(err.contains("cfg.json:4:"), "{err}");
        assert!(err.contains("entropic.epsilons"), "{err}");
    }

    #[test]
    fn unknown_keys_are_rejected_with_position() {
        let raw = "{\n  \"density\": {\"family\": \"gaussian\"},\n  \"bogus\": 1\n}";
        let err = RunConfig::parse(raw, "cfg.json").unwrap_err().to_string();
        assert!(err.contains("cfg.json:3:"), "{err}");
        assert!(err.contains("bogus"), "{err}");
        let raw = r#"{"density": {"family": "gaussian"}, "entropic": {"n_rr": 3}}"#;
        assert!(RunConfig::parse(raw, "x").is_err());
    }

    #[test]
    fn invalid_choices() {
        for raw in [
            r#"{"density": {}}"#,
            r#"{"density": {"family": "nope"}}"#,
            r#"{"density": {"family": "gaussian", "params": {"cov": [[1, 2], [2, 1]]}}}"#,
            r#"{"density": {"family": "gaussian", "params": {"dim": 3}}, "backend": "semidiscrete"}"#,
            r#"{"density": {"family": "gaussian"}, "contours": {"radii": [1.5]}}"#,
            r#"{"density": {"family": "gaussian"}, "entropic": {"target": {"kind": "grid", "divisor": 0, "tail": 0}}}"#,
            r#"{"density": {"family": "gaussian"}, "diagnostics": {"annulus": [0.5, 1.2]}}"#,
        ] {
            assert!(
                matches!(RunConfig::parse(raw, "x"), Err(Error::Config(_))),
                "{raw}"
            );
        }
    }

    #[test]
    fn hash_ignores_output_directory() {
        let a = RunConfig::parse(r#"{"density": {"family": "banana"}, "out": "a"}"#, "x").unwrap();
        let b = RunConfig::parse(r#"{"density": {"family": "banana"}, "out": "b"}"#, "x").unwrap();
        let c = RunConfig::parse(r#"{"density": {"family": "banana"}, "seed": 3}"#, "x").unwrap();
        assert_eq!(a.hash().unwrap(), b.hash().unwrap());
        assert_ne!(a.hash().unwrap(), c.hash().unwrap());
    }

    #[test]
    fn csv_target_with_weights() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        std::fs::write(&path, "y1,y2,w\r\n0,0,1\r\n1,0,3\r\n").unwrap();
        let cfg = RunConfig::load(&{
            let p = dir.path().join("c.json");
            std::fs::write(&p, r#"{"density": {"csv": "s.csv"}}"#).unwrap();
            p
        })
        .unwrap();
        match cfg.target().unwrap() {
            Target::Sample {
                weights,
                points,
                dim,
            } => {
                assert_eq!(dim, 2);
                assert_eq!(points[1], vec![1.0, 0.0]);
                assert_eq!(weights, vec![0.25, 0.75]);
            }
            Target::Density(_) => panic!("expected a sample"),
        }
    }
}
