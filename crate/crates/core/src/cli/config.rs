//! Run configuration: `key = value` lines with dotted section prefixes
//! (TOML), or the same tree as JSON.
//!
//! ```text
//! domain.builtin = "l_shape"
//! cone.psi = 2.356
//! cone.rbar = 0.5
//! operator.family = "pucci_sup"
//! operator.A = 2.0
//! operator.drift = ["0.3", "-y"]
//! grid.h = 0.015625
//! problem.f = -1
//! ```

use crate::error::{Error, Result};
use crate::geometry::DomainSpec;
use crate::operators::{EllipticParams, Family, ScalarField, VectorField};
use crate::scheme::{Method, SolveConfig};
use crate::eigen::EigenConfig;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// A number or an expression in `x`, `y`.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(untagged)]
pub enum FieldValue {
    Number(f64),
    Expr(String),
}

impl FieldValue {
    pub fn to_field(&self) -> Result<ScalarField> {
        match self {
            FieldValue::Number(v) => Ok(ScalarField::Const(*v)),
            FieldValue::Expr(s) => ScalarField::parse(s),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSection {
    /// Vertex file, relative to the configuration file.
    pub file: Option<PathBuf>,
    /// `unit_square`, `l_shape` or `regular_polygon`.
    pub builtin: Option<String>,
    pub sides: Option<usize>,
    pub radius: Option<f64>,
    pub scale: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ConeSection {
    pub psi: Option<f64>,
    pub rbar: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorSection {
    pub family: Option<Family>,
    pub a: Option<f64>,
    #[serde(rename = "A")]
    pub big_a: Option<f64>,
    pub alpha: Option<f64>,
    pub drift: Option<[FieldValue; 2]>,
    pub potential: Option<FieldValue>,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub f: Option<FieldValue>,
    pub g: Option<FieldValue>,
    pub lambda: Option<f64>,
    /// Point whose nearest nodal value is reported.
    pub probe: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub h: Option<f64>,
    pub stencil_order: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SolveSection {
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub damping: Option<f64>,
    pub eps_grad: Option<f64>,
    pub blowup_threshold: Option<f64>,
    pub method: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct EigenSection {
    pub tol_lambda: Option<f64>,
    pub j_max: Option<usize>,
    pub bracket: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct BarrierSection {
    /// Vertex index of the apex.
    pub apex: Option<usize>,
    /// Explicit apex on the boundary; overrides `apex`.
    pub point: Option<[f64; 2]>,
    pub samples: Option<usize>,
    /// Multiplies the normalization constant; anything but 1 breaks the barrier.
    pub kappa_scale: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct CheckSection {
    pub trials: Option<usize>,
    pub pairs: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub domain: DomainSection,
    #[serde(default)]
    pub cone: ConeSection,
    #[serde(default)]
    pub operator: OperatorSection,
    #[serde(default)]
    pub problem: ProblemSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub solve: SolveSection,
    #[serde(default)]
    pub eigen: EigenSection,
    #[serde(default)]
    pub barrier: BarrierSection,
    #[serde(default)]
    pub check: CheckSection,
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl RunConfig {
    /// JSON when the text starts with `{`, key = value lines otherwise.
    pub fn parse(text: &str) -> Result<Self> {
        if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
        } else {
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn domain(&self) -> Result<DomainSpec> {
        let psi = self.cone.psi.ok_or_else(|| Error::Config("cone.psi is required".into()))?;
        let rbar = self.cone.rbar.ok_or_else(|| Error::Config("cone.rbar is required".into()))?;
        let d = &self.domain;
        let base = match (&d.file, d.builtin.as_deref()) {
            (Some(_), Some(_)) => return Err(Error::Config("give either domain.file or domain.builtin".into())),
            (Some(file), None) => {
                let path = self.base_dir.join(file);
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
                DomainSpec::parse(&text, psi, rbar)?
            }
            (None, Some("unit_square")) => DomainSpec::unit_square(psi, rbar)?,
            (None, Some("l_shape")) => DomainSpec::l_shape(psi, rbar)?,
            (None, Some("regular_polygon")) => {
                DomainSpec::regular_polygon(d.sides.unwrap_or(64), d.radius.unwrap_or(1.0), psi, rbar)?
            }
            (None, Some(other)) => return Err(Error::Config(format!("unknown builtin domain {other:?}"))),
            (None, None) => return Err(Error::Config("domain.file or domain.builtin is required".into())),
        };
        match d.scale {
            Some(t) => base.scaled(t),
            None => Ok(base),
        }
    }

    pub fn params(&self) -> Result<EllipticParams> {
        let o = &self.operator;
        let a = o.a.unwrap_or(1.0);
        let family = o.family.unwrap_or(Family::Trace);
        let big_a = o.big_a.unwrap_or(if family == Family::Trace { a } else { 1.0f64.max(a) });
        let mut p = EllipticParams::new(a, big_a, o.alpha.unwrap_or(0.0), family)?;
        if let Some([hx, hy]) = &o.drift {
            let field = match (hx, hy) {
                (FieldValue::Number(x), FieldValue::Number(y)) => VectorField::Const([*x, *y]),
                _ => VectorField::parse(&expr_text(hx), &expr_text(hy))?,
            };
            p = p.with_drift(field);
        }
        if let Some(v) = &o.potential {
            p = p.with_potential(v.to_field()?);
        }
        Ok(p)
    }

    pub fn grid_h(&self) -> Result<f64> {
        match self.grid.h {
            Some(h) if h > 0.0 => Ok(h),
            Some(h) => Err(Error::Config(format!("grid.h must be positive, got {h}"))),
            None => Err(Error::Config("grid.h is required".into())),
        }
    }

    pub fn stencil_order(&self) -> usize {
        self.grid.stencil_order.unwrap_or(1)
    }

    pub fn solve_config(&self) -> Result<SolveConfig> {
        let s = &self.solve;
        let mut cfg = SolveConfig::default();
        if let Some(v) = s.tol {
            cfg.tol = v;
        }
        if let Some(v) = s.max_iter {
            cfg.max_iter = v;
        }
        if let Some(v) = s.damping {
            cfg.damping = v;
        }
        if let Some(v) = s.eps_grad {
            cfg.eps_grad = v;
        }
        if let Some(v) = s.blowup_threshold {
            cfg.blowup_threshold = v;
        }
        cfg.method = match s.method.as_deref() {
            None | Some("newton") => Method::Newton,
            Some("pseudo_time") => Method::PseudoTime,
            Some(other) => return Err(Error::Config(format!("unknown solve.method {other:?}"))),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn eigen_config(&self) -> Result<EigenConfig> {
        let e = &self.eigen;
        if let Some(t) = e.tol_lambda {
            if !(t > 0.0) {
                return Err(Error::Config("eigen.tol_lambda must be positive".into()));
            }
        }
        Ok(EigenConfig {
            tol_lambda: e.tol_lambda,
            bracket: e.bracket,
            j_max: e.j_max.unwrap_or(6),
            ..Default::default()
        })
    }

    pub fn rhs(&self) -> Result<ScalarField> {
        self.problem.f.as_ref().map_or(Ok(ScalarField::Const(-1.0)), FieldValue::to_field)
    }

    pub fn boundary(&self) -> Result<ScalarField> {
        self.problem.g.as_ref().map_or(Ok(ScalarField::Const(0.0)), FieldValue::to_field)
    }

    /// Checks every section that has a default consumer.
    pub fn validate(&self) -> Result<()> {
        self.domain()?;
        self.params()?;
        self.grid_h()?;
        self.solve_config()?;
        self.eigen_config()?;
        self.rhs()?;
        self.boundary()?;
        Ok(())
    }
}

fn expr_text(v: &FieldValue) -> String {
    match v {
        FieldValue::Number(x) => format!("{x:?}"),
        FieldValue::Expr(s) => s.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TEXT: &str = r#"
domain.builtin = "l_shape"
cone.psi = 2.356
cone.rbar = 0.5
operator.family = "pucci_sup"
operator.A = 2.0
operator.alpha = 1
operator.drift = ["0.3", "-y"]
grid.h = 0.0625
problem.f = "-1 - x*y"
seed = 4
"#;

    #[test]
    fn key_value_and_json_agree() {
        let a = RunConfig::parse(TEXT).unwrap();
        let json = serde_json::to_string(&a).unwrap();
        let b = RunConfig::parse(&json).unwrap();
        assert_eq!(serde_json::to_string(&b).unwrap(), json);
        let p = a.params().unwrap();
        assert_eq!((p.a, p.big_a, p.alpha, p.family), (1.0, 2.0, 1.0, Family::PucciSup));
        assert_eq!(p.drift.eval([0.0, 2.0]), [0.3, -2.0]);
        assert_eq!(a.rhs().unwrap().eval([1.0, 2.0]), -3.0);
        assert_eq!(a.domain().unwrap().vertices().len(), 6);
        assert_eq!(a.seed(), 4);
        a.validate().unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::parse("grid.hh = 0.1").is_err());
        assert!(RunConfig::parse("colour = 1").is_err());
        assert!(RunConfig::parse(r#"{"solve": {"tolerance": 1}}"#).is_err());
    }

    #[test]
    fn ellipticity_is_validated() {
        let text = TEXT.replace("operator.A = 2.0", "operator.a = 3.0\noperator.A = 2.0");
        assert!(RunConfig::parse(&text).unwrap().params().is_err());
    }

    #[test]
    fn missing_cone_is_reported() {
        let cfg = RunConfig::parse("domain.builtin = \"unit_square\"\ngrid.h = 0.1").unwrap();
        assert!(matches!(cfg.domain(), Err(Error::Config(_))));
    }
}
