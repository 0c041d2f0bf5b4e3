//! TOML model files.
//!
//! ```toml
//! dimension = 1
//! beta = 0.05
//!
//! [potential]
//! kind = "pairwise-exponential"   # nearest-neighbor | pairwise-exponential | pairwise-powerlaw | explicit
//! amplitude = 1.0
//! decay = 1.0                     # pairwise-exponential only
//! # exponent = 5.0                # pairwise-powerlaw only
//!
//! # explicit families:
//! # translate = true
//! # [[potential.terms]]
//! # sites = [[0, 0], [1, 0]]
//! # coupling = 0.2
//!
//! [truncation]                    # optional
//! tail_tolerance = 1e-18
//! max_horizon = 1048576
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ExplicitFamily, InteractionModel, KernelShape, ModelError, PairwiseKernel, Potential, TailSettings, Term};
use crate::lattice::Site;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub dimension: usize,
    pub beta: f64,
    pub potential: PotentialSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<TruncationSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSpec {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decay: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exponent: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub translate: Option<bool>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub terms: Vec<TermSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    pub sites: Vec<Vec<i32>>,
    pub coupling: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncationSpec {
    #[serde(default)]
    pub tail_tolerance: Option<f64>,
    #[serde(default)]
    pub max_horizon: Option<usize>,
}

fn required(v: Option<f64>, key: &str) -> Result<f64, ModelError> {
    v.ok_or_else(|| ModelError::invalid(key, "missing"))
}

fn forbid<T>(v: &Option<T>, key: &str, kind: &str) -> Result<(), ModelError> {
    match v {
        Some(_) => Err(ModelError::invalid(key, format!("not used by kind `{kind}`"))),
        None => Ok(()),
    }
}

impl ModelSpec {
    pub fn from_toml(text: &str) -> Result<Self, ModelError> {
        toml::from_str(text).map_err(|e| ModelError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let text = std::fs::read_to_string(path).map_err(|e| ModelError::Parse(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("model spec serializes")
    }

    pub fn build(&self) -> Result<InteractionModel, ModelError> {
        let d = self.dimension;
        if d == 0 {
            return Err(ModelError::invalid("dimension", "must be at least 1"));
        }
        let p = &self.potential;
        let kind = p.kind.as_str();
        let pairwise = |shape: KernelShape| -> Result<Potential, ModelError> {
            forbid(&p.translate, "potential.translate", kind)?;
            if !p.terms.is_empty() {
                return Err(ModelError::invalid("potential.terms", format!("not used by kind `{kind}`")));
            }
            let amplitude = required(p.amplitude, "potential.amplitude")?;
            Ok(Potential::Pairwise(PairwiseKernel { dim: d, amplitude, shape }))
        };
        let potential = match kind {
            "nearest-neighbor" => {
                forbid(&p.decay, "potential.decay", kind)?;
                forbid(&p.exponent, "potential.exponent", kind)?;
                pairwise(KernelShape::NearestNeighbor)?
            }
            "pairwise-exponential" => {
                forbid(&p.exponent, "potential.exponent", kind)?;
                let decay = required(p.decay, "potential.decay")?;
                pairwise(KernelShape::Exponential { decay })?
            }
            "pairwise-powerlaw" => {
                forbid(&p.decay, "potential.decay", kind)?;
                let exponent = required(p.exponent, "potential.exponent")?;
                pairwise(KernelShape::PowerLaw { exponent })?
            }
            "explicit" => {
                forbid(&p.amplitude, "potential.amplitude", kind)?;
                forbid(&p.decay, "potential.decay", kind)?;
                forbid(&p.exponent, "potential.exponent", kind)?;
                let mut terms = Vec::with_capacity(p.terms.len());
                for (n, t) in p.terms.iter().enumerate() {
                    if t.sites.iter().any(|c| c.len() != d) {
                        return Err(ModelError::invalid(
                            &format!("potential.terms[{n}].sites"),
                            format!("every site needs {d} coordinates"),
                        ));
                    }
                    let sites = t.sites.iter().map(|c| Site::new(c)).collect();
                    terms.push(Term { sites, coupling: t.coupling });
                }
                Potential::Explicit(ExplicitFamily::new(d, terms, p.translate.unwrap_or(true))?)
            }
            other => {
                return Err(ModelError::invalid(
                    "potential.kind",
                    format!(
                        "unknown kind `{other}` (expected nearest-neighbor, pairwise-exponential, pairwise-powerlaw or explicit)"
                    ),
                ))
            }
        };
        let mut settings = TailSettings::default();
        if let Some(t) = &self.truncation {
            if let Some(tol) = t.tail_tolerance {
                if !(tol.is_finite() && tol > 0.0) {
                    return Err(ModelError::invalid("truncation.tail_tolerance", "must be positive"));
                }
                settings.tolerance = tol;
            }
            if let Some(h) = t.max_horizon {
                if h < 16 {
                    return Err(ModelError::invalid("truncation.max_horizon", "must be at least 16"));
                }
                settings.max_horizon = h;
            }
        }
        InteractionModel::new(d, self.beta, potential, settings)
    }
}

impl InteractionModel {
    pub fn from_toml(text: &str) -> Result<Self, ModelError> {
        ModelSpec::from_toml(text)?.build()
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        ModelSpec::load(path)?.build()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_each_kind() {
        let nn = InteractionModel::from_toml(
            "dimension = 1\nbeta = 0.05\n[potential]\nkind = \"nearest-neighbor\"\namplitude = 1.0\n",
        )
        .unwrap();
        assert_eq!(nn.total_strength(&Site::origin(1)), 2.0);

        let e = InteractionModel::from_toml(
            "dimension = 1\nbeta = 0.05\n[potential]\nkind = \"pairwise-exponential\"\namplitude = 1.0\ndecay = 1.0\n",
        )
        .unwrap();
        assert!((e.total_strength(&Site::origin(1)) - 1.16395).abs() < 1e-5);

        let p = InteractionModel::from_toml(
            "dimension = 1\nbeta = 0.01\n[potential]\nkind = \"pairwise-powerlaw\"\namplitude = 1.0\nexponent = 5.0\n",
        )
        .unwrap();
        assert!(p.range().is_none());

        let x = InteractionModel::from_toml(
            r#"
dimension = 2
beta = 0.05
[potential]
kind = "explicit"
translate = true
[[potential.terms]]
sites = [[0, 0], [1, 0]]
coupling = 0.2
[[potential.terms]]
sites = [[0, 0], [1, 0], [0, 1]]
coupling = -0.1
"#,
        )
        .unwrap();
        assert_eq!(x.range(), Some(2));
    }

    fn key_of(e: ModelError) -> String {
        match e {
            ModelError::InvalidValue { key, .. } => key,
            ModelError::Parse(msg) => msg,
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn errors_name_the_key() {
        let e = InteractionModel::from_toml(
            "dimension = 1\nbeta = 0.05\n[potential]\nkind = \"pairwise-exponential\"\namplitude = 1.0\n",
        )
        .unwrap_err();
        assert_eq!(key_of(e), "potential.decay");
        let e = InteractionModel::from_toml(
            "dimension = 1\nbeta = 0.05\nbogus = 3\n[potential]\nkind = \"nearest-neighbor\"\namplitude = 1.0\n",
        )
        .unwrap_err();
        assert!(key_of(e).contains("bogus"));
        let e =
            InteractionModel::from_toml("dimension = 1\nbeta = 0.05\n[potential]\nkind = \"ising\"\namplitude = 1.0\n")
                .unwrap_err();
        assert_eq!(key_of(e), "potential.kind");
        let e = InteractionModel::from_toml(
            "dimension = 1\nbeta = -1\n[potential]\nkind = \"nearest-neighbor\"\namplitude = 1.0\n",
        )
        .unwrap_err();
        assert_eq!(key_of(e), "beta");
    }

    #[test]
    fn round_trips() {
        let spec = ModelSpec {
            dimension: 2,
            beta: 0.1,
            potential: PotentialSpec {
                kind: "pairwise-powerlaw".into(),
                amplitude: Some(0.5),
                decay: None,
                exponent: Some(6.5),
                translate: None,
                terms: vec![],
            },
            truncation: None,
        };
        assert_eq!(ModelSpec::from_toml(&spec.to_toml()).unwrap(), spec);
    }
}
