use nalgebra::{DMatrix, DVector};

use crate::baselines::{self, LinfConfig, MlConfig};
use crate::error::{Error, Result};
use crate::soav::{self, DetectionResult, SoavConfig};

#[derive(Debug, Clone, PartialEq)]
pub enum DetectorKind {
    Soav(SoavConfig),
    Linf(LinfConfig),
    Ml(MlConfig),
}

/// A named detector with its configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorSpec {
    pub name: String,
    pub kind: DetectorKind,
}

impl DetectorSpec {
    pub fn soav() -> Self {
        Self::new("soav", DetectorKind::Soav(SoavConfig::default()))
    }

    pub fn linf() -> Self {
        Self::new("linf", DetectorKind::Linf(LinfConfig::default()))
    }

    pub fn ml() -> Self {
        Self::new("ml", DetectorKind::Ml(MlConfig::default()))
    }

    pub fn new(name: impl Into<String>, kind: DetectorKind) -> Self {
        Self { name: name.into(), kind }
    }

    /// Default-configured detector for one of `soav`, `linf`, `ml`.
    pub fn from_name(name: &str) -> Result<Self> {
        match name.trim() {
            "soav" => Ok(Self::soav()),
            "linf" => Ok(Self::linf()),
            "ml" => Ok(Self::ml()),
            other => Err(Error::Config(format!("unknown detector '{other}' (expected soav, linf or ml)"))),
        }
    }

    /// Parses a comma-separated list such as `soav,linf`.
    pub fn parse_list(list: &str) -> Result<Vec<Self>> {
        list.split(',').filter(|s| !s.trim().is_empty()).map(Self::from_name).collect()
    }

    /// Checks the configuration against a problem with `unknowns` real unknowns.
    pub fn validate_for(&self, unknowns: usize) -> Result<()> {
        let res = match &self.kind {
            DetectorKind::Soav(c) => c.validate(),
            DetectorKind::Linf(c) => c.validate(),
            DetectorKind::Ml(c) if unknowns > c.max_dimension => Err(Error::DimensionExceeded {
                dimension: unknowns,
                limit: c.max_dimension,
            }),
            DetectorKind::Ml(c) if c.max_dimension > baselines::ML_DIMENSION_LIMIT => Err(Error::InvalidParameter(
                format!("max_dimension must be at most {}", baselines::ML_DIMENSION_LIMIT),
            )),
            DetectorKind::Ml(_) => Ok(()),
        };
        res.map_err(|e| Error::Config(format!("detector '{}': {e}", self.name)))
    }

    /// Runs the detector on `(H, y)` with noise level `n0`. The ℓ∞ detector
    /// falls back to its best iterate when the residual target is missed.
    pub fn detect_parts(&self, h: &DMatrix<f64>, y: &DVector<f64>, n0: f64) -> Result<DetectionResult> {
        match &self.kind {
            DetectorKind::Soav(c) => soav::fista_detect_parts(h, y, c),
            DetectorKind::Linf(c) => {
                let eps = c.epsilon.resolve_for(h.nrows(), n0);
                match baselines::linf_detect_parts(h, y, eps, c) {
                    Err(Error::NotConverged { best, .. }) => Ok(*best),
                    other => other,
                }
            }
            DetectorKind::Ml(c) => baselines::ml_oracle_parts(h, y, c),
        }
    }

    /// [`detect_parts`](Self::detect_parts) for every column of `ys`.
    pub fn detect_batch(&self, h: &DMatrix<f64>, ys: &DMatrix<f64>, n0: f64) -> Result<Vec<DetectionResult>> {
        match &self.kind {
            DetectorKind::Soav(c) => soav::fista_detect_batch(h, ys, c),
            DetectorKind::Linf(c) => {
                let eps = c.epsilon.resolve_for(h.nrows(), n0);
                baselines::linf_detect_batch(h, ys, eps, c)?
                    .into_iter()
                    .map(|r| match r {
                        Err(Error::NotConverged { best, .. }) => Ok(*best),
                        other => other,
                    })
                    .collect()
            }
            DetectorKind::Ml(c) => ys
                .column_iter()
                .map(|y| baselines::ml_oracle_parts(h, &y.into_owned(), c))
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_detector_list() {
        let d = DetectorSpec::parse_list("soav, linf").unwrap();
        assert_eq!(d.iter().map(|d| d.name.as_str()).collect::<Vec<_>>(), ["soav", "linf"]);
        assert!(DetectorSpec::parse_list("soav,foo").is_err());
    }

    #[test]
    fn ml_validation_uses_problem_size() {
        assert!(DetectorSpec::ml().validate_for(24).is_ok());
        assert!(DetectorSpec::ml().validate_for(25).is_err());
    }
}
