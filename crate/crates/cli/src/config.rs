//! The JSON experiment config and its merge with command-line flags.
//!
//! Every field is optional. A value given as a flag wins over the file, and
//! the file wins over the per-command defaults.

use std::path::{Path, PathBuf};

use rigidity_lab::{IndexSet, IndexSetForm, KernelSpec, QuadSettings};
use serde::{Deserialize, Serialize};

use crate::args::Format;
use crate::error::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kernel: KernelSection,
    pub cutoff: CutoffSection,
    pub eps: Option<Vec<f64>>,
    pub quad: QuadSection,
    pub mc: McSection,
    pub bernoulli: BernoulliSection,
    pub bloch: BlochSection,
    pub output: OutputSection,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelSection {
    pub lambda: Option<IndexSetForm>,
    pub cap: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CutoffSection {
    pub r0: Option<f64>,
    pub rs: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadSection {
    pub abs_tol: Option<f64>,
    pub rel_tol: Option<f64>,
    pub max_evals: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McSection {
    pub samples: Option<u64>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub radius: Option<f64>,
    pub bins: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BernoulliSection {
    pub c: Option<u32>,
    pub n: Option<u32>,
    pub trials: Option<u64>,
    pub n_max: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlochSection {
    pub caps: Option<Vec<u64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub path: Option<PathBuf>,
    pub format: Option<Format>,
    pub stats_path: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::field("config", e))
    }

    pub fn quad(&self) -> Result<QuadSettings, CliError> {
        let d = QuadSettings::default();
        let q = QuadSettings {
            abs_tol: self.quad.abs_tol.unwrap_or(d.abs_tol),
            rel_tol: self.quad.rel_tol.unwrap_or(d.rel_tol),
            max_evals: self.quad.max_evals.unwrap_or(d.max_evals),
        };
        if !(q.abs_tol.is_finite() && q.abs_tol > 0.0) {
            return Err(CliError::field(
                "quad.abs_tol",
                format!("must be positive, got {}", q.abs_tol),
            ));
        }
        if !(q.rel_tol.is_finite() && q.rel_tol >= 0.0) {
            return Err(CliError::field(
                "quad.rel_tol",
                format!("must be non-negative, got {}", q.rel_tol),
            ));
        }
        if q.max_evals == 0 {
            return Err(CliError::field("quad.max_evals", "must be positive"));
        }
        Ok(q)
    }

    /// The index set, or `default` when none is configured.
    pub fn lambda(&self, default: impl FnOnce() -> IndexSet) -> Result<IndexSet, CliError> {
        match &self.kernel.lambda {
            Some(form) => form
                .resolve()
                .map_err(|e| CliError::field("kernel.lambda", e)),
            None => Ok(default()),
        }
    }

    /// Kernel from `kernel.lambda` and `kernel.cap`; the cap defaults to the
    /// largest index and may not be smaller than it.
    pub fn kernel(&self, default: impl FnOnce() -> IndexSet) -> Result<KernelSpec, CliError> {
        let lambda = self.lambda(default)?;
        let max = lambda.max();
        let cap = match (self.kernel.cap, max) {
            (Some(cap), Some(m)) if cap < m => {
                return Err(CliError::field(
                    "kernel.cap",
                    format!("{cap} is below the largest index {m} of kernel.lambda"),
                ))
            }
            (Some(cap), _) => cap,
            (None, Some(m)) => m,
            (None, None) => {
                return Err(CliError::field(
                    "kernel.lambda",
                    "index set is empty (rank 0)",
                ))
            }
        };
        KernelSpec::new(lambda, cap).map_err(|e| CliError::field("kernel", e))
    }

    /// `cutoff.r0` and `cutoff.rs`, checked for `0 < r0 < r < 1`.
    pub fn sweep(&self, r0: f64, rs: &[f64]) -> Result<(f64, Vec<f64>), CliError> {
        let r0 = self.cutoff.r0.unwrap_or(r0);
        let rs = self.cutoff.rs.clone().unwrap_or_else(|| rs.to_vec());
        if !(r0 > 0.0 && r0 < 1.0) {
            return Err(CliError::field(
                "cutoff.r0",
                format!("must lie in (0, 1), got {r0}"),
            ));
        }
        for &r in &rs {
            if !(r > 0.0 && r < 1.0) {
                return Err(CliError::field(
                    "cutoff.rs",
                    format!("radius {r} is outside (0, 1)"),
                ));
            }
            if r <= r0 {
                return Err(CliError::field(
                    "cutoff.r0",
                    format!(
                        "{r0} must be less than every sweep radius, but cutoff.rs contains {r}"
                    ),
                ));
            }
        }
        Ok((r0, rs))
    }

    pub fn workers(&self) -> Result<Option<usize>, CliError> {
        match self.mc.workers {
            Some(0) => Err(CliError::field("workers", "must be at least 1")),
            w => Ok(w),
        }
    }
}

pub(crate) fn parse_lambda(text: &str) -> Result<IndexSetForm, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::field("--lambda", e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_all_defaults() {
        assert_eq!(
            ExperimentConfig::parse("{}").unwrap(),
            ExperimentConfig::default()
        );
    }

    #[test]
    fn unknown_fields_and_bad_json_are_rejected() {
        assert_eq!(
            ExperimentConfig::parse("{\"kernal\": {}}")
                .unwrap_err()
                .exit_code(),
            2
        );
        assert_eq!(ExperimentConfig::parse("{").unwrap_err().exit_code(), 2);
    }

    #[test]
    fn kernel_section_forms() {
        let c = ExperimentConfig::parse(
            r#"{"kernel": {"lambda": {"kind": "powers", "base": 2, "max_exp": 4}}}"#,
        )
        .unwrap();
        let k = c.kernel(IndexSet::empty).unwrap();
        assert_eq!(k.exponents(), &[1, 2, 4, 8, 16]);
        assert_eq!(k.cap(), 16);
        let c = ExperimentConfig::parse(r#"{"kernel": {"lambda": [0, 5], "cap": 3}}"#).unwrap();
        let e = c.kernel(IndexSet::empty).unwrap_err().to_string();
        assert!(e.contains("kernel.cap"), "{e}");
        let c = ExperimentConfig::parse(r#"{"kernel": {"lambda": []}}"#).unwrap();
        assert!(c.kernel(IndexSet::empty).is_err());
    }

    #[test]
    fn sweep_validation_names_fields() {
        let c = ExperimentConfig::parse(r#"{"cutoff": {"r0": 0.95, "rs": [0.9]}}"#).unwrap();
        let e = c.sweep(0.5, &[]).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(e.to_string().contains("cutoff.r0"));
        let c = ExperimentConfig::parse(r#"{"cutoff": {"rs": [1.0]}}"#).unwrap();
        assert!(c
            .sweep(0.5, &[])
            .unwrap_err()
            .to_string()
            .contains("cutoff.rs"));
    }

    #[test]
    fn quad_section() {
        let c = ExperimentConfig::parse(r#"{"quad": {"abs_tol": 1e-6}}"#).unwrap();
        assert_eq!(c.quad().unwrap().abs_tol, 1e-6);
        let c = ExperimentConfig::parse(r#"{"quad": {"abs_tol": -1}}"#).unwrap();
        assert!(c.quad().unwrap_err().to_string().contains("quad.abs_tol"));
    }
}
