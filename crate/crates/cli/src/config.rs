//! Run configuration: TOML file (path from `--config` or `NCPOT_CONFIG`)
//! overridden by command-line flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use ncpot_core::analysis::{DEFAULT_MAX_EVALS, DEFAULT_RESTARTS, DEFAULT_STEPS};
use ncpot_core::simulator::DetectorModel;
use ncpot_core::wigner::GridSpec;
use ncpot_core::{Error, Tolerances};
use serde::{Deserialize, Serialize};

/// Trace and PSD tolerance for density matrices read from files.
pub const FILE_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub restarts: usize,
    pub max_evals: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            restarts: DEFAULT_RESTARTS,
            max_evals: DEFAULT_MAX_EVALS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Relative `--out` paths are resolved against this directory.
    pub output_dir: PathBuf,
    pub steps: usize,
    /// Wigner grid as `lo:hi:n` or `lo:hi:n,lo:hi:n`.
    pub grid: String,
    /// Validity tolerances for input density matrices, keyed by
    /// `hermitian`, `trace`, `trace_imag`, `psd`, `jacobi`.
    pub tolerances: BTreeMap<String, f64>,
    pub fit: FitConfig,
    pub detector: DetectorModel,
}

impl Default for RunConfig {
    fn default() -> Self {
        // Emitted files carry 9 significant digits, which perturbs the trace
        // and the smallest eigenvalues by up to a few 1e-9.
        let t = Tolerances {
            trace: FILE_TOLERANCE,
            psd: FILE_TOLERANCE,
            ..Tolerances::default()
        };
        let tolerances = [
            ("hermitian", t.hermitian),
            ("trace", t.trace),
            ("trace_imag", t.trace_imag),
            ("psd", t.psd),
            ("jacobi", t.jacobi),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        RunConfig {
            seed: 0,
            output_dir: PathBuf::from("."),
            steps: DEFAULT_STEPS,
            grid: GridSpec::default().to_string(),
            tolerances,
            fit: FitConfig::default(),
            detector: DetectorModel::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, Error> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| Error::Format(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), Error> {
        self.tolerances()?;
        self.grid()?;
        self.detector.validate()?;
        if self.steps < 2 {
            return Err(Error::OutOfRange(format!(
                "steps = {} must be at least 2",
                self.steps
            )));
        }
        if self.fit.restarts == 0 || self.fit.max_evals == 0 {
            return Err(Error::OutOfRange(
                "fit.restarts and fit.max_evals must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn tolerances(&self) -> Result<Tolerances, Error> {
        let mut t = Tolerances::default();
        for (key, &value) in &self.tolerances {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(Error::OutOfRange(format!("tolerance {key} = {value}")));
            }
            match key.as_str() {
                "hermitian" => t.hermitian = value,
                "trace" => t.trace = value,
                "trace_imag" => t.trace_imag = value,
                "psd" => t.psd = value,
                "jacobi" => t.jacobi = value,
                other => return Err(Error::Format(format!("unknown tolerance '{other}'"))),
            }
        }
        Ok(t)
    }

    pub fn grid(&self) -> Result<GridSpec, Error> {
        self.grid.parse()
    }

    pub fn resolve(&self, out: &Path) -> PathBuf {
        if out.is_absolute() {
            out.to_path_buf()
        } else {
            self.output_dir.join(out)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = RunConfig::default();
        let text = cfg.to_toml();
        assert_eq!(RunConfig::from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn partial_file_keeps_defaults() {
        let cfg = RunConfig::from_toml("seed = 9\n[detector]\npair_rate_hz = 20.0\n").unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.detector.pair_rate_hz, 20.0);
        assert_eq!(
            cfg.detector.efficiency_a,
            DetectorModel::default().efficiency_a
        );
        assert_eq!(cfg.steps, DEFAULT_STEPS);
    }

    #[test]
    fn bad_values_rejected() {
        assert!(RunConfig::from_toml("sead = 1\n").is_err());
        assert!(RunConfig::from_toml("[tolerances]\nfoo = 1.0\n").is_err());
        assert!(RunConfig::from_toml("grid = \"3:-3:10\"\n").is_err());
        assert!(RunConfig::from_toml("[detector]\nefficiency_b = 0.0\n").is_err());
    }
}
