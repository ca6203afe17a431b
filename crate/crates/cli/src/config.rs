//! Run setup assembled in layers: built-in defaults, then a flat key=value
//! config file, then command-line overrides. Every unknown key is rejected
//! with its name so typos surface immediately.

use std::path::{Path, PathBuf};

use sharpflow_core::solver::parse_flat_text;
use sharpflow_core::{Result, SolverConfig};

/// Environment variable that overrides any output directory choice.
pub const OUT_ENV_VAR: &str = "SHARPFLOW_OUT";

/// Output directory used when neither the environment, the command line,
/// nor the config file names one.
pub const DEFAULT_OUT_DIR: &str = "sharpflow-out";

/// A solver configuration plus the artifact destination from the config file.
#[derive(Debug, Clone, Default)]
pub struct RunSetup {
    pub solver: SolverConfig,
    /// Value of the `output.dir` key, if the config file set one.
    pub config_out_dir: Option<PathBuf>,
}

impl RunSetup {
    /// Read a flat key=value config file.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_text(&text)
    }

    /// Parse config text. The `output.dir` key is consumed here; every other
    /// key is delegated to the solver config, which validates ranges and
    /// rejects unknown keys by name.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut setup = Self::default();
        let mut solver_pairs = Vec::new();
        for (key, value) in parse_flat_text(text)? {
            if key == "output.dir" {
                setup.config_out_dir = Some(PathBuf::from(value));
            } else {
                solver_pairs.push((key, value));
            }
        }
        setup.solver = SolverConfig::default().apply_key_values(&solver_pairs)?;
        Ok(setup)
    }

    /// The effective configuration, echoed at run start so every run is
    /// reproducible from its log alone.
    pub fn echo_lines(&self, out_dir: &Path) -> Vec<String> {
        let mut lines: Vec<String> = self
            .solver
            .to_key_values()
            .into_iter()
            .map(|(key, value)| format!("{key}={value}"))
            .collect();
        lines.push(format!("output.dir={}", out_dir.display()));
        lines
    }
}

/// Resolve the artifact directory. Precedence, strongest first: the
/// SHARPFLOW_OUT environment variable, the --out flag, the config file's
/// output.dir, then [`DEFAULT_OUT_DIR`].
pub fn resolve_out_dir(flag: Option<&Path>, config_dir: Option<&Path>) -> PathBuf {
    if let Ok(env_dir) = std::env::var(OUT_ENV_VAR) {
        if !env_dir.is_empty() {
            return PathBuf::from(env_dir);
        }
    }
    if let Some(dir) = flag {
        return dir.to_path_buf();
    }
    if let Some(dir) = config_dir {
        return dir.to_path_buf();
    }
    PathBuf::from(DEFAULT_OUT_DIR)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_yields_defaults() {
        let setup = RunSetup::from_text("").unwrap();
        let defaults = SolverConfig::default();
        assert_eq!(setup.solver.cutoff, defaults.cutoff);
        assert_eq!(setup.solver.eps, defaults.eps);
        assert!(setup.config_out_dir.is_none());
    }

    #[test]
    fn output_dir_key_is_split_from_solver_keys() {
        let setup = RunSetup::from_text("output.dir=artifacts\nsolver.cutoff=16\n").unwrap();
        assert_eq!(setup.config_out_dir.as_deref(), Some(Path::new("artifacts")));
        assert_eq!(setup.solver.cutoff, 16);
    }

    #[test]
    fn unknown_keys_are_rejected_by_name() {
        let err = RunSetup::from_text("solver.frobnicate=3\n").unwrap_err();
        assert!(err.to_string().contains("solver.frobnicate"), "got: {err}");
    }

    #[test]
    fn bad_eps_names_the_key() {
        let err = RunSetup::from_text("solver.eps=-1\n").unwrap_err();
        assert!(err.to_string().contains("solver.eps"), "got: {err}");
    }

    #[test]
    fn flag_beats_config_beats_default() {
        // The environment branch is exercised in the binary-level tests where
        // the variable can be scoped to a child process.
        let flag = Path::new("from-flag");
        let config = Path::new("from-config");
        assert_eq!(resolve_out_dir(Some(flag), Some(config)), flag);
        assert_eq!(resolve_out_dir(None, Some(config)), config);
        assert_eq!(resolve_out_dir(None, None), Path::new(DEFAULT_OUT_DIR));
    }

    #[test]
    fn echo_lists_every_key_once() {
        let setup = RunSetup::from_text("solver.eps=0.03\n").unwrap();
        let lines = setup.echo_lines(Path::new("out"));
        let eps_lines: Vec<&String> =
            lines.iter().filter(|l| l.starts_with("solver.eps=")).collect();
        assert_eq!(eps_lines.len(), 1);
        assert!(lines.iter().any(|l| l == "output.dir=out"));
        assert!(lines.iter().any(|l| l.starts_with("noise.family=")));
    }
}
