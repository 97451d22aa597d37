//! Run configuration: one TOML document drives every subcommand.
//!
//! A run is reproducible from a single structured file with one section
//! per concern — problem, grid, tolerances, sweep, outputs, cache.
//! Command-line flags override the file (flags win). Unknown keys are
//! rejected at parse time so a typo cannot silently fall back to a
//! default, and validation runs before any computation, naming the
//! offending key in its message.

use std::path::{Path, PathBuf};

use critwave_core::shoot::{ProblemParams, ShootOptions};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Environment variable that overrides the cache root directory.
pub const CACHE_ENV: &str = "CRITWAVE_CACHE";

/// Default frequency ladder: half-decades from 10 to 10^5.5. The upper
/// end is chosen so the rescaled coefficient β spans two full decades,
/// which is what the scaling-law fit needs to resolve its exponent.
pub const DEFAULT_SWEEP_DECADE_MIN: f64 = 1.0;
pub const DEFAULT_SWEEP_DECADE_MAX: f64 = 5.5;
pub const DEFAULT_SWEEP_COUNT: usize = 10;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("config key `{key}`: {message}")]
    Invalid { key: &'static str, message: String },
}

fn invalid(key: &'static str, message: String) -> ConfigError {
    ConfigError::Invalid { key, message }
}

/// The complete run configuration. Every field has a default, so an
/// empty document (or no `--config` at all) is a valid run.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemSection,
    pub grid: GridSection,
    pub tolerances: ToleranceSection,
    pub sweep: SweepSection,
    pub outputs: OutputSection,
    pub cache: CacheSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemSection {
    /// Spatial dimension.
    pub d: u32,
    /// Subcritical power.
    pub p: f64,
    /// Frequency of the standing wave.
    pub omega: f64,
    /// Coefficient of the subcritical term.
    pub epsilon: f64,
    /// Keep the Sobolev-critical term; `false` selects the single-power
    /// control family.
    pub critical_on: bool,
}

impl Default for ProblemSection {
    fn default() -> Self {
        ProblemSection {
            d: 3,
            p: 4.0,
            omega: 1000.0,
            epsilon: 1.0,
            critical_on: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum GridPolicyChoice {
    Uniform,
    Graded,
    Geometric,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    /// Nodes of the output / diagnostic grid.
    pub n: usize,
    /// Node spacing policy for that grid.
    pub policy: GridPolicyChoice,
    /// Truncation radius = r_max_factor / sqrt(omega), capped below.
    pub r_max_factor: f64,
    pub r_max_cap: f64,
    /// First step of a `geometric` grid (required for that policy).
    pub first_step: Option<f64>,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            n: 4000,
            policy: GridPolicyChoice::Graded,
            r_max_factor: 40.0,
            r_max_cap: 500.0,
            first_step: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToleranceSection {
    /// Bisection stops when the amplitude bracket is this narrow
    /// (relative).
    pub bracket_rel: f64,
    /// Relative tolerance of the adaptive shooting integrator.
    pub integrator_rtol: f64,
    /// Acceptance threshold on the ground-state equation residual.
    pub residual: f64,
    /// Allowed relative drift of the nondegeneracy gap under one grid
    /// refinement.
    pub eigen_drift: f64,
    /// Forward integration hands over to the tail sweep at u/m below
    /// this.
    pub kappa_match: f64,
}

impl Default for ToleranceSection {
    fn default() -> Self {
        let opts = ShootOptions::default();
        ToleranceSection {
            bracket_rel: opts.bracket_rel,
            integrator_rtol: opts.rtol,
            residual: 1e-8,
            eigen_drift: 0.25,
            kappa_match: opts.kappa_match,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    /// Explicit frequency list (strictly increasing). Mutually
    /// exclusive with `geometric`.
    pub omegas: Option<Vec<f64>>,
    /// Geometric frequency range. When neither field is given, the
    /// default half-decade ladder 10 .. 10^5.5 is used.
    pub geometric: Option<GeometricRange>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometricRange {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
    Both,
}

impl OutputFormat {
    pub fn wants_csv(self) -> bool {
        matches!(self, OutputFormat::Csv | OutputFormat::Both)
    }
    pub fn wants_json(self) -> bool {
        matches!(self, OutputFormat::Json | OutputFormat::Both)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    /// Directory receiving all artifacts (created if missing).
    pub directory: PathBuf,
    pub format: OutputFormat,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            directory: PathBuf::from("out"),
            format: OutputFormat::Both,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CacheSection {
    pub enabled: bool,
    /// Cache root. Resolution order: the `CRITWAVE_CACHE` environment
    /// variable, then this field, then `<outputs.directory>/cache`.
    pub directory: Option<PathBuf>,
}

impl Default for CacheSection {
    fn default() -> Self {
        CacheSection {
            enabled: true,
            directory: None,
        }
    }
}

impl RunConfig {
    /// Parse a TOML file. Unknown keys fail the parse with a message
    /// naming the key.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(toml::from_str(&text)?)
    }

    /// Validate every section before any computation. The admissible
    /// set for (d, p) matches the solver's: d=3 needs 3<p<5, d=4 needs
    /// 2<=p<3, d>=5 needs 1<p<(d+2)/(d-2), and the single-power control
    /// needs 1<p<(d+2)/(d-2).
    pub fn validate(&self) -> Result<(), ConfigError> {
        let pr = &self.problem;
        if let Err(e) = self.problem_params().validate() {
            // classify which key is at fault in the same order the
            // solver checks them, so the message names the right one
            let key = if pr.d < 3 || pr.d > 9 {
                "problem.d"
            } else if !(pr.omega > 0.0) || !pr.omega.is_finite() {
                "problem.omega"
            } else if !(pr.epsilon >= 0.0) || !pr.epsilon.is_finite() {
                "problem.epsilon"
            } else {
                "problem.p"
            };
            return Err(invalid(key, e.to_string()));
        }

        let g = &self.grid;
        if g.n < 16 {
            return Err(invalid("grid.n", format!("need at least 16 nodes, got {}", g.n)));
        }
        if !(g.r_max_factor > 0.0) || !g.r_max_factor.is_finite() {
            return Err(invalid(
                "grid.r_max_factor",
                format!("must be positive, got {}", g.r_max_factor),
            ));
        }
        if !(g.r_max_cap > 0.0) || !g.r_max_cap.is_finite() {
            return Err(invalid(
                "grid.r_max_cap",
                format!("must be positive, got {}", g.r_max_cap),
            ));
        }
        match (g.policy, g.first_step) {
            (GridPolicyChoice::Geometric, None) => {
                return Err(invalid(
                    "grid.first_step",
                    "geometric spacing needs an explicit first step".into(),
                ));
            }
            (_, Some(h)) if !(h > 0.0) || !h.is_finite() => {
                return Err(invalid(
                    "grid.first_step",
                    format!("must be positive, got {h}"),
                ));
            }
            _ => {}
        }

        let t = &self.tolerances;
        for (key, value, cap) in [
            ("tolerances.bracket_rel", t.bracket_rel, 1e-2),
            ("tolerances.integrator_rtol", t.integrator_rtol, 1e-4),
            ("tolerances.kappa_match", t.kappa_match, 1e-1),
        ] {
            if !(value > 0.0) || !(value <= cap) {
                return Err(invalid(
                    key,
                    format!("must lie in (0, {cap:e}], got {value:e}"),
                ));
            }
        }
        if !(t.residual > 0.0) || !t.residual.is_finite() {
            return Err(invalid(
                "tolerances.residual",
                format!("must be positive, got {:e}", t.residual),
            ));
        }
        if !(t.eigen_drift > 0.0) || !(t.eigen_drift <= 1.0) {
            return Err(invalid(
                "tolerances.eigen_drift",
                format!("must lie in (0, 1], got {}", t.eigen_drift),
            ));
        }

        let s = &self.sweep;
        if s.omegas.is_some() && s.geometric.is_some() {
            return Err(invalid(
                "sweep",
                "give either `omegas` or `geometric`, not both".into(),
            ));
        }
        if let Some(list) = &s.omegas {
            if list.is_empty() {
                return Err(invalid("sweep.omegas", "frequency list is empty".into()));
            }
            if list.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
                return Err(invalid(
                    "sweep.omegas",
                    "frequencies must be positive and finite".into(),
                ));
            }
            if list.windows(2).any(|w| w[1] <= w[0]) {
                return Err(invalid(
                    "sweep.omegas",
                    "frequencies must be strictly increasing".into(),
                ));
            }
        }
        if let Some(geo) = &s.geometric {
            if !(geo.min > 0.0) || !(geo.max > geo.min) || !geo.max.is_finite() {
                return Err(invalid(
                    "sweep.geometric",
                    format!("need 0 < min < max, got min={} max={}", geo.min, geo.max),
                ));
            }
            if geo.count < 2 {
                return Err(invalid(
                    "sweep.geometric",
                    format!("need at least 2 points, got {}", geo.count),
                ));
            }
        }
        Ok(())
    }

    pub fn problem_params(&self) -> ProblemParams {
        ProblemParams {
            d: self.problem.d,
            p: self.problem.p,
            omega: self.problem.omega,
            epsilon: self.problem.epsilon,
            critical_on: self.problem.critical_on,
        }
    }

    pub fn shoot_options(&self) -> ShootOptions {
        ShootOptions {
            bracket_rel: self.tolerances.bracket_rel,
            rtol: self.tolerances.integrator_rtol,
            r_max_factor: self.grid.r_max_factor,
            r_max_cap: self.grid.r_max_cap,
            kappa_match: self.tolerances.kappa_match,
            ..ShootOptions::default()
        }
    }

    /// The resolved sweep frequencies.
    pub fn sweep_omegas(&self) -> Vec<f64> {
        if let Some(list) = &self.sweep.omegas {
            return list.clone();
        }
        if let Some(geo) = &self.sweep.geometric {
            let n = geo.count;
            let ratio = geo.max / geo.min;
            return (0..n)
                .map(|k| geo.min * ratio.powf(k as f64 / (n - 1) as f64))
                .collect();
        }
        default_ladder()
    }

    /// Cache root after applying the resolution order documented on
    /// [`CacheSection::directory`].
    pub fn cache_root(&self) -> PathBuf {
        if let Ok(dir) = std::env::var(CACHE_ENV) {
            if !dir.is_empty() {
                return PathBuf::from(dir);
            }
        }
        match &self.cache.directory {
            Some(dir) => dir.clone(),
            None => self.outputs.directory.join("cache"),
        }
    }
}

/// The default half-decade frequency ladder.
pub fn default_ladder() -> Vec<f64> {
    decade_points(
        DEFAULT_SWEEP_DECADE_MIN,
        DEFAULT_SWEEP_DECADE_MAX,
        DEFAULT_SWEEP_COUNT,
    )
}

/// Frequencies 10^e at `count` evenly spaced exponents in
/// [`lo`, `hi`]. Generating through the exponent keeps points shared
/// between ladders bit-identical, which is what lets cached solves be
/// reused across studies.
pub fn decade_points(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|k| {
            let e = lo + (hi - lo) * k as f64 / (count - 1) as f64;
            10f64.powf(e)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_resolve() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        let omegas = cfg.sweep_omegas();
        assert_eq!(omegas.len(), DEFAULT_SWEEP_COUNT);
        assert_eq!(omegas[0], 10.0);
        assert!((omegas[9] - 10f64.powf(5.5)).abs() < 1e-6 * omegas[9]);
    }

    #[test]
    fn unknown_keys_are_rejected_by_name() {
        let err = toml::from_str::<RunConfig>("[problem]\nd = 3\nfrequency = 10.0\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("frequency"), "{err}");
    }

    #[test]
    fn inadmissible_power_is_rejected_citing_the_set() {
        let mut cfg = RunConfig::default();
        cfg.problem.p = 2.0;
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("problem.p"), "{err}");
        assert!(err.contains("3<p<5"), "{err}");
    }

    #[test]
    fn offending_keys_are_named() {
        let mut cfg = RunConfig::default();
        cfg.problem.omega = -1.0;
        assert!(cfg.validate().unwrap_err().to_string().contains("problem.omega"));

        let mut cfg = RunConfig::default();
        cfg.grid.n = 4;
        assert!(cfg.validate().unwrap_err().to_string().contains("grid.n"));

        let mut cfg = RunConfig::default();
        cfg.grid.policy = GridPolicyChoice::Geometric;
        assert!(cfg
            .validate()
            .unwrap_err()
            .to_string()
            .contains("grid.first_step"));

        let mut cfg = RunConfig::default();
        cfg.sweep.omegas = Some(vec![10.0, 10.0]);
        assert!(cfg.validate().unwrap_err().to_string().contains("sweep.omegas"));

        let mut cfg = RunConfig::default();
        cfg.sweep.omegas = Some(vec![10.0]);
        cfg.sweep.geometric = Some(GeometricRange {
            min: 1.0,
            max: 10.0,
            count: 3,
        });
        assert!(cfg.validate().unwrap_err().to_string().contains("sweep"));
    }

    #[test]
    fn config_round_trips_through_toml() {
        let cfg = RunConfig::default();
        let text = toml::to_string(&cfg).unwrap();
        let back: RunConfig = toml::from_str(&text).unwrap();
        assert_eq!(serde_json::to_string(&cfg).unwrap(), serde_json::to_string(&back).unwrap());
    }
}
