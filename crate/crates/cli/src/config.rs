//! Run configuration: a flat TOML file whose keys mirror the command-line
//! flags. Every key has a default, so an empty file is a valid config.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use reorient::collocation::{MAX_INTERVAL_POINTS, MIN_INTERVAL_POINTS};
use reorient::dynamics::{BoundaryConditions, BUILTIN_MANEUVERS};
use reorient::oracle::VerificationOptions;
use reorient::structure::BbsocOptions;
use reorient::{builtin_maneuver, Maneuver, SpacecraftModel, State, Terminal, TorqueMode};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Built-in maneuver name, a comma-separated list, or `all`. With an
    /// inline definition this is the name of the custom maneuver.
    pub maneuver: String,
    /// `two` or `three`; the maneuver's own mode when unset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub torque_mode: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u_max: Option<f64>,
    /// Inline definition: inertia ratio, initial state and terminal state
    /// (numbers or "free"), all three together.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_state: Option<[f64; 5]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub terminal: Option<[Terminal; 5]>,
    pub mesh_intervals: usize,
    pub mesh_points: usize,
    pub eps_mesh: f64,
    pub eps_nlp: f64,
    pub max_mesh_rounds: usize,
    pub max_nlp_iterations: usize,
    pub regularization_eps0: f64,
    pub regularization_reduction: f64,
    pub regularization_delta: f64,
    pub regularization_max_iterations: usize,
    pub samples: usize,
    pub verify: bool,
    /// Largest accepted direct/indirect state discrepancy.
    pub verify_state_tolerance: f64,
    pub out: PathBuf,
    pub jobs: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let b = BbsocOptions::default();
        Self {
            maneuver: "RTR".into(),
            torque_mode: None,
            u_min: None,
            u_max: None,
            a: None,
            initial_state: None,
            terminal: None,
            mesh_intervals: b.mesh_intervals,
            mesh_points: b.mesh_points,
            eps_mesh: b.refinement.tolerance,
            eps_nlp: b.nlp.tol,
            max_mesh_rounds: b.refinement.max_rounds,
            max_nlp_iterations: b.nlp.max_iter,
            regularization_eps0: b.schedule.epsilon0,
            regularization_reduction: b.schedule.reduction,
            regularization_delta: b.schedule.delta_tolerance,
            regularization_max_iterations: b.schedule.max_iterations,
            samples: b.samples,
            verify: false,
            verify_state_tolerance: VerificationOptions::default().state_tolerance,
            out: PathBuf::from("out"),
            jobs: 1,
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    fn inline(&self) -> Result<bool> {
        match (self.a, self.initial_state, self.terminal) {
            (None, None, None) => Ok(false),
            (Some(_), Some(_), Some(_)) => Ok(true),
            _ => bail!("an inline maneuver needs `a`, `initial_state` and `terminal` together"),
        }
    }

    /// Maneuver names this config runs.
    pub fn maneuver_names(&self) -> Result<Vec<String>> {
        if self.inline()? {
            return Ok(vec![self.maneuver.trim().to_string()]);
        }
        let names: Vec<String> = if self.maneuver.trim().eq_ignore_ascii_case("all") {
            BUILTIN_MANEUVERS.iter().map(|s| s.to_string()).collect()
        } else {
            self.maneuver.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
        };
        if names.is_empty() {
            bail!("no maneuver given");
        }
        Ok(names)
    }

    /// The same config restricted to one maneuver.
    pub fn single(&self, name: &str) -> Self {
        Self { maneuver: name.to_string(), ..self.clone() }
    }

    /// Resolves the maneuver of a single-maneuver config with all overrides.
    pub fn build_maneuver(&self) -> Result<Maneuver> {
        let mut man = if self.inline()? {
            let (a, y0, yf) = (self.a.unwrap(), self.initial_state.unwrap(), self.terminal.unwrap());
            let mode = TorqueMode::ThreeTorque;
            Maneuver {
                name: self.maneuver.trim().to_string(),
                model: SpacecraftModel::with_default_bounds(a, mode)?,
                bc: BoundaryConditions::new(State::new(y0[0], y0[1], y0[2], y0[3], y0[4]), yf)?,
            }
        } else {
            builtin_maneuver(&self.maneuver)?
        };
        if let Some(mode) = &self.torque_mode {
            man.model = man.model.with_torque_mode(mode.parse()?);
        }
        let u_min = self.u_min.unwrap_or(man.model.u_min());
        let u_max = self.u_max.unwrap_or(man.model.u_max());
        man.model = man.model.with_bounds(u_min, u_max)?;
        man.validate()?;
        Ok(man)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("eps_mesh", self.eps_mesh),
            ("eps_nlp", self.eps_nlp),
            ("regularization_eps0", self.regularization_eps0),
            ("regularization_delta", self.regularization_delta),
            ("verify_state_tolerance", self.verify_state_tolerance),
        ];
        for (key, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                bail!("`{key}` must be positive, got {v}");
            }
        }
        if self.regularization_reduction.is_nan() || self.regularization_reduction <= 1.0 {
            bail!("`regularization_reduction` must exceed 1, got {}", self.regularization_reduction);
        }
        if !(MIN_INTERVAL_POINTS..=MAX_INTERVAL_POINTS).contains(&self.mesh_points) {
            bail!("`mesh_points` must lie in {MIN_INTERVAL_POINTS}..={MAX_INTERVAL_POINTS}, got {}", self.mesh_points);
        }
        if self.mesh_intervals == 0 {
            bail!("`mesh_intervals` must be at least 1");
        }
        if self.samples < 2 {
            bail!("`samples` must be at least 2");
        }
        if self.jobs == 0 {
            bail!("`jobs` must be at least 1");
        }
        if let Some(mode) = &self.torque_mode {
            mode.parse::<TorqueMode>()?;
        }
        for name in self.maneuver_names()? {
            self.single(&name).build_maneuver()?;
        }
        Ok(())
    }

    pub fn solver_options(&self) -> BbsocOptions {
        let mut o = BbsocOptions {
            mesh_intervals: self.mesh_intervals,
            mesh_points: self.mesh_points,
            samples: self.samples,
            ..Default::default()
        };
        o.refinement.tolerance = self.eps_mesh;
        o.refinement.max_rounds = self.max_mesh_rounds;
        o.nlp.tol = self.eps_nlp;
        o.nlp.max_iter = self.max_nlp_iterations;
        o.nlp.acceptable_iter = self.max_nlp_iterations;
        o.nlp.check_derivatives = false;
        o.schedule.epsilon0 = self.regularization_eps0;
        o.schedule.reduction = self.regularization_reduction;
        o.schedule.delta_tolerance = self.regularization_delta;
        o.schedule.max_iterations = self.regularization_max_iterations;
        o
    }

    pub fn verification_options(&self) -> VerificationOptions {
        VerificationOptions { state_tolerance: self.verify_state_tolerance, ..Default::default() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_default() {
        let c: RunConfig = toml::from_str("").unwrap();
        assert_eq!(c, RunConfig::default());
        c.validate().unwrap();
    }

    #[test]
    fn echo_round_trips() {
        let c = RunConfig { torque_mode: Some("two".into()), eps_mesh: 3e-6, ..Default::default() };
        let back: RunConfig = toml::from_str(&c.to_toml()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn inline_maneuver_round_trips() {
        let text = "maneuver = \"MINE\"\na = 0.0\ninitial_state = [0, 0, -0.3, 0, 0]\nterminal = [1, 2, -0.3, \"free\", \"free\"]\ntorque_mode = \"two\"\n";
        let c: RunConfig = toml::from_str(text).unwrap();
        let m = c.build_maneuver().unwrap();
        assert_eq!(m.name, "MINE");
        assert!(m.bc.terminal[3].is_free());
        let back: RunConfig = toml::from_str(&c.to_toml()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn rejects_bad_values() {
        for text in ["eps_mesh = -1.0", "mesh_points = 13", "maneuver = \"NOPE\"", "torque_mode = \"four\"", "a = 0.5", "bogus = 1"] {
            let parsed: Result<RunConfig> = toml::from_str(text).map_err(Into::into);
            assert!(parsed.and_then(|c| c.validate()).is_err(), "{text}");
        }
    }
}
