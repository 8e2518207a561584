//! Run configuration: one JSON document covering the medium, the incident
//! wave, the time grid, both discretizations, the observation circle, the
//! noise model and the true obstacle. Every field defaults to the reference
//! experiment (apple-shaped obstacle, compressional wave at θ = 15π/16,
//! δ = 0.1% noise), so `simulate` + `invert` with no overrides reproduce it.

use crate::forward::{ElasticMedium, ForwardError, IncidentWave, Scene, WaveKind};
use crate::geometry::{CurveJson, ObservationCircle, Point, StarCurve};
use crate::inverse::InverseConfig;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// A value that may be spelled `"auto"` in the configuration file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AutoOr<T> {
    Auto(AutoTag),
    Value(T),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AutoTag {
    #[serde(rename = "auto")]
    Auto,
}

impl<T: Copy> AutoOr<T> {
    pub fn resolved(&self) -> Option<T> {
        match self {
            AutoOr::Auto(_) => None,
            AutoOr::Value(v) => Some(*v),
        }
    }
}

impl<T> Default for AutoOr<T> {
    fn default() -> Self {
        AutoOr::Auto(AutoTag::Auto)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MediumConfig {
    pub lambda: f64,
    pub mu: f64,
}

impl Default for MediumConfig {
    fn default() -> Self {
        MediumConfig {
            lambda: 3.88,
            mu: 2.56,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WaveConfig {
    pub kind: WaveKind,
    pub theta_inc: f64,
    #[serde(rename = "R0")]
    pub r0: f64,
    pub tw: f64,
    pub amplitude: f64,
}

impl Default for WaveConfig {
    fn default() -> Self {
        WaveConfig {
            kind: WaveKind::Compressional,
            theta_inc: 15.0 * PI / 16.0,
            r0: 1.2,
            tw: 5.0,
            amplitude: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeConfig {
    #[serde(rename = "T")]
    pub t_final: f64,
    #[serde(rename = "N")]
    pub n_steps: usize,
    pub lambda_tilde: AutoOr<f64>,
}

impl Default for TimeConfig {
    fn default() -> Self {
        TimeConfig {
            t_final: 10.0,
            n_steps: 128,
            lambda_tilde: AutoOr::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForwardConfig {
    pub n_tilde: usize,
}

impl Default for ForwardConfig {
    fn default() -> Self {
        ForwardConfig { n_tilde: 50 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialGuessConfig {
    pub r0: f64,
    pub center: [f64; 2],
}

impl Default for InitialGuessConfig {
    fn default() -> Self {
        InitialGuessConfig {
            r0: 0.4,
            center: [-1.35, -0.35],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InversionConfig {
    pub n_tilde: usize,
    #[serde(rename = "M")]
    pub degree: usize,
    pub rho: f64,
    #[serde(rename = "loop")]
    pub loop_per_freq: usize,
    pub epsilon: AutoOr<f64>,
    pub epsilon_tilde: f64,
    pub max_ll: AutoOr<usize>,
    pub initial: InitialGuessConfig,
}

impl Default for InversionConfig {
    fn default() -> Self {
        InversionConfig {
            n_tilde: 32,
            degree: 3,
            rho: 0.9,
            loop_per_freq: 4,
            epsilon: AutoOr::default(),
            epsilon_tilde: 1e-6,
            max_ll: AutoOr::default(),
            initial: InitialGuessConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObsConfig {
    pub b: [f64; 2],
    #[serde(rename = "R")]
    pub radius: f64,
    pub n_bar: usize,
}

impl Default for ObsConfig {
    fn default() -> Self {
        ObsConfig {
            b: [0.0, 0.0],
            radius: 2.0,
            n_bar: 30,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    pub delta: f64,
    pub seed: u64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            delta: 0.001,
            seed: 7,
        }
    }
}

fn default_truth() -> CurveJson {
    CurveJson {
        center: [0.0, 0.0],
        kind: "apple".to_string(),
        alpha: vec![],
        beta: vec![],
        r0: None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub medium: MediumConfig,
    pub wave: WaveConfig,
    pub time: TimeConfig,
    pub forward: ForwardConfig,
    pub inverse: InversionConfig,
    pub obs: ObsConfig,
    pub noise: NoiseConfig,
    pub truth: CurveJson,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            medium: MediumConfig::default(),
            wave: WaveConfig::default(),
            time: TimeConfig::default(),
            forward: ForwardConfig::default(),
            inverse: InversionConfig::default(),
            obs: ObsConfig::default(),
            noise: NoiseConfig::default(),
            truth: default_truth(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn medium(&self) -> Result<ElasticMedium, ForwardError> {
        ElasticMedium::new(self.medium.lambda, self.medium.mu)
    }

    pub fn wave(&self) -> IncidentWave {
        IncidentWave {
            kind: self.wave.kind,
            angle: self.wave.theta_inc,
            amplitude: self.wave.amplitude,
            offset: self.wave.r0,
            window: self.wave.tw,
        }
    }

    pub fn observation(&self) -> Result<ObservationCircle, crate::geometry::GeometryError> {
        ObservationCircle::new(
            Point::new(self.obs.b[0], self.obs.b[1]),
            self.obs.radius,
            self.obs.n_bar,
        )
    }

    pub fn scene(&self) -> Result<Scene, String> {
        Ok(Scene {
            medium: self.medium().map_err(|e| e.to_string())?,
            wave: self.wave(),
            obs: self.observation().map_err(|e| e.to_string())?,
            t_final: self.time.t_final,
            n_steps: self.time.n_steps,
            lambda_tilde: self.time.lambda_tilde.resolved(),
        })
    }

    pub fn truth_curve(&self) -> Result<StarCurve, crate::geometry::GeometryError> {
        StarCurve::try_from(&self.truth)
    }

    /// Stopping tolerance: explicit value, or max(2δ, 1e-3).
    pub fn epsilon(&self) -> f64 {
        self.inverse
            .epsilon
            .resolved()
            .unwrap_or_else(|| (2.0 * self.noise.delta).max(1e-3))
    }

    pub fn inverse_config(&self) -> InverseConfig {
        let mut cfg = InverseConfig::with_defaults(self.noise.delta, self.time.n_steps);
        cfg.n_half = self.inverse.n_tilde;
        cfg.degree = self.inverse.degree;
        cfg.rho = self.inverse.rho;
        cfg.loop_per_freq = self.inverse.loop_per_freq;
        cfg.epsilon = self.epsilon();
        cfg.epsilon_tilde = self.inverse.epsilon_tilde;
        cfg.max_ll = self
            .inverse
            .max_ll
            .resolved()
            .unwrap_or((self.time.n_steps + 1) * self.inverse.loop_per_freq);
        cfg.initial_center = Point::new(self.inverse.initial.center[0], self.inverse.initial.center[1]);
        cfg.initial_r0 = self.inverse.initial.r0;
        cfg
    }

    /// Field-level validation; `allow_inverse_crime` downgrades the matched
    /// forward/inverse grid check to a warning (returned separately).
    pub fn validate(&self, allow_inverse_crime: bool) -> (Vec<String>, Vec<String>) {
        let mut errors = Vec::new();
        let mut warnings = Vec::new();
        if let Err(e) = self.medium() {
            errors.push(format!("medium: {e}"));
        }
        if !(self.time.t_final > 0.0) {
            errors.push(format!("time.T: must be positive, got {}", self.time.t_final));
        }
        if self.time.n_steps < 1 {
            errors.push("time.N: need at least one step".to_string());
        }
        if let Some(l) = self.time.lambda_tilde.resolved() {
            if !(l > 0.0 && l < 1.0) {
                errors.push(format!("time.lambda_tilde: must lie in (0,1), got {l}"));
            }
        }
        if self.forward.n_tilde < 2 {
            errors.push("forward.n_tilde: need at least 2".to_string());
        }
        if self.inverse.n_tilde < 2 {
            errors.push("inverse.n_tilde: need at least 2".to_string());
        }
        if self.inverse.loop_per_freq == 0 {
            errors.push("inverse.loop: must be positive".to_string());
        }
        if !(self.inverse.rho >= 0.0) {
            errors.push(format!("inverse.rho: must be nonnegative, got {}", self.inverse.rho));
        }
        if !(self.noise.delta >= 0.0) {
            errors.push(format!("noise.delta: must be nonnegative, got {}", self.noise.delta));
        }
        if self.forward.n_tilde == self.inverse.n_tilde {
            let msg = format!(
                "forward.n_tilde == inverse.n_tilde == {}: data and inversion share a grid \
                 (inverse crime)",
                self.forward.n_tilde
            );
            if allow_inverse_crime {
                warnings.push(msg);
            } else {
                errors.push(msg + "; pass --allow-inverse-crime to proceed");
            }
        }
        match self.truth_curve() {
            Err(e) => errors.push(format!("truth: {e}")),
            Ok(curve) => {
                if let Ok(obs) = self.observation() {
                    if let Err(e) = obs.check_encloses(&curve) {
                        errors.push(format!("obs: {e}"));
                    }
                }
            }
        }
        if let Err(e) = self.observation() {
            errors.push(format!("obs: {e}"));
        }
        (errors, warnings)
    }
}
