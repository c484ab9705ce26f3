use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{CdError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Stability,
    InvertMatrix,
    Gabor,
    Almostdiag,
    InvertWeyl,
    Framesymbol,
    Verify,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Stability => "stability",
            ExperimentKind::InvertMatrix => "invert-matrix",
            ExperimentKind::Gabor => "gabor",
            ExperimentKind::Almostdiag => "almostdiag",
            ExperimentKind::InvertWeyl => "invert-weyl",
            ExperimentKind::Framesymbol => "framesymbol",
            ExperimentKind::Verify => "verify",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixFamily {
    /// `I + coupling·Toeplitz(e^{−decay|k|})`.
    ToeplitzExp,
    /// `I + coupling·Toeplitz((1+|k|)^{−decay})`, slowly decaying.
    ToeplitzPower,
    Identity,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MatrixSpec {
    pub family: MatrixFamily,
    pub dim: usize,
    pub coupling: f64,
    pub decay: f64,
}

impl Default for MatrixSpec {
    fn default() -> Self {
        Self {
            family: MatrixFamily::ToeplitzExp,
            dim: 1,
            coupling: 0.1,
            decay: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StabilityParams {
    #[serde(with = "crate::extreal::vec")]
    pub p: Vec<f64>,
    #[serde(with = "crate::extreal::vec")]
    pub q: Vec<f64>,
    pub radii: Vec<f64>,
    /// Random-search starts for the empirical lower bounds.
    pub starts: usize,
}

impl Default for StabilityParams {
    fn default() -> Self {
        Self {
            p: vec![2.0],
            q: vec![0.5, 1.0, f64::INFINITY],
            radii: vec![64.0],
            starts: 1000,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InverseParams {
    pub p: f64,
    pub p0: f64,
    pub radii: Vec<f64>,
    /// Fixed ε instead of the sweep.
    pub eps: Option<f64>,
    /// Grid step for sampling `H̃^{1/p0}`.
    pub envelope_step: f64,
}

impl Default for InverseParams {
    fn default() -> Self {
        Self {
            p: 2.0,
            p0: 0.5,
            radii: vec![64.0, 128.0],
            eps: None,
            envelope_step: 0.25,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowFamily {
    Gaussian,
    /// Hermite function of the given order.
    Hermite(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SymbolFamily {
    One,
    Zero,
    /// `e^{−π(x²+ξ²)}`.
    Gaussian,
    /// `1 + amplitude·e^{−π(x²+ξ²)}`.
    OnePlusBump,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GaborSpec {
    pub step: f64,
    pub radius: f64,
    pub alpha: f64,
    pub beta: f64,
    pub window: WindowFamily,
    pub symbol: SymbolFamily,
    pub amplitude: f64,
    pub p0: f64,
    /// Grid steps swept by `almostdiag`.
    pub steps: Vec<f64>,
    /// Radii swept by `invert-weyl`.
    pub radii: Vec<f64>,
    /// Hermite test functions `0..hermite`.
    pub hermite: usize,
}

impl Default for GaborSpec {
    fn default() -> Self {
        Self {
            step: 1.0 / 16.0,
            radius: 8.0,
            alpha: 0.5,
            beta: 0.5,
            window: WindowFamily::Gaussian,
            symbol: SymbolFamily::OnePlusBump,
            amplitude: 0.3,
            p0: 0.5,
            steps: vec![1.0 / 16.0, 1.0 / 32.0],
            radii: vec![8.0, 16.0],
            hermite: 5,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Budget threshold of the ε sweep.
    pub threshold: f64,
    pub eps_floor: f64,
    pub neumann_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            threshold: 0.5,
            eps_floor: 2f64.powi(-12),
            neumann_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Must agree with the subcommand when present.
    pub experiment: Option<ExperimentKind>,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub matrix: MatrixSpec,
    pub stability: StabilityParams,
    pub inverse: InverseParams,
    pub gabor: GaborSpec,
    pub tolerances: Tolerances,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| CdError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(CdError::param(m));
        let pos = |x: f64| x > 0.0 && !x.is_nan();
        if self.matrix.dim == 0 || self.matrix.dim > 3 {
            return bad("matrix.dim must be 1, 2 or 3");
        }
        if !self.matrix.coupling.is_finite() || !pos(self.matrix.decay) {
            return bad("matrix.coupling must be finite and matrix.decay positive");
        }
        let s = &self.stability;
        if s.p.is_empty() || s.q.is_empty() || s.radii.is_empty() {
            return bad("stability.p, stability.q and stability.radii must be nonempty");
        }
        if !s.p.iter().chain(&s.q).all(|&x| pos(x)) || !s.radii.iter().all(|&r| pos(r) && r.is_finite()) {
            return bad("exponents must lie in (0, inf] and radii be positive");
        }
        let i = &self.inverse;
        if !pos(i.p) || !(pos(i.p0) && i.p0 <= 1.0) || i.radii.is_empty() || !i.radii.iter().all(|&r| pos(r) && r.is_finite()) {
            return bad("inverse.p > 0, 0 < inverse.p0 <= 1 and positive radii required");
        }
        if i.eps.is_some_and(|e| !(pos(e) && e <= 1.0)) || !pos(i.envelope_step) {
            return bad("inverse.eps must lie in (0, 1] and inverse.envelope_step be positive");
        }
        let g = &self.gabor;
        if ![g.step, g.radius, g.alpha, g.beta, g.p0].iter().all(|&x| pos(x) && x.is_finite()) || g.p0 > 1.0 {
            return bad("gabor step, radius, alpha, beta positive and 0 < p0 <= 1 required");
        }
        if g.steps.iter().chain(&g.radii).any(|&x| !pos(x)) || g.hermite == 0 {
            return bad("gabor.steps and gabor.radii positive, gabor.hermite >= 1 required");
        }
        let t = &self.tolerances;
        if !(pos(t.threshold) && t.threshold < 1.0) || !(pos(t.eps_floor) && t.eps_floor <= 1.0) || !pos(t.neumann_tol) {
            return bad("tolerances out of range");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_defaults() {
        let c = ExperimentConfig::from_toml(
            r#"
            experiment = "invert-weyl"
            seed = 7
            [stability]
            q = [0.5, "inf"]
            [gabor]
            symbol = "one"
            window = { hermite = 2 }
            "#,
        )
        .unwrap();
        assert_eq!(c.experiment, Some(ExperimentKind::InvertWeyl));
        assert!(c.stability.q[1].is_infinite());
        assert_eq!(c.gabor.window, WindowFamily::Hermite(2));
        assert_eq!(c.inverse.p0, 0.5);
        let again = ExperimentConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(again.stability.q, c.stability.q);
        assert!(ExperimentConfig::from_toml("bogus = 1").is_err());
        assert!(ExperimentConfig::from_toml("[inverse]\np0 = 2.0").is_err());
    }
}
