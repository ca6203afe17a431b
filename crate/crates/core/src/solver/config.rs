//! Run configuration: parameter struct, validation, and the flat key=value
//! encoding used both by config files and by trajectory metadata.

use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::noise::{NoiseFamily, NoiseSpec};
use crate::profile::{InterfaceGeometry, LambdaFormula, StripAxis};
use crate::spectral::SpectralField;

/// Time discretization of the fourth-order linear part.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scheme {
    /// Implicit bilaplacian, explicit nonlinearity.
    SemiImplicit,
    /// Same, plus an implicit-explicit Laplacian shift (S / eps) (u' - u)
    /// that damps the stiff explicit drift; S of at least half the Lipschitz
    /// bound of the force on the invariant range keeps the energy decaying.
    StabilizedSplit { stabilization: f64 },
}

impl Scheme {
    pub fn stabilization(&self) -> f64 {
        match *self {
            Scheme::SemiImplicit => 0.0,
            Scheme::StabilizedSplit { stabilization } => stabilization,
        }
    }
}

/// How the drift is recentered by the noise variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RenormMode {
    Off,
    /// Subtract 3 c(t, x) u with the spatially varying variance field.
    Pointwise,
    /// Subtract 3 c_avg(t) u with the spatial average.
    Average,
}

/// Force entering the chemical potential; Zero exists so the linear regime
/// can be exercised in isolation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Nonlinearity {
    DoubleWell,
    Zero,
}

/// Initial state of a run.
#[derive(Debug, Clone)]
pub enum InitialData {
    /// The tanh transition profile of a given interface geometry.
    Profile(InterfaceGeometry),
    /// A spatially constant state.
    Constant(f64),
    /// Coefficients loaded from a snapshot file.
    File(PathBuf),
    /// Coefficients handed over directly.
    Field(SpectralField),
}

/// Everything a single trajectory needs. Fields are public; call
/// [`SolverConfig::validate`] after manual construction.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Mode cutoff N per axis; the dealiased grid is 2N x 2N.
    pub cutoff: usize,
    pub eps: f64,
    pub dt: f64,
    /// Time horizon T; realized as round(T / dt) steps.
    pub horizon: f64,
    pub scheme: Scheme,
    /// None runs the deterministic equation.
    pub noise: Option<NoiseSpec>,
    pub renorm: RenormMode,
    pub initial: InitialData,
    pub nonlinearity: Nonlinearity,
    pub lambda_formula: LambdaFormula,
    /// Track Y = u - u_A - Z and its running cubed-norm integral. Requires a
    /// Profile initial state (that profile is the reference u_A).
    pub track_residual: bool,
    pub seed: u64,
    pub replica: u64,
    /// Steps between snapshots; 0 picks max(1, steps / 200).
    pub snapshot_cadence: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let eps = 0.05;
        Self {
            cutoff: 64,
            eps,
            dt: default_dt(eps),
            horizon: 1e-3,
            scheme: Scheme::StabilizedSplit { stabilization: 2.0 },
            noise: None,
            renorm: RenormMode::Off,
            initial: InitialData::Profile(InterfaceGeometry::circle([0.5, 0.5], 0.25)),
            nonlinearity: Nonlinearity::DoubleWell,
            lambda_formula: LambdaFormula::PotentialIntegral,
            track_residual: false,
            seed: 0,
            replica: 0,
            snapshot_cadence: 0,
        }
    }
}

/// Default step size: resolve the 1 / eps drift time scale, capped for the
/// larger eps values.
pub fn default_dt(eps: f64) -> f64 {
    (eps * eps * eps).min(1e-5)
}

fn err(msg: String) -> Error {
    Error::Config(msg)
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps <= 0.5) {
            return Err(err(format!("solver.eps must lie in (0, 0.5], got {}", self.eps)));
        }
        if !(self.dt > 0.0) {
            return Err(err(format!("solver.dt must be positive, got {}", self.dt)));
        }
        if !(self.horizon >= 0.0) {
            return Err(err(format!("solver.T must be nonnegative, got {}", self.horizon)));
        }
        if self.cutoff < 2 || self.cutoff > 1024 || !self.cutoff.is_power_of_two() {
            return Err(err(format!(
                "solver.cutoff must be a power of two in [2, 1024], got {}",
                self.cutoff
            )));
        }
        if self.scheme.stabilization() < 0.0 {
            return Err(err(format!(
                "solver.stabilization must be nonnegative, got {}",
                self.scheme.stabilization()
            )));
        }
        if let Some(spec) = &self.noise {
            spec.validate()?;
            if spec.cutoff != self.cutoff {
                return Err(Error::CutoffMismatch { left: spec.cutoff, right: self.cutoff });
            }
        }
        if self.renorm != RenormMode::Off {
            match &self.noise {
                Some(spec) if spec.family == NoiseFamily::Divergence => {}
                _ => return Err(Error::RenormWithoutMollifier),
            }
        }
        if self.track_residual && !matches!(self.initial, InitialData::Profile(_)) {
            return Err(err(
                "solver.track_residual needs initial.kind = profile (the profile is the residual reference)"
                    .into(),
            ));
        }
        if let InitialData::Profile(geom) = &self.initial {
            geom.validate_clearance(self.eps)?;
        }
        Ok(())
    }

    /// Encode as ordered key=value pairs. `apply_key_values` on a default
    /// config round-trips every encodable variant (Field initials are the
    /// exception; trajectory saving materializes them to a file first).
    pub fn to_key_values(&self) -> Vec<(String, String)> {
        let mut kv: Vec<(String, String)> = Vec::new();
        let mut push = |k: &str, v: String| kv.push((k.to_string(), v));
        push("solver.cutoff", self.cutoff.to_string());
        push("solver.eps", format!("{:.17e}", self.eps));
        push("solver.dt", format!("{:.17e}", self.dt));
        push("solver.T", format!("{:.17e}", self.horizon));
        push(
            "solver.scheme",
            match self.scheme {
                Scheme::SemiImplicit => "semi-implicit".into(),
                Scheme::StabilizedSplit { .. } => "stabilized".into(),
            },
        );
        push("solver.stabilization", format!("{:.17e}", self.scheme.stabilization()));
        push(
            "solver.nonlinearity",
            match self.nonlinearity {
                Nonlinearity::DoubleWell => "double-well".into(),
                Nonlinearity::Zero => "zero".into(),
            },
        );
        push("solver.seed", self.seed.to_string());
        push("solver.replica", self.replica.to_string());
        push("solver.track_residual", self.track_residual.to_string());
        push("output.cadence", self.snapshot_cadence.to_string());
        match &self.noise {
            None => push("noise.family", "off".into()),
            Some(spec) => {
                push(
                    "noise.family",
                    match spec.family {
                        NoiseFamily::White => "white".into(),
                        NoiseFamily::Divergence => "divergence".into(),
                    },
                );
                push("noise.sigma", format!("{:.17e}", spec.sigma));
                push("noise.h", format!("{:.17e}", spec.h));
            }
        }
        push(
            "renorm.mode",
            match self.renorm {
                RenormMode::Off => "off".into(),
                RenormMode::Pointwise => "pointwise".into(),
                RenormMode::Average => "average".into(),
            },
        );
        push(
            "profile.lambda_formula",
            match self.lambda_formula {
                LambdaFormula::PotentialIntegral => "potential-integral".into(),
                LambdaFormula::Classical => "classical".into(),
                LambdaFormula::GibbsThomson => "gibbs-thomson".into(),
            },
        );
        match &self.initial {
            InitialData::Profile(geom) => {
                push("initial.kind", "profile".into());
                match geom {
                    InterfaceGeometry::Circle { center, radius } => {
                        push("interface.shape", "circle".into());
                        push(
                            "interface.center",
                            format!("{:.17e},{:.17e}", center[0], center[1]),
                        );
                        push("interface.radius", format!("{:.17e}", radius));
                    }
                    InterfaceGeometry::FlatStrip { position, normal_axis } => {
                        push("interface.shape", "strip".into());
                        push("interface.strip_position", format!("{:.17e}", position));
                        push(
                            "interface.strip_axis",
                            match normal_axis {
                                StripAxis::X1 => "1".into(),
                                StripAxis::X2 => "2".into(),
                            },
                        );
                    }
                }
            }
            InitialData::Constant(v) => {
                push("initial.kind", "constant".into());
                push("initial.value", format!("{:.17e}", v));
            }
            InitialData::File(path) => {
                push("initial.kind", "file".into());
                push("initial.path", path.display().to_string());
            }
            InitialData::Field(_) => {
                push("initial.kind", "field".into());
            }
        }
        kv
    }

    /// Overlay key=value pairs onto this configuration; unknown keys and
    /// malformed values are errors naming the key. The result is validated.
    pub fn apply_key_values(mut self, pairs: &[(String, String)]) -> Result<Self> {
        // Geometry and noise arrive scattered over several keys; collect into
        // scratch values seeded from the current config, rebuild at the end.
        let (mut family, mut sigma, mut h) = match &self.noise {
            Some(spec) => (
                match spec.family {
                    NoiseFamily::White => "white".to_string(),
                    NoiseFamily::Divergence => "divergence".to_string(),
                },
                spec.sigma,
                spec.h,
            ),
            None => ("off".to_string(), 1.0, 0.125),
        };
        let (mut scheme_kind, mut stabilization) = match self.scheme {
            Scheme::SemiImplicit => ("semi-implicit".to_string(), 2.0),
            Scheme::StabilizedSplit { stabilization } => ("stabilized".to_string(), stabilization),
        };
        let seed_geom = match &self.initial {
            InitialData::Profile(g) => Some(*g),
            _ => None,
        };
        let mut shape = match seed_geom {
            Some(InterfaceGeometry::FlatStrip { .. }) => "strip".to_string(),
            _ => "circle".to_string(),
        };
        let (mut center, mut radius) = match seed_geom {
            Some(InterfaceGeometry::Circle { center, radius }) => (center, radius),
            _ => ([0.5, 0.5], 0.25),
        };
        let (mut strip_position, mut strip_axis) = match seed_geom {
            Some(InterfaceGeometry::FlatStrip { position, normal_axis }) => {
                (position, normal_axis)
            }
            _ => (0.5, StripAxis::X1),
        };
        let mut initial_kind = match &self.initial {
            InitialData::Profile(_) => "profile".to_string(),
            InitialData::Constant(_) => "constant".to_string(),
            InitialData::File(_) => "file".to_string(),
            InitialData::Field(_) => "field".to_string(),
        };
        let mut initial_value = match &self.initial {
            InitialData::Constant(v) => *v,
            _ => 0.0,
        };
        let mut initial_path = match &self.initial {
            InitialData::File(p) => p.clone(),
            _ => PathBuf::new(),
        };

        for (key, value) in pairs {
            match key.as_str() {
                "solver.cutoff" => self.cutoff = parse(key, value)?,
                "solver.eps" => self.eps = parse(key, value)?,
                "solver.dt" => self.dt = parse(key, value)?,
                "solver.T" => self.horizon = parse(key, value)?,
                "solver.scheme" => {
                    match value.as_str() {
                        "semi-implicit" | "stabilized" => scheme_kind = value.clone(),
                        other => {
                            return Err(err(format!(
                                "solver.scheme must be semi-implicit or stabilized, got {other}"
                            )))
                        }
                    };
                }
                "solver.stabilization" => stabilization = parse(key, value)?,
                "solver.nonlinearity" => {
                    self.nonlinearity = match value.as_str() {
                        "double-well" => Nonlinearity::DoubleWell,
                        "zero" => Nonlinearity::Zero,
                        other => {
                            return Err(err(format!(
                                "solver.nonlinearity must be double-well or zero, got {other}"
                            )))
                        }
                    }
                }
                "solver.seed" => self.seed = parse(key, value)?,
                "solver.replica" => self.replica = parse(key, value)?,
                "solver.track_residual" => self.track_residual = parse(key, value)?,
                "output.cadence" => self.snapshot_cadence = parse(key, value)?,
                "noise.family" => {
                    match value.as_str() {
                        "off" | "white" | "divergence" => family = value.clone(),
                        other => {
                            return Err(err(format!(
                                "noise.family must be off, white, or divergence, got {other}"
                            )))
                        }
                    };
                }
                "noise.sigma" => {
                    sigma = parse(key, value)?;
                    if !(sigma >= 0.0) {
                        return Err(err(format!("noise.sigma must be >= 0, got {sigma}")));
                    }
                }
                "noise.h" => {
                    h = parse(key, value)?;
                    if !(h > 0.0 && h <= 1.0) {
                        return Err(err(format!("noise.h must lie in (0, 1], got {h}")));
                    }
                }
                "renorm.mode" => {
                    self.renorm = match value.as_str() {
                        "off" => RenormMode::Off,
                        "pointwise" => RenormMode::Pointwise,
                        "average" => RenormMode::Average,
                        other => {
                            return Err(err(format!(
                                "renorm.mode must be off, pointwise, or average, got {other}"
                            )))
                        }
                    }
                }
                "profile.lambda_formula" => {
                    self.lambda_formula = match value.as_str() {
                        "potential-integral" => LambdaFormula::PotentialIntegral,
                        "classical" => LambdaFormula::Classical,
                        "gibbs-thomson" => LambdaFormula::GibbsThomson,
                        other => {
                            return Err(err(format!(
                                "profile.lambda_formula must be potential-integral, classical, or gibbs-thomson, got {other}"
                            )))
                        }
                    }
                }
                "initial.kind" => {
                    match value.as_str() {
                        "profile" | "constant" | "file" => initial_kind = value.clone(),
                        other => {
                            return Err(err(format!(
                                "initial.kind must be profile, constant, or file, got {other}"
                            )))
                        }
                    };
                }
                "initial.value" => initial_value = parse(key, value)?,
                "initial.path" => initial_path = PathBuf::from(value),
                "interface.shape" => {
                    match value.as_str() {
                        "circle" | "strip" => shape = value.clone(),
                        other => {
                            return Err(err(format!(
                                "interface.shape must be circle or strip, got {other}"
                            )))
                        }
                    };
                }
                "interface.center" => {
                    let parts: Vec<&str> = value.split(',').collect();
                    if parts.len() != 2 {
                        return Err(err(format!(
                            "interface.center needs two comma-separated coordinates, got {value}"
                        )));
                    }
                    center = [parse(key, parts[0].trim())?, parse(key, parts[1].trim())?];
                }
                "interface.radius" => radius = parse(key, value)?,
                "interface.strip_position" => strip_position = parse(key, value)?,
                "interface.strip_axis" => {
                    strip_axis = match value.as_str() {
                        "1" => StripAxis::X1,
                        "2" => StripAxis::X2,
                        other => {
                            return Err(err(format!(
                                "interface.strip_axis must be 1 or 2, got {other}"
                            )))
                        }
                    }
                }
                other => {
                    return Err(err(format!(
                        "unknown configuration key {other}; see the README for the accepted keys"
                    )))
                }
            }
        }

        self.scheme = match scheme_kind.as_str() {
            "semi-implicit" => Scheme::SemiImplicit,
            "stabilized" => Scheme::StabilizedSplit { stabilization },
            _ => unreachable!("scheme vetted above"),
        };
        self.noise = match family.as_str() {
            "off" => None,
            "white" => Some(NoiseSpec::white(sigma, self.cutoff)),
            "divergence" => Some(NoiseSpec::divergence(sigma, h, self.cutoff)),
            _ => unreachable!("family vetted above"),
        };
        if initial_kind != "field" {
            self.initial = match initial_kind.as_str() {
                "profile" => {
                    let geom = if shape == "circle" {
                        InterfaceGeometry::Circle { center, radius }
                    } else {
                        InterfaceGeometry::FlatStrip {
                            position: strip_position,
                            normal_axis: strip_axis,
                        }
                    };
                    InitialData::Profile(geom)
                }
                "constant" => InitialData::Constant(initial_value),
                "file" => InitialData::File(initial_path),
                _ => unreachable!("kind vetted above"),
            };
        }
        self.validate()?;
        Ok(self)
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| {
        Error::Config(format!(
            "could not parse value {value:?} for key {key} as {}",
            std::any::type_name::<T>()
        ))
    })
}

/// Parse flat `key=value` text (one pair per line; blank lines and lines
/// starting with # are skipped) into ordered pairs.
pub fn parse_flat_text(text: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (line_no, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        match line.split_once('=') {
            Some((k, v)) => pairs.push((k.trim().to_string(), v.trim().to_string())),
            None => {
                return Err(err(format!(
                    "line {}: expected key=value, got {line:?}",
                    line_no + 1
                )))
            }
        }
    }
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairs(items: &[(&str, &str)]) -> Vec<(String, String)> {
        items.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn defaults_validate() {
        SolverConfig::default().validate().unwrap();
    }

    #[test]
    fn key_value_roundtrip() {
        let cfg = SolverConfig {
            cutoff: 32,
            eps: 0.03,
            dt: 1e-6,
            horizon: 2e-4,
            scheme: Scheme::SemiImplicit,
            noise: Some(NoiseSpec::divergence(2.0, 0.25, 32)),
            renorm: RenormMode::Pointwise,
            initial: InitialData::Constant(-0.2),
            nonlinearity: Nonlinearity::DoubleWell,
            lambda_formula: LambdaFormula::Classical,
            track_residual: false,
            seed: 17,
            replica: 3,
            snapshot_cadence: 25,
        };
        let encoded = cfg.to_key_values();
        let decoded = SolverConfig::default().apply_key_values(&encoded).unwrap();
        assert_eq!(decoded.cutoff, 32);
        assert_eq!(decoded.eps, 0.03);
        assert_eq!(decoded.dt, 1e-6);
        assert_eq!(decoded.scheme, Scheme::SemiImplicit);
        assert_eq!(decoded.renorm, RenormMode::Pointwise);
        assert_eq!(decoded.lambda_formula, LambdaFormula::Classical);
        assert_eq!(decoded.seed, 17);
        assert_eq!(decoded.replica, 3);
        assert_eq!(decoded.snapshot_cadence, 25);
        let spec = decoded.noise.unwrap();
        assert_eq!(spec.sigma, 2.0);
        assert_eq!(spec.h, 0.25);
        assert!(matches!(decoded.initial, InitialData::Constant(v) if v == -0.2));
    }

    #[test]
    fn unknown_keys_are_named() {
        let out = SolverConfig::default().apply_key_values(&pairs(&[("solver.epz", "0.1")]));
        let msg = out.unwrap_err().to_string();
        assert!(msg.contains("solver.epz"), "message was {msg}");
    }

    #[test]
    fn out_of_range_values_are_rejected() {
        let base = SolverConfig::default();
        assert!(base.clone().apply_key_values(&pairs(&[("solver.eps", "-1")])).is_err());
        assert!(base.clone().apply_key_values(&pairs(&[("solver.eps", "0.7")])).is_err());
        assert!(base.clone().apply_key_values(&pairs(&[("solver.cutoff", "100")])).is_err());
        assert!(base.clone().apply_key_values(&pairs(&[("solver.cutoff", "2048")])).is_err());
        assert!(base.clone().apply_key_values(&pairs(&[("noise.sigma", "nope")])).is_err());
        assert!(base
            .clone()
            .apply_key_values(&pairs(&[("noise.family", "white"), ("noise.h", "3.0")]))
            .is_err());
    }

    #[test]
    fn renorm_requires_divergence_noise() {
        let out = SolverConfig::default()
            .apply_key_values(&pairs(&[("renorm.mode", "pointwise"), ("noise.family", "white")]));
        assert!(matches!(out, Err(Error::RenormWithoutMollifier)));
        let ok = SolverConfig::default().apply_key_values(&pairs(&[
            ("renorm.mode", "pointwise"),
            ("noise.family", "divergence"),
        ]));
        assert!(ok.is_ok());
    }

    #[test]
    fn sigma_accepts_the_infinite_sentinel() {
        let cfg = SolverConfig::default()
            .apply_key_values(&pairs(&[("noise.family", "white"), ("noise.sigma", "inf")]))
            .unwrap();
        assert!(cfg.noise.unwrap().sigma.is_infinite());
    }

    #[test]
    fn clearance_is_checked_for_profile_initials() {
        let out = SolverConfig::default().apply_key_values(&pairs(&[
            ("solver.eps", "0.08"),
            ("interface.radius", "0.25"),
        ]));
        assert!(matches!(out, Err(Error::ClearanceViolation { .. })));
    }
}
