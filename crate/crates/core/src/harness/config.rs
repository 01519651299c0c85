use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize};

use crate::channel::PathLossMode;
use crate::link::PositionMethod;
use crate::pso::PsoConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Model {
    #[default]
    SuSiso,
    MuMiso,
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::SuSiso => "su-siso",
            Self::MuMiso => "mu-miso",
        })
    }
}

impl FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "su-siso" => Ok(Self::SuSiso),
            "mu-miso" => Ok(Self::MuMiso),
            _ => Err(Error::Config(format!("unknown model `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    #[default]
    Fris,
    Ris,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Fris => "fris",
            Self::Ris => "ris",
        })
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fris" => Ok(Self::Fris),
            "ris" => Ok(Self::Ris),
            _ => Err(Error::Config(format!("unknown scheme `{s}`"))),
        }
    }
}

/// Candidate grid resolution, written `GxG`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(into = "String")]
pub struct GridRes(pub usize, pub usize);

impl fmt::Display for GridRes {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.0, self.1)
    }
}

impl From<GridRes> for String {
    fn from(g: GridRes) -> String {
        g.to_string()
    }
}

impl FromStr for GridRes {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("grid resolution `{s}` is not of the form GxG"));
        let (a, b) = s.split_once(['x', 'X']).ok_or_else(bad)?;
        let gx: usize = a.trim().parse().map_err(|_| bad())?;
        let gy: usize = b.trim().parse().map_err(|_| bad())?;
        if gx == 0 || gy == 0 {
            return Err(bad());
        }
        Ok(Self(gx, gy))
    }
}

impl<'de> Deserialize<'de> for GridRes {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Comma separated list, e.g. `0,5,10`.
pub fn parse_list<T: FromStr>(s: &str) -> Result<Vec<T>>
where
    T::Err: fmt::Display,
{
    let out: Result<Vec<T>> = s
        .split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(|x| x.parse::<T>().map_err(|e| Error::Config(format!("bad list entry `{x}`: {e}"))))
        .collect();
    let out = out?;
    if out.is_empty() {
        return Err(Error::Config(format!("empty list `{s}`")));
    }
    Ok(out)
}

/// Experiment description. List-valued fields span the sweep grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub model: Model,
    pub n_elements: Vec<usize>,
    pub m_antennas: Vec<usize>,
    pub k_users: usize,
    pub area: Vec<f64>,
    /// Minimum element spacing, meters. Defaults to half a wavelength.
    pub spacing: Option<f64>,
    pub wavelength: f64,
    pub rician_bs: f64,
    pub rician_user: f64,
    pub exponent: f64,
    pub path_loss: PathLossMode,
    pub snr_db: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub method: Option<PositionMethod>,
    pub scheme: Vec<Scheme>,
    pub grid_res: GridRes,
    /// Passes over the elements per position step.
    pub sweeps: usize,
    pub max_cycles: usize,
    /// Draw a new user drop in every trial instead of one per run.
    pub redraw_users: bool,
    pub pso_swarm: usize,
    pub pso_iters: usize,
    pub pso_inertia: f64,
    pub pso_cognitive: f64,
    pub pso_social: f64,
    pub pso_penalty: f64,
    pub out: Option<PathBuf>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let pso = PsoConfig::default();
        Self {
            model: Model::SuSiso,
            n_elements: vec![4],
            m_antennas: vec![8],
            k_users: 4,
            area: vec![4.0],
            spacing: None,
            wavelength: 0.125,
            rician_bs: 3.0,
            rician_user: 3.0,
            exponent: 2.7,
            path_loss: PathLossMode::Normalized,
            snr_db: vec![10.0],
            trials: 100,
            seed: 1,
            method: None,
            scheme: vec![Scheme::Fris],
            grid_res: GridRes(10, 10),
            sweeps: 1,
            max_cycles: 30,
            redraw_users: true,
            pso_swarm: pso.swarm_size,
            pso_iters: pso.max_iters,
            pso_inertia: pso.inertia,
            pso_cognitive: pso.cognitive,
            pso_social: pso.social,
            pso_penalty: pso.penalty,
            out: None,
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        Self::from_toml_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn spacing(&self) -> f64 {
        self.spacing.unwrap_or(self.wavelength / 2.0)
    }

    /// Grid search for multi-user runs, PSO for single-user runs, unless set.
    pub fn method(&self) -> PositionMethod {
        self.method.unwrap_or(match self.model {
            Model::SuSiso => PositionMethod::Pso,
            Model::MuMiso => PositionMethod::Grid,
        })
    }

    pub fn pso(&self, seed: u64) -> PsoConfig {
        PsoConfig {
            swarm_size: self.pso_swarm,
            max_iters: self.pso_iters,
            inertia: self.pso_inertia,
            cognitive: self.pso_cognitive,
            social: self.pso_social,
            penalty: self.pso_penalty,
            seed,
        }
    }

    pub fn noise(&self) -> f64 {
        1.0
    }

    pub fn validate(&self) -> Result<()> {
        let nonempty = |len: usize, what: &str| {
            if len == 0 {
                Err(Error::Config(format!("{what} list is empty")))
            } else {
                Ok(())
            }
        };
        nonempty(self.n_elements.len(), "n_elements")?;
        nonempty(self.m_antennas.len(), "m_antennas")?;
        nonempty(self.area.len(), "area")?;
        nonempty(self.snr_db.len(), "snr_db")?;
        nonempty(self.scheme.len(), "scheme")?;
        if self.n_elements.contains(&0) || self.m_antennas.contains(&0) || self.k_users == 0 {
            return Err(Error::Config("element, antenna and user counts must be >= 1".into()));
        }
        if self.trials == 0 || self.sweeps == 0 {
            return Err(Error::Config("trials and sweeps must be >= 1".into()));
        }
        if self.area.iter().any(|a| !(*a > 0.0)) {
            return Err(Error::Config("area side must be positive".into()));
        }
        if self.snr_db.iter().any(|s| !s.is_finite()) {
            return Err(Error::Config("SNR values must be finite".into()));
        }
        if !(self.spacing() >= 0.0) || !(self.wavelength > 0.0) {
            return Err(Error::Config("spacing must be >= 0 and wavelength > 0".into()));
        }
        if !(self.rician_bs >= 0.0) || !(self.rician_user >= 0.0) {
            return Err(Error::Config("Rician factors must be >= 0".into()));
        }
        self.pso(0).validate(true)
    }
}
