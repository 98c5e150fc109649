use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use resonator_core::groups::{irreps, GroupHom, GroupSpec, Twist, UnitaryRep};
use resonator_core::{ScanRectangle, SchottkyData, SurfaceConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Which twists a run uses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum RepSelector {
    Trivial,
    Character(Vec<f64>),
    Irrep(usize),
    Regular,
    AllNontrivial,
}

impl FromStr for RepSelector {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        let bad = || CliError::Usage(format!("unknown rep selector '{s}'"));
        match s {
            "trivial" => return Ok(RepSelector::Trivial),
            "regular" => return Ok(RepSelector::Regular),
            "all-nontrivial" => return Ok(RepSelector::AllNontrivial),
            _ => {}
        }
        let (kind, arg) = s.split_once(':').ok_or_else(bad)?;
        match kind {
            "irrep" => arg.trim().parse().map(RepSelector::Irrep).map_err(|_| bad()),
            "character" => arg
                .split(',')
                .map(|x| x.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map(RepSelector::Character)
                .map_err(|_| bad()),
            _ => Err(bad()),
        }
    }
}

impl TryFrom<String> for RepSelector {
    type Error = CliError;

    fn try_from(s: String) -> Result<Self, CliError> {
        s.parse()
    }
}

impl From<RepSelector> for String {
    fn from(r: RepSelector) -> String {
        r.to_string()
    }
}

impl fmt::Display for RepSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RepSelector::Trivial => write!(f, "trivial"),
            RepSelector::Regular => write!(f, "regular"),
            RepSelector::AllNontrivial => write!(f, "all-nontrivial"),
            RepSelector::Irrep(k) => write!(f, "irrep:{k}"),
            RepSelector::Character(theta) => {
                let parts: Vec<String> = theta.iter().map(|t| format!("{t:?}")).collect();
                write!(f, "character:{}", parts.join(","))
            }
        }
    }
}

fn default_surface() -> SurfaceConfig {
    SurfaceConfig::symmetric_funnel(2, 1.0)
}

fn default_rep() -> RepSelector {
    RepSelector::Trivial
}

fn default_nodes() -> usize {
    resonator_core::transfer::DEFAULT_NODES
}

fn default_tol() -> f64 {
    1e-8
}

/// Everything a run needs. Read from a JSON or TOML file; command-line flags
/// override individual fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_surface")]
    pub surface: SurfaceConfig,
    #[serde(default)]
    pub group: Option<GroupSpec>,
    #[serde(default = "default_rep")]
    pub rep: RepSelector,
    #[serde(default)]
    pub rect: Option<ScanRectangle>,
    #[serde(default = "default_nodes")]
    pub nodes: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub checkpoint: Option<PathBuf>,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            surface: default_surface(),
            group: None,
            rep: default_rep(),
            rect: None,
            nodes: default_nodes(),
            tol: default_tol(),
            workers: None,
            checkpoint: None,
            out: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let parsed = match path.extension().and_then(|e| e.to_str()) {
            Some("toml") => toml::from_str(&text).map_err(|e| e.to_string()),
            _ => serde_json::from_str(&text).map_err(|e| e.to_string()),
        };
        parsed.map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if !(self.tol > 0.0) {
            return Err(CliError::Config(format!("tolerance must be positive, got {}", self.tol)));
        }
        if self.nodes < 2 {
            return Err(CliError::Config(format!("need at least 2 nodes, got {}", self.nodes)));
        }
        if self.workers == Some(0) {
            return Err(CliError::Config("worker count must be positive".into()));
        }
        if let Some(r) = &self.rect {
            r.validate()?;
        }
        Ok(())
    }

    pub fn schottky(&self) -> Result<SchottkyData, CliError> {
        Ok(SchottkyData::build(&self.surface)?)
    }

    pub fn hom(&self, schottky: &SchottkyData) -> Result<Option<GroupHom>, CliError> {
        self.group.as_ref().map(|g| g.build(schottky)).transpose().map_err(CliError::from)
    }

    /// The configured rectangle; its resolution follows `nodes`.
    pub fn rect(&self) -> Result<ScanRectangle, CliError> {
        let mut r = self
            .rect
            .ok_or_else(|| CliError::Config("this command needs a rectangle ('rect' in the config)".into()))?;
        r.nodes = self.nodes;
        Ok(r)
    }

    /// The twists selected by `rep`, in a fixed order.
    pub fn twists(&self, schottky: &SchottkyData) -> Result<Vec<Twist>, CliError> {
        let m = schottky.m();
        let need_group = || {
            self.hom(schottky)?
                .ok_or_else(|| CliError::Config(format!("rep '{}' needs a group", self.rep)))
        };
        Ok(match &self.rep {
            RepSelector::Trivial => vec![Twist::trivial(m)],
            RepSelector::Character(theta) => {
                if theta.len() != m {
                    return Err(CliError::Config(format!("character needs {m} angles, got {}", theta.len())));
                }
                vec![Twist::abelianization_character(theta)]
            }
            RepSelector::Regular => {
                let h = need_group()?;
                vec![UnitaryRep::regular(h.group()).pull_back(&h)]
            }
            RepSelector::Irrep(k) => {
                let h = need_group()?;
                let reps = irreps(h.group())?;
                let rho = reps
                    .get(*k)
                    .ok_or_else(|| CliError::Config(format!("irrep index {k} out of range ({} irreps)", reps.len())))?;
                vec![rho.pull_back(&h)]
            }
            RepSelector::AllNontrivial => {
                let h = need_group()?;
                irreps(h.group())?.iter().skip(1).map(|r| r.pull_back(&h)).collect()
            }
        })
    }

    /// 64-bit digest of the fields that determine results, over canonical
    /// (key-sorted) JSON. Paths and the worker count are excluded.
    pub fn hash(&self, command: &str) -> String {
        let canonical = serde_json::json!({
            "command": command,
            "surface": self.surface,
            "group": self.group,
            "rep": self.rep,
            "rect": self.rect,
            "nodes": self.nodes,
            "tol": self.tol,
        });
        let digest = Sha256::digest(canonical.to_string().as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}
