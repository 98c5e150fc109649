//! Memoized dimension reports under `$RESONATOR_CACHE`.

use std::path::PathBuf;

use resonator_core::thermo::{self, DimensionReport};
use resonator_core::{Discretization, SurfaceConfig};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const CACHE_ENV: &str = "RESONATOR_CACHE";

fn cache_file(surface: &SurfaceConfig, nodes: usize) -> Option<PathBuf> {
    let dir = std::env::var_os(CACHE_ENV)?;
    let key = serde_json::json!({"surface": surface, "nodes": nodes}).to_string();
    let digest = Sha256::digest(key.as_bytes());
    let name: String = digest[..8].iter().map(|b| format!("{b:02x}")).collect();
    Some(PathBuf::from(dir).join(format!("dimension-{name}.json")))
}

/// `δ` with its bracket trace, read from the cache when present.
pub fn dimension(surface: &SurfaceConfig, disc: &Discretization) -> Result<DimensionReport, CliError> {
    let path = cache_file(surface, disc.nodes());
    if let Some(p) = &path {
        if let Ok(text) = std::fs::read_to_string(p) {
            if let Ok(r) = serde_json::from_str(&text) {
                return Ok(r);
            }
        }
    }
    let report = thermo::dimension_report(disc, 1e-13)?;
    if let Some(p) = &path {
        if let Some(dir) = p.parent() {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(p, serde_json::to_string(&report).expect("serializable"))?;
    }
    Ok(report)
}
