//! Run manifests and content-addressed run directories.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};
use tabletop_core::env::SeatPolicy;
use tabletop_core::rl::PpoConfig;
use tabletop_core::{AgentKind, Execution, GameId};

pub const MANIFEST_VERSION: u32 = 1;

/// Everything that determines a run's results.
#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub game: GameId,
    pub n_players: usize,
    pub learner: AgentKind,
    pub opponents: Vec<AgentKind>,
    pub learner_seat: SeatPolicy,
    pub seeds: Vec<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub episodes: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ppo: Option<PpoConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checkpoint_every: Option<u64>,
    pub max_decisions: Option<u32>,
    pub execution: Execution,
}

#[derive(Clone, Debug, Serialize)]
pub struct Tool {
    pub name: &'static str,
    pub version: &'static str,
    pub git_rev: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub format_version: u32,
    pub run_id: String,
    pub output_dir: PathBuf,
    pub tool: Tool,
    pub config: RunConfig,
}

fn git_rev() -> Option<String> {
    let out = Command::new("git").args(["rev-parse", "HEAD"]).output().ok()?;
    out.status
        .success()
        .then(|| String::from_utf8_lossy(&out.stdout).trim().to_string())
        .filter(|s| !s.is_empty())
}

impl RunManifest {
    /// The run id hashes the configuration and the tool version, so the same
    /// run always lands in the same directory.
    pub fn new(config: RunConfig, out_root: &Path) -> Result<RunManifest> {
        let version = env!("CARGO_PKG_VERSION");
        let keyed = serde_json::json!({ "version": version, "config": &config });
        let digest = Sha256::digest(serde_json::to_vec(&keyed)?);
        let run_id = hex::encode(&digest[..8]);
        let dir = format!("{}-{}-{}", config.command, config.game.name().to_lowercase(), run_id);
        Ok(RunManifest {
            format_version: MANIFEST_VERSION,
            run_id,
            output_dir: out_root.join(dir),
            tool: Tool {
                name: env!("CARGO_PKG_NAME"),
                version,
                git_rev: git_rev(),
            },
            config,
        })
    }

    /// Creates the run directory and writes `manifest.json` into it.
    pub fn write(&self) -> Result<&Path> {
        let dir = &self.output_dir;
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let path = dir.join("manifest.json");
        fs::write(&path, serde_json::to_string_pretty(self)? + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(dir)
    }
}
