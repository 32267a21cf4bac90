//! Parallel sweeps over worlds × conditions × seeds.

use std::path::{Path as FsPath, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{BotPersona, Condition, SessionConfig};
use super::session::run_session_in;
use super::HarnessError;

pub const DEMO_MATRIX: &str = include_str!("../../assets/matrix.json");
pub const MANIFEST_FILE: &str = "manifest.json";

fn all_conditions() -> Vec<Condition> {
    Condition::ALL.to_vec()
}

fn five() -> usize {
    5
}

fn one() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchMatrix {
    pub worlds: Vec<String>,
    #[serde(default = "all_conditions")]
    pub conditions: Vec<Condition>,
    #[serde(default = "five")]
    pub n_seeds: usize,
    #[serde(default = "one")]
    pub base_seed: u64,
    /// Template for every session; `world`, `condition` and `seed` are
    /// filled in per run.
    #[serde(default)]
    pub session: SessionConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub persona: Option<BotPersona>,
    /// Worker threads; 0 picks the machine's parallelism.
    #[serde(default)]
    pub workers: usize,
}

impl BatchMatrix {
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        serde_json::from_str(text).map_err(|e| HarnessError::InvalidConfig(format!("matrix: {e}")))
    }

    pub fn demo() -> Self {
        Self::parse(DEMO_MATRIX).expect("bundled matrix parses")
    }

    /// Every run in the matrix, in manifest order.
    pub fn sessions(&self) -> Vec<SessionConfig> {
        let mut out = Vec::new();
        for world in &self.worlds {
            for &condition in &self.conditions {
                for i in 0..self.n_seeds {
                    let mut cfg = self.session.clone();
                    cfg.world = world.clone();
                    cfg.condition = condition;
                    cfg.seed = self.base_seed + i as u64;
                    if let Some(p) = &self.persona {
                        cfg.persona = p.clone();
                    }
                    out.push(cfg);
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub world: String,
    pub condition: Condition,
    pub seed: u64,
    pub status: RunStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sha256: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub runs: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn ok_count(&self) -> usize {
        self.runs.iter().filter(|r| r.status == RunStatus::Ok).count()
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// Log file name for one run, e.g. `museum_A_s3.jsonl`.
pub fn log_file_name(world: &str, condition: Condition, seed: u64) -> String {
    let stem = FsPath::new(world)
        .file_name()
        .map_or_else(|| world.to_string(), |s| s.to_string_lossy().into_owned());
    let stem = stem.trim_end_matches(".json").trim_end_matches(".world");
    format!("{stem}_{condition}_s{seed}.jsonl")
}

fn run_one(cfg: &SessionConfig, base: Option<&FsPath>, out_dir: &FsPath) -> ManifestEntry {
    let mut entry = ManifestEntry {
        world: cfg.world.clone(),
        condition: cfg.condition,
        seed: cfg.seed,
        status: RunStatus::Failed,
        file: None,
        sha256: None,
        error: None,
    };
    let result = run_session_in(cfg, base).and_then(|log| {
        let text = log.to_jsonl();
        let name = log_file_name(&cfg.world, cfg.condition, cfg.seed);
        let path = out_dir.join(&name);
        std::fs::write(&path, &text).map_err(|e| HarnessError::io(&path, e))?;
        Ok((name, sha256_hex(text.as_bytes())))
    });
    match result {
        Ok((name, sum)) => {
            entry.status = RunStatus::Ok;
            entry.file = Some(name);
            entry.sha256 = Some(sum);
        }
        Err(e) => entry.error = Some(e.to_string()),
    }
    entry
}

/// Runs every cell of `matrix` in parallel, writing one log per run plus
/// `manifest.json` into `out_dir`. Failed runs are recorded, not fatal.
pub fn run_batch(
    matrix: &BatchMatrix,
    base: Option<&FsPath>,
    out_dir: &FsPath,
) -> Result<Manifest, HarnessError> {
    std::fs::create_dir_all(out_dir).map_err(|e| HarnessError::io(out_dir, e))?;
    let jobs = matrix.sessions();
    let workers = match matrix.workers {
        0 => std::thread::available_parallelism().map_or(1, |n| n.get()),
        n => n,
    }
    .min(jobs.len().max(1));
    let results: Vec<Mutex<Option<ManifestEntry>>> = jobs.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(cfg) = jobs.get(i) else { break };
                let entry = run_one(cfg, base, out_dir);
                *results[i].lock().expect("result slot") = Some(entry);
            });
        }
    });
    let runs = results
        .into_iter()
        .map(|m| m.into_inner().expect("result slot").expect("every job ran"))
        .collect();
    let manifest = Manifest { runs };
    let path: PathBuf = out_dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&path, text + "\n").map_err(|e| HarnessError::io(&path, e))?;
    Ok(manifest)
}
