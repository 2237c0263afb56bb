//! Triage runs on disk: `<data-dir>/runs/<run-id>/run.json` plus an
//! append-only `verdicts.jsonl`.

use std::fs;
use std::path::{Path, PathBuf};

use handtriage_core::triage::{FrameVerdict, TriageRun, VerdictLedger};
use serde::{Deserialize, Serialize};

use crate::error::{io_err, Error, Result};
use crate::fsutil::{append_json_line, read_json, read_json_lines, write_json};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunListing {
    pub run_id: String,
    pub created_at: String,
    pub frames_dir: String,
    pub threshold: f64,
    pub flagged: usize,
    pub total: usize,
}

#[derive(Debug, Clone)]
pub struct RunStore {
    root: PathBuf,
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

impl RunStore {
    pub fn open(data_dir: &Path) -> Result<Self> {
        let root = data_dir.join("runs");
        fs::create_dir_all(&root).map_err(io_err(&root))?;
        Ok(Self { root })
    }

    fn dir(&self, run_id: &str) -> Result<PathBuf> {
        if !valid_id(run_id) {
            return Err(Error::RunNotFound(run_id.to_string()));
        }
        Ok(self.root.join(run_id))
    }

    pub fn save(&self, run: &TriageRun) -> Result<()> {
        let dir = self.dir(&run.meta.run_id)?;
        write_json(&dir.join("run.json"), run)
    }

    pub fn load(&self, run_id: &str) -> Result<TriageRun> {
        let path = self.dir(run_id)?.join("run.json");
        if !path.exists() {
            return Err(Error::RunNotFound(run_id.to_string()));
        }
        let mut run: TriageRun = read_json(&path)?;
        run.reindex();
        Ok(run)
    }

    /// Oldest first.
    pub fn list(&self) -> Result<Vec<RunListing>> {
        let mut out = Vec::new();
        for entry in fs::read_dir(&self.root).map_err(io_err(&self.root))? {
            let entry = entry.map_err(io_err(&self.root))?;
            let id = entry.file_name().to_string_lossy().into_owned();
            if !valid_id(&id) || !entry.path().join("run.json").exists() {
                continue;
            }
            let run = self.load(&id)?;
            out.push(RunListing {
                run_id: run.meta.run_id,
                created_at: run.meta.created_at,
                frames_dir: run.meta.frames_dir,
                threshold: run.threshold,
                flagged: run.summary.flagged,
                total: run.summary.total,
            });
        }
        out.sort_by(|a, b| a.created_at.cmp(&b.created_at).then_with(|| a.run_id.cmp(&b.run_id)));
        Ok(out)
    }

    pub fn verdicts(&self, run_id: &str) -> Result<VerdictLedger> {
        let path = self.dir(run_id)?.join("verdicts.jsonl");
        Ok(VerdictLedger::replay(read_json_lines::<FrameVerdict>(&path)?))
    }

    /// Callers serialize writes per run; the log itself only ever grows.
    pub fn append_verdict(&self, run_id: &str, verdict: &FrameVerdict) -> Result<()> {
        append_json_line(&self.dir(run_id)?.join("verdicts.jsonl"), verdict)
    }
}
