//! Drives the bootstrap loop against an external trainer, persisting enough
//! state after every round to resume from the last completed one.
//!
//! State directory layout:
//!
//! ```text
//! state.json            plan, rng seed, last completed round
//! audit.jsonl           seed record, then one record per round
//! seed-pool.json        the human-labeled starting pool
//! round-<r>/train/      labels/ and images.txt handed to the trainer
//! round-<r>/model/      scratch space for the trainer
//! round-<r>/predict.txt images still unlabeled after training round r
//! round-<r>/predictions/ one 6-field label file per predicted image
//! round-<r>/selected.txt image and score per selected image
//! round-<r>/pool.json   pool after merging this round's additions
//! final/labels/         every pooled label, confidences dropped
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use handtriage_core::bootstrap::{sample_seed, select_top_k, Aggregate, BootstrapPlan, LabeledPool, ScoredImage};
use handtriage_core::formats::{label_key, label_path};
use handtriage_core::{FormatError, LabelFile};
use serde::{Deserialize, Serialize};

use crate::error::{format_err, io_err, Error, Result};
use crate::fsutil::{read_json, read_json_lines, read_string, write_atomic, write_id_list, write_json};
use crate::io::write_label_file;

/// Train and predict steps of one round. Predictions must land in
/// `out_dir` as one YOLO label file per image with a confidence column,
/// named after the image like [`label_path`]. Images without a file are
/// taken to have no detections.
pub trait Trainer {
    fn train(&mut self, round: usize, train_dir: &Path, model_dir: &Path) -> Result<()>;
    fn predict(&mut self, round: usize, model_dir: &Path, predict_list: &Path, out_dir: &Path) -> Result<()>;
}

/// Runs shell command templates. Placeholders: `{train-dir}`,
/// `{predict-list}`, `{out-dir}`, `{model-dir}` and `{round}`.
#[derive(Debug, Clone)]
pub struct CommandTrainer {
    train_cmd: String,
    predict_cmd: String,
    workdir: Option<PathBuf>,
}

fn shell_quote(s: &str) -> String {
    format!("'{}'", s.replace('\'', r"'\''"))
}

impl CommandTrainer {
    pub fn new(train_cmd: impl Into<String>, predict_cmd: impl Into<String>, workdir: Option<PathBuf>) -> Result<Self> {
        let (train_cmd, predict_cmd) = (train_cmd.into(), predict_cmd.into());
        for (cmd, needed) in [
            (&train_cmd, &["{train-dir}"][..]),
            (&predict_cmd, &["{predict-list}", "{out-dir}"][..]),
        ] {
            for p in needed {
                if !cmd.contains(p) {
                    return Err(Error::Invalid(format!("command template {cmd:?} lacks {p}")));
                }
            }
        }
        Ok(Self {
            train_cmd,
            predict_cmd,
            workdir,
        })
    }

    fn render(template: &str, round: usize, vars: &[(&str, &Path)]) -> String {
        let mut cmd = template.replace("{round}", &round.to_string());
        for (name, path) in vars {
            cmd = cmd.replace(&format!("{{{name}}}"), &shell_quote(&path.to_string_lossy()));
        }
        cmd
    }

    fn run(&self, round: usize, stage: &'static str, cmd: String) -> Result<()> {
        let mut command = Command::new("sh");
        command.arg("-c").arg(&cmd);
        if let Some(dir) = &self.workdir {
            command.current_dir(dir);
        }
        let status = command.status().map_err(|e| Error::Command {
            round,
            stage,
            command: cmd.clone(),
            status: e.to_string(),
        })?;
        if !status.success() {
            return Err(Error::Command {
                round,
                stage,
                command: cmd,
                status: status.to_string(),
            });
        }
        Ok(())
    }
}

impl Trainer for CommandTrainer {
    fn train(&mut self, round: usize, train_dir: &Path, model_dir: &Path) -> Result<()> {
        let cmd = Self::render(
            &self.train_cmd,
            round,
            &[("train-dir", train_dir), ("model-dir", model_dir)],
        );
        self.run(round, "train", cmd)
    }

    fn predict(&mut self, round: usize, model_dir: &Path, predict_list: &Path, out_dir: &Path) -> Result<()> {
        let cmd = Self::render(
            &self.predict_cmd,
            round,
            &[
                ("model-dir", model_dir),
                ("predict-list", predict_list),
                ("out-dir", out_dir),
            ],
        );
        self.run(round, "predict", cmd)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunnerState {
    pub plan: BootstrapPlan,
    pub rng_seed: u64,
    pub aggregate: Aggregate,
    pub completed_round: Option<usize>,
    pub finished: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "stage", rename_all = "lowercase")]
pub enum AuditRecord {
    Seed {
        rng_seed: u64,
        available: usize,
        ids: Vec<String>,
    },
    Select {
        round: usize,
        k: usize,
        candidates: usize,
        selected: Vec<ScoredImage>,
        excluded: Vec<String>,
    },
    Final {
        round: usize,
        added: usize,
        labels: Vec<ScoredImage>,
        without_detections: Vec<String>,
    },
}

impl AuditRecord {
    fn round(&self) -> Option<usize> {
        match self {
            AuditRecord::Seed { .. } => None,
            AuditRecord::Select { round, .. } | AuditRecord::Final { round, .. } => Some(*round),
        }
    }
}

pub struct BootstrapRun {
    pub plan: BootstrapPlan,
    /// Image ids as the trainer should see them.
    pub corpus: Vec<String>,
    /// Human labels; ids may be corpus ids or their label keys. When there
    /// are more than the plan's seed size, `rng_seed` picks which to use.
    pub seed_labels: Vec<LabelFile>,
    pub rng_seed: u64,
    pub aggregate: Aggregate,
    pub state_dir: PathBuf,
}

#[derive(Debug)]
pub struct LoopOutcome {
    pub pool: LabeledPool,
    /// First round executed by this call; `None` if the state was already
    /// finished.
    pub started_at: Option<usize>,
}

struct Layout<'a>(&'a Path);

impl Layout<'_> {
    fn state(&self) -> PathBuf {
        self.0.join("state.json")
    }
    fn audit(&self) -> PathBuf {
        self.0.join("audit.jsonl")
    }
    fn seed_pool(&self) -> PathBuf {
        self.0.join("seed-pool.json")
    }
    fn round(&self, r: usize) -> PathBuf {
        self.0.join(format!("round-{r}"))
    }
    fn pool(&self, r: usize) -> PathBuf {
        self.round(r).join("pool.json")
    }
}

fn write_audit(path: &Path, records: &[AuditRecord]) -> Result<()> {
    let mut text = String::new();
    for r in records {
        text.push_str(&serde_json::to_string(r).expect("audit records serialize"));
        text.push('\n');
    }
    write_atomic(path, text.as_bytes())
}

impl BootstrapRun {
    fn corpus_keys(&self) -> Result<BTreeMap<String, String>> {
        let mut keys = BTreeMap::new();
        for id in &self.corpus {
            if keys.insert(label_key(id).to_string(), id.clone()).is_some() {
                return Err(Error::Invalid(format!(
                    "corpus lists {id} (or an image with the same name) twice"
                )));
            }
        }
        Ok(keys)
    }

    fn seed_pool(&self, keys: &BTreeMap<String, String>) -> Result<(LabeledPool, AuditRecord)> {
        let mut by_id: BTreeMap<String, LabelFile> = BTreeMap::new();
        for label in &self.seed_labels {
            let id = keys
                .get(label_key(&label.image_id))
                .ok_or_else(|| Error::Invalid(format!("seed label {} is not in the corpus", label.image_id)))?;
            let mut label = label.as_ground_truth();
            label.image_id = id.clone();
            by_id.insert(id.clone(), label);
        }
        let available: Vec<String> = by_id.keys().cloned().collect();
        if available.len() < self.plan.seed {
            return Err(Error::Invalid(format!(
                "plan needs {} seed labels but only {} were given",
                self.plan.seed,
                available.len()
            )));
        }
        let ids = sample_seed(&available, self.plan.seed, self.rng_seed)?;
        let pool = LabeledPool::from_human(ids.iter().map(|id| by_id[id].clone()))?;
        let record = AuditRecord::Seed {
            rng_seed: self.rng_seed,
            available: available.len(),
            ids,
        };
        Ok((pool, record))
    }

    fn read_predictions(&self, dir: &Path, ids: &[String]) -> Result<Vec<LabelFile>> {
        ids.iter()
            .map(|id| {
                let path = dir.join(label_path(id));
                if !path.exists() {
                    return Ok(LabelFile::new(id.clone()));
                }
                let file = LabelFile::parse(id.clone(), &read_string(&path)?).map_err(format_err(&path))?;
                if !file.entries.is_empty() && !file.is_detection() {
                    return Err(format_err(&path)(FormatError::WrongKind {
                        image_id: id.clone(),
                        expected: "detections with confidences",
                        found: "ground truth",
                    }));
                }
                Ok(file)
            })
            .collect()
    }

    /// Runs or resumes the loop to completion.
    pub fn run(&self, trainer: &mut dyn Trainer) -> Result<LoopOutcome> {
        self.plan.validate()?;
        if self.plan.corpus != self.corpus.len() {
            return Err(Error::Invalid(format!(
                "plan corpus size {} differs from the {} listed images",
                self.plan.corpus,
                self.corpus.len()
            )));
        }
        let keys = self.corpus_keys()?;
        let layout = Layout(&self.state_dir);
        fs::create_dir_all(&self.state_dir).map_err(io_err(&self.state_dir))?;

        let mut state = if layout.state().exists() {
            let state: RunnerState = read_json(&layout.state())?;
            if (state.plan, state.rng_seed, state.aggregate) != (self.plan, self.rng_seed, self.aggregate) {
                return Err(Error::Invalid(format!(
                    "{} belongs to a run with different settings",
                    self.state_dir.display()
                )));
            }
            state
        } else {
            let (pool, record) = self.seed_pool(&keys)?;
            write_json(&layout.seed_pool(), &pool)?;
            write_audit(&layout.audit(), &[record])?;
            let state = RunnerState {
                plan: self.plan,
                rng_seed: self.rng_seed,
                aggregate: self.aggregate,
                completed_round: None,
                finished: false,
            };
            write_json(&layout.state(), &state)?;
            state
        };

        let last = self.plan.rounds;
        if state.finished {
            return Ok(LoopOutcome {
                pool: read_json(&layout.pool(last))?,
                started_at: None,
            });
        }
        let start = state.completed_round.map_or(0, |c| c + 1);
        let mut pool: LabeledPool = match state.completed_round {
            None => read_json(&layout.seed_pool())?,
            Some(c) => read_json(&layout.pool(c))?,
        };
        // Drop records of a round that did not complete.
        let mut audit: Vec<AuditRecord> = read_json_lines(&layout.audit())?;
        audit.retain(|r| r.round().is_none_or(|r| Some(r) <= state.completed_round));
        write_audit(&layout.audit(), &audit)?;

        for round in start..=last {
            let dir = layout.round(round);
            if dir.exists() {
                fs::remove_dir_all(&dir).map_err(io_err(&dir))?;
            }
            let train_dir = dir.join("train");
            let model_dir = dir.join("model");
            let out_dir = dir.join("predictions");
            for d in [&train_dir, &model_dir, &out_dir] {
                fs::create_dir_all(d).map_err(io_err(d))?;
            }
            let pooled: Vec<String> = pool.iter().map(|(id, _)| id.to_string()).collect();
            for (_, entry) in pool.iter() {
                write_label_file(&train_dir.join("labels"), &entry.label)?;
            }
            write_id_list(&train_dir.join("images.txt"), &pooled)?;
            trainer.train(round, &train_dir, &model_dir)?;

            let remaining: Vec<String> = self
                .corpus_sorted()
                .into_iter()
                .filter(|id| !pool.contains(id))
                .collect();
            let predict_list = dir.join("predict.txt");
            write_id_list(&predict_list, &remaining)?;
            trainer.predict(round, &model_dir, &predict_list, &out_dir)?;
            let predictions = self.read_predictions(&out_dir, &remaining)?;
            let by_id: BTreeMap<&str, &LabelFile> = predictions.iter().map(|p| (p.image_id.as_str(), p)).collect();

            let record = if round < last {
                let sel = select_top_k(&predictions, self.plan.per_round, self.aggregate)?;
                let additions = sel
                    .selected
                    .iter()
                    .map(|s| (by_id[s.image_id.as_str()].as_ground_truth(), s.score))
                    .collect();
                pool.merge(additions, round + 1)?;
                let lines: String = sel
                    .selected
                    .iter()
                    .map(|s| format!("{}\t{}\n", s.image_id, s.score))
                    .collect();
                write_atomic(&dir.join("selected.txt"), lines.as_bytes())?;
                AuditRecord::Select {
                    round,
                    k: self.plan.per_round,
                    candidates: sel.candidates,
                    selected: sel.selected,
                    excluded: sel.excluded,
                }
            } else {
                let mut labels = Vec::new();
                let mut without = Vec::new();
                let mut additions = Vec::with_capacity(predictions.len());
                for p in &predictions {
                    let score = self
                        .aggregate
                        .apply(&p.entries.iter().filter_map(|e| e.confidence).collect::<Vec<_>>());
                    match score {
                        Some(score) => labels.push(ScoredImage {
                            image_id: p.image_id.clone(),
                            score,
                        }),
                        None => without.push(p.image_id.clone()),
                    }
                    additions.push((p.as_ground_truth(), score.unwrap_or(0.0)));
                }
                let added = additions.len();
                pool.merge(additions, round + 1)?;
                AuditRecord::Final {
                    round,
                    added,
                    labels,
                    without_detections: without,
                }
            };
            write_json(&layout.pool(round), &pool)?;
            audit.push(record);
            write_audit(&layout.audit(), &audit)?;
            state.completed_round = Some(round);
            state.finished = round == last;
            write_json(&layout.state(), &state)?;
        }

        let final_dir = self.state_dir.join("final");
        if final_dir.exists() {
            fs::remove_dir_all(&final_dir).map_err(io_err(&final_dir))?;
        }
        for (_, entry) in pool.iter() {
            write_label_file(&final_dir.join("labels"), &entry.label)?;
        }
        let ids: Vec<String> = pool.iter().map(|(id, _)| id.to_string()).collect();
        write_id_list(&final_dir.join("images.txt"), &ids)?;
        Ok(LoopOutcome {
            pool,
            started_at: Some(start),
        })
    }

    fn corpus_sorted(&self) -> Vec<String> {
        let mut ids = self.corpus.clone();
        ids.sort();
        ids
    }
}
