use std::net::{Ipv4Addr, SocketAddr};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use handtriage_core::bootstrap::{plan_rounds, sample_seed, select_top_k, Aggregate, BootstrapPlan};
use handtriage_core::formats::{build_manifest, merge_manifests, DatasetManifest};
use handtriage_core::triage::{export_report, TriageOptions, VerdictLedger};
use handtriage_core::EvalConfig;

use crate::eval::{parse_thresholds, run_eval, write_eval_report};
use crate::fsutil::{read_id_list, read_json, write_atomic, write_id_list, write_json};
use crate::io::{convert, read_label_dir, read_sizes, sizes_from_images, write_sizes};
use crate::runner::{BootstrapRun, CommandTrainer};
use crate::service::{serve, ServeConfig};
use crate::store::RunStore;
use crate::triage::{triage_from_paths, write_report, TriageRequest};

#[derive(Debug, Parser)]
#[command(
    name = "handtriage",
    version,
    about = "Hand-detection evaluation, bootstrapped labeling and frame triage"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score detections against ground truth (AP/AR table).
    Eval(EvalArgs),
    /// Flag frames whose largest hand exceeds an area threshold.
    Triage(TriageArgs),
    /// Pseudo-label bootstrapping.
    #[command(subcommand)]
    Bootstrap(BootstrapCommand),
    /// Convert a YOLO label directory to COCO JSON or back.
    Convert(ConvertArgs),
    /// Build or merge dataset split manifests.
    #[command(subcommand)]
    Manifest(ManifestCommand),
    /// Write an image size index for a directory of images.
    Sizes(SizesArgs),
    /// Serve the review API.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// COCO ground-truth JSON or a YOLO label directory.
    #[arg(long)]
    gt: PathBuf,
    /// COCO detection JSON or a directory of 6-field YOLO labels.
    #[arg(long)]
    detections: PathBuf,
    /// Size index, needed when either side is a label directory.
    #[arg(long)]
    sizes: Option<PathBuf>,
    /// Directory for report.json and report.txt.
    #[arg(long)]
    out: Option<PathBuf>,
    /// `start:stop:step` or a comma list.
    #[arg(long, default_value = "0.5:0.95:0.05")]
    iou_thresholds: String,
    #[arg(long, value_delimiter = ',', default_value = "1,10,100")]
    max_dets: Vec<usize>,
    /// Small/medium and medium/large edges in square pixels.
    #[arg(long, value_delimiter = ',', default_value = "1024,9216")]
    area_edges: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct TriageArgs {
    #[arg(long)]
    frames: PathBuf,
    /// COCO detection JSON or a directory of 6-field YOLO labels.
    #[arg(long)]
    detections: PathBuf,
    /// Square pixels, or a fraction of the frame with --normalized.
    #[arg(long)]
    threshold: f64,
    #[arg(long, default_value_t = 0.0)]
    min_conf: f64,
    #[arg(long)]
    normalized: bool,
    /// JSON report path; a CSV is written next to it.
    #[arg(long)]
    out: PathBuf,
    /// Also store the run for the review service.
    #[arg(long)]
    data_dir: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum BootstrapCommand {
    /// Print the round schedule.
    Plan {
        #[arg(long, value_parser = parse_plan)]
        plan: PlanSpec,
        #[arg(long, conflicts_with = "corpus_size", required_unless_present = "corpus_size")]
        corpus: Option<PathBuf>,
        #[arg(long)]
        corpus_size: Option<usize>,
    },
    /// Pick the top-k images from a prediction directory.
    Select {
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value = "max")]
        aggregate: Aggregate,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample the images to label by hand before the first round.
    Seed {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        size: usize,
        #[arg(long)]
        rng_seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run or resume the full loop.
    Run(RunArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long, value_parser = parse_plan)]
    plan: PlanSpec,
    /// Image list, one id per line.
    #[arg(long)]
    corpus: PathBuf,
    /// Directory of hand-made labels for the seed images.
    #[arg(long)]
    seed_labels: PathBuf,
    #[arg(long)]
    train_cmd: String,
    #[arg(long)]
    predict_cmd: String,
    #[arg(long)]
    state: PathBuf,
    #[arg(long, default_value_t = 0)]
    rng_seed: u64,
    #[arg(long, default_value = "max")]
    aggregate: Aggregate,
    /// Working directory for the commands.
    #[arg(long)]
    workdir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long)]
    sizes: Option<PathBuf>,
    /// Prefix for image ids read from a label directory.
    #[arg(long)]
    tag: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum ManifestCommand {
    Build {
        #[arg(long)]
        name: String,
        #[arg(long, default_value = "")]
        features: String,
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        val: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    Merge {
        #[arg(long)]
        name: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(required = true)]
        parts: Vec<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct SizesArgs {
    #[arg(long)]
    images: PathBuf,
    #[arg(long)]
    tag: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = "HANDTRIAGE_PORT", default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    #[arg(long)]
    data_dir: PathBuf,
    #[arg(long)]
    read_only: bool,
}

/// `seed=500,add=1000,rounds=2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlanSpec {
    pub seed: usize,
    pub add: usize,
    pub rounds: usize,
}

fn parse_plan(s: &str) -> Result<PlanSpec, String> {
    let (mut seed, mut add, mut rounds) = (None, None, None);
    for part in s.split(',') {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| format!("expected key=value, got {part:?}"))?;
        let v: usize = v.trim().parse().map_err(|_| format!("{k} needs a count, got {v:?}"))?;
        match k.trim() {
            "seed" => seed = Some(v),
            "add" => add = Some(v),
            "rounds" => rounds = Some(v),
            other => return Err(format!("unknown plan key {other:?}")),
        }
    }
    match (seed, add, rounds) {
        (Some(seed), Some(add), Some(rounds)) => Ok(PlanSpec { seed, add, rounds }),
        _ => Err("plan needs seed, add and rounds".into()),
    }
}

impl PlanSpec {
    fn with_corpus(self, corpus: usize) -> BootstrapPlan {
        BootstrapPlan {
            seed: self.seed,
            per_round: self.add,
            rounds: self.rounds,
            corpus,
        }
    }
}

fn load_sizes(path: Option<&Path>) -> anyhow::Result<Option<handtriage_core::SizeIndex>> {
    path.map(read_sizes).transpose().map_err(Into::into)
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Eval(a) => {
            let max_dets: [usize; 3] = a
                .max_dets
                .as_slice()
                .try_into()
                .context("--max-dets needs exactly three caps")?;
            let area_edges: [f64; 2] = a
                .area_edges
                .as_slice()
                .try_into()
                .context("--area-edges needs exactly two values")?;
            let cfg = EvalConfig {
                iou_thresholds: parse_thresholds(&a.iou_thresholds)?,
                max_detections: max_dets,
                area_edges,
                ..EvalConfig::default()
            };
            let sizes = load_sizes(a.sizes.as_deref())?;
            let outcome = run_eval(&a.gt, &a.detections, sizes.as_ref(), &cfg)?;
            print!("{}", outcome.metrics.to_table());
            if let Some(out) = a.out {
                write_eval_report(&out, &outcome)?;
            }
        }
        Command::Triage(a) => {
            let run_id = uuid::Uuid::new_v4().simple().to_string();
            let run = triage_from_paths(&TriageRequest {
                frames_dir: &a.frames,
                detections: &a.detections,
                threshold: a.threshold,
                options: TriageOptions {
                    min_confidence: a.min_conf,
                    normalized: a.normalized,
                },
                run_id,
                created_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            })?;
            let report = export_report(&run, &VerdictLedger::new());
            let csv = write_report(&a.out, &report)?;
            if let Some(dir) = a.data_dir {
                RunStore::open(&dir)?.save(&run)?;
                println!("run {}", run.meta.run_id);
            }
            println!(
                "flagged {} of {} frames above {}; wrote {} and {}",
                run.summary.flagged,
                run.summary.total,
                run.threshold,
                a.out.display(),
                csv.display()
            );
        }
        Command::Bootstrap(cmd) => bootstrap(cmd)?,
        Command::Convert(a) => {
            let sizes = load_sizes(a.sizes.as_deref())?;
            let n = convert(&a.input, &a.output, sizes.as_ref(), a.tag.as_deref())?;
            println!("converted {n} boxes to {}", a.output.display());
        }
        Command::Manifest(ManifestCommand::Build {
            name,
            features,
            train,
            val,
            test,
            out,
        }) => {
            let m = build_manifest(
                name,
                features,
                read_id_list(&train)?,
                read_id_list(&val)?,
                read_id_list(&test)?,
            )?;
            write_json(&out, &m)?;
            print_counts(&m);
        }
        Command::Manifest(ManifestCommand::Merge { name, out, parts }) => {
            let parts: Vec<DatasetManifest> = parts.iter().map(|p| read_json(p)).collect::<Result<_, _>>()?;
            let m = merge_manifests(&parts, name)?;
            write_json(&out, &m)?;
            print_counts(&m);
        }
        Command::Sizes(a) => {
            let sizes = sizes_from_images(&a.images, a.tag.as_deref())?;
            write_sizes(&a.out, &sizes)?;
            println!("{} images", sizes.len());
        }
        Command::Serve(a) => {
            let ip: std::net::IpAddr = a.host.parse().unwrap_or(Ipv4Addr::LOCALHOST.into());
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(serve(ServeConfig {
                addr: SocketAddr::new(ip, a.port),
                data_dir: a.data_dir,
                read_only: a.read_only,
            }))?;
        }
    }
    Ok(())
}

fn print_counts(m: &DatasetManifest) {
    println!(
        "{}: train {} val {} test {} total {}",
        m.name,
        m.counts.train,
        m.counts.val,
        m.counts.test,
        m.counts.total()
    );
}

fn bootstrap(cmd: BootstrapCommand) -> anyhow::Result<()> {
    match cmd {
        BootstrapCommand::Plan {
            plan,
            corpus,
            corpus_size,
        } => {
            let n = match (corpus, corpus_size) {
                (Some(path), _) => read_id_list(&path)?.len(),
                (None, Some(n)) => n,
                (None, None) => bail!("give --corpus or --corpus-size"),
            };
            for r in plan_rounds(&plan.with_corpus(n))? {
                println!("round {}: train {} predict {}", r.round, r.train_size, r.predict_size);
            }
        }
        BootstrapCommand::Select {
            predictions,
            k,
            aggregate,
            out,
        } => {
            let files = read_label_dir(&predictions, None)?;
            let sel = select_top_k(&files, k, aggregate)?;
            let lines: String = sel
                .selected
                .iter()
                .map(|s| format!("{}\t{}\n", s.image_id, s.score))
                .collect();
            match out {
                Some(path) => write_atomic(&path, lines.as_bytes())?,
                None => print!("{lines}"),
            }
            if !sel.excluded.is_empty() {
                eprintln!("{} images had no detections", sel.excluded.len());
            }
        }
        BootstrapCommand::Seed {
            corpus,
            size,
            rng_seed,
            out,
        } => {
            let ids = sample_seed(&read_id_list(&corpus)?, size, rng_seed)?;
            write_id_list(&out, &ids)?;
            println!("{} seed images written to {}", ids.len(), out.display());
        }
        BootstrapCommand::Run(a) => {
            let corpus = read_id_list(&a.corpus)?;
            let job = BootstrapRun {
                plan: a.plan.with_corpus(corpus.len()),
                corpus,
                seed_labels: read_label_dir(&a.seed_labels, None)?,
                rng_seed: a.rng_seed,
                aggregate: a.aggregate,
                state_dir: a.state.clone(),
            };
            let mut trainer = CommandTrainer::new(a.train_cmd, a.predict_cmd, a.workdir)?;
            let outcome = job.run(&mut trainer)?;
            let pool = outcome.pool;
            println!(
                "pool {} images: {} human, {} pseudo; labels in {}",
                pool.len(),
                pool.human_count(),
                pool.pseudo_count(),
                a.state.join("final/labels").display()
            );
        }
    }
    Ok(())
}
