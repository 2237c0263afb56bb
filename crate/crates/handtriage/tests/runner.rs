use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use handtriage::fsutil::read_json_lines;
use handtriage::runner::{AuditRecord, BootstrapRun, CommandTrainer};
use handtriage::Error;
use handtriage_core::bootstrap::{Aggregate, BootstrapPlan, Provenance};
use handtriage_core::LabelFile;

const PREDICT: &str = r#"list="$1"; out="$2"
while IFS= read -r id; do
  key="${id%.*}"
  mkdir -p "$(dirname "$out/$key")"
  c=$(printf %s "$id" | cksum | cut -d' ' -f1)
  case $(( c % 7 )) in
    0) ;;
    *) printf '0 0.5 0.5 0.2 0.2 0.%03d\n' $(( c % 1000 )) > "$out/$key.txt" ;;
  esac
done < "$list"
"#;

struct Fixture {
    _dir: tempfile::TempDir,
    root: std::path::PathBuf,
}

fn fixture() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().to_path_buf();
    fs::write(root.join("predict.sh"), PREDICT).unwrap();
    Fixture { _dir: dir, root }
}

fn corpus(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("clips/img{i:03}.jpg")).collect()
}

fn seed_labels(n: usize) -> Vec<LabelFile> {
    (0..n)
        .map(|i| LabelFile::parse(format!("clips/img{i:03}"), "0 0.4 0.4 0.1 0.1\n").unwrap())
        .collect()
}

fn job(root: &Path, state: &str, rng_seed: u64) -> BootstrapRun {
    BootstrapRun {
        plan: BootstrapPlan {
            seed: 5,
            per_round: 10,
            rounds: 2,
            corpus: 40,
        },
        corpus: corpus(40),
        seed_labels: seed_labels(8),
        rng_seed,
        aggregate: Aggregate::Max,
        state_dir: root.join(state),
    }
}

fn trainer(root: &Path, train: &str) -> CommandTrainer {
    CommandTrainer::new(
        train,
        format!("sh {} {{predict-list}} {{out-dir}}", root.join("predict.sh").display()),
        Some(root.to_path_buf()),
    )
    .unwrap()
}

const TRAIN_OK: &str = "test -s {train-dir}/images.txt && cp {train-dir}/images.txt {model-dir}/seen.txt";

fn tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    handtriage::fsutil::walk_files(dir)
        .unwrap()
        .into_iter()
        .map(|p| {
            (
                p.strip_prefix(dir).unwrap().display().to_string(),
                fs::read(&p).unwrap(),
            )
        })
        .collect()
}

#[test]
fn shell_trainer_runs_all_rounds() {
    let fx = fixture();
    let out = job(&fx.root, "state", 7).run(&mut trainer(&fx.root, TRAIN_OK)).unwrap();
    let pool = out.pool;
    assert_eq!((pool.len(), pool.human_count(), pool.pseudo_count()), (40, 5, 35));

    let seen = fs::read_to_string(fx.root.join("state/round-1/model/seen.txt")).unwrap();
    assert_eq!(seen.lines().count(), 15);
    let train_label = fx.root.join("state/round-1/train/labels/clips");
    assert_eq!(fs::read_dir(train_label).unwrap().count(), 15);

    let audit: Vec<AuditRecord> = read_json_lines(&fx.root.join("state/audit.jsonl")).unwrap();
    assert_eq!(audit.len(), 4);
    let AuditRecord::Seed { ids, available, .. } = &audit[0] else {
        panic!()
    };
    assert_eq!((ids.len(), *available), (5, 8));
    for (round, record) in audit[1..3].iter().enumerate() {
        let AuditRecord::Select { selected, round: r, .. } = record else {
            panic!()
        };
        assert_eq!(*r, round);
        assert_eq!(selected.len(), 10);
        // Nothing left unselected scores higher than the weakest pick.
        let weakest = selected.last().unwrap().score;
        let preds = fx.root.join(format!("state/round-{round}/predictions"));
        for f in handtriage::io::read_label_dir(&preds, None).unwrap() {
            let id = format!("{}.jpg", f.image_id);
            if !selected.iter().any(|s| s.image_id == id) {
                assert!(f.max_confidence().unwrap_or(0.0) <= weakest);
            }
        }
        for s in selected {
            assert!(
                matches!(pool.get(&s.image_id).unwrap().provenance, Provenance::Pseudo { round: pr, .. } if pr == round + 1)
            );
        }
    }
    let AuditRecord::Final { added, .. } = &audit[3] else {
        panic!()
    };
    assert_eq!(*added, 15);

    let final_labels = handtriage::io::read_label_dir(&fx.root.join("state/final/labels"), None).unwrap();
    assert_eq!(final_labels.len(), 40);
    assert!(final_labels.iter().all(|f| !f.is_detection()));
}

#[test]
fn failing_command_keeps_state_and_resume_matches() {
    let fx = fixture();
    job(&fx.root, "clean", 3).run(&mut trainer(&fx.root, TRAIN_OK)).unwrap();

    let fail_round_1 = "test {round} -ne 1 && cp {train-dir}/images.txt {model-dir}/seen.txt";
    let err = job(&fx.root, "resumed", 3)
        .run(&mut trainer(&fx.root, fail_round_1))
        .unwrap_err();
    assert!(
        matches!(
            err,
            Error::Command {
                round: 1,
                stage: "train",
                ..
            }
        ),
        "{err}"
    );
    let state: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(fx.root.join("resumed/state.json")).unwrap()).unwrap();
    assert_eq!(state["completed_round"], 0);

    let out = job(&fx.root, "resumed", 3)
        .run(&mut trainer(&fx.root, TRAIN_OK))
        .unwrap();
    assert_eq!(out.started_at, Some(1));
    assert_eq!(tree(&fx.root.join("clean")), tree(&fx.root.join("resumed")));

    // A finished state returns the final pool without running anything.
    let again = job(&fx.root, "resumed", 3)
        .run(&mut trainer(&fx.root, "false {train-dir}"))
        .unwrap();
    assert_eq!(again.started_at, None);
    assert_eq!(again.pool, out.pool);
}

#[test]
fn mismatched_settings_and_bad_predictions_are_errors() {
    let fx = fixture();
    let fail = "false {train-dir}";
    assert!(job(&fx.root, "s", 1).run(&mut trainer(&fx.root, fail)).is_err());
    let err = job(&fx.root, "s", 2).run(&mut trainer(&fx.root, TRAIN_OK)).unwrap_err();
    assert!(err.to_string().contains("different settings"), "{err}");

    let bad = CommandTrainer::new(
        TRAIN_OK,
        "mkdir -p {out-dir}/clips && echo '0 0.5 0.5 0.2' > {out-dir}/clips/img010.txt # {predict-list}",
        Some(fx.root.clone()),
    )
    .unwrap();
    let err = job(&fx.root, "bad", 1).run(&mut { bad }).unwrap_err();
    assert!(err.to_string().contains("img010.txt"), "{err}");

    let mut short = job(&fx.root, "short", 1);
    short.seed_labels.truncate(3);
    let err = short.run(&mut trainer(&fx.root, TRAIN_OK)).unwrap_err();
    assert!(err.to_string().contains("seed labels"), "{err}");
}
