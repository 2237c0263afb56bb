//! Brute-force reference for the twelve-metric report, written straight from
//! the metric definitions with integer boxes and exact rational comparisons.
//! It shares no code with the evaluator beyond the input record types.

#![allow(dead_code)]

use std::cmp::Ordering;

use handtriage_core::{BBox, Detection, GroundTruthBox};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// IoU thresholds in percent.
pub const THRESHOLDS_PCT: [i64; 10] = [50, 55, 60, 65, 70, 75, 80, 85, 90, 95];
pub const CAPS: [usize; 3] = [1, 10, 100];
pub const SMALL_EDGE: i64 = 32 * 32;
pub const LARGE_EDGE: i64 = 96 * 96;
pub const RECALL_LEVELS: i64 = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct IBox {
    pub x: i64,
    pub y: i64,
    pub w: i64,
    pub h: i64,
}

impl IBox {
    pub fn area(&self) -> i64 {
        self.w * self.h
    }

    fn inter(&self, o: &IBox) -> i64 {
        let iw = (self.x + self.w).min(o.x + o.w) - self.x.max(o.x);
        let ih = (self.y + self.h).min(o.y + o.h) - self.y.max(o.y);
        iw.max(0) * ih.max(0)
    }

    /// IoU as an exact fraction (intersection, union).
    pub fn iou(&self, o: &IBox) -> (i64, i64) {
        let i = self.inter(o);
        (i, self.area() + o.area() - i)
    }

    fn to_bbox(self) -> BBox {
        BBox::new(self.x as f64, self.y as f64, self.w as f64, self.h as f64).unwrap()
    }
}

#[derive(Clone, Debug)]
pub struct OracleGt {
    pub id: u64,
    pub image: u32,
    pub b: IBox,
}

#[derive(Clone, Debug)]
pub struct OracleDet {
    pub id: u64,
    pub image: u32,
    pub b: IBox,
    pub conf: f64,
}

#[derive(Clone, Debug, Default)]
pub struct OracleScene {
    pub gts: Vec<OracleGt>,
    pub dets: Vec<OracleDet>,
}

fn image_name(image: u32) -> String {
    format!("scene/img{image:02}.jpg")
}

fn random_box(rng: &mut ChaCha8Rng) -> IBox {
    let (lo, hi) = match rng.random_range(0..3) {
        0 => (4, 31),
        1 => (32, 95),
        _ => (96, 130),
    };
    IBox {
        x: rng.random_range(0..=100),
        y: rng.random_range(0..=100),
        w: rng.random_range(lo..=hi),
        h: rng.random_range(lo..=hi),
    }
}

fn jitter(rng: &mut ChaCha8Rng, b: IBox) -> IBox {
    let dx = rng.random_range(-(b.w / 3)..=b.w / 3);
    let dy = rng.random_range(-(b.h / 3)..=b.h / 3);
    let dw = rng.random_range(-(b.w / 4)..=b.w / 4);
    let dh = rng.random_range(-(b.h / 4)..=b.h / 4);
    IBox {
        x: (b.x + dx).max(0),
        y: (b.y + dy).max(0),
        w: (b.w + dw).max(1),
        h: (b.h + dh).max(1),
    }
}

impl OracleScene {
    /// Random scene: up to `max_images` images, each with up to `max_gt`
    /// ground-truth boxes and `max_det` detections. Confidences are
    /// multiples of 1/20 so ties are common.
    pub fn random(rng: &mut ChaCha8Rng, max_images: u32, max_gt: usize, max_det: usize) -> Self {
        let mut scene = OracleScene::default();
        let images = rng.random_range(1..=max_images);
        for image in 0..images {
            let n_gt = rng.random_range(0..=max_gt);
            let first = scene.gts.len();
            for _ in 0..n_gt {
                let id = scene.gts.len() as u64 + 1;
                scene.gts.push(OracleGt {
                    id,
                    image,
                    b: random_box(rng),
                });
            }
            let n_det = rng.random_range(0..=max_det);
            for _ in 0..n_det {
                let b = if n_gt > 0 && rng.random_bool(0.65) {
                    let src = scene.gts[first + rng.random_range(0..n_gt)].b;
                    if rng.random_bool(0.3) {
                        src
                    } else {
                        jitter(rng, src)
                    }
                } else {
                    random_box(rng)
                };
                let id = scene.dets.len() as u64 + 1;
                scene.dets.push(OracleDet {
                    id,
                    image,
                    b,
                    conf: f64::from(rng.random_range(1..=20u32)) / 20.0,
                });
            }
        }
        scene
    }

    pub fn gt_boxes(&self) -> Vec<GroundTruthBox> {
        self.gts
            .iter()
            .map(|g| GroundTruthBox {
                id: g.id,
                image_id: image_name(g.image),
                bbox: g.b.to_bbox(),
            })
            .collect()
    }

    pub fn detections(&self) -> Vec<Detection> {
        self.dets
            .iter()
            .map(|d| Detection::new(d.id, image_name(d.image), d.b.to_bbox(), d.conf).unwrap())
            .collect()
    }

    fn images(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = self
            .gts
            .iter()
            .map(|g| g.image)
            .chain(self.dets.iter().map(|d| d.image))
            .collect();
        ids.sort();
        ids.dedup();
        ids
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Bucket {
    All,
    Small,
    Medium,
    Large,
}

impl Bucket {
    fn holds(self, area: i64) -> bool {
        match self {
            Bucket::All => true,
            Bucket::Small => area < SMALL_EDGE,
            Bucket::Medium => (SMALL_EDGE..LARGE_EDGE).contains(&area),
            Bucket::Large => area >= LARGE_EDGE,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Verdict {
    Tp,
    Fp,
    Skip,
}

/// a/b vs c/d for non-negative fractions with positive denominators.
fn cmp_frac(a: (i64, i64), b: (i64, i64)) -> Ordering {
    (i128::from(a.0) * i128::from(b.1)).cmp(&(i128::from(b.0) * i128::from(a.1)))
}

fn ranked<'a>(dets: impl Iterator<Item = &'a OracleDet>) -> Vec<&'a OracleDet> {
    let mut v: Vec<&OracleDet> = dets.collect();
    v.sort_by(|a, b| b.conf.partial_cmp(&a.conf).unwrap().then(a.id.cmp(&b.id)));
    v
}

/// Walks the top-`cap` detections of one image in rank order. Each takes
/// the still-free ground truth with IoU >= pct/100 that is best by
/// (inside the bucket, IoU, lower id).
fn judge_image(gts: &[&OracleGt], dets: &[&OracleDet], pct: i64, bucket: Bucket) -> Vec<(f64, u64, Verdict)> {
    let mut free: Vec<&OracleGt> = gts.to_vec();
    let mut out = Vec::new();
    for d in dets {
        let mut best: Option<(usize, (i64, i64))> = None;
        for (k, g) in free.iter().enumerate() {
            let (i, u) = d.b.iou(&g.b);
            if u == 0 || i * 100 < pct * u {
                continue;
            }
            let take = match best {
                None => true,
                Some((bk, bf)) => {
                    let cur_in = bucket.holds(g.b.area());
                    let best_in = bucket.holds(free[bk].b.area());
                    match (cur_in, best_in) {
                        (true, false) => true,
                        (false, true) => false,
                        _ => match cmp_frac((i, u), bf) {
                            Ordering::Greater => true,
                            Ordering::Less => false,
                            Ordering::Equal => g.id < free[bk].id,
                        },
                    }
                }
            };
            if take {
                best = Some((k, (i, u)));
            }
        }
        let verdict = match best {
            Some((k, _)) => {
                let g = free.remove(k);
                if bucket.holds(g.b.area()) {
                    Verdict::Tp
                } else {
                    Verdict::Skip
                }
            }
            None if bucket.holds(d.b.area()) => Verdict::Fp,
            None => Verdict::Skip,
        };
        out.push((d.conf, d.id, verdict));
    }
    out
}

/// (AP, recall) for one threshold, bucket and cap; `None` when the bucket
/// has no ground truth.
fn cell(scene: &OracleScene, pct: i64, bucket: Bucket, cap: usize) -> Option<(f64, f64)> {
    let n_gt = scene.gts.iter().filter(|g| bucket.holds(g.b.area())).count() as i64;
    if n_gt == 0 {
        return None;
    }
    let mut pooled = Vec::new();
    for image in scene.images() {
        let gts: Vec<&OracleGt> = {
            let mut v: Vec<&OracleGt> = scene.gts.iter().filter(|g| g.image == image).collect();
            v.sort_by_key(|g| g.id);
            v
        };
        let dets: Vec<&OracleDet> = ranked(scene.dets.iter().filter(|d| d.image == image))
            .into_iter()
            .take(cap)
            .collect();
        pooled.extend(judge_image(&gts, &dets, pct, bucket));
    }
    pooled.retain(|p| p.2 != Verdict::Skip);
    pooled.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));

    // Every prefix of the ranking is one operating point (tp, n).
    let mut prefixes = Vec::with_capacity(pooled.len());
    let mut tp = 0i64;
    for (n, p) in pooled.iter().enumerate() {
        if p.2 == Verdict::Tp {
            tp += 1;
        }
        prefixes.push((tp, n as i64 + 1));
    }
    let mut sum = 0.0;
    for level in 0..=RECALL_LEVELS {
        // Best precision among operating points with recall >= level/100.
        let best = prefixes
            .iter()
            .filter(|&&(tp, _)| tp * RECALL_LEVELS >= level * n_gt)
            .copied()
            .max_by(|a, b| cmp_frac(*a, *b));
        if let Some((tp, n)) = best {
            sum += tp as f64 / n as f64;
        }
    }
    let ap = sum / (RECALL_LEVELS + 1) as f64;
    Some((ap, tp as f64 / n_gt as f64))
}

/// Ids of detections judged true positive at `pct` over all scales.
pub fn true_positive_ids(scene: &OracleScene, pct: i64) -> Vec<u64> {
    let mut ids = Vec::new();
    for image in scene.images() {
        let mut gts: Vec<&OracleGt> = scene.gts.iter().filter(|g| g.image == image).collect();
        gts.sort_by_key(|g| g.id);
        let dets: Vec<&OracleDet> = ranked(scene.dets.iter().filter(|d| d.image == image))
            .into_iter()
            .take(CAPS[2])
            .collect();
        ids.extend(
            judge_image(&gts, &dets, pct, Bucket::All)
                .into_iter()
                .filter(|p| p.2 == Verdict::Tp)
                .map(|p| p.1),
        );
    }
    ids.sort();
    ids
}

fn mean(values: Vec<Option<f64>>) -> f64 {
    if values.iter().any(Option::is_none) {
        return -1.0;
    }
    values.iter().map(|v| v.unwrap()).sum::<f64>() / values.len() as f64
}

/// Metrics in report order: AP, AP50, AP75, AP-S, AP-M, AP-L, AR1, AR10,
/// AR100, AR-S, AR-M, AR-L.
pub fn oracle_metrics(scene: &OracleScene) -> [f64; 12] {
    let big = CAPS[2];
    let ap = |bucket| {
        mean(
            THRESHOLDS_PCT
                .iter()
                .map(|&p| cell(scene, p, bucket, big).map(|c| c.0))
                .collect(),
        )
    };
    let ar = |bucket, cap| {
        mean(
            THRESHOLDS_PCT
                .iter()
                .map(|&p| cell(scene, p, bucket, cap).map(|c| c.1))
                .collect(),
        )
    };
    let single = |p| cell(scene, p, Bucket::All, big).map_or(-1.0, |c| c.0);
    [
        ap(Bucket::All),
        single(50),
        single(75),
        ap(Bucket::Small),
        ap(Bucket::Medium),
        ap(Bucket::Large),
        ar(Bucket::All, CAPS[0]),
        ar(Bucket::All, CAPS[1]),
        ar(Bucket::All, CAPS[2]),
        ar(Bucket::Small, big),
        ar(Bucket::Medium, big),
        ar(Bucket::Large, big),
    ]
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
