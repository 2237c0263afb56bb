#![allow(dead_code)]

use std::fs;
use std::path::Path;

use serde_json::json;

/// Just enough PNG for header-based size probing: signature plus IHDR.
pub fn png_header(width: u32, height: u32) -> Vec<u8> {
    let mut b = vec![0x89, b'P', b'N', b'G', 0x0d, 0x0a, 0x1a, 0x0a, 0, 0, 0, 13];
    b.extend_from_slice(b"IHDR");
    b.extend_from_slice(&width.to_be_bytes());
    b.extend_from_slice(&height.to_be_bytes());
    b.extend_from_slice(&[8, 2, 0, 0, 0, 0, 0, 0, 0]);
    b
}

pub fn write_png(path: &Path, width: u32, height: u32) {
    fs::create_dir_all(path.parent().unwrap()).unwrap();
    fs::write(path, png_header(width, height)).unwrap();
}

/// Frames whose single detection has the given (w, h), written as
/// `frame_<i>.png` at 1920x1080 with a COCO detection list.
pub fn write_triage_fixture(dir: &Path, boxes: &[Option<(f64, f64)>]) -> (std::path::PathBuf, std::path::PathBuf) {
    let frames = dir.join("frames");
    let mut dets = Vec::new();
    for (i, b) in boxes.iter().enumerate() {
        let name = format!("frame_{}.png", i + 1);
        write_png(&frames.join(&name), 1920, 1080);
        if let Some((w, h)) = b {
            dets.push(json!({"image_id": name, "category_id": 1, "bbox": [10.0, 10.0, w, h], "score": 0.9}));
        }
    }
    let det_path = dir.join("detections.json");
    fs::write(&det_path, serde_json::to_vec(&dets).unwrap()).unwrap();
    (frames, det_path)
}

/// Largest areas 900, 30,000, 31,000 and 40,000.
pub fn four_frames(dir: &Path) -> (std::path::PathBuf, std::path::PathBuf) {
    write_triage_fixture(
        dir,
        &[
            Some((30.0, 30.0)),
            Some((100.0, 300.0)),
            Some((100.0, 310.0)),
            Some((200.0, 200.0)),
        ],
    )
}

/// Two ground-truth boxes in one image; one exact hit at 0.9 and one miss
/// at 0.8.
pub fn write_half_recall_fixture(dir: &Path) -> (std::path::PathBuf, std::path::PathBuf) {
    let gt = json!({
        "images": [{"id": 1, "file_name": "a.jpg", "width": 640, "height": 480}],
        "annotations": [
            {"id": 1, "image_id": 1, "category_id": 1, "bbox": [0, 0, 10, 10], "area": 100, "iscrowd": 0},
            {"id": 2, "image_id": 1, "category_id": 1, "bbox": [20, 20, 10, 10], "area": 100, "iscrowd": 0}
        ],
        "categories": [{"id": 1, "name": "hand"}]
    });
    let dets = json!([
        {"image_id": 1, "category_id": 1, "bbox": [0, 0, 10, 10], "score": 0.9},
        {"image_id": 1, "category_id": 1, "bbox": [50, 50, 10, 10], "score": 0.8}
    ]);
    fs::create_dir_all(dir).unwrap();
    let (g, d) = (dir.join("gt.json"), dir.join("dets.json"));
    fs::write(&g, serde_json::to_vec(&gt).unwrap()).unwrap();
    fs::write(&d, serde_json::to_vec(&dets).unwrap()).unwrap();
    (g, d)
}
