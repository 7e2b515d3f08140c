use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use cisca_core::grid::{Grid, LabelMap};
use cisca_core::io;
use serde_json::Value;

fn kit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cisca-kit"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = kit(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// A grid of touching and separate disks.
fn scene(h: usize, w: usize) -> LabelMap {
    let centres = [(20.0, 20.0, 9.0), (20.0, 37.0, 8.0), (50.0, 24.0, 10.0), (45.0, 55.0, 7.0), (70.0, 70.0, 8.0)];
    LabelMap::new(Grid::from_fn(h, w, |r, c| {
        centres
            .iter()
            .enumerate()
            .filter(|(_, (cr, cc, rad))| ((r as f64 - cr).powi(2) + (c as f64 - cc).powi(2)).sqrt() <= *rad)
            .map(|(i, (cr, cc, _))| (i as u32 + 1, (r as f64 - cr).powi(2) + (c as f64 - cc).powi(2)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map_or(0, |(id, _)| id)
    }))
}

fn rgb(h: usize, w: usize, shift: u8) -> Grid<[u8; 3]> {
    Grid::from_fn(h, w, |r, c| {
        let v = ((r * 7 + c * 3) % 60) as u8;
        [150 + v / 2 + shift, 90 + v, 170 - v / 3]
    })
}

#[test]
fn encode_writes_all_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let labels = dir.path().join("labels.png");
    io::write_label_png(&labels, &scene(80, 90)).unwrap();
    let out = dir.path().join("enc");
    ok(&["encode", "--labels", p(&labels), "--out-dir", p(&out)]);
    let ternary = io::read_code_png(&out.join("ternary.png")).unwrap();
    assert_eq!(ternary.shape(), (80, 90));
    assert!(ternary.as_slice().iter().all(|v| (1..=3).contains(v)));
    assert!(ternary.as_slice().contains(&1), "touching disks give a boundary");
    let dist = io::read_tensor(&out.join("dist.f32")).unwrap();
    assert_eq!((dist.height(), dist.width(), dist.channels()), (80, 90, 4));
    let mask = io::read_tensor(&out.join("mask.f32")).unwrap();
    assert!(mask.as_slice().iter().all(|&v| v == 1.0 || v == 0.05));
    assert_eq!(io::read_tensor(&out.join("prob.f32")).unwrap().channels(), 3);
}

#[test]
fn pipeline_recovers_instances() {
    let dir = tempfile::tempdir().unwrap();
    let (gt_dir, pred_dir) = (dir.path().join("gt"), dir.path().join("pred"));
    fs::create_dir_all(&gt_dir).unwrap();
    fs::create_dir_all(&pred_dir).unwrap();
    let labels = gt_dir.join("a.png");
    io::write_label_png(&labels, &scene(80, 90)).unwrap();
    let enc = dir.path().join("enc");
    ok(&["encode", "--labels", p(&labels), "--out-dir", p(&enc)]);
    ok(&[
        "postprocess",
        "--prob",
        p(&enc.join("prob.f32")),
        "--dist",
        p(&enc.join("dist.f32")),
        "--out",
        p(&pred_dir.join("a.png")),
    ]);
    let report: Value = serde_json::from_str(&ok(&["metrics", "--gt-dir", p(&gt_dir), "--pred-dir", p(&pred_dir)])).unwrap();
    let agg = &report["aggregate"];
    assert!(agg["pq"].as_f64().unwrap() >= 0.95, "{agg}");
    assert_eq!(agg["f1"].as_f64().unwrap(), 1.0);
}

#[test]
fn metrics_of_identical_maps_are_perfect() {
    let dir = tempfile::tempdir().unwrap();
    let gt = dir.path().join("gt");
    fs::create_dir_all(&gt).unwrap();
    io::write_label_png(&gt.join("x.png"), &scene(80, 90)).unwrap();
    let out = dir.path().join("m.json");
    ok(&["metrics", "--gt-dir", p(&gt), "--pred-dir", p(&gt), "--out", p(&out)]);
    let report: Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    for key in ["dice", "aji", "pq", "dq", "sq", "f1"] {
        assert_eq!(report["aggregate"][key].as_f64(), Some(1.0), "{key}");
    }
    assert_eq!(report["meta"]["images"], 1);
}

#[test]
fn loss_of_perfect_prediction_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let labels = dir.path().join("labels.png");
    io::write_label_png(&labels, &scene(40, 40)).unwrap();
    let e = dir.path().join("e");
    ok(&["encode", "--labels", p(&labels), "--out-dir", p(&e)]);
    let (prob, dist, mask) = (e.join("prob.f32"), e.join("dist.f32"), e.join("mask.f32"));
    let v: Value = serde_json::from_str(&ok(&[
        "loss", "--gt-prob", p(&prob), "--pred-prob", p(&prob), "--gt-dist", p(&dist), "--pred-dist", p(&dist), "--mask", p(&mask),
    ]))
    .unwrap();
    assert!(v["total"].as_f64().unwrap().abs() < 1e-9, "{v}");
}

#[test]
fn tile_untile_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("img.png");
    let image = rgb(300, 270, 0);
    io::write_rgb_png(&input, &image).unwrap();
    let tiles = dir.path().join("tiles");
    ok(&["tile", "--in", p(&input), "--out-dir", p(&tiles)]);
    let manifest: Value = serde_json::from_str(&fs::read_to_string(tiles.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["tiles"].as_array().unwrap().len(), 16);
    let out = dir.path().join("back.f32");
    ok(&["untile", "--manifest", p(&tiles.join("manifest.json")), "--out", p(&out)]);
    let back = io::read_tensor(&out).unwrap();
    assert_eq!((back.height(), back.width(), back.channels()), (300, 270, 3));
    for (i, px) in image.as_slice().iter().enumerate() {
        for k in 0..3 {
            let got = back.pixel(i)[k];
            assert!((got - px[k] as f32).abs() < 1e-3, "pixel {i}: {got} vs {}", px[k]);
        }
    }
}

#[test]
fn sample_plan_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("m.csv");
    let mut csv = String::from("image_id,tumour,immune,rare\n");
    for i in 0..50 {
        csv.push_str(&format!("im{i},{},{},{}\n", 40 + i, i % 7, u8::from(i % 10 == 0)));
    }
    fs::write(&manifest, csv).unwrap();
    let alphas = dir.path().join("a.json");
    fs::write(&alphas, r#"{"rare": 1.5, "default": 1.0}"#).unwrap();
    let args = ["sample-plan", "--manifest", p(&manifest), "--alphas", p(&alphas), "--seed", "4"];
    let first = ok(&args);
    assert_eq!(first, ok(&args));
    let plan: Value = serde_json::from_str(&first).unwrap();
    assert_eq!(plan["majority_class"], "tumour");
    assert!(plan["total_images"].as_u64().unwrap() > 50);
}

#[test]
fn stain_commands_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (src, t1, t2) = (dir.path().join("s.png"), dir.path().join("t1.png"), dir.path().join("t2.png"));
    io::write_rgb_png(&src, &rgb(32, 32, 0)).unwrap();
    io::write_rgb_png(&t1, &rgb(32, 32, 10)).unwrap();
    io::write_rgb_png(&t2, &rgb(32, 32, 20)).unwrap();
    let (a, b) = (dir.path().join("a.png"), dir.path().join("b.png"));
    for out in [&a, &b] {
        ok(&["stain", "augment", "--in", p(&src), "--out", p(out), "--style-template", p(&t1), "--style-template", p(&t2), "--seed", "9"]);
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let n = dir.path().join("n.png");
    ok(&["stain", "normalize", "--in", p(&src), "--out", p(&n), "--method", "reinhard", "--template", p(&t1)]);
    assert_eq!(io::read_rgb_png(&n).unwrap().shape(), (32, 32));
}

#[test]
fn exit_codes_distinguish_usage_and_data_errors() {
    assert_eq!(kit(&["encode"]).status.code(), Some(2));
    assert_eq!(kit(&["postprocess", "--theta1", "x"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.png");
    let out = kit(&["encode", "--labels", p(&missing), "--out-dir", p(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.starts_with("error:"), "{stderr}");
    let img = dir.path().join("i.png");
    io::write_rgb_png(&img, &rgb(8, 8, 0)).unwrap();
    let out = kit(&["stain", "normalize", "--in", p(&img), "--out", p(&img), "--method", "style", "--template", p(&img)]);
    assert_eq!(out.status.code(), Some(2), "one style template is a usage error");
}
