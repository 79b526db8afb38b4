//! Shipped graphs end to end, and the command-line front end.

mod common;

use std::process::Command;

use common::*;
use graphvx::exec::{random_inputs, run_naive, run_plan};
use graphvx::io::read_image;
use graphvx::optimize::{optimize, FuseOptions, PassOptions};

const EXE: &str = env!("CARGO_BIN_EXE_graphvx");

fn cli(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(EXE).args(args).env_remove("GRAPHVX_LOG").output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn path(name: &str) -> String {
    corpus_path(name).to_string_lossy().into_owned()
}

#[test]
fn node_counts_before_and_after_expansion() {
    let want = [
        ("gauss", 1, 1),
        ("laplacian", 1, 1),
        ("fchain", 3, 3),
        ("sobelx", 1, 2),
        ("edge_fig1", 5, 6),
        ("sobel", 3, 4),
        ("unsharp", 4, 4),
        ("harris", 13, 14),
        ("tomasi", 14, 15),
    ];
    for (name, app, expanded) in want {
        let c = load(name, Some((16, 16)));
        assert_eq!((c.app.node_count(), c.expanded.node_count()), (app, expanded), "{name}");
    }
}

#[test]
fn edge_graph_launches() {
    let c = load("edge_fig1", Some((64, 64)));
    let inputs = random_inputs(&c.expanded, 7);
    let naive = run_naive(&c.expanded, &inputs).unwrap();
    assert_eq!(naive.counters.kernel_launches, 6);

    let pp = PassOptions { dce: true, fuse: FuseOptions { point_point: true, ..FuseOptions::none() } };
    let plan = optimize(&c.expanded, pp).unwrap();
    let r = run_plan(&plan, &inputs).unwrap();
    assert_eq!(r.counters.kernel_launches, 4);
    assert!(r.outputs_bit_eq(&naive));

    let plan = optimize(&c.expanded, PassOptions::default()).unwrap();
    let r = run_plan(&plan, &inputs).unwrap();
    assert_eq!(r.counters.kernel_launches, 2);
    assert!(r.outputs_bit_eq(&naive));
}

#[test]
fn dce_alone_keeps_outputs() {
    let c = load("sobelx", Some((64, 64)));
    let inputs = random_inputs(&c.expanded, 1);
    let naive = run_naive(&c.expanded, &inputs).unwrap();
    let plan = optimize(&c.expanded, PassOptions { dce: true, fuse: FuseOptions::none() }).unwrap();
    let r = run_plan(&plan, &inputs).unwrap();
    assert!(r.outputs_bit_eq(&naive));
    assert_eq!(naive.counters.pixels_read, 73728);
    assert_eq!(r.counters.pixels_read, 36864);
}

#[test]
fn cli_verify() {
    for name in CORPUS {
        let (code, out, err) = cli(&["verify", &path(name)]);
        assert_eq!(code, 0, "{name}: {err}");
        assert!(out.starts_with("ok: "), "{out}");
    }
    let (code, _, err) = cli(&["verify", &path("bad_cycle")]);
    assert_eq!(code, 1);
    assert!(err.contains("CycleDetected object#6: cycle through nodes #6, #7"), "{err}");
    let (code, _, _) = cli(&["verify", "/definitely/not/here.json"]);
    assert_eq!(code, 2);
    let (code, _, _) = cli(&["frobnicate"]);
    assert_eq!(code, 2);
}

#[test]
fn cli_optimize_writes_stats_and_dot() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_string_lossy().into_owned();
    let (code, out, err) = cli(&["optimize", &path("edge_fig1"), "--out-dir", &out_dir]);
    assert_eq!(code, 0, "{err}");
    let stats: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(stats["nodes_before"], 6);
    assert_eq!(stats["nodes_alive"], 5);
    assert_eq!(stats["nodes_removed"], 1);
    for f in ["stats.json", "plan.json", "app.dot", "impl.dot", "filtered.dot", "fused.dot"] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    let (code, out, _) = cli(&["optimize", &path("edge_fig1"), "--no-dce", "--no-fuse", "--out-dir", &out_dir]);
    assert_eq!(code, 0);
    let stats: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(stats["nodes_removed"], 0);
    assert_eq!(stats["launches_after"], 6);
}

#[test]
fn cli_run_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_string_lossy().into_owned();
    let (code, out, err) = cli(&["--size", "32x32", "--seed", "5", "run", &path("sobel"), "--out-dir", &out_dir]);
    assert_eq!(code, 0, "{err}");
    let counters: serde_json::Value = serde_json::from_str(&out).unwrap();

    let c = load("sobel", Some((32, 32)));
    let plan = optimize(&c.expanded, PassOptions::default()).unwrap();
    let r = run_plan(&plan, &random_inputs(&c.expanded, 5)).unwrap();
    assert_eq!(counters["kernel_launches"], r.counters.kernel_launches);
    for (id, buf) in &r.outputs {
        let name = c.loaded.name_of(*id).unwrap();
        let file = std::fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().path())
            .find(|p| p.file_stem().unwrap() == name)
            .unwrap_or_else(|| panic!("no file for {name}"));
        let img = read_image(&file).unwrap();
        assert!(graphvx::exec::Buffer::Image(img).bit_eq(buf), "{name}");
    }

    let (code, _, err) = cli(&["--size", "32x32", "run", &path("gauss"), "--out-dir", &out_dir, "--naive"]);
    assert_eq!(code, 0, "{err}");
    let (code, _, err) = cli(&["--size", "32x32", "run", &path("sobel"), "--out-dir", &out_dir, "--input", "bogus=x.pgm"]);
    assert_eq!(code, 2, "{err}");
}

#[test]
fn cli_emit_code_and_stream() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_string_lossy().into_owned();
    let (code, out, err) = cli(&["emit-code", &path("harris"), "--out-dir", &out_dir]);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("0 host steps"), "{out}");
    for f in ["kernels.c", "driver.c", "manifest.json"] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert!(manifest.is_object());

    for v in ["1", "2", "4"] {
        let (code, out, err) = cli(&["--size", "64x64", "emit-stream", &path("edge_fig1"), "--v", v]);
        assert_eq!(code, 0, "{err}");
        let plan: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(plan["replication"].to_string(), v);
    }
    let (code, _, _) = cli(&["emit-stream", &path("edge_fig1"), "--v", "0"]);
    assert_eq!(code, 1);
}

#[test]
fn cli_stats_reports_equal_outputs() {
    let (code, out, err) = cli(&["--size", "64x64", "stats", &path("tomasi")]);
    assert_eq!(code, 0, "{err}");
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["outputs_bit_equal"], true);
    assert_eq!(v["naive"]["kernel_launches"], 15);
    assert_eq!(v["plan"]["kernel_launches"], 5);
}
