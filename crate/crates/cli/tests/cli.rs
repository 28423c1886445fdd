use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::Command as Process;

use pseudobox_cli::{run, Command, Failure, MANIFEST_FILE};
use pseudobox_core::formats::{load_config, Config};
use pseudobox_core::SampleMode;

fn small_config(extra: &str) -> Config {
    load_config(&format!("n_scenes = 4\nimage_width = 256\nimage_height = 256\nseed = 11\n{extra}")).unwrap()
}

/// Every file under `dir` except the manifest, keyed by relative path.
fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().unwrap() != MANIFEST_FILE {
                out.insert(p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn extract_cmd(data: &Path, sample_mode: Option<SampleMode>) -> Command {
    Command::Extract {
        cpm: Some(data.join("cpm")),
        points: Some(data.join("points")),
        classes: Some(data.join("classes.txt")),
        sample_mode,
    }
}

fn manifest(dir: &Path) -> BTreeMap<String, String> {
    fs::read_to_string(dir.join(MANIFEST_FILE))
        .unwrap()
        .lines()
        .filter_map(|l| l.split_once(" = "))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

#[test]
fn every_command_reruns_byte_identically() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config("bench_images = 1\nbench_instances = 10\n");
    let data = tmp.path().join("data");
    run(&Command::Synth, &cfg, &data).unwrap();
    let commands = [
        Command::Synth,
        Command::Assign {
            points: Some(data.join("points")),
            classes: Some(data.join("classes.txt")),
        },
        extract_cmd(&data, None),
        extract_cmd(&data, Some(SampleMode::Probabilistic)),
        Command::Eval {
            pseudo: Some(data.join("gt")),
            gt: Some(data.join("gt")),
            classes: Some(data.join("classes.txt")),
        },
        Command::Ablate,
    ];
    for (i, c) in commands.iter().enumerate() {
        let a = tmp.path().join(format!("a{i}"));
        let b = tmp.path().join(format!("b{i}"));
        run(c, &cfg, &a).unwrap();
        run(c, &cfg, &b).unwrap();
        let (sa, sb) = (snapshot(&a), snapshot(&b));
        assert!(!sa.is_empty(), "{} wrote nothing", c.name());
        assert_eq!(sa, sb, "{} differs between runs", c.name());
    }
}

#[test]
fn worker_count_does_not_change_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    run(&Command::Synth, &small_config(""), &data).unwrap();
    for mode in [SampleMode::Weighted, SampleMode::Probabilistic] {
        let mut outs = Vec::new();
        for workers in [1, 4] {
            let cfg = small_config(&format!("workers = {workers}\n"));
            let out = tmp.path().join(format!("{}-{workers}", mode.as_str()));
            run(&extract_cmd(&data, Some(mode)), &cfg, &out).unwrap();
            outs.push(snapshot(&out));
        }
        assert_eq!(outs[0], outs[1]);
    }
}

#[test]
fn manifest_counts_match_emitted_boxes() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let cfg = small_config("");
    run(&Command::Synth, &cfg, &data).unwrap();
    let out = tmp.path().join("x");
    run(&extract_cmd(&data, None), &cfg, &out).unwrap();
    let lines: usize = snapshot(&out.join("pseudo")).values().map(|b| b.iter().filter(|&&c| c == b'\n').count()).sum();
    let m = manifest(&out);
    assert_eq!(m["counts.instances"].parse::<usize>().unwrap(), lines);
    assert_eq!(m["status"], "ok");
    assert!(m["timing.extract_s"].parse::<f64>().unwrap() >= 0.0);
    assert!(m.contains_key("warnings.fallback_boxes") && m.contains_key("warnings.degenerate_axes"));
    assert_eq!(m["config.n_scenes"], "4");
}

#[test]
fn eval_of_ground_truth_is_perfect() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    run(&Command::Synth, &small_config(""), &data).unwrap();
    let out = tmp.path().join("e");
    let cmd = Command::Eval {
        pseudo: Some(data.join("gt")),
        gt: Some(data.join("gt")),
        classes: Some(data.join("classes.txt")),
    };
    run(&cmd, &small_config(""), &out).unwrap();
    let tsv = fs::read_to_string(out.join("eval.tsv")).unwrap();
    for line in tsv.lines() {
        // Six-digit corners reparse to boxes within float noise of the truth.
        let v: f64 = line.split('\t').nth(1).unwrap().parse().unwrap();
        assert!(v > 0.9999, "{line}");
    }
    assert!(tsv.lines().last().unwrap().starts_with("mean\t"));
}

#[test]
fn partial_failures_name_the_stem_and_keep_the_rest() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let cfg = small_config("");
    run(&Command::Synth, &cfg, &data).unwrap();
    fs::remove_file(data.join("cpm/scene_0002.cpm")).unwrap();
    let out = tmp.path().join("x");
    let err = run(&extract_cmd(&data, None), &cfg, &out).unwrap_err();
    assert!(matches!(err, Failure::Input(_)));
    assert!(err.to_string().contains("scene_0002"), "{err}");
    assert!(out.join("pseudo/scene_0001.txt").exists());
    assert!(!out.join("pseudo/scene_0002.txt").exists());
    let m = manifest(&out);
    assert_eq!(m["status"], "failed");
    assert_eq!(m["counts.failed_stems"], "1");
}

#[test]
fn assign_edge_cases() {
    let tmp = tempfile::tempdir().unwrap();
    let pts = tmp.path().join("points");
    fs::create_dir(&pts).unwrap();
    fs::write(tmp.path().join("classes.txt"), "plane\nship\n").unwrap();
    fs::write(pts.join("one.txt"), "40 40 plane\n").unwrap();
    let cmd = Command::Assign {
        points: Some(pts.clone()),
        classes: Some(tmp.path().join("classes.txt")),
    };
    let cfg = small_config("");
    let out = tmp.path().join("a");
    run(&cmd, &cfg, &out).unwrap();
    assert_eq!(manifest(&out)["warnings.single_annotation_images"], "1");
    let bytes = fs::read(out.join("targets/one.tgt")).unwrap();
    assert_eq!(bytes.len(), 20 + 64 * 64);
    // Cell (10, 10) holds the point: positive for class 0.
    assert_eq!(bytes[20 + 10 * 64 + 10], 1);

    fs::write(pts.join("empty.txt"), "").unwrap();
    let err = run(&cmd, &cfg, &tmp.path().join("b")).unwrap_err();
    assert!(err.to_string().contains("empty"), "{err}");
}

#[test]
fn zero_instances_is_a_config_error() {
    assert!(load_config("n_instances_min = 0\n").is_err());
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_pseudobox");
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.cfg");
    fs::write(&cfg, "n_scenes = 2\nimage_width = 128\nimage_height = 128\n").unwrap();
    let out = tmp.path().join("d");
    let ok = Process::new(bin)
        .args(["synth", "--config"])
        .arg(&cfg)
        .args(["--seed", "5", "--workers", "2", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(ok.code(), Some(0));
    assert_eq!(manifest(&out)["seed"], "5");
    assert_eq!(manifest(&out)["workers"], "2");

    let bad_out = tmp.path().join("bad");
    let missing = Process::new(bin)
        .args(["extract", "--cpm", "/nonexistent", "--points"])
        .arg(out.join("points"))
        .arg("--classes")
        .arg(out.join("classes.txt"))
        .arg("--out")
        .arg(&bad_out)
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(1));
    assert_eq!(manifest(&bad_out)["status"], "failed");

    fs::write(&cfg, "grid_sz = 9\n").unwrap();
    let typo = Process::new(bin).args(["synth", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(typo.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&typo.stderr).contains("grid_sz"));

    let usage = Process::new(bin).arg("frobnicate").output().unwrap();
    assert_eq!(usage.status.code(), Some(1));
}
