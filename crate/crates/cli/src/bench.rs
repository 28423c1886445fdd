use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use pseudobox_core::formats::Config;
use pseudobox_core::synth::{generate_scene, render_cpm, SceneParams};
use pseudobox_core::{instance_seed, ClassProbabilityMap, PointAnnotation};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::io::write_file;
use crate::pipeline::extract_image;
use crate::synth::scene_stem;
use crate::{worker_count, CmdResult, Failure, Manifest};

pub const BENCH_FILE: &str = "bench.txt";

/// Side of the benchmark maps, in cells.
pub const BENCH_CELLS: u32 = 256;

/// Minimum wall time per measurement; the workload is repeated until reached.
const MIN_SECONDS: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub images: usize,
    pub instances: usize,
    pub workers: usize,
    pub single_per_sec: f64,
    pub multi_per_sec: f64,
    pub config_hash: String,
}

impl BenchReport {
    pub fn speedup(&self) -> f64 {
        self.multi_per_sec / self.single_per_sec
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "config_sha256 = {}", self.config_hash);
        let _ = writeln!(s, "map_cells = {BENCH_CELLS}x{BENCH_CELLS}");
        let _ = writeln!(s, "images = {}", self.images);
        let _ = writeln!(s, "instances = {}", self.instances);
        let _ = writeln!(s, "workers = {}", self.workers);
        let _ = writeln!(s, "instances_per_sec_single = {:.1}", self.single_per_sec);
        let _ = writeln!(s, "instances_per_sec_multi = {:.1}", self.multi_per_sec);
        let _ = writeln!(s, "speedup = {:.3}", self.speedup());
        s
    }
}

pub fn config_hash(config: &Config) -> String {
    Sha256::digest(config.to_text().as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

type Workload = Vec<(String, ClassProbabilityMap, Vec<PointAnnotation>)>;

fn workload(config: &Config) -> pseudobox_core::Result<Workload> {
    let stride = config.render.stride;
    (0..config.bench_images)
        .into_par_iter()
        .map(|i| {
            let params = SceneParams {
                width: BENCH_CELLS * stride,
                height: BENCH_CELLS * stride,
                n_instances: (config.bench_instances, config.bench_instances),
                seed: instance_seed(config.seed, "bench", i),
                ..config.scene.clone()
            };
            let scene = generate_scene(&params)?;
            let cpm = render_cpm(&scene, stride, config.render.gamma)?;
            Ok((scene_stem(i), cpm, scene.annotations()))
        })
        .collect()
}

/// Instances per second over repeated passes of the workload on `workers` threads.
fn throughput(config: &Config, work: &Workload, workers: usize) -> CmdResult<f64> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(Failure::internal)?;
    let per_pass: usize = work.iter().map(|(_, _, p)| p.len()).sum();
    let start = Instant::now();
    let mut passes = 0usize;
    while passes == 0 || start.elapsed().as_secs_f64() < MIN_SECONDS {
        pool.install(|| {
            work.par_iter()
                .map(|(stem, cpm, points)| extract_image(cpm, points, &config.extract, config.seed, stem).map(|_| ()))
                .collect::<pseudobox_core::Result<()>>()
        })?;
        passes += 1;
    }
    Ok((passes * per_pass) as f64 / start.elapsed().as_secs_f64())
}

pub fn cmd_bench(config: &Config, out: &Path, m: &mut Manifest) -> CmdResult<BenchReport> {
    config.validate()?;
    let work = m.time("generate", |_| workload(config))?;
    let workers = worker_count(config);
    let single = m.time("single", |_| throughput(config, &work, 1))?;
    let multi = m.time("multi", |_| throughput(config, &work, workers))?;
    let report = BenchReport {
        images: work.len(),
        instances: work.iter().map(|(_, _, p)| p.len()).sum(),
        workers,
        single_per_sec: single,
        multi_per_sec: multi,
        config_hash: config_hash(config),
    };
    write_file(&out.join(BENCH_FILE), report.to_text().as_bytes())?;
    m.set("counts.images", report.images);
    m.set("counts.instances", report.instances);
    m.set("result.instances_per_sec_single", format!("{single:.1}"));
    m.set("result.instances_per_sec_multi", format!("{multi:.1}"));
    m.set("result.config_sha256", &report.config_hash);
    Ok(report)
}
