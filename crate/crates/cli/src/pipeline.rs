use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use pseudobox_core::assign::{assign_labels, LabelCounts};
use pseudobox_core::extract::{extract_obb, image_neighbors, Extraction};
use pseudobox_core::formats::{
    instances_to_boxes, parse_dota, parse_points, read_cpm, write_dota, write_target_map, ClassTable, Config,
    DotaInstance,
};
use pseudobox_core::geometry::{orientation_error, OrientedBox};
use pseudobox_core::metrics::{miou, IoUReport};
use pseudobox_core::{instance_seed, ClassProbabilityMap, ExtractParams, PointAnnotation};
use rayon::prelude::*;

use crate::io::{check_failures, create_dir, list_stems, read_bytes, read_text, write_file};
use crate::{CmdResult, Failure, Manifest};

pub const TARGETS_DIR: &str = "targets";
pub const PSEUDO_DIR: &str = "pseudo";
pub const EVAL_TEXT: &str = "eval.txt";
pub const EVAL_TSV: &str = "eval.tsv";

/// Aspect ratio from which orientation error is reported.
const ELONGATED: f64 = 2.0;

fn load_table(path: &Path) -> CmdResult<ClassTable> {
    Ok(ClassTable::parse(&read_text(path)?)?)
}

type PerStem<T> = Vec<(String, T)>;

/// Splits per-stem results into successes and `(stem, message)` failures.
fn partition<T>(results: PerStem<CmdResult<T>>) -> (PerStem<T>, PerStem<String>) {
    let mut ok = Vec::new();
    let mut failed = Vec::new();
    for (stem, r) in results {
        match r {
            Ok(v) => ok.push((stem, v)),
            Err(e) => failed.push((stem, e.to_string())),
        }
    }
    (ok, failed)
}

/// Extracts every annotation of one image in parallel, in input order.
pub(crate) fn extract_image(
    cpm: &ClassProbabilityMap,
    points: &[PointAnnotation],
    params: &ExtractParams,
    run_seed: u64,
    stem: &str,
) -> pseudobox_core::Result<Vec<Extraction>> {
    params.validate()?;
    let neighbors = image_neighbors(points, cpm.stride());
    points
        .par_iter()
        .zip(&neighbors)
        .enumerate()
        .map(|(i, (p, n))| extract_obb(cpm, p, n.as_ref(), params, instance_seed(run_seed, stem, i)))
        .collect()
}

pub fn cmd_assign(
    config: &Config,
    points_dir: &Path,
    class_table: &Path,
    out: &Path,
    m: &mut Manifest,
) -> CmdResult<()> {
    config.validate()?;
    let table = load_table(class_table)?;
    let stems = list_stems(points_dir, "txt")?;
    let stride = config.render.stride;
    let width = config.scene.width.div_ceil(stride) as usize;
    let height = config.scene.height.div_ceil(stride) as usize;

    let results: PerStem<CmdResult<(Vec<u8>, usize, LabelCounts)>> = m.time("assign", |_| {
        stems
            .par_iter()
            .map(|stem| {
                let r = (|| {
                    let text = read_text(&points_dir.join(format!("{stem}.txt")))?;
                    let points = parse_points(&text, &table)?;
                    if points.is_empty() {
                        return Err(Failure::input(anyhow::anyhow!("points file is empty")));
                    }
                    let cells: Vec<_> = points.iter().map(|p| p.scaled(f64::from(stride))).collect();
                    let map = assign_labels(&cells, width, height, &config.assign)?;
                    let counts = map.counts();
                    Ok((write_target_map(&map, table.len() as u32, stride), points.len(), counts))
                })();
                (stem.clone(), r)
            })
            .collect()
    });
    let (done, failed) = partition(results);

    create_dir(&out.join(TARGETS_DIR))?;
    for (stem, (bytes, n, counts)) in &done {
        write_file(&out.join(TARGETS_DIR).join(format!("{stem}.tgt")), bytes)?;
        m.bump("counts.images", 1);
        m.bump("counts.annotations", *n);
        m.bump("counts.cells_positive", counts.positive);
        m.bump("counts.cells_negative", counts.negative);
        m.bump("counts.cells_ignore", counts.ignore);
        if *n == 1 {
            m.bump("warnings.single_annotation_images", 1);
        }
    }
    m.bump("warnings.single_annotation_images", 0);
    m.set("counts.failed_stems", failed.len());
    check_failures(failed)
}

pub fn cmd_extract(
    config: &Config,
    cpm_dir: &Path,
    points_dir: &Path,
    class_table: &Path,
    out: &Path,
    m: &mut Manifest,
) -> CmdResult<()> {
    config.validate()?;
    let table = load_table(class_table)?;
    let point_stems = list_stems(points_dir, "txt")?;
    let cpm_stems = list_stems(cpm_dir, "cpm")?;
    let all: BTreeSet<&String> = point_stems.iter().chain(&cpm_stems).collect();

    let results: PerStem<CmdResult<(Vec<PointAnnotation>, Vec<Extraction>)>> = m.time("extract", |_| {
        all.into_par_iter()
            .map(|stem| {
                let r = (|| {
                    if !point_stems.contains(stem) {
                        return Err(Failure::input(anyhow::anyhow!("no points file for this CPM")));
                    }
                    if !cpm_stems.contains(stem) {
                        return Err(Failure::input(anyhow::anyhow!("no CPM for this points file")));
                    }
                    let cpm = read_cpm(&read_bytes(&cpm_dir.join(format!("{stem}.cpm")))?)?;
                    let points = parse_points(&read_text(&points_dir.join(format!("{stem}.txt")))?, &table)?;
                    let boxes = extract_image(&cpm, &points, &config.extract, config.seed, stem)?;
                    Ok((points, boxes))
                })();
                (stem.clone(), r)
            })
            .collect()
    });
    let (done, failed) = partition(results);

    m.time("write", |m| -> CmdResult<()> {
        create_dir(&out.join(PSEUDO_DIR))?;
        for (stem, (points, boxes)) in &done {
            let records = boxes
                .iter()
                .zip(points)
                .map(|(e, p)| Ok(DotaInstance::from_box(&e.bbox, table.name(p.class_id)?)))
                .collect::<pseudobox_core::Result<Vec<_>>>()?;
            let text = write_dota(&records);
            write_file(&out.join(PSEUDO_DIR).join(format!("{stem}.txt")), text.as_bytes())?;
            m.bump("counts.images", 1);
            m.bump("counts.instances", boxes.len());
            m.bump("warnings.fallback_boxes", boxes.iter().filter(|e| e.fallback).count());
            m.bump("warnings.degenerate_axes", boxes.iter().filter(|e| e.degenerate).count());
        }
        Ok(())
    })?;
    for key in ["counts.images", "counts.instances", "warnings.fallback_boxes", "warnings.degenerate_axes"] {
        m.bump(key, 0);
    }
    m.set("counts.failed_stems", failed.len());
    check_failures(failed)
}

/// Pooled scores of one evaluation run.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalSummary {
    pub report: IoUReport,
    /// Median orientation error in degrees over ground-truth boxes with
    /// aspect ratio of at least 2.
    pub median_angle_error_deg: Option<f64>,
    pub instances: usize,
}

pub(crate) fn summarize(
    pseudo: &[(OrientedBox, usize)],
    gt: &[(OrientedBox, usize)],
) -> pseudobox_core::Result<EvalSummary> {
    let report = miou(pseudo, gt)?;
    let mut angles: Vec<f64> = pseudo
        .iter()
        .zip(gt)
        .filter(|(_, (g, _))| g.w.max(g.h) >= ELONGATED * g.w.min(g.h))
        .map(|((p, _), (g, _))| orientation_error(p, g).to_degrees())
        .collect();
    angles.sort_by(f64::total_cmp);
    let median = match angles.len() {
        0 => None,
        n if n % 2 == 1 => Some(angles[n / 2]),
        n => Some(0.5 * (angles[n / 2 - 1] + angles[n / 2])),
    };
    Ok(EvalSummary {
        report,
        median_angle_error_deg: median,
        instances: gt.len(),
    })
}

pub fn cmd_eval(
    pseudo_dir: &Path,
    gt_dir: &Path,
    class_table: &Path,
    out: &Path,
    m: &mut Manifest,
) -> CmdResult<EvalSummary> {
    let table = load_table(class_table)?;
    let gt_stems = list_stems(gt_dir, "txt")?;
    let pseudo_stems = list_stems(pseudo_dir, "txt")?;
    let all: BTreeSet<&String> = gt_stems.iter().chain(&pseudo_stems).collect();

    let load = |dir: &Path, stem: &str| -> CmdResult<Vec<(OrientedBox, usize)>> {
        let records = parse_dota(&read_text(&dir.join(format!("{stem}.txt")))?)?;
        Ok(instances_to_boxes(&records, &table)?)
    };
    let results: Vec<(String, CmdResult<_>)> = m.time("load", |_| {
        all.into_iter()
            .map(|stem| {
                let r = (|| {
                    if !gt_stems.contains(stem) {
                        return Err(Failure::input(anyhow::anyhow!("no ground truth for these pseudo-labels")));
                    }
                    if !pseudo_stems.contains(stem) {
                        return Err(Failure::input(anyhow::anyhow!("no pseudo-labels for this ground truth")));
                    }
                    let (p, g) = (load(pseudo_dir, stem)?, load(gt_dir, stem)?);
                    if p.len() != g.len() {
                        return Err(Failure::input(anyhow::anyhow!(
                            "{} pseudo-labels for {} ground-truth boxes",
                            p.len(),
                            g.len()
                        )));
                    }
                    Ok((p, g))
                })();
                (stem.clone(), r)
            })
            .collect()
    });
    let (done, failed) = partition(results);
    check_failures(failed)?;

    let (mut pseudo, mut gt) = (Vec::new(), Vec::new());
    for (_, (p, g)) in done {
        pseudo.extend(p);
        gt.extend(g);
    }
    let summary = summarize(&pseudo, &gt)?;

    let mut text = summary.report.to_text(Some(table.names()));
    let median = summary
        .median_angle_error_deg
        .map_or_else(|| "n/a".to_string(), |a| format!("{a:.4}"));
    let _ = writeln!(text, "median angle error (aspect >= 2, degrees): {median}");
    write_file(&out.join(EVAL_TEXT), text.as_bytes())?;
    write_file(&out.join(EVAL_TSV), summary.report.to_tsv().as_bytes())?;
    m.set("counts.images", gt_stems.len());
    m.set("counts.instances", summary.instances);
    m.set("result.miou", format!("{:.6}", summary.report.mean));
    m.set("result.median_angle_error_deg", median);
    Ok(summary)
}
