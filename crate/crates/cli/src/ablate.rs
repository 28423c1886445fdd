use std::fmt::Write as _;
use std::path::Path;

use pseudobox_core::assign::{assign_labels, LabelCounts};
use pseudobox_core::formats::{AssignVariant, Config};
use pseudobox_core::geometry::OrientedBox;
use pseudobox_core::metrics::perturb_points;
use pseudobox_core::{instance_seed, ClassProbabilityMap, ExtractParams, PointAnnotation, SampleMode};
use rayon::prelude::*;

use crate::io::write_file;
use crate::pipeline::{extract_image, summarize};
use crate::synth::{build_scene, scene_stem};
use crate::{CmdResult, Manifest};

pub const ABLATE_FILE: &str = "ablate.tsv";

/// One cell of the ablation grid.
#[derive(Debug, Clone, PartialEq)]
pub struct AblateRow {
    pub assign: AssignVariant,
    pub sample_mode: SampleMode,
    pub grid_size: usize,
    pub constraint: bool,
    pub miou: f64,
    pub median_angle_error_deg: Option<f64>,
    /// Target-map label totals over the dataset for `assign`.
    pub labels: LabelCounts,
}

struct Image {
    stem: String,
    cpm: ClassProbabilityMap,
    points: Vec<PointAnnotation>,
    gt: Vec<(OrientedBox, usize)>,
}

fn dataset(config: &Config) -> pseudobox_core::Result<Vec<Image>> {
    (0..config.n_scenes)
        .into_par_iter()
        .map(|i| {
            let (scene, cpm) = build_scene(config, i)?;
            let boxes: Vec<_> = scene.instances.iter().map(|inst| inst.bbox).collect();
            let points = perturb_points(
                &scene.annotations(),
                &boxes,
                config.perturb_sigma,
                instance_seed(config.seed, "perturb", i),
                (f64::from(scene.width), f64::from(scene.height)),
            )?;
            Ok(Image {
                stem: scene_stem(i),
                cpm,
                points,
                gt: scene.instances.iter().map(|inst| (inst.bbox, inst.class_id)).collect(),
            })
        })
        .collect()
}

fn label_totals(config: &Config, data: &[Image], variant: AssignVariant) -> pseudobox_core::Result<LabelCounts> {
    let params = variant.apply(&config.assign);
    let stride = f64::from(config.render.stride);
    let mut total = LabelCounts::default();
    for img in data {
        let cells: Vec<_> = img.points.iter().map(|p| p.scaled(stride)).collect();
        let c = assign_labels(&cells, img.cpm.width(), img.cpm.height(), &params)?.counts();
        total.positive += c.positive;
        total.negative += c.negative;
        total.ignore += c.ignore;
    }
    Ok(total)
}

/// Runs the configured grid on one seeded synthetic dataset.
pub fn cmd_ablate(config: &Config, out: &Path, m: &mut Manifest) -> CmdResult<Vec<AblateRow>> {
    config.validate()?;
    let data = m.time("generate", |_| dataset(config))?;
    let grid = &config.ablate;

    let labels = grid
        .assign
        .iter()
        .map(|&v| label_totals(config, &data, v))
        .collect::<pseudobox_core::Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    m.time("extract", |_| -> CmdResult<()> {
        for &sample_mode in &grid.sample_modes {
            for &grid_size in &grid.grid_sizes {
                for &constraint in &grid.constraint {
                    let params = ExtractParams {
                        sample_mode,
                        grid_size,
                        constraint_enabled: constraint,
                        ..config.extract
                    };
                    let boxes = data
                        .par_iter()
                        .map(|img| extract_image(&img.cpm, &img.points, &params, config.seed, &img.stem))
                        .collect::<pseudobox_core::Result<Vec<_>>>()?;
                    let pseudo: Vec<_> = boxes
                        .iter()
                        .zip(&data)
                        .flat_map(|(b, img)| b.iter().zip(&img.gt).map(|(e, g)| (e.bbox, g.1)))
                        .collect();
                    let gt: Vec<_> = data.iter().flat_map(|img| img.gt.iter().copied()).collect();
                    let summary = summarize(&pseudo, &gt)?;
                    // Assignment does not feed extraction, so one run serves every variant.
                    for (&assign, &counts) in grid.assign.iter().zip(&labels) {
                        rows.push(AblateRow {
                            assign,
                            sample_mode,
                            grid_size,
                            constraint,
                            miou: summary.report.mean,
                            median_angle_error_deg: summary.median_angle_error_deg,
                            labels: counts,
                        });
                    }
                }
            }
        }
        Ok(())
    })?;

    let mut text = String::from(
        "assign\tsample_mode\tgrid_size\tconstraint\tmiou\tmedian_angle_deg\tpositive\tnegative\tignore\n",
    );
    for r in &rows {
        let angle = r
            .median_angle_error_deg
            .map_or_else(|| "n/a".to_string(), |a| format!("{a:.4}"));
        let _ = writeln!(
            text,
            "{}\t{}\t{}\t{}\t{:.6}\t{}\t{}\t{}\t{}",
            r.assign.as_str(),
            r.sample_mode.as_str(),
            r.grid_size,
            if r.constraint { "on" } else { "off" },
            r.miou,
            angle,
            r.labels.positive,
            r.labels.negative,
            r.labels.ignore
        );
    }
    write_file(&out.join(ABLATE_FILE), text.as_bytes())?;
    m.set("counts.scenes", data.len());
    m.set("counts.instances", data.iter().map(|d| d.gt.len()).sum::<usize>());
    m.set("counts.rows", rows.len());
    Ok(rows)
}
