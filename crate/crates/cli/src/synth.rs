use std::path::Path;

use pseudobox_core::formats::{write_cpm, write_dota, write_points, ClassTable, Config, DotaInstance};
use pseudobox_core::metrics::perturb_points;
use pseudobox_core::synth::{class_names, corrupt_cpm, generate_scene, render_cpm, Scene, SceneParams};
use pseudobox_core::{instance_seed, ClassProbabilityMap};
use rayon::prelude::*;

use crate::io::{create_dir, write_file};
use crate::{CmdResult, Manifest};

pub const GT_DIR: &str = "gt";
pub const POINTS_DIR: &str = "points";
pub const CPM_DIR: &str = "cpm";
pub const CLASSES_FILE: &str = "classes.txt";

pub fn scene_stem(i: usize) -> String {
    format!("scene_{i:04}")
}

/// Scene `i` of the run, rendered and corrupted as configured.
pub(crate) fn build_scene(config: &Config, i: usize) -> pseudobox_core::Result<(Scene, ClassProbabilityMap)> {
    let params = SceneParams {
        seed: instance_seed(config.seed, "scene", i),
        ..config.scene.clone()
    };
    let scene = generate_scene(&params)?;
    let r = &config.render;
    let mut cpm = render_cpm(&scene, r.stride, r.gamma)?;
    if r.noise_sigma > 0.0 || r.blur_radius > 0 {
        cpm = corrupt_cpm(&cpm, r.noise_sigma, r.blur_radius, instance_seed(config.seed, "noise", i))?;
    }
    Ok((scene, cpm))
}

struct SceneFiles {
    gt: String,
    points: String,
    cpm: Vec<u8>,
    instances: usize,
}

pub fn cmd_synth(config: &Config, out: &Path, m: &mut Manifest) -> CmdResult<()> {
    config.validate()?;
    let table = ClassTable::new(class_names(config.scene.n_class))?;
    let files: Vec<SceneFiles> = m.time("generate", |_| {
        (0..config.n_scenes)
            .into_par_iter()
            .map(|i| -> pseudobox_core::Result<SceneFiles> {
                let (scene, cpm) = build_scene(config, i)?;
                let boxes: Vec<_> = scene.instances.iter().map(|inst| inst.bbox).collect();
                let points = perturb_points(
                    &scene.annotations(),
                    &boxes,
                    config.perturb_sigma,
                    instance_seed(config.seed, "perturb", i),
                    (f64::from(scene.width), f64::from(scene.height)),
                )?;
                let gt = scene
                    .instances
                    .iter()
                    .map(|inst| Ok(DotaInstance::from_box(&inst.bbox, table.name(inst.class_id)?)))
                    .collect::<pseudobox_core::Result<Vec<_>>>()?;
                Ok(SceneFiles {
                    gt: write_dota(&gt),
                    points: write_points(&points, &table)?,
                    cpm: write_cpm(&cpm),
                    instances: scene.instances.len(),
                })
            })
            .collect::<pseudobox_core::Result<Vec<_>>>()
    })?;

    m.time("write", |_| -> CmdResult<()> {
        for dir in [GT_DIR, POINTS_DIR, CPM_DIR] {
            create_dir(&out.join(dir))?;
        }
        write_file(&out.join(CLASSES_FILE), table.to_text().as_bytes())?;
        for (i, f) in files.iter().enumerate() {
            let stem = scene_stem(i);
            write_file(&out.join(GT_DIR).join(format!("{stem}.txt")), f.gt.as_bytes())?;
            write_file(&out.join(POINTS_DIR).join(format!("{stem}.txt")), f.points.as_bytes())?;
            write_file(&out.join(CPM_DIR).join(format!("{stem}.cpm")), &f.cpm)?;
        }
        Ok(())
    })?;
    m.set("counts.scenes", files.len());
    m.set("counts.instances", files.iter().map(|f| f.instances).sum::<usize>());
    Ok(())
}
