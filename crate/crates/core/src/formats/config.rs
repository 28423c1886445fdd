//! `key = value` run configuration with `#` comments.
//!
//! Unknown keys are rejected; missing keys keep their defaults.
//! [`Config::to_text`] writes every resolved key and reloads to the same
//! configuration.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use crate::assign::AssignParams;
use crate::error::{Error, Result};
use crate::extract::{ExtractParams, SampleMode};
use crate::synth::{Density, SceneParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderParams {
    pub stride: u32,
    /// Falloff exponent of the synthetic probability kernel.
    pub gamma: f64,
    pub noise_sigma: f64,
    pub blur_radius: usize,
}

impl Default for RenderParams {
    fn default() -> Self {
        Self {
            stride: 4,
            gamma: 1.0,
            noise_sigma: 0.0,
            blur_radius: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Paths {
    pub cpm_dir: Option<PathBuf>,
    pub points_dir: Option<PathBuf>,
    pub gt_dir: Option<PathBuf>,
    pub pseudo_dir: Option<PathBuf>,
    pub class_table: Option<PathBuf>,
}

/// Label-assignment rule sets compared by the ablation grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AssignVariant {
    Full,
    NoPositive,
    NoNegative,
    NoMiddleNegative,
}

impl AssignVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            AssignVariant::Full => "full",
            AssignVariant::NoPositive => "no_pos",
            AssignVariant::NoNegative => "no_neg",
            AssignVariant::NoMiddleNegative => "no_neg_m",
        }
    }

    pub fn apply(self, base: &AssignParams) -> AssignParams {
        let mut p = *base;
        match self {
            AssignVariant::Full => {}
            AssignVariant::NoPositive => p.positive_enabled = false,
            AssignVariant::NoNegative => p.negative_enabled = false,
            AssignVariant::NoMiddleNegative => p.middle_negative_enabled = false,
        }
        p
    }
}

impl FromStr for AssignVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(AssignVariant::Full),
            "no_pos" => Ok(AssignVariant::NoPositive),
            "no_neg" => Ok(AssignVariant::NoNegative),
            "no_neg_m" => Ok(AssignVariant::NoMiddleNegative),
            other => Err(Error::InvalidArgument(format!("unknown assign variant `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblateGrid {
    pub assign: Vec<AssignVariant>,
    pub sample_modes: Vec<SampleMode>,
    pub grid_sizes: Vec<usize>,
    pub constraint: Vec<bool>,
}

impl Default for AblateGrid {
    fn default() -> Self {
        Self {
            assign: vec![AssignVariant::Full],
            sample_modes: vec![SampleMode::Weighted, SampleMode::Probabilistic],
            grid_sizes: vec![5, 7, 9, 11],
            constraint: vec![true, false],
        }
    }
}

/// Fully resolved parameter set for every command.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub assign: AssignParams,
    pub extract: ExtractParams,
    /// Scene template; each generated scene gets its own derived seed.
    pub scene: SceneParams,
    pub render: RenderParams,
    pub n_scenes: usize,
    /// Run seed from which every other seed is derived.
    pub seed: u64,
    /// `None` uses every available core.
    pub workers: Option<usize>,
    /// Annotation shift applied by `synth`, relative to `sqrt(w h)`.
    pub perturb_sigma: f64,
    pub bench_images: usize,
    pub bench_instances: usize,
    pub paths: Paths,
    pub ablate: AblateGrid,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            assign: AssignParams::default(),
            extract: ExtractParams::default(),
            scene: SceneParams::default(),
            render: RenderParams::default(),
            n_scenes: 20,
            seed: 0,
            workers: None,
            perturb_sigma: 0.0,
            bench_images: 4,
            bench_instances: 100,
            paths: Paths::default(),
            ablate: AblateGrid::default(),
        }
    }
}

const DEFAULT_ROWS: (usize, usize, f64) = (2, 5, 16.0);

fn err(key: &str, reason: impl Into<String>) -> Error {
    Error::Config {
        key: key.to_string(),
        reason: reason.into(),
    }
}

fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| err(key, format!("cannot parse `{value}`")))
}

fn float(key: &str, value: &str) -> Result<f64> {
    let v: f64 = num(key, value)?;
    if !v.is_finite() {
        return Err(err(key, "value must be finite"));
    }
    Ok(v)
}

fn flag(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "on" | "yes" | "1" => Ok(true),
        "false" | "off" | "no" | "0" => Ok(false),
        _ => Err(err(key, format!("expected a boolean, found `{value}`"))),
    }
}

fn list<T>(key: &str, value: &str, item: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    let items: Vec<T> = value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(&item)
        .collect::<Result<_>>()?;
    if items.is_empty() {
        return Err(err(key, "list must not be empty"));
    }
    Ok(items)
}

fn on_off(b: bool) -> &'static str {
    if b {
        "on"
    } else {
        "off"
    }
}

impl Config {
    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let path = || Some(PathBuf::from(value));
        match key {
            "b1" => self.assign.b1 = float(key, value)?,
            "neg_radius_scale" => self.assign.neg_radius_scale = float(key, value)?,
            "b2" => self.assign.b2 = float(key, value)?,
            "fallback_radius" => self.assign.fallback_radius = float(key, value)?,
            "assign_positive" => self.assign.positive_enabled = flag(key, value)?,
            "assign_negative" => self.assign.negative_enabled = flag(key, value)?,
            "assign_middle_negative" => self.assign.middle_negative_enabled = flag(key, value)?,

            "grid_size" => self.extract.grid_size = num(key, value)?,
            "sample_mode" => {
                self.extract.sample_mode = value.parse().map_err(|e: Error| err(key, e.to_string()))?
            }
            "boundary_kappa" => self.extract.boundary_kappa = float(key, value)?,
            "boundary_floor" => self.extract.boundary_floor = float(key, value)?,
            "step" => self.extract.step = float(key, value)?,
            "max_extent" => self.extract.max_extent = float(key, value)?,
            "angle_threshold" => self.extract.angle_threshold = float(key, value)?,
            "constraint_enabled" => self.extract.constraint_enabled = flag(key, value)?,
            "degenerate_eps" => self.extract.degenerate_eps = float(key, value)?,
            "fallback_box" => self.extract.fallback_box = float(key, value)?,

            "image_width" => self.scene.width = num(key, value)?,
            "image_height" => self.scene.height = num(key, value)?,
            "n_instances_min" => self.scene.n_instances.0 = num(key, value)?,
            "n_instances_max" => self.scene.n_instances.1 = num(key, value)?,
            "aspect_min" => self.scene.aspect.0 = float(key, value)?,
            "aspect_max" => self.scene.aspect.1 = float(key, value)?,
            "size_min" => self.scene.size.0 = float(key, value)?,
            "size_max" => self.scene.size.1 = float(key, value)?,
            "n_class" => self.scene.n_class = num(key, value)?,
            "stride" => self.render.stride = num(key, value)?,
            "gamma" => self.render.gamma = float(key, value)?,
            "noise_sigma" => self.render.noise_sigma = float(key, value)?,
            "blur_radius" => self.render.blur_radius = num(key, value)?,

            "n_scenes" => self.n_scenes = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "workers" => {
                self.workers = match value {
                    "auto" => None,
                    v => Some(num(key, v)?),
                }
            }
            "perturb_sigma" => self.perturb_sigma = float(key, value)?,
            "bench_images" => self.bench_images = num(key, value)?,
            "bench_instances" => self.bench_instances = num(key, value)?,

            "cpm_dir" => self.paths.cpm_dir = path(),
            "points_dir" => self.paths.points_dir = path(),
            "gt_dir" => self.paths.gt_dir = path(),
            "pseudo_dir" => self.paths.pseudo_dir = path(),
            "class_table" => self.paths.class_table = path(),

            "ablate_assign" => {
                self.ablate.assign =
                    list(key, value, |s| s.parse().map_err(|e: Error| err(key, e.to_string())))?
            }
            "ablate_sample_modes" => {
                self.ablate.sample_modes =
                    list(key, value, |s| s.parse().map_err(|e: Error| err(key, e.to_string())))?
            }
            "ablate_grid_sizes" => self.ablate.grid_sizes = list(key, value, |s| num(key, s))?,
            "ablate_constraint" => self.ablate.constraint = list(key, value, |s| flag(key, s))?,
            _ => return Err(err(key, "unknown key")),
        }
        Ok(())
    }

    fn rows_layout(&self) -> (usize, usize, f64) {
        match self.scene.density {
            Density::ParallelRows { rows, cols, gap } => (rows, cols, gap),
            Density::Scattered => DEFAULT_ROWS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.assign.validate().map_err(|e| err("assign", e.to_string()))?;
        self.extract.validate().map_err(|e| err("extract", e.to_string()))?;
        self.scene.validate().map_err(|e| err("scene", e.to_string()))?;
        if self.render.stride == 0 {
            return Err(err("stride", "must be at least 1"));
        }
        if !(self.render.gamma > 0.0) {
            return Err(err("gamma", "must be positive"));
        }
        if !(self.render.noise_sigma >= 0.0) {
            return Err(err("noise_sigma", "must be non-negative"));
        }
        if !(self.perturb_sigma >= 0.0) {
            return Err(err("perturb_sigma", "must be non-negative"));
        }
        if self.n_scenes == 0 {
            return Err(err("n_scenes", "must be positive"));
        }
        if self.workers == Some(0) {
            return Err(err("workers", "must be positive"));
        }
        if self.bench_images == 0 || self.bench_instances == 0 {
            return Err(err("bench_images", "bench workload must be non-empty"));
        }
        Ok(())
    }

    /// Every resolved key, one per line, in a fixed order.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        let a = &self.assign;
        kv("b1", a.b1.to_string());
        kv("neg_radius_scale", a.neg_radius_scale.to_string());
        kv("b2", a.b2.to_string());
        kv("fallback_radius", a.fallback_radius.to_string());
        kv("assign_positive", on_off(a.positive_enabled).into());
        kv("assign_negative", on_off(a.negative_enabled).into());
        kv("assign_middle_negative", on_off(a.middle_negative_enabled).into());
        let e = &self.extract;
        kv("grid_size", e.grid_size.to_string());
        kv("sample_mode", e.sample_mode.as_str().into());
        kv("boundary_kappa", e.boundary_kappa.to_string());
        kv("boundary_floor", e.boundary_floor.to_string());
        kv("step", e.step.to_string());
        kv("max_extent", e.max_extent.to_string());
        kv("angle_threshold", e.angle_threshold.to_string());
        kv("constraint_enabled", on_off(e.constraint_enabled).into());
        kv("degenerate_eps", e.degenerate_eps.to_string());
        kv("fallback_box", e.fallback_box.to_string());
        let sc = &self.scene;
        kv("image_width", sc.width.to_string());
        kv("image_height", sc.height.to_string());
        kv("n_instances_min", sc.n_instances.0.to_string());
        kv("n_instances_max", sc.n_instances.1.to_string());
        kv("aspect_min", sc.aspect.0.to_string());
        kv("aspect_max", sc.aspect.1.to_string());
        kv("size_min", sc.size.0.to_string());
        kv("size_max", sc.size.1.to_string());
        kv("n_class", sc.n_class.to_string());
        let (rows, cols, gap) = self.rows_layout();
        kv("rows", rows.to_string());
        kv("cols", cols.to_string());
        kv("row_gap", gap.to_string());
        kv(
            "density",
            match sc.density {
                Density::Scattered => "scattered",
                Density::ParallelRows { .. } => "parallel_rows",
            }
            .into(),
        );
        let r = &self.render;
        kv("stride", r.stride.to_string());
        kv("gamma", r.gamma.to_string());
        kv("noise_sigma", r.noise_sigma.to_string());
        kv("blur_radius", r.blur_radius.to_string());
        kv("n_scenes", self.n_scenes.to_string());
        kv("seed", self.seed.to_string());
        kv(
            "workers",
            self.workers.map_or_else(|| "auto".to_string(), |w| w.to_string()),
        );
        kv("perturb_sigma", self.perturb_sigma.to_string());
        kv("bench_images", self.bench_images.to_string());
        kv("bench_instances", self.bench_instances.to_string());
        let p = &self.paths;
        for (k, v) in [
            ("cpm_dir", &p.cpm_dir),
            ("points_dir", &p.points_dir),
            ("gt_dir", &p.gt_dir),
            ("pseudo_dir", &p.pseudo_dir),
            ("class_table", &p.class_table),
        ] {
            if let Some(v) = v {
                kv(k, v.display().to_string());
            }
        }
        let ab = &self.ablate;
        let join = |it: Vec<String>| it.join(",");
        kv("ablate_assign", join(ab.assign.iter().map(|v| v.as_str().to_string()).collect()));
        kv(
            "ablate_sample_modes",
            join(ab.sample_modes.iter().map(|m| m.as_str().to_string()).collect()),
        );
        kv("ablate_grid_sizes", join(ab.grid_sizes.iter().map(|g| g.to_string()).collect()));
        kv(
            "ablate_constraint",
            join(ab.constraint.iter().map(|&c| on_off(c).to_string()).collect()),
        );
        s
    }
}

/// Parses configuration text on top of the defaults and validates the result.
pub fn load_config(text: &str) -> Result<Config> {
    let mut cfg = Config::default();
    let mut seen = HashSet::new();
    // The row layout only matters for parallel rows, so it is applied last.
    let (mut rows, mut cols, mut gap) = DEFAULT_ROWS;
    let mut parallel = false;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: i + 1,
            reason: format!("expected `key = value`, found `{line}`"),
        })?;
        let (key, value) = (key.trim(), value.trim());
        if !seen.insert(key.to_string()) {
            return Err(err(key, format!("duplicate key on line {}", i + 1)));
        }
        match key {
            "rows" => rows = num(key, value)?,
            "cols" => cols = num(key, value)?,
            "row_gap" => gap = float(key, value)?,
            "density" => {
                parallel = match value {
                    "scattered" => false,
                    "parallel_rows" => true,
                    _ => return Err(err(key, format!("unknown density `{value}`"))),
                }
            }
            _ => cfg.set(key, value)?,
        }
    }
    if parallel {
        cfg.scene.density = Density::ParallelRows { rows, cols, gap };
    }
    cfg.validate()?;
    Ok(cfg)
}
