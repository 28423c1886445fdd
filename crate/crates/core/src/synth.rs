//! Synthetic scenes and rendered probability maps.
//!
//! A rendered class plane is `(1 − max(|a|, |b|))^γ` inside each box, where
//! `(a, b)` are box-frame coordinates normalized to ±1 at the edges, and 0
//! outside. Overlapping same-class instances combine by maximum.

use std::f64::consts::FRAC_PI_2;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::assign::PointAnnotation;
use crate::cpm::ClassProbabilityMap;
use crate::error::{invalid, Error, Result};
use crate::geometry::{rotated_iou, OrientedBox, Point};

const MAX_ATTEMPTS: usize = 1000;
const MAX_PLACEMENT_IOU: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Instance {
    pub bbox: OrientedBox,
    pub class_id: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub width: u32,
    pub height: u32,
    pub n_class: usize,
    pub instances: Vec<Instance>,
}

impl Scene {
    /// One annotation per instance, at the box center.
    pub fn annotations(&self) -> Vec<PointAnnotation> {
        self.instances
            .iter()
            .map(|i| PointAnnotation::new(i.bbox.cx, i.bbox.cy, i.class_id))
            .collect()
    }

    /// Width and height of the probability grid at `stride`.
    pub fn grid_shape(&self, stride: u32) -> (usize, usize) {
        (
            self.width.div_ceil(stride) as usize,
            self.height.div_ceil(stride) as usize,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Density {
    /// Independent placements, rejecting overlaps.
    Scattered,
    /// A `rows` x `cols` block of identical same-class boxes sharing one angle.
    /// Boxes in a row sit side by side along their `w` axis, `gap` pixels apart.
    ParallelRows { rows: usize, cols: usize, gap: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneParams {
    pub width: u32,
    pub height: u32,
    /// Inclusive instance-count range; ignored for parallel rows.
    pub n_instances: (usize, usize),
    /// Long-side over short-side ratio range.
    pub aspect: (f64, f64),
    /// Range of the scale `sqrt(w * h)`, pixels.
    pub size: (f64, f64),
    pub density: Density,
    pub n_class: usize,
    pub seed: u64,
}

impl Default for SceneParams {
    fn default() -> Self {
        Self {
            width: 512,
            height: 512,
            n_instances: (4, 12),
            aspect: (1.5, 6.0),
            size: (16.0, 40.0),
            density: Density::Scattered,
            n_class: 3,
            seed: 0,
        }
    }
}

impl SceneParams {
    pub fn validate(&self) -> Result<()> {
        let range_ok = |(lo, hi): (f64, f64)| lo.is_finite() && hi.is_finite() && lo > 0.0 && lo <= hi;
        if self.width == 0 || self.height == 0 {
            return Err(invalid("image dimensions must be positive"));
        }
        if self.n_instances.0 == 0 || self.n_instances.0 > self.n_instances.1 {
            return Err(invalid("instance count range must be non-empty and positive"));
        }
        if !range_ok(self.aspect) || self.aspect.0 < 1.0 {
            return Err(invalid("aspect range must be non-empty and at least 1"));
        }
        if !range_ok(self.size) {
            return Err(invalid("size range must be non-empty and positive"));
        }
        if self.n_class == 0 {
            return Err(invalid("class count must be positive"));
        }
        if let Density::ParallelRows { rows, cols, gap } = self.density {
            if rows == 0 || cols == 0 || !(gap >= 0.0 && gap.is_finite()) {
                return Err(invalid("parallel rows need positive rows/cols and a non-negative gap"));
            }
        }
        Ok(())
    }
}

fn uniform<R: Rng>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..hi)
    }
}

fn fits(b: &OrientedBox, width: u32, height: u32) -> bool {
    let (lo, hi) = b.bounds();
    lo.x >= 0.0 && lo.y >= 0.0 && hi.x <= f64::from(width) && hi.y <= f64::from(height)
}

pub fn generate_scene(params: &SceneParams) -> Result<Scene> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let instances = match params.density {
        Density::Scattered => scattered(params, &mut rng)?,
        Density::ParallelRows { rows, cols, gap } => parallel_rows(params, rows, cols, gap, &mut rng)?,
    };
    Ok(Scene {
        width: params.width,
        height: params.height,
        n_class: params.n_class,
        instances,
    })
}

fn scattered(params: &SceneParams, rng: &mut ChaCha8Rng) -> Result<Vec<Instance>> {
    let n = rng.random_range(params.n_instances.0..=params.n_instances.1);
    let (fw, fh) = (f64::from(params.width), f64::from(params.height));
    let mut out: Vec<Instance> = Vec::with_capacity(n);
    for instance in 0..n {
        let mut placed = false;
        for _ in 0..MAX_ATTEMPTS {
            let ar = uniform(rng, params.aspect);
            let s = uniform(rng, params.size);
            let angle = rng.random_range(-FRAC_PI_2..FRAC_PI_2);
            let class_id = rng.random_range(0..params.n_class);
            let (w, h) = (s * ar.sqrt(), s / ar.sqrt());
            let ex = 0.5 * (w * angle.cos().abs() + h * angle.sin().abs());
            let ey = 0.5 * (w * angle.sin().abs() + h * angle.cos().abs());
            if 2.0 * ex >= fw || 2.0 * ey >= fh {
                continue;
            }
            let cx = rng.random_range(ex..fw - ex);
            let cy = rng.random_range(ey..fh - ey);
            let bbox = OrientedBox::new(cx, cy, w, h, angle)?;
            if out
                .iter()
                .all(|o| rotated_iou(&o.bbox, &bbox) <= MAX_PLACEMENT_IOU)
            {
                out.push(Instance { bbox, class_id });
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::PlacementExhausted {
                instance,
                attempts: MAX_ATTEMPTS,
            });
        }
    }
    Ok(out)
}

fn parallel_rows(
    params: &SceneParams,
    rows: usize,
    cols: usize,
    gap: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Instance>> {
    let center = Point::new(f64::from(params.width) / 2.0, f64::from(params.height) / 2.0);
    for _ in 0..MAX_ATTEMPTS {
        let ar = uniform(rng, params.aspect);
        let s = uniform(rng, params.size);
        let angle = rng.random_range(-FRAC_PI_2..FRAC_PI_2);
        let class_id = rng.random_range(0..params.n_class);
        // Short side along the row, like vehicles parked side by side.
        let (w, h) = (s / ar.sqrt(), s * ar.sqrt());
        let u = Point::new(angle.cos(), angle.sin());
        let v = u.perp();
        let mut boxes = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                let along = (c as f64 - (cols - 1) as f64 / 2.0) * (w + gap);
                let across = (r as f64 - (rows - 1) as f64 / 2.0) * (h + gap);
                let p = center + u * along + v * across;
                boxes.push(Instance {
                    bbox: OrientedBox::new(p.x, p.y, w, h, angle)?,
                    class_id,
                });
            }
        }
        if boxes.iter().all(|b| fits(&b.bbox, params.width, params.height)) {
            return Ok(boxes);
        }
    }
    Err(Error::PlacementExhausted {
        instance: 0,
        attempts: MAX_ATTEMPTS,
    })
}

/// Renders the probability map of `scene` at `stride` with falloff exponent
/// `gamma`.
pub fn render_cpm(scene: &Scene, stride: u32, gamma: f64) -> Result<ClassProbabilityMap> {
    if stride == 0 {
        return Err(invalid("stride must be at least 1"));
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(invalid("gamma must be positive"));
    }
    let (gw, gh) = scene.grid_shape(stride);
    let mut cpm = ClassProbabilityMap::zeros(scene.n_class, gw, gh, stride)?;
    let s = f64::from(stride);
    for inst in &scene.instances {
        if inst.class_id >= scene.n_class {
            return Err(invalid(format!("instance class {} out of range", inst.class_id)));
        }
        let b = &inst.bbox;
        let (lo, hi) = b.bounds();
        let c0 = (lo.x / s).floor().max(0.0) as usize;
        let r0 = (lo.y / s).floor().max(0.0) as usize;
        let c1 = ((hi.x / s).ceil().max(0.0) as usize).min(gw.saturating_sub(1));
        let r1 = ((hi.y / s).ceil().max(0.0) as usize).min(gh.saturating_sub(1));
        let plane = cpm.plane_mut(inst.class_id);
        for row in r0..=r1 {
            for col in c0..=c1 {
                let l = b.to_local(Point::new(col as f64 * s, row as f64 * s));
                let m = (2.0 * l.x.abs() / b.w).max(2.0 * l.y.abs() / b.h);
                if m < 1.0 {
                    let v = (1.0 - m).powf(gamma).clamp(0.0, 1.0) as f32;
                    let cell = &mut plane[row * gw + col];
                    if v > *cell {
                        *cell = v;
                    }
                }
            }
        }
    }
    Ok(cpm)
}

/// Adds seeded Gaussian noise to every cell, clamps to [0, 1], then applies a
/// `(2r+1)²` box blur averaging only in-map cells.
pub fn corrupt_cpm(
    cpm: &ClassProbabilityMap,
    noise_sigma: f64,
    blur_radius: usize,
    seed: u64,
) -> Result<ClassProbabilityMap> {
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(invalid("noise_sigma must be non-negative"));
    }
    let mut out = cpm.clone();
    if noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, noise_sigma).map_err(|e| invalid(e.to_string()))?;
        for c in 0..out.n_class() {
            for v in out.plane_mut(c) {
                *v = (f64::from(*v) + normal.sample(&mut rng)).clamp(0.0, 1.0) as f32;
            }
        }
    }
    if blur_radius > 0 {
        let (w, h) = (out.width(), out.height());
        for c in 0..out.n_class() {
            box_blur(out.plane_mut(c), w, h, blur_radius);
        }
    }
    Ok(out)
}

fn box_blur(plane: &mut [f32], w: usize, h: usize, r: usize) {
    let mut tmp = vec![0.0f64; w * h];
    for row in 0..h {
        for col in 0..w {
            let (a, b) = (col.saturating_sub(r), (col + r).min(w - 1));
            let sum: f64 = plane[row * w + a..=row * w + b].iter().map(|&v| f64::from(v)).sum();
            tmp[row * w + col] = sum / (b - a + 1) as f64;
        }
    }
    for col in 0..w {
        for row in 0..h {
            let (a, b) = (row.saturating_sub(r), (row + r).min(h - 1));
            let sum: f64 = (a..=b).map(|rr| tmp[rr * w + col]).sum();
            plane[row * w + col] = (sum / (b - a + 1) as f64).clamp(0.0, 1.0) as f32;
        }
    }
}

/// Default class names for synthetic data.
pub fn class_names(n_class: usize) -> Vec<String> {
    (0..n_class).map(|i| format!("class{i}")).collect()
}
