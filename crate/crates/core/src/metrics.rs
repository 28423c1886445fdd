//! Pseudo-label quality measurement and annotation perturbation.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assign::PointAnnotation;
use crate::error::{invalid, Error, Result};
use crate::geometry::{rotated_iou, OrientedBox, Point};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassIoU {
    pub mean_iou: f64,
    pub count: usize,
}

/// Per-class and overall mean IoU. The overall mean is the unweighted mean
/// of the per-class means.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct IoUReport {
    pub per_class: BTreeMap<usize, ClassIoU>,
    pub mean: f64,
    pub fallback_count: usize,
}

impl IoUReport {
    /// Human-readable table.
    pub fn to_text(&self, class_names: Option<&[String]>) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<6} {:<20} {:>9} {:>8}", "class", "name", "instances", "miou");
        for (&id, c) in &self.per_class {
            let name = class_names
                .and_then(|n| n.get(id))
                .map(String::as_str)
                .unwrap_or("-");
            let _ = writeln!(s, "{:<6} {:<20} {:>9} {:>8.4}", id, name, c.count, c.mean_iou);
        }
        let total: usize = self.per_class.values().map(|c| c.count).sum();
        let _ = writeln!(s, "{:<6} {:<20} {:>9} {:>8.4}", "mean", "", total, self.mean);
        let _ = writeln!(s, "fallback boxes: {}", self.fallback_count);
        s
    }

    /// `class_id<TAB>miou` per line, then `mean<TAB>value`.
    pub fn to_tsv(&self) -> String {
        let mut s = String::new();
        for (&id, c) in &self.per_class {
            let _ = writeln!(s, "{id}\t{:.6}", c.mean_iou);
        }
        let _ = writeln!(s, "mean\t{:.6}", self.mean);
        s
    }
}

/// Index-aligned mIoU: `pseudo[i]` was generated for `gt[i]`.
pub fn miou(pseudo: &[(OrientedBox, usize)], gt: &[(OrientedBox, usize)]) -> Result<IoUReport> {
    if pseudo.len() != gt.len() {
        return Err(invalid(format!(
            "{} pseudo boxes for {} ground-truth boxes",
            pseudo.len(),
            gt.len()
        )));
    }
    let mut sums: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    for ((p, _), (g, class_id)) in pseudo.iter().zip(gt) {
        let e = sums.entry(*class_id).or_default();
        e.0 += rotated_iou(p, g);
        e.1 += 1;
    }
    let per_class: BTreeMap<usize, ClassIoU> = sums
        .into_iter()
        .map(|(id, (sum, count))| {
            (
                id,
                ClassIoU {
                    mean_iou: sum / count as f64,
                    count,
                },
            )
        })
        .collect();
    let mean = if per_class.is_empty() {
        0.0
    } else {
        per_class.values().map(|c| c.mean_iou).sum::<f64>() / per_class.len() as f64
    };
    Ok(IoUReport {
        per_class,
        mean,
        fallback_count: 0,
    })
}

/// Shifts each annotation by `r` along a uniform direction, with
/// `r ~ U[-σS, σS]` and `S = sqrt(w h)` of its box, then clamps to
/// `[0, width] x [0, height]`.
pub fn perturb_points(
    annotations: &[PointAnnotation],
    gt_boxes: &[OrientedBox],
    sigma: f64,
    seed: u64,
    bounds: (f64, f64),
) -> Result<Vec<PointAnnotation>> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(invalid("sigma must be non-negative"));
    }
    if annotations.len() != gt_boxes.len() {
        return Err(invalid("annotations and boxes must be aligned"));
    }
    if sigma == 0.0 {
        return Ok(annotations.to_vec());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(annotations
        .iter()
        .zip(gt_boxes)
        .map(|(a, b)| {
            let reach = sigma * (b.w * b.h).sqrt();
            let theta = rng.random_range(0.0..2.0 * PI);
            let r = rng.random_range(-reach..=reach);
            PointAnnotation::new(
                (a.x + r * theta.cos()).clamp(0.0, bounds.0),
                (a.y + r * theta.sin()).clamp(0.0, bounds.1),
                a.class_id,
            )
        })
        .collect())
}

/// Monte-Carlo IoU estimate from uniform samples over the joint bounding
/// rectangle of both boxes.
pub fn mc_iou_oracle(a: &OrientedBox, b: &OrientedBox, n_samples: usize, seed: u64) -> Result<f64> {
    if n_samples == 0 {
        return Err(invalid("at least one sample is required"));
    }
    let (alo, ahi) = a.bounds();
    let (blo, bhi) = b.bounds();
    let lo = Point::new(alo.x.min(blo.x), alo.y.min(blo.y));
    let hi = Point::new(ahi.x.max(bhi.x), ahi.y.max(bhi.y));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut both, mut either) = (0u64, 0u64);
    for _ in 0..n_samples {
        let p = Point::new(
            lo.x + (hi.x - lo.x) * rng.random::<f64>(),
            lo.y + (hi.y - lo.y) * rng.random::<f64>(),
        );
        let (ia, ib) = (a.contains(p), b.contains(p));
        both += u64::from(ia && ib);
        either += u64::from(ia || ib);
    }
    if either == 0 {
        return Err(Error::InvalidEstimate("no sample fell inside either box".into()));
    }
    Ok(both as f64 / either as f64)
}
