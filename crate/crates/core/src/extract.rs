//! Oriented-box extraction from a class probability map.
//!
//! For each annotation the class plane is sampled on a small integer grid
//! around the point, the probability-weighted covariance of the grid offsets
//! gives the object axes, and a walk along each signed axis finds where the
//! probability drops below a relative threshold. When a same-class neighbour
//! lies roughly along one axis, both extents on that axis are capped at half
//! the gap so the box stays on this object's side of the midpoint.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assign::{nearest_same_class, Neighbor, PointAnnotation};
use crate::cpm::ClassProbabilityMap;
use crate::error::{invalid, Error, Result};
use crate::geometry::{normalize_angle, OrientedBox, Point};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum SampleMode {
    #[default]
    Weighted,
    Probabilistic,
}

impl SampleMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SampleMode::Weighted => "weighted",
            SampleMode::Probabilistic => "probabilistic",
        }
    }
}

impl std::str::FromStr for SampleMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "weighted" => Ok(SampleMode::Weighted),
            "probabilistic" => Ok(SampleMode::Probabilistic),
            other => Err(invalid(format!("unknown sample mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtractParams {
    /// Side of the sampling grid; odd.
    pub grid_size: usize,
    pub sample_mode: SampleMode,
    /// Boundary threshold relative to the mean core probability.
    pub boundary_kappa: f64,
    /// Absolute lower bound on the boundary threshold.
    pub boundary_floor: f64,
    /// Walk step, map cells.
    pub step: f64,
    /// Walk length cap, map cells.
    pub max_extent: f64,
    /// Largest angle between a walk direction and the neighbour vector for
    /// which the neighbour cap applies.
    pub angle_threshold: f64,
    pub constraint_enabled: bool,
    /// Relative eigenvalue gap under which the axes are considered undefined.
    pub degenerate_eps: f64,
    /// Half-side of the emergency square, map cells.
    pub fallback_box: f64,
}

impl Default for ExtractParams {
    fn default() -> Self {
        Self {
            grid_size: 7,
            sample_mode: SampleMode::Weighted,
            boundary_kappa: 0.1,
            boundary_floor: 0.05,
            step: 0.25,
            max_extent: 256.0,
            angle_threshold: PI / 6.0,
            constraint_enabled: true,
            degenerate_eps: 1e-6,
            fallback_box: 8.0,
        }
    }
}

impl ExtractParams {
    pub fn validate(&self) -> Result<()> {
        if self.grid_size < 3 || self.grid_size.is_multiple_of(2) {
            return Err(invalid(format!(
                "grid_size must be odd and at least 3, got {}",
                self.grid_size
            )));
        }
        if !(self.boundary_kappa > 0.0 && self.boundary_kappa <= 1.0) {
            return Err(invalid("boundary_kappa must be in (0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.boundary_floor) {
            return Err(invalid("boundary_floor must be in [0, 1]"));
        }
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(invalid("step must be positive"));
        }
        if !(self.max_extent > 0.0 && self.max_extent.is_finite()) {
            return Err(invalid("max_extent must be positive"));
        }
        if !(self.angle_threshold > 0.0 && self.angle_threshold < FRAC_PI_2) {
            return Err(invalid("angle_threshold must be in (0, π/2)"));
        }
        if !(self.degenerate_eps >= 0.0 && self.degenerate_eps.is_finite()) {
            return Err(invalid("degenerate_eps must be non-negative"));
        }
        if !(self.fallback_box > 0.0 && self.fallback_box.is_finite()) {
            return Err(invalid("fallback_box must be positive"));
        }
        Ok(())
    }
}

/// A grid offset and the probability read there.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSample {
    pub offset: Point,
    pub weight: f64,
}

/// Bilinear probabilities on the `grid_size` x `grid_size` integer grid
/// centred at `center` (map cells). Offsets run row by row from `(-k, -k)`.
pub fn grid_weights(
    cpm: &ClassProbabilityMap,
    class_id: usize,
    center: Point,
    grid_size: usize,
) -> Result<Vec<GridSample>> {
    cpm.check_class(class_id)?;
    if !center.is_finite() {
        return Err(invalid("grid center must be finite"));
    }
    if grid_size == 0 || grid_size.is_multiple_of(2) {
        return Err(invalid(format!("grid_size must be odd, got {grid_size}")));
    }
    let k = (grid_size / 2) as i64;
    let mut out = Vec::with_capacity(grid_size * grid_size);
    for dy in -k..=k {
        for dx in -k..=k {
            let offset = Point::new(dx as f64, dy as f64);
            out.push(GridSample {
                offset,
                weight: cpm.bilinear(class_id, center + offset),
            });
        }
    }
    Ok(out)
}

/// Weighted scatter matrix of a sample set, left unnormalized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Covariance2 {
    pub mean: Point,
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl Covariance2 {
    /// `Σ wᵢ (zᵢ − μ)(zᵢ − μ)ᵀ` with `μ` the weighted mean.
    pub fn weighted(samples: &[GridSample]) -> Result<Self> {
        let total: f64 = samples.iter().map(|s| s.weight).sum();
        if !(total > 0.0) {
            return Err(Error::EmptyNeighborhood);
        }
        let mean = samples
            .iter()
            .fold(Point::default(), |acc, s| acc + s.offset * s.weight)
            * (1.0 / total);
        let (mut xx, mut xy, mut yy) = (0.0, 0.0, 0.0);
        for s in samples {
            let d = s.offset - mean;
            xx += s.weight * d.x * d.x;
            xy += s.weight * d.x * d.y;
            yy += s.weight * d.y * d.y;
        }
        Ok(Self { mean, xx, xy, yy })
    }

    /// Closed-form eigendecomposition of the symmetric 2x2 matrix.
    pub fn principal_axes(&self) -> PrincipalAxes {
        let half_trace = 0.5 * (self.xx + self.yy);
        let half_diff = 0.5 * (self.xx - self.yy);
        let radius = half_diff.hypot(self.xy);
        let theta = 0.5 * (2.0 * self.xy).atan2(self.xx - self.yy);
        let v1 = if theta >= FRAC_PI_2 {
            Point::new(0.0, 1.0)
        } else {
            Point::new(theta.cos(), theta.sin())
        };
        PrincipalAxes {
            v1,
            v2: v1.perp(),
            lambda1: (half_trace + radius).max(0.0),
            lambda2: (half_trace - radius).max(0.0),
        }
    }
}

/// Orthonormal principal directions with their variances, `lambda1 >= lambda2`.
///
/// `v1` has a positive x component, or points along +y when vertical; `v2`
/// is `v1` turned by +π/2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrincipalAxes {
    pub v1: Point,
    pub v2: Point,
    pub lambda1: f64,
    pub lambda2: f64,
}

impl PrincipalAxes {
    /// True when the eigenvalue gap is too small to define an orientation.
    pub fn is_degenerate(&self, eps: f64) -> bool {
        self.lambda1 <= 0.0 || self.lambda1 - self.lambda2 <= eps * self.lambda1
    }
}

pub fn weighted_pca(samples: &[GridSample]) -> Result<PrincipalAxes> {
    Ok(Covariance2::weighted(samples)?.principal_axes())
}

const MAX_RESAMPLES: usize = 8;

/// Keeps each offset with probability equal to its weight and returns the
/// unweighted scatter of the retained set.
///
/// Draws that keep fewer than two offsets are redrawn up to eight times.
pub fn sampled_covariance<R: Rng + ?Sized>(
    samples: &[GridSample],
    rng: &mut R,
) -> Result<Covariance2> {
    let mut kept = Vec::with_capacity(samples.len());
    for _ in 0..=MAX_RESAMPLES {
        kept.clear();
        for s in samples {
            let p = s.weight.clamp(0.0, 1.0);
            if rng.random::<f64>() < p {
                kept.push(GridSample {
                    offset: s.offset,
                    weight: 1.0,
                });
            }
        }
        if kept.len() >= 2 {
            return Covariance2::weighted(&kept);
        }
    }
    Err(Error::EmptyNeighborhood)
}

pub fn sampled_pca<R: Rng + ?Sized>(samples: &[GridSample], rng: &mut R) -> Result<PrincipalAxes> {
    Ok(sampled_covariance(samples, rng)?.principal_axes())
}

/// Distance walked from `anchor` along `direction` before the probability
/// drops under the boundary threshold, in map cells.
pub fn trace_extent(
    cpm: &ClassProbabilityMap,
    class_id: usize,
    anchor: Point,
    direction: Point,
    params: &ExtractParams,
) -> f64 {
    let mut core = 0.0;
    for dy in -1..=1 {
        for dx in -1..=1 {
            core += cpm.bilinear(class_id, anchor + Point::new(f64::from(dx), f64::from(dy)));
        }
    }
    let threshold = (params.boundary_kappa * core / 9.0).max(params.boundary_floor);

    let mut k = 1u32;
    loop {
        let t = f64::from(k) * params.step;
        if t > params.max_extent {
            return params.max_extent;
        }
        if cpm.bilinear(class_id, anchor + direction * t) < threshold {
            return f64::from(k - 1) * params.step;
        }
        k += 1;
    }
}

/// Caps `extent` at `distance / (2 cos θ)`, where `θ` is the angle between
/// the axis of `direction` and `toward`, the unit vector to the nearest
/// same-class neighbour at `distance`.
///
/// The axis is unsigned: both walks along an axis within `angle_threshold`
/// of `toward` are capped, which keeps the box inside the half-way lines to
/// neighbours on either side.
pub fn constrain_extent(
    extent: f64,
    direction: Point,
    toward: Point,
    distance: f64,
    angle_threshold: f64,
) -> f64 {
    let cos = direction.dot(toward).abs();
    if cos > angle_threshold.cos() {
        extent.min(distance / (2.0 * cos))
    } else {
        extent
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extraction {
    pub bbox: OrientedBox,
    /// The neighbourhood was empty and the emergency square was emitted.
    pub fallback: bool,
    /// The axes were undefined and the default direction was used.
    pub degenerate: bool,
}

const MIN_EXTENT: f64 = 0.5;

/// Extracts one oriented box (image pixels) for `annotation` (image pixels).
///
/// `neighbor` is the nearest same-class annotation in map-cell units, as
/// returned by [`image_neighbors`]. `seed` drives probabilistic sampling and
/// is unused in weighted mode.
pub fn extract_obb(
    cpm: &ClassProbabilityMap,
    annotation: &PointAnnotation,
    neighbor: Option<&Neighbor>,
    params: &ExtractParams,
    seed: u64,
) -> Result<Extraction> {
    cpm.check_class(annotation.class_id)?;
    if !annotation.point().is_finite() {
        return Err(invalid("annotation coordinates must be finite"));
    }
    let stride = f64::from(cpm.stride());
    let class_id = annotation.class_id;
    let center = annotation.point() * (1.0 / stride);

    let samples = grid_weights(cpm, class_id, center, params.grid_size)?;
    let axes = match params.sample_mode {
        SampleMode::Weighted => weighted_pca(&samples),
        SampleMode::Probabilistic => sampled_pca(&samples, &mut ChaCha8Rng::seed_from_u64(seed)),
    };
    let axes = match axes {
        Ok(axes) => axes,
        Err(Error::EmptyNeighborhood) => {
            let side = 2.0 * stride * params.fallback_box;
            return Ok(Extraction {
                bbox: OrientedBox::new(annotation.x, annotation.y, side, side, 0.0)?,
                fallback: true,
                degenerate: false,
            });
        }
        Err(e) => return Err(e),
    };

    let degenerate = axes.is_degenerate(params.degenerate_eps);
    let v1 = if degenerate { Point::new(1.0, 0.0) } else { axes.v1 };
    let v2 = v1.perp();

    let extent = |dir: Point| {
        let e = trace_extent(cpm, class_id, center, dir, params).max(MIN_EXTENT);
        match neighbor {
            Some(n) if params.constraint_enabled && n.distance > 0.0 => {
                constrain_extent(e, dir, n.direction, n.distance, params.angle_threshold)
            }
            _ => e,
        }
    };
    let (e1p, e1m) = (extent(v1), extent(-v1));
    let (e2p, e2m) = (extent(v2), extent(-v2));

    let c = center + v1 * ((e1p - e1m) / 2.0) + v2 * ((e2p - e2m) / 2.0);
    let bbox = OrientedBox::new(
        stride * c.x,
        stride * c.y,
        stride * (e1p + e1m),
        stride * (e2p + e2m),
        normalize_angle(v1.y.atan2(v1.x))?,
    )?;
    Ok(Extraction {
        bbox,
        fallback: false,
        degenerate,
    })
}

/// Nearest same-class neighbours of image-pixel annotations, in map cells.
pub fn image_neighbors(annotations: &[PointAnnotation], stride: u32) -> Vec<Option<Neighbor>> {
    let scaled: Vec<PointAnnotation> = annotations
        .iter()
        .map(|a| a.scaled(f64::from(stride)))
        .collect();
    nearest_same_class(&scaled)
}

/// Extracts one box per annotation, in order. `seed_of(i)` supplies the
/// per-instance sampling seed.
pub fn extract_all(
    cpm: &ClassProbabilityMap,
    annotations: &[PointAnnotation],
    params: &ExtractParams,
    seed_of: impl Fn(usize) -> u64,
) -> Result<Vec<Extraction>> {
    params.validate()?;
    let neighbors = image_neighbors(annotations, cpm.stride());
    annotations
        .iter()
        .zip(&neighbors)
        .enumerate()
        .map(|(i, (a, n))| extract_obb(cpm, a, n.as_ref(), params, seed_of(i)))
        .collect()
}
