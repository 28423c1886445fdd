//! Training-target assignment on the probability-map grid.
//!
//! Cells are point samples at integer coordinates `(col, row)`; annotations
//! must already be divided by the map stride. Each cell is decided by the
//! first rule that fires:
//!
//! 1. positive, when the nearest annotation is closer than `b1`;
//! 2. negative, inside the `b2` disc around the midpoint of a same-class
//!    nearest-neighbour pair;
//! 3. negative, when the cell lies outside every circle of radius
//!    `neg_radius_scale * dist_i` around annotation `i`;
//! 4. ignore.

use crate::error::{invalid, Result};
use crate::geometry::Point;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointAnnotation {
    pub x: f64,
    pub y: f64,
    pub class_id: usize,
}

impl PointAnnotation {
    pub fn new(x: f64, y: f64, class_id: usize) -> Self {
        Self { x, y, class_id }
    }

    pub fn point(&self) -> Point {
        Point::new(self.x, self.y)
    }

    /// The same annotation with coordinates divided by `stride`.
    pub fn scaled(&self, stride: f64) -> Self {
        Self::new(self.x / stride, self.y / stride, self.class_id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Positive(usize),
    Negative,
    Ignore,
}

impl Label {
    /// Byte encoding: 0 negative, 255 ignore, `class_id + 1` positive.
    pub fn to_byte(self) -> u8 {
        match self {
            Label::Negative => 0,
            Label::Ignore => 255,
            Label::Positive(c) => u8::try_from(c + 1)
                .ok()
                .filter(|&b| b != 255)
                .expect("class id exceeds the 254-class byte encoding"),
        }
    }

    pub fn from_byte(b: u8) -> Self {
        match b {
            0 => Label::Negative,
            255 => Label::Ignore,
            c => Label::Positive(usize::from(c) - 1),
        }
    }
}

/// Which assignment rule decided a cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Rule {
    Positive,
    MiddleNegative,
    DistanceNegative,
    Ignore,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetMap {
    pub width: usize,
    pub height: usize,
    /// Row-major labels.
    pub labels: Vec<Label>,
}

impl TargetMap {
    pub fn get(&self, col: usize, row: usize) -> Label {
        self.labels[row * self.width + col]
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.labels.iter().map(|l| l.to_byte()).collect()
    }

    pub fn counts(&self) -> LabelCounts {
        let mut c = LabelCounts::default();
        for l in &self.labels {
            match l {
                Label::Positive(_) => c.positive += 1,
                Label::Negative => c.negative += 1,
                Label::Ignore => c.ignore += 1,
            }
        }
        c
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LabelCounts {
    pub positive: usize,
    pub negative: usize,
    pub ignore: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssignParams {
    /// Positive radius, map cells.
    pub b1: f64,
    /// Multiplier on the nearest-neighbour distance for the outer negative rule.
    pub neg_radius_scale: f64,
    /// Radius of the middle-negative disc, map cells.
    pub b2: f64,
    /// Stand-in for the neighbour distance when an image has one annotation.
    pub fallback_radius: f64,
    pub positive_enabled: bool,
    pub negative_enabled: bool,
    pub middle_negative_enabled: bool,
}

impl Default for AssignParams {
    fn default() -> Self {
        Self {
            b1: 6.0,
            neg_radius_scale: 1.0,
            b2: 4.0,
            fallback_radius: 64.0,
            positive_enabled: true,
            negative_enabled: true,
            middle_negative_enabled: true,
        }
    }
}

impl AssignParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.b1 > 0.0 && self.b1.is_finite()) {
            return Err(invalid("b1 must be positive"));
        }
        if !(self.b2 >= 0.0 && self.b2.is_finite()) {
            return Err(invalid("b2 must be non-negative"));
        }
        if !(self.neg_radius_scale > 0.0 && self.neg_radius_scale.is_finite()) {
            return Err(invalid("neg_radius_scale must be positive"));
        }
        if !(self.fallback_radius > 0.0 && self.fallback_radius.is_finite()) {
            return Err(invalid("fallback_radius must be positive"));
        }
        Ok(())
    }
}

/// Distance from each annotation to its closest other annotation, any class.
///
/// A lone annotation gets `fallback`.
pub fn min_neighbor_distances(points: &[PointAnnotation], fallback: f64) -> Result<Vec<f64>> {
    if points.is_empty() {
        return Err(invalid("at least one annotation is required"));
    }
    if points.len() == 1 {
        return Ok(vec![fallback]);
    }
    Ok(points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            points
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, q)| p.point().distance(q.point()))
                .fold(f64::INFINITY, f64::min)
        })
        .collect())
}

/// Nearest annotation of the same class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub distance: f64,
    /// Unit vector from the annotation toward the neighbour.
    pub direction: Point,
}

/// For every annotation, its nearest same-class neighbour.
///
/// Ties go to the lower index. Coincident annotations carry no direction and
/// are not reported as neighbours.
pub fn nearest_same_class(points: &[PointAnnotation]) -> Vec<Option<Neighbor>> {
    points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut best: Option<(usize, f64)> = None;
            for (j, q) in points.iter().enumerate() {
                if j == i || q.class_id != p.class_id {
                    continue;
                }
                let d = p.point().distance(q.point());
                if d > 0.0 && best.is_none_or(|(_, bd)| d < bd) {
                    best = Some((j, d));
                }
            }
            best.map(|(j, d)| Neighbor {
                index: j,
                distance: d,
                direction: (points[j].point() - p.point()) * (1.0 / d),
            })
        })
        .collect()
}

/// Assigns a label to every cell of a `width` x `height` grid.
pub fn assign_labels(
    points: &[PointAnnotation],
    width: usize,
    height: usize,
    params: &AssignParams,
) -> Result<TargetMap> {
    assign_with_rules(points, width, height, params).map(|(map, _)| map)
}

/// [`assign_labels`] that also reports the rule deciding each cell.
pub fn assign_with_rules(
    points: &[PointAnnotation],
    width: usize,
    height: usize,
    params: &AssignParams,
) -> Result<(TargetMap, Vec<Rule>)> {
    if points.is_empty() {
        return Err(invalid("at least one annotation is required"));
    }
    if width == 0 || height == 0 {
        return Err(invalid("map dimensions must be at least 1"));
    }
    if points.iter().any(|p| !p.point().is_finite()) {
        return Err(invalid("annotation coordinates must be finite"));
    }
    params.validate()?;

    let radii: Vec<f64> = min_neighbor_distances(points, params.fallback_radius)?
        .into_iter()
        .map(|d| d * params.neg_radius_scale)
        .collect();
    let midpoints: Vec<Point> = nearest_same_class(points)
        .iter()
        .enumerate()
        .filter_map(|(i, n)| n.map(|n| (points[i].point() + points[n.index].point()) * 0.5))
        .collect();

    let mut labels = Vec::with_capacity(width * height);
    let mut rules = Vec::with_capacity(width * height);
    for row in 0..height {
        for col in 0..width {
            let cell = Point::new(col as f64, row as f64);
            let (label, rule) = decide(cell, points, &radii, &midpoints, params);
            labels.push(label);
            rules.push(rule);
        }
    }
    Ok((
        TargetMap {
            width,
            height,
            labels,
        },
        rules,
    ))
}

fn decide(
    cell: Point,
    points: &[PointAnnotation],
    radii: &[f64],
    midpoints: &[Point],
    params: &AssignParams,
) -> (Label, Rule) {
    if params.positive_enabled {
        let mut nearest = 0;
        let mut nearest_d = f64::INFINITY;
        for (i, p) in points.iter().enumerate() {
            let d = cell.distance(p.point());
            if d < nearest_d {
                nearest = i;
                nearest_d = d;
            }
        }
        if nearest_d < params.b1 {
            return (Label::Positive(points[nearest].class_id), Rule::Positive);
        }
    }
    if params.middle_negative_enabled && midpoints.iter().any(|m| cell.distance(*m) < params.b2) {
        return (Label::Negative, Rule::MiddleNegative);
    }
    if params.negative_enabled
        && points
            .iter()
            .zip(radii)
            .all(|(p, &r)| cell.distance(p.point()) > r)
    {
        return (Label::Negative, Rule::DistanceNegative);
    }
    (Label::Ignore, Rule::Ignore)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pa(x: f64, y: f64, c: usize) -> PointAnnotation {
        PointAnnotation::new(x, y, c)
    }

    #[test]
    fn neighbor_distances() {
        let d = min_neighbor_distances(&[pa(0., 0., 0), pa(10., 0., 1), pa(10., 5., 0)], 64.0)
            .unwrap();
        assert_eq!(d, vec![10.0, 5.0, 5.0]);
        let d = min_neighbor_distances(&[pa(3., 3., 0), pa(3., 3., 0)], 64.0).unwrap();
        assert_eq!(d, vec![0.0, 0.0]);
        assert_eq!(min_neighbor_distances(&[pa(1., 1., 0)], 64.0).unwrap(), vec![64.0]);
        assert!(min_neighbor_distances(&[], 64.0).is_err());
    }

    #[test]
    fn same_class_neighbors() {
        let n = nearest_same_class(&[pa(0., 0., 0), pa(3., 4., 0)]);
        let a = n[0].unwrap();
        let b = n[1].unwrap();
        assert_eq!((a.index, b.index), (1, 0));
        assert_eq!(a.distance, 5.0);
        assert!((a.direction.x - 0.6).abs() < 1e-12 && (a.direction.y - 0.8).abs() < 1e-12);
        assert!((b.direction.x + 0.6).abs() < 1e-12 && (b.direction.y + 0.8).abs() < 1e-12);

        assert_eq!(nearest_same_class(&[pa(0., 0., 0), pa(1., 0., 1)]), vec![None, None]);

        let n = nearest_same_class(&[pa(0., 0., 2), pa(1., 0., 2), pa(3., 0., 2)]);
        assert_eq!(n[1].unwrap().index, 0);
        assert_eq!(n[1].unwrap().distance, 1.0);
        assert_eq!(n[2].unwrap().index, 1);
    }

    #[test]
    fn hand_evaluated_two_point_scene() {
        let pts = [pa(10., 10., 0), pa(30., 10., 0)];
        let (map, rules) = assign_with_rules(&pts, 64, 48, &AssignParams::default()).unwrap();
        let at = |c: usize, r: usize| (map.get(c, r), rules[r * 64 + c]);
        assert_eq!(at(13, 10), (Label::Positive(0), Rule::Positive));
        assert_eq!(at(20, 10), (Label::Negative, Rule::MiddleNegative));
        assert_eq!(at(60, 40), (Label::Negative, Rule::DistanceNegative));
        // 7 from the first point, 3 from the midpoint: the middle disc fires.
        assert_eq!(at(17, 10), (Label::Negative, Rule::MiddleNegative));
        // Outside b1 (d = 6 is not < 6), outside the disc (d = 4), inside dist = 20.
        assert_eq!(at(16, 10), (Label::Ignore, Rule::Ignore));
        assert_eq!(at(17, 14), (Label::Ignore, Rule::Ignore));
    }

    #[test]
    fn single_point_uses_fallback_radius() {
        let map = assign_labels(&[pa(100., 100., 3)], 200, 200, &AssignParams::default()).unwrap();
        assert_eq!(map.get(105, 100), Label::Positive(3));
        assert_eq!(map.get(120, 100), Label::Ignore);
        assert_eq!(map.get(164, 100), Label::Ignore);
        assert_eq!(map.get(165, 100), Label::Negative);
        assert_eq!(map.get(0, 0), Label::Negative);
    }

    #[test]
    fn equidistant_positive_goes_to_lower_index() {
        let pts = [pa(8., 5., 2), pa(12., 5., 1)];
        let map = assign_labels(&pts, 20, 10, &AssignParams::default()).unwrap();
        assert_eq!(map.get(10, 5), Label::Positive(2));
    }

    #[test]
    fn errors() {
        assert!(assign_labels(&[], 4, 4, &AssignParams::default()).is_err());
        assert!(assign_labels(&[pa(1., 1., 0)], 0, 4, &AssignParams::default()).is_err());
        let bad = AssignParams {
            b1: 0.0,
            ..AssignParams::default()
        };
        assert!(assign_labels(&[pa(1., 1., 0)], 4, 4, &bad).is_err());
    }

    #[test]
    fn byte_encoding() {
        for l in [Label::Negative, Label::Ignore, Label::Positive(0), Label::Positive(253)] {
            assert_eq!(Label::from_byte(l.to_byte()), l);
        }
        assert_eq!(Label::Positive(4).to_byte(), 5);
    }
}
