use crate::error::{invalid, Result};
use crate::geometry::Point;

/// Per-class probability grid over an image.
///
/// Cell `(col, row)` samples image position `(col * stride, row * stride)`.
/// Values are stored class-major, then row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassProbabilityMap {
    n_class: usize,
    width: usize,
    height: usize,
    stride: u32,
    values: Vec<f32>,
}

impl ClassProbabilityMap {
    pub fn new(
        n_class: usize,
        width: usize,
        height: usize,
        stride: u32,
        values: Vec<f32>,
    ) -> Result<Self> {
        if stride == 0 {
            return Err(invalid("stride must be at least 1"));
        }
        if values.len() != n_class * width * height {
            return Err(invalid(format!(
                "expected {} values for shape ({n_class}, {height}, {width}), got {}",
                n_class * width * height,
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(invalid(format!("probability {v} outside [0, 1]")));
        }
        Ok(Self {
            n_class,
            width,
            height,
            stride,
            values,
        })
    }

    pub fn zeros(n_class: usize, width: usize, height: usize, stride: u32) -> Result<Self> {
        Self::new(n_class, width, height, stride, vec![0.0; n_class * width * height])
    }

    pub fn n_class(&self) -> usize {
        self.n_class
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn stride(&self) -> u32 {
        self.stride
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn plane(&self, class_id: usize) -> &[f32] {
        let n = self.width * self.height;
        &self.values[class_id * n..(class_id + 1) * n]
    }

    pub(crate) fn plane_mut(&mut self, class_id: usize) -> &mut [f32] {
        let n = self.width * self.height;
        &mut self.values[class_id * n..(class_id + 1) * n]
    }

    pub fn get(&self, class_id: usize, col: usize, row: usize) -> f32 {
        self.plane(class_id)[row * self.width + col]
    }

    /// Cell value with zero padding outside the grid.
    pub fn get_or_zero(&self, class_id: usize, col: i64, row: i64) -> f64 {
        if col < 0 || row < 0 || col >= self.width as i64 || row >= self.height as i64 {
            0.0
        } else {
            f64::from(self.get(class_id, col as usize, row as usize))
        }
    }

    /// Bilinear sample at fractional cell coordinates, zero outside the grid.
    pub fn bilinear(&self, class_id: usize, p: Point) -> f64 {
        if !p.is_finite() {
            return 0.0;
        }
        let x0 = p.x.floor();
        let y0 = p.y.floor();
        let (fx, fy) = (p.x - x0, p.y - y0);
        let (c, r) = (x0 as i64, y0 as i64);
        let v00 = self.get_or_zero(class_id, c, r);
        let v10 = self.get_or_zero(class_id, c + 1, r);
        let v01 = self.get_or_zero(class_id, c, r + 1);
        let v11 = self.get_or_zero(class_id, c + 1, r + 1);
        let top = v00 + (v10 - v00) * fx;
        let bottom = v01 + (v11 - v01) * fx;
        (top + (bottom - top) * fy).clamp(0.0, 1.0)
    }

    pub(crate) fn check_class(&self, class_id: usize) -> Result<()> {
        if class_id >= self.n_class {
            return Err(invalid(format!(
                "class {class_id} out of range for a {}-class map",
                self.n_class
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_and_range_checked() {
        assert!(ClassProbabilityMap::new(1, 2, 2, 4, vec![0.0; 3]).is_err());
        assert!(ClassProbabilityMap::new(1, 2, 2, 0, vec![0.0; 4]).is_err());
        assert!(ClassProbabilityMap::new(1, 2, 2, 1, vec![0.0, 1.5, 0.0, 0.0]).is_err());
        assert!(ClassProbabilityMap::new(1, 2, 2, 1, vec![0.0, f32::NAN, 0.0, 0.0]).is_err());
    }

    #[test]
    fn bilinear_interpolates_and_pads() {
        let m = ClassProbabilityMap::new(1, 2, 1, 1, vec![0.0, 1.0]).unwrap();
        assert_eq!(m.bilinear(0, Point::new(0.25, 0.0)), 0.25);
        assert_eq!(m.bilinear(0, Point::new(1.0, 0.0)), 1.0);
        assert_eq!(m.bilinear(0, Point::new(1.5, 0.0)), 0.5);
        assert_eq!(m.bilinear(0, Point::new(1.0, 0.5)), 0.5);
        assert_eq!(m.bilinear(0, Point::new(-3.0, 0.0)), 0.0);
    }
}
