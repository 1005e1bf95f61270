//! Continuous scalar intensity fields, ground-truth averaging, and the
//! position-to-contour-coordinate mapping used for position-based estimation.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Result, SimError};
use crate::geom::Vec2;

const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Regular grid of sampled intensities, loadable from a plain-text matrix file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridField {
    pub rows: usize,
    pub cols: usize,
    /// Cell edge length in cm.
    pub cell_cm: f64,
    /// World position of the center of cell (0, 0).
    pub origin: Vec2,
    /// Row-major values, `rows * cols` entries.
    pub values: Vec<f64>,
    /// Bilinear interpolation between cell centers; nearest-cell otherwise.
    pub bilinear: bool,
}

/// Parametric environmental intensity field on the unbounded plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScalarField {
    /// Cone: value is `offset + slope * r` with `r` the distance to `center`.
    RadialCone {
        center: Vec2,
        slope: f64,
        offset: f64,
    },
    /// Tent ridge: value is `offset - slope * d` with `d` the perpendicular
    /// distance to the 45-degree diagonal through `center`. Maximal exactly
    /// on the diagonal.
    VShapeRamp {
        center: Vec2,
        slope: f64,
        offset: f64,
    },
    Grid(GridField),
}

/// Region over which ground truth is averaged and robot retention is counted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum ReferenceRegion {
    Disk { center: Vec2, radius: f64 },
    Square { center: Vec2, side: f64 },
}

impl ReferenceRegion {
    pub fn contains(&self, pos: Vec2) -> bool {
        match *self {
            ReferenceRegion::Disk { center, radius } => pos.distance(center) <= radius,
            ReferenceRegion::Square { center, side } => {
                let h = side / 2.0;
                (pos.x - center.x).abs() <= h && (pos.y - center.y).abs() <= h
            }
        }
    }

    /// Characteristic dimension (diameter or side), used for validation.
    pub fn extent(&self) -> f64 {
        match *self {
            ReferenceRegion::Disk { radius, .. } => 2.0 * radius,
            ReferenceRegion::Square { side, .. } => side,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.extent() <= 0.0 {
            return Err(SimError::config("region", "dimensions must be positive"));
        }
        Ok(())
    }
}

impl GridField {
    /// Loads a grid from a text file whose first line is
    /// `rows cols cell_cm origin_x origin_y`, followed by `rows` lines of
    /// `cols` space-separated intensities.
    pub fn load(path: &Path, bilinear: bool) -> Result<GridField> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, bilinear)
    }

    pub fn parse(text: &str, bilinear: bool) -> Result<GridField> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| SimError::Domain("empty grid file".into()))?;
        let head: Vec<&str> = header.split_whitespace().collect();
        if head.len() != 5 {
            return Err(SimError::Domain(
                "grid header must be `rows cols cell_cm origin_x origin_y`".into(),
            ));
        }
        let rows: usize = head[0]
            .parse()
            .map_err(|_| SimError::Domain("bad rows".into()))?;
        let cols: usize = head[1]
            .parse()
            .map_err(|_| SimError::Domain("bad cols".into()))?;
        let cell_cm: f64 = head[2]
            .parse()
            .map_err(|_| SimError::Domain("bad cell size".into()))?;
        let ox: f64 = head[3]
            .parse()
            .map_err(|_| SimError::Domain("bad origin_x".into()))?;
        let oy: f64 = head[4]
            .parse()
            .map_err(|_| SimError::Domain("bad origin_y".into()))?;
        let mut values = Vec::with_capacity(rows * cols);
        for line in lines {
            for tok in line.split_whitespace() {
                let v: f64 = tok
                    .parse()
                    .map_err(|_| SimError::Domain(format!("bad intensity `{tok}`")))?;
                values.push(v);
            }
        }
        if values.len() != rows * cols {
            return Err(SimError::Domain(format!(
                "expected {} values, found {}",
                rows * cols,
                values.len()
            )));
        }
        if cell_cm <= 0.0 {
            return Err(SimError::Domain("cell size must be positive".into()));
        }
        Ok(GridField {
            rows,
            cols,
            cell_cm,
            origin: Vec2::new(ox, oy),
            values,
            bilinear,
        })
    }

    fn at(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }

    /// Evaluation clamps to the edge cells so the field is defined on the
    /// whole plane.
    fn value(&self, pos: Vec2) -> f64 {
        let fx = (pos.x - self.origin.x) / self.cell_cm;
        let fy = (pos.y - self.origin.y) / self.cell_cm;
        if !self.bilinear {
            let col = (fx.round().max(0.0) as usize).min(self.cols - 1);
            let row = (fy.round().max(0.0) as usize).min(self.rows - 1);
            return self.at(row, col);
        }
        let cx = fx.clamp(0.0, (self.cols - 1) as f64);
        let cy = fy.clamp(0.0, (self.rows - 1) as f64);
        let c0 = cx.floor() as usize;
        let r0 = cy.floor() as usize;
        let c1 = (c0 + 1).min(self.cols - 1);
        let r1 = (r0 + 1).min(self.rows - 1);
        let tx = cx - c0 as f64;
        let ty = cy - r0 as f64;
        let top = self.at(r0, c0) * (1.0 - tx) + self.at(r0, c1) * tx;
        let bot = self.at(r1, c0) * (1.0 - tx) + self.at(r1, c1) * tx;
        top * (1.0 - ty) + bot * ty
    }
}

impl ScalarField {
    /// Noiseless field value at `pos`.
    pub fn value(&self, pos: Vec2) -> f64 {
        match self {
            ScalarField::RadialCone {
                center,
                slope,
                offset,
            } => offset + slope * pos.distance(*center),
            ScalarField::VShapeRamp {
                center,
                slope,
                offset,
            } => offset - slope * diagonal_distance(pos, *center),
            ScalarField::Grid(grid) => grid.value(pos),
        }
    }

    /// Field value plus zero-mean Gaussian noise of standard deviation
    /// `noise_sd`. `noise_sd = 0` is exact and consumes no randomness.
    pub fn sample<R: Rng + ?Sized>(&self, pos: Vec2, noise_sd: f64, rng: &mut R) -> Result<f64> {
        if !pos.is_finite() {
            return Err(SimError::Domain("non-finite sample position".into()));
        }
        debug_assert!(noise_sd >= 0.0);
        let v = self.value(pos);
        if noise_sd == 0.0 {
            return Ok(v);
        }
        let normal = Normal::new(0.0, noise_sd)
            .map_err(|e| SimError::Domain(format!("bad noise sd: {e}")))?;
        Ok(v + normal.sample(rng))
    }

    /// Area-average of the noiseless field over `region` by deterministic grid
    /// quadrature at cell size `resolution`.
    pub fn ground_truth_mean(&self, region: &ReferenceRegion, resolution: f64) -> Result<f64> {
        if resolution <= 0.0 {
            return Err(SimError::config("resolution", "must be positive"));
        }
        if resolution >= region.extent() {
            return Err(SimError::config(
                "resolution",
                "must be smaller than the region dimension",
            ));
        }
        let (center, half) = match *region {
            ReferenceRegion::Disk { center, radius } => (center, radius),
            ReferenceRegion::Square { center, side } => (center, side / 2.0),
        };
        let steps = (2.0 * half / resolution).ceil() as usize;
        let mut sum = 0.0;
        let mut count = 0u64;
        for i in 0..steps {
            let x = center.x - half + (i as f64 + 0.5) * 2.0 * half / steps as f64;
            for j in 0..steps {
                let y = center.y - half + (j as f64 + 0.5) * 2.0 * half / steps as f64;
                let p = Vec2::new(x, y);
                if region.contains(p) {
                    sum += self.value(p);
                    count += 1;
                }
            }
        }
        if count == 0 {
            return Err(SimError::config("resolution", "no quadrature points fell inside region"));
        }
        Ok(sum / count as f64)
    }

    /// The position-based estimation mapping: distance to the cone center, or
    /// perpendicular distance to the ramp diagonal.
    pub fn contour_coordinate(&self, pos: Vec2) -> Result<f64> {
        match self {
            ScalarField::RadialCone { center, .. } => Ok(pos.distance(*center)),
            ScalarField::VShapeRamp { center, .. } => Ok(diagonal_distance(pos, *center)),
            ScalarField::Grid(_) => Err(SimError::UnsupportedMapping(
                "grid fields have no closed-form contour mapping".into(),
            )),
        }
    }

    /// Inverts the field law to map an intensity onto a contour coordinate.
    pub fn contour_of_intensity(&self, z: f64) -> Result<f64> {
        match *self {
            ScalarField::RadialCone { slope, offset, .. } => Ok((z - offset) / slope),
            ScalarField::VShapeRamp { slope, offset, .. } => Ok((offset - z) / slope),
            ScalarField::Grid(_) => Err(SimError::UnsupportedMapping(
                "grid fields have no closed-form contour mapping".into(),
            )),
        }
    }

    pub fn supports_contour(&self) -> bool {
        !matches!(self, ScalarField::Grid(_))
    }
}

/// Perpendicular distance from `pos` to the 45-degree diagonal through `center`.
pub fn diagonal_distance(pos: Vec2, center: Vec2) -> f64 {
    signed_diagonal_distance(pos, center).abs()
}

/// Signed perpendicular distance; positive on the bottom-right side of the
/// diagonal, negative on the top-left.
pub fn signed_diagonal_distance(pos: Vec2, center: Vec2) -> f64 {
    ((pos.x - center.x) - (pos.y - center.y)) / SQRT2
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn cone(z0: f64, k: f64) -> ScalarField {
        ScalarField::RadialCone {
            center: Vec2::ZERO,
            slope: k,
            offset: z0,
        }
    }

    #[test]
    fn cone_value_at_center_is_offset() {
        assert_eq!(cone(0.0, 1.0).value(Vec2::ZERO), 0.0);
        assert_eq!(cone(7.0, 2.0).value(Vec2::ZERO), 7.0);
    }

    #[test]
    fn cone_value_pythagorean() {
        let mut rng = rand::rng();
        let v = cone(0.0, 1.0)
            .sample(Vec2::new(3.0, 4.0), 0.0, &mut rng)
            .unwrap();
        assert_relative_eq!(v, 5.0);
    }

    #[test]
    fn ramp_value_on_diagonal_is_offset() {
        let f = ScalarField::VShapeRamp {
            center: Vec2::ZERO,
            slope: 1.0,
            offset: 10.0,
        };
        assert_relative_eq!(f.value(Vec2::new(3.0, 3.0)), 10.0);
        assert_relative_eq!(f.value(Vec2::new(-2.5, -2.5)), 10.0);
    }

    #[test]
    fn sample_rejects_non_finite_pos() {
        let mut rng = rand::rng();
        let r = cone(0.0, 1.0).sample(Vec2::new(f64::NAN, 0.0), 0.1, &mut rng);
        assert!(r.is_err());
    }

    #[test]
    fn ground_truth_cone_over_disk_is_two_thirds_radius() {
        let f = cone(0.0, 1.0);
        let region = ReferenceRegion::Disk {
            center: Vec2::ZERO,
            radius: 30.0,
        };
        let gt = f.ground_truth_mean(&region, 0.05).unwrap();
        assert_relative_eq!(gt, 20.0, max_relative = 1e-3);
    }

    #[test]
    fn ground_truth_constant_field() {
        let f = cone(4.5, 0.0);
        let region = ReferenceRegion::Square {
            center: Vec2::new(3.0, -2.0),
            side: 10.0,
        };
        assert_relative_eq!(f.ground_truth_mean(&region, 0.5).unwrap(), 4.5);
    }

    #[test]
    fn ground_truth_rejects_coarse_resolution() {
        let f = cone(0.0, 1.0);
        let region = ReferenceRegion::Square {
            center: Vec2::ZERO,
            side: 10.0,
        };
        assert!(f.ground_truth_mean(&region, 10.0).is_err());
        assert!(f.ground_truth_mean(&region, 0.0).is_err());
    }

    #[test]
    fn ground_truth_translation_invariant() {
        let shift = Vec2::new(17.0, -4.0);
        let f0 = cone(1.0, 0.7);
        let f1 = ScalarField::RadialCone {
            center: shift,
            slope: 0.7,
            offset: 1.0,
        };
        let r0 = ReferenceRegion::Disk {
            center: Vec2::ZERO,
            radius: 12.0,
        };
        let r1 = ReferenceRegion::Disk {
            center: shift,
            radius: 12.0,
        };
        let a = f0.ground_truth_mean(&r0, 0.1).unwrap();
        let b = f1.ground_truth_mean(&r1, 0.1).unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-12);
    }

    #[test]
    fn contour_coordinate_cone() {
        let f = cone(0.0, 1.0);
        assert_eq!(f.contour_coordinate(Vec2::ZERO).unwrap(), 0.0);
        assert_relative_eq!(f.contour_coordinate(Vec2::new(3.0, 4.0)).unwrap(), 5.0);
    }

    #[test]
    fn contour_coordinate_ramp_point_to_line() {
        let f = ScalarField::VShapeRamp {
            center: Vec2::ZERO,
            slope: 1.0,
            offset: 0.0,
        };
        let d = f.contour_coordinate(Vec2::new(1.0, 0.0)).unwrap();
        assert_relative_eq!(d, std::f64::consts::SQRT_2 / 2.0);
    }

    #[test]
    fn contour_coordinate_grid_unsupported() {
        let g = ScalarField::Grid(GridField {
            rows: 2,
            cols: 2,
            cell_cm: 1.0,
            origin: Vec2::ZERO,
            values: vec![0.0; 4],
            bilinear: false,
        });
        assert!(g.contour_coordinate(Vec2::ZERO).is_err());
        assert!(g.contour_of_intensity(1.0).is_err());
    }

    #[test]
    fn field_mapping_consistency_cone() {
        let f = cone(2.0, 1.5);
        for &(x, y) in &[(0.0, 0.0), (3.0, 4.0), (-7.2, 1.1), (100.0, -40.0)] {
            let p = Vec2::new(x, y);
            let via_map = 2.0 + 1.5 * f.contour_coordinate(p).unwrap();
            assert_relative_eq!(f.value(p), via_map, max_relative = 1e-12);
        }
    }

    #[test]
    fn grid_parse_and_eval() {
        let text = "2 2 1.0 0.0 0.0\n1.0 2.0\n3.0 4.0\n";
        let g = GridField::parse(text, true).unwrap();
        assert_eq!(g.rows, 2);
        let f = ScalarField::Grid(g);
        assert_relative_eq!(f.value(Vec2::new(0.0, 0.0)), 1.0);
        assert_relative_eq!(f.value(Vec2::new(0.5, 0.5)), 2.5);
        // clamped outside
        assert_relative_eq!(f.value(Vec2::new(-5.0, -5.0)), 1.0);
    }

    #[test]
    fn grid_parse_rejects_bad_shape() {
        assert!(GridField::parse("2 2 1.0 0 0\n1 2 3\n", false).is_err());
        assert!(GridField::parse("", false).is_err());
    }
}
