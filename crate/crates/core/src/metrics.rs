//! Quantitative observables: raster-union coverage area, the
//! trueness/precision/accuracy decomposition, and position-based estimation.

use serde::Serialize;

use crate::error::{Result, SimError};
use crate::field::{ReferenceRegion, ScalarField};
use crate::geom::Vec2;

/// Per-tick observables of a running scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricsRecord {
    /// Time in seconds (tick * dt).
    pub t: f64,
    pub coverage_cm2: f64,
    pub mean_degree: f64,
    pub giant_component: usize,
    /// Position-mapped errors (contour-coordinate domain, cm^2).
    pub trueness_error: f64,
    pub precision_error: f64,
    pub accuracy_error: f64,
    /// Estimate-domain errors (intensity^2), from the agents' internal
    /// estimates against the field-mean ground truth.
    pub est_trueness_error: f64,
    pub est_precision_error: f64,
    pub est_accuracy_error: f64,
    pub robots_in_region: usize,
}

/// Area of the union of disks of radius `r_cover` centered on `positions`,
/// rasterized at `cell` onto a grid anchored at the padded bounding-box
/// corner. A cell counts if its center lies in any disk.
pub fn coverage_area(positions: &[Vec2], r_cover: f64, cell: f64) -> f64 {
    debug_assert!(r_cover > 0.0 && cell > 0.0 && cell <= r_cover / 5.0 + 1e-12);
    if positions.is_empty() {
        return 0.0;
    }
    let min_x = positions.iter().map(|p| p.x).fold(f64::INFINITY, f64::min) - r_cover;
    let min_y = positions.iter().map(|p| p.y).fold(f64::INFINITY, f64::min) - r_cover;
    let max_x = positions.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max) + r_cover;
    let max_y = positions.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max) + r_cover;
    let cols = ((max_x - min_x) / cell).ceil() as usize + 1;
    let rows = ((max_y - min_y) / cell).ceil() as usize + 1;
    let mut covered = vec![false; rows * cols];
    let r2 = r_cover * r_cover;
    let reach = (r_cover / cell).ceil() as isize + 1;
    for p in positions {
        let ci = ((p.x - min_x) / cell).round() as isize;
        let cj = ((p.y - min_y) / cell).round() as isize;
        for dj in -reach..=reach {
            let j = cj + dj;
            if j < 0 || j as usize >= rows {
                continue;
            }
            let y = min_y + (j as f64 + 0.5) * cell;
            for di in -reach..=reach {
                let i = ci + di;
                if i < 0 || i as usize >= cols {
                    continue;
                }
                let x = min_x + (i as f64 + 0.5) * cell;
                let dx = x - p.x;
                let dy = y - p.y;
                if dx * dx + dy * dy <= r2 {
                    covered[j as usize * cols + i as usize] = true;
                }
            }
        }
    }
    covered.iter().filter(|&&c| c).count() as f64 * cell * cell
}

/// Trueness, precision and accuracy errors of a set of estimates against a
/// scalar ground truth: `E_T = (mean - gt)^2`, `E_P = mean((z_i - mean)^2)`,
/// `E_A = mean((z_i - gt)^2) = E_T + E_P`.
pub fn accuracy_errors(estimates: &[f64], ground_truth: f64) -> Result<(f64, f64, f64)> {
    if estimates.is_empty() {
        return Err(SimError::Domain("accuracy_errors on empty list".into()));
    }
    let n = estimates.len() as f64;
    let mean = estimates.iter().sum::<f64>() / n;
    let e_t = (mean - ground_truth).powi(2);
    let e_p = estimates.iter().map(|z| (z - mean).powi(2)).sum::<f64>() / n;
    let e_a = estimates
        .iter()
        .map(|z| (z - ground_truth).powi(2))
        .sum::<f64>()
        / n;
    Ok((e_t, e_p, e_a))
}

/// Position-based estimation: the contour coordinate of each robot.
pub fn positions_to_estimates(positions: &[Vec2], field: &ScalarField) -> Result<Vec<f64>> {
    positions
        .iter()
        .map(|&p| field.contour_coordinate(p))
        .collect()
}

/// Count of positions inside the region, boundary inclusive.
pub fn robots_in_region(positions: &[Vec2], region: &ReferenceRegion) -> usize {
    positions.iter().filter(|&&p| region.contains(p)).count()
}
