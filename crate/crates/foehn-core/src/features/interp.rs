//! Bilinear interpolation on a regular lat/lon grid and day-of-year harmonics.

use chrono::{DateTime, Utc};

use crate::data_io::GridSpec;
use crate::time::fractional_day_of_year;
use crate::{Error, Result};

/// Bilinear interpolation of a 2-D slice (nlat x nlon, lat-major) at a point
/// inside the grid bounding box.
pub fn bilinear(grid: &GridSpec, slice: &[f64], lat: f64, lon: f64) -> Result<f64> {
    let fi = (lat - grid.lat0) / grid.dlat;
    let fj = (lon - grid.lon0) / grid.dlon;
    if fi < 0.0 || fj < 0.0 || fi > (grid.nlat - 1) as f64 || fj > (grid.nlon - 1) as f64 {
        return Err(Error::Range(format!(
            "point ({lat}, {lon}) outside grid bounding box"
        )));
    }
    // points on the top/right edge use the last interior cell with weight 1
    let i = (fi.floor() as usize).min(grid.nlat - 2);
    let j = (fj.floor() as usize).min(grid.nlon - 2);
    let u = fi - i as f64;
    let v = fj - j as f64;
    let at = |ii: usize, jj: usize| slice[ii * grid.nlon + jj];
    Ok(at(i, j) * (1.0 - u) * (1.0 - v)
        + at(i + 1, j) * u * (1.0 - v)
        + at(i, j + 1) * (1.0 - u) * v
        + at(i + 1, j + 1) * u * v)
}

/// Harmonic period in days.
pub const HARMONIC_PERIOD: f64 = 365.25;

/// First and second order day-of-year harmonics:
/// `[sin(2 pi d/P), cos(2 pi d/P), sin(4 pi d/P), cos(4 pi d/P)]`.
pub fn harmonics(t: DateTime<Utc>) -> [f64; 4] {
    harmonics_of_day(fractional_day_of_year(t))
}

pub fn harmonics_of_day(d: f64) -> [f64; 4] {
    let w = 2.0 * std::f64::consts::PI * d / HARMONIC_PERIOD;
    [w.sin(), w.cos(), (2.0 * w).sin(), (2.0 * w).cos()]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn grid() -> GridSpec {
        GridSpec {
            lat0: 46.0,
            lon0: 8.0,
            dlat: 1.0,
            dlon: 1.0,
            nlat: 2,
            nlon: 2,
        }
    }

    #[test]
    fn corner_identity() {
        let slice = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(bilinear(&grid(), &slice, 46.0, 8.0).unwrap(), 1.0);
        assert_eq!(bilinear(&grid(), &slice, 47.0, 9.0).unwrap(), 4.0);
    }

    #[test]
    fn cell_center_is_corner_mean() {
        let slice = [1.0, 2.0, 3.0, 4.0];
        assert_abs_diff_eq!(
            bilinear(&grid(), &slice, 46.5, 8.5).unwrap(),
            2.5,
            epsilon = 1e-14
        );
    }

    #[test]
    fn hand_evaluated_weights() {
        // corners (1,2,3,4), point at (u, v) = (0.25, 0.75) of the cell:
        // 1*(0.75)(0.25) + 3*(0.25)(0.25) + 2*(0.75)(0.75) + 4*(0.25)(0.75)
        let slice = [1.0, 2.0, 3.0, 4.0];
        let expect = 1.0 * 0.75 * 0.25 + 3.0 * 0.25 * 0.25 + 2.0 * 0.75 * 0.75 + 4.0 * 0.25 * 0.75;
        assert_abs_diff_eq!(
            bilinear(&grid(), &slice, 46.25, 8.75).unwrap(),
            expect,
            epsilon = 1e-14
        );
    }

    #[test]
    fn outside_box_rejected() {
        let slice = [1.0, 2.0, 3.0, 4.0];
        assert!(bilinear(&grid(), &slice, 45.9, 8.5).is_err());
        assert!(bilinear(&grid(), &slice, 46.5, 9.1).is_err());
    }

    #[test]
    fn harmonic_phases() {
        let h0 = harmonics_of_day(0.0);
        assert_abs_diff_eq!(h0[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(h0[1], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(h0[2], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(h0[3], 1.0, epsilon = 1e-12);
        let hh = harmonics_of_day(HARMONIC_PERIOD / 2.0);
        assert_abs_diff_eq!(hh[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(hh[1], -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(hh[2], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(hh[3], 1.0, epsilon = 1e-12);
        let hq = harmonics_of_day(HARMONIC_PERIOD / 4.0);
        assert_abs_diff_eq!(hq[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(hq[1], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(hq[2], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(hq[3], -1.0, epsilon = 1e-12);
    }
}
