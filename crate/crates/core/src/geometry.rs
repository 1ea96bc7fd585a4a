//! Linear-array probe and Cartesian imaging grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Linear array with elements centered on x = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeGeometry {
    pitch: f64,
    sound_speed: f64,
    element_x: Vec<f64>,
}

impl ProbeGeometry {
    pub fn new(n_elements: usize, pitch: f64, sound_speed: f64) -> Result<Self> {
        if n_elements == 0 {
            return Err(Error::invalid("probe needs at least one element"));
        }
        if !(pitch > 0.0 && pitch.is_finite()) {
            return Err(Error::invalid(format!(
                "pitch must be positive, got {pitch}"
            )));
        }
        if !(sound_speed > 0.0 && sound_speed.is_finite()) {
            return Err(Error::invalid(format!(
                "sound speed must be positive, got {sound_speed}"
            )));
        }
        let center = (n_elements as f64 - 1.0) / 2.0;
        let element_x = (0..n_elements)
            .map(|e| (e as f64 - center) * pitch)
            .collect();
        Ok(Self {
            pitch,
            sound_speed,
            element_x,
        })
    }

    pub fn n_elements(&self) -> usize {
        self.element_x.len()
    }

    pub fn pitch(&self) -> f64 {
        self.pitch
    }

    pub fn sound_speed(&self) -> f64 {
        self.sound_speed
    }

    pub fn element_x(&self) -> &[f64] {
        &self.element_x
    }

    /// Lateral extent covered by the elements, edge to edge.
    pub fn aperture(&self) -> f64 {
        self.n_elements() as f64 * self.pitch
    }
}

/// Uniform Cartesian grid. Pixel `p = iz * nx + ix`, rows are depth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImageGrid {
    pub x_min: f64,
    pub x_max: f64,
    pub z_min: f64,
    pub z_max: f64,
    pub nx: usize,
    pub nz: usize,
}

fn axis(min: f64, max: f64, n: usize, i: usize) -> f64 {
    if n == 1 {
        0.5 * (min + max)
    } else {
        min + (max - min) * i as f64 / (n - 1) as f64
    }
}

impl ImageGrid {
    pub fn new(
        x_min: f64,
        x_max: f64,
        z_min: f64,
        z_max: f64,
        nx: usize,
        nz: usize,
    ) -> Result<Self> {
        let grid = Self {
            x_min,
            x_max,
            z_min,
            z_max,
            nx,
            nz,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx == 0 || self.nz == 0 {
            return Err(Error::invalid("grid needs at least one pixel per axis"));
        }
        let finite = [self.x_min, self.x_max, self.z_min, self.z_max]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.z_min < 0.0 || self.x_max <= self.x_min || self.z_max <= self.z_min {
            return Err(Error::invalid(format!(
                "grid extents invalid: x [{}, {}], z [{}, {}]",
                self.x_min, self.x_max, self.z_min, self.z_max
            )));
        }
        Ok(())
    }

    pub fn n_pixels(&self) -> usize {
        self.nx * self.nz
    }

    pub fn x(&self, ix: usize) -> f64 {
        axis(self.x_min, self.x_max, self.nx, ix)
    }

    pub fn z(&self, iz: usize) -> f64 {
        axis(self.z_min, self.z_max, self.nz, iz)
    }

    /// Coordinates `(x, z)` of a flat pixel index.
    pub fn pixel(&self, p: usize) -> (f64, f64) {
        (self.x(p % self.nx), self.z(p / self.nx))
    }

    pub fn dx(&self) -> f64 {
        if self.nx > 1 {
            (self.x_max - self.x_min) / (self.nx - 1) as f64
        } else {
            self.x_max - self.x_min
        }
    }

    pub fn dz(&self) -> f64 {
        if self.nz > 1 {
            (self.z_max - self.z_min) / (self.nz - 1) as f64
        } else {
            self.z_max - self.z_min
        }
    }

    /// Nearest pixel `(ix, iz)` to a physical point, clamped to the grid.
    pub fn nearest(&self, x: f64, z: f64) -> (usize, usize) {
        let idx = |v: f64, min: f64, step: f64, n: usize| {
            if n == 1 {
                0
            } else {
                ((v - min) / step).round().clamp(0.0, (n - 1) as f64) as usize
            }
        };
        (
            idx(x, self.x_min, self.dx(), self.nx),
            idx(z, self.z_min, self.dz(), self.nz),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn elements_symmetric_and_increasing() {
        for n in [1, 2, 7, 32] {
            let probe = ProbeGeometry::new(n, 3e-4, 1540.0).unwrap();
            let xs = probe.element_x();
            assert!(xs.windows(2).all(|w| w[1] > w[0]));
            for (a, b) in xs.iter().zip(xs.iter().rev()) {
                assert!((a + b).abs() < 1e-18);
            }
        }
    }

    #[test]
    fn probe_rejects_bad_params() {
        assert!(ProbeGeometry::new(0, 3e-4, 1540.0).is_err());
        assert!(ProbeGeometry::new(4, 0.0, 1540.0).is_err());
        assert!(ProbeGeometry::new(4, 3e-4, -1.0).is_err());
    }

    #[test]
    fn grid_coordinates() {
        let grid = ImageGrid::new(-1.0, 1.0, 0.0, 4.0, 3, 5).unwrap();
        assert_eq!(grid.pixel(0), (-1.0, 0.0));
        assert_eq!(grid.pixel(4), (0.0, 1.0));
        assert_eq!(grid.pixel(14), (1.0, 4.0));
        assert_eq!(grid.nearest(0.1, 2.9), (1, 3));
        let single = ImageGrid::new(-1.0, 1.0, 1.0, 2.0, 1, 1).unwrap();
        assert_eq!(single.pixel(0), (0.0, 1.5));
    }

    #[test]
    fn grid_rejects_bad_extents() {
        assert!(ImageGrid::new(0.0, 1.0, -0.1, 1.0, 2, 2).is_err());
        assert!(ImageGrid::new(1.0, 1.0, 0.0, 1.0, 2, 2).is_err());
        assert!(ImageGrid::new(0.0, 1.0, 0.0, 1.0, 0, 2).is_err());
    }
}
