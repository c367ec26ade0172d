//! 1+1D spacetime lattice: periodic space of extent `L` with `N` samples and
//! a uniform, finite window of time samples.
//!
//! Momentum modes are `k_n = 2πn/L` for `n ∈ {-N/2+1, …, N/2}` with
//! `ω_n = |k_n|`. The zero mode is singular for a massless field and is
//! excluded from every mode sum, so a grid carries `N - 1` modes.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Serializable grid descriptor, as it appears in scenario and report files.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub spatial_extent: f64,
    pub num_modes: usize,
    pub t_min: f64,
    pub t_max: f64,
    pub time_samples: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        SpacetimeGrid::default_grid().spec()
    }
}

impl GridSpec {
    pub fn build(&self) -> Result<SpacetimeGrid> {
        SpacetimeGrid::new(
            self.spatial_extent,
            self.num_modes,
            self.t_min,
            self.t_max,
            self.time_samples,
        )
    }
}

/// A nonzero momentum mode.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mode {
    pub n: i64,
    pub k: f64,
    pub omega: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpacetimeGrid {
    spatial_extent: f64,
    num_modes: usize,
    t_min: f64,
    t_max: f64,
    dt: f64,
    time_samples: usize,
}

impl SpacetimeGrid {
    pub fn new(
        spatial_extent: f64,
        num_modes: usize,
        t_min: f64,
        t_max: f64,
        time_samples: usize,
    ) -> Result<Self> {
        if !(spatial_extent.is_finite() && spatial_extent > 0.0) {
            return Err(Error::invalid("spatial extent must be positive and finite"));
        }
        if num_modes < 4 || num_modes % 2 != 0 {
            return Err(Error::invalid(format!(
                "number of modes must be an even integer >= 4, got {num_modes}"
            )));
        }
        if time_samples < 2 {
            return Err(Error::invalid("at least two time samples are required"));
        }
        if !(t_min.is_finite() && t_max.is_finite() && t_max > t_min) {
            return Err(Error::invalid("time window must satisfy t_min < t_max"));
        }
        Ok(Self {
            spatial_extent,
            num_modes,
            t_min,
            t_max,
            dt: (t_max - t_min) / (time_samples - 1) as f64,
            time_samples,
        })
    }

    /// `L = 2π`, `N = 64`, 129 time samples on `[-π, π]`.
    pub fn default_grid() -> Self {
        Self::new(2.0 * PI, 64, -PI, PI, 129).expect("default grid is valid")
    }

    pub fn spec(&self) -> GridSpec {
        GridSpec {
            spatial_extent: self.spatial_extent,
            num_modes: self.num_modes,
            t_min: self.t_min,
            t_max: self.t_max(),
            time_samples: self.time_samples,
        }
    }

    pub fn spatial_extent(&self) -> f64 {
        self.spatial_extent
    }

    /// Number of spatial samples `N` (also the size of the momentum set,
    /// zero mode included).
    pub fn num_modes(&self) -> usize {
        self.num_modes
    }

    pub fn num_times(&self) -> usize {
        self.time_samples
    }

    pub fn len(&self) -> usize {
        self.time_samples * self.num_modes
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn dx(&self) -> f64 {
        self.spatial_extent / self.num_modes as f64
    }

    pub fn t_min(&self) -> f64 {
        self.t_min
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t_min + i as f64 * self.dt
    }

    /// `x_s = (s - N/2)·dx`, covering `[-L/2, L/2)`.
    pub fn position(&self, s: usize) -> f64 {
        (s as f64 - (self.num_modes / 2) as f64) * self.dx()
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.time_samples).map(|i| self.time(i))
    }

    pub fn positions(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.num_modes).map(|s| self.position(s))
    }

    /// Flat index of the point `(time i, position s)`.
    pub fn index(&self, i: usize, s: usize) -> usize {
        i * self.num_modes + s
    }

    /// Index of `-x_s` on the periodic lattice.
    pub fn reflected_position(&self, s: usize) -> usize {
        (self.num_modes - s) % self.num_modes
    }

    /// Index of `-t_i`; only meaningful on a symmetric time window.
    pub fn reflected_time(&self, i: usize) -> usize {
        self.time_samples - 1 - i
    }

    /// True when the time window is symmetric about `t = 0`.
    pub fn is_time_symmetric(&self) -> bool {
        (self.t_min + self.t_max()).abs() <= 1e-12 * self.t_max().abs().max(1.0)
    }

    pub fn modes(&self) -> impl Iterator<Item = Mode> + '_ {
        let half = (self.num_modes / 2) as i64;
        (-half + 1..=half).filter(|&n| n != 0).map(|n| self.mode(n))
    }

    pub fn num_nonzero_modes(&self) -> usize {
        self.num_modes - 1
    }

    pub fn mode(&self, n: i64) -> Mode {
        let k = 2.0 * PI * n as f64 / self.spatial_extent;
        Mode { n, k, omega: k.abs() }
    }

    pub fn has_mode(&self, n: i64) -> bool {
        let half = (self.num_modes / 2) as i64;
        n != 0 && n > -half && n <= half
    }

    /// Grid of coordinate differences `x - y` between points of this grid:
    /// same space, time lags `m·dt` for `|m| < T`.
    pub fn lag_grid(&self) -> SpacetimeGrid {
        let span = (self.time_samples - 1) as f64 * self.dt;
        SpacetimeGrid {
            spatial_extent: self.spatial_extent,
            num_modes: self.num_modes,
            t_min: -span,
            t_max: span,
            dt: self.dt,
            time_samples: 2 * self.time_samples - 1,
        }
    }

    /// Trapezoid weight of time sample `i` (½ at the two window edges).
    pub fn time_weight(&self, i: usize) -> f64 {
        if i == 0 || i + 1 == self.time_samples {
            0.5
        } else {
            1.0
        }
    }

    pub fn check_same(&self, other: &SpacetimeGrid, what: &str) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!("{what}: {:?} vs {:?}", self.spec(), other.spec())))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_layout() {
        let g = SpacetimeGrid::default_grid();
        assert_eq!(g.num_times(), 129);
        assert_eq!(g.num_nonzero_modes(), 63);
        assert_eq!(g.modes().count(), 63);
        assert_eq!(g.time(64), 0.0);
        assert!((g.t_max() - PI).abs() < 1e-15);
        assert_eq!(g.position(32), 0.0);
        assert!(g.is_time_symmetric());
        assert!(g.modes().all(|m| m.n != 0 && m.omega > 0.0));
        // L = 2π makes k_n = n.
        assert!(g.modes().all(|m| (m.k - m.n as f64).abs() < 1e-12));
    }

    #[test]
    fn reflections() {
        let g = SpacetimeGrid::default_grid();
        for s in 0..g.num_modes() {
            let r = g.reflected_position(s);
            let x = g.position(s);
            let xr = g.position(r);
            let wrapped = (x + xr).rem_euclid(g.spatial_extent());
            assert!(wrapped.abs() < 1e-12 || (wrapped - g.spatial_extent()).abs() < 1e-12);
        }
        for i in 0..g.num_times() {
            assert!((g.time(i) + g.time(g.reflected_time(i))).abs() < 1e-12);
        }
    }

    #[test]
    fn lag_grid_covers_differences() {
        let g = SpacetimeGrid::default_grid();
        let lag = g.lag_grid();
        assert_eq!(lag.num_times(), 257);
        assert_eq!(lag.time(128), 0.0);
        assert!((lag.t_min() + 2.0 * PI).abs() < 1e-12);
        assert!(lag.is_time_symmetric());
    }

    #[test]
    fn invalid_grids_are_rejected() {
        assert!(SpacetimeGrid::new(0.0, 64, -1.0, 1.0, 10).is_err());
        assert!(SpacetimeGrid::new(1.0, 3, -1.0, 1.0, 10).is_err());
        assert!(SpacetimeGrid::new(1.0, 2, -1.0, 1.0, 10).is_err());
        assert!(SpacetimeGrid::new(1.0, 8, 1.0, 1.0, 10).is_err());
        assert!(SpacetimeGrid::new(1.0, 8, -1.0, 1.0, 1).is_err());
        assert!(SpacetimeGrid::new(1.0, 8, -1.0, 1.0, 2).is_ok());
    }

    #[test]
    fn spec_round_trip() {
        let g = SpacetimeGrid::default_grid();
        assert_eq!(g.spec().build().unwrap(), g);
    }
}
