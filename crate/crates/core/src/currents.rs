//! Classical scalar sources and the current-kernel-current double integral.
//!
//! A [`Current`] is a real density `j(t, x)` sampled on a grid. Double
//! integrals use the trapezoid rule in time (half weight on the two window
//! edges) and the periodic rectangle rule in space, so a source that is
//! constant over the window integrates every on-shell phase `exp(-iω_n t)`
//! with `ω_n T ∈ 2πℤ` to exactly zero.
//!
//! Charge conservation is not imposed: it has no content for a scalar source.

use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Mode, SpacetimeGrid};
use crate::numeric::KernelField;
use crate::report::format_float;

/// How a current is generated. Serialized with a `kind` tag.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CurrentSpec {
    /// Unit impulse of strength `q` in the cell nearest `(t0, x0)`.
    PointEvent { q: f64, t0: f64, x0: f64 },
    /// `q·exp(-(t-t0)²/2σ_t²)·exp(-(x-x0)²/2σ_x²)`.
    GaussianPulse {
        q: f64,
        t0: f64,
        x0: f64,
        sigma_t: f64,
        sigma_x: f64,
    },
    /// `q·exp(-(x-x0)²/2σ_x²)·cos(ω0 t + phase)` over the whole window.
    OscillatingSource {
        q: f64,
        x0: f64,
        sigma_x: f64,
        omega0: f64,
        #[serde(default)]
        phase: f64,
    },
}

/// A current definition as it appears in scenario files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurrentDef {
    pub label: String,
    #[serde(flatten)]
    pub spec: CurrentSpec,
}

impl CurrentDef {
    pub fn build(&self, grid: &SpacetimeGrid) -> Result<Current> {
        make_current(&self.spec, grid, &self.label)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Current {
    grid: SpacetimeGrid,
    density: Vec<f64>,
    label: String,
}

impl Current {
    pub fn from_density(grid: &SpacetimeGrid, density: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        if density.len() != grid.len() {
            return Err(Error::invalid(format!(
                "density needs {} samples, got {}",
                grid.len(),
                density.len()
            )));
        }
        if density.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("density must be finite"));
        }
        Ok(Self {
            grid: grid.clone(),
            density,
            label: label.into(),
        })
    }

    pub fn zero(grid: &SpacetimeGrid, label: impl Into<String>) -> Self {
        Self {
            grid: grid.clone(),
            density: vec![0.0; grid.len()],
            label: label.into(),
        }
    }

    pub fn grid(&self) -> &SpacetimeGrid {
        &self.grid
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn at(&self, i: usize, s: usize) -> f64 {
        self.density[self.grid.index(i, s)]
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            grid: self.grid.clone(),
            density: self.density.iter().map(|v| v * factor).collect(),
            label: self.label.clone(),
        }
    }

    /// Density times the integration weight of each sample.
    pub fn weighted(&self) -> Vec<f64> {
        let g = &self.grid;
        let cell = g.dt() * g.dx();
        let n = g.num_modes();
        self.density
            .iter()
            .enumerate()
            .map(|(idx, v)| v * cell * g.time_weight(idx / n))
            .collect()
    }

    /// CSV with columns `t,x,density`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,x,density\n");
        for i in 0..self.grid.num_times() {
            for s in 0..self.grid.num_modes() {
                let _ = writeln!(
                    out,
                    "{},{},{}",
                    format_float(self.grid.time(i)),
                    format_float(self.grid.position(s)),
                    format_float(self.at(i, s))
                );
            }
        }
        out
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be positive, got {v}")))
    }
}

fn check_center(grid: &SpacetimeGrid, t0: Option<f64>, x0: f64) -> Result<()> {
    if let Some(t0) = t0 {
        if !(t0 >= grid.t_min() && t0 <= grid.t_max()) {
            return Err(Error::invalid(format!(
                "t0 = {t0} lies outside the time window [{}, {}]",
                grid.t_min(),
                grid.t_max()
            )));
        }
    }
    let half = grid.spatial_extent() / 2.0;
    if !(x0 >= -half && x0 <= half) {
        return Err(Error::invalid(format!("x0 = {x0} lies outside [-{half}, {half}]")));
    }
    Ok(())
}

/// Minimum-image separation on the periodic spatial axis.
fn periodic_offset(x: f64, x0: f64, length: f64) -> f64 {
    (x - x0 + length / 2.0).rem_euclid(length) - length / 2.0
}

pub fn make_current(spec: &CurrentSpec, grid: &SpacetimeGrid, label: &str) -> Result<Current> {
    let n = grid.num_modes();
    let length = grid.spatial_extent();
    let mut density = vec![0.0; grid.len()];
    match *spec {
        CurrentSpec::PointEvent { q, t0, x0 } => {
            if !q.is_finite() {
                return Err(Error::invalid("q must be finite"));
            }
            check_center(grid, Some(t0), x0)?;
            let i = ((t0 - grid.t_min()) / grid.dt()).round() as usize;
            let s = (((x0 + length / 2.0) / grid.dx()).round() as usize) % n;
            density[grid.index(i.min(grid.num_times() - 1), s)] = q / (grid.dt() * grid.dx());
        }
        CurrentSpec::GaussianPulse {
            q,
            t0,
            x0,
            sigma_t,
            sigma_x,
        } => {
            if !q.is_finite() {
                return Err(Error::invalid("q must be finite"));
            }
            positive("sigma_t", sigma_t)?;
            positive("sigma_x", sigma_x)?;
            check_center(grid, Some(t0), x0)?;
            for i in 0..grid.num_times() {
                let dt = grid.time(i) - t0;
                let ft = (-dt * dt / (2.0 * sigma_t * sigma_t)).exp();
                for s in 0..n {
                    let dx = periodic_offset(grid.position(s), x0, length);
                    density[grid.index(i, s)] = q * ft * (-dx * dx / (2.0 * sigma_x * sigma_x)).exp();
                }
            }
        }
        CurrentSpec::OscillatingSource {
            q,
            x0,
            sigma_x,
            omega0,
            phase,
        } => {
            if !(q.is_finite() && phase.is_finite()) {
                return Err(Error::invalid("q and phase must be finite"));
            }
            positive("sigma_x", sigma_x)?;
            check_center(grid, None, x0)?;
            let nyquist = PI / grid.dt();
            if !(omega0.is_finite() && (0.0..nyquist).contains(&omega0)) {
                return Err(Error::invalid(format!(
                    "omega0 = {omega0} is not representable on the grid (Nyquist {nyquist})"
                )));
            }
            for i in 0..grid.num_times() {
                let ft = (omega0 * grid.time(i) + phase).cos();
                for s in 0..n {
                    let dx = periodic_offset(grid.position(s), x0, length);
                    density[grid.index(i, s)] = q * ft * (-dx * dx / (2.0 * sigma_x * sigma_x)).exp();
                }
            }
        }
    }
    Current::from_density(grid, density, label)
}

/// Discrete Fourier image of a current,
/// `j̃(ω, k) = dt·dx·Σ j(t, x)·exp(i(ωt - kx))`, on the conjugate grid
/// `ω_m = 2πm/(T·dt)`, `k_n = 2πn/L`.
#[derive(Clone, Debug, PartialEq)]
pub struct CurrentSpectrum {
    num_frequencies: usize,
    num_wavenumbers: usize,
    frequency_step: f64,
    wavenumber_step: f64,
    /// Row-major in FFT order: frequency index outer.
    values: Vec<Complex64>,
}

fn signed_index(j: usize, len: usize) -> i64 {
    if j <= len / 2 {
        j as i64
    } else {
        j as i64 - len as i64
    }
}

impl CurrentSpectrum {
    pub fn num_frequencies(&self) -> usize {
        self.num_frequencies
    }

    pub fn num_wavenumbers(&self) -> usize {
        self.num_wavenumbers
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// Frequency and wavenumber of storage slot `(m, n)`.
    pub fn coordinates(&self, m: usize, n: usize) -> (f64, f64) {
        (
            signed_index(m, self.num_frequencies) as f64 * self.frequency_step,
            signed_index(n, self.num_wavenumbers) as f64 * self.wavenumber_step,
        )
    }

    pub fn at(&self, m: usize, n: usize) -> Complex64 {
        self.values[m * self.num_wavenumbers + n]
    }

    /// Slot holding `(-ω, -k)` for slot `(m, n)`.
    pub fn mirror(&self, m: usize, n: usize) -> (usize, usize) {
        (
            (self.num_frequencies - m) % self.num_frequencies,
            (self.num_wavenumbers - n) % self.num_wavenumbers,
        )
    }

    /// Largest `|j̃(-ω,-k) - conj j̃(ω,k)|` over the spectrum.
    pub fn hermitian_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for m in 0..self.num_frequencies {
            for n in 0..self.num_wavenumbers {
                let (mm, nn) = self.mirror(m, n);
                worst = worst.max((self.at(mm, nn) - self.at(m, n).conj()).norm());
            }
        }
        worst
    }

    /// `Σ|j̃|²` times the conjugate-grid measure `1/(T·dt·L)`.
    pub fn energy(&self) -> f64 {
        let span = 2.0 * PI / self.frequency_step;
        let length = 2.0 * PI / self.wavenumber_step;
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() / (span * length)
    }
}

pub fn spectrum(c: &Current) -> CurrentSpectrum {
    let g = &c.grid;
    let (rows, cols) = (g.num_times(), g.num_modes());
    let mut data: Vec<Complex64> = c.density.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    // exp(+iωt) along time, exp(-ikx) along space.
    fft2(&mut data, rows, cols, Direction::Inverse, Direction::Forward);
    let frequency_step = 2.0 * PI / (rows as f64 * g.dt());
    let wavenumber_step = 2.0 * PI / g.spatial_extent();
    let cell = g.dt() * g.dx();
    let x_first = g.position(0);
    for m in 0..rows {
        let omega = signed_index(m, rows) as f64 * frequency_step;
        for n in 0..cols {
            let k = signed_index(n, cols) as f64 * wavenumber_step;
            data[m * cols + n] *= Complex64::from_polar(cell, omega * g.t_min() - k * x_first);
        }
    }
    CurrentSpectrum {
        num_frequencies: rows,
        num_wavenumbers: cols,
        frequency_step,
        wavenumber_step,
        values: data,
    }
}

/// `Σ |j|² dt dx` over the grid samples (uniform weights, matching the DFT).
pub fn grid_energy(c: &Current) -> f64 {
    let g = &c.grid;
    c.density.iter().map(|v| v * v).sum::<f64>() * g.dt() * g.dx()
}

/// On-shell overlap `J_n = ∫ j(t, x)·exp(-i(ω_n t - k_n x))` for every
/// nonzero mode, with the same quadrature as [`bilinear`].
pub fn on_shell_amplitudes(c: &Current) -> Vec<(Mode, Complex64)> {
    let g = &c.grid;
    let w = c.weighted();
    let n = g.num_modes();
    g.modes()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|m| {
            let spatial: Vec<Complex64> = g.positions().map(|x| Complex64::from_polar(1.0, m.k * x)).collect();
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..g.num_times() {
                let row = &w[i * n..(i + 1) * n];
                let mut inner = Complex64::new(0.0, 0.0);
                for (v, e) in row.iter().zip(&spatial) {
                    inner += e * *v;
                }
                acc += inner * Complex64::from_polar(1.0, -m.omega * g.time(i));
            }
            (m, acc)
        })
        .collect()
}

fn check_pair(a: &Current, kernel: &KernelField, b: &Current) -> Result<()> {
    a.grid.check_same(&b.grid, "currents")?;
    a.grid
        .lag_grid()
        .check_same(kernel.grid(), "kernel must be sampled on the lag grid of the currents")
}

/// Discrete double integral `Σ_x Σ_y j_a(x)·K(x - y)·j_b(y)`.
///
/// The kernel must be sampled on `a.grid().lag_grid()`, which holds every
/// coordinate difference between two points of the current grid. Direct
/// `O(G²)` summation; rows run in parallel and are reduced in a fixed order.
pub fn bilinear(a: &Current, kernel: &KernelField, b: &Current) -> Result<Complex64> {
    check_pair(a, kernel, b)?;
    let g = &a.grid;
    let (t, n) = (g.num_times(), g.num_modes());
    let wa = a.weighted();
    let wb = b.weighted();
    let k = kernel.values();
    let rows: Vec<Complex64> = (0..t)
        .into_par_iter()
        .map(|ia| {
            let mut acc = Complex64::new(0.0, 0.0);
            let mut perm = vec![0usize; n];
            for sa in 0..n {
                let x = wa[ia * n + sa];
                if x == 0.0 {
                    continue;
                }
                for (sb, p) in perm.iter_mut().enumerate() {
                    *p = (sa + n + n / 2 - sb) % n;
                }
                let mut inner = Complex64::new(0.0, 0.0);
                for ib in 0..t {
                    let krow = &k[(ia + t - 1 - ib) * n..(ia + t - ib) * n];
                    let brow = &wb[ib * n..(ib + 1) * n];
                    for (y, p) in brow.iter().zip(&perm) {
                        inner += krow[*p] * *y;
                    }
                }
                acc += inner * x;
            }
            acc
        })
        .collect();
    Ok(rows.iter().sum())
}

/// Same sum as [`bilinear`], through an FFT cross-correlation of the two
/// currents (time zero-padded, space periodic).
pub fn bilinear_fast(a: &Current, kernel: &KernelField, b: &Current) -> Result<Complex64> {
    check_pair(a, kernel, b)?;
    let g = &a.grid;
    let (t, n) = (g.num_times(), g.num_modes());
    let padded = 2 * t - 1;
    let load = |w: Vec<f64>| {
        let mut data = vec![Complex64::new(0.0, 0.0); padded * n];
        for (dst, v) in data.iter_mut().zip(w) {
            *dst = Complex64::new(v, 0.0);
        }
        data
    };
    let mut fa = load(a.weighted());
    let mut fb = load(b.weighted());
    fft2(&mut fa, padded, n, Direction::Forward, Direction::Forward);
    fft2(&mut fb, padded, n, Direction::Forward, Direction::Forward);
    let mut corr: Vec<Complex64> = fa.iter().zip(&fb).map(|(x, y)| x * y.conj()).collect();
    fft2(&mut corr, padded, n, Direction::Inverse, Direction::Inverse);
    let norm = (padded * n) as f64;
    // corr[τ mod P][r mod N] = Σ wa(i + τ, s + r)·wb(i, s)
    let k = kernel.values();
    let mut total = Complex64::new(0.0, 0.0);
    for lag in 0..padded {
        let tau = lag as i64 - (t as i64 - 1);
        let slot = tau.rem_euclid(padded as i64) as usize;
        for r in 0..n {
            let ks = (r + n / 2) % n;
            total += k[lag * n + ks] * corr[slot * n + r];
        }
    }
    Ok(total / norm)
}

#[derive(Clone, Copy)]
enum Direction {
    Forward,
    Inverse,
}

/// In-place unnormalized 2D FFT over a row-major `rows × cols` array.
fn fft2(data: &mut [Complex64], rows: usize, cols: usize, along_rows: Direction, along_cols: Direction) {
    let mut planner = FftPlanner::<f64>::new();
    let plan = |planner: &mut FftPlanner<f64>, len, dir| match dir {
        Direction::Forward => planner.plan_fft_forward(len),
        Direction::Inverse => planner.plan_fft_inverse(len),
    };
    // Space (contiguous rows).
    let fft_cols = plan(&mut planner, cols, along_cols);
    for row in data.chunks_mut(cols) {
        fft_cols.process(row);
    }
    // Time (strided columns).
    let fft_rows = plan(&mut planner, rows, along_rows);
    let mut column = vec![Complex64::new(0.0, 0.0); rows];
    for c in 0..cols {
        for r in 0..rows {
            column[r] = data[r * cols + c];
        }
        fft_rows.process(&mut column);
        for r in 0..rows {
            data[r * cols + c] = column[r];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::KernelName;
    use crate::numeric::eval_named;

    fn small_grid() -> SpacetimeGrid {
        SpacetimeGrid::new(2.0 * PI, 16, -PI, PI, 33).unwrap()
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        let g = small_grid();
        let bad = [
            CurrentSpec::PointEvent { q: 1.0, t0: 5.0, x0: 0.0 },
            CurrentSpec::PointEvent { q: 1.0, t0: 0.0, x0: 4.0 },
            CurrentSpec::GaussianPulse { q: 1.0, t0: 0.0, x0: 0.0, sigma_t: 0.0, sigma_x: 1.0 },
            CurrentSpec::GaussianPulse { q: 1.0, t0: 0.0, x0: 0.0, sigma_t: 1.0, sigma_x: -1.0 },
            CurrentSpec::OscillatingSource { q: 1.0, x0: 0.0, sigma_x: 0.5, omega0: 100.0, phase: 0.0 },
            CurrentSpec::OscillatingSource { q: 1.0, x0: 0.0, sigma_x: 0.5, omega0: -1.0, phase: 0.0 },
        ];
        for spec in bad {
            assert!(make_current(&spec, &g, "x").is_err(), "{spec:?}");
        }
    }

    #[test]
    fn static_source_is_constant_in_time() {
        let g = small_grid();
        let spec = CurrentSpec::OscillatingSource { q: 2.0, x0: 0.3, sigma_x: 0.5, omega0: 0.0, phase: 0.0 };
        let c = make_current(&spec, &g, "static").unwrap();
        for i in 1..g.num_times() {
            for s in 0..g.num_modes() {
                assert_eq!(c.at(i, s), c.at(0, s));
            }
        }
    }

    #[test]
    fn point_event_has_flat_spectrum_with_phase() {
        let g = small_grid();
        let (t0, x0) = (g.time(20), g.position(11));
        let c = make_current(&CurrentSpec::PointEvent { q: 1.0, t0, x0 }, &g, "p").unwrap();
        let spec = spectrum(&c);
        for m in 0..spec.num_frequencies() {
            for n in 0..spec.num_wavenumbers() {
                let (w, k) = spec.coordinates(m, n);
                let expected = Complex64::from_polar(1.0, w * t0 - k * x0);
                assert!((spec.at(m, n) - expected).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_current_has_zero_spectrum() {
        let g = small_grid();
        let spec = spectrum(&Current::zero(&g, "z"));
        assert!(spec.values().iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn bilinear_with_zero_kernel_vanishes() {
        let g = small_grid();
        let a = make_current(
            &CurrentSpec::GaussianPulse { q: 1.0, t0: 0.0, x0: 0.0, sigma_t: 0.5, sigma_x: 0.5 },
            &g,
            "a",
        )
        .unwrap();
        let z = KernelField::zeros(&g.lag_grid());
        assert_eq!(bilinear(&a, &z, &a).unwrap(), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn kernel_on_wrong_grid_is_rejected() {
        let g = small_grid();
        let a = Current::zero(&g, "a");
        let k = eval_named(KernelName::One, &g);
        assert!(matches!(bilinear(&a, &k, &a), Err(Error::GridMismatch(_))));
        assert!(matches!(bilinear_fast(&a, &k, &a), Err(Error::GridMismatch(_))));
        let other = Current::zero(&SpacetimeGrid::default_grid(), "b");
        let k = eval_named(KernelName::One, &g.lag_grid());
        assert!(bilinear(&a, &k, &other).is_err());
    }

    #[test]
    fn point_events_pick_out_kernel_value() {
        let g = small_grid();
        let a = make_current(&CurrentSpec::PointEvent { q: 1.0, t0: g.time(20), x0: g.position(3) }, &g, "a").unwrap();
        let b = make_current(&CurrentSpec::PointEvent { q: 1.0, t0: g.time(7), x0: g.position(12) }, &g, "b").unwrap();
        let lag = g.lag_grid();
        let k = eval_named(KernelName::Feynman, &lag);
        let got = bilinear(&a, &k, &b).unwrap();
        // x - y = (13 dt, -9 dx) -> lag indices (13 + 32, -9 + 8 mod 16)
        let expected = k.at(13 + 32, (16 - 9 + 8) % 16);
        assert!((got - expected).norm() < 1e-12 * expected.norm().max(1.0), "{got} vs {expected}");
    }
}
