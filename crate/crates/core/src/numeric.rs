//! Numerical evaluation of kernels for a massless scalar field on a
//! [`SpacetimeGrid`].
//!
//! The cut propagators are box-normalized mode sums over the nonzero modes,
//!
//! ```text
//! Δ+(t, x) = Σ_n 1/(2 ω_n L) · exp(-i(ω_n t - k_n x))
//! Δ-(t, x) = Σ_n 1/(2 ω_n L) · exp(+i(ω_n t - k_n x))
//! ```
//!
//! and every other kernel is built from them: `D+ = -iΔ+`, `D- = iΔ-`, the
//! retarded parts are `θ(t)·D±`, the advanced parts `-θ(-t)·D±`, with
//! `θ(0) = ½`. A [`KernelExpr`] is then evaluated as the matching linear
//! combination of the four basis fields.
//!
//! [`eval_feynman_momentum`] is an independent route to the Feynman kernel:
//! it never uses step functions, only the regularized momentum-space
//! denominator `1/(k² + iε)` summed over a frequency lattice.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::algebra::{canonical, KernelExpr, KernelName};
use crate::error::{Error, Result};
use crate::grid::{Mode, SpacetimeGrid};
use crate::report::format_float;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Sampled kernel `K(t, x)`, second argument at the origin.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelField {
    grid: SpacetimeGrid,
    /// Row-major: time index outer, position index inner.
    values: Vec<Complex64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FrequencySign {
    Positive,
    Negative,
}

impl KernelField {
    pub fn zeros(grid: &SpacetimeGrid) -> Self {
        Self {
            grid: grid.clone(),
            values: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn from_values(grid: &SpacetimeGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::invalid(format!(
                "field needs {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(Self {
            grid: grid.clone(),
            values,
        })
    }

    /// Samples `f(t, x)` at every grid point.
    pub fn from_fn<F>(grid: &SpacetimeGrid, f: F) -> Self
    where
        F: Fn(f64, f64) -> Complex64 + Sync,
    {
        let n = grid.num_modes();
        let values = (0..grid.num_times())
            .into_par_iter()
            .flat_map_iter(|i| {
                let t = grid.time(i);
                (0..n).map(move |s| (t, grid.position(s)))
            })
            .map(|(t, x)| f(t, x))
            .collect();
        Self {
            grid: grid.clone(),
            values,
        }
    }

    pub fn grid(&self) -> &SpacetimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn at(&self, i: usize, s: usize) -> Complex64 {
        self.values[self.grid.index(i, s)]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    pub fn scaled(&self, s: Complex64) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v * s).collect(),
        }
    }

    /// `Σ c_k · field_k` pointwise. All fields must share one grid.
    pub fn linear_combination(terms: &[(Complex64, &KernelField)]) -> Result<Self> {
        let (_, first) = terms
            .first()
            .ok_or_else(|| Error::invalid("empty linear combination"))?;
        let mut out = KernelField::zeros(&first.grid);
        for (c, f) in terms {
            first.grid.check_same(&f.grid, "linear combination")?;
            for (o, v) in out.values.iter_mut().zip(&f.values) {
                *o += c * v;
            }
        }
        Ok(out)
    }

    /// `K(t, x) -> K(-t, -x)`. Needs a time window symmetric about zero.
    pub fn reflected(&self) -> Result<Self> {
        if !self.grid.is_time_symmetric() {
            return Err(Error::invalid("reflection needs a time-symmetric grid"));
        }
        let g = &self.grid;
        let mut values = Vec::with_capacity(self.values.len());
        for i in 0..g.num_times() {
            for s in 0..g.num_modes() {
                values.push(self.at(g.reflected_time(i), g.reflected_position(s)));
            }
        }
        Ok(Self {
            grid: g.clone(),
            values,
        })
    }

    /// CSV with columns `t,x,re,im`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,x,re,im\n");
        for i in 0..self.grid.num_times() {
            let t = self.grid.time(i);
            for s in 0..self.grid.num_modes() {
                let v = self.at(i, s);
                let _ = writeln!(
                    out,
                    "{},{},{},{}",
                    format_float(t),
                    format_float(self.grid.position(s)),
                    format_float(v.re),
                    format_float(v.im)
                );
            }
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.to_csv().as_bytes())?;
        Ok(())
    }
}

fn mode_weight(grid: &SpacetimeGrid, m: &Mode) -> f64 {
    1.0 / (2.0 * m.omega * grid.spatial_extent())
}

/// `θ(t)` with `θ(0) = ½`; `|t| <= tol` counts as zero.
fn step(t: f64, tol: f64) -> f64 {
    if t > tol {
        1.0
    } else if t < -tol {
        0.0
    } else {
        0.5
    }
}

/// Both cut propagators at every grid point, from one pass over the modes.
fn cut_fields(grid: &SpacetimeGrid) -> (Vec<Complex64>, Vec<Complex64>) {
    let modes: Vec<Mode> = grid.modes().collect();
    let n = grid.num_modes();
    // exp(i k x_s) per mode, per position.
    let spatial: Vec<Vec<Complex64>> = modes
        .iter()
        .map(|m| grid.positions().map(|x| Complex64::from_polar(1.0, m.k * x)).collect())
        .collect();
    let rows: Vec<(Vec<Complex64>, Vec<Complex64>)> = (0..grid.num_times())
        .into_par_iter()
        .map(|i| {
            let t = grid.time(i);
            let mut plus = vec![Complex64::new(0.0, 0.0); n];
            let mut minus = vec![Complex64::new(0.0, 0.0); n];
            for (m, e) in modes.iter().zip(&spatial) {
                let c = mode_weight(grid, m);
                let p = Complex64::from_polar(c, -m.omega * t);
                let q = Complex64::from_polar(c, m.omega * t);
                for s in 0..n {
                    plus[s] += p * e[s];
                    minus[s] += q * e[s].conj();
                }
            }
            (plus, minus)
        })
        .collect();
    let mut plus = Vec::with_capacity(grid.len());
    let mut minus = Vec::with_capacity(grid.len());
    for (p, q) in rows {
        plus.extend(p);
        minus.extend(q);
    }
    (plus, minus)
}

/// `Δ+` or `Δ-` sampled on the grid.
pub fn eval_cut_propagator(sign: FrequencySign, grid: &SpacetimeGrid) -> KernelField {
    let (plus, minus) = cut_fields(grid);
    let values = match sign {
        FrequencySign::Positive => plus,
        FrequencySign::Negative => minus,
    };
    KernelField {
        grid: grid.clone(),
        values,
    }
}

fn assemble(coeffs: [Complex64; 4], t: f64, tol: f64, delta_plus: Complex64, delta_minus: Complex64) -> Complex64 {
    let d_plus = -I * delta_plus;
    let d_minus = I * delta_minus;
    let mut v = Complex64::new(0.0, 0.0);
    let ret = step(t, tol);
    let adv = step(-t, tol);
    // Order matches BasisKernel::ALL: R+, R-, A+, A-.
    if ret != 0.0 {
        v += coeffs[0] * (ret * d_plus) + coeffs[1] * (ret * d_minus);
    }
    if adv != 0.0 {
        v -= coeffs[2] * (adv * d_plus) + coeffs[3] * (adv * d_minus);
    }
    v
}

/// Evaluates a kernel expression on every grid point.
pub fn eval_kernel(expr: &KernelExpr, grid: &SpacetimeGrid) -> KernelField {
    let coeffs = expr.to_complex64();
    let (plus, minus) = cut_fields(grid);
    let tol = 1e-9 * grid.dt();
    let n = grid.num_modes();
    let values = (0..grid.len())
        .map(|idx| assemble(coeffs, grid.time(idx / n), tol, plus[idx], minus[idx]))
        .collect();
    KernelField {
        grid: grid.clone(),
        values,
    }
}

pub fn eval_named(name: KernelName, grid: &SpacetimeGrid) -> KernelField {
    eval_kernel(&canonical(name), grid)
}

/// Cut propagator at an arbitrary point `(t, x)`, using the grid's modes.
pub fn cut_propagator_at(sign: FrequencySign, grid: &SpacetimeGrid, t: f64, x: f64) -> Complex64 {
    let s = match sign {
        FrequencySign::Positive => 1.0,
        FrequencySign::Negative => -1.0,
    };
    grid.modes()
        .map(|m| Complex64::from_polar(mode_weight(grid, &m), -s * (m.omega * t - m.k * x)))
        .sum()
}

/// Kernel expression at an arbitrary point `(t, x)`.
pub fn evaluate_at(expr: &KernelExpr, grid: &SpacetimeGrid, t: f64, x: f64) -> Complex64 {
    let plus = cut_propagator_at(FrequencySign::Positive, grid, t, x);
    let minus = cut_propagator_at(FrequencySign::Negative, grid, t, x);
    assemble(expr.to_complex64(), t, 1e-12, plus, minus)
}

/// Uniform frequency lattice `k0_m = m·spacing`, `m ∈ ℤ`, used by the
/// momentum-space route. Summing over the whole lattice makes the result
/// periodic in time with period `2π/spacing`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrequencyLattice {
    pub spacing: f64,
}

impl FrequencyLattice {
    /// Time period of the lattice sum.
    pub fn period(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.spacing
    }

    /// Lattice refined together with `epsilon`: the period is long enough
    /// that periodic images of every mode, damped at rate `≈ ε/(2ω)`, are
    /// suppressed by `e^-40` over the grid's time window.
    pub fn for_epsilon(grid: &SpacetimeGrid, epsilon: f64) -> Self {
        let t_extent = grid.t_min().abs().max(grid.t_max().abs());
        let omega_max = grid.modes().map(|m| m.omega).fold(0.0, f64::max);
        let period = 2.0 * t_extent + 80.0 * omega_max / epsilon;
        Self {
            spacing: 2.0 * std::f64::consts::PI / period,
        }
    }
}

/// Time dependence of one spatial mode of the momentum-space Feynman kernel:
///
/// ```text
/// g(t) = (spacing/2π) Σ_m exp(-i k0_m t) / (k0_m² - ω² + iε)
/// ```
///
/// summed over the full lattice. The sum is carried out in closed form by
/// partial fractions over the two poles `k0 = ±Ω`, `Ω = sqrt(ω² - iε)`
/// (`Im Ω < 0`), valid for `|t| <= period`.
pub fn feynman_mode_function(omega: f64, epsilon: f64, lattice: FrequencyLattice, t: f64) -> Complex64 {
    let big_omega = Complex64::new(omega * omega, -epsilon).sqrt();
    let period = lattice.period();
    let s = t.abs();
    let decay = |tau: f64| (-I * big_omega * tau).exp();
    -I / (2.0 * big_omega) * (decay(s) + decay(period - s)) / (1.0 - decay(period))
}

/// Feynman kernel from the regularized momentum sum over `1/(k² + iε)`,
/// `k² = k0² - k_n²`, on the lattice chosen by
/// [`FrequencyLattice::for_epsilon`].
pub fn eval_feynman_momentum(grid: &SpacetimeGrid, epsilon: f64) -> Result<KernelField> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::invalid(format!("epsilon must be positive, got {epsilon}")));
    }
    eval_feynman_momentum_with(grid, epsilon, FrequencyLattice::for_epsilon(grid, epsilon))
}

pub fn eval_feynman_momentum_with(
    grid: &SpacetimeGrid,
    epsilon: f64,
    lattice: FrequencyLattice,
) -> Result<KernelField> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::invalid(format!("epsilon must be positive, got {epsilon}")));
    }
    let t_extent = grid.t_min().abs().max(grid.t_max().abs());
    if lattice.period() < 2.0 * t_extent {
        return Err(Error::invalid("frequency lattice period is shorter than the time window"));
    }
    let inv_l = 1.0 / grid.spatial_extent();
    let modes: Vec<Mode> = grid.modes().collect();
    Ok(KernelField::from_fn(grid, |t, x| {
        modes
            .iter()
            .map(|m| {
                Complex64::from_polar(inv_l, m.k * x) * feynman_mode_function(m.omega, epsilon, lattice, t)
            })
            .sum()
    }))
}

/// `max|a - b| / max|a|`; zero when both fields vanish.
pub fn residual(a: &KernelField, b: &KernelField) -> Result<f64> {
    a.grid.check_same(&b.grid, "residual")?;
    let diff = a
        .values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max);
    let scale = a.max_abs();
    Ok(if diff == 0.0 {
        0.0
    } else if scale == 0.0 {
        f64::INFINITY
    } else {
        diff / scale
    })
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct ConvergencePoint {
    pub epsilon: f64,
    pub lattice_spacing: f64,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct ConvergenceStudy {
    pub points: Vec<ConvergencePoint>,
    /// Least-squares slope of `log residual` against `log ε`.
    pub order: f64,
}

impl ConvergenceStudy {
    pub fn is_monotone_decreasing(&self) -> bool {
        self.points.windows(2).all(|w| w[1].residual < w[0].residual)
    }
}

/// Residual of the momentum-space Feynman kernel against the step-function
/// construction, for each `ε` in `schedule` with the lattice refined jointly.
pub fn feynman_convergence(grid: &SpacetimeGrid, schedule: &[f64]) -> Result<ConvergenceStudy> {
    let reference = eval_named(KernelName::Feynman, grid);
    let mut points = Vec::with_capacity(schedule.len());
    for &epsilon in schedule {
        let lattice = FrequencyLattice::for_epsilon(grid, epsilon);
        let field = eval_feynman_momentum_with(grid, epsilon, lattice)?;
        points.push(ConvergencePoint {
            epsilon,
            lattice_spacing: lattice.spacing,
            residual: residual(&reference, &field)?,
        });
    }
    let order = log_log_slope(&points);
    Ok(ConvergenceStudy { points, order })
}

fn log_log_slope(points: &[ConvergencePoint]) -> f64 {
    if points.len() < 2 {
        return f64::NAN;
    }
    let xs: Vec<f64> = points.iter().map(|p| p.epsilon.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.residual.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{combine, ExactComplex};

    fn small_grid() -> SpacetimeGrid {
        SpacetimeGrid::new(2.0 * std::f64::consts::PI, 16, -2.0, 2.0, 33).unwrap()
    }

    #[test]
    fn delta_plus_at_origin_is_mode_sum() {
        let g = SpacetimeGrid::default_grid();
        let field = eval_cut_propagator(FrequencySign::Positive, &g);
        let oracle: f64 = (-31i64..=32)
            .filter(|&n| n != 0)
            .map(|n| 1.0 / (2.0 * (n as f64).abs() * 2.0 * std::f64::consts::PI))
            .sum();
        let v = field.at(64, 32);
        assert!((v.re - oracle).abs() < 1e-13 * oracle);
        assert!(v.im.abs() < 1e-13);
        assert!(oracle > 0.0);
    }

    #[test]
    fn delta_plus_is_parity_even_on_the_grid() {
        let g = SpacetimeGrid::default_grid();
        let f = eval_cut_propagator(FrequencySign::Positive, &g);
        for i in 0..g.num_times() {
            for s in 0..g.num_modes() {
                let d = (f.at(i, s) - f.at(i, g.reflected_position(s))).norm();
                assert!(d < 1e-12, "i={i} s={s} d={d}");
            }
        }
    }

    #[test]
    fn delta_minus_is_conjugate_of_delta_plus() {
        let g = small_grid();
        let p = eval_cut_propagator(FrequencySign::Positive, &g);
        let m = eval_cut_propagator(FrequencySign::Negative, &g);
        for (a, b) in p.values().iter().zip(m.values()) {
            assert!((a.conj() - b).norm() < 1e-14);
        }
    }

    #[test]
    fn zero_expression_gives_zero_field() {
        let g = small_grid();
        let f = eval_kernel(&KernelExpr::zero(), &g);
        assert!(f.values().iter().all(|v| *v == Complex64::new(0.0, 0.0)));
    }

    #[test]
    fn even_solution_is_sum_of_cut_propagators() {
        let g = SpacetimeGrid::default_grid();
        let one = eval_named(KernelName::One, &g);
        let sum = KernelField::linear_combination(&[
            (Complex64::new(1.0, 0.0), &eval_cut_propagator(FrequencySign::Positive, &g)),
            (Complex64::new(1.0, 0.0), &eval_cut_propagator(FrequencySign::Negative, &g)),
        ])
        .unwrap();
        assert!(residual(&one, &sum).unwrap() < 1e-13);
    }

    #[test]
    fn retarded_and_advanced_support() {
        let g = SpacetimeGrid::default_grid();
        let ret = eval_named(KernelName::Ret, &g);
        let adv = eval_named(KernelName::Adv, &g);
        for i in 0..g.num_times() {
            let t = g.time(i);
            for s in 0..g.num_modes() {
                if t < 0.0 {
                    assert_eq!(ret.at(i, s), Complex64::new(0.0, 0.0));
                }
                if t > 0.0 {
                    assert_eq!(adv.at(i, s), Complex64::new(0.0, 0.0));
                }
            }
        }
        assert!(ret.max_abs() > 0.0 && adv.max_abs() > 0.0);
    }

    #[test]
    fn ret_plus_adv_is_twice_bar() {
        let g = SpacetimeGrid::default_grid();
        let sum = KernelField::linear_combination(&[
            (Complex64::new(1.0, 0.0), &eval_named(KernelName::Ret, &g)),
            (Complex64::new(1.0, 0.0), &eval_named(KernelName::Adv, &g)),
        ])
        .unwrap();
        let bar2 = eval_named(KernelName::Bar, &g).scaled(Complex64::new(2.0, 0.0));
        assert!(residual(&bar2, &sum).unwrap() < 1e-13);
    }

    #[test]
    fn linearity_of_eval_kernel() {
        let g = small_grid();
        let a = canonical(KernelName::Feynman);
        let b = canonical(KernelName::DeltaMinus);
        let alpha = ExactComplex::from_ratios(3, 4, -1, 3);
        let beta = ExactComplex::from_ratios(-2, 1, 5, 7);
        let lhs = eval_kernel(&combine(&a, &alpha, &b, &beta), &g);
        let rhs = KernelField::linear_combination(&[
            (alpha.to_complex64(), &eval_kernel(&a, &g)),
            (beta.to_complex64(), &eval_kernel(&b, &g)),
        ])
        .unwrap();
        assert!(residual(&lhs, &rhs).unwrap() < 1e-13);
    }

    #[test]
    fn point_evaluation_matches_grid() {
        let g = small_grid();
        let expr = canonical(KernelName::Feynman);
        let f = eval_kernel(&expr, &g);
        for &(i, s) in &[(0usize, 0usize), (5, 3), (16, 8), (30, 15)] {
            let v = evaluate_at(&expr, &g, g.time(i), g.position(s));
            assert!((v - f.at(i, s)).norm() < 1e-13);
        }
    }

    #[test]
    fn residual_edge_cases() {
        let g = small_grid();
        let z = KernelField::zeros(&g);
        assert_eq!(residual(&z, &z).unwrap(), 0.0);
        let f = eval_named(KernelName::One, &g);
        assert_eq!(residual(&f, &f).unwrap(), 0.0);
        assert_eq!(residual(&z, &f).unwrap(), f64::INFINITY);
        let other = KernelField::zeros(&SpacetimeGrid::default_grid());
        assert!(matches!(residual(&z, &other), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn nonpositive_epsilon_is_rejected() {
        let g = small_grid();
        assert!(eval_feynman_momentum(&g, 0.0).is_err());
        assert!(eval_feynman_momentum(&g, -1e-3).is_err());
        assert!(eval_feynman_momentum(&g, f64::NAN).is_err());
    }

    #[test]
    fn mode_function_tends_to_continuum_form() {
        // For a long lattice period the images vanish and g(t) is the
        // single-pole result -i exp(-iΩ|t|)/(2Ω).
        let lattice = FrequencyLattice { spacing: 1e-4 };
        let (omega, eps, t): (f64, f64, f64) = (2.0, 1e-2, -0.7);
        let big = Complex64::new(omega * omega, -eps).sqrt();
        let expected = -I * (-I * big * t.abs()).exp() / (2.0 * big);
        let got = feynman_mode_function(omega, eps, lattice, t);
        assert!((got - expected).norm() < 1e-14);
    }

    #[test]
    fn csv_layout() {
        let g = SpacetimeGrid::new(1.0, 4, 0.0, 1.0, 2).unwrap();
        let csv = eval_named(KernelName::One, &g).to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "t,x,re,im");
        assert_eq!(lines.len(), 1 + g.len());
        assert_eq!(lines[1].split(',').count(), 4);
    }
}
