//! First-order current-current action and its emission statistics.
//!
//! The action between two currents splits as
//!
//! ```text
//! ½∫ a D_F b = ½∫ a D̄ b - (i/2)·½∫ a D1 b = coulomb - (i/2)·radiative
//! ```
//!
//! The Coulomb part carries force through the time-symmetric kernel; the
//! radiative part comes from the on-shell kernel `D1`. For a single current
//! the radiative self-term is the mean photon number `n̄ = ½∫ j D1 j`, which
//! fixes the vacuum persistence `|S|² = e^-n̄` and the Poisson emission law.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::Serialize;

use crate::algebra::KernelName;
use crate::currents::{bilinear, on_shell_amplitudes, Current};
use crate::error::{Error, Result};
use crate::grid::{GridSpec, SpacetimeGrid};
use crate::numeric::{eval_named, KernelField};
use crate::streams::run_blocks;

/// Values below this (in absolute terms) are rounding noise for `n̄`.
pub const NEGATIVE_NOISE_FLOOR: f64 = 1e-12;

/// Inversion sampling is used below this mean; above it the `rand_distr`
/// sampler takes over.
pub const INVERSION_LIMIT: f64 = 30.0;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ActionSplit {
    pub coulomb_part: f64,
    pub radiative_part: f64,
    /// `coulomb_part - (i/2)·radiative_part`.
    pub total: Complex64,
}

impl ActionSplit {
    fn new(coulomb_part: f64, radiative_part: f64) -> Self {
        Self {
            coulomb_part,
            radiative_part,
            total: Complex64::new(coulomb_part, 0.0) - 0.5 * I * radiative_part,
        }
    }
}

/// Kernels sampled once on the lag grid of a current grid.
#[derive(Clone, Debug)]
pub struct Interaction {
    grid: SpacetimeGrid,
    bar: KernelField,
    one: KernelField,
    feynman: KernelField,
    d_plus: KernelField,
    d_minus: KernelField,
    delta_plus: KernelField,
}

impl Interaction {
    pub fn new(grid: &SpacetimeGrid) -> Self {
        let lag = grid.lag_grid();
        Self {
            grid: grid.clone(),
            bar: eval_named(KernelName::Bar, &lag),
            one: eval_named(KernelName::One, &lag),
            feynman: eval_named(KernelName::Feynman, &lag),
            d_plus: eval_named(KernelName::DPlus, &lag),
            d_minus: eval_named(KernelName::DMinus, &lag),
            delta_plus: eval_named(KernelName::DeltaPlus, &lag),
        }
    }

    pub fn grid(&self) -> &SpacetimeGrid {
        &self.grid
    }

    pub fn kernel(&self, name: KernelName) -> Option<&KernelField> {
        match name {
            KernelName::Bar => Some(&self.bar),
            KernelName::One => Some(&self.one),
            KernelName::Feynman => Some(&self.feynman),
            KernelName::DPlus => Some(&self.d_plus),
            KernelName::DMinus => Some(&self.d_minus),
            KernelName::DeltaPlus => Some(&self.delta_plus),
            _ => None,
        }
    }

    /// Coulomb and radiative parts of the ordered pair term `(a, b)`.
    pub fn action_split(&self, a: &Current, b: &Current) -> Result<ActionSplit> {
        let coulomb = 0.5 * bilinear(a, &self.bar, b)?.re;
        let radiative = 0.5 * bilinear(a, &self.one, b)?.re;
        Ok(ActionSplit::new(coulomb, radiative))
    }

    /// `½∫ a D_F b`, computed directly with the Feynman kernel.
    pub fn feynman_action(&self, a: &Current, b: &Current) -> Result<Complex64> {
        Ok(0.5 * bilinear(a, &self.feynman, b)?)
    }

    /// Positive-frequency form of the radiative action over a set of
    /// currents: `½ Σ_i Σ_j ∫ j_i D+ j_j`.
    pub fn positive_frequency_radiation(&self, currents: &[&Current]) -> Result<Complex64> {
        let mut total = Complex64::new(0.0, 0.0);
        for a in currents {
            for b in currents {
                total += bilinear(a, &self.d_plus, b)?;
            }
        }
        Ok(0.5 * total)
    }

    /// Radiative action written with both frequency parts:
    /// `¼ Σ_i Σ_j ∫ j_i (D+ - D-) j_j`. Equal to
    /// [`Interaction::positive_frequency_radiation`] because the double sum
    /// is symmetric and `D+(x - y) = -D-(y - x)`.
    pub fn symmetrized_radiation(&self, currents: &[&Current]) -> Result<Complex64> {
        let mut total = Complex64::new(0.0, 0.0);
        for a in currents {
            for b in currents {
                total += bilinear(a, &self.d_plus, b)? - bilinear(a, &self.d_minus, b)?;
            }
        }
        Ok(0.25 * total)
    }

    /// `∫ a Δ+ b`.
    pub fn cut_overlap(&self, a: &Current, b: &Current) -> Result<Complex64> {
        bilinear(a, &self.delta_plus, b)
    }

    /// `n̄ = ½∫ j D1 j`.
    pub fn mean_photon_number(&self, j: &Current) -> Result<f64> {
        let raw = 0.5 * bilinear(j, &self.one, j)?.re;
        clamp_mean(raw)
    }
}

fn clamp_mean(raw: f64) -> Result<f64> {
    if raw >= 0.0 {
        Ok(raw)
    } else if raw >= -NEGATIVE_NOISE_FLOOR {
        Ok(0.0)
    } else {
        Err(Error::Invariant(format!(
            "mean photon number came out negative ({raw:e}); kernel and grid are inconsistent"
        )))
    }
}

pub fn action_split(a: &Current, b: &Current) -> Result<ActionSplit> {
    a.grid().check_same(b.grid(), "action split")?;
    Interaction::new(a.grid()).action_split(a, b)
}

pub fn mean_photon_number(j: &Current) -> Result<f64> {
    Interaction::new(j.grid()).mean_photon_number(j)
}

/// `n̄` from on-shell amplitudes: `Σ_n |J_n|² / (2 ω_n L)`.
pub fn mean_photon_number_spectral(j: &Current) -> f64 {
    let length = j.grid().spatial_extent();
    on_shell_amplitudes(j)
        .iter()
        .map(|(m, amp)| amp.norm_sqr() / (2.0 * m.omega * length))
        .sum()
}

fn check_mean(mean: f64) -> Result<()> {
    if mean.is_finite() && mean >= 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("mean photon number must be >= 0, got {mean}")))
    }
}

/// Probability that no photon is emitted, `e^-n̄`.
pub fn persistence_probability(mean: f64) -> Result<f64> {
    check_mean(mean)?;
    Ok((-mean).exp())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PoissonPmf {
    pub mean: f64,
    /// `P(m)` for `m = 0..=M`.
    pub probabilities: Vec<f64>,
    /// Mass beyond `M`, `1 - Σ P(m)`.
    pub tail: f64,
}

impl PoissonPmf {
    /// `Σ_{m>=1} P(m)` over the stored range.
    pub fn emission_probability(&self) -> f64 {
        self.probabilities.iter().skip(1).sum()
    }

    pub fn total(&self) -> f64 {
        self.probabilities.iter().sum()
    }
}

fn ln_pmf(mean: f64, m: u64, ln_factorial: f64) -> f64 {
    -mean + m as f64 * mean.ln() - ln_factorial
}

/// Upper tail `Σ_{m>max} P(m)`, summed term by term.
fn upper_tail(mean: f64, max_count: u64) -> f64 {
    if mean == 0.0 {
        return 0.0;
    }
    let ln_fact: f64 = (1..=max_count + 1).map(|k| (k as f64).ln()).sum();
    let mut term = ln_pmf(mean, max_count + 1, ln_fact).exp();
    let mut m = max_count + 1;
    let mut sum = 0.0;
    while term > 0.0 && (term > 1e-18 * sum || (m as f64) < mean) {
        sum += term;
        m += 1;
        term *= mean / m as f64;
        if m > max_count + 100_000 {
            break;
        }
    }
    sum
}

/// `P(m) = e^-n̄ n̄^m / m!` for `m = 0..=max_count`, evaluated in log space.
pub fn poisson_pmf(mean: f64, max_count: u64) -> Result<PoissonPmf> {
    check_mean(mean)?;
    let mut probabilities = Vec::with_capacity(max_count as usize + 1);
    let mut ln_fact = 0.0;
    for m in 0..=max_count {
        if m > 0 {
            ln_fact += (m as f64).ln();
        }
        let p = if mean == 0.0 {
            if m == 0 {
                1.0
            } else {
                0.0
            }
        } else {
            ln_pmf(mean, m, ln_fact).exp()
        };
        probabilities.push(p);
    }
    Ok(PoissonPmf {
        mean,
        probabilities,
        tail: upper_tail(mean, max_count),
    })
}

/// Smallest `M` whose truncation tail is below `tail`.
pub fn truncation_for_tail(mean: f64, tail: f64) -> Result<u64> {
    check_mean(mean)?;
    if !(tail > 0.0) {
        return Err(Error::invalid("tail tolerance must be positive"));
    }
    let mut m = mean.ceil() as u64;
    while upper_tail(mean, m) >= tail {
        m += 1;
    }
    while m > 0 && upper_tail(mean, m - 1) < tail {
        m -= 1;
    }
    Ok(m)
}

/// One Poisson draw: sequential-search inversion for small means.
pub fn sample_poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean == 0.0 {
        return 0;
    }
    if mean >= INVERSION_LIMIT {
        return Poisson::new(mean).map(|d| d.sample(rng) as u64).unwrap_or(0);
    }
    let u: f64 = rng.random();
    let mut m = 0u64;
    let mut p = (-mean).exp();
    let mut cdf = p;
    while u >= cdf && m < 1000 {
        m += 1;
        p *= mean / m as f64;
        cdf += p;
    }
    m
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PhotonHistogram {
    pub trials: u64,
    pub seed: u64,
    /// `counts[m]` = number of trials that produced `m` photons.
    pub counts: Vec<u64>,
}

impl PhotonHistogram {
    pub fn sample_mean(&self) -> f64 {
        let total: u64 = self.counts.iter().enumerate().map(|(m, c)| m as u64 * c).sum();
        total as f64 / self.trials as f64
    }
}

fn merge_counts(into: &mut Vec<u64>, other: &[u64]) {
    if into.len() < other.len() {
        into.resize(other.len(), 0);
    }
    for (a, b) in into.iter_mut().zip(other) {
        *a += b;
    }
}

/// Draws `trials` photon counts from Poisson(`mean`). Deterministic in
/// `seed` and independent of the thread count.
pub fn sample_photon_counts(mean: f64, trials: u64, seed: u64) -> Result<PhotonHistogram> {
    check_mean(mean)?;
    if trials == 0 {
        return Err(Error::invalid("trials must be at least 1"));
    }
    let blocks = run_blocks(trials, seed, |rng, n| {
        let mut counts = Vec::new();
        for _ in 0..n {
            let m = sample_poisson(mean, rng) as usize;
            if m >= counts.len() {
                counts.resize(m + 1, 0);
            }
            counts[m] += 1;
        }
        counts
    });
    let mut counts = Vec::new();
    for b in &blocks {
        merge_counts(&mut counts, b);
    }
    Ok(PhotonHistogram { trials, seed, counts })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EmissionStats {
    pub mean_photons: f64,
    pub persistence: f64,
    pub emission_probability: f64,
    pub pmf: Vec<f64>,
    pub pmf_tail: f64,
    pub histogram: Vec<u64>,
    pub trials: u64,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
}

impl EmissionStats {
    pub fn compute(mean: f64, max_count: u64, trials: u64, seed: u64) -> Result<Self> {
        let pmf = poisson_pmf(mean, max_count)?;
        let hist = sample_photon_counts(mean, trials, seed)?;
        Ok(Self {
            mean_photons: mean,
            persistence: persistence_probability(mean)?,
            emission_probability: -(-mean).exp_m1(),
            pmf: pmf.probabilities,
            pmf_tail: pmf.tail,
            histogram: hist.counts,
            trials,
            seed,
            grid: None,
        })
    }

    pub fn with_grid(mut self, grid: GridSpec) -> Self {
        self.grid = Some(grid);
        self
    }
}
