//! Vacuum persistence and photon-count statistics for a Gaussian pulse.

use direct_action::currents::{make_current, CurrentSpec};
use direct_action::interaction::{mean_photon_number, persistence_probability, poisson_pmf, sample_photon_counts};
use direct_action::SpacetimeGrid;

fn main() -> direct_action::Result<()> {
    let grid = SpacetimeGrid::default_grid();
    for q in [1.0, 3.0, 6.0] {
        let j = make_current(&CurrentSpec::GaussianPulse { q, t0: 0.0, x0: 0.0, sigma_t: 0.4, sigma_x: 0.3 }, &grid, "pulse")?;
        let n = mean_photon_number(&j)?;
        let pmf = poisson_pmf(n, 40)?;
        let hist = sample_photon_counts(n, 100_000, 42)?;
        println!("q = {q}: n = {n:.5}, persistence = {:.5}, emission = {:.5}", persistence_probability(n)?, pmf.emission_probability());
        for (m, p) in pmf.probabilities.iter().enumerate().take(5) {
            let observed = hist.counts.get(m).copied().unwrap_or(0) as f64 / hist.trials as f64;
            println!("  m = {m}: pmf {p:.5}  sampled {observed:.5}");
        }
    }
    Ok(())
}
