//! A static charge only exchanges Coulomb action; the same envelope
//! oscillating at a mode frequency radiates.

use direct_action::currents::{make_current, CurrentSpec};
use direct_action::interaction::{mean_photon_number_spectral, Interaction};
use direct_action::SpacetimeGrid;

fn main() -> direct_action::Result<()> {
    let grid = SpacetimeGrid::default_grid();
    let interaction = Interaction::new(&grid);
    println!("{:>8} {:>14} {:>14} {:>14} {:>14}", "omega0", "coulomb", "radiative", "n", "n (spectral)");
    for omega0 in [0.0, 1.0, 2.0, 3.0, 4.5] {
        let spec = CurrentSpec::OscillatingSource { q: 1.0, x0: 0.0, sigma_x: 0.3, omega0, phase: 0.0 };
        let j = make_current(&spec, &grid, "source")?;
        let split = interaction.action_split(&j, &j)?;
        let n = interaction.mean_photon_number(&j)?;
        println!(
            "{omega0:>8.2} {:>14.6e} {:>14.6e} {n:>14.6e} {:>14.6e}",
            split.coulomb_part,
            split.radiative_part,
            mean_photon_number_spectral(&j)
        );
    }

    let a = make_current(&CurrentSpec::GaussianPulse { q: 1.0, t0: -0.5, x0: -1.0, sigma_t: 0.3, sigma_x: 0.3 }, &grid, "a")?;
    let b = make_current(&CurrentSpec::GaussianPulse { q: -1.0, t0: 0.5, x0: 1.0, sigma_t: 0.3, sigma_x: 0.3 }, &grid, "b")?;
    let pos = interaction.positive_frequency_radiation(&[&a, &b])?;
    let sym = interaction.symmetrized_radiation(&[&a, &b])?;
    println!("pulse pair radiation: positive-frequency {pos:.6e}, symmetrized {sym:.6e}");
    Ok(())
}
