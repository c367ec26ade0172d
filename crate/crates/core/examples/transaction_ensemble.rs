//! Runs gated transactions against three absorbers and checks that a
//! missing absorber blocks them.

use direct_action::transaction::{
    completeness_check, run_trials, Absorber, AbsorberSet, ModeWindow, OfferSpec, Phasing, PolarAmplitude,
    TransactionScenario,
};
use direct_action::SpacetimeGrid;

fn main() -> direct_action::Result<()> {
    let grid = SpacetimeGrid::default_grid();
    let absorbers = vec![
        Absorber { id: "left".into(), modes: ModeWindow::new(-31, -11), weight: 1.0 },
        Absorber { id: "centre".into(), modes: ModeWindow::new(-10, 10), weight: 1.0 },
        Absorber { id: "right".into(), modes: ModeWindow::new(11, 32), weight: 1.0 },
    ];
    let scenario = TransactionScenario {
        grid: grid.spec(),
        absorbers: absorbers.clone(),
        offer: OfferSpec::PerAbsorber(
            [0.5f64, 0.3, 0.2].iter().map(|p| PolarAmplitude { modulus: p.sqrt(), phase: 0.0 }).collect(),
        ),
        coupling: 0.3028,
        weight: 1.0,
        trials: 1_000_000,
        seed: 1,
        phasing: Phasing::Feynman,
        factorization_points: 100,
    };
    let report = run_trials(&scenario)?;
    println!(
        "NU rate {:.5} (gate {:.5}, 95% CI {:.5}..{:.5})",
        report.nu_rate, report.gate_probability, report.nu_rate_ci95[0], report.nu_rate_ci95[1]
    );
    for (id, f) in &report.winner_frequencies {
        println!("  {id:<7} {f:.5}  (Born {:.2})", report.born_probabilities[id]);
    }
    println!("factorization residual {:.2e}", report.factorization_residual);

    let partial = AbsorberSet::new(absorbers[..2].to_vec())?;
    println!("without `right`: {}", completeness_check(&partial, &grid));
    let mut blocked = scenario;
    blocked.absorbers.pop();
    if let Err(e) = run_trials(&blocked) {
        println!("refused: {e}");
    }
    Ok(())
}
