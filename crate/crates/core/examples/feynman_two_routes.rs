//! Compares the step-function Feynman kernel with the regularized
//! frequency-lattice sum as ε shrinks.

use direct_action::numeric::feynman_convergence;
use direct_action::SpacetimeGrid;

fn main() -> direct_action::Result<()> {
    let grid = SpacetimeGrid::default_grid();
    let study = feynman_convergence(&grid, &[1e-1, 3e-2, 1e-2, 3e-3, 1e-3])?;
    println!("{:>10} {:>16} {:>12}", "epsilon", "lattice spacing", "residual");
    for p in &study.points {
        println!("{:>10.0e} {:>16.3e} {:>12.3e}", p.epsilon, p.lattice_spacing, p.residual);
    }
    println!("observed order {:.3}, monotone: {}", study.order, study.is_monotone_decreasing());
    Ok(())
}
