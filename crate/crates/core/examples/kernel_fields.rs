//! Samples a few kernels on the default grid, prints a slice through x = 0
//! and writes the Feynman kernel to `feynman.csv` in the temp directory.

use direct_action::algebra::KernelName;
use direct_action::numeric::{eval_named, residual, KernelField};
use direct_action::SpacetimeGrid;
use num_complex::Complex64;

fn main() -> direct_action::Result<()> {
    let grid = SpacetimeGrid::default_grid();
    let feynman = eval_named(KernelName::Feynman, &grid);
    let ret = eval_named(KernelName::Ret, &grid);
    let one = eval_named(KernelName::One, &grid);
    let bar = eval_named(KernelName::Bar, &grid);

    let centre = grid.num_modes() / 2;
    println!("{:>8} {:>24} {:>24} {:>12}", "t", "D_F(t, 0)", "D_ret(t, 0)", "D1(t, 0)");
    for i in (0..grid.num_times()).step_by(16) {
        let f = feynman.at(i, centre);
        println!(
            "{:>8.4} {:>11.5} {:+11.5}i {:>24.5} {:>12.5}",
            grid.time(i),
            f.re,
            f.im,
            ret.at(i, centre).re,
            one.at(i, centre).re
        );
    }

    let rebuilt = KernelField::linear_combination(&[(Complex64::new(1.0, 0.0), &bar), (Complex64::new(0.0, -0.5), &one)])?;
    println!("residual(D_F, bar - (i/2) one) = {:e}", residual(&feynman, &rebuilt)?);

    let path = std::env::temp_dir().join("feynman.csv");
    feynman.write_csv(&path)?;
    println!("wrote {}", path.display());
    Ok(())
}
