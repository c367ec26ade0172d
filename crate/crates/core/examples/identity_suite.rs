//! Prints every exact propagator identity with its status, then a few
//! canonical expansions.

use direct_action::algebra::{canonical, combine, reflect, verify_identity_suite, ExactComplex, KernelName};

fn main() {
    let report = verify_identity_suite();
    for check in &report.checks {
        let status = if check.holds { "pass" } else { "FAIL" };
        println!("{status}  {:<44} {}", check.name, check.relation);
    }
    println!();

    for name in [KernelName::Feynman, KernelName::Dyson, KernelName::Bar, KernelName::One] {
        println!("{:<8} = {}", name.as_str(), canonical(name));
    }

    let bar = canonical(KernelName::Bar);
    let one = canonical(KernelName::One);
    let dyson = combine(&bar, &ExactComplex::one(), &one, &ExactComplex::imag(1, 2));
    println!("bar + (i/2)·one = {dyson}");
    println!("reflect(d_plus) = {}", reflect(&canonical(KernelName::DPlus)));

    if !report.all_hold() {
        std::process::exit(1);
    }
}
