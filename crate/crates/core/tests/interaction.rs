use std::f64::consts::PI;

use direct_action::algebra::KernelName;
use direct_action::currents::{bilinear, make_current, Current, CurrentSpec};
use direct_action::interaction::{
    mean_photon_number, mean_photon_number_spectral, persistence_probability, poisson_pmf, sample_photon_counts,
    truncation_for_tail, EmissionStats, Interaction,
};
use direct_action::SpacetimeGrid;
use num_complex::Complex64;
use proptest::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn small_grid() -> SpacetimeGrid {
    SpacetimeGrid::new(2.0 * PI, 16, -PI, PI, 33).unwrap()
}

fn pulse(grid: &SpacetimeGrid, q: f64, t0: f64, x0: f64, s: f64) -> Current {
    make_current(&CurrentSpec::GaussianPulse { q, t0, x0, sigma_t: s, sigma_x: s }, grid, "pulse").unwrap()
}

fn oscillating(grid: &SpacetimeGrid, q: f64, omega0: f64) -> Current {
    make_current(&CurrentSpec::OscillatingSource { q, x0: 0.0, sigma_x: 0.4, omega0, phase: 0.0 }, grid, "osc").unwrap()
}

#[test]
fn identical_static_currents_only_exchange_coulomb_action() {
    let grid = SpacetimeGrid::default_grid();
    let j = oscillating(&grid, 1.0, 0.0);
    let split = Interaction::new(&grid).action_split(&j, &j).unwrap();
    assert!(split.radiative_part.abs() < 1e-12, "{}", split.radiative_part);
    assert!(split.coulomb_part.abs() > 1e-3);
}

#[test]
fn zero_current_gives_zero_everything() {
    let grid = small_grid();
    let zero = Current::zero(&grid, "zero");
    let a = pulse(&grid, 1.0, 0.0, 0.0, 0.4);
    let interaction = Interaction::new(&grid);
    let split = interaction.action_split(&zero, &a).unwrap();
    assert_eq!((split.coulomb_part, split.radiative_part), (0.0, 0.0));
    assert_eq!(interaction.positive_frequency_radiation(&[&zero]).unwrap(), Complex64::new(0.0, 0.0));
    assert_eq!(mean_photon_number(&zero).unwrap(), 0.0);
}

#[test]
fn single_current_positive_frequency_value_is_cut_overlap() {
    let grid = small_grid();
    let a = pulse(&grid, 1.2, 0.3, -0.4, 0.35);
    let interaction = Interaction::new(&grid);
    let direct = interaction.positive_frequency_radiation(&[&a]).unwrap();
    let via_cut = Complex64::new(0.0, -0.5) * interaction.cut_overlap(&a, &a).unwrap();
    assert!((direct - via_cut).norm() <= 1e-12 * direct.norm());
    // The cut overlap of a real current is real and nonnegative.
    let cut = interaction.cut_overlap(&a, &a).unwrap();
    assert!(cut.re > 0.0 && cut.im.abs() <= 1e-12 * cut.re);
}

#[test]
fn mean_photon_number_routes_agree() {
    let grid = SpacetimeGrid::default_grid();
    let j = pulse(&grid, 1.0, 0.2, 0.5, 0.3);
    let direct = mean_photon_number(&j).unwrap();
    let spectral = mean_photon_number_spectral(&j);
    assert!((direct - spectral).abs() <= 1e-10 * direct, "{direct} vs {spectral}");
}

#[test]
fn radiating_source_scales_quadratically() {
    let grid = small_grid();
    let n1 = mean_photon_number(&oscillating(&grid, 1.0, 3.0)).unwrap();
    let n2 = mean_photon_number(&oscillating(&grid, 2.0, 3.0)).unwrap();
    assert!(n1 > 1e-3);
    assert!((n2 - 4.0 * n1).abs() <= 1e-12 * n2);
}

#[test]
fn static_source_does_not_radiate() {
    let grid = SpacetimeGrid::default_grid();
    assert!(mean_photon_number(&oscillating(&grid, 1.0, 0.0)).unwrap() <= 1e-6);
}

#[test]
fn persistence_and_pmf_values() {
    assert_eq!(persistence_probability(0.0).unwrap(), 1.0);
    assert!((persistence_probability(1.0).unwrap() - (-1f64).exp()).abs() < 1e-15);
    let pmf = poisson_pmf(1.0, 10).unwrap();
    assert!((pmf.probabilities[1] - (-1f64).exp()).abs() < 1e-15);
    let zero = poisson_pmf(0.0, 5).unwrap();
    assert_eq!(zero.probabilities, vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
}

#[test]
fn emission_probability_is_complement_of_persistence() {
    for mean in [0.01, 0.5, 2.0, 9.0, 25.0] {
        let m = truncation_for_tail(mean, 1e-13).unwrap();
        let pmf = poisson_pmf(mean, m).unwrap();
        assert!(pmf.tail < 1e-13);
        let emitted: f64 = pmf.probabilities[1..].iter().sum();
        assert!((emitted - (1.0 - persistence_probability(mean).unwrap())).abs() < 1e-12, "n̄ = {mean}");
    }
}

#[test]
fn zero_mean_never_emits() {
    let h = sample_photon_counts(0.0, 10_000, 1).unwrap();
    assert_eq!(h.counts, vec![10_000]);
}

#[test]
fn sampled_counts_follow_the_pmf() {
    let (mean, trials) = (2.0, 100_000u64);
    let h = sample_photon_counts(mean, trials, 77).unwrap();
    assert!((h.sample_mean() - mean).abs() <= 4.0 * (mean / trials as f64).sqrt());
    let pmf = poisson_pmf(mean, 40).unwrap().probabilities;
    let n = trials as f64;
    let cut = 8;
    let mut stat = 0.0;
    for m in 0..cut {
        let e = n * pmf[m];
        let o = h.counts.get(m).copied().unwrap_or(0) as f64;
        stat += (o - e) * (o - e) / e;
    }
    let e_tail = n * (1.0 - pmf[..cut].iter().sum::<f64>());
    let o_tail = h.counts.iter().skip(cut).sum::<u64>() as f64;
    stat += (o_tail - e_tail) * (o_tail - e_tail) / e_tail;
    let p = ChiSquared::new(cut as f64).unwrap().sf(stat);
    assert!(p > 0.001, "p = {p}");
}

#[test]
fn large_mean_sampling_keeps_its_mean() {
    let (mean, trials) = (60.0, 50_000u64);
    let h = sample_photon_counts(mean, trials, 3).unwrap();
    assert!((h.sample_mean() - mean).abs() <= 4.0 * (mean / trials as f64).sqrt());
}

#[test]
fn emission_stats_are_consistent() {
    let stats = EmissionStats::compute(0.5, 30, 1000, 4).unwrap();
    assert!((stats.persistence + stats.emission_probability - 1.0).abs() < 1e-15);
    assert_eq!(stats.histogram.iter().sum::<u64>(), 1000);
}

fn pulse_params() -> impl Strategy<Value = (f64, f64, f64, f64)> {
    (-2.0f64..2.0, -1.5f64..1.5, -2.5f64..2.5, 0.3f64..0.7)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn split_total_is_half_feynman_action(pa in pulse_params(), pb in pulse_params()) {
        let grid = small_grid();
        let a = pulse(&grid, pa.0, pa.1, pa.2, pa.3);
        let b = pulse(&grid, pb.0, pb.1, pb.2, pb.3);
        let interaction = Interaction::new(&grid);
        let split = interaction.action_split(&a, &b).unwrap();
        let feynman = interaction.kernel(KernelName::Feynman).unwrap();
        let direct = 0.5 * bilinear(&a, feynman, &b).unwrap();
        prop_assert!((split.total - direct).norm() <= 1e-10 * direct.norm());
    }

    #[test]
    fn radiative_routes_agree(pa in pulse_params(), pb in pulse_params()) {
        let grid = small_grid();
        let a = pulse(&grid, pa.0, pa.1, pa.2, pa.3);
        let b = pulse(&grid, pb.0, pb.1, pb.2, pb.3);
        let interaction = Interaction::new(&grid);
        let pos = interaction.positive_frequency_radiation(&[&a, &b]).unwrap();
        let sym = interaction.symmetrized_radiation(&[&a, &b]).unwrap();
        prop_assert!((pos - sym).norm() <= 1e-10 * pos.norm());
    }

    #[test]
    fn persistence_drops_below_one_once_anything_radiates(n in prop_oneof![Just(0.0), 1e-12f64..50.0]) {
        let p = persistence_probability(n).unwrap();
        prop_assert!(p > 0.0 && p <= 1.0);
        prop_assert!(n == 0.0 || p < 1.0);
    }

    #[test]
    fn mean_photon_number_is_nonnegative(p in pulse_params()) {
        let grid = small_grid();
        let n = mean_photon_number(&pulse(&grid, p.0, p.1, p.2, p.3)).unwrap();
        prop_assert!(n >= 0.0);
    }
}
