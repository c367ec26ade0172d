//! Emitter/absorber transactions.
//!
//! An offer wave `|Ψ⟩ = Σ_i ⟨k_i|Ψ⟩ |k_i⟩` is resolved onto a set of
//! absorbers, each responding to a contiguous window of momentum modes. A
//! transaction forms only when the windows cover every nonzero mode exactly
//! once; this is also exactly when the positive-frequency kernel factorizes
//! into a sum of products of mode functions.
//!
//! Each trial is two-staged: a Bernoulli gate with probability `e²` (one
//! factor of the charge for the offer, one for the confirmation) decides
//! whether a real photon is exchanged, and if it is, exactly one absorber is
//! drawn with probability `|⟨k_j|Ψ⟩|²`. There is no outcome in which a
//! photon is emitted but not absorbed.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::algebra::{canonical, KernelName};
use crate::error::{Error, Result};
use crate::grid::{GridSpec, SpacetimeGrid};
use crate::numeric::evaluate_at;
use crate::streams::{run_blocks, setup_rng};

/// Tolerance on `Σ|amplitude|² = 1`.
pub const NORM_TOLERANCE: f64 = 1e-12;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Inclusive range of mode numbers `first..=last`; the zero mode is skipped.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "[i64; 2]", into = "[i64; 2]")]
pub struct ModeWindow {
    pub first: i64,
    pub last: i64,
}

impl From<[i64; 2]> for ModeWindow {
    fn from([first, last]: [i64; 2]) -> Self {
        Self { first, last }
    }
}

impl From<ModeWindow> for [i64; 2] {
    fn from(w: ModeWindow) -> Self {
        [w.first, w.last]
    }
}

impl ModeWindow {
    pub fn new(first: i64, last: i64) -> Self {
        Self { first, last }
    }

    pub fn modes(&self) -> impl Iterator<Item = i64> {
        (self.first..=self.last).filter(|&n| n != 0)
    }

    pub fn contains(&self, n: i64) -> bool {
        n != 0 && n >= self.first && n <= self.last
    }
}

fn default_weight() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Absorber {
    pub id: String,
    pub modes: ModeWindow,
    /// Effective cross-section, carried for reporting. Outcome probabilities
    /// depend on the offer amplitudes only.
    #[serde(default = "default_weight")]
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AbsorberSet {
    absorbers: Vec<Absorber>,
}

impl AbsorberSet {
    pub fn new(absorbers: Vec<Absorber>) -> Result<Self> {
        if absorbers.is_empty() {
            return Err(Error::invalid("absorber set is empty"));
        }
        let mut ids = BTreeSet::new();
        for a in &absorbers {
            if !ids.insert(a.id.as_str()) {
                return Err(Error::invalid(format!("duplicate absorber id `{}`", a.id)));
            }
            if a.modes.first > a.modes.last {
                return Err(Error::invalid(format!("absorber `{}` has an empty mode window", a.id)));
            }
            if !(a.weight.is_finite() && a.weight >= 0.0) {
                return Err(Error::invalid(format!("absorber `{}` has a negative weight", a.id)));
            }
        }
        Ok(Self { absorbers })
    }

    /// Splits the grid's nonzero modes into `count` contiguous windows of
    /// near-equal size, ids `a0, a1, …`.
    pub fn partition(grid: &SpacetimeGrid, count: usize) -> Result<Self> {
        let modes: Vec<i64> = grid.modes().map(|m| m.n).collect();
        if count == 0 || count > modes.len() {
            return Err(Error::invalid(format!(
                "cannot split {} modes into {count} windows",
                modes.len()
            )));
        }
        let mut absorbers = Vec::with_capacity(count);
        let mut start = 0;
        for k in 0..count {
            let size = modes.len() / count + usize::from(k < modes.len() % count);
            let window = &modes[start..start + size];
            absorbers.push(Absorber {
                id: format!("a{k}"),
                modes: ModeWindow::new(window[0], window[size - 1]),
                weight: 1.0,
            });
            start += size;
        }
        Self::new(absorbers)
    }

    pub fn absorbers(&self) -> &[Absorber] {
        &self.absorbers
    }

    pub fn len(&self) -> usize {
        self.absorbers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.absorbers.is_empty()
    }

    pub fn ids(&self) -> Vec<String> {
        self.absorbers.iter().map(|a| a.id.clone()).collect()
    }

    /// Set with one absorber removed.
    pub fn without(&self, id: &str) -> Result<Self> {
        Self::new(self.absorbers.iter().filter(|a| a.id != id).cloned().collect())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Completeness {
    Complete,
    /// Some nonzero modes have no absorber.
    Incomplete { missing: Vec<i64> },
    /// Some modes are claimed by more than one absorber.
    Overlapping { modes: Vec<i64> },
    /// Some windows reach modes the grid does not carry.
    OutOfRange { modes: Vec<i64> },
}

impl Completeness {
    pub fn is_complete(&self) -> bool {
        matches!(self, Completeness::Complete)
    }
}

impl fmt::Display for Completeness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Completeness::Complete => f.write_str("complete"),
            Completeness::Incomplete { missing } => write!(f, "modes without absorber: {missing:?}"),
            Completeness::Overlapping { modes } => write!(f, "modes claimed twice: {modes:?}"),
            Completeness::OutOfRange { modes } => write!(f, "modes not on the grid: {modes:?}"),
        }
    }
}

/// Classifies whether the windows cover every nonzero grid mode exactly once.
pub fn completeness_check(set: &AbsorberSet, grid: &SpacetimeGrid) -> Completeness {
    let mut claims: BTreeMap<i64, usize> = BTreeMap::new();
    for a in &set.absorbers {
        for n in a.modes.modes() {
            *claims.entry(n).or_default() += 1;
        }
    }
    let overlapping: Vec<i64> = claims.iter().filter(|(_, &c)| c > 1).map(|(&n, _)| n).collect();
    if !overlapping.is_empty() {
        return Completeness::Overlapping { modes: overlapping };
    }
    let foreign: Vec<i64> = claims.keys().copied().filter(|&n| !grid.has_mode(n)).collect();
    if !foreign.is_empty() {
        return Completeness::OutOfRange { modes: foreign };
    }
    let missing: Vec<i64> = grid.modes().map(|m| m.n).filter(|n| !claims.contains_key(n)).collect();
    if !missing.is_empty() {
        return Completeness::Incomplete { missing };
    }
    Completeness::Complete
}

fn require_complete(set: &AbsorberSet, grid: &SpacetimeGrid) -> Result<()> {
    match completeness_check(set, grid) {
        Completeness::Complete => Ok(()),
        other => Err(Error::IncompleteAbsorbers(other.to_string())),
    }
}

/// Offer amplitudes `⟨k_i|Ψ⟩`, one per absorber.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OfferWave {
    ids: Vec<String>,
    amplitudes: Vec<Complex64>,
    normalized: bool,
}

impl OfferWave {
    pub fn new(ids: Vec<String>, amplitudes: Vec<Complex64>) -> Result<Self> {
        if ids.len() != amplitudes.len() || ids.is_empty() {
            return Err(Error::invalid("offer needs one amplitude per absorber"));
        }
        if amplitudes.iter().any(|a| !(a.re.is_finite() && a.im.is_finite())) {
            return Err(Error::invalid("offer amplitudes must be finite"));
        }
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        Ok(Self {
            ids,
            amplitudes,
            normalized: (norm - 1.0).abs() <= NORM_TOLERANCE,
        })
    }

    /// Equal amplitude `1/√n` on every absorber.
    pub fn uniform(set: &AbsorberSet) -> Self {
        let n = set.len();
        let a = Complex64::new(1.0 / (n as f64).sqrt(), 0.0);
        let mut offer = Self::new(set.ids(), vec![a; n]).expect("nonempty set");
        offer.normalized = true;
        offer
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn normalize(&self) -> Result<Self> {
        let norm = self.norm_sqr().sqrt();
        if norm == 0.0 {
            return Err(Error::invalid("cannot normalize a zero offer"));
        }
        Ok(Self {
            ids: self.ids.clone(),
            amplitudes: self.amplitudes.iter().map(|a| a / norm).collect(),
            normalized: true,
        })
    }

    /// Born probabilities `|⟨k_i|Ψ⟩|²`.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn with_common_phase(&self, phase: f64) -> Self {
        let rot = Complex64::from_polar(1.0, phase);
        Self {
            ids: self.ids.clone(),
            amplitudes: self.amplitudes.iter().map(|a| a * rot).collect(),
            normalized: self.normalized,
        }
    }
}

/// Resolves a per-mode state onto the absorbers: each absorber gets the root
/// of the summed squared moduli over its window, carrying the phase of the
/// window's largest-modulus mode (lowest mode number on ties).
///
/// `psi` is indexed like [`SpacetimeGrid::modes`].
pub fn project_offer(grid: &SpacetimeGrid, psi: &[Complex64], set: &AbsorberSet) -> Result<OfferWave> {
    require_complete(set, grid)?;
    let modes: Vec<i64> = grid.modes().map(|m| m.n).collect();
    if psi.len() != modes.len() {
        return Err(Error::invalid(format!(
            "state needs {} mode amplitudes, got {}",
            modes.len(),
            psi.len()
        )));
    }
    let amplitudes = set
        .absorbers
        .iter()
        .map(|a| {
            let mut weight = 0.0;
            let mut dominant = Complex64::new(0.0, 0.0);
            for (n, v) in modes.iter().zip(psi) {
                if a.modes.contains(*n) {
                    weight += v.norm_sqr();
                    if v.norm() > dominant.norm() {
                        dominant = *v;
                    }
                }
            }
            if weight == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::from_polar(weight.sqrt(), dominant.arg())
            }
        })
        .collect();
    OfferWave::new(set.ids(), amplitudes)
}

/// Bernoulli gate for the non-unitary (real photon) interaction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NuGate {
    coupling: f64,
    weight: f64,
}

impl NuGate {
    /// `p = min(1, e²·g)`; `e` must lie in `[0, 1]`, `g >= 0`.
    pub fn new(coupling: f64, weight: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&coupling) {
            return Err(Error::invalid(format!("coupling e must lie in [0, 1], got {coupling}")));
        }
        if !(weight.is_finite() && weight >= 0.0) {
            return Err(Error::invalid(format!("gate weight must be >= 0, got {weight}")));
        }
        Ok(Self { coupling, weight })
    }

    pub fn coupling(&self) -> f64 {
        self.coupling
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn probability(&self) -> f64 {
        (self.coupling * self.coupling * self.weight).min(1.0)
    }

    pub fn fire<R: Rng + ?Sized>(&self, rng: &mut R) -> bool {
        rng.random::<f64>() < self.probability()
    }
}

/// Fires with probability `e²`.
pub fn nu_gate<R: Rng + ?Sized>(coupling: f64, rng: &mut R) -> Result<bool> {
    Ok(NuGate::new(coupling, 1.0)?.fire(rng))
}

/// Empirical gate rate over `draws` independent draws.
pub fn gate_rate(gate: NuGate, draws: u64, seed: u64) -> Result<f64> {
    if draws == 0 {
        return Err(Error::invalid("draws must be at least 1"));
    }
    let hits: u64 = run_blocks(draws, seed, |rng, n| (0..n).filter(|_| gate.fire(rng)).count() as u64)
        .into_iter()
        .sum();
    Ok(hits as f64 / draws as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WinnerDraw {
    pub index: usize,
    pub id: String,
    /// `|⟨k_winner|Ψ⟩|²`.
    pub probability: f64,
}

fn draw_index<R: Rng + ?Sized>(probabilities: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut cdf = 0.0;
    for (k, p) in probabilities.iter().enumerate() {
        cdf += p;
        if u < cdf {
            return k;
        }
    }
    // Rounding left the cdf a hair below u: take the last reachable outcome.
    probabilities.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// Draws the single absorbing partner with probability `|⟨k_j|Ψ⟩|²`.
pub fn select_winner<R: Rng + ?Sized>(offer: &OfferWave, rng: &mut R) -> Result<WinnerDraw> {
    if !offer.is_normalized() {
        return Err(Error::Unnormalized(offer.norm_sqr()));
    }
    let probabilities = offer.probabilities();
    let index = draw_index(&probabilities, rng);
    Ok(WinnerDraw {
        index,
        id: offer.ids[index].clone(),
        probability: probabilities[index],
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum TransactionOutcome {
    /// Only the time-symmetric (virtual) exchange took place.
    NoTransaction,
    /// A real photon went from the emitter to exactly one absorber.
    Absorbed { winner: WinnerDraw },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TransactionRecord {
    #[serde(flatten)]
    pub outcome: TransactionOutcome,
    pub seed: u64,
    pub coupling: f64,
}

impl TransactionRecord {
    pub fn nu_occurred(&self) -> bool {
        matches!(self.outcome, TransactionOutcome::Absorbed { .. })
    }

    pub fn winner(&self) -> Option<&WinnerDraw> {
        match &self.outcome {
            TransactionOutcome::Absorbed { winner } => Some(winner),
            TransactionOutcome::NoTransaction => None,
        }
    }
}

/// One gated transaction.
pub fn transact<R: Rng + ?Sized>(gate: &NuGate, offer: &OfferWave, rng: &mut R) -> Result<TransactionOutcome> {
    if !offer.is_normalized() {
        return Err(Error::Unnormalized(offer.norm_sqr()));
    }
    Ok(if gate.fire(rng) {
        TransactionOutcome::Absorbed {
            winner: select_winner(offer, rng)?,
        }
    } else {
        TransactionOutcome::NoTransaction
    })
}

/// Which frequency sign the absorber response selects.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phasing {
    /// Positive frequencies are radiated.
    #[default]
    Feynman,
    /// Negative frequencies are radiated.
    Dyson,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpacetimePoint {
    pub t: f64,
    pub x: f64,
}

/// Uniformly sampled point pairs inside the grid window.
pub fn sample_point_pairs<R: Rng + ?Sized>(
    grid: &SpacetimeGrid,
    count: usize,
    rng: &mut R,
) -> Vec<(SpacetimePoint, SpacetimePoint)> {
    let half = grid.spatial_extent() / 2.0;
    let point = |rng: &mut R| SpacetimePoint {
        t: rng.random_range(grid.t_min()..=grid.t_max()),
        x: rng.random_range(-half..half),
    };
    (0..count).map(|_| (point(rng), point(rng))).collect()
}

/// Box-normalized mode function `exp(-i(ωt - kx))/sqrt(2ωL)`.
fn mode_function(grid: &SpacetimeGrid, n: i64, p: SpacetimePoint) -> Complex64 {
    let m = grid.mode(n);
    Complex64::from_polar(
        1.0 / (2.0 * m.omega * grid.spatial_extent()).sqrt(),
        -(m.omega * p.t - m.k * p.x),
    )
}

/// Max relative residual between the kernel and its factorized mode sum over
/// the windows `groups`:
///
/// - Feynman: `-D+(x - y)` vs `i Σ_k f_k(x) conj f_k(y)`
/// - Dyson: `D-(x - y)` vs `i Σ_k conj f_k(x) f_k(y)`
///
/// No completeness gate; [`factorization_check`] is the gated entry point.
pub fn factorization_residual(
    grid: &SpacetimeGrid,
    groups: &[Vec<i64>],
    pairs: &[(SpacetimePoint, SpacetimePoint)],
    phasing: Phasing,
) -> f64 {
    let (kernel, sign) = match phasing {
        Phasing::Feynman => (canonical(KernelName::DPlus), -1.0),
        Phasing::Dyson => (canonical(KernelName::DMinus), 1.0),
    };
    let mut worst_diff: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for (x, y) in pairs {
        let lhs = sign * evaluate_at(&kernel, grid, x.t - y.t, x.x - y.x);
        let rhs: Complex64 = groups
            .iter()
            .map(|window| {
                window
                    .iter()
                    .map(|&n| {
                        let (fx, fy) = (mode_function(grid, n, *x), mode_function(grid, n, *y));
                        match phasing {
                            Phasing::Feynman => fx * fy.conj(),
                            Phasing::Dyson => fx.conj() * fy,
                        }
                    })
                    .sum::<Complex64>()
            })
            .sum::<Complex64>()
            * I;
        worst_diff = worst_diff.max((lhs - rhs).norm());
        scale = scale.max(lhs.norm());
    }
    if worst_diff == 0.0 {
        0.0
    } else {
        worst_diff / scale
    }
}

/// Factorization residual with the absorber windows as mode groups. Refuses
/// incomplete sets: the sum over states only closes on a complete set.
pub fn factorization_check(
    grid: &SpacetimeGrid,
    set: &AbsorberSet,
    pairs: &[(SpacetimePoint, SpacetimePoint)],
    phasing: Phasing,
) -> Result<f64> {
    require_complete(set, grid)?;
    if pairs.is_empty() {
        return Err(Error::invalid("no point pairs to check"));
    }
    let groups: Vec<Vec<i64>> = set.absorbers.iter().map(|a| a.modes.modes().collect()).collect();
    Ok(factorization_residual(grid, &groups, pairs, phasing))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolarAmplitude {
    pub modulus: f64,
    #[serde(default)]
    pub phase: f64,
}

impl PolarAmplitude {
    fn to_complex(&self) -> Complex64 {
        Complex64::from_polar(self.modulus, self.phase)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeAmplitude {
    pub mode: i64,
    pub modulus: f64,
    #[serde(default)]
    pub phase: f64,
}

/// Offer definition in scenario files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OfferSpec {
    /// Equal amplitude on every absorber.
    Uniform,
    /// One amplitude per absorber, in absorber order.
    PerAbsorber(Vec<PolarAmplitude>),
    /// Amplitudes per grid mode (unlisted modes are zero), projected onto
    /// the absorber windows.
    PerMode(Vec<ModeAmplitude>),
}

impl OfferSpec {
    pub fn build(&self, grid: &SpacetimeGrid, set: &AbsorberSet) -> Result<OfferWave> {
        match self {
            OfferSpec::Uniform => Ok(OfferWave::uniform(set)),
            OfferSpec::PerAbsorber(amps) => {
                if amps.len() != set.len() {
                    return Err(Error::invalid(format!(
                        "offer lists {} amplitudes for {} absorbers",
                        amps.len(),
                        set.len()
                    )));
                }
                if amps.iter().any(|a| !(a.modulus >= 0.0 && a.phase.is_finite())) {
                    return Err(Error::invalid("offer moduli must be >= 0 and phases finite"));
                }
                OfferWave::new(set.ids(), amps.iter().map(PolarAmplitude::to_complex).collect())
            }
            OfferSpec::PerMode(amps) => {
                let modes: Vec<i64> = grid.modes().map(|m| m.n).collect();
                let mut psi = vec![Complex64::new(0.0, 0.0); modes.len()];
                for a in amps {
                    let slot = modes
                        .iter()
                        .position(|&n| n == a.mode)
                        .ok_or_else(|| Error::invalid(format!("mode {} is not on the grid", a.mode)))?;
                    if !(a.modulus >= 0.0 && a.phase.is_finite()) {
                        return Err(Error::invalid("offer moduli must be >= 0 and phases finite"));
                    }
                    psi[slot] += Complex64::from_polar(a.modulus, a.phase);
                }
                project_offer(grid, &psi, set)
            }
        }
    }
}

fn default_points() -> usize {
    100
}

/// Everything needed for an ensemble of transactions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransactionScenario {
    #[serde(default)]
    pub grid: GridSpec,
    pub absorbers: Vec<Absorber>,
    pub offer: OfferSpec,
    /// Charge `e`; the gate fires with probability `min(1, e²·weight)`.
    pub coupling: f64,
    #[serde(default = "default_weight")]
    pub weight: f64,
    pub trials: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub phasing: Phasing,
    #[serde(default = "default_points")]
    pub factorization_points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnsembleReport {
    pub trials: u64,
    pub seed: u64,
    pub coupling: f64,
    pub weight: f64,
    pub phasing: Phasing,
    pub gate_probability: f64,
    pub nu_count: u64,
    pub nu_rate: f64,
    /// Wilson score interval at 95 %.
    pub nu_rate_ci95: [f64; 2],
    /// Absorbers that won at least once.
    pub winner_counts: BTreeMap<String, u64>,
    pub winner_frequencies: BTreeMap<String, f64>,
    pub born_probabilities: BTreeMap<String, f64>,
    pub factorization_residual: f64,
    pub factorization_points: usize,
}

impl EnsembleReport {
    /// Every NU trial produced exactly one winner.
    pub fn one_winner_per_transaction(&self) -> bool {
        self.winner_counts.values().sum::<u64>() == self.nu_count
    }
}

fn wilson_interval(successes: u64, trials: u64, z: f64) -> [f64; 2] {
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / (1.0 + z2 / n);
    [(centre - half).max(0.0), (centre + half).min(1.0)]
}

/// Runs `scenario.trials` gated transactions. Deterministic in the seed and
/// independent of the thread count.
pub fn run_trials(scenario: &TransactionScenario) -> Result<EnsembleReport> {
    let grid = scenario.grid.build()?;
    let set = AbsorberSet::new(scenario.absorbers.clone())?;
    require_complete(&set, &grid)?;
    let gate = NuGate::new(scenario.coupling, scenario.weight)?;
    let offer = scenario.offer.build(&grid, &set)?;
    if !offer.is_normalized() {
        return Err(Error::Unnormalized(offer.norm_sqr()));
    }
    if scenario.trials == 0 {
        return Err(Error::invalid("trials must be at least 1"));
    }

    let pairs = sample_point_pairs(&grid, scenario.factorization_points.max(1), &mut setup_rng(scenario.seed));
    let factorization = factorization_check(&grid, &set, &pairs, scenario.phasing)?;

    let probabilities = offer.probabilities();
    let absorbers = set.len();
    let blocks = run_blocks(scenario.trials, scenario.seed, |rng, n| {
        let mut counts = vec![0u64; absorbers];
        let mut nu = 0u64;
        for _ in 0..n {
            if gate.fire(rng) {
                nu += 1;
                counts[draw_index(&probabilities, rng)] += 1;
            }
        }
        (nu, counts)
    });
    let mut nu_count = 0;
    let mut counts = vec![0u64; absorbers];
    for (nu, c) in blocks {
        nu_count += nu;
        for (a, b) in counts.iter_mut().zip(c) {
            *a += b;
        }
    }

    let ids = set.ids();
    let winner_counts: BTreeMap<String, u64> = ids
        .iter()
        .zip(&counts)
        .filter(|(_, &c)| c > 0)
        .map(|(id, &c)| (id.clone(), c))
        .collect();
    let winner_frequencies = winner_counts
        .iter()
        .map(|(id, &c)| (id.clone(), c as f64 / nu_count as f64))
        .collect();
    Ok(EnsembleReport {
        trials: scenario.trials,
        seed: scenario.seed,
        coupling: scenario.coupling,
        weight: scenario.weight,
        phasing: scenario.phasing,
        gate_probability: gate.probability(),
        nu_count,
        nu_rate: nu_count as f64 / scenario.trials as f64,
        nu_rate_ci95: wilson_interval(nu_count, scenario.trials, 1.959963984540054),
        winner_counts,
        winner_frequencies,
        born_probabilities: ids.into_iter().zip(probabilities).collect(),
        factorization_residual: factorization,
        factorization_points: pairs.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::streams::stream_rng;
    use proptest::prelude::*;

    fn grid() -> SpacetimeGrid {
        SpacetimeGrid::default_grid()
    }

    #[test]
    fn eight_blocks_cover_the_grid() {
        let g = grid();
        let set = AbsorberSet::partition(&g, 8).unwrap();
        assert_eq!(set.len(), 8);
        assert_eq!(completeness_check(&set, &g), Completeness::Complete);
    }

    #[test]
    fn removed_block_is_reported_missing() {
        let g = grid();
        let set = AbsorberSet::partition(&g, 8).unwrap();
        let removed = set.absorbers()[3].clone();
        let partial = set.without(&removed.id).unwrap();
        match completeness_check(&partial, &g) {
            Completeness::Incomplete { missing } => {
                assert_eq!(missing, removed.modes.modes().collect::<Vec<_>>());
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn shared_mode_is_overlapping() {
        let g = grid();
        let mut absorbers = AbsorberSet::partition(&g, 8).unwrap().absorbers().to_vec();
        absorbers[1].modes.first -= 1;
        let set = AbsorberSet::new(absorbers).unwrap();
        assert!(matches!(completeness_check(&set, &g), Completeness::Overlapping { modes } if modes.len() == 1));
    }

    #[test]
    fn window_beyond_grid_is_out_of_range() {
        let g = SpacetimeGrid::new(1.0, 4, 0.0, 1.0, 3).unwrap();
        let set = AbsorberSet::new(vec![Absorber { id: "a".into(), modes: ModeWindow::new(-1, 3), weight: 1.0 }]).unwrap();
        assert_eq!(completeness_check(&set, &g), Completeness::OutOfRange { modes: vec![3] });
    }

    #[test]
    fn invalid_sets_are_rejected() {
        assert!(AbsorberSet::new(vec![]).is_err());
        let a = Absorber { id: "a".into(), modes: ModeWindow::new(1, 2), weight: 1.0 };
        assert!(AbsorberSet::new(vec![a.clone(), a.clone()]).is_err());
        let empty = Absorber { modes: ModeWindow::new(3, 2), ..a.clone() };
        assert!(AbsorberSet::new(vec![empty]).is_err());
        let negative = Absorber { weight: -1.0, ..a };
        assert!(AbsorberSet::new(vec![negative]).is_err());
    }

    #[test]
    fn uniform_state_over_four_windows() {
        // 10 modes: nonzero modes -4..=5; the state lives on the eight modes -4..=4.
        let g = SpacetimeGrid::new(1.0, 10, 0.0, 1.0, 3).unwrap();
        let set = AbsorberSet::new(
            [(-4, -3), (-2, -1), (1, 2), (3, 5)]
                .iter()
                .enumerate()
                .map(|(k, &(a, b))| Absorber { id: format!("w{k}"), modes: ModeWindow::new(a, b), weight: 1.0 })
                .collect(),
        )
        .unwrap();
        let psi: Vec<Complex64> = g
            .modes()
            .map(|m| if m.n.abs() <= 4 { Complex64::new(1.0 / 8f64.sqrt(), 0.0) } else { Complex64::new(0.0, 0.0) })
            .collect();
        let offer = project_offer(&g, &psi, &set).unwrap();
        for a in offer.amplitudes() {
            assert!((a - Complex64::new(0.5, 0.0)).norm() < 1e-15);
        }
        assert!(offer.is_normalized());
    }

    #[test]
    fn concentrated_state_lands_on_one_absorber() {
        let g = grid();
        let set = AbsorberSet::partition(&g, 8).unwrap();
        let target = set.absorbers()[5].modes;
        let support: Vec<i64> = target.modes().collect();
        let amp = 1.0 / (support.len() as f64).sqrt();
        let psi: Vec<Complex64> = g
            .modes()
            .map(|m| if target.contains(m.n) { Complex64::from_polar(amp, 0.3) } else { Complex64::new(0.0, 0.0) })
            .collect();
        let offer = project_offer(&g, &psi, &set).unwrap();
        let p = offer.probabilities();
        for (k, pk) in p.iter().enumerate() {
            let expected = if k == 5 { 1.0 } else { 0.0 };
            assert!((pk - expected).abs() < 1e-12);
        }
        assert!((offer.amplitudes()[5].arg() - 0.3).abs() < 1e-12);
    }

    #[test]
    fn incomplete_set_cannot_project() {
        let g = grid();
        let set = AbsorberSet::partition(&g, 8).unwrap().without("a0").unwrap();
        let psi = vec![Complex64::new(0.0, 0.0); g.num_nonzero_modes()];
        assert!(matches!(project_offer(&g, &psi, &set), Err(Error::IncompleteAbsorbers(_))));
    }

    #[test]
    fn gate_edges() {
        let mut rng = stream_rng(1, 1);
        for _ in 0..10_000 {
            assert!(!nu_gate(0.0, &mut rng).unwrap());
            assert!(nu_gate(1.0, &mut rng).unwrap());
        }
        assert!(nu_gate(1.5, &mut rng).is_err());
        assert!(nu_gate(-0.1, &mut rng).is_err());
        assert!(NuGate::new(0.5, -1.0).is_err());
        assert_eq!(NuGate::new(0.5, 10.0).unwrap().probability(), 1.0);
    }

    #[test]
    fn single_absorber_always_wins() {
        let offer = OfferWave::new(vec!["only".into()], vec![Complex64::from_polar(1.0, 1.2)]).unwrap();
        let mut rng = stream_rng(3, 1);
        for _ in 0..1000 {
            assert_eq!(select_winner(&offer, &mut rng).unwrap().id, "only");
        }
    }

    #[test]
    fn unnormalized_offer_is_rejected() {
        let offer = OfferWave::new(vec!["a".into(), "b".into()], vec![Complex64::new(1.0, 0.0); 2]).unwrap();
        assert!(!offer.is_normalized());
        let mut rng = stream_rng(3, 1);
        assert!(matches!(select_winner(&offer, &mut rng), Err(Error::Unnormalized(_))));
        let fixed = offer.normalize().unwrap();
        assert!(fixed.is_normalized());
        assert!(select_winner(&fixed, &mut rng).is_ok());
    }

    #[test]
    fn transaction_records_pair_winner_with_gate() {
        let set = AbsorberSet::partition(&grid(), 4).unwrap();
        let offer = OfferWave::uniform(&set);
        let mut rng = stream_rng(5, 1);
        let gate = NuGate::new(0.5, 1.0).unwrap();
        for _ in 0..1000 {
            let record = TransactionRecord { outcome: transact(&gate, &offer, &mut rng).unwrap(), seed: 5, coupling: 0.5 };
            assert_eq!(record.nu_occurred(), record.winner().is_some());
            if let Some(w) = record.winner() {
                assert!((w.probability - 0.25).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn coincident_points_factorize() {
        let g = grid();
        let set = AbsorberSet::partition(&g, 8).unwrap();
        let p = SpacetimePoint { t: 0.4, x: -1.1 };
        for phasing in [Phasing::Feynman, Phasing::Dyson] {
            let r = factorization_check(&g, &set, &[(p, p)], phasing).unwrap();
            assert!(r < 1e-10, "{phasing:?}: {r}");
        }
    }

    fn offer_strategy() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (2usize..6).prop_flat_map(|n| (proptest::collection::vec(0.01f64..1.0, n), proptest::collection::vec(-3.0f64..3.0, n)))
    }

    proptest! {
        #[test]
        fn common_phase_leaves_probabilities_unchanged((moduli, phases) in offer_strategy(), shift in -3.0f64..3.0) {
            let ids: Vec<String> = (0..moduli.len()).map(|k| format!("a{k}")).collect();
            let amps = moduli.iter().zip(&phases).map(|(m, p)| Complex64::from_polar(*m, *p)).collect();
            let offer = OfferWave::new(ids, amps).unwrap().normalize().unwrap();
            let rotated = offer.with_common_phase(shift);
            for (a, b) in offer.probabilities().iter().zip(rotated.probabilities()) {
                prop_assert!((a - b).abs() < 1e-15);
            }
        }

        #[test]
        fn projection_preserves_norm(seed in 0u64..1000) {
            let g = SpacetimeGrid::new(2.0 * std::f64::consts::PI, 16, -1.0, 1.0, 5).unwrap();
            let set = AbsorberSet::partition(&g, 4).unwrap();
            let mut rng = stream_rng(seed, 0);
            let psi: Vec<Complex64> = g.modes().map(|_| Complex64::new(rand::Rng::random_range(&mut rng, -1.0..1.0), rand::Rng::random_range(&mut rng, -1.0..1.0))).collect();
            let norm: f64 = psi.iter().map(|v| v.norm_sqr()).sum();
            let offer = project_offer(&g, &psi, &set).unwrap();
            prop_assert!((offer.norm_sqr() - norm).abs() < 1e-12 * norm.max(1.0));
        }
    }
}
