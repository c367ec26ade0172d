//! Exact algebra of propagator kernels.
//!
//! Every kernel used in the crate is a complex linear combination of four
//! basis kernels: the retarded and advanced propagators split into their
//! positive- and negative-frequency parts,
//!
//! ```text
//! R+ = D_ret^+   R- = D_ret^-   A+ = D_adv^+   A- = D_adv^-
//! ```
//!
//! Coefficients are exact complex rationals, so identities such as
//! `D_F = D̄ - (i/2) D1` are checked by plain equality with no tolerance.
//!
//! Normalization follows `D = D_ret - D_adv` (no factor ½), with
//! `D̄ = ½ (D_ret + D_adv)`, `D+ = -iΔ+`, `D- = iΔ-` and
//! `D1 = i (D+ - D-) = Δ+ + Δ-`. Texts that put a ½ in front of the
//! commutator function differ from this by a global factor on `D`.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};

/// Exact complex number with rational real and imaginary parts.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ExactComplex {
    pub re: BigRational,
    pub im: BigRational,
}

impl ExactComplex {
    pub fn new(re: BigRational, im: BigRational) -> Self {
        Self { re, im }
    }

    /// `re_num/re_den + i im_num/im_den`.
    pub fn from_ratios(re_num: i64, re_den: i64, im_num: i64, im_den: i64) -> Self {
        Self {
            re: BigRational::new(BigInt::from(re_num), BigInt::from(re_den)),
            im: BigRational::new(BigInt::from(im_num), BigInt::from(im_den)),
        }
    }

    pub fn real(num: i64, den: i64) -> Self {
        Self::from_ratios(num, den, 0, 1)
    }

    pub fn imag(num: i64, den: i64) -> Self {
        Self::from_ratios(0, 1, num, den)
    }

    pub fn zero() -> Self {
        Self::real(0, 1)
    }

    pub fn one() -> Self {
        Self::real(1, 1)
    }

    pub fn i() -> Self {
        Self::imag(1, 1)
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn conj(&self) -> Self {
        Self::new(self.re.clone(), -self.im.clone())
    }

    pub fn to_complex64(&self) -> Complex64 {
        Complex64::new(
            self.re.to_f64().unwrap_or(f64::NAN),
            self.im.to_f64().unwrap_or(f64::NAN),
        )
    }
}

impl Add for &ExactComplex {
    type Output = ExactComplex;
    fn add(self, rhs: &ExactComplex) -> ExactComplex {
        ExactComplex::new(&self.re + &rhs.re, &self.im + &rhs.im)
    }
}

impl Sub for &ExactComplex {
    type Output = ExactComplex;
    fn sub(self, rhs: &ExactComplex) -> ExactComplex {
        ExactComplex::new(&self.re - &rhs.re, &self.im - &rhs.im)
    }
}

impl Mul for &ExactComplex {
    type Output = ExactComplex;
    fn mul(self, rhs: &ExactComplex) -> ExactComplex {
        ExactComplex::new(
            &self.re * &rhs.re - &self.im * &rhs.im,
            &self.re * &rhs.im + &self.im * &rhs.re,
        )
    }
}

impl Neg for &ExactComplex {
    type Output = ExactComplex;
    fn neg(self) -> ExactComplex {
        ExactComplex::new(-self.re.clone(), -self.im.clone())
    }
}

impl fmt::Display for ExactComplex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.re.is_zero(), self.im.is_zero()) {
            (_, true) => write!(f, "{}", self.re),
            (true, false) => write!(f, "{}i", self.im),
            (false, false) => {
                let sign = if self.im.is_negative() { '-' } else { '+' };
                write!(f, "({} {} {}i)", self.re, sign, self.im.abs())
            }
        }
    }
}

impl FromStr for ExactComplex {
    type Err = Error;

    /// Accepts a rational (`"1/2"`, `"-3"`) as a real number. Complex values
    /// are built with [`ExactComplex::new`].
    fn from_str(s: &str) -> Result<Self> {
        parse_rational(s).map(|re| ExactComplex::new(re, BigRational::zero()))
    }
}

pub(crate) fn parse_rational(s: &str) -> Result<BigRational> {
    let s = s.trim();
    let bad = || Error::invalid(format!("`{s}` is not a rational number"));
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s, "1"),
    };
    let num: BigInt = num.parse().map_err(|_| bad())?;
    let den: BigInt = den.parse().map_err(|_| bad())?;
    if den.is_zero() {
        return Err(bad());
    }
    Ok(BigRational::new(num, den))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CausalPart {
    Retarded,
    Advanced,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FrequencyPart {
    Positive,
    Negative,
}

/// One of the four basis kernels R+, R-, A+, A-.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BasisKernel {
    pub causal_part: CausalPart,
    pub frequency_part: FrequencyPart,
}

impl BasisKernel {
    pub const RET_POS: BasisKernel = BasisKernel::new(CausalPart::Retarded, FrequencyPart::Positive);
    pub const RET_NEG: BasisKernel = BasisKernel::new(CausalPart::Retarded, FrequencyPart::Negative);
    pub const ADV_POS: BasisKernel = BasisKernel::new(CausalPart::Advanced, FrequencyPart::Positive);
    pub const ADV_NEG: BasisKernel = BasisKernel::new(CausalPart::Advanced, FrequencyPart::Negative);

    /// All four basis kernels in canonical order.
    pub const ALL: [BasisKernel; 4] = [Self::RET_POS, Self::RET_NEG, Self::ADV_POS, Self::ADV_NEG];

    pub const fn new(causal_part: CausalPart, frequency_part: FrequencyPart) -> Self {
        Self {
            causal_part,
            frequency_part,
        }
    }

    fn index(self) -> usize {
        match (self.causal_part, self.frequency_part) {
            (CausalPart::Retarded, FrequencyPart::Positive) => 0,
            (CausalPart::Retarded, FrequencyPart::Negative) => 1,
            (CausalPart::Advanced, FrequencyPart::Positive) => 2,
            (CausalPart::Advanced, FrequencyPart::Negative) => 3,
        }
    }

    /// Image under argument reversal `K(x) -> K(-x)`: R+ <-> A-, R- <-> A+.
    pub fn reflected(self) -> BasisKernel {
        let causal_part = match self.causal_part {
            CausalPart::Retarded => CausalPart::Advanced,
            CausalPart::Advanced => CausalPart::Retarded,
        };
        let frequency_part = match self.frequency_part {
            FrequencyPart::Positive => FrequencyPart::Negative,
            FrequencyPart::Negative => FrequencyPart::Positive,
        };
        BasisKernel::new(causal_part, frequency_part)
    }

    /// ASCII label used in reports (`R+`, `R-`, `A+`, `A-`).
    pub fn label(self) -> &'static str {
        ["R+", "R-", "A+", "A-"][self.index()]
    }
}

impl fmt::Display for BasisKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(["R⁺", "R⁻", "A⁺", "A⁻"][self.index()])
    }
}

impl FromStr for BasisKernel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        BasisKernel::ALL
            .into_iter()
            .find(|b| b.label() == s || b.to_string() == s)
            .ok_or_else(|| Error::invalid(format!("`{s}` is not a basis kernel")))
    }
}

/// Exact linear combination of the four basis kernels.
///
/// Stored densely, so two expressions are equal iff all four coefficients
/// are equal.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct KernelExpr {
    coefficients: [ExactComplex; 4],
}

impl Default for KernelExpr {
    fn default() -> Self {
        Self::zero()
    }
}

impl KernelExpr {
    pub fn zero() -> Self {
        Self {
            coefficients: std::array::from_fn(|_| ExactComplex::zero()),
        }
    }

    pub fn basis(b: BasisKernel) -> Self {
        let mut e = Self::zero();
        e.coefficients[b.index()] = ExactComplex::one();
        e
    }

    pub fn from_terms<I>(terms: I) -> Self
    where
        I: IntoIterator<Item = (BasisKernel, ExactComplex)>,
    {
        let mut e = Self::zero();
        for (b, c) in terms {
            let slot = &mut e.coefficients[b.index()];
            *slot = &*slot + &c;
        }
        e
    }

    pub fn coefficient(&self, b: BasisKernel) -> &ExactComplex {
        &self.coefficients[b.index()]
    }

    pub fn terms(&self) -> impl Iterator<Item = (BasisKernel, &ExactComplex)> {
        BasisKernel::ALL.into_iter().map(move |b| (b, self.coefficient(b)))
    }

    pub fn is_zero(&self) -> bool {
        self.coefficients.iter().all(ExactComplex::is_zero)
    }

    pub fn scale(&self, s: &ExactComplex) -> Self {
        Self {
            coefficients: std::array::from_fn(|k| &self.coefficients[k] * s),
        }
    }

    /// Argument reversal `K(x) -> K(-x)`; coefficients move with their basis
    /// kernel unchanged.
    pub fn reflect(&self) -> Self {
        Self::from_terms(self.terms().map(|(b, c)| (b.reflected(), c.clone())))
    }

    /// Coefficients converted to floating point, in [`BasisKernel::ALL`] order.
    pub fn to_complex64(&self) -> [Complex64; 4] {
        std::array::from_fn(|k| self.coefficients[k].to_complex64())
    }
}

impl Add for &KernelExpr {
    type Output = KernelExpr;
    fn add(self, rhs: &KernelExpr) -> KernelExpr {
        combine(self, &ExactComplex::one(), rhs, &ExactComplex::one())
    }
}

impl Sub for &KernelExpr {
    type Output = KernelExpr;
    fn sub(self, rhs: &KernelExpr) -> KernelExpr {
        combine(self, &ExactComplex::one(), rhs, &ExactComplex::real(-1, 1))
    }
}

impl fmt::Display for KernelExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (b, c) in self.terms().filter(|(_, c)| !c.is_zero()) {
            if !first {
                f.write_str(" + ")?;
            }
            write!(f, "{c}·{b}")?;
            first = false;
        }
        if first {
            f.write_str("0")?;
        }
        Ok(())
    }
}

impl Serialize for KernelExpr {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut map = serializer.serialize_map(Some(4))?;
        for (b, c) in self.terms() {
            map.serialize_entry(b.label(), &[c.re.to_string(), c.im.to_string()])?;
        }
        map.end()
    }
}

/// Named kernels with a fixed expansion in the basis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum KernelName {
    /// `D_ret`
    Ret,
    /// `D_adv`
    Adv,
    /// `D̄`, the time-symmetric kernel.
    Bar,
    /// `D`, the odd homogeneous solution.
    Odd,
    /// `D1`, the even homogeneous solution.
    One,
    Feynman,
    Dyson,
    DPlus,
    DMinus,
    DeltaPlus,
    DeltaMinus,
}

impl KernelName {
    pub const ALL: [KernelName; 11] = [
        KernelName::Ret,
        KernelName::Adv,
        KernelName::Bar,
        KernelName::Odd,
        KernelName::One,
        KernelName::Feynman,
        KernelName::Dyson,
        KernelName::DPlus,
        KernelName::DMinus,
        KernelName::DeltaPlus,
        KernelName::DeltaMinus,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            KernelName::Ret => "ret",
            KernelName::Adv => "adv",
            KernelName::Bar => "bar",
            KernelName::Odd => "odd",
            KernelName::One => "one",
            KernelName::Feynman => "feynman",
            KernelName::Dyson => "dyson",
            KernelName::DPlus => "d_plus",
            KernelName::DMinus => "d_minus",
            KernelName::DeltaPlus => "delta_plus",
            KernelName::DeltaMinus => "delta_minus",
        }
    }
}

impl fmt::Display for KernelName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for KernelName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        KernelName::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::UnknownKernel(s.to_string()))
    }
}

/// Exact expansion of a named kernel.
pub fn canonical(name: KernelName) -> KernelExpr {
    use BasisKernel as B;
    let c = |re: i64, re_den: i64, im: i64, im_den: i64| ExactComplex::from_ratios(re, re_den, im, im_den);
    let terms: Vec<(BasisKernel, ExactComplex)> = match name {
        KernelName::Ret => vec![(B::RET_POS, c(1, 1, 0, 1)), (B::RET_NEG, c(1, 1, 0, 1))],
        KernelName::Adv => vec![(B::ADV_POS, c(1, 1, 0, 1)), (B::ADV_NEG, c(1, 1, 0, 1))],
        KernelName::Bar => B::ALL.into_iter().map(|b| (b, c(1, 2, 0, 1))).collect(),
        KernelName::Odd => vec![
            (B::RET_POS, c(1, 1, 0, 1)),
            (B::RET_NEG, c(1, 1, 0, 1)),
            (B::ADV_POS, c(-1, 1, 0, 1)),
            (B::ADV_NEG, c(-1, 1, 0, 1)),
        ],
        // i (D+ - D-)
        KernelName::One => vec![
            (B::RET_POS, c(0, 1, 1, 1)),
            (B::ADV_POS, c(0, 1, -1, 1)),
            (B::RET_NEG, c(0, 1, -1, 1)),
            (B::ADV_NEG, c(0, 1, 1, 1)),
        ],
        KernelName::Feynman => vec![(B::RET_POS, c(1, 1, 0, 1)), (B::ADV_NEG, c(1, 1, 0, 1))],
        KernelName::Dyson => vec![(B::RET_NEG, c(1, 1, 0, 1)), (B::ADV_POS, c(1, 1, 0, 1))],
        KernelName::DPlus => vec![(B::RET_POS, c(1, 1, 0, 1)), (B::ADV_POS, c(-1, 1, 0, 1))],
        KernelName::DMinus => vec![(B::RET_NEG, c(1, 1, 0, 1)), (B::ADV_NEG, c(-1, 1, 0, 1))],
        // D+ = -iΔ+  =>  Δ+ = i D+
        KernelName::DeltaPlus => vec![(B::RET_POS, c(0, 1, 1, 1)), (B::ADV_POS, c(0, 1, -1, 1))],
        // D- = iΔ-  =>  Δ- = -i D-
        KernelName::DeltaMinus => vec![(B::RET_NEG, c(0, 1, -1, 1)), (B::ADV_NEG, c(0, 1, 1, 1))],
    };
    KernelExpr::from_terms(terms)
}

/// Expansion of a kernel given by name string.
pub fn canonical_by_name(name: &str) -> Result<KernelExpr> {
    Ok(canonical(name.parse()?))
}

/// `scalar_a·a + scalar_b·b`.
pub fn combine(a: &KernelExpr, scalar_a: &ExactComplex, b: &KernelExpr, scalar_b: &ExactComplex) -> KernelExpr {
    KernelExpr {
        coefficients: std::array::from_fn(|k| {
            &(&a.coefficients[k] * scalar_a) + &(&b.coefficients[k] * scalar_b)
        }),
    }
}

pub fn reflect(a: &KernelExpr) -> KernelExpr {
    a.reflect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct IdentityCheck {
    /// Short machine name, e.g. `feynman_decomposition`.
    pub name: &'static str,
    /// The relation in conventional notation.
    pub relation: &'static str,
    pub holds: bool,
    /// `lhs - rhs`, rendered; `0` when the identity holds.
    pub difference: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct IdentityReport {
    pub checks: Vec<IdentityCheck>,
}

impl IdentityReport {
    pub fn all_hold(&self) -> bool {
        self.checks.iter().all(|c| c.holds)
    }

    pub fn get(&self, name: &str) -> Option<&IdentityCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn check(name: &'static str, relation: &'static str, lhs: &KernelExpr, rhs: &KernelExpr) -> IdentityCheck {
    let diff = lhs - rhs;
    IdentityCheck {
        name,
        relation,
        holds: diff.is_zero(),
        difference: diff.to_string(),
    }
}

/// Runs every propagator identity by exact comparison. Failures are reported
/// in the returned value, never raised.
pub fn verify_identity_suite() -> IdentityReport {
    use KernelName as K;
    let k = canonical;
    let one = ExactComplex::one();
    let half = ExactComplex::real(1, 2);
    let i = ExactComplex::i();
    let minus_i = ExactComplex::imag(-1, 1);
    let minus_i_half = ExactComplex::imag(-1, 2);
    let i_half = ExactComplex::imag(1, 2);
    let minus_one = ExactComplex::real(-1, 1);

    let (rp, rm, ap, am) = (
        KernelExpr::basis(BasisKernel::RET_POS),
        KernelExpr::basis(BasisKernel::RET_NEG),
        KernelExpr::basis(BasisKernel::ADV_POS),
        KernelExpr::basis(BasisKernel::ADV_NEG),
    );

    // Term-by-term expansion of D̄ - (i/2) D1 written out in components.
    let symmetric_half = (&(&rp + &ap) + &(&rm + &am)).scale(&half);
    let free_half = (&(&rp - &ap) - &(&rm - &am)).scale(&half);
    let expanded = &symmetric_half + &free_half;

    let dyson = k(K::Dyson);
    let feynman = k(K::Feynman);
    let differs_everywhere = BasisKernel::ALL
        .into_iter()
        .all(|b| feynman.coefficient(b) != dyson.coefficient(b));

    let mut checks = vec![
        check(
            "time_symmetric_definition",
            "D̄ = ½(D_ret + D_adv)",
            &k(K::Bar),
            &combine(&k(K::Ret), &half, &k(K::Adv), &half),
        ),
        check(
            "odd_definition",
            "D = D_ret - D_adv",
            &k(K::Odd),
            &(&k(K::Ret) - &k(K::Adv)),
        ),
        check(
            "retarded_decomposition",
            "D_ret = D̄ + ½D",
            &k(K::Ret),
            &combine(&k(K::Bar), &one, &k(K::Odd), &half),
        ),
        check(
            "commutator_cut_form",
            "iD = Δ+ - Δ-",
            &k(K::Odd).scale(&i),
            &(&k(K::DeltaPlus) - &k(K::DeltaMinus)),
        ),
        check(
            "odd_frequency_split",
            "D = D+ + D- = (-iΔ+) + (iΔ-)",
            &k(K::Odd),
            &combine(&k(K::DeltaPlus), &minus_i, &k(K::DeltaMinus), &i),
        ),
        check(
            "odd_frequency_components",
            "D = D+ + D-",
            &k(K::Odd),
            &(&k(K::DPlus) + &k(K::DMinus)),
        ),
        check(
            "negative_frequency_sign",
            "iD- = -Δ-",
            &k(K::DMinus).scale(&i),
            &k(K::DeltaMinus).scale(&minus_one),
        ),
        check(
            "even_solution_from_odd_parts",
            "D1 = i(D+ - D-)",
            &k(K::One),
            &(&k(K::DPlus) - &k(K::DMinus)).scale(&i),
        ),
        check(
            "even_solution_from_cut_propagators",
            "D1 = Δ+ + Δ-",
            &k(K::One),
            &(&k(K::DeltaPlus) + &k(K::DeltaMinus)),
        ),
        check(
            "feynman_definition",
            "D_F = D_ret^+ + D_adv^-",
            &k(K::Feynman),
            &(&rp + &am),
        ),
        check(
            "feynman_decomposition",
            "D_F = D̄ - (i/2) D1",
            &k(K::Feynman),
            &combine(&k(K::Bar), &one, &k(K::One), &minus_i_half),
        ),
        check(
            "component_expansion",
            "½[(R+ + A+) + (R- + A-)] + ½[(R+ - A+) - (R- - A-)] = R+ + A-",
            &expanded,
            &k(K::Feynman),
        ),
        check(
            "component_expansion_matches_decomposition",
            "½[(R+ + A+) + (R- + A-)] + ½[(R+ - A+) - (R- - A-)] = D̄ - (i/2) D1",
            &expanded,
            &combine(&k(K::Bar), &one, &k(K::One), &minus_i_half),
        ),
        check(
            "reflection_positive_frequency",
            "D+(x-y) = -D-(y-x)",
            &k(K::DPlus).reflect(),
            &k(K::DMinus).scale(&minus_one),
        ),
        check(
            "reflection_retarded",
            "D_ret(-x) = D_adv(x)",
            &k(K::Ret).reflect(),
            &k(K::Adv),
        ),
        check(
            "reflection_involution",
            "reflect(reflect(D_F)) = D_F",
            &k(K::Feynman).reflect().reflect(),
            &k(K::Feynman),
        ),
        check(
            "dyson_decomposition",
            "D_Dyson = D̄ + (i/2) D1 = D_ret^- + D_adv^+",
            &combine(&k(K::Bar), &one, &k(K::One), &i_half),
            &(&ap + &rm),
        ),
        check(
            "feynman_minus_dyson",
            "D_F - D_Dyson = D+ - D- = -i D1",
            &(&k(K::Feynman) - &k(K::Dyson)),
            &k(K::One).scale(&minus_i),
        ),
    ];
    checks.push(IdentityCheck {
        name: "dyson_distinct_from_feynman",
        relation: "D_Dyson and D_F differ in every basis coefficient",
        holds: differs_everywhere,
        difference: (&feynman - &dyson).to_string(),
    });

    IdentityReport { checks }
}
