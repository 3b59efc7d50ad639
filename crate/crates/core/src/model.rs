//! Type vectors, population distributions and reproducible sampling.

use std::fmt;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng::{substream, StreamRng};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Population {
    Pop1,
    Pop2,
}

impl Population {
    pub fn label(self) -> &'static str {
        match self {
            Population::Pop1 => "pop1",
            Population::Pop2 => "pop2",
        }
    }
}

impl fmt::Display for Population {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// One agent's parameters.
///
/// `lambda1` and `lambda2` are the weights the agent puts on the mean
/// terminal wealth of population 1 and population 2 respectively. `nu` is the
/// intensity of the Poisson measure that `gamma` loads on: idiosyncratic for
/// population 1, common for population 2.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TypeVector {
    pub xi: f64,
    pub delta: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub mu: f64,
    pub sigma: f64,
    pub sigma0: f64,
    pub gamma: f64,
    pub nu: f64,
}

impl TypeVector {
    /// `σ² + σ⁰²`
    pub fn total_variance(&self) -> f64 {
        self.sigma * self.sigma + self.sigma0 * self.sigma0
    }

    /// No jump exposure in the best-response condition.
    pub fn is_jump_free(&self) -> bool {
        self.gamma == 0.0 || self.nu == 0.0
    }

    /// The jump-free, competition-free optimum `μ / (δ(σ² + σ⁰²))`.
    pub fn merton_ratio(&self) -> f64 {
        self.mu / (self.delta * self.total_variance())
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        let fields = [
            ("xi", self.xi),
            ("delta", self.delta),
            ("lambda1", self.lambda1),
            ("lambda2", self.lambda2),
            ("mu", self.mu),
            ("sigma", self.sigma),
            ("sigma0", self.sigma0),
            ("gamma", self.gamma),
            ("nu", self.nu),
        ];
        if let Some((name, _)) = fields.iter().find(|(_, v)| !v.is_finite()) {
            return Err(format!("{name} is not finite"));
        }
        if self.delta <= 0.0 {
            return Err(format!("delta must be positive, got {}", self.delta));
        }
        if self.nu < 0.0 {
            return Err(format!("nu must be non-negative, got {}", self.nu));
        }
        if self.sigma < 0.0 || self.sigma0 < 0.0 {
            return Err("volatilities must be non-negative".into());
        }
        if self.lambda1 < 0.0 || self.lambda2 < 0.0 {
            return Err("competition weights must be non-negative".into());
        }
        if self.total_variance() <= 0.0 {
            return Err("sigma^2 + sigma0^2 must be positive".into());
        }
        Ok(())
    }
}

/// Truncated-Gaussian marginal: `mean + std·Z` with `|Z| ≤ k`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Marginal {
    pub mean: f64,
    pub std: f64,
}

impl Marginal {
    pub fn new(mean: f64, std: f64) -> Self {
        Self { mean, std }
    }

    pub fn fixed(value: f64) -> Self {
        Self { mean: value, std: 0.0 }
    }

    /// Standard deviation as a fraction of `|mean|`.
    pub fn relative(mean: f64, fraction: f64) -> Self {
        Self {
            mean,
            std: mean.abs() * fraction,
        }
    }

    pub fn bounds(&self, halfwidth: f64) -> (f64, f64) {
        (
            self.mean - halfwidth * self.std,
            self.mean + halfwidth * self.std,
        )
    }

    fn at(&self, z: f64) -> f64 {
        self.mean + self.std * z
    }
}

/// Fields of a type vector that carry a distribution, in draw order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Field {
    Xi,
    Delta,
    Lambda1,
    Lambda2,
    Mu,
    Sigma,
    Sigma0,
    Gamma,
}

impl Field {
    pub const ALL: [Field; 8] = [
        Field::Xi,
        Field::Delta,
        Field::Lambda1,
        Field::Lambda2,
        Field::Mu,
        Field::Sigma,
        Field::Sigma0,
        Field::Gamma,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Field::Xi => "xi",
            Field::Delta => "delta",
            Field::Lambda1 => "lambda1",
            Field::Lambda2 => "lambda2",
            Field::Mu => "mu",
            Field::Sigma => "sigma",
            Field::Sigma0 => "sigma0",
            Field::Gamma => "gamma",
        }
    }

    pub fn from_name(name: &str) -> Option<Field> {
        Field::ALL.into_iter().find(|f| f.name() == name)
    }

    fn slot(self) -> usize {
        self as usize
    }
}

/// Distribution of one population's type vector.
#[derive(Clone, Debug, PartialEq)]
pub struct PopulationSpec {
    pub population: Population,
    pub xi: Marginal,
    pub delta: Marginal,
    pub lambda1: Marginal,
    pub lambda2: Marginal,
    pub mu: Marginal,
    pub sigma: Marginal,
    pub sigma0: Marginal,
    pub gamma: Marginal,
    /// Jump intensity: `ν¹` (idiosyncratic) for population 1, `ν` (common) for population 2.
    pub nu: f64,
    /// Truncation half-width in standard deviations.
    pub truncation: f64,
    /// Draw one standard score for both competition weights.
    pub tie_lambda: bool,
}

impl PopulationSpec {
    /// Calibration of the numerical study: `δ = 1`, `γ = −0.04`, `ν = 4.7`,
    /// `σ = σ⁰ = 0.11`, `μ = 0.25`, every std at 10% of its mean and
    /// truncation at 3 std. The population's weight on its own mean is
    /// `own_lambda`; the cross weight is zero. Initial wealth is 1 ± 0.1.
    pub fn table1(population: Population, own_lambda: Marginal) -> Self {
        let (lambda1, lambda2) = match population {
            Population::Pop1 => (own_lambda, Marginal::fixed(0.0)),
            Population::Pop2 => (Marginal::fixed(0.0), own_lambda),
        };
        Self {
            population,
            xi: Marginal::relative(1.0, 0.1),
            delta: Marginal::relative(1.0, 0.1),
            lambda1,
            lambda2,
            mu: Marginal::relative(0.25, 0.1),
            sigma: Marginal::relative(0.11, 0.1),
            sigma0: Marginal::relative(0.11, 0.1),
            gamma: Marginal::relative(-0.04, 0.1),
            nu: 4.7,
            truncation: 3.0,
            tie_lambda: false,
        }
    }

    /// A population that holds nothing in equilibrium and looks at nobody:
    /// `μ = γ = λ = 0`. Used to switch one population off.
    pub fn inert(population: Population, sigma: f64, sigma0: f64) -> Self {
        Self {
            population,
            xi: Marginal::fixed(0.0),
            delta: Marginal::fixed(1.0),
            lambda1: Marginal::fixed(0.0),
            lambda2: Marginal::fixed(0.0),
            mu: Marginal::fixed(0.0),
            sigma: Marginal::fixed(sigma),
            sigma0: Marginal::fixed(sigma0),
            gamma: Marginal::fixed(0.0),
            nu: 0.0,
            truncation: 3.0,
            tie_lambda: false,
        }
    }

    pub fn marginal(&self, field: Field) -> Marginal {
        match field {
            Field::Xi => self.xi,
            Field::Delta => self.delta,
            Field::Lambda1 => self.lambda1,
            Field::Lambda2 => self.lambda2,
            Field::Mu => self.mu,
            Field::Sigma => self.sigma,
            Field::Sigma0 => self.sigma0,
            Field::Gamma => self.gamma,
        }
    }

    pub fn marginal_mut(&mut self, field: Field) -> &mut Marginal {
        match field {
            Field::Xi => &mut self.xi,
            Field::Delta => &mut self.delta,
            Field::Lambda1 => &mut self.lambda1,
            Field::Lambda2 => &mut self.lambda2,
            Field::Mu => &mut self.mu,
            Field::Sigma => &mut self.sigma,
            Field::Sigma0 => &mut self.sigma0,
            Field::Gamma => &mut self.gamma,
        }
    }

    /// Weight this population puts on its own mean (`λ₁₁` or `λ₂₂`).
    pub fn own_lambda(&self) -> Marginal {
        match self.population {
            Population::Pop1 => self.lambda1,
            Population::Pop2 => self.lambda2,
        }
    }

    pub fn own_lambda_mut(&mut self) -> &mut Marginal {
        match self.population {
            Population::Pop1 => &mut self.lambda1,
            Population::Pop2 => &mut self.lambda2,
        }
    }

    /// The type vector sitting at every marginal's mean.
    pub fn mean_type(&self) -> TypeVector {
        self.materialize(&StandardDraws::zero())
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |reason: String| Error::InvalidSpec {
            population: self.population,
            reason,
        };
        let k = self.truncation;
        if !(k.is_finite() && k > 0.0) {
            return Err(fail(format!("truncation half-width must be positive, got {k}")));
        }
        if !(self.nu.is_finite() && self.nu >= 0.0) {
            return Err(fail(format!("nu must be finite and non-negative, got {}", self.nu)));
        }
        for field in Field::ALL {
            let m = self.marginal(field);
            if !(m.mean.is_finite() && m.std.is_finite() && m.std >= 0.0) {
                return Err(fail(format!(
                    "{}: mean and std must be finite with std >= 0",
                    field.name()
                )));
            }
        }
        let lower = |field: Field| self.marginal(field).bounds(k).0;
        if lower(Field::Delta) <= 0.0 {
            return Err(fail(format!(
                "truncation admits delta <= 0 (lower bound {})",
                lower(Field::Delta)
            )));
        }
        for field in [Field::Lambda1, Field::Lambda2, Field::Sigma, Field::Sigma0] {
            if lower(field) < 0.0 {
                return Err(fail(format!(
                    "truncation admits negative {} (lower bound {})",
                    field.name(),
                    lower(field)
                )));
            }
        }
        if lower(Field::Sigma) <= 0.0 && lower(Field::Sigma0) <= 0.0 {
            return Err(fail(
                "truncation admits sigma^2 + sigma0^2 = 0".to_string(),
            ));
        }
        Ok(())
    }

    /// Map standard scores to a type vector. Pure; no randomness.
    pub fn materialize(&self, draws: &StandardDraws) -> TypeVector {
        let z = |field: Field| draws.0[field.slot()];
        let lambda2_score = if self.tie_lambda {
            z(Field::Lambda1)
        } else {
            z(Field::Lambda2)
        };
        TypeVector {
            xi: self.xi.at(z(Field::Xi)),
            delta: self.delta.at(z(Field::Delta)),
            lambda1: self.lambda1.at(z(Field::Lambda1)),
            lambda2: self.lambda2.at(lambda2_score),
            mu: self.mu.at(z(Field::Mu)),
            sigma: self.sigma.at(z(Field::Sigma)),
            sigma0: self.sigma0.at(z(Field::Sigma0)),
            gamma: self.gamma.at(z(Field::Gamma)),
            nu: self.nu,
        }
    }
}

/// Standard scores for every [`Field`], each in `[−k, k]`.
///
/// Keeping the scores separate from the marginals lets a sweep reuse the
/// same draws while the marginals move.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StandardDraws(pub [f64; 8]);

impl StandardDraws {
    pub fn zero() -> Self {
        Self([0.0; 8])
    }

    pub fn sample<R: Rng + ?Sized>(rng: &mut R, halfwidth: f64) -> Self {
        let mut out = [0.0; 8];
        for slot in out.iter_mut() {
            *slot = truncated_standard_normal(rng, halfwidth);
        }
        Self(out)
    }
}

/// Rejection from the untruncated standard normal onto `[−k, k]`.
pub fn truncated_standard_normal<R: Rng + ?Sized>(rng: &mut R, halfwidth: f64) -> f64 {
    loop {
        let z: f64 = rng.sample(StandardNormal);
        if z.abs() <= halfwidth {
            return z;
        }
    }
}

pub fn sample_type_vector(spec: &PopulationSpec, rng: &mut StreamRng) -> Result<TypeVector> {
    spec.validate()?;
    Ok(spec.materialize(&StandardDraws::sample(rng, spec.truncation)))
}

/// Fixed-point triple of conditional-mean loadings.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EquilibriumMeans {
    /// `E[π¹σ⁰·¹]`
    pub x1: f64,
    /// `E[π²σ⁰·²]`
    pub x2: f64,
    /// `E[π²γ]`
    pub y: f64,
}

impl EquilibriumMeans {
    pub const ZERO: EquilibriumMeans = EquilibriumMeans {
        x1: 0.0,
        x2: 0.0,
        y: 0.0,
    };

    pub fn new(x1: f64, x2: f64, y: f64) -> Self {
        Self { x1, x2, y }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.x1, self.x2, self.y]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn norm(&self) -> f64 {
        (self.x1 * self.x1 + self.x2 * self.x2 + self.y * self.y).sqrt()
    }

    pub fn distance(&self, other: &EquilibriumMeans) -> f64 {
        (*self - *other).norm()
    }

    pub fn is_finite(&self) -> bool {
        self.x1.is_finite() && self.x2.is_finite() && self.y.is_finite()
    }

    /// `(1 − d)·self + d·target`
    pub fn blend(&self, target: &EquilibriumMeans, d: f64) -> Self {
        if d == 1.0 {
            return *target;
        }
        Self::new(
            (1.0 - d) * self.x1 + d * target.x1,
            (1.0 - d) * self.x2 + d * target.x2,
            (1.0 - d) * self.y + d * target.y,
        )
    }
}

impl std::ops::Sub for EquilibriumMeans {
    type Output = EquilibriumMeans;

    fn sub(self, rhs: EquilibriumMeans) -> EquilibriumMeans {
        EquilibriumMeans::new(self.x1 - rhs.x1, self.x2 - rhs.x2, self.y - rhs.y)
    }
}

/// A finite sample of agents from both populations.
#[derive(Clone, Debug, PartialEq)]
pub struct AgentRoster {
    pub pop1: Vec<TypeVector>,
    pub pop2: Vec<TypeVector>,
    pub seed: u64,
}

impl AgentRoster {
    pub fn population(&self, population: Population) -> &[TypeVector] {
        match population {
            Population::Pop1 => &self.pop1,
            Population::Pop2 => &self.pop2,
        }
    }

    pub fn population_mut(&mut self, population: Population) -> &mut Vec<TypeVector> {
        match population {
            Population::Pop1 => &mut self.pop1,
            Population::Pop2 => &mut self.pop2,
        }
    }

    pub fn len(&self) -> usize {
        self.pop1.len() + self.pop2.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pop1.is_empty() && self.pop2.is_empty()
    }

    /// First `n1` and `n2` agents. Rosters are drawn agent-by-agent from
    /// per-agent substreams, so a prefix equals a smaller roster drawn with
    /// the same seed.
    pub fn prefix(&self, n1: usize, n2: usize) -> AgentRoster {
        AgentRoster {
            pop1: self.pop1[..n1.min(self.pop1.len())].to_vec(),
            pop2: self.pop2[..n2.min(self.pop2.len())].to_vec(),
            seed: self.seed,
        }
    }

    /// `‖λ‖∞` over every agent and both weights.
    pub fn lambda_sup(&self) -> f64 {
        self.pop1
            .iter()
            .chain(&self.pop2)
            .map(|a| a.lambda1.abs().max(a.lambda2.abs()))
            .fold(0.0, f64::max)
    }

    /// Agents in a stable `(population, index)` order.
    pub fn iter(&self) -> impl Iterator<Item = (Population, usize, &TypeVector)> {
        self.pop1
            .iter()
            .enumerate()
            .map(|(i, a)| (Population::Pop1, i, a))
            .chain(
                self.pop2
                    .iter()
                    .enumerate()
                    .map(|(i, a)| (Population::Pop2, i, a)),
            )
    }
}

/// Standard scores for a roster: agent `i` of population `p` reads the
/// substream `(seed, "roster/<p>", i)`.
pub fn roster_draws(
    n1: usize,
    n2: usize,
    seed: u64,
    halfwidth1: f64,
    halfwidth2: f64,
) -> (Vec<StandardDraws>, Vec<StandardDraws>) {
    let draw = |label: &str, n: usize, k: f64| -> Vec<StandardDraws> {
        (0..n)
            .map(|i| StandardDraws::sample(&mut substream(seed, label, i as u64), k))
            .collect()
    };
    (
        draw("roster/pop1", n1, halfwidth1),
        draw("roster/pop2", n2, halfwidth2),
    )
}

/// Build a roster from pre-drawn standard scores.
pub fn roster_from_draws(
    spec1: &PopulationSpec,
    spec2: &PopulationSpec,
    draws1: &[StandardDraws],
    draws2: &[StandardDraws],
    seed: u64,
) -> Result<AgentRoster> {
    spec1.validate()?;
    spec2.validate()?;
    Ok(AgentRoster {
        pop1: draws1.iter().map(|d| spec1.materialize(d)).collect(),
        pop2: draws2.iter().map(|d| spec2.materialize(d)).collect(),
        seed,
    })
}

pub fn sample_roster(
    spec1: &PopulationSpec,
    spec2: &PopulationSpec,
    n1: usize,
    n2: usize,
    seed: u64,
) -> Result<AgentRoster> {
    if n1 == 0 || n2 == 0 {
        return Err(Error::Config(format!(
            "roster sizes must be at least 1 (got n1 = {n1}, n2 = {n2})"
        )));
    }
    spec1.validate()?;
    spec2.validate()?;
    let (d1, d2) = roster_draws(n1, n2, seed, spec1.truncation, spec2.truncation);
    roster_from_draws(spec1, spec2, &d1, &d2, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn table1_pop2() -> PopulationSpec {
        PopulationSpec::table1(Population::Pop2, Marginal::new(0.2, 0.02))
    }

    fn degenerate(spec: &PopulationSpec) -> PopulationSpec {
        let mut s = spec.clone();
        for field in Field::ALL {
            s.marginal_mut(field).std = 0.0;
        }
        s
    }

    #[test]
    fn zero_std_returns_means() {
        let spec = degenerate(&table1_pop2());
        let mut rng = substream(1, "t", 0);
        let tv = sample_type_vector(&spec, &mut rng).unwrap();
        assert_eq!(tv, spec.mean_type());
        assert_eq!(tv.delta, 1.0);
        assert_eq!(tv.gamma, -0.04);
        assert_eq!(tv.lambda2, 0.2);
    }

    #[test]
    fn delta_stays_in_truncation_box() {
        let spec = table1_pop2();
        let mut rng = substream(3, "t", 0);
        for _ in 0..20_000 {
            let tv = sample_type_vector(&spec, &mut rng).unwrap();
            assert!((0.7..=1.3).contains(&tv.delta), "delta {}", tv.delta);
        }
    }

    #[test]
    fn truncated_mean_of_mu() {
        let spec = table1_pop2();
        let mut rng = substream(11, "t", 0);
        let n = 100_000;
        let mean = (0..n)
            .map(|_| sample_type_vector(&spec, &mut rng).unwrap().mu)
            .sum::<f64>()
            / n as f64;
        assert!((mean - 0.25).abs() < 3.0 * 0.025 / (n as f64).sqrt());
    }

    #[test]
    fn truncated_variance_matches_formula() {
        use statrs::distribution::{Continuous, ContinuousCDF, Normal};
        let k = 3.0;
        let n01 = Normal::new(0.0, 1.0).unwrap();
        // Var of N(0,1) conditioned on |Z| <= k.
        let factor = 1.0 - 2.0 * k * n01.pdf(k) / (2.0 * n01.cdf(k) - 1.0);
        assert!((factor - 0.9733).abs() < 1e-4);

        let spec = table1_pop2();
        let mut rng = substream(12, "t", 0);
        let n = 100_000;
        let xs: Vec<f64> = (0..n)
            .map(|_| sample_type_vector(&spec, &mut rng).unwrap().sigma0)
            .collect();
        let m = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        let expected = 0.011f64.powi(2) * factor;
        assert!((var / expected - 1.0).abs() < 0.05, "var {var} vs {expected}");
    }

    #[test]
    fn rejects_spec_admitting_nonpositive_delta() {
        let mut spec = table1_pop2();
        spec.delta = Marginal::new(1.0, 0.4);
        assert!(matches!(spec.validate(), Err(Error::InvalidSpec { .. })));
        let mut rng = substream(0, "t", 0);
        assert!(sample_type_vector(&spec, &mut rng).is_err());
    }

    #[test]
    fn rejects_spec_admitting_zero_total_volatility() {
        let mut spec = table1_pop2();
        spec.sigma = Marginal::fixed(0.0);
        spec.sigma0 = Marginal::new(0.05, 0.05);
        assert!(spec.validate().is_err());
        spec.sigma0 = Marginal::new(0.1, 0.01);
        assert!(spec.validate().is_ok());
    }

    #[test]
    fn roster_is_reproducible_and_seed_sensitive() {
        let spec1 = PopulationSpec::table1(Population::Pop1, Marginal::new(0.2, 0.02));
        let spec2 = table1_pop2();
        let a = sample_roster(&spec1, &spec2, 5, 7, 42).unwrap();
        let b = sample_roster(&spec1, &spec2, 5, 7, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.pop1.len(), 5);
        assert_eq!(a.pop2.len(), 7);
        let c = sample_roster(&spec1, &spec2, 5, 7, 43).unwrap();
        assert_ne!(a.pop1, c.pop1);

        let single = sample_roster(&spec1, &spec2, 1, 1, 9).unwrap();
        assert_eq!(single.len(), 2);
        assert!(sample_roster(&spec1, &spec2, 0, 1, 9).is_err());
    }

    #[test]
    fn roster_prefix_matches_smaller_draw() {
        let spec1 = PopulationSpec::table1(Population::Pop1, Marginal::new(0.2, 0.02));
        let spec2 = table1_pop2();
        let big = sample_roster(&spec1, &spec2, 50, 40, 5).unwrap();
        let small = sample_roster(&spec1, &spec2, 10, 3, 5).unwrap();
        assert_eq!(big.prefix(10, 3), small);
    }

    #[test]
    fn tied_lambda_uses_one_score() {
        let mut spec = table1_pop2();
        spec.lambda1 = Marginal::new(0.2, 0.02);
        spec.lambda2 = Marginal::new(0.2, 0.02);
        spec.tie_lambda = true;
        let mut rng = substream(2, "t", 0);
        for _ in 0..100 {
            let tv = sample_type_vector(&spec, &mut rng).unwrap();
            assert_eq!(tv.lambda1, tv.lambda2);
        }
    }

    proptest! {
        #[test]
        fn samples_lie_in_truncation_box(seed in any::<u64>(), k in 0.5f64..4.0) {
            let mut spec = table1_pop2();
            spec.truncation = k.min(3.0);
            let mut rng = substream(seed, "prop", 0);
            let tv = sample_type_vector(&spec, &mut rng).unwrap();
            let values = [
                (spec.xi, tv.xi), (spec.delta, tv.delta), (spec.lambda2, tv.lambda2),
                (spec.mu, tv.mu), (spec.sigma, tv.sigma), (spec.sigma0, tv.sigma0),
                (spec.gamma, tv.gamma),
            ];
            for (m, x) in values {
                prop_assert!((x - m.mean).abs() <= spec.truncation * m.std * (1.0 + 1e-12));
            }
            prop_assert!(tv.validate().is_ok());
        }

        #[test]
        fn sampling_is_pure_given_stream(seed in any::<u64>(), idx in 0u64..1000) {
            let spec = table1_pop2();
            let a = sample_type_vector(&spec, &mut substream(seed, "p", idx)).unwrap();
            let b = sample_type_vector(&spec, &mut substream(seed, "p", idx)).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
