//! Mean-field equilibrium on a frozen type sample.
//!
//! The equilibrium is the fixed point of
//!
//! ```text
//! R(x₁, x₂, y) = ( E[π¹(λ₁₁x₁ + λ₁₂x₂, 0) σ⁰],
//!                  E[π²(λ₂₁x₁ + λ₂₂x₂, λ₂₂y) σ⁰],
//!                  E[π²(λ₂₁x₁ + λ₂₂x₂, λ₂₂y) γ] )
//! ```
//!
//! where `πᵖ(u, v)` is the best response of a type drawn from population
//! `p`. Expectations are sample averages over a sample drawn once and reused
//! by every iteration, which makes `R` a deterministic map.

use rand::Rng;
use rayon::prelude::*;

use crate::best_response::{solve_best_response, BestResponseInput, DEFAULT_TOL};
use crate::error::{Error, Result};
use crate::fixed_point::{iterate, FixedPointSettings, FixedPointSolution};
use crate::model::{
    sample_roster, AgentRoster, EquilibriumMeans, Population, PopulationSpec, TypeVector,
};
use crate::rng::substream;

/// Best-response input for one agent facing the means `z`.
///
/// Population 1 has no common jumps, so its jump loading `v` is pinned to 0.
/// With `n = Some(N)` the finite-player form with `c = λ_own / N` is used.
pub fn agent_input(
    population: Population,
    zeta: &TypeVector,
    z: &EquilibriumMeans,
    n: Option<usize>,
) -> BestResponseInput {
    let u = zeta.lambda1 * z.x1 + zeta.lambda2 * z.x2;
    let v = match population {
        Population::Pop1 => 0.0,
        Population::Pop2 => zeta.lambda2 * z.y,
    };
    match n {
        None => BestResponseInput::mean_field(*zeta, population, u, v),
        Some(n) => BestResponseInput::finite_player(*zeta, population, u, v, n),
    }
}

/// Per-agent best responses to `z`, in roster order.
///
/// `finite` selects the finite-player forms with `N` equal to each
/// population's roster size.
pub(crate) fn roster_strategies(
    roster: &AgentRoster,
    z: &EquilibriumMeans,
    finite: bool,
    br_tol: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let solve = |population: Population| -> Result<Vec<f64>> {
        let agents = roster.population(population);
        let n = finite.then_some(agents.len());
        agents
            .par_iter()
            .enumerate()
            .map(|(i, zeta)| {
                solve_best_response(&agent_input(population, zeta, z, n), br_tol)
                    .map_err(|e| e.with_agent(population, i))
            })
            .collect()
    };
    Ok((solve(Population::Pop1)?, solve(Population::Pop2)?))
}

/// Sample averages `(E[π¹σ⁰], E[π²σ⁰], E[π²γ])`, summed in roster order.
pub(crate) fn loadings(roster: &AgentRoster, pi1: &[f64], pi2: &[f64]) -> EquilibriumMeans {
    let mean = |terms: &mut dyn Iterator<Item = f64>, n: usize| terms.sum::<f64>() / n as f64;
    let n1 = roster.pop1.len();
    let n2 = roster.pop2.len();
    EquilibriumMeans::new(
        mean(&mut roster.pop1.iter().zip(pi1).map(|(a, p)| p * a.sigma0), n1),
        mean(&mut roster.pop2.iter().zip(pi2).map(|(a, p)| p * a.sigma0), n2),
        mean(&mut roster.pop2.iter().zip(pi2).map(|(a, p)| p * a.gamma), n2),
    )
}

/// `min(√(1 + (σ⁰/γ)²), √(1 + (γ/σ⁰)²))`, which is `√(1 + r²)` with `r` the
/// smaller of `|σ⁰|, |γ|` over the larger. Equals 1 when either is zero.
fn contraction_branch(sigma0: f64, gamma: f64) -> f64 {
    let (a, b) = (sigma0.abs(), gamma.abs());
    let (small, large) = if a <= b { (a, b) } else { (b, a) };
    if large == 0.0 {
        return 1.0;
    }
    (small / large).hypot(1.0)
}

/// `ε = 1 / (6 · max_i branch_i)` over the population-2 agents of a roster.
pub fn roster_contraction_epsilon(roster: &AgentRoster) -> f64 {
    let worst = roster
        .pop2
        .iter()
        .map(|a| contraction_branch(a.sigma0, a.gamma))
        .fold(1.0, f64::max);
    1.0 / (6.0 * worst)
}

/// Contraction diagnostics for a frozen sample.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContractionCheck {
    pub epsilon: f64,
    /// `‖λ‖∞` over the sample.
    pub lambda_sup: f64,
    /// `‖λ‖∞ < ε`
    pub guaranteed: bool,
}

impl ContractionCheck {
    pub fn for_roster(roster: &AgentRoster) -> Self {
        let epsilon = roster_contraction_epsilon(roster);
        let lambda_sup = roster.lambda_sup();
        Self {
            epsilon,
            lambda_sup,
            guaranteed: lambda_sup < epsilon,
        }
    }
}

/// Largest `‖R(z) − R(z′)‖ / ‖z − z′‖` over random pairs in `[−r, r]³`.
pub(crate) fn lipschitz_estimate<F>(map: F, n_pairs: usize, box_radius: f64, seed: u64) -> Result<f64>
where
    F: Fn(&EquilibriumMeans) -> Result<EquilibriumMeans> + Sync,
{
    if n_pairs == 0 {
        return Err(Error::Precondition("n_pairs must be at least 1".into()));
    }
    if !(box_radius > 0.0 && box_radius.is_finite()) {
        return Err(Error::Precondition(format!(
            "box radius must be positive, got {box_radius}"
        )));
    }
    let ratios: Vec<f64> = (0..n_pairs)
        .into_par_iter()
        .map(|k| {
            let mut rng = substream(seed, "lipschitz", k as u64);
            let mut point = || {
                EquilibriumMeans::new(
                    rng.random_range(-box_radius..=box_radius),
                    rng.random_range(-box_radius..=box_radius),
                    rng.random_range(-box_radius..=box_radius),
                )
            };
            let (a, b) = (point(), point());
            let gap = a.distance(&b);
            if gap == 0.0 {
                return Ok(0.0);
            }
            Ok(map(&a)?.distance(&map(&b)?) / gap)
        })
        .collect::<Result<_>>()?;
    Ok(ratios.into_iter().fold(0.0, f64::max))
}

fn jump_free_pop1(roster: &AgentRoster) -> Result<()> {
    if let Some(i) = roster.pop1.iter().position(|a| a.gamma != 0.0) {
        return Err(Error::Precondition(format!(
            "closed forms need a jump-free population 1; agent {i} has gamma = {}",
            roster.pop1[i].gamma
        )));
    }
    Ok(())
}

/// Sample versions of the linear relation `x₁ = A x₂ + B` for a jump-free
/// population 1. With `n = Some(N)` each `σ²` carries the finite-player
/// factor `1 − λ₁₁/N`, giving `(Aᴺ, Bᴺ)`.
pub fn linear_coefficients(roster: &AgentRoster, n: Option<usize>) -> Result<(f64, f64)> {
    jump_free_pop1(roster)?;
    let m = roster.pop1.len() as f64;
    let (mut own, mut cross, mut free) = (0.0, 0.0, 0.0);
    for a in &roster.pop1 {
        let s = finite_diffusion(a, n);
        own += a.sigma0 * a.sigma0 * a.lambda1 / s;
        cross += a.sigma0 * a.sigma0 * a.lambda2 / s;
        free += a.mu * a.sigma0 / (a.delta * s);
    }
    let denom = 1.0 - own / m;
    if denom == 0.0 {
        return Err(Error::Precondition(
            "E[σ⁰²λ₁₁/S] = 1: the linear relation is singular".into(),
        ));
    }
    Ok((cross / m / denom, free / m / denom))
}

fn finite_diffusion(a: &TypeVector, n: Option<usize>) -> f64 {
    let c = n.map_or(0.0, |n| a.lambda1 / n as f64);
    (1.0 - c) * a.sigma * a.sigma + a.sigma0 * a.sigma0
}

/// Per-agent equilibrium strategies of a jump-free population 1 that only
/// looks at itself (`λ₁₂ = 0`):
/// `π = σ⁰/S · λ₁₁ · B + μ/(δS)`.
pub fn closed_form_mfe_pop1(roster: &AgentRoster, n: Option<usize>) -> Result<Vec<f64>> {
    if let Some(i) = roster.pop1.iter().position(|a| a.lambda2 != 0.0) {
        return Err(Error::Precondition(format!(
            "closed form needs lambda12 = 0; population 1 agent {i} has {}",
            roster.pop1[i].lambda2
        )));
    }
    let (_, b) = linear_coefficients(roster, n)?;
    Ok(roster
        .pop1
        .iter()
        .map(|a| {
            let s = finite_diffusion(a, n);
            a.sigma0 / s * a.lambda1 * b + a.mu / (a.delta * s)
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct MfeProblem {
    pub spec1: PopulationSpec,
    pub spec2: PopulationSpec,
    /// Agents per population in the frozen sample.
    pub expectation_sample_size: usize,
    pub expectation_seed: u64,
    pub settings: FixedPointSettings,
    pub br_tol: f64,
}

impl MfeProblem {
    pub fn new(spec1: PopulationSpec, spec2: PopulationSpec, sample_size: usize, seed: u64) -> Self {
        Self {
            spec1,
            spec2,
            expectation_sample_size: sample_size,
            expectation_seed: seed,
            settings: FixedPointSettings::default(),
            br_tol: DEFAULT_TOL,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.spec1.validate()?;
        self.spec2.validate()?;
        self.settings.validate()?;
        if self.expectation_sample_size == 0 {
            return Err(Error::Config("expectation sample size must be at least 1".into()));
        }
        if !(self.br_tol > 0.0) {
            return Err(Error::Config(format!("br_tol must be positive, got {}", self.br_tol)));
        }
        Ok(())
    }

    /// Draw the frozen sample.
    pub fn freeze(&self) -> Result<FrozenMfe> {
        self.validate()?;
        let m = self.expectation_sample_size;
        let roster = sample_roster(&self.spec1, &self.spec2, m, m, self.expectation_seed)?;
        Ok(FrozenMfe {
            roster,
            settings: self.settings,
            br_tol: self.br_tol,
        })
    }
}

/// The mean-field map over a fixed sample of types.
#[derive(Clone, Debug, PartialEq)]
pub struct FrozenMfe {
    pub roster: AgentRoster,
    pub settings: FixedPointSettings,
    pub br_tol: f64,
}

impl FrozenMfe {
    pub fn from_roster(roster: AgentRoster, settings: FixedPointSettings, br_tol: f64) -> Result<Self> {
        settings.validate()?;
        if roster.pop1.is_empty() || roster.pop2.is_empty() {
            return Err(Error::Config("both populations need at least one agent".into()));
        }
        Ok(Self {
            roster,
            settings,
            br_tol,
        })
    }

    pub fn map(&self, z: &EquilibriumMeans) -> Result<EquilibriumMeans> {
        let (pi1, pi2) = self.strategies(z)?;
        Ok(loadings(&self.roster, &pi1, &pi2))
    }

    /// Every sampled agent's best response to `z`.
    pub fn strategies(&self, z: &EquilibriumMeans) -> Result<(Vec<f64>, Vec<f64>)> {
        roster_strategies(&self.roster, z, false, self.br_tol)
    }

    pub fn solve(&self) -> Result<FixedPointSolution> {
        self.solve_from(EquilibriumMeans::ZERO)
    }

    pub fn solve_from(&self, start: EquilibriumMeans) -> Result<FixedPointSolution> {
        iterate(|z| self.map(z), start, &self.settings)
    }

    /// Best response of a representative type at the equilibrium `z`.
    pub fn representative_strategy(
        &self,
        population: Population,
        zeta: &TypeVector,
        z: &EquilibriumMeans,
    ) -> Result<f64> {
        solve_best_response(&agent_input(population, zeta, z, None), self.br_tol)
    }

    pub fn contraction_epsilon(&self) -> ContractionCheck {
        ContractionCheck::for_roster(&self.roster)
    }

    pub fn empirical_lipschitz(&self, n_pairs: usize, box_radius: f64, seed: u64) -> Result<f64> {
        lipschitz_estimate(|z| self.map(z), n_pairs, box_radius, seed)
    }

    /// Mean-field `(A, B)` on the frozen population-1 sample.
    pub fn closed_form_ab(&self) -> Result<(f64, f64)> {
        linear_coefficients(&self.roster, None)
    }
}

/// Solve a problem from scratch: freeze, then iterate from the origin.
pub fn solve_mfe(problem: &MfeProblem) -> Result<FixedPointSolution> {
    problem.freeze()?.solve()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Marginal;
    use proptest::prelude::*;

    fn deterministic(mut spec: PopulationSpec) -> PopulationSpec {
        for field in crate::model::Field::ALL {
            spec.marginal_mut(field).std = 0.0;
        }
        spec
    }

    fn brownian_pop1(lambda: f64) -> PopulationSpec {
        let mut s = PopulationSpec::table1(Population::Pop1, Marginal::relative(lambda, 0.1));
        s.gamma = Marginal::fixed(0.0);
        s.nu = 0.0;
        s
    }

    fn inert2() -> PopulationSpec {
        PopulationSpec::inert(Population::Pop2, 0.11, 0.11)
    }

    fn frozen(spec1: PopulationSpec, spec2: PopulationSpec, m: usize, seed: u64) -> FrozenMfe {
        MfeProblem::new(spec1, spec2, m, seed).freeze().unwrap()
    }

    #[test]
    fn merton_decoupling_without_interaction() {
        let mut s1 = deterministic(brownian_pop1(0.0));
        s1.lambda1 = Marginal::fixed(0.0);
        let mut s2 = deterministic(PopulationSpec::table1(Population::Pop2, Marginal::fixed(0.0)));
        s2.gamma = Marginal::fixed(0.0);
        s2.mu = Marginal::fixed(0.3);
        s2.sigma0 = Marginal::fixed(0.2);
        let f = frozen(s1, s2, 3, 1);
        let r = f.map(&EquilibriumMeans::ZERO).unwrap();
        let merton = |mu: f64, s: f64, s0: f64| s0 * mu / (s * s + s0 * s0);
        assert!((r.x1 - merton(0.25, 0.11, 0.11)).abs() < 1e-12);
        assert!((r.x2 - merton(0.3, 0.11, 0.2)).abs() < 1e-12);
        assert_eq!(r.y, 0.0);

        let sol = f.solve().unwrap();
        assert_eq!(sol.iterations, 1);
        assert_eq!(sol.z, r);
    }

    #[test]
    fn inert_population_two_loads_nothing() {
        let f = frozen(brownian_pop1(0.2), inert2(), 200, 3);
        let sol = f.solve().unwrap();
        assert_eq!(sol.z.x2, 0.0);
        assert_eq!(sol.z.y, 0.0);
        assert!(sol.residual <= f.settings.tol);
        let image = f.map(&sol.z).unwrap();
        assert!(image.distance(&sol.z) <= f.settings.tol);
    }

    #[test]
    fn brownian_pop1_matches_closed_form_b() {
        let f = frozen(brownian_pop1(0.2), inert2(), 500, 11);
        let (a, b) = f.closed_form_ab().unwrap();
        assert_eq!(a, 0.0);
        let sol = f.solve().unwrap();
        assert!((sol.z.x1 - b).abs() < 1e-10, "{} vs {b}", sol.z.x1);

        let closed = closed_form_mfe_pop1(&f.roster, None).unwrap();
        let (pi1, _) = f.strategies(&sol.z).unwrap();
        for (c, p) in closed.iter().zip(&pi1) {
            assert!((c - p).abs() < 1e-9 * (1.0 + c.abs()));
        }
    }

    #[test]
    fn b_without_competition_is_merton_loading() {
        let mut s1 = deterministic(brownian_pop1(0.0));
        s1.lambda1 = Marginal::fixed(0.0);
        let f = frozen(s1, inert2(), 1, 0);
        let (_, b) = f.closed_form_ab().unwrap();
        assert!((b - 0.25 * 0.11 / (2.0 * 0.11 * 0.11)).abs() < 1e-15);
    }

    #[test]
    fn b_is_the_linear_fixed_point() {
        let f = frozen(deterministic(brownian_pop1(0.2)), inert2(), 1, 0);
        let (_, b) = f.closed_form_ab().unwrap();
        // x = slope·x + intercept for the one-dimensional linear map.
        let s = 2.0 * 0.11 * 0.11;
        let slope = 0.2 * 0.11 * 0.11 / s;
        let intercept = 0.25 * 0.11 / s;
        assert!((b - intercept / (1.0 - slope)).abs() < 1e-12);
    }

    #[test]
    fn closed_form_strategy_matches_implicit_solver() {
        let f = frozen(deterministic(brownian_pop1(0.2)), inert2(), 1, 0);
        let (_, b) = f.closed_form_ab().unwrap();
        let zeta = f.roster.pop1[0];
        let closed = closed_form_mfe_pop1(&f.roster, None).unwrap()[0];
        let input = BestResponseInput::mean_field(zeta, Population::Pop1, zeta.lambda1 * b, 0.0);
        let implicit = solve_best_response(&input, DEFAULT_TOL).unwrap();
        assert!((closed - implicit).abs() < 1e-12 * implicit.abs());
        assert!(closed > zeta.merton_ratio());

        let mut none = f.roster.clone();
        none.pop1[0].lambda1 = 0.0;
        let merton = closed_form_mfe_pop1(&none, None).unwrap()[0];
        assert!((merton - zeta.merton_ratio()).abs() < 1e-12);
    }

    #[test]
    fn closed_forms_reject_jumps_and_cross_weights() {
        let f = frozen(
            PopulationSpec::table1(Population::Pop1, Marginal::new(0.2, 0.02)),
            inert2(),
            5,
            0,
        );
        assert!(matches!(f.closed_form_ab(), Err(Error::Precondition(_))));
        let mut s1 = brownian_pop1(0.2);
        s1.lambda2 = Marginal::fixed(0.1);
        let f = frozen(s1, inert2(), 5, 0);
        assert!(f.closed_form_ab().is_ok());
        assert!(matches!(
            closed_form_mfe_pop1(&f.roster, None),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn epsilon_reference_values() {
        let mut s2 = deterministic(PopulationSpec::table1(Population::Pop2, Marginal::fixed(0.0)));
        let f = frozen(inert_pop1(), s2.clone(), 2, 0);
        let check = f.contraction_epsilon();
        assert!((check.epsilon - 0.1566).abs() < 5e-5, "{}", check.epsilon);
        assert!(check.guaranteed);

        s2.gamma = Marginal::fixed(0.11);
        let f = frozen(inert_pop1(), s2.clone(), 2, 0);
        assert!((f.contraction_epsilon().epsilon - 1.0 / (6.0 * 2f64.sqrt())).abs() < 1e-15);

        s2.gamma = Marginal::fixed(0.0);
        let f = frozen(inert_pop1(), s2, 2, 0);
        assert_eq!(f.contraction_epsilon().epsilon, 1.0 / 6.0);
    }

    fn inert_pop1() -> PopulationSpec {
        PopulationSpec::inert(Population::Pop1, 0.11, 0.11)
    }

    #[test]
    fn lipschitz_of_constant_and_linear_maps() {
        let mut s1 = deterministic(brownian_pop1(0.0));
        s1.lambda1 = Marginal::fixed(0.0);
        let f = frozen(s1, inert2(), 1, 0);
        assert_eq!(f.empirical_lipschitz(50, 5.0, 1).unwrap(), 0.0);

        let f = frozen(deterministic(brownian_pop1(0.3)), inert2(), 1, 0);
        let slope = 0.3 * 0.11 * 0.11 / (2.0 * 0.11 * 0.11);
        // Ratios approach the slope from below; the sup over many pairs is close.
        let l = f.empirical_lipschitz(2000, 5.0, 2).unwrap();
        assert!(l <= slope + 1e-8 && l > 0.5 * slope, "{l} vs {slope}");
    }

    #[test]
    fn pop1_strategy_ignores_common_jump_intensity() {
        let s1 = PopulationSpec::table1(Population::Pop1, Marginal::new(0.2, 0.02));
        let s2 = PopulationSpec::table1(Population::Pop2, Marginal::new(0.2, 0.02));
        let a = frozen(s1.clone(), s2.clone(), 100, 5);
        let mut s2b = s2;
        s2b.nu = 9.0;
        let b = frozen(s1, s2b, 100, 5);
        let (za, zb) = (a.solve().unwrap().z, b.solve().unwrap().z);
        assert!((za.y - zb.y).abs() > 1e-6);
        let (pa, _) = a.strategies(&za).unwrap();
        let (pb, _) = b.strategies(&zb).unwrap();
        for (x, y) in pa.iter().zip(&pb) {
            assert!((x - y).abs() <= 1e-12 * x.abs());
        }
    }

    #[test]
    fn solver_failure_names_the_agent() {
        let mut f = frozen(brownian_pop1(0.2), inert2(), 4, 0);
        f.roster.pop2[2].delta = -1.0;
        match f.map(&EquilibriumMeans::ZERO) {
            Err(Error::AgentRootFinding { population, index, .. }) => {
                assert_eq!(population, Population::Pop2);
                assert_eq!(index, 2);
            }
            other => panic!("expected an agent error, got {other:?}"),
        }
    }

    #[test]
    fn map_is_deterministic() {
        let s1 = PopulationSpec::table1(Population::Pop1, Marginal::new(0.2, 0.02));
        let s2 = PopulationSpec::table1(Population::Pop2, Marginal::new(0.2, 0.02));
        let f = frozen(s1, s2, 300, 9);
        let z = EquilibriumMeans::new(0.3, 0.8, -0.2);
        assert_eq!(f.map(&z).unwrap(), f.map(&z).unwrap());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn contraction_regime_has_unique_fixed_point(
            seed in 0u64..1000,
            starts in proptest::collection::vec((-10.0f64..10.0, -10.0f64..10.0, -10.0f64..10.0), 4),
        ) {
            let s1 = PopulationSpec::table1(Population::Pop1, Marginal::new(0.1, 0.01));
            let s2 = PopulationSpec::table1(Population::Pop2, Marginal::new(0.1, 0.01));
            let f = frozen(s1, s2, 50, seed);
            prop_assert!(f.contraction_epsilon().guaranteed);
            let reference = f.solve().unwrap().z;
            for (a, b, c) in starts {
                let z = f.solve_from(EquilibriumMeans::new(a, b, c)).unwrap().z;
                prop_assert!(z.distance(&reference) < 1e-8);
            }
        }

        #[test]
        fn contraction_branch_is_symmetric_and_at_least_one(s in 0.0f64..1.0, g in -1.0f64..1.0) {
            let b = contraction_branch(s, g);
            prop_assert!(b >= 1.0 && b <= 2f64.sqrt() + 1e-15);
            prop_assert_eq!(b, contraction_branch(g, s));
        }
    }
}
