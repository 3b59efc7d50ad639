//! Nash equilibrium of the game with `N₁ + N₂` named players.
//!
//! Each player's best response depends on the others only through the three
//! roster averages, so the equilibrium is the fixed point of a map on ℝ³ in
//! which every agent uses its finite-player best-response form.

use crate::best_response::DEFAULT_TOL;
use crate::error::{Error, Result};
use crate::fixed_point::{iterate, FixedPointSettings, TraceRow};
use crate::mfe::{lipschitz_estimate, loadings, roster_strategies, ContractionCheck};
use crate::model::{AgentRoster, EquilibriumMeans, Population};
use crate::report::{format_number, CsvTable};
use crate::sim::{simulate_wealth, SimConfig, UtilityEstimate};

#[derive(Clone, Debug, PartialEq)]
pub struct NashProblem {
    pub roster: AgentRoster,
    /// Idiosyncratic jump intensity of population 1.
    pub nu1: f64,
    /// Common jump intensity of population 2.
    pub nu: f64,
    pub settings: FixedPointSettings,
    pub br_tol: f64,
    /// Apply the `1 − λ/N` self-influence factors. Switching them off gives
    /// the mean-field map evaluated on the roster.
    pub corrections: bool,
}

impl NashProblem {
    /// Stamps `nu1` and `nu` onto the roster's agents.
    pub fn new(mut roster: AgentRoster, nu1: f64, nu: f64) -> Self {
        for a in &mut roster.pop1 {
            a.nu = nu1;
        }
        for a in &mut roster.pop2 {
            a.nu = nu;
        }
        Self {
            roster,
            nu1,
            nu,
            settings: FixedPointSettings::default(),
            br_tol: DEFAULT_TOL,
            corrections: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.settings.validate()?;
        if self.roster.pop1.is_empty() || self.roster.pop2.is_empty() {
            return Err(Error::Config("both populations need at least one player".into()));
        }
        for (label, rate) in [("nu1", self.nu1), ("nu", self.nu)] {
            if !(rate.is_finite() && rate >= 0.0) {
                return Err(Error::Config(format!(
                    "{label} must be finite and non-negative, got {rate}"
                )));
            }
        }
        for (population, i, a) in self.roster.iter() {
            a.validate().map_err(|reason| Error::InvalidSpec {
                population,
                reason: format!("player {i}: {reason}"),
            })?;
        }
        Ok(())
    }

    pub fn strategies(&self, z: &EquilibriumMeans) -> Result<(Vec<f64>, Vec<f64>)> {
        roster_strategies(&self.roster, z, self.corrections, self.br_tol)
    }

    pub fn map(&self, z: &EquilibriumMeans) -> Result<EquilibriumMeans> {
        let (pi1, pi2) = self.strategies(z)?;
        Ok(loadings(&self.roster, &pi1, &pi2))
    }

    pub fn contraction_check(&self) -> ContractionCheck {
        ContractionCheck::for_roster(&self.roster)
    }

    pub fn empirical_lipschitz(&self, n_pairs: usize, box_radius: f64, seed: u64) -> Result<f64> {
        lipschitz_estimate(|z| self.map(z), n_pairs, box_radius, seed)
    }
}

/// `R_N(z)` for a problem.
pub fn nash_map(z: &EquilibriumMeans, problem: &NashProblem) -> Result<EquilibriumMeans> {
    problem.map(z)
}

#[derive(Clone, Debug, PartialEq)]
pub struct NashSolution {
    pub means: EquilibriumMeans,
    pub strategies_pop1: Vec<f64>,
    pub strategies_pop2: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub trace: Vec<TraceRow>,
}

impl NashSolution {
    /// One row per player: population, index, type fields, strategy.
    pub fn to_table(&self, roster: &AgentRoster) -> CsvTable {
        let mut table = CsvTable::new([
            "population",
            "index",
            "xi",
            "delta",
            "lambda1",
            "lambda2",
            "mu",
            "sigma",
            "sigma0",
            "gamma",
            "nu",
            "strategy",
        ]);
        for (population, i, a) in roster.iter() {
            let pi = match population {
                Population::Pop1 => self.strategies_pop1[i],
                Population::Pop2 => self.strategies_pop2[i],
            };
            let mut row = vec![population.label().to_string(), i.to_string()];
            row.extend(
                [a.xi, a.delta, a.lambda1, a.lambda2, a.mu, a.sigma, a.sigma0, a.gamma, a.nu, pi]
                    .map(format_number),
            );
            table.push(row);
        }
        table
    }
}

pub fn solve_nash(problem: &NashProblem) -> Result<NashSolution> {
    solve_nash_from(problem, EquilibriumMeans::ZERO)
}

pub fn solve_nash_from(problem: &NashProblem, start: EquilibriumMeans) -> Result<NashSolution> {
    problem.validate()?;
    let fp = iterate(|z| problem.map(z), start, &problem.settings)?;
    let (strategies_pop1, strategies_pop2) = problem.strategies(&fp.z)?;
    Ok(NashSolution {
        means: fp.z,
        strategies_pop1,
        strategies_pop2,
        iterations: fp.iterations,
        residual: fp.residual,
        trace: fp.trace,
    })
}

/// Utility of one perturbed strategy relative to the equilibrium strategy.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DeviationRow {
    pub h: f64,
    pub strategy: f64,
    pub utility: UtilityEstimate,
    /// Path-wise `U(π* + h) − U(π*)` on the same draws.
    pub difference: UtilityEstimate,
}

impl DeviationRow {
    /// The equilibrium does at least as well as this deviation, up to
    /// `k` confidence half-widths of the paired difference.
    pub fn not_better_than_equilibrium(&self, k: f64) -> bool {
        self.difference.mean <= k * self.difference.ci_halfwidth
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeviationReport {
    pub population: Population,
    pub index: usize,
    pub equilibrium_strategy: f64,
    pub equilibrium_utility: UtilityEstimate,
    pub deviations: Vec<DeviationRow>,
}

impl DeviationReport {
    pub fn passes(&self, k: f64) -> bool {
        self.deviations.iter().all(|d| d.not_better_than_equilibrium(k))
    }

    pub fn to_table(&self) -> CsvTable {
        let mut table = CsvTable::new([
            "h",
            "strategy",
            "utility",
            "utility_ci",
            "difference",
            "difference_ci",
        ]);
        table.push_numbers(&[
            0.0,
            self.equilibrium_strategy,
            self.equilibrium_utility.mean,
            self.equilibrium_utility.ci_halfwidth,
            0.0,
            0.0,
        ]);
        for d in &self.deviations {
            table.push_numbers(&[
                d.h,
                d.strategy,
                d.utility.mean,
                d.utility.ci_halfwidth,
                d.difference.mean,
                d.difference.ci_halfwidth,
            ]);
        }
        table
    }
}

/// Simulate the equilibrium once and compare the agent's utility under
/// `π* ± h` for each `h`, all other players fixed, on shared paths.
pub fn verify_nash_by_deviation(
    solution: &NashSolution,
    problem: &NashProblem,
    population: Population,
    index: usize,
    sim: &SimConfig,
    hs: &[f64],
) -> Result<DeviationReport> {
    let bundle = simulate_wealth(
        &problem.roster,
        &solution.strategies_pop1,
        &solution.strategies_pop2,
        problem.nu1,
        problem.nu,
        sim,
    )?;
    let flat = bundle.flat_index(population, index);
    if flat >= bundle.strategies.len() {
        return Err(Error::Precondition(format!(
            "{population} player {index} is not in the roster"
        )));
    }
    let pi_star = bundle.strategies[flat];
    let base = bundle.utility_samples(flat, None)?;
    let mut deviations = Vec::new();
    for &h in hs {
        for signed in [-h, h] {
            let strategy = pi_star + signed;
            let alt = bundle.utility_samples(flat, Some(strategy))?;
            let diff: Vec<f64> = alt.iter().zip(&base).map(|(a, b)| a - b).collect();
            deviations.push(DeviationRow {
                h: signed,
                strategy,
                utility: UtilityEstimate::from_samples(&alt),
                difference: UtilityEstimate::from_samples(&diff),
            });
        }
    }
    Ok(DeviationReport {
        population,
        index,
        equilibrium_strategy: pi_star,
        equilibrium_utility: UtilityEstimate::from_samples(&base),
        deviations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::best_response::{g_value, solve_best_response, BestResponseInput};
    use crate::mfe::{agent_input, closed_form_mfe_pop1, linear_coefficients, FrozenMfe};
    use crate::model::{sample_roster, Marginal, PopulationSpec, TypeVector};
    use proptest::prelude::*;

    fn table1_roster(n1: usize, n2: usize, seed: u64) -> AgentRoster {
        sample_roster(
            &PopulationSpec::table1(Population::Pop1, Marginal::new(0.2, 0.02)),
            &PopulationSpec::table1(Population::Pop2, Marginal::new(0.2, 0.02)),
            n1,
            n2,
            seed,
        )
        .unwrap()
    }

    fn problem(roster: AgentRoster) -> NashProblem {
        NashProblem::new(roster, 4.7, 4.7)
    }

    #[test]
    fn no_interaction_gives_individual_best_responses() {
        let mut roster = table1_roster(1, 1, 2);
        for a in roster.pop1.iter_mut().chain(roster.pop2.iter_mut()) {
            a.lambda1 = 0.0;
            a.lambda2 = 0.0;
        }
        let p = problem(roster.clone());
        let sol = solve_nash(&p).unwrap();
        for (population, i, a) in p.roster.iter() {
            let direct = solve_best_response(
                &BestResponseInput::mean_field(*a, population, 0.0, 0.0),
                DEFAULT_TOL,
            )
            .unwrap();
            let got = match population {
                Population::Pop1 => sol.strategies_pop1[i],
                Population::Pop2 => sol.strategies_pop2[i],
            };
            assert_eq!(got, direct);
        }
        assert_eq!(sol.iterations, 1);
    }

    #[test]
    fn means_reproduce_roster_averages() {
        let p = problem(table1_roster(7, 9, 4));
        let sol = solve_nash(&p).unwrap();
        let avg = loadings(&p.roster, &sol.strategies_pop1, &sol.strategies_pop2);
        assert!(avg.distance(&sol.means) <= p.settings.tol);
        assert!(p.map(&sol.means).unwrap().distance(&sol.means) <= p.settings.tol);
    }

    fn brownian_roster(n: usize, lambda: f64) -> AgentRoster {
        let mut spec1 = PopulationSpec::table1(Population::Pop1, Marginal::fixed(lambda));
        for f in crate::model::Field::ALL {
            spec1.marginal_mut(f).std = 0.0;
        }
        spec1.gamma = Marginal::fixed(0.0);
        spec1.nu = 0.0;
        let spec2 = PopulationSpec::inert(Population::Pop2, 0.11, 0.11);
        sample_roster(&spec1, &spec2, n, 1, 0).unwrap()
    }

    #[test]
    fn homogeneous_brownian_roster_matches_finite_closed_form() {
        for n in [1, 2, 5, 40] {
            let roster = brownian_roster(n, 0.3);
            let mut p = NashProblem::new(roster.clone(), 0.0, 0.0);
            // Strategy errors are the mean error times σ⁰λ/S, so solve tighter.
            p.settings.tol = 1e-13;
            let sol = solve_nash(&p).unwrap();
            let (a, b) = linear_coefficients(&p.roster, Some(n)).unwrap();
            assert_eq!(a, 0.0);
            assert!((sol.means.x1 - b).abs() < 1e-10);
            let closed = closed_form_mfe_pop1(&p.roster, Some(n)).unwrap();
            for (c, s) in closed.iter().zip(&sol.strategies_pop1) {
                assert!((c - s).abs() < 1e-10, "n={n}: {c} vs {s}");
            }
        }
    }

    #[test]
    fn nash_map_follows_finite_linear_relation() {
        let mut roster = brownian_roster(3, 0.25);
        for a in &mut roster.pop1 {
            a.lambda2 = 0.1;
        }
        let p = NashProblem::new(roster, 0.0, 0.0);
        let (a, b) = linear_coefficients(&p.roster, Some(3)).unwrap();
        // At any x₂ the fixed point in x₁ of the population-1 block is A x₂ + B.
        let x2 = 0.7;
        let s = (1.0 - 0.25 / 3.0) * 0.11f64.powi(2) + 0.11f64.powi(2);
        let slope = 0.25 * 0.11 * 0.11 / s;
        let x1 = (0.1 * 0.11 * 0.11 / s * x2 + 0.25 * 0.11 / s) / (1.0 - slope);
        assert!((x1 - (a * x2 + b)).abs() < 1e-10);
        let r = p.map(&EquilibriumMeans::new(x1, x2, 0.0)).unwrap();
        assert!((r.x1 - x1).abs() < 1e-10);
    }

    #[test]
    fn corrections_off_matches_mean_field_map() {
        let roster = table1_roster(30, 30, 8);
        let mut p = problem(roster.clone());
        p.corrections = false;
        let frozen = FrozenMfe::from_roster(p.roster.clone(), p.settings, p.br_tol).unwrap();
        let z = EquilibriumMeans::new(0.2, 0.9, -0.3);
        assert_eq!(p.map(&z).unwrap(), frozen.map(&z).unwrap());
        assert_eq!(solve_nash(&p).unwrap().means, frozen.solve().unwrap().z);
    }

    #[test]
    fn identical_players_share_strategies() {
        let mut roster = table1_roster(4, 5, 1);
        let (a, b) = (roster.pop1[0], roster.pop2[0]);
        roster.pop1.iter_mut().for_each(|x| *x = a);
        roster.pop2.iter_mut().for_each(|x| *x = b);
        let sol = solve_nash(&problem(roster)).unwrap();
        assert!(sol.strategies_pop1.iter().all(|&s| s == sol.strategies_pop1[0]));
        assert!(sol.strategies_pop2.iter().all(|&s| s == sol.strategies_pop2[0]));
    }

    #[test]
    fn permutation_invariance() {
        let roster = table1_roster(6, 6, 12);
        let sol = solve_nash(&problem(roster.clone())).unwrap();
        let mut shuffled = roster.clone();
        shuffled.pop1.reverse();
        shuffled.pop2.rotate_left(2);
        let sol2 = solve_nash(&problem(shuffled)).unwrap();
        assert!(sol.means.distance(&sol2.means) < 1e-12);
        let mut expect1 = sol.strategies_pop1.clone();
        expect1.reverse();
        let mut expect2 = sol.strategies_pop2.clone();
        expect2.rotate_left(2);
        for (a, b) in expect1.iter().chain(&expect2).zip(sol2.strategies_pop1.iter().chain(&sol2.strategies_pop2)) {
            assert!((a - b).abs() < 1e-10 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn self_term_form_agrees_with_symmetric_form() {
        let p = problem(table1_roster(5, 5, 21));
        let sol = solve_nash(&p).unwrap();
        for i in 0..5 {
            let zeta = p.roster.pop2[i];
            let pi = sol.strategies_pop2[i];
            let n = 5.0;
            let c = zeta.lambda2 / n;
            let others_x2 = sol.means.x2 - pi * zeta.sigma0 / n;
            let others_y = sol.means.y - pi * zeta.gamma / n;
            let u_hat = zeta.lambda2 * others_x2;
            let v_hat = zeta.lambda2 * others_y;
            let (d, s, s0, g, nu) = (zeta.delta, zeta.sigma, zeta.sigma0, zeta.gamma, zeta.nu);
            // First-order condition of E[exp(−δ(X − H))] in the exposures of X − H,
            // divided by δ(1 − c).
            let jump = (1.0 - c) * pi * g - v_hat;
            let brown = (1.0 - c) * pi * s0 - u_hat;
            let g_hat = -d * g * nu * (-d * jump).exp_m1()
                + d * d * (1.0 - c) * s * s * pi
                + d * d * s0 * brown
                - d * zeta.mu;
            let symmetric = agent_input(Population::Pop2, &zeta, &sol.means, Some(5));
            assert!(g_value(pi, &symmetric).abs() < 1e-10);
            assert!(g_hat.abs() < 1e-10, "{g_hat}");
        }
    }

    #[test]
    fn contraction_regime_lipschitz_below_five_sixths() {
        let roster = sample_roster(
            &PopulationSpec::table1(Population::Pop1, Marginal::new(0.1, 0.01)),
            &PopulationSpec::table1(Population::Pop2, Marginal::new(0.1, 0.01)),
            20,
            20,
            5,
        )
        .unwrap();
        let p = problem(roster);
        assert!(p.contraction_check().guaranteed);
        assert!(p.empirical_lipschitz(200, 10.0, 3).unwrap() < 5.0 / 6.0);
    }

    #[test]
    fn zero_deviation_changes_nothing() {
        let p = problem(table1_roster(3, 3, 6));
        let sol = solve_nash(&p).unwrap();
        let sim = SimConfig {
            n_paths: 2000,
            seed: 1,
            ..SimConfig::default()
        };
        let report = verify_nash_by_deviation(&sol, &p, Population::Pop2, 1, &sim, &[0.0]).unwrap();
        for d in &report.deviations {
            assert_eq!(d.utility, report.equilibrium_utility);
            assert_eq!(d.difference.mean, 0.0);
        }
    }

    #[test]
    fn merton_is_the_best_grid_point_for_a_lone_brownian_agent() {
        let roster = brownian_roster(1, 0.0);
        let p = NashProblem::new(roster, 0.0, 0.0);
        let sol = solve_nash(&p).unwrap();
        let merton = p.roster.pop1[0].merton_ratio();
        assert!((sol.strategies_pop1[0] - merton).abs() < 1e-10);
        let sim = SimConfig {
            n_paths: 100_000,
            seed: 17,
            ..SimConfig::default()
        };
        let hs: Vec<f64> = (1..=5).map(|k| k as f64 * 0.2 * merton / 5.0).collect();
        let report = verify_nash_by_deviation(&sol, &p, Population::Pop1, 0, &sim, &hs).unwrap();
        // Every grid point other than the centre loses on the shared paths.
        assert_eq!(report.deviations.len(), 10);
        assert!(report.passes(1.0));
    }

    #[test]
    fn csv_has_a_row_per_player() {
        let p = problem(table1_roster(2, 3, 0));
        let sol = solve_nash(&p).unwrap();
        let csv = sol.to_table(&p.roster).to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 6);
        assert!(lines[0].ends_with(",strategy"));
        assert!(lines[1].starts_with("pop1,0,"));
        assert!(lines[5].starts_with("pop2,2,"));
    }

    #[test]
    fn validation_rejects_bad_players() {
        let mut roster = table1_roster(2, 2, 0);
        roster.pop1[1].delta = 0.0;
        assert!(matches!(solve_nash(&problem(roster)), Err(Error::InvalidSpec { .. })));
        let roster = AgentRoster {
            pop1: vec![],
            pop2: vec![TypeVector { nu: 1.0, ..table1_roster(1, 1, 0).pop2[0] }],
            seed: 0,
        };
        assert!(solve_nash(&problem(roster)).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn converged_means_are_fixed_points(seed in 0u64..10_000, n1 in 1usize..6, n2 in 1usize..6) {
            let p = problem(table1_roster(n1, n2, seed));
            let sol = solve_nash(&p).unwrap();
            prop_assert!(p.map(&sol.means).unwrap().distance(&sol.means) <= p.settings.tol);
        }
    }
}
