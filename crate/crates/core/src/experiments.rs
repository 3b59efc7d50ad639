//! Surfaces, convergence studies, sensitivity sweeps and the competition
//! uplift, each returning plain rows ready for CSV.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::best_response::{best_response_partials, solve_best_response, BestResponseInput};
use crate::error::{Error, Result};
use crate::fixed_point::FixedPointSettings;
use crate::mfe::{agent_input, FrozenMfe};
use crate::model::{
    roster_draws, roster_from_draws, sample_roster, EquilibriumMeans, Field, Marginal, Population,
    PopulationSpec, TypeVector,
};
use crate::nash::{solve_nash, NashProblem};
use crate::report::CsvTable;

/// The three single-population cases of the numerical study.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Scenario {
    /// Population 1, Brownian noise only.
    D1,
    /// Population 1 with idiosyncratic jumps.
    D2,
    /// Population 2 with common jumps.
    D3,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::D1, Scenario::D2, Scenario::D3];

    pub fn active(self) -> Population {
        match self {
            Scenario::D1 | Scenario::D2 => Population::Pop1,
            Scenario::D3 => Population::Pop2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Scenario::D1 => "d1",
            Scenario::D2 => "d2",
            Scenario::D3 => "d3",
        }
    }

    /// Specs for the scenario built from `base`, a description of the active
    /// population. The cross weight is set to zero and the other population
    /// is inert, so only the active population's equations matter.
    pub fn specs(self, base: &PopulationSpec) -> (PopulationSpec, PopulationSpec) {
        let active = self.active();
        let own = base.own_lambda();
        let mut spec = base.clone();
        spec.population = active;
        spec.lambda1 = Marginal::fixed(0.0);
        spec.lambda2 = Marginal::fixed(0.0);
        *spec.own_lambda_mut() = own;
        spec.tie_lambda = false;
        if self == Scenario::D1 {
            spec.gamma = Marginal::fixed(0.0);
            spec.nu = 0.0;
        }
        let sigma = spec.sigma.mean.max(1e-3);
        let sigma0 = spec.sigma0.mean;
        match active {
            Population::Pop1 => (spec, PopulationSpec::inert(Population::Pop2, sigma, sigma0)),
            Population::Pop2 => (PopulationSpec::inert(Population::Pop1, sigma, sigma0), spec),
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "d1" => Ok(Scenario::D1),
            "d2" => Ok(Scenario::D2),
            "d3" => Ok(Scenario::D3),
            other => Err(Error::Config(format!("unknown scenario {other:?} (expected d1, d2 or d3)"))),
        }
    }
}

/// Parameter varied by a sensitivity sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SweepParam {
    Gamma,
    Sigma0,
    /// Mean of the own-population weight.
    Lambda,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Gamma => "gamma",
            SweepParam::Sigma0 => "sigma0",
            SweepParam::Lambda => "lambda",
        }
    }

    /// Eleven points bracketing the calibration value.
    pub fn default_grid(self) -> Vec<f64> {
        let (a, b) = match self {
            SweepParam::Gamma => (-0.1, -0.01),
            SweepParam::Sigma0 => (0.05, 0.2),
            SweepParam::Lambda => (0.0, 0.3),
        };
        linspace(a, b, 11)
    }

    /// Move the parameter's mean to `value`, keeping std at 10% of the mean.
    fn apply(self, spec: &mut PopulationSpec, value: f64) {
        let marginal = match self {
            SweepParam::Gamma => &mut spec.gamma,
            SweepParam::Sigma0 => &mut spec.sigma0,
            SweepParam::Lambda => spec.own_lambda_mut(),
        };
        *marginal = Marginal::relative(value, 0.1);
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gamma" => Ok(SweepParam::Gamma),
            "sigma0" => Ok(SweepParam::Sigma0),
            "lambda" => Ok(SweepParam::Lambda),
            other => Err(Error::Config(format!(
                "unknown sweep parameter {other:?} (expected gamma, sigma0 or lambda)"
            ))),
        }
    }
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect(),
    }
}

/// Shared solver knobs for experiments.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveSettings {
    pub fixed_point: FixedPointSettings,
    pub br_tol: f64,
}

impl Default for SolveSettings {
    fn default() -> Self {
        Self {
            fixed_point: FixedPointSettings::default(),
            br_tol: crate::best_response::DEFAULT_TOL,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurfacePoint {
    pub u: f64,
    pub v: f64,
    pub pi: f64,
    /// Best response of the same type with `γ = 0`; linear in `u`, flat in `v`.
    pub pi_jump_free: f64,
    pub dpi_du: f64,
    pub dpi_dv: f64,
}

/// `π*(u, v)` on the product grid for a mean-field agent of population 2
/// (the population whose jump loading `v` is live).
pub fn best_response_surface(
    zeta: &TypeVector,
    u_grid: &[f64],
    v_grid: &[f64],
    br_tol: f64,
) -> Result<Vec<SurfacePoint>> {
    if u_grid.iter().chain(v_grid).any(|x| !x.is_finite()) {
        return Err(Error::Precondition("surface grids must be finite".into()));
    }
    let flat = TypeVector { gamma: 0.0, ..*zeta };
    let nodes: Vec<(f64, f64)> = u_grid
        .iter()
        .flat_map(|&u| v_grid.iter().map(move |&v| (u, v)))
        .collect();
    nodes
        .par_iter()
        .map(|&(u, v)| {
            let input = BestResponseInput::mean_field(*zeta, Population::Pop2, u, v);
            let pi = solve_best_response(&input, br_tol)?;
            let (dpi_du, dpi_dv) = best_response_partials(pi, &input);
            let pi_jump_free = solve_best_response(
                &BestResponseInput::mean_field(flat, Population::Pop2, u, v),
                br_tol,
            )?;
            Ok(SurfacePoint {
                u,
                v,
                pi,
                pi_jump_free,
                dpi_du,
                dpi_dv,
            })
        })
        .collect()
}

pub fn surface_table(points: &[SurfacePoint]) -> CsvTable {
    let mut t = CsvTable::new(["u", "v", "pi", "pi_gamma0", "dpi_du", "dpi_dv"]);
    for p in points {
        t.push_numbers(&[p.u, p.v, p.pi, p.pi_jump_free, p.dpi_du, p.dpi_dv]);
    }
    t
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceSettings {
    /// Increasing roster sizes; each roster is the first `n` agents.
    pub schedule: Vec<usize>,
    pub seed: u64,
    /// Size of the independent sample the reference equilibrium is solved on.
    pub reference_size: usize,
    pub reference_seed: u64,
    pub nu1: f64,
    pub nu: f64,
    /// Apply the `1 − λ/N` factors in the finite games.
    pub corrections: bool,
    pub solve: SolveSettings,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConvergenceRow {
    pub n: usize,
    pub means: EquilibriumMeans,
    /// Finite-player best response of each population's mean type.
    pub pi_mean_type: [f64; 2],
    pub distance: f64,
    pub iterations: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceStudy {
    pub reference: EquilibriumMeans,
    pub reference_pi_mean_type: [f64; 2],
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceStudy {
    pub fn to_table(&self) -> CsvTable {
        let mut t = CsvTable::new(["n", "x1", "x2", "y", "pi1_mean_type", "pi2_mean_type", "distance", "iterations"]);
        for r in &self.rows {
            t.push_numbers(&[
                r.n as f64,
                r.means.x1,
                r.means.x2,
                r.means.y,
                r.pi_mean_type[0],
                r.pi_mean_type[1],
                r.distance,
                r.iterations as f64,
            ]);
        }
        t
    }

    /// OLS slope of `ln distance` against `ln n`.
    pub fn log_log_slope(&self) -> f64 {
        let pts: Vec<(f64, f64)> = self
            .rows
            .iter()
            .filter(|r| r.distance > 0.0)
            .map(|r| ((r.n as f64).ln(), r.distance.ln()))
            .collect();
        ols_slope(&pts)
    }
}

pub fn ols_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

fn mean_type_strategy(
    population: Population,
    spec: &PopulationSpec,
    z: &EquilibriumMeans,
    n: Option<usize>,
    br_tol: f64,
) -> Result<f64> {
    solve_best_response(&agent_input(population, &spec.mean_type(), z, n), br_tol)
}

/// Nash equilibria on growing prefixes of one sampled roster, compared
/// with the mean-field equilibrium on an independent larger sample.
pub fn convergence_study(
    spec1: &PopulationSpec,
    spec2: &PopulationSpec,
    settings: &ConvergenceSettings,
) -> Result<ConvergenceStudy> {
    let schedule = &settings.schedule;
    if schedule.is_empty() || schedule.windows(2).any(|w| w[0] >= w[1]) || schedule[0] == 0 {
        return Err(Error::Precondition(
            "schedule must be non-empty and strictly increasing from at least 1".into(),
        ));
    }
    let solve = &settings.solve;
    let reference_roster = sample_roster(
        spec1,
        spec2,
        settings.reference_size,
        settings.reference_size,
        settings.reference_seed,
    )?;
    let frozen = FrozenMfe::from_roster(reference_roster, solve.fixed_point, solve.br_tol)?;
    let reference = frozen.solve()?.z;
    let reference_pi_mean_type = [
        mean_type_strategy(Population::Pop1, spec1, &reference, None, solve.br_tol)?,
        mean_type_strategy(Population::Pop2, spec2, &reference, None, solve.br_tol)?,
    ];

    let n_max = *schedule.last().expect("non-empty");
    let full = sample_roster(spec1, spec2, n_max, n_max, settings.seed)?;
    let mut rows = Vec::with_capacity(schedule.len());
    for &n in schedule {
        let mut problem = NashProblem::new(full.prefix(n, n), settings.nu1, settings.nu);
        problem.settings = solve.fixed_point;
        problem.br_tol = solve.br_tol;
        problem.corrections = settings.corrections;
        let sol = solve_nash(&problem)?;
        let size = settings.corrections.then_some(n);
        rows.push(ConvergenceRow {
            n,
            means: sol.means,
            pi_mean_type: [
                mean_type_strategy(Population::Pop1, spec1, &sol.means, size, solve.br_tol)?,
                mean_type_strategy(Population::Pop2, spec2, &sol.means, size, solve.br_tol)?,
            ],
            distance: sol.means.distance(&reference),
            iterations: sol.iterations,
        });
    }
    Ok(ConvergenceStudy {
        reference,
        reference_pi_mean_type,
        rows,
    })
}

/// Equilibrium of one scenario on a given sample.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScenarioOutcome {
    pub means: EquilibriumMeans,
    /// Sample average of the active population's strategies.
    pub mean_pi: f64,
    /// Best response of the active population's mean type.
    pub pi_mean_type: f64,
    pub iterations: usize,
}

/// Solve a scenario's mean-field equilibrium on `m` agents drawn with `seed`.
pub fn solve_scenario(
    scenario: Scenario,
    base: &PopulationSpec,
    m: usize,
    seed: u64,
    solve: &SolveSettings,
) -> Result<ScenarioOutcome> {
    let (spec1, spec2) = scenario.specs(base);
    let (d1, d2) = roster_draws(m, m, seed, spec1.truncation, spec2.truncation);
    solve_on_draws(scenario, &spec1, &spec2, &d1, &d2, seed, solve)
}

fn solve_on_draws(
    scenario: Scenario,
    spec1: &PopulationSpec,
    spec2: &PopulationSpec,
    d1: &[crate::model::StandardDraws],
    d2: &[crate::model::StandardDraws],
    seed: u64,
    solve: &SolveSettings,
) -> Result<ScenarioOutcome> {
    let roster = roster_from_draws(spec1, spec2, d1, d2, seed)?;
    let frozen = FrozenMfe::from_roster(roster, solve.fixed_point, solve.br_tol)?;
    let sol = frozen.solve()?;
    let active = scenario.active();
    let (pi1, pi2) = frozen.strategies(&sol.z)?;
    let pis = match active {
        Population::Pop1 => pi1,
        Population::Pop2 => pi2,
    };
    let spec = match active {
        Population::Pop1 => spec1,
        Population::Pop2 => spec2,
    };
    Ok(ScenarioOutcome {
        means: sol.z,
        mean_pi: pis.iter().sum::<f64>() / pis.len() as f64,
        pi_mean_type: frozen.representative_strategy(active, &spec.mean_type(), &sol.z)?,
        iterations: sol.iterations,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub outcome: ScenarioOutcome,
}

/// Re-solve a scenario at each grid value on one frozen set of standard
/// scores, so every grid point sees the same underlying draws.
pub fn sensitivity_sweep(
    scenario: Scenario,
    param: SweepParam,
    grid: &[f64],
    base: &PopulationSpec,
    m: usize,
    seed: u64,
    solve: &SolveSettings,
) -> Result<Vec<SweepRow>> {
    let (probe1, probe2) = scenario.specs(base);
    let (d1, d2) = roster_draws(m, m, seed, probe1.truncation, probe2.truncation);
    grid.par_iter()
        .map(|&value| {
            let mut spec = base.clone();
            param.apply(&mut spec, value);
            let (spec1, spec2) = scenario.specs(&spec);
            let outcome = solve_on_draws(scenario, &spec1, &spec2, &d1, &d2, seed, solve)?;
            Ok(SweepRow { value, outcome })
        })
        .collect()
}

pub fn sweep_table(param: SweepParam, rows: &[SweepRow]) -> CsvTable {
    let mut t = CsvTable::new([param.name(), "mean_pi", "pi_mean_type", "x1", "x2", "y"]);
    for r in rows {
        let o = &r.outcome;
        t.push_numbers(&[r.value, o.mean_pi, o.pi_mean_type, o.means.x1, o.means.x2, o.means.y]);
    }
    t
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Uplift {
    pub with_competition: ScenarioOutcome,
    /// Same sample with every competition weight at zero.
    pub without_competition: ScenarioOutcome,
    /// Same sample with competition but no jumps.
    pub jump_free: ScenarioOutcome,
    /// `(π_with − π_without) / π_with` for the mean type.
    pub shortfall: f64,
}

impl Uplift {
    pub fn to_table(&self) -> CsvTable {
        let mut t = CsvTable::new(["case", "pi_mean_type", "mean_pi", "x1", "x2", "y"]);
        for (name, o) in [
            ("with_competition", &self.with_competition),
            ("lambda_zero", &self.without_competition),
            ("gamma_zero", &self.jump_free),
        ] {
            let mut row = vec![name.to_string()];
            row.extend(
                [o.pi_mean_type, o.mean_pi, o.means.x1, o.means.x2, o.means.y]
                    .map(crate::report::format_number),
            );
            t.push(row);
        }
        t.push(vec![
            "shortfall".into(),
            crate::report::format_number(self.shortfall),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
        ]);
        t
    }
}

/// Mean-type strategy with competition against the `λ ≡ 0` and `γ = 0`
/// baselines, all on the same standard scores.
pub fn competition_uplift(
    scenario: Scenario,
    base: &PopulationSpec,
    m: usize,
    seed: u64,
    solve: &SolveSettings,
) -> Result<Uplift> {
    let (spec1, spec2) = scenario.specs(base);
    let (d1, d2) = roster_draws(m, m, seed, spec1.truncation, spec2.truncation);
    let run = |edit: &dyn Fn(&mut PopulationSpec)| {
        let mut spec = base.clone();
        edit(&mut spec);
        let (s1, s2) = scenario.specs(&spec);
        solve_on_draws(scenario, &s1, &s2, &d1, &d2, seed, solve)
    };
    let with_competition = run(&|_| {})?;
    let without_competition = run(&|s| {
        s.lambda1 = Marginal::fixed(0.0);
        s.lambda2 = Marginal::fixed(0.0);
    })?;
    let jump_free = run(&|s| s.gamma = Marginal::fixed(0.0))?;
    let shortfall = (with_competition.pi_mean_type - without_competition.pi_mean_type)
        / with_competition.pi_mean_type;
    Ok(Uplift {
        with_competition,
        without_competition,
        jump_free,
        shortfall,
    })
}

/// The calibration population with own weight `λ ~ TN(mean, 0.1·mean)`.
pub fn calibration(population: Population, lambda_mean: f64) -> PopulationSpec {
    PopulationSpec::table1(population, Marginal::relative(lambda_mean, 0.1))
}

/// Zero every std, leaving a deterministic population at the means.
pub fn degenerate(spec: &PopulationSpec) -> PopulationSpec {
    let mut s = spec.clone();
    for field in Field::ALL {
        s.marginal_mut(field).std = 0.0;
    }
    s
}
