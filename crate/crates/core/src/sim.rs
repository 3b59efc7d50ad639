//! Monte Carlo of terminal wealth under constant strategies.
//!
//! For a constant allocation `π` the terminal wealth is
//!
//! ```text
//! X_T = ξ + π R,   R = μT + σW_T + σ⁰W⁰_T + γ(J_T − νT),
//! ```
//!
//! so the law of `X_T` is sampled exactly from Gaussian and Poisson draws.
//! `W⁰` and, for population 2, the jump count `J` are shared by every agent
//! on a path. Population 1 agents carry their own jump counts.
//!
//! Each path reads its own substream, so results do not depend on the
//! thread count.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{AgentRoster, Population, TypeVector};
use crate::rng::{substream, StreamRng};

/// Utility exponents beyond this are reported as overflow.
pub const MAX_UTILITY_EXPONENT: f64 = 700.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimConfig {
    /// Terminal time `T` in years.
    pub horizon: f64,
    /// Grid for intermediate paths only; terminal draws are exact.
    pub n_steps: usize,
    pub n_paths: usize,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            horizon: 1.0,
            n_steps: 50,
            n_paths: 100_000,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::Config(format!("horizon must be positive, got {}", self.horizon)));
        }
        if self.n_steps == 0 || self.n_paths == 0 {
            return Err(Error::Config("n_steps and n_paths must be at least 1".into()));
        }
        Ok(())
    }
}

/// Draws for one path.
#[derive(Clone, Debug, PartialEq)]
pub struct PathDraws {
    pub common_brownian: f64,
    pub common_jumps: u64,
    /// `W^{p,i}_T`, population 1 then population 2.
    pub idio_brownian: Vec<f64>,
    /// `J^{1,i}_T` for population 1 agents.
    pub idio_jumps: Vec<u64>,
}

/// Simulated terminal states for every agent on every path.
#[derive(Clone, Debug, PartialEq)]
pub struct PathBundle {
    pub config: SimConfig,
    pub roster: AgentRoster,
    pub nu1: f64,
    pub nu: f64,
    pub strategies: Vec<f64>,
    pub paths: Vec<PathDraws>,
    /// `R` per agent (flat index), per path.
    pub unit_returns: Vec<Vec<f64>>,
    /// `X_T` per agent (flat index), per path.
    pub terminal_wealth: Vec<Vec<f64>>,
}

fn poisson_count(rng: &mut StreamRng, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    let d = Poisson::new(mean).expect("positive finite Poisson mean");
    d.sample(rng) as u64
}

fn draw_path(seed: u64, path: usize, n1: usize, n2: usize, nu1: f64, nu: f64, t: f64) -> PathDraws {
    let mut rng = substream(seed, "sim/path", path as u64);
    let common_brownian = t.sqrt() * rng.sample::<f64, _>(StandardNormal);
    let common_jumps = poisson_count(&mut rng, nu * t);
    let idio_brownian = (0..n1 + n2)
        .map(|_| t.sqrt() * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let idio_jumps = (0..n1).map(|_| poisson_count(&mut rng, nu1 * t)).collect();
    PathDraws {
        common_brownian,
        common_jumps,
        idio_brownian,
        idio_jumps,
    }
}

impl PathBundle {
    pub fn n1(&self) -> usize {
        self.roster.pop1.len()
    }

    pub fn n2(&self) -> usize {
        self.roster.pop2.len()
    }

    pub fn flat_index(&self, population: Population, index: usize) -> usize {
        match population {
            Population::Pop1 => index,
            Population::Pop2 => self.n1() + index,
        }
    }

    fn agent(&self, flat: usize) -> (Population, &TypeVector) {
        if flat < self.n1() {
            (Population::Pop1, &self.roster.pop1[flat])
        } else {
            (Population::Pop2, &self.roster.pop2[flat - self.n1()])
        }
    }

    fn intensity(&self, population: Population) -> f64 {
        match population {
            Population::Pop1 => self.nu1,
            Population::Pop2 => self.nu,
        }
    }

    /// Relative-performance utility of one agent, optionally replacing its
    /// strategy while everyone else keeps theirs. Paths are shared, so two
    /// calls with different overrides are a common-random-number comparison.
    pub fn relative_utility(
        &self,
        population: Population,
        index: usize,
        strategy_override: Option<f64>,
    ) -> Result<UtilityEstimate> {
        let flat = self.flat_index(population, index);
        if flat >= self.strategies.len() || (population == Population::Pop1 && index >= self.n1()) {
            return Err(Error::Precondition(format!(
                "{population} agent {index} is not in the bundle"
            )));
        }
        let per_path = self.utility_samples(flat, strategy_override)?;
        Ok(UtilityEstimate::from_samples(&per_path))
    }

    /// Per-path utilities `−(1/δ)·exp(−δ(X − H))`.
    pub fn utility_samples(&self, flat: usize, strategy_override: Option<f64>) -> Result<Vec<f64>> {
        let (_, zeta) = self.agent(flat);
        let (n1, n2) = (self.n1() as f64, self.n2() as f64);
        let pi = strategy_override.unwrap_or(self.strategies[flat]);
        let xi = zeta.xi;
        let delta = zeta.delta;
        let exponents: Vec<f64> = (0..self.paths.len())
            .into_par_iter()
            .map(|p| {
                let own_old = self.terminal_wealth[flat][p];
                let own_new = xi + pi * self.unit_returns[flat][p];
                let mut avg1 = 0.0;
                for w in &self.terminal_wealth[..self.n1()] {
                    avg1 += w[p];
                }
                let mut avg2 = 0.0;
                for w in &self.terminal_wealth[self.n1()..] {
                    avg2 += w[p];
                }
                if flat < self.n1() {
                    avg1 += own_new - own_old;
                } else {
                    avg2 += own_new - own_old;
                }
                let h = zeta.lambda1 * avg1 / n1 + zeta.lambda2 * avg2 / n2;
                -delta * (own_new - h) - delta.ln()
            })
            .collect();
        let max_exponent = exponents.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !(max_exponent <= MAX_UTILITY_EXPONENT) {
            return Err(Error::UtilityOverflow { max_exponent });
        }
        Ok(exponents.into_iter().map(|e| -e.exp()).collect())
    }

    /// Wealth on the `n_steps` grid for one path, consistent with `X_T`.
    ///
    /// Brownian motions are filled in by exact bridges and jump times are
    /// uniform order statistics given the terminal count. Common pieces are
    /// drawn from a per-path stream, so every agent on the path sees the
    /// same `W⁰` and, in population 2, the same jump times.
    pub fn wealth_path(&self, population: Population, index: usize, path: usize) -> Vec<f64> {
        let flat = self.flat_index(population, index);
        let (_, zeta) = self.agent(flat);
        let cfg = &self.config;
        let draws = &self.paths[path];
        let grid: Vec<f64> = (0..=cfg.n_steps)
            .map(|k| cfg.horizon * k as f64 / cfg.n_steps as f64)
            .collect();

        let mut common = substream(cfg.seed, "sim/bridge/common", path as u64);
        let w0 = bridge(&mut common, &grid, draws.common_brownian);
        let common_times = jump_times(&mut common, draws.common_jumps, cfg.horizon);

        let mut own = substream(
            cfg.seed,
            "sim/bridge/agent",
            ((path as u64) << 24) ^ flat as u64,
        );
        let w = bridge(&mut own, &grid, draws.idio_brownian[flat]);
        let times = if flat < self.n1() {
            jump_times(&mut own, draws.idio_jumps[flat], cfg.horizon)
        } else {
            common_times
        };

        let pi = self.strategies[flat];
        let nu = self.intensity(population);
        grid.iter()
            .enumerate()
            .map(|(k, &t)| {
                let count = times.partition_point(|&s| s <= t) as f64;
                let r = zeta.mu * t
                    + zeta.sigma * w[k]
                    + zeta.sigma0 * w0[k]
                    + zeta.gamma * (count - nu * t);
                zeta.xi + pi * r
            })
            .collect()
    }

    /// CSV rows `path, population, index, X_T`.
    pub fn terminal_csv(&self) -> String {
        let mut out = String::from("path,population,index,terminal_wealth\n");
        for p in 0..self.paths.len() {
            for flat in 0..self.strategies.len() {
                let (population, _) = self.agent(flat);
                let index = if flat < self.n1() { flat } else { flat - self.n1() };
                let _ = writeln!(
                    out,
                    "{p},{population},{index},{}",
                    crate::report::format_number(self.terminal_wealth[flat][p])
                );
            }
        }
        out
    }

    pub fn write_terminal_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.terminal_csv())?;
        Ok(())
    }
}

/// Exact Brownian bridge from 0 at `grid[0] = 0` to `terminal` at the last node.
fn bridge(rng: &mut StreamRng, grid: &[f64], terminal: f64) -> Vec<f64> {
    let horizon = *grid.last().expect("non-empty grid");
    let mut out = Vec::with_capacity(grid.len());
    let mut w = 0.0;
    out.push(w);
    for k in 1..grid.len() {
        if k + 1 == grid.len() {
            out.push(terminal);
            break;
        }
        let (t0, t1) = (grid[k - 1], grid[k]);
        let remaining = horizon - t0;
        let frac = (t1 - t0) / remaining;
        let mean = w + frac * (terminal - w);
        let var = (t1 - t0) * (horizon - t1) / remaining;
        w = mean + var.sqrt() * rng.sample::<f64, _>(StandardNormal);
        out.push(w);
    }
    out
}

fn jump_times(rng: &mut StreamRng, count: u64, horizon: f64) -> Vec<f64> {
    let mut times: Vec<f64> = (0..count).map(|_| rng.random::<f64>() * horizon).collect();
    times.sort_by(f64::total_cmp);
    times
}

/// Simulate terminal wealth for every roster agent.
///
/// `strategies1`, `strategies2` hold the constant allocations in roster
/// order; `nu1` is the idiosyncratic intensity of population 1 and `nu` the
/// common intensity of population 2.
pub fn simulate_wealth(
    roster: &AgentRoster,
    strategies1: &[f64],
    strategies2: &[f64],
    nu1: f64,
    nu: f64,
    config: &SimConfig,
) -> Result<PathBundle> {
    config.validate()?;
    if strategies1.len() != roster.pop1.len() || strategies2.len() != roster.pop2.len() {
        return Err(Error::Precondition(format!(
            "strategy counts ({}, {}) do not match the roster ({}, {})",
            strategies1.len(),
            strategies2.len(),
            roster.pop1.len(),
            roster.pop2.len()
        )));
    }
    if let Some(p) = strategies1.iter().chain(strategies2).find(|p| !p.is_finite()) {
        return Err(Error::Precondition(format!("strategy {p} is not finite")));
    }
    for (label, rate) in [("nu1", nu1), ("nu", nu)] {
        if !(rate.is_finite() && rate >= 0.0) {
            return Err(Error::Config(format!("{label} must be finite and non-negative, got {rate}")));
        }
    }
    let (n1, n2) = (roster.pop1.len(), roster.pop2.len());
    let t = config.horizon;
    let paths: Vec<PathDraws> = (0..config.n_paths)
        .into_par_iter()
        .map(|p| draw_path(config.seed, p, n1, n2, nu1, nu, t))
        .collect();

    let strategies: Vec<f64> = strategies1.iter().chain(strategies2).copied().collect();
    let agents: Vec<(Population, TypeVector)> = roster
        .iter()
        .map(|(population, _, zeta)| (population, *zeta))
        .collect();
    let unit_returns: Vec<Vec<f64>> = agents
        .par_iter()
        .enumerate()
        .map(|(flat, (population, zeta))| {
            let rate = match population {
                Population::Pop1 => nu1,
                Population::Pop2 => nu,
            };
            paths
                .iter()
                .map(|d| {
                    let jumps = if flat < n1 {
                        d.idio_jumps[flat]
                    } else {
                        d.common_jumps
                    };
                    zeta.mu * t
                        + zeta.sigma * d.idio_brownian[flat]
                        + zeta.sigma0 * d.common_brownian
                        + zeta.gamma * (jumps as f64 - rate * t)
                })
                .collect()
        })
        .collect();
    let terminal_wealth = unit_returns
        .iter()
        .zip(&agents)
        .zip(&strategies)
        .map(|((r, (_, zeta)), pi)| r.iter().map(|x| zeta.xi + pi * x).collect())
        .collect();
    Ok(PathBundle {
        config: *config,
        roster: roster.clone(),
        nu1,
        nu,
        strategies,
        paths,
        unit_returns,
        terminal_wealth,
    })
}

/// Sample mean with a 95% normal confidence half-width.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UtilityEstimate {
    pub mean: f64,
    pub ci_halfwidth: f64,
}

impl UtilityEstimate {
    pub fn from_samples(samples: &[f64]) -> Self {
        let (mean, std) = mean_std(samples);
        Self {
            mean,
            ci_halfwidth: 1.96 * std / (samples.len() as f64).sqrt(),
        }
    }
}

/// Mean and unbiased standard deviation, summed in order.
pub fn mean_std(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() < 2 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Relative utility of one agent under its bundle strategy or an override.
pub fn estimate_relative_utility(
    bundle: &PathBundle,
    population: Population,
    index: usize,
    strategy_override: Option<f64>,
) -> Result<UtilityEstimate> {
    bundle.relative_utility(population, index, strategy_override)
}
