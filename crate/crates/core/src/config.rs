//! Plain-text run configuration.
//!
//! ```text
//! # comments start with '#'
//! [pop1]
//! delta = 1.0, 0.1      # mean, std
//! lambda1 = 0.2, 0.02
//! nu = 4.7              # single value: a constant
//!
//! [game]
//! seed = 42
//! n1 = 10
//! n2 = 10
//!
//! [solver]
//! samples = 2000
//! fp_tol = 1e-10
//!
//! [sim]
//! n_paths = 100000
//! ```
//!
//! Population sections start from the calibration (`δ = 1`, `μ = 0.25`,
//! `σ = σ⁰ = 0.11`, `γ = −0.04`, `ν = 4.7`, 10% stds, own weight
//! `λ ~ TN(0.2, 0.02)`) and override field by field. `lambda = m, s` sets
//! both weights from a single draw.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fixed_point::FixedPointSettings;
use crate::model::{Field, Marginal, Population, PopulationSpec};
use crate::sim::SimConfig;

#[derive(Clone, Debug, PartialEq)]
pub struct Config {
    pub pop1: PopulationSpec,
    pub pop2: PopulationSpec,
    pub seed: u64,
    /// Roster sizes for the finite game.
    pub n1: usize,
    pub n2: usize,
    /// Frozen sample size per population for mean-field expectations.
    pub samples: usize,
    pub br_tol: f64,
    pub fixed_point: FixedPointSettings,
    pub sim: SimConfig,
}

impl Default for Config {
    fn default() -> Self {
        let own = Marginal::new(0.2, 0.02);
        Self {
            pop1: PopulationSpec::table1(Population::Pop1, own),
            pop2: PopulationSpec::table1(Population::Pop2, own),
            seed: 42,
            n1: 10,
            n2: 10,
            samples: 2000,
            br_tol: crate::best_response::DEFAULT_TOL,
            fixed_point: FixedPointSettings::default(),
            sim: SimConfig {
                seed: 42,
                ..SimConfig::default()
            },
        }
    }
}

fn parse_f64(key: &str, raw: &str) -> Result<f64> {
    raw.trim()
        .parse::<f64>()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {raw:?} as a number")))
}

fn parse_count(key: &str, raw: &str) -> Result<usize> {
    raw.trim()
        .parse::<usize>()
        .map_err(|_| Error::Config(format!("{key}: expected a non-negative integer, got {raw:?}")))
}

fn parse_u64(key: &str, raw: &str) -> Result<u64> {
    raw.trim()
        .parse::<u64>()
        .map_err(|_| Error::Config(format!("{key}: expected a non-negative integer, got {raw:?}")))
}

fn parse_marginal(key: &str, raw: &str) -> Result<Marginal> {
    let parts: Vec<&str> = raw.split(',').collect();
    match parts.as_slice() {
        [mean] => Ok(Marginal::fixed(parse_f64(key, mean)?)),
        [mean, std] => Ok(Marginal::new(parse_f64(key, mean)?, parse_f64(key, std)?)),
        _ => Err(Error::Config(format!("{key}: expected \"mean\" or \"mean, std\", got {raw:?}"))),
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    None,
    Pop(Population),
    Game,
    Solver,
    Sim,
}

impl Config {
    pub fn parse(text: &str) -> Result<Config> {
        let mut cfg = Config::default();
        let mut section = Section::None;
        let mut sim_seed = None;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let at = |msg: String| Error::Config(format!("line {}: {msg}", lineno + 1));
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = match name.trim() {
                    "pop1" => Section::Pop(Population::Pop1),
                    "pop2" => Section::Pop(Population::Pop2),
                    "game" => Section::Game,
                    "solver" => Section::Solver,
                    "sim" => Section::Sim,
                    other => return Err(at(format!("unknown section [{other}]"))),
                };
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| at(format!("expected key = value, got {line:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            let wrap = |e: Error| match e {
                Error::Config(m) => at(m),
                other => other,
            };
            match section {
                Section::None => return Err(at(format!("{key} appears before any section"))),
                Section::Pop(p) => {
                    let spec = match p {
                        Population::Pop1 => &mut cfg.pop1,
                        Population::Pop2 => &mut cfg.pop2,
                    };
                    set_population_key(spec, key, value).map_err(wrap)?;
                }
                Section::Game => match key {
                    "seed" => cfg.seed = parse_u64(key, value).map_err(wrap)?,
                    "n1" => cfg.n1 = parse_count(key, value).map_err(wrap)?,
                    "n2" => cfg.n2 = parse_count(key, value).map_err(wrap)?,
                    _ => return Err(at(format!("unknown key {key:?} in [game]"))),
                },
                Section::Solver => match key {
                    "samples" => cfg.samples = parse_count(key, value).map_err(wrap)?,
                    "br_tol" => cfg.br_tol = parse_f64(key, value).map_err(wrap)?,
                    "fp_tol" => cfg.fixed_point.tol = parse_f64(key, value).map_err(wrap)?,
                    "fp_max_iter" => cfg.fixed_point.max_iter = parse_count(key, value).map_err(wrap)?,
                    "damping" => cfg.fixed_point.damping = parse_f64(key, value).map_err(wrap)?,
                    _ => return Err(at(format!("unknown key {key:?} in [solver]"))),
                },
                Section::Sim => match key {
                    "horizon" => cfg.sim.horizon = parse_f64(key, value).map_err(wrap)?,
                    "n_steps" => cfg.sim.n_steps = parse_count(key, value).map_err(wrap)?,
                    "n_paths" => cfg.sim.n_paths = parse_count(key, value).map_err(wrap)?,
                    "seed" => sim_seed = Some(parse_u64(key, value).map_err(wrap)?),
                    _ => return Err(at(format!("unknown key {key:?} in [sim]"))),
                },
            }
        }
        cfg.sim.seed = sim_seed.unwrap_or(cfg.seed);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Config> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Config::parse(&text)
    }

    /// Override the game seed; the simulation seed follows it.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.sim.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.pop1.validate()?;
        self.pop2.validate()?;
        self.fixed_point.validate()?;
        self.sim.validate()?;
        if self.n1 == 0 || self.n2 == 0 {
            return Err(Error::Config("n1 and n2 must be at least 1".into()));
        }
        if self.samples == 0 {
            return Err(Error::Config("samples must be at least 1".into()));
        }
        if !(self.br_tol > 0.0 && self.br_tol.is_finite()) {
            return Err(Error::Config(format!("br_tol must be positive, got {}", self.br_tol)));
        }
        Ok(())
    }

    pub fn population(&self, population: Population) -> &PopulationSpec {
        match population {
            Population::Pop1 => &self.pop1,
            Population::Pop2 => &self.pop2,
        }
    }

    /// Canonical text form; parses back to an equal config.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for spec in [&self.pop1, &self.pop2] {
            let _ = writeln!(out, "[{}]", spec.population);
            for field in Field::ALL {
                let m = spec.marginal(field);
                let _ = writeln!(out, "{} = {:?}, {:?}", field.name(), m.mean, m.std);
            }
            let _ = writeln!(out, "nu = {:?}", spec.nu);
            let _ = writeln!(out, "truncation = {:?}", spec.truncation);
            let _ = writeln!(out, "tie_lambda = {}", spec.tie_lambda);
            out.push('\n');
        }
        let _ = writeln!(out, "[game]\nseed = {}\nn1 = {}\nn2 = {}\n", self.seed, self.n1, self.n2);
        let _ = writeln!(
            out,
            "[solver]\nsamples = {}\nbr_tol = {:?}\nfp_tol = {:?}\nfp_max_iter = {}\ndamping = {:?}\n",
            self.samples, self.br_tol, self.fixed_point.tol, self.fixed_point.max_iter, self.fixed_point.damping
        );
        let _ = writeln!(
            out,
            "[sim]\nhorizon = {:?}\nn_steps = {}\nn_paths = {}\nseed = {}",
            self.sim.horizon, self.sim.n_steps, self.sim.n_paths, self.sim.seed
        );
        out
    }
}

fn set_population_key(spec: &mut PopulationSpec, key: &str, value: &str) -> Result<()> {
    match key {
        "nu" => spec.nu = parse_f64(key, value)?,
        "truncation" => spec.truncation = parse_f64(key, value)?,
        "tie_lambda" => {
            spec.tie_lambda = match value {
                "true" => true,
                "false" => false,
                other => return Err(Error::Config(format!("tie_lambda: expected true or false, got {other:?}"))),
            }
        }
        "lambda" => {
            let m = parse_marginal(key, value)?;
            spec.lambda1 = m;
            spec.lambda2 = m;
            spec.tie_lambda = true;
        }
        _ => {
            let field = Field::from_name(key)
                .ok_or_else(|| Error::Config(format!("unknown population key {key:?}")))?;
            *spec.marginal_mut(field) = parse_marginal(key, value)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_is_the_calibration() {
        assert_eq!(Config::parse("").unwrap(), Config::default());
    }

    #[test]
    fn overrides_and_comments() {
        let text = "
            # desk run
            [pop2]
            gamma = 0.04, 0.004   # positive jumps
            lambda2 = 0.1
            nu = 2.5e0
            [game]
            seed = 7
            n1 = 3
            [solver]
            samples = 50
            damping = 0.5
            [sim]
            n_paths = 1000
        ";
        let c = Config::parse(text).unwrap();
        assert_eq!(c.pop2.gamma, Marginal::new(0.04, 0.004));
        assert_eq!(c.pop2.lambda2, Marginal::fixed(0.1));
        assert_eq!(c.pop2.nu, 2.5);
        assert_eq!((c.seed, c.n1, c.n2), (7, 3, 10));
        assert_eq!(c.samples, 50);
        assert_eq!(c.fixed_point.damping, 0.5);
        assert_eq!(c.sim.n_paths, 1000);
        assert_eq!(c.sim.seed, 7);
    }

    #[test]
    fn tied_lambda_key() {
        let c = Config::parse("[pop1]\nlambda = 0.2, 0.02\n").unwrap();
        assert!(c.pop1.tie_lambda);
        assert_eq!(c.pop1.lambda1, c.pop1.lambda2);
    }

    #[test]
    fn canonical_text_round_trips() {
        let mut c = Config::parse("[pop1]\nlambda = 0.15, 0.01\n[sim]\nseed = 3\n").unwrap();
        c.pop2.mu = Marginal::new(0.1 + 0.2, 1.0 / 3.0);
        assert_eq!(Config::parse(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn errors_name_the_line() {
        for (text, needle) in [
            ("[pop3]\n", "line 1"),
            ("seed = 1\n", "before any section"),
            ("[game]\nseed = -1\n", "line 2"),
            ("[pop1]\ndelta = 1, 2, 3\n", "mean, std"),
            ("[pop1]\nfoo = 1\n", "unknown population key"),
            ("[solver]\nfp_tol\n", "key = value"),
        ] {
            match Config::parse(text) {
                Err(Error::Config(m)) => assert!(m.contains(needle), "{m}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn validation_catches_bad_boxes_and_settings() {
        assert!(matches!(
            Config::parse("[pop1]\ndelta = 0.1, 0.1\n"),
            Err(Error::InvalidSpec { .. })
        ));
        assert!(Config::parse("[solver]\ndamping = 1.5\n").is_err());
        assert!(Config::parse("[game]\nn1 = 0\n").is_err());
    }

    #[test]
    fn seed_override_moves_sim_seed() {
        let c = Config::default().with_seed(99);
        assert_eq!((c.seed, c.sim.seed), (99, 99));
    }
}
