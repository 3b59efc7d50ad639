use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use relperf::best_response::{best_response_partials, solve_best_response, BestResponseInput};
use relperf::experiments::{
    best_response_surface, competition_uplift, convergence_study, linspace, sensitivity_sweep,
    surface_table, sweep_table, ConvergenceSettings, Scenario, SolveSettings, SweepParam,
};
use relperf::nash::verify_nash_by_deviation;
use relperf::report::{format_number, trace_table, CsvTable, LinePlot};
use relperf::{
    sample_roster, simulate_wealth, solve_nash, Config, Error, FrozenMfe, MfeProblem, NashProblem,
    Population,
};

/// Equilibrium solvers and experiments for the two-population
/// relative-performance portfolio game.
#[derive(Parser, Debug)]
#[command(name = "relperf", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Config file; the built-in calibration is used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the config seed (the simulation seed follows).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the frozen sample size for mean-field expectations.
    #[arg(long, global = true)]
    samples: Option<usize>,
    /// Override the fixed-point tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Cap on worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Pop {
    Pop1,
    Pop2,
}

impl From<Pop> for Population {
    fn from(p: Pop) -> Self {
        match p {
            Pop::Pop1 => Population::Pop1,
            Pop::Pop2 => Population::Pop2,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Best response of a population's mean type to given loadings.
    BestResponse {
        #[arg(long, value_enum, default_value = "pop2")]
        population: Pop,
        #[arg(long, allow_negative_numbers = true, default_value_t = 0.0)]
        u: f64,
        #[arg(long, allow_negative_numbers = true, default_value_t = 0.0)]
        v: f64,
        /// Population size for the finite-player form; mean field when omitted.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Mean-field equilibrium on a frozen type sample.
    Mfe,
    /// Nash equilibrium of the finite game.
    Nash {
        /// Drop the 1 − λ/N own-wealth corrections.
        #[arg(long)]
        no_corrections: bool,
    },
    /// Simulate wealth under the Nash strategies.
    Simulate {
        /// Number of paths drawn as full trajectories in the SVG.
        #[arg(long, default_value_t = 5)]
        show_paths: usize,
    },
    /// Compare an equilibrium agent's utility with perturbed strategies.
    DeviationCheck {
        #[arg(long, value_enum, default_value = "pop1")]
        population: Pop,
        #[arg(long, default_value_t = 0)]
        index: usize,
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.5,1.0")]
        h: Vec<f64>,
    },
    /// Best-response surface over (u, v) for population 2's mean type.
    Surface {
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, default_value = "-1,1")]
        u_range: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, default_value = "-1,1")]
        v_range: Vec<f64>,
        #[arg(long, default_value_t = 21)]
        points: usize,
    },
    /// Nash equilibria of growing rosters against the mean-field limit.
    Converge {
        #[arg(long, value_delimiter = ',', default_value = "125,250,500,1000,2000")]
        schedule: Vec<usize>,
        /// Sample size of the reference equilibrium; defaults to --samples.
        #[arg(long)]
        reference_size: Option<usize>,
        #[arg(long)]
        no_corrections: bool,
    },
    /// Sensitivity of a scenario's equilibrium to one parameter.
    Sweep {
        #[arg(long, default_value = "d3")]
        scenario: Scenario,
        #[arg(long, default_value = "gamma")]
        param: SweepParam,
        /// Grid as `start,stop,points`; the parameter's default grid when omitted.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        grid: Option<Vec<f64>>,
    },
    /// Mean-type strategy with and without competition.
    Uplift {
        #[arg(long, default_value = "d3")]
        scenario: Scenario,
    },
    /// Contraction constant, competition weights and empirical Lipschitz bound.
    CheckContraction {
        #[arg(long, default_value_t = 1000)]
        pairs: usize,
        #[arg(long, default_value_t = 1.0)]
        radius: f64,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::BestResponse { .. } => "best-response",
            Command::Mfe => "mfe",
            Command::Nash { .. } => "nash",
            Command::Simulate { .. } => "simulate",
            Command::DeviationCheck { .. } => "deviation-check",
            Command::Surface { .. } => "surface",
            Command::Converge { .. } => "converge",
            Command::Sweep { .. } => "sweep",
            Command::Uplift { .. } => "uplift",
            Command::CheckContraction { .. } => "check-contraction",
        }
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::InvalidSpec { .. } | Error::Precondition(_) => 2,
        Error::RootFinding { .. }
        | Error::AgentRootFinding { .. }
        | Error::NotConverged { .. }
        | Error::UtilityOverflow { .. } => 3,
        Error::Io(_) => 4,
    }
}

fn resolve_config(common: &Common) -> relperf::Result<Config> {
    let mut cfg = match &common.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if let Some(seed) = common.seed {
        cfg = cfg.with_seed(seed);
    }
    if let Some(m) = common.samples {
        cfg.samples = m;
    }
    if let Some(tol) = common.tol {
        cfg.fixed_point.tol = tol;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Files written by one run, recorded in the manifest.
struct Outputs {
    dir: PathBuf,
    files: Vec<String>,
}

impl Outputs {
    fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.dir.join(name)
    }

    fn table(&mut self, name: &str, table: &CsvTable) -> relperf::Result<()> {
        table.write(self.path(name))
    }

    fn plot(&mut self, name: &str, plot: &LinePlot) -> relperf::Result<()> {
        plot.write(self.path(name))
    }
}

fn solve_settings(cfg: &Config) -> SolveSettings {
    SolveSettings {
        fixed_point: cfg.fixed_point,
        br_tol: cfg.br_tol,
    }
}

fn nash_problem(cfg: &Config, corrections: bool) -> relperf::Result<NashProblem> {
    let roster = sample_roster(&cfg.pop1, &cfg.pop2, cfg.n1, cfg.n2, cfg.seed)?;
    let mut problem = NashProblem::new(roster, cfg.pop1.nu, cfg.pop2.nu);
    problem.settings = cfg.fixed_point;
    problem.br_tol = cfg.br_tol;
    problem.corrections = corrections;
    Ok(problem)
}

fn equilibrium_table(z: &relperf::EquilibriumMeans, residual: f64, iterations: usize) -> CsvTable {
    let mut t = CsvTable::new(["x1", "x2", "y", "residual", "iterations"]);
    t.push_numbers(&[z.x1, z.x2, z.y, residual, iterations as f64]);
    t
}

fn run(command: &Command, cfg: &Config, out: &mut Outputs) -> relperf::Result<serde_json::Value> {
    let solve = solve_settings(cfg);
    match command {
        Command::BestResponse { population, u, v, n } => {
            let population = Population::from(*population);
            let zeta = cfg.population(population).mean_type();
            let input = match n {
                None => BestResponseInput::mean_field(zeta, population, *u, *v),
                Some(n) => BestResponseInput::finite_player(zeta, population, *u, *v, *n),
            };
            let pi = solve_best_response(&input, cfg.br_tol)?;
            let (du, dv) = best_response_partials(pi, &input);
            let mut t = CsvTable::new(["u", "v", "pi", "dpi_du", "dpi_dv"]);
            t.push_numbers(&[*u, *v, pi, du, dv]);
            out.table("best_response.csv", &t)?;
            println!("pi* = {}", format_number(pi));
            println!("dpi/du = {}  dpi/dv = {}", format_number(du), format_number(dv));
            Ok(json!({ "pi": pi }))
        }
        Command::Mfe => {
            let mut problem = MfeProblem::new(cfg.pop1.clone(), cfg.pop2.clone(), cfg.samples, cfg.seed);
            problem.settings = cfg.fixed_point;
            problem.br_tol = cfg.br_tol;
            let frozen = problem.freeze()?;
            let sol = frozen.solve()?;
            out.table("equilibrium.csv", &equilibrium_table(&sol.z, sol.residual, sol.iterations))?;
            out.table("trace.csv", &trace_table(&sol.trace))?;
            let pi1 = frozen.representative_strategy(Population::Pop1, &cfg.pop1.mean_type(), &sol.z)?;
            let pi2 = frozen.representative_strategy(Population::Pop2, &cfg.pop2.mean_type(), &sol.z)?;
            let mut t = CsvTable::new(["population", "pi_mean_type"]);
            for (p, pi) in [(Population::Pop1, pi1), (Population::Pop2, pi2)] {
                t.push(vec![p.label().into(), format_number(pi)]);
            }
            out.table("mean_type.csv", &t)?;
            println!(
                "x1 = {}  x2 = {}  y = {}  ({} iterations, residual {})",
                format_number(sol.z.x1),
                format_number(sol.z.x2),
                format_number(sol.z.y),
                sol.iterations,
                format_number(sol.residual)
            );
            println!("mean-type pi: pop1 {}  pop2 {}", format_number(pi1), format_number(pi2));
            Ok(json!({ "iterations": sol.iterations, "residual": sol.residual }))
        }
        Command::Nash { no_corrections } => {
            let problem = nash_problem(cfg, !no_corrections)?;
            let sol = solve_nash(&problem)?;
            out.table("equilibrium.csv", &equilibrium_table(&sol.means, sol.residual, sol.iterations))?;
            out.table("strategies.csv", &sol.to_table(&problem.roster))?;
            out.table("trace.csv", &trace_table(&sol.trace))?;
            println!(
                "x1 = {}  x2 = {}  y = {}  ({} iterations)",
                format_number(sol.means.x1),
                format_number(sol.means.x2),
                format_number(sol.means.y),
                sol.iterations
            );
            Ok(json!({ "iterations": sol.iterations, "residual": sol.residual }))
        }
        Command::Simulate { show_paths } => {
            let problem = nash_problem(cfg, true)?;
            let sol = solve_nash(&problem)?;
            let bundle = simulate_wealth(
                &problem.roster,
                &sol.strategies_pop1,
                &sol.strategies_pop2,
                problem.nu1,
                problem.nu,
                &cfg.sim,
            )?;
            bundle.write_terminal_csv(out.path("terminal_wealth.csv"))?;
            let mut t = CsvTable::new(["population", "index", "strategy", "mean_wealth", "std_wealth", "utility", "utility_ci"]);
            for (population, i, _) in problem.roster.iter() {
                let flat = bundle.flat_index(population, i);
                let wealth = &bundle.terminal_wealth[flat];
                let (m, s) = relperf::sim::mean_std(wealth);
                let u = bundle.relative_utility(population, i, None)?;
                let mut row = vec![population.label().to_string(), i.to_string()];
                row.extend([bundle.strategies[flat], m, s, u.mean, u.ci_halfwidth].map(format_number));
                t.push(row);
            }
            out.table("summary.csv", &t)?;
            let step = cfg.sim.horizon / cfg.sim.n_steps as f64;
            let mut plot = LinePlot::new("Wealth paths, population 1 agent 0", "t", "X");
            for path in 0..(*show_paths).min(cfg.sim.n_paths) {
                let pts = bundle
                    .wealth_path(Population::Pop1, 0, path)
                    .into_iter()
                    .enumerate()
                    .map(|(k, x)| (k as f64 * step, x))
                    .collect();
                plot = plot.with_series(&format!("path {path}"), pts);
            }
            out.plot("wealth_paths.svg", &plot)?;
            println!("simulated {} paths for {} agents", cfg.sim.n_paths, problem.roster.len());
            Ok(json!({ "paths": cfg.sim.n_paths }))
        }
        Command::DeviationCheck { population, index, h } => {
            let problem = nash_problem(cfg, true)?;
            let sol = solve_nash(&problem)?;
            let population = Population::from(*population);
            let report = verify_nash_by_deviation(&sol, &problem, population, *index, &cfg.sim, h)?;
            out.table("deviation.csv", &report.to_table())?;
            let pass = report.passes(2.0);
            println!(
                "{population} agent {index}: pi* = {}  U = {} ± {}",
                format_number(report.equilibrium_strategy),
                format_number(report.equilibrium_utility.mean),
                format_number(report.equilibrium_utility.ci_halfwidth)
            );
            for d in &report.deviations {
                println!(
                    "  h = {:+}: U diff = {} ± {}",
                    d.h,
                    format_number(d.difference.mean),
                    format_number(d.difference.ci_halfwidth)
                );
            }
            println!("{}", if pass { "PASS" } else { "FAIL" });
            Ok(json!({ "pass": pass }))
        }
        Command::Surface { u_range, v_range, points } => {
            let range = |r: &[f64], name: &str| match r {
                [a, b] => Ok(linspace(*a, *b, *points)),
                _ => Err(Error::Config(format!("--{name} expects two values, got {}", r.len()))),
            };
            let (us, vs) = (range(u_range, "u-range")?, range(v_range, "v-range")?);
            let pts = best_response_surface(&cfg.pop2.mean_type(), &us, &vs, cfg.br_tol)?;
            out.table("surface.csv", &surface_table(&pts))?;
            let mut plot = LinePlot::new("Best response across v", "u", "pi*");
            for &v in [vs[0], vs[vs.len() / 2], vs[vs.len() - 1]].iter() {
                let series = pts.iter().filter(|p| p.v == v).map(|p| (p.u, p.pi)).collect();
                plot = plot.with_series(&format!("v = {}", format_number(v)), series);
            }
            let flat = pts.iter().filter(|p| p.v == vs[0]).map(|p| (p.u, p.pi_jump_free)).collect();
            out.plot("surface.svg", &plot.with_series("gamma = 0", flat))?;
            println!("{} surface points", pts.len());
            Ok(json!({ "points": pts.len() }))
        }
        Command::Converge { schedule, reference_size, no_corrections } => {
            let settings = ConvergenceSettings {
                schedule: schedule.clone(),
                seed: cfg.seed,
                reference_size: reference_size.unwrap_or(cfg.samples),
                reference_seed: cfg.seed.wrapping_add(1),
                nu1: cfg.pop1.nu,
                nu: cfg.pop2.nu,
                corrections: !no_corrections,
                solve,
            };
            let study = convergence_study(&cfg.pop1, &cfg.pop2, &settings)?;
            out.table("convergence.csv", &study.to_table())?;
            let pts = study
                .rows
                .iter()
                .filter(|r| r.distance > 0.0)
                .map(|r| ((r.n as f64).log10(), r.distance.log10()))
                .collect();
            out.plot(
                "convergence.svg",
                &LinePlot::new("Distance to the mean-field equilibrium", "log10 N", "log10 distance")
                    .with_series("distance", pts),
            )?;
            for r in &study.rows {
                println!("N = {:>6}  distance = {}", r.n, format_number(r.distance));
            }
            let slope = study.log_log_slope();
            println!("log-log slope = {}", format_number(slope));
            Ok(json!({ "slope": slope }))
        }
        Command::Sweep { scenario, param, grid } => {
            let grid = match grid.as_deref() {
                None => param.default_grid(),
                Some([a, b, n]) if *n >= 1.0 && n.fract() == 0.0 => linspace(*a, *b, *n as usize),
                Some(_) => return Err(Error::Config("--grid expects start,stop,points".into())),
            };
            let base = cfg.population(scenario.active());
            let rows = sensitivity_sweep(*scenario, *param, &grid, base, cfg.samples, cfg.seed, &solve)?;
            let stem = format!("sweep_{}_{}", scenario, param);
            out.table(&format!("{stem}.csv"), &sweep_table(*param, &rows))?;
            let plot = LinePlot::new(&format!("Scenario {scenario}: sweep in {param}"), param.name(), "pi*")
                .with_series("mean pi", rows.iter().map(|r| (r.value, r.outcome.mean_pi)).collect())
                .with_series("mean type", rows.iter().map(|r| (r.value, r.outcome.pi_mean_type)).collect());
            out.plot(&format!("{stem}.svg"), &plot)?;
            for r in &rows {
                println!("{} = {:<10} mean pi = {}", param, format_number(r.value), format_number(r.outcome.mean_pi));
            }
            Ok(json!({ "points": rows.len() }))
        }
        Command::Uplift { scenario } => {
            let base = cfg.population(scenario.active());
            let up = competition_uplift(*scenario, base, cfg.samples, cfg.seed, &solve)?;
            out.table("uplift.csv", &up.to_table())?;
            println!("with competition   {}", format_number(up.with_competition.pi_mean_type));
            println!("lambda = 0         {}", format_number(up.without_competition.pi_mean_type));
            println!("gamma = 0          {}", format_number(up.jump_free.pi_mean_type));
            println!("shortfall          {:.2}%", 100.0 * up.shortfall);
            Ok(json!({ "shortfall": up.shortfall }))
        }
        Command::CheckContraction { pairs, radius } => {
            let roster = sample_roster(&cfg.pop1, &cfg.pop2, cfg.samples, cfg.samples, cfg.seed)?;
            let frozen = FrozenMfe::from_roster(roster, cfg.fixed_point, cfg.br_tol)?;
            let check = frozen.contraction_epsilon();
            let lhat = frozen.empirical_lipschitz(*pairs, *radius, cfg.seed)?;
            let pass = lhat < 1.0;
            let mut t = CsvTable::new(["epsilon", "lambda_sup", "guaranteed", "lipschitz"]);
            t.push_numbers(&[check.epsilon, check.lambda_sup, check.guaranteed as u8 as f64, lhat]);
            out.table("contraction.csv", &t)?;
            println!("epsilon      = {}", format_number(check.epsilon));
            println!("|lambda|_inf = {}", format_number(check.lambda_sup));
            println!("theorem regime: {}", if check.guaranteed { "yes" } else { "no" });
            println!("empirical L  = {}", format_number(lhat));
            println!("{}", if pass { "PASS" } else { "FAIL" });
            Ok(json!({ "pass": pass, "guaranteed": check.guaranteed }))
        }
    }
}

fn write_manifest(out: &Path, command: &str, cfg: &Config, files: &[String], result: &serde_json::Value) -> relperf::Result<()> {
    let manifest = json!({
        "command": command,
        "seed": cfg.seed,
        "config": cfg.to_text(),
        "versions": {
            "relperf": env!("CARGO_PKG_VERSION"),
        },
        "outputs": files,
        "result": result,
    });
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(out.join("manifest.json"), text + "\n")?;
    Ok(())
}

fn write_timing(out: &Path, started: Instant) -> relperf::Result<()> {
    let stamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let timing = json!({
        "wall_seconds": started.elapsed().as_secs_f64(),
        "finished_unix": stamp,
    });
    std::fs::write(out.join("timing.json"), timing.to_string() + "\n")?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let started = Instant::now();
    let result = (|| -> relperf::Result<()> {
        if let Some(n) = cli.common.threads {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build_global()
                .map_err(|e| Error::Config(format!("--threads: {e}")))?;
        }
        let cfg = resolve_config(&cli.common)?;
        std::fs::create_dir_all(&cli.common.out)?;
        let mut out = Outputs {
            dir: cli.common.out.clone(),
            files: Vec::new(),
        };
        let summary = run(&cli.command, &cfg, &mut out)?;
        std::fs::write(out.dir.join("config.cfg"), cfg.to_text())?;
        write_manifest(&out.dir, cli.command.name(), &cfg, &out.files, &summary)?;
        write_timing(&out.dir, started)
    })();
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("relperf {}: {e}", cli.command.name());
            if let Error::NotConverged { trace, .. } = &e {
                if let Some(last) = trace.last() {
                    eprintln!(
                        "  last iterate: x1 = {} x2 = {} y = {}",
                        format_number(last.z.x1),
                        format_number(last.z.x2),
                        format_number(last.z.y)
                    );
                }
            }
            ExitCode::from(exit_code(&e))
        }
    }
}
