//! The best-response condition and its unique root.
//!
//! For fixed relative-point loadings `(u, v)` an agent's optimal constant
//! allocation is the root of
//!
//! ```text
//! g(π) = −δγν [e^E − 1] + δ² D π − δ² σ⁰ u − δ μ,
//! ```
//!
//! with, for a finite-player correction `c = λ_own / N`,
//!
//! | form            | exponent `E`           | diffusion `D`        |
//! |-----------------|------------------------|----------------------|
//! | mean field      | `−δ(πγ − v)`           | `σ² + σ⁰²`           |
//! | population 1, N | `−δ((1 − c)πγ − v)`    | `(1 − c)σ² + σ⁰²`    |
//! | population 2, N | `−δ(πγ − v)`           | `(1 − c)σ² + σ⁰²`    |
//!
//! The mean-field form is the finite-player form with `c = 0`, evaluated by
//! the same code. `g` is strictly increasing in `π`, so the root is unique.

use crate::error::{Error, Result};
use crate::model::{Population, TypeVector};

/// Root tolerance relative to `1 + |δμ|`.
pub const DEFAULT_TOL: f64 = 1e-12;

/// Largest exponent `E` the solver will ever evaluate.
pub const EXPONENT_LIMIT: f64 = 700.0;

const MAX_DOUBLINGS: usize = 200;
const MAX_ITERATIONS: usize = 400;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BestResponseInput {
    pub zeta: TypeVector,
    /// Brownian common-noise loading of the relative point.
    pub u: f64,
    /// Poisson common-noise loading of the relative point.
    pub v: f64,
    /// `λ_own / N`; `None` selects the mean-field form.
    pub n_correction: Option<f64>,
    pub population: Population,
}

impl BestResponseInput {
    pub fn mean_field(zeta: TypeVector, population: Population, u: f64, v: f64) -> Self {
        Self {
            zeta,
            u,
            v,
            n_correction: None,
            population,
        }
    }

    /// Finite-player form for an agent in a population of size `n`; the
    /// correction is the agent's weight on its own population over `n`.
    pub fn finite_player(
        zeta: TypeVector,
        population: Population,
        u: f64,
        v: f64,
        n: usize,
    ) -> Self {
        let own = match population {
            Population::Pop1 => zeta.lambda1,
            Population::Pop2 => zeta.lambda2,
        };
        Self {
            zeta,
            u,
            v,
            n_correction: Some(own / n as f64),
            population,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.zeta.validate().map_err(|reason| Error::RootFinding {
            reason: format!("invalid type vector: {reason}"),
            zeta: Box::new(self.zeta),
        })?;
        if !(self.u.is_finite() && self.v.is_finite()) {
            return Err(Error::RootFinding {
                reason: format!("non-finite loadings (u = {}, v = {})", self.u, self.v),
                zeta: Box::new(self.zeta),
            });
        }
        if let Some(c) = self.n_correction {
            if !(c.is_finite() && (0.0..1.0).contains(&c)) {
                return Err(Error::Precondition(format!(
                    "finite-player correction must lie in [0, 1), got {c}"
                )));
            }
        }
        Ok(())
    }

    fn correction(&self) -> f64 {
        self.n_correction.unwrap_or(0.0)
    }

    /// Factor multiplying `πγ` inside the exponent.
    fn jump_scale(&self) -> f64 {
        match self.population {
            Population::Pop1 => 1.0 - self.correction(),
            Population::Pop2 => 1.0,
        }
    }

    fn diffusion(&self) -> f64 {
        let z = &self.zeta;
        (1.0 - self.correction()) * z.sigma * z.sigma + z.sigma0 * z.sigma0
    }

    fn has_jumps(&self) -> bool {
        !self.zeta.is_jump_free()
    }

    pub fn exponent(&self, pi: f64) -> f64 {
        -self.zeta.delta * (self.jump_scale() * pi * self.zeta.gamma - self.v)
    }

    /// Root of the jump-free condition; also the solver's starting point.
    pub fn jump_free_root(&self) -> f64 {
        let z = &self.zeta;
        (z.delta * z.sigma0 * self.u + z.mu) / (z.delta * self.diffusion())
    }

    /// `∂g/∂π`
    pub fn g_derivative(&self, pi: f64) -> f64 {
        let z = &self.zeta;
        let d2 = z.delta * z.delta;
        let mut out = d2 * self.diffusion();
        if self.has_jumps() {
            out += d2 * z.gamma * z.gamma * z.nu * self.jump_scale() * self.exponent(pi).exp();
        }
        out
    }

    /// Interval of `π` on which `E ≤ EXPONENT_LIMIT`. Large negative
    /// exponents only underflow `e^E` to zero, so that side stays open.
    fn exponent_window(&self) -> (f64, f64) {
        if !self.has_jumps() {
            return (f64::NEG_INFINITY, f64::INFINITY);
        }
        let z = &self.zeta;
        let slope = z.delta * self.jump_scale() * z.gamma;
        // E(π) = −slope·π + δv
        let edge = (z.delta * self.v - EXPONENT_LIMIT) / slope;
        if slope > 0.0 {
            (edge, f64::INFINITY)
        } else {
            (f64::NEG_INFINITY, edge)
        }
    }
}

/// `g(π)` in the form selected by `input`.
pub fn g_value(pi: f64, input: &BestResponseInput) -> f64 {
    let z = &input.zeta;
    let jump = if input.has_jumps() {
        -z.delta * z.gamma * z.nu * input.exponent(pi).exp_m1()
    } else {
        0.0
    };
    jump + z.delta * z.delta * input.diffusion() * pi
        - z.delta * z.delta * z.sigma0 * input.u
        - z.delta * z.mu
}

/// Safeguarded Newton on a bracket grown geometrically from the jump-free root.
///
/// Returns `π*` with `|g(π*)| ≤ tol·(1 + |δμ|)`, or the best bracket endpoint
/// once the bracket has shrunk to adjacent floats.
pub fn solve_best_response(input: &BestResponseInput, tol: f64) -> Result<f64> {
    input.validate()?;
    if !(tol > 0.0) {
        return Err(Error::Precondition(format!("tolerance must be positive, got {tol}")));
    }
    let fail = |reason: String| Error::RootFinding {
        reason,
        zeta: Box::new(input.zeta),
    };
    let tol_g = tol * (1.0 + (input.zeta.delta * input.zeta.mu).abs());
    let (win_lo, win_hi) = input.exponent_window();

    let mut x = input.jump_free_root().clamp(win_lo, win_hi);
    let mut gx = g_value(x, input);
    if !gx.is_finite() {
        return Err(fail(format!("g({x}) = {gx} at the starting point")));
    }
    if gx.abs() <= tol_g {
        return Ok(x);
    }

    // Grow the bracket away from the starting point until g changes sign.
    let (mut lo, mut glo, mut hi, mut ghi);
    let direction = if gx < 0.0 { 1.0 } else { -1.0 };
    let mut step = x.abs().max(1.0);
    let mut far = x;
    let mut gfar = gx;
    let mut doublings = 0;
    loop {
        let limit = if direction > 0.0 { win_hi } else { win_lo };
        let candidate = (x + direction * step).clamp(win_lo, win_hi);
        let gc = g_value(candidate, input);
        if !gc.is_finite() {
            return Err(fail(format!("g({candidate}) = {gc} while bracketing")));
        }
        if gc.signum() != gx.signum() || gc == 0.0 {
            if direction > 0.0 {
                (lo, glo, hi, ghi) = (far, gfar, candidate, gc);
            } else {
                (lo, glo, hi, ghi) = (candidate, gc, far, gfar);
            }
            break;
        }
        if candidate == limit {
            return Err(fail(format!(
                "exponent clamp E <= {EXPONENT_LIMIT} reached at pi = {candidate} before a sign change"
            )));
        }
        far = candidate;
        gfar = gc;
        step *= 2.0;
        doublings += 1;
        if doublings > MAX_DOUBLINGS {
            return Err(fail(format!("no sign change after {MAX_DOUBLINGS} doublings")));
        }
    }
    if glo.abs() <= tol_g {
        return Ok(lo);
    }
    if ghi.abs() <= tol_g {
        return Ok(hi);
    }

    x = if gx < 0.0 { lo } else { hi };
    gx = if gx < 0.0 { glo } else { ghi };
    // Newton steps near a steep exponential edge can crawl; fall back to
    // bisection whenever the bracket failed to halve on the previous step.
    let mut width = f64::INFINITY;
    for _ in 0..MAX_ITERATIONS {
        let slope = input.g_derivative(x);
        let newton = x - gx / slope;
        let shrinking = hi - lo <= 0.5 * width;
        width = hi - lo;
        let next = if shrinking && newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if next == x || next <= lo || next >= hi {
            break;
        }
        x = next;
        gx = g_value(x, input);
        if !gx.is_finite() {
            return Err(fail(format!("g({x}) = {gx} inside the bracket")));
        }
        if gx.abs() <= tol_g {
            debug_assert!(input.exponent(x) <= EXPONENT_LIMIT);
            return Ok(x);
        }
        if gx < 0.0 {
            lo = x;
            glo = gx;
        } else {
            hi = x;
            ghi = gx;
        }
    }
    // Bracket exhausted at floating-point resolution.
    let best = [(lo, glo), (hi, ghi), (x, gx)]
        .into_iter()
        .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .map(|(p, _)| p)
        .unwrap_or(x);
    Ok(best)
}

/// `(∂π*/∂u, ∂π*/∂v)` by the implicit function theorem at a root `pi_star`.
pub fn best_response_partials(pi_star: f64, input: &BestResponseInput) -> (f64, f64) {
    let z = &input.zeta;
    let (jump_u, jump_v) = if input.has_jumps() {
        let e = input.exponent(pi_star).exp();
        (
            z.gamma * z.gamma * z.nu * input.jump_scale() * e,
            z.gamma * z.nu * e,
        )
    } else {
        (0.0, 0.0)
    };
    let denom = input.diffusion() + jump_u;
    (z.sigma0 / denom, jump_v / denom)
}

/// Constant of the value-function ODE `f' + K f = 0` at allocation `pi`,
/// for the mean-field auxiliary problem with relative-point drift `eta`.
pub fn generator_constant(pi: f64, input: &BestResponseInput, eta: f64) -> f64 {
    let z = &input.zeta;
    let jump_exposure = pi * z.gamma - input.v;
    let drift = pi * z.mu - eta - jump_exposure * z.nu;
    let variance = pi * pi * z.sigma * z.sigma + (pi * z.sigma0 - input.u).powi(2);
    let jumps = if input.has_jumps() {
        (-z.delta * jump_exposure).exp_m1() * z.nu
    } else {
        0.0
    };
    -z.delta * drift + 0.5 * z.delta * z.delta * variance + jumps
}

/// `f(t) = exp(K (T − t))`, the time factor of `V(x, t) = −e^{−δx} f(t) / δ`.
///
/// Always uses the mean-field generator; `n_correction` is ignored.
pub fn value_factor(input: &BestResponseInput, eta: f64, t: f64, horizon: f64) -> Result<f64> {
    if !(0.0 <= t && t <= horizon) {
        return Err(Error::Precondition(format!(
            "need 0 <= t <= T, got t = {t}, T = {horizon}"
        )));
    }
    let mean_field = BestResponseInput {
        n_correction: None,
        ..*input
    };
    let pi = solve_best_response(&mean_field, DEFAULT_TOL)?;
    Ok((generator_constant(pi, &mean_field, eta) * (horizon - t)).exp())
}
