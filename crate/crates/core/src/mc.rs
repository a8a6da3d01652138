//! Seeded Monte Carlo simulation of the coupled (X, m, Q, S^f) dynamics
//! under pluggable strategies.
//!
//! Reproducibility contract: path `i` of a run is a pure function of
//! `(seed, i)` — each path draws from a ChaCha8 generator seeded with the run
//! seed and using the path index as its stream. Paths may run on any number
//! of workers; the reduction to (mean, std-error) is performed sequentially
//! over the path-indexed buffer, so results are bit-identical regardless of
//! thread count.
//!
//! Per step the foreign variants draw four standard normals in fixed order
//! (surplus W, foreign asset W^1, exchange rate W^2, drift deviation W^3);
//! the domestic variant draws two (W, W^4). X uses arithmetic Euler (the
//! surplus may go negative), m the exact OU transition, Q and S^f log-Euler.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::closed_form::ClosedFormSolution;
use crate::market::{MarketKind, SimState, ValidatedConfig};
use crate::{Error, Result};

/// Investment strategy simulated by the engine. All variants are admissible:
/// they are bounded deterministic functions of (t, m). Serialized in the
/// CLI string form (`optimal`, `scaled:<f>`, `constant:<v>`, `zero`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StrategySpec {
    /// The closed-form optimal feedback strategy.
    Optimal,
    /// A fixed amount invested at all times.
    ConstantAmount(f64),
    /// The optimal strategy multiplied by a constant factor.
    ScaledOptimal(f64),
    /// No risky investment.
    ZeroInvestment,
}

impl std::fmt::Display for StrategySpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            StrategySpec::Optimal => write!(f, "optimal"),
            StrategySpec::ConstantAmount(v) => write!(f, "constant:{v}"),
            StrategySpec::ScaledOptimal(s) => write!(f, "scaled:{s}"),
            StrategySpec::ZeroInvestment => write!(f, "zero"),
        }
    }
}

impl std::str::FromStr for StrategySpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "optimal" {
            return Ok(StrategySpec::Optimal);
        }
        if s == "zero" {
            return Ok(StrategySpec::ZeroInvestment);
        }
        if let Some(v) = s.strip_prefix("scaled:") {
            let f: f64 = v
                .parse()
                .map_err(|_| Error::Validation(format!("bad scale factor '{v}'")))?;
            return Ok(StrategySpec::ScaledOptimal(f));
        }
        if let Some(v) = s.strip_prefix("constant:") {
            let c: f64 = v
                .parse()
                .map_err(|_| Error::Validation(format!("bad constant amount '{v}'")))?;
            return Ok(StrategySpec::ConstantAmount(c));
        }
        Err(Error::Validation(format!(
            "unknown strategy '{s}' (expected optimal | scaled:<f> | constant:<v> | zero)"
        )))
    }
}

impl Serialize for StrategySpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for StrategySpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// Monte Carlo run configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub paths: u64,
    pub steps: usize,
    pub seed: u64,
    pub strategy: StrategySpec,
}

/// Estimate of the expected terminal utility with its provenance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    /// Mean of u(X_T) across paths.
    pub estimate: f64,
    /// Sample standard deviation / sqrt(paths).
    pub std_error: f64,
    pub paths: u64,
    pub seed: u64,
    pub strategy: StrategySpec,
}

fn validate_sim(sim: &SimConfig) -> Result<()> {
    if sim.paths < 1 {
        return Err(Error::Validation("paths must be >= 1".into()));
    }
    if sim.steps < 1 {
        return Err(Error::Validation("steps must be >= 1".into()));
    }
    match sim.strategy {
        StrategySpec::ConstantAmount(v) if !v.is_finite() => {
            Err(Error::Validation("constant amount must be finite".into()))
        }
        StrategySpec::ScaledOptimal(f) if !f.is_finite() => {
            Err(Error::Validation("scale factor must be finite".into()))
        }
        _ => Ok(()),
    }
}

fn path_rng(seed: u64, path_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path_index);
    rng
}

/// Precomputed per-step quantities shared by all paths of a run.
struct PathSimulator {
    kind: MarketKind,
    steps: usize,
    dt: f64,
    sqrt_dt: f64,
    /// Optimal amount per step evaluated at m = 0; the OU feedback adds the
    /// m-dependent part via `feedback_slope`.
    optimal_base: Vec<f64>,
    /// d pi*/d m = e^{-r_d (T - t_k)} / (theta sigma_bar_sq); zero for the
    /// degenerate variants.
    feedback_slope: Vec<f64>,
    strategy: StrategySpec,
    // market constants
    x0: f64,
    m0: f64,
    q0: f64,
    sf0: f64,
    u: f64,
    r_d: f64,
    sigma: f64,
    sigma_f: f64,
    sigma_q: f64,
    sigma_d: f64,
    u_f: f64,
    u_q: f64,
    excess_const: f64, // A_1 for foreign, u_d - r_d for domestic
    // exact OU transition over one step
    ou_decay: f64,
    ou_noise_sd: f64,
}

impl PathSimulator {
    fn new(
        cfg: &ValidatedConfig,
        sol: &ClosedFormSolution,
        strategy: StrategySpec,
        steps: usize,
    ) -> Result<PathSimulator> {
        let p = cfg.params();
        let ou = cfg.ou();
        let kind = cfg.kind();
        let theta = cfg.utility().theta;
        let dt = p.horizon / steps as f64;
        let excess_const = match kind {
            MarketKind::DomesticOnly => p.u_d - p.r_d,
            _ => p.a1(),
        };
        let risky_var = match kind {
            MarketKind::DomesticOnly => p.sigma_d * p.sigma_d,
            _ => p.sigma_bar_sq(),
        };
        let mut optimal_base = Vec::with_capacity(steps);
        let mut feedback_slope = Vec::with_capacity(steps);
        for k in 0..steps {
            let t = dt * k as f64;
            let disc = (-p.r_d * (p.horizon - t)).exp();
            let slope = disc / (theta * risky_var);
            optimal_base.push(excess_const * slope);
            feedback_slope.push(if kind == MarketKind::ForeignOu { slope } else { 0.0 });
        }
        // the base must agree with the closed-form strategy at m = 0
        debug_assert!((optimal_base[0] - sol.strategy(0.0, 0.0)?).abs() < 1e-12);
        let ou_decay = (ou.alpha * dt).exp();
        let ou_noise_sd = if ou.alpha == 0.0 {
            ou.beta * dt.sqrt()
        } else {
            ou.beta * ((2.0 * ou.alpha * dt).exp_m1() / (2.0 * ou.alpha)).sqrt()
        };
        Ok(PathSimulator {
            kind,
            steps,
            dt,
            sqrt_dt: dt.sqrt(),
            optimal_base,
            feedback_slope,
            strategy,
            x0: p.x0,
            m0: ou.m0,
            q0: p.q0,
            sf0: p.sf0,
            u: p.u,
            r_d: p.r_d,
            sigma: p.sigma,
            sigma_f: p.sigma_f,
            sigma_q: p.sigma_q,
            sigma_d: p.sigma_d,
            u_f: p.u_f,
            u_q: p.u_q,
            excess_const,
            ou_decay,
            ou_noise_sd,
        })
    }

    fn amount(&self, step: usize, m: f64) -> f64 {
        match self.strategy {
            StrategySpec::Optimal => {
                self.optimal_base[step] + self.feedback_slope[step] * m
            }
            StrategySpec::ScaledOptimal(f) => {
                f * (self.optimal_base[step] + self.feedback_slope[step] * m)
            }
            StrategySpec::ConstantAmount(v) => v,
            StrategySpec::ZeroInvestment => 0.0,
        }
    }

    /// Advances one Euler step; `record` receives the post-step state.
    fn run<F: FnMut(usize, &SimState)>(
        &self,
        rng: &mut ChaCha8Rng,
        mut record: F,
    ) -> std::result::Result<SimState, usize> {
        let normal = StandardNormal;
        let mut state = SimState { t: 0.0, x: self.x0, m: self.m0, q: self.q0, sf: self.sf0 };
        record(0, &state);
        let foreign = self.kind != MarketKind::DomesticOnly;
        for k in 0..self.steps {
            let pi = self.amount(k, state.m);
            let xi_w: f64 = normal.sample(rng);
            let mut dx = (pi * (self.excess_const
                + if self.kind == MarketKind::ForeignOu { state.m } else { 0.0 })
                + self.u
                + self.r_d * state.x)
                * self.dt
                + self.sigma * self.sqrt_dt * xi_w;
            if foreign {
                let xi_1: f64 = normal.sample(rng);
                let xi_2: f64 = normal.sample(rng);
                let xi_3: f64 = normal.sample(rng);
                dx += pi * self.sigma_f * self.sqrt_dt * xi_1
                    + pi * self.sigma_q * self.sqrt_dt * xi_2;
                let drift_q = self.u_q + state.m;
                state.sf *= ((self.u_f - 0.5 * self.sigma_f * self.sigma_f) * self.dt
                    + self.sigma_f * self.sqrt_dt * xi_1)
                    .exp();
                state.q *= ((drift_q - 0.5 * self.sigma_q * self.sigma_q) * self.dt
                    + self.sigma_q * self.sqrt_dt * xi_2)
                    .exp();
                if self.kind == MarketKind::ForeignOu {
                    state.m = state.m * self.ou_decay + self.ou_noise_sd * xi_3;
                }
            } else {
                let xi_4: f64 = normal.sample(rng);
                dx += pi * self.sigma_d * self.sqrt_dt * xi_4;
            }
            state.x += dx;
            state.t = self.dt * (k + 1) as f64;
            if !state.x.is_finite() || !state.m.is_finite() {
                return Err(k + 1);
            }
            record(k + 1, &state);
        }
        Ok(state)
    }

    /// Common-random-numbers variant: steps one surplus per factor, all
    /// driven by the same noise draws and the same m path.
    fn run_sweep(
        &self,
        rng: &mut ChaCha8Rng,
        factors: &[f64],
        xs: &mut [f64],
    ) -> std::result::Result<(), usize> {
        let normal = StandardNormal;
        let mut m = self.m0;
        xs.fill(self.x0);
        let foreign = self.kind != MarketKind::DomesticOnly;
        for k in 0..self.steps {
            let pi_star = self.optimal_base[k] + self.feedback_slope[k] * m;
            let xi_w: f64 = normal.sample(rng);
            let (xi_r1, xi_r2) = if foreign {
                let a: f64 = normal.sample(rng);
                let b: f64 = normal.sample(rng);
                (a, b)
            } else {
                let a: f64 = normal.sample(rng);
                (a, 0.0)
            };
            let xi_m: f64 = if foreign { normal.sample(rng) } else { 0.0 };
            let m_drift = if self.kind == MarketKind::ForeignOu { m } else { 0.0 };
            for (x, &f) in xs.iter_mut().zip(factors) {
                let pi = f * pi_star;
                // identical operation order to `run` so factor 1.0
                // reproduces the Optimal run bit-exactly
                let mut dx = (pi * (self.excess_const + m_drift)
                    + self.u
                    + self.r_d * *x)
                    * self.dt
                    + self.sigma * self.sqrt_dt * xi_w;
                if foreign {
                    dx += pi * self.sigma_f * self.sqrt_dt * xi_r1
                        + pi * self.sigma_q * self.sqrt_dt * xi_r2;
                } else {
                    dx += pi * self.sigma_d * self.sqrt_dt * xi_r1;
                }
                *x += dx;
                if !x.is_finite() {
                    return Err(k + 1);
                }
            }
            if self.kind == MarketKind::ForeignOu {
                m = m * self.ou_decay + self.ou_noise_sd * xi_m;
            }
        }
        Ok(())
    }
}

/// Simulates a single path and returns its terminal state. Deterministic in
/// `(seed, path_index)` regardless of execution order or worker count.
pub fn simulate_path(
    cfg: &ValidatedConfig,
    sol: &ClosedFormSolution,
    sim: &SimConfig,
    path_index: u64,
) -> Result<SimState> {
    validate_sim(sim)?;
    let simulator = PathSimulator::new(cfg, sol, sim.strategy, sim.steps)?;
    let mut rng = path_rng(sim.seed, path_index);
    simulator
        .run(&mut rng, |_, _| {})
        .map_err(|step| Error::PathBlowUp { path: path_index, step })
}

/// Simulates a single path recording the state after every step.
pub fn simulate_path_trace(
    cfg: &ValidatedConfig,
    sol: &ClosedFormSolution,
    sim: &SimConfig,
    path_index: u64,
) -> Result<Vec<SimState>> {
    validate_sim(sim)?;
    let simulator = PathSimulator::new(cfg, sol, sim.strategy, sim.steps)?;
    let mut rng = path_rng(sim.seed, path_index);
    let mut trace = Vec::with_capacity(sim.steps + 1);
    simulator
        .run(&mut rng, |_, s| trace.push(*s))
        .map_err(|step| Error::PathBlowUp { path: path_index, step })?;
    Ok(trace)
}

/// Compensated (Kahan) sum over a fixed-order slice.
fn kahan_sum(values: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for &v in values {
        let y = v - c;
        let t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    sum
}

fn mean_and_std_error(utilities: &[f64]) -> (f64, f64) {
    let n = utilities.len() as f64;
    let mean = kahan_sum(utilities) / n;
    if utilities.len() < 2 {
        return (mean, 0.0);
    }
    let sq: Vec<f64> = utilities.iter().map(|u| (u - mean) * (u - mean)).collect();
    let var = kahan_sum(&sq) / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Estimates the expected terminal utility E[u(X_T)] under the configured
/// strategy. Paths run concurrently; the estimate is identical to serial
/// execution.
pub fn estimate_utility(
    cfg: &ValidatedConfig,
    sol: &ClosedFormSolution,
    sim: &SimConfig,
) -> Result<SimResult> {
    validate_sim(sim)?;
    let simulator = PathSimulator::new(cfg, sol, sim.strategy, sim.steps)?;
    let ut = *cfg.utility();
    let utilities: Vec<f64> = (0..sim.paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(sim.seed, i);
            simulator
                .run(&mut rng, |_, _| {})
                .map(|s| ut.evaluate(s.x))
                .map_err(|step| Error::PathBlowUp { path: i, step })
        })
        .collect::<Result<Vec<f64>>>()?;
    let (estimate, std_error) = mean_and_std_error(&utilities);
    Ok(SimResult { estimate, std_error, paths: sim.paths, seed: sim.seed, strategy: sim.strategy })
}

/// One estimate per `ScaledOptimal(factor)`, sharing noise draws across
/// factors (common random numbers) for variance reduction.
pub fn strategy_sweep(
    cfg: &ValidatedConfig,
    sol: &ClosedFormSolution,
    sim: &SimConfig,
    factors: &[f64],
) -> Result<Vec<SimResult>> {
    validate_sim(sim)?;
    if factors.is_empty() {
        return Err(Error::Validation("factors must be nonempty".into()));
    }
    if factors.iter().any(|f| !f.is_finite()) {
        return Err(Error::Validation("factors must be finite".into()));
    }
    let simulator = PathSimulator::new(cfg, sol, StrategySpec::Optimal, sim.steps)?;
    let ut = *cfg.utility();
    let per_path: Vec<Vec<f64>> = (0..sim.paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(sim.seed, i);
            let mut xs = vec![0.0; factors.len()];
            simulator
                .run_sweep(&mut rng, factors, &mut xs)
                .map_err(|step| Error::PathBlowUp { path: i, step })?;
            Ok(xs.iter().map(|&x| ut.evaluate(x)).collect())
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    let mut results = Vec::with_capacity(factors.len());
    for (j, &f) in factors.iter().enumerate() {
        let col: Vec<f64> = per_path.iter().map(|row| row[j]).collect();
        let (estimate, std_error) = mean_and_std_error(&col);
        results.push(SimResult {
            estimate,
            std_error,
            paths: sim.paths,
            seed: sim.seed,
            strategy: StrategySpec::ScaledOptimal(f),
        });
    }
    Ok(results)
}
