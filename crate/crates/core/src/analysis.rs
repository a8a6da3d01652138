//! Cross-market comparisons, figure-data reproduction and the verification
//! suite behind the `verify` CLI subcommand.

use std::cmp::Ordering;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::closed_form::{
    f_exponent, hjb_residual, k_closed_form, solve_k, solve_l, solve_j, uniform_grid,
    ClosedFormSolution, CoefficientTable,
};
use crate::market::{MarketKind, OuParams, ParamFile, ValidatedConfig};
use crate::mc::{estimate_utility, SimConfig, StrategySpec};
use crate::oracle::{finite_diff_check, rk4_backward, OdeProblem, FD_STEPS};
use crate::{Error, Result};

/// Formats with 12 significant digits, `.` decimal separator.
pub fn fmt_sig(x: f64) -> String {
    format!("{x:.11e}")
}

/// Side-by-side schedules and value curves of the foreign (Corollary-1
/// reduction) and domestic-only markets, with the ordering verdicts
/// recomputed from the curves.
#[derive(Debug, Clone)]
pub struct ComparisonReport {
    pub t_grid: Vec<f64>,
    pub pi_foreign: Vec<f64>,
    pub pi_domestic: Vec<f64>,
    pub v_foreign: Vec<f64>,
    pub v_domestic: Vec<f64>,
    /// sigma_d^2 * A_1 — left side of the Table-1 coincidence condition.
    pub cross_foreign: f64,
    /// (sigma_f^2 + sigma_Q^2)(u_d - r_d) — right side.
    pub cross_domestic: f64,
    /// A_1^2 / (sigma_f^2 + sigma_Q^2): squared Sharpe-like term of f.
    pub sharpe_sq_foreign: f64,
    /// (u_d - r_d)^2 / sigma_d^2: squared Sharpe-like term of g.
    pub sharpe_sq_domestic: f64,
    pub drift_sum_foreign: f64,
    pub drift_domestic: f64,
    /// Sign of V_foreign - V_domestic on t < T: Greater, Less, or Equal
    /// when the curves coincide within 1e-12.
    pub value_ordering: Ordering,
    /// Sign of pi_foreign - pi_domestic on t < T, same convention.
    pub strategy_ordering: Ordering,
    /// True when sign(V_f - V_d) matches sign(sharpe_sq_f - sharpe_sq_d)
    /// at every interior grid point.
    pub sharpe_sign_consistent: bool,
}

fn curve_ordering(a: &[f64], b: &[f64]) -> Ordering {
    let mut above = false;
    let mut below = false;
    for (x, y) in a.iter().zip(b) {
        if (x - y).abs() <= 1e-12 {
            continue;
        }
        if x > y {
            above = true;
        } else {
            below = true;
        }
    }
    match (above, below) {
        (true, false) => Ordering::Greater,
        (false, true) => Ordering::Less,
        _ => Ordering::Equal,
    }
}

/// Evaluates the Corollary-1 (foreign, GBM reduction) and Corollary-2
/// (domestic-only) closed forms at `x0` on a grid over [0, T) plus the
/// terminal point, and derives the ordering verdicts.
pub fn compare_markets(pf: &ParamFile, grid_points: usize) -> Result<ComparisonReport> {
    let foreign = pf.validated(MarketKind::ForeignGbm)?;
    let domestic = pf.validated(MarketKind::DomesticOnly)?;
    let sol_f = ClosedFormSolution::new(&foreign, 2)?;
    let sol_d = ClosedFormSolution::new(&domestic, 2)?;
    let p = foreign.params();
    let t_grid = uniform_grid(p.horizon, grid_points.max(2));
    let x0 = p.x0;
    let mut pi_f = Vec::with_capacity(t_grid.len());
    let mut pi_d = Vec::with_capacity(t_grid.len());
    let mut v_f = Vec::with_capacity(t_grid.len());
    let mut v_d = Vec::with_capacity(t_grid.len());
    for &t in &t_grid {
        pi_f.push(sol_f.strategy(t, 0.0)?);
        pi_d.push(sol_d.strategy(t, 0.0)?);
        v_f.push(sol_f.value(t, x0, 0.0)?);
        v_d.push(sol_d.value(t, x0, 0.0)?);
    }
    let n_interior = t_grid.len() - 1;
    let sharpe_f = p.a1() * p.a1() / p.sigma_bar_sq();
    let excess_d = p.u_d - p.r_d;
    let sharpe_d = excess_d * excess_d / (p.sigma_d * p.sigma_d);
    let sharpe_sign = if (sharpe_f - sharpe_d).abs() <= 1e-12 {
        Ordering::Equal
    } else {
        sharpe_f.partial_cmp(&sharpe_d).unwrap()
    };
    let sharpe_sign_consistent = v_f[..n_interior]
        .iter()
        .zip(&v_d[..n_interior])
        .all(|(f, d)| match sharpe_sign {
            Ordering::Greater => f > d,
            Ordering::Less => f < d,
            Ordering::Equal => (f - d).abs() <= 1e-12,
        });
    Ok(ComparisonReport {
        value_ordering: curve_ordering(&v_f[..n_interior], &v_d[..n_interior]),
        strategy_ordering: curve_ordering(&pi_f[..n_interior], &pi_d[..n_interior]),
        t_grid,
        pi_foreign: pi_f,
        pi_domestic: pi_d,
        v_foreign: v_f,
        v_domestic: v_d,
        cross_foreign: p.sigma_d * p.sigma_d * p.a1(),
        cross_domestic: p.sigma_bar_sq() * excess_d,
        sharpe_sq_foreign: sharpe_f,
        sharpe_sq_domestic: sharpe_d,
        drift_sum_foreign: p.u_f + p.u_q,
        drift_domestic: p.u_d,
        sharpe_sign_consistent,
    })
}

fn write_csv(path: &Path, header: &str, rows: &[Vec<f64>]) -> Result<()> {
    let mut out = String::with_capacity(rows.len() * 64);
    out.push_str(header);
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|&v| fmt_sig(v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(out.as_bytes())?;
    Ok(())
}

/// Writes `strategies_<id>.csv` (t, pi*_foreign, pi*_domestic) and
/// `values_<id>.csv` (t, V_foreign, V_domestic) over a 400-point grid at
/// x = x0. The foreign curves use the GBM reduction unless `ou` is given,
/// in which case the full coefficient-table solution is evaluated at m = m0.
pub fn reproduce_figures(
    table_id: u8,
    out_dir: &Path,
    ou: Option<OuParams>,
    grid_points: usize,
) -> Result<Vec<PathBuf>> {
    let pf = ParamFile::table(table_id)
        .ok_or_else(|| Error::Validation(format!("table id must be 1, 2 or 3, got {table_id}")))?;
    std::fs::create_dir_all(out_dir)?;
    let (foreign_sol, m_eval) = match ou {
        Some(ou) => {
            let pf_ou = ParamFile { alpha: ou.alpha, beta: ou.beta, m0: ou.m0, ..pf };
            let cfg = pf_ou.validated(MarketKind::ForeignOu)?;
            (ClosedFormSolution::with_default_grid(&cfg)?, ou.m0)
        }
        None => {
            let cfg = pf.validated(MarketKind::ForeignGbm)?;
            (ClosedFormSolution::new(&cfg, 2)?, 0.0)
        }
    };
    let domestic = pf.validated(MarketKind::DomesticOnly)?;
    let sol_d = ClosedFormSolution::new(&domestic, 2)?;
    let t_grid = uniform_grid(pf.t, grid_points.max(2));
    let mut strat_rows = Vec::with_capacity(t_grid.len());
    let mut value_rows = Vec::with_capacity(t_grid.len());
    for &t in &t_grid {
        strat_rows.push(vec![
            t,
            foreign_sol.strategy(t, m_eval)?,
            sol_d.strategy(t, 0.0)?,
        ]);
        value_rows.push(vec![
            t,
            foreign_sol.value(t, pf.x0, m_eval)?,
            sol_d.value(t, pf.x0, 0.0)?,
        ]);
    }
    let strat_path = out_dir.join(format!("strategies_{table_id}.csv"));
    let value_path = out_dir.join(format!("values_{table_id}.csv"));
    write_csv(&strat_path, "t,pi_star_foreign,pi_star_domestic", &strat_rows)?;
    write_csv(&value_path, "t,V_foreign,V_domestic", &value_rows)?;
    Ok(vec![strat_path, value_path])
}

/// One named check of the verification suite.
#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub max_residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    fn new(name: &'static str, max_residual: f64, tolerance: f64) -> Check {
        Check { name, max_residual, tolerance, pass: max_residual <= tolerance }
    }
}

#[derive(Debug, Clone, Default)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            s.push_str(&format!(
                "{:<34} max residual {:>12.3e}  tol {:>8.0e}  {}\n",
                c.name,
                c.max_residual,
                c.tolerance,
                if c.pass { "PASS" } else { "FAIL" }
            ));
        }
        s
    }
}

fn ou_param_file(pf: &ParamFile) -> ParamFile {
    // the residual checks need a nondegenerate OU leg; fall back to the
    // reference modulation used throughout the test suite
    if pf.beta != 0.0 {
        *pf
    } else {
        ParamFile { alpha: -0.5, beta: 0.3, m0: 0.2, ..*pf }
    }
}

fn riccati_vs_rk4(pf: &ParamFile) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for alpha in [-1.0, -0.5, 0.5] {
        for beta in [0.1, 0.3, 1.0] {
            let pfv = ParamFile { alpha, beta, m0: 0.0, ..*pf };
            let cfg = pfv.validated(MarketKind::ForeignOu)?;
            let p = cfg.params();
            let (sb2, ou) = (p.sigma_bar_sq(), cfg.ou());
            let problem = OdeProblem {
                rhs: move |_t: f64, y: &[f64]| {
                    vec![-(2.0 * beta * beta * y[0] * y[0] + 2.0 * alpha * y[0]
                        - 1.0 / (2.0 * sb2))]
                },
                terminal_time: p.horizon,
                terminal_value: vec![0.0],
                start_time: 0.0,
                steps: 4000,
            };
            let sol = rk4_backward(&problem)?;
            for (i, &t) in sol.times.iter().enumerate() {
                let diff = (k_closed_form(&ou, sb2, p.horizon, t) - sol.values[i][0]).abs();
                worst = worst.max(diff);
            }
        }
    }
    Ok(worst)
}

fn ode_residuals(cfg: &ValidatedConfig, grid_points: usize) -> Result<(f64, f64, f64)> {
    let table = CoefficientTable::build(cfg, grid_points)?;
    let p = cfg.params();
    let ou = cfg.ou();
    let (a1, sb2) = (p.a1(), p.sigma_bar_sq());
    let theta = cfg.utility().theta;
    let (b2, alpha) = (ou.beta * ou.beta, ou.alpha);
    let mut worst = (0.0f64, 0.0f64, 0.0f64);
    // evaluate off the nodes to exercise the interpolation contract
    let eval = uniform_grid(p.horizon, 1777);
    for &t in &eval {
        let tau = p.horizon - t;
        let (k, dk) = (table.k_at(t), table.k_deriv_at(t));
        let (l, dl) = (table.l_at(t), table.l_deriv_at(t));
        let dj = table.j_deriv_at(t);
        let rk = dk + 2.0 * b2 * k * k + 2.0 * alpha * k - 1.0 / (2.0 * sb2);
        let rl = dl + (alpha + 2.0 * b2 * k) * l - a1 / sb2;
        let rj = dj - p.u * theta * (p.r_d * tau).exp()
            + 0.5 * theta * theta * p.sigma * p.sigma * (2.0 * p.r_d * tau).exp()
            - a1 * a1 / (2.0 * sb2)
            + 0.5 * b2 * l * l
            + b2 * k;
        worst.0 = worst.0.max(rk.abs());
        worst.1 = worst.1.max(rl.abs());
        worst.2 = worst.2.max(rj.abs());
    }
    Ok(worst)
}

fn branch_continuity(pf: &ParamFile) -> Result<f64> {
    let near = ParamFile { alpha: -0.5, beta: 1e-4, m0: 0.0, ..*pf };
    let zero = ParamFile { alpha: -0.5, beta: 0.0, m0: 0.0, ..*pf };
    let cfg_near = near.validated(MarketKind::ForeignOu)?;
    let cfg_zero = zero.validated(MarketKind::ForeignOu)?;
    let grid = uniform_grid(pf.t, 2001);
    let kn = solve_k(&cfg_near, &grid)?;
    let kz = solve_k(&cfg_zero, &grid)?;
    Ok(kn.iter().zip(&kz).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
}

fn gbm_reduction(pf: &ParamFile) -> Result<f64> {
    let pf_zero = ParamFile { alpha: 0.0, beta: 0.0, m0: 0.0, ..*pf };
    let ou = ClosedFormSolution::with_default_grid(&pf_zero.validated(MarketKind::ForeignOu)?)?;
    let gbm = ClosedFormSolution::new(&pf.validated(MarketKind::ForeignGbm)?, 2)?;
    let mut rng = ChaCha8Rng::seed_from_u64(0xF0E1);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let t = rng.random::<f64>() * pf.t;
        let x = rng.random::<f64>() * 8.0 - 2.0;
        worst = worst.max((ou.value(t, x, 0.0)? - gbm.value(t, x, 0.0)?).abs());
        worst = worst.max((ou.strategy(t, 0.0)? - gbm.strategy(t, 0.0)?).abs());
    }
    Ok(worst)
}

fn hjb_grid_residual(cfg: &ValidatedConfig, grid_points: usize) -> Result<(f64, f64)> {
    let sol = ClosedFormSolution::new(cfg, grid_points)?;
    let p = cfg.params();
    let n = 20;
    let mut worst: f64 = 0.0;
    let mut worst_concavity = f64::NEG_INFINITY;
    for i in 0..n {
        // keep t strictly inside [0, T]
        let t = p.horizon * (i as f64 + 0.5) / n as f64;
        for jx in 0..n {
            let x = -2.0 + 8.0 * jx as f64 / (n - 1) as f64;
            for jm in 0..n {
                let m = -1.0 + 2.0 * jm as f64 / (n - 1) as f64;
                let (res, quad) = hjb_residual(&sol, t, x, m)?;
                worst = worst.max(res.abs());
                worst_concavity = worst_concavity.max(quad);
            }
        }
    }
    Ok((worst, worst_concavity))
}

fn monotonicity(cfg: &ValidatedConfig) -> Result<f64> {
    let sol = ClosedFormSolution::with_default_grid(cfg)?;
    let p = cfg.params();
    let lambda = cfg.utility().lambda;
    let mut worst_violation: f64 = 0.0;
    for i in 0..25 {
        let t = p.horizon * i as f64 / 25.0;
        let mut prev = f64::NEG_INFINITY;
        for jx in 0..40 {
            let x = -2.0 + 8.0 * jx as f64 / 39.0;
            let v = sol.value(t, x, cfg.ou().m0)?;
            if v >= lambda {
                worst_violation = worst_violation.max(v - lambda + 1.0);
            }
            if v <= prev {
                worst_violation = worst_violation.max(prev - v + f64::MIN_POSITIVE);
            }
            prev = v;
        }
    }
    Ok(worst_violation)
}

fn zero_rate_constant_strategies(pf: &ParamFile) -> Result<f64> {
    let flat = ParamFile { r_d: 0.0, ..*pf };
    let gbm = ClosedFormSolution::new(&flat.validated(MarketKind::ForeignGbm)?, 2)?;
    let dom = ClosedFormSolution::new(&flat.validated(MarketKind::DomesticOnly)?, 2)?;
    let pi_g0 = gbm.strategy(0.0, 0.0)?;
    let pi_d0 = dom.strategy(0.0, 0.0)?;
    let mut worst: f64 = 0.0;
    for i in 0..=50 {
        let t = flat.t * i as f64 / 50.0;
        worst = worst.max((gbm.strategy(t, 0.0)? - pi_g0).abs());
        worst = worst.max((dom.strategy(t, 0.0)? - pi_d0).abs());
    }
    Ok(worst)
}

fn j_matches_f_at_beta_zero(pf: &ParamFile) -> Result<f64> {
    let pfz = ParamFile { alpha: pf.alpha, beta: 0.0, m0: 0.0, ..*pf };
    let cfg = pfz.validated(MarketKind::ForeignOu)?;
    let grid = uniform_grid(pf.t, 801);
    let k = solve_k(&cfg, &grid)?;
    let l = solve_l(&cfg, &k, &grid)?;
    let j = solve_j(&cfg, &k, &l, &grid)?;
    let mut worst: f64 = 0.0;
    for (i, &t) in grid.iter().enumerate() {
        worst = worst.max((j[i] - f_exponent(&cfg, pf.t - t)?).abs());
    }
    Ok(worst)
}

fn finite_diff_partials(cfg: &ValidatedConfig) -> Result<f64> {
    let sol = ClosedFormSolution::with_default_grid(cfg)?;
    let (t, x, m) = (1.0f64.min(cfg.params().horizon / 2.0), 2.0, 0.1);
    let vx = sol.value_x(t, x, m)?;
    let vxx = sol.value_xx(t, x, m)?;
    let f = |xx: f64| sol.value(t, xx, m).unwrap();
    let fx = |xx: f64| sol.value_x(t, xx, m).unwrap();
    let r1 = finite_diff_check(f, x, vx, &FD_STEPS);
    let r2 = finite_diff_check(fx, x, vxx, &FD_STEPS);
    Ok(r1.best_rel_error.max(r2.best_rel_error))
}

fn mc_checks(cfg: &ValidatedConfig) -> Result<(f64, f64)> {
    let sol = ClosedFormSolution::with_default_grid(cfg)?;
    let sim = SimConfig { paths: 512, steps: 64, seed: 2024, strategy: StrategySpec::Optimal };
    let a = estimate_utility(cfg, &sol, &sim)?;
    let b = estimate_utility(cfg, &sol, &sim)?;
    let determinism = if a.estimate.to_bits() == b.estimate.to_bits()
        && a.std_error.to_bits() == b.std_error.to_bits()
    {
        0.0
    } else {
        1.0
    };
    let bound_violation = (a.estimate - cfg.utility().lambda).max(0.0);
    Ok((determinism, bound_violation))
}

/// Runs the full verification suite against the given parameter set:
/// closed-form vs RK4 agreement, ODE and HJB residuals, branch continuity,
/// the GBM reduction, monotonicity, the constant-strategy property at
/// r_d = 0 and Monte Carlo determinism.
pub fn run_verify_suite(pf: &ParamFile, grid_points: usize) -> Result<VerifyReport> {
    let pf_ou = ou_param_file(pf);
    let cfg_ou = pf_ou.validated(MarketKind::ForeignOu)?;
    let mut checks = Vec::new();

    checks.push(Check::new("riccati_closed_form_vs_rk4", riccati_vs_rk4(pf)?, 1e-8));
    let (rk, rl, rj) = ode_residuals(&cfg_ou, grid_points)?;
    checks.push(Check::new("ode_residual_K", rk, 1e-6));
    checks.push(Check::new("ode_residual_L", rl, 1e-6));
    checks.push(Check::new("ode_residual_J", rj, 1e-6));
    checks.push(Check::new("riccati_branch_continuity", branch_continuity(pf)?, 1e-5));
    checks.push(Check::new("gbm_reduction", gbm_reduction(pf)?, 1e-9));
    let (hjb, concavity) = hjb_grid_residual(&cfg_ou, grid_points)?;
    checks.push(Check::new("hjb_residual", hjb, 1e-6));
    // the pi-quadratic coefficient must be strictly negative everywhere
    checks.push(Check { name: "hjb_concavity", max_residual: concavity, tolerance: 0.0, pass: concavity < 0.0 });
    checks.push(Check::new("value_monotonic_below_lambda", monotonicity(&cfg_ou)?, 0.0));
    checks.push(Check::new(
        "zero_rate_constant_strategies",
        zero_rate_constant_strategies(pf)?,
        0.0,
    ));
    checks.push(Check::new("j_equals_f_at_beta_zero", j_matches_f_at_beta_zero(pf)?, 1e-12));
    checks.push(Check::new("finite_diff_partials", finite_diff_partials(&cfg_ou)?, 1e-5));
    let (det, bound) = mc_checks(&cfg_ou)?;
    checks.push(Check::new("mc_determinism", det, 0.0));
    checks.push(Check::new("mc_utility_bound", bound, 0.0));

    Ok(VerifyReport { checks })
}
