//! Market and utility parameter types, validation, and config-file ingestion.
//!
//! Validation is the only gate into the math modules: every solver and the
//! Monte Carlo engine take a [`ValidatedConfig`], which can only be built
//! through [`validate`].

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// All market and insurance constants plus the horizon.
///
/// `u` is the surplus drift (premium rate minus expected claims) and `sigma`
/// the surplus volatility of the diffusion approximation. The foreign risky
/// asset has drift `u_f` / volatility `sigma_f` in foreign currency; the
/// exchange rate has target mean growth rate `u_q` and volatility `sigma_q`;
/// the domestic risky asset has drift `u_d` / volatility `sigma_d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketParams {
    pub r_d: f64,
    pub u: f64,
    pub sigma: f64,
    pub u_f: f64,
    pub sigma_f: f64,
    pub u_q: f64,
    pub sigma_q: f64,
    pub u_d: f64,
    pub sigma_d: f64,
    /// Horizon T.
    pub horizon: f64,
    /// Initial surplus.
    pub x0: f64,
    /// Initial exchange-rate price Q(0). Affects only simulated price paths.
    pub q0: f64,
    /// Initial foreign asset price S^f(0). Affects only simulated price paths.
    pub sf0: f64,
}

impl MarketParams {
    /// Excess return of the foreign investment in domestic terms,
    /// A_1 = u_f + u_Q - r_d. Computed, never stored.
    pub fn a1(&self) -> f64 {
        self.u_f + self.u_q - self.r_d
    }

    /// Combined foreign variance sigma_f^2 + sigma_Q^2.
    pub fn sigma_bar_sq(&self) -> f64 {
        self.sigma_f * self.sigma_f + self.sigma_q * self.sigma_q
    }
}

/// Ornstein-Uhlenbeck parameters of the exchange-rate drift deviation m(t):
/// dm = alpha*m dt + beta dW^3, m(0) = m0. Signs are unconstrained; only
/// beta^2 enters the dynamics and beta is normalized to |beta| at validation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OuParams {
    pub alpha: f64,
    pub beta: f64,
    pub m0: f64,
}

impl OuParams {
    pub const ZERO: OuParams = OuParams { alpha: 0.0, beta: 0.0, m0: 0.0 };
}

/// Exponential utility u(x) = lambda - (gamma/theta) e^{-theta x}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtilityParams {
    pub lambda: f64,
    pub gamma: f64,
    /// Absolute risk aversion.
    pub theta: f64,
}

impl UtilityParams {
    pub fn evaluate(&self, x: f64) -> f64 {
        self.lambda - (self.gamma / self.theta) * (-self.theta * x).exp()
    }
}

/// Which market the insurer can invest in, besides the domestic risk-free
/// asset. `ForeignGbm` is `ForeignOu` with alpha = beta = m0 = 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MarketConfig {
    ForeignOu(MarketParams, OuParams),
    ForeignGbm(MarketParams),
    DomesticOnly(MarketParams),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MarketKind {
    ForeignOu,
    ForeignGbm,
    DomesticOnly,
}

impl MarketConfig {
    pub fn params(&self) -> &MarketParams {
        match self {
            MarketConfig::ForeignOu(p, _)
            | MarketConfig::ForeignGbm(p)
            | MarketConfig::DomesticOnly(p) => p,
        }
    }

    pub fn kind(&self) -> MarketKind {
        match self {
            MarketConfig::ForeignOu(..) => MarketKind::ForeignOu,
            MarketConfig::ForeignGbm(_) => MarketKind::ForeignGbm,
            MarketConfig::DomesticOnly(_) => MarketKind::DomesticOnly,
        }
    }

    /// OU parameters of the variant; zero for the degenerate variants.
    pub fn ou(&self) -> OuParams {
        match self {
            MarketConfig::ForeignOu(_, ou) => *ou,
            _ => OuParams::ZERO,
        }
    }
}

/// Current simulation state of the coupled (X, m, Q, S^f) dynamics.
/// The domestic-currency price of the foreign asset g = Q * S^f is computed,
/// not stored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimState {
    pub t: f64,
    /// Surplus in domestic currency.
    pub x: f64,
    /// Exchange-rate drift deviation m(t).
    pub m: f64,
    /// Exchange-rate price Q(t).
    pub q: f64,
    /// Foreign asset price S^f(t), foreign currency.
    pub sf: f64,
}

impl SimState {
    pub fn foreign_asset_domestic_price(&self) -> f64 {
        self.q * self.sf
    }
}

/// A market configuration plus utility that passed all invariants.
/// Immutable; safe to share across concurrent workers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidatedConfig {
    config: MarketConfig,
    utility: UtilityParams,
}

impl ValidatedConfig {
    pub fn config(&self) -> &MarketConfig {
        &self.config
    }

    pub fn params(&self) -> &MarketParams {
        self.config.params()
    }

    pub fn utility(&self) -> &UtilityParams {
        &self.utility
    }

    pub fn ou(&self) -> OuParams {
        self.config.ou()
    }

    pub fn kind(&self) -> MarketKind {
        self.config.kind()
    }

    /// A_1 = u_f + u_Q - r_d of the underlying parameters.
    pub fn a1(&self) -> f64 {
        self.params().a1()
    }
}

fn require(cond: bool, msg: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Validation(msg.to_string()))
    }
}

/// Checks every type invariant and returns the validated wrapper.
/// beta is normalized to |beta|; dynamics depend only on beta^2.
pub fn validate(config: MarketConfig, utility: UtilityParams) -> Result<ValidatedConfig> {
    let p = config.params();
    for (v, name) in [
        (p.r_d, "r_d"),
        (p.u, "u"),
        (p.sigma, "sigma"),
        (p.u_f, "u_f"),
        (p.sigma_f, "sigma_f"),
        (p.u_q, "u_Q"),
        (p.sigma_q, "sigma_Q"),
        (p.u_d, "u_d"),
        (p.sigma_d, "sigma_d"),
        (p.horizon, "T"),
        (p.x0, "x0"),
        (p.q0, "q0"),
        (p.sf0, "sf0"),
    ] {
        require(v.is_finite(), &format!("{name} must be finite"))?;
    }
    require(p.u > 0.0, "u must be > 0")?;
    require(p.sigma > 0.0, "sigma must be > 0")?;
    require(p.sigma_f > 0.0, "sigma_f must be > 0")?;
    require(p.sigma_q > 0.0, "sigma_Q must be > 0")?;
    require(p.sigma_d > 0.0, "sigma_d must be > 0")?;
    require(p.horizon > 0.0, "T must be > 0")?;
    require(p.r_d >= 0.0, "r_d must be >= 0")?;
    require(p.q0 > 0.0, "q0 must be > 0")?;
    require(p.sf0 > 0.0, "sf0 must be > 0")?;

    require(utility.lambda.is_finite(), "lambda must be finite")?;
    require(utility.gamma.is_finite() && utility.gamma > 0.0, "gamma must be > 0")?;
    require(utility.theta.is_finite() && utility.theta > 0.0, "theta must be > 0")?;

    let config = match config {
        MarketConfig::ForeignOu(p, ou) => {
            require(ou.alpha.is_finite(), "alpha must be finite")?;
            require(ou.beta.is_finite(), "beta must be finite")?;
            require(ou.m0.is_finite(), "m0 must be finite")?;
            MarketConfig::ForeignOu(p, OuParams { beta: ou.beta.abs(), ..ou })
        }
        other => other,
    };

    Ok(ValidatedConfig { config, utility })
}

fn default_price() -> f64 {
    1.0
}

/// Flat JSON parameter file. Missing `alpha`/`beta`/`m0` default to 0,
/// missing `q0`/`sf0` default to 1.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ParamFile {
    #[serde(rename = "T")]
    pub t: f64,
    pub r_d: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub theta: f64,
    pub u: f64,
    pub sigma: f64,
    pub u_f: f64,
    pub sigma_f: f64,
    #[serde(rename = "u_Q")]
    pub u_q: f64,
    #[serde(rename = "sigma_Q")]
    pub sigma_q: f64,
    pub u_d: f64,
    pub sigma_d: f64,
    pub x0: f64,
    #[serde(default)]
    pub alpha: f64,
    #[serde(default)]
    pub beta: f64,
    #[serde(default)]
    pub m0: f64,
    #[serde(default = "default_price")]
    pub q0: f64,
    #[serde(default = "default_price")]
    pub sf0: f64,
}

impl ParamFile {
    pub fn from_json(json: &str) -> Result<Self> {
        Ok(serde_json::from_str(json)?)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// First reference parameter set (symmetric risk-adjusted markets).
    pub fn table1() -> Self {
        ParamFile {
            t: 4.0,
            r_d: 0.1,
            lambda: 1.0,
            gamma: 1.0,
            theta: 1.0,
            u: 0.4,
            sigma: 0.1,
            u_f: 0.3,
            sigma_f: 0.1f64.sqrt(),
            u_q: 0.2,
            sigma_q: 0.3f64.sqrt(),
            u_d: 0.3,
            sigma_d: 0.2f64.sqrt(),
            x0: 2.0,
            alpha: 0.0,
            beta: 0.0,
            m0: 0.0,
            q0: 1.0,
            sf0: 1.0,
        }
    }

    pub fn table2() -> Self {
        ParamFile {
            sigma_f: 0.2,
            sigma_q: 0.12f64.sqrt(),
            sigma_d: 0.2,
            ..Self::table1()
        }
    }

    pub fn table3() -> Self {
        ParamFile {
            u_f: 0.2,
            sigma_f: 0.3,
            u_q: 0.3,
            sigma_q: 0.4,
            sigma_d: 0.4,
            ..Self::table1()
        }
    }

    pub fn table(id: u8) -> Option<Self> {
        match id {
            1 => Some(Self::table1()),
            2 => Some(Self::table2()),
            3 => Some(Self::table3()),
            _ => None,
        }
    }

    pub fn market_params(&self) -> MarketParams {
        MarketParams {
            r_d: self.r_d,
            u: self.u,
            sigma: self.sigma,
            u_f: self.u_f,
            sigma_f: self.sigma_f,
            u_q: self.u_q,
            sigma_q: self.sigma_q,
            u_d: self.u_d,
            sigma_d: self.sigma_d,
            horizon: self.t,
            x0: self.x0,
            q0: self.q0,
            sf0: self.sf0,
        }
    }

    pub fn ou_params(&self) -> OuParams {
        OuParams { alpha: self.alpha, beta: self.beta, m0: self.m0 }
    }

    pub fn utility_params(&self) -> UtilityParams {
        UtilityParams { lambda: self.lambda, gamma: self.gamma, theta: self.theta }
    }

    pub fn market_config(&self, kind: MarketKind) -> MarketConfig {
        let p = self.market_params();
        match kind {
            MarketKind::ForeignOu => MarketConfig::ForeignOu(p, self.ou_params()),
            MarketKind::ForeignGbm => MarketConfig::ForeignGbm(p),
            MarketKind::DomesticOnly => MarketConfig::DomesticOnly(p),
        }
    }

    pub fn validated(&self, kind: MarketKind) -> Result<ValidatedConfig> {
        validate(self.market_config(kind), self.utility_params())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table1_accepted() {
        let pf = ParamFile::table1();
        let v = pf.validated(MarketKind::ForeignGbm).unwrap();
        assert_eq!(v.params().u, 0.4);
    }

    #[test]
    fn table3_accepted() {
        let pf = ParamFile::table3();
        pf.validated(MarketKind::ForeignOu).unwrap();
    }

    #[test]
    fn theta_zero_rejected() {
        let pf = ParamFile { theta: 0.0, ..ParamFile::table1() };
        let err = pf.validated(MarketKind::ForeignGbm).unwrap_err();
        assert_eq!(err.to_string(), "theta must be > 0");
    }

    #[test]
    fn a1_is_exact_sum() {
        let p = ParamFile::table1().market_params();
        assert_eq!(p.a1(), 0.3 + 0.2 - 0.1);
        assert_eq!(ParamFile::table3().market_params().a1(), 0.2 + 0.3 - 0.1);
    }

    #[test]
    fn a1_zero_excess() {
        let mut pf = ParamFile::table1();
        pf.u_f = pf.r_d;
        pf.u_q = 0.0;
        assert_eq!(pf.market_params().a1(), 0.0);
    }

    #[test]
    fn beta_normalized_to_abs() {
        let pf = ParamFile { alpha: -0.5, beta: -0.3, m0: 0.1, ..ParamFile::table1() };
        let v = pf.validated(MarketKind::ForeignOu).unwrap();
        assert_eq!(v.ou().beta, 0.3);
    }

    #[test]
    fn json_defaults() {
        let json = r#"{"T":4,"r_d":0.1,"lambda":1,"gamma":1,"theta":1,
            "u":0.4,"sigma":0.1,"u_f":0.3,"sigma_f":0.316,"u_Q":0.2,
            "sigma_Q":0.548,"u_d":0.3,"sigma_d":0.447,"x0":2}"#;
        let pf = ParamFile::from_json(json).unwrap();
        assert_eq!(pf.alpha, 0.0);
        assert_eq!(pf.beta, 0.0);
        assert_eq!(pf.m0, 0.0);
        assert_eq!(pf.q0, 1.0);
        assert_eq!(pf.sf0, 1.0);
    }

    #[test]
    fn negative_sigma_rejected() {
        let pf = ParamFile { sigma_q: -0.1, ..ParamFile::table1() };
        let err = pf.validated(MarketKind::ForeignGbm).unwrap_err();
        assert_eq!(err.to_string(), "sigma_Q must be > 0");
    }
}
