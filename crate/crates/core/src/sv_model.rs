//! Univariate stochastic volatility model with leverage.
//!
//! ```text
//! y_t = phi_y y_{t-1} + exp(h_t / 2) eps_t,                 y_0 = 0
//! h_t = mu_h + phi_h (h_{t-1} - mu_h) + tau eta_t
//! eta_t = rho eps_{t-1} + sqrt(1 - rho^2) eta*_t
//! h_1 ~ N(mu_h, tau^2 / (1 - phi_h^2))
//! ```
//!
//! `eps_t`, `eta*_t` are iid standard normal. Conditioning on `eps_{t-1}`,
//! recovered from the data as `exp(-h_{t-1}/2)(y_{t-1} - phi_y y_{t-2})`, gives
//! the Gaussian transition returned by [`transition_moments`].

use std::f64::consts::{LN_2, PI};
use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::beta::ln_beta;
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::rng::{rng_for, stream};
use crate::timeseries::{fmt_f64, Period, TimeSeries};

pub(crate) const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_7;

/// The five model parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvParams {
    pub mu_h: f64,
    pub phi_y: f64,
    pub phi_h: f64,
    pub tau: f64,
    pub rho: f64,
}

impl SvParams {
    pub const NAMES: [&'static str; 5] = ["mu_h", "phi_y", "phi_h", "tau", "rho"];

    pub fn new(mu_h: f64, phi_y: f64, phi_h: f64, tau: f64, rho: f64) -> Result<Self> {
        let p = SvParams { mu_h, phi_y, phi_h, tau, rho };
        p.validate()?;
        Ok(p)
    }

    /// Posterior means of the leverage model on total-credit growth
    /// (1978Q1–2018Q4), used as a simulation reference point.
    pub fn credit_posterior_mean() -> Self {
        SvParams { mu_h: -10.23, phi_y: 0.83, phi_h: 0.91, tau: 0.27, rho: 0.50 }
    }

    pub fn validate(&self) -> Result<()> {
        let open_unit = |v: f64| v.is_finite() && v.abs() < 1.0;
        if !self.mu_h.is_finite() {
            return Err(Error::Params(format!("mu_h = {} is not finite", self.mu_h)));
        }
        if !open_unit(self.phi_y) {
            return Err(Error::Params(format!("phi_y = {} outside (-1, 1)", self.phi_y)));
        }
        if !open_unit(self.phi_h) {
            return Err(Error::Params(format!("phi_h = {} outside (-1, 1)", self.phi_h)));
        }
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(Error::Params(format!("tau = {} must be positive", self.tau)));
        }
        if !open_unit(self.rho) {
            return Err(Error::Params(format!("rho = {} outside (-1, 1)", self.rho)));
        }
        Ok(())
    }

    pub fn is_valid(&self) -> bool {
        self.validate().is_ok()
    }

    pub fn to_array(&self) -> [f64; 5] {
        [self.mu_h, self.phi_y, self.phi_h, self.tau, self.rho]
    }

    pub fn from_array(a: [f64; 5]) -> Self {
        SvParams { mu_h: a[0], phi_y: a[1], phi_h: a[2], tau: a[3], rho: a[4] }
    }

    /// Standard deviation of the stationary distribution of `h`.
    pub fn stationary_sd(&self) -> f64 {
        (self.tau * self.tau / (1.0 - self.phi_h * self.phi_h)).sqrt()
    }
}

/// Log-volatility path `h_1..h_T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentPath {
    pub h: Vec<f64>,
}

impl LatentPath {
    pub fn len(&self) -> usize {
        self.h.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h.is_empty()
    }

    /// `100 exp(h_t / 2)`, the volatility in percent.
    pub fn volatility_percent(&self) -> Vec<f64> {
        self.h.iter().map(|h| 100.0 * (h / 2.0).exp()).collect()
    }
}

/// Level innovations `eps_1..eps_T`, and total / pure volatility innovations
/// `eta_t`, `eta*_t` for `t = 2..T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShockSet {
    pub periods: Vec<Period>,
    pub eps: Vec<f64>,
    pub eta: Vec<f64>,
    pub eta_star: Vec<f64>,
}

impl ShockSet {
    /// Max absolute elementwise difference across all three sequences.
    pub fn max_abs_diff(&self, other: &ShockSet) -> f64 {
        let d = |a: &[f64], b: &[f64]| -> f64 {
            if a.len() != b.len() {
                return f64::INFINITY;
            }
            a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
        };
        d(&self.eps, &other.eps).max(d(&self.eta, &other.eta)).max(d(&self.eta_star, &other.eta_star))
    }

    /// `eta*_t` as a series indexed by its period (starts one quarter after the data).
    pub fn eta_star_series(&self) -> Result<TimeSeries> {
        TimeSeries::new(self.periods[1..].to_vec(), self.eta_star.clone(), "eta_star")
    }

    pub fn eta_series(&self) -> Result<TimeSeries> {
        TimeSeries::new(self.periods[1..].to_vec(), self.eta.clone(), "eta")
    }

    /// CSV with columns `(t, eps, eta, eta_star)`; `eta` cells are empty at
    /// the first period.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let io = |e: csv::Error| Error::Series(e.to_string());
        out.write_record(["t", "eps", "eta", "eta_star"]).map_err(io)?;
        for (i, p) in self.periods.iter().enumerate() {
            let (eta, eta_star) = if i == 0 {
                (String::new(), String::new())
            } else {
                (fmt_f64(self.eta[i - 1]), fmt_f64(self.eta_star[i - 1]))
            };
            out.write_record([p.to_string(), fmt_f64(self.eps[i]), eta, eta_star]).map_err(io)?;
        }
        out.flush().map_err(|e| Error::Series(e.to_string()))?;
        Ok(())
    }
}

/// Log density of `N(phi_y y_prev, exp(h_t))` at `y_t`.
#[inline]
pub fn log_observation_density(y_t: f64, y_prev: f64, h_t: f64, p: &SvParams) -> f64 {
    let e = y_t - p.phi_y * y_prev;
    -LN_SQRT_2PI - 0.5 * h_t - 0.5 * e * e * (-h_t).exp()
}

/// Mean and variance of `h_t | h_{t-1}, y_{t-1}, y_{t-2}`. Pass `y_prev2 = 0`
/// at `t = 2`.
#[inline]
pub fn transition_moments(h_prev: f64, y_prev: f64, y_prev2: f64, p: &SvParams) -> (f64, f64) {
    let eps_prev = (-0.5 * h_prev).exp() * (y_prev - p.phi_y * y_prev2);
    let mean = p.mu_h + p.phi_h * (h_prev - p.mu_h) + p.rho * p.tau * eps_prev;
    (mean, p.tau * p.tau * (1.0 - p.rho * p.rho))
}

/// Prior family over the five parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum PriorSpec {
    /// `(phi + 1)/2 ~ Beta(a0, b0)` for both persistences, half-Cauchy(0, 1)
    /// on `tau`, flat on `mu_h`, `U(-1, 1)` on `rho`.
    Baseline { a0: f64, b0: f64 },
    /// Truncated normals `TN_(0,1)(phi_mean, phi_sd^2)` on both persistences,
    /// `N(mu_mean, mu_sd^2)` on `mu_h`, `TN_(0,inf)(tau_mean, tau_sd^2)` on
    /// `tau`, `U(-1, 1)` on `rho`.
    Robustness { phi_mean: f64, phi_sd: f64, mu_mean: f64, mu_sd: f64, tau_mean: f64, tau_sd: f64 },
}

impl Default for PriorSpec {
    fn default() -> Self {
        PriorSpec::baseline()
    }
}

impl PriorSpec {
    pub fn baseline() -> Self {
        PriorSpec::Baseline { a0: 20.0, b0: 1.5 }
    }

    pub fn robustness() -> Self {
        PriorSpec::Robustness { phi_mean: 0.9, phi_sd: 0.05, mu_mean: 0.0, mu_sd: 10.0, tau_mean: 0.5, tau_sd: 0.3 }
    }

    pub fn name(&self) -> &'static str {
        match self {
            PriorSpec::Baseline { .. } => "baseline",
            PriorSpec::Robustness { .. } => "robustness",
        }
    }

    /// Log prior density of a persistence parameter (`phi_y` or `phi_h`).
    pub fn log_persistence(&self, phi: f64) -> f64 {
        match *self {
            PriorSpec::Baseline { a0, b0 } => {
                if !(phi > -1.0 && phi < 1.0) {
                    return f64::NEG_INFINITY;
                }
                -LN_2 - ln_beta(a0, b0) + (a0 - 1.0) * ((1.0 + phi) / 2.0).ln() + (b0 - 1.0) * ((1.0 - phi) / 2.0).ln()
            }
            PriorSpec::Robustness { phi_mean, phi_sd, .. } => {
                if !(phi > 0.0 && phi < 1.0) {
                    return f64::NEG_INFINITY;
                }
                log_truncated_normal(phi, phi_mean, phi_sd, 0.0, 1.0)
            }
        }
    }

    pub fn log_mu(&self, mu: f64) -> f64 {
        if !mu.is_finite() {
            return f64::NEG_INFINITY;
        }
        match *self {
            // improper flat prior
            PriorSpec::Baseline { .. } => 0.0,
            PriorSpec::Robustness { mu_mean, mu_sd, .. } => log_normal_pdf(mu, mu_mean, mu_sd),
        }
    }

    pub fn log_tau(&self, tau: f64) -> f64 {
        if !(tau > 0.0 && tau.is_finite()) {
            return f64::NEG_INFINITY;
        }
        match *self {
            PriorSpec::Baseline { .. } => half_cauchy_density(tau).ln(),
            PriorSpec::Robustness { tau_mean, tau_sd, .. } => {
                log_truncated_normal(tau, tau_mean, tau_sd, 0.0, f64::INFINITY)
            }
        }
    }

    pub fn log_rho(&self, rho: f64) -> f64 {
        if rho > -1.0 && rho < 1.0 {
            -LN_2
        } else {
            f64::NEG_INFINITY
        }
    }
}

/// `2 / (pi (1 + tau^2))` for `tau >= 0`, zero otherwise.
pub fn half_cauchy_density(tau: f64) -> f64 {
    if tau >= 0.0 {
        2.0 / (PI * (1.0 + tau * tau))
    } else {
        0.0
    }
}

pub(crate) fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

fn log_normal_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    -LN_SQRT_2PI - sd.ln() - 0.5 * z * z
}

fn log_truncated_normal(x: f64, mean: f64, sd: f64, lo: f64, hi: f64) -> f64 {
    let mass = std_normal_cdf((hi - mean) / sd) - std_normal_cdf((lo - mean) / sd);
    log_normal_pdf(x, mean, sd) - mass.ln()
}

/// Joint log prior on the original parameter scale; `-inf` outside the support.
pub fn log_prior(p: &SvParams, spec: &PriorSpec) -> f64 {
    let lp = spec.log_mu(p.mu_h)
        + spec.log_persistence(p.phi_y)
        + spec.log_persistence(p.phi_h)
        + spec.log_tau(p.tau)
        + spec.log_rho(p.rho);
    if lp.is_nan() {
        f64::NEG_INFINITY
    } else {
        lp
    }
}

/// Simulated data with the latent path and the shocks that generated it.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub y: TimeSeries,
    pub h: LatentPath,
    pub shocks: ShockSet,
}

/// Simulate `t_len` observations. Periods start at `1Q1`.
pub fn simulate(p: &SvParams, t_len: usize, seed: u64) -> Result<Simulation> {
    simulate_impl(p, t_len, seed, false)
}

/// Same as [`simulate`] but always evaluates the leverage term, even when
/// `rho == 0`.
#[doc(hidden)]
pub fn simulate_forcing_leverage(p: &SvParams, t_len: usize, seed: u64) -> Result<Simulation> {
    simulate_impl(p, t_len, seed, true)
}

fn simulate_impl(p: &SvParams, t_len: usize, seed: u64, force_leverage: bool) -> Result<Simulation> {
    p.validate()?;
    if t_len < 2 {
        return Err(Error::InvalidArgument(format!("simulation length {t_len} < 2")));
    }
    let mut rng = rng_for(seed, stream::SIMULATE, 0);
    let mut draw = || -> f64 { rng.sample(StandardNormal) };
    let leverage = force_leverage || p.rho != 0.0;
    let rho_c = (1.0 - p.rho * p.rho).sqrt();

    let mut y = Vec::with_capacity(t_len);
    let mut h = Vec::with_capacity(t_len);
    let mut eps = Vec::with_capacity(t_len);
    let mut eta = Vec::with_capacity(t_len - 1);
    let mut eta_star = Vec::with_capacity(t_len - 1);

    h.push(p.mu_h + p.stationary_sd() * draw());
    eps.push(draw());
    y.push((h[0] / 2.0).exp() * eps[0]);
    for t in 1..t_len {
        let es = draw();
        let e = if leverage { p.rho * eps[t - 1] + rho_c * es } else { es };
        let ht = p.mu_h + p.phi_h * (h[t - 1] - p.mu_h) + p.tau * e;
        let et = draw();
        y.push(p.phi_y * y[t - 1] + (ht / 2.0).exp() * et);
        h.push(ht);
        eps.push(et);
        eta.push(e);
        eta_star.push(es);
    }
    let start = Period::new(1, 1)?;
    let y = TimeSeries::from_start(start, y, "y")?;
    let shocks = ShockSet { periods: y.periods().to_vec(), eps, eta, eta_star };
    Ok(Simulation { y, h: LatentPath { h }, shocks })
}

/// Invert the model equations for the shocks given data and a latent path.
pub fn extract_shocks(y: &TimeSeries, h: &LatentPath, p: &SvParams) -> Result<ShockSet> {
    p.validate()?;
    if y.len() != h.len() {
        return Err(Error::Dimension(format!("{} observations but latent path of length {}", y.len(), h.len())));
    }
    if y.is_empty() {
        return Err(Error::Series("empty series".into()));
    }
    let yv = y.values();
    let rho_c = (1.0 - p.rho * p.rho).sqrt();
    let eps: Vec<f64> = (0..yv.len())
        .map(|t| {
            let prev = if t == 0 { 0.0 } else { yv[t - 1] };
            (-h.h[t] / 2.0).exp() * (yv[t] - p.phi_y * prev)
        })
        .collect();
    let eta: Vec<f64> = (1..yv.len()).map(|t| (h.h[t] - p.mu_h - p.phi_h * (h.h[t - 1] - p.mu_h)) / p.tau).collect();
    let eta_star = eta.iter().enumerate().map(|(i, e)| (e - p.rho * eps[i]) / rho_c).collect();
    Ok(ShockSet { periods: y.periods().to_vec(), eps, eta, eta_star })
}
