//! Standard and correlated pseudo-marginal Metropolis–Hastings.
//!
//! The sampler works in an unconstrained parameterisation (`atanh` for the
//! correlations and persistences, `log` for `tau`) with a Gaussian random walk
//! whose scale is tuned by a Robbins–Monro recursion towards a target
//! acceptance rate. The likelihood is replaced by the particle-filter
//! estimate; in the correlated variant the filter's auxiliary normals are
//! updated as `u' = gamma u + sqrt(1 - gamma^2) u*` rather than redrawn.

use std::io::Write;

use log::{debug, warn};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::particle_filter::{backward_simulate, correlated_pf, make_seed_block, mix_seed, ParticleSystem, SeedBlock};
use crate::rng::{derive_seed, rng_for, stream};
use crate::sv_model::{log_prior, LatentPath, PriorSpec, SvParams};
use crate::timeseries::{fmt_f64, mean, Period, TimeSeries};

/// Number of unconstrained coordinates.
pub const DIM: usize = 5;

/// Map parameters to `(mu_h, atanh phi_y, atanh phi_h, log tau, atanh rho)`.
pub fn transform_params(p: &SvParams) -> Result<[f64; DIM]> {
    p.validate()?;
    Ok([p.mu_h, p.phi_y.atanh(), p.phi_h.atanh(), p.tau.ln(), p.rho.atanh()])
}

/// Inverse of [`transform_params`]. Values whose image lands on a boundary
/// (e.g. `tanh` rounding to 1) are rejected.
pub fn inverse_transform(v: &[f64]) -> Result<SvParams> {
    if v.len() != DIM || v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Params(format!("expected {DIM} finite coordinates, got {v:?}")));
    }
    let p = SvParams::from_array([v[0], v[1].tanh(), v[2].tanh(), v[3].exp(), v[4].tanh()]);
    p.validate()?;
    Ok(p)
}

/// `log |d theta / d v|` of the inverse transform.
pub fn log_jacobian(p: &SvParams) -> f64 {
    (1.0 - p.phi_y * p.phi_y).ln() + (1.0 - p.phi_h * p.phi_h).ln() + p.tau.ln() + (1.0 - p.rho * p.rho).ln()
}

/// Log prior density of the unconstrained coordinates (prior on the original
/// scale plus the log Jacobian).
pub fn log_prior_unconstrained(v: &[f64], prior: &PriorSpec) -> f64 {
    match inverse_transform(v) {
        Ok(p) => {
            let lp = log_prior(&p, prior);
            if lp.is_finite() {
                lp + log_jacobian(&p)
            } else {
                f64::NEG_INFINITY
            }
        }
        Err(_) => f64::NEG_INFINITY,
    }
}

/// Robbins–Monro step constant for a random walk in `dim` dimensions
/// targeting acceptance `target`:
/// `(1 - 1/m) sqrt(2 pi) exp(a^2 / 2) / (2 a) + 1 / (m p (1 - p))` with
/// `a = -Phi^{-1}(p / 2)`.
pub fn steplength_constant(target: f64, dim: usize) -> f64 {
    let m = dim as f64;
    let a = -Normal::standard().inverse_cdf(target / 2.0);
    (1.0 - 1.0 / m) * (2.0 * std::f64::consts::PI).sqrt() * (a * a / 2.0).exp() / (2.0 * a)
        + 1.0 / (m * target * (1.0 - target))
}

/// One Robbins–Monro update of the proposal scale on the log scale:
/// `log s += c (accepted - target) / max(iteration, 1)`.
pub fn adapt_scale(current_scale: f64, accepted: bool, iteration: usize, target: f64, step_constant: f64) -> f64 {
    let a = if accepted { 1.0 } else { 0.0 };
    (current_scale.ln() + step_constant * (a - target) / iteration.max(1) as f64).exp()
}

/// Counter value at which a restarted scale search resumes,
/// `5 / (p (1 - p))`, the usual restart rule for Robbins–Monro scale searches.
pub fn restart_offset(target: f64) -> usize {
    (5.0 / (target * (1.0 - target))).round() as usize
}

/// A posterior the sampler can explore with estimated likelihoods.
pub trait PseudoMarginalTarget {
    /// Auxiliary random numbers indexing the likelihood estimator.
    type Aux: Clone;
    /// Whatever the estimator produces besides the log-likelihood.
    type Estimate;

    fn dim(&self) -> usize;

    /// Log prior of the unconstrained coordinates, Jacobian included.
    fn log_prior(&self, v: &[f64]) -> f64;

    fn fresh_aux(&self, seed: u64) -> Self::Aux;

    /// `gamma * aux + sqrt(1 - gamma^2) * fresh_aux(seed)`.
    fn correlate_aux(&self, aux: &Self::Aux, gamma: f64, seed: u64) -> Self::Aux;

    fn log_likelihood(&self, v: &[f64], aux: &Self::Aux) -> Result<(f64, Self::Estimate)>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Standard,
    #[default]
    Correlated,
}

/// Settings of the adaptive random-walk engine.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SamplerSettings {
    pub iterations: usize,
    pub burn_in: usize,
    pub gamma: f64,
    pub variant: Variant,
    pub target_accept: f64,
    pub seed: u64,
    pub initial_scale: f64,
    /// Iterations with an identity proposal covariance before switching to
    /// the chain's empirical covariance. At the switch the scale restarts
    /// from `2.38 / sqrt(dim)`.
    pub identity_phase: usize,
    /// Empirical covariance refresh period after the identity phase.
    pub refresh_every: usize,
}

impl Default for SamplerSettings {
    fn default() -> Self {
        SamplerSettings {
            iterations: 15_000,
            burn_in: 5_000,
            gamma: 0.99,
            variant: Variant::Correlated,
            target_accept: 0.25,
            seed: 1,
            initial_scale: 0.1,
            identity_phase: 500,
            refresh_every: 100,
        }
    }
}

/// What the engine tells its observer.
pub enum ChainEvent<'a, E> {
    /// A new state was accepted (`iteration == 0` is the initial state).
    Accepted { iteration: usize, v: &'a [f64], estimate: &'a E },
    /// The current state is retained as draw number `index`.
    Retained { iteration: usize, index: usize },
}

/// Raw chain output in unconstrained coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainTrace {
    pub draws: Vec<Vec<f64>>,
    pub logliks: Vec<f64>,
    pub accept_trace: Vec<bool>,
    pub scale_trace: Vec<f64>,
    pub filter_failures: usize,
    pub step_constant: f64,
}

/// Running mean and covariance (Welford).
struct RunningMoments {
    n: f64,
    mean: DVector<f64>,
    m2: DMatrix<f64>,
}

impl RunningMoments {
    fn new(dim: usize) -> Self {
        RunningMoments { n: 0.0, mean: DVector::zeros(dim), m2: DMatrix::zeros(dim, dim) }
    }

    fn push(&mut self, x: &[f64]) {
        let x = DVector::from_column_slice(x);
        self.n += 1.0;
        let delta = &x - &self.mean;
        self.mean += &delta / self.n;
        let delta2 = &x - &self.mean;
        self.m2 += &delta * delta2.transpose();
    }

    fn covariance(&self) -> DMatrix<f64> {
        &self.m2 / (self.n - 1.0).max(1.0)
    }
}

fn cholesky_or_identity(cov: &DMatrix<f64>) -> DMatrix<f64> {
    let dim = cov.nrows();
    let reg = cov + DMatrix::identity(dim, dim) * 1e-8;
    match reg.cholesky() {
        Some(c) => c.l(),
        None => {
            warn!("empirical proposal covariance is not positive definite; keeping identity");
            DMatrix::identity(dim, dim)
        }
    }
}

/// Adaptive random-walk pseudo-marginal MH. Deterministic given `settings.seed`.
///
/// A likelihood failure at a proposal counts as a zero likelihood (rejection);
/// a failure at `init` is an error.
pub fn run_pmmh<T, F>(target: &T, init: &[f64], settings: &SamplerSettings, mut observe: F) -> Result<ChainTrace>
where
    T: PseudoMarginalTarget,
    F: FnMut(ChainEvent<'_, T::Estimate>) -> Result<()>,
{
    let dim = target.dim();
    if init.len() != dim {
        return Err(Error::Dimension(format!("initial point has {} coordinates, target {}", init.len(), dim)));
    }
    if settings.burn_in >= settings.iterations {
        return Err(Error::InvalidArgument("burn-in must be smaller than the number of iterations".into()));
    }
    if !(0.0..=1.0).contains(&settings.gamma) {
        return Err(Error::InvalidArgument(format!("gamma = {} outside [0, 1]", settings.gamma)));
    }
    if !(settings.target_accept > 0.0 && settings.target_accept < 1.0) {
        return Err(Error::InvalidArgument("target acceptance must lie in (0, 1)".into()));
    }

    let seed = settings.seed;
    let mut proposal_rng = rng_for(seed, stream::PROPOSAL, 0);
    let mut accept_rng = rng_for(seed, stream::ACCEPT, 0);
    let step_constant = steplength_constant(settings.target_accept, dim);

    let mut v = init.to_vec();
    let mut lp = target.log_prior(&v);
    if !lp.is_finite() {
        return Err(Error::ChainInit("initial point has zero prior density".into()));
    }
    let mut aux = target.fresh_aux(derive_seed(seed, stream::REFRESH, 0));
    let (mut ll, est) = target.log_likelihood(&v, &aux).map_err(|e| Error::ChainInit(e.to_string()))?;
    if !ll.is_finite() {
        return Err(Error::ChainInit("non-finite log-likelihood at the initial point".into()));
    }
    observe(ChainEvent::Accepted { iteration: 0, v: &v, estimate: &est })?;

    let retained = settings.iterations - settings.burn_in;
    let mut trace = ChainTrace {
        draws: Vec::with_capacity(retained),
        logliks: Vec::with_capacity(retained),
        accept_trace: Vec::with_capacity(settings.iterations),
        scale_trace: Vec::with_capacity(settings.iterations),
        filter_failures: 0,
        step_constant,
    };

    let mut scale = settings.initial_scale;
    let mut chol = DMatrix::<f64>::identity(dim, dim);
    let mut moments = RunningMoments::new(dim);
    let mut z = DVector::<f64>::zeros(dim);
    // Robbins–Monro counter is `it - rm_origin`
    let mut rm_origin = 0usize;

    for it in 1..=settings.iterations {
        if it > settings.identity_phase
            && (it - settings.identity_phase - 1).is_multiple_of(settings.refresh_every.max(1))
        {
            chol = cholesky_or_identity(&moments.covariance());
            if it == settings.identity_phase + 1 {
                // the identity-phase scale is meaningless for the new covariance:
                // restart the search from the optimal random-walk scale
                scale = 2.38 / (dim as f64).sqrt();
                rm_origin = it.saturating_sub(restart_offset(settings.target_accept));
            }
        }
        for zi in z.iter_mut() {
            *zi = proposal_rng.sample(StandardNormal);
        }
        let step = &chol * &z * scale;
        let v_prop: Vec<f64> = v.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
        let log_u: f64 = accept_rng.random::<f64>().ln();

        let refresh_seed = derive_seed(seed, stream::REFRESH, it as u64);
        let lp_prop = target.log_prior(&v_prop);
        let mut accepted = false;
        if lp_prop.is_finite() {
            let aux_prop = match settings.variant {
                Variant::Correlated => target.correlate_aux(&aux, settings.gamma, refresh_seed),
                Variant::Standard => target.fresh_aux(refresh_seed),
            };
            match target.log_likelihood(&v_prop, &aux_prop) {
                Ok((ll_prop, est)) if ll_prop.is_finite() => {
                    if log_u < acceptance_log_ratio(ll_prop, lp_prop, ll, lp) {
                        accepted = true;
                        v = v_prop;
                        lp = lp_prop;
                        ll = ll_prop;
                        aux = aux_prop;
                        observe(ChainEvent::Accepted { iteration: it, v: &v, estimate: &est })?;
                    }
                }
                Ok(_) => trace.filter_failures += 1,
                Err(e) => {
                    debug!("iteration {it}: likelihood failed ({e}); rejecting");
                    trace.filter_failures += 1;
                }
            }
        }

        trace.accept_trace.push(accepted);
        trace.scale_trace.push(scale);
        scale = adapt_scale(scale, accepted, it - rm_origin, settings.target_accept, step_constant);
        moments.push(&v);

        if it > settings.burn_in {
            let index = trace.draws.len();
            trace.draws.push(v.clone());
            trace.logliks.push(ll);
            observe(ChainEvent::Retained { iteration: it, index })?;
        }
    }
    if trace.filter_failures > 0 {
        warn!("{} proposals rejected after likelihood failures", trace.filter_failures);
    }
    Ok(trace)
}

/// Log of the MH ratio for a symmetric proposal.
pub fn acceptance_log_ratio(ll_prop: f64, lp_prop: f64, ll_cur: f64, lp_cur: f64) -> f64 {
    (ll_prop + lp_prop) - (ll_cur + lp_cur)
}

/// The leverage model with particle-filter likelihood.
pub struct SvTarget<'a> {
    pub y: &'a TimeSeries,
    pub prior: PriorSpec,
    pub particles: usize,
}

impl PseudoMarginalTarget for SvTarget<'_> {
    type Aux = SeedBlock;
    type Estimate = (SvParams, ParticleSystem);

    fn dim(&self) -> usize {
        DIM
    }

    fn log_prior(&self, v: &[f64]) -> f64 {
        log_prior_unconstrained(v, &self.prior)
    }

    fn fresh_aux(&self, seed: u64) -> SeedBlock {
        make_seed_block(self.y.len(), self.particles, seed)
    }

    fn correlate_aux(&self, aux: &SeedBlock, gamma: f64, seed: u64) -> SeedBlock {
        if gamma == 1.0 {
            return aux.clone();
        }
        mix_seed(aux, &self.fresh_aux(seed), gamma)
    }

    fn log_likelihood(&self, v: &[f64], aux: &SeedBlock) -> Result<(f64, Self::Estimate)> {
        let p = inverse_transform(v)?;
        let ps = correlated_pf(self.y, &p, aux, self.particles)?;
        Ok((ps.loglik, (p, ps)))
    }
}

/// Full chain configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub particles: usize,
    pub gamma: f64,
    pub target_accept: f64,
    pub seed: u64,
    pub prior: PriorSpec,
    pub variant: Variant,
    /// Keep every `path_thin`-th retained latent path (1 keeps all, 0 none).
    pub path_thin: usize,
    /// Starting point; a data-driven default when `None`.
    pub init: Option<SvParams>,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            iterations: 15_000,
            burn_in: 5_000,
            particles: 100,
            gamma: 0.99,
            target_accept: 0.25,
            seed: 1,
            prior: PriorSpec::baseline(),
            variant: Variant::Correlated,
            path_thin: 10,
            init: None,
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.burn_in >= self.iterations {
            return Err(Error::InvalidArgument(format!(
                "burn-in {} must be below iterations {}",
                self.burn_in, self.iterations
            )));
        }
        if self.particles < 2 {
            return Err(Error::InvalidArgument("at least two particles are required".into()));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::InvalidArgument(format!("gamma = {} outside [0, 1]", self.gamma)));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(Error::InvalidArgument("target acceptance must lie in (0, 1)".into()));
        }
        if let Some(p) = &self.init {
            p.validate()?;
        }
        Ok(())
    }
}

/// Retained draws and chain diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorDraws {
    pub params: Vec<SvParams>,
    /// `(retained index, path)` for the stored latent paths.
    pub latent_paths: Vec<(usize, LatentPath)>,
    pub accept_trace: Vec<bool>,
    pub scale_trace: Vec<f64>,
    pub logliks: Vec<f64>,
    /// Posterior mean of `h_t` over all retained draws.
    pub mean_h: Vec<f64>,
    /// Posterior mean of `100 exp(h_t / 2)` over all retained draws.
    pub mean_vol: Vec<f64>,
    pub periods: Vec<Period>,
    pub filter_failures: usize,
    pub step_constant: f64,
}

impl PosteriorDraws {
    pub fn acceptance_rate(&self) -> f64 {
        rate(&self.accept_trace)
    }

    /// Acceptance rate over the iterations after `burn_in`.
    pub fn acceptance_rate_after(&self, burn_in: usize) -> f64 {
        rate(&self.accept_trace[burn_in.min(self.accept_trace.len())..])
    }

    pub fn posterior_mean(&self) -> SvParams {
        let mut acc = [0.0; DIM];
        for p in &self.params {
            for (a, x) in acc.iter_mut().zip(p.to_array()) {
                *a += x;
            }
        }
        SvParams::from_array(acc.map(|a| a / self.params.len() as f64))
    }

    pub fn mean_path(&self) -> LatentPath {
        LatentPath { h: self.mean_h.clone() }
    }

    /// Draws CSV: `mu_h, phi_y, phi_h, tau, rho, loglik`.
    pub fn write_draws_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let io = |e: csv::Error| Error::Series(e.to_string());
        out.write_record(["mu_h", "phi_y", "phi_h", "tau", "rho", "loglik"]).map_err(io)?;
        for (p, ll) in self.params.iter().zip(&self.logliks) {
            let mut row: Vec<String> = p.to_array().iter().map(|v| fmt_f64(*v)).collect();
            row.push(fmt_f64(*ll));
            out.write_record(&row).map_err(io)?;
        }
        out.flush().map_err(|e| Error::Series(e.to_string()))?;
        Ok(())
    }

    /// Volatility CSV: `t, vol_mean, vol_p05, vol_p95` with `vol = 100 exp(h_t / 2)`.
    /// Bands come from the stored latent paths.
    pub fn write_volatility_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let io = |e: csv::Error| Error::Series(e.to_string());
        out.write_record(["t", "vol_mean", "vol_p05", "vol_p95"]).map_err(io)?;
        let mut column = Vec::with_capacity(self.latent_paths.len());
        for (t, p) in self.periods.iter().enumerate() {
            column.clear();
            column.extend(self.latent_paths.iter().map(|(_, path)| 100.0 * (path.h[t] / 2.0).exp()));
            column.sort_by(f64::total_cmp);
            let (lo, hi) = if column.is_empty() {
                (f64::NAN, f64::NAN)
            } else {
                (quantile_sorted(&column, 0.05), quantile_sorted(&column, 0.95))
            };
            out.write_record([p.to_string(), fmt_f64(self.mean_vol[t]), fmt_f64(lo), fmt_f64(hi)]).map_err(io)?;
        }
        out.flush().map_err(|e| Error::Series(e.to_string()))?;
        Ok(())
    }
}

fn rate(flags: &[bool]) -> f64 {
    if flags.is_empty() {
        return f64::NAN;
    }
    flags.iter().filter(|&&a| a).count() as f64 / flags.len() as f64
}

/// Data-driven starting point: AR(1) fit for `phi_y`, log residual variance
/// for `mu_h`, and `phi_h = 0.9`, `tau = 0.3`, `rho = 0`.
pub fn default_init(y: &TimeSeries) -> SvParams {
    let v = y.values();
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for w in v.windows(2) {
        sxy += w[0] * w[1];
        sxx += w[0] * w[0];
    }
    let phi_y = if sxx > 0.0 { (sxy / sxx).clamp(-0.9, 0.9) } else { 0.0 };
    let resid: Vec<f64> = v.windows(2).map(|w| w[1] - phi_y * w[0]).collect();
    let var = if resid.is_empty() { 1.0 } else { resid.iter().map(|r| r * r).sum::<f64>() / resid.len() as f64 };
    let mu_h = if var > 0.0 { var.ln() } else { -10.0 };
    SvParams { mu_h, phi_y, phi_h: 0.9, tau: 0.3, rho: 0.0 }
}

/// Run the PMMH chain for the leverage model on a demeaned series.
pub fn run_chain(y: &TimeSeries, cfg: &ChainConfig) -> Result<PosteriorDraws> {
    cfg.validate()?;
    if y.len() < 3 {
        return Err(Error::InsufficientData("need at least three observations".into()));
    }
    let target = SvTarget { y, prior: cfg.prior, particles: cfg.particles };
    let init = cfg.init.unwrap_or_else(|| default_init(y));
    let init_v = transform_params(&init)?;
    let settings = SamplerSettings {
        iterations: cfg.iterations,
        burn_in: cfg.burn_in,
        gamma: cfg.gamma,
        variant: cfg.variant,
        target_accept: cfg.target_accept,
        seed: cfg.seed,
        ..SamplerSettings::default()
    };

    let t_len = y.len();
    let mut current_path: Option<LatentPath> = None;
    let mut paths = Vec::new();
    let mut sum_h = vec![0.0; t_len];
    let mut sum_vol = vec![0.0; t_len];
    let mut retained = 0usize;

    let trace = run_pmmh(&target, &init_v, &settings, |event| {
        match event {
            ChainEvent::Accepted { iteration, estimate: (p, ps), .. } => {
                let seed = derive_seed(cfg.seed, stream::BACKWARD, iteration as u64);
                current_path = Some(backward_simulate(ps, y, p, seed)?);
            }
            ChainEvent::Retained { index, .. } => {
                let path = current_path.as_ref().expect("initial path is set before the first iteration");
                for ((sh, sv), h) in sum_h.iter_mut().zip(sum_vol.iter_mut()).zip(&path.h) {
                    *sh += h;
                    *sv += 100.0 * (h / 2.0).exp();
                }
                retained += 1;
                if cfg.path_thin > 0 && index % cfg.path_thin == 0 {
                    paths.push((index, path.clone()));
                }
            }
        }
        Ok(())
    })?;

    let params = trace.draws.iter().map(|v| inverse_transform(v)).collect::<Result<Vec<_>>>()?;
    let n = retained.max(1) as f64;
    Ok(PosteriorDraws {
        params,
        latent_paths: paths,
        accept_trace: trace.accept_trace,
        scale_trace: trace.scale_trace,
        logliks: trace.logliks,
        mean_h: sum_h.iter().map(|s| s / n).collect(),
        mean_vol: sum_vol.iter().map(|s| s / n).collect(),
        periods: y.periods().to_vec(),
        filter_failures: trace.filter_failures,
        step_constant: trace.step_constant,
    })
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Integrated autocorrelation time by Geyer's initial monotone sequence.
/// `None` when the series has zero variance.
pub fn integrated_autocorrelation_time(x: &[f64]) -> Option<f64> {
    let n = x.len();
    if n < 2 {
        return None;
    }
    let m = mean(x);
    let c0 = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64;
    if c0.is_nan() || c0 <= 0.0 {
        return None;
    }
    let acov = |lag: usize| -> f64 { (0..n - lag).map(|i| (x[i] - m) * (x[i + lag] - m)).sum::<f64>() / n as f64 };
    // Gamma_k = rho_{2k} + rho_{2k+1}, truncated at the first non-positive pair
    // and forced monotone
    let mut tau = -1.0;
    let mut prev = f64::INFINITY;
    let mut k = 0;
    while 2 * k + 1 < n {
        let pair = (acov(2 * k) + acov(2 * k + 1)) / c0;
        if pair <= 0.0 {
            break;
        }
        let pair = pair.min(prev);
        tau += 2.0 * pair;
        prev = pair;
        k += 1;
    }
    Some(tau.max(1.0 / n as f64))
}

/// Per-parameter posterior summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSummary {
    pub name: String,
    pub mean: f64,
    pub ci95: [f64; 2],
    pub iact: Option<f64>,
    pub ess: Option<f64>,
    /// Set when the chain never moved for this parameter.
    pub degenerate: bool,
}

/// Posterior table plus chain-level diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub parameters: Vec<ParamSummary>,
    pub retained_draws: usize,
    pub acceptance_rate: f64,
    pub filter_failures: usize,
}

/// Minimum retained draws for [`summarize`].
pub const MIN_SUMMARY_DRAWS: usize = 100;

pub fn summarize_scalar(name: &str, x: &[f64]) -> ParamSummary {
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iact = integrated_autocorrelation_time(x);
    ParamSummary {
        name: name.to_string(),
        mean: mean(x),
        ci95: [quantile_sorted(&sorted, 0.025), quantile_sorted(&sorted, 0.975)],
        iact,
        ess: iact.map(|t| x.len() as f64 / t),
        degenerate: iact.is_none(),
    }
}

pub fn summarize(d: &PosteriorDraws) -> Result<Summary> {
    if d.params.len() < MIN_SUMMARY_DRAWS {
        return Err(Error::InsufficientData(format!(
            "{} retained draws; summaries need at least {MIN_SUMMARY_DRAWS}",
            d.params.len()
        )));
    }
    let parameters = SvParams::NAMES
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let col: Vec<f64> = d.params.iter().map(|p| p.to_array()[k]).collect();
            summarize_scalar(name, &col)
        })
        .collect();
    let burn_in = d.accept_trace.len() - d.params.len();
    Ok(Summary {
        parameters,
        retained_draws: d.params.len(),
        acceptance_rate: d.acceptance_rate_after(burn_in),
        filter_failures: d.filter_failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sv_model::simulate;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn transform_fixed_points_and_boundaries() {
        let p = SvParams::new(-10.0, 0.0, 0.5, 1.0, 0.0).unwrap();
        let v = transform_params(&p).unwrap();
        assert_eq!(v[3], 0.0);
        assert_eq!(v[1], 0.0);
        assert!(transform_params(&SvParams { phi_h: 1.0, ..p }).is_err());
        assert!(transform_params(&SvParams { tau: 0.0, ..p }).is_err());
        assert!(inverse_transform(&[0.0, 40.0, 0.0, 0.0, 0.0]).is_err());
        assert_eq!(log_prior_unconstrained(&[0.0, 40.0, 0.0, 0.0, 0.0], &PriorSpec::baseline()), f64::NEG_INFINITY);
    }

    proptest! {
        #[test]
        fn transform_round_trip(
            mu in -15.0f64..5.0, py in -0.999f64..0.999, ph in -0.999f64..0.999,
            tau in 1e-3f64..10.0, rho in -0.999f64..0.999,
        ) {
            let p = SvParams::new(mu, py, ph, tau, rho).unwrap();
            let back = inverse_transform(&transform_params(&p).unwrap()).unwrap();
            for (a, b) in p.to_array().iter().zip(back.to_array()) {
                prop_assert!((a - b).abs() < 1e-12 * (1.0 + a.abs()));
            }
        }

        #[test]
        fn adaptation_is_diminishing(scale in 1e-3f64..10.0, acc: bool, it in 1usize..100_000) {
            let c = steplength_constant(0.25, 5);
            let s = adapt_scale(scale, acc, it, 0.25, c);
            prop_assert!((s.ln() - scale.ln()).abs() <= c / it as f64 + 1e-12);
        }
    }

    #[test]
    fn steplength_constant_values() {
        // one dimension reduces to 1 / (p (1 - p))
        assert!((steplength_constant(0.44, 1) - 1.0 / (0.44 * 0.56)).abs() < 1e-12);
        let c = steplength_constant(0.25, 5);
        assert!(c > 2.5 && c < 3.0, "{c}");
    }

    #[test]
    fn adaptation_fixed_point_and_monotonicity() {
        let c = steplength_constant(0.25, 5);
        // accepted 1 in 4 exactly: the scale returns to where it started each cycle
        // up to the 1/i weighting, and the drift vanishes
        let mut s = 1.0;
        let mut drift_late = 0.0;
        for it in 1..=40_000usize {
            let before = s;
            s = adapt_scale(s, it % 4 == 0, it, 0.25, c);
            if it > 39_000 {
                drift_late += (s.ln() - before.ln()).abs();
            }
        }
        assert!(drift_late / 1000.0 < 1e-4);
        let mut s = 1.0;
        for it in 1..100 {
            let next = adapt_scale(s, false, it, 0.25, c);
            assert!(next < s);
            s = next;
        }
    }

    /// Exact-likelihood target: N(0, I_d) posterior, flat prior.
    struct Gaussian(usize);

    impl PseudoMarginalTarget for Gaussian {
        type Aux = ();
        type Estimate = ();
        fn dim(&self) -> usize {
            self.0
        }
        fn log_prior(&self, _v: &[f64]) -> f64 {
            0.0
        }
        fn fresh_aux(&self, _seed: u64) {}
        fn correlate_aux(&self, _aux: &(), _gamma: f64, _seed: u64) {}
        fn log_likelihood(&self, v: &[f64], _aux: &()) -> Result<(f64, ())> {
            Ok((-0.5 * v.iter().map(|x| x * x).sum::<f64>(), ()))
        }
    }

    #[test]
    fn self_tuning_hits_target_acceptance() {
        let settings = SamplerSettings { iterations: 10_000, burn_in: 2_000, seed: 3, ..SamplerSettings::default() };
        let trace = run_pmmh(&Gaussian(5), &[0.0; 5], &settings, |_| Ok(())).unwrap();
        let acc = rate(&trace.accept_trace[2_000..]);
        assert!((acc - 0.25).abs() < 0.05, "acceptance {acc}");
    }

    #[test]
    fn replaying_seed_reproduces_accept_trace() {
        let settings = SamplerSettings { iterations: 600, burn_in: 100, seed: 5, ..SamplerSettings::default() };
        let a = run_pmmh(&Gaussian(2), &[0.0; 2], &settings, |_| Ok(())).unwrap();
        let b = run_pmmh(&Gaussian(2), &[0.0; 2], &settings, |_| Ok(())).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.draws.len(), 500);
    }

    #[test]
    fn identical_proposal_with_identical_seed_is_accepted() {
        let p = SvParams::credit_posterior_mean();
        let sim = simulate(&p, 50, 1).unwrap();
        let u = make_seed_block(50, 30, 2);
        let a = correlated_pf(&sim.y, &p, &u, 30).unwrap();
        let u2 = crate::particle_filter::correlate_seed(&u, 1.0, 9).unwrap();
        let b = correlated_pf(&sim.y, &p, &u2, 30).unwrap();
        let lp = log_prior(&p, &PriorSpec::baseline());
        let ratio = acceptance_log_ratio(b.loglik, lp, a.loglik, lp);
        assert_eq!(ratio, 0.0);
        assert_eq!(ratio.exp().min(1.0), 1.0);
    }

    #[test]
    fn config_validation() {
        assert!(ChainConfig::default().validate().is_ok());
        assert!(ChainConfig { burn_in: 15_000, ..ChainConfig::default() }.validate().is_err());
        assert!(ChainConfig { particles: 1, ..ChainConfig::default() }.validate().is_err());
        assert!(ChainConfig { gamma: 1.1, ..ChainConfig::default() }.validate().is_err());
        assert!(ChainConfig { target_accept: 1.0, ..ChainConfig::default() }.validate().is_err());
    }

    #[test]
    fn short_chain_outputs_are_consistent() {
        let p = SvParams::credit_posterior_mean();
        let sim = simulate(&p, 60, 8).unwrap();
        let cfg = ChainConfig {
            iterations: 400,
            burn_in: 150,
            particles: 20,
            seed: 4,
            path_thin: 10,
            ..ChainConfig::default()
        };
        let d = run_chain(&sim.y, &cfg).unwrap();
        assert_eq!(d.params.len(), 250);
        assert_eq!(d.logliks.len(), 250);
        assert_eq!(d.accept_trace.len(), 400);
        assert_eq!(d.scale_trace.len(), 400);
        assert_eq!(d.latent_paths.len(), 25);
        assert_eq!(d.mean_h.len(), 60);
        let again = run_chain(&sim.y, &cfg).unwrap();
        assert_eq!(d, again);
        let s = summarize(&d).unwrap();
        assert_eq!(s.parameters.len(), 5);
        assert_eq!(s.parameters[0].name, "mu_h");
        for ps in &s.parameters {
            assert!(ps.ci95[0] <= ps.mean && ps.mean <= ps.ci95[1]);
        }
        let mut buf = Vec::new();
        d.write_draws_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("mu_h,phi_y,phi_h,tau,rho,loglik\n"));
    }

    #[test]
    fn summary_of_small_vectors() {
        let s = summarize_scalar("x", &[1.0, 2.0, 3.0]);
        assert_eq!(s.mean, 2.0);
        let flat = summarize_scalar("x", &[4.0; 200]);
        assert!(flat.degenerate);
        assert_eq!(flat.ess, None);
    }

    #[test]
    fn white_noise_iact_near_one() {
        let mut rng = rng_for(11, 0, 0);
        let x: Vec<f64> = (0..10_000).map(|_| rng.sample(StandardNormal)).collect();
        let t = integrated_autocorrelation_time(&x).unwrap();
        assert!((t - 1.0).abs() < 0.2, "{t}");
        // AR(1) with phi = 0.5 has IACT (1 + phi) / (1 - phi) = 3
        let mut a = 0.0;
        let y: Vec<f64> = x
            .iter()
            .map(|e| {
                a = 0.5 * a + e;
                a
            })
            .collect();
        let t = integrated_autocorrelation_time(&y).unwrap();
        assert!((t - 3.0).abs() < 0.6, "{t}");
    }

    /// Likelihood-free target: the chain must reproduce the prior.
    struct PriorOnly(PriorSpec);

    impl PseudoMarginalTarget for PriorOnly {
        type Aux = ();
        type Estimate = ();
        fn dim(&self) -> usize {
            DIM
        }
        fn log_prior(&self, v: &[f64]) -> f64 {
            log_prior_unconstrained(v, &self.0)
        }
        fn fresh_aux(&self, _seed: u64) {}
        fn correlate_aux(&self, _aux: &(), _gamma: f64, _seed: u64) {}
        fn log_likelihood(&self, _v: &[f64], _aux: &()) -> Result<(f64, ())> {
            Ok((0.0, ()))
        }
    }

    fn ks_statistic(mut x: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
        x.sort_by(f64::total_cmp);
        let n = x.len() as f64;
        x.iter()
            .enumerate()
            .map(|(i, &v)| {
                let f = cdf(v);
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn prior_only_chain_recovers_prior_marginals() {
        let prior = PriorSpec::robustness();
        let init = transform_params(&SvParams::new(0.0, 0.9, 0.9, 0.5, 0.0).unwrap()).unwrap();
        let settings = SamplerSettings { iterations: 60_000, burn_in: 5_000, seed: 21, ..SamplerSettings::default() };
        let trace = run_pmmh(&PriorOnly(prior), &init, &settings, |_| Ok(())).unwrap();
        let thinned: Vec<SvParams> = trace.draws.iter().step_by(25).map(|v| inverse_transform(v).unwrap()).collect();
        let std_cdf = |x: f64| crate::sv_model::std_normal_cdf(x);
        let tn_cdf = |x: f64, m: f64, s: f64, lo: f64, hi: f64| {
            let a = std_cdf((lo - m) / s);
            (std_cdf((x - m) / s) - a) / (std_cdf((hi - m) / s) - a)
        };
        let phi: Vec<f64> = thinned.iter().map(|p| p.phi_h).collect();
        let d_phi = ks_statistic(phi, |x| tn_cdf(x, 0.9, 0.05, 0.0, 1.0));
        let rho: Vec<f64> = thinned.iter().map(|p| p.rho).collect();
        let d_rho = ks_statistic(rho, |x| (x + 1.0) / 2.0);
        let tau: Vec<f64> = thinned.iter().map(|p| p.tau).collect();
        let d_tau = ks_statistic(tau, |x| tn_cdf(x, 0.5, 0.3, 0.0, f64::INFINITY));
        // 2200 thinned draws: the 1% KS critical value is about 0.035
        assert!(d_phi < 0.05 && d_rho < 0.05 && d_tau < 0.05, "{d_phi} {d_rho} {d_tau}");
    }

    /// Exact likelihood with a correlated bivariate normal posterior.
    struct Bivariate;

    const BIV_MEAN: [f64; 2] = [1.0, -2.0];
    const BIV_COV: [[f64; 2]; 2] = [[1.0, 0.6], [0.6, 2.0]];

    impl PseudoMarginalTarget for Bivariate {
        type Aux = ();
        type Estimate = ();
        fn dim(&self) -> usize {
            2
        }
        fn log_prior(&self, _v: &[f64]) -> f64 {
            0.0
        }
        fn fresh_aux(&self, _seed: u64) {}
        fn correlate_aux(&self, _aux: &(), _gamma: f64, _seed: u64) {}
        fn log_likelihood(&self, v: &[f64], _aux: &()) -> Result<(f64, ())> {
            let det = BIV_COV[0][0] * BIV_COV[1][1] - BIV_COV[0][1] * BIV_COV[1][0];
            let (a, b) = (v[0] - BIV_MEAN[0], v[1] - BIV_MEAN[1]);
            let q = (BIV_COV[1][1] * a * a - 2.0 * BIV_COV[0][1] * a * b + BIV_COV[0][0] * b * b) / det;
            Ok((-0.5 * q, ()))
        }
    }

    #[test]
    fn exact_likelihood_chain_matches_analytic_posterior() {
        let settings = SamplerSettings { iterations: 55_000, burn_in: 5_000, seed: 17, ..SamplerSettings::default() };
        let trace = run_pmmh(&Bivariate, &[0.0, 0.0], &settings, |_| Ok(())).unwrap();
        assert_eq!(trace.draws.len(), 50_000);
        for k in 0..2 {
            let x: Vec<f64> = trace.draws.iter().step_by(20).map(|v| v[k]).collect();
            let sd = BIV_COV[k][k].sqrt();
            let d = ks_statistic(x.clone(), |v| crate::sv_model::std_normal_cdf((v - BIV_MEAN[k]) / sd));
            // 2500 thinned draws: the KS critical value at p = 0.001 is 1.95 / sqrt(n) = 0.039
            assert!(d < 1.95 / (x.len() as f64).sqrt(), "parameter {k}: D = {d}");
        }
    }

    #[test]
    fn standard_variant_equals_correlated_with_zero_gamma() {
        let p = SvParams::credit_posterior_mean();
        let sim = simulate(&p, 40, 2).unwrap();
        let base = ChainConfig { iterations: 300, burn_in: 100, particles: 20, seed: 6, ..ChainConfig::default() };
        let std = run_chain(&sim.y, &ChainConfig { variant: Variant::Standard, ..base.clone() }).unwrap();
        let cor = run_chain(&sim.y, &ChainConfig { variant: Variant::Correlated, gamma: 0.0, ..base }).unwrap();
        assert_eq!(std.accept_trace, cor.accept_trace);
        assert_eq!(std.params, cor.params);
    }
}
