//! Correlated bootstrap particle filter with sorted multinomial resampling,
//! and backward-simulation smoothing.
//!
//! All randomness used by the filter lives in a [`SeedBlock`] of standard
//! normals, so the likelihood estimate is a deterministic function of
//! `(y, theta, u)`. Before each resampling step the particles are sorted by
//! value; together with the correlated update of `u` this keeps
//! `log p(y | theta, u)` close to continuous in `theta`.

use std::io::{Read, Write};

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng::{rng_for, stream};
use crate::sv_model::std_normal_cdf;
use crate::sv_model::{log_observation_density, transition_moments, LatentPath, SvParams, LN_SQRT_2PI};
use crate::timeseries::TimeSeries;

/// Auxiliary normals `u = (u_h, u_a)` indexing one likelihood estimate.
///
/// `u_h` is `T x N` (state innovations), `u_a` is `(T-1) x N` (resampling,
/// mapped to uniforms through the standard normal CDF). Both row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedBlock {
    t_len: usize,
    n: usize,
    pub u_h: Vec<f64>,
    pub u_a: Vec<f64>,
}

impl SeedBlock {
    /// Build from explicit rows. Errors on shape mismatch or non-finite entries.
    pub fn from_parts(t_len: usize, n: usize, u_h: Vec<f64>, u_a: Vec<f64>) -> Result<Self> {
        if t_len == 0 || n == 0 {
            return Err(Error::Dimension("seed block needs T >= 1 and N >= 1".into()));
        }
        if u_h.len() != t_len * n || u_a.len() != (t_len - 1) * n {
            return Err(Error::Dimension(format!(
                "seed block for T = {t_len}, N = {n} has {} state and {} resampling entries",
                u_h.len(),
                u_a.len()
            )));
        }
        if u_h.iter().chain(&u_a).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("seed block has non-finite entries".into()));
        }
        Ok(SeedBlock { t_len, n, u_h, u_a })
    }

    pub fn t_len(&self) -> usize {
        self.t_len
    }

    pub fn particles(&self) -> usize {
        self.n
    }

    pub fn state_row(&self, t: usize) -> &[f64] {
        &self.u_h[t * self.n..(t + 1) * self.n]
    }

    /// Resampling normals used to move from time `t` to `t + 1`.
    pub fn resample_row(&self, t: usize) -> &[f64] {
        &self.u_a[t * self.n..(t + 1) * self.n]
    }
}

/// Deterministic seed block. Row `r` of `u_h` and of `u_a` each come from
/// their own ChaCha stream, so entry `(t, i)` depends only on `(seed, t, i, N)`.
pub fn make_seed_block(t_len: usize, n: usize, seed: u64) -> SeedBlock {
    assert!(t_len >= 1 && n >= 1, "seed block needs T >= 1 and N >= 1");
    let fill = |index: u64, out: &mut Vec<f64>| {
        let mut rng = rng_for(seed, stream::SEED_BLOCK, index);
        out.extend((0..n).map(|_| -> f64 { rng.sample(StandardNormal) }));
    };
    let mut u_h = Vec::with_capacity(t_len * n);
    let mut u_a = Vec::with_capacity(t_len.saturating_sub(1) * n);
    for r in 0..t_len {
        fill(2 * r as u64, &mut u_h);
    }
    for r in 0..t_len - 1 {
        fill(2 * r as u64 + 1, &mut u_a);
    }
    SeedBlock { t_len, n, u_h, u_a }
}

/// `u' = gamma u + sqrt(1 - gamma^2) u*`, with `u*` a fresh block drawn from `seed`.
pub fn correlate_seed(u: &SeedBlock, gamma: f64, seed: u64) -> Result<SeedBlock> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::InvalidArgument(format!("gamma = {gamma} outside [0, 1]")));
    }
    if gamma == 1.0 {
        return Ok(u.clone());
    }
    let fresh = make_seed_block(u.t_len, u.n, seed);
    Ok(mix_seed(u, &fresh, gamma))
}

/// Elementwise `gamma u + sqrt(1 - gamma^2) fresh`.
pub fn mix_seed(u: &SeedBlock, fresh: &SeedBlock, gamma: f64) -> SeedBlock {
    assert_eq!((u.t_len, u.n), (fresh.t_len, fresh.n), "seed block shapes differ");
    let c = (1.0 - gamma * gamma).sqrt();
    let mix = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| gamma * x + c * y).collect();
    SeedBlock { t_len: u.t_len, n: u.n, u_h: mix(&u.u_h, &fresh.u_h), u_a: mix(&u.u_a, &fresh.u_a) }
}

/// Multinomial resampling by inversion of the cumulative weights: ancestor
/// `i` is the smallest (0-based) `j` with `F(j) >= uniforms[i]`.
pub fn sorted_multinomial_resample(sorted_weights: &[f64], uniforms: &[f64]) -> Result<Vec<usize>> {
    if sorted_weights.is_empty() {
        return Err(Error::InvalidArgument("no weights".into()));
    }
    if sorted_weights.iter().any(|w| w.is_nan() || *w < 0.0) {
        return Err(Error::InvalidArgument("negative or NaN weight".into()));
    }
    let total: f64 = sorted_weights.iter().sum();
    if (total - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidArgument(format!("weights sum to {total}, not 1")));
    }
    let mut cum = Vec::new();
    let mut out = Vec::new();
    resample_into(sorted_weights, uniforms, &mut cum, &mut out);
    Ok(out)
}

fn resample_into(weights: &[f64], uniforms: &[f64], cum: &mut Vec<f64>, out: &mut Vec<usize>) {
    cum.clear();
    let mut acc = 0.0;
    cum.extend(weights.iter().map(|w| {
        acc += w;
        acc
    }));
    // rounding may leave the total marginally below 1; route such draws to the
    // last particle carrying mass
    let last = weights.iter().rposition(|&w| w > 0.0).unwrap_or(weights.len() - 1);
    out.clear();
    out.extend(uniforms.iter().map(|&u| {
        let j = cum.partition_point(|&f| f < u);
        j.min(last)
    }));
}

/// A scalar-state model the filter can run on.
///
/// State index `t` is 0-based. The filter uses the transition as proposal, so
/// the incremental weight is the observation density.
pub trait StateSpace {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Draw `h_0` from its initial law using a standard normal `u`.
    fn initial(&self, u: f64) -> f64;

    /// Draw `h_t` given `h_{t-1}` (`t >= 1`) using a standard normal `u`.
    fn propagate(&self, t: usize, h_prev: f64, u: f64) -> f64;

    fn log_observation(&self, t: usize, h: f64) -> f64;

    /// `log p(h_t | h_{t-1})`, `t >= 1`.
    fn log_transition(&self, t: usize, h: f64, h_prev: f64) -> f64;
}

/// The leverage model of [`crate::sv_model`] bound to an observation vector.
#[derive(Debug, Clone)]
pub struct SvLeverage<'a> {
    y: &'a [f64],
    p: SvParams,
    init_sd: f64,
    trans_sd: f64,
    log_trans_sd: f64,
}

impl<'a> SvLeverage<'a> {
    pub fn new(y: &'a [f64], p: SvParams) -> Result<Self> {
        p.validate()?;
        let (_, var) = transition_moments(0.0, 0.0, 0.0, &p);
        Ok(SvLeverage { y, p, init_sd: p.stationary_sd(), trans_sd: var.sqrt(), log_trans_sd: 0.5 * var.ln() })
    }

    fn lagged(&self, t: usize) -> (f64, f64) {
        let y1 = self.y[t - 1];
        let y2 = if t >= 2 { self.y[t - 2] } else { 0.0 };
        (y1, y2)
    }
}

impl StateSpace for SvLeverage<'_> {
    fn len(&self) -> usize {
        self.y.len()
    }

    #[inline]
    fn initial(&self, u: f64) -> f64 {
        self.init_sd * u + self.p.mu_h
    }

    #[inline]
    fn propagate(&self, t: usize, h_prev: f64, u: f64) -> f64 {
        let (y1, y2) = self.lagged(t);
        let (mean, _) = transition_moments(h_prev, y1, y2, &self.p);
        mean + self.trans_sd * u
    }

    #[inline]
    fn log_observation(&self, t: usize, h: f64) -> f64 {
        let prev = if t >= 1 { self.y[t - 1] } else { 0.0 };
        log_observation_density(self.y[t], prev, h, &self.p)
    }

    #[inline]
    fn log_transition(&self, t: usize, h: f64, h_prev: f64) -> f64 {
        let (y1, y2) = self.lagged(t);
        let (mean, _) = transition_moments(h_prev, y1, y2, &self.p);
        let z = (h - mean) / self.trans_sd;
        -LN_SQRT_2PI - self.log_trans_sd - 0.5 * z * z
    }
}

/// Filter output. Matrices are row-major with one row per time step;
/// ancestor indices are 0-based.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSystem {
    pub t_len: usize,
    pub n: usize,
    pub particles: Vec<f64>,
    /// Unnormalised log weights `log w_t^i`.
    pub log_weights: Vec<f64>,
    pub norm_weights: Vec<f64>,
    /// `ancestors[(t-1) * N + i]` is the index at `t - 1` of particle `i` at `t`.
    pub ancestors: Vec<usize>,
    /// `log((1/N) sum_i w_t^i)` per step.
    pub log_increments: Vec<f64>,
    pub loglik: f64,
}

/// Contents of a binary dump: `T`, `N`, particles, weights, ancestors and
/// the log-likelihood.
pub type BinaryDump = (usize, usize, Vec<f64>, Vec<f64>, Vec<usize>, f64);

impl ParticleSystem {
    pub fn particles_at(&self, t: usize) -> &[f64] {
        &self.particles[t * self.n..(t + 1) * self.n]
    }

    pub fn weights_at(&self, t: usize) -> &[f64] {
        &self.norm_weights[t * self.n..(t + 1) * self.n]
    }

    pub fn ancestors_at(&self, t: usize) -> &[usize] {
        &self.ancestors[(t - 1) * self.n..t * self.n]
    }

    /// Effective sample size `1 / sum_i wbar_t^i^2` per step.
    pub fn ess(&self) -> Vec<f64> {
        (0..self.t_len).map(|t| 1.0 / self.weights_at(t).iter().map(|w| w * w).sum::<f64>()).collect()
    }

    /// Debug dump: `T` and `N` as little-endian u64, then particles (T x N),
    /// normalised weights (T x N), ancestors ((T-1) x N, u64) and the
    /// log-likelihood, all little-endian, row-major.
    pub fn write_binary<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(&(self.t_len as u64).to_le_bytes())?;
        w.write_all(&(self.n as u64).to_le_bytes())?;
        for v in self.particles.iter().chain(&self.norm_weights) {
            w.write_all(&v.to_le_bytes())?;
        }
        for a in &self.ancestors {
            w.write_all(&(*a as u64).to_le_bytes())?;
        }
        w.write_all(&self.loglik.to_le_bytes())
    }

    /// Read back a [`write_binary`](Self::write_binary) dump. Unnormalised
    /// weights and per-step increments are not stored and come back empty.
    pub fn read_binary<R: Read>(mut r: R) -> std::io::Result<BinaryDump> {
        let mut b = [0u8; 8];
        let mut next = |r: &mut R| -> std::io::Result<[u8; 8]> {
            r.read_exact(&mut b)?;
            Ok(b)
        };
        let t_len = u64::from_le_bytes(next(&mut r)?) as usize;
        let n = u64::from_le_bytes(next(&mut r)?) as usize;
        let mut floats = |k: usize, r: &mut R| -> std::io::Result<Vec<f64>> {
            (0..k).map(|_| next(r).map(f64::from_le_bytes)).collect()
        };
        let particles = floats(t_len * n, &mut r)?;
        let weights = floats(t_len * n, &mut r)?;
        let ancestors = (0..(t_len - 1) * n)
            .map(|_| next(&mut r).map(|x| u64::from_le_bytes(x) as usize))
            .collect::<std::io::Result<Vec<_>>>()?;
        let loglik = f64::from_le_bytes(next(&mut r)?);
        Ok((t_len, n, particles, weights, ancestors, loglik))
    }
}

/// Filter switches. Sorting is on by default; turning it off is only useful
/// for demonstrating the discontinuity it removes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FilterOptions {
    pub sort_particles: bool,
}

impl Default for FilterOptions {
    fn default() -> Self {
        FilterOptions { sort_particles: true }
    }
}

/// Log of the smallest positive normal `f64`; a step whose largest log
/// weight falls below it has underflowed.
pub const MIN_LOG_WEIGHT: f64 = -708.396_418_532_264_1;

/// Correlated particle filter for the leverage model.
pub fn correlated_pf(y: &TimeSeries, p: &SvParams, u: &SeedBlock, n: usize) -> Result<ParticleSystem> {
    let model = SvLeverage::new(y.values(), *p)?;
    run_filter(&model, u, n, FilterOptions::default())
}

/// Run the filter on any [`StateSpace`].
pub fn run_filter<M: StateSpace>(model: &M, u: &SeedBlock, n: usize, opts: FilterOptions) -> Result<ParticleSystem> {
    let t_len = model.len();
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one particle".into()));
    }
    if t_len == 0 {
        return Err(Error::Series("empty observation vector".into()));
    }
    if u.t_len != t_len || u.n != n {
        return Err(Error::Dimension(format!(
            "seed block is {} x {} but filter needs {} x {}",
            u.t_len, u.n, t_len, n
        )));
    }

    let mut particles = vec![0.0; t_len * n];
    let mut log_weights = vec![0.0; t_len * n];
    let mut norm_weights = vec![0.0; t_len * n];
    let mut ancestors = vec![0usize; (t_len - 1) * n];
    let mut log_increments = Vec::with_capacity(t_len);

    let mut order: Vec<usize> = (0..n).collect();
    let mut sorted_w = vec![0.0; n];
    let mut uniforms = vec![0.0; n];
    let mut cum = Vec::with_capacity(n);
    let mut sorted_anc = Vec::with_capacity(n);
    let ln_n = (n as f64).ln();

    for t in 0..t_len {
        let row = t * n..(t + 1) * n;
        if t == 0 {
            for (h, &uh) in particles[row.clone()].iter_mut().zip(u.state_row(0)) {
                *h = model.initial(uh);
            }
        } else {
            let prev = (t - 1) * n..t * n;
            let prev_h = &particles[prev.clone()];
            let prev_w = &norm_weights[prev];
            for (i, o) in order.iter_mut().enumerate() {
                *o = i;
            }
            if opts.sort_particles {
                // stable: ties keep original index order
                order.sort_by(|&a, &b| prev_h[a].total_cmp(&prev_h[b]));
            }
            for (sw, &o) in sorted_w.iter_mut().zip(&order) {
                *sw = prev_w[o];
            }
            for (uu, &z) in uniforms.iter_mut().zip(u.resample_row(t - 1)) {
                *uu = std_normal_cdf(z).max(f64::MIN_POSITIVE);
            }
            resample_into(&sorted_w, &uniforms, &mut cum, &mut sorted_anc);
            let anc = &mut ancestors[(t - 1) * n..t * n];
            for (a, &sa) in anc.iter_mut().zip(&sorted_anc) {
                *a = order[sa];
            }
            let (done, rest) = particles.split_at_mut(t * n);
            let prev_h = &done[(t - 1) * n..];
            for ((h, &a), &uh) in rest[..n].iter_mut().zip(anc.iter()).zip(u.state_row(t)) {
                *h = model.propagate(t, prev_h[a], uh);
            }
        }

        let lw = &mut log_weights[row.clone()];
        for (l, &h) in lw.iter_mut().zip(&particles[row.clone()]) {
            *l = model.log_observation(t, h);
        }
        let max = lw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        // every weight would be zero in linear arithmetic
        if !(max.is_finite() && max > MIN_LOG_WEIGHT) {
            return Err(Error::Degenerate { t: t + 1 });
        }
        let nw = &mut norm_weights[row];
        let mut sum = 0.0;
        for (w, &l) in nw.iter_mut().zip(lw.iter()) {
            *w = (l - max).exp();
            sum += *w;
        }
        for w in nw.iter_mut() {
            *w /= sum;
        }
        log_increments.push(max + sum.ln() - ln_n);
    }
    let loglik = log_increments.iter().sum();
    Ok(ParticleSystem { t_len, n, particles, log_weights, norm_weights, ancestors, log_increments, loglik })
}

/// Draw one trajectory from the particle approximation of the smoothing
/// distribution (backward simulation). Uses its own generator seeded by `seed`.
pub fn backward_simulate(ps: &ParticleSystem, y: &TimeSeries, p: &SvParams, seed: u64) -> Result<LatentPath> {
    let model = SvLeverage::new(y.values(), *p)?;
    backward_simulate_with(ps, &model, seed)
}

/// Backward simulation for any [`StateSpace`].
pub fn backward_simulate_with<M: StateSpace>(ps: &ParticleSystem, model: &M, seed: u64) -> Result<LatentPath> {
    if model.len() != ps.t_len {
        return Err(Error::Dimension(format!("particle system has {} steps, model {}", ps.t_len, model.len())));
    }
    let mut rng = rng_for(seed, stream::BACKWARD, 0);
    let t_len = ps.t_len;
    let mut h = vec![0.0; t_len];
    let mut logw = vec![0.0; ps.n];

    let last = sample_index(ps.weights_at(t_len - 1), rng.random::<f64>()).ok_or(Error::Degenerate { t: t_len })?;
    h[t_len - 1] = ps.particles_at(t_len - 1)[last];
    for t in (0..t_len - 1).rev() {
        let next = h[t + 1];
        for ((l, &w), &hp) in logw.iter_mut().zip(ps.weights_at(t)).zip(ps.particles_at(t)) {
            *l = w.ln() + model.log_transition(t + 1, next, hp);
        }
        let max = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::Degenerate { t: t + 1 });
        }
        for l in logw.iter_mut() {
            *l = (*l - max).exp();
        }
        let total: f64 = logw.iter().sum();
        let idx = sample_index_unnormalised(&logw, total * rng.random::<f64>());
        h[t] = ps.particles_at(t)[idx];
    }
    Ok(LatentPath { h })
}

fn sample_index(weights: &[f64], u: f64) -> Option<usize> {
    let total: f64 = weights.iter().sum();
    if total.is_nan() || total <= 0.0 {
        return None;
    }
    Some(sample_index_unnormalised(weights, u * total))
}

fn sample_index_unnormalised(weights: &[f64], target: f64) -> usize {
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            last_positive = i;
        }
        acc += w;
        if acc > target && w > 0.0 {
            return i;
        }
    }
    last_positive
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sv_model::simulate;
    use crate::timeseries::Period;

    fn table1() -> SvParams {
        SvParams::credit_posterior_mean()
    }

    #[test]
    fn seed_block_determinism_and_shape() {
        let a = make_seed_block(5, 7, 1);
        let b = make_seed_block(5, 7, 1);
        assert_eq!(a, b);
        assert_ne!(a, make_seed_block(5, 7, 2));
        let one = make_seed_block(1, 4, 3);
        assert!(one.u_a.is_empty());
        assert_eq!(one.u_h.len(), 4);
        // rows are stable when T grows
        let long = make_seed_block(9, 7, 1);
        assert_eq!(&long.u_h[..35], &a.u_h[..]);
    }

    #[test]
    fn correlate_seed_cases() {
        let u = make_seed_block(3, 4, 10);
        assert_eq!(correlate_seed(&u, 1.0, 99).unwrap(), u);
        assert_eq!(correlate_seed(&u, 0.0, 99).unwrap(), make_seed_block(3, 4, 99));
        assert!(correlate_seed(&u, 1.5, 1).is_err());
        assert!(correlate_seed(&u, -0.1, 1).is_err());

        let base = SeedBlock::from_parts(1, 2, vec![1.0, 1.0], vec![]).unwrap();
        let fresh = SeedBlock::from_parts(1, 2, vec![0.5, 0.5], vec![]).unwrap();
        let mixed = mix_seed(&base, &fresh, 0.6);
        assert!((mixed.u_h[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn resample_examples() {
        assert_eq!(sorted_multinomial_resample(&[0.2, 0.3, 0.5], &[0.5]).unwrap(), vec![1]);
        assert_eq!(sorted_multinomial_resample(&[0.2, 0.3, 0.5], &[0.2, 0.21, 0.99]).unwrap(), vec![0, 1, 2]);
        assert_eq!(sorted_multinomial_resample(&[1.0, 0.0, 0.0], &[0.01, 0.5, 0.999999]).unwrap(), vec![0, 0, 0]);
        assert!(sorted_multinomial_resample(&[0.5, 0.6], &[0.1]).is_err());
        assert!(sorted_multinomial_resample(&[1.5, -0.5], &[0.1]).is_err());
    }

    fn two_particle_trace() -> (SvParams, TimeSeries, SeedBlock) {
        let p = SvParams::new(-1.0, 0.5, 0.8, 0.4, 0.3).unwrap();
        let y = TimeSeries::from_start(Period::new(2000, 1).unwrap(), vec![0.3, -0.2], "y").unwrap();
        let u = SeedBlock::from_parts(2, 2, vec![0.5, -1.0, 0.2, -0.7], vec![0.0, 1.0]).unwrap();
        (p, y, u)
    }

    #[test]
    fn two_particle_pencil_trace() {
        // Worked by hand (see the values below), independently of the filter code.
        // h1 = -1 + sd * u, sd = 0.4 / sqrt(1 - 0.64) = 2/3
        let (p, y, u) = two_particle_trace();
        let h1 = [-1.0 + (2.0 / 3.0) * 0.5, -1.0 - (2.0 / 3.0)];
        let lobs = |yv: f64, yp: f64, h: f64| {
            -0.5 * (2.0 * std::f64::consts::PI).ln() - h / 2.0 - 0.5 * (yv - 0.5 * yp).powi(2) / h.exp()
        };
        let w1 = [lobs(0.3, 0.0, h1[0]).exp(), lobs(0.3, 0.0, h1[1]).exp()];
        let l1 = ((w1[0] + w1[1]) / 2.0).ln();
        let wb = [w1[0] / (w1[0] + w1[1]), w1[1] / (w1[0] + w1[1])];
        // sorted order: h1[1] < h1[0] -> sorted weights (wb[1], wb[0])
        // uniforms Phi(0) = 0.5, Phi(1) = 0.841344746068543
        let pick = |u: f64| if wb[1] >= u { 1 } else { 0 };
        let a = [pick(0.5), pick(0.841_344_746_068_542_9)];
        let h2: Vec<f64> = (0..2)
            .map(|i| {
                let hp = h1[a[i]];
                let eps1 = (-hp / 2.0).exp() * 0.3;
                -1.0 + 0.8 * (hp + 1.0) + 0.3 * 0.4 * eps1 + (0.16f64 * (1.0 - 0.09)).sqrt() * [0.2, -0.7][i]
            })
            .collect();
        let w2: Vec<f64> = h2.iter().map(|&h| lobs(-0.2, 0.3, h).exp()).collect();
        let l2 = ((w2[0] + w2[1]) / 2.0).ln();

        let ps = correlated_pf(&y, &p, &u, 2).unwrap();
        assert_eq!(ps.ancestors, a.to_vec());
        assert!((ps.loglik - (l1 + l2)).abs() < 1e-12, "{} vs {}", ps.loglik, l1 + l2);
    }

    #[test]
    fn weights_normalised_and_loglik_consistent() {
        let p = table1();
        let sim = simulate(&p, 80, 4).unwrap();
        let u = make_seed_block(80, 64, 5);
        let ps = correlated_pf(&sim.y, &p, &u, 64).unwrap();
        let mut total = 0.0;
        for t in 0..ps.t_len {
            let s: f64 = ps.weights_at(t).iter().sum();
            assert!((s - 1.0).abs() < 1e-10);
            assert!(ps.weights_at(t).iter().all(|&w| w >= 0.0));
            let lw = &ps.log_weights[t * 64..(t + 1) * 64];
            let m = lw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            total += m + (lw.iter().map(|l| (l - m).exp()).sum::<f64>() / 64.0).ln();
        }
        assert!((total - ps.loglik).abs() < 1e-9);
        assert!(ps.ancestors.iter().all(|&a| a < 64));
        let again = correlated_pf(&sim.y, &p, &u, 64).unwrap();
        assert_eq!(ps, again);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let sim = simulate(&table1(), 20, 4).unwrap();
        let u = make_seed_block(19, 10, 5);
        assert!(matches!(correlated_pf(&sim.y, &table1(), &u, 10), Err(Error::Dimension(_))));
        let u = make_seed_block(20, 10, 5);
        assert!(matches!(correlated_pf(&sim.y, &table1(), &u, 11), Err(Error::Dimension(_))));
    }

    #[test]
    fn underflow_reports_time_step() {
        // an absurd observation under tiny volatility underflows every weight
        let p = SvParams::new(-60.0, 0.0, 0.5, 1e-6, 0.0).unwrap();
        let y = TimeSeries::from_start(Period::new(2000, 1).unwrap(), vec![0.0, 0.0, 1e6], "y").unwrap();
        let u = make_seed_block(3, 8, 1);
        match correlated_pf(&y, &p, &u, 8) {
            Err(Error::Degenerate { t }) => assert_eq!(t, 3),
            other => panic!("expected underflow, got {other:?}"),
        }
    }

    #[test]
    fn binary_dump_roundtrip() {
        let sim = simulate(&table1(), 6, 4).unwrap();
        let u = make_seed_block(6, 3, 5);
        let ps = correlated_pf(&sim.y, &table1(), &u, 3).unwrap();
        let mut buf = Vec::new();
        ps.write_binary(&mut buf).unwrap();
        assert_eq!(buf.len(), 16 + 8 * (6 * 3 * 2 + 5 * 3 + 1));
        let (t, n, parts, w, a, ll) = ParticleSystem::read_binary(&buf[..]).unwrap();
        assert_eq!((t, n), (6, 3));
        assert_eq!(parts, ps.particles);
        assert_eq!(w, ps.norm_weights);
        assert_eq!(a, ps.ancestors);
        assert_eq!(ll, ps.loglik);
    }

    #[test]
    fn backward_single_particle_returns_the_trajectory() {
        let p = table1();
        let sim = simulate(&p, 30, 4).unwrap();
        let u = make_seed_block(30, 1, 5);
        let ps = correlated_pf(&sim.y, &p, &u, 1).unwrap();
        let path_a = backward_simulate(&ps, &sim.y, &p, 1).unwrap();
        let path_b = backward_simulate(&ps, &sim.y, &p, 2).unwrap();
        assert_eq!(path_a, path_b);
        let expected: Vec<f64> = (0..30).map(|t| ps.particles_at(t)[0]).collect();
        assert_eq!(path_a.h, expected);
    }

    #[test]
    fn backward_degenerate_volatility_is_flat() {
        let p = SvParams { tau: 1e-8, ..table1() };
        let sim = simulate(&p, 60, 4).unwrap();
        let u = make_seed_block(60, 50, 5);
        let ps = correlated_pf(&sim.y, &p, &u, 50).unwrap();
        let path = backward_simulate(&ps, &sim.y, &p, 3).unwrap();
        assert!(path.h.iter().all(|h| (h - p.mu_h).abs() < 1e-6));
    }

    /// Linear-Gaussian surrogate: h_t = phi h_{t-1} + q u, y_t = h_t + r v.
    struct LinearGaussian {
        y: Vec<f64>,
        phi: f64,
        q: f64,
        r: f64,
    }

    impl StateSpace for LinearGaussian {
        fn len(&self) -> usize {
            self.y.len()
        }
        fn initial(&self, u: f64) -> f64 {
            self.q / (1.0 - self.phi * self.phi).sqrt() * u
        }
        fn propagate(&self, _t: usize, h_prev: f64, u: f64) -> f64 {
            self.phi * h_prev + self.q * u
        }
        fn log_observation(&self, t: usize, h: f64) -> f64 {
            let z = (self.y[t] - h) / self.r;
            -LN_SQRT_2PI - self.r.ln() - 0.5 * z * z
        }
        fn log_transition(&self, _t: usize, h: f64, h_prev: f64) -> f64 {
            let z = (h - self.phi * h_prev) / self.q;
            -LN_SQRT_2PI - self.q.ln() - 0.5 * z * z
        }
    }

    /// Kalman filter plus RTS smoother; returns smoothed means and variances.
    fn kalman_smoother(m: &LinearGaussian) -> (Vec<f64>, Vec<f64>) {
        let t_len = m.y.len();
        let (mut mf, mut pf, mut mp, mut pp) = (vec![0.0; t_len], vec![0.0; t_len], vec![0.0; t_len], vec![0.0; t_len]);
        for t in 0..t_len {
            if t == 0 {
                mp[0] = 0.0;
                pp[0] = m.q * m.q / (1.0 - m.phi * m.phi);
            } else {
                mp[t] = m.phi * mf[t - 1];
                pp[t] = m.phi * m.phi * pf[t - 1] + m.q * m.q;
            }
            let k = pp[t] / (pp[t] + m.r * m.r);
            mf[t] = mp[t] + k * (m.y[t] - mp[t]);
            pf[t] = (1.0 - k) * pp[t];
        }
        let (mut ms, mut vs) = (mf.clone(), pf.clone());
        for t in (0..t_len - 1).rev() {
            let j = pf[t] * m.phi / pp[t + 1];
            ms[t] = mf[t] + j * (ms[t + 1] - mp[t + 1]);
            vs[t] = pf[t] + j * j * (vs[t + 1] - pp[t + 1]);
        }
        (ms, vs)
    }

    #[test]
    fn backward_simulation_matches_kalman_smoother() {
        let mut rng = rng_for(77, 0, 0);
        let (phi, q, r) = (0.9, 0.5, 0.7);
        let mut h = 0.0;
        let y: Vec<f64> = (0..30)
            .map(|_| {
                h = phi * h + q * rng.sample::<f64, _>(StandardNormal);
                h + r * rng.sample::<f64, _>(StandardNormal)
            })
            .collect();
        let model = LinearGaussian { y, phi, q, r };
        let (ms, vs) = kalman_smoother(&model);

        let draws = 200;
        let mut sum = vec![0.0; 30];
        for d in 0..draws {
            let u = make_seed_block(30, 500, 1000 + d);
            let ps = run_filter(&model, &u, 500, FilterOptions::default()).unwrap();
            let path = backward_simulate_with(&ps, &model, d).unwrap();
            for (s, v) in sum.iter_mut().zip(&path.h) {
                *s += v;
            }
        }
        let mut outside = 0;
        for t in 0..30 {
            let mean = sum[t] / draws as f64;
            let se = (vs[t] / draws as f64).sqrt();
            if (mean - ms[t]).abs() > 3.0 * se {
                outside += 1;
            }
            assert!((mean - ms[t]).abs() < 4.5 * se, "t = {t}: {mean} vs {}", ms[t]);
        }
        assert!(outside <= 1, "{outside} of 30 smoothed means outside 3 MC standard errors");
    }
}
