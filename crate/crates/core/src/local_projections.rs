//! Local-projection impulse responses, linear and state dependent, with
//! Newey–West (Bartlett) standard errors.
//!
//! For every horizon `h` the outcome `x_{t+h}` is regressed on a constant,
//! lags `1..=lag_order` of every control (and optionally of the outcome) and
//! the standardized shock at `t`. In state-dependent mode every regressor is
//! interacted with `I_{t-1}` and `1 - I_{t-1}`, so both regimes get their own
//! coefficients while sharing one HAC covariance. Observations missing because
//! of leads and lags are dropped listwise per horizon.

use std::io::Write;

use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::timeseries::{fmt_f64, mean, Period, TimeSeries};

/// Which extracted shock feeds the projection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ShockKind {
    /// The leverage-free ("pure") volatility innovation.
    #[default]
    EtaStar,
    /// The total volatility innovation.
    Eta,
}

impl ShockKind {
    /// Column name in the shock CSV.
    pub fn column(self) -> &'static str {
        match self {
            ShockKind::EtaStar => "eta_star",
            ShockKind::Eta => "eta",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RegimeMode {
    #[default]
    Linear,
    StateDependent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Linear,
    Recession,
    Expansion,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Linear => "linear",
            Regime::Recession => "recession",
            Regime::Expansion => "expansion",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSpec {
    /// Largest horizon `H`; horizons run over `0..=H`.
    pub horizons: usize,
    pub lag_order: usize,
    pub controls: Vec<TimeSeries>,
    /// Add lags of the outcome to the controls.
    pub include_outcome_lags: bool,
    pub shock_kind: ShockKind,
    pub mode: RegimeMode,
    /// 0/1 state series; the regression at `t` uses its value at `t - 1`.
    pub regime_indicator: Option<TimeSeries>,
    pub band_level: f64,
}

impl Default for LpSpec {
    fn default() -> Self {
        LpSpec {
            horizons: 12,
            lag_order: 2,
            controls: Vec::new(),
            include_outcome_lags: true,
            shock_kind: ShockKind::EtaStar,
            mode: RegimeMode::Linear,
            regime_indicator: None,
            band_level: 0.68,
        }
    }
}

impl LpSpec {
    pub fn validate(&self) -> Result<()> {
        if self.lag_order < 1 {
            return Err(Error::InvalidArgument("lag order must be at least 1".into()));
        }
        if !(self.band_level > 0.0 && self.band_level < 1.0) {
            return Err(Error::InvalidArgument(format!("band level {} outside (0, 1)", self.band_level)));
        }
        if self.mode == RegimeMode::StateDependent {
            let ind = self
                .regime_indicator
                .as_ref()
                .ok_or_else(|| Error::InvalidArgument("state-dependent mode needs a regime indicator".into()))?;
            if let Some(v) = ind.values().iter().find(|v| **v != 0.0 && **v != 1.0) {
                return Err(Error::Series(format!("regime indicator must be 0/1, found {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpRow {
    pub h: usize,
    pub regime: Regime,
    pub beta: f64,
    pub se: f64,
    pub lo: f64,
    pub hi: f64,
    pub n_obs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpResult {
    pub rows: Vec<LpRow>,
    /// Horizons that could not be estimated, regimes without observations, …
    pub warnings: Vec<String>,
    /// Largest horizon actually estimated.
    pub max_horizon: Option<usize>,
}

impl LpResult {
    pub fn coefficient(&self, h: usize, regime: Regime) -> Option<&LpRow> {
        self.rows.iter().find(|r| r.h == h && r.regime == regime)
    }

    /// CSV: `h, regime, beta, se, lo, hi, n_obs`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let io = |e: csv::Error| Error::Series(e.to_string());
        out.write_record(["h", "regime", "beta", "se", "lo", "hi", "n_obs"]).map_err(io)?;
        for r in &self.rows {
            out.write_record([
                r.h.to_string(),
                r.regime.as_str().to_string(),
                fmt_f64(r.beta),
                fmt_f64(r.se),
                fmt_f64(r.lo),
                fmt_f64(r.hi),
                r.n_obs.to_string(),
            ])
            .map_err(io)?;
        }
        out.flush().map_err(|e| Error::Series(e.to_string()))?;
        Ok(())
    }
}

/// Subtract the mean and divide by the population standard deviation.
pub fn standardize_shock(s: &TimeSeries) -> Result<TimeSeries> {
    let v = s.values();
    if v.is_empty() {
        return Err(Error::InsufficientData("empty shock series".into()));
    }
    let m = mean(v);
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64;
    if var.is_nan() || var <= 0.0 {
        return Err(Error::Series(format!("shock series '{}' is constant", s.label())));
    }
    let sd = var.sqrt();
    s.map(|x| (x - m) / sd)
}

/// OLS fit with named columns.
#[derive(Debug, Clone)]
pub struct Ols {
    pub beta: DVector<f64>,
    pub resid: DVector<f64>,
    /// `(X'X)^{-1}`
    pub xtx_inv: DMatrix<f64>,
}

/// Report columns that are (numerically) linear combinations of earlier ones.
pub fn check_rank(x: &DMatrix<f64>, names: &[String]) -> Result<()> {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut bad = Vec::new();
    for j in 0..x.ncols() {
        let col = x.column(j).into_owned();
        let norm = col.norm();
        let mut r = col.clone();
        // two Gram–Schmidt passes for stability
        for _ in 0..2 {
            for q in &basis {
                let c = q.dot(&r);
                r -= q * c;
            }
        }
        let rn = r.norm();
        if norm == 0.0 || rn <= 1e-9 * norm {
            bad.push(names.get(j).cloned().unwrap_or_else(|| format!("col{j}")));
        } else {
            basis.push(r / rn);
        }
    }
    if bad.is_empty() {
        Ok(())
    } else {
        Err(Error::RankDeficient { columns: bad })
    }
}

pub fn ols(x: &DMatrix<f64>, y: &DVector<f64>, names: &[String]) -> Result<Ols> {
    if x.nrows() != y.len() {
        return Err(Error::Dimension(format!("{} design rows, {} outcomes", x.nrows(), y.len())));
    }
    if x.nrows() <= x.ncols() {
        return Err(Error::InsufficientData(format!("{} observations for {} regressors", x.nrows(), x.ncols())));
    }
    check_rank(x, names)?;
    let xtx = x.transpose() * x;
    let chol = xtx.cholesky().ok_or_else(|| Error::RankDeficient { columns: names.to_vec() })?;
    let xtx_inv = chol.inverse();
    let beta = chol.solve(&(x.transpose() * y));
    let resid = y - x * &beta;
    Ok(Ols { beta, resid, xtx_inv })
}

/// Newey–West HAC covariance `(X'X)^{-1} S (X'X)^{-1}` with Bartlett weights
/// `1 - l / (lag + 1)` and no small-sample correction. Rows of `x` must be
/// consecutive in time.
pub fn newey_west(x: &DMatrix<f64>, resid: &DVector<f64>, lag: usize) -> Result<DMatrix<f64>> {
    let names: Vec<String> = (0..x.ncols()).map(|j| format!("col{j}")).collect();
    check_rank(x, &names)?;
    let (n, k) = x.shape();
    if resid.len() != n {
        return Err(Error::Dimension(format!("{n} rows but {} residuals", resid.len())));
    }
    let xtx_inv = (x.transpose() * x).try_inverse().ok_or_else(|| Error::RankDeficient { columns: names.clone() })?;
    // score contributions g_t = x_t u_t, one row per observation
    let mut g = x.clone();
    for (t, mut row) in g.row_iter_mut().enumerate() {
        row *= resid[t];
    }
    let mut s = g.transpose() * &g;
    for l in 1..=lag.min(n.saturating_sub(1)) {
        let w = 1.0 - l as f64 / (lag as f64 + 1.0);
        let lead = g.rows(l, n - l);
        let lagged = g.rows(0, n - l);
        let gamma = lead.transpose() * lagged;
        s += (&gamma + gamma.transpose()) * w;
    }
    debug_assert_eq!(s.nrows(), k);
    Ok(&xtx_inv * s * &xtx_inv)
}

/// Heteroskedasticity-robust (HC0) covariance, computed directly.
pub fn white_covariance(x: &DMatrix<f64>, resid: &DVector<f64>) -> Result<DMatrix<f64>> {
    let (n, k) = x.shape();
    if resid.len() != n {
        return Err(Error::Dimension(format!("{n} rows but {} residuals", resid.len())));
    }
    let xtx_inv = (x.transpose() * x)
        .try_inverse()
        .ok_or_else(|| Error::RankDeficient { columns: (0..k).map(|j| format!("col{j}")).collect() })?;
    let mut meat = DMatrix::<f64>::zeros(k, k);
    for t in 0..n {
        let u2 = resid[t] * resid[t];
        for i in 0..k {
            for j in 0..k {
                meat[(i, j)] += u2 * x[(t, i)] * x[(t, j)];
            }
        }
    }
    Ok(&xtx_inv * meat * &xtx_inv)
}

/// Regressors available at period `t` (before regime interaction).
struct Layout {
    names: Vec<String>,
    shock_col: usize,
}

fn base_row(t: Period, x: &TimeSeries, shock: &TimeSeries, spec: &LpSpec, row: &mut Vec<f64>) -> Option<()> {
    row.clear();
    row.push(1.0);
    row.push(shock.at(t)?);
    for z in &spec.controls {
        for l in 1..=spec.lag_order {
            row.push(z.at(t.offset(-(l as i64)))?);
        }
    }
    if spec.include_outcome_lags {
        for l in 1..=spec.lag_order {
            row.push(x.at(t.offset(-(l as i64)))?);
        }
    }
    Some(())
}

fn base_layout(x: &TimeSeries, spec: &LpSpec) -> Layout {
    let mut names = vec!["const".to_string(), "shock".to_string()];
    for z in &spec.controls {
        for l in 1..=spec.lag_order {
            names.push(format!("{}_lag{l}", z.label()));
        }
    }
    if spec.include_outcome_lags {
        for l in 1..=spec.lag_order {
            names.push(format!("{}_lag{l}", x.label()));
        }
    }
    Layout { names, shock_col: 1 }
}

/// Estimate the impulse responses of `x` to the (standardized) `shock`.
pub fn run_lp(x: &TimeSeries, spec: &LpSpec, shock: &TimeSeries) -> Result<LpResult> {
    spec.validate()?;
    let shock = standardize_shock(shock)?;
    let z = Normal::standard().inverse_cdf(0.5 + spec.band_level / 2.0);
    let layout = base_layout(x, spec);
    let k = layout.names.len();

    let mut result = LpResult { rows: Vec::new(), warnings: Vec::new(), max_horizon: None };
    let mut row = Vec::with_capacity(k);

    for h in 0..=spec.horizons {
        // listwise sample for this horizon, in time order
        let mut rows: Vec<(Vec<f64>, f64, Option<f64>)> = Vec::new();
        for &t in shock.periods() {
            let Some(y) = x.at(t.offset(h as i64)) else { continue };
            if base_row(t, x, &shock, spec, &mut row).is_none() {
                continue;
            }
            let state = match spec.mode {
                RegimeMode::Linear => None,
                RegimeMode::StateDependent => match spec.regime_indicator.as_ref().and_then(|i| i.at(t.offset(-1))) {
                    Some(s) => Some(s),
                    None => continue,
                },
            };
            rows.push((row.clone(), y, state));
        }

        let fitted = match spec.mode {
            RegimeMode::Linear => fit_linear(&rows, &layout, h, z),
            RegimeMode::StateDependent => fit_state_dependent(&rows, &layout, h, z, &mut result.warnings),
        };
        match fitted {
            Ok(mut r) => {
                result.rows.append(&mut r);
                result.max_horizon = Some(h);
            }
            Err(Error::InsufficientData(msg)) => {
                if h == 0 {
                    return Err(Error::InsufficientData(msg));
                }
                let w = format!("truncated at horizon {}: {msg}", h - 1);
                warn!("{w}");
                result.warnings.push(w);
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(result)
}

fn band(h: usize, regime: Regime, beta: f64, var: f64, z: f64, n_obs: usize) -> LpRow {
    let se = var.max(0.0).sqrt();
    LpRow { h, regime, beta, se, lo: beta - z * se, hi: beta + z * se, n_obs }
}

fn fit_linear(rows: &[(Vec<f64>, f64, Option<f64>)], layout: &Layout, h: usize, z: f64) -> Result<Vec<LpRow>> {
    let k = layout.names.len();
    let n = rows.len();
    if n <= k {
        return Err(Error::InsufficientData(format!("{n} observations for {k} regressors at horizon {h}")));
    }
    let xm = DMatrix::from_fn(n, k, |i, j| rows[i].0[j]);
    let y = DVector::from_fn(n, |i, _| rows[i].1);
    let fit = ols(&xm, &y, &layout.names)?;
    let cov = newey_west(&xm, &fit.resid, h)?;
    let j = layout.shock_col;
    Ok(vec![band(h, Regime::Linear, fit.beta[j], cov[(j, j)], z, n)])
}

fn fit_state_dependent(
    rows: &[(Vec<f64>, f64, Option<f64>)],
    layout: &Layout,
    h: usize,
    z: f64,
    warnings: &mut Vec<String>,
) -> Result<Vec<LpRow>> {
    let k = layout.names.len();
    let n = rows.len();
    let n_rec = rows.iter().filter(|r| r.2 == Some(1.0)).count();
    let n_exp = n - n_rec;
    // a regime without observations contributes no block
    let mut blocks = Vec::new();
    for (regime, count, flag) in [(Regime::Recession, n_rec, 1.0), (Regime::Expansion, n_exp, 0.0)] {
        if count == 0 {
            let w = format!("no {} observations at horizon {h}; regime dropped", regime.as_str());
            if !warnings.contains(&w) {
                warnings.push(w);
            }
        } else {
            blocks.push((regime, count, flag));
        }
    }
    let cols = k * blocks.len();
    if n <= cols || blocks.is_empty() {
        return Err(Error::InsufficientData(format!("{n} observations for {cols} regressors at horizon {h}")));
    }
    let mut names = Vec::with_capacity(cols);
    for (regime, _, _) in &blocks {
        names.extend(layout.names.iter().map(|c| format!("{}:{c}", regime.as_str())));
    }
    let xm = DMatrix::from_fn(n, cols, |i, j| {
        let (b, c) = (j / k, j % k);
        if rows[i].2 == Some(blocks[b].2) {
            rows[i].0[c]
        } else {
            0.0
        }
    });
    let y = DVector::from_fn(n, |i, _| rows[i].1);
    let fit = ols(&xm, &y, &names)?;
    let cov = newey_west(&xm, &fit.resid, h)?;
    Ok(blocks
        .iter()
        .enumerate()
        .map(|(b, (regime, count, _))| {
            let j = b * k + layout.shock_col;
            band(h, *regime, fit.beta[j], cov[(j, j)], z, *count)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_for;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn series(values: Vec<f64>, label: &str) -> TimeSeries {
        TimeSeries::from_start(Period::new(1960, 1).unwrap(), values, label).unwrap()
    }

    fn normals(seed: u64, n: usize) -> Vec<f64> {
        let mut rng = rng_for(seed, 99, 0);
        (0..n).map(|_| rng.sample(StandardNormal)).collect()
    }

    #[test]
    fn standardize_examples() {
        let s = standardize_shock(&series(vec![-1.0, 1.0], "s")).unwrap();
        assert_eq!(s.values(), &[-1.0, 1.0]);
        let s = standardize_shock(&series(vec![0.0, 2.0], "s")).unwrap();
        assert_eq!(s.values(), &[-1.0, 1.0]);
        assert!(standardize_shock(&series(vec![3.0; 5], "s")).is_err());
        let raw: Vec<f64> = normals(1, 10_000).iter().map(|e| 3.0 + 5.0 * e).collect();
        let s = standardize_shock(&series(raw, "s")).unwrap();
        let m = mean(s.values());
        let var = s.values().iter().map(|v| v * v).sum::<f64>() / 10_000.0;
        assert!(m.abs() < 0.05 && (var - 1.0).abs() < 0.03);
    }

    fn random_design(seed: u64, n: usize, k: usize) -> (DMatrix<f64>, DVector<f64>) {
        let e = normals(seed, n * (k + 1));
        let x = DMatrix::from_fn(n, k, |i, j| if j == 0 { 1.0 } else { e[i * k + j] });
        let u = DVector::from_fn(n, |i, _| e[n * k + i] * (1.0 + x[(i, 1.min(k - 1))].abs()));
        (x, u)
    }

    proptest! {
        #[test]
        fn lag_zero_is_white(seed in 0u64..1000, n in 20usize..200, k in 2usize..6) {
            let (x, u) = random_design(seed, n, k);
            let nw = newey_west(&x, &u, 0).unwrap();
            let w = white_covariance(&x, &u).unwrap();
            let scale = w.abs().max();
            prop_assert!((nw - w).abs().max() <= 1e-12 * scale.max(1.0));
        }
    }

    #[test]
    fn homoskedastic_hac_matches_classical() {
        let n = 20_000;
        let e = normals(4, 3 * n);
        let x = DMatrix::from_fn(n, 2, |i, j| if j == 0 { 1.0 } else { e[i] });
        let u = DVector::from_fn(n, |i, _| 2.0 * e[n + i]);
        let nw = newey_west(&x, &u, 4).unwrap();
        let classical = (x.transpose() * &x).try_inverse().unwrap() * 4.0;
        for j in 0..2 {
            let r = nw[(j, j)] / classical[(j, j)];
            assert!((r - 1.0).abs() < 0.1, "{r}");
        }
    }

    #[test]
    fn ma1_residuals_inflate_intercept_variance() {
        let n = 10_000;
        let e = normals(5, n + 1);
        let x = DMatrix::from_fn(n, 1, |_, _| 1.0);
        let u = DVector::from_fn(n, |i, _| e[i + 1] + 0.8 * e[i]);
        let nw = newey_west(&x, &u, 2).unwrap();
        let w = white_covariance(&x, &u).unwrap();
        assert!(nw[(0, 0)] > 1.3 * w[(0, 0)]);
    }

    #[test]
    fn collinear_columns_are_named() {
        let e = normals(6, 50);
        let x = DMatrix::from_fn(50, 3, |i, j| match j {
            0 => 1.0,
            1 => e[i],
            _ => 2.0 * e[i] - 1.0,
        });
        let names = vec!["const".to_string(), "a".into(), "b".into()];
        match check_rank(&x, &names) {
            Err(Error::RankDeficient { columns }) => assert_eq!(columns, vec!["b".to_string()]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn identity_response() {
        let s = normals(7, 300);
        let x = series(s.clone(), "x");
        let spec = LpSpec { horizons: 4, include_outcome_lags: false, ..LpSpec::default() };
        // standardization rescales the shock; undo it in the outcome
        let sd = {
            let m = mean(&s);
            (s.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / s.len() as f64).sqrt()
        };
        let r = run_lp(&x, &spec, &series(s, "shock")).unwrap();
        let b0 = r.coefficient(0, Regime::Linear).unwrap();
        assert!((b0.beta - sd).abs() < 1e-10, "{}", b0.beta);
        for h in 1..=4 {
            let row = r.coefficient(h, Regime::Linear).unwrap();
            assert!(row.beta.abs() < 4.0 * row.se.max(0.05));
            assert!(row.n_obs < r.coefficient(h - 1, Regime::Linear).unwrap().n_obs);
        }
    }

    fn known_irf(seed: u64, n: usize) -> (TimeSeries, TimeSeries) {
        let e = normals(seed, 2 * n + 1);
        let shock: Vec<f64> = e[..=n].to_vec();
        let x: Vec<f64> = (1..=n).map(|t| 0.5 * shock[t] + 0.3 * shock[t - 1] + 0.1 * e[n + t]).collect();
        (series(x, "x"), series(shock[1..].to_vec(), "shock"))
    }

    #[test]
    fn known_irf_recovery() {
        let (x, s) = known_irf(8, 5000);
        let spec = LpSpec { horizons: 3, ..LpSpec::default() };
        let r = run_lp(&x, &spec, &s).unwrap();
        let b0 = r.coefficient(0, Regime::Linear).unwrap();
        let b1 = r.coefficient(1, Regime::Linear).unwrap();
        assert!((b0.beta - 0.5).abs() < 0.05 && (b1.beta - 0.3).abs() < 0.05, "{b0:?} {b1:?}");
        assert!(r.warnings.is_empty());
    }

    #[test]
    fn shock_scale_invariance_and_nested_bands() {
        let (x, s) = known_irf(9, 400);
        let spec = LpSpec { horizons: 4, ..LpSpec::default() };
        let a = run_lp(&x, &spec, &s).unwrap();
        let b = run_lp(&x, &spec, &s.map(|v| 7.5 * v).unwrap()).unwrap();
        for (ra, rb) in a.rows.iter().zip(&b.rows) {
            assert!((ra.beta - rb.beta).abs() < 1e-10 && (ra.se - rb.se).abs() < 1e-10);
        }
        let wide = run_lp(&x, &LpSpec { band_level: 0.95, ..spec }, &s).unwrap();
        for (n, w) in a.rows.iter().zip(&wide.rows) {
            assert!(w.lo < n.lo && n.hi < w.hi);
            assert!(n.lo <= n.beta && n.beta <= n.hi);
        }
    }

    #[test]
    fn all_recession_indicator_reproduces_linear() {
        let (x, s) = known_irf(10, 300);
        let ctrl = series(normals(11, 300), "gdp");
        let ind = series(vec![1.0; 300], "rec");
        let lin = LpSpec { horizons: 3, controls: vec![ctrl], ..LpSpec::default() };
        let sd = LpSpec { mode: RegimeMode::StateDependent, regime_indicator: Some(ind), ..lin.clone() };
        let a = run_lp(&x, &lin, &s).unwrap();
        let b = run_lp(&x, &sd, &s).unwrap();
        for h in 0..=3 {
            let ra = a.coefficient(h, Regime::Linear).unwrap();
            let rb = b.coefficient(h, Regime::Recession).unwrap();
            assert!((ra.beta - rb.beta).abs() < 1e-10 && (ra.se - rb.se).abs() < 1e-10);
            assert!(b.coefficient(h, Regime::Expansion).is_none());
        }
        assert!(!b.warnings.is_empty());
    }

    #[test]
    fn state_dependent_needs_indicator_and_detects_collinearity() {
        let (x, s) = known_irf(12, 100);
        let spec = LpSpec { mode: RegimeMode::StateDependent, ..LpSpec::default() };
        assert!(run_lp(&x, &spec, &s).is_err());
        let ctrl = series(normals(13, 100), "gdp");
        let dup = ctrl.map(|v| 3.0 * v).unwrap().with_label("gdp_copy");
        let spec = LpSpec { controls: vec![ctrl, dup], ..LpSpec::default() };
        match run_lp(&x, &spec, &s) {
            Err(Error::RankDeficient { columns }) => assert!(columns[0].starts_with("gdp_copy")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn short_sample_truncates_with_warning() {
        let (x, s) = known_irf(14, 12);
        let spec = LpSpec { horizons: 12, ..LpSpec::default() };
        let r = run_lp(&x, &spec, &s).unwrap();
        assert!(r.max_horizon.unwrap() < 12);
        assert_eq!(r.warnings.len(), 1);
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("h,regime,beta,se,lo,hi,n_obs\n0,linear,"));
    }
}
