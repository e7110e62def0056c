use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use svcredit_core::local_projections::{LpSpec, RegimeMode, ShockKind};
use svcredit_core::pmmh::{run_chain, summarize, ChainConfig, PosteriorDraws, Summary, Variant};
use svcredit_core::pruned_irf::{
    decompose_impact, irf, load_solution, write_decomposition_csv, zeta_ss_bound, IrfStart, RbcCalibration, ShockName,
};
use svcredit_core::rng::{derive_seed, stream};
use svcredit_core::timeseries::{
    demean, fmt_f64, growth_rate, lead_lag_correlation, load_csv, load_csv_columns, load_csv_skip_leading_blanks,
    write_lead_lag_csv,
};
use svcredit_core::{
    correlated_pf, extract_shocks, make_seed_block, run_lp, simulate, LatentPath, Period, PriorSpec, ShockSet,
    SvParams, TimeSeries,
};

use crate::config::{self, pick_enum, FileConfig};
use crate::manifest::Recorder;
use crate::*;

type Result<T> = std::result::Result<T, CliError>;

pub fn dispatch(cli: Cli) -> Result<()> {
    let cfg = config::load(cli.config.as_deref())?;
    match cli.command {
        Command::Estimate(a) => estimate(&cfg, a),
        Command::Filter(a) => filter(&cfg, a),
        Command::ExtractShocks(a) => extract(a),
        Command::Lp(a) => lp(&cfg, a),
        Command::IrfDecompose(a) => decompose(&cfg, a),
        Command::Simulate(a) => simulate_cmd(&cfg, a),
        Command::Leadlag(a) => leadlag(a),
    }
}

fn csv_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Output(format!("{}: {e}", path.display()))
}

fn io_out(e: std::io::Error) -> CliError {
    CliError::Output(e.to_string())
}

/// Apply a transform; growth rates are optionally converted to fractions.
fn transform(ts: &TimeSeries, t: Transform, units: Units) -> Result<(TimeSeries, Option<f64>)> {
    let scale = |s: TimeSeries| -> Result<TimeSeries> {
        match units {
            Units::Percent => Ok(s),
            Units::Fraction => Ok(s.map(|v| v / 100.0)?),
        }
    };
    match t {
        Transform::Level => Ok((ts.clone(), None)),
        Transform::Growth => Ok((scale(growth_rate(ts)?)?, None)),
        Transform::GrowthDemeaned => {
            let (d, m) = demean(&growth_rate(ts)?)?;
            Ok((scale(d)?, Some(m)))
        }
    }
}

#[derive(Serialize)]
struct SeriesInfo {
    data: PathBuf,
    column: String,
    transform: Transform,
    units: Units,
    /// Mean growth rate removed by the transform (percent).
    removed_mean: Option<f64>,
    observations: usize,
    first_period: Option<String>,
}

fn model_series(rec: &mut Recorder, s: &SeriesArgs, cfg: &FileConfig) -> Result<(TimeSeries, SeriesInfo)> {
    let tr = pick_enum("estimate.transform", s.transform, cfg.estimate.transform.as_ref(), Transform::GrowthDemeaned)?;
    let units = pick_enum("estimate.units", s.units, cfg.estimate.units.as_ref(), Units::Fraction)?;
    rec.input(&s.data)?;
    let raw = load_csv(&s.data, &s.column)?;
    let (y, removed_mean) = transform(&raw, tr, units)?;
    let info = SeriesInfo {
        data: s.data.clone(),
        column: s.column.clone(),
        transform: tr,
        units,
        removed_mean,
        observations: y.len(),
        first_period: y.start().map(|p| p.to_string()),
    };
    Ok((y, info))
}

fn read_params(rec: &mut Recorder, path: Option<&Path>) -> Result<SvParams> {
    let Some(path) = path else { return Ok(SvParams::credit_posterior_mean()) };
    rec.input(path)?;
    let text = std::fs::read_to_string(path).map_err(|e| CliError::MissingInput(format!("{}: {e}", path.display())))?;
    let p: SvParams = serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    p.validate()?;
    Ok(p)
}

fn chain_seed(seed: u64, chain: usize) -> u64 {
    if chain == 0 {
        seed
    } else {
        derive_seed(seed, stream::CHAIN, chain as u64)
    }
}

#[derive(Serialize)]
struct EstimateConfig {
    series: SeriesInfo,
    chain: ChainConfig,
    chains: usize,
}

#[derive(Serialize)]
struct EstimateSummary<'a> {
    prior: &'static str,
    chains: usize,
    posterior_mean: SvParams,
    per_chain_acceptance: Vec<f64>,
    /// Robbins–Monro steplength constant of the scale adaptation.
    steplength_constant: f64,
    #[serde(flatten)]
    summary: &'a Summary,
}

/// Concatenate chains; latent-path indices refer to rows of the pooled draws.
fn pool(chains: Vec<PosteriorDraws>, burn_in: usize) -> PosteriorDraws {
    let k = chains.len() as f64;
    let mut it = chains.into_iter();
    let mut first = it.next().expect("at least one chain");
    first.accept_trace.drain(..burn_in);
    for c in it {
        let offset = first.params.len();
        first.params.extend(c.params);
        first.logliks.extend(c.logliks);
        first.latent_paths.extend(c.latent_paths.into_iter().map(|(i, p)| (i + offset, p)));
        first.accept_trace.extend(&c.accept_trace[burn_in..]);
        first.scale_trace.extend(c.scale_trace);
        first.filter_failures += c.filter_failures;
        for (a, b) in first.mean_h.iter_mut().zip(&c.mean_h) {
            *a += b;
        }
        for (a, b) in first.mean_vol.iter_mut().zip(&c.mean_vol) {
            *a += b;
        }
    }
    // chains have equal length, so the pooled mean is the mean of chain means
    first.mean_h.iter_mut().for_each(|v| *v /= k);
    first.mean_vol.iter_mut().for_each(|v| *v /= k);
    first
}

fn estimate(cfg: &FileConfig, a: EstimateArgs) -> Result<()> {
    let e = &cfg.estimate;
    let mut rec = Recorder::new("estimate", &a.out)?;
    let prior = match pick_enum("estimate.prior", a.prior, e.prior.as_ref(), PriorChoice::Baseline)? {
        PriorChoice::Baseline => PriorSpec::baseline(),
        PriorChoice::Robustness => PriorSpec::robustness(),
    };
    let variant = match pick_enum("estimate.variant", a.variant, e.variant.as_ref(), VariantChoice::Correlated)? {
        VariantChoice::Correlated => Variant::Correlated,
        VariantChoice::Standard => Variant::Standard,
    };
    let defaults = ChainConfig::default();
    let chain = ChainConfig {
        iterations: a.iterations.or(e.iterations).unwrap_or(defaults.iterations),
        burn_in: a.burn_in.or(e.burn_in).unwrap_or(defaults.burn_in),
        particles: a.particles.or(e.particles).unwrap_or(defaults.particles),
        gamma: a.gamma.or(e.gamma).unwrap_or(defaults.gamma),
        target_accept: a.target_accept.or(e.target_accept).unwrap_or(defaults.target_accept),
        seed: a.seed.or(cfg.seed).unwrap_or(defaults.seed),
        prior,
        variant,
        path_thin: a.path_thin.or(e.path_thin).unwrap_or(defaults.path_thin),
        init: None,
    };
    chain.validate().map_err(|e| CliError::Config(config::one_line(&e.to_string())))?;
    let chains = a.chains.or(e.chains).unwrap_or(1);
    if chains == 0 {
        return Err(CliError::Config("--chains must be at least 1".into()));
    }
    let (y, series) = model_series(&mut rec, &a.series, cfg)?;

    let seeds: Vec<u64> = (0..chains).map(|i| chain_seed(chain.seed, i)).collect();
    for s in &seeds {
        rec.seed(*s);
    }
    let runs: Vec<_> = seeds
        .par_iter()
        .map(|&seed| run_chain(&y, &ChainConfig { seed, ..chain.clone() }))
        .collect::<std::result::Result<_, _>>()?;
    let per_chain_acceptance: Vec<f64> = runs.iter().map(|d| d.acceptance_rate_after(chain.burn_in)).collect();
    let draws = pool(runs, chain.burn_in);
    let summary = summarize(&draws)?;

    draws.write_draws_csv(rec.create("draws.csv")?)?;
    draws.write_volatility_csv(rec.create("volatility.csv")?)?;
    y.write_csv(rec.create("y.csv")?, "y")?;
    {
        let mut w = csv::Writer::from_writer(rec.create("latent_mean.csv")?);
        let path = a.out.join("latent_mean.csv");
        w.write_record(["t", "h"]).map_err(|e| csv_err(&path, e))?;
        for (p, h) in y.periods().iter().zip(&draws.mean_h) {
            w.write_record([p.to_string(), fmt_f64(*h)]).map_err(|e| csv_err(&path, e))?;
        }
        w.flush().map_err(io_out)?;
    }
    {
        let mut w = csv::Writer::from_writer(rec.create("latent_paths.csv")?);
        let path = a.out.join("latent_paths.csv");
        w.write_record(["draw", "t", "h"]).map_err(|e| csv_err(&path, e))?;
        for (draw, lp) in &draws.latent_paths {
            for (p, h) in y.periods().iter().zip(&lp.h) {
                w.write_record([draw.to_string(), p.to_string(), fmt_f64(*h)]).map_err(|e| csv_err(&path, e))?;
            }
        }
        w.flush().map_err(io_out)?;
    }
    let posterior_mean = draws.posterior_mean();
    rec.write_json("posterior_mean.json", &posterior_mean)?;
    rec.write_json(
        "summary.json",
        &EstimateSummary {
            prior: prior.name(),
            chains,
            posterior_mean,
            per_chain_acceptance,
            steplength_constant: draws.step_constant,
            summary: &summary,
        },
    )?;
    rec.finish(&EstimateConfig { series, chain, chains })?;
    Ok(())
}

#[derive(Serialize)]
struct FilterConfig {
    series: SeriesInfo,
    params: SvParams,
    particles: usize,
    seed: u64,
}

fn filter(cfg: &FileConfig, a: FilterArgs) -> Result<()> {
    let mut rec = Recorder::new("filter", &a.out)?;
    let particles = a.particles.or(cfg.filter.particles).unwrap_or(100);
    if particles == 0 {
        return Err(CliError::Config("--particles must be positive".into()));
    }
    let seed = a.seed.or(cfg.seed).unwrap_or(1);
    rec.seed(seed);
    let params = read_params(&mut rec, a.params.as_deref())?;
    let (y, series) = model_series(&mut rec, &a.series, cfg)?;
    let u = make_seed_block(y.len(), particles, seed);
    let ps = correlated_pf(&y, &params, &u, particles)?;
    {
        let path = a.out.join("filter.csv");
        let mut w = csv::Writer::from_writer(rec.create("filter.csv")?);
        w.write_record(["t", "loglik_contribution", "ess"]).map_err(|e| csv_err(&path, e))?;
        for ((p, l), ess) in y.periods().iter().zip(&ps.log_increments).zip(ps.ess()) {
            w.write_record([p.to_string(), fmt_f64(*l), fmt_f64(ess)]).map_err(|e| csv_err(&path, e))?;
        }
        w.flush().map_err(io_out)?;
    }
    #[derive(Serialize)]
    struct Out {
        loglik: f64,
    }
    rec.write_json("filter.json", &Out { loglik: ps.loglik })?;
    if a.dump {
        let mut w = rec.create("particles.bin")?;
        ps.write_binary(&mut w).map_err(io_out)?;
        w.flush().map_err(io_out)?;
    }
    rec.finish(&FilterConfig { series, params, particles, seed })?;
    Ok(())
}

#[derive(Serialize)]
struct ExtractConfig {
    estimate: PathBuf,
    per_draw: bool,
    draws_used: usize,
}

fn read_draws(path: &Path) -> Result<Vec<SvParams>> {
    let mut rdr =
        csv::Reader::from_path(path).map_err(|e| CliError::MissingInput(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        let mut vals = [0.0; 5];
        for (k, v) in vals.iter_mut().enumerate() {
            *v = rec
                .get(k)
                .and_then(|c| c.parse().ok())
                .ok_or_else(|| CliError::Data(format!("{}: bad value at row {}", path.display(), i + 2)))?;
        }
        out.push(SvParams::from_array(vals));
    }
    Ok(out)
}

fn read_paths(path: &Path) -> Result<BTreeMap<usize, Vec<f64>>> {
    let mut rdr =
        csv::Reader::from_path(path).map_err(|e| CliError::MissingInput(format!("{}: {e}", path.display())))?;
    let mut out: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        let bad = || CliError::Data(format!("{}: bad value at row {}", path.display(), i + 2));
        let draw: usize = rec.get(0).and_then(|c| c.parse().ok()).ok_or_else(bad)?;
        let h: f64 = rec.get(2).and_then(|c| c.parse().ok()).ok_or_else(bad)?;
        out.entry(draw).or_default().push(h);
    }
    Ok(out)
}

fn extract(a: ExtractArgs) -> Result<()> {
    let mut rec = Recorder::new("extract-shocks", &a.out)?;
    let dir = &a.estimate;
    let y_path = dir.join("y.csv");
    rec.input(&y_path)?;
    let y = load_csv(&y_path, "y")?;
    let (shocks, used) = if a.per_draw {
        let (dp, pp) = (dir.join("draws.csv"), dir.join("latent_paths.csv"));
        rec.input(&dp)?;
        rec.input(&pp)?;
        let draws = read_draws(&dp)?;
        let paths = read_paths(&pp)?;
        if paths.is_empty() {
            return Err(CliError::Data(format!("{} holds no latent paths", pp.display())));
        }
        let mut acc: Option<ShockSet> = None;
        for (&draw, h) in &paths {
            let p =
                draws.get(draw).ok_or_else(|| CliError::Data(format!("latent path {draw} has no matching draw")))?;
            let s = extract_shocks(&y, &LatentPath { h: h.clone() }, p)?;
            match &mut acc {
                None => acc = Some(s),
                Some(t) => {
                    let add = |a: &mut Vec<f64>, b: &[f64]| a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                    add(&mut t.eps, &s.eps);
                    add(&mut t.eta, &s.eta);
                    add(&mut t.eta_star, &s.eta_star);
                }
            }
        }
        let mut s = acc.expect("non-empty");
        let n = paths.len() as f64;
        for v in s.eps.iter_mut().chain(s.eta.iter_mut()).chain(s.eta_star.iter_mut()) {
            *v /= n;
        }
        (s, paths.len())
    } else {
        let (pm, lm) = (dir.join("posterior_mean.json"), dir.join("latent_mean.csv"));
        let p = read_params(&mut rec, Some(&pm))?;
        rec.input(&lm)?;
        let h = load_csv(&lm, "h")?;
        (extract_shocks(&y, &LatentPath { h: h.values().to_vec() }, &p)?, 1)
    };
    shocks.write_csv(rec.create("shocks.csv")?)?;
    rec.finish(&ExtractConfig { estimate: a.estimate.clone(), per_draw: a.per_draw, draws_used: used })?;
    Ok(())
}

#[derive(Serialize)]
struct LpConfig {
    data: PathBuf,
    outcome: String,
    controls: Vec<String>,
    outcome_transform: Transform,
    control_transform: Transform,
    shocks: PathBuf,
    shock_kind: ShockChoice,
    indicator: Option<PathBuf>,
    indicator_column: String,
    mode: ModeChoice,
    horizons: usize,
    lag_order: usize,
    band_level: f64,
    outcome_lags: bool,
    /// Newey–West truncation lag at horizon h.
    newey_west_lag: &'static str,
}

fn lp(cfg: &FileConfig, a: LpArgs) -> Result<()> {
    let c = &cfg.lp;
    let mut rec = Recorder::new("lp", &a.out)?;
    let mode = pick_enum("lp.mode", a.mode, c.mode.as_ref(), ModeChoice::Linear)?;
    let shock_kind = pick_enum("lp.shock_kind", a.shock_kind, c.shock_kind.as_ref(), ShockChoice::EtaStar)?;
    let controls = a.controls.clone().or_else(|| c.controls.clone()).unwrap_or_default();
    let horizons = a.horizons.or(c.horizons).unwrap_or(12);
    let lag_order = a.lag_order.or(c.lag_order).unwrap_or(2);
    let band_level = a.band.or(c.band_level).unwrap_or(0.68);
    let outcome_lags = if a.no_outcome_lags { false } else { c.outcome_lags.unwrap_or(true) };
    if matches!(mode, ModeChoice::StateDependent) && a.indicator.is_none() {
        return Err(CliError::Config("--mode state-dependent requires --indicator".into()));
    }

    rec.input(&a.data)?;
    let mut names: Vec<&str> = vec![a.outcome.as_str()];
    names.extend(controls.iter().map(String::as_str));
    let mut cols = load_csv_columns(&a.data, None, &names)?.into_iter();
    let outcome = transform(&cols.next().expect("outcome column"), a.outcome_transform, Units::Percent)?.0;
    let control_series =
        cols.map(|s| transform(&s, a.control_transform, Units::Percent).map(|t| t.0)).collect::<Result<Vec<_>>>()?;

    rec.input(&a.shocks)?;
    let kind = match shock_kind {
        ShockChoice::EtaStar => ShockKind::EtaStar,
        ShockChoice::Eta => ShockKind::Eta,
    };
    let shock = load_csv_skip_leading_blanks(&a.shocks, kind.column())?;
    let indicator = match &a.indicator {
        Some(p) => {
            rec.input(p)?;
            Some(load_csv(p, &a.indicator_column)?)
        }
        None => None,
    };
    let spec = LpSpec {
        horizons,
        lag_order,
        controls: control_series,
        include_outcome_lags: outcome_lags,
        shock_kind: kind,
        mode: match mode {
            ModeChoice::Linear => RegimeMode::Linear,
            ModeChoice::StateDependent => RegimeMode::StateDependent,
        },
        regime_indicator: indicator,
        band_level,
    };
    let result = run_lp(&outcome, &spec, &shock)?;
    result.write_csv(rec.create("lp.csv")?)?;
    #[derive(Serialize)]
    struct Meta<'a> {
        warnings: &'a [String],
        max_horizon: Option<usize>,
    }
    rec.write_json("lp_meta.json", &Meta { warnings: &result.warnings, max_horizon: result.max_horizon })?;
    rec.finish(&LpConfig {
        data: a.data.clone(),
        outcome: a.outcome.clone(),
        controls,
        outcome_transform: a.outcome_transform,
        control_transform: a.control_transform,
        shocks: a.shocks.clone(),
        shock_kind,
        indicator: a.indicator.clone(),
        indicator_column: a.indicator_column.clone(),
        mode,
        horizons,
        lag_order,
        band_level,
        outcome_lags,
        newey_west_lag: "h",
    })?;
    Ok(())
}

#[derive(Serialize)]
struct DecomposeConfig {
    solution: PathBuf,
    eta_star: f64,
    calibration: RbcCalibration,
}

fn decompose(cfg: &FileConfig, a: DecomposeArgs) -> Result<()> {
    let mut rec = Recorder::new("irf-decompose", &a.out)?;
    let eta_star = a.eta_star.or(cfg.irf.eta_star).unwrap_or(1.0);
    let calibration = cfg.calibration.unwrap_or_default();
    rec.input(&a.solution)?;
    let sol = load_solution(&a.solution)?;
    let rows = decompose_impact(&sol, eta_star)?;
    write_decomposition_csv(&rows, rec.create("decomposition.csv")?)?;
    rec.write_json("decomposition.json", &rows)?;
    let bound = zeta_ss_bound(&calibration)?;
    if bound.discrepancy.abs() > 1e-4 {
        log::warn!("zeta_ss bound evaluates to {:.4}, not the quoted {:.4}", bound.bound, bound.quoted_bound);
    }
    rec.write_json("zeta_bound.json", &bound)?;
    rec.finish(&DecomposeConfig { solution: a.solution.clone(), eta_star, calibration })?;
    Ok(())
}

#[derive(Serialize)]
#[serde(tag = "model", rename_all = "snake_case")]
enum SimulateConfig {
    Irf { solution: PathBuf, shock: IrfShock, size: f64, horizon: usize, start: StartChoice },
    Sv { params: SvParams, periods: usize, start_period: String, seed: u64 },
}

fn simulate_cmd(cfg: &FileConfig, a: SimulateArgs) -> Result<()> {
    let mut rec = Recorder::new("simulate", &a.out)?;
    match a.model {
        SimModel::Irf => {
            let solution = a
                .solution
                .clone()
                .ok_or_else(|| CliError::Config("simulate --model irf requires --solution".into()))?;
            let c = &cfg.irf;
            let shock = pick_enum("irf.shock", a.shock, c.shock.as_ref(), IrfShock::EtaStar)?;
            let start = pick_enum("irf.start", a.start, c.start.as_ref(), StartChoice::StochasticSteadyState)?;
            let size = a.size.or(c.size).unwrap_or(1.0);
            let horizon = a.horizon.or(c.horizon).unwrap_or(40);
            rec.input(&solution)?;
            let sol = load_solution(&solution)?;
            let r = irf(
                &sol,
                match shock {
                    IrfShock::EtaStar => ShockName::EtaStar,
                    IrfShock::EpsZeta => ShockName::EpsZeta,
                },
                size,
                horizon,
                match start {
                    StartChoice::StochasticSteadyState => IrfStart::StochasticSteadyState,
                    StartChoice::Zero => IrfStart::Zero,
                },
            )?;
            r.write_csv(rec.create("irf.csv")?)?;
            rec.finish(&SimulateConfig::Irf { solution, shock, size, horizon, start })?;
        }
        SimModel::Sv => {
            let params = read_params(&mut rec, a.params.as_deref())?;
            let seed = a.seed.or(cfg.seed).unwrap_or(1);
            rec.seed(seed);
            let start: Period = a
                .start_period
                .parse()
                .map_err(|_| CliError::Config(format!("invalid --start-period '{}'", a.start_period)))?;
            let sim = simulate(&params, a.periods, seed)?;
            let periods: Vec<Period> = (0..a.periods).map(|i| start.offset(i as i64)).collect();
            {
                let path = a.out.join("simulated.csv");
                let mut w = csv::Writer::from_writer(rec.create("simulated.csv")?);
                w.write_record(["t", "y", "h"]).map_err(|e| csv_err(&path, e))?;
                for ((p, y), h) in periods.iter().zip(sim.y.values()).zip(&sim.h.h) {
                    w.write_record([p.to_string(), fmt_f64(*y), fmt_f64(*h)]).map_err(|e| csv_err(&path, e))?;
                }
                w.flush().map_err(io_out)?;
            }
            let shocks = ShockSet { periods, ..sim.shocks };
            shocks.write_csv(rec.create("shocks.csv")?)?;
            rec.finish(&SimulateConfig::Sv { params, periods: a.periods, start_period: start.to_string(), seed })?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct LeadLagConfig {
    a: PathBuf,
    a_column: String,
    a_transform: Transform,
    b: PathBuf,
    b_column: String,
    b_transform: Transform,
    k_min: i64,
    k_max: i64,
}

fn leadlag(a: LeadLagArgs) -> Result<()> {
    let mut rec = Recorder::new("leadlag", &a.out)?;
    if a.k_min > a.k_max {
        return Err(CliError::Config(format!("--k-min {} exceeds --k-max {}", a.k_min, a.k_max)));
    }
    rec.input(&a.a)?;
    rec.input(&a.b)?;
    let sa = transform(&load_csv(&a.a, &a.a_column)?, a.a_transform, Units::Percent)?.0;
    let sb = transform(&load_csv(&a.b, &a.b_column)?, a.b_transform, Units::Percent)?.0;
    let rows = lead_lag_correlation(&sa, &sb, a.k_min, a.k_max)?;
    write_lead_lag_csv(&rows, rec.create("leadlag.csv")?)?;
    rec.finish(&LeadLagConfig {
        a: a.a.clone(),
        a_column: a.a_column.clone(),
        a_transform: a.a_transform,
        b: a.b.clone(),
        b_column: a.b_column.clone(),
        b_transform: a.b_transform,
        k_min: a.k_min,
        k_max: a.k_max,
    })?;
    Ok(())
}
