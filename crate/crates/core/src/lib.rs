//! Stochastic volatility with leverage estimated by correlated pseudo-marginal
//! Metropolis–Hastings, local-projection impulse responses to the extracted
//! volatility shocks, and simulation of pruned third-order perturbation
//! solutions.

pub mod error;
pub mod local_projections;
pub mod particle_filter;
pub mod pmmh;
pub mod pruned_irf;
pub mod rng;
pub mod sv_model;
pub mod timeseries;

pub use error::{Error, Result};
pub use local_projections::{
    newey_west, run_lp, standardize_shock, LpResult, LpRow, LpSpec, Regime, RegimeMode, ShockKind,
};
pub use particle_filter::{
    correlate_seed, correlated_pf, make_seed_block, sorted_multinomial_resample, ParticleSystem, SeedBlock,
};
pub use pmmh::{run_chain, summarize, ChainConfig, PosteriorDraws, Summary, Variant};
pub use pruned_irf::{
    decompose_impact, irf, load_solution, pruned_step, zeta_ss_bound, DecompositionRow, Irf, IrfStart, PrunedSolution,
    PrunedState, RbcCalibration, ShockName,
};
pub use sv_model::{extract_shocks, simulate, LatentPath, PriorSpec, ShockSet, SvParams};
pub use timeseries::{Period, TimeSeries};
