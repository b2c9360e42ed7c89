//! Monte Carlo drops and sweeps over the number of D2D pairs.
//!
//! Every drop owns a ChaCha8 stream keyed by `master_seed` and selected by
//! `drop_index` (`set_stream`), so a drop's result does not depend on how
//! drops are scheduled. Topology and gains are drawn first, so all schemes
//! and all `n` sharing a drop index see the same CEU layout and (per scheme)
//! the same channel realization.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{place_nodes, realize_gains, ChannelGains, ChannelParams, OutageConditioning, Topology};
use crate::matching::{
    build_preferences, deferred_acceptance_traced, random_matching, Matching, PreferenceList,
    ProposalRound,
};
use crate::rates::{direct_rate, pair_budget};
use crate::stackelberg::{fixed_price_outcome, solve_equilibrium, GameParams, PairOutcome};
use crate::{Error, Result, ZERO_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Stackelberg pricing + deferred acceptance.
    Proposed,
    /// Stackelberg pricing + uniformly random pairing.
    RandomStackelberg,
    /// Fixed price + deferred acceptance.
    StableFixedPrice,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [
        Scheme::Proposed,
        Scheme::StableFixedPrice,
        Scheme::RandomStackelberg,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Proposed => "proposed",
            Scheme::RandomStackelberg => "random_stackelberg",
            Scheme::StableFixedPrice => "stable_fixed_price",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown scheme {s:?}")))
    }
}

/// How an unmatched CEU contributes to the CEU sum-rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum UnmatchedRate {
    /// Its direct-link rate.
    #[default]
    Direct,
    /// Nothing.
    Zero,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub channel: ChannelParams,
    pub game: GameParams,
    pub m: usize,
    pub n_values: Vec<usize>,
    pub drops: usize,
    pub schemes: Vec<Scheme>,
    pub c_fixed: f64,
    pub master_seed: u64,
    pub condition_outage: bool,
    pub max_conditioning_draws: usize,
    pub unmatched_rate: UnmatchedRate,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let game = GameParams::default();
        Self {
            channel: ChannelParams::default(),
            game,
            m: 20,
            n_values: (1..=8).map(|k| 5 * k).collect(),
            drops: 500,
            schemes: Scheme::ALL.to_vec(),
            c_fixed: game.default_fixed_price(),
            master_seed: 1,
            condition_outage: true,
            max_conditioning_draws: OutageConditioning::DEFAULT_MAX_DRAWS,
            unmatched_rate: UnmatchedRate::Direct,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        self.channel.validate()?;
        self.game.validate()?;
        if self.channel.n0 != self.game.n0 {
            return Err(Error::InvalidParameter(
                "channel and game noise powers differ".into(),
            ));
        }
        if self.m == 0 {
            return Err(Error::InvalidParameter("scenario.m must be at least 1".into()));
        }
        if self.drops == 0 {
            return Err(Error::InvalidParameter("scenario.drops must be at least 1".into()));
        }
        if self.schemes.is_empty() {
            return Err(Error::InvalidParameter("no scheme selected".into()));
        }
        if !(self.c_fixed.is_finite() && self.c_fixed >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "scenario.c_fixed must be a non-negative price, got {}",
                self.c_fixed
            )));
        }
        if self.max_conditioning_draws == 0 {
            return Err(Error::InvalidParameter(
                "scenario.max_conditioning_draws must be at least 1".into(),
            ));
        }
        Ok(())
    }

    fn conditioning(&self) -> Option<OutageConditioning> {
        self.condition_outage.then_some(OutageConditioning {
            p_c: self.game.p_c,
            r_th: self.game.r_th,
            max_draws: self.max_conditioning_draws,
        })
    }
}

/// Random stream for one drop.
pub fn drop_rng(master_seed: u64, drop_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(drop_index);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Metric {
    CeuTotalUtility,
    D2dTotalUtility,
    CeuSumRate,
    D2dSumRate,
    OutageFraction,
    MatchedCount,
}

impl Metric {
    pub const ALL: [Metric; 6] = [
        Metric::CeuTotalUtility,
        Metric::D2dTotalUtility,
        Metric::CeuSumRate,
        Metric::D2dSumRate,
        Metric::OutageFraction,
        Metric::MatchedCount,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::CeuTotalUtility => "ceu_total_utility",
            Metric::D2dTotalUtility => "d2d_total_utility",
            Metric::CeuSumRate => "ceu_sum_rate",
            Metric::D2dSumRate => "d2d_sum_rate",
            Metric::OutageFraction => "outage_fraction",
            Metric::MatchedCount => "matched_count",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DropMetrics {
    pub ceu_total_utility: f64,
    pub d2d_total_utility: f64,
    pub ceu_sum_rate: f64,
    pub d2d_sum_rate: f64,
    pub outage_fraction: f64,
    pub matched_count: usize,
}

impl DropMetrics {
    pub fn get(&self, metric: Metric) -> f64 {
        match metric {
            Metric::CeuTotalUtility => self.ceu_total_utility,
            Metric::D2dTotalUtility => self.d2d_total_utility,
            Metric::CeuSumRate => self.ceu_sum_rate,
            Metric::D2dSumRate => self.d2d_sum_rate,
            Metric::OutageFraction => self.outage_fraction,
            Metric::MatchedCount => self.matched_count as f64,
        }
    }
}

/// Everything computed for one drop, kept for tracing.
#[derive(Debug, Clone)]
pub struct DropTrace {
    pub scheme: Scheme,
    pub topology: Topology,
    pub gains: ChannelGains,
    /// Direct-link rate of each CEU.
    pub direct_rates: Vec<f64>,
    /// `outcomes[ceu][d2d]`.
    pub outcomes: Vec<Vec<PairOutcome>>,
    pub ceu_prefs: Vec<PreferenceList>,
    pub d2d_prefs: Vec<PreferenceList>,
    /// Deferred-acceptance rounds; empty for the random scheme.
    pub rounds: Vec<ProposalRound>,
    pub matching: Matching,
    pub metrics: DropMetrics,
}

/// Runs one drop and keeps all intermediate state.
pub fn trace_drop(config: &ScenarioConfig, scheme: Scheme, n: usize, drop_index: u64) -> Result<DropTrace> {
    let wrap = |e: Error| Error::Drop {
        n,
        drop_index,
        source: Box::new(e),
    };
    let mut rng = drop_rng(config.master_seed, drop_index);
    let topology = place_nodes(&config.channel, config.m, n, &mut rng);
    let gains = realize_gains(
        &topology,
        &config.channel,
        &mut rng,
        config.conditioning().as_ref(),
    )
    .map_err(wrap)?;

    let game = &config.game;
    let direct_rates: Vec<f64> = gains
        .h_ib
        .iter()
        .map(|&h| direct_rate(game.p_c, h, game.n0))
        .collect();
    let outcomes: Vec<Vec<PairOutcome>> = (0..config.m)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let budget = pair_budget(i, j, &gains, game);
                    match scheme {
                        Scheme::Proposed | Scheme::RandomStackelberg => solve_equilibrium(&budget, game),
                        Scheme::StableFixedPrice => fixed_price_outcome(config.c_fixed, &budget, game),
                    }
                })
                .collect()
        })
        .collect();

    let (ceu_prefs, d2d_prefs) = build_preferences(&outcomes, &topology, config.channel.relay_range);
    let (matching, rounds) = match scheme {
        Scheme::Proposed | Scheme::StableFixedPrice => {
            deferred_acceptance_traced(&ceu_prefs, &d2d_prefs).map_err(wrap)?
        }
        Scheme::RandomStackelberg => (random_matching(&ceu_prefs, &d2d_prefs, &mut rng), Vec::new()),
    };

    let metrics = drop_metrics(config, &outcomes, &direct_rates, &matching);
    Ok(DropTrace {
        scheme,
        topology,
        gains,
        direct_rates,
        outcomes,
        ceu_prefs,
        d2d_prefs,
        rounds,
        matching,
        metrics,
    })
}

fn drop_metrics(
    config: &ScenarioConfig,
    outcomes: &[Vec<PairOutcome>],
    direct_rates: &[f64],
    matching: &Matching,
) -> DropMetrics {
    let r_th = config.game.r_th;
    let mut metrics = DropMetrics::default();
    let mut outages = 0usize;
    for (i, &direct) in direct_rates.iter().enumerate() {
        let effective = match matching.partner_of_ceu(i) {
            Some(j) => {
                let o = &outcomes[i][j];
                metrics.ceu_total_utility += o.u_ceu;
                metrics.d2d_total_utility += o.u_d2d;
                metrics.d2d_sum_rate += o.r_d2d;
                metrics.matched_count += 1;
                metrics.ceu_sum_rate += o.r_ceu;
                o.r_ceu
            }
            None => {
                if config.unmatched_rate == UnmatchedRate::Direct {
                    metrics.ceu_sum_rate += direct;
                }
                direct
            }
        };
        if effective < r_th - ZERO_TOL {
            outages += 1;
        }
    }
    metrics.outage_fraction = outages as f64 / direct_rates.len().max(1) as f64;
    metrics
}

pub fn run_drop(config: &ScenarioConfig, scheme: Scheme, n: usize, drop_index: u64) -> Result<DropMetrics> {
    trace_drop(config, scheme, n, drop_index).map(|t| t.metrics)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    /// `None` when fewer than two samples exist.
    pub stderr: Option<f64>,
}

impl Summary {
    /// Mean and standard error, accumulated in slice order.
    pub fn of(samples: &[f64]) -> Self {
        let count = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / count;
        let stderr = (samples.len() > 1).then(|| {
            let ss: f64 = samples.iter().map(|x| (x - mean) * (x - mean)).sum();
            (ss / (count - 1.0)).sqrt() / count.sqrt()
        });
        Self { mean, stderr }
    }

    pub fn stderr_or_zero(&self) -> f64 {
        self.stderr.unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub scheme: Scheme,
    pub n: usize,
    pub drops: usize,
    /// Indexed like [`Metric::ALL`].
    pub summaries: [Summary; 6],
}

impl CellResult {
    pub fn summary(&self, metric: Metric) -> Summary {
        self.summaries[Metric::ALL.iter().position(|&m| m == metric).unwrap()]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    /// Ordered by scheme (as configured), then `n` (as configured).
    pub cells: Vec<CellResult>,
}

impl SweepResult {
    pub fn cell(&self, scheme: Scheme, n: usize) -> Option<&CellResult> {
        self.cells.iter().find(|c| c.scheme == scheme && c.n == n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Serial,
    Parallel,
}

/// Runs every `(scheme, n)` cell for `config.drops` drops each.
///
/// Drops may run in parallel, but per-drop metrics are collected by index and
/// reduced in drop order, so both modes give bit-identical summaries.
pub fn run_sweep(config: &ScenarioConfig, execution: Execution) -> Result<SweepResult> {
    config.validate()?;
    let mut cells = Vec::with_capacity(config.schemes.len() * config.n_values.len());
    for &scheme in &config.schemes {
        for &n in &config.n_values {
            let run = |d: usize| run_drop(config, scheme, n, d as u64);
            let per_drop: Vec<DropMetrics> = match execution {
                Execution::Serial => (0..config.drops).map(run).collect::<Result<_>>()?,
                Execution::Parallel => (0..config.drops).into_par_iter().map(run).collect::<Result<_>>()?,
            };
            let summaries = Metric::ALL.map(|metric| {
                let samples: Vec<f64> = per_drop.iter().map(|d| d.get(metric)).collect();
                Summary::of(&samples)
            });
            cells.push(CellResult {
                scheme,
                n,
                drops: per_drop.len(),
                summaries,
            });
        }
    }
    Ok(SweepResult { cells })
}
