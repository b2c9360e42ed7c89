//! Per-pair pricing game, solved by backward induction.
//!
//! The CEU (leader) announces a price `c` for the D2D pair's use of its
//! channel during the third frame phase; the D2D pair (follower) answers
//! with the allocation `alpha` it spends relaying. Payoffs:
//!
//! ```text
//! U_D(alpha, c) = beta1 ln((1 - 2 alpha) r_d) - beta2 P_D alpha - c (1 - 2 alpha)
//! U_C(alpha, c) = beta1 ln(alpha r_c)         + c (1 - 2 alpha)
//! ```
//!
//! subject to the CEU requirement `alpha r_c >= R_th` and `0 < alpha < 1/2`.
//! `U_D` is concave in `alpha`, so the follower either sits on the
//! requirement boundary `R_th / r_c` or at its stationary point
//! `1/2 - beta1 / (2c - beta2 P_D)`. Substituting that response, the leader's
//! problem is piecewise smooth in `c` with at most four candidate optima,
//! see [`candidate_prices`]. [`oracle_equilibrium`] re-derives the same
//! equilibrium by brute force on a grid.

use crate::rates::{cooperative_rates, LinkBudget};
use crate::{Error, Result, ZERO_TOL};

/// Economic and radio constants shared by every pair. Powers in watts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GameParams {
    /// Revenue per unit of (log) rate satisfaction.
    pub beta1: f64,
    /// Cost per unit of relay energy.
    pub beta2: f64,
    pub p_c: f64,
    pub p_d: f64,
    pub n0: f64,
    /// CEU rate requirement, bits/s/Hz.
    pub r_th: f64,
}

impl Default for GameParams {
    fn default() -> Self {
        Self {
            beta1: 1.0,
            beta2: 10.0,
            p_c: 0.1,
            p_d: 0.1,
            n0: crate::channel::dbm_to_watts(-114.0),
            r_th: (1.0 + crate::channel::db_to_linear(5.0)).log2(),
        }
    }
}

impl GameParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("beta1", self.beta1),
            ("beta2", self.beta2),
            ("p_c", self.p_c),
            ("p_d", self.p_d),
            ("n0", self.n0),
            ("r_th", self.r_th),
        ];
        for (name, value) in fields {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "game.{name} must be positive and finite, got {value}"
                )));
            }
        }
        Ok(())
    }

    /// Relay energy cost per unit allocation, `beta2 * P_D`.
    pub fn relay_cost(&self) -> f64 {
        self.beta2 * self.p_d
    }

    /// Default price for the fixed-price baseline: `beta2 P_D / 2 + beta1`.
    pub fn default_fixed_price(&self) -> f64 {
        self.relay_cost() / 2.0 + self.beta1
    }
}

/// Follower payoff. Returns `-inf` when the D2D link carries no rate.
pub fn d2d_utility(alpha: f64, c: f64, budget: &LinkBudget, params: &GameParams) -> f64 {
    let share = 1.0 - 2.0 * alpha;
    params.beta1 * (share * budget.r_d).ln() - params.relay_cost() * alpha - c * share
}

/// Leader payoff.
pub fn ceu_utility(alpha: f64, c: f64, budget: &LinkBudget, params: &GameParams) -> f64 {
    params.beta1 * (alpha * budget.r_c).ln() + c * (1.0 - 2.0 * alpha)
}

/// D2D payoff at the smallest admissible allocation and zero price. The pair
/// can only ever participate when this is non-negative.
fn participation_surplus(budget: &LinkBudget, params: &GameParams) -> f64 {
    let floor = params.r_th / budget.r_c;
    params.beta1 * ((1.0 - 2.0 * floor) * budget.r_d).ln() - params.relay_cost() * floor
}

/// True iff `r_c > 2 R_th` and the D2D pair can break even at zero price.
pub fn feasible(budget: &LinkBudget, params: &GameParams) -> bool {
    budget.r_c > 2.0 * params.r_th && participation_surplus(budget, params) >= 0.0
}

/// Price at which the follower leaves the requirement boundary.
fn lower_threshold(budget: &LinkBudget, params: &GameParams) -> f64 {
    params.relay_cost() / 2.0 + params.beta1 * budget.r_c / (budget.r_c - 2.0 * params.r_th)
}

/// Follower best response to price `c`.
pub fn best_response_alpha(c: f64, budget: &LinkBudget, params: &GameParams) -> Result<f64> {
    if !feasible(budget, params) {
        return Err(Error::Infeasible { r_c: budget.r_c });
    }
    if c <= lower_threshold(budget, params) {
        Ok(params.r_th / budget.r_c)
    } else {
        Ok(0.5 - params.beta1 / (2.0 * c - params.relay_cost()))
    }
}

/// Leader candidates: `c1` is the best price while the follower stays on the
/// requirement boundary, `c2` the stationary point of the leader payoff past
/// it, `c_bar` the price that drives the follower payoff to zero past it and
/// `c_under` the boundary itself.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidatePrices {
    pub c1: f64,
    /// `None` when `beta2 P_D == 2 beta1` and the stationary point is undefined.
    pub c2: Option<f64>,
    pub c_bar: f64,
    pub c_under: f64,
    /// Admissible candidates in ascending order, without duplicates.
    pub candidate_set: Vec<f64>,
}

pub fn candidate_prices(budget: &LinkBudget, params: &GameParams) -> Result<CandidatePrices> {
    if !feasible(budget, params) {
        return Err(Error::Infeasible { r_c: budget.r_c });
    }
    let GameParams { beta1, .. } = *params;
    let cost = params.relay_cost();
    let floor = params.r_th / budget.r_c;

    let c_under = lower_threshold(budget, params);
    let break_even = participation_surplus(budget, params) / (1.0 - 2.0 * floor);
    let c1 = c_under.min(break_even);
    let c2 = (cost != 2.0 * beta1).then(|| cost / 2.0 + beta1 * cost / (cost - 2.0 * beta1));
    let c_bar = cost / 2.0 + beta1 * budget.r_d / (1.0 + cost / (2.0 * beta1)).exp();

    let mut set = match c2 {
        Some(c2) if c_under < c2 && c2 < c_bar => vec![c1, c2],
        _ if c_bar < c_under => vec![c1],
        _ => vec![c1, c_bar, c_under],
    };
    set.retain(|&c| {
        c >= 0.0
            && best_response_alpha(c, budget, params)
                .map(|a| d2d_utility(a, c, budget, params) >= -ZERO_TOL)
                .unwrap_or(false)
    });
    set.sort_by(f64::total_cmp);
    set.dedup();

    Ok(CandidatePrices {
        c1,
        c2,
        c_bar,
        c_under,
        candidate_set: set,
    })
}

/// Equilibrium (or non-cooperation) of one CEU / D2D pairing.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PairOutcome {
    pub feasible: bool,
    pub c_star: f64,
    pub alpha_star: f64,
    pub u_ceu: f64,
    pub u_d2d: f64,
    pub r_ceu: f64,
    pub r_d2d: f64,
}

impl PairOutcome {
    /// The no-cooperation outcome: every field zero.
    pub fn infeasible() -> Self {
        Self::default()
    }

    /// Evaluates both payoffs and rates at `(c, alpha)`.
    pub fn at(c: f64, alpha: f64, budget: &LinkBudget, params: &GameParams) -> Result<Self> {
        let (r_ceu, r_d2d) = cooperative_rates(budget, alpha)?;
        Ok(Self {
            feasible: true,
            c_star: c,
            alpha_star: alpha,
            u_ceu: ceu_utility(alpha, c, budget, params),
            u_d2d: d2d_utility(alpha, c, budget, params),
            r_ceu,
            r_d2d,
        })
    }
}

/// Closed-form equilibrium. Ties in leader payoff go to the smaller price.
pub fn solve_equilibrium(budget: &LinkBudget, params: &GameParams) -> PairOutcome {
    let Ok(candidates) = candidate_prices(budget, params) else {
        return PairOutcome::infeasible();
    };
    let mut best: Option<PairOutcome> = None;
    for &c in &candidates.candidate_set {
        let Ok(alpha) = best_response_alpha(c, budget, params) else {
            continue;
        };
        let Ok(outcome) = PairOutcome::at(c, alpha, budget, params) else {
            continue;
        };
        if best.is_none_or(|b| outcome.u_ceu > b.u_ceu) {
            best = Some(outcome);
        }
    }
    best.unwrap_or_else(PairOutcome::infeasible)
}

/// Step sizes for the brute-force oracle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleGrid {
    pub price_step: f64,
    pub alpha_step: f64,
}

impl OracleGrid {
    pub fn new(price_step: f64, alpha_step: f64) -> Self {
        Self {
            price_step,
            alpha_step,
        }
    }

    pub fn coarsest(&self) -> f64 {
        self.price_step.max(self.alpha_step)
    }
}

/// Upper end of the oracle's price search: `max(c_under + 10 beta1, beta1 r_d / e)`.
///
/// Above `beta1 r_d / e` the follower payoff is negative for every
/// allocation (maximize `beta1 ln(s r_d) - c s` over the D2D share `s`), so no
/// feasible price is cut off.
pub fn oracle_price_limit(budget: &LinkBudget, params: &GameParams) -> f64 {
    let cutoff = params.beta1 * budget.r_d / std::f64::consts::E;
    (lower_threshold(budget, params) + 10.0 * params.beta1).max(cutoff)
}

/// Follower's best allocation on the grid `R_th / r_c + k * step`, `k >= 0`,
/// restricted to `alpha < 1/2`. Returns `(alpha, U_D)`, or `None` when the
/// grid is empty. Ties keep the smaller allocation.
pub fn oracle_best_alpha(
    c: f64,
    budget: &LinkBudget,
    params: &GameParams,
    alpha_step: f64,
) -> Option<(f64, f64)> {
    let floor = params.r_th / budget.r_c;
    let mut best: Option<(f64, f64)> = None;
    let mut k = 0u64;
    loop {
        let alpha = floor + k as f64 * alpha_step;
        if !(alpha < 0.5) {
            break;
        }
        if alpha > 0.0 {
            let u = d2d_utility(alpha, c, budget, params);
            if best.is_none_or(|(_, b)| u > b) {
                best = Some((alpha, u));
            }
        }
        k += 1;
    }
    best
}

/// Brute-force equilibrium: for each grid price in `[0, oracle_price_limit]`
/// the follower picks its best grid allocation, prices whose follower payoff
/// falls below zero are discarded, and the leader takes the best remaining
/// price (smallest on ties). Uses none of the closed-form expressions.
pub fn oracle_equilibrium(budget: &LinkBudget, params: &GameParams, grid: OracleGrid) -> PairOutcome {
    if !(budget.r_c > 2.0 * params.r_th) {
        return PairOutcome::infeasible();
    }
    let limit = oracle_price_limit(budget, params);
    let mut best: Option<PairOutcome> = None;
    let mut k = 0u64;
    loop {
        let c = k as f64 * grid.price_step;
        if c > limit {
            break;
        }
        k += 1;
        let Some((alpha, u_d2d)) = oracle_best_alpha(c, budget, params, grid.alpha_step) else {
            continue;
        };
        if u_d2d < 0.0 {
            continue;
        }
        let u_ceu = ceu_utility(alpha, c, budget, params);
        if best.is_none_or(|b| u_ceu > b.u_ceu) {
            if let Ok(outcome) = PairOutcome::at(c, alpha, budget, params) {
                best = Some(outcome);
            }
        }
    }
    best.unwrap_or_else(PairOutcome::infeasible)
}

/// Outcome when the CEU charges a fixed price instead of optimizing it.
pub fn fixed_price_outcome(c_fixed: f64, budget: &LinkBudget, params: &GameParams) -> PairOutcome {
    let Ok(alpha) = best_response_alpha(c_fixed, budget, params) else {
        return PairOutcome::infeasible();
    };
    match PairOutcome::at(c_fixed, alpha, budget, params) {
        Ok(o) if o.u_d2d >= -ZERO_TOL && o.r_ceu >= params.r_th - ZERO_TOL => o,
        _ => PairOutcome::infeasible(),
    }
}
