//! Link rates for a normalized frame.
//!
//! Cooperation splits the frame into three phases: the CEU broadcasts for
//! `alpha`, the DT forwards (decode-and-forward) for `alpha`, and the D2D
//! link uses the remaining `1 - 2 alpha`. All rates are spectral
//! efficiencies in bits/s/Hz.

use crate::channel::ChannelGains;
use crate::stackelberg::GameParams;
use crate::{Error, Result};

/// `log2(1 + p_c * h_ib / n0)`: the CEU's rate without a relay.
pub fn direct_rate(p_c: f64, h_ib: f64, n0: f64) -> f64 {
    (p_c * h_ib / n0).ln_1p() / std::f64::consts::LN_2
}

/// Per-frame rates of one candidate CEU / D2D pairing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    pub direct_rate: f64,
    /// CEU to DT hop.
    pub r1: f64,
    /// Combined CEU + DT reception at the base station.
    pub r2: f64,
    /// Decode-and-forward rate, `min(r1, r2)`.
    pub r_c: f64,
    /// D2D link rate over a full frame.
    pub r_d: f64,
}

impl LinkBudget {
    /// Builds a budget from the two hop rates, leaving `direct_rate` at zero.
    /// Handy for exercising the game on synthetic instances.
    pub fn from_rates(r_c: f64, r_d: f64) -> Self {
        Self {
            direct_rate: 0.0,
            r1: r_c,
            r2: r_c,
            r_c,
            r_d,
        }
    }
}

pub fn pair_budget(ceu: usize, d2d: usize, gains: &ChannelGains, params: &GameParams) -> LinkBudget {
    let GameParams { p_c, p_d, n0, .. } = *params;
    let h_ib = gains.h_ib[ceu];
    let h_ij = gains.h_ij[ceu][d2d];
    let g_jb = gains.g_jb[d2d];
    let g_j = gains.g_j[d2d];

    let r1 = (p_c * h_ij / n0).ln_1p() / std::f64::consts::LN_2;
    let r2 = (p_c * h_ib / n0 + p_d * g_jb / n0).ln_1p() / std::f64::consts::LN_2;
    LinkBudget {
        direct_rate: direct_rate(p_c, h_ib, n0),
        r1,
        r2,
        r_c: r1.min(r2),
        r_d: (p_d * g_j / n0).ln_1p() / std::f64::consts::LN_2,
    }
}

/// CEU and D2D rates when the pair cooperates with allocation `alpha`.
pub fn cooperative_rates(budget: &LinkBudget, alpha: f64) -> Result<(f64, f64)> {
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(Error::InvalidAllocation(alpha));
    }
    Ok((alpha * budget.r_c, (1.0 - 2.0 * alpha) * budget.r_d))
}
