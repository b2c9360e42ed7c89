//! Node placement and channel gains for a single cell.
//!
//! The base station sits at the origin. CEUs are placed uniformly on the
//! edge annulus `[cell_radius - edge_band, cell_radius]`, D2D transmitters
//! uniformly on the disc, and each receiver at a fixed separation from its
//! transmitter. Gains follow `K * gamma * L^-eta` with `gamma ~ Exp(1)`.

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::rates::direct_rate;
use crate::{Error, Result};

/// Convert a power level in dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Convert a ratio in dB to linear scale.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub const ORIGIN: Position = Position { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn from_polar(radius: f64, angle: f64) -> Self {
        Self::new(radius * angle.cos(), radius * angle.sin())
    }

    pub fn distance(&self, other: &Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Distance from the cell centre.
    pub fn radius(&self) -> f64 {
        self.x.hypot(self.y)
    }
}

/// Propagation and geometry constants. `n0` is in watts, lengths in meters.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelParams {
    pub k: f64,
    pub eta: f64,
    pub n0: f64,
    pub cell_radius: f64,
    pub edge_band: f64,
    pub d2d_separation: f64,
    /// Maximum CEU to DT distance for a pairing to be acceptable.
    pub relay_range: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            k: 1e-2,
            eta: 4.0,
            n0: dbm_to_watts(-114.0),
            cell_radius: 500.0,
            edge_band: 50.0,
            d2d_separation: 20.0,
            relay_range: 300.0,
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("K", self.k),
            ("eta", self.eta),
            ("N0", self.n0),
            ("cell_radius", self.cell_radius),
            ("d2d_separation", self.d2d_separation),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "channel.{name} must be positive and finite, got {value}"
                )));
            }
        }
        if !(self.edge_band >= 0.0 && self.edge_band < self.cell_radius) {
            return Err(Error::InvalidParameter(format!(
                "channel.edge_band must lie in [0, cell_radius), got {}",
                self.edge_band
            )));
        }
        // A receiver must always have somewhere to go inside the disc.
        if self.d2d_separation >= self.cell_radius {
            return Err(Error::InvalidParameter(format!(
                "channel.d2d_separation must be smaller than the cell radius, got {}",
                self.d2d_separation
            )));
        }
        if self.relay_range.is_nan() || self.relay_range < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "channel.relay_range must be non-negative, got {}",
                self.relay_range
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub ceu_positions: Vec<Position>,
    pub dt_positions: Vec<Position>,
    pub dr_positions: Vec<Position>,
    pub bs_position: Position,
}

impl Topology {
    pub fn ceu_count(&self) -> usize {
        self.ceu_positions.len()
    }

    pub fn d2d_count(&self) -> usize {
        self.dt_positions.len()
    }

    pub fn ceu_dt_distance(&self, ceu: usize, d2d: usize) -> f64 {
        self.ceu_positions[ceu].distance(&self.dt_positions[d2d])
    }
}

/// Draws `m` CEUs on the edge annulus and `n` D2D pairs on the disc.
///
/// Draw order is fixed (all CEUs, then each DT followed by its DR) so the
/// CEU layout for a given stream does not depend on `n`.
pub fn place_nodes<R: Rng + ?Sized>(
    params: &ChannelParams,
    m: usize,
    n: usize,
    rng: &mut R,
) -> Topology {
    let outer = params.cell_radius;
    let inner = params.cell_radius - params.edge_band;

    let ceu_positions = (0..m)
        .map(|_| {
            // inverse CDF of the radius for a uniform density on the annulus
            let u: f64 = rng.random();
            let r = (inner * inner + u * (outer * outer - inner * inner)).sqrt();
            Position::from_polar(r, rng.random::<f64>() * TAU)
        })
        .collect();

    let mut dt_positions = Vec::with_capacity(n);
    let mut dr_positions = Vec::with_capacity(n);
    for _ in 0..n {
        let r = outer * rng.random::<f64>().sqrt();
        let dt = Position::from_polar(r, rng.random::<f64>() * TAU);
        let dr = loop {
            let angle = rng.random::<f64>() * TAU;
            let offset = Position::from_polar(params.d2d_separation, angle);
            let dr = Position::new(dt.x + offset.x, dt.y + offset.y);
            if dr.radius() <= outer {
                break dr;
            }
        };
        dt_positions.push(dt);
        dr_positions.push(dr);
    }

    Topology {
        ceu_positions,
        dt_positions,
        dr_positions,
        bs_position: Position::ORIGIN,
    }
}

/// Pathloss gain `K * fading * distance^-eta` for a given fading sample.
pub fn pathloss_gain(distance: f64, fading: f64, params: &ChannelParams) -> Result<f64> {
    if !(distance > 0.0) {
        return Err(Error::InvalidGeometry(distance));
    }
    Ok(params.k * fading * distance.powf(-params.eta))
}

/// Pathloss gain with a fresh `Exp(1)` fading draw.
pub fn channel_gain<R: Rng + ?Sized>(
    distance: f64,
    params: &ChannelParams,
    rng: &mut R,
) -> Result<f64> {
    if !(distance > 0.0) {
        return Err(Error::InvalidGeometry(distance));
    }
    let fading: f64 = Exp1.sample(rng);
    pathloss_gain(distance, fading, params)
}

/// Linear power gains for one drop, indexed `[ceu]`, `[ceu][d2d]` and `[d2d]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelGains {
    /// CEU to base station.
    pub h_ib: Vec<f64>,
    /// CEU to D2D transmitter.
    pub h_ij: Vec<Vec<f64>>,
    /// D2D transmitter to base station.
    pub g_jb: Vec<f64>,
    /// D2D transmitter to its own receiver.
    pub g_j: Vec<f64>,
}

/// Forces every CEU's direct link into outage by rejection sampling its fading.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutageConditioning {
    pub p_c: f64,
    pub r_th: f64,
    pub max_draws: usize,
}

impl OutageConditioning {
    pub const DEFAULT_MAX_DRAWS: usize = 10_000;

    pub fn new(p_c: f64, r_th: f64) -> Self {
        Self {
            p_c,
            r_th,
            max_draws: Self::DEFAULT_MAX_DRAWS,
        }
    }
}

/// Fills all four gain arrays, in the order `h_ib`, `h_ij` (row major), `g_jb`, `g_j`.
pub fn realize_gains<R: Rng + ?Sized>(
    topology: &Topology,
    params: &ChannelParams,
    rng: &mut R,
    conditioning: Option<&OutageConditioning>,
) -> Result<ChannelGains> {
    let bs = topology.bs_position;

    let mut h_ib = Vec::with_capacity(topology.ceu_count());
    for (i, ceu) in topology.ceu_positions.iter().enumerate() {
        let distance = ceu.distance(&bs);
        let gain = match conditioning {
            None => channel_gain(distance, params, rng)?,
            Some(cond) => {
                let mut draws = 0;
                loop {
                    if draws == cond.max_draws {
                        return Err(Error::ConditioningFailure { ceu: i, draws });
                    }
                    draws += 1;
                    let gain = channel_gain(distance, params, rng)?;
                    if direct_rate(cond.p_c, gain, params.n0) < cond.r_th {
                        break gain;
                    }
                }
            }
        };
        h_ib.push(gain);
    }

    let h_ij = topology
        .ceu_positions
        .iter()
        .map(|ceu| {
            topology
                .dt_positions
                .iter()
                .map(|dt| channel_gain(ceu.distance(dt), params, rng))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let g_jb = topology
        .dt_positions
        .iter()
        .map(|dt| channel_gain(dt.distance(&bs), params, rng))
        .collect::<Result<Vec<_>>>()?;

    let g_j = topology
        .dt_positions
        .iter()
        .zip(&topology.dr_positions)
        .map(|(dt, dr)| channel_gain(dt.distance(dr), params, rng))
        .collect::<Result<Vec<_>>>()?;

    Ok(ChannelGains { h_ib, h_ij, g_jb, g_j })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn noise_floor_conversion() {
        let n0 = dbm_to_watts(-114.0);
        assert!((n0 - 3.981e-15).abs() / 3.981e-15 < 1e-3);
        assert!((db_to_linear(5.0) - 10f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn empty_topology() {
        let topo = place_nodes(&ChannelParams::default(), 0, 0, &mut rng(1));
        assert!(topo.ceu_positions.is_empty());
        assert!(topo.dt_positions.is_empty());
        assert!(topo.dr_positions.is_empty());
        let gains = realize_gains(&topo, &ChannelParams::default(), &mut rng(1), None).unwrap();
        assert!(gains.h_ib.is_empty() && gains.h_ij.is_empty());
    }

    #[test]
    fn placement_respects_geometry() {
        let params = ChannelParams::default();
        let mut r = rng(7);
        let mut ceus = 0;
        while ceus < 10_000 {
            let topo = place_nodes(&params, 20, 25, &mut r);
            for p in &topo.ceu_positions {
                let radius = p.radius();
                assert!((450.0..=500.0 + 1e-9).contains(&radius), "CEU radius {radius}");
            }
            for (dt, dr) in topo.dt_positions.iter().zip(&topo.dr_positions) {
                assert!(dt.radius() <= 500.0 + 1e-9);
                assert!(dr.radius() <= 500.0);
                assert!((dt.distance(dr) - 20.0).abs() < 1e-9);
            }
            ceus += topo.ceu_count();
        }
    }

    #[test]
    fn dt_radius_is_uniform_over_area() {
        // P(r <= R/2) = 1/4 for a uniform disc
        let params = ChannelParams::default();
        let topo = place_nodes(&params, 0, 40_000, &mut rng(3));
        let inner = topo.dt_positions.iter().filter(|p| p.radius() <= 250.0).count();
        let frac = inner as f64 / 40_000.0;
        assert!((frac - 0.25).abs() < 0.01, "{frac}");
    }

    #[test]
    fn pathloss_examples() {
        let unit = ChannelParams {
            k: 1.0,
            ..ChannelParams::default()
        };
        assert_eq!(pathloss_gain(1.0, 1.0, &unit).unwrap(), 1.0);
        assert_eq!(pathloss_gain(37.0, 0.0, &unit).unwrap(), 0.0);

        let table = ChannelParams::default();
        let g = pathloss_gain(500.0, 1.0, &table).unwrap();
        assert!((g - 1.6e-13).abs() < 1e-25);

        // mean direct SNR of an edge CEU at 100 mW
        let snr = 0.1 * g / table.n0;
        assert!((snr - 4.019).abs() < 1e-3, "{snr}");
    }

    #[test]
    fn non_positive_distance_is_rejected() {
        let p = ChannelParams::default();
        assert!(matches!(pathloss_gain(0.0, 1.0, &p), Err(Error::InvalidGeometry(_))));
        assert!(matches!(
            channel_gain(-3.0, &p, &mut rng(0)),
            Err(Error::InvalidGeometry(_))
        ));
    }

    #[test]
    fn gain_decreases_with_distance() {
        let p = ChannelParams::default();
        let mut last = f64::INFINITY;
        for d in [1.0, 2.0, 10.0, 20.0, 150.0, 300.0, 499.0, 500.0] {
            let g = pathloss_gain(d, 0.8, &p).unwrap();
            assert!(g < last);
            last = g;
        }
    }

    #[test]
    fn fading_has_unit_mean() {
        let p = ChannelParams {
            k: 1.0,
            ..ChannelParams::default()
        };
        let mut r = rng(11);
        let n = 100_000;
        let sum: f64 = (0..n).map(|_| channel_gain(1.0, &p, &mut r).unwrap()).sum();
        let mean = sum / n as f64;
        assert!((0.99..=1.01).contains(&mean), "{mean}");
    }

    #[test]
    fn gains_are_deterministic_per_seed() {
        let p = ChannelParams::default();
        let cond = OutageConditioning::new(0.1, (1.0 + db_to_linear(5.0)).log2());
        let make = |seed| {
            let mut r = rng(seed);
            let topo = place_nodes(&p, 20, 30, &mut r);
            let gains = realize_gains(&topo, &p, &mut r, Some(&cond)).unwrap();
            (topo, gains)
        };
        assert_eq!(make(42), make(42));
        assert_ne!(make(42).1, make(43).1);
    }

    #[test]
    fn conditioning_forces_outage() {
        let p = ChannelParams::default();
        let r_th = (1.0 + db_to_linear(5.0)).log2();
        let cond = OutageConditioning::new(0.1, r_th);
        let mut r = rng(5);
        for _ in 0..200 {
            let topo = place_nodes(&p, 20, 5, &mut r);
            let gains = realize_gains(&topo, &p, &mut r, Some(&cond)).unwrap();
            for h in &gains.h_ib {
                assert!(*h >= 0.0 && h.is_finite());
                assert!(direct_rate(0.1, *h, p.n0) < r_th);
            }
        }
    }

    #[test]
    fn conditioning_reports_failure() {
        let p = ChannelParams::default();
        // an unreachable requirement: no draw can be below a zero rate
        let cond = OutageConditioning {
            p_c: 0.1,
            r_th: 0.0,
            max_draws: 50,
        };
        let topo = place_nodes(&p, 3, 0, &mut rng(1));
        match realize_gains(&topo, &p, &mut rng(1), Some(&cond)) {
            Err(Error::ConditioningFailure { ceu: 0, draws: 50 }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn validate_rejects_bad_params() {
        assert!(ChannelParams::default().validate().is_ok());
        let bad = [
            ChannelParams { k: 0.0, ..Default::default() },
            ChannelParams { eta: -1.0, ..Default::default() },
            ChannelParams { n0: f64::NAN, ..Default::default() },
            ChannelParams { edge_band: 500.0, ..Default::default() },
            ChannelParams { d2d_separation: 0.0, ..Default::default() },
        ];
        for p in bad {
            assert!(p.validate().is_err(), "{p:?}");
        }
    }
}
