//! Randomized cross-checks of the closed forms against brute-force oracles.

use std::fmt::Write as _;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::matching::{deferred_acceptance, enumerate_stable_matchings, find_blocking_pairs, PreferenceList};
use crate::rates::LinkBudget;
use crate::stackelberg::{
    best_response_alpha, d2d_utility, feasible, oracle_best_alpha, oracle_equilibrium,
    oracle_price_limit, solve_equilibrium, GameParams, OracleGrid,
};
use crate::ZERO_TOL;

/// A synthetic pricing-game instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GameInstance {
    pub budget: LinkBudget,
    pub params: GameParams,
}

/// Draws a feasible instance. Half of the draws keep `base`'s economics and
/// only vary the link rates; the rest also vary `beta1`, `beta2`, `P_D` and
/// `R_th`, covering both signs of `beta2 P_D - 2 beta1`.
pub fn sample_instance<R: Rng + ?Sized>(rng: &mut R, base: &GameParams) -> GameInstance {
    loop {
        let params = if rng.random_bool(0.5) {
            *base
        } else {
            GameParams {
                beta1: rng.random_range(0.5..2.0),
                beta2: rng.random_range(1.0..30.0),
                p_d: rng.random_range(0.01..0.3),
                r_th: rng.random_range(0.5..3.0),
                ..*base
            }
        };
        let r_c = 2.0 * params.r_th * (1.0 + rng.random_range(0.05..3.0));
        let r_d = rng.random_range(0.5..25.0);
        let budget = LinkBudget::from_rates(r_c, r_d);
        if feasible(&budget, &params) {
            return GameInstance { budget, params };
        }
    }
}

/// Random mutually consistent preference lists: each pair is acceptable
/// with probability `p_accept`, and each side ranks its acceptable partners
/// in an independent random order.
pub fn sample_preferences<R: Rng + ?Sized>(
    rng: &mut R,
    ceus: usize,
    d2ds: usize,
    p_accept: f64,
) -> (Vec<PreferenceList>, Vec<PreferenceList>) {
    use rand::seq::SliceRandom;
    let acceptable: Vec<Vec<bool>> = (0..ceus)
        .map(|_| (0..d2ds).map(|_| rng.random_bool(p_accept)).collect())
        .collect();
    let ceu_prefs = (0..ceus)
        .map(|i| {
            let mut ranked: Vec<usize> = (0..d2ds).filter(|&j| acceptable[i][j]).collect();
            ranked.shuffle(rng);
            PreferenceList::new(i, ranked)
        })
        .collect();
    let d2d_prefs = (0..d2ds)
        .map(|j| {
            let mut ranked: Vec<usize> = (0..ceus).filter(|&i| acceptable[i][j]).collect();
            ranked.shuffle(rng);
            PreferenceList::new(j, ranked)
        })
        .collect();
    (ceu_prefs, d2d_prefs)
}

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub instances: usize,
    pub grid: OracleGrid,
    pub seed: u64,
    /// Added to every closed-form allocation before comparison. Used to check
    /// that the harness actually detects errors.
    pub perturb_alpha: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            instances: 1000,
            grid: OracleGrid::new(1e-2, 1e-3),
            seed: 1,
            perturb_alpha: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub name: &'static str,
    pub checked: usize,
    pub failures: usize,
    pub worst: f64,
    pub tolerance: f64,
    /// Dump of the first failing instance.
    pub first_failure: Option<String>,
}

impl CheckReport {
    fn new(name: &'static str, tolerance: f64) -> Self {
        Self {
            name,
            checked: 0,
            failures: 0,
            worst: 0.0,
            tolerance,
            first_failure: None,
        }
    }

    fn record(&mut self, deviation: f64, dump: impl FnOnce() -> String) {
        self.checked += 1;
        if deviation > self.worst || deviation.is_nan() {
            self.worst = deviation;
        }
        if !(deviation <= self.tolerance) {
            self.failures += 1;
            if self.first_failure.is_none() {
                self.first_failure = Some(dump());
            }
        }
    }

    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub checks: Vec<CheckReport>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(CheckReport::passed)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let _ = writeln!(
                out,
                "{:<5} {:<28} checked={:<6} failures={:<6} worst={:.3e} tol={:.3e}",
                if c.passed() { "PASS" } else { "FAIL" },
                c.name,
                c.checked,
                c.failures,
                c.worst,
                c.tolerance
            );
            if let Some(dump) = &c.first_failure {
                let _ = writeln!(out, "      first failure: {dump}");
            }
        }
        out
    }
}

fn dump(inst: &GameInstance, extra: &str) -> String {
    let p = &inst.params;
    format!(
        "r_c={:.17} r_d={:.17} r_th={:.17} beta1={:.17} beta2={:.17} p_d={:.17} {extra}",
        inst.budget.r_c, inst.budget.r_d, p.r_th, p.beta1, p.beta2, p.p_d
    )
}

struct PairCheck {
    follower_dev: f64,
    follower_dump: String,
    leader_dev: f64,
    leader_alpha_dev: f64,
    leader_dump: String,
    zero_utility: Option<f64>,
}

fn check_instance(inst: &GameInstance, price: f64, opts: &VerifyOptions) -> PairCheck {
    let GameInstance { budget, params } = inst;
    let grid = opts.grid;

    let alpha = best_response_alpha(price, budget, params).expect("sampled instances are feasible")
        + opts.perturb_alpha;
    let closed_u = d2d_utility(alpha, price, budget, params);
    let (grid_alpha, grid_u) =
        oracle_best_alpha(price, budget, params, grid.alpha_step).expect("non-empty allocation grid");
    let in_range = alpha >= params.r_th / budget.r_c && alpha < 0.5;
    let follower_dev = if in_range { (closed_u - grid_u).abs() } else { f64::INFINITY };

    let mut closed = solve_equilibrium(budget, params);
    closed.alpha_star += opts.perturb_alpha;
    closed.u_ceu = crate::stackelberg::ceu_utility(closed.alpha_star, closed.c_star, budget, params);
    let oracle = oracle_equilibrium(budget, params, grid);
    let leader_dev = if closed.feasible == oracle.feasible {
        (closed.u_ceu - oracle.u_ceu).abs()
    } else {
        f64::INFINITY
    };

    let zero_utility = (params.relay_cost() < 2.0 * params.beta1).then(|| {
        let exact = solve_equilibrium(budget, params);
        exact.u_d2d.abs()
    });

    PairCheck {
        follower_dev,
        follower_dump: dump(inst, &format!("c={price} alpha={alpha} grid_alpha={grid_alpha}")),
        leader_dev,
        leader_alpha_dev: (closed.alpha_star - oracle.alpha_star).abs(),
        leader_dump: dump(
            inst,
            &format!(
                "closed(c={}, alpha={}, U_C={}) oracle(c={}, alpha={}, U_C={})",
                closed.c_star, closed.alpha_star, closed.u_ceu, oracle.c_star, oracle.alpha_star, oracle.u_ceu
            ),
        ),
        zero_utility,
    }
}

/// Runs every check on `opts.instances` random instances.
pub fn run_verification(base: &GameParams, opts: &VerifyOptions) -> VerifyReport {
    let grid = opts.grid;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let instances: Vec<(GameInstance, f64)> = (0..opts.instances)
        .map(|_| {
            let inst = sample_instance(&mut rng, base);
            let price = rng.random_range(0.0..oracle_price_limit(&inst.budget, &inst.params));
            (inst, price)
        })
        .collect();
    let results: Vec<PairCheck> = instances
        .par_iter()
        .map(|(inst, price)| check_instance(inst, *price, opts))
        .collect();

    let mut follower = CheckReport::new("follower best response", 10.0 * grid.alpha_step);
    let mut leader = CheckReport::new("leader equilibrium U_C", 10.0 * grid.coarsest());
    let mut leader_alpha = CheckReport::new(
        "leader equilibrium alpha",
        grid.alpha_step + grid.price_step,
    );
    let mut zero_utility = CheckReport::new("zero follower utility", ZERO_TOL);
    for r in results {
        follower.record(r.follower_dev, || r.follower_dump.clone());
        leader.record(r.leader_dev, || r.leader_dump.clone());
        leader_alpha.record(r.leader_alpha_dev, || r.leader_dump.clone());
        if let Some(u) = r.zero_utility {
            zero_utility.record(u, || r.leader_dump.clone());
        }
    }

    let mut stability = CheckReport::new("deferred acceptance", 0.0);
    for _ in 0..opts.instances {
        let m = rng.random_range(1..=6);
        let n = rng.random_range(1..=6);
        let p = rng.random_range(0.2..1.0);
        let (ceu, d2d) = sample_preferences(&mut rng, m, n, p);
        let da = deferred_acceptance(&ceu, &d2d).expect("consistent preferences");
        let stable = enumerate_stable_matchings(&ceu, &d2d).expect("small instance");
        let blocking = find_blocking_pairs(&da, &ceu, &d2d).len();
        let not_optimal = stable
            .iter()
            .flat_map(|s| s.pairs())
            .filter(|&(i, j)| ceu[i].prefers(j, da.partner_of_ceu(i)))
            .count();
        let missing = usize::from(!stable.contains(&da));
        let bad = (blocking + not_optimal + missing) as f64;
        stability.record(bad, || format!("ceu={ceu:?} d2d={d2d:?} da={:?}", da.pairs().collect::<Vec<_>>()));
    }

    VerifyReport {
        checks: vec![follower, leader, leader_alpha, zero_utility, stability],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sampled_instances_are_feasible_and_varied() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let base = GameParams::default();
        let mut below = 0;
        let mut above = 0;
        for _ in 0..500 {
            let inst = sample_instance(&mut rng, &base);
            assert!(feasible(&inst.budget, &inst.params));
            if inst.params.relay_cost() < 2.0 * inst.params.beta1 {
                below += 1;
            } else {
                above += 1;
            }
        }
        assert!(below > 50 && above > 50, "{below} {above}");
    }

    #[test]
    fn sampled_preferences_are_consistent() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let (ceu, d2d) = sample_preferences(&mut rng, 5, 4, 0.5);
            assert!(deferred_acceptance(&ceu, &d2d).is_ok());
        }
    }

    #[test]
    fn small_verification_passes() {
        let opts = VerifyOptions {
            instances: 40,
            ..VerifyOptions::default()
        };
        let report = run_verification(&GameParams::default(), &opts);
        assert!(report.passed(), "{}", report.render());
    }

    #[test]
    fn perturbation_is_detected() {
        let opts = VerifyOptions {
            instances: 20,
            perturb_alpha: 0.02,
            ..VerifyOptions::default()
        };
        let report = run_verification(&GameParams::default(), &opts);
        assert!(!report.passed());
        let follower = &report.checks[0];
        assert!(follower.failures > 0);
        assert!(follower.first_failure.as_deref().unwrap().contains("r_c="));
    }
}
