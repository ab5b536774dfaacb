//! Independent numeric oracles shared by the integration suites. None of
//! them call the solver paths they are used to check.

use upn_market::economics::{demand_curve, supply_curve, DemandParams, SupplyParams};
use upn_market::pricing::{DemandSide, SupplySide};
use upn_market::scenario::MarketConstants;

/// Excess demand at `price` evaluated directly from the closed forms.
pub fn excess_demand(
    demands: &[DemandSide],
    supplies: &[SupplySide],
    market: &MarketConstants,
    price: f64,
) -> f64 {
    let d: f64 = demands
        .iter()
        .map(|d| {
            demand_curve(&d.params, price, d.psi, market.penalty_kappa, market.reward_r)
                .expect("demand defined above the floor")
        })
        .sum();
    let s: f64 = supplies
        .iter()
        .map(|s| {
            supply_curve(&s.params, price, s.phi, market.penalty_rho, market.energy_cost_xi)
        })
        .sum();
    d - s
}

/// Root of the excess-demand curve by bisection. Excess demand is strictly
/// decreasing in price, so the root is unique when it exists; when excess
/// demand is nonpositive on the whole admissible range the market clears at
/// the floor.
pub fn bisection_price(
    demands: &[DemandSide],
    supplies: &[SupplySide],
    market: &MarketConstants,
) -> f64 {
    let floor = market.reward_r.max(market.energy_cost_xi) + 2e-6;
    let mut lo = floor;
    if excess_demand(demands, supplies, market, lo) <= 0.0 {
        return lo;
    }
    let mut hi = 1.0;
    while excess_demand(demands, supplies, market, hi) > 0.0 {
        hi *= 2.0;
        assert!(hi < 1e12, "no sign change found");
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if excess_demand(demands, supplies, market, mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Argmax of a concave function on `[0, inf)` by doubling out the bracket
/// and golden-section search inside it.
pub fn golden_argmax(f: impl Fn(f64) -> f64) -> f64 {
    let mut hi = 1.0;
    while f(2.0 * hi) > f(hi) && hi < 1e12 {
        hi *= 2.0;
    }
    hi *= 2.0;
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (0.0f64, hi);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    for _ in 0..200 {
        if f(c) > f(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - phi * (b - a);
        d = a + phi * (b - a);
    }
    0.5 * (a + b)
}

/// The volume a buyer would pick by numerically maximizing the penalized
/// trade objective, branch by branch: the exceeded branch maximizes
/// `f(cap + q) - q (price + kappa psi)`, the covered branch
/// `f(q) + q (r - price - kappa psi)`, and the demand is the
/// probability-weighted sum of the two maximizers.
pub fn numeric_demand(params: &DemandParams, price: f64, psi: bool, kappa: f64, reward: f64) -> f64 {
    let theta = params.utility.theta;
    let alpha = params.utility.alpha;
    let penalty = if psi { kappa } else { 0.0 };
    let fair = |q: f64| theta * q.powf(1.0 - alpha) / (1.0 - alpha);
    let cap = params.initial_cap;
    let e = params.exceed_prob;

    let exceeded = if e > 0.0 {
        golden_argmax(|q| fair(cap + q) - q * (price + penalty))
    } else {
        0.0
    };
    let covered = if e < 1.0 {
        golden_argmax(|q| fair(q) + q * (reward - price - penalty))
    } else {
        0.0
    };
    e * exceeded + (1.0 - e) * covered
}

/// The volume a seller would pick by numerically maximizing
/// `f(cap - q) + q (price - xi - rho phi)` over `[0, cap]`.
pub fn numeric_supply(params: &SupplyParams, price: f64, phi: bool, rho: f64, xi: f64) -> f64 {
    let theta = params.utility.theta;
    let alpha = params.utility.alpha;
    let margin = price - xi - if phi { rho } else { 0.0 };
    let cap = params.initial_cap;
    let fair = |q: f64| {
        if q <= 0.0 {
            0.0
        } else {
            theta * q.powf(1.0 - alpha) / (1.0 - alpha)
        }
    };
    let objective = |q: f64| fair(cap - q) + q * margin;

    // golden-section on the closed interval [0, cap]
    let phi_ratio = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (0.0f64, cap);
    let mut c = b - phi_ratio * (b - a);
    let mut d = a + phi_ratio * (b - a);
    for _ in 0..200 {
        if objective(c) > objective(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - phi_ratio * (b - a);
        d = a + phi_ratio * (b - a);
    }
    0.5 * (a + b)
}
