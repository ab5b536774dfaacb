//! Market-equilibrium price adjustment: the price of each UPN trade walks
//! proportionally to excess demand until demand meets supply, with the
//! step size kept inside the stability bound of the fixed point.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::economics::{self, DemandParams, SupplyParams};
use crate::error::{Error, Result};
use crate::scenario::{BuyerId, MarketConstants, Scenario, SellerId, UtilityParams};

/// Offset above the demand/supply singularities used as the hard price floor.
pub const PRICE_FLOOR_MARGIN: f64 = 1e-6;

/// Iteration budget when the caller does not specify one.
pub const DEFAULT_MAX_ITERATIONS: usize = 10_000;

/// Default convergence threshold, EUR/GB.
pub const DEFAULT_EPSILON: f64 = 1e-4;

/// Relative per-step damping: one iteration never moves the price by more
/// than this fraction of its current value, which keeps the walk bounded
/// when it starts next to the demand singularity.
const MAX_RELATIVE_STEP: f64 = 0.5;

/// Smallest admissible price: both curve denominators stay positive above it.
pub fn price_floor(market: &MarketConstants) -> f64 {
    market.reward_r.max(market.energy_cost_xi) + PRICE_FLOOR_MARGIN
}

/// Step-size policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LearningRate {
    /// Recompute the stability bound at the current price every step and
    /// take `safety` times it.
    Auto { safety: f64 },
    /// Constant rate.
    Fixed(f64),
}

impl Default for LearningRate {
    fn default() -> Self {
        LearningRate::Auto { safety: 0.9 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TatonnementConfig {
    pub initial_price: f64,
    pub epsilon: f64,
    pub max_iterations: usize,
    pub learning_rate: LearningRate,
}

impl Default for TatonnementConfig {
    fn default() -> Self {
        TatonnementConfig {
            initial_price: 0.5,
            epsilon: DEFAULT_EPSILON,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            learning_rate: LearningRate::default(),
        }
    }
}

/// One demand-side participant of a price solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DemandSide {
    pub params: DemandParams,
    pub psi: bool,
}

/// One supply-side participant of a price solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupplySide {
    pub params: SupplyParams,
    pub phi: bool,
}

/// One recorded iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub price: f64,
    pub demand: f64,
    pub supply: f64,
}

/// Full iteration history of one solve.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PriceTrace {
    pub steps: Vec<TraceStep>,
}

impl PriceTrace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// CSV dump with an `iteration,price,demand,supply` header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,price,demand,supply\n");
        for (i, step) in self.steps.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                i, step.price, step.demand, step.supply
            ));
        }
        out
    }
}

/// Converged solve result.
#[derive(Debug, Clone, PartialEq)]
pub struct Equilibrium {
    pub price: f64,
    pub demand: f64,
    pub supply: f64,
    pub iterations: usize,
    pub trace: PriceTrace,
}

/// Largest stable step size for a single buyer-seller pair at `price`:
/// the reciprocal of the summed curve slopes
/// `(1/(a_b t_b)) (t_b/pi)^(1+1/a_b) + (1/(a_s t_s)) (t_s/pi)^(1+1/a_s)`.
pub fn max_stable_learning_rate(
    buyer: &UtilityParams,
    seller: &UtilityParams,
    price: f64,
) -> f64 {
    1.0 / (rate_bound_term(buyer, price) + rate_bound_term(seller, price))
}

fn rate_bound_term(u: &UtilityParams, price: f64) -> f64 {
    debug_assert!(u.alpha > 0.0 && price > 0.0);
    (1.0 / (u.alpha * u.theta)) * (u.theta / price).powf(1.0 + 1.0 / u.alpha)
}

/// Magnitude of one demand party's local price slope, branch clamps and
/// shifts included. A branch whose closed form is clamped contributes no
/// slope.
fn demand_slope(params: &DemandParams, price: f64, psi: bool, market: &MarketConstants) -> f64 {
    let alpha = params.utility.alpha;
    let theta = params.utility.theta;
    let penalty = if psi { market.penalty_kappa } else { 0.0 };
    let e = params.exceed_prob;
    let mut slope = 0.0;
    if e > 0.0 {
        let denom = price + penalty;
        if denom > 0.0 && (theta / denom).powf(1.0 / alpha) > params.initial_cap {
            slope += e * (1.0 / alpha) * theta.powf(1.0 / alpha) * denom.powf(-1.0 - 1.0 / alpha);
        }
    }
    if e < 1.0 {
        let denom = price - market.reward_r + penalty;
        if denom > 0.0 {
            slope +=
                (1.0 - e) * (1.0 / alpha) * theta.powf(1.0 / alpha) * denom.powf(-1.0 - 1.0 / alpha);
        }
    }
    slope
}

/// Magnitude of one supply party's local price slope; zero while the offer
/// is clamped at nothing.
fn supply_slope(params: &SupplyParams, price: f64, phi: bool, market: &MarketConstants) -> f64 {
    let alpha = params.utility.alpha;
    let theta = params.utility.theta;
    let margin = price - market.energy_cost_xi - if phi { market.penalty_rho } else { 0.0 };
    if margin <= 0.0 {
        return 0.0;
    }
    let withheld = (theta / margin).powf(1.0 / alpha);
    if withheld >= params.initial_cap {
        0.0
    } else {
        (1.0 / alpha) * theta.powf(1.0 / alpha) * margin.powf(-1.0 - 1.0 / alpha)
    }
}

/// Stability bound generalized to any number of participants: the
/// reciprocal of the excess-demand curve's local slope magnitude. Returns 0
/// when every curve is flat at `price` (a degenerate cleared market).
pub fn stable_rate_bound(
    demands: &[DemandSide],
    supplies: &[SupplySide],
    market: &MarketConstants,
    price: f64,
) -> f64 {
    let total: f64 = demands
        .iter()
        .map(|d| demand_slope(&d.params, price, d.psi, market))
        .chain(
            supplies
                .iter()
                .map(|s| supply_slope(&s.params, price, s.phi, market)),
        )
        .sum();
    if total == 0.0 {
        0.0
    } else {
        1.0 / total
    }
}

/// One raw price-adjustment step `pi + rate * (demand - supply)`, floored.
pub fn tatonnement_step(
    price: f64,
    total_demand: f64,
    total_supply: f64,
    rate: f64,
    floor: f64,
) -> f64 {
    (price + rate * (total_demand - total_supply)).max(floor)
}

fn total_demand(demands: &[DemandSide], price: f64, market: &MarketConstants) -> Result<f64> {
    let mut sum = 0.0;
    for d in demands {
        sum += economics::demand_curve(
            &d.params,
            price,
            d.psi,
            market.penalty_kappa,
            market.reward_r,
        )?;
    }
    Ok(sum)
}

fn total_supply(supplies: &[SupplySide], price: f64, market: &MarketConstants) -> f64 {
    supplies
        .iter()
        .map(|s| {
            economics::supply_curve(
                &s.params,
                price,
                s.phi,
                market.penalty_rho,
                market.energy_cost_xi,
            )
        })
        .sum()
}

/// True when the price-update map `pi -> pi + rate * (D(pi) - S(pi))` has a
/// finite-difference multiplier beyond 1 in magnitude at `price`, meaning
/// the fixed point repels the iteration at this rate. Skipped (false) when
/// the probe would cross the price floor.
fn is_locally_expanding(
    demands: &[DemandSide],
    supplies: &[SupplySide],
    market: &MarketConstants,
    price: f64,
    rate: f64,
    floor: f64,
) -> Result<bool> {
    let h = (price * 1e-6).max(1e-9);
    if price - h <= floor {
        return Ok(false);
    }
    let excess = |p: f64| -> Result<f64> {
        Ok(total_demand(demands, p, market)? - total_supply(supplies, p, market))
    };
    let slope = (excess(price + h)? - excess(price - h)?) / (2.0 * h);
    let multiplier = 1.0 + rate * slope;
    Ok(multiplier.abs() > 1.05)
}

/// Walks the price until two consecutive prices differ by less than
/// `config.epsilon`, recording every step. The start is clamped to the
/// price floor; each participant needs curvature in (0, 1).
///
/// Fails with a convergence error (carrying the trace) once the iteration
/// budget is spent.
pub fn solve_equilibrium_price(
    demands: &[DemandSide],
    supplies: &[SupplySide],
    market: &MarketConstants,
    config: &TatonnementConfig,
) -> Result<Equilibrium> {
    for d in demands {
        if !(d.params.utility.alpha > 0.0 && d.params.utility.alpha < 1.0) {
            return Err(Error::Domain {
                op: "solve_equilibrium_price",
                message: "demand-side alpha must be in (0, 1)".into(),
            });
        }
    }
    for s in supplies {
        if !(s.params.utility.alpha > 0.0 && s.params.utility.alpha < 1.0) {
            return Err(Error::Domain {
                op: "solve_equilibrium_price",
                message: "supply-side alpha must be in (0, 1)".into(),
            });
        }
    }
    let floor = price_floor(market);
    let mut price = config.initial_price.max(floor);
    let mut trace = PriceTrace::default();
    let mut last_step = f64::INFINITY;
    // The clamped demand brackets put kinks in the excess-demand curve; a
    // bound-respecting walk can still 2-cycle around one. Auto mode shrinks
    // its rate whenever the step direction flips. Fixed mode stays raw so a
    // deliberately oversized rate keeps its unstable dynamics.
    let mut damping = 1.0f64;
    let mut prev_direction = 0.0f64;

    for iteration in 0..config.max_iterations {
        let demand = total_demand(demands, price, market)?;
        let supply = total_supply(supplies, price, market);
        trace.steps.push(TraceStep {
            price,
            demand,
            supply,
        });
        let rate = match config.learning_rate {
            LearningRate::Auto { safety } => {
                let direction = (demand - supply).signum();
                if direction != 0.0 {
                    if prev_direction != 0.0 && direction != prev_direction {
                        damping = (damping * 0.7).max(0.01);
                    } else {
                        damping = (damping * 1.05).min(1.0);
                    }
                    prev_direction = direction;
                }
                safety * damping * stable_rate_bound(demands, supplies, market, price)
            }
            LearningRate::Fixed(rate) => rate,
        };
        let raw_next = tatonnement_step(price, demand, supply, rate, floor);
        let max_step = MAX_RELATIVE_STEP * price;
        let next = raw_next.clamp(price - max_step, price + max_step).max(floor);
        last_step = (next - price).abs();
        if last_step < config.epsilon {
            // An expanding map can still jump inside the epsilon ball by
            // chance; only an attracting fixed point counts as converged.
            let stop_rate = match config.learning_rate {
                LearningRate::Auto { safety } => {
                    safety * damping * stable_rate_bound(demands, supplies, market, next)
                }
                LearningRate::Fixed(rate) => rate,
            };
            if is_locally_expanding(demands, supplies, market, next, stop_rate, floor)? {
                return Err(Error::NonConvergence {
                    iterations: iteration + 1,
                    last_price: next,
                    last_step,
                    trace: Box::new(trace),
                });
            }
            let demand = total_demand(demands, next, market)?;
            let supply = total_supply(supplies, next, market);
            trace.steps.push(TraceStep {
                price: next,
                demand,
                supply,
            });
            return Ok(Equilibrium {
                price: next,
                demand,
                supply,
                iterations: iteration + 1,
                trace,
            });
        }
        price = next;
    }

    Err(Error::NonConvergence {
        iterations: config.max_iterations,
        last_price: price,
        last_step,
        trace: Box::new(trace),
    })
}

/// Live price state of one run: the quoted price of every (buyer, seller)
/// pair, the macro overage price, the latest demand/supply evaluations, and
/// the last solve trace per seller.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketState {
    bs_price: f64,
    floor: f64,
    prices: BTreeMap<(BuyerId, SellerId), f64>,
    /// (demand, supply) recorded at the last solve touching the pair.
    pub last_eval: BTreeMap<(BuyerId, SellerId), (f64, f64)>,
    pub traces: BTreeMap<SellerId, PriceTrace>,
}

impl MarketState {
    /// Quotes every pair at the scenario's starting price, clamped to the
    /// price floor so the demand curve is defined everywhere.
    pub fn new(scenario: &Scenario) -> Self {
        let floor = price_floor(&scenario.market);
        let initial = scenario.algo.initial_price.max(floor);
        let mut prices = BTreeMap::new();
        for b in &scenario.buyers {
            for s in &scenario.sellers {
                prices.insert((b.id, s.id), initial);
            }
        }
        MarketState {
            bs_price: scenario.market.overage_price_p,
            floor,
            prices,
            last_eval: BTreeMap::new(),
            traces: BTreeMap::new(),
        }
    }

    /// Price quoted for a pair; the base station always quotes the macro
    /// overage price.
    pub fn price_of(&self, buyer: BuyerId, seller: SellerId) -> f64 {
        if seller.is_bs() {
            self.bs_price
        } else {
            *self
                .prices
                .get(&(buyer, seller))
                .expect("pair missing from market state")
        }
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    pub fn set_price(&mut self, buyer: BuyerId, seller: SellerId, price: f64) {
        assert!(!seller.is_bs(), "the macro price is fixed");
        self.prices.insert((buyer, seller), price.max(self.floor));
    }

    /// Updates the quote of every pair involving `seller`; one UPN trades at
    /// one price.
    pub fn set_seller_price(&mut self, seller: SellerId, price: f64) {
        let clamped = price.max(self.floor);
        for ((_, s), value) in self.prices.iter_mut() {
            if *s == seller {
                *value = clamped;
            }
        }
    }

    pub fn record_eval(&mut self, buyer: BuyerId, seller: SellerId, demand: f64, supply: f64) {
        self.last_eval.insert((buyer, seller), (demand, supply));
    }

    pub fn record_trace(&mut self, seller: SellerId, trace: PriceTrace) {
        self.traces.insert(seller, trace);
    }

    pub fn pairs(&self) -> impl Iterator<Item = (BuyerId, SellerId, f64)> + '_ {
        self.prices.iter().map(|((b, s), p)| (*b, *s, *p))
    }

    /// CSV dump of every pair quote: `buyer_id,seller_id,price`.
    pub fn prices_csv(&self) -> String {
        let mut out = String::from("buyer_id,seller_id,price\n");
        for (b, s, p) in self.pairs() {
            out.push_str(&format!("{b},{s},{p}\n"));
        }
        out
    }
}
