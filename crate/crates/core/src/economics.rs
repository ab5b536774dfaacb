//! Market formulas: satisfaction, buyer/seller/operator utilities, penalty
//! indicators, closed-form demand and supply curves, operator revenue, and
//! the service price benchmark.
//!
//! All functions are pure. Quantities are in GB and EUR/GB throughout.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matching::Matching;
use crate::radio;
use crate::scenario::{
    BuyerId, BuyerProfile, MarketConstants, Scenario, SellerId, SellerProfile, UtilityParams,
};

/// One (buyer, seller) trade: volume, unit price, and contract duration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TradeTerms {
    pub buyer_id: BuyerId,
    /// 0 means the base station (overage purchase at the macro price).
    pub seller_id: SellerId,
    /// GB.
    pub volume: f64,
    /// EUR/GB.
    pub price: f64,
    /// Contract duration, s.
    pub duration: f64,
}

/// Constraint-violation indicators attached to a trade.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PenaltyFlags {
    /// Buyer side: requested volume exceeds what the link can carry.
    pub psi: bool,
    /// Seller side: committed volume exceeds the leftover cap.
    pub phi: bool,
}

/// Concave satisfaction `f(q) = theta * q^(1-alpha) / (1-alpha)`, with `f(0) = 0`.
pub fn alpha_fair(q: f64, params: &UtilityParams) -> Result<f64> {
    if q < 0.0 {
        return Err(Error::Domain {
            op: "alpha_fair",
            message: format!("negative volume {q}"),
        });
    }
    if q == 0.0 {
        return Ok(0.0);
    }
    Ok(params.theta * q.powf(1.0 - params.alpha) / (1.0 - params.alpha))
}

/// Buyer utility when transmitting to the macro cell: with probability `e`
/// the buyer has exceeded the cap and pays the overage price for `q_b0`
/// extra GB; otherwise the plan already covers the month.
pub fn buyer_utility_bs(
    buyer: &BuyerProfile,
    q_b0: f64,
    market: &MarketConstants,
    beta: bool,
) -> Result<f64> {
    if !beta {
        return Ok(0.0);
    }
    let e = buyer.exceed_prob;
    let exceeded =
        alpha_fair(buyer.initial_cap + q_b0, &buyer.utility)? - q_b0 * market.overage_price_p;
    let covered = alpha_fair(buyer.initial_cap, &buyer.utility)?;
    Ok(e * exceeded + (1.0 - e) * covered)
}

/// Buyer utility when buying `terms.volume` GB from a seller at
/// `terms.price`: the exceeded branch values the volume on top of the cap;
/// the covered branch values the traded volume alone plus the operator
/// reward net of the price.
pub fn buyer_utility_upn(
    buyer: &BuyerProfile,
    terms: &TradeTerms,
    market: &MarketConstants,
    beta: bool,
) -> Result<f64> {
    if !beta {
        return Ok(0.0);
    }
    let e = buyer.exceed_prob;
    let q = terms.volume;
    let pi = terms.price;
    let exceeded = alpha_fair(buyer.initial_cap + q, &buyer.utility)? - q * pi;
    let covered = alpha_fair(q, &buyer.utility)? + q * (market.reward_r - pi);
    Ok(e * exceeded + (1.0 - e) * covered)
}

/// Base-station utility from serving one buyer who purchases `q_b0` GB of
/// overage.
pub fn bs_utility(
    buyer: &BuyerProfile,
    q_b0: f64,
    market: &MarketConstants,
    beta: bool,
) -> Result<f64> {
    if !beta {
        return Ok(0.0);
    }
    Ok(alpha_fair(buyer.initial_cap + q_b0, &buyer.utility)? + q_b0 * market.overage_price_p)
}

/// Seller utility from one trade: leftover-cap satisfaction plus the margin
/// over the relay energy cost.
pub fn seller_utility(
    seller: &SellerProfile,
    terms: &TradeTerms,
    market: &MarketConstants,
    beta: bool,
) -> Result<f64> {
    if terms.volume < 0.0 || terms.volume > seller.initial_cap {
        return Err(Error::Domain {
            op: "seller_utility",
            message: format!(
                "volume {} outside [0, {}]; use the modified utility for soft handling",
                terms.volume, seller.initial_cap
            ),
        });
    }
    if !beta {
        return Ok(0.0);
    }
    Ok(alpha_fair(seller.initial_cap - terms.volume, &seller.utility)?
        + terms.volume * (terms.price - market.energy_cost_xi))
}

/// Penalty indicators for one trade under the current matching.
///
/// `psi` is set when the trade volume exceeds the link-capacity bound over
/// the contract duration; `phi` when the seller's QoS-weighted committed
/// volume (over `seller_terms`, which must list every trade of that seller)
/// exceeds the leftover cap. The base station has no cap, so `phi` is never
/// set for it.
pub fn penalty_flags(
    buyer_id: BuyerId,
    seller_id: SellerId,
    seller_terms: &[TradeTerms],
    matching: &Matching,
    scenario: &Scenario,
) -> PenaltyFlags {
    let term = seller_terms
        .iter()
        .find(|t| t.buyer_id == buyer_id && t.seller_id == seller_id);
    let psi = match term {
        Some(t) => volume_bound_violated(t, matching, scenario),
        None => false,
    };
    let phi = if seller_id.is_bs() {
        false
    } else {
        let cap = scenario.seller(seller_id).initial_cap;
        let committed: f64 = seller_terms
            .iter()
            .filter(|t| t.seller_id == seller_id)
            .map(|t| {
                let beta =
                    radio::connectivity_indicator(t.buyer_id, seller_id, matching, scenario);
                if beta {
                    t.volume
                } else {
                    0.0
                }
            })
            .sum();
        committed > cap
    };
    PenaltyFlags { psi, phi }
}

/// True when `terms.volume` exceeds the QoS-gated link bound
/// `beta * w * log2(1 + sinr) * duration` under the current matching.
pub fn volume_bound_violated(terms: &TradeTerms, matching: &Matching, scenario: &Scenario) -> bool {
    let beta = radio::connectivity_indicator(terms.buyer_id, terms.seller_id, matching, scenario);
    let bound = if beta {
        let sinr = radio::sinr(terms.buyer_id, terms.seller_id, matching, scenario);
        radio::data_volume(
            radio::link_capacity(scenario.radio.bandwidth_per_link, sinr),
            terms.duration,
        )
    } else {
        0.0
    };
    terms.volume > bound
}

/// Penalty-method combination `t * utility - penalty * flag` shared by the
/// modified buyer and seller utilities.
pub fn penalized(t: bool, utility: f64, penalty: f64, flag: bool) -> f64 {
    let base = if t { utility } else { 0.0 };
    base - if flag { penalty } else { 0.0 }
}

/// Modified buyer utility: the raw utility of the trade, gated by whether
/// the pair is actually matched, minus the capacity-violation penalty.
pub fn modified_buyer_utility(
    buyer: &BuyerProfile,
    terms: &TradeTerms,
    matching: &Matching,
    scenario: &Scenario,
) -> Result<f64> {
    let t = matching.seller_of(buyer.id) == terms.seller_id;
    let beta = radio::connectivity_indicator(buyer.id, terms.seller_id, matching, scenario);
    let psi = volume_bound_violated(terms, matching, scenario);
    let raw = if terms.seller_id.is_bs() {
        buyer_utility_bs(buyer, terms.volume, &scenario.market, beta)?
    } else {
        buyer_utility_upn(buyer, terms, &scenario.market, beta)?
    };
    Ok(penalized(t, raw, scenario.market.penalty_kappa, psi))
}

/// Modified seller utility: the sum of per-trade utilities over the seller's
/// matched buyers minus the cap-violation penalty.
pub fn modified_seller_utility(
    seller: &SellerProfile,
    seller_terms: &[TradeTerms],
    matching: &Matching,
    scenario: &Scenario,
) -> Result<f64> {
    let mut total = 0.0;
    let mut phi = false;
    for term in seller_terms.iter().filter(|t| t.seller_id == seller.id) {
        let flags = penalty_flags(term.buyer_id, seller.id, seller_terms, matching, scenario);
        phi = phi || flags.phi;
        if matching.seller_of(term.buyer_id) != seller.id {
            continue;
        }
        let beta = radio::connectivity_indicator(term.buyer_id, seller.id, matching, scenario);
        // soft handling: volumes beyond the cap contribute no satisfaction
        // term but still pay the margin; phi carries the penalty
        let clamped = TradeTerms {
            volume: term.volume.min(seller.initial_cap),
            ..*term
        };
        total += seller_utility(seller, &clamped, &scenario.market, beta)?;
    }
    Ok(penalized(true, total, scenario.market.penalty_rho, phi))
}

/// Closed-form demand parameters of one buyer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DemandParams {
    pub utility: UtilityParams,
    pub exceed_prob: f64,
    /// GB already covered by the monthly plan.
    pub initial_cap: f64,
}

impl From<&BuyerProfile> for DemandParams {
    fn from(b: &BuyerProfile) -> Self {
        DemandParams {
            utility: b.utility,
            exceed_prob: b.exceed_prob,
            initial_cap: b.initial_cap,
        }
    }
}

/// Closed-form supply parameters of one seller.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupplyParams {
    pub utility: UtilityParams,
    /// Leftover cap available for resale, GB.
    pub initial_cap: f64,
}

impl From<&SellerProfile> for SupplyParams {
    fn from(s: &SellerProfile) -> Self {
        SupplyParams {
            utility: s.utility,
            initial_cap: s.initial_cap,
        }
    }
}

/// Closed-form demand at `price`:
/// `e * max(0, (theta/(pi + kappa*psi))^(1/alpha) - cap) + (1-e) * (theta/(pi - r + kappa*psi))^(1/alpha)`.
///
/// Each bracketed term is floored at zero. Requires `alpha` in (0, 1); the
/// covered branch requires `pi - r + kappa*psi > 0`, otherwise the curve is
/// singular and the caller must restart above the reward.
pub fn demand_curve(
    params: &DemandParams,
    price: f64,
    psi: bool,
    kappa: f64,
    reward: f64,
) -> Result<f64> {
    let alpha = params.utility.alpha;
    let theta = params.utility.theta;
    if alpha <= 0.0 {
        return Err(Error::Domain {
            op: "demand_curve",
            message: "closed-form demand requires alpha in (0, 1)".into(),
        });
    }
    let penalty = if psi { kappa } else { 0.0 };
    let e = params.exceed_prob;

    let exceeded = if e > 0.0 {
        let denom = price + penalty;
        if denom <= 0.0 {
            return Err(Error::Domain {
                op: "demand_curve",
                message: format!("nonpositive effective price {denom}"),
            });
        }
        ((theta / denom).powf(1.0 / alpha) - params.initial_cap).max(0.0)
    } else {
        0.0
    };

    let covered = if e < 1.0 {
        let denom = price - reward + penalty;
        if denom <= 0.0 {
            return Err(Error::PriceBelowReward {
                price,
                margin: reward - penalty,
            });
        }
        (theta / denom).powf(1.0 / alpha)
    } else {
        0.0
    };

    Ok(e * exceeded + (1.0 - e) * covered)
}

/// Closed-form supply at `price`:
/// `cap - (theta/(pi - xi - rho*phi))^(1/alpha)`, clamped to `[0, cap]`,
/// and zero whenever the margin is nonpositive.
///
/// `alpha == 0` is handled as the limiting step curve: the seller offers the
/// whole cap once the margin beats `theta`, nothing below it.
pub fn supply_curve(params: &SupplyParams, price: f64, phi: bool, rho: f64, xi: f64) -> f64 {
    let margin = price - xi - if phi { rho } else { 0.0 };
    if margin <= 0.0 {
        return 0.0;
    }
    let alpha = params.utility.alpha;
    let theta = params.utility.theta;
    let withheld = if alpha == 0.0 {
        if theta < margin {
            0.0
        } else if theta > margin {
            f64::INFINITY
        } else {
            1.0
        }
    } else {
        (theta / margin).powf(1.0 / alpha)
    };
    (params.initial_cap - withheld).clamp(0.0, params.initial_cap)
}

/// Buyer's demand from a profile (see [`demand_curve`]).
pub fn buyer_demand(
    buyer: &BuyerProfile,
    price: f64,
    psi: bool,
    market: &MarketConstants,
) -> Result<f64> {
    demand_curve(
        &DemandParams::from(buyer),
        price,
        psi,
        market.penalty_kappa,
        market.reward_r,
    )
}

/// Seller's supply from a profile (see [`supply_curve`]).
pub fn seller_supply(
    seller: &SellerProfile,
    price: f64,
    phi: bool,
    market: &MarketConstants,
) -> f64 {
    supply_curve(
        &SupplyParams::from(seller),
        price,
        phi,
        market.penalty_rho,
        market.energy_cost_xi,
    )
}

/// Overage volume a buyer would purchase at the macro cell. Mirrors the
/// exceeded branch of [`demand_curve`] at the macro price; the covered branch
/// buys nothing there since the plan already carries the month.
pub fn bs_demand(buyer: &BuyerProfile, psi: bool, market: &MarketConstants) -> Result<f64> {
    let alpha = buyer.utility.alpha;
    if alpha <= 0.0 {
        return Err(Error::Domain {
            op: "bs_demand",
            message: "closed-form demand requires alpha in (0, 1)".into(),
        });
    }
    if buyer.exceed_prob == 0.0 {
        return Ok(0.0);
    }
    let denom = market.overage_price_p + if psi { market.penalty_kappa } else { 0.0 };
    if denom <= 0.0 {
        return Err(Error::Domain {
            op: "bs_demand",
            message: format!("nonpositive effective price {denom}"),
        });
    }
    Ok(((buyer.utility.theta / denom).powf(1.0 / alpha) - buyer.initial_cap).max(0.0))
}

/// Operator revenue split between macro-cell overage income and the UPN
/// share/reward balance.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RevenueSplit {
    /// Expected overage income from buyers served by the macro cell.
    pub bs: f64,
    /// Expected UPN trade share minus rewards paid out.
    pub upn: f64,
}

impl RevenueSplit {
    pub fn total(&self) -> f64 {
        self.bs + self.upn
    }
}

/// Operator revenue over all trades consistent with `matching`: overage
/// income on macro-cell links, a `v` share of every UPN trade when the buyer
/// exceeded the plan, minus the reward paid when the buyer had cap left.
pub fn wsp_revenue(
    matching: &Matching,
    terms: &[TradeTerms],
    scenario: &Scenario,
) -> RevenueSplit {
    let market = &scenario.market;
    let mut split = RevenueSplit::default();
    for term in terms {
        if matching.seller_of(term.buyer_id) != term.seller_id {
            continue;
        }
        let e = scenario.buyer(term.buyer_id).exceed_prob;
        if term.seller_id.is_bs() {
            split.bs += e * term.volume * market.overage_price_p;
        } else {
            split.upn += e * market.operator_share_v * term.volume * term.price
                - (1.0 - e) * term.volume * market.reward_r;
        }
    }
    split
}

/// Price threshold below which a buyer prefers the UPN over the macro cell
/// at equal volumes `q_b`:
/// `(1-e) * [f(q) + r*q - f(cap)]/q + e*p - (k0*psi_b0 + ks*psi_bs)/q`.
pub fn upn_price_benchmark(
    buyer: &BuyerProfile,
    q_b: f64,
    psi_bs0: bool,
    psi_bs: bool,
    market: &MarketConstants,
) -> Result<f64> {
    if q_b <= 0.0 {
        return Err(Error::Domain {
            op: "upn_price_benchmark",
            message: format!("volume must be positive, got {q_b}"),
        });
    }
    let e = buyer.exceed_prob;
    let covered_gain = alpha_fair(q_b, &buyer.utility)? + market.reward_r * q_b
        - alpha_fair(buyer.initial_cap, &buyer.utility)?;
    let penalty = (if psi_bs0 { market.penalty_kappa_bs } else { 0.0 })
        + if psi_bs { market.penalty_kappa_upn } else { 0.0 };
    Ok((1.0 - e) * covered_gain / q_b + e * market.overage_price_p - penalty / q_b)
}
