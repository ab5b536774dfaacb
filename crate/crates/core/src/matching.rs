//! One-to-many buyer-seller matching with externalities: preference
//! construction, admission, swap evaluation, stability checking, and a
//! brute-force enumeration oracle for small instances.
//!
//! A buyer's worth of a link depends on the rest of the matching through
//! co-channel interference and seller load, so every evaluation here takes
//! the full matching as input.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::economics::{self, TradeTerms};
use crate::error::{Error, Result};
use crate::pricing::MarketState;
use crate::radio;
use crate::scenario::{BuyerId, Scenario, SellerId};

/// Float tolerance for utility comparisons in swap votes.
const VOTE_TOL: f64 = 1e-9;

/// Tolerance applied to seller-cap comparisons so equilibrium volumes that
/// land on the cap to within solver precision are not flagged.
const CAP_TOL: f64 = 1e-9;

/// Assignment of every buyer to a seller or the base station (id 0).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Matching {
    assignment: BTreeMap<BuyerId, SellerId>,
}

impl Matching {
    /// Every buyer starts on the macro cell.
    pub fn all_at_bs(scenario: &Scenario) -> Self {
        Matching {
            assignment: scenario
                .buyers
                .iter()
                .map(|b| (b.id, SellerId::BS))
                .collect(),
        }
    }

    pub fn from_assignment(assignment: BTreeMap<BuyerId, SellerId>) -> Self {
        Matching { assignment }
    }

    pub fn seller_of(&self, buyer: BuyerId) -> SellerId {
        *self
            .assignment
            .get(&buyer)
            .expect("buyer missing from matching")
    }

    pub fn assign(&mut self, buyer: BuyerId, seller: SellerId) {
        self.assignment.insert(buyer, seller);
    }

    /// Copy of this matching with one buyer reassigned.
    pub fn with(&self, buyer: BuyerId, seller: SellerId) -> Matching {
        let mut next = self.clone();
        next.assign(buyer, seller);
        next
    }

    pub fn buyers_at(&self, seller: SellerId) -> impl Iterator<Item = BuyerId> + '_ {
        self.assignment
            .iter()
            .filter(move |(_, s)| **s == seller)
            .map(|(b, _)| *b)
    }

    pub fn n_at_bs(&self) -> usize {
        self.buyers_at(SellerId::BS).count()
    }

    pub fn iter(&self) -> impl Iterator<Item = (BuyerId, SellerId)> + '_ {
        self.assignment.iter().map(|(b, s)| (*b, *s))
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    /// 0/1 trading matrix with one row per buyer (ascending id) and one
    /// column per service point: the base station first, then sellers in
    /// ascending id order.
    pub fn trading_matrix(&self, scenario: &Scenario) -> Vec<Vec<u8>> {
        let mut columns = vec![SellerId::BS];
        columns.extend(scenario.sellers.iter().map(|s| s.id));
        self.assignment
            .values()
            .map(|assigned| {
                columns
                    .iter()
                    .map(|c| u8::from(c == assigned))
                    .collect()
            })
            .collect()
    }

    /// Trading matrix as CSV with a `buyer_id` column and one `s<k>` column
    /// per service point.
    pub fn matrix_csv(&self, scenario: &Scenario) -> String {
        let mut header = vec!["buyer_id".to_string(), "s0".to_string()];
        header.extend(scenario.sellers.iter().map(|s| format!("s{}", s.id)));
        let mut out = header.join(",");
        out.push('\n');
        let matrix = self.trading_matrix(scenario);
        for ((buyer, _), row) in self.assignment.iter().zip(matrix) {
            out.push_str(&buyer.to_string());
            for cell in row {
                out.push(',');
                out.push_str(&cell.to_string());
            }
            out.push('\n');
        }
        out
    }
}

/// Relocation of one buyer between two service points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SwapProposal {
    pub buyer: BuyerId,
    pub from: SellerId,
    pub to: SellerId,
}

/// Why a proposal was turned down.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RejectReason {
    /// The target link fails the QoS indicator after the move.
    TargetInfeasible,
    /// The target seller's cap cannot absorb the mover's volume.
    TargetCapExceeded,
    /// Some involved party ends up strictly worse.
    PartyHarmed { party: String, before: f64, after: f64 },
    /// Nobody ends up strictly better.
    NoStrictImprovement,
}

/// Outcome of evaluating one proposal: the decision plus the before/after
/// utilities of the three voters (buyer, losing side, gaining side).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwapDecision {
    pub proposal: SwapProposal,
    pub approved: bool,
    pub reject_reason: Option<RejectReason>,
    pub buyer_delta: (f64, f64),
    pub from_delta: (f64, f64),
    pub to_delta: (f64, f64),
}

/// Cached per-scenario link gains so repeated assessments avoid `powf`.
pub struct MarketEnv<'a> {
    pub scenario: &'a Scenario,
    buyer_pos: BTreeMap<BuyerId, usize>,
    seller_pos: BTreeMap<SellerId, usize>,
    /// gain[buyer][seller-column], column 0 = base station
    gains: Vec<Vec<f64>>,
}

impl<'a> MarketEnv<'a> {
    pub fn new(scenario: &'a Scenario) -> Self {
        let buyer_pos: BTreeMap<_, _> = scenario
            .buyers
            .iter()
            .enumerate()
            .map(|(i, b)| (b.id, i))
            .collect();
        let seller_pos: BTreeMap<_, _> = scenario
            .sellers
            .iter()
            .enumerate()
            .map(|(i, s)| (s.id, i + 1))
            .collect();
        let exponent = scenario.radio.path_loss_exponent;
        let gains = scenario
            .buyers
            .iter()
            .map(|b| {
                let mut row =
                    vec![radio::channel_gain(&b.position, &scenario.base_station.position, exponent)];
                row.extend(scenario.sellers.iter().map(|s| {
                    radio::channel_gain(&b.position, &s.position, exponent)
                }));
                row
            })
            .collect();
        MarketEnv {
            scenario,
            buyer_pos,
            seller_pos,
            gains,
        }
    }

    fn column(&self, seller: SellerId) -> usize {
        if seller.is_bs() {
            0
        } else {
            *self.seller_pos.get(&seller).expect("unknown seller id")
        }
    }

    pub fn gain(&self, buyer: BuyerId, seller: SellerId) -> f64 {
        self.gains[*self.buyer_pos.get(&buyer).expect("unknown buyer id")][self.column(seller)]
    }

    pub fn interference(&self, buyer: BuyerId, seller: SellerId, matching: &Matching) -> f64 {
        if seller.is_bs() {
            return 0.0;
        }
        let mut total = 0.0;
        for other in &self.scenario.buyers {
            if other.id == buyer {
                continue;
            }
            let assigned = matching.seller_of(other.id);
            if assigned.is_bs() || assigned == seller {
                continue;
            }
            total += other.tx_power * self.gain(other.id, seller);
        }
        total
    }

    pub fn sinr(&self, buyer: BuyerId, seller: SellerId, matching: &Matching) -> f64 {
        let power = self.scenario.buyer(buyer).tx_power;
        let noise = self.scenario.radio.noise_power();
        power * self.gain(buyer, seller) / (noise + self.interference(buyer, seller, matching))
    }

    pub fn beta(&self, buyer: BuyerId, seller: SellerId, matching: &Matching) -> bool {
        let profile = self.scenario.buyer(buyer);
        self.sinr(buyer, seller, matching) >= profile.min_sinr
            && radio::availability(seller, matching, self.scenario) >= profile.min_duration
    }

    /// Link-capacity volume bound over the buyer's contract duration, GB.
    pub fn max_volume(&self, buyer: BuyerId, seller: SellerId, matching: &Matching) -> f64 {
        let capacity = radio::link_capacity(
            self.scenario.radio.bandwidth_per_link,
            self.sinr(buyer, seller, matching),
        );
        radio::data_volume(capacity, self.scenario.buyer(buyer).requested_duration)
    }
}

/// One (buyer, service point) pair evaluated under a matching and the
/// current prices, as if the pair were matched.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairSnapshot {
    pub buyer: BuyerId,
    pub seller: SellerId,
    pub beta: bool,
    pub psi: bool,
    /// Volume the buyer would move at the current price, GB.
    pub volume: f64,
    pub price: f64,
    /// Raw buyer utility of the trade (QoS-gated).
    pub raw_utility: f64,
    /// Penalty-modified buyer utility.
    pub utility: f64,
    /// The service point's own stake in this trade.
    pub seller_term: f64,
}

impl PairSnapshot {
    pub fn terms(&self) -> TradeTerms {
        TradeTerms {
            buyer_id: self.buyer,
            seller_id: self.seller,
            volume: self.volume,
            price: self.price,
            duration: 0.0,
        }
    }
}

/// Evaluates pair `(buyer, seller)` under `matching`: QoS indicator, the
/// two-step penalty flow (flag set off the unpenalized request, volume then
/// recomputed under the penalty), and both sides' utilities.
pub fn pair_snapshot(
    env: &MarketEnv,
    matching: &Matching,
    state: &MarketState,
    buyer: BuyerId,
    seller: SellerId,
) -> Result<PairSnapshot> {
    let scenario = env.scenario;
    let profile = scenario.buyer(buyer);
    let market = &scenario.market;
    let beta = env.beta(buyer, seller, matching);
    let bound = if beta {
        env.max_volume(buyer, seller, matching)
    } else {
        0.0
    };
    let price = state.price_of(buyer, seller);

    let unpenalized = if seller.is_bs() {
        economics::bs_demand(profile, false, market)?
    } else {
        economics::buyer_demand(profile, price, false, market)?
    };
    let psi = unpenalized > bound;
    let volume = if psi {
        if seller.is_bs() {
            economics::bs_demand(profile, true, market)?
        } else {
            economics::buyer_demand(profile, price, true, market)?
        }
    } else {
        unpenalized
    };

    let terms = TradeTerms {
        buyer_id: buyer,
        seller_id: seller,
        volume,
        price,
        duration: profile.requested_duration,
    };
    let raw_utility = if seller.is_bs() {
        economics::buyer_utility_bs(profile, volume, market, beta)?
    } else {
        economics::buyer_utility_upn(profile, &terms, market, beta)?
    };
    let utility = economics::penalized(true, raw_utility, market.penalty_kappa, psi);

    let seller_term = if seller.is_bs() {
        economics::bs_utility(profile, volume, market, beta)?
    } else {
        let seller_profile = scenario.seller(seller);
        let clamped = TradeTerms {
            volume: volume.min(seller_profile.initial_cap),
            ..terms
        };
        economics::seller_utility(seller_profile, &clamped, market, beta)?
    };

    Ok(PairSnapshot {
        buyer,
        seller,
        beta,
        psi,
        volume,
        price,
        raw_utility,
        utility,
        seller_term,
    })
}

/// Utilities of every participant under one matching.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchingAssessment {
    /// Snapshot of each buyer's assigned pair.
    pub snapshots: BTreeMap<BuyerId, PairSnapshot>,
    /// Penalty-modified utility of each service point (base station at 0).
    pub seller_utilities: BTreeMap<SellerId, f64>,
    /// Cap-violation flag per seller.
    pub seller_phi: BTreeMap<SellerId, bool>,
}

impl MatchingAssessment {
    pub fn buyer_utility(&self, buyer: BuyerId) -> f64 {
        self.snapshots[&buyer].utility
    }

    pub fn seller_utility(&self, seller: SellerId) -> f64 {
        self.seller_utilities.get(&seller).copied().unwrap_or(0.0)
    }
}

/// Evaluates the whole matching: every assigned pair plus per-seller totals.
pub fn assess(
    env: &MarketEnv,
    matching: &Matching,
    state: &MarketState,
) -> Result<MatchingAssessment> {
    let scenario = env.scenario;
    let mut snapshots = BTreeMap::new();
    for buyer in &scenario.buyers {
        let seller = matching.seller_of(buyer.id);
        snapshots.insert(
            buyer.id,
            pair_snapshot(env, matching, state, buyer.id, seller)?,
        );
    }

    let mut seller_utilities = BTreeMap::new();
    let mut seller_phi = BTreeMap::new();

    let bs_total: f64 = snapshots
        .values()
        .filter(|snap| snap.seller.is_bs())
        .map(|snap| snap.seller_term)
        .sum();
    seller_utilities.insert(SellerId::BS, bs_total);
    seller_phi.insert(SellerId::BS, false);

    for seller in &scenario.sellers {
        let members: Vec<&PairSnapshot> = snapshots
            .values()
            .filter(|snap| snap.seller == seller.id)
            .collect();
        let committed: f64 = members
            .iter()
            .filter(|snap| snap.beta)
            .map(|snap| snap.volume)
            .sum();
        let phi = committed > seller.initial_cap + CAP_TOL;
        let total: f64 = members.iter().map(|snap| snap.seller_term).sum();
        seller_utilities.insert(
            seller.id,
            economics::penalized(true, total, scenario.market.penalty_rho, phi),
        );
        seller_phi.insert(seller.id, phi);
    }

    Ok(MatchingAssessment {
        snapshots,
        seller_utilities,
        seller_phi,
    })
}

/// Service points the buyer would currently accept, ordered by the
/// penalty-modified utility the buyer would get there (descending, ties to
/// the lower id). Points failing the QoS indicator are left out.
pub fn buyer_preference_list(
    buyer: BuyerId,
    matching: &Matching,
    state: &MarketState,
    env: &MarketEnv,
) -> Result<Vec<(SellerId, PairSnapshot)>> {
    let mut candidates = Vec::new();
    let mut ids = vec![SellerId::BS];
    ids.extend(env.scenario.sellers.iter().map(|s| s.id));
    for seller in ids {
        let snap = pair_snapshot(env, matching, state, buyer, seller)?;
        if snap.beta {
            candidates.push((seller, snap));
        }
    }
    candidates.sort_by(|a, b| {
        b.1.utility
            .partial_cmp(&a.1.utility)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.0.cmp(&b.0))
    });
    Ok(candidates)
}

/// Buyers a seller admits out of `proposers`: ranked by the seller's own
/// per-trade utility (descending, ties to the lower buyer id) and accepted
/// greedily while the cumulative demanded volume stays within the leftover
/// cap.
pub fn seller_acceptance(
    seller: SellerId,
    proposers: &[BuyerId],
    matching: &Matching,
    state: &MarketState,
    env: &MarketEnv,
) -> Result<Vec<BuyerId>> {
    let mut ranked = Vec::new();
    for &buyer in proposers {
        let snap = pair_snapshot(env, matching, state, buyer, seller)?;
        ranked.push((buyer, snap));
    }
    ranked.sort_by(|a, b| {
        b.1.seller_term
            .partial_cmp(&a.1.seller_term)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.0.cmp(&b.0))
    });

    if seller.is_bs() {
        return Ok(ranked.into_iter().map(|(b, _)| b).collect());
    }

    let cap = env.scenario.seller(seller).initial_cap;
    let mut committed = 0.0;
    let mut accepted = Vec::new();
    for (buyer, snap) in ranked {
        let volume = if snap.beta { snap.volume } else { 0.0 };
        if committed + volume <= cap + CAP_TOL {
            committed += volume;
            accepted.push(buyer);
        }
    }
    Ok(accepted)
}

/// Evaluates one relocation under the current prices.
///
/// The post-move world is fully re-derived (interference, availability, QoS
/// indicators, penalty flags), the target must stay feasible for the mover,
/// and the three involved parties -- the buyer, the losing service point and
/// the gaining one -- must all be weakly better off with at least one strict
/// improvement.
pub fn evaluate_swap(
    proposal: &SwapProposal,
    matching: &Matching,
    state: &MarketState,
    env: &MarketEnv,
) -> Result<SwapDecision> {
    if matching.seller_of(proposal.buyer) != proposal.from {
        return Err(Error::Domain {
            op: "evaluate_swap",
            message: format!(
                "buyer {} is not matched to {}",
                proposal.buyer, proposal.from
            ),
        });
    }
    if proposal.from == proposal.to {
        return Err(Error::Domain {
            op: "evaluate_swap",
            message: "swap endpoints must differ".into(),
        });
    }

    let before = assess(env, matching, state)?;
    let moved = matching.with(proposal.buyer, proposal.to);
    let after = assess(env, &moved, state)?;

    let buyer_delta = (
        before.buyer_utility(proposal.buyer),
        after.buyer_utility(proposal.buyer),
    );
    let from_delta = (
        before.seller_utility(proposal.from),
        after.seller_utility(proposal.from),
    );
    let to_delta = (
        before.seller_utility(proposal.to),
        after.seller_utility(proposal.to),
    );
    let mut decision = SwapDecision {
        proposal: *proposal,
        approved: false,
        reject_reason: None,
        buyer_delta,
        from_delta,
        to_delta,
    };

    if !after.snapshots[&proposal.buyer].beta {
        decision.reject_reason = Some(RejectReason::TargetInfeasible);
        return Ok(decision);
    }
    if !proposal.to.is_bs() && after.seller_phi[&proposal.to] {
        decision.reject_reason = Some(RejectReason::TargetCapExceeded);
        return Ok(decision);
    }

    let votes = [
        ("buyer", buyer_delta),
        ("from", from_delta),
        ("to", to_delta),
    ];
    for (party, (pre, post)) in votes {
        if post < pre - VOTE_TOL {
            decision.reject_reason = Some(RejectReason::PartyHarmed {
                party: party.to_string(),
                before: pre,
                after: post,
            });
            return Ok(decision);
        }
    }
    let strictly_better = votes.iter().any(|(_, (pre, post))| *post > pre + VOTE_TOL);
    if !strictly_better {
        decision.reject_reason = Some(RejectReason::NoStrictImprovement);
        return Ok(decision);
    }

    decision.approved = true;
    Ok(decision)
}

/// Applies an approved relocation, leaving every other assignment intact.
pub fn apply_swap(proposal: &SwapProposal, matching: &Matching) -> Matching {
    matching.with(proposal.buyer, proposal.to)
}

/// Exhaustive stability report at the given prices.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub stable: bool,
    pub blocking: Vec<SwapProposal>,
}

/// Tries every relocation of every buyer; the matching is stable iff none
/// is approved.
pub fn is_stable(
    matching: &Matching,
    state: &MarketState,
    env: &MarketEnv,
) -> Result<StabilityReport> {
    let mut blocking = Vec::new();
    let mut targets = vec![SellerId::BS];
    targets.extend(env.scenario.sellers.iter().map(|s| s.id));
    for buyer in &env.scenario.buyers {
        let from = matching.seller_of(buyer.id);
        for &to in &targets {
            if to == from {
                continue;
            }
            let proposal = SwapProposal {
                buyer: buyer.id,
                from,
                to,
            };
            if evaluate_swap(&proposal, matching, state, env)?.approved {
                blocking.push(proposal);
            }
        }
    }
    Ok(StabilityReport {
        stable: blocking.is_empty(),
        blocking,
    })
}

/// Hard size guard of the enumeration oracle.
pub const ORACLE_MAX_BUYERS: usize = 6;
pub const ORACLE_MAX_SELLERS: usize = 3;

/// One enumerated assignment with its welfare and flags.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleEntry {
    pub matching: Matching,
    /// Mean penalty-modified buyer utility.
    pub avg_buyer_utility: f64,
    /// Seller-cap feasibility (the admission rule of the game).
    pub feasible: bool,
    pub stable: bool,
}

/// Enumerates every assignment of buyers to service points, recording cap
/// feasibility, welfare, and swap stability at the given prices. Refuses
/// instances beyond 6 buyers x 3 sellers.
pub fn enumerate_matchings_oracle(
    scenario: &Scenario,
    state: &MarketState,
) -> Result<Vec<OracleEntry>> {
    let n_buyers = scenario.buyers.len();
    let n_sellers = scenario.sellers.len();
    if n_buyers > ORACLE_MAX_BUYERS || n_sellers > ORACLE_MAX_SELLERS {
        return Err(Error::SizeGuard {
            buyers: n_buyers,
            sellers: n_sellers,
            max_buyers: ORACLE_MAX_BUYERS,
            max_sellers: ORACLE_MAX_SELLERS,
        });
    }
    let env = MarketEnv::new(scenario);
    let options = n_sellers + 1;
    let total = options.pow(n_buyers as u32);
    let mut entries = Vec::with_capacity(total);
    for index in 0..total {
        let mut code = index;
        let mut assignment = BTreeMap::new();
        for buyer in &scenario.buyers {
            let digit = code % options;
            code /= options;
            let seller = if digit == 0 {
                SellerId::BS
            } else {
                scenario.sellers[digit - 1].id
            };
            assignment.insert(buyer.id, seller);
        }
        let matching = Matching::from_assignment(assignment);
        let assessment = assess(&env, &matching, state)?;
        let feasible = assessment.seller_phi.values().all(|phi| !phi);
        let avg_buyer_utility = assessment
            .snapshots
            .values()
            .map(|s| s.utility)
            .sum::<f64>()
            / n_buyers as f64;
        let stable = is_stable(&matching, state, &env)?.stable;
        entries.push(OracleEntry {
            matching,
            avg_buyer_utility,
            feasible,
            stable,
        });
    }
    Ok(entries)
}

/// The oracle's stable set: feasible, swap-stable assignments.
pub fn stable_set(entries: &[OracleEntry]) -> Vec<&OracleEntry> {
    entries.iter().filter(|e| e.feasible && e.stable).collect()
}
