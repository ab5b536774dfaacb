//! Full two-stage trading runs, the comparison baselines, and Monte Carlo
//! experiment drivers that emit figure data as CSV.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::economics::{self, DemandParams, SupplyParams, TradeTerms};
use crate::error::{Error, Result};
use crate::matching::{
    self, assess, buyer_preference_list, evaluate_swap, pair_snapshot, MarketEnv, Matching,
    MatchingAssessment, SwapProposal, ORACLE_MAX_BUYERS, ORACLE_MAX_SELLERS,
};
use crate::pricing::{
    solve_equilibrium_price, DemandSide, MarketState, SupplySide, TatonnementConfig,
};
use crate::scenario::{
    generate_scenario, BuyerId, Scenario, ScenarioParams, SellerId, UtilityParams,
};

/// Float tolerance shared with the swap votes.
const VOTE_TOL: f64 = 1e-9;

/// Final quoted price of one matched pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairPrice {
    pub buyer: BuyerId,
    pub seller: SellerId,
    pub price: f64,
}

/// Per-run outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    /// Mean penalty-modified buyer utility.
    pub avg_buyer_utility: f64,
    /// Mean penalty-modified seller utility (sellers only, not the BS).
    pub avg_seller_utility: f64,
    /// Buyers assigned to the macro cell.
    pub n_buyers_at_bs: usize,
    /// Operator overage income.
    pub wsp_revenue_bs: f64,
    /// Operator UPN share minus rewards paid.
    pub wsp_revenue_upn: f64,
    /// Swap rounds executed (the final quiescent round included).
    pub stage1_iterations: usize,
    /// Total price-adjustment steps across all solves.
    pub stage2_iterations: usize,
    /// QoS-gated volume moved through the UPN, GB.
    pub total_volume_traded: f64,
    /// Mean quoted price over matched UPN pairs (0 when there are none).
    pub mean_trade_price: f64,
    pub final_prices: Vec<PairPrice>,
}

/// Matching plus per-seller prices after one round, kept so tests can check
/// that the walk never revisits a state.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub round: usize,
    pub swaps_applied: usize,
    pub matching: Matching,
    /// Per-seller quotes after the round's repricing.
    pub seller_prices: Vec<(SellerId, f64)>,
}

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct TradingOutcome {
    pub matching: Matching,
    pub market: MarketState,
    pub metrics: RunMetrics,
    pub rounds: Vec<RoundRecord>,
}

/// Runs the two-stage trading algorithm: price the current associations,
/// let buyers relocate while every involved party agrees, and repeat until
/// a full pass applies no swap. The returned matching is swap-stable at the
/// returned prices.
pub fn run_data_trading(scenario: &Scenario) -> Result<TradingOutcome> {
    scenario.validate()?;
    let env = MarketEnv::new(scenario);
    let mut state = MarketState::new(scenario);
    let mut matching = initial_association(&env, &state)?;

    let mut rounds: Vec<RoundRecord> = Vec::new();
    let mut stage2_iterations = 0usize;
    let mut total_swaps = 0usize;

    for round in 0..scenario.algo.max_swap_rounds {
        stage2_iterations += reprice(&env, &matching, &mut state)?;
        let swaps_applied = swap_pass(&env, &mut matching, &state)?;
        total_swaps += swaps_applied;
        rounds.push(RoundRecord {
            round,
            swaps_applied,
            matching: matching.clone(),
            seller_prices: seller_price_vector(scenario, &state),
        });
        if swaps_applied == 0 {
            let metrics =
                compute_metrics(&env, &matching, &state, rounds.len(), stage2_iterations)?;
            return Ok(TradingOutcome {
                matching,
                market: state,
                metrics,
                rounds,
            });
        }
    }

    Err(Error::CycleGuard {
        rounds: scenario.algo.max_swap_rounds,
        swaps_applied: total_swaps,
        matching: Box::new(matching),
        market: Box::new(state),
    })
}

fn seller_price_vector(scenario: &Scenario, state: &MarketState) -> Vec<(SellerId, f64)> {
    scenario
        .sellers
        .iter()
        .map(|s| {
            let price = scenario
                .buyers
                .first()
                .map(|b| state.price_of(b.id, s.id))
                .unwrap_or(0.0);
            (s.id, price)
        })
        .collect()
}

/// Buyer-seller discovery and association: every buyer works down its
/// preference list (built with no UPN load or interference), sellers admit
/// the proposers they value most within their leftover caps, and everyone
/// still unplaced falls back to the macro cell.
fn initial_association(env: &MarketEnv, state: &MarketState) -> Result<Matching> {
    let scenario = env.scenario;
    let screen = Matching::all_at_bs(scenario);

    // candidate queues, best first
    let mut queues: BTreeMap<BuyerId, Vec<SellerId>> = BTreeMap::new();
    for buyer in &scenario.buyers {
        let prefs = buyer_preference_list(buyer.id, &screen, state, env)?;
        queues.insert(buyer.id, prefs.iter().map(|(id, _)| *id).collect());
    }

    let mut remaining_cap: BTreeMap<SellerId, f64> = scenario
        .sellers
        .iter()
        .map(|s| (s.id, s.initial_cap))
        .collect();
    let mut placed: BTreeMap<BuyerId, SellerId> = BTreeMap::new();
    let mut cursor: BTreeMap<BuyerId, usize> =
        scenario.buyers.iter().map(|b| (b.id, 0usize)).collect();

    while placed.len() < scenario.buyers.len() {
        // gather this round's proposals
        let mut proposals: BTreeMap<SellerId, Vec<BuyerId>> = BTreeMap::new();
        let mut proposed_any = false;
        for buyer in &scenario.buyers {
            if placed.contains_key(&buyer.id) {
                continue;
            }
            let queue = &queues[&buyer.id];
            let at = cursor[&buyer.id];
            match queue.get(at) {
                Some(seller) if seller.is_bs() => {
                    placed.insert(buyer.id, SellerId::BS);
                }
                Some(seller) => {
                    proposals.entry(*seller).or_default().push(buyer.id);
                    proposed_any = true;
                }
                None => {
                    placed.insert(buyer.id, SellerId::BS);
                }
            }
        }
        if !proposed_any {
            continue;
        }
        for (seller, proposers) in proposals {
            // rank by the seller's own stake, ties to the lower buyer id
            let mut ranked = Vec::new();
            for buyer in proposers {
                let snap = pair_snapshot(env, &screen, state, buyer, seller)?;
                ranked.push((buyer, snap));
            }
            ranked.sort_by(|a, b| {
                b.1.seller_term
                    .partial_cmp(&a.1.seller_term)
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(a.0.cmp(&b.0))
            });
            let cap = remaining_cap.get_mut(&seller).expect("seller cap");
            for (buyer, snap) in ranked {
                let volume = if snap.beta { snap.volume } else { 0.0 };
                if volume <= *cap + 1e-9 {
                    *cap -= volume;
                    placed.insert(buyer, seller);
                } else {
                    // rejected: move on to the next candidate
                    *cursor.get_mut(&buyer).unwrap() += 1;
                }
            }
        }
    }

    Ok(Matching::from_assignment(placed))
}

/// Stage 2: re-solve the per-UPN equilibrium price of every seller that
/// currently carries QoS-satisfied buyers, quoting the result to all of the
/// seller's pairs. Returns the total number of price steps taken.
fn reprice(env: &MarketEnv, matching: &Matching, state: &mut MarketState) -> Result<usize> {
    let scenario = env.scenario;
    let assessment = assess(env, matching, state)?;
    let mut iterations = 0usize;
    for seller in &scenario.sellers {
        let members: Vec<&matching::PairSnapshot> = assessment
            .snapshots
            .values()
            .filter(|snap| snap.seller == seller.id && snap.beta)
            .collect();
        if members.is_empty() {
            continue;
        }
        let demands: Vec<DemandSide> = members
            .iter()
            .map(|snap| DemandSide {
                params: DemandParams::from(scenario.buyer(snap.buyer)),
                psi: snap.psi,
            })
            .collect();
        let supplies = [SupplySide {
            params: SupplyParams::from(seller),
            phi: assessment.seller_phi[&seller.id],
        }];
        let config = TatonnementConfig {
            initial_price: state.price_of(members[0].buyer, seller.id),
            epsilon: scenario.algo.price_epsilon,
            ..Default::default()
        };
        let eq = solve_equilibrium_price(&demands, &supplies, &scenario.market, &config)?;
        state.set_seller_price(seller.id, eq.price);
        for snap in &members {
            let demand = economics::buyer_demand(
                scenario.buyer(snap.buyer),
                eq.price,
                snap.psi,
                &scenario.market,
            )?;
            state.record_eval(snap.buyer, seller.id, demand, eq.supply);
        }
        state.record_trace(seller.id, eq.trace.clone());
        iterations += eq.iterations;
    }
    Ok(iterations)
}

/// One swap round: buyers are visited in id order; each walks its current
/// preference list and takes the first relocation every involved party
/// approves. Returns the number of applied swaps; a zero means no approving
/// swap exists anywhere at these prices.
fn swap_pass(env: &MarketEnv, matching: &mut Matching, state: &MarketState) -> Result<usize> {
    let scenario = env.scenario;
    let mut applied = 0usize;
    for buyer in &scenario.buyers {
        let current = matching.seller_of(buyer.id);
        let current_utility = pair_snapshot(env, matching, state, buyer.id, current)?.utility;
        let prefs = buyer_preference_list(buyer.id, matching, state, env)?;
        for (candidate, snap) in prefs {
            if candidate == current {
                continue;
            }
            // a relocation the buyer loses from can never be approved
            if snap.utility < current_utility - VOTE_TOL {
                continue;
            }
            let proposal = SwapProposal {
                buyer: buyer.id,
                from: current,
                to: candidate,
            };
            let decision = evaluate_swap(&proposal, matching, state, env)?;
            if decision.approved {
                *matching = matching.with(buyer.id, candidate);
                applied += 1;
                break;
            }
        }
    }
    Ok(applied)
}

fn compute_metrics(
    env: &MarketEnv,
    matching: &Matching,
    state: &MarketState,
    stage1_iterations: usize,
    stage2_iterations: usize,
) -> Result<RunMetrics> {
    let scenario = env.scenario;
    let assessment = assess(env, matching, state)?;
    let n_buyers = scenario.buyers.len() as f64;
    let avg_buyer_utility = assessment
        .snapshots
        .values()
        .map(|s| s.utility)
        .sum::<f64>()
        / n_buyers;
    let avg_seller_utility = if scenario.sellers.is_empty() {
        0.0
    } else {
        scenario
            .sellers
            .iter()
            .map(|s| assessment.seller_utility(s.id))
            .sum::<f64>()
            / scenario.sellers.len() as f64
    };

    let terms = trade_terms(&assessment);
    let revenue = economics::wsp_revenue(matching, &terms, scenario);

    let mut total_volume = 0.0;
    let mut price_sum = 0.0;
    let mut trade_count = 0usize;
    let mut final_prices = Vec::new();
    for snap in assessment.snapshots.values() {
        if snap.seller.is_bs() {
            continue;
        }
        final_prices.push(PairPrice {
            buyer: snap.buyer,
            seller: snap.seller,
            price: snap.price,
        });
        if snap.beta {
            total_volume += snap.volume;
            price_sum += snap.price;
            trade_count += 1;
        }
    }
    let mean_trade_price = if trade_count > 0 {
        price_sum / trade_count as f64
    } else {
        0.0
    };

    Ok(RunMetrics {
        avg_buyer_utility,
        avg_seller_utility,
        n_buyers_at_bs: matching.n_at_bs(),
        wsp_revenue_bs: revenue.bs,
        wsp_revenue_upn: revenue.upn,
        stage1_iterations,
        stage2_iterations,
        total_volume_traded: total_volume,
        mean_trade_price,
        final_prices,
    })
}

/// QoS-gated trade terms of every assigned pair.
fn trade_terms(assessment: &MatchingAssessment) -> Vec<TradeTerms> {
    assessment
        .snapshots
        .values()
        .map(|snap| TradeTerms {
            buyer_id: snap.buyer,
            seller_id: snap.seller,
            volume: if snap.beta { snap.volume } else { 0.0 },
            price: snap.price,
            duration: 0.0,
        })
        .collect()
}

/// Feasible service points of one buyer screened with no UPN load or
/// interference: the macro cell when its QoS holds, plus every
/// QoS-satisfying seller.
fn screened_options(
    env: &MarketEnv,
    state: &MarketState,
    buyer: BuyerId,
) -> Result<Vec<(SellerId, f64)>> {
    let screen = Matching::all_at_bs(env.scenario);
    let mut options = Vec::new();
    for (seller, snap) in buyer_preference_list(buyer, &screen, state, env)? {
        options.push((seller, if snap.beta { snap.volume } else { 0.0 }));
    }
    Ok(options)
}

/// Uniform-random association baseline: every buyer picks uniformly among
/// its feasible options (macro cell included), sellers fill up first come
/// first served in buyer id order, and prices are then solved once on the
/// resulting matching.
pub fn random_matching_baseline(scenario: &Scenario, seed: u64) -> Result<TradingOutcome> {
    scenario.validate()?;
    let env = MarketEnv::new(scenario);
    let mut state = MarketState::new(scenario);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut remaining_cap: BTreeMap<SellerId, f64> = scenario
        .sellers
        .iter()
        .map(|s| (s.id, s.initial_cap))
        .collect();
    let mut matching = Matching::all_at_bs(scenario);
    for buyer in &scenario.buyers {
        let mut options: Vec<SellerId> = Vec::new();
        for (seller, volume) in screened_options(&env, &state, buyer.id)? {
            if seller.is_bs() || volume <= remaining_cap[&seller] + 1e-9 {
                options.push(seller);
            }
        }
        if options.is_empty() {
            continue; // stays on the macro cell
        }
        let pick = options[rng.gen_range(0..options.len())];
        if !pick.is_bs() {
            let volume = screened_options(&env, &state, buyer.id)?
                .iter()
                .find(|(s, _)| *s == pick)
                .map(|(_, v)| *v)
                .unwrap_or(0.0);
            *remaining_cap.get_mut(&pick).unwrap() -= volume;
        }
        matching.assign(buyer.id, pick);
    }

    let stage2_iterations = reprice(&env, &matching, &mut state)?;
    let metrics = compute_metrics(&env, &matching, &state, 0, stage2_iterations)?;
    Ok(TradingOutcome {
        matching,
        market: state,
        metrics,
        rounds: Vec::new(),
    })
}

/// Buyer-welfare-minimizing baseline. Small instances are solved exactly by
/// enumerating every option-respecting, cap-feasible assignment; larger
/// ones use a greedy seed refined by welfare-descent relocations (the
/// approximation is documented in the experiment metadata).
pub fn worst_case_baseline(scenario: &Scenario) -> Result<TradingOutcome> {
    scenario.validate()?;
    let env = MarketEnv::new(scenario);
    let mut state = MarketState::new(scenario);

    let exact = scenario.buyers.len() <= ORACLE_MAX_BUYERS
        && scenario.sellers.len() <= ORACLE_MAX_SELLERS;
    let matching = if exact {
        worst_exact(&env, &state)?
    } else {
        let seed = worst_greedy(&env, &state)?;
        worst_descent(&env, &state, seed)?
    };

    let stage2_iterations = reprice(&env, &matching, &mut state)?;
    let metrics = compute_metrics(&env, &matching, &state, 0, stage2_iterations)?;
    Ok(TradingOutcome {
        matching,
        market: state,
        metrics,
        rounds: Vec::new(),
    })
}

/// Local search lowering total buyer welfare: every buyer is repeatedly
/// offered the single relocation (within its screened option set, cap
/// respected) that hurts the average the most, externality damage to
/// bystanders included, until no relocation lowers it further.
fn worst_descent(env: &MarketEnv, state: &MarketState, seed: Matching) -> Result<Matching> {
    let scenario = env.scenario;
    let mut matching = seed;
    let mut welfare = total_buyer_welfare(env, &matching, state)?;
    for _ in 0..scenario.buyers.len().max(8) {
        let mut changed = false;
        for buyer in &scenario.buyers {
            let current = matching.seller_of(buyer.id);
            let mut options = screened_options(env, state, buyer.id)?;
            if options.is_empty() {
                options.push((SellerId::BS, 0.0));
            }
            let mut best: Option<(f64, Matching)> = None;
            for (target, _) in options {
                if target == current {
                    continue;
                }
                let candidate = matching.with(buyer.id, target);
                let assessment = assess(env, &candidate, state)?;
                if !target.is_bs() && assessment.seller_phi[&target] {
                    continue;
                }
                let candidate_welfare = assessment
                    .snapshots
                    .values()
                    .map(|s| s.utility)
                    .sum::<f64>();
                if candidate_welfare < welfare - 1e-9
                    && best.as_ref().is_none_or(|(w, _)| candidate_welfare < *w)
                {
                    best = Some((candidate_welfare, candidate));
                }
            }
            if let Some((w, next)) = best {
                matching = next;
                welfare = w;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    Ok(matching)
}

fn total_buyer_welfare(env: &MarketEnv, matching: &Matching, state: &MarketState) -> Result<f64> {
    Ok(assess(env, matching, state)?
        .snapshots
        .values()
        .map(|s| s.utility)
        .sum())
}


fn worst_exact(env: &MarketEnv, state: &MarketState) -> Result<Matching> {
    let scenario = env.scenario;
    let mut per_buyer_options: Vec<(BuyerId, Vec<SellerId>)> = Vec::new();
    for buyer in &scenario.buyers {
        let mut options: Vec<SellerId> = screened_options(env, state, buyer.id)?
            .iter()
            .map(|(s, _)| *s)
            .collect();
        if options.is_empty() {
            options.push(SellerId::BS);
        }
        per_buyer_options.push((buyer.id, options));
    }

    let mut best: Option<(f64, Matching)> = None;
    let mut indices = vec![0usize; per_buyer_options.len()];
    loop {
        let assignment: BTreeMap<BuyerId, SellerId> = per_buyer_options
            .iter()
            .zip(&indices)
            .map(|((b, opts), i)| (*b, opts[*i]))
            .collect();
        let candidate = Matching::from_assignment(assignment);
        let assessment = assess(env, &candidate, state)?;
        let feasible = assessment.seller_phi.values().all(|phi| !phi);
        if feasible {
            let welfare = assessment
                .snapshots
                .values()
                .map(|s| s.utility)
                .sum::<f64>()
                / scenario.buyers.len() as f64;
            if best.as_ref().is_none_or(|(w, _)| welfare < *w) {
                best = Some((welfare, candidate));
            }
        }
        // advance the mixed-radix counter
        let mut pos = 0;
        loop {
            if pos == indices.len() {
                let (_, matching) = best.expect("all-BS assignment is always feasible");
                return Ok(matching);
            }
            indices[pos] += 1;
            if indices[pos] < per_buyer_options[pos].1.len() {
                break;
            }
            indices[pos] = 0;
            pos += 1;
        }
    }
}

fn worst_greedy(env: &MarketEnv, state: &MarketState) -> Result<Matching> {
    let scenario = env.scenario;
    let mut remaining_cap: BTreeMap<SellerId, f64> = scenario
        .sellers
        .iter()
        .map(|s| (s.id, s.initial_cap))
        .collect();
    let mut matching = Matching::all_at_bs(scenario);
    for buyer in &scenario.buyers {
        // options come from the screening pass; utilities are read off the
        // partially built matching so the externalities already placed are
        // felt (an option that has already gone dead is a valid pick here)
        let mut worst: Option<(f64, SellerId, f64)> = None;
        for (seller, _) in screened_options(env, state, buyer.id)? {
            let snap = pair_snapshot(env, &matching, state, buyer.id, seller)?;
            let volume = if snap.beta { snap.volume } else { 0.0 };
            if !seller.is_bs() && volume > remaining_cap[&seller] + 1e-9 {
                continue;
            }
            if worst.as_ref().is_none_or(|(u, _, _)| snap.utility < *u) {
                worst = Some((snap.utility, seller, volume));
            }
        }
        if let Some((_, seller, volume)) = worst {
            if !seller.is_bs() {
                *remaining_cap.get_mut(&seller).unwrap() -= volume;
            }
            matching.assign(buyer.id, seller);
        }
    }
    Ok(matching)
}

/// Association method under comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Proposed,
    Random,
    Worst,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Method::Proposed => write!(f, "proposed"),
            Method::Random => write!(f, "random"),
            Method::Worst => write!(f, "worst"),
        }
    }
}

/// Variable swept across levels by a Monte Carlo experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    /// Target service range in meters; realized by setting every buyer's
    /// SINR minimum to the level a link of that length reaches.
    TransmissionRangeM,
    /// Probability of exceeding the monthly cap.
    ExceedProb,
    /// Buyer count.
    NBuyers,
    /// Seller count.
    NSellers,
    /// Multiplier on the macro overage price.
    MacroPriceFactor,
}

impl std::fmt::Display for SweepVariable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            SweepVariable::TransmissionRangeM => "transmission_range_m",
            SweepVariable::ExceedProb => "exceed_prob",
            SweepVariable::NBuyers => "n_buyers",
            SweepVariable::NSellers => "n_sellers",
            SweepVariable::MacroPriceFactor => "macro_price_factor",
        };
        write!(f, "{name}")
    }
}

/// Monte Carlo experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloSpec {
    pub name: String,
    /// Free-form notes; used to flag synthetic parameter choices.
    #[serde(default)]
    pub comment: String,
    pub runs: usize,
    pub base_seed: u64,
    pub n_buyers: usize,
    pub n_sellers: usize,
    pub methods: Vec<Method>,
    pub variable: SweepVariable,
    pub levels: Vec<f64>,
    #[serde(default)]
    pub params: ScenarioParams,
}

/// Mean or standard deviation of the numeric run metrics.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricsAggregate {
    pub avg_buyer_utility: f64,
    pub avg_seller_utility: f64,
    pub n_buyers_at_bs: f64,
    pub wsp_revenue_bs: f64,
    pub wsp_revenue_upn: f64,
    pub stage1_iterations: f64,
    pub stage2_iterations: f64,
    pub total_volume_traded: f64,
    pub mean_trade_price: f64,
}

impl MetricsAggregate {
    fn from_metrics(m: &RunMetrics) -> Self {
        MetricsAggregate {
            avg_buyer_utility: m.avg_buyer_utility,
            avg_seller_utility: m.avg_seller_utility,
            n_buyers_at_bs: m.n_buyers_at_bs as f64,
            wsp_revenue_bs: m.wsp_revenue_bs,
            wsp_revenue_upn: m.wsp_revenue_upn,
            stage1_iterations: m.stage1_iterations as f64,
            stage2_iterations: m.stage2_iterations as f64,
            total_volume_traded: m.total_volume_traded,
            mean_trade_price: m.mean_trade_price,
        }
    }

    fn fields(&self) -> [f64; 9] {
        [
            self.avg_buyer_utility,
            self.avg_seller_utility,
            self.n_buyers_at_bs,
            self.wsp_revenue_bs,
            self.wsp_revenue_upn,
            self.stage1_iterations,
            self.stage2_iterations,
            self.total_volume_traded,
            self.mean_trade_price,
        ]
    }

    fn from_fields(fields: [f64; 9]) -> Self {
        MetricsAggregate {
            avg_buyer_utility: fields[0],
            avg_seller_utility: fields[1],
            n_buyers_at_bs: fields[2],
            wsp_revenue_bs: fields[3],
            wsp_revenue_upn: fields[4],
            stage1_iterations: fields[5],
            stage2_iterations: fields[6],
            total_volume_traded: fields[7],
            mean_trade_price: fields[8],
        }
    }

    pub const FIELD_NAMES: [&'static str; 9] = [
        "avg_buyer_utility",
        "avg_seller_utility",
        "n_buyers_at_bs",
        "wsp_revenue_bs",
        "wsp_revenue_upn",
        "stage1_iterations",
        "stage2_iterations",
        "total_volume_traded",
        "mean_trade_price",
    ];
}

/// Aggregated result of one (level, method) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelResult {
    pub variable: String,
    pub level: f64,
    pub method: Method,
    pub runs_ok: usize,
    pub runs_failed: usize,
    pub mean: MetricsAggregate,
    pub std: MetricsAggregate,
}

/// SINR a link of length `range_m` reaches under the scenario constants;
/// setting a buyer's minimum to this value makes the QoS radius equal the
/// target range.
pub fn min_sinr_for_range(params: &ScenarioParams, range_m: f64) -> f64 {
    let gain = range_m.max(1.0).powf(-params.path_loss_exponent);
    params.tx_power * gain / (params.noise_psd * params.bandwidth_per_link)
}

fn scenario_for_level(spec: &MonteCarloSpec, level: f64, seed: u64) -> Result<Scenario> {
    let mut params = spec.params.clone();
    let mut n_buyers = spec.n_buyers;
    let mut n_sellers = spec.n_sellers;
    match spec.variable {
        SweepVariable::ExceedProb => params.exceed_prob = level,
        SweepVariable::NBuyers => n_buyers = level as usize,
        SweepVariable::NSellers => n_sellers = level as usize,
        SweepVariable::MacroPriceFactor => params.overage_price_p *= level,
        SweepVariable::TransmissionRangeM => {}
    }
    let mut scenario = generate_scenario(seed, n_buyers, n_sellers, &params)?;
    if spec.variable == SweepVariable::TransmissionRangeM {
        let min_sinr = min_sinr_for_range(&params, level);
        for buyer in &mut scenario.buyers {
            buyer.min_sinr = min_sinr;
        }
    }
    Ok(scenario)
}

fn run_method(scenario: &Scenario, method: Method, seed: u64) -> Result<TradingOutcome> {
    match method {
        Method::Proposed => run_data_trading(scenario),
        // decorrelate the baseline's coin flips from the placement draw
        Method::Random => random_matching_baseline(scenario, seed ^ 0x5eed_cafe),
        Method::Worst => worst_case_baseline(scenario),
    }
}

/// Runs `spec.runs` seeded scenarios per level, executes every requested
/// method on each, and averages the metrics. Failures are excluded from the
/// means and counted per cell. Output order is deterministic: levels in
/// listed order, methods in listed order.
pub fn monte_carlo(spec: &MonteCarloSpec) -> Result<Vec<LevelResult>> {
    if spec.runs == 0 {
        return Err(Error::validation("runs", "must be >= 1"));
    }
    let mut results = Vec::new();
    for &level in &spec.levels {
        for &method in &spec.methods {
            let mut samples: Vec<MetricsAggregate> = Vec::new();
            let mut failed = 0usize;
            for run in 0..spec.runs {
                let seed = spec.base_seed.wrapping_add(run as u64);
                let scenario = scenario_for_level(spec, level, seed)?;
                match run_method(&scenario, method, seed) {
                    Ok(outcome) => samples.push(MetricsAggregate::from_metrics(&outcome.metrics)),
                    Err(_) => failed += 1,
                }
            }
            let (mean, std) = aggregate(&samples);
            results.push(LevelResult {
                variable: spec.variable.to_string(),
                level,
                method,
                runs_ok: samples.len(),
                runs_failed: failed,
                mean,
                std,
            });
        }
    }
    Ok(results)
}

fn aggregate(samples: &[MetricsAggregate]) -> (MetricsAggregate, MetricsAggregate) {
    if samples.is_empty() {
        return (MetricsAggregate::default(), MetricsAggregate::default());
    }
    let n = samples.len() as f64;
    let mut mean = [0.0; 9];
    for sample in samples {
        for (acc, v) in mean.iter_mut().zip(sample.fields()) {
            *acc += v;
        }
    }
    for acc in mean.iter_mut() {
        *acc /= n;
    }
    let mut var = [0.0; 9];
    for sample in samples {
        for ((acc, v), m) in var.iter_mut().zip(sample.fields()).zip(mean) {
            *acc += (v - m) * (v - m);
        }
    }
    for acc in var.iter_mut() {
        *acc = (*acc / n).sqrt();
    }
    (
        MetricsAggregate::from_fields(mean),
        MetricsAggregate::from_fields(var),
    )
}

/// CSV dump of Monte Carlo results: one row per (level, method).
pub fn level_results_csv(results: &[LevelResult]) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    let mut header = vec![
        "variable".to_string(),
        "level".to_string(),
        "method".to_string(),
        "runs_ok".to_string(),
        "runs_failed".to_string(),
    ];
    for name in MetricsAggregate::FIELD_NAMES {
        header.push(format!("mean_{name}"));
    }
    for name in MetricsAggregate::FIELD_NAMES {
        header.push(format!("std_{name}"));
    }
    writer.write_record(&header)?;
    for r in results {
        let mut row = vec![
            r.variable.clone(),
            r.level.to_string(),
            r.method.to_string(),
            r.runs_ok.to_string(),
            r.runs_failed.to_string(),
        ];
        for v in r.mean.fields() {
            row.push(v.to_string());
        }
        for v in r.std.fields() {
            row.push(v.to_string());
        }
        writer.write_record(&row)?;
    }
    Ok(String::from_utf8(
        writer
            .into_inner()
            .map_err(|e| std::io::Error::other(e.to_string()))?,
    )
    .expect("csv output is utf-8"))
}

/// Synthetic equilibrium-price grid: `n_b` identical buyers against `n_s`
/// identical sellers per cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceGridSpec {
    pub name: String,
    #[serde(default)]
    pub comment: String,
    pub n_buyers_levels: Vec<usize>,
    pub n_sellers_levels: Vec<usize>,
    pub buyer_theta: f64,
    pub buyer_alpha: f64,
    pub buyer_exceed_prob: f64,
    pub buyer_initial_cap: f64,
    pub seller_theta: f64,
    pub seller_alpha: f64,
    pub seller_initial_cap: f64,
    pub reward_r: f64,
    pub energy_cost_xi: f64,
    pub initial_price: f64,
    pub epsilon: f64,
}

/// One cell of the price grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub n_buyers: usize,
    pub n_sellers: usize,
    pub price: f64,
    pub demand: f64,
    pub supply: f64,
    pub iterations: usize,
}

/// Solves the equilibrium price for every (n_b, n_s) cell of the grid.
pub fn price_grid(spec: &PriceGridSpec) -> Result<Vec<GridResult>> {
    let market = crate::scenario::MarketConstants {
        overage_price_p: 1.0,
        reward_r: spec.reward_r,
        energy_cost_xi: spec.energy_cost_xi,
        operator_share_v: 0.0,
        penalty_kappa: 0.0,
        penalty_rho: 0.0,
        penalty_kappa_bs: 0.0,
        penalty_kappa_upn: 0.0,
    };
    let demand = DemandSide {
        params: DemandParams {
            utility: UtilityParams::new(spec.buyer_theta, spec.buyer_alpha),
            exceed_prob: spec.buyer_exceed_prob,
            initial_cap: spec.buyer_initial_cap,
        },
        psi: false,
    };
    let supply = SupplySide {
        params: SupplyParams {
            utility: UtilityParams::new(spec.seller_theta, spec.seller_alpha),
            initial_cap: spec.seller_initial_cap,
        },
        phi: false,
    };
    let mut results = Vec::new();
    for &n_s in &spec.n_sellers_levels {
        for &n_b in &spec.n_buyers_levels {
            let demands = vec![demand; n_b];
            let supplies = vec![supply; n_s];
            let config = TatonnementConfig {
                initial_price: spec.initial_price,
                epsilon: spec.epsilon,
                ..Default::default()
            };
            let eq = solve_equilibrium_price(&demands, &supplies, &market, &config)?;
            results.push(GridResult {
                n_buyers: n_b,
                n_sellers: n_s,
                price: eq.price,
                demand: eq.demand,
                supply: eq.supply,
                iterations: eq.iterations,
            });
        }
    }
    Ok(results)
}

/// CSV dump of a price grid.
pub fn grid_results_csv(results: &[GridResult]) -> Result<String> {
    let mut out = String::from("n_buyers,n_sellers,price,demand,supply,iterations\n");
    for r in results {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.n_buyers, r.n_sellers, r.price, r.demand, r.supply, r.iterations
        ));
    }
    Ok(out)
}

/// An experiment file: either a Monte Carlo sweep or a price grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExperimentSpec {
    MonteCarlo(Box<MonteCarloSpec>),
    PriceGrid(Box<PriceGridSpec>),
}

impl ExperimentSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn name(&self) -> &str {
        match self {
            ExperimentSpec::MonteCarlo(s) => &s.name,
            ExperimentSpec::PriceGrid(s) => &s.name,
        }
    }
}
