//! Property tests for the model invariants.

use proptest::prelude::*;

use upn_market::economics::{
    buyer_utility_upn, demand_curve, modified_buyer_utility, supply_curve, DemandParams,
    SupplyParams, TradeTerms,
};
use upn_market::harness::run_data_trading;
use upn_market::matching::Matching;
use upn_market::pricing::{
    solve_equilibrium_price, DemandSide, MarketState, SupplySide, TatonnementConfig,
};
use upn_market::radio;
use upn_market::scenario::{
    generate_scenario, BuyerId, MarketConstants, ScenarioParams, SellerId, UtilityParams,
};

fn live_params() -> ScenarioParams {
    ScenarioParams {
        noise_psd: 5e-17,
        bandwidth_per_link: 2e7,
        ..ScenarioParams::default()
    }
}

fn market(reward_r: f64, energy_cost_xi: f64) -> MarketConstants {
    MarketConstants {
        overage_price_p: 1.0,
        reward_r,
        energy_cost_xi,
        operator_share_v: 0.2,
        penalty_kappa: 0.5,
        penalty_rho: 0.5,
        penalty_kappa_bs: 0.5,
        penalty_kappa_upn: 0.5,
    }
}

/// Random matching over a generated scenario: each buyer lands on the BS or
/// one of the sellers.
fn arbitrary_matching(seed: u64, picks: &[u8]) -> (upn_market::Scenario, Matching) {
    let n_sellers = 2usize;
    let scenario = generate_scenario(seed, picks.len(), n_sellers, &live_params()).unwrap();
    let mut matching = Matching::all_at_bs(&scenario);
    for (i, pick) in picks.iter().enumerate() {
        let target = (*pick as usize) % (n_sellers + 1);
        if target > 0 {
            matching.assign(BuyerId(i as u32 + 1), SellerId(target as u32));
        }
    }
    (scenario, matching)
}

proptest! {
    /// Capacity never decreases in SINR or bandwidth.
    #[test]
    fn capacity_is_monotone(
        w1 in 0.0..1e8f64, w2 in 0.0..1e8f64,
        s1 in 0.0..1e6f64, s2 in 0.0..1e6f64,
    ) {
        let (w_lo, w_hi) = if w1 <= w2 { (w1, w2) } else { (w2, w1) };
        let (s_lo, s_hi) = if s1 <= s2 { (s1, s2) } else { (s2, s1) };
        prop_assert!(radio::link_capacity(w_lo, s_lo) <= radio::link_capacity(w_lo, s_hi));
        prop_assert!(radio::link_capacity(w_lo, s_lo) <= radio::link_capacity(w_hi, s_lo));
    }

    /// The interference sum over the matching equals an independent sum over
    /// the 0/1 trading matrix.
    #[test]
    fn interference_matches_trading_matrix_sum(
        seed in 0u64..500,
        picks in proptest::collection::vec(0u8..3, 2..5),
    ) {
        let (scenario, matching) = arbitrary_matching(seed, &picks);
        let matrix = matching.trading_matrix(&scenario);
        for victim in &scenario.buyers {
            for seller in &scenario.sellers {
                let fast = radio::interference_at(victim.id, seller.id, &matching, &scenario);
                // oracle: walk the matrix, row by row
                let mut slow = 0.0;
                for (row, other) in matrix.iter().zip(&scenario.buyers) {
                    if other.id == victim.id {
                        continue;
                    }
                    for (col, cell) in row.iter().enumerate() {
                        if *cell == 0 || col == 0 {
                            continue;
                        }
                        let assigned = scenario.sellers[col - 1].id;
                        if assigned == seller.id {
                            continue;
                        }
                        slow += other.tx_power
                            * radio::channel_gain(
                                &other.position,
                                &scenario.seller(seller.id).position,
                                scenario.radio.path_loss_exponent,
                            );
                    }
                }
                prop_assert!((fast - slow).abs() <= slow.abs() * 1e-12 + 1e-30);
            }
        }
    }

    /// Moving a buyer from the macro cell into any UPN never lowers the
    /// interference seen by any other pair.
    #[test]
    fn added_buyer_never_reduces_interference(
        seed in 0u64..500,
        picks in proptest::collection::vec(0u8..3, 3..6),
        joiner in 0usize..3,
        target in 1u32..3,
    ) {
        let (scenario, matching) = arbitrary_matching(seed, &picks);
        let joiner = BuyerId((joiner % picks.len()) as u32 + 1);
        prop_assume!(matching.seller_of(joiner).is_bs());
        let joined = matching.with(joiner, SellerId(target));
        for victim in &scenario.buyers {
            if victim.id == joiner {
                continue;
            }
            for seller in &scenario.sellers {
                let before = radio::interference_at(victim.id, seller.id, &matching, &scenario);
                let after = radio::interference_at(victim.id, seller.id, &joined, &scenario);
                prop_assert!(after >= before - 1e-30);
            }
        }
    }

    /// The QoS indicator only ever switches off as the requirements rise.
    #[test]
    fn qos_indicator_is_antitone_in_requirements(
        seed in 0u64..500,
        bump_sinr in 1.0..100.0f64,
        bump_duration in 1.0..1000.0f64,
    ) {
        let scenario = generate_scenario(seed, 2, 2, &live_params()).unwrap();
        let matching = Matching::all_at_bs(&scenario);
        for seller in [SellerId::BS, SellerId(1), SellerId(2)] {
            let before = radio::connectivity_indicator(BuyerId(1), seller, &matching, &scenario);
            let mut harder = scenario.clone();
            harder.buyers[0].min_sinr *= bump_sinr;
            harder.buyers[0].min_duration += bump_duration;
            let after = radio::connectivity_indicator(BuyerId(1), seller, &matching, &harder);
            prop_assert!(!(after && !before), "indicator rose with stricter requirements");
        }
    }

    /// Demand never rises with price; supply never falls.
    #[test]
    fn demand_and_supply_are_monotone(
        theta_b in 0.3..3.0f64, alpha_b in 0.15..0.85f64,
        theta_s in 0.3..3.0f64, alpha_s in 0.15..0.85f64,
        e in 0.0..=1.0f64, cap_b in 0.0..10.0f64, cap_s in 1.0..15.0f64,
        p1 in 0.3..2.0f64, p2 in 0.3..2.0f64,
        psi in proptest::bool::ANY, phi in proptest::bool::ANY,
    ) {
        let m = market(0.1, 0.05);
        let (lo, hi) = if p1 <= p2 { (p1, p2) } else { (p2, p1) };
        let d = DemandParams {
            utility: UtilityParams::new(theta_b, alpha_b),
            exceed_prob: e,
            initial_cap: cap_b,
        };
        let d_lo = demand_curve(&d, lo, psi, m.penalty_kappa, m.reward_r).unwrap();
        let d_hi = demand_curve(&d, hi, psi, m.penalty_kappa, m.reward_r).unwrap();
        prop_assert!(d_hi <= d_lo + 1e-12);

        let s = SupplyParams {
            utility: UtilityParams::new(theta_s, alpha_s),
            initial_cap: cap_s,
        };
        let s_lo = supply_curve(&s, lo, phi, m.penalty_rho, m.energy_cost_xi);
        let s_hi = supply_curve(&s, hi, phi, m.penalty_rho, m.energy_cost_xi);
        prop_assert!(s_hi >= s_lo - 1e-12);
    }
}

/// With clean flags and a matched pair, the modified utility is exactly the
/// raw utility.
#[test]
fn modified_equals_raw_when_flags_are_clean() {
    let mut scenario = generate_scenario(11, 2, 2, &live_params()).unwrap();
    // a close, capable link so neither flag fires
    scenario.buyers[0].position = upn_market::scenario::Point::new(450.0, 500.0);
    scenario.sellers[0].position = upn_market::scenario::Point::new(480.0, 500.0);
    scenario.buyers[0].min_sinr = 1.0;
    scenario.buyers[0].min_duration = 0.0;
    scenario.buyers[0].requested_duration = 900.0;
    scenario.buyers[0].utility = UtilityParams::new(1.0, 0.5);
    scenario.sellers[0].battery_duration = 3600.0;
    scenario.sellers[0].physical_availability = 3600.0;

    let mut matching = Matching::all_at_bs(&scenario);
    matching.assign(BuyerId(1), SellerId(1));
    let state = MarketState::new(&scenario);
    let price = state.price_of(BuyerId(1), SellerId(1));

    // a volume comfortably below the link bound and the cap
    let terms = TradeTerms {
        buyer_id: BuyerId(1),
        seller_id: SellerId(1),
        volume: 0.5,
        price,
        duration: 900.0,
    };
    let raw = buyer_utility_upn(&scenario.buyers[0], &terms, &scenario.market, true).unwrap();
    let modified = modified_buyer_utility(&scenario.buyers[0], &terms, &matching, &scenario).unwrap();
    assert_eq!(raw, modified);
}

/// Stage 1 never revisits a (matching, per-seller price vector) state on the
/// way to stability.
#[test]
fn stage1_never_revisits_a_state() {
    for seed in 0..30u64 {
        let scenario = generate_scenario(seed, 5, 2, &live_params()).unwrap();
        let outcome = match run_data_trading(&scenario) {
            Ok(o) => o,
            Err(_) => continue,
        };
        let mut seen = std::collections::HashSet::new();
        for record in &outcome.rounds {
            let rounded: Vec<(u32, i64)> = record
                .seller_prices
                .iter()
                .map(|(s, p)| (s.0, (p * 1e9).round() as i64))
                .collect();
            let key = (record.matching.clone(), rounded);
            assert!(
                seen.insert(key),
                "seed {seed}: round {} revisited a visited state",
                record.round
            );
        }
    }
}

/// Converged price walks do not oscillate wildly: the excess-demand sign
/// changes only a bounded number of times on the way in.
#[test]
fn converged_traces_change_sign_finitely_often() {
    let m = market(0.05, 0.02);
    for seed in 0..100u64 {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let demands = [DemandSide {
            params: DemandParams {
                utility: UtilityParams::new(rng.gen_range(0.5..2.0), rng.gen_range(0.3..0.7)),
                exceed_prob: rng.gen_range(0.0..=1.0),
                initial_cap: rng.gen_range(0.0..5.0),
            },
            psi: false,
        }];
        let supplies = [SupplySide {
            params: SupplyParams {
                utility: UtilityParams::new(rng.gen_range(0.5..2.0), rng.gen_range(0.3..0.7)),
                initial_cap: rng.gen_range(2.0..12.0),
            },
            phi: false,
        }];
        let config = TatonnementConfig {
            initial_price: rng.gen_range(0.2..1.5),
            ..Default::default()
        };
        let Ok(eq) = solve_equilibrium_price(&demands, &supplies, &m, &config) else {
            continue;
        };
        let signs: Vec<f64> = eq
            .trace
            .steps
            .iter()
            .map(|s| (s.demand - s.supply).signum())
            .filter(|s| *s != 0.0)
            .collect();
        let flips = signs.windows(2).filter(|w| w[0] != w[1]).count();
        assert!(
            flips <= 12,
            "seed {seed}: {flips} sign changes in a converged trace of {} steps",
            eq.trace.len()
        );
    }
}
