//! Dissects one scenario: per-buyer utilities under the three association
//! methods, with QoS and penalty flags. Useful when calibrating experiment
//! parameters.
//!
//! Usage: cargo run --example market_report -- [seed] [range_m]

use upn_market::harness::{
    min_sinr_for_range, random_matching_baseline, run_data_trading, worst_case_baseline,
};
use upn_market::matching::{assess, MarketEnv};
use upn_market::scenario::{generate_scenario, ScenarioParams};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let seed: u64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(1000);
    let range: f64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(200.0);

    let params = ScenarioParams {
        noise_psd: 5e-17,
        bandwidth_per_link: 2e7,
        exceed_prob: 0.8,
        ..ScenarioParams::default()
    };
    let mut scenario = generate_scenario(seed, 20, 10, &params).unwrap();
    let min_sinr = min_sinr_for_range(&params, range);
    for b in &mut scenario.buyers {
        b.min_sinr = min_sinr;
    }
    println!(
        "seed {seed}, range {range} m, min_sinr {min_sinr:.4}, initial price {:.3}",
        scenario.algo.initial_price
    );

    let outcomes = [
        ("proposed", run_data_trading(&scenario)),
        ("random", random_matching_baseline(&scenario, seed ^ 0x5eed_cafe)),
        ("worst", worst_case_baseline(&scenario)),
    ];
    for (name, outcome) in outcomes {
        let outcome = match outcome {
            Ok(o) => o,
            Err(e) => {
                println!("{name}: FAILED: {e}");
                continue;
            }
        };
        let env = MarketEnv::new(&scenario);
        let a = assess(&env, &outcome.matching, &outcome.market).unwrap();
        println!(
            "== {name}: avg_u = {:.4}, at_bs = {}, volume = {:.2}",
            outcome.metrics.avg_buyer_utility,
            outcome.metrics.n_buyers_at_bs,
            outcome.metrics.total_volume_traded
        );
        for (buyer, snap) in &a.snapshots {
            println!(
                "  b{:<3} -> s{:<3} beta={} psi={} vol={:8.3} price={:.3} u={:8.3}",
                buyer.0,
                snap.seller.0,
                u8::from(snap.beta),
                u8::from(snap.psi),
                snap.volume,
                snap.price,
                snap.utility
            );
        }
    }
}
