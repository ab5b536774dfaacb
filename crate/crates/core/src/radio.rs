//! Physical-layer quantities: channel gains, SNR/SINR, link capacities,
//! transferable data volumes, and connectivity availability/indicators.
//!
//! Everything here is a pure function of the scenario and (where relevant)
//! the current matching, so calls are safe from any thread.

use serde::{Deserialize, Serialize};

use crate::matching::Matching;
use crate::scenario::{BaseStationProfile, BuyerId, Point, Scenario, SellerId, SellerProfile};
use crate::units;

/// Distances are floored at this value so gains stay finite and <= 1.
pub const MIN_DISTANCE_M: f64 = 1.0;

/// Snapshot of one buyer-seller link under a given matching.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkState {
    pub buyer_id: BuyerId,
    /// 0 means the base station.
    pub seller_id: SellerId,
    /// Path gain, dimensionless.
    pub gain: f64,
    /// Co-channel interference power, W.
    pub interference: f64,
    /// Signal-to-interference-plus-noise ratio, dimensionless.
    pub sinr: f64,
    /// Shannon capacity, bit/s.
    pub capacity: f64,
    /// Largest volume the link can move within the contract duration, GB.
    pub max_volume: f64,
}

/// Power-law path gain `d^(-exponent)` with the distance floored at 1 m.
pub fn channel_gain(pos_a: &Point, pos_b: &Point, exponent: f64) -> f64 {
    debug_assert!(exponent >= 2.0);
    let d = pos_a.distance(pos_b).max(MIN_DISTANCE_M);
    d.powf(-exponent)
}

/// Co-channel interference seen at `seller_id` on buyer `buyer_id`'s link.
///
/// UPN links share one channel pool, so every buyer currently matched to a
/// *different* seller contributes; buyers on the macro cell transmit on
/// separate channels and do not. Base-station links (`seller_id` 0) are
/// interference-free by the same argument.
pub fn interference_at(
    buyer_id: BuyerId,
    seller_id: SellerId,
    matching: &Matching,
    scenario: &Scenario,
) -> f64 {
    debug_assert!(!seller_id.is_bs(), "BS links see no UPN interference");
    let seller_pos = scenario.seller(seller_id).position;
    let mut total = 0.0;
    for other in &scenario.buyers {
        if other.id == buyer_id {
            continue;
        }
        let assigned = matching.seller_of(other.id);
        if assigned.is_bs() || assigned == seller_id {
            continue;
        }
        total += other.tx_power
            * channel_gain(&other.position, &seller_pos, scenario.radio.path_loss_exponent);
    }
    total
}

/// SINR of buyer `buyer_id` toward `seller_id` (0 = base station) under the
/// given matching. Noise power is `noise_psd * bandwidth_per_link`.
pub fn sinr(
    buyer_id: BuyerId,
    seller_id: SellerId,
    matching: &Matching,
    scenario: &Scenario,
) -> f64 {
    let buyer = scenario.buyer(buyer_id);
    let noise = scenario.radio.noise_power();
    if seller_id.is_bs() {
        let gain = channel_gain(
            &buyer.position,
            &scenario.base_station.position,
            scenario.radio.path_loss_exponent,
        );
        buyer.tx_power * gain / noise
    } else {
        let gain = channel_gain(
            &buyer.position,
            &scenario.seller(seller_id).position,
            scenario.radio.path_loss_exponent,
        );
        let interference = interference_at(buyer_id, seller_id, matching, scenario);
        buyer.tx_power * gain / (noise + interference)
    }
}

/// Shannon capacity `w * log2(1 + sinr)`, bit/s.
pub fn link_capacity(bandwidth: f64, sinr: f64) -> f64 {
    debug_assert!(bandwidth >= 0.0 && sinr >= 0.0);
    bandwidth * (1.0 + sinr).log2()
}

/// Volume moved by a link of `capacity` bit/s over `duration` seconds, GB.
pub fn data_volume(capacity: f64, duration: f64) -> f64 {
    debug_assert!(capacity >= 0.0 && duration >= 0.0);
    units::bits_to_gb(capacity * duration)
}

/// Remaining connectivity availability of the base station, s.
pub fn bs_availability(bs: &BaseStationProfile) -> f64 {
    let committed: f64 = bs.served_durations.iter().sum();
    (bs.frame_duration - committed).max(0.0)
}

/// Connectivity availability of a seller carrying `load_duration` seconds of
/// contracts: battery drains proportionally to the load, and the physical
/// availability window caps the result.
pub fn seller_availability(seller: &SellerProfile, load_duration: f64) -> f64 {
    debug_assert!(load_duration >= 0.0);
    (seller.battery_duration - seller.battery_drain_rate * load_duration)
        .min(seller.physical_availability)
        .max(0.0)
}

/// Total contract duration a seller is carrying under `matching`, s.
pub fn seller_load_duration(seller_id: SellerId, matching: &Matching, scenario: &Scenario) -> f64 {
    scenario
        .buyers
        .iter()
        .filter(|b| matching.seller_of(b.id) == seller_id)
        .map(|b| b.requested_duration)
        .sum()
}

/// Availability of `seller_id` (0 = base station) under `matching`, s.
pub fn availability(seller_id: SellerId, matching: &Matching, scenario: &Scenario) -> f64 {
    if seller_id.is_bs() {
        bs_availability(&scenario.base_station)
    } else {
        let load = seller_load_duration(seller_id, matching, scenario);
        seller_availability(scenario.seller(seller_id), load)
    }
}

/// QoS indicator: 1 iff the link meets the buyer's SINR minimum and the
/// service point can stay available for the buyer's minimum duration.
pub fn connectivity_indicator(
    buyer_id: BuyerId,
    seller_id: SellerId,
    matching: &Matching,
    scenario: &Scenario,
) -> bool {
    let buyer = scenario.buyer(buyer_id);
    let link_sinr = sinr(buyer_id, seller_id, matching, scenario);
    link_sinr >= buyer.min_sinr && availability(seller_id, matching, scenario) >= buyer.min_duration
}

/// Full link snapshot for `(buyer_id, seller_id)` under `matching`.
pub fn link_state(
    buyer_id: BuyerId,
    seller_id: SellerId,
    matching: &Matching,
    scenario: &Scenario,
) -> LinkState {
    let buyer = scenario.buyer(buyer_id);
    let exponent = scenario.radio.path_loss_exponent;
    let (gain, interference) = if seller_id.is_bs() {
        (
            channel_gain(&buyer.position, &scenario.base_station.position, exponent),
            0.0,
        )
    } else {
        (
            channel_gain(
                &buyer.position,
                &scenario.seller(seller_id).position,
                exponent,
            ),
            interference_at(buyer_id, seller_id, matching, scenario),
        )
    };
    let noise = scenario.radio.noise_power();
    let sinr = buyer.tx_power * gain / (noise + interference);
    let capacity = link_capacity(scenario.radio.bandwidth_per_link, sinr);
    LinkState {
        buyer_id,
        seller_id,
        gain,
        interference,
        sinr,
        capacity,
        max_volume: data_volume(capacity, buyer.requested_duration),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{generate_scenario, ScenarioParams};

    fn p(x: f64, y: f64) -> Point {
        Point::new(x, y)
    }

    #[test]
    fn gain_at_unit_distance_is_one() {
        assert_eq!(channel_gain(&p(0.0, 0.0), &p(1.0, 0.0), 3.0), 1.0);
    }

    #[test]
    fn gain_follows_cubic_law() {
        assert!((channel_gain(&p(0.0, 0.0), &p(10.0, 0.0), 3.0) - 1e-3).abs() < 1e-15);
        assert!((channel_gain(&p(0.0, 0.0), &p(0.0, 100.0), 3.0) - 1e-6).abs() < 1e-18);
    }

    #[test]
    fn coincident_points_clamp_to_one_meter() {
        let g = channel_gain(&p(5.0, 5.0), &p(5.0, 5.0), 3.0);
        assert_eq!(g, 1.0);
        assert!(g.is_finite());
        // anything closer than a meter clamps too
        assert_eq!(channel_gain(&p(0.0, 0.0), &p(0.3, 0.0), 3.0), 1.0);
    }

    /// Two buyers and two sellers on a line; geometry chosen so the numbers
    /// in the assertions below can be checked by hand.
    fn two_by_two() -> Scenario {
        let mut s = generate_scenario(3, 2, 2, &ScenarioParams::default()).unwrap();
        s.buyers[0].position = p(100.0, 500.0);
        s.buyers[1].position = p(900.0, 500.0);
        s.sellers[0].position = p(200.0, 500.0);
        s.sellers[1].position = p(800.0, 500.0);
        s
    }

    #[test]
    fn interference_empty_when_no_other_upn_buyers() {
        let s = two_by_two();
        // everyone at the BS: no UPN transmissions at all
        let m = Matching::all_at_bs(&s);
        assert_eq!(interference_at(BuyerId(1), SellerId(1), &m, &s), 0.0);

        // buyer 2 at the *same* seller does not interfere either
        let mut m = Matching::all_at_bs(&s);
        m.assign(BuyerId(2), SellerId(1));
        assert_eq!(interference_at(BuyerId(1), SellerId(1), &m, &s), 0.0);
    }

    #[test]
    fn single_interferer_hand_value() {
        let s = two_by_two();
        let mut m = Matching::all_at_bs(&s);
        // buyer 2 transmits to seller 2; on buyer 1's link to seller 1 the
        // interferer sits 700 m away: 0.02 * 700^-3
        m.assign(BuyerId(2), SellerId(2));
        let i = interference_at(BuyerId(1), SellerId(1), &m, &s);
        let expected = 0.02 * 700f64.powi(-3);
        assert!((i - expected).abs() < expected * 1e-12);
    }

    #[test]
    fn interference_is_linear_in_interferers() {
        // duplicate the interferer by splitting its power across two buyers
        // placed at the same spot: the sum must match exactly
        let mut s = generate_scenario(4, 3, 2, &ScenarioParams::default()).unwrap();
        s.buyers[0].position = p(100.0, 500.0);
        s.buyers[1].position = p(900.0, 500.0);
        s.buyers[2].position = p(900.0, 500.0);
        s.sellers[0].position = p(200.0, 500.0);
        s.sellers[1].position = p(800.0, 500.0);

        let mut one = Matching::all_at_bs(&s);
        one.assign(BuyerId(2), SellerId(2));
        let single = interference_at(BuyerId(1), SellerId(1), &one, &s);

        let mut two = one.clone();
        two.assign(BuyerId(3), SellerId(2));
        let double = interference_at(BuyerId(1), SellerId(1), &two, &s);
        assert!((double - 2.0 * single).abs() < single * 1e-12);
    }

    #[test]
    fn sinr_hand_values() {
        // P = 0.02 W, h = 1e-6 (100 m at exponent 3), N = 1e-9 W
        let mut s = two_by_two();
        s.radio.noise_psd = 1e-16;
        s.radio.bandwidth_per_link = 1e7; // noise power 1e-9 W
        let m = Matching::all_at_bs(&s);
        // buyer 1 is 100 m from seller 1
        let v = sinr(BuyerId(1), SellerId(1), &m, &s);
        assert!((v - 20.0).abs() < 1e-9, "{v}");

        // zero gain is unreachable with the clamp, but a zero-power buyer
        // gives the zero-numerator branch
        let mut s2 = s.clone();
        s2.buyers[0].tx_power = f64::MIN_POSITIVE;
        let v = sinr(BuyerId(1), SellerId(1), &m, &s2);
        assert!(v < 1e-290);
    }

    #[test]
    fn sinr_with_interference_hand_value() {
        let mut s = two_by_two();
        s.radio.noise_psd = 1e-16;
        s.radio.bandwidth_per_link = 1e7; // noise power 1e-9 W
        // place buyer 2 so its gain to seller 1 gives I = 1.9e-8:
        // 0.02 * d^-3 = 1.9e-8  =>  d = (0.02 / 1.9e-8)^(1/3)
        let d = (0.02f64 / 1.9e-8).powf(1.0 / 3.0);
        s.buyers[1].position = p(200.0 + d, 500.0);
        let mut m = Matching::all_at_bs(&s);
        m.assign(BuyerId(2), SellerId(2));
        let v = sinr(BuyerId(1), SellerId(1), &m, &s);
        assert!((v - 1.0).abs() < 1e-9, "{v}");
    }

    #[test]
    fn capacity_examples() {
        assert_eq!(link_capacity(1e6, 0.0), 0.0);
        assert!((link_capacity(1e6, 3.0) - 2e6).abs() < 1e-6);
        assert!((link_capacity(5e6, 1.0) - 5e6).abs() < 1e-6);
    }

    #[test]
    fn data_volume_examples() {
        assert_eq!(data_volume(2e6, 0.0), 0.0);
        // 2 Mbit/s for 10 s = 2e7 bit = 2.5 MB = 0.0025 GB
        assert!((data_volume(2e6, 10.0) - 0.0025).abs() < 1e-15);
        assert_eq!(data_volume(2e6, 20.0), 2.0 * data_volume(2e6, 10.0));
    }

    #[test]
    fn bs_availability_examples() {
        let mut bs = BaseStationProfile {
            position: p(0.0, 0.0),
            frame_duration: 100.0,
            served_durations: vec![10.0, 20.0, 30.0],
            oversubscribed: false,
        };
        assert_eq!(bs_availability(&bs), 40.0);
        bs.served_durations.clear();
        assert_eq!(bs_availability(&bs), 100.0);
        bs.served_durations = vec![60.0, 40.0];
        assert_eq!(bs_availability(&bs), 0.0);
    }

    #[test]
    fn seller_availability_examples() {
        let mut seller = SellerProfile {
            id: SellerId(1),
            position: p(0.0, 0.0),
            initial_cap: 10.0,
            battery_duration: 100.0,
            physical_availability: 60.0,
            battery_drain_rate: 2.0,
            utility: crate::scenario::UtilityParams::new(1.0, 0.5),
        };
        // min(100 - 2*10, 60) = 60
        assert_eq!(seller_availability(&seller, 10.0), 60.0);

        // no load, no physical limit: battery duration
        seller.physical_availability = 500.0;
        assert_eq!(seller_availability(&seller, 0.0), 100.0);

        // raw value would be -10: clamps to 0
        seller.battery_duration = 10.0;
        seller.battery_drain_rate = 1.0;
        assert_eq!(seller_availability(&seller, 20.0), 0.0);
    }

    #[test]
    fn link_state_is_consistent_with_the_parts() {
        let mut s = two_by_two();
        s.radio.noise_psd = 1e-16;
        s.radio.bandwidth_per_link = 1e7;
        let mut m = Matching::all_at_bs(&s);
        m.assign(BuyerId(2), SellerId(2));
        let state = link_state(BuyerId(1), SellerId(1), &m, &s);
        assert_eq!(state.gain, 1e-6);
        assert_eq!(state.interference, interference_at(BuyerId(1), SellerId(1), &m, &s));
        assert!((state.sinr - sinr(BuyerId(1), SellerId(1), &m, &s)).abs() < 1e-12);
        assert_eq!(state.capacity, link_capacity(s.radio.bandwidth_per_link, state.sinr));
        assert_eq!(
            state.max_volume,
            data_volume(state.capacity, s.buyers[0].requested_duration)
        );
        // base-station links carry no UPN interference
        let bs = link_state(BuyerId(1), SellerId::BS, &m, &s);
        assert_eq!(bs.interference, 0.0);
    }

    #[test]
    fn connectivity_indicator_branches() {
        let mut s = two_by_two();
        s.radio.noise_psd = 1e-16;
        s.radio.bandwidth_per_link = 1e7;
        let m = Matching::all_at_bs(&s);
        // buyer 1 <-> seller 1: SINR 20 (100 m link)
        s.buyers[0].min_sinr = 10.0;
        s.buyers[0].min_duration = 5.0;
        s.sellers[0].battery_duration = 15.0;
        s.sellers[0].physical_availability = 15.0;
        assert!(connectivity_indicator(BuyerId(1), SellerId(1), &m, &s));

        s.buyers[0].min_sinr = 25.0;
        assert!(!connectivity_indicator(BuyerId(1), SellerId(1), &m, &s));

        s.buyers[0].min_sinr = 10.0;
        s.buyers[0].min_duration = 20.0;
        assert!(!connectivity_indicator(BuyerId(1), SellerId(1), &m, &s));
    }
}
