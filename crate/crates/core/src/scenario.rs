//! World description: geometry, users, radio constants, market constants,
//! algorithm knobs, and deterministic random scenario generation.

use std::collections::BTreeSet;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units;

/// Buyer identifier. Buyers are numbered from 1.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct BuyerId(pub u32);

/// Seller identifier. Id 0 is reserved for the base station; actual sellers
/// are numbered from 1.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct SellerId(pub u32);

impl SellerId {
    pub const BS: SellerId = SellerId(0);

    pub fn is_bs(self) -> bool {
        self.0 == 0
    }
}

impl std::fmt::Display for BuyerId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::fmt::Display for SellerId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Planar position in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2)).sqrt()
    }
}

/// Physical-layer constants shared by every link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadioConstants {
    /// Noise power spectral density, W/Hz.
    pub noise_psd: f64,
    /// Power-law path loss exponent (>= 2).
    pub path_loss_exponent: f64,
    /// Bandwidth allocated to a single link, Hz.
    pub bandwidth_per_link: f64,
    /// Capacity logarithm base. Fixed at 2 so capacities are in bit/s.
    pub log_base: u32,
}

impl RadioConstants {
    /// Total noise power over one link bandwidth, W.
    pub fn noise_power(&self) -> f64 {
        self.noise_psd * self.bandwidth_per_link
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.noise_psd > 0.0) {
            return Err(Error::validation("noise_psd", "must be > 0"));
        }
        if !(self.path_loss_exponent >= 2.0) {
            return Err(Error::validation("path_loss_exponent", "must be >= 2"));
        }
        if !(self.bandwidth_per_link > 0.0) {
            return Err(Error::validation("bandwidth_per_link", "must be > 0"));
        }
        if self.log_base != 2 {
            return Err(Error::validation("log_base", "fixed at 2"));
        }
        Ok(())
    }
}

/// Monetary and penalty constants of the data market.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketConstants {
    /// Macro-cell overage price, EUR per GB beyond the monthly cap.
    pub overage_price_p: f64,
    /// Reward paid by the operator per GB bought in the UPN when the buyer
    /// still has cap left, EUR/GB.
    pub reward_r: f64,
    /// Seller-side energy cost of relaying, EUR/GB.
    pub energy_cost_xi: f64,
    /// Operator share of each UPN trade, fraction in [0, 1].
    pub operator_share_v: f64,
    /// Buyer penalty for violating the link-volume bound.
    pub penalty_kappa: f64,
    /// Seller penalty for exceeding the leftover cap.
    pub penalty_rho: f64,
    /// Macro-cell QoS penalty used by the service price benchmark.
    pub penalty_kappa_bs: f64,
    /// UPN QoS penalty used by the service price benchmark.
    pub penalty_kappa_upn: f64,
}

impl MarketConstants {
    pub fn validate(&self) -> Result<()> {
        let nonneg: [(&str, f64); 8] = [
            ("overage_price_p", self.overage_price_p),
            ("reward_r", self.reward_r),
            ("energy_cost_xi", self.energy_cost_xi),
            ("operator_share_v", self.operator_share_v),
            ("penalty_kappa", self.penalty_kappa),
            ("penalty_rho", self.penalty_rho),
            ("penalty_kappa_bs", self.penalty_kappa_bs),
            ("penalty_kappa_upn", self.penalty_kappa_upn),
        ];
        for (field, value) in nonneg {
            if !(value >= 0.0) {
                return Err(Error::validation(field, "must be >= 0"));
            }
        }
        if self.operator_share_v > 1.0 {
            return Err(Error::validation("operator_share_v", "must be <= 1"));
        }
        Ok(())
    }
}

/// Parameters of the concave satisfaction function `f(q) = theta * q^(1-alpha) / (1-alpha)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtilityParams {
    pub theta: f64,
    pub alpha: f64,
}

impl UtilityParams {
    pub fn new(theta: f64, alpha: f64) -> Self {
        UtilityParams { theta, alpha }
    }

    pub fn validate(&self, prefix: &str) -> Result<()> {
        if !(self.theta > 0.0) {
            return Err(Error::validation(format!("{prefix}.theta"), "must be > 0"));
        }
        if !(self.alpha >= 0.0 && self.alpha < 1.0) {
            return Err(Error::validation(
                format!("{prefix}.alpha"),
                "must be in [0, 1)",
            ));
        }
        Ok(())
    }
}

/// A buyer of leftover data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuyerProfile {
    pub id: BuyerId,
    pub position: Point,
    /// Transmit power, W.
    pub tx_power: f64,
    /// Monthly data cap, GB.
    pub initial_cap: f64,
    /// Probability of exceeding the monthly cap.
    pub exceed_prob: f64,
    /// Minimum acceptable SINR (linear).
    pub min_sinr: f64,
    /// Minimum acceptable service duration, s.
    pub min_duration: f64,
    /// Contract duration the buyer asks for, s.
    pub requested_duration: f64,
    pub utility: UtilityParams,
}

impl BuyerProfile {
    pub fn validate(&self) -> Result<()> {
        let ctx = format!("buyers[{}]", self.id);
        if !(self.tx_power > 0.0) {
            return Err(Error::validation(format!("{ctx}.tx_power"), "must be > 0"));
        }
        if !(0.0..=1.0).contains(&self.exceed_prob) {
            return Err(Error::validation(
                format!("{ctx}.exceed_prob"),
                "must be in [0, 1]",
            ));
        }
        if !(self.min_sinr > 0.0) {
            return Err(Error::validation(format!("{ctx}.min_sinr"), "must be > 0"));
        }
        if !(self.initial_cap >= 0.0) {
            return Err(Error::validation(
                format!("{ctx}.initial_cap"),
                "must be >= 0",
            ));
        }
        if !(self.min_duration >= 0.0) {
            return Err(Error::validation(
                format!("{ctx}.min_duration"),
                "must be >= 0",
            ));
        }
        if !(self.requested_duration >= 0.0) {
            return Err(Error::validation(
                format!("{ctx}.requested_duration"),
                "must be >= 0",
            ));
        }
        self.utility.validate(&format!("{ctx}.utility"))?;
        Ok(())
    }
}

/// A seller offering leftover cap while serving as an access point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SellerProfile {
    pub id: SellerId,
    pub position: Point,
    /// Monthly data cap available for resale, GB.
    pub initial_cap: f64,
    /// Remaining battery duration, s.
    pub battery_duration: f64,
    /// Physical availability window, s.
    pub physical_availability: f64,
    /// Battery drain per second of served contract time (dimensionless).
    pub battery_drain_rate: f64,
    pub utility: UtilityParams,
}

impl SellerProfile {
    pub fn validate(&self) -> Result<()> {
        let ctx = format!("sellers[{}]", self.id);
        if self.id.is_bs() {
            return Err(Error::validation(
                format!("{ctx}.id"),
                "seller id 0 is reserved for the base station",
            ));
        }
        if !(self.initial_cap >= 0.0) {
            return Err(Error::validation(
                format!("{ctx}.initial_cap"),
                "must be >= 0",
            ));
        }
        if !(self.battery_duration >= 0.0) {
            return Err(Error::validation(
                format!("{ctx}.battery_duration"),
                "must be >= 0",
            ));
        }
        if !(self.physical_availability >= 0.0) {
            return Err(Error::validation(
                format!("{ctx}.physical_availability"),
                "must be >= 0",
            ));
        }
        if !(self.battery_drain_rate >= 0.0) {
            return Err(Error::validation(
                format!("{ctx}.battery_drain_rate"),
                "must be >= 0",
            ));
        }
        self.utility.validate(&format!("{ctx}.utility"))?;
        Ok(())
    }
}

/// The macro-cell base station.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseStationProfile {
    pub position: Point,
    /// Serving frame duration, s.
    pub frame_duration: f64,
    /// Durations already committed to subscribers outside the market, s.
    pub served_durations: Vec<f64>,
    /// Set when the committed durations exceed the frame; kept explicit so an
    /// oversubscribed profile is representable but never silent.
    #[serde(default)]
    pub oversubscribed: bool,
}

impl BaseStationProfile {
    pub fn validate(&self) -> Result<()> {
        if !(self.frame_duration >= 0.0) {
            return Err(Error::validation("base_station.frame_duration", "must be >= 0"));
        }
        if self.served_durations.iter().any(|d| *d < 0.0) {
            return Err(Error::validation(
                "base_station.served_durations",
                "entries must be >= 0",
            ));
        }
        let committed: f64 = self.served_durations.iter().sum();
        if committed > self.frame_duration && !self.oversubscribed {
            return Err(Error::validation(
                "base_station.served_durations",
                "sum exceeds frame_duration; set `oversubscribed` to allow this",
            ));
        }
        Ok(())
    }
}

/// Knobs of the two-stage trading algorithm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmKnobs {
    /// Swap-round budget before the cycle guard trips.
    pub max_swap_rounds: usize,
    /// Price convergence threshold, EUR/GB.
    pub price_epsilon: f64,
    /// Starting trading price for every pair, EUR/GB.
    pub initial_price: f64,
    /// Seed for run-internal randomness (baselines).
    pub rng_seed: u64,
}

impl AlgorithmKnobs {
    pub fn validate(&self) -> Result<()> {
        if self.max_swap_rounds == 0 {
            return Err(Error::validation("algo.max_swap_rounds", "must be >= 1"));
        }
        if !(self.price_epsilon > 0.0) {
            return Err(Error::validation("algo.price_epsilon", "must be > 0"));
        }
        if !(self.initial_price > 0.0) {
            return Err(Error::validation("algo.initial_price", "must be > 0"));
        }
        Ok(())
    }
}

/// Immutable description of one market instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    /// Side of the square deployment area, m.
    pub area_side: f64,
    pub base_station: BaseStationProfile,
    pub buyers: Vec<BuyerProfile>,
    pub sellers: Vec<SellerProfile>,
    pub radio: RadioConstants,
    pub market: MarketConstants,
    pub algo: AlgorithmKnobs,
}

impl Scenario {
    pub fn buyer(&self, id: BuyerId) -> &BuyerProfile {
        self.buyers
            .iter()
            .find(|b| b.id == id)
            .expect("unknown buyer id")
    }

    pub fn seller(&self, id: SellerId) -> &SellerProfile {
        self.sellers
            .iter()
            .find(|s| s.id == id)
            .expect("unknown seller id")
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.area_side > 0.0) {
            return Err(Error::validation("area_side", "must be > 0"));
        }
        self.radio.validate()?;
        self.market.validate()?;
        self.algo.validate()?;
        self.base_station.validate()?;
        if self.buyers.is_empty() {
            return Err(Error::validation("buyers", "at least one buyer required"));
        }
        let mut buyer_ids = BTreeSet::new();
        for b in &self.buyers {
            b.validate()?;
            if !buyer_ids.insert(b.id) {
                return Err(Error::validation(
                    "buyers.id",
                    format!("duplicate buyer id {}", b.id),
                ));
            }
            if !in_area(&b.position, self.area_side) {
                return Err(Error::validation(
                    format!("buyers[{}].position", b.id),
                    "outside the deployment area",
                ));
            }
        }
        let mut seller_ids = BTreeSet::new();
        for s in &self.sellers {
            s.validate()?;
            if !seller_ids.insert(s.id) {
                return Err(Error::validation(
                    "sellers.id",
                    format!("duplicate seller id {}", s.id),
                ));
            }
            if !in_area(&s.position, self.area_side) {
                return Err(Error::validation(
                    format!("sellers[{}].position", s.id),
                    "outside the deployment area",
                ));
            }
        }
        if !in_area(&self.base_station.position, self.area_side) {
            return Err(Error::validation(
                "base_station.position",
                "outside the deployment area",
            ));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Scenario> {
        let scenario: Scenario = serde_json::from_str(text)?;
        scenario.validate()?;
        Ok(scenario)
    }
}

fn in_area(p: &Point, side: f64) -> bool {
    p.x >= 0.0 && p.x <= side && p.y >= 0.0 && p.y <= side
}

/// Generator configuration.
///
/// Defaults mirror the reference deployment: 1000 x 1000 m area with the
/// base station at the center, 20 mW transmitters, noise density 1e-7 W/Hz,
/// path-loss exponent 3, 10 GB monthly caps, SINR minima drawn in [1, 20] dB,
/// connectivity durations in [0, 15] min, the macro overage price derived
/// from a 10 EUR / 10 GB plan, and a starting UPN price drawn in
/// [0.1, 1] EUR/GB.
///
/// Everything the reference deployment leaves open is synthetic and marked
/// as such: link bandwidth, the EUR/J electricity rate behind the energy
/// cost, the reward and operator-share rates, penalty weights, and the
/// satisfaction-parameter ranges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioParams {
    pub area_side: f64,
    pub tx_power: f64,
    pub noise_psd: f64,
    pub path_loss_exponent: f64,
    /// Synthetic: per-link bandwidth, Hz.
    pub bandwidth_per_link: f64,
    pub buyer_cap_gb: f64,
    pub seller_cap_gb: f64,
    /// SINR minimum draw range, dB.
    pub min_sinr_db_range: (f64, f64),
    /// Connectivity-duration draw range, s (requested duration, battery,
    /// physical availability).
    pub duration_range_s: (f64, f64),
    /// Probability that a buyer exceeds the monthly cap.
    pub exceed_prob: f64,
    /// Measured relay energy figure, J/MB.
    pub energy_joules_per_mb: f64,
    /// Synthetic: electricity rate used to monetize the energy figure, EUR/J.
    pub electricity_eur_per_joule: f64,
    /// Macro overage price, EUR/GB.
    pub overage_price_p: f64,
    /// Synthetic: operator reward rate, EUR/GB.
    pub reward_r: f64,
    /// Synthetic: operator share of UPN trades.
    pub operator_share_v: f64,
    /// Synthetic: buyer-side penalty weight.
    pub penalty_kappa: f64,
    /// Synthetic: seller-side penalty weight.
    pub penalty_rho: f64,
    /// Synthetic: macro-cell QoS penalty of the price benchmark.
    pub penalty_kappa_bs: f64,
    /// Synthetic: UPN QoS penalty of the price benchmark.
    pub penalty_kappa_upn: f64,
    /// Synthetic: buyer satisfaction-scale draw range.
    pub buyer_theta_range: (f64, f64),
    /// Synthetic: seller satisfaction-scale draw range.
    pub seller_theta_range: (f64, f64),
    /// Synthetic: curvature draw range, kept inside (0, 1) so the closed-form
    /// demand and supply curves are defined.
    pub alpha_range: (f64, f64),
    /// Synthetic: battery drain per served second.
    pub battery_drain_rate: f64,
    /// Starting-price draw range, EUR/GB.
    pub initial_price_range: (f64, f64),
    pub price_epsilon: f64,
    /// Swap-round budget as a multiple of the buyer count.
    pub max_swap_rounds_per_buyer: usize,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        ScenarioParams {
            area_side: 1000.0,
            tx_power: 0.02,
            noise_psd: 1e-7,
            path_loss_exponent: 3.0,
            bandwidth_per_link: 5e6,
            buyer_cap_gb: 10.0,
            seller_cap_gb: 10.0,
            min_sinr_db_range: (1.0, 20.0),
            duration_range_s: (0.0, 15.0 * units::SECONDS_PER_MINUTE),
            exceed_prob: 0.8,
            energy_joules_per_mb: 0.257,
            electricity_eur_per_joule: 1e-4,
            overage_price_p: 1.0,
            reward_r: 0.1,
            operator_share_v: 0.2,
            penalty_kappa: 0.5,
            penalty_rho: 0.5,
            penalty_kappa_bs: 0.5,
            penalty_kappa_upn: 0.5,
            buyer_theta_range: (0.8, 2.2),
            seller_theta_range: (0.3, 1.5),
            alpha_range: (0.3, 0.7),
            battery_drain_rate: 0.1,
            initial_price_range: (0.1, 1.0),
            price_epsilon: 1e-4,
            max_swap_rounds_per_buyer: 10,
        }
    }
}

impl ScenarioParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tx_power > 0.0) {
            return Err(Error::validation("tx_power", "must be > 0"));
        }
        if !(self.noise_psd > 0.0) {
            return Err(Error::validation("noise_psd", "must be > 0"));
        }
        if !(self.path_loss_exponent >= 2.0) {
            return Err(Error::validation("path_loss_exponent", "must be >= 2"));
        }
        if !(self.bandwidth_per_link > 0.0) {
            return Err(Error::validation("bandwidth_per_link", "must be > 0"));
        }
        if !(self.area_side > 0.0) {
            return Err(Error::validation("area_side", "must be > 0"));
        }
        if !(0.0..=1.0).contains(&self.exceed_prob) {
            return Err(Error::validation("exceed_prob", "must be in [0, 1]"));
        }
        for (field, (lo, hi)) in [
            ("min_sinr_db_range", self.min_sinr_db_range),
            ("duration_range_s", self.duration_range_s),
            ("buyer_theta_range", self.buyer_theta_range),
            ("seller_theta_range", self.seller_theta_range),
            ("alpha_range", self.alpha_range),
            ("initial_price_range", self.initial_price_range),
        ] {
            if !(lo <= hi) {
                return Err(Error::validation(field, "range must be ordered"));
            }
        }
        if !(self.alpha_range.0 >= 0.0 && self.alpha_range.1 < 1.0) {
            return Err(Error::validation("alpha_range", "must lie in [0, 1)"));
        }
        if !(self.buyer_theta_range.0 > 0.0) {
            return Err(Error::validation("buyer_theta_range", "theta must be > 0"));
        }
        if !(self.seller_theta_range.0 > 0.0) {
            return Err(Error::validation("seller_theta_range", "theta must be > 0"));
        }
        if !(self.initial_price_range.0 > 0.0) {
            return Err(Error::validation("initial_price_range", "must be > 0"));
        }
        if !(self.price_epsilon > 0.0) {
            return Err(Error::validation("price_epsilon", "must be > 0"));
        }
        if self.max_swap_rounds_per_buyer == 0 {
            return Err(Error::validation("max_swap_rounds_per_buyer", "must be >= 1"));
        }
        for field in [
            ("energy_joules_per_mb", self.energy_joules_per_mb),
            ("electricity_eur_per_joule", self.electricity_eur_per_joule),
            ("overage_price_p", self.overage_price_p),
            ("reward_r", self.reward_r),
            ("penalty_kappa", self.penalty_kappa),
            ("penalty_rho", self.penalty_rho),
            ("penalty_kappa_bs", self.penalty_kappa_bs),
            ("penalty_kappa_upn", self.penalty_kappa_upn),
            ("battery_drain_rate", self.battery_drain_rate),
            ("buyer_cap_gb", self.buyer_cap_gb),
            ("seller_cap_gb", self.seller_cap_gb),
        ] {
            if !(field.1 >= 0.0) {
                return Err(Error::validation(field.0, "must be >= 0"));
            }
        }
        if !(0.0..=1.0).contains(&self.operator_share_v) {
            return Err(Error::validation("operator_share_v", "must be in [0, 1]"));
        }
        Ok(())
    }

    pub fn market_constants(&self) -> MarketConstants {
        MarketConstants {
            overage_price_p: self.overage_price_p,
            reward_r: self.reward_r,
            energy_cost_xi: units::energy_cost_eur_per_gb(
                self.energy_joules_per_mb,
                self.electricity_eur_per_joule,
            ),
            operator_share_v: self.operator_share_v,
            penalty_kappa: self.penalty_kappa,
            penalty_rho: self.penalty_rho,
            penalty_kappa_bs: self.penalty_kappa_bs,
            penalty_kappa_upn: self.penalty_kappa_upn,
        }
    }
}

/// Builds a scenario deterministically from `(seed, n_buyers, n_sellers, params)`.
///
/// Equal arguments always produce byte-identical scenarios; the draw order
/// below is part of the format.
pub fn generate_scenario(
    seed: u64,
    n_buyers: usize,
    n_sellers: usize,
    params: &ScenarioParams,
) -> Result<Scenario> {
    params.validate()?;
    if n_buyers == 0 {
        return Err(Error::validation("n_buyers", "must be >= 1"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let side = params.area_side;
    let center = Point::new(side / 2.0, side / 2.0);

    let mut buyers = Vec::with_capacity(n_buyers);
    for i in 0..n_buyers {
        let position = Point::new(rng.gen_range(0.0..=side), rng.gen_range(0.0..=side));
        let min_sinr_db = gen_in(&mut rng, params.min_sinr_db_range);
        let requested_duration = gen_in(&mut rng, params.duration_range_s);
        // Required minimum never exceeds what the buyer asks for.
        let min_duration = rng.gen_range(0.0..=requested_duration.max(f64::MIN_POSITIVE));
        let theta = gen_in(&mut rng, params.buyer_theta_range);
        let alpha = gen_in(&mut rng, params.alpha_range);
        buyers.push(BuyerProfile {
            id: BuyerId(i as u32 + 1),
            position,
            tx_power: params.tx_power,
            initial_cap: params.buyer_cap_gb,
            exceed_prob: params.exceed_prob,
            min_sinr: units::db_to_linear(min_sinr_db),
            min_duration,
            requested_duration,
            utility: UtilityParams::new(theta, alpha),
        });
    }

    let mut sellers = Vec::with_capacity(n_sellers);
    for i in 0..n_sellers {
        let position = Point::new(rng.gen_range(0.0..=side), rng.gen_range(0.0..=side));
        let battery_duration = gen_in(&mut rng, params.duration_range_s);
        let physical_availability = gen_in(&mut rng, params.duration_range_s);
        let theta = gen_in(&mut rng, params.seller_theta_range);
        let alpha = gen_in(&mut rng, params.alpha_range);
        sellers.push(SellerProfile {
            id: SellerId(i as u32 + 1),
            position,
            initial_cap: params.seller_cap_gb,
            battery_duration,
            physical_availability,
            battery_drain_rate: params.battery_drain_rate,
            utility: UtilityParams::new(theta, alpha),
        });
    }

    let initial_price = gen_in(&mut rng, params.initial_price_range);

    let scenario = Scenario {
        area_side: side,
        base_station: BaseStationProfile {
            position: center,
            // Large enough to serve every subscriber in the deployment.
            frame_duration: (n_buyers as f64 + 1.0) * params.duration_range_s.1,
            served_durations: Vec::new(),
            oversubscribed: false,
        },
        buyers,
        sellers,
        radio: RadioConstants {
            noise_psd: params.noise_psd,
            path_loss_exponent: params.path_loss_exponent,
            bandwidth_per_link: params.bandwidth_per_link,
            log_base: 2,
        },
        market: params.market_constants(),
        algo: AlgorithmKnobs {
            max_swap_rounds: params.max_swap_rounds_per_buyer * n_buyers,
            price_epsilon: params.price_epsilon,
            initial_price,
            rng_seed: seed,
        },
    };
    scenario.validate()?;
    Ok(scenario)
}

fn gen_in(rng: &mut ChaCha8Rng, range: (f64, f64)) -> f64 {
    if range.0 == range.1 {
        range.0
    } else {
        rng.gen_range(range.0..=range.1)
    }
}
