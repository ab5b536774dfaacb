//! Canonical unit ledger.
//!
//! Radio quantities are kept in SI units (W, Hz, s, m, bit); market
//! quantities in GB and EUR. Every conversion between the two worlds goes
//! through the constants below so there is exactly one place where a unit
//! bug could live.

/// One gigabyte, in bits.
pub const BITS_PER_GB: f64 = 8e9;

/// One megabyte, in bits.
pub const BITS_PER_MB: f64 = 8e6;

pub const SECONDS_PER_MINUTE: f64 = 60.0;

pub fn bits_to_gb(bits: f64) -> f64 {
    bits / BITS_PER_GB
}

pub fn gb_to_bits(gb: f64) -> f64 {
    gb * BITS_PER_GB
}

pub fn minutes_to_seconds(minutes: f64) -> f64 {
    minutes * SECONDS_PER_MINUTE
}

/// Decibels to linear power ratio.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Linear power ratio to decibels.
pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

/// Converts a per-megabyte energy figure (J/MB) into a per-gigabyte monetary
/// cost (EUR/GB) given an electricity price in EUR/J.
///
/// The energy figure is a measured device-side constant; the EUR/J rate is a
/// configuration value with a synthetic default (see `ScenarioParams`).
pub fn energy_cost_eur_per_gb(joules_per_mb: f64, eur_per_joule: f64) -> f64 {
    joules_per_mb * 1000.0 * eur_per_joule
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gb_round_trip() {
        assert_eq!(gb_to_bits(2.5), 2e10);
        assert_eq!(bits_to_gb(gb_to_bits(0.125)), 0.125);
    }

    #[test]
    fn db_conversions() {
        assert!((db_to_linear(20.0) - 100.0).abs() < 1e-9);
        assert!((db_to_linear(0.0) - 1.0).abs() < 1e-12);
        assert!((linear_to_db(db_to_linear(7.3)) - 7.3).abs() < 1e-9);
    }

    #[test]
    fn energy_cost_conversion() {
        // 0.257 J/MB at 1e-4 EUR/J -> 0.0257 EUR/GB
        let cost = energy_cost_eur_per_gb(0.257, 1e-4);
        assert!((cost - 0.0257).abs() < 1e-12);
    }
}
