//! Fixtures shared by the benchmarks.

use capcert_core::ChannelSpec;
use num_rational::BigRational;

fn int(v: i64) -> BigRational {
    BigRational::from_integer(v.into())
}

/// Catalog channel on the unit band.
pub fn unit_channel(name: &str, power: i64) -> ChannelSpec {
    ChannelSpec::from_catalog(name, int(1), int(power)).expect("catalog entry")
}
