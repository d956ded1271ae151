//! Seed derivation. Every random stream in the crate is a ChaCha8 generator
//! keyed by a 64-bit seed derived from a master seed by fixed arithmetic, so
//! results never depend on scheduling or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the `index`-th child stream of `parent` under a `tag`.
pub fn derive(parent: u64, tag: u64, index: u64) -> u64 {
    mix(mix(parent ^ tag.wrapping_mul(0xD6E8_FEB8_6659_FD93)).wrapping_add(index))
}

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Tags separating the streams a trial consumes.
pub mod tag {
    pub const TRIAL: u64 = 1;
    pub const PLANT: u64 = 2;
    pub const POLICY_INIT: u64 = 3;
    pub const PROPAGATION: u64 = 4;
    pub const FIT: u64 = 5;
}

/// Serde adapter for seeds in formats whose integers are signed 64-bit
/// (TOML): values above `i64::MAX` are written as decimal strings, and
/// either form is read back.
pub mod text {
    use alloc::string::ToString;
    use core::fmt;

    use serde::de::{self, Visitor};
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &u64, s: S) -> Result<S::Ok, S::Error> {
        if i64::try_from(*v).is_ok() {
            s.serialize_u64(*v)
        } else {
            s.serialize_str(&v.to_string())
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
        d.deserialize_any(SeedVisitor)
    }

    struct SeedVisitor;

    impl Visitor<'_> for SeedVisitor {
        type Value = u64;

        fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
            f.write_str("a non-negative integer or a decimal string")
        }

        fn visit_u64<E: de::Error>(self, v: u64) -> Result<u64, E> {
            Ok(v)
        }

        fn visit_i64<E: de::Error>(self, v: i64) -> Result<u64, E> {
            u64::try_from(v).map_err(|_| E::custom("seeds are non-negative"))
        }

        fn visit_str<E: de::Error>(self, v: &str) -> Result<u64, E> {
            v.trim().parse().map_err(|_| E::custom("seed string is not a 64-bit unsigned integer"))
        }
    }

    /// The same for a list of seeds.
    pub mod list {
        use alloc::vec::Vec;

        use serde::{Deserialize, Deserializer, Serialize, Serializer};

        #[derive(Serialize, Deserialize)]
        struct Item(#[serde(with = "super")] u64);

        pub fn serialize<S: Serializer>(v: &[u64], s: S) -> Result<S::Ok, S::Error> {
            s.collect_seq(v.iter().map(|&x| Item(x)))
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u64>, D::Error> {
            Ok(Vec::<Item>::deserialize(d)?.into_iter().map(|i| i.0).collect())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivation_is_stable_and_spreads() {
        assert_eq!(derive(7, tag::TRIAL, 0), derive(7, tag::TRIAL, 0));
        assert_ne!(derive(7, tag::TRIAL, 0), derive(7, tag::TRIAL, 1));
        assert_ne!(derive(7, tag::TRIAL, 0), derive(7, tag::PLANT, 0));
        assert_ne!(derive(7, tag::TRIAL, 0), derive(8, tag::TRIAL, 0));
    }
}
