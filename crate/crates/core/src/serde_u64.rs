//! TOML integers are signed 64-bit; seeds are written as hex strings so the
//! full `u64` range survives a round trip. Plain integers are accepted on input.

use serde::{de, Deserialize, Deserializer, Serializer};

pub fn serialize<S: Serializer>(value: &u64, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&format!("{value:#018x}"))
}

pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Int(i64),
        Str(String),
    }
    match Repr::deserialize(d)? {
        Repr::Int(v) if v >= 0 => Ok(v as u64),
        Repr::Int(v) => Err(de::Error::custom(format!("seed must be non-negative, got {v}"))),
        Repr::Str(s) => parse(&s).map_err(de::Error::custom),
    }
}

pub fn parse(s: &str) -> Result<u64, String> {
    let t = s.trim();
    let parsed = match t.strip_prefix("0x").or_else(|| t.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(&hex.replace('_', ""), 16),
        None => t.replace('_', "").parse(),
    };
    parsed.map_err(|e| format!("invalid seed `{s}`: {e}"))
}

#[cfg(test)]
mod tests {
    use serde::{Deserialize, Serialize};

    #[derive(Serialize, Deserialize, PartialEq, Debug)]
    struct S {
        #[serde(with = "super")]
        seed: u64,
    }

    #[test]
    fn round_trip_and_integer_input() {
        let s = S { seed: u64::MAX };
        let text = toml::to_string(&s).unwrap();
        assert_eq!(toml::from_str::<S>(&text).unwrap(), s);
        assert_eq!(toml::from_str::<S>("seed = 42").unwrap().seed, 42);
        assert!(toml::from_str::<S>("seed = -1").is_err());
    }
}
