use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::EnergyError;

const BUILTIN: &str = include_str!("../../data/cost_tables.json");

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Medium {
    #[serde(rename = "ble")]
    Ble,
    #[serde(rename = "wifi")]
    Wifi,
    #[serde(rename = "4g")]
    FourG,
}

impl Medium {
    pub const ALL: [Medium; 3] = [Medium::Ble, Medium::Wifi, Medium::FourG];

    pub fn name(self) -> &'static str {
        match self {
            Medium::Ble => "ble",
            Medium::Wifi => "wifi",
            Medium::FourG => "4g",
        }
    }
}

impl fmt::Display for Medium {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Medium {
    type Err = EnergyError;
    fn from_str(s: &str) -> Result<Medium, EnergyError> {
        Medium::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| EnergyError::UnknownEntry(format!("medium {s}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CryptoScheme {
    Bp160r1,
    Bp256r1,
    Secp192r1,
    Secp192k1,
    Secp224r1,
    Secp256r1,
    Secp256k1,
    Rsa1024,
    Rsa1260,
    Rsa2048,
    Hmac,
}

impl CryptoScheme {
    pub const ALL: [CryptoScheme; 11] = [
        CryptoScheme::Bp160r1,
        CryptoScheme::Bp256r1,
        CryptoScheme::Secp192r1,
        CryptoScheme::Secp192k1,
        CryptoScheme::Secp224r1,
        CryptoScheme::Secp256r1,
        CryptoScheme::Secp256k1,
        CryptoScheme::Rsa1024,
        CryptoScheme::Rsa1260,
        CryptoScheme::Rsa2048,
        CryptoScheme::Hmac,
    ];

    pub fn name(self) -> String {
        serde_json::to_value(self)
            .ok()
            .and_then(|v| v.as_str().map(str::to_string))
            .unwrap_or_default()
    }
}

impl fmt::Display for CryptoScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for CryptoScheme {
    type Err = EnergyError;
    fn from_str(s: &str) -> Result<CryptoScheme, EnergyError> {
        let norm: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        CryptoScheme::ALL
            .into_iter()
            .find(|c| c.name() == norm)
            .ok_or_else(|| EnergyError::UnknownEntry(format!("crypto scheme {s}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Primitive {
    Send,
    Recv,
    Multicast,
}

/// How a BLE k-cast is priced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KcastPricing {
    /// Redundant advertisements at the table's reliability point, per fragment.
    #[default]
    Reliable,
    /// One unconfirmed transmission, priced from the multicast column.
    Raw,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MediumTable {
    pub sizes: Vec<u64>,
    pub send: Vec<f64>,
    pub recv: Vec<f64>,
    pub multicast: Option<Vec<f64>>,
    pub provenance: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReliabilityPoint {
    pub reliability: f64,
    /// mJ per fragment.
    pub send: f64,
    pub recv: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KcastReliability {
    pub medium: Medium,
    pub fragment_bytes: u64,
    pub points: Vec<ReliabilityPoint>,
    pub provenance: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CryptoCost {
    /// J per signature.
    pub sign: f64,
    /// J per verification.
    pub verify: f64,
    pub signature_bytes: usize,
}

/// A priced table lookup. `extrapolated` is set when the size falls
/// outside the measured range.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Priced {
    pub mj: f64,
    pub extrapolated: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostTable {
    pub version: u32,
    pub media: BTreeMap<Medium, MediumTable>,
    pub kcast_reliability: KcastReliability,
    pub crypto: BTreeMap<CryptoScheme, CryptoCost>,
    pub crypto_provenance: String,
}

impl CostTable {
    pub fn builtin() -> CostTable {
        CostTable::from_json(BUILTIN).expect("builtin cost table is valid")
    }

    pub fn from_json(s: &str) -> Result<CostTable, EnergyError> {
        let t: CostTable =
            serde_json::from_str(s).map_err(|e| EnergyError::UnknownEntry(e.to_string()))?;
        t.validate()?;
        Ok(t)
    }

    fn validate(&self) -> Result<(), EnergyError> {
        for (m, t) in &self.media {
            let n = t.sizes.len();
            let cols = [Some(&t.send), Some(&t.recv), t.multicast.as_ref()];
            if n == 0 || cols.iter().flatten().any(|c| c.len() != n) {
                return Err(EnergyError::UnknownEntry(format!("{m}: ragged columns")));
            }
            if t.sizes.windows(2).any(|w| w[0] >= w[1]) {
                return Err(EnergyError::UnknownEntry(format!("{m}: sizes not increasing")));
            }
            for c in cols.iter().flatten() {
                if c.iter().any(|x| *x < 0.0) || c.windows(2).any(|w| w[0] > w[1]) {
                    return Err(EnergyError::UnknownEntry(format!("{m}: not monotone")));
                }
            }
        }
        if self.kcast_reliability.points.is_empty() || self.kcast_reliability.fragment_bytes == 0 {
            return Err(EnergyError::UnknownEntry("kcast_reliability".into()));
        }
        Ok(())
    }

    pub fn medium(&self, m: Medium) -> Result<&MediumTable, EnergyError> {
        self.media
            .get(&m)
            .ok_or_else(|| EnergyError::UnknownEntry(format!("medium {m}")))
    }

    pub fn crypto(&self, c: CryptoScheme) -> Result<CryptoCost, EnergyError> {
        self.crypto
            .get(&c)
            .copied()
            .ok_or_else(|| EnergyError::UnknownEntry(format!("crypto {c}")))
    }

    fn column(&self, m: Medium, p: Primitive) -> Result<(&[u64], &[f64]), EnergyError> {
        let t = self.medium(m)?;
        let col = match p {
            Primitive::Send => &t.send,
            Primitive::Recv => &t.recv,
            Primitive::Multicast => t
                .multicast
                .as_ref()
                .ok_or_else(|| EnergyError::UnknownEntry(format!("{m} multicast")))?,
        };
        Ok((&t.sizes, col))
    }

    /// Linear interpolation between measured sizes, anchored at zero bytes.
    /// Sizes past the last point extend the final segment.
    pub fn lookup(&self, m: Medium, p: Primitive, bytes: u64) -> Result<Priced, EnergyError> {
        let (sizes, col) = self.column(m, p)?;
        let extrapolated = bytes < sizes[0] || bytes > sizes[sizes.len() - 1];
        let mut xs = vec![0.0];
        let mut ys = vec![0.0];
        xs.extend(sizes.iter().map(|s| *s as f64));
        ys.extend(col.iter().copied());
        let x = bytes as f64;
        let i = (1..xs.len()).find(|&i| x <= xs[i]).unwrap_or(xs.len() - 1);
        let (x0, x1, y0, y1) = (xs[i - 1], xs[i], ys[i - 1], ys[i]);
        let mj = y0 + (y1 - y0) * (x - x0) / (x1 - x0);
        Ok(Priced { mj, extrapolated })
    }

    /// Least-squares slope through the origin, in mJ per byte.
    pub fn per_byte(&self, m: Medium, p: Primitive) -> Result<f64, EnergyError> {
        let (sizes, col) = self.column(m, p)?;
        let num: f64 = sizes.iter().zip(col).map(|(s, y)| *s as f64 * y).sum();
        let den: f64 = sizes.iter().map(|s| (*s as f64).powi(2)).sum();
        Ok(num / den)
    }

    /// Highest-reliability point at or above `target`.
    pub fn reliability_point(&self, target: f64) -> Result<&ReliabilityPoint, EnergyError> {
        self.kcast_reliability
            .points
            .iter()
            .filter(|p| p.reliability >= target)
            .min_by(|a, b| a.reliability.total_cmp(&b.reliability))
            .ok_or_else(|| EnergyError::UnknownEntry(format!("reliability {target}")))
    }

    pub fn fragments(&self, bytes: u64) -> u64 {
        bytes.div_ceil(self.kcast_reliability.fragment_bytes)
    }

    /// Sender and per-receiver cost (mJ) of one reliable k-cast of `bytes`.
    pub fn kcast_cost(&self, bytes: u64, pricing: KcastPricing) -> Result<(Priced, Priced), EnergyError> {
        match pricing {
            KcastPricing::Reliable => {
                let pt = self.reliability_point(0.9999)?;
                let fr = self.fragments(bytes) as f64;
                let p = |mj| Priced {
                    mj,
                    extrapolated: false,
                };
                Ok((p(pt.send * fr), p(pt.recv * fr)))
            }
            KcastPricing::Raw => Ok((
                self.lookup(Medium::Ble, Primitive::Multicast, bytes)?,
                self.lookup(Medium::Ble, Primitive::Recv, bytes)?,
            )),
        }
    }

    /// Send and receive cost per byte in J, as used by the analytic models.
    pub fn link_rates(&self, m: Medium, pricing: KcastPricing) -> Result<(f64, f64), EnergyError> {
        if m == self.kcast_reliability.medium && pricing == KcastPricing::Reliable {
            let pt = self.reliability_point(0.9999)?;
            let fb = self.kcast_reliability.fragment_bytes as f64;
            return Ok((pt.send / fb / 1000.0, pt.recv / fb / 1000.0));
        }
        let send = if m == Medium::Ble && pricing == KcastPricing::Raw {
            self.per_byte(m, Primitive::Multicast)?
        } else {
            self.per_byte(m, Primitive::Send)?
        };
        Ok((send / 1000.0, self.per_byte(m, Primitive::Recv)? / 1000.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn measured_points_round_trip() {
        let t = CostTable::builtin();
        let p = t.lookup(Medium::Wifi, Primitive::Send, 512).unwrap();
        assert_eq!(p.mj, 153.98);
        assert!(!p.extrapolated);
        let e = t.lookup(Medium::FourG, Primitive::Send, 4096).unwrap();
        assert!(e.extrapolated);
        assert!((e.mj - 2.0 * 3958.72).abs() < 1e-9);
    }

    #[test]
    fn scheme_names_parse() {
        assert_eq!("RSA-1024".parse::<CryptoScheme>().unwrap(), CryptoScheme::Rsa1024);
        assert_eq!("4G".parse::<Medium>().unwrap(), Medium::FourG);
    }
}
