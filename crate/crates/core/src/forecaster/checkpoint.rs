//! Checkpoint file for the reference network.
//!
//! Layout, little-endian:
//!
//! | bytes | field |
//! |-------|-------|
//! | 4     | magic `MVCK` |
//! | 2     | version (1) |
//! | 2     | reserved, 0 |
//! | 32    | digest of the run configuration |
//! | 4 × 4 | `h`, lookback, horizon, hidden width |
//! | 8     | parameter count `n` |
//! | 8 × n | parameters as `f64` |

use super::{NetShape, ReferenceNet};
use crate::error::{Error, Result};

pub const MVCK_MAGIC: [u8; 4] = *b"MVCK";
pub const MVCK_VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 2 + 32 + 16 + 8;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub digest: [u8; 32],
    pub net: ReferenceNet,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let shape = self.net.shape();
        let theta = self.net.theta();
        let mut out = Vec::with_capacity(HEADER_LEN + 8 * theta.len());
        out.extend_from_slice(&MVCK_MAGIC);
        out.extend_from_slice(&MVCK_VERSION.to_le_bytes());
        out.extend_from_slice(&0u16.to_le_bytes());
        out.extend_from_slice(&self.digest);
        for dim in [shape.height, shape.lookback, shape.horizon, shape.hidden] {
            out.extend_from_slice(&(dim as u32).to_le_bytes());
        }
        out.extend_from_slice(&(theta.len() as u64).to_le_bytes());
        for t in theta {
            out.extend_from_slice(&t.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |reason: String| Error::format("MVCK", reason);
        if bytes.len() < HEADER_LEN {
            return Err(bad(format!("truncated header ({} bytes)", bytes.len())));
        }
        if bytes[..4] != MVCK_MAGIC {
            return Err(bad("bad magic".into()));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != MVCK_VERSION {
            return Err(bad(format!("unsupported version {version}")));
        }
        let digest: [u8; 32] = bytes[8..40].try_into().unwrap();
        let dim = |n: usize| u32::from_le_bytes(bytes[40 + 4 * n..44 + 4 * n].try_into().unwrap()) as usize;
        let shape = NetShape {
            height: dim(0),
            lookback: dim(1),
            horizon: dim(2),
            hidden: dim(3),
        };
        let count = u64::from_le_bytes(bytes[56..64].try_into().unwrap()) as usize;
        let payload = &bytes[HEADER_LEN..];
        if Some(payload.len()) != count.checked_mul(8) {
            return Err(bad(format!(
                "payload is {} bytes, header declares {count} parameters",
                payload.len()
            )));
        }
        let theta = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Checkpoint {
            digest,
            net: ReferenceNet::from_parameters(shape, theta)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn roundtrip_and_rejects() {
        let shape = NetShape {
            height: 4,
            lookback: 3,
            horizon: 2,
            hidden: 5,
        };
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let ck = Checkpoint {
            digest: [7; 32],
            net: ReferenceNet::initialize(shape, 1.0, &mut rng).unwrap(),
        };
        let bytes = ck.to_bytes();
        assert_eq!(bytes.len(), HEADER_LEN + 8 * shape.parameter_count());
        assert_eq!(Checkpoint::from_bytes(&bytes).unwrap(), ck);

        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 3]).is_err());
        let mut magic = bytes.clone();
        magic[1] = 0;
        assert!(Checkpoint::from_bytes(&magic).is_err());
        let mut dims = bytes;
        dims[40] = 9;
        assert!(Checkpoint::from_bytes(&dims).is_err());
    }
}
