//! Consensus messages and their canonical wire form.
//!
//! A message encodes as five length-prefixed fields in order: kind, sender,
//! slot, payload, signature. Each prefix is a little-endian `u32` byte count.
//! Scalars are little-endian; the kind is one byte (1 PREPARE, 2 SYNC,
//! 3 COMMIT). Payloads:
//!
//! * PREPARE: 32-byte parameter digest, `u32` test hits, `f64` reward.
//! * SYNC: `u32` recipient, then `0` for null or `1` followed by the sealed bytes.
//! * COMMIT: one byte, `1` true and `0` false.
//!
//! The signature covers the encoding of the first four fields.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::crypto::CryptoProvider;
use crate::error::{domain, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum MessageKind {
    Prepare,
    Sync,
    Commit,
}

impl MessageKind {
    fn tag(self) -> u8 {
        match self {
            MessageKind::Prepare => 1,
            MessageKind::Sync => 2,
            MessageKind::Commit => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Payload {
    Prepare {
        params_digest: [u8; 32],
        test_hits: u32,
        reward: f64,
    },
    Sync {
        recipient: u32,
        sealed: Option<Vec<u8>>,
    },
    Commit {
        vote: bool,
    },
}

impl Payload {
    pub fn kind(&self) -> MessageKind {
        match self {
            Payload::Prepare { .. } => MessageKind::Prepare,
            Payload::Sync { .. } => MessageKind::Sync,
            Payload::Commit { .. } => MessageKind::Commit,
        }
    }

    fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        match self {
            Payload::Prepare {
                params_digest,
                test_hits,
                reward,
            } => {
                out.extend_from_slice(params_digest);
                out.extend_from_slice(&test_hits.to_le_bytes());
                out.extend_from_slice(&reward.to_bits().to_le_bytes());
            }
            Payload::Sync { recipient, sealed } => {
                out.extend_from_slice(&recipient.to_le_bytes());
                match sealed {
                    None => out.push(0),
                    Some(s) => {
                        out.push(1);
                        out.extend_from_slice(s);
                    }
                }
            }
            Payload::Commit { vote } => out.push(*vote as u8),
        }
        out
    }

    fn decode(kind: u8, b: &[u8]) -> Result<Self> {
        let bad = || domain("malformed payload");
        match kind {
            1 if b.len() == 44 => Ok(Payload::Prepare {
                params_digest: b[..32].try_into().map_err(|_| bad())?,
                test_hits: u32::from_le_bytes(b[32..36].try_into().map_err(|_| bad())?),
                reward: f64::from_bits(u64::from_le_bytes(
                    b[36..44].try_into().map_err(|_| bad())?,
                )),
            }),
            2 if b.len() >= 5 => {
                let recipient = u32::from_le_bytes(b[..4].try_into().map_err(|_| bad())?);
                let sealed = match b[4] {
                    0 if b.len() == 5 => None,
                    1 => Some(b[5..].to_vec()),
                    _ => return Err(bad()),
                };
                Ok(Payload::Sync { recipient, sealed })
            }
            3 if b.len() == 1 && b[0] <= 1 => Ok(Payload::Commit { vote: b[0] == 1 }),
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsensusMessage {
    pub sender: u32,
    pub slot: u64,
    pub payload: Payload,
    pub signature: Vec<u8>,
}

fn put_field(out: &mut Vec<u8>, field: &[u8]) {
    out.extend_from_slice(&(field.len() as u32).to_le_bytes());
    out.extend_from_slice(field);
}

impl ConsensusMessage {
    pub fn signed<C: CryptoProvider + ?Sized>(
        crypto: &C,
        sender: u32,
        slot: u64,
        payload: Payload,
    ) -> Self {
        let mut msg = Self {
            sender,
            slot,
            payload,
            signature: Vec::new(),
        };
        msg.signature = crypto.sign(sender, &msg.signing_bytes());
        msg
    }

    pub fn kind(&self) -> MessageKind {
        self.payload.kind()
    }

    /// First four canonical fields.
    pub fn signing_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        put_field(&mut out, &[self.kind().tag()]);
        put_field(&mut out, &self.sender.to_le_bytes());
        put_field(&mut out, &self.slot.to_le_bytes());
        put_field(&mut out, &self.payload.encode());
        out
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = self.signing_bytes();
        put_field(&mut out, &self.signature);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut rest = bytes;
        let mut fields: Vec<&[u8]> = Vec::with_capacity(5);
        for _ in 0..5 {
            if rest.len() < 4 {
                return Err(domain("truncated message"));
            }
            let len = u32::from_le_bytes(rest[..4].try_into().expect("4 bytes")) as usize;
            rest = &rest[4..];
            if rest.len() < len {
                return Err(domain("truncated message field"));
            }
            fields.push(&rest[..len]);
            rest = &rest[len..];
        }
        if !rest.is_empty() {
            return Err(domain("trailing bytes after message"));
        }
        let [kind, sender, slot, payload, signature] = fields[..] else {
            unreachable!()
        };
        if kind.len() != 1 {
            return Err(domain("bad kind field"));
        }
        Ok(Self {
            sender: u32::from_le_bytes(sender.try_into().map_err(|_| domain("bad sender field"))?),
            slot: u64::from_le_bytes(slot.try_into().map_err(|_| domain("bad slot field"))?),
            payload: Payload::decode(kind[0], payload)?,
            signature: signature.to_vec(),
        })
    }

    pub fn verify<C: CryptoProvider + ?Sized>(&self, crypto: &C) -> bool {
        crypto.verify(self.sender, &self.signing_bytes(), &self.signature)
    }
}

/// Little-endian `f64` dump used for parameter transport and digests.
pub fn params_to_bytes(params: &[f64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + 8 * params.len());
    out.extend_from_slice(&(params.len() as u64).to_le_bytes());
    for p in params {
        out.extend_from_slice(&p.to_bits().to_le_bytes());
    }
    out
}

pub fn params_from_bytes(bytes: &[u8]) -> Result<Vec<f64>> {
    let bad = || domain("malformed parameter block");
    let n = u64::from_le_bytes(
        bytes
            .get(..8)
            .ok_or_else(bad)?
            .try_into()
            .map_err(|_| bad())?,
    ) as usize;
    let body = &bytes[8..];
    if body.len() != n.checked_mul(8).ok_or_else(bad)? {
        return Err(bad());
    }
    Ok(body
        .chunks_exact(8)
        .map(|c| f64::from_bits(u64::from_le_bytes(c.try_into().expect("8 bytes"))))
        .collect())
}

pub fn params_digest(params: &[f64]) -> [u8; 32] {
    Sha256::digest(params_to_bytes(params)).into()
}
