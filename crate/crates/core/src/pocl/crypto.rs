//! Pluggable signing and sealing.
//!
//! [`SimCrypto`] stands in for the on-chain key registry: every oracle gets a
//! secret derived from the run seed, signatures are HMAC-SHA256 tags, and
//! sealing is a SHA-256 counter keystream with an HMAC tag over the
//! ciphertext. It gives integrity and attributability inside one process and
//! nothing more.

use hmac::{Hmac, Mac};
use sha2::{Digest, Sha256};

type HmacSha256 = Hmac<Sha256>;

pub const SIGNATURE_LEN: usize = 32;

pub trait CryptoProvider {
    fn sign(&self, signer: u32, bytes: &[u8]) -> Vec<u8>;
    fn verify(&self, signer: u32, bytes: &[u8], signature: &[u8]) -> bool;
    /// Encrypt for `recipient` only.
    fn seal(&self, recipient: u32, nonce: &[u8], plaintext: &[u8]) -> Vec<u8>;
    /// `None` when the tag does not verify.
    fn unseal(&self, recipient: u32, nonce: &[u8], sealed: &[u8]) -> Option<Vec<u8>>;
}

#[derive(Debug, Clone)]
pub struct SimCrypto {
    keys: Vec<[u8; 32]>,
}

impl SimCrypto {
    pub fn new(seed: u64, oracles: usize) -> Self {
        let keys = (0..oracles as u64)
            .map(|m| crate::rng::stream_key(seed, "oracle-secret", &[m]))
            .collect();
        Self { keys }
    }

    fn key(&self, oracle: u32) -> Option<&[u8; 32]> {
        self.keys.get(oracle as usize)
    }

    fn mac(key: &[u8; 32], parts: &[&[u8]]) -> HmacSha256 {
        let mut mac = HmacSha256::new_from_slice(key).expect("any key length");
        for p in parts {
            mac.update(p);
        }
        mac
    }

    fn keystream_xor(key: &[u8; 32], nonce: &[u8], data: &mut [u8]) {
        for (block, chunk) in data.chunks_mut(32).enumerate() {
            let pad = Sha256::new()
                .chain_update(key)
                .chain_update((nonce.len() as u32).to_le_bytes())
                .chain_update(nonce)
                .chain_update((block as u64).to_le_bytes())
                .finalize();
            chunk.iter_mut().zip(pad.iter()).for_each(|(b, p)| *b ^= p);
        }
    }
}

impl CryptoProvider for SimCrypto {
    fn sign(&self, signer: u32, bytes: &[u8]) -> Vec<u8> {
        match self.key(signer) {
            Some(k) => Self::mac(k, &[bytes]).finalize().into_bytes().to_vec(),
            None => vec![0; SIGNATURE_LEN],
        }
    }

    fn verify(&self, signer: u32, bytes: &[u8], signature: &[u8]) -> bool {
        self.key(signer)
            .is_some_and(|k| Self::mac(k, &[bytes]).verify_slice(signature).is_ok())
    }

    fn seal(&self, recipient: u32, nonce: &[u8], plaintext: &[u8]) -> Vec<u8> {
        let Some(key) = self.key(recipient) else {
            return Vec::new();
        };
        let mut out = plaintext.to_vec();
        Self::keystream_xor(key, nonce, &mut out);
        let tag = Self::mac(key, &[nonce, &out]).finalize().into_bytes();
        out.extend_from_slice(&tag);
        out
    }

    fn unseal(&self, recipient: u32, nonce: &[u8], sealed: &[u8]) -> Option<Vec<u8>> {
        let key = self.key(recipient)?;
        let split = sealed.len().checked_sub(SIGNATURE_LEN)?;
        let (body, tag) = sealed.split_at(split);
        Self::mac(key, &[nonce, body]).verify_slice(tag).ok()?;
        let mut out = body.to_vec();
        Self::keystream_xor(key, nonce, &mut out);
        Some(out)
    }
}
