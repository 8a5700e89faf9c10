//! Binary checkpoints of a learner.
//!
//! Layout, all integers little-endian:
//! `magic (8) | version u32 | header length u32 | header JSON | env_steps u64 |
//!  updates u64 | theta | target | adam m | adam v | adam t u64 |
//!  rng seed (32) | rng stream u64 | rng word position u128`,
//! where each float vector is a u64 length followed by IEEE-754 bit patterns.

use std::io::{Read, Write};
use std::path::Path;

use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::drl::learner::QmixLearner;
use crate::drl::nn::Adam;
use crate::drl::train::TrainConfig;
use crate::error::{Error, Result};
use crate::rng::SimRng;

pub const MAGIC: &[u8; 8] = b"COOPQMIX";
pub const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    config: TrainConfig,
    agents: usize,
}

/// A decoded checkpoint. `config.learner` holds the learner parameters.
pub struct Checkpoint {
    pub learner: QmixLearner,
    pub config: TrainConfig,
    pub env_steps: u64,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

fn put_vec(out: &mut Vec<u8>, v: &[f64]) {
    out.extend((v.len() as u64).to_le_bytes());
    for x in v {
        out.extend(x.to_bits().to_le_bytes());
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() < n {
            return Err(bad("truncated checkpoint"));
        }
        let (head, tail) = self.bytes.split_at(n);
        self.bytes = tail;
        Ok(head)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    fn vec(&mut self, expect: usize) -> Result<Vec<f64>> {
        let n = self.u64()? as usize;
        if n != expect {
            return Err(bad(format!("vector of length {n}, expected {expect}")));
        }
        let raw = self.take(n.checked_mul(8).ok_or_else(|| bad("length overflow"))?)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_bits(u64::from_le_bytes(c.try_into().expect("8 bytes"))))
            .collect())
    }
}

/// The header stores `config` with its learner section replaced by the
/// learner's own parameters.
pub fn encode(learner: &QmixLearner, config: &TrainConfig, env_steps: u64) -> Result<Vec<u8>> {
    let header = serde_json::to_vec(&Header {
        config: TrainConfig {
            learner: learner.params.clone(),
            ..config.clone()
        },
        agents: learner.agents(),
    })?;
    let mut out = Vec::new();
    out.extend(MAGIC);
    out.extend(VERSION.to_le_bytes());
    out.extend((header.len() as u32).to_le_bytes());
    out.extend(&header);
    out.extend(env_steps.to_le_bytes());
    out.extend(learner.updates().to_le_bytes());
    put_vec(&mut out, learner.theta());
    put_vec(&mut out, learner.target());
    let adam = learner.adam();
    put_vec(&mut out, &adam.m);
    put_vec(&mut out, &adam.v);
    out.extend(adam.t.to_le_bytes());
    let rng = learner.rng();
    out.extend(rng.get_seed());
    out.extend(rng.get_stream().to_le_bytes());
    out.extend(rng.get_word_pos().to_le_bytes());
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> Result<Checkpoint> {
    let mut c = Cursor { bytes };
    if c.take(8)? != MAGIC {
        return Err(bad("not a checkpoint (bad magic)"));
    }
    let version = c.u32()?;
    if version != VERSION {
        return Err(bad(format!("unsupported checkpoint version {version}")));
    }
    let hlen = c.u32()? as usize;
    let header: Header = serde_json::from_slice(c.take(hlen)?)?;
    let mut learner = QmixLearner::new(header.config.learner.clone(), header.agents, 0)?;
    let n = learner.theta().len();
    let env_steps = c.u64()?;
    let updates = c.u64()?;
    let theta = c.vec(n)?;
    let target = c.vec(n)?;
    let mut adam = Adam::new(n, learner.params.lr);
    adam.m = c.vec(n)?;
    adam.v = c.vec(n)?;
    adam.t = c.u64()?;
    let seed: [u8; 32] = c.take(32)?.try_into().expect("32 bytes");
    let stream = c.u64()?;
    let word_pos = u128::from_le_bytes(c.take(16)?.try_into().expect("16 bytes"));
    if !c.bytes.is_empty() {
        return Err(bad("trailing bytes after checkpoint"));
    }
    let mut rng = SimRng::from_seed(seed);
    rng.set_stream(stream);
    rng.set_word_pos(word_pos);
    learner.restore(theta, target, adam, rng, updates);
    Ok(Checkpoint {
        learner,
        config: header.config,
        env_steps,
    })
}

pub fn save(
    path: &Path,
    learner: &QmixLearner,
    config: &TrainConfig,
    env_steps: u64,
) -> Result<()> {
    let bytes = encode(learner, config, env_steps)?;
    std::fs::File::create(path)?.write_all(&bytes)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Checkpoint> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode(&bytes)
}
