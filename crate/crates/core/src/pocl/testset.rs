use rand::seq::SliceRandom;
use rand::SeedableRng;
use sha2::{Digest, Sha256};

use crate::catalog::ContentId;
use crate::rng::SimRng;

/// Digest of the canonical form of the previous slot's requests: a `u64`
/// count followed by each id as `u32`, all little-endian.
pub fn requests_digest(previous: &[ContentId]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update((previous.len() as u64).to_le_bytes());
    for id in previous {
        h.update(id.to_le_bytes());
    }
    h.finalize().into()
}

/// Test requests every oracle derives identically from the previous slot's
/// request sequence. The sequence is shuffled by a generator keyed on its
/// digest and truncated to `size`, cycling when `size` exceeds its length.
/// Slot 0, or an empty history, uses ids `1, 2, ..` cycled over the catalog.
pub fn shared_test_set(
    previous: &[ContentId],
    size: usize,
    slot: u64,
    num_contents: u32,
) -> Vec<ContentId> {
    if slot == 0 || previous.is_empty() {
        let f = num_contents.max(1);
        return (0..size).map(|k| (k as u32 % f) + 1).collect();
    }
    let mut rng = SimRng::from_seed(requests_digest(previous));
    let mut order = previous.to_vec();
    order.shuffle(&mut rng);
    order.into_iter().cycle().take(size).collect()
}
