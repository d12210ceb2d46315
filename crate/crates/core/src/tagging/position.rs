//! Signed distance buckets for the sentence CNN.

use serde::{Deserialize, Serialize};

/// A bucket: `sign` is −1, 0 or +1; `magnitude` 0 for the target itself,
/// 1–5 for those exact distances, 6 for 6–10, 7 for 11–20, 8 beyond 20.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PositionBucket {
    pub sign: i8,
    pub magnitude: u8,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PositionBucketizer;

impl PositionBucketizer {
    pub const NUM_BUCKETS: usize = 17;
    pub const EMBEDDING_DIM: usize = 5;
    const MAX_MAGNITUDE: i64 = 8;

    pub fn bucket(self, distance: i64) -> PositionBucket {
        let d = distance.unsigned_abs();
        let magnitude = match d {
            0..=5 => d as u8,
            6..=10 => 6,
            11..=20 => 7,
            _ => 8,
        };
        PositionBucket { sign: distance.signum() as i8, magnitude }
    }

    /// Dense index in `0..17`; the zero bucket sits at 8.
    pub fn index(self, distance: i64) -> usize {
        let b = self.bucket(distance);
        (Self::MAX_MAGNITUDE + b.sign as i64 * b.magnitude as i64) as usize
    }
}
