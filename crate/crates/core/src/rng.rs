//! Random streams.
//!
//! Every stream is a ChaCha8 generator keyed by the master seed with a 64-bit
//! stream id, so streams are independent and can be created in any order.
//! Normal variates come from `rand_distr::StandardNormal` (ziggurat) and
//! resampling indices from `floor(U · n)` with `U` uniform on `[0, 1)`.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Stream id reserved for simulating the data of a replication.
pub const DATA_PURPOSE: u64 = 0;

/// `(replication, purpose)` packed into a ChaCha stream id. `purpose` keeps
/// its low 16 bits.
pub fn stream_id(replication: u64, purpose: u64) -> u64 {
    (replication << 16) | (purpose & 0xffff)
}

pub fn stream(master: u64, id: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(id);
    rng
}

/// Uniform index in `0..n` as `floor(U · n)`.
#[inline]
pub fn uniform_index<R: Rng + ?Sized>(rng: &mut R, n: usize) -> usize {
    let u: f64 = rng.random();
    ((u * n as f64) as usize).min(n - 1)
}

/// 64-bit FNV-1a, used to give configuration variants stable stream ids.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<u64> = (0..4).map(|_| stream(1, 5).random()).collect();
        let mut s = stream(1, 5);
        let b: Vec<u64> = (0..4).map(|_| s.random()).collect();
        assert_eq!(a[0], b[0]);
        let mut t = stream(1, 6);
        assert_ne!(b[0], t.random::<u64>());
        let mut u = stream(2, 5);
        assert_ne!(b[0], u.random::<u64>());
    }

    #[test]
    fn index_in_range() {
        let mut r = stream(0, 0);
        for _ in 0..10_000 {
            assert!(uniform_index(&mut r, 7) < 7);
        }
    }

    #[test]
    fn stream_ids_do_not_overlap() {
        assert_ne!(stream_id(1, 0), stream_id(0, 1));
        assert_eq!(stream_id(3, 0x1_0002), stream_id(3, 2));
    }
}
