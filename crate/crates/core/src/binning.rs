use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};

/// Partition of headings into `k` equal arcs.
///
/// Bin `i` (0-based) covers `[offset + i*2pi/k, offset + (i+1)*2pi/k)` modulo
/// 2pi. The default offset `-pi/k` centers bin 0 on east (heading 0) and bin
/// `i` on heading `i*2pi/k`, so for k = 8 the bins point at the eight
/// neighbouring cells counter-clockwise from east. Offset 0 gives arcs that
/// start at heading 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinningSpec {
    k: usize,
    offset: f64,
}

impl Default for BinningSpec {
    fn default() -> Self {
        BinningSpec::centered(8).expect("k = 8 is valid")
    }
}

/// Wraps an angle into `[0, 2pi)`.
#[inline]
pub fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(TAU);
    // rem_euclid can round up to exactly 2pi for tiny negative inputs
    if w >= TAU {
        0.0
    } else {
        w
    }
}

impl BinningSpec {
    pub fn new(k: usize, offset: f64) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidBinning(format!("k must be at least 2, got {k}")));
        }
        if !(offset > -TAU && offset < TAU) {
            return Err(Error::InvalidBinning(format!("offset {offset} outside (-2pi, 2pi)")));
        }
        Ok(BinningSpec { k, offset })
    }

    /// Bins centered on the headings `i * 2pi / k`.
    pub fn centered(k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidBinning(format!("k must be at least 2, got {k}")));
        }
        Self::new(k, -PI / k as f64)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn width(&self) -> f64 {
        TAU / self.k as f64
    }

    pub fn bin(&self, delta: f64) -> Result<usize> {
        if !delta.is_finite() {
            return Err(Error::NonFiniteAngle(delta));
        }
        let w = wrap_angle(wrap_angle(delta) - self.offset);
        let i = (w / self.width()).floor() as usize;
        Ok(i.min(self.k - 1))
    }

    /// Heading at the middle of bin `i`, wrapped into `[0, 2pi)`.
    pub fn center(&self, i: usize) -> f64 {
        wrap_angle(self.offset + (i as f64 + 0.5) * self.width())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn centered_examples() {
        let b = BinningSpec::default();
        assert_eq!(b.bin(0.0).unwrap(), 0);
        assert_eq!(b.bin(PI / 2.0).unwrap(), 2);
        assert_eq!(b.bin(TAU - 0.01).unwrap(), 0);
        assert_eq!(b.bin(PI).unwrap(), 4);
        assert_eq!(b.bin(-PI / 2.0).unwrap(), 6);
    }

    #[test]
    fn literal_edges() {
        let b = BinningSpec::new(8, 0.0).unwrap();
        assert_eq!(b.bin(PI / 4.0).unwrap(), 1);
        assert_eq!(b.bin(0.0).unwrap(), 0);
        assert_eq!(b.bin(PI / 4.0 - 1e-9).unwrap(), 0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(BinningSpec::new(1, 0.0).is_err());
        assert!(BinningSpec::new(8, TAU).is_err());
        assert!(BinningSpec::new(8, -7.0).is_err());
        let b = BinningSpec::default();
        assert!(matches!(b.bin(f64::NAN), Err(Error::NonFiniteAngle(_))));
        assert!(b.bin(f64::INFINITY).is_err());
    }

    #[test]
    fn centers_map_back_to_their_bin() {
        for k in 2..=16 {
            for spec in [BinningSpec::centered(k).unwrap(), BinningSpec::new(k, 0.3).unwrap()] {
                for i in 0..k {
                    assert_eq!(spec.bin(spec.center(i)).unwrap(), i);
                }
            }
        }
        let b = BinningSpec::default();
        assert_eq!(b.center(0), 0.0);
        assert!((b.center(2) - PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn random_angles_hit_exactly_one_arc() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let spec = BinningSpec::default();
        for _ in 0..100_000 {
            let d: f64 = rng.random_range(-20.0..20.0);
            let bin = spec.bin(d).unwrap();
            let w = wrap_angle(d);
            // brute force over arcs
            let hits: Vec<usize> = (0..8)
                .filter(|&i| {
                    let lo = wrap_angle(spec.offset() + i as f64 * spec.width());
                    let rel = wrap_angle(w - lo);
                    rel < spec.width()
                })
                .collect();
            assert_eq!(hits.len(), 1, "angle {d}");
            assert_eq!(hits[0], bin, "angle {d}");
            assert_eq!(spec.bin(d + TAU).unwrap(), bin);
        }
    }

    proptest! {
        #[test]
        fn wrap_is_in_range(a in -1e6f64..1e6) {
            let w = wrap_angle(a);
            prop_assert!((0.0..TAU).contains(&w));
        }

        #[test]
        fn bin_in_range(k in 2usize..32, d in -100.0f64..100.0) {
            let spec = BinningSpec::centered(k).unwrap();
            prop_assert!(spec.bin(d).unwrap() < k);
        }
    }
}
