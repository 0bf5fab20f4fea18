//! Cluster index vectors: one bit per cluster, rendered right to left.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Widest supported overlay, in clusters.
pub const MAX_CLUSTERS: usize = 64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CivError {
    #[error("bit {index} out of range for width {width}")]
    OutOfRange { index: u32, width: u32 },
    #[error("width must be between 1 and {MAX_CLUSTERS}, got {0}")]
    BadWidth(u32),
}

/// What a vector describes, and therefore which bits carry meaning.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CivContext {
    /// Kept by the publisher's host broker; the context bit is the host
    /// cluster and every other set bit is a secondary target cluster.
    Advertisement,
    /// Kept by a secondary broker; the context bit is the receiving cluster
    /// (the secondary cluster bit) and the sending cluster's bit is set.
    Subscription,
    /// Carried by a notification; set bits are clusters still owed a copy.
    Publication,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Civ {
    bits: u64,
    width: u32,
    context: CivContext,
    cb: u32,
}

impl Civ {
    /// An all-zero vector of `width` bits with context bit `cb`.
    pub fn new(width: u32, context: CivContext, cb: u32) -> Result<Self, CivError> {
        if width == 0 || width as usize > MAX_CLUSTERS {
            return Err(CivError::BadWidth(width));
        }
        if cb >= width {
            return Err(CivError::OutOfRange { index: cb, width });
        }
        Ok(Civ {
            bits: 0,
            width,
            context,
            cb,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn context(&self) -> CivContext {
        self.context
    }

    /// Index of the context bit.
    pub fn cb(&self) -> u32 {
        self.cb
    }

    fn check(&self, index: u32) -> Result<(), CivError> {
        if index >= self.width {
            Err(CivError::OutOfRange {
                index,
                width: self.width,
            })
        } else {
            Ok(())
        }
    }

    pub fn with_bit(mut self, index: u32) -> Result<Self, CivError> {
        self.set(index)?;
        Ok(self)
    }

    pub fn set(&mut self, index: u32) -> Result<(), CivError> {
        self.check(index)?;
        self.bits |= 1 << index;
        Ok(())
    }

    pub fn clear(&mut self, index: u32) -> Result<(), CivError> {
        self.check(index)?;
        self.bits &= !(1 << index);
        Ok(())
    }

    pub fn get(&self, index: u32) -> bool {
        index < self.width && self.bits & (1 << index) != 0
    }

    pub fn is_empty(&self) -> bool {
        self.bits == 0
    }

    pub fn count(&self) -> u32 {
        self.bits.count_ones()
    }

    /// Indices of set bits, ascending.
    pub fn ones(&self) -> impl Iterator<Item = u32> + '_ {
        (0..self.width).filter(|&i| self.get(i))
    }

    /// The same bits relabelled under another context and context bit.
    pub fn recontext(&self, context: CivContext, cb: u32) -> Result<Self, CivError> {
        self.check(cb)?;
        Ok(Civ {
            context,
            cb,
            ..*self
        })
    }

    pub fn raw(&self) -> u64 {
        self.bits
    }
}

/// Bits written most significant first, so bit 0 is the rightmost character.
impl fmt::Display for Civ {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in (0..self.width).rev() {
            f.write_str(if self.get(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn set_bit_two() {
        let c = Civ::new(3, CivContext::Advertisement, 0)
            .unwrap()
            .with_bit(2)
            .unwrap();
        assert_eq!(c.to_string(), "100");
    }

    #[test]
    fn five_wide_advertisement() {
        let mut c = Civ::new(5, CivContext::Advertisement, 2).unwrap();
        for i in [0, 1, 2] {
            c.set(i).unwrap();
        }
        assert_eq!(c.to_string(), "00111");
        assert_eq!(c.cb(), 2);
    }

    #[test]
    fn publication_bits() {
        let c = Civ::new(3, CivContext::Publication, 1)
            .unwrap()
            .with_bit(0)
            .unwrap()
            .with_bit(2)
            .unwrap();
        assert_eq!(c.to_string(), "101");
        assert_eq!(c.ones().collect::<Vec<_>>(), vec![0, 2]);
    }

    #[test]
    fn range_checks() {
        let mut c = Civ::new(3, CivContext::Subscription, 1).unwrap();
        assert_eq!(c.set(3), Err(CivError::OutOfRange { index: 3, width: 3 }));
        assert!(Civ::new(3, CivContext::Subscription, 3).is_err());
        assert!(Civ::new(0, CivContext::Subscription, 0).is_err());
        assert!(Civ::new(65, CivContext::Subscription, 0).is_err());
    }

    #[test]
    fn set_is_idempotent_and_width_preserving() {
        let mut c = Civ::new(4, CivContext::Advertisement, 0).unwrap();
        c.set(1).unwrap();
        let once = c;
        c.set(1).unwrap();
        assert_eq!(c, once);
        assert_eq!(c.width(), 4);
        c.clear(1).unwrap();
        assert!(c.is_empty());
    }
}
