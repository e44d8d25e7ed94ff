//! Shared unlicensed medium: per-band, per-SF collision resolution without capture.

use serde::{Deserialize, Serialize};

use crate::mac::Packet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Delivered,
    Collided,
}

/// Outcome of every transmission of one SF, in input order. Two or more packets on the
/// same band destroy each other; the result does not depend on the input order.
pub fn resolve(txs: &[Packet]) -> Vec<Outcome> {
    txs.iter()
        .map(|p| {
            if txs.iter().filter(|q| q.band == p.band).nth(1).is_some() {
                Outcome::Collided
            } else {
                Outcome::Delivered
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mac::{Body, SamKind};

    fn sam(from: u32, band: u16) -> Packet {
        Packet {
            from,
            band,
            body: Body::Sam {
                kind: SamKind::U,
                po: None,
            },
        }
    }

    #[test]
    fn same_band_collides() {
        let out = resolve(&[sam(0, 0), sam(1, 0), sam(2, 1)]);
        assert_eq!(out, vec![Outcome::Collided, Outcome::Collided, Outcome::Delivered]);
        assert_eq!(resolve(&[sam(0, 1)]), vec![Outcome::Delivered]);
        assert!(resolve(&[]).is_empty());
    }

    #[test]
    fn order_independent() {
        let a = [sam(0, 0), sam(1, 1), sam(2, 0), sam(3, 2)];
        let mut b = a;
        b.reverse();
        let mut ra = resolve(&a);
        let mut rb = resolve(&b);
        rb.reverse();
        assert_eq!(ra, rb);
        ra.sort_by_key(|o| *o as u8);
        assert_eq!(ra.iter().filter(|o| **o == Outcome::Collided).count(), 2);
    }
}
