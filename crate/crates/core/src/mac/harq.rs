//! SL-HARQ frame geometry, segmentation and the grant-to-data mapping.

use serde::{Deserialize, Serialize};

use crate::error::{Result, ScubaError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HarqScheme {
    FixedMcs,
    GrantBased,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HarqConfig {
    pub scheme: HarqScheme,
    pub n_harq: u32,
    pub n_sl_grant: u32,
    pub mcs: u32,
    pub tbs_bits: u32,
    pub prb: u32,
    pub overhead_bytes: u32,
}

impl Default for HarqConfig {
    fn default() -> Self {
        Self {
            scheme: HarqScheme::FixedMcs,
            n_harq: 4,
            n_sl_grant: 2,
            mcs: 6,
            tbs_bits: 256,
            prb: 3,
            overhead_bytes: 19,
        }
    }
}

impl HarqConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_harq == 0 {
            return Err(ScubaError::config("harq.n_harq", "must be positive"));
        }
        if self.n_harq > 64 {
            return Err(ScubaError::config("harq.n_harq", "at most 64 parallel processes"));
        }
        if self.scheme == HarqScheme::GrantBased && (self.n_sl_grant == 0 || self.n_sl_grant >= self.n_harq) {
            return Err(ScubaError::config(
                "harq.n_sl_grant",
                format!("must lie in [1, n_harq) = [1, {})", self.n_harq),
            ));
        }
        if self.prb < 3 {
            return Err(ScubaError::config("harq.prb", "at least three PRBs are required"));
        }
        if self.tbs_bits / 8 <= self.overhead_bytes {
            return Err(ScubaError::config(
                "harq.tbs_bits",
                format!(
                    "transport block of {} bytes leaves no room after {} bytes of overhead",
                    self.tbs_bits / 8,
                    self.overhead_bytes
                ),
            ));
        }
        Ok(())
    }

    pub fn frame_len(&self) -> u32 {
        harq_frame_length(self.n_harq)
    }

    /// Payload bytes carried by one transport block.
    pub fn tb_payload(&self) -> u32 {
        self.tbs_bits / 8 - self.overhead_bytes.min(self.tbs_bits / 8)
    }
}

/// Number of transport blocks for `payload_bytes`.
pub fn segment_payload(payload_bytes: u32, harq: &HarqConfig) -> Result<u32> {
    if harq.tbs_bits / 8 <= harq.overhead_bytes {
        return Err(ScubaError::config(
            "harq.tbs_bits",
            "transport block smaller than its overhead",
        ));
    }
    if payload_bytes == 0 {
        return Err(ScubaError::InvalidArgument("empty payload".into()));
    }
    Ok(payload_bytes.div_ceil(harq.tb_payload()))
}

/// `2 (n_harq + 1)`.
pub fn harq_frame_length(n_harq: u32) -> u32 {
    2 * (n_harq + 1)
}

/// Role of a position inside an SL-HARQ frame, seen from the side that opens it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameSlot {
    Tx(u32),
    SwitchToRx,
    Rx(u32),
    SwitchToTx,
}

pub fn frame_slot(pos: u32, n_harq: u32) -> FrameSlot {
    let pos = pos % harq_frame_length(n_harq);
    if pos < n_harq {
        FrameSlot::Tx(pos)
    } else if pos == n_harq {
        FrameSlot::SwitchToRx
    } else if pos <= 2 * n_harq {
        FrameSlot::Rx(pos - n_harq - 1)
    } else {
        FrameSlot::SwitchToTx
    }
}

/// Frame position of the data scheduled by a grant at TX position `i`. Results at or
/// beyond the frame length denote the following frame. When the first branch of the
/// mapping lands outside the TX half, the data moves to the next frame's first TX SF.
pub fn grant_to_data_sf(i: u32, harq: &HarqConfig) -> Result<u32> {
    let n = harq.n_harq;
    if i >= n {
        return Err(ScubaError::InvalidArgument(format!(
            "grant position {i} outside the TX half of {n} SFs"
        )));
    }
    let k = if i < n - 1 { i + harq.n_sl_grant } else { i + 2 * n };
    let frame = harq_frame_length(n);
    match frame_slot(k, n) {
        FrameSlot::Tx(_) => Ok(k),
        _ => Ok((k / frame + 1) * frame),
    }
}

/// Frame position of the ACK for data at `data_sf`.
pub fn ack_sf_for_data(data_sf: u32, n_harq: u32) -> u32 {
    data_sf + n_harq + 1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn segmentation() {
        let h = HarqConfig::default();
        assert_eq!(segment_payload(100, &h).unwrap(), 8);
        assert_eq!(segment_payload(13, &h).unwrap(), 1);
        assert_eq!(segment_payload(14, &h).unwrap(), 2);
        assert!(matches!(segment_payload(0, &h), Err(ScubaError::InvalidArgument(_))));
        let tiny = HarqConfig { tbs_bits: 152, ..h };
        assert!(matches!(
            segment_payload(10, &tiny),
            Err(ScubaError::InvalidConfig { .. })
        ));
    }

    #[test]
    fn frame_lengths() {
        assert_eq!(harq_frame_length(4), 10);
        assert_eq!(harq_frame_length(1), 4);
        assert_eq!(harq_frame_length(8), 18);
    }

    #[test]
    fn frame_layout() {
        let kinds: Vec<FrameSlot> = (0..10).map(|p| frame_slot(p, 4)).collect();
        assert_eq!(
            kinds,
            vec![
                FrameSlot::Tx(0),
                FrameSlot::Tx(1),
                FrameSlot::Tx(2),
                FrameSlot::Tx(3),
                FrameSlot::SwitchToRx,
                FrameSlot::Rx(0),
                FrameSlot::Rx(1),
                FrameSlot::Rx(2),
                FrameSlot::Rx(3),
                FrameSlot::SwitchToTx,
            ]
        );
    }

    #[test]
    fn grant_mapping() {
        let h = HarqConfig {
            scheme: HarqScheme::GrantBased,
            ..HarqConfig::default()
        };
        assert_eq!(grant_to_data_sf(0, &h).unwrap(), 2);
        assert_eq!(grant_to_data_sf(1, &h).unwrap(), 3);
        // 2 + 2 hits the switch SF and moves to the next frame's first TX SF.
        assert_eq!(grant_to_data_sf(2, &h).unwrap(), 10);
        assert_eq!(grant_to_data_sf(3, &h).unwrap(), 11);
        assert!(grant_to_data_sf(4, &h).is_err());
    }

    #[test]
    fn ack_positions() {
        assert_eq!(ack_sf_for_data(0, 4), 5);
        assert_eq!(ack_sf_for_data(3, 4), 8);
        assert_eq!(ack_sf_for_data(0, 1), 2);
        for d in 0..4 {
            assert!(matches!(frame_slot(ack_sf_for_data(d, 4), 4), FrameSlot::Rx(_)));
        }
    }

    #[test]
    fn config_validation() {
        let grant = HarqConfig {
            scheme: HarqScheme::GrantBased,
            n_sl_grant: 4,
            ..HarqConfig::default()
        };
        assert!(grant.validate().is_err());
        let few_prb = HarqConfig {
            prb: 2,
            ..HarqConfig::default()
        };
        assert!(few_prb.validate().is_err());
        assert!(HarqConfig::default().validate().is_ok());
    }
}
