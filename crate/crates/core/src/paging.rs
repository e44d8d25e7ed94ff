//! Paging-occasion arithmetic for the cellular IDRX PO and the sidelink SL-PO.
//!
//! All positions are absolute subframe (SF) indices. One radio frame is 10 SFs and
//! schedules are computed over one hyper-frame (1024 frames, 10240 SFs) and tiled.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Result, ScubaError};

/// Absolute subframe index.
pub type Sf = u64;

pub const SF_PER_FRAME: u64 = 10;
pub const FRAMES_PER_HYPER_FRAME: u32 = 1024;
pub const HYPER_FRAME_SFS: u64 = SF_PER_FRAME * FRAMES_PER_HYPER_FRAME as u64;

/// Identity moduli by RAT.
pub const BETA_LTE: u32 = 1024;
pub const BETA_NB_IOT: u32 = 4096;
pub const BETA_LTE_M: u32 = 16384;

/// UE identity derived from the IMSI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct UeIdentity {
    imsi: u64,
    beta: u32,
    ue_id: u32,
}

impl UeIdentity {
    pub fn new(imsi: u64, beta: u32) -> Result<Self> {
        let ue_id = derive_ue_id(imsi, beta)?;
        Ok(Self { imsi, beta, ue_id })
    }

    pub fn imsi(&self) -> u64 {
        self.imsi
    }

    pub fn beta(&self) -> u32 {
        self.beta
    }

    pub fn ue_id(&self) -> u32 {
        self.ue_id
    }
}

/// `imsi mod beta`.
pub fn derive_ue_id(imsi: u64, beta: u32) -> Result<u32> {
    if beta == 0 {
        return Err(ScubaError::config("paging.beta", "must be positive"));
    }
    Ok((imsi % beta as u64) as u32)
}

/// Lookup table from `(i_s, Ns)` to the PO subframe within the paging frame.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<PoLutEntry>", into = "Vec<PoLutEntry>")]
pub struct PoLut {
    entries: BTreeMap<(u32, u32), u8>,
}

/// One row of a [`PoLut`], as it appears in scenario files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoLutEntry {
    pub i_s: u32,
    pub ns: u32,
    pub subframe: u8,
}

impl PoLut {
    pub fn from_entries(entries: impl IntoIterator<Item = PoLutEntry>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for e in entries {
            if e.subframe > 9 {
                return Err(ScubaError::config(
                    "paging.po_lut.subframe",
                    format!("subframe {} outside [0, 9]", e.subframe),
                ));
            }
            if e.ns == 0 || e.i_s >= e.ns {
                return Err(ScubaError::config(
                    "paging.po_lut",
                    format!("entry (i_s={}, Ns={}) is not a valid index", e.i_s, e.ns),
                ));
            }
            map.insert((e.i_s, e.ns), e.subframe);
        }
        Ok(Self { entries: map })
    }

    pub fn get(&self, i_s: u32, ns: u32) -> Result<u8> {
        self.entries
            .get(&(i_s, ns))
            .copied()
            .ok_or(ScubaError::MissingLutEntry { index: i_s, ns })
    }

    pub fn entries(&self) -> impl Iterator<Item = PoLutEntry> + '_ {
        self.entries
            .iter()
            .map(|(&(i_s, ns), &subframe)| PoLutEntry { i_s, ns, subframe })
    }
}

/// FDD paging table: Ns=1 -> {9}, Ns=2 -> {4, 9}, Ns=4 -> {0, 4, 5, 9}.
impl Default for PoLut {
    fn default() -> Self {
        let rows: [(u32, &[u8]); 3] = [(1, &[9]), (2, &[4, 9]), (4, &[0, 4, 5, 9])];
        let entries = rows.iter().flat_map(|(ns, sfs)| {
            sfs.iter().enumerate().map(move |(i, &sf)| PoLutEntry {
                i_s: i as u32,
                ns: *ns,
                subframe: sf,
            })
        });
        Self::from_entries(entries).expect("default table is valid")
    }
}

impl TryFrom<Vec<PoLutEntry>> for PoLut {
    type Error = ScubaError;

    fn try_from(v: Vec<PoLutEntry>) -> Result<Self> {
        Self::from_entries(v)
    }
}

impl From<PoLut> for Vec<PoLutEntry> {
    fn from(lut: PoLut) -> Self {
        lut.entries().collect()
    }
}

/// Cellular IDRX paging parameters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PagingConfig {
    /// IDRX cycle in radio frames.
    pub t_idrx: u32,
    /// Control parameter signalled in SIB2.
    pub n_control: u32,
    pub po_lut: PoLut,
}

impl Default for PagingConfig {
    fn default() -> Self {
        // 640 ms IDRX cycle.
        Self {
            t_idrx: 64,
            n_control: 64,
            po_lut: PoLut::default(),
        }
    }
}

impl PagingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.t_idrx == 0 || !FRAMES_PER_HYPER_FRAME.is_multiple_of(self.t_idrx) {
            return Err(ScubaError::config(
                "paging.t_idrx",
                format!("{} frames does not divide the 1024-frame hyper-frame", self.t_idrx),
            ));
        }
        if self.n_control == 0 {
            return Err(ScubaError::config("paging.n_control", "must be positive"));
        }
        let ns = self.ns();
        for i_s in 0..ns {
            if self.po_lut.get(i_s, ns).is_err() {
                return Err(ScubaError::config(
                    "paging.po_lut",
                    format!("missing entry for (i_s={i_s}, Ns={ns})"),
                ));
            }
        }
        Ok(())
    }

    pub fn n_min(&self) -> u32 {
        self.t_idrx.min(self.n_control)
    }

    /// Number of POs per paging frame, `max(1, N_control / T_IDRX)`.
    pub fn ns(&self) -> u32 {
        (self.n_control / self.t_idrx).max(1)
    }

    /// Frame offset of the paging frame within the IDRX cycle.
    pub fn n_id(&self, id: &UeIdentity) -> u32 {
        let n_min = self.n_min();
        (self.t_idrx / n_min) * (id.ue_id() % n_min)
    }

    /// IDRX cycle in subframes.
    pub fn n_idrx(&self) -> u64 {
        self.t_idrx as u64 * SF_PER_FRAME
    }
}

/// All SFNs in `[0, 1023]` with `SFN mod T_IDRX == N_ID`.
pub fn compute_paging_frames(cfg: &PagingConfig, id: &UeIdentity) -> Vec<u32> {
    let n_id = cfg.n_id(id);
    (n_id..FRAMES_PER_HYPER_FRAME).step_by(cfg.t_idrx as usize).collect()
}

/// `i_s = floor(ue_id / N_min) mod Ns`.
pub fn compute_pointing_index(cfg: &PagingConfig, id: &UeIdentity) -> u32 {
    (id.ue_id() / cfg.n_min()) % cfg.ns()
}

pub fn lookup_po_subframe(cfg: &PagingConfig, i_s: u32) -> Result<u8> {
    cfg.po_lut.get(i_s, cfg.ns())
}

/// Subframe of the UE's own IDRX PO inside each of its paging frames.
pub fn idrx_po_subframe(cfg: &PagingConfig, id: &UeIdentity) -> Result<u8> {
    lookup_po_subframe(cfg, compute_pointing_index(cfg, id))
}

/// Sidelink DRX and SL-PO geometry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SlPagingConfig {
    /// SL-DRX cycle in radio frames; 0 selects low-latency mode.
    pub t_sl_drx: u32,
    /// SFs per SL-PO.
    pub n_sl_po: u32,
    pub n_cluster: u32,
    /// SFs between cluster starts (ignored with a single cluster).
    pub n_dist: u32,
    /// Initial SF offset from the IDRX PO subframe; raised until no SL-PO SF meets the IDRX PO.
    pub n_off: u32,
}

impl Default for SlPagingConfig {
    fn default() -> Self {
        Self {
            t_sl_drx: 1024,
            n_sl_po: 4,
            n_cluster: 1,
            n_dist: 4,
            n_off: 1,
        }
    }
}

impl SlPagingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.t_sl_drx != 0 && !FRAMES_PER_HYPER_FRAME.is_multiple_of(self.t_sl_drx) {
            return Err(ScubaError::config(
                "sl_paging.t_sl_drx",
                format!("{} frames does not divide the 1024-frame hyper-frame", self.t_sl_drx),
            ));
        }
        if self.n_sl_po == 0 {
            return Err(ScubaError::config("sl_paging.n_sl_po", "must be positive"));
        }
        if self.n_cluster == 0 {
            return Err(ScubaError::config("sl_paging.n_cluster", "must be positive"));
        }
        if !self.n_sl_po.is_multiple_of(self.n_cluster) {
            return Err(ScubaError::config(
                "sl_paging.n_cluster",
                format!(
                    "n_sl_po={} is not a multiple of n_cluster={}",
                    self.n_sl_po, self.n_cluster
                ),
            ));
        }
        if self.n_cluster > 1 && (self.n_dist as u64) * (self.n_cluster as u64) < self.n_sl_po as u64 {
            return Err(ScubaError::config(
                "sl_paging.n_dist",
                format!(
                    "n_dist*n_cluster={} is smaller than n_sl_po={}",
                    self.n_dist * self.n_cluster,
                    self.n_sl_po
                ),
            ));
        }
        if self.n_off == 0 {
            return Err(ScubaError::config("sl_paging.n_off", "must be positive"));
        }
        if self.t_sl_drx != 0 && self.span() > self.n_sl_drx() {
            return Err(ScubaError::config(
                "sl_paging.n_dist",
                format!("SL-PO spans {} SFs, longer than the SL-DRX cycle", self.span()),
            ));
        }
        Ok(())
    }

    pub fn is_llm(&self) -> bool {
        self.t_sl_drx == 0
    }

    /// SL-DRX cycle in subframes.
    pub fn n_sl_drx(&self) -> u64 {
        self.t_sl_drx as u64 * SF_PER_FRAME
    }

    pub fn cluster_len(&self) -> u32 {
        self.n_sl_po / self.n_cluster
    }

    /// SFs from the first to one past the last SL-PO subframe.
    pub fn span(&self) -> u64 {
        (self.n_cluster as u64 - 1) * self.n_dist as u64 + self.cluster_len() as u64
    }
}

/// SFNs hosting the SL-PO.
pub fn compute_sl_paging_frames(sl: &SlPagingConfig, cfg: &PagingConfig, id: &UeIdentity) -> Result<Vec<u32>> {
    if sl.is_llm() {
        return Err(ScubaError::LlmMode);
    }
    let n_id = cfg.n_id(id);
    let target = if sl.t_sl_drx >= cfg.t_idrx {
        n_id
    } else {
        n_id % sl.t_sl_drx
    };
    Ok((target..FRAMES_PER_HYPER_FRAME).step_by(sl.t_sl_drx as usize).collect())
}

/// SFs of one SL-PO starting at `base_sf`: `n_cluster` runs of `n_sl_po / n_cluster`
/// consecutive SFs, run `j` starting at `base_sf + j * n_dist`.
pub fn compute_sl_po_layout(sl: &SlPagingConfig, base_sf: Sf) -> Result<Vec<Sf>> {
    sl.validate()?;
    let len = sl.cluster_len() as u64;
    Ok((0..sl.n_cluster as u64)
        .flat_map(|j| {
            let start = base_sf + j * sl.n_dist as u64;
            start..start + len
        })
        .collect())
}

/// Bitset over the 10240 SFs of a hyper-frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HyperFrameMask {
    words: Box<[u64]>,
}

impl Default for HyperFrameMask {
    fn default() -> Self {
        Self {
            words: vec![0u64; (HYPER_FRAME_SFS as usize).div_ceil(64)].into_boxed_slice(),
        }
    }
}

impl HyperFrameMask {
    pub fn full() -> Self {
        Self {
            words: vec![u64::MAX; (HYPER_FRAME_SFS as usize).div_ceil(64)].into_boxed_slice(),
        }
    }

    pub fn insert(&mut self, sf: Sf) {
        let i = (sf % HYPER_FRAME_SFS) as usize;
        self.words[i / 64] |= 1 << (i % 64);
    }

    #[inline]
    pub fn contains(&self, sf: Sf) -> bool {
        let i = (sf % HYPER_FRAME_SFS) as usize;
        self.words[i / 64] & (1 << (i % 64)) != 0
    }

    pub fn count(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }
}

impl FromIterator<Sf> for HyperFrameMask {
    fn from_iter<I: IntoIterator<Item = Sf>>(iter: I) -> Self {
        let mut m = Self::default();
        for sf in iter {
            m.insert(sf);
        }
        m
    }
}

/// Absolute IDRX PO SFs of the UE within one hyper-frame, sorted.
pub fn idrx_po_sfs(cfg: &PagingConfig, id: &UeIdentity) -> Result<Vec<Sf>> {
    let i_po = idrx_po_subframe(cfg, id)? as u64;
    Ok(compute_paging_frames(cfg, id)
        .into_iter()
        .map(|pf| pf as u64 * SF_PER_FRAME + i_po)
        .collect())
}

/// SL-PO placement of one UE over a hyper-frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoSchedule {
    /// SL paging frames.
    pub frame_set: Vec<u32>,
    /// SF offsets from `10 * SFN` (may exceed 9: the SL-PO can spill into later frames).
    pub subframe_offsets: Vec<u64>,
    pub cluster_len: u32,
    /// Offset actually applied after the anti-overlap search.
    pub n_off: u32,
    starts: Vec<Sf>,
    listen: HyperFrameMask,
}

impl PoSchedule {
    /// Builds a schedule from paging frames and per-frame offsets. Every
    /// `cluster_len`-th offset opens a cluster.
    pub fn from_parts(frame_set: Vec<u32>, subframe_offsets: Vec<u64>, cluster_len: u32) -> Self {
        let mut starts: Vec<Sf> = frame_set
            .iter()
            .flat_map(|&f| {
                subframe_offsets
                    .iter()
                    .step_by(cluster_len.max(1) as usize)
                    .map(move |&o| (f as u64 * SF_PER_FRAME + o) % HYPER_FRAME_SFS)
            })
            .collect();
        starts.sort_unstable();
        starts.dedup();
        let listen = frame_set
            .iter()
            .flat_map(|&f| subframe_offsets.iter().map(move |&o| f as u64 * SF_PER_FRAME + o))
            .collect();
        Self {
            frame_set,
            subframe_offsets,
            cluster_len,
            n_off: 0,
            starts,
            listen,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.starts.is_empty()
    }

    /// Cluster-start SFs within one hyper-frame, sorted.
    pub fn starts(&self) -> &[Sf] {
        &self.starts
    }

    /// Whether the UE listens at `sf` (any SL-PO subframe, tiled over hyper-frames).
    #[inline]
    pub fn is_listen_sf(&self, sf: Sf) -> bool {
        self.listen.contains(sf)
    }

    /// All listening SFs of one hyper-frame, sorted and reduced modulo the hyper-frame.
    pub fn listen_sfs(&self) -> Vec<Sf> {
        (0..HYPER_FRAME_SFS).filter(|&s| self.listen.contains(s)).collect()
    }
}

/// Computes the full SL-PO schedule of a UE, raising `n_off` until no SL-PO subframe
/// coincides with one of the UE's IDRX POs.
pub fn build_sl_schedule(sl: &SlPagingConfig, cfg: &PagingConfig, id: &UeIdentity) -> Result<PoSchedule> {
    sl.validate()?;
    cfg.validate()?;
    let frames = compute_sl_paging_frames(sl, cfg, id)?;
    let i_po = idrx_po_subframe(cfg, id)? as u64;
    let idrx: HyperFrameMask = idrx_po_sfs(cfg, id)?.into_iter().collect();
    let limit = sl.n_off as u64 + sl.n_sl_drx().max(SF_PER_FRAME);
    for n_off in sl.n_off as u64..limit {
        let offsets = compute_sl_po_layout(sl, i_po + n_off)?;
        let clash = frames
            .iter()
            .any(|&f| offsets.iter().any(|&o| idrx.contains(f as u64 * SF_PER_FRAME + o)));
        if !clash {
            let mut sched = PoSchedule::from_parts(frames, offsets, sl.cluster_len());
            sched.n_off = n_off as u32;
            return Ok(sched);
        }
    }
    Err(ScubaError::config(
        "sl_paging.n_off",
        "no offset keeps the SL-PO clear of the IDRX PO",
    ))
}

/// Smallest SL-PO start strictly after `now`, wrapping into later hyper-frames.
pub fn next_sl_po(schedule: &PoSchedule, now: Sf) -> Sf {
    let starts = schedule.starts();
    assert!(!starts.is_empty(), "next_sl_po on an empty schedule");
    let base = now - now % HYPER_FRAME_SFS;
    let within = now % HYPER_FRAME_SFS;
    match starts.iter().find(|&&s| s > within) {
        Some(&s) => base + s,
        None => base + HYPER_FRAME_SFS + starts[0],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(t_idrx: u32, n_control: u32) -> PagingConfig {
        PagingConfig {
            t_idrx,
            n_control,
            po_lut: PoLut::default(),
        }
    }

    fn ue(ue_id: u64) -> UeIdentity {
        UeIdentity::new(ue_id, BETA_LTE_M).unwrap()
    }

    #[test]
    fn ue_id_examples() {
        assert_eq!(derive_ue_id(0, 16384).unwrap(), 0);
        // 123456789 = 7535 * 16384 + 3349
        assert_eq!(derive_ue_id(123_456_789, 16384).unwrap(), 3349);
        assert_eq!(derive_ue_id(16384, 16384).unwrap(), 0);
        assert!(matches!(derive_ue_id(5, 0), Err(ScubaError::InvalidConfig { .. })));
    }

    #[test]
    fn paging_frames_examples() {
        let all: Vec<u32> = (0..1024).step_by(64).collect();
        assert_eq!(compute_paging_frames(&cfg(64, 64), &ue(0)), all);

        let pf = compute_paging_frames(&cfg(64, 64), &ue(3349));
        assert_eq!(&pf[..3], &[21, 85, 149]);
        assert_eq!(pf.len(), 16);
        assert_eq!(compute_paging_frames(&cfg(64, 128), &ue(3349)), pf);
    }

    #[test]
    fn pointing_index_examples() {
        assert_eq!(compute_pointing_index(&cfg(64, 64), &ue(3349)), 0);
        assert_eq!(compute_pointing_index(&cfg(64, 128), &ue(3349)), 0);
        assert_eq!(compute_pointing_index(&cfg(64, 128), &ue(3413)), 1);
    }

    #[test]
    fn lut_lookup() {
        let one = PoLut::from_entries([PoLutEntry {
            i_s: 0,
            ns: 1,
            subframe: 9,
        }])
        .unwrap();
        assert_eq!(one.get(0, 1).unwrap(), 9);
        let two = PoLut::from_entries([
            PoLutEntry {
                i_s: 0,
                ns: 2,
                subframe: 4,
            },
            PoLutEntry {
                i_s: 1,
                ns: 2,
                subframe: 9,
            },
        ])
        .unwrap();
        assert_eq!(two.get(1, 2).unwrap(), 9);
        assert_eq!(two.get(3, 2), Err(ScubaError::MissingLutEntry { index: 3, ns: 2 }));
    }

    #[test]
    fn config_rejects_missing_lut_rows() {
        let c = PagingConfig {
            t_idrx: 64,
            n_control: 256,
            po_lut: PoLut::from_entries([PoLutEntry {
                i_s: 0,
                ns: 4,
                subframe: 0,
            }])
            .unwrap(),
        };
        assert!(c.validate().is_err());
        assert!(PoLut::from_entries([PoLutEntry {
            i_s: 0,
            ns: 1,
            subframe: 10
        }])
        .is_err());
    }

    #[test]
    fn sl_paging_frames_examples() {
        let c = cfg(64, 64);
        let sl = |t| SlPagingConfig {
            t_sl_drx: t,
            ..Default::default()
        };
        let f = compute_sl_paging_frames(&sl(128), &c, &ue(3349)).unwrap();
        assert_eq!(&f[..3], &[21, 149, 277]);
        let f = compute_sl_paging_frames(&sl(32), &c, &ue(3349)).unwrap();
        assert_eq!(&f[..3], &[21, 53, 85]);
        let f = compute_sl_paging_frames(&sl(256), &c, &ue(0)).unwrap();
        assert!(f.iter().all(|s| s % 256 == 0));
        assert_eq!(compute_sl_paging_frames(&sl(0), &c, &ue(0)), Err(ScubaError::LlmMode));
    }

    #[test]
    fn layout_examples() {
        let interleaved = SlPagingConfig {
            n_sl_po: 4,
            n_cluster: 4,
            n_dist: 10,
            ..Default::default()
        };
        assert_eq!(compute_sl_po_layout(&interleaved, 0).unwrap(), vec![0, 10, 20, 30]);
        for n_dist in [1, 4, 77] {
            let consecutive = SlPagingConfig {
                n_sl_po: 4,
                n_cluster: 1,
                n_dist,
                ..Default::default()
            };
            assert_eq!(compute_sl_po_layout(&consecutive, 0).unwrap(), vec![0, 1, 2, 3]);
        }
        let two = SlPagingConfig {
            n_sl_po: 4,
            n_cluster: 2,
            n_dist: 10,
            ..Default::default()
        };
        assert_eq!(compute_sl_po_layout(&two, 0).unwrap(), vec![0, 1, 10, 11]);
        let bad = SlPagingConfig {
            n_sl_po: 4,
            n_cluster: 2,
            n_dist: 1,
            ..Default::default()
        };
        assert!(matches!(
            compute_sl_po_layout(&bad, 0),
            Err(ScubaError::InvalidConfig { .. })
        ));
    }

    #[test]
    fn rejects_non_divisor_cycles() {
        let sl = SlPagingConfig {
            t_sl_drx: 1056,
            ..Default::default()
        };
        assert!(sl.validate().is_err());
        let sl = SlPagingConfig {
            t_sl_drx: 96,
            ..Default::default()
        };
        assert!(sl.validate().is_err());
    }

    #[test]
    fn next_po_examples() {
        let one = PoSchedule::from_parts(vec![21], vec![0], 1);
        assert_eq!(next_sl_po(&one, 0), 210);
        assert_eq!(next_sl_po(&one, 211), 10450);
        assert_eq!(next_sl_po(&one, 210), 10450);
        let two = PoSchedule::from_parts(vec![21, 533], vec![0], 1);
        assert_eq!(next_sl_po(&two, 300), 5330);
    }

    #[test]
    fn schedule_avoids_own_idrx_po() {
        // ue 0: PF every 64 frames at SFN 0, i_PO = 9. SL-PO in the same frame.
        let c = cfg(64, 64);
        let sched = build_sl_schedule(&SlPagingConfig::default(), &c, &ue(0)).unwrap();
        assert_eq!(sched.subframe_offsets, vec![10, 11, 12, 13]);
        assert_eq!(sched.starts()[0], 10);
        assert!(!sched.is_listen_sf(9));
        assert!(sched.is_listen_sf(10 + HYPER_FRAME_SFS));
    }
}
