//! Brute-force paging reference: scans every SFN and SF of the hyper-frame instead of
//! using the closed forms. Shared by the core tests and the acceptance runner.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use scuba_core::paging::{PoLut, HYPER_FRAME_SFS};
use scuba_core::{PagingConfig, SlPagingConfig};

pub const T_IDRX: [u32; 4] = [32, 64, 128, 256];
pub const T_SL: [u32; 11] = [1, 2, 4, 8, 16, 32, 64, 128, 256, 512, 1024];

/// FDD table, written out independently of the library default.
fn po_subframe(i_s: u32, ns: u32) -> u64 {
    match (ns, i_s) {
        (1, 0) => 9,
        (2, 0) => 4,
        (2, 1) => 9,
        (4, 0) => 0,
        (4, 1) => 4,
        (4, 2) => 5,
        (4, 3) => 9,
        _ => unreachable!("no LUT row ({i_s}, {ns})"),
    }
}

pub struct Oracle {
    pub pf: Vec<u32>,
    pub i_s: u32,
    pub sl_pf: Vec<u32>,
    pub listen: Vec<u64>,
    pub n_off: u32,
}

pub fn oracle(imsi: u64, beta: u32, t: u32, n_control: u32, sl: &SlPagingConfig) -> Oracle {
    let ue_id = imsi % beta as u64;
    let n = t.min(n_control) as u64;
    let n_id = (t as u64 / n) * (ue_id % n);
    let ns = (n_control / t).max(1);
    let i_s = ((ue_id / n) % ns as u64) as u32;
    let pf: Vec<u32> = (0..1024u32).filter(|&sfn| sfn as u64 % t as u64 == n_id).collect();
    let sl_pf: Vec<u32> = (0..1024u32)
        .filter(|&sfn| sfn % sl.t_sl_drx == (n_id % sl.t_sl_drx as u64) as u32)
        .collect();
    let i_po = po_subframe(i_s, ns);
    let idrx: Vec<bool> = (0..HYPER_FRAME_SFS)
        .map(|sf| sf % 10 == i_po && pf.contains(&((sf / 10) as u32)))
        .collect();
    let len = (sl.n_sl_po / sl.n_cluster) as u64;
    let is_sl_pf: Vec<bool> = (0..1024u32).map(|f| sl_pf.contains(&f)).collect();
    let scan = |off: u64| -> Vec<u64> {
        (0..HYPER_FRAME_SFS)
            .filter(|&sf| {
                (0..sl.n_cluster as u64).any(|j| {
                    (0..len).any(|k| {
                        let shift = i_po + off + j * sl.n_dist as u64 + k;
                        let d = (sf + HYPER_FRAME_SFS * 4 - shift % HYPER_FRAME_SFS) % HYPER_FRAME_SFS;
                        d.is_multiple_of(10) && is_sl_pf[(d / 10) as usize]
                    })
                })
            })
            .collect()
    };
    let mut off = sl.n_off as u64;
    loop {
        let listen = scan(off);
        if listen.iter().all(|&sf| !idrx[sf as usize]) {
            return Oracle {
                pf,
                i_s,
                sl_pf,
                listen,
                n_off: off as u32,
            };
        }
        off += 1;
    }
}

pub fn random_tuple(rng: &mut ChaCha8Rng) -> (u64, u32, PagingConfig, SlPagingConfig) {
    let imsi = rng.random_range(0..1_000_000_000_000_000u64);
    let beta = [1024, 4096, 16384][rng.random_range(0..3)];
    let t = T_IDRX[rng.random_range(0..T_IDRX.len())];
    let mut n_control = rng.random_range(t / 4..=4 * t);
    if n_control / t == 3 {
        n_control = 4 * t;
    }
    let t_sl = T_SL[rng.random_range(0..T_SL.len())];
    let n_sl_drx = t_sl as u64 * 10;
    let (n_sl_po, n_cluster) = loop {
        let p = [1, 2, 4, 8][rng.random_range(0..4)];
        let c = [1, 2, 4][rng.random_range(0..3)];
        if p % c == 0 && (p as u64) < n_sl_drx {
            break (p, c);
        }
    };
    let len = n_sl_po / n_cluster;
    let max_dist = if n_cluster > 1 {
        ((n_sl_drx - len as u64) / (n_cluster as u64 - 1)).min(40) as u32
    } else {
        40
    };
    let n_dist = rng.random_range(len..=max_dist.max(len));
    let sl = SlPagingConfig {
        t_sl_drx: t_sl,
        n_sl_po,
        n_cluster,
        n_dist,
        n_off: rng.random_range(1..=3),
    };
    let paging = PagingConfig {
        t_idrx: t,
        n_control,
        po_lut: PoLut::default(),
    };
    (imsi, beta, paging, sl)
}
