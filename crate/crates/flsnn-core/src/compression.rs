//! Top-κ sparsification codec, κ-reduction schedules, the sparse wire
//! format, and exact bandwidth accounting.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fl::{DeltaVector, ParamVector};
use crate::tensor::Scalar;

/// Wire-format payload: `(index, value)` pairs for the selected parameters,
/// sorted by index. Values are held at engine precision in memory; the
/// encoded form is 32-bit (see [`encode`]).
#[derive(Debug, Clone, PartialEq)]
pub struct SparseUpdate<F: Scalar> {
    pub round: u32,
    pub total_params: u32,
    pub entries: Vec<(u32, F)>,
}

impl<F: Scalar> SparseUpdate<F> {
    /// Encoded size: 16-byte header plus 8 bytes per entry.
    pub fn wire_bytes(&self) -> u64 {
        16 + 8 * self.entries.len() as u64
    }

    pub fn values(&self) -> impl Iterator<Item = F> + '_ {
        self.entries.iter().map(|&(_, v)| v)
    }
}

/// How `u = κ·d` is rounded at fractional values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rounding {
    Floor,
    Ceil,
}

impl Default for Rounding {
    fn default() -> Self {
        Rounding::Floor
    }
}

/// Selection size for compression rate `kappa` over `d` parameters,
/// floored at 1 so a payload is never empty.
pub fn selection_size(kappa: f64, d: usize, rounding: Rounding) -> usize {
    let raw = kappa * d as f64;
    let u = match rounding {
        Rounding::Floor => raw.floor(),
        Rounding::Ceil => raw.ceil(),
    } as usize;
    u.clamp(1, d)
}

/// Select the `u = max(1, floor(κ·d))` indices with the largest `|h_i|`
/// (ties broken by smaller index) and carry the *parameter* values `w_i`
/// at those indices, sorted by index.
pub fn sparse_topk<F: Scalar>(
    w: &ParamVector<F>,
    h: &DeltaVector<F>,
    kappa: f64,
    round: u32,
    rounding: Rounding,
) -> Result<SparseUpdate<F>> {
    if !(kappa > 0.0 && kappa <= 1.0) {
        return Err(Error::input(format!("kappa must be in (0,1], got {kappa}")));
    }
    if w.layout != h.layout || w.values.len() != h.values.len() {
        return Err(Error::shape("sparse_topk: layout mismatch".to_string()));
    }
    let d = w.values.len();
    if d == 0 {
        return Err(Error::input("sparse_topk: empty model".to_string()));
    }
    let u = selection_size(kappa, d, rounding);

    let mut order: Vec<u32> = (0..d as u32).collect();
    let rank = |i: u32, j: u32| {
        let (hi, hj) = (h.values[i as usize].abs(), h.values[j as usize].abs());
        hj.partial_cmp(&hi)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    };
    if u < d {
        order.select_nth_unstable_by(u - 1, |&a, &b| rank(a, b));
        order.truncate(u);
    }
    order.sort_unstable();
    Ok(SparseUpdate {
        round,
        total_params: d as u32,
        entries: order
            .into_iter()
            .map(|i| (i, w.values[i as usize]))
            .collect(),
    })
}

/// Copy of `base` with the payload's positions overwritten by its values.
pub fn merge_sparse<F: Scalar>(
    base: &ParamVector<F>,
    upd: &SparseUpdate<F>,
) -> Result<ParamVector<F>> {
    if upd.total_params as usize != base.values.len() {
        return Err(Error::CorruptPayload {
            offset: 8,
            reason: format!(
                "payload d={} vs model d={}",
                upd.total_params,
                base.values.len()
            ),
        });
    }
    let mut out = base.clone();
    for &(i, v) in &upd.entries {
        if i >= upd.total_params {
            return Err(Error::CorruptPayload {
                offset: 0,
                reason: format!("index {i} >= d={}", upd.total_params),
            });
        }
        out.values[i as usize] = v;
    }
    Ok(out)
}

/// κ-reduction policy across rounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "mode")]
pub enum CompressionSchedule {
    /// Dense transfers every round.
    None,
    /// Fixed Top-κ rate (FLTS).
    Fixed { kappa: f64 },
    /// Linear reduction from `alpha` to `omega` over `rounds` (FLDR-L).
    Linear { alpha: f64, omega: f64, rounds: usize },
    /// Exponential reduction from `alpha` to `omega` over `rounds` (FLDR-E).
    Exponential { alpha: f64, omega: f64, rounds: usize },
}

impl CompressionSchedule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            CompressionSchedule::None => Ok(()),
            CompressionSchedule::Fixed { kappa } => {
                if kappa > 0.0 && kappa <= 1.0 {
                    Ok(())
                } else {
                    Err(Error::config(format!(
                        "compression.kappa must be in (0,1], got {kappa}"
                    )))
                }
            }
            CompressionSchedule::Linear { alpha, omega, rounds }
            | CompressionSchedule::Exponential { alpha, omega, rounds } => {
                if !(omega > 0.0 && omega <= alpha && alpha <= 1.0) {
                    return Err(Error::config(format!(
                        "compression schedule needs 0 < omega <= alpha <= 1, got alpha={alpha} omega={omega}"
                    )));
                }
                if rounds == 0 {
                    return Err(Error::config("compression.rounds must be >= 1".to_string()));
                }
                Ok(())
            }
        }
    }

    /// κ used in the first round.
    pub fn initial_kappa(&self) -> f64 {
        match *self {
            CompressionSchedule::None => 1.0,
            CompressionSchedule::Fixed { kappa } => kappa,
            CompressionSchedule::Linear { alpha, .. }
            | CompressionSchedule::Exponential { alpha, .. } => alpha,
        }
    }

    /// κ for the next round, given the current one (Stage 4 of the dynamic
    /// reduction loop). Fixed modes return κ unchanged.
    pub fn advance(&self, kappa: f64) -> Result<f64> {
        match *self {
            CompressionSchedule::None | CompressionSchedule::Fixed { .. } => Ok(kappa),
            CompressionSchedule::Linear { alpha, omega, rounds } => {
                Ok(reduce_linear(kappa, alpha, omega, rounds))
            }
            CompressionSchedule::Exponential { alpha, omega, rounds } => {
                reduce_exponential(kappa, alpha, omega, rounds)
            }
        }
    }
}

/// One linear reduction step: `κ - (α - ω)/R`, clamped below at ω.
pub fn reduce_linear(kappa: f64, alpha: f64, omega: f64, rounds: usize) -> f64 {
    (kappa - (alpha - omega) / rounds as f64).max(omega)
}

/// One exponential reduction step: `exp(ln κ - (ln α - ln ω)/R)`,
/// clamped below at ω.
pub fn reduce_exponential(kappa: f64, alpha: f64, omega: f64, rounds: usize) -> Result<f64> {
    if kappa <= 0.0 {
        return Err(Error::input(format!("kappa must be > 0, got {kappa}")));
    }
    Ok((kappa.ln() - (alpha.ln() - omega.ln()) / rounds as f64)
        .exp()
        .max(omega))
}

const MAGIC: &[u8; 4] = b"SPKF";

/// Serialize to the little-endian wire format:
/// `"SPKF" | round: u32 | d: u32 | u: u32 | u x {index: u32, value: f32}`.
///
/// Values are narrowed to `f32`; exactly `16 + 8u` bytes.
pub fn encode<F: Scalar>(upd: &SparseUpdate<F>) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 8 * upd.entries.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&upd.round.to_le_bytes());
    out.extend_from_slice(&upd.total_params.to_le_bytes());
    out.extend_from_slice(&(upd.entries.len() as u32).to_le_bytes());
    for &(i, v) in &upd.entries {
        out.extend_from_slice(&i.to_le_bytes());
        out.extend_from_slice(&(v.to_f64().unwrap() as f32).to_le_bytes());
    }
    out
}

/// Inverse of [`encode`]. Indices must be strictly increasing and in range.
pub fn decode<F: Scalar>(bytes: &[u8]) -> Result<SparseUpdate<F>> {
    let corrupt = |offset: usize, reason: &str| Error::CorruptPayload {
        offset,
        reason: reason.to_string(),
    };
    if bytes.len() < 16 {
        return Err(corrupt(bytes.len(), "truncated header (need 16 bytes)"));
    }
    if &bytes[0..4] != MAGIC {
        return Err(corrupt(0, "bad magic"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let round = u32_at(4);
    let total_params = u32_at(8);
    let count = u32_at(12) as usize;
    let expect = 16 + 8 * count;
    if bytes.len() != expect {
        return Err(corrupt(
            bytes.len().min(expect),
            &format!("expected {expect} bytes for {count} entries, got {}", bytes.len()),
        ));
    }
    let mut entries = Vec::with_capacity(count);
    let mut prev: Option<u32> = None;
    for e in 0..count {
        let off = 16 + 8 * e;
        let idx = u32_at(off);
        let val = f32::from_le_bytes(bytes[off + 4..off + 8].try_into().unwrap());
        if idx >= total_params {
            return Err(corrupt(off, &format!("index {idx} >= d={total_params}")));
        }
        if let Some(p) = prev {
            if idx <= p {
                return Err(corrupt(off, "indices not strictly increasing"));
            }
        }
        prev = Some(idx);
        entries.push((idx, F::from_f64c(val as f64)));
    }
    Ok(SparseUpdate { round, total_params, entries })
}

/// Link direction for bandwidth accounting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Link {
    Uplink,
    Downlink,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct LinkTotals {
    transmitted: u64,
    dense_reference: u64,
    bytes: u64,
}

/// Exact integer bandwidth accounting against the uncompressed baseline.
///
/// Inclusive counters count every transfer; exclusive counters skip records
/// flagged as the one-time dense bootstrap broadcast (round-1 downlink), in
/// both numerator and denominator.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BandwidthLedger {
    up: LinkTotals,
    down: LinkTotals,
    up_excl: LinkTotals,
    down_excl: LinkTotals,
}

impl BandwidthLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Account one transfer of `u` parameters out of a `d`-parameter model.
    /// `bootstrap` marks the dense round-1 broadcast.
    pub fn record(&mut self, link: Link, u: usize, d: usize, bootstrap: bool) {
        assert!(u <= d, "transmitted {u} > dense {d}");
        let bytes = 16 + 8 * u as u64;
        let apply = |t: &mut LinkTotals| {
            t.transmitted += u as u64;
            t.dense_reference += d as u64;
            t.bytes += bytes;
        };
        match link {
            Link::Uplink => {
                apply(&mut self.up);
                if !bootstrap {
                    apply(&mut self.up_excl);
                }
            }
            Link::Downlink => {
                apply(&mut self.down);
                if !bootstrap {
                    apply(&mut self.down_excl);
                }
            }
        }
    }

    fn frac(t: &LinkTotals, o: &LinkTotals) -> f64 {
        let num = t.transmitted + o.transmitted;
        let den = t.dense_reference + o.dense_reference;
        if den == 0 {
            0.0
        } else {
            num as f64 / den as f64
        }
    }

    /// Cumulative fraction over both links, counting every transfer.
    pub fn fraction_inclusive(&self) -> f64 {
        Self::frac(&self.up, &self.down)
    }

    /// Cumulative fraction over both links, bootstrap broadcast excluded.
    pub fn fraction_exclusive(&self) -> f64 {
        Self::frac(&self.up_excl, &self.down_excl)
    }

    pub fn uplink_fraction(&self) -> f64 {
        Self::frac(&self.up, &LinkTotals::default())
    }

    pub fn bytes_up(&self) -> u64 {
        self.up.bytes
    }

    pub fn bytes_down(&self) -> u64 {
        self.down.bytes
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fl::Layout;
    use crate::seed::{stream_rng, Stream};
    use proptest::prelude::*;
    use rand::Rng;

    fn pv(values: Vec<f64>) -> ParamVector<f64> {
        let n = values.len();
        ParamVector { values, layout: Layout { entries: vec![(0, vec![1, n])] } }
    }

    fn dv(values: Vec<f64>) -> DeltaVector<f64> {
        let n = values.len();
        DeltaVector { values, layout: Layout { entries: vec![(0, vec![1, n])] } }
    }

    /// Full-sort reference selection, the oracle for `sparse_topk`.
    pub fn topk_oracle(h: &[f64], u: usize) -> Vec<u32> {
        let mut idx: Vec<u32> = (0..h.len() as u32).collect();
        idx.sort_by(|&a, &b| {
            h[b as usize]
                .abs()
                .partial_cmp(&h[a as usize].abs())
                .unwrap()
                .then(a.cmp(&b))
        });
        idx.truncate(u);
        idx.sort_unstable();
        idx
    }

    #[test]
    fn topk_hand_example() {
        let upd = sparse_topk(
            &pv(vec![1.0, 2.0, 3.0, 4.0]),
            &dv(vec![0.5, -2.0, 0.1, 1.0]),
            0.5,
            1,
            Rounding::Floor,
        )
        .unwrap();
        assert_eq!(upd.entries, vec![(1, 2.0), (3, 4.0)]);
    }

    #[test]
    fn kappa_one_is_identity() {
        let w = pv(vec![5.0, -1.0, 0.0]);
        let upd = sparse_topk(&w, &dv(vec![0.0, 0.0, 0.0]), 1.0, 0, Rounding::Floor).unwrap();
        assert_eq!(upd.entries.len(), 3);
        assert_eq!(merge_sparse(&pv(vec![9.0, 9.0, 9.0]), &upd).unwrap(), w);
    }

    #[test]
    fn selection_never_empty() {
        let upd = sparse_topk(&pv(vec![1.0, 2.0]), &dv(vec![0.3, 0.1]), 0.01, 0, Rounding::Floor)
            .unwrap();
        assert_eq!(upd.entries, vec![(0, 1.0)]);
    }

    #[test]
    fn kappa_out_of_range_rejected() {
        let w = pv(vec![1.0]);
        let h = dv(vec![1.0]);
        assert!(sparse_topk(&w, &h, 0.0, 0, Rounding::Floor).is_err());
        assert!(sparse_topk(&w, &h, 1.5, 0, Rounding::Floor).is_err());
    }

    #[test]
    fn topk_matches_full_sort_oracle() {
        let mut rng = stream_rng(99, Stream::DataGen, &[0]);
        for case in 0..200 {
            let d = rng.random_range(1..2000);
            let kappa = rng.random_range(0.001..1.0f64);
            let w: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            // quantized magnitudes force plenty of ties
            let h: Vec<f64> = (0..d)
                .map(|_| (rng.random_range(-5..=5i32) as f64) / 5.0)
                .collect();
            let u = selection_size(kappa, d, Rounding::Floor);
            let expect = topk_oracle(&h, u);
            let got = sparse_topk(&pv(w), &dv(h), kappa, 0, Rounding::Floor).unwrap();
            let got_idx: Vec<u32> = got.entries.iter().map(|&(i, _)| i).collect();
            assert_eq!(got_idx, expect, "case {case} d={d} kappa={kappa}");
        }
    }

    #[test]
    fn merge_empty_update_is_identity() {
        let base = pv(vec![1.0, 2.0]);
        let upd = SparseUpdate { round: 0, total_params: 2, entries: vec![] };
        assert_eq!(merge_sparse(&base, &upd).unwrap(), base);
    }

    #[test]
    fn merge_differs_only_at_unselected() {
        let w = pv(vec![10.0, 20.0, 30.0, 40.0]);
        let base = pv(vec![0.0, 0.0, 0.0, 0.0]);
        let upd = sparse_topk(&w, &dv(vec![1.0, 9.0, 2.0, 8.0]), 0.5, 0, Rounding::Floor).unwrap();
        let merged = merge_sparse(&base, &upd).unwrap();
        assert_eq!(merged.values, vec![0.0, 20.0, 0.0, 40.0]);
    }

    #[test]
    fn merge_rejects_out_of_range_index() {
        let base = pv(vec![1.0, 2.0]);
        let upd = SparseUpdate { round: 0, total_params: 2, entries: vec![(2, 0.0)] };
        assert!(merge_sparse(&base, &upd).is_err());
    }

    #[test]
    fn reduce_linear_closed_form() {
        let k1 = reduce_linear(0.06, 0.06, 0.01, 100);
        assert!((k1 - 0.0595).abs() < 1e-15);
        assert_eq!(reduce_linear(0.5, 0.3, 0.3, 10), 0.5); // alpha == omega

        let mut k = 0.06;
        for _ in 0..100 {
            k = reduce_linear(k, 0.06, 0.01, 100);
        }
        assert!((k - 0.01).abs() < 1e-12);
    }

    #[test]
    fn reduce_exponential_closed_form() {
        let k1 = reduce_exponential(0.06, 0.06, 0.01, 100).unwrap();
        assert!((k1 - 0.06 * (1.0f64 / 6.0).powf(0.01)).abs() < 1e-15);
        assert!((k1 - 0.058934).abs() < 1e-6);
        assert_eq!(reduce_exponential(0.5, 0.3, 0.3, 10).unwrap(), 0.5);
        assert!(reduce_exponential(0.0, 0.06, 0.01, 100).is_err());

        let mut k = 0.06f64;
        for _ in 0..100 {
            k = reduce_exponential(k, 0.06, 0.01, 100).unwrap();
        }
        assert!(((k - 0.01) / 0.01).abs() < 1e-10);
    }

    #[test]
    fn schedule_monotone_and_clamped() {
        for sched in [
            CompressionSchedule::Linear { alpha: 0.06, omega: 0.01, rounds: 50 },
            CompressionSchedule::Exponential { alpha: 0.06, omega: 0.01, rounds: 50 },
        ] {
            let mut k = sched.initial_kappa();
            let mut prev = k;
            for _ in 0..200 {
                k = sched.advance(k).unwrap();
                assert!(k <= prev + 1e-15);
                assert!(k >= 0.01 - 1e-15);
                prev = k;
            }
            assert!((k - 0.01).abs() < 1e-12);
        }
    }

    #[test]
    fn codec_sizes() {
        let empty = SparseUpdate::<f64> { round: 3, total_params: 10, entries: vec![] };
        assert_eq!(encode(&empty).len(), 16);
        let two = SparseUpdate::<f64> {
            round: 3,
            total_params: 10,
            entries: vec![(1, 0.5), (7, -2.0)],
        };
        assert_eq!(encode(&two).len(), 16 + 8 * 2);
        assert_eq!(two.wire_bytes(), 32);
    }

    #[test]
    fn codec_error_paths() {
        let valid = encode(&SparseUpdate::<f64> {
            round: 1,
            total_params: 4,
            entries: vec![(0, 1.0), (2, -1.0)],
        });
        assert!(decode::<f64>(&valid[..10]).is_err()); // truncated header
        assert!(decode::<f64>(&valid[..20]).is_err()); // truncated entries
        let mut bad_magic = valid.clone();
        bad_magic[0] = b'X';
        assert!(decode::<f64>(&bad_magic).is_err());
        let mut bad_index = valid.clone();
        bad_index[16..20].copy_from_slice(&9u32.to_le_bytes());
        assert!(decode::<f64>(&bad_index).is_err());
    }

    proptest! {
        #[test]
        fn codec_roundtrip(round in 0u32..1000, d in 1u32..500, raw in proptest::collection::vec((0u32..500, -10f32..10f32), 0..64)) {
            let mut entries: Vec<(u32, f64)> = raw
                .into_iter()
                .filter(|&(i, _)| i < d)
                .map(|(i, v)| (i, v as f64))
                .collect();
            entries.sort_by_key(|&(i, _)| i);
            entries.dedup_by_key(|&mut (i, _)| i);
            let upd = SparseUpdate { round, total_params: d, entries };
            let bytes = encode(&upd);
            prop_assert_eq!(bytes.len() as u64, upd.wire_bytes());
            let back = decode::<f64>(&bytes).unwrap();
            prop_assert_eq!(back, upd);
            }

        #[test]
        fn topk_selection_optimality(h in proptest::collection::vec(-1f64..1.0, 1..200), kappa in 0.01f64..1.0) {
            let d = h.len();
            let w: Vec<f64> = (0..d).map(|i| i as f64).collect();
            let upd = sparse_topk(&pv(w), &dv(h.clone()), kappa, 0, Rounding::Floor).unwrap();
            prop_assert_eq!(upd.entries.len(), selection_size(kappa, d, Rounding::Floor));
            let selected: std::collections::HashSet<u32> =
                upd.entries.iter().map(|&(i, _)| i).collect();
            let min_sel = upd
                .entries
                .iter()
                .map(|&(i, _)| h[i as usize].abs())
                .fold(f64::INFINITY, f64::min);
            let max_unsel = (0..d as u32)
                .filter(|i| !selected.contains(i))
                .map(|i| h[i as usize].abs())
                .fold(0.0, f64::max);
            prop_assert!(min_sel >= max_unsel);
        }
    }

    #[test]
    fn ledger_fixed_kappa_fraction() {
        let mut ledger = BandwidthLedger::new();
        let d = 1000;
        let u = selection_size(0.06, d, Rounding::Floor);
        for _ in 0..10 {
            ledger.record(Link::Uplink, u, d, false);
        }
        assert_eq!(ledger.uplink_fraction(), u as f64 / d as f64);
    }

    #[test]
    fn ledger_bootstrap_exclusion() {
        let mut ledger = BandwidthLedger::new();
        ledger.record(Link::Downlink, 100, 100, true);
        ledger.record(Link::Downlink, 10, 100, false);
        assert_eq!(ledger.fraction_inclusive(), 110.0 / 200.0);
        assert_eq!(ledger.fraction_exclusive(), 10.0 / 100.0);
        assert_eq!(ledger.bytes_down(), (16 + 800) + (16 + 80));
    }
}
