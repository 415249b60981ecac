//! Monotone sentence alignment by dynamic programming over window-embedding
//! costs, with an exhaustive solver and a banded coarse-to-fine solver.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::embed::{cosine, EmbedError, OverlapTable, SentenceVector};
use crate::embed::window_text;
use crate::model::{AlignmentBlock, ExtraFields, Metadata, Side, SentencePair};

/// How a similarity block's cost scales with its shape `(a, b)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlockWeight {
    /// `a + b`.
    Sum,
    /// `2ab`. Same as `Sum` for 1:1 blocks, steeper for larger ones.
    #[default]
    Product,
}

impl BlockWeight {
    pub fn weight(self, a: usize, b: usize) -> f64 {
        match self {
            BlockWeight::Sum => (a + b) as f64,
            BlockWeight::Product => (2 * a * b) as f64,
        }
    }
}

/// Which solver [`align`] runs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlignMode {
    #[default]
    Fast,
    Exhaustive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlignConfig {
    pub mode: AlignMode,
    pub max_window: usize,
    pub skip_cost: f64,
    pub block_weight: BlockWeight,
    /// Subtract the mean sentence vector of both sides before scoring.
    pub center: bool,
    pub band_width: usize,
    pub normalizer_samples: usize,
    pub seed: u64,
}

impl Default for AlignConfig {
    fn default() -> Self {
        AlignConfig { mode: AlignMode::Fast, max_window: 4, skip_cost: 1.0, block_weight: BlockWeight::Product, center: true, band_width: 10, normalizer_samples: 128, seed: 13 }
    }
}

impl AlignConfig {
    pub fn validate(&self) -> Result<(), AlignError> {
        if self.max_window == 0 {
            return Err(AlignError::Config("max_window must be at least 1"));
        }
        if self.band_width == 0 {
            return Err(AlignError::Config("band_width must be at least 1"));
        }
        if !(self.skip_cost.is_finite() && self.skip_cost > 0.0) {
            return Err(AlignError::Config("skip_cost must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum AlignError {
    #[error("invalid alignment config: {0}")]
    Config(&'static str),
    #[error("{} window ({start}, {len}) is not in the overlap table", side.as_str())]
    MissingWindow { side: Side, start: usize, len: usize },
    #[error("{} window ({start}, {len}) has a zero-norm vector", side.as_str())]
    ZeroNorm { side: Side, start: usize, len: usize },
    #[error("normalizer must be positive, got {0}")]
    BadNormalizer(f64),
    #[error(transparent)]
    Embed(#[from] EmbedError),
}

/// A half-open window `[start, start + len)` of sentences.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Window {
    pub start: usize,
    pub len: usize,
}

impl Window {
    pub fn new(start: usize, len: usize) -> Self {
        Window { start, len }
    }
}

/// Scale parameters of the cost functional.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CostModel {
    pub norm: f64,
    pub skip_cost: f64,
    pub weight: BlockWeight,
}

impl CostModel {
    pub fn new(norm: f64, cfg: &AlignConfig) -> Self {
        CostModel { norm, skip_cost: cfg.skip_cost, weight: cfg.block_weight }
    }
}

fn lookup(table: &OverlapTable, w: Window, side: Side) -> Result<&SentenceVector, AlignError> {
    let v = table
        .get(w.start, w.len)
        .ok_or(AlignError::MissingWindow { side, start: w.start, len: w.len })?;
    if v.norm() == 0.0 {
        return Err(AlignError::ZeroNorm { side, start: w.start, len: w.len });
    }
    Ok(v)
}

/// Cost of aligning `src` with `tgt`. An empty window on either side makes a
/// skip block priced at `skip_cost` per sentence.
pub fn block_cost(
    src: Window,
    tgt: Window,
    src_table: &OverlapTable,
    tgt_table: &OverlapTable,
    costs: CostModel,
) -> Result<f64, AlignError> {
    if src.len == 0 || tgt.len == 0 {
        return Ok(costs.skip_cost * (src.len + tgt.len) as f64);
    }
    if costs.norm.is_nan() || costs.norm <= 0.0 {
        return Err(AlignError::BadNormalizer(costs.norm));
    }
    let a = lookup(src_table, src, Side::Grc)?;
    let b = lookup(tgt_table, tgt, Side::Ell)?;
    let distance = (1.0 - cosine(a, b)?).max(0.0);
    Ok(distance * costs.weight.weight(src.len, tgt.len) / costs.norm)
}

/// Mean cosine distance of random single-sentence cross pairs, at least 1e-6.
/// Returns 1 when either side is empty, where no similarity cost is ever needed.
pub fn estimate_normalizer(src_table: &OverlapTable, tgt_table: &OverlapTable, cfg: &AlignConfig) -> Result<f64, AlignError> {
    let (src, tgt) = (src_table.singles(), tgt_table.singles());
    if src.is_empty() || tgt.is_empty() {
        return Ok(1.0);
    }
    let samples = cfg.normalizer_samples.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut total = 0.0;
    for _ in 0..samples {
        let i = rng.random_range(0..src.len());
        let j = rng.random_range(0..tgt.len());
        total += 1.0 - cosine(&src[i], &tgt[j]).map_err(|_| AlignError::ZeroNorm {
            side: if src[i].norm() == 0.0 { Side::Grc } else { Side::Ell },
            start: if src[i].norm() == 0.0 { i } else { j },
            len: 1,
        })?;
    }
    Ok((total / samples as f64).max(1e-6))
}

/// Relative tolerance under which two path costs count as tied.
pub const TIE_EPSILON: f64 = 1e-12;

/// DP moves `(a, b)` in tie-break preference order: smaller `a + b` first, then smaller `a`.
/// Skips longer than one sentence are left out: they cost exactly as much as a
/// run of single skips, which the tie-break always prefers.
pub fn moves(k: usize) -> Vec<(usize, usize)> {
    let mut out: Vec<(usize, usize)> = (0..=k)
        .flat_map(|a| (0..=k).map(move |b| (a, b)))
        .filter(|&(a, b)| a + b >= 1 && (a > 0 && b > 0 || a + b == 1))
        .collect();
    out.sort_by_key(|&(a, b)| (a + b, a));
    out
}

/// Inclusive column range `[lo, hi]` of lattice row `i` that the DP may visit.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct RowBand {
    lo: usize,
    hi: usize,
}

struct Lattice {
    bands: Vec<RowBand>,
    cost: Vec<Vec<f64>>,
    step: Vec<Vec<(u8, u8)>>,
}

impl Lattice {
    fn new(bands: Vec<RowBand>) -> Self {
        let cost = bands.iter().map(|b| vec![f64::INFINITY; b.hi + 1 - b.lo]).collect();
        let step = bands.iter().map(|b| vec![(0, 0); b.hi + 1 - b.lo]).collect();
        Lattice { bands, cost, step }
    }

    fn cost_at(&self, i: usize, j: usize) -> f64 {
        let b = self.bands[i];
        if j < b.lo || j > b.hi {
            f64::INFINITY
        } else {
            self.cost[i][j - b.lo]
        }
    }
}

fn solve(
    src_table: &OverlapTable,
    tgt_table: &OverlapTable,
    k: usize,
    costs: CostModel,
    bands: Vec<RowBand>,
) -> Result<Vec<AlignmentBlock>, AlignError> {
    let (m, n) = (src_table.sentences(), tgt_table.sentences());
    let moves = moves(k);
    let mut lat = Lattice::new(bands);
    lat.cost[0][0] = 0.0;
    for i in 0..=m {
        let RowBand { lo, hi } = lat.bands[i];
        for j in lo..=hi {
            if i == 0 && j == 0 {
                continue;
            }
            let mut best = f64::INFINITY;
            let mut best_move = (0u8, 0u8);
            for &(a, b) in &moves {
                if a > i || b > j {
                    continue;
                }
                let prev = lat.cost_at(i - a, j - b);
                if prev == f64::INFINITY {
                    continue;
                }
                let c = prev + block_cost(Window::new(i - a, a), Window::new(j - b, b), src_table, tgt_table, costs)?;
                if best == f64::INFINITY || c < best - TIE_EPSILON * best.max(1.0) {
                    best = c;
                    best_move = (a as u8, b as u8);
                }
            }
            lat.cost[i][j - lo] = best;
            lat.step[i][j - lo] = best_move;
        }
    }
    let mut blocks = Vec::new();
    let (mut i, mut j) = (m, n);
    while i > 0 || j > 0 {
        let (a, b) = lat.step[i][j - lat.bands[i].lo];
        let (a, b) = (a as usize, b as usize);
        debug_assert!(a + b > 0, "unreachable lattice cell ({i}, {j})");
        let cost = block_cost(Window::new(i - a, a), Window::new(j - b, b), src_table, tgt_table, costs)?;
        blocks.push(AlignmentBlock { src_start: i - a, src_len: a, tgt_start: j - b, tgt_len: b, cost });
        i -= a;
        j -= b;
    }
    blocks.reverse();
    Ok(blocks)
}

/// Validates the inputs and returns the tables the DP scores: centered on the
/// pooled mean of all single-sentence vectors when `cfg.center` is set and no
/// entry collapses to zero, otherwise the inputs unchanged.
pub fn prepare_tables(
    src_table: &OverlapTable,
    tgt_table: &OverlapTable,
    cfg: &AlignConfig,
) -> Result<(OverlapTable, OverlapTable), AlignError> {
    cfg.validate()?;
    let k = cfg.max_window;
    for (table, side) in [(src_table, Side::Grc), (tgt_table, Side::Ell)] {
        let need = k.min(table.sentences());
        if need > 0 && table.get(0, need).is_none() {
            return Err(AlignError::MissingWindow { side, start: 0, len: need });
        }
        if let Some((start, len)) = table.keys().find(|&(s, l)| table.get(s, l).is_some_and(|v| v.norm() == 0.0)) {
            return Err(AlignError::ZeroNorm { side, start, len });
        }
    }
    if !cfg.center || src_table.is_empty() || tgt_table.is_empty() {
        return Ok((src_table.clone(), tgt_table.clone()));
    }
    let mean = SentenceVector::mean(src_table.singles().iter().chain(tgt_table.singles()));
    let src = src_table.map(|v| v.minus(&mean));
    let tgt = tgt_table.map(|v| v.minus(&mean));
    let degenerate = src.vectors().chain(tgt.vectors()).any(|v| v.norm() < 1e-6);
    if degenerate {
        Ok((src_table.clone(), tgt_table.clone()))
    } else {
        Ok((src, tgt))
    }
}

fn exhaustive_with(src_table: &OverlapTable, tgt_table: &OverlapTable, k: usize, costs: CostModel) -> Result<Vec<AlignmentBlock>, AlignError> {
    let (m, n) = (src_table.sentences(), tgt_table.sentences());
    let bands = vec![RowBand { lo: 0, hi: n }; m + 1];
    solve(src_table, tgt_table, k, costs, bands)
}

/// Minimum-cost monotone tiling over the full lattice.
pub fn align_exhaustive(src_table: &OverlapTable, tgt_table: &OverlapTable, cfg: &AlignConfig) -> Result<Vec<AlignmentBlock>, AlignError> {
    let (src, tgt) = prepare_tables(src_table, tgt_table, cfg)?;
    let norm = estimate_normalizer(&src, &tgt, cfg)?;
    exhaustive_with(&src, &tgt, cfg.max_window, CostModel::new(norm, cfg))
}

/// Halves a side by averaging adjacent sentence vectors.
fn downsample(table: &OverlapTable, k: usize) -> Result<OverlapTable, AlignError> {
    let coarse: Vec<SentenceVector> = table
        .singles()
        .chunks(2)
        .map(|pair| SentenceVector::mean(pair.iter().map(SentenceVector::normalized).collect::<Vec<_>>().iter()))
        .collect();
    Ok(OverlapTable::from_sentence_vectors(coarse, k)?)
}

/// Per-row column ranges around an upsampled coarse path.
fn band_from_coarse(path: &[AlignmentBlock], cm: usize, cn: usize, m: usize, n: usize, bw: usize, k: usize) -> Vec<RowBand> {
    let mut coarse = vec![RowBand { lo: usize::MAX, hi: 0 }; cm + 1];
    let (mut i, mut j) = (0usize, 0usize);
    coarse[0] = RowBand { lo: 0, hi: 0 };
    for b in path {
        let (i1, j1) = (i + b.src_len, j + b.tgt_len);
        for row in &mut coarse[i..=i1] {
            row.lo = row.lo.min(j);
            row.hi = row.hi.max(j1);
        }
        i = i1;
        j = j1;
    }
    let widened: Vec<RowBand> = coarse
        .iter()
        .map(|r| RowBand { lo: r.lo.saturating_sub(bw), hi: (r.hi + bw).min(cn) })
        .collect();
    let mut bands = Vec::with_capacity(m + 1);
    for fi in 0..=m {
        let below = (fi / 2).min(cm);
        let above = fi.div_ceil(2).min(cm);
        let lo = widened[below].lo.min(widened[above].lo);
        let hi = widened[below].hi.max(widened[above].hi);
        let lo = (2 * lo).saturating_sub(k).min(n);
        let hi = (2 * hi + k).min(n);
        bands.push(RowBand { lo, hi });
    }
    for fi in 1..=m {
        bands[fi].lo = bands[fi].lo.max(bands[fi - 1].lo);
    }
    for fi in (0..m).rev() {
        bands[fi].hi = bands[fi].hi.min(bands[fi + 1].hi);
    }
    bands[0].lo = 0;
    bands[m].hi = n;
    for band in &mut bands {
        band.lo = band.lo.min(band.hi);
    }
    bands
}

fn fast_with(src_table: &OverlapTable, tgt_table: &OverlapTable, cfg: &AlignConfig, costs: CostModel) -> Result<Vec<AlignmentBlock>, AlignError> {
    let (m, n) = (src_table.sentences(), tgt_table.sentences());
    let k = cfg.max_window;
    if m.max(n) <= 2 * cfg.band_width || m == 0 || n == 0 {
        return exhaustive_with(src_table, tgt_table, k, costs);
    }
    let coarse_src = downsample(src_table, k)?;
    let coarse_tgt = downsample(tgt_table, k)?;
    let coarse_norm = estimate_normalizer(&coarse_src, &coarse_tgt, cfg)?;
    let coarse_costs = CostModel::new(coarse_norm, cfg);
    let path = fast_with(&coarse_src, &coarse_tgt, cfg, coarse_costs)?;
    let bands = band_from_coarse(&path, coarse_src.sentences(), coarse_tgt.sentences(), m, n, cfg.band_width, k);
    solve(src_table, tgt_table, k, costs, bands)
}

/// Coarse-to-fine alignment. Identical to [`align_exhaustive`] when
/// `max(m, n) <= 2 * band_width`.
pub fn align_fast(src_table: &OverlapTable, tgt_table: &OverlapTable, cfg: &AlignConfig) -> Result<Vec<AlignmentBlock>, AlignError> {
    let (src, tgt) = prepare_tables(src_table, tgt_table, cfg)?;
    let norm = estimate_normalizer(&src, &tgt, cfg)?;
    fast_with(&src, &tgt, cfg, CostModel::new(norm, cfg))
}

/// Runs the solver selected by `cfg.mode`.
pub fn align(src_table: &OverlapTable, tgt_table: &OverlapTable, cfg: &AlignConfig) -> Result<Vec<AlignmentBlock>, AlignError> {
    match cfg.mode {
        AlignMode::Fast => align_fast(src_table, tgt_table, cfg),
        AlignMode::Exhaustive => align_exhaustive(src_table, tgt_table, cfg),
    }
}

/// Sum of block costs.
pub fn total_cost(blocks: &[AlignmentBlock]) -> f64 {
    blocks.iter().map(|b| b.cost).sum()
}

/// Whether `blocks` tile `[0, m) x [0, n)` in order.
pub fn is_valid_tiling(blocks: &[AlignmentBlock], m: usize, n: usize) -> bool {
    let (mut i, mut j) = (0, 0);
    for b in blocks {
        if b.src_start != i || b.tgt_start != j || b.src_len + b.tgt_len == 0 {
            return false;
        }
        i += b.src_len;
        j += b.tgt_len;
    }
    i == m && j == n
}

/// Precision, recall and F1 of exact block matches against a gold tiling.
pub fn block_f1(predicted: &[AlignmentBlock], gold: &[AlignmentBlock]) -> (f64, f64, f64) {
    use alloc::collections::BTreeSet;
    let p: BTreeSet<_> = predicted.iter().map(AlignmentBlock::span).collect();
    let g: BTreeSet<_> = gold.iter().map(AlignmentBlock::span).collect();
    let hit = p.intersection(&g).count() as f64;
    let precision = if p.is_empty() { 0.0 } else { hit / p.len() as f64 };
    let recall = if g.is_empty() { 0.0 } else { hit / g.len() as f64 };
    let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
    (precision, recall, f1)
}

/// Pairs for the non-skip blocks of an alignment, numbered `{doc_id}:{n}` in order.
pub fn pairs_from_blocks(doc_id: &str, meta: &Metadata, grc: &[String], ell: &[String], blocks: &[AlignmentBlock]) -> Vec<SentencePair> {
    blocks
        .iter()
        .filter(|b| !b.is_skip())
        .enumerate()
        .map(|(n, b)| SentencePair {
            id: format!("{doc_id}:{n:04}"),
            grc: window_text(grc, b.src_start, b.src_len),
            ell: window_text(ell, b.tgt_start, b.tgt_len),
            meta: meta.clone(),
            block: b.span(),
            score: b.cost.max(0.0),
            refined: false,
            multi_reference: false,
            extra: ExtraFields::new(),
        })
        .collect()
}

/// Alignment of a document whose sentences already correspond: 1:1 when the
/// counts agree, otherwise one block spanning both sides.
pub fn prealigned_blocks(m: usize, n: usize) -> Vec<AlignmentBlock> {
    if m == n {
        (0..m).map(|i| AlignmentBlock { src_start: i, src_len: 1, tgt_start: i, tgt_len: 1, cost: 0.0 }).collect()
    } else if m == 0 || n == 0 {
        Vec::new()
    } else {
        vec![AlignmentBlock { src_start: 0, src_len: m, tgt_start: 0, tgt_len: n, cost: 0.0 }]
    }
}
