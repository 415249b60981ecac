//! Translation edit rate with Tercom-style greedy block shifts.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::AddAssign;

use serde::{Deserialize, Serialize};

use super::tokenize::tokenize_tercom;
use super::{check_corpus, MetricConfig, MetricError};

pub const MAX_SHIFT_SIZE: usize = 10;
pub const MAX_SHIFT_DIST: usize = 50;
pub const MAX_SHIFT_CANDIDATES: usize = 1000;
const BEAM_WIDTH: usize = 25;
const INF: u64 = 1 << 60;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Op {
    Nop,
    Sub,
    /// Consumes a reference word.
    Ins,
    /// Consumes a hypothesis word.
    Del,
    Undef,
}

/// Beam-limited Levenshtein distance from `hyp` to `reference`, with the trace
/// of operations from the start of both sequences.
fn edit_distance(hyp: &[String], reference: &[String]) -> (u64, Vec<Op>) {
    let (nh, nr) = (hyp.len(), reference.len());
    let mut dist = vec![vec![(INF, Op::Undef); nr + 1]; nh + 1];
    for (j, cell) in dist[0].iter_mut().enumerate() {
        *cell = (j as u64, Op::Ins);
    }
    let ratio = if nh > 0 { nr as f64 / nh as f64 } else { 1.0 };
    let beam = if (BEAM_WIDTH as f64) < ratio / 2.0 {
        libm::ceil(ratio / 2.0 + BEAM_WIDTH as f64) as usize
    } else {
        BEAM_WIDTH
    };
    for i in 1..=nh {
        let diag = libm::floor(i as f64 * ratio) as usize;
        let min_j = diag.saturating_sub(beam);
        let max_j = if i == nh { nr + 1 } else { (nr + 1).min(diag + beam) };
        for j in min_j..max_j {
            if j == 0 {
                dist[i][0] = (dist[i - 1][0].0 + 1, Op::Del);
                continue;
            }
            let (cost_sub, op_sub) = if hyp[i - 1] == reference[j - 1] { (0, Op::Nop) } else { (1, Op::Sub) };
            let ops = [
                (dist[i - 1][j - 1].0 + cost_sub, op_sub),
                (dist[i - 1][j].0 + 1, Op::Del),
                (dist[i][j - 1].0 + 1, Op::Ins),
            ];
            for (cost, op) in ops {
                if dist[i][j].0 > cost {
                    dist[i][j] = (cost, op);
                }
            }
        }
    }
    let mut trace = Vec::new();
    let (mut i, mut j) = (nh, nr);
    while i > 0 || j > 0 {
        let op = dist[i][j].1;
        trace.push(op);
        match op {
            Op::Nop | Op::Sub => {
                i -= 1;
                j -= 1;
            }
            Op::Ins => j -= 1,
            Op::Del => i -= 1,
            Op::Undef => unreachable!("trace reached an unfilled cell"),
        }
    }
    trace.reverse();
    (dist[nh][nr].0, trace)
}

struct Alignment {
    /// Reference position to hypothesis position (-1 before the start).
    align: Vec<isize>,
    ref_err: Vec<u8>,
    hyp_err: Vec<u8>,
}

/// Alignment from a trace rewriting the reference into the hypothesis.
fn trace_to_alignment(trace: &[Op], n_ref: usize) -> Alignment {
    let (mut ph, mut pr) = (-1isize, -1isize);
    let mut a = Alignment { align: vec![-1; n_ref], ref_err: Vec::new(), hyp_err: Vec::new() };
    for &op in trace {
        match op {
            Op::Nop | Op::Sub => {
                ph += 1;
                pr += 1;
                a.align[pr as usize] = ph;
                let e = u8::from(op == Op::Sub);
                a.hyp_err.push(e);
                a.ref_err.push(e);
            }
            Op::Del => {
                ph += 1;
                a.hyp_err.push(1);
            }
            Op::Ins => {
                pr += 1;
                a.align[pr as usize] = ph;
                a.ref_err.push(1);
            }
            Op::Undef => unreachable!(),
        }
    }
    a
}

fn perform_shift(words: &[String], start: usize, len: usize, target: usize) -> Vec<String> {
    let mut out = Vec::with_capacity(words.len());
    let block = &words[start..start + len];
    if target < start {
        out.extend_from_slice(&words[..target]);
        out.extend_from_slice(block);
        out.extend_from_slice(&words[target..start]);
        out.extend_from_slice(&words[start + len..]);
    } else if target > start + len {
        out.extend_from_slice(&words[..start]);
        out.extend_from_slice(&words[start + len..target]);
        out.extend_from_slice(block);
        out.extend_from_slice(&words[target..]);
    } else {
        let t = (len + target).min(words.len());
        out.extend_from_slice(&words[..start]);
        out.extend_from_slice(&words[start + len..t]);
        out.extend_from_slice(block);
        out.extend_from_slice(&words[t..]);
    }
    out
}

/// Matching (hyp start, ref start, length) triples in Tercom's enumeration order.
fn shifted_pairs(hyp: &[String], reference: &[String]) -> Vec<(usize, usize, usize)> {
    let mut out = Vec::new();
    for sh in 0..hyp.len() {
        for sr in 0..reference.len() {
            if sh.abs_diff(sr) > MAX_SHIFT_DIST {
                continue;
            }
            let mut len = 0;
            while len < MAX_SHIFT_SIZE && hyp[sh + len] == reference[sr + len] {
                len += 1;
                out.push((sh, sr, len));
                if sh + len == hyp.len() || sr + len == reference.len() {
                    break;
                }
            }
        }
    }
    out
}

#[derive(PartialEq, Eq, PartialOrd, Ord)]
struct Candidate {
    gain: i64,
    len: usize,
    neg_start: isize,
    neg_target: isize,
    words: Vec<String>,
}

/// Best single shift and the updated candidate count.
fn best_shift(hyp: &[String], reference: &[String], mut checked: usize) -> (i64, Vec<String>, usize) {
    let (pre_score, trace) = edit_distance(hyp, reference);
    let a = trace_to_alignment(&trace, reference.len());
    let mut best: Option<Candidate> = None;
    for (sh, sr, len) in shifted_pairs(hyp, reference) {
        let err_sum = |v: &[u8], from: usize| v.iter().skip(from).take(len).map(|&e| e as usize).sum::<usize>();
        if err_sum(&a.hyp_err, sh) == 0 || err_sum(&a.ref_err, sr) == 0 {
            continue;
        }
        let at = a.align[sr];
        if sh as isize <= at && at < (sh + len) as isize {
            continue;
        }
        let mut prev = -1isize;
        for offset in -1..len as isize {
            let r = sr as isize + offset;
            let idx = if r == -1 { 0 } else { a.align[r as usize] + 1 };
            if idx == prev {
                continue;
            }
            prev = idx;
            let shifted = perform_shift(hyp, sh, len, idx as usize);
            let gain = pre_score as i64 - edit_distance(&shifted, reference).0 as i64;
            let cand = Candidate { gain, len, neg_start: -(sh as isize), neg_target: -idx, words: shifted };
            checked += 1;
            if best.as_ref().is_none_or(|b| cand > *b) {
                best = Some(cand);
            }
        }
        if checked >= MAX_SHIFT_CANDIDATES {
            break;
        }
    }
    match best {
        None => (0, hyp.to_vec(), checked),
        Some(b) => (b.gain, b.words, checked),
    }
}

/// Edits (shifts plus edit distance) turning `hyp` into `reference`.
pub fn segment_edits(hyp: &[String], reference: &[String]) -> usize {
    if reference.is_empty() {
        return hyp.len();
    }
    let mut words = hyp.to_vec();
    let mut shifts = 0;
    let mut checked = 0;
    loop {
        let (delta, shifted, c) = best_shift(&words, reference, checked);
        checked = c;
        if checked >= MAX_SHIFT_CANDIDATES || delta <= 0 {
            break;
        }
        shifts += 1;
        words = shifted;
    }
    shifts + edit_distance(&words, reference).0 as usize
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TerStats {
    pub edits: usize,
    pub ref_len: usize,
}

impl AddAssign<&TerStats> for TerStats {
    fn add_assign(&mut self, other: &TerStats) {
        self.edits += other.edits;
        self.ref_len += other.ref_len;
    }
}

impl TerStats {
    /// Edits per reference token.
    pub fn score(&self) -> f64 {
        if self.ref_len == 0 {
            return if self.edits == 0 { 0.0 } else { 1.0 };
        }
        self.edits as f64 / self.ref_len as f64
    }
}

pub fn tercom_tokens(text: &str, cfg: &MetricConfig) -> Vec<String> {
    tokenize_tercom(text, cfg.ter_normalized, cfg.ter_case_sensitive)
}

pub fn segment_stats(hyp: &str, reference: &str, cfg: &MetricConfig) -> TerStats {
    let r = tercom_tokens(reference, cfg);
    TerStats { edits: segment_edits(&tercom_tokens(hyp, cfg), &r), ref_len: r.len() }
}

/// Corpus TER as edits per reference token (a fraction, not a percentage).
pub fn ter(hyps: &[&str], refs: &[&str], cfg: &MetricConfig) -> Result<f64, MetricError> {
    Ok(ter_stats(hyps, refs, cfg)?.score())
}

pub fn ter_stats(hyps: &[&str], refs: &[&str], cfg: &MetricConfig) -> Result<TerStats, MetricError> {
    check_corpus(hyps, refs)?;
    cfg.validate()?;
    let mut total = TerStats::default();
    for (i, (h, r)) in hyps.iter().zip(refs).enumerate() {
        let s = segment_stats(h, r, cfg);
        if s.ref_len == 0 {
            return Err(MetricError::EmptyReference { index: i });
        }
        total += &s;
    }
    Ok(total)
}
