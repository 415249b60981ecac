//! Randomized edit applications checked against a direct re-implementation of
//! each edit operation.

use agmg_core::model::Side;
use agmg_core::refine::{apply_edits, EditOp, RefineEdit, RefineRow};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const WORDS: [&str; 12] = ["ὁ", "λόγος", "ἦν", "πρὸς", "τὸν", "θεόν,", "καὶ", "θεὸς", "ὁ", "ήταν", "αρχή.", "Μῆνιν"];

#[derive(Debug, Default)]
pub struct FuzzSummary {
    pub applications: usize,
    pub accepted: usize,
    pub rejected: usize,
    pub corrupting: usize,
}

fn collapse(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn text(v: &[String]) -> String {
    collapse(&v.join(" "))
}

fn sentence(rng: &mut ChaCha8Rng) -> String {
    let n = rng.random_range(1..5);
    let mut s = String::new();
    for i in 0..n {
        if i > 0 {
            s.push_str(if rng.random_bool(0.2) { "  " } else { " " });
        }
        s.push_str(WORDS[rng.random_range(0..WORDS.len())]);
    }
    s
}

/// What the edit should produce, or `None` if it is malformed.
fn expected(sentences: &[String], e: &RefineEdit) -> Option<(Vec<String>, std::ops::Range<usize>)> {
    let n = sentences.len();
    if e.indices.iter().any(|&i| i >= n) {
        return None;
    }
    match e.op {
        EditOp::Flag => Some((sentences.to_vec(), 0..0)),
        EditOp::Merge => {
            let idx = &e.indices;
            if idx.len() < 2 || (1..idx.len()).any(|k| idx[k] != idx[k - 1] + 1) {
                return None;
            }
            let mut out = sentences[..idx[0]].to_vec();
            out.push(sentences[idx[0]..=idx[idx.len() - 1]].join(" "));
            out.extend_from_slice(&sentences[idx[idx.len() - 1] + 1..]);
            Some((out, idx[0]..idx[0] + 1))
        }
        EditOp::Split => {
            if e.indices.len() != 1 || e.split_points.is_empty() {
                return None;
            }
            let at = e.indices[0];
            let cs: Vec<char> = sentences[at].chars().collect();
            let mut pieces = Vec::new();
            let mut prev = 0;
            for &p in e.split_points.iter().chain(std::iter::once(&cs.len())) {
                if p <= prev || p > cs.len() {
                    return None;
                }
                let piece: String = cs[prev..p].iter().collect::<String>().trim().to_string();
                if piece.is_empty() {
                    return None;
                }
                pieces.push(piece);
                prev = p;
            }
            let k = pieces.len();
            let mut out = sentences[..at].to_vec();
            out.extend(pieces);
            out.extend_from_slice(&sentences[at + 1..]);
            Some((out, at..at + k))
        }
        EditOp::Reorder => {
            let mut sorted = e.indices.clone();
            sorted.sort_unstable();
            if sorted != (0..n).collect::<Vec<_>>() {
                return None;
            }
            Some((e.indices.iter().map(|&i| sentences[i].clone()).collect(), 0..n))
        }
    }
}

fn random_edit(rng: &mut ChaCha8Rng, row: &RefineRow) -> RefineEdit {
    let side = if rng.random_bool(0.5) { Side::Grc } else { Side::Ell };
    let sentences = row.side(side);
    let n = sentences.len();
    let op = [EditOp::Merge, EditOp::Split, EditOp::Reorder, EditOp::Flag][rng.random_range(0..4)];
    let mut indices = Vec::new();
    let mut split_points = Vec::new();
    match op {
        EditOp::Merge => {
            let start = rng.random_range(0..n + 1);
            let len = rng.random_range(1..4);
            indices = (start..start + len).collect();
            if rng.random_bool(0.1) {
                indices.reverse();
            }
        }
        EditOp::Split => {
            let at = rng.random_range(0..n + 1);
            indices.push(at);
            let chars: Vec<char> = sentences.get(at).map(|s| s.chars().collect()).unwrap_or_default();
            // Mostly cut at spaces, sometimes mid-word or out of range.
            let spaces: Vec<usize> = chars.iter().enumerate().filter(|(_, c)| **c == ' ').map(|(i, _)| i).collect();
            for _ in 0..rng.random_range(1..3) {
                let p = if !spaces.is_empty() && rng.random_bool(0.7) {
                    spaces[rng.random_range(0..spaces.len())]
                } else {
                    rng.random_range(0..chars.len() + 2)
                };
                split_points.push(p);
            }
            if rng.random_bool(0.8) {
                split_points.sort_unstable();
                split_points.dedup();
            }
        }
        EditOp::Reorder => {
            indices = (0..n).collect();
            if rng.random_bool(0.6) {
                indices.shuffle(rng);
            }
            if rng.random_bool(0.1) {
                indices.pop();
            }
        }
        EditOp::Flag => {}
    }
    let mut edit = RefineEdit {
        row_id: if rng.random_bool(0.03) { "other".into() } else { row.id.clone() },
        op,
        side,
        indices,
        split_points,
        note: String::new(),
        text: None,
    };
    if rng.random_bool(0.5) {
        if let Some((out, range)) = expected(sentences, &edit) {
            let mut proposed: Vec<String> = out[range].to_vec();
            if !proposed.is_empty() && rng.random_bool(0.4) {
                let i = rng.random_range(0..proposed.len());
                proposed[i] = if rng.random_bool(0.5) { proposed[i].replace('ο', "ω") } else { format!("{} ἔτι", proposed[i]) };
            }
            edit.text = Some(proposed);
        }
    }
    edit
}

/// Applies `n` random edits and checks every outcome; returns the first violation.
pub fn run(n: usize, seed: u64) -> Result<FuzzSummary, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut summary = FuzzSummary::default();
    while summary.applications < n {
        let mut row = RefineRow {
            id: format!("row-{:05}", summary.applications),
            grc: (0..rng.random_range(1..6)).map(|_| sentence(&mut rng)).collect(),
            ell: (0..rng.random_range(1..6)).map(|_| sentence(&mut rng)).collect(),
        };
        for _ in 0..rng.random_range(1..5) {
            if summary.applications == n {
                break;
            }
            summary.applications += 1;
            let edit = random_edit(&mut rng, &row);
            let before = row.side(edit.side).to_vec();
            let other = row.side(if edit.side == Side::Grc { Side::Ell } else { Side::Grc }).to_vec();
            let predicted = if edit.row_id == row.id { expected(&before, &edit) } else { None };
            let proposal_ok = match (&predicted, &edit.text) {
                (Some((out, r)), Some(p)) => {
                    let want: Vec<String> = out[r.clone()].iter().map(|s| collapse(s)).collect();
                    want == p.iter().map(|s| collapse(s)).collect::<Vec<_>>()
                }
                _ => true,
            };
            let norm = |v: &[String]| v.iter().map(|s| collapse(s)).collect::<Vec<_>>();
            // A reorder is sound only if every sentence stays where it was.
            let moved = edit.op == EditOp::Reorder && predicted.as_ref().is_some_and(|(out, _)| norm(out) != norm(&before));
            let corrupting =
                predicted.as_ref().is_some_and(|(out, _)| text(out) != text(&before)) || moved || !proposal_ok;
            summary.corrupting += usize::from(corrupting);
            let applied = apply_edits(&row, std::slice::from_ref(&edit));
            let accepted = applied.accepted.len() == 1;
            let after = applied.row.side(edit.side).to_vec();
            let ctx = || format!("{edit:?} on {before:?}");
            if accepted {
                summary.accepted += 1;
                let (want, _) = predicted.as_ref().ok_or_else(|| format!("malformed edit accepted: {}", ctx()))?;
                if corrupting {
                    return Err(format!("text-corrupting edit accepted: {}", ctx()));
                }
                if text(&after) != text(&before) {
                    return Err(format!("accepted edit changed side text: {}", ctx()));
                }
                if norm(&after) != norm(want) {
                    return Err(format!("accepted edit produced {after:?}, expected {want:?}: {}", ctx()));
                }
                let origins = if edit.side == Side::Grc { &applied.grc_origins } else { &applied.ell_origins };
                let flat: Vec<usize> = origins.iter().flatten().copied().collect();
                let mut distinct = before.iter().map(|s| collapse(s)).collect::<Vec<_>>();
                distinct.sort();
                distinct.dedup();
                // Swapping two identical sentences is textually invisible.
                if distinct.len() == before.len() && flat.windows(2).any(|w| w[1] < w[0]) {
                    return Err(format!("accepted edit reordered sentences: {}", ctx()));
                }
                row = applied.row;
            } else {
                summary.rejected += 1;
                if after != before {
                    return Err(format!("rejected edit still modified the row: {}", ctx()));
                }
                if predicted.is_some() && !corrupting {
                    return Err(format!("sound edit rejected with {:?}: {}", applied.rejected, ctx()));
                }
            }
            let untouched = row.side(if edit.side == Side::Grc { Side::Ell } else { Side::Grc });
            if untouched != other.as_slice() {
                return Err(format!("edit touched the other side: {}", ctx()));
            }
        }
    }
    Ok(summary)
}
