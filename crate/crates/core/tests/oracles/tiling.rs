//! Brute-force enumeration of monotone tilings.

use agmg_core::align::{block_cost, prepare_tables, TIE_EPSILON, estimate_normalizer, AlignConfig, CostModel, Window};
use agmg_core::embed::OverlapTable;
use agmg_core::model::AlignmentBlock;

fn walk(
    i: usize,
    j: usize,
    acc: f64,
    path: &mut Vec<AlignmentBlock>,
    ctx: &(&OverlapTable, &OverlapTable, usize, CostModel),
    best: &mut Option<(f64, Vec<AlignmentBlock>)>,
) {
    let (src, tgt, k, costs) = *ctx;
    let (m, n) = (src.sentences(), tgt.sentences());
    if i == m && j == n {
        let better = match best {
            None => true,
            Some((c, p)) => {
                let eps = TIE_EPSILON * 1e3 * c.abs().max(1.0);
                acc < *c - eps || ((acc - *c).abs() <= eps && tie_key(path) < tie_key(p))
            }
        };
        if better {
            *best = Some((acc, path.clone()));
        }
        return;
    }
    for a in 0..=k.min(m - i) {
        for b in 0..=k.min(n - j) {
            if a + b == 0 {
                continue;
            }
            let cost = block_cost(Window::new(i, a), Window::new(j, b), src, tgt, costs).unwrap();
            path.push(AlignmentBlock { src_start: i, src_len: a, tgt_start: j, tgt_len: b, cost });
            walk(i + a, j + b, acc + cost, path, ctx, best);
            path.pop();
        }
    }
}

/// Reversed block sequence keyed by (a + b, a): the DP's tie-break order.
fn tie_key(path: &[AlignmentBlock]) -> Vec<(usize, usize)> {
    path.iter().rev().map(|b| (b.src_len + b.tgt_len, b.src_len)).collect()
}

/// Minimum-cost tiling with the DP's tie-break, found by enumeration.
pub fn brute_force(src: &OverlapTable, tgt: &OverlapTable, cfg: &AlignConfig) -> Vec<AlignmentBlock> {
    let (src, tgt) = prepare_tables(src, tgt, cfg).unwrap();
    let (src, tgt) = (&src, &tgt);
    let norm = estimate_normalizer(src, tgt, cfg).unwrap();
    let costs = CostModel::new(norm, cfg);
    let mut best = None;
    walk(0, 0, 0.0, &mut Vec::new(), &(src, tgt, cfg.max_window, costs), &mut best);
    best.map(|(_, p)| p).unwrap_or_default()
}
