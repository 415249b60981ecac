//! Slow, direct metric definitions used to check the library implementations.

use std::collections::{HashMap, VecDeque};

/// Occurrences of `gram` in `seq`, counted by scanning every position.
fn occurrences<T: PartialEq>(seq: &[T], gram: &[T]) -> usize {
    (0..=seq.len().saturating_sub(gram.len())).filter(|&i| seq.len() >= gram.len() && &seq[i..i + gram.len()] == gram).count()
}

/// (clipped matches, hypothesis n-grams) for order `n`, one n-gram position at a time.
fn clipped<T: PartialEq>(hyp: &[T], reference: &[T], n: usize) -> (usize, usize) {
    if hyp.len() < n {
        return (0, 0);
    }
    let mut seen: Vec<&[T]> = Vec::new();
    let mut correct = 0;
    for i in 0..=hyp.len() - n {
        let g = &hyp[i..i + n];
        if seen.contains(&g) {
            continue;
        }
        seen.push(g);
        correct += occurrences(hyp, g).min(occurrences(reference, g));
    }
    (correct, hyp.len() - n + 1)
}

/// Corpus BLEU following the worksheet: sum clipped counts per order, take
/// precisions (halving the smoothed value at each zero order), geometric mean,
/// brevity penalty.
pub fn bleu(segments: &[(Vec<String>, Vec<String>)], max_order: usize, smooth: bool) -> f64 {
    let mut correct = vec![0usize; max_order];
    let mut total = vec![0usize; max_order];
    let (mut c, mut r) = (0usize, 0usize);
    for (h, rf) in segments {
        c += h.len();
        r += rf.len();
        for n in 1..=max_order {
            let (m, t) = clipped(h, rf, n);
            correct[n - 1] += m;
            total[n - 1] += t;
        }
    }
    if correct.iter().sum::<usize>() == 0 {
        return 0.0;
    }
    let mut log_sum = 0.0;
    let mut k = 0;
    for n in 0..max_order {
        if total[n] == 0 {
            return 0.0;
        }
        let p = if correct[n] > 0 {
            correct[n] as f64 / total[n] as f64
        } else if smooth {
            k += 1;
            1.0 / (2f64.powi(k) * total[n] as f64)
        } else {
            return 0.0;
        };
        log_sum += p.ln();
    }
    let bp = if c >= r { 1.0 } else if c == 0 { 0.0 } else { (1.0 - r as f64 / c as f64).exp() };
    100.0 * bp * (log_sum / max_order as f64).exp()
}

/// Per-order (hyp, ref, match) counts by listing every n-gram position.
fn order_stats<T: PartialEq>(hyp: &[T], reference: &[T], n: usize) -> [usize; 3] {
    let (matched, h) = clipped(hyp, reference, n);
    let r = if reference.len() >= n { reference.len() - n + 1 } else { 0 };
    [if r == 0 { 0 } else { h }, r, matched]
}

fn peel(text: &str) -> Vec<String> {
    const P: &str = "!\"#$%&'()*+,-./:;<=>?@[\\]^_`{|}~";
    let mut out = Vec::new();
    for w in text.split_whitespace() {
        let cs: Vec<char> = w.chars().collect();
        if cs.len() > 1 && P.contains(cs[cs.len() - 1]) {
            out.push(cs[..cs.len() - 1].iter().collect());
            out.push(cs[cs.len() - 1].to_string());
        } else if cs.len() > 1 && P.contains(cs[0]) {
            out.push(cs[0].to_string());
            out.push(cs[1..].iter().collect());
        } else {
            out.push(w.to_string());
        }
    }
    out
}

/// Corpus chrF. `per_order_f` averages F over orders; otherwise precision and
/// recall are averaged over orders present on both sides first.
pub fn chrf(pairs: &[(&str, &str)], char_order: usize, word_order: usize, beta: f64, per_order_f: bool) -> f64 {
    let mut stats = vec![[0usize; 3]; char_order + word_order];
    for (h, r) in pairs {
        let hc: Vec<char> = h.chars().filter(|c| !c.is_whitespace()).collect();
        let rc: Vec<char> = r.chars().filter(|c| !c.is_whitespace()).collect();
        let (hw, rw) = (peel(h), peel(r));
        for n in 1..=char_order + word_order {
            let s = if n <= char_order { order_stats(&hc, &rc, n) } else { order_stats(&hw, &rw, n - char_order) };
            for k in 0..3 {
                stats[n - 1][k] += s[k];
            }
        }
    }
    let b2 = beta * beta;
    let f = |p: f64, r: f64| if b2 * p + r > 0.0 { (1.0 + b2) * p * r / (b2 * p + r) } else { 0.0 };
    if per_order_f {
        let eps = 1e-16;
        let sum: f64 = stats
            .iter()
            .map(|&[h, r, m]| {
                let p = if h > 0 { m as f64 / h as f64 } else { eps };
                let rc = if r > 0 { m as f64 / r as f64 } else { eps };
                if b2 * p + rc > 0.0 { f(p, rc) } else { eps }
            })
            .sum();
        return 100.0 * sum / stats.len() as f64;
    }
    let live: Vec<(f64, f64)> =
        stats.iter().filter(|s| s[0] > 0 && s[1] > 0).map(|&[h, r, m]| (m as f64 / h as f64, m as f64 / r as f64)).collect();
    if live.is_empty() {
        return 0.0;
    }
    let p = live.iter().map(|x| x.0).sum::<f64>() / live.len() as f64;
    let r = live.iter().map(|x| x.1).sum::<f64>() / live.len() as f64;
    100.0 * f(p, r)
}

pub fn levenshtein<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    for (i, x) in a.iter().enumerate() {
        let mut cur = vec![i + 1; b.len() + 1];
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = (prev[j] + usize::from(x != y)).min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        prev = cur;
    }
    prev[b.len()]
}

/// Minimum of shifts + Levenshtein over every sequence reachable by moving
/// contiguous blocks anywhere, found by breadth-first search over shift counts.
pub fn exhaustive_ter_edits(hyp: &[String], reference: &[String]) -> usize {
    assert!(hyp.len() <= 8, "exhaustive search is only meant for short segments");
    let mut depth: HashMap<Vec<String>, usize> = HashMap::new();
    let mut queue = VecDeque::new();
    depth.insert(hyp.to_vec(), 0);
    queue.push_back(hyp.to_vec());
    let mut best = levenshtein(hyp, reference);
    while let Some(seq) = queue.pop_front() {
        let d = depth[&seq];
        best = best.min(d + levenshtein(&seq, reference));
        if d + 1 >= best {
            continue;
        }
        let n = seq.len();
        for start in 0..n {
            for len in 1..=n - start {
                let block = &seq[start..start + len];
                let rest: Vec<String> = seq[..start].iter().chain(&seq[start + len..]).cloned().collect();
                for at in 0..=rest.len() {
                    let mut next = rest[..at].to_vec();
                    next.extend_from_slice(block);
                    next.extend_from_slice(&rest[at..]);
                    if !depth.contains_key(&next) {
                        depth.insert(next.clone(), d + 1);
                        queue.push_back(next);
                    }
                }
            }
        }
    }
    best
}
