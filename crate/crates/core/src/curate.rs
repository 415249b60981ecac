//! Deduplication, multi-reference tagging and leakage-free split assignment.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use unicode_general_category::{get_general_category, GeneralCategory};
use unicode_normalization::UnicodeNormalization;

use crate::model::{Dialect, ExcerptKey, SentencePair, Split};
use crate::normalize::collapse_whitespace;

fn is_punctuation(c: char) -> bool {
    matches!(
        get_general_category(c),
        GeneralCategory::ConnectorPunctuation
            | GeneralCategory::DashPunctuation
            | GeneralCategory::OpenPunctuation
            | GeneralCategory::ClosePunctuation
            | GeneralCategory::InitialPunctuation
            | GeneralCategory::FinalPunctuation
            | GeneralCategory::OtherPunctuation
    )
}

/// Duplicate-detection key of a Modern Greek sentence.
pub fn dedup_key(ell: &str) -> String {
    let lowered: String = ell.nfc().collect::<String>().to_lowercase();
    let stripped: String = lowered.chars().filter(|&c| !is_punctuation(c)).collect();
    collapse_whitespace(&stripped)
}

/// Identity of an Ancient Greek sentence: NFC with whitespace collapsed.
pub fn source_key(grc: &str) -> String {
    collapse_whitespace(&grc.nfc().collect::<String>())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DroppedPair {
    pub pair: SentencePair,
    /// Id of the kept pair with the same key.
    pub twin_id: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Deduplicated {
    pub kept: Vec<SentencePair>,
    pub dropped: Vec<DroppedPair>,
}

/// Keeps the first pair per [`dedup_key`]. Surviving pairs whose source text
/// has translations by two or more translators are tagged multi-reference.
pub fn deduplicate(pairs: &[SentencePair]) -> Deduplicated {
    let mut first_by_key: BTreeMap<String, usize> = BTreeMap::new();
    let mut out = Deduplicated::default();
    for pair in pairs {
        match first_by_key.get(&dedup_key(&pair.ell)) {
            Some(&kept) => out.dropped.push(DroppedPair { pair: pair.clone(), twin_id: out.kept[kept].id.clone() }),
            None => {
                first_by_key.insert(dedup_key(&pair.ell), out.kept.len());
                out.kept.push(pair.clone());
            }
        }
    }
    let mut translators: BTreeMap<String, BTreeSet<&str>> = BTreeMap::new();
    for pair in &out.kept {
        translators.entry(source_key(&pair.grc)).or_default().insert(pair.meta.translator.as_str());
    }
    let multi: BTreeSet<String> = translators.into_iter().filter(|(_, t)| t.len() >= 2).map(|(k, _)| k).collect();
    for pair in &mut out.kept {
        if multi.contains(&source_key(&pair.grc)) {
            pair.multi_reference = true;
        }
    }
    out
}

/// Dialect composition of a split as `(dialect, share)`; shares are normalized.
pub type DialectMix = Vec<(Dialect, f64)>;

/// Dev/test composition: Attic 1,300 and Koine 700 out of 2,000.
pub fn default_dev_test_mix() -> DialectMix {
    alloc::vec![(Dialect::Attic, 0.65), (Dialect::HellenisticKoine, 0.35)]
}

/// Stress composition: Ionic 110, Doric 60, Homeric/Epic 80 out of 250.
pub fn default_stress_mix() -> DialectMix {
    alloc::vec![(Dialect::Ionic, 0.44), (Dialect::Doric, 0.24), (Dialect::HomericEpic, 0.32)]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSpec {
    /// Informational; Train receives every pair not drawn into another split.
    pub train_pairs: usize,
    pub dev_pairs: usize,
    pub test_pairs: usize,
    pub stress_pairs: usize,
    pub stress_dialects: BTreeSet<Dialect>,
    /// Empty means any non-stress dialect.
    pub dev_test_mix: DialectMix,
    /// Empty means any stress dialect.
    pub stress_mix: DialectMix,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_pairs: 128_231,
            dev_pairs: 2_000,
            test_pairs: 2_000,
            stress_pairs: 250,
            stress_dialects: BTreeSet::from([Dialect::Ionic, Dialect::Doric, Dialect::HomericEpic]),
            dev_test_mix: default_dev_test_mix(),
            stress_mix: default_stress_mix(),
            seed: 13,
        }
    }
}

/// Pair total the default split sizes were defined for.
pub const REFERENCE_TOTAL: usize = 132_481;

fn round_half_up(x: f64) -> usize {
    libm::floor(x + 0.5) as usize
}

impl SplitSpec {
    /// Default sizes scaled from the reference total to `total` pairs.
    pub fn proportional(total: usize) -> Self {
        let base = SplitSpec::default();
        let scale = |n: usize| round_half_up(n as f64 * total as f64 / REFERENCE_TOTAL as f64);
        let (dev, test, stress) = (scale(base.dev_pairs), scale(base.test_pairs), scale(base.stress_pairs));
        SplitSpec {
            train_pairs: total.saturating_sub(dev + test + stress),
            dev_pairs: dev,
            test_pairs: test,
            stress_pairs: stress,
            ..base
        }
    }

    pub fn validate(&self) -> Result<(), CurateError> {
        if self.stress_pairs > 0 && self.stress_dialects.is_empty() {
            return Err(CurateError::InvalidSpec("stress_dialects is empty but stress_pairs > 0"));
        }
        for (d, _) in &self.stress_mix {
            if !self.stress_dialects.contains(d) {
                return Err(CurateError::InvalidSpec("stress_mix names a dialect outside stress_dialects"));
            }
        }
        for (d, _) in &self.dev_test_mix {
            if self.stress_dialects.contains(d) {
                return Err(CurateError::InvalidSpec("dev_test_mix names a stress dialect"));
            }
        }
        let shares_ok = |mix: &DialectMix| mix.iter().all(|(_, s)| s.is_finite() && *s >= 0.0);
        if !shares_ok(&self.stress_mix) || !shares_ok(&self.dev_test_mix) {
            return Err(CurateError::InvalidSpec("dialect shares must be finite and non-negative"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum CurateError {
    #[error("invalid split spec: {0}")]
    InvalidSpec(&'static str),
    #[error("not enough pairs for {split} stratum {stratum}: need {needed}, {available} available")]
    Insufficient { split: Split, stratum: String, needed: usize, available: usize },
}

/// Splits `total` into integer targets following `shares` (largest remainder).
pub fn apportion(total: usize, shares: &[f64]) -> Vec<usize> {
    let sum: f64 = shares.iter().sum();
    if shares.is_empty() || sum <= 0.0 {
        return alloc::vec![0; shares.len()];
    }
    let exact: Vec<f64> = shares.iter().map(|s| s / sum * total as f64).collect();
    let mut out: Vec<usize> = exact.iter().map(|&x| libm::floor(x) as usize).collect();
    let mut order: Vec<usize> = (0..shares.len()).collect();
    order.sort_by(|&a, &b| {
        let (fa, fb) = (exact[a] - libm::floor(exact[a]), exact[b] - libm::floor(exact[b]));
        fb.partial_cmp(&fa).unwrap_or(core::cmp::Ordering::Equal).then(a.cmp(&b))
    });
    let short = total - out.iter().sum::<usize>();
    for &i in order.iter().take(short) {
        out[i] += 1;
    }
    out
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.0[root] != root {
            root = self.0[root];
        }
        let mut cur = x;
        while self.0[cur] != root {
            let next = self.0[cur];
            self.0[cur] = root;
            cur = next;
        }
        root
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.0[hi] = lo;
        }
    }
}

/// Excerpt groups joined by any shared source or dedup key. Components are
/// the unit of assignment.
#[derive(Clone, Debug, PartialEq)]
pub struct Component {
    pub pairs: Vec<usize>,
    pub groups: usize,
    pub dialects: BTreeSet<Dialect>,
    /// Must stay in Train: multi-reference or repeated source text, or mixed dialects.
    pub train_only: bool,
}

/// Builds assignment components in order of first appearance.
pub fn components(pairs: &[SentencePair]) -> Vec<Component> {
    let mut group_of: BTreeMap<ExcerptKey, usize> = BTreeMap::new();
    let mut pair_group = Vec::with_capacity(pairs.len());
    for p in pairs {
        let next = group_of.len();
        pair_group.push(*group_of.entry(p.meta.excerpt_key()).or_insert(next));
    }
    let mut uf = UnionFind((0..group_of.len()).collect());
    let mut by_ell: BTreeMap<String, usize> = BTreeMap::new();
    let mut by_grc: BTreeMap<String, usize> = BTreeMap::new();
    let mut grc_count: BTreeMap<String, usize> = BTreeMap::new();
    for (p, &g) in pairs.iter().zip(&pair_group) {
        let ek = dedup_key(&p.ell);
        let gk = source_key(&p.grc);
        *grc_count.entry(gk.clone()).or_default() += 1;
        if let Some(&other) = by_ell.get(&ek) {
            uf.union(g, other);
        } else {
            by_ell.insert(ek, g);
        }
        if let Some(&other) = by_grc.get(&gk) {
            uf.union(g, other);
        } else {
            by_grc.insert(gk, g);
        }
    }
    let mut index_of_root: BTreeMap<usize, usize> = BTreeMap::new();
    let mut comps: Vec<(Component, BTreeSet<usize>)> = Vec::new();
    for (i, (p, &g)) in pairs.iter().zip(&pair_group).enumerate() {
        let root = uf.find(g);
        let next = comps.len();
        let ci = *index_of_root.entry(root).or_insert(next);
        if ci == comps.len() {
            let c = Component { pairs: Vec::new(), groups: 0, dialects: BTreeSet::new(), train_only: false };
            comps.push((c, BTreeSet::new()));
        }
        let (c, groups) = &mut comps[ci];
        c.pairs.push(i);
        groups.insert(g);
        c.dialects.insert(p.meta.dialect);
        if p.multi_reference || grc_count[&source_key(&p.grc)] > 1 {
            c.train_only = true;
        }
    }
    comps
        .into_iter()
        .map(|(mut c, groups)| {
            c.groups = groups.len();
            c.train_only |= c.dialects.len() > 1;
            c
        })
        .collect()
}

/// Per-dialect bookkeeping of one split.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialectCount {
    /// Excerpt groups.
    pub rows: usize,
    pub pairs: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub rows: usize,
    pub pairs: usize,
    pub dialects: BTreeMap<Dialect, DialectCount>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub seed: u64,
    pub requested: BTreeMap<Split, usize>,
    pub splits: BTreeMap<Split, SplitCounts>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Splits {
    pub sets: BTreeMap<Split, Vec<SentencePair>>,
    pub manifest: SplitManifest,
}

impl Splits {
    pub fn get(&self, split: Split) -> &[SentencePair] {
        self.sets.get(&split).map(Vec::as_slice).unwrap_or(&[])
    }
}

fn stratum_seed(seed: u64, split: Split, stratum: usize) -> u64 {
    seed ^ ((split as u64 + 1) << 32) ^ (stratum as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Picks components of `candidates` (indices into `comps`) totalling at least
/// `needed` pairs: greedy fill in shuffled order, then the smallest remaining
/// component if the target cannot be hit exactly.
fn draw(comps: &[Component], candidates: &mut Vec<usize>, needed: usize, rng: &mut ChaCha8Rng) -> Option<Vec<usize>> {
    if needed == 0 {
        return Some(Vec::new());
    }
    candidates.shuffle(rng);
    let mut remaining = needed;
    let mut chosen = Vec::new();
    let mut rest = Vec::new();
    for &c in candidates.iter() {
        let size = comps[c].pairs.len();
        if remaining > 0 && size <= remaining {
            remaining -= size;
            chosen.push(c);
        } else {
            rest.push(c);
        }
    }
    if remaining > 0 {
        let smallest = rest
            .iter()
            .enumerate()
            .min_by_key(|&(pos, &c)| (comps[c].pairs.len(), pos))
            .map(|(pos, _)| pos)?;
        chosen.push(rest.remove(smallest));
    }
    *candidates = rest;
    Some(chosen)
}

/// Assigns every pair to a split. Components that cannot leave Train, and
/// anything not drawn, go to Train.
pub fn make_splits(pairs: &[SentencePair], spec: &SplitSpec) -> Result<Splits, CurateError> {
    spec.validate()?;
    let comps = components(pairs);
    let mut assignment: Vec<Split> = alloc::vec![Split::Train; comps.len()];
    let mut free: Vec<bool> = comps.iter().map(|c| !c.train_only).collect();

    let plans: [(Split, usize, &DialectMix, bool); 3] = [
        (Split::Stress, spec.stress_pairs, &spec.stress_mix, true),
        (Split::Test, spec.test_pairs, &spec.dev_test_mix, false),
        (Split::Dev, spec.dev_pairs, &spec.dev_test_mix, false),
    ];
    for (split, total, mix, stress) in plans {
        let allowed = |d: &Dialect| spec.stress_dialects.contains(d) == stress;
        let strata: Vec<(Option<Dialect>, usize)> = if mix.is_empty() {
            alloc::vec![(None, total)]
        } else {
            let shares: Vec<f64> = mix.iter().map(|(_, s)| *s).collect();
            mix.iter().map(|(d, _)| Some(*d)).zip(apportion(total, &shares)).collect()
        };
        for (si, (dialect, needed)) in strata.into_iter().enumerate() {
            let mut candidates: Vec<usize> = (0..comps.len())
                .filter(|&c| {
                    free[c]
                        && comps[c].dialects.iter().all(allowed)
                        && dialect.is_none_or(|d| comps[c].dialects.contains(&d))
                })
                .collect();
            let available: usize = candidates.iter().map(|&c| comps[c].pairs.len()).sum();
            let mut rng = ChaCha8Rng::seed_from_u64(stratum_seed(spec.seed, split, si));
            let chosen = draw(&comps, &mut candidates, needed, &mut rng).ok_or_else(|| CurateError::Insufficient {
                split,
                stratum: dialect.map_or_else(|| String::from("any"), |d| String::from(d.as_str())),
                needed,
                available,
            })?;
            for c in chosen {
                free[c] = false;
                assignment[c] = split;
            }
        }
    }

    let mut pair_split = alloc::vec![Split::Train; pairs.len()];
    for (c, comp) in comps.iter().enumerate() {
        for &p in &comp.pairs {
            pair_split[p] = assignment[c];
        }
    }
    let mut sets: BTreeMap<Split, Vec<SentencePair>> = Split::ALL.iter().map(|&s| (s, Vec::new())).collect();
    let mut rows: BTreeMap<Split, BTreeMap<Dialect, BTreeSet<ExcerptKey>>> = BTreeMap::new();
    for (p, &split) in pairs.iter().zip(&pair_split) {
        sets.get_mut(&split).expect("all splits present").push(p.clone());
        rows.entry(split).or_default().entry(p.meta.dialect).or_default().insert(p.meta.excerpt_key());
    }
    let splits = sets
        .iter()
        .map(|(&split, members)| {
            let mut counts = SplitCounts { pairs: members.len(), ..SplitCounts::default() };
            for p in members {
                counts.dialects.entry(p.meta.dialect).or_default().pairs += 1;
            }
            let mut all_rows = BTreeSet::new();
            for (d, keys) in rows.get(&split).into_iter().flatten() {
                counts.dialects.entry(*d).or_default().rows = keys.len();
                all_rows.extend(keys.iter().cloned());
            }
            counts.rows = all_rows.len();
            (split, counts)
        })
        .collect();
    let requested = BTreeMap::from([
        (Split::Train, spec.train_pairs),
        (Split::Dev, spec.dev_pairs),
        (Split::Test, spec.test_pairs),
        (Split::Stress, spec.stress_pairs),
    ]);
    Ok(Splits { sets, manifest: SplitManifest { seed: spec.seed, requested, splits } })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BlockSpan, ExtraFields, Metadata};
    use alloc::format;
    use alloc::vec;

    fn pair(id: &str, grc: &str, ell: &str, translator: &str) -> SentencePair {
        let mut meta = Metadata::new(Dialect::Attic);
        meta.translator = translator.into();
        SentencePair {
            id: id.into(),
            grc: grc.into(),
            ell: ell.into(),
            meta,
            block: BlockSpan::default(),
            score: 0.0,
            refined: false,
            multi_reference: false,
            extra: ExtraFields::new(),
        }
    }

    #[test]
    fn key_rules() {
        assert_eq!(dedup_key("Ο λόγος."), dedup_key("ο λόγος"));
        assert_eq!(dedup_key("α β"), dedup_key("α  β"));
        assert_ne!(dedup_key("α β"), dedup_key("α γ"));
        assert_eq!(dedup_key("«Ναι»· είπε;"), "ναι είπε");
        assert_eq!(dedup_key("ο\u{301}"), dedup_key("ό"));
    }

    #[test]
    fn dedup_examples() {
        let d = deduplicate(&[pair("a", "λόγος", "Ο λόγος.", "X"), pair("b", "λόγος.", "ο λόγος", "X")]);
        assert_eq!(d.kept.len(), 1);
        assert_eq!(d.dropped[0].twin_id, "a");

        let d = deduplicate(&[pair("a", "ὁ λόγος", "Ο λόγος.", "X"), pair("b", "ὁ λόγος", "Η ομιλία.", "Y")]);
        assert_eq!(d.kept.len(), 2);
        assert!(d.kept.iter().all(|p| p.multi_reference));

        let unique = vec![pair("a", "α", "Α", "X"), pair("b", "β", "Β", "X")];
        assert_eq!(deduplicate(&unique).kept, unique);
    }

    #[test]
    fn apportion_is_exact() {
        assert_eq!(apportion(2000, &[0.65, 0.35]), vec![1300, 700]);
        assert_eq!(apportion(250, &[0.44, 0.24, 0.32]), vec![110, 60, 80]);
        assert_eq!(apportion(7, &[1.0, 1.0, 1.0]), vec![3, 2, 2]);
        assert_eq!(apportion(5, &[]), Vec::<usize>::new());
    }

    #[test]
    fn proportional_spec() {
        let s = SplitSpec::proportional(REFERENCE_TOTAL);
        assert_eq!((s.train_pairs, s.dev_pairs, s.test_pairs, s.stress_pairs), (128_231, 2000, 2000, 250));
        let s = SplitSpec::proportional(13_248);
        assert_eq!((s.dev_pairs, s.test_pairs, s.stress_pairs), (200, 200, 25));
    }

    fn corpus() -> Vec<SentencePair> {
        let mut out = Vec::new();
        for (di, dialect) in Dialect::ALL.into_iter().enumerate() {
            for g in 0..20u64 {
                for s in 0..3 {
                    let mut p = pair(&format!("{di}-{g}-{s}"), &format!("grc {di} {g} {s}"), &format!("ell {di} {g} {s}"), "T");
                    p.meta.dialect = dialect;
                    p.meta.title = format!("w{di}");
                    p.meta.segment_index = g;
                    out.push(p);
                }
            }
        }
        out
    }

    #[test]
    fn splits_respect_strata_and_groups() {
        let spec = SplitSpec {
            dev_pairs: 12,
            test_pairs: 12,
            stress_pairs: 9,
            dev_test_mix: vec![],
            stress_mix: vec![],
            ..SplitSpec::default()
        };
        let s = make_splits(&corpus(), &spec).unwrap();
        assert_eq!(s.get(Split::Dev).len(), 12);
        assert!(s.get(Split::Stress).iter().all(|p| spec.stress_dialects.contains(&p.meta.dialect)));
        assert!(s.get(Split::Test).iter().all(|p| !spec.stress_dialects.contains(&p.meta.dialect)));
        let total: usize = s.sets.values().map(Vec::len).sum();
        assert_eq!(total, 300);
        let mut owner: BTreeMap<ExcerptKey, Split> = BTreeMap::new();
        for (split, ps) in &s.sets {
            for p in ps {
                assert_eq!(*owner.entry(p.meta.excerpt_key()).or_insert(*split), *split);
            }
        }
        assert_eq!(s, make_splits(&corpus(), &spec).unwrap());
    }

    #[test]
    fn insufficient_stratum_is_named() {
        let spec = SplitSpec { stress_pairs: 1000, ..SplitSpec::default() };
        match make_splits(&corpus(), &spec) {
            Err(CurateError::Insufficient { split: Split::Stress, stratum, .. }) => assert_eq!(stratum, "Ionic"),
            other => panic!("{other:?}"),
        }
        let bad = SplitSpec { stress_dialects: BTreeSet::new(), stress_mix: vec![], ..SplitSpec::default() };
        assert!(matches!(make_splits(&corpus(), &bad), Err(CurateError::InvalidSpec(_))));
    }

    #[test]
    fn multi_reference_stays_in_train() {
        let mut ps = corpus();
        let twin_src = ps[0].grc.clone();
        let mut twin = pair("twin", &twin_src, "άλλη απόδοση", "Other");
        twin.meta = ps[0].meta.clone();
        twin.meta.translator = "Other".into();
        twin.meta.segment_index = 99;
        ps.push(twin);
        let kept = deduplicate(&ps).kept;
        let spec = SplitSpec { dev_pairs: 30, test_pairs: 30, dev_test_mix: vec![], stress_pairs: 0, ..SplitSpec::default() };
        for seed in 0..10 {
            let s = make_splits(&kept, &SplitSpec { seed, ..spec.clone() }).unwrap();
            for split in [Split::Dev, Split::Test, Split::Stress] {
                assert!(s.get(split).iter().all(|p| !p.multi_reference && p.grc != twin_src));
            }
        }
    }
}
