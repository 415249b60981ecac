//! Seeded generator of synthetic Ancient/Modern Greek sentence sequences with
//! a known gold alignment. The Modern side is a cognate-like rewrite of the
//! Ancient one so that character n-gram embeddings carry real signal.

use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::AlignmentBlock;
use crate::normalize::strip_diacritics;

const CONSONANTS: [char; 17] = ['β', 'γ', 'δ', 'ζ', 'θ', 'κ', 'λ', 'μ', 'ν', 'ξ', 'π', 'ρ', 'σ', 'τ', 'φ', 'χ', 'ψ'];
const VOWELS: [char; 36] = [
    'α', 'ά', 'ὰ', 'ᾶ', 'ἀ', 'ἁ', 'ἄ', 'ε', 'έ', 'ἐ', 'ἑ', 'η', 'ή', 'ῆ', 'ἡ', 'ἠ', 'ῃ', 'ι', 'ί', 'ῖ', 'ἰ', 'ο', 'ό',
    'ὀ', 'ὁ', 'υ', 'ύ', 'ῦ', 'ὐ', 'ὑ', 'ω', 'ώ', 'ῶ', 'ὠ', 'ῳ', 'ᾷ',
];
const MODERN_FILLERS: [&str; 6] = ["και", "το", "η", "να", "που", "με"];

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    /// Number of Ancient Greek sentences.
    pub sentences: usize,
    /// Share of blocks that merge two source sentences into one target.
    pub merge_rate: f64,
    /// Share of blocks that split one source sentence into two targets.
    pub split_rate: f64,
    /// Share of source sentences with no translation.
    pub deletion_rate: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig { sentences: 200, merge_rate: 0.05, split_rate: 0.05, deletion_rate: 0.02, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthDocument {
    pub grc: Vec<String>,
    pub ell: Vec<String>,
    /// Gold tiling with zero costs.
    pub gold: Vec<AlignmentBlock>,
}

/// Random polytonic word generator and cognate rewriter.
pub struct Lexicon {
    rng: ChaCha8Rng,
}

impl Lexicon {
    pub fn new(seed: u64) -> Self {
        Lexicon { rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    pub fn ancient_word(&mut self) -> String {
        let syllables = self.rng.random_range(1..=4);
        let mut w = String::new();
        for _ in 0..syllables {
            w.push(CONSONANTS[self.rng.random_range(0..CONSONANTS.len())]);
            w.push(VOWELS[self.rng.random_range(0..VOWELS.len())]);
        }
        if self.rng.random_bool(0.4) {
            w.push(if self.rng.random_bool(0.5) { 'ς' } else { 'ν' });
        }
        w
    }

    /// Ancient words of a sentence, without punctuation.
    pub fn ancient_words(&mut self, min: usize, max: usize) -> Vec<String> {
        let n = self.rng.random_range(min..=max);
        (0..n).map(|_| self.ancient_word()).collect()
    }

    /// Monotonic, slightly mutated rewrite with occasional filler words.
    pub fn modern_words(&mut self, ancient: &[String]) -> Vec<String> {
        let mut out = Vec::with_capacity(ancient.len() * 2);
        for word in ancient {
            let mut m: String = word.chars().map(strip_diacritics).collect();
            if self.rng.random_bool(0.2) {
                let chars: Vec<char> = m.chars().collect();
                let at = self.rng.random_range(0..chars.len());
                let sub = CONSONANTS[self.rng.random_range(0..CONSONANTS.len())];
                m = chars.iter().enumerate().map(|(i, &c)| if i == at { sub } else { c }).collect();
            }
            if m.ends_with('ν') && self.rng.random_bool(0.5) {
                m.pop();
            }
            out.push(m);
            if self.rng.random_bool(0.3) {
                out.push(String::from(MODERN_FILLERS[self.rng.random_range(0..MODERN_FILLERS.len())]));
            }
        }
        out
    }

    pub fn terminator(&mut self) -> char {
        if self.rng.random_bool(0.15) {
            ';'
        } else {
            '.'
        }
    }
}

/// Joins words into a capitalized sentence ending with `end`.
pub fn sentence(words: &[String], end: char) -> String {
    let mut s = words.join(" ");
    if let Some(first) = s.chars().next() {
        let upper: String = first.to_uppercase().collect();
        s.replace_range(..first.len_utf8(), &upper);
    }
    s.push(end);
    s
}

pub fn synth_document(cfg: &SynthConfig) -> SynthDocument {
    let mut lex = Lexicon::new(cfg.seed);
    let mut doc = SynthDocument { grc: Vec::new(), ell: Vec::new(), gold: Vec::new() };
    while doc.grc.len() < cfg.sentences {
        let remaining = cfg.sentences - doc.grc.len();
        let r: f64 = lex.rng().random();
        let (src_start, tgt_start) = (doc.grc.len(), doc.ell.len());
        let (a, b) = if r < cfg.merge_rate && remaining >= 2 {
            let w1 = lex.ancient_words(3, 10);
            let w2 = lex.ancient_words(3, 10);
            let (t1, t2) = (lex.terminator(), lex.terminator());
            doc.grc.push(sentence(&w1, t1));
            doc.grc.push(sentence(&w2, t2));
            let mut joined = lex.modern_words(&w1);
            joined.last_mut().expect("non-empty").push(',');
            joined.extend(lex.modern_words(&w2));
            doc.ell.push(sentence(&joined, t2));
            (2, 1)
        } else if r < cfg.merge_rate + cfg.split_rate {
            let w1 = lex.ancient_words(3, 10);
            let w2 = lex.ancient_words(3, 10);
            let t = lex.terminator();
            let mut whole = w1.clone();
            whole.last_mut().expect("non-empty").push(',');
            whole.extend(w2.iter().cloned());
            doc.grc.push(sentence(&whole, t));
            doc.ell.push(sentence(&lex.modern_words(&w1), '.'));
            doc.ell.push(sentence(&lex.modern_words(&w2), t));
            (1, 2)
        } else if r < cfg.merge_rate + cfg.split_rate + cfg.deletion_rate {
            let w = lex.ancient_words(3, 12);
            let t = lex.terminator();
            doc.grc.push(sentence(&w, t));
            (1, 0)
        } else {
            let w = lex.ancient_words(3, 12);
            let t = lex.terminator();
            doc.grc.push(sentence(&w, t));
            doc.ell.push(sentence(&lex.modern_words(&w), t));
            (1, 1)
        };
        doc.gold.push(AlignmentBlock { src_start, src_len: a, tgt_start, tgt_len: b, cost: 0.0 });
    }
    doc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gold_tiles_both_sides() {
        let doc = synth_document(&SynthConfig { seed: 3, ..SynthConfig::default() });
        assert_eq!(doc.grc.len(), 200);
        assert!(crate::align::is_valid_tiling(&doc.gold, doc.grc.len(), doc.ell.len()));
        assert_eq!(doc, synth_document(&SynthConfig { seed: 3, ..SynthConfig::default() }));
    }

    #[test]
    fn sentences_segment_back() {
        use crate::model::Side;
        use crate::segment::{segment_texts, SegmenterConfig};
        let doc = synth_document(&SynthConfig { sentences: 40, seed: 9, ..SynthConfig::default() });
        let cfg = SegmenterConfig::default();
        assert_eq!(segment_texts(&doc.grc.join(" "), Side::Grc, &cfg), doc.grc);
        assert_eq!(segment_texts(&doc.ell.join(" "), Side::Ell, &cfg), doc.ell);
    }
}
