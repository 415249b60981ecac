use agmg_core::model::Side;
use agmg_core::segment::{segment, segment_texts, SegmenterConfig};

/// Paragraphs from the fixture: side plus hand-segmented sentences.
fn fixture() -> Vec<(Side, Vec<String>)> {
    let raw = include_str!("data/segmentation.txt");
    raw.split("\n\n")
        .filter(|b| !b.trim().is_empty())
        .map(|block| {
            let mut lines = block.lines();
            let side = match lines.next().map(str::trim) {
                Some("## grc") => Side::Grc,
                Some("## ell") => Side::Ell,
                other => panic!("bad header {other:?}"),
            };
            (side, lines.map(str::to_string).collect())
        })
        .collect()
}

#[test]
fn hand_segmented_paragraphs() {
    let cfg = SegmenterConfig::default();
    let paragraphs = fixture();
    let mut total = 0;
    let mut correct = 0;
    for (side, expected) in &paragraphs {
        let text = expected.join(" ");
        let got = segment_texts(&text, *side, &cfg);
        total += expected.len();
        correct += got.iter().filter(|s| expected.contains(s)).count();
        assert_eq!(&got, expected, "paragraph on {side:?}");
    }
    assert_eq!(total, 50);
    assert_eq!(correct, 50);
}

#[test]
fn spans_index_the_source() {
    let cfg = SegmenterConfig::default();
    for (side, expected) in fixture() {
        let text = expected.join("  \n");
        let chars: Vec<char> = text.chars().collect();
        for span in segment(&text, side, &cfg) {
            assert_eq!(chars[span.start..span.end].iter().collect::<String>(), span.text);
        }
    }
}

#[test]
fn abbreviation_does_not_split() {
    let cfg = SegmenterConfig::default();
    assert_eq!(segment_texts("π.χ. καὶ ἄλλα.", Side::Grc, &cfg), ["π.χ. καὶ ἄλλα."]);
}
