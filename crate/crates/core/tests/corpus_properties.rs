use std::collections::HashSet;

use hierdoc_core::corpus::{
    is_cjk, split_train_valid, tokenize, Category, Document, Geometry, Segmenter, SplitSpec, TrainFraction, PAD_TOKEN,
};
use proptest::prelude::*;

fn text_strategy() -> impl Strategy<Value = String> {
    proptest::collection::vec(
        prop_oneof![
            Just("台".to_string()),
            Just("灣".to_string()),
            Just("新聞".to_string()),
            Just("abc".to_string()),
            Just("x1".to_string()),
            Just(" ".to_string()),
            Just("\t".to_string()),
            Just("。".to_string()),
            Just("！".to_string()),
            Just("?".to_string()),
            Just("\n".to_string()),
            Just("㐀".to_string()),
        ],
        0..60,
    )
    .prop_map(|parts| parts.concat())
}

proptest! {
    #[test]
    fn tokens_cover_all_non_whitespace(text in text_strategy()) {
        let toks = tokenize(&text);
        let joined: String = toks.concat();
        let expected: String = text.chars().filter(|c| !c.is_whitespace()).collect();
        prop_assert_eq!(joined, expected);
        for t in &toks {
            prop_assert!(!t.is_empty());
            prop_assert!(!t.chars().any(char::is_whitespace));
            if t.chars().any(is_cjk) {
                prop_assert_eq!(t.chars().count(), 1);
            }
        }
    }

    #[test]
    fn grid_shape_is_fixed(text in text_strategy(), s in 1usize..6, w in 1usize..6) {
        let seg = Segmenter::new(Geometry::new(s, w));
        let grid = seg.segment_text(&text);
        prop_assert_eq!(grid.slots().len(), s * w);
        prop_assert_eq!(grid.row_lengths().len(), s);
        let mut real = 0;
        for (k, &len) in grid.row_lengths().iter().enumerate() {
            prop_assert!(len <= w);
            for j in 0..w {
                let slot = k * w + j;
                prop_assert_eq!(grid.is_pad(slot), j >= len);
                if j >= len {
                    prop_assert_eq!(grid.slots()[slot].as_str(), PAD_TOKEN);
                }
            }
            real += len;
        }
        prop_assert_eq!(grid.token_count(), real);
        let untruncated: usize = seg.sentences(&text).iter().take(s).map(|r| r.len().min(w)).sum();
        prop_assert_eq!(real, untruncated);
    }

    #[test]
    fn pad_marker_in_text_is_never_a_pad(prefix in "[a-z]{0,3}") {
        let text = format!("{prefix} [PAD] 台");
        let grid = Segmenter::new(Geometry::new(1, 4)).segment_text(&text);
        let pads = (0..4).filter(|&i| grid.is_pad(i)).count();
        prop_assert_eq!(pads, 4 - grid.token_count());
        prop_assert!(grid.real_tokens().all(|(_, t)| t != PAD_TOKEN));
    }

    #[test]
    fn split_partitions_corpus(n in 0usize..120, seed in any::<u64>(), num in 1u64..9) {
        let docs: Vec<Document> = (0..n)
            .map(|i| Document::new(format!("d{i}"), "台", Some(Category::ALL[i % 8])))
            .collect();
        let spec = SplitSpec { train_fraction: TrainFraction::new(num, 10).unwrap(), seed };
        let (train, valid) = split_train_valid(&docs, &spec).unwrap();
        prop_assert_eq!(train.len(), (n * num as usize).div_ceil(10));
        prop_assert_eq!(train.len() + valid.len(), n);
        let ids: HashSet<_> = train.iter().chain(&valid).map(|d| d.id.clone()).collect();
        prop_assert_eq!(ids.len(), n);
        let again = split_train_valid(&docs, &spec).unwrap();
        prop_assert_eq!(again.0, train);
    }
}

#[test]
fn fraction_forms_agree() {
    let a: TrainFraction = "8/10".parse().unwrap();
    let b: TrainFraction = "8:2".parse().unwrap();
    assert_eq!(a.train_count(200), 160);
    assert_eq!(b.train_count(200), 160);
    assert_eq!(a.train_count(28358), 22687);
    assert!("10:0".parse::<TrainFraction>().is_err());
}
