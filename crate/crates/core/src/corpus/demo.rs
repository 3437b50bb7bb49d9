//! Bundled demo vocabulary and report-text generator for self-tests and
//! examples. The generated sentences are synthetic colonoscopy-report
//! boilerplate: every one embeds at least one lexicon term so term
//! accuracy is defined everywhere, and generation is a pure function of
//! the seed.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::metrics::TermLexicon;
use crate::textnorm::NormPolicy;

use super::ContentCategory;

/// Term list shipped with the crate, one `term\tcategory` per line.
pub const DEMO_LEXICON_TSV: &str = include_str!("../../data/demo_lexicon.tsv");

/// Parses the bundled demo lexicon under the given policy.
pub fn demo_lexicon(policy: &NormPolicy) -> TermLexicon {
    TermLexicon::parse(DEMO_LEXICON_TSV, policy).expect("bundled lexicon is well-formed")
}

const FILLERS: &[&str] = &[
    "今日检查",
    "可见",
    "约",
    "表面光滑",
    "予以",
    "处理",
    "患者耐受良好",
    "退镜观察",
    "未见明显异常",
    "建议定期复查",
    "距肛门",
    "操作顺利",
];

const TERMS_BY_CATEGORY: &[(ContentCategory, &[&str])] = &[
    (
        ContentCategory::PreOp,
        &["肠镜", "麻醉", "肠道准备", "bbps"],
    ),
    (
        ContentCategory::IntraOp,
        &["bbps", "肠道准备", "回盲瓣", "肝曲", "脾曲"],
    ),
    (
        ContentCategory::Lesion,
        &["息肉", "腺瘤", "emr", "电切", "钛夹", "活检"],
    ),
    (
        ContentCategory::Cancer,
        &["隆起", "esd", "活检", "病理", "溃疡"],
    ),
    (
        ContentCategory::Inflammation,
        &["糜烂", "黏膜充血", "溃疡", "活检"],
    ),
    (
        ContentCategory::PostOp,
        &["止血", "病理", "随访", "钛夹"],
    ),
];

const ANATOMY: &[&str] = &[
    "盲肠",
    "直肠",
    "乙状结肠",
    "升结肠",
    "横结肠",
    "降结肠",
    "回肠末端",
];

/// One synthetic report sentence for the category. Always contains an
/// anatomy term plus at least one category term; roughly half the
/// sentences carry a numeric expression.
pub fn demo_text(category: ContentCategory, rng: &mut ChaCha8Rng) -> String {
    let category_terms = TERMS_BY_CATEGORY
        .iter()
        .find(|(c, _)| *c == category)
        .map(|(_, t)| *t)
        .expect("all categories listed");

    let mut text = String::new();
    if rng.gen_bool(0.5) {
        text.push_str(FILLERS.choose(rng).unwrap());
    }
    text.push_str(ANATOMY.choose(rng).unwrap());
    text.push_str(FILLERS.choose(rng).unwrap());
    text.push_str(category_terms.choose(rng).unwrap());
    if rng.gen_bool(0.5) {
        let n = rng.gen_range(1..=9);
        let unit = ["毫米", "厘米", "分"].choose(rng).unwrap();
        text.push_str(&format!("{n}{unit}"));
    }
    if rng.gen_bool(0.6) {
        text.push_str(FILLERS.choose(rng).unwrap());
        text.push_str(category_terms.choose(rng).unwrap());
    }
    text.push_str(FILLERS.choose(rng).unwrap());
    text
}

/// Builds the text side of a `centers x categories-per-center x per_cell`
/// demo corpus: per entry the sentence plus its (center, category)
/// assignment. Categories cycle through the six workflow phases.
pub fn demo_corpus_texts(
    centers: usize,
    per_cell: usize,
    seed: u64,
) -> Vec<(String, String, ContentCategory)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(centers * ContentCategory::ALL.len() * per_cell);
    for c in 1..=centers {
        let center = format!("C{c}");
        for category in ContentCategory::ALL {
            for _ in 0..per_cell {
                out.push((demo_text(category, &mut rng), center.clone(), category));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::term_recall;

    #[test]
    fn bundled_lexicon_parses_with_categories() {
        let lex = demo_lexicon(&NormPolicy::default());
        assert!(lex.len() >= 25, "{}", lex.len());
        assert!(lex.terms().all(|(t, c)| !t.is_empty() && c.is_some()));
    }

    #[test]
    fn every_generated_text_contains_a_lexicon_term() {
        let policy = NormPolicy::default();
        let lex = demo_lexicon(&policy);
        for (text, _, _) in demo_corpus_texts(5, 10, 42) {
            let recall = term_recall(&text, &text, &lex, &policy);
            assert!(recall.total >= 1, "no terms in {text:?}");
            assert_eq!(recall.matched, recall.total);
        }
    }

    #[test]
    fn generation_is_deterministic_and_layout_shaped() {
        let a = demo_corpus_texts(5, 10, 1);
        let b = demo_corpus_texts(5, 10, 1);
        assert_eq!(a, b);
        assert_eq!(a.len(), 300);
        let c1_preop = a
            .iter()
            .filter(|(_, c, k)| c == "C1" && *k == ContentCategory::PreOp)
            .count();
        assert_eq!(c1_preop, 10);
    }
}
