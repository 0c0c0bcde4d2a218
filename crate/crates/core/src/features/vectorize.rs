use super::{extract_ngrams, FeatureError, MarqueMode, SparseVector, Vocabulary, Weighting};
use crate::corpus::ProductRecord;
use crate::textprep::{normalize_brand, tokenize, TokenSequence};

/// What the brand field contributes for one record.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MarqueInjection {
    Nothing,
    /// Tokens to append to the document text.
    Tokens(TokenSequence),
    /// Normalized brand to look up among the flag features.
    Flag(String),
}

pub fn inject_marque(record: &ProductRecord, mode: MarqueMode) -> MarqueInjection {
    if record.marque.trim().is_empty() {
        return MarqueInjection::Nothing;
    }
    match mode {
        MarqueMode::None => MarqueInjection::Nothing,
        MarqueMode::Concat => {
            let toks = tokenize(&record.marque);
            if toks.is_empty() {
                MarqueInjection::Nothing
            } else {
                MarqueInjection::Tokens(toks)
            }
        }
        MarqueMode::BinaryFlags => {
            let brand = normalize_brand(&record.marque);
            if brand.is_empty() {
                MarqueInjection::Nothing
            } else {
                MarqueInjection::Flag(brand)
            }
        }
    }
}

/// Tokens of Description followed by Libelle, plus brand tokens in
/// concat mode.
pub fn document_tokens(record: &ProductRecord, mode: MarqueMode) -> TokenSequence {
    let mut toks = tokenize(&record.description);
    toks.extend(tokenize(&record.libelle));
    if let MarqueInjection::Tokens(brand) = inject_marque(record, mode) {
        toks.extend(brand);
    }
    toks
}

/// Componentwise power followed by L2 normalization.
pub fn alpha_power(v: &SparseVector, alpha: f64) -> Result<SparseVector, FeatureError> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(FeatureError::InvalidAlpha(alpha));
    }
    if let Some((index, value)) = v.iter().find(|&(_, x)| x < 0.0) {
        return Err(FeatureError::NegativeComponent { index, value });
    }
    let powered = v.values().iter().map(|x| x.powf(alpha)).collect();
    Ok(SparseVector::from_sorted_unchecked(v.indices().to_vec(), powered).normalized())
}

/// Featurizes one document against a fitted vocabulary.
///
/// Weighting, normalization and α-power follow the vocabulary's config:
/// weight, L2-normalize, raise to α, L2-normalize again. In flag mode a
/// known brand then sets its flag feature to 1 without renormalizing.
/// Out-of-vocabulary n-grams are ignored.
pub fn vectorize(tokens: &TokenSequence, brand: &str, vocab: &Vocabulary) -> SparseVector {
    let config = vocab.config();
    let mut hits: Vec<u32> = extract_ngrams(tokens, &config.ngram_orders)
        .iter()
        .filter_map(|g| vocab.index_of(g))
        .collect();
    hits.sort_unstable();

    let mut indices = Vec::new();
    let mut values = Vec::new();
    for run in hits.chunk_by(|a, b| a == b) {
        let idx = run[0];
        let count = run.len() as f64;
        let weight = match vocab.weighting() {
            Weighting::Binary => 1.0,
            Weighting::Tf => count,
            Weighting::TfIdf => (1.0 + count.ln()) * vocab.idf(idx),
        };
        indices.push(idx);
        values.push(weight);
    }
    let weighted = SparseVector::from_sorted_unchecked(indices, values).normalized();
    let mut v = if config.alpha == 1.0 {
        weighted
    } else {
        alpha_power(&weighted, config.alpha).expect("weights are non-negative and alpha validated")
    };

    if config.marque_mode == MarqueMode::BinaryFlags {
        if let Some(flag) = vocab.marque_flag(&normalize_brand(brand)) {
            v.push(flag, 1.0);
        }
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{build_vocabulary, FeatureBudget, NgramOrders, VectorizerConfig};
    use proptest::prelude::*;

    fn seq(t: &[&str]) -> TokenSequence {
        TokenSequence::new(t.iter().copied()).unwrap()
    }

    fn record(marque: &str) -> ProductRecord {
        ProductRecord {
            id: "1".into(),
            description: "Champagne Brut".into(),
            libelle: "Mumm Brut".into(),
            marque: marque.into(),
            label: None,
        }
    }

    fn config(weighting: Weighting, alpha: f64) -> VectorizerConfig {
        VectorizerConfig {
            ngram_orders: NgramOrders::unigrams(),
            budget: FeatureBudget::Pooled(100),
            weighting,
            alpha,
            marque_mode: MarqueMode::None,
        }
    }

    #[test]
    fn tfidf_two_document_hand_check() {
        let docs = [seq(&["a", "b", "a"]), seq(&["a", "c"])];
        let vocab = build_vocabulary(&docs, &config(Weighting::TfIdf, 1.0)).unwrap();
        let v = vectorize(&docs[0], "", &vocab);

        // independent hand computation
        let wa = (1.0 + 2f64.ln()) * ((3.0f64 / 3.0).ln() + 1.0);
        let wb = 1.0 * ((3.0f64 / 2.0).ln() + 1.0);
        let n = (wa * wa + wb * wb).sqrt();
        let a = v.get(vocab.index_of("a").unwrap()).unwrap();
        let b = v.get(vocab.index_of("b").unwrap()).unwrap();
        assert!((a - wa / n).abs() < 1e-12);
        assert!((b - wb / n).abs() < 1e-12);
        assert!((a - 0.7694).abs() < 1e-3);
        assert!((b - 0.6388).abs() < 1e-3);
    }

    #[test]
    fn alpha_power_examples() {
        let v = SparseVector::new(vec![0, 1], vec![0.64, 0.36]).unwrap();
        let p = alpha_power(&v, 0.5).unwrap();
        // √0.64 = 0.8, √0.36 = 0.6, already unit length
        assert!((p.values()[0] - 0.8).abs() < 1e-12);
        assert!((p.values()[1] - 0.6).abs() < 1e-12);

        let unit = SparseVector::new(vec![2, 7], vec![0.6, 0.8]).unwrap();
        let same = alpha_power(&unit, 1.0).unwrap();
        for (x, y) in same.values().iter().zip(unit.values()) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn alpha_power_rejects_negative_and_bad_alpha() {
        let v = SparseVector::new(vec![3], vec![-0.5]).unwrap();
        assert_eq!(
            alpha_power(&v, 0.5),
            Err(FeatureError::NegativeComponent { index: 3, value: -0.5 })
        );
        let ok = SparseVector::new(vec![3], vec![0.5]).unwrap();
        assert!(matches!(alpha_power(&ok, 0.0), Err(FeatureError::InvalidAlpha(_))));
        assert!(alpha_power(&SparseVector::empty(), 0.5).unwrap().is_empty());
    }

    #[test]
    fn all_oov_gives_empty_vector() {
        let vocab = build_vocabulary(&[seq(&["a"])], &config(Weighting::TfIdf, 0.5)).unwrap();
        assert!(vectorize(&seq(&["zz"]), "", &vocab).is_empty());
    }

    #[test]
    fn marque_injection_modes() {
        assert_eq!(inject_marque(&record(""), MarqueMode::Concat), MarqueInjection::Nothing);
        assert_eq!(
            inject_marque(&record(""), MarqueMode::BinaryFlags),
            MarqueInjection::Nothing
        );
        assert_eq!(
            inject_marque(&record("Mumm"), MarqueMode::None),
            MarqueInjection::Nothing
        );
        assert_eq!(
            inject_marque(&record("Mumm"), MarqueMode::Concat),
            MarqueInjection::Tokens(seq(&["mumm"]))
        );
        assert_eq!(
            inject_marque(&record(" Moët  &  Chandon"), MarqueMode::BinaryFlags),
            MarqueInjection::Flag("moet chandon".into())
        );
        let toks = document_tokens(&record("Mumm"), MarqueMode::Concat);
        assert_eq!(toks, seq(&["champagne", "brut", "mumm", "brut", "mumm"]));
    }

    #[test]
    fn brand_flags_appended_after_normalization() {
        let mut cfg = config(Weighting::TfIdf, 0.5);
        cfg.marque_mode = MarqueMode::BinaryFlags;
        let docs = [seq(&["a", "b"]), seq(&["b"])];
        let mut vocab = build_vocabulary(&docs, &cfg).unwrap();
        vocab.fit_marques(["Mumm"]);
        let with = vectorize(&docs[0], "MUMM", &vocab);
        let unseen = vectorize(&docs[0], "Ruinart", &vocab);
        let none = vectorize(&docs[0], "", &vocab);
        assert_eq!(unseen, none);
        assert_eq!(with.get(2), Some(1.0));
        assert!((with.squared_norm() - 2.0).abs() < 1e-12);
        assert!((none.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn binary_equals_tf_without_repeats() {
        let docs = [seq(&["a", "b", "c"]), seq(&["c", "d"])];
        let vb = build_vocabulary(&docs, &config(Weighting::Binary, 1.0)).unwrap();
        let vt = build_vocabulary(&docs, &config(Weighting::Tf, 1.0)).unwrap();
        for d in &docs {
            assert_eq!(vectorize(d, "", &vb), vectorize(d, "", &vt));
        }
    }

    fn sparse_nonneg() -> impl Strategy<Value = SparseVector> {
        prop::collection::btree_map(0u32..500, 1e-6f64..10.0, 1..20).prop_map(|m| {
            let (i, v): (Vec<u32>, Vec<f64>) = m.into_iter().unzip();
            SparseVector::new(i, v).unwrap()
        })
    }

    proptest! {
        #[test]
        fn alpha_power_scale_invariant(v in sparse_nonneg(), c in 1e-3f64..1e3, alpha in 0.05f64..=1.0) {
            let a = alpha_power(&v, alpha).unwrap();
            let b = alpha_power(&v.scaled(c), alpha).unwrap();
            prop_assert_eq!(a.indices(), b.indices());
            for (x, y) in a.values().iter().zip(b.values()) {
                prop_assert!((x - y).abs() < 1e-9);
            }
            prop_assert!((a.norm() - 1.0).abs() < 1e-9);
        }

        #[test]
        fn vectorize_output_is_unit_norm(
            words in prop::collection::vec(prop::sample::select(vec!["a", "b", "c", "d"]), 1..12),
            alpha in 0.1f64..=1.0,
            w in prop::sample::select(vec![Weighting::Binary, Weighting::Tf, Weighting::TfIdf]),
        ) {
            let doc = TokenSequence::new(words).unwrap();
            let vocab = build_vocabulary(&[doc.clone(), seq(&["a", "e"])], &config(w, alpha)).unwrap();
            let v = vectorize(&doc, "", &vocab);
            prop_assert!((v.norm() - 1.0).abs() < 1e-9);
            prop_assert!(v.values().iter().all(|x| *x > 0.0 && x.is_finite()));
        }
    }
}
