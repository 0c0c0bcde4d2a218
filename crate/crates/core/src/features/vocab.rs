use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::sync::OnceLock;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::{
    extract_ngrams, ngram_order, FeatureBudget, FeatureError, MarqueMode, NgramOrders, VectorizerConfig, Weighting,
};
use crate::textprep::{normalize_brand, TokenSequence};

const MAGIC: &str = "prodcat-vocabulary";
const VERSION: &str = "v1";

/// Fitted n-gram (and optional brand flag) index with the statistics
/// needed for idf weighting.
///
/// Indices are dense: n-grams occupy `0..ngram_count()` in frequency rank
/// order, brand flags the contiguous block right after.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    config: VectorizerConfig,
    ngrams: Vec<String>,
    index: HashMap<String, u32>,
    doc_frequency: Vec<u64>,
    corpus_frequency: Vec<u64>,
    n_documents: u64,
    marques: Vec<String>,
    marque_index: HashMap<String, u32>,
    fingerprint: OnceLock<String>,
}

impl PartialEq for Vocabulary {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config
            && self.ngrams == other.ngrams
            && self.doc_frequency == other.doc_frequency
            && self.corpus_frequency == other.corpus_frequency
            && self.n_documents == other.n_documents
            && self.marques == other.marques
    }
}

#[derive(Default, Clone, Copy)]
struct Counts {
    corpus: u64,
    docs: u64,
}

type CountTable = HashMap<String, Counts>;

fn count_document(table: &mut CountTable, tokens: &TokenSequence, orders: &NgramOrders) {
    let ngrams = extract_ngrams(tokens, orders);
    let mut seen: BTreeSet<&str> = BTreeSet::new();
    for g in &ngrams {
        let fresh = seen.insert(g.as_str());
        let entry = table.entry(g.clone()).or_default();
        entry.corpus += 1;
        if fresh {
            entry.docs += 1;
        }
    }
}

fn merge(a: CountTable, b: CountTable) -> CountTable {
    let (mut big, small) = if a.len() >= b.len() { (a, b) } else { (b, a) };
    for (k, c) in small {
        let e = big.entry(k).or_default();
        e.corpus += c.corpus;
        e.docs += c.docs;
    }
    big
}

/// Counts n-grams over the corpus and keeps the most frequent ones.
///
/// Ranking is by total occurrence count (descending), ties broken by the
/// lexicographic order of the n-gram. Counting runs in parallel; the merge
/// only adds integers, so the result does not depend on the thread count.
pub fn build_vocabulary(streams: &[TokenSequence], config: &VectorizerConfig) -> Result<Vocabulary, FeatureError> {
    config.validate()?;
    if streams.iter().all(TokenSequence::is_empty) {
        return Err(FeatureError::EmptyCorpus);
    }
    let orders = &config.ngram_orders;
    let table = streams
        .par_iter()
        .fold(CountTable::new, |mut t, s| {
            count_document(&mut t, s, orders);
            t
        })
        .reduce(CountTable::new, merge);

    let mut ranked: Vec<(String, Counts)> = table.into_iter().collect();
    ranked.sort_unstable_by(|(ga, ca), (gb, cb)| cb.corpus.cmp(&ca.corpus).then_with(|| ga.cmp(gb)));

    let selected: Vec<(String, Counts)> = match &config.budget {
        FeatureBudget::Pooled(k) => {
            ranked.truncate(*k);
            ranked
        }
        FeatureBudget::PerOrder(quotas) => {
            let mut taken: HashMap<usize, usize> = HashMap::new();
            ranked
                .into_iter()
                .filter(|(g, _)| {
                    let n = ngram_order(g);
                    let quota = quotas.get(&n).copied().unwrap_or(0);
                    let used = taken.entry(n).or_insert(0);
                    if *used < quota {
                        *used += 1;
                        true
                    } else {
                        false
                    }
                })
                .collect()
        }
    };

    let mut vocab = Vocabulary::empty(config.clone(), streams.len() as u64);
    for (g, c) in selected {
        vocab.push_ngram(g, c.docs, c.corpus);
    }
    Ok(vocab)
}

impl Vocabulary {
    fn empty(config: VectorizerConfig, n_documents: u64) -> Self {
        Vocabulary {
            config,
            ngrams: Vec::new(),
            index: HashMap::new(),
            doc_frequency: Vec::new(),
            corpus_frequency: Vec::new(),
            n_documents,
            marques: Vec::new(),
            marque_index: HashMap::new(),
            fingerprint: OnceLock::new(),
        }
    }

    fn push_ngram(&mut self, ngram: String, df: u64, cf: u64) {
        let idx = self.ngrams.len() as u32;
        self.index.insert(ngram.clone(), idx);
        self.ngrams.push(ngram);
        self.doc_frequency.push(df);
        self.corpus_frequency.push(cf);
    }

    /// Registers one flag feature per distinct non-empty brand, in sorted
    /// order. Only meaningful with [`MarqueMode::BinaryFlags`]; a no-op
    /// otherwise.
    pub fn fit_marques<'a, I>(&mut self, brands: I)
    where
        I: IntoIterator<Item = &'a str>,
    {
        if self.config.marque_mode != MarqueMode::BinaryFlags {
            return;
        }
        let distinct: BTreeSet<String> = brands
            .into_iter()
            .map(normalize_brand)
            .filter(|b| !b.is_empty())
            .collect();
        self.marques = distinct.into_iter().collect();
        let base = self.ngrams.len() as u32;
        self.marque_index = self
            .marques
            .iter()
            .enumerate()
            .map(|(i, b)| (b.clone(), base + i as u32))
            .collect();
        self.fingerprint = OnceLock::new();
    }

    pub fn config(&self) -> &VectorizerConfig {
        &self.config
    }

    /// Total feature dimension (n-grams plus brand flags).
    pub fn dim(&self) -> usize {
        self.ngrams.len() + self.marques.len()
    }

    pub fn ngram_count(&self) -> usize {
        self.ngrams.len()
    }

    pub fn n_documents(&self) -> u64 {
        self.n_documents
    }

    pub fn index_of(&self, ngram: &str) -> Option<u32> {
        self.index.get(ngram).copied()
    }

    pub fn ngram(&self, index: u32) -> Option<&str> {
        self.ngrams.get(index as usize).map(String::as_str)
    }

    pub fn ngrams(&self) -> &[String] {
        &self.ngrams
    }

    pub fn doc_frequency(&self, index: u32) -> u64 {
        self.doc_frequency[index as usize]
    }

    pub fn corpus_frequency(&self, index: u32) -> u64 {
        self.corpus_frequency[index as usize]
    }

    /// Flag feature for an already-normalized brand string.
    pub fn marque_flag(&self, normalized_brand: &str) -> Option<u32> {
        self.marque_index.get(normalized_brand).copied()
    }

    pub fn marques(&self) -> &[String] {
        &self.marques
    }

    /// Smoothed idf: `ln((1 + N) / (1 + df)) + 1`.
    pub fn idf(&self, index: u32) -> f64 {
        let n = self.n_documents as f64;
        let df = self.doc_frequency[index as usize] as f64;
        ((1.0 + n) / (1.0 + df)).ln() + 1.0
    }

    pub(crate) fn weighting(&self) -> Weighting {
        self.config.weighting
    }

    /// Short checksum of the serialized vocabulary; models store it to
    /// refuse vectors built from a different vocabulary.
    pub fn fingerprint(&self) -> &str {
        self.fingerprint.get_or_init(|| {
            let mut buf = Vec::new();
            self.write_to(&mut buf).expect("writing to memory cannot fail");
            let digest = Sha256::digest(&buf);
            digest[..8].iter().fold(String::new(), |mut s, b| {
                let _ = write!(s, "{b:02x}");
                s
            })
        })
    }

    /// Writes the versioned text form:
    ///
    /// ```text
    /// prodcat-vocabulary<TAB>v1
    /// n_documents<TAB>N<TAB>orders<TAB>1,2<TAB>budget<TAB>pooled:K<TAB>weighting<TAB>tfidf<TAB>alpha<TAB>0.5<TAB>marque<TAB>none<TAB>ngrams<TAB>M<TAB>marques<TAB>B
    /// index<TAB>ngram<TAB>doc_freq<TAB>corpus_freq     (M lines)
    /// index<TAB>brand                                  (B lines)
    /// ```
    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let c = &self.config;
        writeln!(w, "{MAGIC}\t{VERSION}")?;
        writeln!(
            w,
            "n_documents\t{}\torders\t{}\tbudget\t{}\tweighting\t{}\talpha\t{}\tmarque\t{}\tngrams\t{}\tmarques\t{}",
            self.n_documents,
            c.ngram_orders,
            c.budget,
            c.weighting,
            c.alpha,
            c.marque_mode,
            self.ngrams.len(),
            self.marques.len()
        )?;
        for (i, g) in self.ngrams.iter().enumerate() {
            writeln!(w, "{i}\t{g}\t{}\t{}", self.doc_frequency[i], self.corpus_frequency[i])?;
        }
        let base = self.ngrams.len();
        for (i, b) in self.marques.iter().enumerate() {
            writeln!(w, "{}\t{b}", base + i)?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self, VocabularyFormatError> {
        let mut lines = r.lines().enumerate().map(|(n, l)| (n + 1, l));
        let mut next = |what: &str| -> Result<(usize, String), VocabularyFormatError> {
            match lines.next() {
                Some((n, Ok(l))) => Ok((n, l)),
                Some((n, Err(e))) => Err(VocabularyFormatError::Io(n, e.to_string())),
                None => Err(VocabularyFormatError::Truncated(what.to_string())),
            }
        };

        let (_, magic) = next("magic line")?;
        if magic != format!("{MAGIC}\t{VERSION}") {
            return Err(VocabularyFormatError::BadMagic(magic));
        }
        let (hn, header) = next("header line")?;
        let fields: Vec<&str> = header.split('\t').collect();
        if !fields.len().is_multiple_of(2) {
            return Err(VocabularyFormatError::Line(hn, "odd number of header fields".into()));
        }
        let kv: HashMap<&str, &str> = fields.chunks(2).map(|p| (p[0], p[1])).collect();
        let get = |k: &str| {
            kv.get(k)
                .copied()
                .ok_or_else(|| VocabularyFormatError::Line(hn, format!("missing header key {k}")))
        };
        let bad = |k: &str, e: String| VocabularyFormatError::Line(hn, format!("{k}: {e}"));
        let config = VectorizerConfig {
            ngram_orders: get("orders")?
                .parse()
                .map_err(|e: FeatureError| bad("orders", e.to_string()))?,
            budget: get("budget")?
                .parse()
                .map_err(|e: FeatureError| bad("budget", e.to_string()))?,
            weighting: get("weighting")?
                .parse()
                .map_err(|e: FeatureError| bad("weighting", e.to_string()))?,
            alpha: get("alpha")?.parse().map_err(|_| bad("alpha", "not a number".into()))?,
            marque_mode: get("marque")?
                .parse()
                .map_err(|e: FeatureError| bad("marque", e.to_string()))?,
        };
        config.validate().map_err(|e| bad("config", e.to_string()))?;
        let parse_u = |k: &str| -> Result<u64, VocabularyFormatError> {
            get(k)?.parse().map_err(|_| bad(k, "not an integer".into()))
        };
        let n_documents = parse_u("n_documents")?;
        let n_ngrams = parse_u("ngrams")? as usize;
        let n_marques = parse_u("marques")? as usize;

        let mut vocab = Vocabulary::empty(config, n_documents);
        for expected in 0..n_ngrams {
            let (ln, line) = next("n-gram lines")?;
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 4 {
                return Err(VocabularyFormatError::Line(ln, "expected 4 columns".into()));
            }
            let idx: usize = cols[0]
                .parse()
                .map_err(|_| VocabularyFormatError::Line(ln, "bad index".into()))?;
            if idx != expected {
                return Err(VocabularyFormatError::Line(
                    ln,
                    format!("index {idx}, expected {expected}"),
                ));
            }
            let df: u64 = cols[2]
                .parse()
                .map_err(|_| VocabularyFormatError::Line(ln, "bad doc_freq".into()))?;
            let cf: u64 = cols[3]
                .parse()
                .map_err(|_| VocabularyFormatError::Line(ln, "bad corpus_freq".into()))?;
            if df > n_documents || df > cf {
                return Err(VocabularyFormatError::Line(ln, "inconsistent frequencies".into()));
            }
            if vocab.index.contains_key(cols[1]) {
                return Err(VocabularyFormatError::Line(
                    ln,
                    format!("duplicate n-gram {:?}", cols[1]),
                ));
            }
            vocab.push_ngram(cols[1].to_string(), df, cf);
        }
        for expected in n_ngrams..n_ngrams + n_marques {
            let (ln, line) = next("marque lines")?;
            let (idx, brand) = line
                .split_once('\t')
                .ok_or_else(|| VocabularyFormatError::Line(ln, "expected 2 columns".into()))?;
            if idx.parse::<usize>().ok() != Some(expected) {
                return Err(VocabularyFormatError::Line(ln, format!("expected index {expected}")));
            }
            vocab.marque_index.insert(brand.to_string(), expected as u32);
            vocab.marques.push(brand.to_string());
        }
        if let Some((ln, _)) = lines.next() {
            return Err(VocabularyFormatError::Line(ln, "trailing data".into()));
        }
        Ok(vocab)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum VocabularyFormatError {
    #[error("not a vocabulary file (first line {0:?})")]
    BadMagic(String),
    #[error("vocabulary file truncated while reading {0}")]
    Truncated(String),
    #[error("vocabulary line {0}: {1}")]
    Line(usize, String),
    #[error("vocabulary line {0}: {1}")]
    Io(usize, String),
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn seq(t: &[&str]) -> TokenSequence {
        TokenSequence::new(t.iter().copied()).unwrap()
    }

    fn unigram_config(k: usize) -> VectorizerConfig {
        VectorizerConfig {
            budget: FeatureBudget::Pooled(k),
            ..VectorizerConfig::default()
        }
    }

    #[test]
    fn keeps_most_frequent() {
        let v = build_vocabulary(&[seq(&["a", "b"]), seq(&["a"])], &unigram_config(1)).unwrap();
        assert_eq!(v.ngrams(), ["a"]);
        assert_eq!(v.index_of("a"), Some(0));
        assert_eq!(v.doc_frequency(0), 2);
        assert_eq!(v.n_documents(), 2);
    }

    #[test]
    fn budget_larger_than_distinct_keeps_all() {
        let v = build_vocabulary(&[seq(&["a", "b"]), seq(&["c"])], &unigram_config(100)).unwrap();
        assert_eq!(v.ngram_count(), 3);
    }

    #[test]
    fn lexicographic_tie_break() {
        let v = build_vocabulary(&[seq(&["y", "x"])], &unigram_config(1)).unwrap();
        assert_eq!(v.ngrams(), ["x"]);
    }

    #[test]
    fn corpus_frequency_drives_selection() {
        // "b" occurs 3 times in one doc, "a" once in each of two docs
        let docs = [seq(&["b", "b", "b", "a"]), seq(&["a"])];
        let v = build_vocabulary(&docs, &unigram_config(1)).unwrap();
        assert_eq!(v.ngrams(), ["b"]);
        assert_eq!(v.corpus_frequency(0), 3);
        assert_eq!(v.doc_frequency(0), 1);
    }

    #[test]
    fn pooled_across_orders() {
        let cfg = VectorizerConfig {
            ngram_orders: NgramOrders::new([1, 2]).unwrap(),
            budget: FeatureBudget::Pooled(3),
            ..VectorizerConfig::default()
        };
        let docs = [seq(&["a", "b"]), seq(&["a", "b"]), seq(&["c"])];
        let v = build_vocabulary(&docs, &cfg).unwrap();
        assert_eq!(v.ngrams(), ["a", "a b", "b"]);
    }

    #[test]
    fn per_order_quotas() {
        let cfg = VectorizerConfig {
            ngram_orders: NgramOrders::new([1, 2]).unwrap(),
            budget: FeatureBudget::PerOrder([(1, 1), (2, 2)].into()),
            ..VectorizerConfig::default()
        };
        let docs = [seq(&["a", "b", "c"]), seq(&["a", "b"])];
        let v = build_vocabulary(&docs, &cfg).unwrap();
        assert_eq!(v.ngrams(), ["a", "a b", "b c"]);
    }

    #[test]
    fn zero_budget_rejected() {
        let err = build_vocabulary(&[seq(&["a"])], &unigram_config(0)).unwrap_err();
        assert!(matches!(err, FeatureError::Config(_)));
        assert_eq!(
            build_vocabulary(&[TokenSequence::empty()], &unigram_config(3)).unwrap_err(),
            FeatureError::EmptyCorpus
        );
    }

    #[test]
    fn idf_smoothing() {
        let v = build_vocabulary(&[seq(&["a", "b", "a"]), seq(&["a", "c"])], &unigram_config(10)).unwrap();
        let a = v.index_of("a").unwrap();
        let b = v.index_of("b").unwrap();
        assert!((v.idf(a) - 1.0).abs() < 1e-15);
        assert!((v.idf(b) - (1.5f64.ln() + 1.0)).abs() < 1e-15);
    }

    #[test]
    fn marque_flags_follow_ngram_block() {
        let cfg = VectorizerConfig {
            marque_mode: MarqueMode::BinaryFlags,
            ..unigram_config(10)
        };
        let mut v = build_vocabulary(&[seq(&["a", "b"])], &cfg).unwrap();
        v.fit_marques(["Mumm", "", "AUCUNE", "Moët", "mumm "]);
        assert_eq!(v.marques(), ["aucune", "moet", "mumm"]);
        assert_eq!(v.marque_flag("moet"), Some(3));
        assert_eq!(v.dim(), 5);
    }

    #[test]
    fn serialization_round_trip_is_bit_exact() {
        let cfg = VectorizerConfig {
            ngram_orders: NgramOrders::new([1, 2]).unwrap(),
            budget: FeatureBudget::PerOrder([(1, 5), (2, 5)].into()),
            weighting: Weighting::Tf,
            alpha: 0.1 + 0.2,
            marque_mode: MarqueMode::BinaryFlags,
        };
        let mut v = build_vocabulary(&[seq(&["a", "b", "c"]), seq(&["b", "c"])], &cfg).unwrap();
        v.fit_marques(["x y", "z"]);
        let mut buf = Vec::new();
        v.write_to(&mut buf).unwrap();
        let back = Vocabulary::read_from(buf.as_slice()).unwrap();
        assert_eq!(back, v);
        assert_eq!(back.config().alpha.to_bits(), v.config().alpha.to_bits());
        let mut again = Vec::new();
        back.write_to(&mut again).unwrap();
        assert_eq!(again, buf);
        assert_eq!(back.fingerprint(), v.fingerprint());
    }

    #[test]
    fn rejects_corrupt_files() {
        assert!(matches!(
            Vocabulary::read_from("nope\n".as_bytes()),
            Err(VocabularyFormatError::BadMagic(_))
        ));
        let v = build_vocabulary(&[seq(&["a", "b"])], &unigram_config(10)).unwrap();
        let mut buf = Vec::new();
        v.write_to(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let truncated: String = text.lines().take(3).map(|l| format!("{l}\n")).collect();
        assert!(matches!(
            Vocabulary::read_from(truncated.as_bytes()),
            Err(VocabularyFormatError::Truncated(_))
        ));
    }

    #[test]
    fn fingerprint_changes_with_content() {
        let a = build_vocabulary(&[seq(&["a", "b"])], &unigram_config(10)).unwrap();
        let b = build_vocabulary(&[seq(&["a", "c"])], &unigram_config(10)).unwrap();
        assert_ne!(a.fingerprint(), b.fingerprint());
        assert_eq!(a.fingerprint().len(), 16);
    }

    fn corpus() -> impl Strategy<Value = Vec<TokenSequence>> {
        prop::collection::vec(
            prop::collection::vec(prop::sample::select(vec!["a", "b", "c", "d", "e", "f"]), 0..8)
                .prop_map(|t| TokenSequence::new(t).unwrap()),
            1..12,
        )
        .prop_filter("needs a token", |docs| docs.iter().any(|d| !d.is_empty()))
    }

    proptest! {
        #[test]
        fn selection_is_prefix_of_ranking(docs in corpus(), k in 1usize..10) {
            let cfg = |k| VectorizerConfig {
                ngram_orders: NgramOrders::new([1, 2]).unwrap(),
                budget: FeatureBudget::Pooled(k),
                ..VectorizerConfig::default()
            };
            let small = build_vocabulary(&docs, &cfg(k)).unwrap();
            let big = build_vocabulary(&docs, &cfg(k + 3)).unwrap();
            prop_assert_eq!(small.ngrams(), &big.ngrams()[..small.ngram_count()]);
            for i in 0..small.ngram_count() as u32 {
                prop_assert!(small.doc_frequency(i) <= small.n_documents());
            }
        }

        #[test]
        fn counting_is_permutation_invariant(docs in corpus()) {
            let cfg = unigram_config(100);
            let mut rev = docs.clone();
            rev.reverse();
            prop_assert_eq!(build_vocabulary(&docs, &cfg).unwrap(), build_vocabulary(&rev, &cfg).unwrap());
        }
    }
}
