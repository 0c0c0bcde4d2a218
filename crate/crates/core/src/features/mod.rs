//! Featurization: n-gram extraction, frequency-based vocabulary selection,
//! binary / tf / tf-idf weighting with α-power renormalization, and brand
//! ("marque") features.

mod sparse;
mod vectorize;
mod vocab;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

pub use sparse::{SparseError, SparseVector};
pub use vectorize::{alpha_power, document_tokens, inject_marque, vectorize, MarqueInjection};
pub use vocab::{build_vocabulary, Vocabulary, VocabularyFormatError};

use crate::textprep::TokenSequence;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FeatureError {
    #[error("invalid vectorizer configuration: {0}")]
    Config(String),
    #[error("cannot build a vocabulary from a corpus with no tokens")]
    EmptyCorpus,
    #[error("α-power needs non-negative components, found {value} at index {index}")]
    NegativeComponent { index: u32, value: f64 },
    #[error("α must be a positive finite number, got {0}")]
    InvalidAlpha(f64),
}

/// Term weighting applied before normalization.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Weighting {
    Binary,
    Tf,
    TfIdf,
}

impl fmt::Display for Weighting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Weighting::Binary => "binary",
            Weighting::Tf => "tf",
            Weighting::TfIdf => "tfidf",
        })
    }
}

impl FromStr for Weighting {
    type Err = FeatureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "binary" => Ok(Weighting::Binary),
            "tf" => Ok(Weighting::Tf),
            "tfidf" | "tf-idf" => Ok(Weighting::TfIdf),
            other => Err(FeatureError::Config(format!("unknown weighting {other:?}"))),
        }
    }
}

/// How the brand field enters the feature vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MarqueMode {
    None,
    /// Brand tokens are appended to the document text.
    Concat,
    /// One binary feature per brand seen at fit time.
    BinaryFlags,
}

impl fmt::Display for MarqueMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MarqueMode::None => "none",
            MarqueMode::Concat => "concat",
            MarqueMode::BinaryFlags => "flags",
        })
    }
}

impl FromStr for MarqueMode {
    type Err = FeatureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(MarqueMode::None),
            "concat" => Ok(MarqueMode::Concat),
            "flags" | "binary_flags" | "binary-flags" => Ok(MarqueMode::BinaryFlags),
            other => Err(FeatureError::Config(format!("unknown marque mode {other:?}"))),
        }
    }
}

/// Non-empty sorted subset of {1, 2, 3}.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct NgramOrders(Vec<usize>);

impl NgramOrders {
    pub fn new<I: IntoIterator<Item = usize>>(orders: I) -> Result<Self, FeatureError> {
        let mut v: Vec<usize> = orders.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        if v.is_empty() {
            return Err(FeatureError::Config("ngram orders must not be empty".into()));
        }
        if let Some(bad) = v.iter().find(|&&n| !(1..=3).contains(&n)) {
            return Err(FeatureError::Config(format!("ngram order {bad} outside 1..=3")));
        }
        Ok(NgramOrders(v))
    }

    pub fn unigrams() -> Self {
        NgramOrders(vec![1])
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn contains(&self, n: usize) -> bool {
        self.0.contains(&n)
    }
}

impl fmt::Display for NgramOrders {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|n| n.to_string()).collect();
        f.write_str(&parts.join(","))
    }
}

impl FromStr for NgramOrders {
    type Err = FeatureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let orders = s
            .split(',')
            .map(|p| {
                p.trim()
                    .parse::<usize>()
                    .map_err(|_| FeatureError::Config(format!("bad ngram order {p:?}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        NgramOrders::new(orders)
    }
}

/// How many n-grams the vocabulary keeps.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum FeatureBudget {
    /// The most frequent n-grams across all orders pooled together.
    Pooled(usize),
    /// A separate quota per n-gram order.
    PerOrder(BTreeMap<usize, usize>),
}

impl fmt::Display for FeatureBudget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureBudget::Pooled(k) => write!(f, "pooled:{k}"),
            FeatureBudget::PerOrder(m) => {
                let parts: Vec<String> = m.iter().map(|(n, k)| format!("{n}={k}")).collect();
                write!(f, "per-order:{}", parts.join(","))
            }
        }
    }
}

impl FromStr for FeatureBudget {
    type Err = FeatureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || FeatureError::Config(format!("bad feature budget {s:?}"));
        if let Some(k) = s.strip_prefix("pooled:") {
            return Ok(FeatureBudget::Pooled(k.parse().map_err(|_| bad())?));
        }
        let body = s.strip_prefix("per-order:").ok_or_else(bad)?;
        let mut quotas = BTreeMap::new();
        for part in body.split(',') {
            let (n, k) = part.split_once('=').ok_or_else(bad)?;
            quotas.insert(n.parse().map_err(|_| bad())?, k.parse().map_err(|_| bad())?);
        }
        Ok(FeatureBudget::PerOrder(quotas))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VectorizerConfig {
    pub ngram_orders: NgramOrders,
    pub budget: FeatureBudget,
    pub weighting: Weighting,
    /// α-power exponent in (0, 1].
    pub alpha: f64,
    pub marque_mode: MarqueMode,
}

impl Default for VectorizerConfig {
    fn default() -> Self {
        VectorizerConfig {
            ngram_orders: NgramOrders::unigrams(),
            budget: FeatureBudget::Pooled(200_000),
            weighting: Weighting::TfIdf,
            alpha: 1.0,
            marque_mode: MarqueMode::None,
        }
    }
}

impl VectorizerConfig {
    pub fn validate(&self) -> Result<(), FeatureError> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(FeatureError::Config(format!(
                "alpha must lie in (0, 1], got {}",
                self.alpha
            )));
        }
        match &self.budget {
            FeatureBudget::Pooled(0) => Err(FeatureError::Config("max_features must be positive".into())),
            FeatureBudget::Pooled(_) => Ok(()),
            FeatureBudget::PerOrder(quotas) => {
                for &n in self.ngram_orders.as_slice() {
                    match quotas.get(&n) {
                        None => return Err(FeatureError::Config(format!("no per-order max_features for order {n}"))),
                        Some(0) => {
                            return Err(FeatureError::Config(format!(
                                "max_features for order {n} must be positive"
                            )))
                        }
                        Some(_) => {}
                    }
                }
                if let Some(extra) = quotas.keys().find(|n| !self.ngram_orders.contains(**n)) {
                    return Err(FeatureError::Config(format!(
                        "per-order max_features given for unused order {extra}"
                    )));
                }
                Ok(())
            }
        }
    }
}

/// All contiguous n-token windows for each requested order, order by
/// order, each in document order.
pub fn extract_ngrams(tokens: &TokenSequence, orders: &NgramOrders) -> Vec<String> {
    let toks = tokens.tokens();
    let mut out = Vec::new();
    for &n in orders.as_slice() {
        if toks.len() < n {
            continue;
        }
        out.extend(toks.windows(n).map(|w| w.join(" ")));
    }
    out
}

/// Number of tokens in an n-gram string.
pub(crate) fn ngram_order(ngram: &str) -> usize {
    ngram.bytes().filter(|&b| b == b' ').count() + 1
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(t: &[&str]) -> TokenSequence {
        TokenSequence::new(t.iter().copied()).unwrap()
    }

    #[test]
    fn ngram_examples() {
        let abc = seq(&["a", "b", "c"]);
        assert_eq!(extract_ngrams(&abc, &NgramOrders::new([2]).unwrap()), ["a b", "b c"]);
        assert_eq!(
            extract_ngrams(&seq(&["a"]), &NgramOrders::new([1, 2, 3]).unwrap()),
            ["a"]
        );
        assert_eq!(
            extract_ngrams(&abc, &NgramOrders::new([3, 1, 2]).unwrap()),
            ["a", "b", "c", "a b", "b c", "a b c"]
        );
        assert!(extract_ngrams(&TokenSequence::empty(), &NgramOrders::unigrams()).is_empty());
    }

    #[test]
    fn orders_validated() {
        assert!(NgramOrders::new([]).is_err());
        assert!(NgramOrders::new([4]).is_err());
        assert_eq!("1,2,3".parse::<NgramOrders>().unwrap().as_slice(), &[1, 2, 3]);
        assert!("1,x".parse::<NgramOrders>().is_err());
    }

    #[test]
    fn budget_text_form() {
        let b: FeatureBudget = "per-order:1=200,2=400".parse().unwrap();
        assert_eq!(b.to_string(), "per-order:1=200,2=400");
        assert_eq!("pooled:7".parse::<FeatureBudget>().unwrap(), FeatureBudget::Pooled(7));
        assert!("7".parse::<FeatureBudget>().is_err());
    }

    #[test]
    fn config_validation() {
        let mut c = VectorizerConfig::default();
        assert!(c.validate().is_ok());
        c.budget = FeatureBudget::Pooled(0);
        assert!(c.validate().is_err());
        c.budget = FeatureBudget::Pooled(5);
        c.alpha = 0.0;
        assert!(c.validate().is_err());
        c.alpha = 1.5;
        assert!(c.validate().is_err());
        c.alpha = 0.5;
        c.ngram_orders = NgramOrders::new([1, 2]).unwrap();
        c.budget = FeatureBudget::PerOrder([(1, 10)].into());
        assert!(c.validate().is_err());
        c.budget = FeatureBudget::PerOrder([(1, 10), (2, 20)].into());
        assert!(c.validate().is_ok());
    }
}
