//! Seeded synthetic product corpora.
//!
//! Every leaf owns a few signature words and a set of two-word phrases.
//! The phrase words come from the pool of the leaf's parent, arranged so
//! that siblings see the same words with the same frequencies and differ
//! only in how the words pair up: unigrams identify the parent, bigrams
//! the leaf. Parents and grandparents also emit their own pool words.
//!
//! A `noise` fraction of the text chunks is replaced by noise, either
//! drawn from a label-independent shared pool ([`NoiseKind::Shared`]) or
//! borrowed from a sibling leaf ([`NoiseKind::Sibling`]). With shared
//! noise at rate 1 the text carries no label information at all.
//! Optionally, some texts repeat one noise chunk several times (`burst`),
//! the kind of term burstiness that α-power normalization dampens.
//!
//! Words are pure-letter pseudo-words so that tokenization leaves them
//! intact.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{write_records, CorpusError, LeafLabel, NodeRef, ProductRecord, Taxonomy};
use crate::seed::derive_seed;

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("invalid shape {0:?}: expected 1 to 3 sizes like 2/4/8, each dividing the next")]
    Shape(String),
    #[error("invalid parameter: {0}")]
    Param(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// Node counts per level, e.g. `3/12/36`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Shape(Vec<usize>);

impl Shape {
    pub fn new(sizes: Vec<usize>) -> Result<Self, SynthError> {
        let text = sizes.iter().map(|s| s.to_string()).collect::<Vec<_>>().join("/");
        let ok = (1..=3).contains(&sizes.len())
            && sizes.iter().all(|&s| s > 0)
            && sizes.windows(2).all(|w| w[1] % w[0] == 0 && w[1] >= w[0]);
        if ok {
            Ok(Shape(sizes))
        } else {
            Err(SynthError::Shape(text))
        }
    }

    pub fn sizes(&self) -> &[usize] {
        &self.0
    }

    pub fn leaves(&self) -> usize {
        *self.0.last().expect("non-empty shape")
    }
}

impl FromStr for Shape {
    type Err = SynthError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let sizes = s
            .split('/')
            .map(|p| p.trim().parse::<usize>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| SynthError::Shape(s.to_string()))?;
        Shape::new(sizes)
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|s| s.to_string()).collect();
        f.write_str(&parts.join("/"))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum NoiseKind {
    /// Words from a pool shared by all classes.
    #[default]
    Shared,
    /// Text generated for a random sibling leaf.
    Sibling,
}

impl FromStr for NoiseKind {
    type Err = SynthError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "shared" => Ok(NoiseKind::Shared),
            "sibling" => Ok(NoiseKind::Sibling),
            _ => Err(SynthError::Param(format!(
                "noise kind must be shared or sibling, got {s:?}"
            ))),
        }
    }
}

impl fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NoiseKind::Shared => "shared",
            NoiseKind::Sibling => "sibling",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthSpec {
    pub shape: Shape,
    pub docs_per_class: usize,
    /// Signature words per leaf, and pool words per internal node.
    pub vocab_size: usize,
    /// Fraction of chunks replaced by noise, in [0, 1].
    pub noise: f64,
    pub noise_kind: NoiseKind,
    /// Chunks in a description; titles get a third of that.
    pub doc_length: usize,
    /// Fraction of each class held out as test data.
    pub test_fraction: f64,
    /// Class sizes decay as `rank^-imbalance`; 0 keeps classes equal.
    pub imbalance: f64,
    /// Probability that a text repeats one noise chunk 3 to 8 times,
    /// like boilerplate pasted into a listing.
    pub burst: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            shape: Shape(vec![2, 4, 8]),
            docs_per_class: 50,
            vocab_size: 6,
            noise: 0.0,
            noise_kind: NoiseKind::Shared,
            doc_length: 9,
            test_fraction: 0.2,
            imbalance: 0.0,
            burst: 0.0,
            seed: 1,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        let param = |m: &str| Err(SynthError::Param(m.to_string()));
        if self.docs_per_class == 0 {
            return param("docs per class must be positive");
        }
        if self.vocab_size < 2 {
            return param("vocabulary size must be at least 2");
        }
        if !(0.0..=1.0).contains(&self.noise) {
            return param("noise must lie in [0, 1]");
        }
        if self.doc_length == 0 {
            return param("document length must be positive");
        }
        if !(0.0..1.0).contains(&self.test_fraction) {
            return param("test fraction must lie in [0, 1)");
        }
        if !(self.imbalance >= 0.0 && self.imbalance.is_finite()) {
            return param("imbalance must be non-negative");
        }
        if !(0.0..=1.0).contains(&self.burst) {
            return param("burst must lie in [0, 1]");
        }
        Ok(())
    }
}

/// Generated corpus. Test records keep their labels; the file writer
/// splits them into an unlabeled test file and a truth file.
#[derive(Clone, Debug)]
pub struct SynthCorpus {
    pub taxonomy: Taxonomy,
    pub train: Vec<ProductRecord>,
    pub test: Vec<ProductRecord>,
}

const SHARED_POOL: usize = 400;
const UNITS: [&str; 6] = ["cm", "ml", "cl", "gr", "kg", "mm"];

/// Pure-letter pseudo-word for `n`: base-100 syllables, at least three.
/// Distinct inputs give distinct words.
fn pseudo_word(n: usize) -> String {
    const C: &[u8] = b"bdfgklmnprstvzchjwxy";
    const V: &[u8] = b"aeiou";
    // scramble the low six digits (a bijection) so small ids look varied
    let mut n = n / 1_000_000 * 1_000_000 + (n % 1_000_000 * 7919 + 4321) % 1_000_000;
    let mut out = String::new();
    for _ in 0..3 {
        let syl = n % 100;
        n /= 100;
        out.push(C[syl / 5] as char);
        out.push(V[syl % 5] as char);
    }
    while n > 0 {
        let syl = n % 100;
        n /= 100;
        out.push(C[syl / 5] as char);
        out.push(V[syl % 5] as char);
    }
    out
}

struct Lexicon {
    /// Word pool of every node, by level then index.
    pools: Vec<Vec<Vec<String>>>,
    /// Phrase pool for leaves without a parent.
    root_pool: Vec<String>,
    shared: Vec<String>,
    /// Brand per leaf.
    brands: Vec<String>,
}

impl Lexicon {
    fn new(shape: &Shape, vocab: usize, rng: &mut ChaCha8Rng) -> Lexicon {
        let total = shape.sizes().iter().sum::<usize>() * vocab + vocab + SHARED_POOL + shape.leaves();
        let mut ids: Vec<usize> = (0..total).collect();
        ids.shuffle(rng);
        let mut words = ids.into_iter().map(pseudo_word);
        let mut take = |k: usize| -> Vec<String> { words.by_ref().take(k).collect() };
        let pools = shape
            .sizes()
            .iter()
            .map(|&n| (0..n).map(|_| take(vocab)).collect())
            .collect();
        let root_pool = take(vocab);
        let shared = take(SHARED_POOL);
        let brands = take(shape.leaves())
            .into_iter()
            .map(|w| {
                let mut c = w.chars();
                let first = c.next().expect("non-empty word").to_ascii_uppercase();
                std::iter::once(first).chain(c).collect()
            })
            .collect();
        Lexicon {
            pools,
            root_pool,
            shared,
            brands,
        }
    }
}

struct Generator<'a> {
    spec: &'a SynthSpec,
    tax: &'a Taxonomy,
    lex: Lexicon,
    leaves: Vec<NodeRef>,
}

impl Generator<'_> {
    fn pool(&self, node: NodeRef) -> &[String] {
        &self.lex.pools[node.level as usize - 1][node.index as usize]
    }

    fn siblings(&self, leaf: NodeRef) -> Vec<NodeRef> {
        match self.tax.parent(leaf) {
            Some(p) => self.tax.children(p).collect(),
            None => self.leaves.clone(),
        }
    }

    /// One chunk of text that is informative about `leaf`.
    fn signal_chunk(&self, leaf: NodeRef, rng: &mut ChaCha8Rng, out: &mut Vec<String>) {
        let parent = self.tax.parent(leaf);
        let grandparent = parent.and_then(|p| self.tax.parent(p));
        let roll: f64 = rng.gen();
        if roll < 0.2 {
            out.push(self.pool(leaf).choose(rng).expect("pool").clone());
        } else if roll < 0.6 {
            // phrase k of sibling s pairs pool[k] with pool[k + s + 1]
            let pool = parent.map_or(self.lex.root_pool.as_slice(), |p| self.pool(p));
            let sibs = self.siblings(leaf);
            let s = sibs.iter().position(|&x| x == leaf).expect("leaf among siblings");
            let k = rng.gen_range(0..pool.len());
            out.push(pool[k].clone());
            out.push(pool[(k + s + 1) % pool.len()].clone());
        } else {
            let node = match (roll < 0.8, parent, grandparent) {
                (true, Some(p), _) => p,
                (false, _, Some(g)) => g,
                (false, Some(p), None) => p,
                _ => leaf,
            };
            out.push(self.pool(node).choose(rng).expect("pool").clone());
        }
    }

    fn chunk(&self, leaf: NodeRef, rng: &mut ChaCha8Rng, out: &mut Vec<String>) {
        if rng.gen::<f64>() >= self.spec.noise {
            self.signal_chunk(leaf, rng, out)
        } else {
            self.noise_chunk(leaf, rng, out)
        }
    }

    fn noise_chunk(&self, leaf: NodeRef, rng: &mut ChaCha8Rng, out: &mut Vec<String>) {
        match self.spec.noise_kind {
            NoiseKind::Shared => {
                // roughly Zipfian use of the shared pool
                let r: f64 = rng.gen();
                let i = ((SHARED_POOL as f64).powf(r) as usize - 1).min(SHARED_POOL - 1);
                out.push(self.lex.shared[i].clone());
            }
            NoiseKind::Sibling => {
                let sibs = self.siblings(leaf);
                let other: Vec<NodeRef> = sibs.into_iter().filter(|&s| s != leaf).collect();
                match other.choose(rng) {
                    Some(&s) => self.signal_chunk(s, rng, out),
                    None => self.signal_chunk(leaf, rng, out),
                }
            }
        }
    }

    fn text(&self, leaf: NodeRef, chunks: usize, rng: &mut ChaCha8Rng) -> String {
        let mut words = Vec::new();
        for _ in 0..chunks {
            self.chunk(leaf, rng, &mut words);
        }
        if self.spec.burst > 0.0 && rng.gen_bool(self.spec.burst) {
            let mut noise = Vec::new();
            self.noise_chunk(leaf, rng, &mut noise);
            for _ in 0..rng.gen_range(3..=8) {
                words.extend(noise.iter().cloned());
            }
        }
        if rng.gen_bool(0.2) {
            if let Some(w) = words.first_mut() {
                *w = w.to_uppercase();
            }
        }
        let mut text = words.join(" ");
        if rng.gen_bool(0.3) {
            let unit = UNITS.choose(rng).expect("units");
            text.push_str(&format!(" - {}{unit}", rng.gen_range(1..500)));
        }
        text
    }

    fn record(&self, leaf: NodeRef, rng: &mut ChaCha8Rng) -> ProductRecord {
        let description = self.text(leaf, self.spec.doc_length, rng);
        let libelle = self.text(leaf, self.spec.doc_length.div_ceil(3), rng);
        let marque = if rng.gen_bool(0.5) {
            self.lex.brands[leaf.index as usize].clone()
        } else {
            String::new()
        };
        ProductRecord {
            id: String::new(),
            description,
            libelle,
            marque,
            label: Some(LeafLabel::new(self.tax.name(leaf))),
        }
    }
}

fn build_taxonomy(shape: &Shape) -> Taxonomy {
    let sizes = shape.sizes();
    let depth = sizes.len();
    let leaves = shape.leaves();
    let paths: Vec<Vec<String>> = (0..leaves)
        .map(|leaf| {
            (0..depth)
                .map(|level| {
                    let index = leaf / (leaves / sizes[level]);
                    if level + 1 == depth {
                        format!("{}", 1_000_000_000 + index)
                    } else {
                        format!("cat{}_{index:03}", level + 1)
                    }
                })
                .collect()
        })
        .collect();
    Taxonomy::from_paths(depth, &paths).expect("generated paths form a tree")
}

/// Generates the corpus; a pure function of `spec`.
pub fn generate(spec: &SynthSpec) -> Result<SynthCorpus, SynthError> {
    spec.validate()?;
    let taxonomy = build_taxonomy(&spec.shape);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, "synth"));
    let lex = Lexicon::new(&spec.shape, spec.vocab_size, &mut rng);
    let leaves: Vec<NodeRef> = taxonomy.leaves().collect();
    let gen = Generator {
        spec,
        tax: &taxonomy,
        lex,
        leaves: leaves.clone(),
    };

    // class sizes follow a random rank order when imbalanced
    let mut ranks: Vec<usize> = (0..leaves.len()).collect();
    ranks.shuffle(&mut rng);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (&leaf, &rank) in leaves.iter().zip(&ranks) {
        let size = ((spec.docs_per_class as f64) * ((rank + 1) as f64).powf(-spec.imbalance)).round() as usize;
        let size = size.max(2);
        let n_test = ((size as f64) * spec.test_fraction).round() as usize;
        for k in 0..size {
            let r = gen.record(leaf, &mut rng);
            if k < n_test {
                test.push(r);
            } else {
                train.push(r);
            }
        }
    }
    train.shuffle(&mut rng);
    test.shuffle(&mut rng);
    for (i, r) in train.iter_mut().enumerate() {
        r.id = format!("{}", i + 1);
    }
    for (i, r) in test.iter_mut().enumerate() {
        r.id = format!("{}", 1_000_001 + i);
    }
    Ok(SynthCorpus { taxonomy, train, test })
}

impl SynthCorpus {
    /// Writes `train.csv`, `test.csv` (unlabeled), `test_truth.csv`
    /// (`id;label`) and `hierarchy.csv`.
    pub fn write_to_dir(&self, dir: &Path, delimiter: u8) -> Result<(), SynthError> {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        let create = |name: &str| -> Result<BufWriter<File>, SynthError> {
            let path = dir.join(name);
            File::create(&path).map(BufWriter::new).map_err(|e| io_err(&path, e))
        };
        write_records(create("train.csv")?, &self.train, delimiter, true)?;
        write_records(create("test.csv")?, &self.test, delimiter, false)?;

        let path = dir.join("test_truth.csv");
        let mut truth = create("test_truth.csv")?;
        let d = delimiter as char;
        let mut lines = format!("id{d}label\n");
        for r in &self.test {
            let label = r.label.as_ref().map_or("", LeafLabel::as_str);
            lines.push_str(&format!("{}{d}{label}\n", r.id));
        }
        truth
            .write_all(lines.as_bytes())
            .and_then(|_| truth.flush())
            .map_err(|e| io_err(&path, e))?;

        if self.taxonomy.depth() == 3 {
            self.taxonomy.write_hierarchy(create("hierarchy.csv")?, delimiter)?;
        }
        Ok(())
    }
}

fn io_err(path: &Path, source: std::io::Error) -> SynthError {
    SynthError::Io {
        path: path.display().to_string(),
        source,
    }
}
