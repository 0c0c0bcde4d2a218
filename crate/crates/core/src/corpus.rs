//! Product records, the category taxonomy and dataset splits.
//!
//! Record files are delimiter-separated (default `;`) with a header line.
//! Columns are located by header name: `Description` and `Libelle` are
//! required, `Marque` is optional, `Categorie3` is required for labeled
//! files. An id column (`Identifiant_Produit`, `Id` or `id`) is used when
//! present; otherwise the 1-based data row number becomes the id.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{self, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Brand value meaning "no brand".
pub const NO_BRAND: &str = "AUCUNE";

const ID_COLUMNS: [&str; 3] = ["Identifiant_Produit", "Id", "id"];

/// Deepest-level category identifier.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LeafLabel(String);

impl LeafLabel {
    pub fn new(value: impl Into<String>) -> Self {
        LeafLabel(value.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for LeafLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for LeafLabel {
    fn from(s: &str) -> Self {
        LeafLabel(s.to_string())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProductRecord {
    pub id: String,
    pub description: String,
    pub libelle: String,
    /// Brand, empty when absent or `AUCUNE`.
    pub marque: String,
    pub label: Option<LeafLabel>,
}

impl ProductRecord {
    /// Both text fields are blank. Such records are kept, just flagged.
    pub fn is_degenerate(&self) -> bool {
        self.description.trim().is_empty() && self.libelle.trim().is_empty()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("header is missing required column {0:?}")]
    MissingColumn(&'static str),
    #[error("line {line}: {message}")]
    Malformed { line: u64, message: String },
    #[error("conflicting hierarchy: {node:?} (level {level}) has parents {first:?} and {second:?}")]
    ConflictingHierarchy {
        node: String,
        level: u8,
        first: String,
        second: String,
    },
    #[error("label {0:?} is not a leaf of the taxonomy")]
    UnknownLabel(String),
    #[error("{0}")]
    Csv(String),
}

impl From<csv::Error> for CorpusError {
    fn from(e: csv::Error) -> Self {
        let line = e.position().map(|p| p.line());
        match (line, e.kind()) {
            (Some(line), _) => CorpusError::Malformed {
                line,
                message: e.to_string(),
            },
            (None, _) => CorpusError::Csv(e.to_string()),
        }
    }
}

/// What to do with a data line whose field count is wrong.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum OnMalformed {
    #[default]
    Abort,
    Skip,
}

#[derive(Clone, Debug)]
pub struct LoadOptions {
    pub delimiter: u8,
    pub has_labels: bool,
    pub on_malformed: OnMalformed,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            delimiter: b';',
            has_labels: true,
            on_malformed: OnMalformed::Abort,
        }
    }
}

#[derive(Debug, Default)]
pub struct LoadedRecords {
    pub records: Vec<ProductRecord>,
    /// Lines skipped under [`OnMalformed::Skip`], with their errors.
    pub skipped: Vec<CorpusError>,
}

struct Columns {
    id: Option<usize>,
    description: usize,
    libelle: usize,
    marque: Option<usize>,
    label: Option<usize>,
    width: usize,
}

impl Columns {
    fn from_header(header: &csv::StringRecord, has_labels: bool) -> Result<Self, CorpusError> {
        let find = |name: &str| header.iter().position(|h| h.trim() == name);
        let id = ID_COLUMNS.iter().find_map(|c| find(c));
        let description = find("Description").ok_or(CorpusError::MissingColumn("Description"))?;
        let libelle = find("Libelle").ok_or(CorpusError::MissingColumn("Libelle"))?;
        let label = if has_labels {
            Some(find("Categorie3").ok_or(CorpusError::MissingColumn("Categorie3"))?)
        } else {
            None
        };
        Ok(Columns {
            id,
            description,
            libelle,
            marque: find("Marque"),
            label,
            width: header.len(),
        })
    }
}

/// Streaming record reader: holds one record at a time.
pub struct RecordReader<R: Read> {
    inner: csv::Reader<R>,
    columns: Columns,
    row: csv::StringRecord,
    data_rows: u64,
}

impl<R: Read> RecordReader<R> {
    pub fn new(reader: R, delimiter: u8, has_labels: bool) -> Result<Self, CorpusError> {
        let mut inner = csv::ReaderBuilder::new()
            .delimiter(delimiter)
            .has_headers(true)
            .flexible(true)
            .from_reader(reader);
        let header = inner.headers()?.clone();
        let columns = Columns::from_header(&header, has_labels)?;
        Ok(RecordReader {
            inner,
            columns,
            row: csv::StringRecord::new(),
            data_rows: 0,
        })
    }

    fn convert(&self, line: u64) -> Result<ProductRecord, CorpusError> {
        let c = &self.columns;
        if self.row.len() != c.width {
            return Err(CorpusError::Malformed {
                line,
                message: format!("expected {} fields, found {}", c.width, self.row.len()),
            });
        }
        let field = |i: usize| self.row.get(i).unwrap_or("").to_string();
        let marque = c.marque.map(field).unwrap_or_default();
        let marque = if marque.trim() == NO_BRAND {
            String::new()
        } else {
            marque
        };
        let label = match c.label {
            Some(i) => {
                let raw = field(i);
                if raw.trim().is_empty() {
                    return Err(CorpusError::Malformed {
                        line,
                        message: "empty Categorie3".into(),
                    });
                }
                Some(LeafLabel(raw.trim().to_string()))
            }
            None => None,
        };
        Ok(ProductRecord {
            id: c.id.map(field).unwrap_or_else(|| self.data_rows.to_string()),
            description: field(c.description),
            libelle: field(c.libelle),
            marque,
            label,
        })
    }
}

impl<R: Read> Iterator for RecordReader<R> {
    type Item = Result<ProductRecord, CorpusError>;

    fn next(&mut self) -> Option<Self::Item> {
        match self.inner.read_record(&mut self.row) {
            Ok(false) => None,
            Ok(true) => {
                self.data_rows += 1;
                let line = self.row.position().map_or(0, |p| p.line());
                Some(self.convert(line))
            }
            Err(e) => {
                self.data_rows += 1;
                Some(Err(e.into()))
            }
        }
    }
}

/// Reads every record from an in-memory or file reader.
pub fn read_records<R: Read>(reader: R, opts: &LoadOptions) -> Result<LoadedRecords, CorpusError> {
    let mut out = LoadedRecords::default();
    for rec in RecordReader::new(reader, opts.delimiter, opts.has_labels)? {
        match rec {
            Ok(r) => out.records.push(r),
            Err(e @ CorpusError::Malformed { .. }) if opts.on_malformed == OnMalformed::Skip => out.skipped.push(e),
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

pub fn load_records(path: &Path, opts: &LoadOptions) -> Result<LoadedRecords, CorpusError> {
    let file = File::open(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_records(io::BufReader::new(file), opts)
}

/// Writes records with the header `Identifiant_Produit;Categorie3;Description;Libelle;Marque`
/// (`Categorie3` omitted when `with_labels` is false).
pub fn write_records<W: Write>(
    writer: W,
    records: &[ProductRecord],
    delimiter: u8,
    with_labels: bool,
) -> Result<(), CorpusError> {
    let mut w = csv::WriterBuilder::new().delimiter(delimiter).from_writer(writer);
    if with_labels {
        w.write_record(["Identifiant_Produit", "Categorie3", "Description", "Libelle", "Marque"])?;
    } else {
        w.write_record(["Identifiant_Produit", "Description", "Libelle", "Marque"])?;
    }
    for r in records {
        let label = r.label.as_ref().map_or("", LeafLabel::as_str);
        if with_labels {
            w.write_record([r.id.as_str(), label, &r.description, &r.libelle, &r.marque])?;
        } else {
            w.write_record([r.id.as_str(), &r.description, &r.libelle, &r.marque])?;
        }
    }
    w.flush().map_err(|source| CorpusError::Io {
        path: "<output>".into(),
        source,
    })?;
    Ok(())
}

/// Exact per-class counts of the labeled records.
pub fn class_histogram(records: &[ProductRecord]) -> BTreeMap<LeafLabel, usize> {
    let mut hist = BTreeMap::new();
    for label in records.iter().filter_map(|r| r.label.as_ref()) {
        *hist.entry(label.clone()).or_insert(0) += 1;
    }
    hist
}

/// Fraction of labeled instances held by the `k` largest classes.
pub fn top_k_mass(histogram: &BTreeMap<LeafLabel, usize>, k: usize) -> f64 {
    let total: usize = histogram.values().sum();
    if total == 0 {
        return 0.0;
    }
    let mut counts: Vec<usize> = histogram.values().copied().collect();
    counts.sort_unstable_by(|a, b| b.cmp(a));
    counts.iter().take(k).sum::<usize>() as f64 / total as f64
}

/// A node of the taxonomy: level (1-based) and position within that level.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeRef {
    pub level: u8,
    pub index: u32,
}

/// Category tree with one to three levels. Leaves are the deepest level.
///
/// Node names are unique within a level; the same name may appear on
/// different levels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Taxonomy {
    names: Vec<Vec<String>>,
    parents: Vec<Vec<u32>>,
    children: Vec<Vec<Vec<u32>>>,
    lookup: Vec<HashMap<String, u32>>,
}

impl Taxonomy {
    /// Builds a 3-level taxonomy from `(level1, level2, level3)` triples.
    pub fn from_triples<I, S>(triples: I) -> Result<Self, CorpusError>
    where
        I: IntoIterator<Item = [S; 3]>,
        S: AsRef<str>,
    {
        let paths: Vec<Vec<String>> = triples
            .into_iter()
            .map(|t| t.iter().map(|s| s.as_ref().trim().to_string()).collect())
            .collect();
        Self::from_paths(3, &paths)
    }

    /// A one-level taxonomy whose leaves are the given labels.
    pub fn flat<'a, I>(labels: I) -> Self
    where
        I: IntoIterator<Item = &'a LeafLabel>,
    {
        let paths: Vec<Vec<String>> = labels.into_iter().map(|l| vec![l.0.clone()]).collect();
        Self::from_paths(1, &paths).expect("a flat taxonomy cannot conflict")
    }

    /// Builds a taxonomy of the given depth from root-to-leaf name paths.
    pub fn from_paths(depth: usize, paths: &[Vec<String>]) -> Result<Self, CorpusError> {
        // parent name per (level, name), checked for conflicts
        let mut level_sets: Vec<BTreeSet<&str>> = vec![BTreeSet::new(); depth];
        let mut parent_of: Vec<BTreeMap<&str, &str>> = vec![BTreeMap::new(); depth];
        for path in paths {
            debug_assert_eq!(path.len(), depth);
            for l in 0..depth {
                level_sets[l].insert(&path[l]);
                if l > 0 {
                    let node = path[l].as_str();
                    let parent = path[l - 1].as_str();
                    match parent_of[l].get(node) {
                        Some(&existing) if existing != parent => {
                            let (first, second) = if existing < parent {
                                (existing, parent)
                            } else {
                                (parent, existing)
                            };
                            return Err(CorpusError::ConflictingHierarchy {
                                node: node.to_string(),
                                level: l as u8 + 1,
                                first: first.to_string(),
                                second: second.to_string(),
                            });
                        }
                        Some(_) => {}
                        None => {
                            parent_of[l].insert(node, parent);
                        }
                    }
                }
            }
        }
        let names: Vec<Vec<String>> = level_sets
            .iter()
            .map(|s| s.iter().map(|n| n.to_string()).collect())
            .collect();
        let lookup: Vec<HashMap<String, u32>> = names
            .iter()
            .map(|lv| lv.iter().enumerate().map(|(i, n)| (n.clone(), i as u32)).collect())
            .collect();
        let mut parents = vec![Vec::new(); depth];
        let mut children: Vec<Vec<Vec<u32>>> = names.iter().map(|lv| vec![Vec::new(); lv.len()]).collect();
        for l in 1..depth {
            parents[l] = names[l]
                .iter()
                .map(|n| lookup[l - 1][parent_of[l][n.as_str()]])
                .collect();
            for (i, &p) in parents[l].iter().enumerate() {
                children[l - 1][p as usize].push(i as u32);
            }
        }
        Ok(Taxonomy {
            names,
            parents,
            children,
            lookup,
        })
    }

    /// Number of levels (1 for a flat taxonomy).
    pub fn depth(&self) -> usize {
        self.names.len()
    }

    pub fn level_size(&self, level: u8) -> usize {
        self.names[level as usize - 1].len()
    }

    /// Number of leaves, K.
    pub fn leaf_count(&self) -> usize {
        self.names.last().map_or(0, Vec::len)
    }

    pub fn nodes_at(&self, level: u8) -> impl Iterator<Item = NodeRef> + '_ {
        (0..self.level_size(level) as u32).map(move |index| NodeRef { level, index })
    }

    pub fn leaves(&self) -> impl Iterator<Item = NodeRef> + '_ {
        self.nodes_at(self.depth() as u8)
    }

    pub fn leaf_labels(&self) -> Vec<LeafLabel> {
        self.names
            .last()
            .map_or_else(Vec::new, |l| l.iter().map(|n| LeafLabel(n.clone())).collect())
    }

    pub fn name(&self, node: NodeRef) -> &str {
        &self.names[node.level as usize - 1][node.index as usize]
    }

    pub fn find(&self, level: u8, name: &str) -> Option<NodeRef> {
        self.lookup
            .get(level as usize - 1)?
            .get(name)
            .map(|&index| NodeRef { level, index })
    }

    pub fn leaf(&self, label: &LeafLabel) -> Option<NodeRef> {
        self.find(self.depth() as u8, label.as_str())
    }

    pub fn is_leaf(&self, node: NodeRef) -> bool {
        node.level as usize == self.depth()
    }

    pub fn parent(&self, node: NodeRef) -> Option<NodeRef> {
        if node.level <= 1 {
            return None;
        }
        let p = self.parents[node.level as usize - 1][node.index as usize];
        Some(NodeRef {
            level: node.level - 1,
            index: p,
        })
    }

    /// Children in name order.
    pub fn children(&self, node: NodeRef) -> impl Iterator<Item = NodeRef> + '_ {
        let level = node.level + 1;
        let kids: &[u32] = if self.is_leaf(node) {
            &[]
        } else {
            &self.children[node.level as usize - 1][node.index as usize]
        };
        kids.iter().map(move |&index| NodeRef { level, index })
    }

    /// Ancestor of `node` at `level` (the node itself at its own level).
    pub fn ancestor_at(&self, node: NodeRef, level: u8) -> Option<NodeRef> {
        if level == 0 || level > node.level {
            return None;
        }
        let mut cur = node;
        while cur.level > level {
            cur = self.parent(cur)?;
        }
        Some(cur)
    }

    /// Reads a hierarchy file: a header line then `level1;level2;level3`
    /// rows, using the record delimiter.
    pub fn read_hierarchy<R: Read>(reader: R, delimiter: u8) -> Result<Self, CorpusError> {
        let mut rdr = csv::ReaderBuilder::new()
            .delimiter(delimiter)
            .has_headers(true)
            .flexible(true)
            .from_reader(reader);
        let mut triples = Vec::new();
        for row in rdr.records() {
            let row = row?;
            let line = row.position().map_or(0, |p| p.line());
            if row.len() != 3 {
                return Err(CorpusError::Malformed {
                    line,
                    message: format!("hierarchy rows need 3 fields, found {}", row.len()),
                });
            }
            if row.iter().any(|f| f.trim().is_empty()) {
                return Err(CorpusError::Malformed {
                    line,
                    message: "empty category in hierarchy row".into(),
                });
            }
            triples.push([row[0].to_string(), row[1].to_string(), row[2].to_string()]);
        }
        Taxonomy::from_triples(triples)
    }

    pub fn write_hierarchy<W: Write>(&self, writer: W, delimiter: u8) -> Result<(), CorpusError> {
        let mut w = csv::WriterBuilder::new().delimiter(delimiter).from_writer(writer);
        w.write_record(["Categorie1", "Categorie2", "Categorie3"])?;
        if self.depth() == 3 {
            for leaf in self.leaves() {
                let l2 = self.parent(leaf).expect("level 3 has a parent");
                let l1 = self.parent(l2).expect("level 2 has a parent");
                w.write_record([self.name(l1), self.name(l2), self.name(leaf)])?;
            }
        }
        w.flush().map_err(|source| CorpusError::Io {
            path: "<output>".into(),
            source,
        })?;
        Ok(())
    }

    /// Checks that every label is a leaf.
    pub fn check_labels<'a, I>(&self, labels: I) -> Result<(), CorpusError>
    where
        I: IntoIterator<Item = &'a LeafLabel>,
    {
        for l in labels {
            if self.leaf(l).is_none() {
                return Err(CorpusError::UnknownLabel(l.0.clone()));
            }
        }
        Ok(())
    }
}

/// Taxonomy from the hierarchy file when given, else a flat taxonomy over
/// the distinct labels. Labels must all be leaves of the result.
pub fn derive_taxonomy(
    labels: &[LeafLabel],
    hierarchy_file: Option<&Path>,
    delimiter: u8,
) -> Result<Taxonomy, CorpusError> {
    match hierarchy_file {
        None => Ok(Taxonomy::flat(labels)),
        Some(path) => {
            let file = File::open(path).map_err(|source| CorpusError::Io {
                path: path.display().to_string(),
                source,
            })?;
            let tax = Taxonomy::read_hierarchy(io::BufReader::new(file), delimiter)?;
            tax.check_labels(labels)?;
            Ok(tax)
        }
    }
}

/// Disjoint train/validation index sets.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatasetSplit {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub seed: u64,
}

impl DatasetSplit {
    /// Shuffles `0..n` with the seed and holds out `validation_fraction`
    /// of it. Both index lists come back sorted.
    pub fn random(n: usize, validation_fraction: f64, seed: u64) -> Self {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let n_val = ((n as f64) * validation_fraction.clamp(0.0, 1.0)).round() as usize;
        let mut validation = idx[..n_val].to_vec();
        let mut train = idx[n_val..].to_vec();
        validation.sort_unstable();
        train.sort_unstable();
        DatasetSplit {
            train,
            validation,
            seed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const TABLE1: &str = "Categorie3;Description;Libelle;Marque\n\
        1000015309;De Collectif aux éditions SOLESMES;Benedictions de l eglise;\n\
        1000010100;or 750, poids : 3.45gr, diamants : 0.26carats;Bague or et diamants;AUCUNE\n\
        1000003407;Champagne Brut - Champagne-Vendu à l'unité-1 x 75cl;Mumm Brut;AUCUNE\n";

    fn read(text: &str, opts: &LoadOptions) -> Result<LoadedRecords, CorpusError> {
        read_records(text.as_bytes(), opts)
    }

    #[test]
    fn loads_table_rows() {
        let loaded = read(TABLE1, &LoadOptions::default()).unwrap();
        assert_eq!(loaded.records.len(), 3);
        let champagne = &loaded.records[2];
        assert_eq!(champagne.label, Some(LeafLabel::from("1000003407")));
        assert_eq!(champagne.libelle, "Mumm Brut");
        assert_eq!(champagne.marque, "");
        assert_eq!(champagne.id, "3");
        assert!(loaded.records.iter().all(|r| !r.is_degenerate()));
    }

    #[test]
    fn header_only_is_empty() {
        let loaded = read("Categorie3;Description;Libelle;Marque\n", &LoadOptions::default()).unwrap();
        assert!(loaded.records.is_empty());
    }

    #[test]
    fn empty_text_is_degenerate_not_error() {
        let loaded = read("Categorie3;Description;Libelle\nA;;\n", &LoadOptions::default()).unwrap();
        assert!(loaded.records[0].is_degenerate());
        assert_eq!(loaded.records[0].marque, "");
    }

    #[test]
    fn missing_header_column_aborts() {
        let err = read("Categorie3;Description\nA;x\n", &LoadOptions::default()).unwrap_err();
        assert!(matches!(err, CorpusError::MissingColumn("Libelle")));
        let unlabeled = LoadOptions {
            has_labels: false,
            ..LoadOptions::default()
        };
        assert!(read("Description;Libelle\nx;y\n", &unlabeled).is_ok());
        assert!(matches!(
            read("Description;Libelle\nx;y\n", &LoadOptions::default()),
            Err(CorpusError::MissingColumn("Categorie3"))
        ));
    }

    #[test]
    fn malformed_line_abort_or_skip() {
        let text = "Categorie3;Description;Libelle\nA;x;y\nB;only\nC;z;w\n";
        match read(text, &LoadOptions::default()) {
            Err(CorpusError::Malformed { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected malformed error, got {other:?}"),
        }
        let skip = LoadOptions {
            on_malformed: OnMalformed::Skip,
            ..LoadOptions::default()
        };
        let loaded = read(text, &skip).unwrap();
        assert_eq!(loaded.records.len(), 2);
        assert_eq!(loaded.skipped.len(), 1);
        assert_eq!(loaded.records[1].id, "3");
    }

    #[test]
    fn quoted_fields_keep_delimiters() {
        let text = "Id;Categorie3;Description;Libelle\n7;A;\"a;b\";\"say \"\"hi\"\"\"\n";
        let r = &read(text, &LoadOptions::default()).unwrap().records[0];
        assert_eq!(r.id, "7");
        assert_eq!(r.description, "a;b");
        assert_eq!(r.libelle, "say \"hi\"");
    }

    #[test]
    fn histogram_counts() {
        let rec = |l: &str| ProductRecord {
            id: String::new(),
            description: "x".into(),
            libelle: String::new(),
            marque: String::new(),
            label: Some(l.into()),
        };
        let h = class_histogram(&[rec("a"), rec("a"), rec("b")]);
        assert_eq!(h[&LeafLabel::from("a")], 2);
        assert_eq!(h[&LeafLabel::from("b")], 1);
        assert!(class_histogram(&[]).is_empty());
        assert!((top_k_mass(&h, 1) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn taxonomy_from_triples() {
        let t = Taxonomy::from_triples([["A", "A1", "A1a"], ["A", "A1", "A1b"], ["B", "B1", "B1a"]]).unwrap();
        assert_eq!((t.level_size(1), t.level_size(2), t.level_size(3)), (2, 2, 3));
        assert_eq!(t.leaf_count(), 3);
        let leaf = t.leaf(&"A1b".into()).unwrap();
        assert_eq!(t.name(t.ancestor_at(leaf, 1).unwrap()), "A");
        assert_eq!(t.name(t.parent(leaf).unwrap()), "A1");
        let a1 = t.find(2, "A1").unwrap();
        let kids: Vec<&str> = t.children(a1).map(|c| t.name(c)).collect();
        assert_eq!(kids, ["A1a", "A1b"]);
    }

    #[test]
    fn conflicting_parents_rejected() {
        let err = Taxonomy::from_triples([["A", "A1", "X"], ["B", "B9", "X"]]).unwrap_err();
        assert!(matches!(err, CorpusError::ConflictingHierarchy { level: 3, .. }));
        let err = Taxonomy::from_triples([["A", "M", "x"], ["B", "M", "y"]]).unwrap_err();
        assert!(matches!(err, CorpusError::ConflictingHierarchy { level: 2, .. }));
    }

    #[test]
    fn hierarchy_file_round_trip_and_label_check() {
        let t = Taxonomy::from_triples([["A", "A1", "A1a"], ["B", "B1", "B1a"]]).unwrap();
        let mut buf = Vec::new();
        t.write_hierarchy(&mut buf, b';').unwrap();
        let back = Taxonomy::read_hierarchy(buf.as_slice(), b';').unwrap();
        assert_eq!(back, t);
        assert!(matches!(
            t.check_labels([&LeafLabel::from("zzz")]),
            Err(CorpusError::UnknownLabel(_))
        ));
    }

    #[test]
    fn flat_taxonomy() {
        let labels: Vec<LeafLabel> = ["b", "a", "b"].iter().map(|&s| s.into()).collect();
        let t = derive_taxonomy(&labels, None, b';').unwrap();
        assert_eq!(t.depth(), 1);
        assert_eq!(t.leaf_labels(), vec![LeafLabel::from("a"), LeafLabel::from("b")]);
        assert_eq!(t.parent(t.leaf(&"a".into()).unwrap()), None);
    }

    #[test]
    fn split_is_disjoint_and_seeded() {
        let s = DatasetSplit::random(100, 0.2, 7);
        assert_eq!(s.validation.len(), 20);
        assert_eq!(s.train.len(), 80);
        assert!(s.train.iter().all(|i| !s.validation.contains(i)));
        assert_eq!(s, DatasetSplit::random(100, 0.2, 7));
        assert_ne!(s, DatasetSplit::random(100, 0.2, 8));
    }

    fn field() -> impl Strategy<Value = String> {
        "[ -~]{0,20}".prop_filter("brand sentinel is normalized", |s| s.trim() != NO_BRAND)
    }

    fn records() -> impl Strategy<Value = Vec<ProductRecord>> {
        prop::collection::vec(
            (field(), field(), field(), "[A-Za-z0-9]{1,6}").prop_map(|(d, l, m, c)| ProductRecord {
                id: String::new(),
                description: d,
                libelle: l,
                marque: m,
                label: Some(LeafLabel(c)),
            }),
            0..15,
        )
        .prop_map(|mut v| {
            for (i, r) in v.iter_mut().enumerate() {
                r.id = format!("id{i}");
            }
            v
        })
    }

    proptest! {
        #[test]
        fn write_then_load_round_trips(recs in records()) {
            let mut buf = Vec::new();
            write_records(&mut buf, &recs, b';', true).unwrap();
            let loaded = read_records(buf.as_slice(), &LoadOptions::default()).unwrap();
            prop_assert_eq!(&loaded.records, &recs);
            let hist = class_histogram(&loaded.records);
            prop_assert_eq!(hist.values().sum::<usize>(), recs.len());
        }

        #[test]
        fn taxonomy_is_order_independent(
            mut triples in prop::collection::vec((0u8..3, 0u8..3, 0u8..5), 1..20)
        ) {
            // make the tree consistent: leaf name encodes its full path
            let rows: Vec<[String; 3]> = triples
                .iter()
                .map(|&(a, b, c)| [format!("L{a}"), format!("M{a}{b}"), format!("S{a}{b}{c}")])
                .collect();
            let t1 = Taxonomy::from_triples(rows.clone()).unwrap();
            triples.reverse();
            let rev: Vec<[String; 3]> = rows.into_iter().rev().collect();
            let t2 = Taxonomy::from_triples(rev).unwrap();
            prop_assert_eq!(t1, t2);
        }
    }
}
