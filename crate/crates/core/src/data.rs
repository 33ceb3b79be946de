//! Triple files, vocabularies, the filtered-ranking index and relation
//! mapping properties.
//!
//! A dataset directory holds `train.txt`, `valid.txt` and `test.txt`, one
//! `head<TAB>relation<TAB>tail` triple per line. Optional `entities.dict` and
//! `relations.dict` files (`id<TAB>name`) pin the id assignment; otherwise ids
//! follow first appearance, train file first.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use log::warn;
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const SPLIT_FILES: [&str; 3] = ["train.txt", "valid.txt", "test.txt"];
pub const ENTITY_DICT: &str = "entities.dict";
pub const RELATION_DICT: &str = "relations.dict";

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}:{line}: expected 3 tab-separated fields, found {found}")]
    Malformed { path: PathBuf, line: usize, found: usize },
    #[error("{path}: file contains no triples")]
    EmptyFile { path: PathBuf },
    #[error("{path}:{line}: bad dictionary entry: {reason}")]
    BadDictionary { path: PathBuf, line: usize, reason: String },
    #[error("{path}:{line}: `{name}` is not in the {kind} dictionary")]
    UnknownName { path: PathBuf, line: usize, kind: &'static str, name: String },
}

pub type Result<T> = std::result::Result<T, DataError>;

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> DataError + '_ {
    move |source| DataError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triple {
    pub head: usize,
    pub relation: usize,
    pub tail: usize,
}

impl Triple {
    pub const fn new(head: usize, relation: usize, tail: usize) -> Self {
        Self { head, relation, tail }
    }
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.head, self.relation, self.tail)
    }
}

/// Dense id assignment for one namespace.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Interner {
    names: Vec<String>,
    ids: HashMap<String, usize>,
}

impl Interner {
    pub fn intern(&mut self, name: &str) -> usize {
        if let Some(&id) = self.ids.get(name) {
            return id;
        }
        let id = self.names.len();
        self.names.push(name.to_owned());
        self.ids.insert(name.to_owned(), id);
        id
    }

    pub fn get(&self, name: &str) -> Option<usize> {
        self.ids.get(name).copied()
    }

    pub fn name(&self, id: usize) -> Option<&str> {
        self.names.get(id).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Vocab {
    pub entities: Interner,
    pub relations: Interner,
}

impl Vocab {
    /// Short hex digest of both name lists in id order.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for (tag, names) in [("E", self.entities.names()), ("R", self.relations.names())] {
            for name in names {
                h.update(tag.as_bytes());
                h.update(name.as_bytes());
                h.update(b"\n");
            }
        }
        h.finalize().iter().take(16).map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TripleStore {
    pub train: Vec<Triple>,
    pub valid: Vec<Triple>,
    pub test: Vec<Triple>,
    pub num_entities: usize,
    pub num_relations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }
}

impl TripleStore {
    pub fn split(&self, split: Split) -> &[Triple] {
        match split {
            Split::Train => &self.train,
            Split::Valid => &self.valid,
            Split::Test => &self.test,
        }
    }

    pub fn all(&self) -> impl Iterator<Item = &Triple> {
        self.train.iter().chain(&self.valid).chain(&self.test)
    }
}

/// Counts in the layout of the usual benchmark statistics table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DatasetStats {
    pub entities: usize,
    pub relations: usize,
    pub train: usize,
    pub valid: usize,
    pub test: usize,
}

impl TripleStore {
    pub fn stats(&self) -> DatasetStats {
        DatasetStats {
            entities: self.num_entities,
            relations: self.num_relations,
            train: self.train.len(),
            valid: self.valid.len(),
            test: self.test.len(),
        }
    }
}

/// Published statistics of the five standard benchmarks, keyed by the usual
/// directory names.
pub const BENCHMARK_STATS: [(&str, DatasetStats); 5] = [
    ("wn18", DatasetStats { entities: 40_943, relations: 18, train: 141_442, valid: 5_000, test: 5_000 }),
    ("fb15k", DatasetStats { entities: 14_951, relations: 1_345, train: 483_142, valid: 50_000, test: 59_071 }),
    ("wn18rr", DatasetStats { entities: 40_943, relations: 11, train: 86_835, valid: 3_034, test: 3_134 }),
    ("fb15k-237", DatasetStats { entities: 14_541, relations: 237, train: 272_115, valid: 17_535, test: 20_466 }),
    ("yago3-10", DatasetStats { entities: 123_182, relations: 37, train: 1_079_040, valid: 5_000, test: 5_000 }),
];

pub fn benchmark_stats(name: &str) -> Option<DatasetStats> {
    let key = name.to_ascii_lowercase().replace('_', "-");
    BENCHMARK_STATS.iter().find(|(n, _)| *n == key).map(|(_, s)| *s)
}

fn read_dict(path: &Path) -> Result<Option<Interner>> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(io_err(path)(e)),
    };
    let mut interner = Interner::default();
    for (lineno, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let bad = |reason: String| DataError::BadDictionary { path: path.to_path_buf(), line: lineno + 1, reason };
        let (id, name) = line.split_once('\t').ok_or_else(|| bad("expected id<TAB>name".into()))?;
        let id: usize = id.trim().parse().map_err(|_| bad(format!("bad id `{id}`")))?;
        if id != interner.len() {
            return Err(bad(format!("ids must be contiguous from 0, got {id}")));
        }
        if interner.get(name).is_some() {
            return Err(bad(format!("duplicate name `{name}`")));
        }
        interner.intern(name);
    }
    Ok(Some(interner))
}

fn parse_split(
    path: &Path,
    vocab: &mut Vocab,
    fixed_entities: bool,
    fixed_relations: bool,
) -> Result<Vec<Triple>> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut seen = HashSet::new();
    let mut triples = Vec::new();
    let mut duplicates = 0usize;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(DataError::Malformed { path: path.to_path_buf(), line: lineno + 1, found: fields.len() });
        }
        let lookup = |interner: &mut Interner, fixed: bool, kind: &'static str, name: &str| {
            if fixed {
                interner.get(name).ok_or_else(|| DataError::UnknownName {
                    path: path.to_path_buf(),
                    line: lineno + 1,
                    kind,
                    name: name.to_owned(),
                })
            } else {
                Ok(interner.intern(name))
            }
        };
        let head = lookup(&mut vocab.entities, fixed_entities, "entity", fields[0])?;
        let relation = lookup(&mut vocab.relations, fixed_relations, "relation", fields[1])?;
        let tail = lookup(&mut vocab.entities, fixed_entities, "entity", fields[2])?;
        let t = Triple::new(head, relation, tail);
        if seen.insert(t) {
            triples.push(t);
        } else {
            duplicates += 1;
        }
    }
    if triples.is_empty() {
        return Err(DataError::EmptyFile { path: path.to_path_buf() });
    }
    if duplicates > 0 {
        warn!("{}: dropped {duplicates} duplicate triple(s)", path.display());
    }
    Ok(triples)
}

/// Loads `train.txt`, `valid.txt` and `test.txt` from `dir`.
pub fn load_dataset(dir: impl AsRef<Path>) -> Result<(Vocab, TripleStore)> {
    let dir = dir.as_ref();
    let ent_dict = read_dict(&dir.join(ENTITY_DICT))?;
    let rel_dict = read_dict(&dir.join(RELATION_DICT))?;
    let fixed_entities = ent_dict.is_some();
    let fixed_relations = rel_dict.is_some();
    let mut vocab = Vocab {
        entities: ent_dict.unwrap_or_default(),
        relations: rel_dict.unwrap_or_default(),
    };
    let mut splits = Vec::with_capacity(3);
    for name in SPLIT_FILES {
        splits.push(parse_split(&dir.join(name), &mut vocab, fixed_entities, fixed_relations)?);
    }
    let test = splits.pop().expect("three splits");
    let valid = splits.pop().expect("three splits");
    let train = splits.pop().expect("three splits");

    let train_set: HashSet<&Triple> = train.iter().collect();
    let overlap = valid.iter().chain(&test).filter(|t| train_set.contains(t)).count();
    if overlap > 0 {
        warn!("{}: {overlap} evaluation triple(s) also appear in train", dir.display());
    }
    let store = TripleStore {
        num_entities: vocab.entities.len(),
        num_relations: vocab.relations.len(),
        train,
        valid,
        test,
    };
    Ok((vocab, store))
}

/// Writes the three split files plus both dictionaries.
pub fn write_dataset(dir: impl AsRef<Path>, vocab: &Vocab, store: &TripleStore) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let write_file = |name: &str, body: &dyn Fn(&mut dyn Write) -> io::Result<()>| -> Result<()> {
        let path = dir.join(name);
        let file = fs::File::create(&path).map_err(io_err(&path))?;
        let mut w = BufWriter::new(file);
        body(&mut w).and_then(|_| w.flush()).map_err(io_err(&path))
    };
    let ent = |id: usize| vocab.entities.name(id).unwrap_or("?");
    let rel = |id: usize| vocab.relations.name(id).unwrap_or("?");
    for (name, triples) in SPLIT_FILES.iter().zip([&store.train, &store.valid, &store.test]) {
        write_file(name, &|w| {
            for t in triples.iter() {
                writeln!(w, "{}\t{}\t{}", ent(t.head), rel(t.relation), ent(t.tail))?;
            }
            Ok(())
        })?;
    }
    write_file(ENTITY_DICT, &|w| {
        for (i, n) in vocab.entities.names().iter().enumerate() {
            writeln!(w, "{i}\t{n}")?;
        }
        Ok(())
    })?;
    write_file(RELATION_DICT, &|w| {
        for (i, n) in vocab.relations.names().iter().enumerate() {
            writeln!(w, "{i}\t{n}")?;
        }
        Ok(())
    })
}

/// Known true triples, queried by `(head, relation)` and `(relation, tail)`.
#[derive(Debug, Clone, Default)]
pub struct FilterIndex {
    tails: HashMap<(usize, usize), HashSet<usize>>,
    heads: HashMap<(usize, usize), HashSet<usize>>,
}

impl FilterIndex {
    pub fn from_triples<'a>(triples: impl IntoIterator<Item = &'a Triple>) -> Self {
        let mut index = Self::default();
        for t in triples {
            index.insert(*t);
        }
        index
    }

    pub fn insert(&mut self, t: Triple) {
        self.tails.entry((t.head, t.relation)).or_default().insert(t.tail);
        self.heads.entry((t.relation, t.tail)).or_default().insert(t.head);
    }

    pub fn contains(&self, t: &Triple) -> bool {
        self.tails.get(&(t.head, t.relation)).is_some_and(|s| s.contains(&t.tail))
    }

    pub fn tails(&self, head: usize, relation: usize) -> Option<&HashSet<usize>> {
        self.tails.get(&(head, relation))
    }

    pub fn heads(&self, relation: usize, tail: usize) -> Option<&HashSet<usize>> {
        self.heads.get(&(relation, tail))
    }

    /// Number of distinct triples indexed.
    pub fn len(&self) -> usize {
        self.tails.values().map(HashSet::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.tails.is_empty()
    }
}

/// Index over all three splits.
pub fn build_filter_index(store: &TripleStore) -> FilterIndex {
    FilterIndex::from_triples(store.all())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RmpClass {
    OneToOne,
    OneToMany,
    ManyToOne,
    ManyToMany,
    Undefined,
}

impl RmpClass {
    pub const DEFINED: [RmpClass; 4] =
        [RmpClass::OneToOne, RmpClass::OneToMany, RmpClass::ManyToOne, RmpClass::ManyToMany];

    pub const THRESHOLD: f64 = 1.5;

    pub fn from_counts(hpt: f64, tph: f64) -> Self {
        match (hpt < Self::THRESHOLD, tph < Self::THRESHOLD) {
            (true, true) => RmpClass::OneToOne,
            (true, false) => RmpClass::OneToMany,
            (false, true) => RmpClass::ManyToOne,
            (false, false) => RmpClass::ManyToMany,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            RmpClass::OneToOne => "1-to-1",
            RmpClass::OneToMany => "1-to-N",
            RmpClass::ManyToOne => "N-to-1",
            RmpClass::ManyToMany => "N-to-N",
            RmpClass::Undefined => "undefined",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RmpStats {
    /// Mean number of distinct heads per distinct tail.
    pub hpt: f64,
    /// Mean number of distinct tails per distinct head.
    pub tph: f64,
    pub class: RmpClass,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RmpClasses {
    pub relations: Vec<RmpStats>,
}

impl RmpClasses {
    pub fn class(&self, relation: usize) -> RmpClass {
        self.relations.get(relation).map_or(RmpClass::Undefined, |s| s.class)
    }
}

/// Relation mapping properties from the training split.
pub fn classify_rmp(store: &TripleStore) -> RmpClasses {
    let mut pairs: Vec<HashSet<(usize, usize)>> = vec![HashSet::new(); store.num_relations];
    for t in &store.train {
        pairs[t.relation].insert((t.head, t.tail));
    }
    let relations = pairs
        .iter()
        .map(|p| {
            if p.is_empty() {
                return RmpStats { hpt: f64::NAN, tph: f64::NAN, class: RmpClass::Undefined };
            }
            let heads: HashSet<usize> = p.iter().map(|&(h, _)| h).collect();
            let tails: HashSet<usize> = p.iter().map(|&(_, t)| t).collect();
            let hpt = p.len() as f64 / tails.len() as f64;
            let tph = p.len() as f64 / heads.len() as f64;
            RmpStats { hpt, tph, class: RmpClass::from_counts(hpt, tph) }
        })
        .collect();
    RmpClasses { relations }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn write(dir: &Path, name: &str, body: &str) {
        fs::write(dir.join(name), body).unwrap();
    }

    fn toy_dir(train: &str, valid: &str, test: &str) -> tempfile::TempDir {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "train.txt", train);
        write(dir.path(), "valid.txt", valid);
        write(dir.path(), "test.txt", test);
        dir
    }

    #[test]
    fn loads_toy_dataset_in_first_appearance_order() {
        let dir = toy_dir("a\tr\tb\nb\tr\tc\n", "a\tr\tc\n", "c\tr\ta\n");
        let (vocab, store) = load_dataset(dir.path()).unwrap();
        assert_eq!(vocab.entities.names(), &["a", "b", "c"]);
        assert_eq!(vocab.relations.len(), 1);
        assert_eq!(store.train, vec![Triple::new(0, 0, 1), Triple::new(1, 0, 2)]);
        assert_eq!(store.test, vec![Triple::new(2, 0, 0)]);
        assert_eq!(store.num_entities, 3);
    }

    #[test]
    fn malformed_and_empty_files_are_errors() {
        let dir = toy_dir("a\tr\tb\nbad line\n", "a\tr\tb\n", "a\tr\tb\n");
        assert!(matches!(load_dataset(dir.path()), Err(DataError::Malformed { line: 2, found: 1, .. })));
        let dir = toy_dir("a\tr\tb\tx\n", "a\tr\tb\n", "a\tr\tb\n");
        assert!(matches!(load_dataset(dir.path()), Err(DataError::Malformed { found: 4, .. })));
        let dir = toy_dir("a\tr\tb\n", "", "a\tr\tb\n");
        assert!(matches!(load_dataset(dir.path()), Err(DataError::EmptyFile { .. })));
        let missing = tempfile::tempdir().unwrap();
        assert!(matches!(load_dataset(missing.path()), Err(DataError::Io { .. })));
    }

    #[test]
    fn duplicates_within_a_split_are_dropped() {
        let dir = toy_dir("a\tr\tb\na\tr\tb\n", "a\tr\tb\n", "b\tr\ta\n");
        let (_, store) = load_dataset(dir.path()).unwrap();
        assert_eq!(store.train.len(), 1);
    }

    #[test]
    fn dictionaries_pin_ids() {
        let dir = toy_dir("a\tr\tb\n", "b\tr\ta\n", "a\tr\ta\n");
        write(dir.path(), ENTITY_DICT, "0\tb\n1\ta\n2\tz\n");
        write(dir.path(), RELATION_DICT, "0\tr\n");
        let (vocab, store) = load_dataset(dir.path()).unwrap();
        assert_eq!(store.train, vec![Triple::new(1, 0, 0)]);
        assert_eq!(store.num_entities, 3);
        assert_eq!(vocab.entities.name(2), Some("z"));

        write(dir.path(), "test.txt", "a\tr\tq\n");
        assert!(matches!(load_dataset(dir.path()), Err(DataError::UnknownName { .. })));
        write(dir.path(), ENTITY_DICT, "0\tb\n2\ta\n");
        assert!(matches!(load_dataset(dir.path()), Err(DataError::BadDictionary { .. })));
    }

    #[test]
    fn write_then_load_round_trips() {
        let dir = toy_dir("x\tp\ty\ny\tq\tz\nz\tp\tw\n", "w\tq\tx\n", "x\tq\tz\n");
        let (vocab, store) = load_dataset(dir.path()).unwrap();
        let out = tempfile::tempdir().unwrap();
        write_dataset(out.path(), &vocab, &store).unwrap();
        let (vocab2, store2) = load_dataset(out.path()).unwrap();
        assert_eq!(store, store2);
        assert_eq!(vocab.digest(), vocab2.digest());
    }

    #[test]
    fn filter_index_examples() {
        let store = TripleStore {
            train: vec![Triple::new(0, 0, 1)],
            valid: vec![Triple::new(0, 0, 1)],
            test: vec![],
            num_entities: 2,
            num_relations: 1,
        };
        let index = build_filter_index(&store);
        assert_eq!(index.tails(0, 0).unwrap().iter().copied().collect::<Vec<_>>(), vec![1]);
        assert_eq!(index.heads(0, 1).unwrap().iter().copied().collect::<Vec<_>>(), vec![0]);
        assert_eq!(index.len(), 1);
        assert!(index.contains(&Triple::new(0, 0, 1)));
        assert!(!index.contains(&Triple::new(1, 0, 0)));
    }

    #[test]
    fn rmp_threshold_rule() {
        assert_eq!(RmpClass::from_counts(1.0, 3.0), RmpClass::OneToMany);
        assert_eq!(RmpClass::from_counts(2.0, 2.0), RmpClass::ManyToMany);
        assert_eq!(RmpClass::from_counts(2.0, 1.0), RmpClass::ManyToOne);
        assert_eq!(RmpClass::from_counts(1.49, 1.49), RmpClass::OneToOne);
        assert_eq!(RmpClass::from_counts(1.5, 1.0), RmpClass::ManyToOne);
    }

    #[test]
    fn classify_uses_distinct_pairs_from_train_only() {
        let store = TripleStore {
            // relation 0: one head with three tails -> 1-to-N
            // relation 1: single triple -> 1-to-1
            // relation 2: only in test -> undefined
            train: vec![
                Triple::new(0, 0, 1),
                Triple::new(0, 0, 2),
                Triple::new(0, 0, 3),
                Triple::new(4, 1, 5),
            ],
            valid: vec![Triple::new(6, 1, 5), Triple::new(7, 1, 5)],
            test: vec![Triple::new(1, 2, 2)],
            num_entities: 8,
            num_relations: 3,
        };
        let rmp = classify_rmp(&store);
        assert_eq!(rmp.relations[0].hpt, 1.0);
        assert_eq!(rmp.relations[0].tph, 3.0);
        assert_eq!(rmp.class(0), RmpClass::OneToMany);
        assert_eq!(rmp.class(1), RmpClass::OneToOne);
        assert_eq!(rmp.class(2), RmpClass::Undefined);
    }

    #[test]
    fn benchmark_table_lookup() {
        let s = benchmark_stats("WN18RR").unwrap();
        assert_eq!((s.entities, s.relations, s.train, s.valid, s.test), (40943, 11, 86835, 3034, 3134));
        let s = benchmark_stats("fb15k_237").unwrap();
        assert_eq!((s.entities, s.relations, s.train, s.valid, s.test), (14541, 237, 272115, 17535, 20466));
        assert!(benchmark_stats("cora").is_none());
    }
}
