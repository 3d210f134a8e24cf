//! Triple stores, vocabularies, prediction queries and frequency statistics.
//!
//! A dataset directory holds three tab-separated files (`train.txt`,
//! `valid.txt`, `test.txt`), one `head<TAB>relation<TAB>tail` triple per
//! line. The vocabulary is built from the training split in first-appearance
//! order; the other splits are decoded against that fixed vocabulary and any
//! unseen symbol is an error rather than a silent new id.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One directed labelled edge, fully id-encoded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Triple {
    pub head: usize,
    pub relation: usize,
    pub tail: usize,
}

/// Which slot of a triple a query asks the model to fill in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    /// Given (head, relation), predict the tail.
    TailPrediction,
    /// Given (relation, tail), predict the head.
    HeadPrediction,
}

impl Direction {
    pub const BOTH: [Direction; 2] = [Direction::TailPrediction, Direction::HeadPrediction];

    /// Stable index used for direction-keyed tables.
    pub fn index(self) -> usize {
        match self {
            Direction::TailPrediction => 0,
            Direction::HeadPrediction => 1,
        }
    }
}

/// A link-prediction instance: one known slot pair and the answer entity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Query {
    pub direction: Direction,
    /// The known entity: head for tail-prediction, tail for head-prediction.
    pub anchor: usize,
    pub relation: usize,
    /// The entity the model is supposed to rank first.
    pub answer: usize,
}

impl Query {
    /// Reassemble the (head, relation, tail) triple this query came from.
    pub fn triple(&self) -> Triple {
        match self.direction {
            Direction::TailPrediction => Triple {
                head: self.anchor,
                relation: self.relation,
                tail: self.answer,
            },
            Direction::HeadPrediction => Triple {
                head: self.answer,
                relation: self.relation,
                tail: self.anchor,
            },
        }
    }

    /// The triple obtained by substituting `candidate` for the answer slot.
    pub fn with_answer(&self, candidate: usize) -> Triple {
        Query {
            answer: candidate,
            ..*self
        }
        .triple()
    }
}

/// Symbol tables mapping surface strings to dense ids and back.
///
/// Ids are assigned in first-appearance order while scanning the training
/// file (head, then tail, per line for entities), which makes the encoding a
/// pure function of the file bytes.
#[derive(Debug, Clone, Default)]
pub struct Vocab {
    entity_names: Vec<String>,
    relation_names: Vec<String>,
    entity_ids: HashMap<String, usize>,
    relation_ids: HashMap<String, usize>,
}

impl Vocab {
    pub fn n_entities(&self) -> usize {
        self.entity_names.len()
    }

    pub fn n_relations(&self) -> usize {
        self.relation_names.len()
    }

    pub fn entity_id(&self, name: &str) -> Option<usize> {
        self.entity_ids.get(name).copied()
    }

    pub fn relation_id(&self, name: &str) -> Option<usize> {
        self.relation_ids.get(name).copied()
    }

    pub fn entity_name(&self, id: usize) -> &str {
        &self.entity_names[id]
    }

    pub fn relation_name(&self, id: usize) -> &str {
        &self.relation_names[id]
    }

    /// Insert (or find) an entity, assigning the next dense id.
    pub fn intern_entity(&mut self, name: &str) -> usize {
        if let Some(&id) = self.entity_ids.get(name) {
            return id;
        }
        let id = self.entity_names.len();
        self.entity_names.push(name.to_owned());
        self.entity_ids.insert(name.to_owned(), id);
        id
    }

    /// Insert (or find) a relation, assigning the next dense id.
    pub fn intern_relation(&mut self, name: &str) -> usize {
        if let Some(&id) = self.relation_ids.get(name) {
            return id;
        }
        let id = self.relation_names.len();
        self.relation_names.push(name.to_owned());
        self.relation_ids.insert(name.to_owned(), id);
        id
    }

    /// Decode a triple back to its surface form.
    pub fn decode(&self, t: &Triple) -> (&str, &str, &str) {
        (
            self.entity_name(t.head),
            self.relation_name(t.relation),
            self.entity_name(t.tail),
        )
    }
}

/// Split one line into exactly three tab-separated fields.
fn split_line<'a>(
    line: &'a str,
    path: &Path,
    lineno: usize,
) -> Result<(&'a str, &'a str, &'a str)> {
    let mut it = line.split('\t');
    let h = it.next().unwrap_or("");
    let r = it.next();
    let t = it.next();
    let extra = it.count();
    match (r, t, extra) {
        (Some(r), Some(t), 0) => Ok((h, r, t)),
        (r, t, extra) => {
            let found = 1 + r.is_some() as usize + t.is_some() as usize + extra;
            Err(Error::MalformedLine {
                path: path.to_owned(),
                line: lineno,
                found,
            })
        }
    }
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })?;
    let mut out = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|source| Error::Io {
            path: path.to_owned(),
            source,
        })?;
        out.push(line);
    }
    Ok(out)
}

/// Load a triple file while growing `vocab` (training-split mode).
///
/// Duplicate triples within the file are rejected: a duplicate is almost
/// always an upstream preprocessing bug and would silently skew frequency
/// statistics.
pub fn load_triples_building_vocab(path: &Path, vocab: &mut Vocab) -> Result<Vec<Triple>> {
    load_impl(path, vocab, true)
}

/// Load a triple file against a frozen vocabulary (valid/test mode).
pub fn load_triples_with_vocab(path: &Path, vocab: &Vocab) -> Result<Vec<Triple>> {
    // The closure below never mutates when `grow` is false.
    let mut v = vocab.clone();
    load_impl(path, &mut v, false)
}

fn load_impl(path: &Path, vocab: &mut Vocab, grow: bool) -> Result<Vec<Triple>> {
    let mut triples = Vec::new();
    let mut seen: HashSet<Triple> = HashSet::new();
    for (idx, raw) in read_lines(path)?.iter().enumerate() {
        let lineno = idx + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.is_empty() {
            continue;
        }
        let (h, r, t) = split_line(line, path, lineno)?;
        let head = if grow {
            vocab.intern_entity(h)
        } else {
            vocab.entity_id(h).ok_or_else(|| Error::UnknownSymbol {
                path: path.to_owned(),
                line: lineno,
                kind: "entity",
                symbol: h.to_owned(),
            })?
        };
        let relation = if grow {
            vocab.intern_relation(r)
        } else {
            vocab.relation_id(r).ok_or_else(|| Error::UnknownSymbol {
                path: path.to_owned(),
                line: lineno,
                kind: "relation",
                symbol: r.to_owned(),
            })?
        };
        let tail = if grow {
            vocab.intern_entity(t)
        } else {
            vocab.entity_id(t).ok_or_else(|| Error::UnknownSymbol {
                path: path.to_owned(),
                line: lineno,
                kind: "entity",
                symbol: t.to_owned(),
            })?
        };
        let triple = Triple {
            head,
            relation,
            tail,
        };
        if !seen.insert(triple) {
            return Err(Error::DuplicateTriple {
                path: path.to_owned(),
                line: lineno,
            });
        }
        triples.push(triple);
    }
    Ok(triples)
}

/// A fully loaded dataset: vocabulary plus the three canonical splits.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub vocab: Vocab,
    pub train: Vec<Triple>,
    pub valid: Vec<Triple>,
    pub test: Vec<Triple>,
}

impl Dataset {
    /// Load `train.txt`, `valid.txt` and `test.txt` from `dir`.
    pub fn load(dir: &Path) -> Result<Dataset> {
        let mut vocab = Vocab::default();
        let train_path = dir.join("train.txt");
        let train = load_triples_building_vocab(&train_path, &mut vocab)?;
        if train.is_empty() {
            return Err(Error::EmptyTrainingSplit { path: train_path });
        }
        let valid = load_triples_with_vocab(&dir.join("valid.txt"), &vocab)?;
        let test = load_triples_with_vocab(&dir.join("test.txt"), &vocab)?;
        Ok(Dataset {
            vocab,
            train,
            valid,
            test,
        })
    }

    pub fn n_entities(&self) -> usize {
        self.vocab.n_entities()
    }

    pub fn n_relations(&self) -> usize {
        self.vocab.n_relations()
    }
}

/// Expand triples into prediction queries, two per triple.
///
/// Order is deterministic: for triple `i`, the tail-prediction query lands at
/// index `2*i` and the head-prediction query at `2*i + 1`.
pub fn make_queries(triples: &[Triple]) -> Vec<Query> {
    let mut out = Vec::with_capacity(triples.len() * 2);
    for t in triples {
        out.push(Query {
            direction: Direction::TailPrediction,
            anchor: t.head,
            relation: t.relation,
            answer: t.tail,
        });
        out.push(Query {
            direction: Direction::HeadPrediction,
            anchor: t.tail,
            relation: t.relation,
            answer: t.head,
        });
    }
    out
}

/// Occurrence counts over the training split, used by the subsampling
/// schemes and anywhere query frequencies are needed.
#[derive(Debug, Clone, Default)]
pub struct FrequencyTable {
    count_head_rel: HashMap<(usize, usize), u64>,
    count_rel_tail: HashMap<(usize, usize), u64>,
}

impl FrequencyTable {
    /// Count (head, relation) and (relation, tail) occurrences over `train`.
    pub fn count_frequencies(train: &[Triple]) -> FrequencyTable {
        assert!(!train.is_empty(), "frequency table over an empty split");
        let mut table = FrequencyTable::default();
        for t in train {
            *table
                .count_head_rel
                .entry((t.head, t.relation))
                .or_insert(0) += 1;
            *table
                .count_rel_tail
                .entry((t.relation, t.tail))
                .or_insert(0) += 1;
        }
        table
    }

    pub fn count_head_rel(&self, head: usize, relation: usize) -> u64 {
        self.count_head_rel
            .get(&(head, relation))
            .copied()
            .unwrap_or(0)
    }

    pub fn count_rel_tail(&self, relation: usize, tail: usize) -> u64 {
        self.count_rel_tail
            .get(&(relation, tail))
            .copied()
            .unwrap_or(0)
    }

    /// Pair frequency of a training triple: the head-relation count plus the
    /// relation-tail count. Symmetric in the query direction, and at least 2
    /// for any triple that is actually in the counted split.
    pub fn pair_freq(&self, t: &Triple) -> u64 {
        self.count_head_rel(t.head, t.relation) + self.count_rel_tail(t.relation, t.tail)
    }

    /// Frequency of the known side of a query.
    pub fn query_freq(&self, q: &Query) -> u64 {
        match q.direction {
            Direction::TailPrediction => self.count_head_rel(q.anchor, q.relation),
            Direction::HeadPrediction => self.count_rel_tail(q.relation, q.anchor),
        }
    }

    /// Sum of all (head, relation) counts; equals the split size.
    pub fn total_head_rel(&self) -> u64 {
        self.count_head_rel.values().sum()
    }

    /// Sum of all (relation, tail) counts; equals the split size.
    pub fn total_rel_tail(&self) -> u64 {
        self.count_rel_tail.values().sum()
    }
}

/// Known-answer sets for filtered ranking, indexed by query slot.
///
/// Built over train, valid and test together so that evaluation never
/// penalizes a model for ranking a *different correct answer* above the one
/// being scored.
#[derive(Debug, Clone, Default)]
pub struct FilterIndex {
    answers: HashMap<(Direction, usize, usize), Vec<usize>>,
}

impl FilterIndex {
    pub fn build(splits: &[&[Triple]]) -> FilterIndex {
        let mut sets: HashMap<(Direction, usize, usize), HashSet<usize>> = HashMap::new();
        for split in splits {
            for t in *split {
                sets.entry((Direction::TailPrediction, t.head, t.relation))
                    .or_default()
                    .insert(t.tail);
                sets.entry((Direction::HeadPrediction, t.tail, t.relation))
                    .or_default()
                    .insert(t.head);
            }
        }
        let mut answers = HashMap::with_capacity(sets.len());
        for (key, set) in sets {
            let mut v: Vec<usize> = set.into_iter().collect();
            v.sort_unstable();
            answers.insert(key, v);
        }
        FilterIndex { answers }
    }

    /// All known answers for the slot of `q` (sorted, possibly empty).
    pub fn known_answers(&self, q: &Query) -> &[usize] {
        self.answers
            .get(&(q.direction, q.anchor, q.relation))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn is_known(&self, q: &Query, candidate: usize) -> bool {
        self.known_answers(q).binary_search(&candidate).is_ok()
    }
}

/// The path triple files live at inside a dataset directory.
pub const SPLIT_FILES: [&str; 3] = ["train.txt", "valid.txt", "test.txt"];

/// Convenience: dataset-relative paths of the three split files.
pub fn split_paths(dir: &Path) -> [PathBuf; 3] {
    [
        dir.join(SPLIT_FILES[0]),
        dir.join(SPLIT_FILES[1]),
        dir.join(SPLIT_FILES[2]),
    ]
}
