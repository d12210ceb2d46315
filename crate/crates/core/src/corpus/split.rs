use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Corpus, Split};
use crate::error::{Error, Result};

/// Assign every listed story to a split. Lists must be disjoint and name
/// stories present in the corpus; unlisted stories stay unassigned.
pub fn split_corpus(mut corpus: Corpus, train: &[String], dev: &[String], test: &[String]) -> Result<Corpus> {
    let known: HashSet<&str> = corpus.stories.iter().map(|s| s.id.as_str()).collect();
    let mut map = BTreeMap::new();
    for (split, ids) in [(Split::Train, train), (Split::Dev, dev), (Split::Test, test)] {
        for id in ids {
            if !known.contains(id.as_str()) {
                return Err(Error::Split(format!("story {id:?} is not in the corpus")));
            }
            if let Some(prev) = map.insert(id.clone(), split) {
                return Err(Error::Split(format!("story {id:?} is listed in both {prev} and {split}")));
            }
        }
    }
    corpus.split = map;
    Ok(corpus)
}

/// Shuffle ids with a fixed seed and cut them into train/dev/test of the
/// requested sizes.
pub fn seeded_split(
    ids: &[String],
    train: usize,
    dev: usize,
    test: usize,
    seed: u64,
) -> Result<(Vec<String>, Vec<String>, Vec<String>)> {
    if train + dev + test > ids.len() {
        return Err(Error::Split(format!("requested {} stories but only {} available", train + dev + test, ids.len())));
    }
    let mut ids = ids.to_vec();
    ids.sort();
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let test_ids = ids.split_off(train + dev);
    let dev_ids = ids.split_off(train);
    Ok((ids, dev_ids, test_ids.into_iter().take(test).collect()))
}

/// Read `train.txt`, `dev.txt` and `test.txt` (one story id per line) from a
/// directory.
pub fn read_split_manifest(dir: &Path) -> Result<(Vec<String>, Vec<String>, Vec<String>)> {
    let read = |split: Split| -> Result<Vec<String>> {
        let path = dir.join(format!("{}.txt", split.as_str()));
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Ok(text.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect())
    };
    Ok((read(Split::Train)?, read(Split::Dev)?, read(Split::Test)?))
}

pub fn write_split_manifest(corpus: &Corpus, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for split in Split::ALL {
        let path = dir.join(format!("{}.txt", split.as_str()));
        let mut body = corpus.ids_in(split).join("\n");
        if !body.is_empty() {
            body.push('\n');
        }
        fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Story;

    fn three() -> Corpus {
        Corpus::new(vec![Story::new("a", "x"), Story::new("b", "y"), Story::new("c", "z")])
    }

    fn ids(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn one_story_per_split() {
        let c = split_corpus(three(), &ids(&["a"]), &ids(&["b"]), &ids(&["c"])).unwrap();
        for split in Split::ALL {
            assert_eq!(c.stories_in(split).count(), 1);
        }
    }

    #[test]
    fn overlap_and_missing_are_errors() {
        assert!(split_corpus(three(), &ids(&["a"]), &ids(&["a"]), &[]).is_err());
        assert!(split_corpus(three(), &ids(&["q"]), &[], &[]).is_err());
    }

    #[test]
    fn seeded_split_is_deterministic_and_disjoint() {
        let all: Vec<String> = (0..20).map(|i| format!("s{i}")).collect();
        let a = seeded_split(&all, 12, 2, 6, 7).unwrap();
        let b = seeded_split(&all, 12, 2, 6, 7).unwrap();
        assert_eq!(a, b);
        let mut union: Vec<_> = a.0.iter().chain(&a.1).chain(&a.2).cloned().collect();
        union.sort();
        union.dedup();
        assert_eq!(union.len(), 20);
        assert!(seeded_split(&all, 20, 1, 0, 7).is_err());
    }

    #[test]
    fn manifest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let c = split_corpus(three(), &ids(&["a", "c"]), &ids(&["b"]), &[]).unwrap();
        write_split_manifest(&c, dir.path()).unwrap();
        let (tr, dv, te) = read_split_manifest(dir.path()).unwrap();
        assert_eq!(tr, ids(&["a", "c"]));
        assert_eq!(dv, ids(&["b"]));
        assert!(te.is_empty());
    }
}
