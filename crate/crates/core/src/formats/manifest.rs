//! Dataset manifests: named train/val/test id lists with leakage checks.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(rename_all = "lowercase"))]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ManifestError {
    #[error("image {id} listed twice in the {split} split")]
    DuplicateInSplit { id: String, split: Split },
    #[error("leakage: image {id} appears in both {first} and {second}")]
    Leakage { id: String, first: Split, second: Split },
    #[error("image {id} appears in both {first_source} and {second_source}")]
    Collision {
        id: String,
        first_source: String,
        second_source: String,
    },
    #[error("manifest {name}: {split} count {count} does not match {listed} listed ids")]
    CountMismatch {
        name: String,
        split: Split,
        count: usize,
        listed: usize,
    },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct SplitCounts {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

impl SplitCounts {
    pub fn total(&self) -> usize {
        self.train + self.val + self.test
    }

    fn get(&self, split: Split) -> usize {
        match split {
            Split::Train => self.train,
            Split::Val => self.val,
            Split::Test => self.test,
        }
    }
}

impl core::ops::Add for SplitCounts {
    type Output = SplitCounts;

    fn add(self, rhs: SplitCounts) -> SplitCounts {
        SplitCounts {
            train: self.train + rhs.train,
            val: self.val + rhs.val,
            test: self.test + rhs.test,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct DatasetManifest {
    pub name: String,
    pub features: String,
    pub counts: SplitCounts,
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

impl DatasetManifest {
    pub fn ids(&self, split: Split) -> &[String] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }

    /// Re-checks a manifest loaded from disk: counts, duplicates and leakage.
    pub fn validate(&self) -> Result<(), ManifestError> {
        for split in Split::ALL {
            let listed = self.ids(split).len();
            if self.counts.get(split) != listed {
                return Err(ManifestError::CountMismatch {
                    name: self.name.clone(),
                    split,
                    count: self.counts.get(split),
                    listed,
                });
            }
        }
        check_splits(&self.train, &self.val, &self.test).map(|_| ())
    }
}

fn check_splits(train: &[String], val: &[String], test: &[String]) -> Result<BTreeMap<String, Split>, ManifestError> {
    let mut seen: BTreeMap<String, Split> = BTreeMap::new();
    for (split, ids) in [(Split::Train, train), (Split::Val, val), (Split::Test, test)] {
        let mut sorted: Vec<&String> = ids.iter().collect();
        sorted.sort();
        for id in sorted {
            if let Some(first) = seen.insert(id.clone(), split) {
                return Err(if first == split {
                    ManifestError::DuplicateInSplit { id: id.clone(), split }
                } else {
                    ManifestError::Leakage {
                        id: id.clone(),
                        first,
                        second: split,
                    }
                });
            }
        }
    }
    Ok(seen)
}

fn sorted(ids: Vec<String>) -> Vec<String> {
    let mut ids = ids;
    ids.sort();
    ids
}

/// Builds a manifest from per-split id lists. Ids are stored sorted.
pub fn build_manifest(
    name: impl Into<String>,
    features: impl Into<String>,
    train: Vec<String>,
    val: Vec<String>,
    test: Vec<String>,
) -> Result<DatasetManifest, ManifestError> {
    check_splits(&train, &val, &test)?;
    let counts = SplitCounts {
        train: train.len(),
        val: val.len(),
        test: test.len(),
    };
    Ok(DatasetManifest {
        name: name.into(),
        features: features.into(),
        counts,
        train: sorted(train),
        val: sorted(val),
        test: sorted(test),
    })
}

/// Combines manifests. Parts must not share any image id.
pub fn merge_manifests(parts: &[DatasetManifest], name: impl Into<String>) -> Result<DatasetManifest, ManifestError> {
    if let [only] = parts {
        return Ok(DatasetManifest {
            name: name.into(),
            ..only.clone()
        });
    }
    let mut owner: BTreeMap<&str, &str> = BTreeMap::new();
    let mut merged = DatasetManifest {
        name: name.into(),
        ..Default::default()
    };
    for part in parts {
        for split in Split::ALL {
            for id in part.ids(split) {
                if let Some(first) = owner.insert(id.as_str(), part.name.as_str()) {
                    return Err(ManifestError::Collision {
                        id: id.clone(),
                        first_source: first.to_string(),
                        second_source: part.name.clone(),
                    });
                }
            }
        }
        merged.train.extend(part.train.iter().cloned());
        merged.val.extend(part.val.iter().cloned());
        merged.test.extend(part.test.iter().cloned());
        merged.counts = merged.counts + part.counts;
    }
    let names: Vec<&str> = parts.iter().map(|p| p.name.as_str()).collect();
    merged.features = alloc::format!("combined: {}", names.join(" + "));
    merged.train.sort();
    merged.val.sort();
    merged.test.sort();
    Ok(merged)
}
