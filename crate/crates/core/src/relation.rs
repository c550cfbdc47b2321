//! Pairwise relation between two commitments on the same account.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::model::AccessClass;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Relation {
    /// Both readers.
    Friend,
    /// Both writers.
    Family,
    /// One reader, one writer.
    Strange,
}

impl Relation {
    pub const ALL: [Relation; 3] = [Relation::Friend, Relation::Family, Relation::Strange];
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Relation::Friend => f.write_str("Friend"),
            Relation::Family => f.write_str("Family"),
            Relation::Strange => f.write_str("Strange"),
        }
    }
}

pub fn classify_relation(a: AccessClass, b: AccessClass) -> Relation {
    match (a, b) {
        (AccessClass::Reader, AccessClass::Reader) => Relation::Friend,
        (AccessClass::Writer, AccessClass::Writer) => Relation::Family,
        _ => Relation::Strange,
    }
}

/// Only friends may execute side by side; anything else waits.
pub fn may_run_concurrently(rel: Relation) -> bool {
    rel == Relation::Friend
}

#[cfg(test)]
mod tests {
    use super::*;
    use AccessClass::*;

    #[test]
    fn relation_table() {
        assert_eq!(classify_relation(Reader, Reader), Relation::Friend);
        assert_eq!(classify_relation(Writer, Writer), Relation::Family);
        assert_eq!(classify_relation(Reader, Writer), Relation::Strange);
        assert_eq!(classify_relation(Writer, Reader), Relation::Strange);
    }

    #[test]
    fn concurrency_rule() {
        assert!(may_run_concurrently(Relation::Friend));
        assert!(!may_run_concurrently(Relation::Family));
        assert!(!may_run_concurrently(Relation::Strange));
    }

    #[test]
    fn symmetric_and_sound_over_all_pairs() {
        for a in [Reader, Writer] {
            for b in [Reader, Writer] {
                let rel = classify_relation(a, b);
                assert_eq!(rel, classify_relation(b, a));
                if may_run_concurrently(rel) {
                    assert!(a != Writer && b != Writer);
                }
            }
        }
    }
}
