use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// UTC seconds since the Unix epoch.
pub type Timestamp = i64;

macro_rules! id_newtype {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(
            Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
        )]
        #[serde(transparent)]
        pub struct $name(pub u64);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                self.0.fmt(f)
            }
        }

        impl FromStr for $name {
            type Err = std::num::ParseIntError;
            fn from_str(s: &str) -> Result<Self, Self::Err> {
                s.trim().parse().map($name)
            }
        }

        impl From<u64> for $name {
            fn from(v: u64) -> Self {
                $name(v)
            }
        }
    };
}

id_newtype!(
    /// Question post id.
    QuestionId
);
id_newtype!(
    /// Answer post id.
    AnswerId
);
id_newtype!(
    /// Site-local user id.
    UserId
);

/// Tie-break shared by every pairwise predictor: the later-posted question is
/// considered harder. Equal (or unknown) timestamps fall back to the larger id.
pub fn later_posted(a: QuestionId, a_time: Option<Timestamp>, b: QuestionId, b_time: Option<Timestamp>) -> QuestionId {
    match (a_time, b_time) {
        (Some(ta), Some(tb)) if ta != tb => {
            if ta > tb {
                a
            } else {
                b
            }
        }
        _ => a.max(b),
    }
}
