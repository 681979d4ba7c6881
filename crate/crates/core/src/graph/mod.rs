//! The directed difficulty network: nodes are questions, an edge `a -> b`
//! says `b` is harder than `a`.

mod build;
mod io;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::QuestionId;

pub use build::{
    build_network, build_type1_edges, build_type2_edges, build_type3_edges, BuildParams, EdgeSet, Hypotheses,
};
pub use io::{read_network, write_network, NETWORK_FORMAT_VERSION};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EdgeType {
    /// Answerer's later questions are harder than the answered one.
    Type1,
    /// Answerer's recent questions (within `delta_t` buckets) are harder.
    Type2,
    /// A user's next question is harder than the previous one.
    Type3,
    /// Inserted by the noise experiments.
    Noise,
    /// Imported from another network construction (a baseline graph).
    External,
}

impl EdgeType {
    pub const ALL: [EdgeType; 5] = [
        EdgeType::Type1,
        EdgeType::Type2,
        EdgeType::Type3,
        EdgeType::Noise,
        EdgeType::External,
    ];

    fn bit(self) -> u8 {
        match self {
            EdgeType::Type1 => 1,
            EdgeType::Type2 => 2,
            EdgeType::Type3 => 4,
            EdgeType::Noise => 8,
            EdgeType::External => 16,
        }
    }

    fn code(self) -> &'static str {
        match self {
            EdgeType::Type1 => "1",
            EdgeType::Type2 => "2",
            EdgeType::Type3 => "3",
            EdgeType::Noise => "N",
            EdgeType::External => "X",
        }
    }
}

/// Set of edge types carried by one collapsed edge.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct TypeSet(u8);

impl TypeSet {
    pub fn single(t: EdgeType) -> TypeSet {
        TypeSet(t.bit())
    }

    pub fn insert(&mut self, t: EdgeType) {
        self.0 |= t.bit();
    }

    pub fn contains(self, t: EdgeType) -> bool {
        self.0 & t.bit() != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn union(self, other: TypeSet) -> TypeSet {
        TypeSet(self.0 | other.0)
    }

    pub fn iter(self) -> impl Iterator<Item = EdgeType> {
        EdgeType::ALL.into_iter().filter(move |t| self.contains(*t))
    }
}

impl FromIterator<EdgeType> for TypeSet {
    fn from_iter<I: IntoIterator<Item = EdgeType>>(iter: I) -> Self {
        let mut s = TypeSet::default();
        for t in iter {
            s.insert(t);
        }
        s
    }
}

impl fmt::Display for TypeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let codes: Vec<&str> = self.iter().map(EdgeType::code).collect();
        f.write_str(&codes.join(","))
    }
}

impl FromStr for TypeSet {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let mut set = TypeSet::default();
        for code in s.split(',') {
            let t = match code.trim() {
                "1" => EdgeType::Type1,
                "2" => EdgeType::Type2,
                "3" => EdgeType::Type3,
                "N" => EdgeType::Noise,
                "X" => EdgeType::External,
                other => return Err(Error::InvalidParameter(format!("unknown edge type {other:?}"))),
            };
            set.insert(t);
        }
        if set.is_empty() {
            return Err(Error::InvalidParameter("empty edge type set".into()));
        }
        Ok(set)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DifficultyEdge {
    /// Easier endpoint.
    pub from: QuestionId,
    /// Harder endpoint.
    pub to: QuestionId,
    pub types: TypeSet,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkParams {
    pub bucket_width_weeks: u32,
    pub delta_t: u32,
}

impl Default for NetworkParams {
    fn default() -> Self {
        NetworkParams {
            bucket_width_weeks: crate::ingest::DEFAULT_BUCKET_WEEKS,
            delta_t: 1,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DifficultyNetwork {
    nodes: BTreeSet<QuestionId>,
    edges: BTreeMap<(QuestionId, QuestionId), TypeSet>,
    pub params: NetworkParams,
}

impl DifficultyNetwork {
    pub fn new(nodes: impl IntoIterator<Item = QuestionId>, params: NetworkParams) -> Self {
        DifficultyNetwork {
            nodes: nodes.into_iter().collect(),
            edges: BTreeMap::new(),
            params,
        }
    }

    /// Insert `from -> to`, merging type sets of an existing instance.
    /// Returns `true` when the edge was not present before.
    pub fn add_edge(&mut self, from: QuestionId, to: QuestionId, types: TypeSet) -> Result<bool> {
        if from == to {
            return Err(Error::InvalidParameter(format!("self loop on {from}")));
        }
        for q in [from, to] {
            if !self.nodes.contains(&q) {
                return Err(Error::UnknownQuestion(q));
            }
        }
        if types.is_empty() {
            return Err(Error::InvalidParameter("edge without type".into()));
        }
        let mut fresh = false;
        self.edges
            .entry((from, to))
            .and_modify(|t| *t = t.union(types))
            .or_insert_with(|| {
                fresh = true;
                types
            });
        Ok(fresh)
    }

    pub fn remove_edge(&mut self, from: QuestionId, to: QuestionId) -> Option<TypeSet> {
        self.edges.remove(&(from, to))
    }

    pub fn nodes(&self) -> &BTreeSet<QuestionId> {
        &self.nodes
    }

    pub fn contains_node(&self, q: QuestionId) -> bool {
        self.nodes.contains(&q)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edge_types(&self, from: QuestionId, to: QuestionId) -> Option<TypeSet> {
        self.edges.get(&(from, to)).copied()
    }

    pub fn contains_edge(&self, from: QuestionId, to: QuestionId) -> bool {
        self.edges.contains_key(&(from, to))
    }

    /// Edges in canonical `(from, to)` order.
    pub fn edges(&self) -> impl Iterator<Item = DifficultyEdge> + '_ {
        self.edges
            .iter()
            .map(|(&(from, to), &types)| DifficultyEdge { from, to, types })
    }

    /// Edge count per type; an edge carrying several types counts once per type.
    pub fn type_counts(&self) -> BTreeMap<EdgeType, usize> {
        let mut out = BTreeMap::new();
        for t in self.edges.values() {
            for ty in t.iter() {
                *out.entry(ty).or_default() += 1;
            }
        }
        out
    }

    /// Dense adjacency view for the iterative algorithms.
    pub fn index(&self) -> NetworkIndex {
        NetworkIndex::new(self.nodes.iter().copied(), self.edges.keys().map(|&(a, b)| (a, b)))
    }
}

/// Compact adjacency lists over dense node positions (ascending question id).
#[derive(Clone, Debug)]
pub struct NetworkIndex {
    pub ids: Vec<QuestionId>,
    pub pos: HashMap<QuestionId, usize>,
    pub out: Vec<Vec<usize>>,
    pub inn: Vec<Vec<usize>>,
}

impl NetworkIndex {
    pub fn new(
        nodes: impl IntoIterator<Item = QuestionId>,
        edges: impl IntoIterator<Item = (QuestionId, QuestionId)>,
    ) -> NetworkIndex {
        let ids: Vec<QuestionId> = nodes.into_iter().collect();
        let pos: HashMap<QuestionId, usize> = ids.iter().enumerate().map(|(i, &q)| (q, i)).collect();
        let mut out = vec![Vec::new(); ids.len()];
        let mut inn = vec![Vec::new(); ids.len()];
        for (a, b) in edges {
            let (i, j) = (pos[&a], pos[&b]);
            out[i].push(j);
            inn[j].push(i);
        }
        NetworkIndex { ids, pos, out, inn }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}
