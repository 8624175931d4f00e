use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{ChanError, Result};

/// Index of a concept in a [`ConceptVocabulary`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ConceptId(pub usize);

/// Named concepts with one fixed embedding each.
#[derive(Debug, Clone, PartialEq)]
pub struct ConceptVocabulary {
    names: Vec<String>,
    index: HashMap<String, ConceptId>,
    embeddings: Vec<Vec<f64>>,
}

impl ConceptVocabulary {
    pub fn new(names: Vec<String>, embeddings: Vec<Vec<f64>>) -> Result<Self> {
        if names.is_empty() {
            return Err(ChanError::Validation("vocabulary is empty".into()));
        }
        if names.len() != embeddings.len() {
            return Err(ChanError::Validation(format!(
                "{} concepts but {} embeddings",
                names.len(),
                embeddings.len()
            )));
        }
        let dim = embeddings[0].len();
        if dim == 0 || embeddings.iter().any(|e| e.len() != dim) {
            return Err(ChanError::Validation("embeddings must share one positive dimension".into()));
        }
        if embeddings.iter().flatten().any(|v| !v.is_finite()) {
            return Err(ChanError::Validation("non-finite embedding value".into()));
        }
        let mut index = HashMap::with_capacity(names.len());
        for (i, name) in names.iter().enumerate() {
            if index.insert(name.clone(), ConceptId(i)).is_some() {
                return Err(ChanError::Validation(format!("duplicate concept `{name}`")));
            }
        }
        Ok(ConceptVocabulary { names, index, embeddings })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn embedding_dim(&self) -> usize {
        self.embeddings[0].len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, id: ConceptId) -> &str {
        &self.names[id.0]
    }

    pub fn id(&self, name: &str) -> Result<ConceptId> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| ChanError::UnknownConcept(name.to_string()))
    }

    pub fn embedding(&self, id: ConceptId) -> Result<&[f64]> {
        self.embeddings
            .get(id.0)
            .map(Vec::as_slice)
            .ok_or_else(|| ChanError::UnknownConcept(format!("#{}", id.0)))
    }

    pub fn embeddings(&self) -> &[Vec<f64>] {
        &self.embeddings
    }
}

/// An unordered pair of concepts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Query {
    pub first: ConceptId,
    pub second: ConceptId,
}

impl Query {
    pub fn new(a: ConceptId, b: ConceptId) -> Self {
        Query { first: a, second: b }
    }

    /// Same pair with the smaller id first; equal for both orders.
    pub fn canonical(self) -> Self {
        if self.first <= self.second {
            self
        } else {
            Query::new(self.second, self.first)
        }
    }

    pub fn concepts(self) -> [ConceptId; 2] {
        [self.first, self.second]
    }

    pub fn parse(s: &str, vocab: &ConceptVocabulary) -> Result<Self> {
        let (a, b) = s
            .split_once([',', '+'])
            .ok_or_else(|| ChanError::Validation(format!("query `{s}` is not of the form a,b")))?;
        Ok(Query::new(vocab.id(a.trim())?, vocab.id(b.trim())?))
    }

    pub fn names(self, vocab: &ConceptVocabulary) -> [String; 2] {
        [vocab.name(self.first).to_string(), vocab.name(self.second).to_string()]
    }

    pub fn display(self, vocab: &ConceptVocabulary) -> impl fmt::Display + '_ {
        QueryDisplay(self, vocab)
    }
}

struct QueryDisplay<'a>(Query, &'a ConceptVocabulary);

impl fmt::Display for QueryDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}+{}", self.1.name(self.0.first), self.1.name(self.0.second))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab() -> ConceptVocabulary {
        ConceptVocabulary::new(
            vec!["car".into(), "tree".into(), "sky".into()],
            vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.5, 0.5]],
        )
        .unwrap()
    }

    #[test]
    fn lookup_is_pure() {
        let v = vocab();
        assert_eq!(v.id("tree").unwrap(), v.id("tree").unwrap());
        assert_eq!(v.embedding(v.id("sky").unwrap()).unwrap(), &[0.5, 0.5]);
        assert!(matches!(v.id("boat"), Err(ChanError::UnknownConcept(_))));
    }

    #[test]
    fn query_parse_and_canonical() {
        let v = vocab();
        let q = Query::parse("sky, car", &v).unwrap();
        assert_eq!(q.canonical(), Query::parse("car+sky", &v).unwrap());
        assert_eq!(q.display(&v).to_string(), "sky+car");
    }

    #[test]
    fn duplicate_concepts_rejected() {
        assert!(ConceptVocabulary::new(vec!["a".into(), "a".into()], vec![vec![1.0], vec![2.0]]).is_err());
    }
}
