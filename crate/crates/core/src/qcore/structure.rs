use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One tensor factor: a labelled party with its local dimension.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Party {
    pub label: String,
    pub dim: usize,
}

/// Ordered list of parties. The order is the Kronecker order of every
/// operator carrying this structure; relabelling and reordering are always
/// explicit.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<Party>", into = "Vec<Party>")]
pub struct TensorStructure {
    parties: Vec<Party>,
}

impl TryFrom<Vec<Party>> for TensorStructure {
    type Error = Error;
    fn try_from(parties: Vec<Party>) -> Result<Self> {
        TensorStructure::new(parties)
    }
}

impl From<TensorStructure> for Vec<Party> {
    fn from(s: TensorStructure) -> Self {
        s.parties
    }
}

impl TensorStructure {
    pub fn new(parties: Vec<Party>) -> Result<Self> {
        if parties.is_empty() {
            return Err(Error::InvalidStructure("no parties".into()));
        }
        for (i, p) in parties.iter().enumerate() {
            if p.dim == 0 {
                return Err(Error::InvalidStructure(format!("party `{}` has dimension 0", p.label)));
            }
            if parties[..i].iter().any(|q| q.label == p.label) {
                return Err(Error::InvalidStructure(format!("duplicate label `{}`", p.label)));
            }
        }
        Ok(TensorStructure { parties })
    }

    pub fn from_pairs(pairs: &[(&str, usize)]) -> Result<Self> {
        Self::new(
            pairs
                .iter()
                .map(|(l, d)| Party { label: (*l).to_string(), dim: *d })
                .collect(),
        )
    }

    /// Single party.
    pub fn single(label: &str, dim: usize) -> Self {
        TensorStructure { parties: vec![Party { label: label.to_string(), dim: dim.max(1) }] }
    }

    pub fn parties(&self) -> &[Party] {
        &self.parties
    }

    pub fn len(&self) -> usize {
        self.parties.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parties.is_empty()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.parties.iter().map(|p| p.dim).collect()
    }

    pub fn labels(&self) -> Vec<&str> {
        self.parties.iter().map(|p| p.label.as_str()).collect()
    }

    pub fn total_dim(&self) -> usize {
        self.parties.iter().map(|p| p.dim).product()
    }

    pub fn index_of(&self, label: &str) -> Result<usize> {
        self.parties
            .iter()
            .position(|p| p.label == label)
            .ok_or_else(|| Error::UnknownParty(label.to_string()))
    }

    pub fn contains(&self, label: &str) -> bool {
        self.parties.iter().any(|p| p.label == label)
    }

    /// Positions of `labels`, in declaration order of this structure.
    pub fn positions(&self, labels: &[&str]) -> Result<Vec<usize>> {
        for l in labels {
            self.index_of(l)?;
        }
        Ok((0..self.parties.len())
            .filter(|&i| labels.contains(&self.parties[i].label.as_str()))
            .collect())
    }

    pub fn select(&self, positions: &[usize]) -> TensorStructure {
        TensorStructure { parties: positions.iter().map(|&i| self.parties[i].clone()).collect() }
    }

    /// Concatenation. Colliding labels of `other` get primes appended until unique.
    pub fn concat(&self, other: &TensorStructure) -> TensorStructure {
        let mut parties = self.parties.clone();
        for p in &other.parties {
            let mut label = p.label.clone();
            while parties.iter().any(|q| q.label == label) {
                label.push('\'');
            }
            parties.push(Party { label, dim: p.dim });
        }
        TensorStructure { parties }
    }

    /// Same dimensions, new labels.
    pub fn relabel(&self, labels: &[&str]) -> Result<TensorStructure> {
        if labels.len() != self.parties.len() {
            return Err(Error::InvalidStructure(format!(
                "relabel needs {} labels, got {}",
                self.parties.len(),
                labels.len()
            )));
        }
        TensorStructure::new(
            self.parties
                .iter()
                .zip(labels)
                .map(|(p, l)| Party { label: (*l).to_string(), dim: p.dim })
                .collect(),
        )
    }

    /// Same party dimensions in the same order.
    pub fn same_shape(&self, other: &TensorStructure) -> bool {
        self.dims() == other.dims()
    }
}

/// Mixed-radix digits of a flat index, most significant party first.
#[inline]
pub(crate) fn digits(mut index: usize, dims: &[usize], out: &mut [usize]) {
    for k in (0..dims.len()).rev() {
        out[k] = index % dims[k];
        index /= dims[k];
    }
}

#[inline]
pub(crate) fn flat(digits: &[usize], dims: &[usize]) -> usize {
    let mut idx = 0;
    for (d, n) in digits.iter().zip(dims) {
        idx = idx * n + d;
    }
    idx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicate_labels_are_rejected() {
        assert!(TensorStructure::from_pairs(&[("A", 2), ("A", 2)]).is_err());
    }

    #[test]
    fn concat_primes_colliding_labels() {
        let a = TensorStructure::from_pairs(&[("A", 2), ("B", 2)]).unwrap();
        let s = a.concat(&a);
        assert_eq!(s.labels(), vec!["A", "B", "A'", "B'"]);
        assert_eq!(s.total_dim(), 16);
    }

    #[test]
    fn digits_and_flat_are_inverse() {
        let dims = [2, 3, 2];
        let mut d = [0; 3];
        for i in 0..12 {
            digits(i, &dims, &mut d);
            assert_eq!(flat(&d, &dims), i);
        }
    }

    #[test]
    fn positions_follow_declaration_order() {
        let s = TensorStructure::from_pairs(&[("1", 2), ("A", 2), ("B", 2)]).unwrap();
        assert_eq!(s.positions(&["B", "1"]).unwrap(), vec![0, 2]);
        assert!(s.positions(&["C"]).is_err());
    }
}
