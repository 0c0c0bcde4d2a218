use std::fmt;

/// Sorted `(index, value)` pairs with strictly increasing indices, no
/// explicit zeros and only finite values.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SparseVector {
    indices: Vec<u32>,
    values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SparseError {
    #[error("indices not strictly increasing at position {0}")]
    Unsorted(usize),
    #[error("non-finite value at index {0}")]
    NonFinite(u32),
    #[error("index and value lists differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
}

impl SparseVector {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Builds from parallel index/value lists. Zero values are dropped.
    pub fn new(indices: Vec<u32>, values: Vec<f64>) -> Result<Self, SparseError> {
        if indices.len() != values.len() {
            return Err(SparseError::LengthMismatch(indices.len(), values.len()));
        }
        for (pos, w) in indices.windows(2).enumerate() {
            if w[0] >= w[1] {
                return Err(SparseError::Unsorted(pos + 1));
            }
        }
        if let Some((&i, _)) = indices.iter().zip(&values).find(|(_, v)| !v.is_finite()) {
            return Err(SparseError::NonFinite(i));
        }
        let mut v = SparseVector { indices, values };
        v.drop_zeros();
        Ok(v)
    }

    /// Builds from unordered pairs; duplicate indices are summed.
    pub fn from_pairs<I>(pairs: I) -> Result<Self, SparseError>
    where
        I: IntoIterator<Item = (u32, f64)>,
    {
        let mut pairs: Vec<(u32, f64)> = pairs.into_iter().collect();
        pairs.sort_by_key(|p| p.0);
        let mut indices: Vec<u32> = Vec::with_capacity(pairs.len());
        let mut values: Vec<f64> = Vec::with_capacity(pairs.len());
        for (i, v) in pairs {
            if indices.last() == Some(&i) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(i);
                values.push(v);
            }
        }
        Self::new(indices, values)
    }

    pub(crate) fn from_sorted_unchecked(indices: Vec<u32>, values: Vec<f64>) -> Self {
        debug_assert!(indices.windows(2).all(|w| w[0] < w[1]));
        let mut v = SparseVector { indices, values };
        v.drop_zeros();
        v
    }

    fn drop_zeros(&mut self) {
        if self.values.iter().all(|&v| v != 0.0) {
            return;
        }
        let (indices, values) = self
            .indices
            .iter()
            .zip(&self.values)
            .filter(|(_, &v)| v != 0.0)
            .map(|(&i, &v)| (i, v))
            .unzip();
        self.indices = indices;
        self.values = values;
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    /// One past the largest index, or 0 when empty.
    pub fn min_dim(&self) -> usize {
        self.indices.last().map_or(0, |&i| i as usize + 1)
    }

    pub fn get(&self, index: u32) -> Option<f64> {
        self.indices.binary_search(&index).ok().map(|pos| self.values[pos])
    }

    pub fn squared_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    pub fn norm(&self) -> f64 {
        self.squared_norm().sqrt()
    }

    /// Dot product with a dense vector. Indices past its end are an error.
    pub fn dot_dense(&self, dense: &[f64]) -> Option<f64> {
        if self.min_dim() > dense.len() {
            return None;
        }
        Some(self.iter().map(|(i, v)| dense[i as usize] * v).sum())
    }

    pub fn scaled(&self, factor: f64) -> SparseVector {
        SparseVector::from_sorted_unchecked(self.indices.clone(), self.values.iter().map(|v| v * factor).collect())
    }

    /// Divides by the L2 norm; the empty vector stays empty.
    pub fn normalized(mut self) -> SparseVector {
        let norm = self.norm();
        if norm > 0.0 {
            for v in &mut self.values {
                *v /= norm;
            }
        }
        self
    }

    /// Appends an entry past every existing index.
    pub(crate) fn push(&mut self, index: u32, value: f64) {
        debug_assert!(self.indices.last().is_none_or(|&last| last < index));
        if value != 0.0 {
            self.indices.push(index);
            self.values.push(value);
        }
    }
}

impl fmt::Display for SparseVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (n, (i, v)) in self.iter().enumerate() {
            if n > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{i}:{v}")?;
        }
        Ok(())
    }
}
