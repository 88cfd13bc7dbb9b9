//! Row-major linearization of k-dimensional, 1-based cell coordinates.
//!
//! Dimension 1 varies fastest: incrementing `i_1` moves to the next logical
//! position, and `i_k` is the most significant coordinate. Logical positions
//! are 1-based and run over `1..=c_1·…·c_k`.

use crate::error::{Error, Result};

/// 1-based position of a cell in the linearized array.
pub type LogicalIndex = u64;

/// Validated per-dimension cardinalities `c_1..c_k` with a cached cell total.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Shape {
    cards: Vec<u32>,
    total: u64,
}

impl Shape {
    pub fn new(cards: Vec<u32>) -> Result<Self> {
        if cards.is_empty() {
            return Err(Error::param("a shape needs at least one dimension"));
        }
        let mut total: u64 = 1;
        for (dim, &c) in cards.iter().enumerate() {
            if c == 0 {
                return Err(Error::param(format!("dimension {} has cardinality 0", dim + 1)));
            }
            total = total.checked_mul(u64::from(c)).ok_or_else(|| {
                Error::Capacity(format!("cell count of {cards:?} does not fit in 64 bits"))
            })?;
        }
        Ok(Shape { cards, total })
    }

    pub fn cards(&self) -> &[u32] {
        &self.cards
    }

    pub fn dims(&self) -> usize {
        self.cards.len()
    }

    /// Total number of cells, `∏c_i`.
    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn linearize(&self, indices: &[u32]) -> Result<LogicalIndex> {
        check_indices(indices, &self.cards)?;
        Ok(horner(indices, &self.cards))
    }

    pub fn delinearize(&self, i: LogicalIndex) -> Result<Vec<u32>> {
        let mut out = vec![0; self.cards.len()];
        self.delinearize_into(i, &mut out)?;
        Ok(out)
    }

    /// Writes the coordinates of `i` into `out`, which must have length k.
    pub fn delinearize_into(&self, i: LogicalIndex, out: &mut [u32]) -> Result<()> {
        if i == 0 || i > self.total {
            return Err(Error::OutOfRange {
                what: "logical index",
                value: i,
                max: self.total,
            });
        }
        assert_eq!(out.len(), self.cards.len(), "coordinate buffer has wrong arity");
        let mut rest = i - 1;
        for (slot, &c) in out.iter_mut().zip(&self.cards) {
            let c = u64::from(c);
            *slot = (rest % c) as u32 + 1;
            rest /= c;
        }
        Ok(())
    }
}

fn check_indices(indices: &[u32], cards: &[u32]) -> Result<()> {
    if indices.len() != cards.len() {
        return Err(Error::MalformedInput(format!(
            "expected {} coordinates, got {}",
            cards.len(),
            indices.len()
        )));
    }
    for (&i, &c) in indices.iter().zip(cards) {
        if i == 0 || i > c {
            return Err(Error::OutOfRange {
                what: "coordinate",
                value: u64::from(i),
                max: u64::from(c),
            });
        }
    }
    Ok(())
}

// (((i_k − 1)c_{k−1} + i_{k−1} − 1)…)c_1 + i_1, with k − 1 multiplications.
// Callers guarantee the result fits.
fn horner(indices: &[u32], cards: &[u32]) -> u64 {
    let k = indices.len();
    let mut acc = u64::from(indices[k - 1]) - 1;
    for j in (0..k - 1).rev() {
        acc = acc * u64::from(cards[j]) + u64::from(indices[j]) - 1;
    }
    acc + 1
}

/// Maps 1-based coordinates to a 1-based logical index.
pub fn linearize(indices: &[u32], cards: &[u32]) -> Result<LogicalIndex> {
    check_indices(indices, cards)?;
    if cards.is_empty() {
        return Err(Error::param("a shape needs at least one dimension"));
    }
    let mut acc = u64::from(indices[indices.len() - 1]) - 1;
    for j in (0..indices.len() - 1).rev() {
        acc = acc
            .checked_mul(u64::from(cards[j]))
            .and_then(|v| v.checked_add(u64::from(indices[j]) - 1))
            .ok_or_else(|| Error::Capacity("logical index overflows 64 bits".into()))?;
    }
    acc.checked_add(1)
        .ok_or_else(|| Error::Capacity("logical index overflows 64 bits".into()))
}

/// Inverse of [`linearize`].
pub fn delinearize(i: LogicalIndex, cards: &[u32]) -> Result<Vec<u32>> {
    Shape::new(cards.to_vec())?.delinearize(i)
}
