use crate::schema::{Record, Schema};

/// One-hot expansion of a record: one bit per category of every attribute.
pub fn mask_expand(record: &Record, schema: &Schema) -> Vec<bool> {
    let mut bits = vec![false; schema.boolean_width()];
    for (offset, &v) in schema.boolean_offsets().iter().zip(record.values()) {
        bits[offset + v] = true;
    }
    bits
}

/// Inverse of [`mask_expand`]; `None` unless every attribute block holds exactly one set bit.
pub fn mask_collapse(bits: &[bool], schema: &Schema) -> Option<Record> {
    if bits.len() != schema.boolean_width() {
        return None;
    }
    let mut values = Vec::with_capacity(schema.len());
    for (offset, attr) in schema.boolean_offsets().iter().zip(schema.attributes()) {
        let block = &bits[*offset..offset + attr.cardinality()];
        let mut set = block.iter().enumerate().filter(|(_, &b)| b);
        let (v, _) = set.next()?;
        if set.next().is_some() {
            return None;
        }
        values.push(v);
    }
    Some(Record::new(values))
}

/// Row-major table of boolean records of a fixed width.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BooleanDataset {
    width: usize,
    bits: Vec<bool>,
}

impl BooleanDataset {
    pub fn new(width: usize) -> Self {
        BooleanDataset { width, bits: Vec::new() }
    }

    pub fn from_rows(width: usize, rows: impl IntoIterator<Item = Vec<bool>>) -> Self {
        let mut out = BooleanDataset::new(width);
        for row in rows {
            out.push(&row);
        }
        out
    }

    pub fn push(&mut self, row: &[bool]) {
        assert_eq!(row.len(), self.width, "boolean row width");
        self.bits.extend_from_slice(row);
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        if self.width == 0 {
            0
        } else {
            self.bits.len() / self.width
        }
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn row(&self, i: usize) -> &[bool] {
        &self.bits[i * self.width..(i + 1) * self.width]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[bool]> {
        self.bits.chunks(self.width.max(1))
    }

    /// Counts of the `2^k` patterns over the given bit positions; bit `b`
    /// of a pattern index is the value at `positions[b]`.
    pub fn pattern_counts(&self, positions: &[usize]) -> Vec<f64> {
        let mut counts = vec![0.0; 1 << positions.len()];
        for row in self.rows() {
            let mut idx = 0;
            for (b, &p) in positions.iter().enumerate() {
                idx |= (row[p] as usize) << b;
            }
            counts[idx] += 1.0;
        }
        counts
    }

    /// Records by the number of the given positions they have set.
    pub fn overlap_counts(&self, positions: &[usize]) -> Vec<f64> {
        let mut counts = vec![0.0; positions.len() + 1];
        for row in self.rows() {
            counts[positions.iter().filter(|&&p| row[p]).count()] += 1.0;
        }
        counts
    }
}
