//! Id-keyed dense vector store and its `EMB1` on-disk format.
//!
//! Layout: magic `EMB1`, u32 LE dimension, u64 LE count, then `count`
//! records of (u64 LE id, dimension x f32 LE). Records are sorted by id,
//! so writing is deterministic.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::binio;
use crate::corpus::ArticleId;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    dim: usize,
    ids: Vec<ArticleId>,
    data: Vec<f32>,
    index: HashMap<ArticleId, usize>,
}

impl EmbeddingStore {
    /// Builds a store from (id, vector) rows; rows are sorted by id.
    /// Errors on duplicate ids or inconsistent dimensions.
    pub fn from_rows(dim: usize, rows: impl IntoIterator<Item = (ArticleId, Vec<f32>)>) -> Result<Self> {
        let mut rows: Vec<(ArticleId, Vec<f32>)> = rows.into_iter().collect();
        rows.sort_by_key(|&(id, _)| id);
        let mut ids = Vec::with_capacity(rows.len());
        let mut data = Vec::with_capacity(rows.len() * dim);
        let mut index = HashMap::with_capacity(rows.len());
        for (id, vec) in rows {
            if vec.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: vec.len(),
                });
            }
            if index.insert(id, ids.len()).is_some() {
                return Err(Error::Format(format!("duplicate id {id} in embedding store")));
            }
            ids.push(id);
            data.extend_from_slice(&vec);
        }
        Ok(EmbeddingStore { dim, ids, data, index })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Ids in ascending order.
    pub fn ids(&self) -> &[ArticleId] {
        &self.ids
    }

    pub fn contains(&self, id: ArticleId) -> bool {
        self.index.contains_key(&id)
    }

    pub fn get(&self, id: ArticleId) -> Option<&[f32]> {
        self.index.get(&id).map(|&row| self.row(row))
    }

    pub fn row(&self, row: usize) -> &[f32] {
        &self.data[row * self.dim..(row + 1) * self.dim]
    }

    pub fn id_at(&self, row: usize) -> ArticleId {
        self.ids[row]
    }

    pub fn iter(&self) -> impl Iterator<Item = (ArticleId, &[f32])> + '_ {
        self.ids.iter().enumerate().map(|(row, &id)| (id, self.row(row)))
    }

    /// Scales every row to unit L2 norm. Rows whose norm is already within
    /// 1e-6 of one (or exactly zero) are left untouched, so stores that are
    /// unit-normalized by construction survive bit-for-bit.
    pub fn normalize(&mut self) {
        for row in 0..self.ids.len() {
            let slice = &mut self.data[row * self.dim..(row + 1) * self.dim];
            let norm_sq: f32 = slice.iter().map(|v| v * v).sum();
            if norm_sq == 0.0 || (norm_sq - 1.0).abs() < 1e-6 {
                continue;
            }
            let inv = 1.0 / norm_sq.sqrt();
            for v in slice {
                *v *= inv;
            }
        }
    }

    pub fn write_to(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn write<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(b"EMB1")?;
        binio::write_u32(w, self.dim as u32)?;
        binio::write_u64(w, self.ids.len() as u64)?;
        for (row, &id) in self.ids.iter().enumerate() {
            binio::write_u64(w, id.0)?;
            binio::write_f32_slice(w, self.row(row))?;
        }
        Ok(())
    }

    pub fn read_from(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        Self::read(&mut r)
    }

    pub fn read<R: Read>(r: &mut R) -> Result<Self> {
        binio::expect_magic(r, b"EMB1")?;
        let dim = binio::read_u32(r, "dimension")? as usize;
        let count = binio::read_u64(r, "count")? as usize;
        let mut rows = Vec::with_capacity(count);
        for _ in 0..count {
            let id = ArticleId(binio::read_u64(r, "record id")?);
            let vec = binio::read_f32_vec(r, dim, "record vector")?;
            rows.push((id, vec));
        }
        binio::expect_eof(r)?;
        Self::from_rows(dim, rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn store(rows: &[(u64, Vec<f32>)]) -> EmbeddingStore {
        EmbeddingStore::from_rows(
            rows[0].1.len(),
            rows.iter().map(|(id, v)| (ArticleId(*id), v.clone())),
        )
        .unwrap()
    }

    #[test]
    fn lookup_by_id() {
        let s = store(&[(5, vec![1.0, 2.0]), (3, vec![3.0, 4.0])]);
        assert_eq!(s.get(ArticleId(3)), Some(&[3.0, 4.0][..]));
        assert_eq!(s.get(ArticleId(5)), Some(&[1.0, 2.0][..]));
        assert_eq!(s.get(ArticleId(9)), None);
        assert_eq!(s.ids(), &[ArticleId(3), ArticleId(5)]);
    }

    #[test]
    fn duplicate_id_rejected() {
        let rows = vec![(ArticleId(1), vec![0.0]), (ArticleId(1), vec![1.0])];
        assert!(EmbeddingStore::from_rows(1, rows).is_err());
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let rows = vec![(ArticleId(1), vec![0.0, 1.0])];
        assert!(EmbeddingStore::from_rows(3, rows).is_err());
    }

    #[test]
    fn normalize_makes_unit_rows() {
        let mut s = store(&[(1, vec![3.0, 4.0])]);
        s.normalize();
        let row = s.get(ArticleId(1)).unwrap();
        let norm: f32 = row.iter().map(|v| v * v).sum::<f32>().sqrt();
        assert!((norm - 1.0).abs() < 1e-6);
        assert!((row[0] - 0.6).abs() < 1e-6);
    }

    #[test]
    fn normalize_leaves_unit_rows_untouched() {
        let mut s = store(&[(1, vec![0.6, 0.8])]);
        let before = s.get(ArticleId(1)).unwrap().to_vec();
        s.normalize();
        assert_eq!(s.get(ArticleId(1)).unwrap(), &before[..]);
    }

    #[test]
    fn rejects_wrong_magic() {
        let mut r = Cursor::new(b"NOPE\x00\x00\x00\x00".to_vec());
        assert!(EmbeddingStore::read(&mut r).is_err());
    }

    #[test]
    fn rejects_truncated_file() {
        let s = store(&[(1, vec![1.0, 0.0]), (2, vec![0.0, 1.0])]);
        let mut bytes = Vec::new();
        s.write(&mut bytes).unwrap();
        bytes.truncate(bytes.len() - 3);
        assert!(EmbeddingStore::read(&mut Cursor::new(bytes)).is_err());
    }

    proptest::proptest! {
        #[test]
        fn write_read_write_is_byte_identical(
            rows in proptest::collection::btree_map(0u64..1000, proptest::collection::vec(-10.0f32..10.0, 4), 0..20)
        ) {
            let s = EmbeddingStore::from_rows(4, rows.into_iter().map(|(id, v)| (ArticleId(id), v))).unwrap();
            let mut bytes1 = Vec::new();
            s.write(&mut bytes1).unwrap();
            let s2 = EmbeddingStore::read(&mut Cursor::new(bytes1.clone())).unwrap();
            let mut bytes2 = Vec::new();
            s2.write(&mut bytes2).unwrap();
            proptest::prop_assert_eq!(bytes1, bytes2);
        }
    }
}
