//! Item-to-records inverted index and support queries.

use smallvec::SmallVec;

use crate::dataset::{Dataset, ItemId, KApps, Record};
use crate::error::{Error, Result};
use crate::intersect::Scratch;

/// Records containing a queried subset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Support {
    pub count: usize,
    /// Ascending record indices.
    pub users: Vec<u32>,
}

/// For each item, the ascending indices of the records that contain it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InvertedIndex {
    postings: Vec<Vec<u32>>,
}

impl InvertedIndex {
    pub fn build(data: &Dataset) -> Self {
        let mut postings = vec![Vec::new(); data.num_items()];
        for (r, rec) in data.records().iter().enumerate() {
            for id in rec.items() {
                postings[id.index()].push(r as u32);
            }
        }
        InvertedIndex { postings }
    }

    pub fn num_items(&self) -> usize {
        self.postings.len()
    }

    pub fn postings(&self, item: ItemId) -> Result<&[u32]> {
        self.postings
            .get(item.index())
            .map(Vec::as_slice)
            .ok_or(Error::UnknownItem(item.0))
    }

    /// Length of the longest posting list (users of the most popular item).
    pub fn max_posting_len(&self) -> usize {
        self.postings.iter().map(Vec::len).max().unwrap_or(0)
    }

    fn check(&self, items: &[ItemId]) -> Result<()> {
        match items.iter().find(|i| i.index() >= self.postings.len()) {
            Some(i) => Err(Error::UnknownItem(i.0)),
            None => Ok(()),
        }
    }

    /// Records containing every item of `x`.
    pub fn support(&self, x: &KApps) -> Result<Support> {
        let mut scratch = Scratch::new();
        let users = self.users_of(x.items(), &mut scratch)?.to_vec();
        Ok(Support { count: users.len(), users })
    }

    /// Allocation-free support query over an arbitrary item slice. An empty
    /// slice yields no users.
    pub fn users_of<'s>(&self, items: &[ItemId], scratch: &'s mut Scratch) -> Result<&'s [u32]> {
        self.check(items)?;
        Ok(self.users_unchecked(items, scratch))
    }

    pub(crate) fn users_unchecked<'s>(&self, items: &[ItemId], scratch: &'s mut Scratch) -> &'s [u32] {
        // K is small; keep the list of lists on the stack in the sampling loop
        let lists: SmallVec<[&[u32]; 16]> =
            items.iter().map(|i| self.postings[i.index()].as_slice()).collect();
        scratch.intersect_all(&lists)
    }

    /// Inverts the postings back into records.
    pub fn reconstruct(&self, num_records: usize) -> Vec<Record> {
        let mut items = vec![Vec::new(); num_records];
        for (i, p) in self.postings.iter().enumerate() {
            for &r in p {
                items[r as usize].push(ItemId(i as u32));
            }
        }
        items
            .into_iter()
            .filter_map(|v| Record::new(v).ok())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toy() -> Dataset {
        Dataset::from_id_records(vec![vec![1, 2, 3], vec![2, 3], vec![3]]).unwrap()
    }

    #[test]
    fn postings_by_construction() {
        let d = Dataset::from_id_records(vec![vec![0, 1], vec![1]]).unwrap();
        let idx = InvertedIndex::build(&d);
        assert_eq!(idx.postings(ItemId(0)).unwrap(), &[0]);
        assert_eq!(idx.postings(ItemId(1)).unwrap(), &[0, 1]);

        let single = Dataset::from_id_records(vec![vec![0, 1, 2]]).unwrap();
        let idx = InvertedIndex::build(&single);
        assert!((0..3).all(|i| idx.postings(ItemId(i)).unwrap() == [0]));
    }

    #[test]
    fn support_on_toy() {
        let d = toy();
        let idx = InvertedIndex::build(&d);
        let id = |t: &str| d.id(t).unwrap();
        let x = KApps::new(vec![id("2"), id("3")]).unwrap();
        assert_eq!(idx.support(&x).unwrap(), Support { count: 2, users: vec![0, 1] });
        let x = KApps::new(vec![id("3")]).unwrap();
        assert_eq!(idx.support(&x).unwrap().count, 3);
        let foreign = KApps::new(vec![id("1"), id("2"), id("3"), ItemId(99)]).unwrap();
        assert_eq!(idx.support(&foreign).unwrap_err(), Error::UnknownItem(99));
    }

    #[test]
    fn many_items_spill() {
        let rec: Vec<u32> = (0..40).collect();
        let d = Dataset::from_id_records(vec![rec.clone(), rec[..30].to_vec()]).unwrap();
        let idx = InvertedIndex::build(&d);
        let all = KApps::from_ids(0..20).unwrap();
        assert_eq!(idx.support(&all).unwrap().count, 2);
        let tail = KApps::from_ids(10..35).unwrap();
        assert_eq!(idx.support(&tail).unwrap().users, vec![0]);
    }

    fn arb_records() -> impl Strategy<Value = Vec<Vec<u32>>> {
        prop::collection::vec(prop::collection::btree_set(0u32..25, 1..8), 1..60)
            .prop_map(|rs| rs.into_iter().map(|s| s.into_iter().collect()).collect())
    }

    proptest! {
        #[test]
        fn support_matches_scan(records in arb_records(), pick in 0usize..1000, mask in 1u32..256) {
            let d = Dataset::from_label_records(records, |l| format!("i{l}")).unwrap();
            let idx = InvertedIndex::build(&d);
            let rec = d.record(pick % d.len()).items();
            let sub: Vec<ItemId> = rec.iter().enumerate()
                .filter(|(j, _)| mask & (1 << (j % 8)) != 0)
                .map(|(_, &i)| i).collect();
            prop_assume!(!sub.is_empty());
            let x = KApps::new(sub.clone()).unwrap();
            let scan: Vec<u32> = d.records().iter().enumerate()
                .filter(|(_, r)| r.is_superset_of(&sub)).map(|(i, _)| i as u32).collect();
            let s = idx.support(&x).unwrap();
            prop_assert_eq!(s.count, scan.len());
            prop_assert_eq!(s.users, scan);
        }

        #[test]
        fn inversion_reconstructs(records in arb_records()) {
            let d = Dataset::from_label_records(records, |l| format!("i{l}")).unwrap();
            let idx = InvertedIndex::build(&d);
            let total: usize = (0..idx.num_items()).map(|i| idx.postings(ItemId(i as u32)).unwrap().len()).sum();
            prop_assert_eq!(total, d.records().iter().map(Record::len).sum::<usize>());
            prop_assert_eq!(idx.reconstruct(d.len()), d.records().to_vec());
        }
    }
}
