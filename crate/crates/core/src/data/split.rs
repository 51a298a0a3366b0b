use rand::seq::index;

use crate::data::{BagCollection, Provenance};
use crate::error::{Error, Result};
use crate::seed::{child_seed, rng};

/// Bag-level train/test split with optional per-bag subsampling (without
/// replacement, keeping the original row order).
pub fn split_collection(
    collection: &BagCollection,
    n_test_bags: usize,
    per_bag_subsample: Option<usize>,
    seed: u64,
) -> Result<(BagCollection, BagCollection)> {
    let n = collection.len();
    if n_test_bags >= n && n_test_bags > 0 {
        return Err(Error::invalid(format!("cannot hold out {n_test_bags} of {n} bags")));
    }
    let mut r = rng(child_seed(seed, "split", 0));
    let mut is_test = vec![false; n];
    for i in index::sample(&mut r, n, n_test_bags) {
        is_test[i] = true;
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (i, bag) in collection.bags().iter().enumerate() {
        let bag = match per_bag_subsample {
            None => bag.clone(),
            Some(k) => {
                if k == 0 || k > bag.len() {
                    return Err(Error::invalid(format!(
                        "cannot subsample {k} points from bag `{}` of size {}",
                        bag.task_id(),
                        bag.len()
                    )));
                }
                let mut br = rng(child_seed(seed, "subsample", i as u64));
                let mut rows = index::sample(&mut br, bag.len(), k).into_vec();
                rows.sort_unstable();
                bag.select(&rows)?
            }
        };
        if is_test[i] {
            test.push(bag);
        } else {
            train.push(bag);
        }
    }
    let prov = |part: &str| Provenance {
        source: format!("{} [{part}]", collection.provenance().source),
        seed: Some(seed),
    };
    Ok((
        BagCollection::with_dim(train, collection.dim(), prov("train"))?,
        BagCollection::with_dim(test, collection.dim(), prov("test"))?,
    ))
}
