//! Exhaustive frequent-itemset counting.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;

/// Every itemset of at most `max_size` items whose support
/// `count / records.len()` reaches `min_support`, with its count.
pub fn frequent_itemsets(
    records: &[Vec<String>],
    min_support: f64,
    max_size: usize,
) -> BTreeMap<BTreeSet<String>, usize> {
    let mut counts: BTreeMap<BTreeSet<String>, usize> = BTreeMap::new();
    for r in records {
        let items: Vec<&String> = r.iter().collect::<BTreeSet<_>>().into_iter().collect();
        assert!(items.len() < 32, "record too wide for subset enumeration");
        for mask in 1u32..(1 << items.len()) {
            if mask.count_ones() as usize > max_size {
                continue;
            }
            let set: BTreeSet<String> = (0..items.len())
                .filter(|k| mask & (1 << k) != 0)
                .map(|k| items[k].clone())
                .collect();
            *counts.entry(set).or_insert(0) += 1;
        }
    }
    let n = records.len() as f64;
    counts.retain(|_, c| *c as f64 / n >= min_support);
    counts
}

/// A corpus of up to `max_records` records over at most `max_items` item
/// names, each record holding one to six distinct items.
pub fn random_corpus(rng: &mut impl Rng, max_items: usize, max_records: usize) -> Vec<Vec<String>> {
    let universe = rng.gen_range(1..=max_items);
    let n = rng.gen_range(1..=max_records);
    (0..n)
        .map(|_| {
            let width = rng.gen_range(1..=6.min(universe));
            let mut items = BTreeSet::new();
            while items.len() < width {
                items.insert(format!("i{}", rng.gen_range(0..universe)));
            }
            items.into_iter().collect()
        })
        .collect()
}
