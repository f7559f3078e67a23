//! Storage allocation and subpacket placement.
//!
//! Each file is split into one subpacket per admissible `t`-tuple of virtual
//! caches, where a tuple is admissible when no two of its virtual caches
//! belong to the same physical cache. A physical cache stores every subpacket
//! whose label contains at least one of its virtual caches, so a label is
//! stored exactly `t` times and cache `λ` ends up holding the fraction
//!
//! ```text
//! γ_λ = base[λ] · e_{t-1}(base without λ) / e_t(base)
//! ```
//!
//! of the library, where `e_k` is the `k`-th elementary symmetric polynomial.

use std::collections::HashMap;
use std::fmt;

use num_bigint::BigUint;
use num_traits::ToPrimitive;

use crate::error::{Error, Result};
use crate::exact::{self, Rational};
use crate::model::CacheLayout;

/// Default cap on the number of tuples materialized by enumeration.
pub const DEFAULT_MAX_TUPLES: u64 = 10_000_000;

/// Strictly increasing virtual-cache indices with pairwise-distinct owners.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SubpacketLabel(Vec<usize>);

impl SubpacketLabel {
    pub fn new(mut virtual_caches: Vec<usize>) -> Self {
        virtual_caches.sort_unstable();
        SubpacketLabel(virtual_caches)
    }

    pub fn virtual_caches(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, virtual_cache: usize) -> bool {
        self.0.binary_search(&virtual_cache).is_ok()
    }

    /// The label with entry `position` removed.
    pub fn without_position(&self, position: usize) -> SubpacketLabel {
        let mut rest = self.0.clone();
        rest.remove(position);
        SubpacketLabel(rest)
    }

    pub fn owners(&self, layout: &CacheLayout) -> Vec<usize> {
        self.0.iter().map(|&v| layout.owner_of(v)).collect()
    }
}

impl fmt::Display for SubpacketLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_dashed(f, &self.0)
    }
}

pub(crate) fn write_dashed(f: &mut impl fmt::Write, zero_based: &[usize]) -> fmt::Result {
    for (i, v) in zero_based.iter().enumerate() {
        if i > 0 {
            f.write_char('-')?;
        }
        write!(f, "{}", v + 1)?;
    }
    Ok(())
}

/// Number of admissible `size`-tuples: `e_size(base)`.
pub fn tuple_count(layout: &CacheLayout, size: usize) -> BigUint {
    exact::elementary_symmetric(layout.base(), size)
}

/// Subpacketization `S`: the number of subpackets per file.
pub fn subpacketization(layout: &CacheLayout, t: usize) -> BigUint {
    tuple_count(layout, t)
}

/// All admissible `size`-tuples in lexicographic order.
///
/// Fails if `size` is not in `[1, Λ]` or the family has more than
/// `max_tuples` members.
pub fn enumerate_tuples(
    layout: &CacheLayout,
    size: usize,
    max_tuples: u64,
) -> Result<Vec<SubpacketLabel>> {
    if size == 0 || size > layout.caches() {
        return Err(Error::SizeExceedsCaches {
            size,
            caches: layout.caches(),
        });
    }
    let count = tuple_count(layout, size);
    let count = match count.to_u64() {
        Some(c) if c <= max_tuples => c,
        _ => {
            return Err(Error::EnumerationTooLarge {
                what: "tuple enumeration",
                count,
                cap: max_tuples,
            })
        }
    };
    let mut out = Vec::with_capacity(count as usize);
    let mut prefix = Vec::with_capacity(size);
    extend_tuples(layout, size, 0, &mut prefix, &mut out);
    debug_assert_eq!(out.len() as u64, count);
    Ok(out)
}

// Virtual caches are numbered in cache order, so distinct owners in an
// increasing tuple means strictly increasing owners.
fn extend_tuples(
    layout: &CacheLayout,
    size: usize,
    first_cache: usize,
    prefix: &mut Vec<usize>,
    out: &mut Vec<SubpacketLabel>,
) {
    if prefix.len() == size {
        out.push(SubpacketLabel(prefix.clone()));
        return;
    }
    let remaining = size - prefix.len();
    let caches = layout.caches();
    if caches < first_cache + remaining {
        return;
    }
    for cache in first_cache..=caches - remaining {
        for v in layout.virtual_range(cache) {
            prefix.push(v);
            extend_tuples(layout, size, cache + 1, prefix, out);
            prefix.pop();
        }
    }
}

/// Normalized cache capacities, one exact fraction per physical cache.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AllocationVector(Vec<Rational>);

impl AllocationVector {
    pub fn fractions(&self) -> &[Rational] {
        &self.0
    }

    pub fn total(&self) -> Rational {
        self.0.iter().sum()
    }
}

/// Storage allocation from the closed form (no enumeration).
pub fn storage_allocation(layout: &CacheLayout, t: usize) -> AllocationVector {
    let base = layout.base();
    let total = exact::elementary_symmetric(base, t);
    let gamma = (0..base.len())
        .map(|cache| {
            let others: Vec<u64> = base
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != cache)
                .map(|(_, &v)| v)
                .collect();
            let containing = exact::elementary_symmetric(&others, t - 1) * base[cache];
            exact::ratio(containing, total.clone())
        })
        .collect();
    AllocationVector(gamma)
}

/// Which subpackets every physical cache stores.
#[derive(Debug, Clone)]
pub struct PlacementMap {
    budget: usize,
    files: u64,
    tuples: Vec<SubpacketLabel>,
    index: HashMap<SubpacketLabel, usize>,
    per_cache: Vec<Vec<usize>>,
}

impl PlacementMap {
    /// Number of subpackets per file.
    pub fn subpacketization(&self) -> usize {
        self.tuples.len()
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn files(&self) -> u64 {
        self.files
    }

    /// Subpacket labels in lexicographic order; positions are tuple indices.
    pub fn tuples(&self) -> &[SubpacketLabel] {
        &self.tuples
    }

    pub fn index_of(&self, label: &SubpacketLabel) -> Option<usize> {
        self.index.get(label).copied()
    }

    /// Sorted tuple indices stored (for every file) at `cache`.
    pub fn stored_at(&self, cache: usize) -> &[usize] {
        &self.per_cache[cache]
    }

    pub fn caches(&self) -> usize {
        self.per_cache.len()
    }

    /// Physical caches holding tuple `index`.
    pub fn holders(&self, index: usize) -> Vec<usize> {
        (0..self.per_cache.len())
            .filter(|&c| self.per_cache[c].binary_search(&index).is_ok())
            .collect()
    }

    /// Number of subpackets (across all files) stored at `cache`.
    pub fn stored_subpackets(&self, cache: usize) -> u64 {
        self.files * self.per_cache[cache].len() as u64
    }

    /// `γ` obtained by counting stored subpackets: `|Z_λ| / (N·S)`.
    pub fn allocation(&self) -> AllocationVector {
        let denom = self.files * self.tuples.len() as u64;
        AllocationVector(
            (0..self.per_cache.len())
                .map(|c| {
                    exact::ratio(
                        BigUint::from(self.stored_subpackets(c)),
                        BigUint::from(denom),
                    )
                })
                .collect(),
        )
    }

    /// One line per tuple: `index,tuple,owning-caches`, all 1-based.
    pub fn write_table<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        for (i, label) in self.tuples.iter().enumerate() {
            let mut holders = String::new();
            write_dashed(&mut holders, &self.holders(i)).expect("string write");
            writeln!(out, "{},{},{}", i + 1, label, holders)?;
        }
        Ok(())
    }
}

/// Builds the placement for `files` files with budget `t`.
pub fn build_placement(
    layout: &CacheLayout,
    t: usize,
    files: u64,
    max_tuples: u64,
) -> Result<PlacementMap> {
    let tuples = enumerate_tuples(layout, t, max_tuples)?;
    let mut per_cache = vec![Vec::new(); layout.caches()];
    for (i, label) in tuples.iter().enumerate() {
        // owners are strictly increasing, so each cache is pushed at most once
        for owner in label.owners(layout) {
            per_cache[owner].push(i);
        }
    }
    let index = tuples
        .iter()
        .cloned()
        .enumerate()
        .map(|(i, l)| (l, i))
        .collect();
    Ok(PlacementMap {
        budget: t,
        files,
        tuples,
        index,
        per_cache,
    })
}
