//! Generalized-birthday (k-tree) solver.
//!
//! Finds one entry per list such that `x_1 + … + x_{k-1} − x_k` satisfies
//! the chosen [`Relation`]. The tree has `m = log2 k` levels; each level
//! below the root joins list pairs on the next `⌊b/(1+m)⌋` low bits of the
//! signed running sum, and the root join checks the full relation.

use std::collections::HashMap;

use crate::AttackError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry<T> {
    pub value: u64,
    pub tag: T,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KSumInstance<T> {
    bits: u32,
    lists: Vec<Vec<Entry<T>>>,
}

impl<T> KSumInstance<T> {
    pub fn new(bits: u32, lists: Vec<Vec<Entry<T>>>) -> Result<Self, AttackError> {
        let k = lists.len();
        if k < 2 || !k.is_power_of_two() {
            return Err(AttackError::Precondition(format!(
                "k must be a power of two >= 2, got {k}"
            )));
        }
        if !(1..=48).contains(&bits) {
            return Err(AttackError::Precondition(format!(
                "width must be in 1..=48 bits, got {bits}"
            )));
        }
        if let Some(e) = lists.iter().flatten().find(|e| e.value >> bits != 0) {
            return Err(AttackError::Precondition(format!(
                "value {} does not fit in {bits} bits",
                e.value
            )));
        }
        Ok(KSumInstance { bits, lists })
    }

    pub fn from_values(bits: u32, lists: Vec<Vec<u64>>) -> Result<KSumInstance<()>, AttackError> {
        KSumInstance::new(
            bits,
            lists
                .into_iter()
                .map(|l| {
                    l.into_iter()
                        .map(|value| Entry { value, tag: () })
                        .collect()
                })
                .collect(),
        )
    }

    pub fn k(&self) -> usize {
        self.lists.len()
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn levels(&self) -> u32 {
        self.k().trailing_zeros()
    }

    /// Low bits cleared by each non-root level.
    pub fn bits_per_level(&self) -> u32 {
        self.bits / (1 + self.levels())
    }

    pub fn lists(&self) -> &[Vec<Entry<T>>] {
        &self.lists
    }

    pub fn entry(&self, list: usize, index: usize) -> &Entry<T> {
        &self.lists[list][index]
    }

    /// `Σ_{j<k} x_j − x_k` over the chosen indices, as an integer.
    pub fn signed_sum(&self, indices: &[usize]) -> i64 {
        let k = self.k();
        indices
            .iter()
            .enumerate()
            .map(|(j, &i)| {
                let v = self.lists[j][i].value as i64;
                if j + 1 == k {
                    -v
                } else {
                    v
                }
            })
            .sum()
    }

    pub fn satisfies(&self, relation: Relation, indices: &[usize]) -> bool {
        indices.len() == self.k()
            && indices.iter().zip(&self.lists).all(|(&i, l)| i < l.len())
            && relation.holds(self.signed_sum(indices), self.bits)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    /// Signed sum ≡ 0 mod 2^b.
    Modular,
    /// Signed sum = 0 as an integer. Needed when the values are later used
    /// modulo a group order much larger than `k·2^b`.
    Exact,
}

impl Relation {
    pub fn holds(self, sum: i64, bits: u32) -> bool {
        match self {
            Relation::Modular => sum.rem_euclid(1i64 << bits) == 0,
            Relation::Exact => sum == 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WagnerConfig {
    pub relation: Relation,
    /// Stop growing a merged list once it reaches this size.
    pub max_merged: Option<usize>,
}

impl Default for WagnerConfig {
    fn default() -> Self {
        WagnerConfig {
            relation: Relation::Modular,
            max_merged: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WagnerStats {
    /// Sizes of the merged lists at each level, level 1 first.
    pub merged_sizes: Vec<Vec<usize>>,
}

impl WagnerStats {
    pub fn work(&self) -> u64 {
        self.merged_sizes.iter().flatten().map(|&s| s as u64).sum()
    }
}

#[derive(Debug, Clone, Copy)]
struct Node {
    sum: i64,
    left: u32,
    right: u32,
}

/// Joins two lists of partial sums: keeps pairs whose sum satisfies `keep`,
/// bucketing by `key`. Left entries are scanned in order, right entries in
/// insertion order, so the output is deterministic.
fn join(
    left: &[Node],
    right: &[Node],
    key_left: impl Fn(i64) -> i64,
    key_right: impl Fn(i64) -> i64,
    cap: Option<usize>,
) -> Vec<Node> {
    let mut buckets: HashMap<i64, Vec<u32>> = HashMap::new();
    for (i, n) in right.iter().enumerate() {
        buckets.entry(key_right(n.sum)).or_default().push(i as u32);
    }
    let mut out = Vec::new();
    for (i, a) in left.iter().enumerate() {
        if let Some(matches) = buckets.get(&key_left(a.sum)) {
            for &j in matches {
                if cap.is_some_and(|c| out.len() >= c) {
                    return out;
                }
                out.push(Node {
                    sum: a.sum + right[j as usize].sum,
                    left: i as u32,
                    right: j,
                });
            }
        }
    }
    out
}

/// Runs the k-tree algorithm. Every returned tuple satisfies the relation.
pub fn wagner_solve<T>(inst: &KSumInstance<T>, config: WagnerConfig) -> Option<Vec<usize>> {
    wagner_solve_with_stats(inst, config).0
}

pub fn wagner_solve_with_stats<T>(
    inst: &KSumInstance<T>,
    config: WagnerConfig,
) -> (Option<Vec<usize>>, WagnerStats) {
    let k = inst.k();
    let levels = inst.levels() as usize;
    let bpl = inst.bits_per_level();
    let mut stats = WagnerStats::default();
    let mut tree: Vec<Vec<Vec<Node>>> = Vec::with_capacity(levels + 1);
    tree.push(
        inst.lists
            .iter()
            .enumerate()
            .map(|(j, l)| {
                l.iter()
                    .enumerate()
                    .map(|(i, e)| {
                        let v = e.value as i64;
                        Node {
                            sum: if j + 1 == k { -v } else { v },
                            left: i as u32,
                            right: 0,
                        }
                    })
                    .collect()
            })
            .collect(),
    );
    for level in 1..=levels {
        let prev = &tree[level - 1];
        let root = level == levels;
        let merged: Vec<Vec<Node>> = prev
            .chunks(2)
            .map(|pair| {
                if root {
                    match config.relation {
                        Relation::Exact => join(&pair[0], &pair[1], |a| -a, |b| b, Some(1)),
                        Relation::Modular => {
                            let m = 1i64 << inst.bits;
                            join(
                                &pair[0],
                                &pair[1],
                                |a| (-a).rem_euclid(m),
                                |b| b.rem_euclid(m),
                                Some(1),
                            )
                        }
                    }
                } else {
                    let m = 1i64 << (bpl * level as u32);
                    join(
                        &pair[0],
                        &pair[1],
                        |a| (-a).rem_euclid(m),
                        |b| b.rem_euclid(m),
                        config.max_merged,
                    )
                }
            })
            .collect();
        stats
            .merged_sizes
            .push(merged.iter().map(Vec::len).collect());
        let empty = merged.iter().any(Vec::is_empty);
        tree.push(merged);
        if empty {
            return (None, stats);
        }
    }
    // walk back from the root to one leaf index per list
    let mut positions = vec![0u32];
    for level in (1..=levels).rev() {
        positions = positions
            .iter()
            .enumerate()
            .flat_map(|(slot, &p)| {
                let n = tree[level][slot][p as usize];
                [n.left, n.right]
            })
            .collect();
    }
    let indices: Vec<usize> = positions
        .iter()
        .enumerate()
        .map(|(j, &p)| tree[0][j][p as usize].left as usize)
        .collect();
    assert!(
        inst.satisfies(config.relation, &indices),
        "solver produced a tuple that violates the relation"
    );
    (Some(indices), stats)
}
