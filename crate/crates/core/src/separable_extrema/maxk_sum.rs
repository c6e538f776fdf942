//! Top-k combinations of row-wise sums.
//!
//! Rows are folded in one at a time. After each stage only the best `k`
//! partial combinations are kept, and each stage is a top-k search over the
//! monotone lattice `partial x row` driven by a max-heap.
//!
//! Order is "sum descending, then multi-index lexicographically ascending".
//! Because a prefix that loses to `k` other prefixes also loses every
//! extension, truncating to `k` per stage is exact under this order.
//! Partial combinations are stored as parent links with a per-stage
//! lexicographic rank, so a comparison costs O(1) regardless of depth.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};

/// A multi-index (0-based positions into each row) with its row-wise sum.
#[derive(Debug, Clone, PartialEq)]
pub struct Combination {
    pub indices: Vec<usize>,
    pub sum: f64,
}

/// The `k` multi-indices with largest row-wise sums, best first.
///
/// Rows need not be pre-sorted. Equal sums are ordered by multi-index.
pub fn maxk_sum(rows: &[Vec<f64>], k: usize) -> Vec<Combination> {
    maxk_sum_counted(rows, k).0
}

/// Like [`maxk_sum`], also returning the number of heap insertions.
pub fn maxk_sum_counted(rows: &[Vec<f64>], k: usize) -> (Vec<Combination>, usize) {
    let rows: Vec<Vec<Entry>> = rows.iter().map(|r| sorted_row(r, |_| false)).collect();
    let mut inserts = 0;
    let out = parity_top_k(&rows, k, &mut inserts)
        .map(|[even, _]| even)
        .unwrap_or_default();
    (out, inserts)
}

/// Top-`k` combinations restricted to one sign parity.
///
/// `negative[i][j]` marks entries whose sign is negative; a combination is
/// odd when it picks an odd number of them. Returns `[even, odd]` lists.
pub fn maxk_sum_by_parity(
    rows: &[Vec<f64>],
    negative: &[Vec<bool>],
    k: usize,
) -> [Vec<Combination>; 2] {
    let rows: Vec<Vec<Entry>> = rows
        .iter()
        .zip(negative)
        .map(|(r, n)| sorted_row(r, |j| n[j]))
        .collect();
    let mut inserts = 0;
    parity_top_k(&rows, k, &mut inserts).unwrap_or_default()
}

#[derive(Debug, Clone, Copy)]
struct Entry {
    value: f64,
    pos: usize,
    negative: bool,
}

fn sorted_row(row: &[f64], negative: impl Fn(usize) -> bool) -> Vec<Entry> {
    let mut out: Vec<Entry> = row
        .iter()
        .enumerate()
        .map(|(pos, &value)| Entry {
            value,
            pos,
            negative: negative(pos),
        })
        .collect();
    out.sort_by(|a, b| b.value.total_cmp(&a.value).then(a.pos.cmp(&b.pos)));
    out
}

/// A partial combination: its sum, the parent in the previous stage and
/// the position picked in this stage's row. `key` orders multi-indices
/// lexicographically: (parent's lexicographic rank, position).
#[derive(Debug, Clone, Copy)]
struct Node {
    sum: f64,
    parent: usize,
    pos: usize,
    key: (usize, usize),
}

fn better(a: &Node, b: &Node) -> Ordering {
    // Greater means ranked earlier.
    a.sum.total_cmp(&b.sum).then_with(|| b.key.cmp(&a.key))
}

struct Candidate {
    node: Node,
    a: usize,
    b: usize,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Candidate {}
impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        better(&self.node, &other.node)
    }
}

/// Best `k` of `left x right`; `left` holds ranked ids into `prev`.
fn top_k_pairs(
    left: &[usize],
    prev: &[Node],
    prev_lex: &[usize],
    right: &[Entry],
    k: usize,
    inserts: &mut usize,
) -> Vec<Node> {
    let mut out = Vec::new();
    if left.is_empty() || right.is_empty() || k == 0 {
        return out;
    }
    let make = |a: usize, b: usize| {
        let p = left[a];
        Candidate {
            node: Node {
                sum: prev[p].sum + right[b].value,
                parent: p,
                pos: right[b].pos,
                key: (prev_lex[p], right[b].pos),
            },
            a,
            b,
        }
    };
    let mut heap = BinaryHeap::new();
    let mut seen = HashSet::new();
    heap.push(make(0, 0));
    seen.insert((0, 0));
    *inserts += 1;
    while let Some(c) = heap.pop() {
        let (a, b) = (c.a, c.b);
        out.push(c.node);
        if out.len() == k {
            break;
        }
        if a + 1 < left.len() && seen.insert((a + 1, b)) {
            heap.push(make(a + 1, b));
            *inserts += 1;
        }
        if b + 1 < right.len() && seen.insert((a, b + 1)) {
            heap.push(make(a, b + 1));
            *inserts += 1;
        }
    }
    out
}

fn merge_ranked(x: Vec<Node>, y: Vec<Node>, k: usize) -> Vec<Node> {
    let mut out = Vec::with_capacity(k.min(x.len() + y.len()));
    let mut xi = x.into_iter().peekable();
    let mut yi = y.into_iter().peekable();
    while out.len() < k {
        let take_x = match (xi.peek(), yi.peek()) {
            (Some(a), Some(b)) => better(a, b) != Ordering::Less,
            (Some(_), None) => true,
            (None, Some(_)) => false,
            (None, None) => break,
        };
        out.push(if take_x { xi.next() } else { yi.next() }.unwrap());
    }
    out
}

/// Stage-wise top-k per parity class. `None` when there are no rows.
fn parity_top_k(rows: &[Vec<Entry>], k: usize, inserts: &mut usize) -> Option<[Vec<Combination>; 2]> {
    if rows.is_empty() || k == 0 {
        return None;
    }
    let root = Node {
        sum: 0.0,
        parent: 0,
        pos: 0,
        key: (0, 0),
    };
    // Each stage stores even nodes then odd nodes.
    let mut stages: Vec<Vec<Node>> = vec![vec![root]];
    let mut lex = vec![0usize];
    let mut even: Vec<usize> = vec![0];
    let mut odd: Vec<usize> = Vec::new();
    for row in rows {
        let pos: Vec<Entry> = row.iter().copied().filter(|e| !e.negative).collect();
        let neg: Vec<Entry> = row.iter().copied().filter(|e| e.negative).collect();
        let prev = stages.last().expect("root stage");
        let new_even = merge_ranked(
            top_k_pairs(&even, prev, &lex, &pos, k, inserts),
            top_k_pairs(&odd, prev, &lex, &neg, k, inserts),
            k,
        );
        let new_odd = merge_ranked(
            top_k_pairs(&even, prev, &lex, &neg, k, inserts),
            top_k_pairs(&odd, prev, &lex, &pos, k, inserts),
            k,
        );
        even = (0..new_even.len()).collect();
        odd = (new_even.len()..new_even.len() + new_odd.len()).collect();
        let nodes: Vec<Node> = new_even.into_iter().chain(new_odd).collect();
        let mut order: Vec<usize> = (0..nodes.len()).collect();
        order.sort_by_key(|&i| nodes[i].key);
        lex = vec![0; nodes.len()];
        for (r, i) in order.into_iter().enumerate() {
            lex[i] = r;
        }
        stages.push(nodes);
    }
    let d = rows.len();
    let build = |ids: &[usize]| -> Vec<Combination> {
        ids.iter()
            .map(|&id| {
                let mut indices = vec![0; d];
                let mut cur = id;
                for s in (1..=d).rev() {
                    let n = &stages[s][cur];
                    indices[s - 1] = n.pos;
                    cur = n.parent;
                }
                Combination {
                    indices,
                    sum: stages[d][id].sum,
                }
            })
            .collect()
    };
    Some([build(&even), build(&odd)])
}
