//! Static augmented interval tree over closed time periods.
//!
//! Entries are kept sorted by period start in a flat `Vec`; the node for the
//! range `[lo, hi)` sits at `(lo + hi) / 2` and stores the maximum period end
//! of its range. Build is O(n log n), an overlap query is O(log n + k).

use crate::model::{TimePeriod, Worker};

#[derive(Debug, Clone)]
pub struct IntervalTree<T> {
    items: Vec<(TimePeriod, T)>,
    max_end: Vec<i64>,
}

impl<T> IntervalTree<T> {
    pub fn new(mut items: Vec<(TimePeriod, T)>) -> Self {
        items.sort_by_key(|(p, _)| (p.begin(), p.end()));
        let mut max_end = vec![i64::MIN; items.len()];
        augment(&items, &mut max_end, 0, items.len());
        Self { items, max_end }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// All entries whose period intersects `query` (closed intervals).
    pub fn query(&self, query: &TimePeriod) -> Vec<&T> {
        let mut out = Vec::new();
        self.visit(query, 0, self.items.len(), &mut |t| out.push(t));
        out
    }

    pub fn for_each_overlap<'a>(&'a self, query: &TimePeriod, mut f: impl FnMut(&'a T)) {
        self.visit(query, 0, self.items.len(), &mut f);
    }

    fn visit<'a>(&'a self, q: &TimePeriod, lo: usize, hi: usize, f: &mut impl FnMut(&'a T)) {
        if lo >= hi {
            return;
        }
        let mid = lo + (hi - lo) / 2;
        if self.max_end[mid] < q.begin() {
            return;
        }
        self.visit(q, lo, mid, f);
        let (period, item) = &self.items[mid];
        // everything right of mid starts no earlier than mid
        if period.begin() > q.end() {
            return;
        }
        if period.end() >= q.begin() {
            f(item);
        }
        self.visit(q, mid + 1, hi, f);
    }
}

fn augment<T>(items: &[(TimePeriod, T)], max_end: &mut [i64], lo: usize, hi: usize) -> i64 {
    if lo >= hi {
        return i64::MIN;
    }
    let mid = lo + (hi - lo) / 2;
    let left = augment(items, max_end, lo, mid);
    let right = augment(items, max_end, mid + 1, hi);
    let m = items[mid].0.end().max(left).max(right);
    max_end[mid] = m;
    m
}

/// Location of an availability: worker position in the worker slice and
/// slot in that worker's availability list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AvailabilityRef {
    pub worker: u32,
    pub slot: u32,
}

/// Interval tree over every availability of a worker set.
#[derive(Debug, Clone)]
pub struct TemporalIndex {
    tree: IntervalTree<AvailabilityRef>,
}

impl TemporalIndex {
    pub fn build(workers: &[Worker]) -> Self {
        let items = workers
            .iter()
            .enumerate()
            .flat_map(|(w, worker)| {
                worker
                    .availabilities()
                    .iter()
                    .enumerate()
                    .map(move |(s, a)| {
                        (
                            a.period,
                            AvailabilityRef {
                                worker: w as u32,
                                slot: s as u32,
                            },
                        )
                    })
            })
            .collect();
        Self {
            tree: IntervalTree::new(items),
        }
    }

    pub fn query(&self, period: &TimePeriod) -> Vec<AvailabilityRef> {
        self.tree.query(period).into_iter().copied().collect()
    }

    pub fn for_each_overlap(&self, period: &TimePeriod, mut f: impl FnMut(AvailabilityRef)) {
        self.tree.for_each_overlap(period, |r| f(*r));
    }

    pub fn len(&self) -> usize {
        self.tree.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tree.is_empty()
    }
}
