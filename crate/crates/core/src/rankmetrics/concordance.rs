//! Pairwise concordance estimators under IPCW.
//!
//! Every estimator here reduces in the same way: for each anchor (case) in
//! canonical order, count comparators ranked below it (ties as halves), then
//! accumulate `weight * count` sequentially. The counts come from a sweep
//! over a Fenwick tree of score ranks. Canonical order sorts anchors by
//! (time, score, group), so the floating-point result depends neither on
//! how the counts were obtained nor on the row order of the dataset.

use crate::censorkm::Ipcw;
use crate::cohort::SurvivalDataset;
use crate::error::{Error, Result};

/// Prefix-count tree over score ranks.
#[derive(Debug, Clone)]
struct Fenwick {
    tree: Vec<i64>,
}

impl Fenwick {
    fn new(n: usize) -> Self {
        Self {
            tree: vec![0; n + 1],
        }
    }

    fn add(&mut self, rank: usize, delta: i64) {
        let mut i = rank + 1;
        while i < self.tree.len() {
            self.tree[i] += delta;
            i += i & i.wrapping_neg();
        }
    }

    /// Count of entries with rank < `rank`.
    fn below(&self, rank: usize) -> i64 {
        let mut i = rank;
        let mut s = 0;
        while i > 0 {
            s += self.tree[i];
            i -= i & i.wrapping_neg();
        }
        s
    }

    fn at(&self, rank: usize) -> i64 {
        self.below(rank + 1) - self.below(rank)
    }
}

/// Comparator tally for one anchor: pairs ranked below, tied, and total.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct Tally {
    below: i64,
    tied: i64,
    total: i64,
}

impl Tally {
    fn concordant(&self) -> f64 {
        self.below as f64 + 0.5 * self.tied as f64
    }
}

/// Times, events, groups and score ranks of one evaluation dataset.
#[derive(Debug, Clone)]
pub struct Prepared<'a> {
    pub(crate) times: Vec<f64>,
    pub(crate) events: Vec<bool>,
    pub(crate) groups: Vec<usize>,
    ranks: Vec<usize>,
    n_ranks: usize,
    /// Reduction order of anchors.
    order: Vec<usize>,
    pub(crate) ipcw: &'a Ipcw,
}

impl<'a> Prepared<'a> {
    pub fn new(dataset: &SurvivalDataset, scores: &[f64], ipcw: &'a Ipcw) -> Result<Self> {
        if scores.len() != dataset.len() {
            return Err(Error::Data(format!(
                "{} scores for {} subjects",
                scores.len(),
                dataset.len()
            )));
        }
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::Data("risk scores must be finite".into()));
        }
        let mut distinct = scores.to_vec();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup_by(|a, b| a == b);
        let ranks: Vec<usize> = scores
            .iter()
            .map(|&s| distinct.partition_point(|&v| v < s))
            .collect();
        let times = dataset.times();
        let groups = dataset.group_ids();
        let mut order: Vec<usize> = (0..times.len()).collect();
        order.sort_by(|&a, &b| {
            times[a]
                .total_cmp(&times[b])
                .then(ranks[a].cmp(&ranks[b]))
                .then(groups[a].cmp(&groups[b]))
        });
        Ok(Self {
            times,
            events: dataset.events(),
            groups,
            ranks,
            n_ranks: distinct.len(),
            order,
            ipcw,
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    fn in_group(&self, i: usize, group: Option<usize>) -> bool {
        group.is_none_or(|g| self.groups[i] == g)
    }

    /// Tallies of comparators with strictly later time for every anchor.
    fn later_tallies(&self, anchor: Option<usize>, comparator: Option<usize>) -> Vec<Tally> {
        let n = self.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| self.times[b].total_cmp(&self.times[a]));
        let mut tree = Fenwick::new(self.n_ranks);
        let mut inserted = 0i64;
        let mut tallies = vec![Tally::default(); n];
        let mut k = 0;
        while k < n {
            let t = self.times[order[k]];
            let mut end = k;
            while end < n && self.times[order[end]] == t {
                end += 1;
            }
            for &i in &order[k..end] {
                if self.events[i] && self.in_group(i, anchor) {
                    let r = self.ranks[i];
                    tallies[i] = Tally {
                        below: tree.below(r),
                        tied: tree.at(r),
                        total: inserted,
                    };
                }
            }
            for &j in &order[k..end] {
                if self.in_group(j, comparator) {
                    tree.add(self.ranks[j], 1);
                    inserted += 1;
                }
            }
            k = end;
        }
        tallies
    }

    /// IPCW concordance over pairs (i event in `anchor`, j in `comparator`,
    /// T_i < T_j).
    pub fn concordance(&self, anchor: Option<usize>, comparator: Option<usize>) -> Result<f64> {
        let tallies = self.later_tallies(anchor, comparator);
        let mut num = 0.0;
        let mut den = 0.0;
        let mut pairs = 0i64;
        for &i in &self.order {
            let tally = &tallies[i];
            if !(self.events[i] && self.in_group(i, anchor)) {
                continue;
            }
            let w = self.ipcw.pair_weight(i, self.times[i]);
            num += w * tally.concordant();
            den += w * tally.total as f64;
            pairs += tally.total;
        }
        if pairs == 0 {
            return Err(Error::MetricUndefined("no comparable pairs".into()));
        }
        Ok(num / den)
    }

    /// Cumulative/dynamic AUC at each horizon in `points` (ascending), cases
    /// drawn from `case_group` and controls from `control_group`. Horizons
    /// without cases or controls yield `None`.
    pub fn auc_series(
        &self,
        case_group: Option<usize>,
        control_group: Option<usize>,
        points: &[f64],
    ) -> Vec<Option<f64>> {
        debug_assert!(points.windows(2).all(|w| w[0] < w[1]));
        let n = self.len();
        let classes = self.ipcw.class_count();
        let mut trees = vec![Fenwick::new(self.n_ranks); classes];
        let mut control_order: Vec<usize> = (0..n)
            .filter(|&j| self.in_group(j, control_group))
            .collect();
        control_order.sort_by(|&a, &b| self.times[a].total_cmp(&self.times[b]));
        for &j in &control_order {
            trees[self.ipcw.class_of(j)].add(self.ranks[j], 1);
        }
        let mut remaining = control_order.len();
        let cases: Vec<usize> = self
            .order
            .iter()
            .copied()
            .filter(|&i| self.events[i] && self.in_group(i, case_group))
            .collect();

        let mut next = 0;
        let mut out = Vec::with_capacity(points.len());
        for &t in points {
            while next < control_order.len() && self.times[control_order[next]] <= t {
                let j = control_order[next];
                trees[self.ipcw.class_of(j)].add(self.ranks[j], -1);
                remaining -= 1;
                next += 1;
            }
            let class_weights: Vec<f64> = (0..classes)
                .map(|c| self.ipcw.class_control_weight(c, t))
                .collect();
            let mut num = 0.0;
            let mut den = 0.0;
            let mut any_case = false;
            for &i in &cases {
                if self.times[i] > t {
                    continue;
                }
                any_case = true;
                let r = self.ranks[i];
                let mut conc = 0.0;
                let mut count = 0.0;
                for (c, tree) in trees.iter().enumerate() {
                    let tally = Tally {
                        below: tree.below(r),
                        tied: tree.at(r),
                        total: 0,
                    };
                    conc += class_weights[c] * tally.concordant();
                    count += class_weights[c] * tree.below(self.n_ranks) as f64;
                }
                let w = self.ipcw.case_weight(i, self.times[i]);
                num += w * conc;
                den += w * count;
            }
            out.push((any_case && remaining > 0).then(|| num / den));
        }
        out
    }
}

fn group_index(dataset: &SurvivalDataset, label: &str) -> Result<usize> {
    dataset
        .group_levels()
        .iter()
        .position(|g| g == label)
        .ok_or_else(|| Error::MetricUndefined(format!("group `{label}` has no subjects")))
}

/// IPCW concordance index, optionally restricted to pairs within one group.
pub fn c_index(
    dataset: &SurvivalDataset,
    scores: &[f64],
    ipcw: &Ipcw,
    restrict_group: Option<&str>,
) -> Result<f64> {
    let g = restrict_group
        .map(|l| group_index(dataset, l))
        .transpose()?;
    Prepared::new(dataset, scores, ipcw)?.concordance(g, g)
}

/// Cross-group concordance: anchors (earlier events) in `a`, comparators in `b`.
pub fn x_ci(
    dataset: &SurvivalDataset,
    scores: &[f64],
    ipcw: &Ipcw,
    a: &str,
    b: &str,
) -> Result<f64> {
    let (a, b) = (group_index(dataset, a)?, group_index(dataset, b)?);
    Prepared::new(dataset, scores, ipcw)?.concordance(Some(a), Some(b))
}

/// Cumulative/dynamic AUC at horizon `t`; `restrict = (a, b)` draws cases
/// from `a` and controls from `b` (xAUC).
pub fn auc_t(
    dataset: &SurvivalDataset,
    scores: &[f64],
    ipcw: &Ipcw,
    t: f64,
    restrict: Option<(&str, &str)>,
) -> Result<f64> {
    let (a, b) = match restrict {
        Some((a, b)) => (
            Some(group_index(dataset, a)?),
            Some(group_index(dataset, b)?),
        ),
        None => (None, None),
    };
    Prepared::new(dataset, scores, ipcw)?.auc_series(a, b, &[t])[0]
        .ok_or_else(|| Error::MetricUndefined(format!("no cases or no controls at t = {t}")))
}
