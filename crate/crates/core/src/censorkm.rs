//! Kaplan–Meier curves for event survival and censoring survival, and the
//! inverse-probability-of-censoring weights built on them.

use serde::{Deserialize, Serialize};

use crate::cohort::SurvivalDataset;

/// Right-continuous step function. `values[k]` holds on `[times[k], times[k+1])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepFunction {
    times: Vec<f64>,
    values: Vec<f64>,
    #[serde(default = "one")]
    value_before_first: f64,
}

fn one() -> f64 {
    1.0
}

impl StepFunction {
    /// Panics if `times` is not strictly increasing or lengths differ.
    pub fn new(times: Vec<f64>, values: Vec<f64>, value_before_first: f64) -> Self {
        assert_eq!(times.len(), values.len(), "times and values must align");
        assert!(
            times.windows(2).all(|w| w[0] < w[1]),
            "jump times must be strictly increasing"
        );
        Self {
            times,
            values,
            value_before_first,
        }
    }

    pub fn constant(value: f64) -> Self {
        Self::new(Vec::new(), Vec::new(), value)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value_before_first(&self) -> f64 {
        self.value_before_first
    }

    /// Value of the last jump at or before `t`.
    pub fn eval(&self, t: f64) -> f64 {
        match self.times.partition_point(|&x| x <= t) {
            0 => self.value_before_first,
            k => self.values[k - 1],
        }
    }

    /// Left limit: value of the last jump strictly before `t`.
    pub fn eval_left(&self, t: f64) -> f64 {
        match self.times.partition_point(|&x| x < t) {
            0 => self.value_before_first,
            k => self.values[k - 1],
        }
    }
}

/// Product-limit estimate from raw observations. A subject with time equal
/// to an event time is in that time's risk set.
pub fn product_limit(times: &[f64], events: &[bool]) -> StepFunction {
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));
    let mut at_risk = times.len();
    let mut surv = 1.0;
    let mut jump_times = Vec::new();
    let mut jump_values = Vec::new();
    let mut k = 0;
    while k < order.len() {
        let t = times[order[k]];
        let mut deaths = 0usize;
        let mut leaving = 0usize;
        while k < order.len() && times[order[k]] == t {
            deaths += usize::from(events[order[k]]);
            leaving += 1;
            k += 1;
        }
        if deaths > 0 {
            surv *= 1.0 - deaths as f64 / at_risk as f64;
            jump_times.push(t);
            jump_values.push(surv);
        }
        at_risk -= leaving;
    }
    StepFunction::new(jump_times, jump_values, 1.0)
}

/// Event-survival curve S(t).
pub fn kaplan_meier(dataset: &SurvivalDataset) -> StepFunction {
    product_limit(&dataset.times(), &dataset.events())
}

/// Censoring-survival curve G(t) = P(C > t): Kaplan–Meier with roles swapped.
pub fn censoring_km(dataset: &SurvivalDataset) -> StepFunction {
    let inverted: Vec<bool> = dataset.subjects().iter().map(|s| !s.event).collect();
    product_limit(&dataset.times(), &inverted)
}

pub const DEFAULT_TRUNCATION_FLOOR: f64 = 0.05;

/// 1 / max(G(t-), floor)^2, the weight of every comparable pair anchored at
/// an event at `case_time`.
pub fn ipcw_pair_weight(g: &StepFunction, case_time: f64, floor: f64) -> f64 {
    let v = g.eval_left(case_time).max(floor);
    1.0 / (v * v)
}

/// Censoring weights for one evaluation dataset: either one G for everyone
/// or one G per group.
#[derive(Debug, Clone, PartialEq)]
pub struct Ipcw {
    curves: Vec<StepFunction>,
    /// Curve index for each subject.
    curve_of: Vec<usize>,
    pub truncation_floor: f64,
}

impl Ipcw {
    pub fn overall(dataset: &SurvivalDataset, truncation_floor: f64) -> Self {
        Self {
            curves: vec![censoring_km(dataset)],
            curve_of: vec![0; dataset.len()],
            truncation_floor,
        }
    }

    pub fn per_group(dataset: &SurvivalDataset, truncation_floor: f64) -> Self {
        let gids = dataset.group_ids();
        let curves = (0..dataset.group_levels().len())
            .map(|g| {
                let rows: Vec<usize> = (0..dataset.len()).filter(|&i| gids[i] == g).collect();
                censoring_km(&dataset.subset(&rows))
            })
            .collect();
        Self {
            curves,
            curve_of: gids,
            truncation_floor,
        }
    }

    /// Weights fixed at 1 (no censoring correction).
    pub fn unit(n: usize) -> Self {
        Self {
            curves: vec![StepFunction::constant(1.0)],
            curve_of: vec![0; n],
            truncation_floor: DEFAULT_TRUNCATION_FLOOR,
        }
    }

    pub fn curves(&self) -> &[StepFunction] {
        &self.curves
    }

    fn curve(&self, subject: usize) -> &StepFunction {
        &self.curves[self.curve_of[subject]]
    }

    fn clamp(&self, g: f64) -> f64 {
        g.max(self.truncation_floor)
    }

    /// Pair weight for concordance estimators anchored at `subject`'s event.
    pub fn pair_weight(&self, subject: usize, time: f64) -> f64 {
        ipcw_pair_weight(self.curve(subject), time, self.truncation_floor)
    }

    /// Case weight for time-dependent AUC: 1 / G(T_i-).
    pub fn case_weight(&self, subject: usize, time: f64) -> f64 {
        1.0 / self.clamp(self.curve(subject).eval_left(time))
    }

    /// Control weight for time-dependent AUC at horizon `t`: 1 / G(t).
    pub fn control_weight(&self, subject: usize, t: f64) -> f64 {
        self.class_control_weight(self.curve_of[subject], t)
    }

    /// Number of distinct censoring curves (1 overall, one per group otherwise).
    pub fn class_count(&self) -> usize {
        self.curves.len()
    }

    pub fn class_of(&self, subject: usize) -> usize {
        self.curve_of[subject]
    }

    /// Control weight 1 / G(t) for every subject sharing curve `class`.
    pub fn class_control_weight(&self, class: usize, t: f64) -> f64 {
        1.0 / self.clamp(self.curves[class].eval(t))
    }

    /// Per-subject weight for the marginal estimand at horizon `t`:
    /// events by `t` get 1/G(T-), survivors past `t` get 1/G(t), and
    /// subjects censored by `t` get exactly 0.
    pub fn subject_weights(&self, dataset: &SurvivalDataset, t: f64) -> Vec<f64> {
        dataset
            .subjects()
            .iter()
            .enumerate()
            .map(|(i, s)| {
                if s.time > t {
                    self.control_weight(i, t)
                } else if s.event {
                    self.case_weight(i, s.time)
                } else {
                    0.0
                }
            })
            .collect()
    }
}
