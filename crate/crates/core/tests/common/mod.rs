//! Test helpers: random cohorts and an O(n^2) enumeration of every ranking
//! metric, written without sweeps, trees or the library's curve types.
#![allow(dead_code)]

use fasm::cohort::{Subject, SurvivalDataset};
use fasm::pipeline::{biased_cohort_spec, PipelineConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn dataset(rows: &[(f64, bool, &str, Vec<f64>)], names: &[&str]) -> SurvivalDataset {
    SurvivalDataset::new(
        names.iter().map(|s| s.to_string()).collect(),
        rows.iter()
            .map(|(t, e, g, x)| Subject {
                covariates: x.clone(),
                time: *t,
                event: *e,
                group: g.to_string(),
            })
            .collect(),
    )
    .unwrap()
}

/// Random cohort with integer times (many ties), 2-3 groups, censoring
/// fraction up to `max_censor`, and coarse scores (tied scores too).
pub fn random_cohort(seed: u64, max_n: usize, max_censor: f64) -> (SurvivalDataset, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(12..=max_n);
    let k = rng.random_range(2..=3);
    let censor = rng.random_range(0.0..=max_censor);
    let labels = ["A", "B", "C"];
    let mut rows = Vec::with_capacity(n);
    let mut scores = Vec::with_capacity(n);
    for i in 0..n {
        // Every group appears at least twice.
        let g = if i < 2 * k {
            i % k
        } else {
            rng.random_range(0..k)
        };
        let t = rng.random_range(1..=15) as f64;
        let e = rng.random::<f64>() >= censor;
        rows.push((t, e, labels[g], vec![rng.random_range(-3.0..3.0)]));
        scores.push((rng.random_range(-20..20) as f64) / 4.0);
    }
    (dataset(&rows, &["x"]), scores)
}

/// Pipeline configuration on the built-in biased cohort.
pub fn biased_config(n: usize, seed: u64, n_target: usize) -> PipelineConfig {
    let mut config = PipelineConfig::default();
    config.data.simulate = Some(biased_cohort_spec(n, seed));
    config.sensitive = vec!["group".into()];
    config.rashomon.config.n_target = n_target;
    config.bootstrap.n_boot = 100;
    config.with_seed(seed)
}

/// Plain-loop reference implementation of the metrics.
pub struct Oracle {
    pub times: Vec<f64>,
    pub events: Vec<bool>,
    pub groups: Vec<usize>,
    pub n_groups: usize,
    pub scores: Vec<f64>,
    pub floor: f64,
    pub per_group_censoring: bool,
}

impl Oracle {
    pub fn new(
        ds: &SurvivalDataset,
        scores: &[f64],
        floor: f64,
        per_group_censoring: bool,
    ) -> Self {
        let levels = ds.group_levels();
        Self {
            times: ds.subjects().iter().map(|s| s.time).collect(),
            events: ds.subjects().iter().map(|s| s.event).collect(),
            groups: ds
                .subjects()
                .iter()
                .map(|s| levels.iter().position(|l| *l == s.group).unwrap())
                .collect(),
            n_groups: levels.len(),
            scores: scores.to_vec(),
            floor,
            per_group_censoring,
        }
    }

    fn n(&self) -> usize {
        self.times.len()
    }

    fn class(&self, i: usize) -> usize {
        if self.per_group_censoring {
            self.groups[i]
        } else {
            0
        }
    }

    fn classes(&self) -> usize {
        if self.per_group_censoring {
            self.n_groups
        } else {
            1
        }
    }

    /// Product-limit value over `members`, counting `flag`-marked exits,
    /// through time `t` (exclusive when `strict`).
    fn product_limit(
        &self,
        members: &[usize],
        flag: impl Fn(usize) -> bool,
        t: f64,
        strict: bool,
    ) -> f64 {
        let mut exit_times: Vec<f64> = members
            .iter()
            .filter(|&&j| flag(j))
            .map(|&j| self.times[j])
            .collect();
        exit_times.sort_by(f64::total_cmp);
        exit_times.dedup();
        let mut value = 1.0;
        for c in exit_times {
            if c > t || (strict && c == t) {
                break;
            }
            let at_risk = members.iter().filter(|&&j| self.times[j] >= c).count();
            let exits = members
                .iter()
                .filter(|&&j| flag(j) && self.times[j] == c)
                .count();
            value *= 1.0 - exits as f64 / at_risk as f64;
        }
        value
    }

    fn class_members(&self, class: usize) -> Vec<usize> {
        (0..self.n()).filter(|&j| self.class(j) == class).collect()
    }

    /// Censoring survival G of `class`, at `t` or just before it.
    pub fn g(&self, class: usize, t: f64, left: bool) -> f64 {
        self.product_limit(&self.class_members(class), |j| !self.events[j], t, left)
    }

    /// Event survival S over everyone.
    pub fn s(&self, t: f64) -> f64 {
        let all: Vec<usize> = (0..self.n()).collect();
        self.product_limit(&all, |j| self.events[j], t, false)
    }

    /// Anchors by time, then score, then group.
    fn anchor_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.n()).collect();
        order.sort_by(|&a, &b| {
            self.times[a]
                .total_cmp(&self.times[b])
                .then(self.scores[a].total_cmp(&self.scores[b]))
                .then(self.groups[a].cmp(&self.groups[b]))
        });
        order
    }

    fn in_group(&self, i: usize, g: Option<usize>) -> bool {
        g.is_none_or(|g| self.groups[i] == g)
    }

    pub fn concordance(&self, anchor: Option<usize>, comparator: Option<usize>) -> Option<f64> {
        let (mut num, mut den, mut pairs) = (0.0, 0.0, 0i64);
        for i in self.anchor_order() {
            if !(self.events[i] && self.in_group(i, anchor)) {
                continue;
            }
            let (mut below, mut tied, mut total) = (0i64, 0i64, 0i64);
            for j in 0..self.n() {
                if self.in_group(j, comparator) && self.times[j] > self.times[i] {
                    total += 1;
                    if self.scores[j] < self.scores[i] {
                        below += 1;
                    } else if self.scores[j] == self.scores[i] {
                        tied += 1;
                    }
                }
            }
            let g = self.g(self.class(i), self.times[i], true).max(self.floor);
            let w = 1.0 / (g * g);
            num += w * (below as f64 + 0.5 * tied as f64);
            den += w * total as f64;
            pairs += total;
        }
        (pairs > 0).then(|| num / den)
    }

    pub fn auc(
        &self,
        case_group: Option<usize>,
        control_group: Option<usize>,
        t: f64,
    ) -> Option<f64> {
        let cases: Vec<usize> = self
            .anchor_order()
            .into_iter()
            .filter(|&i| self.events[i] && self.times[i] <= t && self.in_group(i, case_group))
            .collect();
        let controls: Vec<usize> = (0..self.n())
            .filter(|&j| self.times[j] > t && self.in_group(j, control_group))
            .collect();
        if cases.is_empty() || controls.is_empty() {
            return None;
        }
        let (mut num, mut den) = (0.0, 0.0);
        for &i in &cases {
            let (mut conc, mut count) = (0.0, 0.0);
            for c in 0..self.classes() {
                let cw = 1.0 / self.g(c, t, false).max(self.floor);
                let (mut below, mut tied, mut total) = (0i64, 0i64, 0i64);
                for &j in controls.iter().filter(|&&j| self.class(j) == c) {
                    total += 1;
                    if self.scores[j] < self.scores[i] {
                        below += 1;
                    } else if self.scores[j] == self.scores[i] {
                        tied += 1;
                    }
                }
                conc += cw * (below as f64 + 0.5 * tied as f64);
                count += cw * total as f64;
            }
            let w = 1.0 / self.g(self.class(i), self.times[i], true).max(self.floor);
            num += w * conc;
            den += w * count;
        }
        Some(num / den)
    }

    pub fn masses(&self, t_start: f64, points: &[f64]) -> Vec<f64> {
        let mut prev = self.s(t_start);
        points
            .iter()
            .map(|&t| {
                let cur = self.s(t);
                let m = prev - cur;
                prev = cur;
                m
            })
            .collect()
    }

    /// Mass of an undefined point goes to the next defined point, else the
    /// previous one.
    pub fn integrate(values: &[Option<f64>], masses: &[f64]) -> Option<f64> {
        let mut weight = vec![0.0; values.len()];
        for k in 0..values.len() {
            if values[k].is_some() {
                weight[k] += masses[k];
            } else if masses[k] != 0.0 {
                let later = (k + 1..values.len()).find(|&j| values[j].is_some());
                let earlier = (0..k).rev().find(|&j| values[j].is_some());
                if let Some(j) = later.or(earlier) {
                    weight[j] += masses[k];
                }
            }
        }
        let (mut num, mut den) = (0.0, 0.0);
        for k in 0..values.len() {
            if let Some(v) = values[k] {
                num += weight[k] * v;
                den += weight[k];
            }
        }
        (den > 0.0).then(|| num / den)
    }

    pub fn series(&self, a: Option<usize>, b: Option<usize>, points: &[f64]) -> Vec<Option<f64>> {
        points.iter().map(|&t| self.auc(a, b, t)).collect()
    }
}

/// All metrics of one dataset, enumerated.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub c_index: Option<f64>,
    pub c_index_by_group: Vec<Option<f64>>,
    pub auc_t: Vec<Option<f64>>,
    pub i_auc: Option<f64>,
    pub i_auc_by_group: Vec<Option<f64>>,
    pub x_ci: Vec<(usize, usize, Option<f64>)>,
    pub x_auc: Vec<(usize, usize, Vec<Option<f64>>)>,
    pub delta_ci: Option<f64>,
    pub delta_iauc: Option<f64>,
    pub delta_xci: Option<f64>,
    pub delta_xauc: Vec<Option<f64>>,
    pub i_delta_xauc: Option<f64>,
}

fn max_gap(values: &[f64]) -> f64 {
    let mut best = 0.0f64;
    for a in 0..values.len() {
        for b in a + 1..values.len() {
            best = best.max((values[a] - values[b]).abs());
        }
    }
    best
}

impl OracleReport {
    /// Some metric the library treats as an error is undefined here.
    pub fn undefined(&self) -> bool {
        self.c_index.is_none()
            || self.i_auc.is_none()
            || self.c_index_by_group.iter().any(Option::is_none)
            || self.i_auc_by_group.iter().any(Option::is_none)
            || self.x_ci.iter().any(|x| x.2.is_none())
            || self.i_delta_xauc.is_none()
    }
}

pub fn oracle_report(o: &Oracle, t_start: f64, points: &[f64]) -> OracleReport {
    let masses = o.masses(t_start, points);
    let k = o.n_groups;
    let auc_t = o.series(None, None, points);
    let by_ci: Vec<Option<f64>> = (0..k).map(|g| o.concordance(Some(g), Some(g))).collect();
    let by_iauc: Vec<Option<f64>> = (0..k)
        .map(|g| Oracle::integrate(&o.series(Some(g), Some(g), points), &masses))
        .collect();
    let mut x_ci = Vec::new();
    let mut x_auc = Vec::new();
    for a in 0..k {
        for b in 0..k {
            if a != b {
                x_ci.push((a, b, o.concordance(Some(a), Some(b))));
                x_auc.push((a, b, o.series(Some(a), Some(b), points)));
            }
        }
    }
    let all = |v: &[Option<f64>]| v.iter().copied().collect::<Option<Vec<f64>>>();
    let find_ci = |a, b| x_ci.iter().find(|(x, y, _)| *x == a && *y == b).unwrap().2;
    let find_auc = |a, b| &x_auc.iter().find(|(x, y, _)| *x == a && *y == b).unwrap().2;
    let mut delta_xci = Some(0.0f64);
    let mut delta_xauc: Vec<Option<f64>> = vec![None; points.len()];
    for a in 0..k {
        for b in a + 1..k {
            delta_xci = match (delta_xci, find_ci(a, b), find_ci(b, a)) {
                (Some(d), Some(ab), Some(ba)) => Some(d.max((ab - ba).abs())),
                _ => None,
            };
            for t in 0..points.len() {
                if let (Some(ab), Some(ba)) = (find_auc(a, b)[t], find_auc(b, a)[t]) {
                    let gap = (ab - ba).abs();
                    delta_xauc[t] = Some(delta_xauc[t].map_or(gap, |s| s.max(gap)));
                }
            }
        }
    }
    OracleReport {
        c_index: o.concordance(None, None),
        i_auc: Oracle::integrate(&auc_t, &masses),
        auc_t,
        delta_ci: all(&by_ci).map(|v| max_gap(&v)),
        delta_iauc: all(&by_iauc).map(|v| max_gap(&v)),
        c_index_by_group: by_ci,
        i_auc_by_group: by_iauc,
        x_ci,
        x_auc,
        delta_xci,
        i_delta_xauc: Oracle::integrate(&delta_xauc, &masses),
        delta_xauc,
    }
}

/// Compares a library report to the oracle bit for bit. Returns a
/// description of the first mismatch.
pub fn compare(report: &fasm::rankmetrics::MetricReport, o: &OracleReport) -> Result<(), String> {
    fn same(what: &str, lib: f64, or: Option<f64>) -> Result<(), String> {
        match or {
            Some(v) if v.to_bits() == lib.to_bits() => Ok(()),
            _ => Err(format!("{what}: library {lib:?} vs oracle {or:?}")),
        }
    }
    fn same_series(what: &str, lib: &[Option<f64>], or: &[Option<f64>]) -> Result<(), String> {
        let eq = lib.len() == or.len()
            && lib
                .iter()
                .zip(or)
                .all(|(a, b)| a.map(f64::to_bits) == b.map(f64::to_bits));
        if eq {
            Ok(())
        } else {
            Err(format!("{what}: library {lib:?} vs oracle {or:?}"))
        }
    }
    same("c_index", report.c_index, o.c_index)?;
    same("i_auc", report.i_auc, o.i_auc)?;
    same_series("auc_t", &report.auc_t, &o.auc_t)?;
    for (g, label) in report.groups.iter().enumerate() {
        same(
            &format!("c_index[{label}]"),
            report.c_index_by_group[label],
            o.c_index_by_group[g],
        )?;
        same(
            &format!("i_auc[{label}]"),
            report.i_auc_by_group[label],
            o.i_auc_by_group[g],
        )?;
    }
    for p in &report.x_ci {
        let a = report.groups.iter().position(|g| *g == p.a).unwrap();
        let b = report.groups.iter().position(|g| *g == p.b).unwrap();
        let or = o
            .x_ci
            .iter()
            .find(|(x, y, _)| *x == a && *y == b)
            .unwrap()
            .2;
        same(&format!("x_ci[{}|{}]", p.a, p.b), p.value, or)?;
    }
    for p in &report.x_auc {
        let a = report.groups.iter().position(|g| *g == p.a).unwrap();
        let b = report.groups.iter().position(|g| *g == p.b).unwrap();
        let or = &o
            .x_auc
            .iter()
            .find(|(x, y, _)| *x == a && *y == b)
            .unwrap()
            .2;
        same_series(&format!("x_auc[{}|{}]", p.a, p.b), &p.values, or)?;
    }
    same("delta_ci", report.delta_ci, o.delta_ci)?;
    same("delta_iauc", report.delta_iauc, o.delta_iauc)?;
    same("delta_xci", report.delta_xci.unwrap(), o.delta_xci)?;
    same_series(
        "delta_xauc",
        report.delta_xauc.as_ref().unwrap(),
        &o.delta_xauc,
    )?;
    same("i_delta_xauc", report.i_delta_xauc.unwrap(), o.i_delta_xauc)?;
    Ok(())
}

/// Checks every generated dataset; returns (datasets compared, datasets
/// where both sides agreed some metric is undefined).
pub fn brute_force_sweep(count: u64) -> Result<(usize, usize), String> {
    use fasm::censorkm::DEFAULT_TRUNCATION_FLOOR;
    use fasm::rankmetrics::{evaluate, CensoringMode, MetricOptions, TimeGrid};
    let grid = TimeGrid::regular(1.0, 15.0, 1.0).unwrap();
    let (mut compared, mut undefined) = (0, 0);
    for seed in 0..count {
        let (ds, scores) = random_cohort(seed, 50, 0.5);
        let per_group = seed % 4 == 3;
        let options = MetricOptions {
            grid: grid.clone(),
            truncation_floor: DEFAULT_TRUNCATION_FLOOR,
            censoring: if per_group {
                CensoringMode::PerGroup
            } else {
                CensoringMode::Overall
            },
        };
        let oracle = Oracle::new(&ds, &scores, DEFAULT_TRUNCATION_FLOOR, per_group);
        let expected = oracle_report(&oracle, grid.t_start, &grid.points);
        match evaluate(&ds, &scores, &options) {
            Ok(report) => {
                compare(&report, &expected).map_err(|e| format!("seed {seed}: {e}"))?;
                compared += 1;
            }
            Err(e) => {
                if !expected.undefined() {
                    return Err(format!(
                        "seed {seed}: library failed ({e}) but oracle is defined"
                    ));
                }
                undefined += 1;
            }
        }
    }
    Ok((compared, undefined))
}

/// Log partial likelihood by direct summation over risk sets, Efron or
/// Breslow handling of tied event times.
pub fn cox_loglik(ds: &SurvivalDataset, beta: &[f64], efron: bool) -> f64 {
    let s = ds.subjects();
    let eta: Vec<f64> = s
        .iter()
        .map(|x| x.covariates.iter().zip(beta).map(|(a, b)| a * b).sum())
        .collect();
    let mut event_times: Vec<f64> = s.iter().filter(|x| x.event).map(|x| x.time).collect();
    event_times.sort_by(f64::total_cmp);
    event_times.dedup();
    let mut ll = 0.0;
    for t in event_times {
        let dead: Vec<usize> = (0..s.len())
            .filter(|&i| s[i].event && s[i].time == t)
            .collect();
        let risk: f64 = (0..s.len())
            .filter(|&j| s[j].time >= t)
            .map(|j| eta[j].exp())
            .sum();
        let tied: f64 = dead.iter().map(|&i| eta[i].exp()).sum();
        let d = dead.len() as f64;
        for (l, &i) in dead.iter().enumerate() {
            let denom = if efron {
                risk - l as f64 / d * tied
            } else {
                risk
            };
            ll += eta[i] - denom.ln();
        }
    }
    ll
}

/// Six subjects, one covariate, times 1..6, every subject an event.
pub fn six_subject_fixture(x: [f64; 6]) -> SurvivalDataset {
    let rows: Vec<(f64, bool, &str, Vec<f64>)> = (0..6)
        .map(|i| ((i + 1) as f64, true, "A", vec![x[i]]))
        .collect();
    dataset(&rows, &["x1"])
}

pub const SPEC_FIXTURE_X: [f64; 6] = [2.1, 1.7, 1.3, 0.8, 0.4, 0.1];

/// Argmax and maximum of `f` over [-5, 5] in steps of 1e-3.
pub fn grid_argmax(f: impl Fn(f64) -> f64) -> (f64, f64) {
    let mut best = (f64::NAN, f64::NEG_INFINITY);
    for k in 0..=10_000 {
        let b = -5.0 + k as f64 * 1e-3;
        let v = f(b);
        if v > best.1 {
            best = (b, v);
        }
    }
    best
}

/// Random fitting problem with ties and censoring.
pub fn random_cox_problem(seed: u64) -> (SurvivalDataset, Vec<String>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(10..=60);
    let p = rng.random_range(1..=3);
    let names: Vec<String> = (0..p).map(|k| format!("x{k}")).collect();
    let rows: Vec<(f64, bool, &str, Vec<f64>)> = (0..n)
        .map(|_| {
            (
                rng.random_range(1..=20) as f64,
                rng.random::<f64>() < 0.7,
                "A",
                (0..p).map(|_| rng.random_range(-2.0..2.0)).collect(),
            )
        })
        .collect();
    let mut rows = rows;
    rows[0].1 = true;
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let beta = (0..p).map(|_| rng.random_range(-1.0..1.0)).collect();
    (dataset(&rows, &refs), names, beta)
}

/// Worst central-difference relative error of gradient and Hessian, and the
/// largest Hessian eigenvalue.
pub fn derivative_check(
    ds: &SurvivalDataset,
    names: &[String],
    beta: &[f64],
    ties: fasm::coxfit::Ties,
) -> (f64, f64, f64) {
    use fasm::coxfit::CoxProblem;
    let problem = CoxProblem::new(ds, names, ties).unwrap();
    let obj = problem.evaluate(beta).unwrap();
    let p = beta.len();
    let h = 1e-5;
    let shifted = |k: usize, d: f64| {
        let mut b = beta.to_vec();
        b[k] += d;
        b
    };
    let mut fd_grad = vec![0.0; p];
    let mut fd_hess = nalgebra::DMatrix::<f64>::zeros(p, p);
    for k in 0..p {
        fd_grad[k] = (problem.value(&shifted(k, h)).unwrap()
            - problem.value(&shifted(k, -h)).unwrap())
            / (2.0 * h);
        let gp = problem.evaluate(&shifted(k, h)).unwrap().gradient;
        let gm = problem.evaluate(&shifted(k, -h)).unwrap().gradient;
        for l in 0..p {
            fd_hess[(l, k)] = (gp[l] - gm[l]) / (2.0 * h);
        }
    }
    let grad_err = (0..p)
        .map(|k| (fd_grad[k] - obj.gradient[k]).abs())
        .fold(0.0, f64::max)
        / obj.gradient.amax().max(1e-12);
    let hess_err = (&fd_hess - &obj.hessian).amax() / obj.hessian.amax().max(1e-12);
    let max_eig = nalgebra::SymmetricEigen::new(obj.hessian.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    (grad_err, hess_err, max_eig)
}

/// Train and validation cohorts from the biased generator, with the group
/// indicator as the one sensitive variable.
pub fn rashomon_inputs(
    n: usize,
    seed: u64,
    spec: impl Fn(&mut fasm::cohort::SimSpec),
) -> (
    SurvivalDataset,
    SurvivalDataset,
    fasm::rashomon::VariablePartition,
) {
    let mut train_spec = biased_cohort_spec(n, seed);
    spec(&mut train_spec);
    let mut val_spec = train_spec.clone();
    val_spec.seed = seed.wrapping_add(1_000_003);
    val_spec.n = n / 2;
    let train = fasm::cohort::simulate_cohort(&train_spec).unwrap();
    let val = fasm::cohort::simulate_cohort(&val_spec).unwrap();
    let partition =
        fasm::rashomon::VariablePartition::resolve(train.variable_names(), &["group".into()])
            .unwrap();
    (train, val, partition)
}

pub fn build_set(
    train: &SurvivalDataset,
    val: &SurvivalDataset,
    partition: &fasm::rashomon::VariablePartition,
    config: &fasm::rashomon::RashomonConfig,
) -> fasm::rashomon::RashomonSet {
    fasm::rashomon::build_integral_set(
        train,
        val,
        partition,
        config,
        &fasm::coxfit::FitConfig::default(),
        fasm::coxfit::Ties::Efron,
        &fasm::rashomon::LikelihoodRatioR2,
    )
    .unwrap()
}

/// Every member re-scored from scratch: matches its recorded performance and
/// clears its case threshold.
pub fn check_membership(
    set: &fasm::rashomon::RashomonSet,
    val: &SurvivalDataset,
) -> Result<usize, String> {
    let mut checked = 0;
    for case in &set.cases {
        for m in &case.members {
            let p = fasm::rashomon::performance_r2pl(
                val,
                &case.roster,
                &m.beta,
                fasm::coxfit::Ties::Efron,
            )
            .map_err(|e| e.to_string())?;
            if p != m.performance || p < case.threshold {
                return Err(format!(
                    "{:?} draw {:?}: {p} vs recorded {} threshold {}",
                    case.case, m.draw, m.performance, case.threshold
                ));
            }
            checked += 1;
        }
    }
    Ok(checked)
}

pub fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(f)
}
