use nalgebra::{DMatrix, DVector};

use super::Ties;
use crate::cohort::SurvivalDataset;
use crate::error::{Error, Result};

/// Log partial likelihood with its exact first and second derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct Objective {
    pub value: f64,
    pub gradient: DVector<f64>,
    pub hessian: DMatrix<f64>,
}

/// A dataset projected onto one covariate roster and ordered for risk-set
/// sweeps. Rows are held by ascending time; sweeps walk them backwards so
/// each risk set {time >= t} is a running suffix.
#[derive(Debug, Clone)]
pub struct CoxProblem {
    p: usize,
    /// Row-major design, rows in ascending time order.
    x: Vec<f64>,
    time: Vec<f64>,
    event: Vec<bool>,
    /// `[start, end)` row ranges of equal time, ascending.
    blocks: Vec<(usize, usize)>,
    ties: Ties,
    null_value: f64,
}

impl CoxProblem {
    pub fn new(dataset: &SurvivalDataset, roster: &[String], ties: Ties) -> Result<Self> {
        let cols = dataset.column_indices(roster)?;
        if dataset.event_count() == 0 {
            return Err(Error::Objective("dataset has no events".into()));
        }
        let subjects = dataset.subjects();
        let mut order: Vec<usize> = (0..subjects.len()).collect();
        order.sort_by(|&a, &b| subjects[a].time.total_cmp(&subjects[b].time));
        let p = cols.len();
        let mut x = Vec::with_capacity(order.len() * p);
        let mut time = Vec::with_capacity(order.len());
        let mut event = Vec::with_capacity(order.len());
        for &i in &order {
            let s = &subjects[i];
            x.extend(cols.iter().map(|&c| s.covariates[c]));
            time.push(s.time);
            event.push(s.event);
        }
        let mut blocks = Vec::new();
        let mut start = 0;
        while start < time.len() {
            let mut end = start + 1;
            while end < time.len() && time[end] == time[start] {
                end += 1;
            }
            blocks.push((start, end));
            start = end;
        }
        let mut problem = Self {
            p,
            x,
            time,
            event,
            blocks,
            ties,
            null_value: 0.0,
        };
        problem.null_value = problem.value(&vec![0.0; p])?;
        Ok(problem)
    }

    pub fn n_subjects(&self) -> usize {
        self.time.len()
    }

    pub fn n_params(&self) -> usize {
        self.p
    }

    pub fn ties(&self) -> Ties {
        self.ties
    }

    /// Log partial likelihood at beta = 0.
    pub fn null_value(&self) -> f64 {
        self.null_value
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.p..(i + 1) * self.p]
    }

    fn check_len(&self, beta: &[f64]) -> Result<()> {
        if beta.len() != self.p {
            return Err(Error::Objective(format!(
                "beta has {} entries, roster has {}",
                beta.len(),
                self.p
            )));
        }
        Ok(())
    }

    /// Linear predictors shifted by their maximum; the partial likelihood is
    /// invariant to the shift.
    fn shifted_eta(&self, beta: &[f64]) -> Vec<f64> {
        let eta: Vec<f64> = (0..self.time.len())
            .map(|i| self.row(i).iter().zip(beta).map(|(a, b)| a * b).sum())
            .collect();
        let m = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        eta.into_iter().map(|e| e - m).collect()
    }

    fn tie_fractions(&self, d: usize) -> impl Iterator<Item = f64> {
        let efron = self.ties == Ties::Efron;
        (0..d).map(move |l| if efron { l as f64 / d as f64 } else { 0.0 })
    }

    /// Objective value only.
    pub fn value(&self, beta: &[f64]) -> Result<f64> {
        self.check_len(beta)?;
        let eta = self.shifted_eta(beta);
        let mut s0 = 0.0;
        let mut value = 0.0;
        for &(start, end) in self.blocks.iter().rev() {
            let mut s0_d = 0.0;
            let mut d = 0;
            for i in start..end {
                let w = eta[i].exp();
                s0 += w;
                if self.event[i] {
                    s0_d += w;
                    value += eta[i];
                    d += 1;
                }
            }
            for frac in self.tie_fractions(d) {
                value -= (s0 - frac * s0_d).ln();
            }
        }
        Ok(value)
    }

    /// Value, gradient and Hessian.
    pub fn evaluate(&self, beta: &[f64]) -> Result<Objective> {
        self.check_len(beta)?;
        let p = self.p;
        let eta = self.shifted_eta(beta);
        let mut value = 0.0;
        let mut grad = DVector::zeros(p);
        let mut hess = DMatrix::zeros(p, p);
        let mut s0 = 0.0;
        let mut s1 = DVector::zeros(p);
        let mut s2 = DMatrix::zeros(p, p);
        for &(start, end) in self.blocks.iter().rev() {
            let mut s0_d = 0.0;
            let mut s1_d = DVector::zeros(p);
            let mut s2_d = DMatrix::zeros(p, p);
            let mut d = 0;
            for i in start..end {
                let xi = DVector::from_column_slice(self.row(i));
                let w = eta[i].exp();
                let wx = &xi * w;
                let wxx = &wx * xi.transpose();
                s0 += w;
                s1 += &wx;
                s2 += &wxx;
                if self.event[i] {
                    value += eta[i];
                    grad += &xi;
                    s0_d += w;
                    s1_d += wx;
                    s2_d += wxx;
                    d += 1;
                }
            }
            for frac in self.tie_fractions(d) {
                let den = s0 - frac * s0_d;
                let num1 = &s1 - &s1_d * frac;
                let num2 = &s2 - &s2_d * frac;
                let mean = num1 / den;
                value -= den.ln();
                grad -= &mean;
                hess -= num2 / den - &mean * mean.transpose();
            }
        }
        Ok(Objective {
            value,
            gradient: grad,
            hessian: hess,
        })
    }

    /// Baseline cumulative hazard jumps `(time, increment)` at each distinct
    /// event time, using unshifted risk weights exp(beta'x).
    pub fn baseline_increments(&self, beta: &[f64]) -> Result<Vec<(f64, f64)>> {
        self.check_len(beta)?;
        let mut s0 = 0.0;
        let mut out = Vec::new();
        for &(start, end) in self.blocks.iter().rev() {
            let mut s0_d = 0.0;
            let mut d = 0;
            for i in start..end {
                let w: f64 = self
                    .row(i)
                    .iter()
                    .zip(beta)
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
                    .exp();
                s0 += w;
                if self.event[i] {
                    s0_d += w;
                    d += 1;
                }
            }
            if d > 0 {
                let inc: f64 = self.tie_fractions(d).map(|f| 1.0 / (s0 - f * s0_d)).sum();
                out.push((self.time[start], inc));
            }
        }
        out.reverse();
        Ok(out)
    }
}

/// Convenience wrapper: objective of `beta` over `roster` on `dataset`.
pub fn log_partial_likelihood(
    dataset: &SurvivalDataset,
    roster: &[String],
    beta: &[f64],
    ties: Ties,
) -> Result<Objective> {
    CoxProblem::new(dataset, roster, ties)?.evaluate(beta)
}
